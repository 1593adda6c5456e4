//! Batch driver behind the `heisenberg-obs` binary: one experiment per call,
//! schema-checked TOML in, CSV/JSON artifacts and a manifest out.

pub mod config;
pub mod output;

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};

use crate::carleman::{build_weight, carleman_check, generate_corpus, CheckOptions};
use crate::error::{Error, Result};
use crate::evolution::{check_duhamel_bound, evolve_mode, SourceSpec};
use crate::fourier_stack::{random_stack, ModeField};
use crate::lr_machinery::{build_schedule, k_star, run_constant_recursion, RecursionInputs};
use crate::mode_operator::{
    assemble_operator, eigendecompose_lowest, lambda_np_richardson, verify_dissipation_bounds, EigenCache, Grid1D, ModeParams,
};
use crate::observability::{fit_observability_envelope, obs_constant_truncated, spectral_inequality_scan, ObservationRegion, Truncation};
use crate::quasimode::{error_sweep, tmin_scan, unbounded_scan, CutoffPair, QuasiMode, ScanOptions, ScanReport};
use crate::stability::{
    mode_stability_ratio, stability_3d, uniform_stability_sweep, SourceModel, StabilityOptions, StabilityThresholds,
};

pub use config::{Experiment, COMMANDS};
pub use output::{sha256_hex, ArtifactWriter, Manifest};

/// Runs refuse estimates above this many bytes.
pub const MEMORY_LIMIT: f64 = 8.0 * 1024.0 * 1024.0 * 1024.0;
/// `validate` warns above this many floating-point operations.
pub const FLOP_WARNING: f64 = 1e11;
const FLOPS_PER_SECOND: f64 = 2e9;

/// Projected cost of an experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ResourceEstimate {
    /// Largest tridiagonal dimension.
    pub matrix_dim: usize,
    pub eigensolves: usize,
    pub memory_bytes: f64,
    pub flops: f64,
    pub projected_seconds: f64,
    pub warnings: Vec<String>,
}

fn full_eig(m: usize) -> f64 {
    6.0 * (m as f64).powi(3)
}

fn partial_eig(m: usize, k: usize) -> f64 {
    200.0 * (m as f64) * k as f64 + 4.0 * (m as f64) * (k as f64).powi(2)
}

pub fn estimate(exp: &Experiment) -> ResourceEstimate {
    let modes = |n: i64, p: i64| ((2 * n + 1) * (2 * p + 1)) as usize;
    let (dim, solves, memory, flops) = match exp {
        Experiment::Eig(c) => (c.m, 1, 8.0 * (c.m * c.k) as f64, partial_eig(c.m, c.k)),
        Experiment::Dissipation(c) => {
            let s = modes(c.n_max, c.p_max);
            (c.m, s, 64.0 * c.m as f64, s as f64 * partial_eig(c.m, 1))
        }
        Experiment::Evolve(c) => (c.m, 1, 8.0 * (c.m as f64).powi(2), full_eig(c.m) + 70.0 * (c.m as f64).powi(2)),
        Experiment::ObsConstant(c) => {
            let s = modes(c.n_max, c.p_max);
            let block = ((2 * c.n_max + 1) as usize * c.kx) as f64;
            (c.m, s, 8.0 * (s * c.m * c.kx) as f64 + 16.0 * block * block, s as f64 * partial_eig(c.m, c.kx) + (2 * c.p_max + 1) as f64 * 30.0 * block.powi(3))
        }
        Experiment::SpectralIneq(c) => {
            let n = c.n_list.iter().copied().max().unwrap_or(0) as f64;
            (0, 0, 16.0 * (2.0 * n + 1.0) * (4.0 * n + 40.0), c.n_list.len() as f64 * 40.0 * (2.0 * n + 1.0).powi(3))
        }
        Experiment::EnvelopeFit(c) => {
            let s = ((c.n_max + 1) * (c.p_max + 1)) as usize;
            (c.m, s, 8.0 * (s * c.m * c.kx) as f64, s as f64 * partial_eig(c.m, c.kx))
        }
        Experiment::LrSchedule(_) | Experiment::LrRecursion(_) => (0, 0, 1e4, 1e4),
        Experiment::Quasimode(c) => {
            let s = c.k_list.len();
            (c.m, s, 8.0 * (s * c.m * c.modes) as f64, s as f64 * (partial_eig(c.m, c.modes) + c.samples as f64 * (c.m * c.modes) as f64 * 4.0))
        }
        Experiment::TminScan(c) | Experiment::UnboundedScan(c) => {
            let nodes = if matches!(exp, Experiment::UnboundedScan(_)) { c.nodes.unwrap_or(8) } else { 1 };
            let top = *c.k_list.iter().max().unwrap_or(&1) as f64;
            let alpha = (1.0 - c.a) / 2.0;
            let p = if nodes > 1 { top / alpha + 1.0 } else { top };
            let m = c.m.unwrap_or_else(|| crate::quasimode::default_grid(p).map(|g| g.m()).unwrap_or(2000));
            let s = c.k_list.len() * nodes;
            (m, s, 8.0 * (m * c.modes) as f64 * rayon::current_num_threads() as f64 * 2.0, s as f64 * partial_eig(m, c.modes))
        }
        Experiment::Carleman(c) => (c.m, c.corpus_size, 8.0 * (c.m as f64).powi(2) * rayon::current_num_threads() as f64, c.corpus_size as f64 * (full_eig(c.m) + c.time_nodes as f64 * (c.m as f64).powi(2))),
        Experiment::StabilityMode(c) => {
            let s = c.sweep_max.map_or(1, |k| modes(k, k));
            (c.m, s, 8.0 * (c.m as f64).powi(2) * rayon::current_num_threads() as f64, s as f64 * (full_eig(c.m) + 400.0 * (c.m as f64).powi(2)))
        }
        Experiment::Stability3d(c) => {
            let s = modes(c.n_max, c.p_max);
            let per_p = (2 * c.n_max + 1) as f64;
            (c.m, s, 8.0 * (c.m as f64).powi(2) * s as f64, s as f64 * (full_eig(c.m) + 400.0 * (c.m as f64).powi(2)) + 300.0 * (2 * c.p_max + 1) as f64 * per_p * per_p * c.m as f64)
        }
    };
    let mut warnings = Vec::new();
    if flops > FLOP_WARNING {
        warnings.push(format!("projected eigendecomposition cost excessive: {flops:.2e} flops"));
    }
    if memory > MEMORY_LIMIT {
        warnings.push(format!("projected memory {:.2e} bytes exceeds the {:.2e} byte limit", memory, MEMORY_LIMIT));
    }
    ResourceEstimate { matrix_dim: dim, eigensolves: solves, memory_bytes: memory, flops, projected_seconds: flops / FLOPS_PER_SECOND, warnings }
}

/// Dry-run diagnostics; never fails.
#[derive(Debug, Clone, Serialize)]
pub struct Validation {
    pub ok: bool,
    pub command: Option<String>,
    pub diagnostics: Vec<String>,
    pub estimate: Option<ResourceEstimate>,
}

pub fn validate(command: Option<&str>, text: &str) -> Validation {
    match Experiment::parse(command, text) {
        Ok(exp) => {
            let est = estimate(&exp);
            Validation { ok: est.memory_bytes <= MEMORY_LIMIT, command: Some(exp.name().into()), diagnostics: est.warnings.clone(), estimate: Some(est) }
        }
        Err(e) => Validation { ok: false, command: command.map(str::to_string), diagnostics: vec![e.to_string()], estimate: None },
    }
}

/// Parses, checks resources, runs one experiment and writes its artifacts
/// plus `manifest.json` into `out`, falling back to the config's `out` key
/// and then to `./out`.
pub fn run(command: Option<&str>, config_path: &Path, out: Option<&Path>) -> Result<Manifest> {
    let text = std::fs::read_to_string(config_path)?;
    let exp = Experiment::parse(command, &text)?;
    let out = out.map(Path::to_path_buf).or_else(|| config::configured_out(&text)).unwrap_or_else(|| "out".into());
    let out = out.as_path();
    let est = estimate(&exp);
    if est.memory_bytes > MEMORY_LIMIT {
        return Err(Error::Resource(est.warnings.join("; ")));
    }
    let hash = sha256_hex(text.as_bytes());
    let mut w = ArtifactWriter::new(out, &hash)?;
    let summary = dispatch(&exp, &mut w)?;
    let mut manifest = Manifest {
        command: exp.name().into(),
        config_path: config_path.display().to_string(),
        config_sha256: hash,
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        dependencies: output::DEPENDENCIES.to_vec(),
        seeds: exp.seeds(),
        threads: rayon::current_num_threads(),
        outputs: w.written().to_vec(),
        summary,
    };
    manifest.outputs.push("manifest.json".into());
    let value = serde_json::to_value(&manifest).map_err(|e| Error::Numeric(e.to_string()))?;
    w.raw_json("manifest.json", &value)?;
    Ok(manifest)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::Numeric(e.to_string()))
}

fn model_of(model: config::ModelConfig, t1: f64, grid: Grid1D) -> Result<SourceModel> {
    match model {
        config::ModelConfig::Unit => Ok(SourceModel::unit()),
        config::ModelConfig::Linear { slope } => SourceModel::new(
            Arc::new(move |t, _| 1.0 + slope * (t - t1)),
            Arc::new(move |_, _| slope),
            1.0,
            t1,
            grid,
        ),
    }
}

fn scan_summary(r: &ScanReport, w: &mut ArtifactWriter, stem: &str) -> Result<Value> {
    w.csv(&format!("{stem}.csv"), r.rows.iter())?;
    w.csv(&format!("{stem}_slopes.csv"), r.slopes.iter())?;
    let v = json!({
        "a": r.a,
        "k_list": r.k_list,
        "crossover": r.crossover,
        "theoretical_threshold": r.theoretical_threshold,
        "non_monotone": r.non_monotone,
        "epsilon": r.epsilon,
        "predicted_obs_slope": r.predicted_obs_slope,
        "max_projection_residual": r.max_projection_residual,
        "slopes": r.slopes,
    });
    w.json(&format!("{stem}.json"), &v)?;
    Ok(v)
}

fn dispatch(exp: &Experiment, w: &mut ArtifactWriter) -> Result<Value> {
    match exp {
        Experiment::Eig(c) => {
            let params = ModeParams::new(c.n, c.p)?;
            let grid = Grid1D::new(c.m)?;
            let op = assemble_operator(params, grid)?;
            let eig = eigendecompose_lowest(&op, c.k)?;
            let res = eig.residuals(&op);
            #[derive(Serialize)]
            struct Row {
                index: usize,
                lambda: f64,
                residual: f64,
            }
            w.csv("eig.csv", eig.eigenvalues.iter().zip(&res).enumerate().map(|(index, (&lambda, &residual))| Row { index, lambda, residual }))?;
            let rich = if c.richardson { Some(to_value(&lambda_np_richardson(params, grid)?)?) } else { None };
            let v = json!({ "n": c.n, "p": c.p, "m": c.m, "lambda_min": eig.lambda_min(), "richardson": rich });
            w.json("eig.json", &v)?;
            Ok(v)
        }
        Experiment::Dissipation(c) => {
            let r = verify_dissipation_bounds(c.n_max, c.p_max, Grid1D::new(c.m)?)?;
            w.csv("dissipation.csv", r.rows.iter())?;
            let v = json!({ "rows": r.rows.len(), "tolerance": r.tolerance, "violations": r.violations, "passed": r.passed() });
            w.json("dissipation.json", &v)?;
            Ok(v)
        }
        Experiment::Evolve(c) => {
            let params = ModeParams::new(c.n, c.p)?;
            let grid = Grid1D::new(c.m)?;
            let initial = c.initial.clone();
            let g0 = ModeField::from_fn(grid, |x| initial.eval(x));
            let source = match &c.source {
                Some(s) => {
                    let prof = s.profile.clone();
                    let (om, ph) = (s.omega, s.phase);
                    SourceSpec::TimeProfile { r: Arc::new(move |t| (om * t + ph).cos()), h: ModeField::from_fn(grid, |x| prof.eval(x)) }
                }
                None => SourceSpec::None,
            };
            let times: Vec<f64> = (0..c.outputs).map(|i| c.t * i as f64 / (c.outputs - 1) as f64).collect();
            let traj = evolve_mode(params, &g0, &source, c.t, &times)?;
            #[derive(Serialize)]
            struct Row {
                t: f64,
                x: f64,
                re: f64,
                im: f64,
            }
            let xs = grid.interior();
            w.csv(
                "evolve.csv",
                traj.times.iter().zip(&traj.states).flat_map(|(&t, s)| xs.iter().zip(&s.values).map(move |(&x, v)| Row { t, x, re: v.re, im: v.im })),
            )?;
            let duhamel = if source.is_none() { None } else { Some(to_value(&check_duhamel_bound(params, &g0, &source, 0.0, c.t)?)?) };
            let v = json!({ "times": traj.times, "norms": traj.norms(), "projection_residual": traj.projection_residual, "duhamel": duhamel });
            w.json("evolve.json", &v)?;
            Ok(v)
        }
        Experiment::ObsConstant(c) => {
            let region = ObservationRegion::new(c.a, c.b, config::arcs_or_full(&c.arcs))?;
            let r = obs_constant_truncated(&region, c.t, Truncation { n_max: c.n_max, p_max: c.p_max, m: c.m, kx: c.kx }, &EigenCache::new())?;
            let v = to_value(&r)?;
            w.json("obs_constant.json", &v)?;
            Ok(v)
        }
        Experiment::SpectralIneq(c) => {
            let (rows, fit) = spectral_inequality_scan(&config::arcs_or_full(&c.arcs), &c.n_list)?;
            w.csv("spectral_ineq.csv", rows.iter())?;
            let v = json!({ "slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared, "rows": rows });
            w.json("spectral_ineq.json", &v)?;
            Ok(v)
        }
        Experiment::EnvelopeFit(c) => {
            let sweep: Vec<(i64, i64)> = (0..=c.n_max).flat_map(|n| (0..=c.p_max).map(move |p| (n, p))).collect();
            let r = fit_observability_envelope(c.a, c.b, &c.times, &sweep, Grid1D::new(c.m)?, c.kx, &EigenCache::new())?;
            w.csv("envelope.csv", r.rows.iter())?;
            let v = json!({ "p_branch": r.p_branch, "n_branch": r.n_branch });
            w.json("envelope.json", &v)?;
            Ok(v)
        }
        Experiment::LrSchedule(c) => {
            let s = build_schedule(c.t, c.p, c.rho)?;
            let rows = s.table(c.j_max);
            w.csv("schedule.csv", rows.iter())?;
            let total = rows.last().map_or(0.0, |r| r.alpha);
            let v = json!({ "schedule": s, "alpha_limit": s.alpha_limit(), "alpha_last": total, "k_bracket": s.k_bracket() });
            w.json("schedule.json", &v)?;
            Ok(v)
        }
        Experiment::LrRecursion(c) => {
            let inputs = RecursionInputs { c8: c.c8, c9: c.c9, k_star: c.k_star.unwrap_or_else(|| k_star(c.rho)), t: c.t, p: c.p, rho: c.rho };
            let r = run_constant_recursion(inputs, c.j_max)?;
            w.csv("recursion.csv", r.rows.iter())?;
            let v = json!({
                "inputs": r.inputs,
                "log_sup_btilde": r.log_sup_btilde,
                "log_sup_a": r.log_sup_a,
                "log_sup_btilde_over_t": r.log_sup_btilde_over_t,
                "log_sup_a_over_t2": r.log_sup_a_over_t2,
                "a_nondecreasing": r.a_nondecreasing,
                "bounded": r.bounded,
            });
            w.json("recursion.json", &v)?;
            Ok(v)
        }
        Experiment::Quasimode(c) => {
            let sweep = error_sweep(c.a, &c.k_list, c.t, c.samples, c.m, c.modes, c.slack)?;
            w.csv("quasimode_errors.csv", sweep.rows.iter())?;
            let k = c.k_list[0] as f64;
            let alpha = (1.0 - c.a) / 2.0;
            let n = (alpha * k).floor() as i64;
            let qm = QuasiMode::new(n, k, CutoffPair::around(-(n as f64) / k, c.a)?)?;
            let coarse = qm.discrete_residual(c.t, Grid1D::new(c.m)?);
            let fine = qm.discrete_residual(c.t, Grid1D::new(2 * c.m)?);
            let v = json!({
                "fitted_c": sweep.fitted_c,
                "held_out_violations": sweep.held_out_violations,
                "duhamel_violations": sweep.duhamel_violations,
                "fitted_rate": sweep.fitted_rate,
                "predicted_rate": sweep.predicted_rate,
                "passed": sweep.passed(),
                "residual_refinement": { "k": k, "coarse": coarse, "fine": fine, "ratio": coarse / fine },
            });
            w.json("quasimode.json", &v)?;
            Ok(v)
        }
        Experiment::TminScan(c) => {
            let r = tmin_scan(c.a, &c.k_list, &c.horizons(), ScanOptions { m: c.m, modes: c.modes })?;
            scan_summary(&r, w, "tmin_scan")
        }
        Experiment::UnboundedScan(c) => {
            let r = unbounded_scan(c.a, &c.k_list, &c.horizons(), c.nodes.unwrap_or(8), ScanOptions { m: c.m, modes: c.modes })?;
            scan_summary(&r, w, "unbounded_scan")
        }
        Experiment::Carleman(c) => {
            let corpus = generate_corpus(c.corpus_size, c.corpus_seed, c.n_max, c.p_max, &c.t_values, Grid1D::new(c.m)?)?;
            let opts = CheckOptions { a: c.a, b: c.b, c2: c.c2, time_nodes: c.time_nodes, slack: c.slack, split_seed: c.split_seed, fit: c.fit, ..CheckOptions::default() };
            let r = carleman_check(&corpus, &opts)?;
            w.csv("carleman_elements.csv", r.rows.iter())?;
            #[derive(Serialize)]
            struct WeightRow {
                x: f64,
                beta: f64,
                beta_prime: f64,
                beta_second: f64,
            }
            let weight = build_weight(c.a, c.b)?;
            w.csv("carleman_weight.csv", weight.export(401).into_iter().map(|r| WeightRow { x: r[0], beta: r[1], beta_prime: r[2], beta_second: r[3] }))?;
            let v = json!({
                "c1": r.c1,
                "c2": r.c2,
                "split_seed": r.split_seed,
                "corpus_seed": c.corpus_seed,
                "violations": r.violations,
                "worst_element": r.worst_element,
                "certification": r.certification,
                "weight_attempts": r.weight_attempts,
                "passed": r.passed(),
            });
            w.json("carleman.json", &v)?;
            Ok(v)
        }
        Experiment::StabilityMode(c) => {
            let grid = Grid1D::new(c.m)?;
            let model = model_of(c.model, c.t1, grid)?;
            let prof = c.profile.clone();
            let h = ModeField::from_fn(grid, |x| prof.eval(x));
            let opts = StabilityOptions::default();
            let single = mode_stability_ratio(ModeParams::new(c.n, c.p)?, &model, &h, None, (c.a, c.b), c.t0, c.t1, &opts)?;
            let sweep = match c.sweep_max {
                Some(k) => {
                    let list: Vec<ModeParams> = (-k..=k).flat_map(|n| (-k..=k).map(move |p| ModeParams::torus(n, p))).collect();
                    let h_of = |_: ModeParams| h.clone();
                    let r = uniform_stability_sweep((c.a, c.b), c.t0, c.t1, &model, &h_of, &list, &opts)?;
                    w.csv("stability_sweep.csv", r.rows.iter())?;
                    Some(json!({ "max_ratio": r.max_ratio, "argmax": r.argmax, "early_max": r.early_max, "bounded": r.bounded, "degenerate": r.degenerate }))
                }
                None => None,
            };
            let v = json!({ "mode": single, "sweep": sweep });
            w.json("stability_mode.json", &v)?;
            Ok(v)
        }
        Experiment::Stability3d(c) => {
            let grid = Grid1D::new(c.m)?;
            let region = ObservationRegion::new(c.a, c.b, config::arcs_or_full(&c.arcs))?;
            let model = model_of(c.model, c.t1, grid)?;
            let stack = random_stack(c.n_max, c.p_max, grid, c.seed, true)?;
            let cache = EigenCache::new();
            let t_star = match c.t_star {
                Some(t) => t,
                None => {
                    let sweep: Vec<(i64, i64)> = (0..=4).flat_map(|n| (0..=4).map(move |p| (n, p))).collect();
                    let fit = fit_observability_envelope(c.a, c.b, &[0.5, 1.0, 2.0], &sweep, Grid1D::new(c.m.min(200))?, 12, &cache)?;
                    if !fit.p_branch.feasible {
                        return Err(Error::Numeric("envelope fit infeasible; set `t_star` explicitly".into()));
                    }
                    4.0 / fit.p_branch.c4
                }
            };
            let c10 = match c.c10 {
                Some(v) => v,
                None => {
                    let trunc = Truncation { n_max: c.n_max.min(4), p_max: c.p_max.min(4), m: c.m.min(200), kx: 12 };
                    obs_constant_truncated(&region, c.t1 - c.t0, trunc, &cache)?.value
                }
            };
            let r = stability_3d(&region, &model, &stack, c.t0, c.t1, StabilityThresholds { t_star, c10 }, &StabilityOptions::default())?;
            w.csv("stability_3d_modes.csv", r.modes.iter())?;
            let v = json!({
                "ratio": r.ratio,
                "source_energy": r.source_energy,
                "observation": r.observation,
                "final_energy": r.final_energy,
                "smallness": r.smallness,
                "eta": r.eta,
                "t_star": t_star,
                "c10": c10,
                "window_ok": r.window_ok,
                "smallness_ok": r.smallness_ok,
                "passed": r.passed,
                "seed": c.seed,
            });
            w.json("stability_3d.json", &v)?;
            Ok(v)
        }
    }
}
