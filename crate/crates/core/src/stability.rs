//! Inverse-source Lipschitz stability ratios, per mode and for full stacks.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{ModePropagator, ProfileFn, SourceSpec};
use crate::fourier_stack::{FourierStack, ModeField};
use crate::linalg::{gauss_legendre, graded_gauss_legendre, Rule};
use crate::mode_operator::{assemble_operator, eigendecompose, EigenSystem, Grid1D, ModeParams};
use crate::observability::ObservationRegion;

/// `R(t, x)` with `∂_t R` and a lower bound `ρ₀` at `T1`.
#[derive(Clone)]
pub struct SourceModel {
    pub r: ProfileFn,
    pub dt_r: ProfileFn,
    pub rho0: f64,
}

impl std::fmt::Debug for SourceModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SourceModel").field("rho0", &self.rho0).finish_non_exhaustive()
    }
}

impl SourceModel {
    /// Checks `R(T1, x) ≥ ρ₀ > 0` on the grid nodes.
    pub fn new(r: ProfileFn, dt_r: ProfileFn, rho0: f64, t1: f64, grid: Grid1D) -> Result<Self> {
        if !(rho0 > 0.0) {
            return Err(Error::domain("rho0 must be positive"));
        }
        if let Some(x) = grid.interior().into_iter().find(|&x| !(r(t1, x) >= rho0)) {
            return Err(Error::domain(format!("R(T1, {x}) = {} is below rho0 = {rho0}", r(t1, x))));
        }
        Ok(Self { r, dt_r, rho0 })
    }

    /// `R ≡ 1`.
    pub fn unit() -> Self {
        Self { r: Arc::new(|_, _| 1.0), dt_r: Arc::new(|_, _| 0.0), rho0: 1.0 }
    }

    fn source(&self, h: &ModeField) -> SourceSpec {
        SourceSpec::Separable { r: self.r.clone(), h: h.clone() }
    }

    /// `(1/ρ₀) (∫_{T0}^{T1} ‖∂_t R(t)‖²_∞ dt)^{1/2}` with the sup over `grid`.
    pub fn smallness(&self, t0: f64, t1: f64, grid: Grid1D) -> Result<f64> {
        let rule = gauss_legendre(32, t0, t1)?;
        let xs = grid.interior();
        let int = rule.integrate(|t| xs.iter().map(|&x| (self.dt_r)(t, x).abs()).fold(0.0, f64::max).powi(2));
        Ok(int.sqrt() / self.rho0)
    }
}

/// `η = ρ₀ / (2 √C10)`.
pub fn eta_threshold(rho0: f64, c10: f64) -> Result<f64> {
    if !(rho0 > 0.0 && c10 > 0.0) {
        return Err(Error::domain("rho0 and C10 must be positive"));
    }
    Ok(rho0 / (2.0 * c10.sqrt()))
}

/// Quadrature and propagation settings.
#[derive(Debug, Clone, Copy)]
pub struct StabilityOptions {
    /// Gauss–Legendre nodes per panel of the graded time rule.
    pub nodes_per_panel: usize,
    /// Panels `[T0 + Δ 2^{-k-1}, T0 + Δ 2^{-k}]`, `k < levels`, plus the first.
    pub levels: usize,
    pub time_samples: usize,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        Self { nodes_per_panel: 12, levels: 24, time_samples: 65 }
    }
}

fn window_rule(t0: f64, t1: f64, opts: &StabilityOptions) -> Result<Rule> {
    if !(t0 >= 0.0 && t1 > t0) {
        return Err(Error::domain(format!("need 0 <= T0 < T1, got ({t0}, {t1})")));
    }
    let span = t1 - t0;
    let mut edges: Vec<f64> = (0..=opts.levels).rev().map(|k| t0 + span * 0.5f64.powi(k as i32)).collect();
    edges.insert(0, t0);
    graded_gauss_legendre(opts.nodes_per_panel, &edges)
}

/// Per-mode pieces of the stability ratio.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModeStability {
    pub n: i64,
    pub p: f64,
    pub source_energy: f64,
    /// `∫_{T0}^{T1} ∫_a^b |∂_t g|²`.
    pub observation: f64,
    /// `‖A g(T1)‖²`.
    pub final_energy: f64,
    /// `None` when the denominator vanishes with `h ≠ 0`.
    pub ratio: Option<f64>,
}

impl ModeStability {
    fn new(params: ModeParams, source_energy: f64, observation: f64, final_energy: f64) -> Self {
        let den = observation + final_energy;
        let ratio = if source_energy == 0.0 { Some(0.0) } else if den > 0.0 { Some(source_energy / den) } else { None };
        Self { n: params.n, p: params.p, source_energy, observation, final_energy, ratio }
    }
}

fn mode_propagator(basis: Arc<EigenSystem>, model: &SourceModel, h: &ModeField, g0: Option<&ModeField>, t1: f64, opts: &StabilityOptions) -> Result<ModePropagator> {
    let zero = ModeField::zeros(h.grid);
    ModePropagator::new(basis, g0.unwrap_or(&zero), model.source(h), t1, opts.time_samples)
}

/// Stability ratio of one mode with source `R h` from `g0` (zero by default).
#[allow(clippy::too_many_arguments)]
pub fn mode_stability_ratio(
    params: ModeParams,
    model: &SourceModel,
    h: &ModeField,
    g0: Option<&ModeField>,
    (a, b): (f64, f64),
    t0: f64,
    t1: f64,
    opts: &StabilityOptions,
) -> Result<ModeStability> {
    let basis = Arc::new(eigendecompose(&assemble_operator(params, h.grid)?)?);
    mode_stability_in(basis, model, h, g0, (a, b), t0, t1, opts)
}

#[allow(clippy::too_many_arguments)]
fn mode_stability_in(
    basis: Arc<EigenSystem>,
    model: &SourceModel,
    h: &ModeField,
    g0: Option<&ModeField>,
    (a, b): (f64, f64),
    t0: f64,
    t1: f64,
    opts: &StabilityOptions,
) -> Result<ModeStability> {
    let rule = window_rule(t0, t1, opts)?;
    let params = basis.params;
    let gram = basis.weighted_gram(&h.grid.interval_weights(a, b)?);
    let prop = mode_propagator(basis, model, h, g0, t1, opts)?;
    let k = prop.basis().len();
    let mut observation = 0.0;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let d = prop.dt_coeffs_at(t)?;
        let mut q = 0.0;
        for i in 0..k {
            let row = &gram[i * k..(i + 1) * k];
            let s: Complex64 = row.iter().zip(&d).map(|(g, dj)| dj * *g).sum();
            q += (d[i].conj() * s).re;
        }
        observation += w * q;
    }
    let c = prop.coeffs_at(t1)?;
    let final_energy = c.iter().zip(&prop.basis().eigenvalues).map(|(c, l)| l * l * c.norm_sqr()).sum();
    Ok(ModeStability::new(params, h.norm_sq(), observation, final_energy))
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<ModeStability>,
    pub max_ratio: f64,
    pub argmax: (i64, f64),
    /// Max over the lower half of the `|n| + |p|` range.
    pub early_max: f64,
    /// `max_ratio ≤ 1.5 early_max`.
    pub bounded: bool,
    pub degenerate: usize,
}

/// Max of [`mode_stability_ratio`] over `sweep`, with source profile `h_of(n, p)`.
pub fn uniform_stability_sweep(
    (a, b): (f64, f64),
    t0: f64,
    t1: f64,
    model: &SourceModel,
    h_of: &(dyn Fn(ModeParams) -> ModeField + Sync),
    sweep: &[ModeParams],
    opts: &StabilityOptions,
) -> Result<SweepReport> {
    if sweep.is_empty() {
        return Err(Error::domain("empty stability sweep"));
    }
    let rows = sweep
        .par_iter()
        .map(|&pr| mode_stability_ratio(pr, model, &h_of(pr), None, (a, b), t0, t1, opts))
        .collect::<Result<Vec<_>>>()?;
    let size = |r: &ModeStability| r.n.unsigned_abs() as f64 + r.p.abs();
    let top = rows.iter().map(size).fold(0.0, f64::max);
    let mut max_ratio = f64::NEG_INFINITY;
    let mut argmax = (0, 0.0);
    let mut early_max = f64::NEG_INFINITY;
    for r in &rows {
        if let Some(q) = r.ratio {
            if q > max_ratio {
                max_ratio = q;
                argmax = (r.n, r.p);
            }
            if size(r) <= top / 2.0 {
                early_max = early_max.max(q);
            }
        }
    }
    Ok(SweepReport {
        degenerate: rows.iter().filter(|r| r.ratio.is_none()).count(),
        bounded: max_ratio <= 1.5 * early_max,
        rows,
        max_ratio,
        argmax,
        early_max,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub ratio: f64,
    pub source_energy: f64,
    pub observation: f64,
    pub final_energy: f64,
    pub smallness: f64,
    pub eta: f64,
    pub window_ok: bool,
    pub smallness_ok: bool,
    pub passed: bool,
    pub modes: Vec<ModeStability>,
}

/// Thresholds for the 3D pass flag.
#[derive(Debug, Clone, Copy)]
pub struct StabilityThresholds {
    /// Minimal window `T*`.
    pub t_star: f64,
    /// Observability-with-source constant used for `η`.
    pub c10: f64,
}

/// Full-stack ratio `‖h‖² / (∫∫_ω |∂_t g|² + ‖A g(T1)‖²)` on `(T0, T1)`.
pub fn stability_3d(
    region: &ObservationRegion,
    model: &SourceModel,
    h: &FourierStack,
    t0: f64,
    t1: f64,
    thresholds: StabilityThresholds,
    opts: &StabilityOptions,
) -> Result<StabilityReport> {
    let grid = h.grid;
    let rule = window_rule(t0, t1, opts)?;
    let weights = grid.interval_weights(region.a, region.b)?;
    let mut by_p: BTreeMap<i64, Vec<(i64, &ModeField)>> = BTreeMap::new();
    for ((n, p), (_, f)) in h.keys().zip(h.iter()) {
        by_p.entry(p).or_default().push((n, f));
    }
    let groups: Vec<(i64, Vec<(i64, &ModeField)>)> = by_p.into_iter().collect();
    let per_p = groups
        .par_iter()
        .map(|(p, members)| -> Result<(f64, Vec<ModeStability>)> {
            let props = members
                .iter()
                .map(|(n, f)| {
                    let basis = Arc::new(eigendecompose(&assemble_operator(ModeParams::torus(*n, *p), grid)?)?);
                    mode_propagator(basis, model, f, None, t1, opts)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut cross = 0.0;
            let mut diag = vec![0.0; members.len()];
            for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
                let fields = props
                    .iter()
                    .map(|pr| Ok(pr.basis().synthesize(&pr.dt_coeffs_at(t)?)))
                    .collect::<Result<Vec<_>>>()?;
                for (i, fi) in fields.iter().enumerate() {
                    for (j, fj) in fields.iter().enumerate() {
                        let ip: Complex64 = fi.iter().zip(fj).zip(&weights).map(|((u, v), &wx)| u.conj() * v * wx).sum();
                        cross += w * (region.gram_entry(members[i].0, members[j].0) * ip).re;
                        if i == j {
                            diag[i] += w * ip.re;
                        }
                    }
                }
            }
            let modes = members
                .iter()
                .zip(&props)
                .zip(&diag)
                .map(|(((n, f), pr), &obs)| {
                    let c = pr.coeffs_at(t1)?;
                    let fin = c.iter().zip(&pr.basis().eigenvalues).map(|(c, l)| l * l * c.norm_sqr()).sum();
                    Ok(ModeStability::new(ModeParams::torus(*n, *p), f.norm_sq(), obs, fin))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((cross, modes))
        })
        .collect::<Result<Vec<_>>>()?;
    let four_pi2 = 4.0 * PI * PI;
    let modes: Vec<ModeStability> = per_p.iter().flat_map(|(_, m)| m.iter().copied()).collect();
    let source_energy = four_pi2 * modes.iter().map(|m| m.source_energy).sum::<f64>();
    let final_energy = four_pi2 * modes.iter().map(|m| m.final_energy).sum::<f64>();
    let observation = 2.0 * PI * per_p.iter().map(|(c, _)| c).sum::<f64>();
    let den = observation + final_energy;
    let ratio = if source_energy == 0.0 {
        0.0
    } else if den > 0.0 {
        source_energy / den
    } else {
        return Err(Error::Numeric("vanishing denominator with nonzero source".into()));
    };
    let smallness = model.smallness(t0, t1, grid)?;
    let eta = eta_threshold(model.rho0, thresholds.c10)?;
    let window_ok = t1 - t0 > thresholds.t_star;
    let smallness_ok = smallness < eta;
    Ok(StabilityReport {
        ratio,
        source_energy,
        observation,
        final_energy,
        smallness,
        eta,
        window_ok,
        smallness_ok,
        passed: window_ok && smallness_ok && ratio.is_finite(),
        modes,
    })
}

/// `Σ‖h‖² / Σ(obs + final)` over per-mode results.
pub fn aggregate_ratio(modes: &[ModeStability]) -> f64 {
    let num: f64 = modes.iter().map(|m| m.source_energy).sum();
    let den: f64 = modes.iter().map(|m| m.observation + m.final_energy).sum();
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}
