//! Gaussian quasi-modes concentrated at `x = -n/p`, their error
//! certificates and the minimal-time scan built on them.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{ModePropagator, SourceSpec};
use crate::fourier_stack::ModeField;
use crate::linalg::{fit_line, gauss_legendre, LineFit};
use crate::mode_operator::{assemble_operator, eigendecompose_lowest, EigenSystem, Grid1D, ModeParams};

/// Exponents below `-700` are flushed to zero.
const EXP_FLOOR: f64 = -700.0;

fn exp_flushed(x: f64) -> f64 {
    if x < EXP_FLOOR {
        0.0
    } else {
        x.exp()
    }
}

/// `G(x) = π^{-1/4} e^{-x²/2}`, the normalised ground state of `-d² + x²`.
pub fn gaussian_g(x: f64) -> f64 {
    PI.powf(-0.25) * exp_flushed(-0.5 * x * x)
}

/// `(G, G', G'')` at `x`.
pub fn gaussian_g_derivs(x: f64) -> (f64, f64, f64) {
    let g = gaussian_g(x);
    (g, -x * g, (x * x - 1.0) * g)
}

/// `e^{-1/s}` for `s > 0` with its first two derivatives.
fn mollifier(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let f = exp_flushed(-1.0 / s);
    let s2 = s * s;
    (f, f / s2, f * (1.0 / (s2 * s2) - 2.0 / (s2 * s)))
}

/// Smooth step: 0 for `s ≤ 0`, 1 for `s ≥ 1`, with derivatives.
pub fn ramp(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let (f, f1, f2) = mollifier(s);
    let (g, gm1, gm2) = mollifier(1.0 - s);
    let (g1, g2) = (-gm1, gm2);
    let d = f + g;
    let d1 = f1 + g1;
    let num = f1 * g - f * g1;
    let num1 = f2 * g - f * g2;
    (f / d, num / (d * d), (num1 * d - 2.0 * num * d1) / (d * d * d))
}

/// Boundary cutoffs: `θ₋` ramps from 1 at `x = -1` to 0 at `-1 + w₋`,
/// `θ₊` from 0 at `1 - w₊` to 1 at `x = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffPair {
    pub w_minus: f64,
    pub w_plus: f64,
}

impl CutoffPair {
    pub fn new(w_minus: f64, w_plus: f64) -> Result<Self> {
        for w in [w_minus, w_plus] {
            if !(w > 0.0 && w <= 2.0) {
                return Err(Error::domain(format!("cutoff width {w} outside (0, 2]")));
            }
        }
        Ok(Self { w_minus, w_plus })
    }

    /// Widths half-way to a Gaussian centre `c`, with `θ₋` vanishing on `(a, 1)`.
    pub fn around(center: f64, a: f64) -> Result<Self> {
        if !(a > -1.0 && a < 1.0) {
            return Err(Error::domain("observation edge a must lie in (-1, 1)"));
        }
        let w_minus = ((center + 1.0) / 2.0).clamp(0.05, 1.0).min(a + 1.0);
        let w_plus = ((1.0 - center) / 2.0).clamp(0.05, 1.0);
        Self::new(w_minus, w_plus)
    }

    /// `(θ, θ', θ'')` of `θ₊` (`sigma = 1`) or `θ₋` (`sigma = -1`).
    pub fn theta(&self, sigma: i8, x: f64) -> (f64, f64, f64) {
        if sigma > 0 {
            let w = self.w_plus;
            let (r, r1, r2) = ramp((x - (1.0 - w)) / w);
            (r, r1 / w, r2 / (w * w))
        } else {
            let w = self.w_minus;
            let (r, r1, r2) = ramp((-1.0 + w - x) / w);
            (r, -r1 / w, r2 / (w * w))
        }
    }

    /// Right edge of the support of `θ₋`.
    pub fn minus_support_edge(&self) -> f64 {
        -1.0 + self.w_minus
    }
}

/// Closed-form quasi-mode `K_{n,p}` and forcing `E_{n,p}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuasiMode {
    pub n: i64,
    pub p: f64,
    pub cutoffs: CutoffPair,
    /// `G(√p(σ + n/p))` for `σ = -1, +1`.
    pub boundary: [f64; 2],
}

impl QuasiMode {
    pub fn new(n: i64, p: f64, cutoffs: CutoffPair) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::domain(format!("quasi-modes need p > 0, got {p}")));
        }
        let boundary = [-1.0, 1.0].map(|s: f64| gaussian_g(p.sqrt() * (s + n as f64 / p)));
        Ok(Self { n, p, cutoffs, boundary })
    }

    pub fn params(&self) -> ModeParams {
        ModeParams { n: self.n, p: self.p }
    }

    pub fn center(&self) -> f64 {
        -(self.n as f64) / self.p
    }

    /// `K_{n,p}(t, x)`.
    pub fn k(&self, t: f64, x: f64) -> f64 {
        let sp = self.p.sqrt();
        let g = gaussian_g(sp * (x + self.n as f64 / self.p));
        let corr = self.boundary[0] * self.cutoffs.theta(-1, x).0 + self.boundary[1] * self.cutoffs.theta(1, x).0;
        self.p.powf(0.25) * (g - corr) * exp_flushed(-self.p * t)
    }

    /// `E_{n,p}(t, x) = p^{1/4} Σ_σ G(√p(σ+n/p)) (p + ∂²ₓ - (px+n)²) θ_σ(x) e^{-pt}`.
    pub fn e(&self, t: f64, x: f64) -> f64 {
        let v = self.params().potential(x);
        let mut acc = 0.0;
        for (idx, sigma) in [-1i8, 1].into_iter().enumerate() {
            let (th, _, th2) = self.cutoffs.theta(sigma, x);
            acc += self.boundary[idx] * (self.p * th + th2 - v * th);
        }
        self.p.powf(0.25) * acc * exp_flushed(-self.p * t)
    }

    pub fn sample_k(&self, t: f64, grid: Grid1D) -> ModeField {
        ModeField::from_fn(grid, |x| self.k(t, x)).with_time(t)
    }

    pub fn sample_e(&self, t: f64, grid: Grid1D) -> ModeField {
        ModeField::from_fn(grid, |x| self.e(t, x)).with_time(t)
    }

    /// Shape of the error bound: `(p² + n²) p^{-1/4} max_σ e^{-(p/2)(σ + n/p)²}`.
    pub fn error_shape(&self) -> f64 {
        let n = self.n as f64;
        let m = [-1.0, 1.0]
            .iter()
            .map(|s: &f64| -0.5 * self.p * (s + n / self.p).powi(2))
            .fold(f64::NEG_INFINITY, f64::max);
        (self.p * self.p + n * n) * self.p.powf(-0.25) * exp_flushed(m)
    }

    /// Max-norm of `(∂_t - Δ_h + (px+n)²)K - E` on the interior nodes, with the
    /// analytic `∂_t K = -pK` and the three-point Laplacian `Δ_h`.
    pub fn discrete_residual(&self, t: f64, grid: Grid1D) -> f64 {
        let h = grid.dx();
        let ks: Vec<f64> = (0..=grid.m()).map(|i| self.k(t, grid.node(i))).collect();
        (1..grid.m())
            .map(|i| {
                let x = grid.node(i);
                let lap = (ks[i - 1] - 2.0 * ks[i] + ks[i + 1]) / (h * h);
                let r = -self.p * ks[i] - lap + self.params().potential(x) * ks[i] - self.e(t, x);
                r.abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Grid for a quasi-mode of frequency `p`: `max(2000, ⌈60 p^{3/2}⌉)`, capped.
pub fn default_grid(p: f64) -> Result<Grid1D> {
    let m = (60.0 * p.abs().powf(1.5)).ceil().max(2000.0).min(MAX_QUASI_GRID as f64) as usize;
    Grid1D::new(m)
}

pub const MAX_QUASI_GRID: usize = 16384;
pub const DEFAULT_MODES: usize = 48;

/// A quasi-mode together with the true solution started from `K(0, ·)`.
pub struct QuasiModeRun {
    pub qm: QuasiMode,
    propagator: ModePropagator,
}

impl QuasiModeRun {
    pub fn grid(&self) -> Grid1D {
        self.propagator.basis().grid
    }

    pub fn basis(&self) -> &EigenSystem {
        self.propagator.basis()
    }

    /// Part of `K(0,·)` outside the retained eigenbasis.
    pub fn projection_residual(&self) -> f64 {
        self.propagator.projection_residual()
    }

    /// `G_num(t, ·)`.
    pub fn state(&self, t: f64) -> Result<ModeField> {
        self.propagator.state_at(t)
    }
}

/// Builds `K`, `E` and the homogeneous solution from `K(0,·)` in the lowest
/// `modes` eigenpairs on `grid`, up to horizon `t_final`.
pub fn build_quasimode(n: i64, p: f64, cutoffs: CutoffPair, t_final: f64, grid: Grid1D, modes: usize) -> Result<QuasiModeRun> {
    let qm = QuasiMode::new(n, p, cutoffs)?;
    let op = assemble_operator(qm.params(), grid)?;
    let basis = Arc::new(eigendecompose_lowest(&op, modes)?);
    let propagator = ModePropagator::new(basis, &qm.sample_k(0.0, grid), SourceSpec::None, t_final, 3)?;
    Ok(QuasiModeRun { qm, propagator })
}

/// `‖G_num(t) - K(t)‖`; exactly 0 at `t = 0`.
pub fn quasimode_error(run: &QuasiModeRun, t: f64) -> Result<f64> {
    let g = run.state(t)?;
    let k = run.qm.sample_k(t, run.grid());
    let diff: Vec<Complex64> = g.values.iter().zip(&k.values).map(|(a, b)| a - b).collect();
    Ok(run.grid().norm_sq(&diff).sqrt())
}

/// `(∫_0^t ‖E(s)‖² ds)^{1/2}`, the Duhamel scale of the error.
pub fn forcing_norm(qm: &QuasiMode, t: f64, grid: Grid1D) -> Result<f64> {
    if t == 0.0 {
        return Ok(0.0);
    }
    let e0 = qm.sample_e(0.0, grid).norm_sq();
    // ‖E(s)‖² = ‖E(0)‖² e^{-2ps}
    Ok((e0 * -(-2.0 * qm.p * t).exp_m1() / (2.0 * qm.p)).sqrt())
}

/// Mode energies of the solution from `K(0,·)` in log form, evaluable at any `T`.
pub struct EnergyProfile {
    lambdas: Vec<f64>,
    coeffs: Vec<f64>,
    /// Restricted Gram on `(a, 1)` (row-major).
    gram: Vec<f64>,
    pub projection_residual: f64,
    pub m: usize,
}

impl EnergyProfile {
    /// `(log ∫_0^T∫_a^1 |G|², log ‖G(T)‖²)`.
    pub fn log_energies(&self, t: f64) -> (f64, f64) {
        let k = self.lambdas.len();
        let l0 = self.lambdas[0];
        let fin: f64 = self.coeffs.iter().zip(&self.lambdas).map(|(c, l)| c * c * (-2.0 * (l - l0) * t).exp()).sum();
        let log_final = fin.ln() - 2.0 * l0 * t;
        let mut obs = 0.0;
        for i in 0..k {
            for j in 0..k {
                let s = self.lambdas[i] + self.lambdas[j];
                obs += self.coeffs[i] * self.coeffs[j] * self.gram[i * k + j] * crate::observability::exp_integral(s, t);
            }
        }
        (obs.ln(), log_final)
    }
}

/// Energy profile of the quasi-mode `(n, p)` observed on `(a, 1)`.
pub fn energy_profile(a: f64, n: i64, p: f64, grid: Grid1D, modes: usize) -> Result<EnergyProfile> {
    let qm = QuasiMode::new(n, p, CutoffPair::around(-(n as f64) / p, a)?)?;
    let op = assemble_operator(qm.params(), grid)?;
    let basis = eigendecompose_lowest(&op, modes)?;
    let k0 = qm.sample_k(0.0, grid);
    let c: Vec<f64> = basis.project(&k0.values).iter().map(|z| z.re).collect();
    let back = basis.synthesize(&c.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>());
    let diff: Vec<Complex64> = k0.values.iter().zip(&back).map(|(a, b)| a - b).collect();
    let weights = grid.interval_weights(a, 1.0)?;
    Ok(EnergyProfile {
        gram: basis.weighted_gram(&weights),
        lambdas: basis.eigenvalues,
        coeffs: c,
        projection_residual: grid.norm_sq(&diff).sqrt(),
        m: grid.m(),
    })
}

/// Quotient energies in log form.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuotientEnergies {
    pub log_obs_energy: f64,
    pub log_final_energy: f64,
    pub log_ratio: f64,
}

impl QuotientEnergies {
    fn from_logs(log_obs_energy: f64, log_final_energy: f64) -> Self {
        Self { log_obs_energy, log_final_energy, log_ratio: log_obs_energy - log_final_energy }
    }

    pub fn ratio(&self) -> f64 {
        self.log_ratio.exp()
    }
}

fn alpha_of(a: f64) -> Result<f64> {
    if !(a > -1.0 && a < 1.0) {
        return Err(Error::domain(format!("a must lie in (-1, 1), got {a}")));
    }
    Ok((1.0 - a) / 2.0)
}

/// Observation on `(a, 1)` over final energy for the mode `(n, p)`.
pub fn mode_quotient(a: f64, n: i64, p: f64, t: f64, grid: Grid1D, modes: usize) -> Result<QuotientEnergies> {
    let (lo, lf) = energy_profile(a, n, p, grid, modes)?.log_energies(t);
    Ok(QuotientEnergies::from_logs(lo, lf))
}

/// Counterexample quotient with `(n, p) = (⌊αk⌋, k)`, `α = (1-a)/2`.
pub fn cex_quotient(a: f64, t: f64, k: u32) -> Result<QuotientEnergies> {
    let alpha = alpha_of(a)?;
    let p = k as f64;
    mode_quotient(a, (alpha * p).floor() as i64, p, t, default_grid(p)?, DEFAULT_MODES)
}

/// `(1 + a)²/8`.
pub fn theoretical_threshold(a: f64) -> f64 {
    (1.0 + a).powi(2) / 8.0
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanRow {
    pub a: f64,
    pub t: f64,
    pub k: f64,
    pub log_obs_energy: f64,
    pub log_final_energy: f64,
    pub log_ratio: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeRow {
    pub t: f64,
    pub ratio_slope: f64,
    pub ratio_r_squared: f64,
    pub final_slope: f64,
    pub obs_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub a: f64,
    pub k_list: Vec<f64>,
    pub rows: Vec<ScanRow>,
    pub slopes: Vec<SlopeRow>,
    /// Interpolated sign change of the ratio slope (geometric in `T`).
    pub crossover: Option<f64>,
    pub theoretical_threshold: f64,
    /// More than one sign change across `T`.
    pub non_monotone: bool,
    /// Default `ε = 0.05 (1-α)²` and the rates it implies.
    pub epsilon: f64,
    pub predicted_obs_slope: f64,
    pub max_projection_residual: f64,
}

fn summarize(
    a: f64,
    k_list: Vec<f64>,
    t_list: &[f64],
    rate_scale: f64,
    max_projection_residual: f64,
    eval: impl Fn(usize, f64) -> (f64, f64),
) -> Result<ScanReport> {
    let alpha = alpha_of(a)?;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &t in t_list {
        let energies: Vec<QuotientEnergies> = (0..k_list.len())
            .map(|i| {
                let (lo, lf) = eval(i, t);
                QuotientEnergies::from_logs(lo, lf)
            })
            .collect();
        for (k, e) in k_list.iter().zip(&energies) {
            rows.push(ScanRow { a, t, k: *k, log_obs_energy: e.log_obs_energy, log_final_energy: e.log_final_energy, log_ratio: e.log_ratio });
        }
        let column = |f: fn(&QuotientEnergies) -> f64| energies.iter().map(f).collect::<Vec<_>>();
        let fr: LineFit = fit_line(&k_list, &column(|e| e.log_ratio))?;
        let ff = fit_line(&k_list, &column(|e| e.log_final_energy))?;
        let fo = fit_line(&k_list, &column(|e| e.log_obs_energy))?;
        slopes.push(SlopeRow { t, ratio_slope: fr.slope, ratio_r_squared: fr.r_squared, final_slope: ff.slope, obs_slope: fo.slope });
    }
    let mut crossings = Vec::new();
    for w in slopes.windows(2) {
        if (w[0].ratio_slope < 0.0) != (w[1].ratio_slope < 0.0) {
            let (l0, l1) = (w[0].t.ln(), w[1].t.ln());
            let frac = w[0].ratio_slope / (w[0].ratio_slope - w[1].ratio_slope);
            crossings.push((l0 + frac * (l1 - l0)).exp());
        }
    }
    let epsilon = 0.05 * (1.0 - alpha).powi(2);
    Ok(ScanReport {
        a,
        k_list,
        rows,
        slopes,
        crossover: crossings.first().copied(),
        theoretical_threshold: theoretical_threshold(a),
        non_monotone: crossings.len() > 1,
        epsilon,
        predicted_obs_slope: -((a + alpha).powi(2) - epsilon) * rate_scale,
        max_projection_residual,
    })
}

fn check_scan_lists(k_list: &[u32], t_list: &[f64]) -> Result<()> {
    if k_list.len() < 5 || k_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("k_list must be increasing with at least 5 entries"));
    }
    if t_list.is_empty() || t_list.windows(2).any(|w| w[1] <= w[0]) || t_list[0] <= 0.0 {
        return Err(Error::domain("T list must be positive and increasing"));
    }
    Ok(())
}

/// Options for the scans: grid rule and retained eigenpairs.
#[derive(Debug, Clone, Copy)]
pub struct ScanOptions {
    /// Fixed grid; `None` uses [`default_grid`] per frequency.
    pub m: Option<usize>,
    pub modes: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { m: None, modes: DEFAULT_MODES }
    }
}

impl ScanOptions {
    fn grid(&self, p: f64) -> Result<Grid1D> {
        match self.m {
            Some(m) => Grid1D::new(m),
            None => default_grid(p),
        }
    }
}

/// Slopes of `log ratio(k)` for every `T` and the crossover `T̂`.
pub fn tmin_scan(a: f64, k_list: &[u32], t_list: &[f64], opts: ScanOptions) -> Result<ScanReport> {
    check_scan_lists(k_list, t_list)?;
    let alpha = alpha_of(a)?;
    let profiles = k_list
        .par_iter()
        .map(|&k| {
            let p = k as f64;
            energy_profile(a, (alpha * p).floor() as i64, p, opts.grid(p)?, opts.modes)
        })
        .collect::<Result<Vec<_>>>()?;
    let resid = profiles.iter().map(|p| p.projection_residual).fold(0.0, f64::max);
    let kf = k_list.iter().map(|&k| k as f64).collect();
    summarize(a, kf, t_list, 1.0, resid, |i, t| profiles[i].log_energies(t))
}

/// Energies of `∫_{k/α}^{1+k/α} G_{k,p} e^{ipz} dp` by Gauss–Legendre in `p`.
pub fn unbounded_quasimode(a: f64, k: u32, t: f64, nodes: usize, opts: ScanOptions) -> Result<QuotientEnergies> {
    let profiles = unbounded_profiles(a, k, nodes, opts)?;
    let (lo, lf) = combine_profiles(&profiles, t);
    Ok(QuotientEnergies::from_logs(lo, lf))
}

fn unbounded_profiles(a: f64, k: u32, nodes: usize, opts: ScanOptions) -> Result<Vec<(f64, EnergyProfile)>> {
    if k == 0 || nodes == 0 {
        return Err(Error::domain("unbounded quasi-modes need k >= 1 and at least one node"));
    }
    let alpha = alpha_of(a)?;
    let lo = k as f64 / alpha;
    let rule = gauss_legendre(nodes, lo, lo + 1.0)?;
    rule.nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&p, &w)| Ok((w, energy_profile(a, k as i64, p, opts.grid(p)?, opts.modes)?)))
        .collect()
}

fn log_weighted_sum(terms: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let m = terms.clone().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    m + terms.map(|(w, l)| w * (l - m).exp()).sum::<f64>().ln()
}

fn combine_profiles(profiles: &[(f64, EnergyProfile)], t: f64) -> (f64, f64) {
    let logs: Vec<(f64, (f64, f64))> = profiles.iter().map(|(w, p)| (*w, p.log_energies(t))).collect();
    (
        log_weighted_sum(logs.iter().map(|(w, l)| (*w, l.0))),
        log_weighted_sum(logs.iter().map(|(w, l)| (*w, l.1))),
    )
}

/// Unbounded-`z` analogue of [`tmin_scan`]; frequencies are `p ≈ k/α`.
pub fn unbounded_scan(a: f64, k_list: &[u32], t_list: &[f64], nodes: usize, opts: ScanOptions) -> Result<ScanReport> {
    check_scan_lists(k_list, t_list)?;
    let alpha = alpha_of(a)?;
    let per_k = k_list.iter().map(|&k| unbounded_profiles(a, k, nodes, opts)).collect::<Result<Vec<_>>>()?;
    let resid = per_k.iter().flatten().map(|(_, p)| p.projection_residual).fold(0.0, f64::max);
    let kf = k_list.iter().map(|&k| k as f64).collect();
    summarize(a, kf, t_list, 1.0 / alpha, resid, |i, t| combine_profiles(&per_k[i], t))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorRow {
    pub k: u32,
    pub n: i64,
    pub p: f64,
    /// `max_t ‖G_num(t) - K(t)‖` over the sampled times.
    pub max_error: f64,
    pub shape: f64,
    /// Largest `error / (√t ‖E‖_{L²(0,t)})` over the sampled times.
    pub duhamel_ratio: f64,
    pub projection_residual: f64,
    pub training: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorSweep {
    pub a: f64,
    pub t: f64,
    pub rows: Vec<ErrorRow>,
    pub fitted_c: f64,
    pub held_out_violations: usize,
    pub duhamel_violations: usize,
    /// Slope of `log max_error` against `k`.
    pub fitted_rate: f64,
    /// `-((1-α)² - ε)/2`.
    pub predicted_rate: f64,
}

impl ErrorSweep {
    pub fn passed(&self) -> bool {
        self.held_out_violations == 0 && self.duhamel_violations == 0
    }
}

/// Error certificate across `(n, p) = (⌊αk⌋, k)`: the constant in front of
/// [`QuasiMode::error_shape`] is fitted on alternate entries (first included)
/// and checked on the rest at relative slack `slack`.
pub fn error_sweep(a: f64, k_list: &[u32], t: f64, samples: usize, m: usize, modes: usize, slack: f64) -> Result<ErrorSweep> {
    if k_list.len() < 2 || samples == 0 || !(t > 0.0) {
        return Err(Error::domain("error sweep needs two k values, T > 0 and one time sample"));
    }
    let alpha = alpha_of(a)?;
    let grid = Grid1D::new(m)?;
    let times: Vec<f64> = (1..=samples).map(|i| t * i as f64 / samples as f64).collect();
    let rows = k_list
        .par_iter()
        .enumerate()
        .map(|(idx, &k)| {
            let p = k as f64;
            let n = (alpha * p).floor() as i64;
            let run = build_quasimode(n, p, CutoffPair::around(-(n as f64) / p, a)?, t, grid, modes)?;
            let mut max_error: f64 = 0.0;
            let mut duhamel_ratio: f64 = 0.0;
            for &s in &times {
                let e = quasimode_error(&run, s)?;
                max_error = max_error.max(e);
                duhamel_ratio = duhamel_ratio.max(e / (s.sqrt() * forcing_norm(&run.qm, s, grid)?));
            }
            Ok(ErrorRow {
                k,
                n,
                p,
                max_error,
                shape: run.qm.error_shape(),
                duhamel_ratio,
                projection_residual: run.projection_residual(),
                training: idx % 2 == 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fitted_c = rows.iter().filter(|r| r.training).map(|r| r.max_error / r.shape).fold(0.0, f64::max);
    let held_out_violations = rows.iter().filter(|r| !r.training && r.max_error > fitted_c * r.shape * (1.0 + slack)).count();
    let duhamel_violations = rows.iter().filter(|r| r.duhamel_ratio > 1.0 + slack).count();
    let ks: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let logs: Vec<f64> = rows.iter().map(|r| r.max_error.ln()).collect();
    let epsilon = 0.05 * (1.0 - alpha).powi(2);
    Ok(ErrorSweep {
        a,
        t,
        fitted_c,
        held_out_violations,
        duhamel_violations,
        fitted_rate: fit_line(&ks, &logs)?.slope,
        predicted_rate: -((1.0 - alpha).powi(2) - epsilon) / 2.0,
        rows,
    })
}
