//! Observability constants: per-mode quotients, truncated 3D pencils,
//! the arc spectral inequality and the envelope fit for `κ_{n,p}(T)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{ModePropagator, SourceSpec};
use crate::fourier_stack::ModeField;
use crate::linalg::{fit_line, gauss_legendre, LineFit};
use crate::mode_operator::{assemble_operator, eigendecompose, EigenCache, EigenSystem, Grid1D, ModeParams};

/// Arc `[start, start + length)` of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YArc {
    pub start: f64,
    pub length: f64,
}

impl YArc {
    pub fn full() -> Self {
        Self { start: -PI, length: 2.0 * PI }
    }

    /// `∫_arc e^{i d y} dy`.
    pub fn fourier(&self, d: i64) -> Complex64 {
        if d == 0 {
            return Complex64::new(self.length, 0.0);
        }
        let df = d as f64;
        let e1 = Complex64::from_polar(1.0, df * (self.start + self.length));
        let e0 = Complex64::from_polar(1.0, df * self.start);
        (e1 - e0) / Complex64::new(0.0, df)
    }
}

/// `(a, b) × ω_y × 𝕋` with `ω_y` a finite union of disjoint arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRegion {
    pub a: f64,
    pub b: f64,
    pub arcs: Vec<YArc>,
}

impl ObservationRegion {
    pub fn new(a: f64, b: f64, arcs: Vec<YArc>) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a < -1.0 || b > 1.0 || a >= b {
            return Err(Error::domain(format!("invalid x-interval ({a}, {b})")));
        }
        validate_arcs(&arcs)?;
        Ok(Self { a, b, arcs })
    }

    /// `(a, b) × 𝕋 × 𝕋`.
    pub fn slice(a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, vec![YArc::full()])
    }

    pub fn is_slice(&self) -> bool {
        (self.arc_length() - 2.0 * PI).abs() < 1e-12
    }

    pub fn arc_length(&self) -> f64 {
        self.arcs.iter().map(|a| a.length).sum()
    }

    /// `G_{nm} = Σ_arcs ∫ e^{i(m-n)y} dy`, the form `Σ conj(b_n) b_m G_{nm}`.
    pub fn gram_entry(&self, n: i64, m: i64) -> Complex64 {
        self.arcs.iter().map(|arc| arc.fourier(m - n)).sum()
    }
}

pub fn validate_arcs(arcs: &[YArc]) -> Result<()> {
    if arcs.is_empty() {
        return Err(Error::domain("at least one y-arc is required"));
    }
    if arcs.iter().any(|a| !(a.start.is_finite() && a.length.is_finite()) || a.length <= 0.0) {
        return Err(Error::domain("arc lengths must be positive and finite"));
    }
    let total: f64 = arcs.iter().map(|a| a.length).sum();
    if total > 2.0 * PI * (1.0 + 1e-12) {
        return Err(Error::domain(format!("total arc length {total} exceeds 2π")));
    }
    let mut spans: Vec<(f64, f64)> = arcs
        .iter()
        .map(|a| {
            let s = (a.start + PI).rem_euclid(2.0 * PI);
            (s, s + a.length)
        })
        .collect();
    spans.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 - 1e-12 {
            return Err(Error::domain("y-arcs overlap"));
        }
    }
    if spans.len() > 1 {
        let (first, last) = (spans[0], spans[spans.len() - 1]);
        if last.1 - 2.0 * PI > first.0 + 1e-12 {
            return Err(Error::domain("y-arcs overlap across the periodic seam"));
        }
    }
    Ok(())
}

/// `‖g(T)‖² / ∫_0^T ∫_a^b |g|²` for the homogeneous evolution of `g0`.
pub fn mode_obs_quotient(params: ModeParams, g0: &ModeField, a: f64, b: f64, t_final: f64) -> Result<f64> {
    mode_obs_quotient_with(params, g0, a, b, t_final, 32)
}

pub fn mode_obs_quotient_with(params: ModeParams, g0: &ModeField, a: f64, b: f64, t_final: f64, time_nodes: usize) -> Result<f64> {
    if g0.norm_sq() == 0.0 {
        return Err(Error::domain("degenerate input: zero initial data"));
    }
    let basis = Arc::new(eigendecompose(&assemble_operator(params, g0.grid)?)?);
    let weights = g0.grid.interval_weights(a, b)?;
    let prop = ModePropagator::new(basis, g0, SourceSpec::None, t_final, 3)?;
    let rule = gauss_legendre(time_nodes, 0.0, t_final)?;
    let mut denom = 0.0;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let s = prop.state_at(t)?;
        denom += w * s.values.iter().zip(&weights).map(|(v, wx)| wx * v.norm_sqr()).sum::<f64>();
    }
    if denom <= 0.0 {
        return Err(Error::domain("degenerate input: zero observation"));
    }
    Ok(prop.state_at(t_final)?.norm_sq() / denom)
}

/// `(1 - e^{-sT}) / s`, the exact time integral of `e^{-s t}` over `[0, T]`.
pub fn exp_integral(s: f64, t: f64) -> f64 {
    let x = s * t;
    if x.abs() < 1e-8 {
        t * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / s
    }
}

/// Truncation parameters of a pencil computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub n_max: i64,
    pub p_max: i64,
    pub m: usize,
    /// Eigenfunctions retained per mode.
    pub kx: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObsConstantResult {
    /// Largest generalized eigenvalue of (final-norm form, observation form).
    pub value: f64,
    /// Smallest eigenvalue of the observation form.
    pub conditioning: f64,
    pub truncation: Truncation,
    pub jitter: f64,
    /// `z`-frequency block attaining the maximum.
    pub argmax_p: i64,
}

/// Generalized eigenvalue `max Q_N/Q_D` for diagonal `Q_N = diag(d)` and
/// Hermitian positive `Q_D`, as `σ_max(L^{-1} diag(√d))²` with `Q_D = L L*`.
/// Returns `(value, λ_min(Q_D), jitter)`.
pub fn pencil_max(d: &[f64], qd: &DMatrix<Complex64>) -> Result<(f64, f64, f64)> {
    let dim = d.len();
    let eig = SymmetricEigen::new(qd.clone());
    let lam_min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let trace: f64 = (0..dim).map(|i| qd[(i, i)].re).sum();
    let mut jitter = 0.0;
    let chol = match qd.clone().cholesky() {
        Some(c) if lam_min > 0.0 => c,
        _ => {
            jitter = 1e-12 * trace / dim as f64;
            let mut shifted = qd.clone();
            for i in 0..dim {
                shifted[(i, i)] += Complex64::new(jitter, 0.0);
            }
            shifted.cholesky().ok_or_else(|| {
                Error::Numeric(format!(
                    "observation form indefinite after jitter {jitter:.3e}: λ_min = {lam_min:.3e}, trace = {trace:.3e}"
                ))
            })?
        }
    };
    let rhs = DMatrix::from_fn(dim, dim, |i, j| if i == j { Complex64::new(d[i].sqrt(), 0.0) } else { Complex64::new(0.0, 0.0) });
    let w = chol.l().solve_lower_triangular(&rhs).ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let sv = w.svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let value = smax * smax;
    if !value.is_finite() {
        return Err(Error::NonFinite("observability constant".into()));
    }
    Ok((value, lam_min, jitter))
}

/// Restricted Gram `Σ_x w_x u_k(x) v_l(x)` between two eigenbases.
fn cross_gram(u: &EigenSystem, v: &EigenSystem, weights: &[f64]) -> Vec<f64> {
    let (ku, kv) = (u.len(), v.len());
    let mut g = vec![0.0; ku * kv];
    for i in 0..ku {
        let wi: Vec<f64> = u.eigenvectors[i].iter().zip(weights).map(|(a, w)| a * w).collect();
        for j in 0..kv {
            g[i * kv + j] = wi.iter().zip(&v.eigenvectors[j]).map(|(a, b)| a * b).sum();
        }
    }
    g
}

/// Observability constant on `⊕_{|n|≤N,|p|≤P}` span of the lowest `kx`
/// eigenfunctions of each `A_{n,p}`, with exact time integrals.
pub fn obs_constant_truncated(region: &ObservationRegion, t_final: f64, trunc: Truncation, cache: &EigenCache) -> Result<ObsConstantResult> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::domain("T must be positive"));
    }
    if trunc.n_max < 0 || trunc.p_max < 0 || trunc.kx == 0 {
        return Err(Error::domain("invalid truncation"));
    }
    let grid = Grid1D::new(trunc.m)?;
    let weights = grid.interval_weights(region.a, region.b)?;
    let blocks = (-trunc.p_max..=trunc.p_max)
        .into_par_iter()
        .map(|p| {
            let bases = (-trunc.n_max..=trunc.n_max)
                .map(|n| cache.get(ModeParams::torus(n, p), grid, trunc.kx))
                .collect::<Result<Vec<_>>>()?;
            let kx = bases[0].len();
            let dim = bases.len() * kx;
            let mut d = vec![0.0; dim];
            let mut qd = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
            for (bi, ui) in bases.iter().enumerate() {
                let n = -trunc.n_max + bi as i64;
                for k in 0..kx {
                    d[bi * kx + k] = (2.0 * PI).powi(2) * (-2.0 * ui.eigenvalues[k] * t_final).exp();
                }
                for (bj, vj) in bases.iter().enumerate().skip(bi) {
                    let m = -trunc.n_max + bj as i64;
                    let g = region.gram_entry(n, m) * (2.0 * PI);
                    if g.norm() == 0.0 {
                        continue;
                    }
                    let mg = cross_gram(ui, vj, &weights);
                    for k in 0..kx {
                        for l in 0..kx {
                            let s = ui.eigenvalues[k] + vj.eigenvalues[l];
                            let val = g * (mg[k * kx + l] * exp_integral(s, t_final));
                            qd[(bi * kx + k, bj * kx + l)] = val;
                            qd[(bj * kx + l, bi * kx + k)] = val.conj();
                        }
                    }
                }
            }
            let (value, cond, jitter) = pencil_max(&d, &qd)?;
            Ok((p, value, cond, jitter))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = ObsConstantResult { value: 0.0, conditioning: f64::INFINITY, truncation: trunc, jitter: 0.0, argmax_p: 0 };
    for (p, value, cond, jitter) in blocks {
        if value > best.value {
            best.value = value;
            best.argmax_p = p;
        }
        best.conditioning = best.conditioning.min(cond);
        best.jitter = best.jitter.max(jitter);
    }
    Ok(best)
}

/// Mode-level constant `κ_{n,p}(T)` on the x-slice `(a, b)`.
pub fn mode_kappa(params: ModeParams, a: f64, b: f64, t_final: f64, basis: &EigenSystem) -> Result<f64> {
    let weights = basis.grid.interval_weights(a, b)?;
    let kx = basis.len();
    let mg = cross_gram(basis, basis, &weights);
    let d: Vec<f64> = basis.eigenvalues.iter().map(|&l| (-2.0 * l * t_final).exp()).collect();
    let qd = DMatrix::from_fn(kx, kx, |i, j| {
        Complex64::new(mg[i * kx + j] * exp_integral(basis.eigenvalues[i] + basis.eigenvalues[j], t_final), 0.0)
    });
    let _ = params;
    Ok(pencil_max(&d, &qd)?.0)
}

/// `σ_min` of the `(2N+1)²` arc Gram and the implied constant `σ_min^{-1/2}`.
///
/// `σ_min = s_min(F)²` for the quadrature factor `F_{qk} = √w_q e^{i k y_q}`
/// (`G = F* F` exactly), so values far below machine epsilon stay resolved.
pub fn spectral_inequality_constant(arcs: &[YArc], n: usize) -> Result<(f64, f64)> {
    validate_arcs(arcs)?;
    let cols = 2 * n + 1;
    let per_arc = 2 * n + 40;
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for arc in arcs {
        let rule = gauss_legendre(per_arc, arc.start, arc.start + arc.length)?;
        rows.extend(rule.nodes.into_iter().zip(rule.weights));
    }
    let f = DMatrix::from_fn(rows.len(), cols, |q, k| {
        let (y, w) = rows[q];
        Complex64::from_polar(w.sqrt(), (k as f64 - n as f64) * y)
    });
    let sv = f.svd(false, false).singular_values;
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let sigma = smin * smin;
    Ok((sigma, 1.0 / sigma.sqrt()))
}

/// Closed-form arc Gram matrix (row `n`, column `m`, indices `-N..=N`).
pub fn arc_gram(arcs: &[YArc], n: usize) -> DMatrix<Complex64> {
    let dim = 2 * n + 1;
    DMatrix::from_fn(dim, dim, |i, j| arcs.iter().map(|a| a.fourier(j as i64 - i as i64)).sum())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralRow {
    pub n: usize,
    pub sigma_min: f64,
    pub implied_constant: f64,
    pub log_inv_sigma: f64,
}

/// `σ_min(N)` over `n_list` and the line fit of `log(1/σ_min)` against `N`.
pub fn spectral_inequality_scan(arcs: &[YArc], n_list: &[usize]) -> Result<(Vec<SpectralRow>, LineFit)> {
    let rows = n_list
        .iter()
        .map(|&n| {
            let (sigma_min, implied_constant) = spectral_inequality_constant(arcs, n)?;
            Ok(SpectralRow { n, sigma_min, implied_constant, log_inv_sigma: -sigma_min.ln() })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.log_inv_sigma).collect();
    Ok((rows, fit_line(&x, &y)?))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KappaRow {
    pub n: i64,
    pub p: i64,
    pub t: f64,
    pub kappa: f64,
    pub log_kappa: f64,
}

/// Fitted envelope `log κ ≤ c3 (X − c4 Y)` with the residuals of the
/// least-squares stage.
#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeFit {
    pub c3: f64,
    pub c4: f64,
    /// Coefficients `(u, v)` of the unconstrained-sign least-squares stage, `u, v ≥ 0`.
    pub ls_u: f64,
    pub ls_v: f64,
    pub max_ls_residual: f64,
    /// `true` when a covering envelope with `c3 > 0` and `c4 > 0` exists.
    pub feasible: bool,
    /// Modes above the least-squares envelope.
    pub violating: Vec<(i64, i64, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub rows: Vec<KappaRow>,
    /// `log κ ≤ c3(1 + 1/T + |p| − c4 min{|p|, p²} T)`.
    pub p_branch: EnvelopeFit,
    /// `log κ ≤ c3(1 + 1/T − c4 n² T)` on modes with `|n| > 2|p|`.
    pub n_branch: Option<EnvelopeFit>,
}

/// Nonnegative least squares for `y ≈ u X − v Y` by projected coordinate descent.
fn nn_two_term(x: &[f64], yv: &[f64], target: &[f64]) -> (f64, f64) {
    let (mut u, mut v) = (0.0f64, 0.0f64);
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = yv.iter().map(|a| a * a).sum();
    for _ in 0..10_000 {
        let (u_old, v_old) = (u, v);
        if sxx > 0.0 {
            let num: f64 = x.iter().zip(yv).zip(target).map(|((a, b), t)| a * (t + v * b)).sum();
            u = (num / sxx).max(0.0);
        }
        if syy > 0.0 {
            let num: f64 = x.iter().zip(yv).zip(target).map(|((a, b), t)| b * (u * a - t)).sum();
            v = (num / syy).max(0.0);
        }
        if (u - u_old).abs() <= 1e-15 * u.abs().max(1.0) && (v - v_old).abs() <= 1e-15 * v.abs().max(1.0) {
            break;
        }
    }
    (u, v)
}

fn envelope(modes: &[(i64, i64)], x: &[f64], yv: &[f64], target: &[f64]) -> EnvelopeFit {
    let (u, v) = nn_two_term(x, yv, target);
    let residuals: Vec<f64> = (0..x.len()).map(|i| target[i] - (u * x[i] - v * yv[i])).collect();
    let max_ls_residual = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let violating = modes
        .iter()
        .zip(&residuals)
        .filter(|(_, &r)| r > 0.0)
        .map(|(&(n, p), &r)| (n, p, r))
        .collect();
    let lifted = (0..x.len()).map(|i| (target[i] + v * yv[i]) / x[i]).fold(u, f64::max);
    let c3 = lifted;
    let c4 = if c3 > 0.0 { v / c3 } else { 0.0 };
    EnvelopeFit { c3, c4, ls_u: u, ls_v: v, max_ls_residual, feasible: c3 > 0.0 && c4 > 0.0 && c3.is_finite(), violating }
}

/// κ_{n,p}(T) over the sweep and the two-branch envelope fit.
pub fn fit_observability_envelope(
    a: f64,
    b: f64,
    times: &[f64],
    sweep: &[(i64, i64)],
    grid: Grid1D,
    kx: usize,
    cache: &EigenCache,
) -> Result<EnvelopeReport> {
    if sweep.is_empty() || times.is_empty() {
        return Err(Error::domain("envelope sweep must be nonempty"));
    }
    if times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::domain("T must be positive"));
    }
    let jobs: Vec<(i64, i64, f64)> = sweep.iter().flat_map(|&(n, p)| times.iter().map(move |&t| (n, p, t))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, p, t)| {
            let params = ModeParams::torus(n, p);
            let basis = cache.get(params, grid, kx)?;
            let kappa = mode_kappa(params, a, b, t, &basis)?;
            Ok(KappaRow { n, p, t, kappa, log_kappa: kappa.ln() })
        })
        .collect::<Result<Vec<_>>>()?;
    let modes: Vec<(i64, i64)> = rows.iter().map(|r| (r.n, r.p)).collect();
    let x: Vec<f64> = rows.iter().map(|r| 1.0 + 1.0 / r.t + r.p.abs() as f64).collect();
    let yv: Vec<f64> = rows.iter().map(|r| (r.p.abs() as f64).min((r.p * r.p) as f64) * r.t).collect();
    let target: Vec<f64> = rows.iter().map(|r| r.log_kappa).collect();
    let p_branch = envelope(&modes, &x, &yv, &target);
    let idx: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].n.abs() > 2 * rows[i].p.abs()).collect();
    let n_branch = (idx.len() >= 2).then(|| {
        let m: Vec<(i64, i64)> = idx.iter().map(|&i| modes[i]).collect();
        let xn: Vec<f64> = idx.iter().map(|&i| 1.0 + 1.0 / rows[i].t).collect();
        let yn: Vec<f64> = idx.iter().map(|&i| (rows[i].n * rows[i].n) as f64 * rows[i].t).collect();
        let tn: Vec<f64> = idx.iter().map(|&i| target[i]).collect();
        envelope(&m, &xn, &yn, &tn)
    });
    Ok(EnvelopeReport { rows, p_branch, n_branch })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_torus_gram_is_diagonal() {
        let (s, c) = spectral_inequality_constant(&[YArc::full()], 6).unwrap();
        assert!((s - 2.0 * PI).abs() < 1e-10);
        assert!((c - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn single_arc_constant_mode() {
        let arc = YArc { start: 0.3, length: 1.7 };
        let (s, _) = spectral_inequality_constant(&[arc], 0).unwrap();
        assert!((s - 1.7).abs() < 1e-12);
    }

    #[test]
    fn svd_route_matches_dense_gram() {
        let arcs = [YArc { start: -PI / 2.0, length: PI }];
        for n in 1..=4 {
            let g = arc_gram(&arcs, n);
            let eig = SymmetricEigen::new(g);
            let dense = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            let (s, _) = spectral_inequality_constant(&arcs, n).unwrap();
            assert!((s - dense).abs() < 1e-12, "N={n}: {s} vs {dense}");
        }
    }

    #[test]
    fn overlapping_arcs_rejected() {
        let arcs = [YArc { start: 0.0, length: 1.0 }, YArc { start: 0.5, length: 1.0 }];
        assert!(validate_arcs(&arcs).is_err());
        let arcs = [YArc { start: 3.0, length: 1.0 }, YArc { start: -3.2, length: 0.5 }];
        assert!(validate_arcs(&arcs).is_err());
    }

    #[test]
    fn quotient_on_full_interval_matches_scalar() {
        let g = Grid1D::new(60).unwrap();
        let params = ModeParams::torus(1, 1);
        let sys = eigendecompose(&assemble_operator(params, g).unwrap()).unwrap();
        for k in [0usize, 3] {
            let g0 = ModeField::from_real(g, &sys.eigenvectors[k]).unwrap();
            let lam = sys.eigenvalues[k];
            let t = 0.3;
            let want = 2.0 * lam * (-2.0 * lam * t).exp() / (1.0 - (-2.0 * lam * t).exp());
            let got = mode_obs_quotient(params, &g0, -1.0, 1.0, t).unwrap();
            assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
        }
        assert!(mode_obs_quotient(params, &ModeField::zeros(g), -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn pencil_matches_dense_oracle() {
        let g = Grid1D::new(40).unwrap();
        let params = ModeParams::torus(0, 0);
        let cache = EigenCache::new();
        let basis = cache.get(params, g, 4).unwrap();
        let t = 0.5;
        let kappa = mode_kappa(params, -0.4, 0.6, t, &basis).unwrap();
        // Dense oracle: largest eigenvalue of Q_D^{-1} Q_N via explicit inverse.
        let w = g.interval_weights(-0.4, 0.6).unwrap();
        let mg = basis.weighted_gram(&w);
        let k = basis.len();
        let qd = DMatrix::from_fn(k, k, |i, j| mg[i * k + j] * exp_integral(basis.eigenvalues[i] + basis.eigenvalues[j], t));
        let qn = DMatrix::from_fn(k, k, |i, j| if i == j { (-2.0 * basis.eigenvalues[i] * t).exp() } else { 0.0 });
        let m = qd.try_inverse().unwrap() * qn;
        let ev = m.complex_eigenvalues();
        let dense = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!((kappa - dense).abs() < 1e-8 * dense, "{kappa} vs {dense}");
        let trunc = Truncation { n_max: 0, p_max: 0, m: 40, kx: 4 };
        let region = ObservationRegion::slice(-0.4, 0.6).unwrap();
        let full = obs_constant_truncated(&region, t, trunc, &cache).unwrap();
        assert!((full.value - kappa).abs() < 1e-10 * kappa);
    }
}
