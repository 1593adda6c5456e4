//! Exact propagation of single modes and whole stacks under
//! `∂_t g + A_{n,p} g = h`, and the dissipation (Duhamel) inequalities.
//!
//! The homogeneous part is exact in the discrete eigenbasis. The Duhamel
//! integral uses Simpson panels of the source samples with the exponential
//! kernel integrated exactly against the quadratic interpolant, so stiff
//! modes (`λ Δs ≫ 1`) stay accurate.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier_stack::{FourierStack, ModeField};
use crate::linalg::composite_gauss_legendre;
use crate::mode_operator::{assemble_operator, eigendecompose, EigenSystem, Grid1D, ModeParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub type ProfileFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type FieldFn = Arc<dyn Fn(f64) -> ModeField + Send + Sync>;

/// Right-hand side of a single-mode problem.
#[derive(Clone, Default)]
pub enum SourceSpec {
    #[default]
    None,
    /// `R(t, x) h(x)`.
    Separable { r: ProfileFn, h: ModeField },
    /// `r(t) h(x)`, the x-independent special case of `Separable`.
    TimeProfile { r: TimeFn, h: ModeField },
    /// Arbitrary `t ↦ h(t, ·)`.
    General(FieldFn),
}

impl std::fmt::Debug for SourceSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SourceSpec::None => write!(f, "SourceSpec::None"),
            SourceSpec::Separable { .. } => write!(f, "SourceSpec::Separable"),
            SourceSpec::TimeProfile { .. } => write!(f, "SourceSpec::TimeProfile"),
            SourceSpec::General(_) => write!(f, "SourceSpec::General"),
        }
    }
}

impl SourceSpec {
    /// Constant-in-time source `h`.
    pub fn constant(h: ModeField) -> Self {
        SourceSpec::TimeProfile { r: Arc::new(|_| 1.0), h }
    }

    /// Separable source with `R` tabulated on a uniform time grid over
    /// `[0, t_end]` (rows) and the interior x-nodes (columns), linearly
    /// interpolated in time.
    pub fn tabulated(table: Vec<Vec<f64>>, t_end: f64, h: ModeField) -> Result<Self> {
        if table.len() < 2 || table.iter().any(|row| row.len() != h.values.len()) {
            return Err(Error::domain("tabulated R needs two or more rows matching the grid"));
        }
        if table.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated R".into()));
        }
        let xs = h.grid.interior();
        let rows = table.len();
        let r: ProfileFn = Arc::new(move |t, x| {
            let s = (t / t_end).clamp(0.0, 1.0) * (rows - 1) as f64;
            let i = (s.floor() as usize).min(rows - 2);
            let frac = s - i as f64;
            let j = xs
                .binary_search_by(|v| v.total_cmp(&x))
                .unwrap_or_else(|k| k.min(xs.len() - 1));
            table[i][j] * (1.0 - frac) + table[i + 1][j] * frac
        });
        Ok(SourceSpec::Separable { r, h })
    }

    pub fn is_none(&self) -> bool {
        matches!(self, SourceSpec::None)
    }

    /// Source field at time `t`, or `None` for the homogeneous problem.
    pub fn eval(&self, t: f64, grid: Grid1D) -> Result<Option<ModeField>> {
        let field = match self {
            SourceSpec::None => return Ok(None),
            SourceSpec::Separable { r, h } => {
                let values = grid.interior().iter().zip(&h.values).map(|(&x, v)| v * r(t, x)).collect();
                ModeField { grid, values, time_stamp: t }
            }
            SourceSpec::TimeProfile { r, h } => h.scaled(Complex64::new(r(t), 0.0)).with_time(t),
            SourceSpec::General(f) => f(t),
        };
        if field.grid != grid {
            return Err(Error::domain("source grid differs from the mode grid"));
        }
        if field.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite source value at t = {t}")));
        }
        Ok(Some(field))
    }

    /// Eigen-coefficients of the source at `t`.
    fn coeffs(&self, t: f64, basis: &EigenSystem) -> Result<Option<Vec<Complex64>>> {
        match self {
            SourceSpec::TimeProfile { r, h } => {
                let rt = r(t);
                if !rt.is_finite() {
                    return Err(Error::Numeric(format!("non-finite source value at t = {t}")));
                }
                Ok(Some(basis.project(&h.values).into_iter().map(|c| c * rt).collect()))
            }
            _ => Ok(self.eval(t, basis.grid)?.map(|f| basis.project(&f.values))),
        }
    }
}

/// Default number of source samples on `[0, T]`.
pub const DEFAULT_TIME_SAMPLES: usize = 65;

/// Moments `∫_0^ℓ v^k e^{-μ v} dv` for `k = 0, 1, 2`.
fn exp_moments(mu: f64, ell: f64) -> [f64; 3] {
    let x = mu * ell;
    if x < 2.0 {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = 1.0;
            let mut sum = 0.0;
            for j in 0..60 {
                let contrib = term / (k + j + 1) as f64;
                sum += contrib;
                if contrib.abs() < 1e-18 * sum.abs() {
                    break;
                }
                term *= -x / (j + 1) as f64;
            }
            *o = ell.powi(k as i32 + 1) * sum;
        }
        out
    } else {
        let e = (-x).exp();
        [
            (1.0 - e) / mu,
            (1.0 - e * (1.0 + x)) / (mu * mu),
            (2.0 - e * (2.0 + 2.0 * x + x * x)) / (mu * mu * mu),
        ]
    }
}

/// Weights `w_j` with `∫_{s_0}^{s_0+ℓh} e^{-λ(s_0+ℓh-s)} q(s) ds = Σ w_j q(s_0 + j h)`
/// for quadratics `q`, `0 ≤ ℓ ≤ 2`.
fn panel_weights(lambda: f64, h: f64, ell: f64) -> [f64; 3] {
    let m = exp_moments(lambda * h, ell);
    // Lagrange basis on u ∈ {0,1,2} written as A + B u + C u², then u = ℓ - v.
    let basis = [(1.0, -1.5, 0.5), (0.0, 2.0, -1.0), (0.0, -0.5, 0.5)];
    let mut w = [0.0; 3];
    for (j, &(a, b, c)) in basis.iter().enumerate() {
        let c0 = a + b * ell + c * ell * ell;
        let c1 = -b - 2.0 * c * ell;
        let c2 = c;
        w[j] = h * (c0 * m[0] + c1 * m[1] + c2 * m[2]);
    }
    w
}

/// Single-mode propagator in a fixed eigenbasis.
pub struct ModePropagator {
    basis: Arc<EigenSystem>,
    g0: Vec<Complex64>,
    c0: Vec<Complex64>,
    source: SourceSpec,
    t_final: f64,
    step: f64,
    /// Source coefficients at the sample instants (empty when homogeneous).
    samples: Vec<Vec<Complex64>>,
    /// Duhamel coefficients at even sample instants.
    panel_state: Vec<Vec<Complex64>>,
    projection_residual: f64,
}

impl ModePropagator {
    pub fn new(
        basis: Arc<EigenSystem>,
        g0: &ModeField,
        source: SourceSpec,
        t_final: f64,
        time_samples: usize,
    ) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {t_final}")));
        }
        if g0.grid != basis.grid {
            return Err(Error::domain("initial data grid differs from the operator grid"));
        }
        let c0 = basis.project(&g0.values);
        let projection_residual = if basis.complete {
            0.0
        } else {
            let back = basis.synthesize(&c0);
            let diff: Vec<Complex64> = g0.values.iter().zip(&back).map(|(a, b)| a - b).collect();
            basis.grid.norm_sq(&diff).sqrt()
        };
        let samples_n = if time_samples.is_multiple_of(2) { time_samples + 1 } else { time_samples }.max(3);
        let step = t_final / (samples_n - 1) as f64;
        let mut samples = Vec::new();
        let mut panel_state = Vec::new();
        if !source.is_none() {
            samples = (0..samples_n)
                .map(|j| source.coeffs(step * j as f64, &basis).map(|c| c.expect("source present")))
                .collect::<Result<Vec<_>>>()?;
            let k = basis.len();
            let mut y = vec![ZERO; k];
            panel_state.push(y.clone());
            for q in 0..(samples_n - 1) / 2 {
                for (i, &lam) in basis.eigenvalues.iter().enumerate() {
                    let w = panel_weights(lam, step, 2.0);
                    let decay = (-lam * 2.0 * step).exp();
                    y[i] = y[i] * decay
                        + samples[2 * q][i] * w[0]
                        + samples[2 * q + 1][i] * w[1]
                        + samples[2 * q + 2][i] * w[2];
                }
                panel_state.push(y.clone());
            }
        }
        Ok(Self { basis, g0: g0.values.clone(), c0, source, t_final, step, samples, panel_state, projection_residual })
    }

    pub fn basis(&self) -> &EigenSystem {
        &self.basis
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// Norm of the part of `g0` outside the retained eigenbasis.
    pub fn projection_residual(&self) -> f64 {
        self.projection_residual
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.t_final * (1.0 + 1e-14)).contains(&t) {
            return Err(Error::domain(format!("time {t} outside [0, {}]", self.t_final)));
        }
        Ok(())
    }

    /// Eigen-coefficients of `g(t)`.
    pub fn coeffs_at(&self, t: f64) -> Result<Vec<Complex64>> {
        self.check_time(t)?;
        let lams = &self.basis.eigenvalues;
        let mut y: Vec<Complex64> = self.c0.iter().zip(lams).map(|(c, &l)| c * (-l * t).exp()).collect();
        if self.samples.is_empty() || t == 0.0 {
            return Ok(y);
        }
        let panels = self.panel_state.len() - 1;
        let q = ((t / (2.0 * self.step)).floor() as usize).min(panels);
        let start = 2.0 * self.step * q as f64;
        let ell = ((t - start) / self.step).max(0.0);
        for (i, &lam) in lams.iter().enumerate() {
            let mut val = self.panel_state[q][i] * (-lam * (t - start)).exp();
            if q < panels && ell > 0.0 {
                let w = panel_weights(lam, self.step, ell);
                val += self.samples[2 * q][i] * w[0] + self.samples[2 * q + 1][i] * w[1] + self.samples[2 * q + 2][i] * w[2];
            }
            y[i] += val;
        }
        Ok(y)
    }

    /// State `g(t)`; `t = 0` returns the initial data verbatim.
    pub fn state_at(&self, t: f64) -> Result<ModeField> {
        if t == 0.0 {
            return Ok(ModeField { grid: self.basis.grid, values: self.g0.clone(), time_stamp: 0.0 });
        }
        let c = self.coeffs_at(t)?;
        Ok(ModeField { grid: self.basis.grid, values: self.basis.synthesize(&c), time_stamp: t })
    }

    /// Eigen-coefficients of `∂_t g(t) = -A g(t) + h(t)`.
    pub fn dt_coeffs_at(&self, t: f64) -> Result<Vec<Complex64>> {
        let mut y = self.coeffs_at(t)?;
        y.iter_mut().zip(&self.basis.eigenvalues).for_each(|(c, &l)| *c *= -l);
        if let Some(h) = self.source.coeffs(t, &self.basis)? {
            y.iter_mut().zip(h).for_each(|(a, b)| *a += b);
        }
        Ok(y)
    }

    pub fn source(&self) -> &SourceSpec {
        &self.source
    }
}

/// Times and states of one mode.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModeParams,
    pub times: Vec<f64>,
    pub states: Vec<ModeField>,
    pub projection_residual: f64,
}

impl Trajectory {
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(ModeField::norm).collect()
    }
}

fn check_output_times(times: &[f64], t_final: f64) -> Result<()> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("output times must be ascending"));
    }
    if times.iter().any(|&t| !(0.0..=t_final).contains(&t)) {
        return Err(Error::domain(format!("output times must lie in [0, {t_final}]")));
    }
    Ok(())
}

/// Evolves one mode in its full discrete eigenbasis with the default source sampling.
pub fn evolve_mode(
    params: ModeParams,
    g0: &ModeField,
    source: &SourceSpec,
    t_final: f64,
    output_times: &[f64],
) -> Result<Trajectory> {
    let basis = Arc::new(eigendecompose(&assemble_operator(params, g0.grid)?)?);
    evolve_mode_in(basis, g0, source, t_final, output_times, DEFAULT_TIME_SAMPLES)
}

/// Evolves one mode in a supplied (possibly partial) eigenbasis.
pub fn evolve_mode_in(
    basis: Arc<EigenSystem>,
    g0: &ModeField,
    source: &SourceSpec,
    t_final: f64,
    output_times: &[f64],
    time_samples: usize,
) -> Result<Trajectory> {
    check_output_times(output_times, t_final)?;
    let params = basis.params;
    let prop = ModePropagator::new(basis, g0, source.clone(), t_final, time_samples)?;
    let states = output_times.iter().map(|&t| prop.state_at(t)).collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { params, times: output_times.to_vec(), states, projection_residual: prop.projection_residual })
}

/// `-A state + source_value`.
pub fn dt_g(params: ModeParams, state: &ModeField, source_value: Option<&ModeField>) -> Result<ModeField> {
    let op = assemble_operator(params, state.grid)?;
    let mut values: Vec<Complex64> = op.apply(&state.values).into_iter().map(|v| -v).collect();
    if let Some(h) = source_value {
        if h.grid != state.grid {
            return Err(Error::domain("source grid differs from the state grid"));
        }
        values.iter_mut().zip(&h.values).for_each(|(a, b)| *a += b);
    }
    Ok(ModeField { grid: state.grid, values, time_stamp: state.time_stamp })
}

/// Source family for a stack: one `SourceSpec` per mode.
pub type StackSource = Arc<dyn Fn(ModeParams) -> SourceSpec + Send + Sync>;

pub fn no_stack_source() -> StackSource {
    Arc::new(|_| SourceSpec::None)
}

/// Time series of stacks.
#[derive(Debug, Clone)]
pub struct StackTrajectory {
    pub times: Vec<f64>,
    pub stacks: Vec<FourierStack>,
}

/// Mode-wise evolution of a whole stack; modes never couple.
pub fn evolve_stack(
    stack0: &FourierStack,
    source: &StackSource,
    t_final: f64,
    output_times: &[f64],
) -> Result<StackTrajectory> {
    check_output_times(output_times, t_final)?;
    let modes: Vec<(ModeParams, ModeField)> = stack0.iter().map(|(p, f)| (p, f.clone())).collect();
    let trajectories = modes
        .par_iter()
        .map(|(params, g0)| evolve_mode(*params, g0, &source(*params), t_final, output_times))
        .collect::<Result<Vec<_>>>()?;
    let mut stacks = Vec::with_capacity(output_times.len());
    for (ti, &t) in output_times.iter().enumerate() {
        let mut s = stack0.clone_empty();
        s.time_stamp = t;
        for ((params, _), traj) in modes.iter().zip(&trajectories) {
            s.insert(params.n, params.p as i64, traj.states[ti].clone())?;
        }
        stacks.push(s);
    }
    Ok(StackTrajectory { times: output_times.to_vec(), stacks })
}

/// Both sides of the single-mode Duhamel inequality
/// `‖g(T2)‖² ≤ 2‖g(T1)‖² e^{-2λ(T2-T1)} + λ^{-1} ∫_{T1}^{T2} ‖h‖²`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DuhamelReport {
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub const DUHAMEL_SLACK: f64 = 1e-6;

/// `∫_{t1}^{t2} ‖h(t)‖² dt` by composite Gauss–Legendre.
pub fn source_energy(source: &SourceSpec, grid: Grid1D, t1: f64, t2: f64) -> Result<f64> {
    if source.is_none() || t2 <= t1 {
        return Ok(0.0);
    }
    let rule = composite_gauss_legendre(8, 16, t1, t2)?;
    let mut acc = 0.0;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let h = source.eval(t, grid)?.expect("source present");
        acc += w * h.norm_sq();
    }
    Ok(acc)
}

pub fn check_duhamel_bound(params: ModeParams, g0: &ModeField, source: &SourceSpec, t1: f64, t2: f64) -> Result<DuhamelReport> {
    if !(0.0 <= t1 && t1 < t2) {
        return Err(Error::domain(format!("need 0 ≤ T1 < T2, got ({t1}, {t2})")));
    }
    let basis = Arc::new(eigendecompose(&assemble_operator(params, g0.grid)?)?);
    let lambda = basis.lambda_min();
    let prop = ModePropagator::new(basis, g0, source.clone(), t2, 4 * DEFAULT_TIME_SAMPLES + 1)?;
    let n1 = prop.state_at(t1)?.norm_sq();
    let lhs = prop.state_at(t2)?.norm_sq();
    let rhs = 2.0 * n1 * (-2.0 * lambda * (t2 - t1)).exp() + source_energy(source, g0.grid, t1, t2)? / lambda;
    Ok(DuhamelReport { lambda, lhs, rhs, holds: lhs <= rhs * (1.0 + DUHAMEL_SLACK) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(params: ModeParams, m: usize) -> Arc<EigenSystem> {
        let g = Grid1D::new(m).unwrap();
        Arc::new(eigendecompose(&assemble_operator(params, g).unwrap()).unwrap())
    }

    fn eigvec(b: &EigenSystem, k: usize) -> ModeField {
        ModeField::from_real(b.grid, &b.eigenvectors[k]).unwrap()
    }

    #[test]
    fn panel_weights_match_simpson_for_small_lambda() {
        let w = panel_weights(1e-12, 0.1, 2.0);
        let simpson = [0.1 / 3.0, 0.4 / 3.0, 0.1 / 3.0];
        for (a, b) in w.iter().zip(simpson) {
            assert!((a - b).abs() < 1e-12);
        }
        // Exact for the constant 1: (1 - e^{-2λh})/λ.
        for lam in [0.5, 3.0, 40.0, 5000.0] {
            let w = panel_weights(lam, 0.01, 2.0);
            let exact = (1.0 - (-lam * 0.02f64).exp()) / lam;
            assert!((w.iter().sum::<f64>() - exact).abs() < 1e-14 * exact.max(1e-3));
        }
    }

    #[test]
    fn eigenvector_decays_exactly() {
        let b = basis(ModeParams::torus(1, 2), 40);
        let g0 = eigvec(&b, 3);
        let traj = evolve_mode_in(b.clone(), &g0, &SourceSpec::None, 1.0, &[0.0, 0.5, 1.0], 65).unwrap();
        let want = (-b.eigenvalues[3]).exp();
        let got = b.grid.inner(&g0.values, &traj.states[2].values);
        assert!((got.re - want).abs() < 1e-12 * want.max(1e-300) + 1e-15);
        assert_eq!(traj.states[0].values, g0.values);
    }

    #[test]
    fn constant_eigen_source_gives_scalar_duhamel() {
        let b = basis(ModeParams::torus(0, 1), 32);
        let g = b.grid;
        for k in [0usize, 5, 30] {
            let src = SourceSpec::constant(eigvec(&b, k));
            let traj = evolve_mode_in(b.clone(), &ModeField::zeros(g), &src, 1.0, &[0.37, 1.0], 65).unwrap();
            for (i, &t) in traj.times.iter().enumerate() {
                let lam = b.eigenvalues[k];
                let want = (1.0 - (-lam * t).exp()) / lam;
                let got = g.inner(&b.eigenvectors[k].iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>(), &traj.states[i].values);
                assert!((got.re - want).abs() < 1e-12 * want, "k={k} t={t}: {} vs {want}", got.re);
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let g = Grid1D::new(8).unwrap();
        let traj = evolve_mode(ModeParams::torus(0, 0), &ModeField::zeros(g), &SourceSpec::None, 1.0, &[0.0, 1.0]).unwrap();
        assert!(traj.states.iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn dt_g_matches_finite_difference() {
        let params = ModeParams::torus(2, -1);
        let b = basis(params, 50);
        let g0 = ModeField::from_fn(b.grid, |x| (1.0 - x * x) * (3.0 * x).cos());
        let prop = ModePropagator::new(b.clone(), &g0, SourceSpec::None, 1.0, 65).unwrap();
        let t = 0.2;
        let delta = 1e-5;
        let s0 = prop.state_at(t).unwrap();
        let s1 = prop.state_at(t + delta).unwrap();
        let d = dt_g(params, &s0, None).unwrap();
        let fd: Vec<Complex64> = s1.values.iter().zip(&s0.values).map(|(a, b)| (a - b) / delta).collect();
        let err: f64 = fd.iter().zip(&d.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = d.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-3 * scale, "{err} vs {scale}");
    }
}
