//! Discrete 1D operators `A_{n,p} = -d²/dx² + (p x + n)²` on `(-1, 1)` with
//! Dirichlet conditions, their spectra and the dissipation speeds `λ_{n,p}`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SymTridiagonal, TridiagEigen};

/// Fourier frequency pair: `n` in `y`, `p` in `z` (real so that the
/// unbounded-`z` setting can use the same operators).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub n: i64,
    pub p: f64,
}

impl ModeParams {
    pub fn new(n: i64, p: f64) -> Result<Self> {
        if !p.is_finite() {
            return Err(Error::NonFinite("mode frequency p".into()));
        }
        Ok(Self { n, p })
    }

    /// Integer pair, the torus case.
    pub fn torus(n: i64, p: i64) -> Self {
        Self { n, p: p as f64 }
    }

    pub fn potential(&self, x: f64) -> f64 {
        let v = self.p * x + self.n as f64;
        v * v
    }
}

/// Uniform grid with `m` subintervals on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid1D {
    m: usize,
}

impl Grid1D {
    pub fn new(m: usize) -> Result<Self> {
        if m < 4 {
            return Err(Error::GridTooCoarse(format!("need at least 4 subintervals, got {m}")));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dx(&self) -> f64 {
        2.0 / self.m as f64
    }

    /// Node `x_i`, `0 ≤ i ≤ m`. Computed as `(2i - m)/m` so that `x_{m-i} = -x_i` exactly.
    pub fn node(&self, i: usize) -> f64 {
        (2.0 * i as f64 - self.m as f64) / self.m as f64
    }

    /// Number of interior nodes, `m - 1`.
    pub fn interior_len(&self) -> usize {
        self.m - 1
    }

    /// Interior nodes `x_1 .. x_{m-1}`.
    pub fn interior(&self) -> Vec<f64> {
        (1..self.m).map(|i| self.node(i)).collect()
    }

    /// Weights on the interior nodes integrating the piecewise-linear
    /// interpolant (zero at `±1`) over `[a, b]`. On `[-1, 1]` these reduce
    /// to the trapezoid weights `Δx`.
    pub fn interval_weights(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        if !(a.is_finite() && b.is_finite()) || a < -1.0 || b > 1.0 || a >= b {
            return Err(Error::domain(format!("invalid x-interval ({a}, {b})")));
        }
        let h = self.dx();
        let mut w = vec![0.0; self.m + 1];
        for i in 0..self.m {
            let (x0, x1) = (self.node(i), self.node(i + 1));
            let l = a.max(x0);
            let r = b.min(x1);
            if r <= l {
                continue;
            }
            // ∫_l^r (x1 - x)/h dx and ∫_l^r (x - x0)/h dx
            w[i] += ((x1 - l).powi(2) - (x1 - r).powi(2)) / (2.0 * h);
            w[i + 1] += ((r - x0).powi(2) - (l - x0).powi(2)) / (2.0 * h);
        }
        if a == -1.0 && b == 1.0 {
            return Ok(vec![h; self.m - 1]);
        }
        Ok(w[1..self.m].to_vec())
    }

    /// Discrete L² inner product `Δx Σ conj(u_i) v_i` over interior nodes.
    pub fn inner(&self, u: &[Complex64], v: &[Complex64]) -> Complex64 {
        u.iter().zip(v).map(|(a, b)| a.conj() * b).sum::<Complex64>() * self.dx()
    }

    pub fn norm_sq(&self, u: &[Complex64]) -> f64 {
        u.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx()
    }
}

/// Symmetric tridiagonal discretisation of `A_{n,p}` on the interior nodes.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid1D,
    pub params: ModeParams,
    matrix: SymTridiagonal,
}

impl DiscreteOperator {
    pub fn diagonal(&self) -> &[f64] {
        self.matrix.diag()
    }

    pub fn off_diagonal(&self) -> &[f64] {
        self.matrix.off()
    }

    pub fn matrix(&self) -> &SymTridiagonal {
        &self.matrix
    }

    /// Potential `(p x_i + n)²` on interior nodes.
    pub fn potential(&self) -> Vec<f64> {
        self.grid.interior().iter().map(|&x| self.params.potential(x)).collect()
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = u.iter().map(|z| z.re).collect();
        let im: Vec<f64> = u.iter().map(|z| z.im).collect();
        let a = self.matrix.matvec(&re);
        let b = self.matrix.matvec(&im);
        a.into_iter().zip(b).map(|(r, i)| Complex64::new(r, i)).collect()
    }

    /// Energy form `(Σ (u_{i+1}-u_i)²/Δx² + Σ V_i u_i²) / Σ u_i²` with zero
    /// boundary values. Free of the cancellation in `uᵀAu`.
    pub fn rayleigh_quotient(&self, u: &[f64]) -> f64 {
        let h = self.grid.dx();
        let n = u.len();
        let mut kinetic = u[0] * u[0] + u[n - 1] * u[n - 1];
        for i in 0..n - 1 {
            kinetic += (u[i + 1] - u[i]).powi(2);
        }
        let pot: f64 = self
            .grid
            .interior()
            .iter()
            .zip(u)
            .map(|(&x, &v)| self.params.potential(x) * v * v)
            .sum();
        let mass: f64 = u.iter().map(|v| v * v).sum();
        (kinetic / (h * h) + pot) / mass
    }
}

/// Builds the discrete operator for `params` on `grid`.
pub fn assemble_operator(params: ModeParams, grid: Grid1D) -> Result<DiscreteOperator> {
    let h = grid.dx();
    let diag: Vec<f64> = grid
        .interior()
        .iter()
        .map(|&x| 2.0 / (h * h) + params.potential(x))
        .collect();
    let off = vec![-1.0 / (h * h); grid.interior_len() - 1];
    let matrix = SymTridiagonal::new(diag, off)?;
    Ok(DiscreteOperator { grid, params, matrix })
}

/// Eigenpairs of a discrete operator, ascending. Eigenvectors are real and
/// orthonormal in the discrete L² product with weight `Δx`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub grid: Grid1D,
    pub params: ModeParams,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// `true` when every eigenpair of the operator is present.
    pub complete: bool,
    norm_inf: f64,
}

impl EigenSystem {
    fn from_tridiag(op: &DiscreteOperator, eig: TridiagEigen, complete: bool) -> Result<Self> {
        let scale = 1.0 / op.grid.dx().sqrt();
        let mut eigenvalues = Vec::with_capacity(eig.values.len());
        let mut eigenvectors = Vec::with_capacity(eig.values.len());
        for (v, lam) in eig.vectors.into_iter().zip(eig.values) {
            // Sign convention: largest-magnitude entry positive.
            let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            let refined = op.rayleigh_quotient(&v);
            let l = if (refined - lam).abs() <= 1e-6 * lam.abs().max(1.0) { refined } else { lam };
            if !l.is_finite() {
                return Err(Error::NonFinite("eigenvalue".into()));
            }
            eigenvalues.push(l);
            eigenvectors.push(v.into_iter().map(|x| sign * scale * x).collect());
        }
        Ok(Self {
            grid: op.grid,
            params: op.params,
            eigenvalues,
            eigenvectors,
            complete,
            norm_inf: op.matrix.norm_inf(),
        })
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Coefficients `⟨v_k, u⟩` in the weighted product.
    pub fn project(&self, u: &[Complex64]) -> Vec<Complex64> {
        let h = self.grid.dx();
        self.eigenvectors
            .iter()
            .map(|v| v.iter().zip(u).map(|(a, b)| b * *a).sum::<Complex64>() * h)
            .collect()
    }

    /// `Σ_k c_k v_k`.
    pub fn synthesize(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.grid.interior_len()];
        for (c, v) in coeffs.iter().zip(&self.eigenvectors) {
            if *c == Complex64::new(0.0, 0.0) {
                continue;
            }
            out.iter_mut().zip(v).for_each(|(o, x)| *o += c * *x);
        }
        out
    }

    /// Gram matrix of the eigenvectors under `weights` (row-major, real).
    pub fn weighted_gram(&self, weights: &[f64]) -> Vec<f64> {
        let k = self.len();
        let mut g = vec![0.0; k * k];
        for i in 0..k {
            let wi: Vec<f64> = self.eigenvectors[i].iter().zip(weights).map(|(a, w)| a * w).collect();
            for j in i..k {
                let s: f64 = wi.iter().zip(&self.eigenvectors[j]).map(|(a, b)| a * b).sum();
                g[i * k + j] = s;
                g[j * k + i] = s;
            }
        }
        g
    }

    /// Weighted residual norm `‖A v_k - λ_k v_k‖` for each pair.
    pub fn residuals(&self, op: &DiscreteOperator) -> Vec<f64> {
        let h = self.grid.dx();
        self.eigenvectors
            .iter()
            .zip(&self.eigenvalues)
            .map(|(v, &l)| {
                let av = op.matrix.matvec(v);
                (av.iter().zip(v).map(|(a, b)| (a - l * b).powi(2)).sum::<f64>() * h).sqrt()
            })
            .collect()
    }

    /// Residual tolerance for pair `k`: `1e-10 λ_k` plus the rounding floor of
    /// evaluating `A v` in double precision.
    pub fn residual_tolerance(&self, k: usize) -> f64 {
        1e-10 * self.eigenvalues[k] + 64.0 * f64::EPSILON * self.norm_inf
    }
}

/// Full spectrum and eigenbasis.
pub fn eigendecompose(op: &DiscreteOperator) -> Result<EigenSystem> {
    let eig = op.matrix.full()?;
    EigenSystem::from_tridiag(op, eig, true)
}

/// Lowest `k` eigenpairs (bisection and inverse iteration).
pub fn eigendecompose_lowest(op: &DiscreteOperator, k: usize) -> Result<EigenSystem> {
    let k = k.min(op.grid.interior_len());
    let complete = k == op.grid.interior_len();
    let eig = op.matrix.lowest(k)?;
    EigenSystem::from_tridiag(op, eig, complete)
}

/// Smallest eigenvalue of the discrete operator.
pub fn lambda_np(params: ModeParams, grid: Grid1D) -> Result<f64> {
    let op = assemble_operator(params, grid)?;
    Ok(eigendecompose_lowest(&op, 1)?.eigenvalues[0])
}

/// Raw value on `m`, value on `2m` and the Richardson extrapolation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Extrapolated {
    pub coarse: f64,
    pub fine: f64,
    pub richardson: f64,
}

pub fn lambda_np_richardson(params: ModeParams, grid: Grid1D) -> Result<Extrapolated> {
    let coarse = lambda_np(params, grid)?;
    let fine = lambda_np(params, Grid1D::new(2 * grid.m())?)?;
    Ok(Extrapolated { coarse, fine, richardson: fine + (fine - coarse) / 3.0 })
}

/// One row of the dissipation report.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DissipationRow {
    pub n: i64,
    pub p: i64,
    pub m: usize,
    pub lambda: f64,
    pub bound_p_ok: bool,
    /// `None` when `|n| < 2|p|` and the bound does not apply.
    pub bound_n_ok: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationReport {
    pub rows: Vec<DissipationRow>,
    pub tolerance: f64,
    pub violations: usize,
}

impl DissipationReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub const DISSIPATION_TOLERANCE: f64 = 1e-6;

/// Tabulates `λ_{n,p}` for `|n| ≤ n_max`, `|p| ≤ p_max` and checks
/// `λ ≥ (|p|+1)/4` and, when `|n| ≥ 2|p|`, `λ ≥ n²/4`.
pub fn verify_dissipation_bounds(n_max: i64, p_max: i64, grid: Grid1D) -> Result<DissipationReport> {
    if n_max < 1 || p_max < 1 {
        return Err(Error::domain("n_max and p_max must be at least 1"));
    }
    let pairs: Vec<(i64, i64)> = (-n_max..=n_max)
        .flat_map(|n| (-p_max..=p_max).map(move |p| (n, p)))
        .collect();
    let rows = pairs
        .par_iter()
        .map(|&(n, p)| {
            let lambda = lambda_np(ModeParams::torus(n, p), grid)?;
            let bound_p_ok = lambda >= (p.abs() as f64 + 1.0) / 4.0 - DISSIPATION_TOLERANCE;
            let bound_n_ok = (n.abs() >= 2 * p.abs())
                .then(|| lambda >= (n * n) as f64 / 4.0 - DISSIPATION_TOLERANCE);
            Ok(DissipationRow { n, p, m: grid.m(), lambda, bound_p_ok, bound_n_ok })
        })
        .collect::<Result<Vec<_>>>()?;
    let violations = rows
        .iter()
        .filter(|r| !r.bound_p_ok || r.bound_n_ok == Some(false))
        .count();
    Ok(DissipationReport { rows, tolerance: DISSIPATION_TOLERANCE, violations })
}

type CacheKey = (i64, u64, usize, usize);

/// Shared read-only store of eigensystems keyed by `(n, p, m, k)`.
#[derive(Debug, Default)]
pub struct EigenCache {
    store: RwLock<HashMap<CacheKey, Arc<EigenSystem>>>,
}

impl EigenCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Lowest `k` eigenpairs (`k = usize::MAX` for the full spectrum).
    pub fn get(&self, params: ModeParams, grid: Grid1D, k: usize) -> Result<Arc<EigenSystem>> {
        let k = k.min(grid.interior_len());
        let key = (params.n, params.p.to_bits(), grid.m(), k);
        if let Some(e) = self.store.read().expect("eigen cache poisoned").get(&key) {
            return Ok(Arc::clone(e));
        }
        let op = assemble_operator(params, grid)?;
        let sys = if k == grid.interior_len() && k <= FULL_QL_LIMIT {
            eigendecompose(&op)?
        } else {
            eigendecompose_lowest(&op, k)?
        };
        let sys = Arc::new(sys);
        self.store
            .write()
            .expect("eigen cache poisoned")
            .insert(key, Arc::clone(&sys));
        Ok(sys)
    }
}

/// Above this dimension full decompositions still use QL but callers are
/// expected to ask for partial spectra instead.
const FULL_QL_LIMIT: usize = 4096;

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn assembles_small_examples() {
        let g = Grid1D::new(4).unwrap();
        let op = assemble_operator(ModeParams::torus(0, 0), g).unwrap();
        assert_eq!(op.diagonal(), &[8.0, 8.0, 8.0]);
        assert_eq!(op.off_diagonal(), &[-4.0, -4.0]);
        let op = assemble_operator(ModeParams::torus(1, 0), g).unwrap();
        assert_eq!(op.diagonal(), &[9.0, 9.0, 9.0]);
        let op = assemble_operator(ModeParams::torus(0, 2), g).unwrap();
        assert_eq!(op.diagonal(), &[9.0, 8.0, 9.0]);
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(matches!(Grid1D::new(3), Err(Error::GridTooCoarse(_))));
    }

    #[test]
    fn laplacian_spectrum_matches_closed_form() {
        for m in [4usize, 9, 32] {
            let g = Grid1D::new(m).unwrap();
            let sys = eigendecompose(&assemble_operator(ModeParams::torus(0, 0), g).unwrap()).unwrap();
            let h = g.dx();
            for (k, l) in sys.eigenvalues.iter().enumerate() {
                let exact = 2.0 / (h * h) * (1.0 - ((k + 1) as f64 * PI / m as f64).cos());
                assert!((l - exact).abs() < 1e-12 * exact, "m={m} k={k}");
            }
        }
        let g = Grid1D::new(4).unwrap();
        let sys = eigendecompose(&assemble_operator(ModeParams::torus(0, 0), g).unwrap()).unwrap();
        let want = [8.0 - 4.0 * 2f64.sqrt(), 8.0, 8.0 + 4.0 * 2f64.sqrt()];
        for (a, b) in sys.eigenvalues.iter().zip(want) {
            assert!((a - b).abs() < 1e-13);
        }
        let shifted = eigendecompose(&assemble_operator(ModeParams::torus(1, 0), g).unwrap()).unwrap();
        for (a, b) in shifted.eigenvalues.iter().zip(want) {
            assert!((a - b - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn eigenvectors_orthonormal_and_residuals_small() {
        let g = Grid1D::new(120).unwrap();
        let op = assemble_operator(ModeParams::torus(3, -2), g).unwrap();
        let sys = eigendecompose(&op).unwrap();
        let ones = vec![g.dx(); g.interior_len()];
        let gram = sys.weighted_gram(&ones);
        let k = sys.len();
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * k + j] - want).abs() < 1e-10);
            }
        }
        for (idx, r) in sys.residuals(&op).iter().enumerate() {
            assert!(*r <= sys.residual_tolerance(idx), "pair {idx}: {r}");
        }
    }

    #[test]
    fn partial_matches_full() {
        let g = Grid1D::new(200).unwrap();
        let op = assemble_operator(ModeParams::new(2, 7.5).unwrap(), g).unwrap();
        let full = eigendecompose(&op).unwrap();
        let low = eigendecompose_lowest(&op, 12).unwrap();
        for k in 0..12 {
            assert!((full.eigenvalues[k] - low.eigenvalues[k]).abs() < 1e-10 * full.eigenvalues[k]);
            let d: f64 = full.eigenvectors[k].iter().zip(&low.eigenvectors[k]).map(|(a, b)| a * b).sum::<f64>() * g.dx();
            assert!((d - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn interval_weights_reduce_to_trapezoid_and_are_exact_for_linears() {
        let g = Grid1D::new(10).unwrap();
        let w = g.interval_weights(-1.0, 1.0).unwrap();
        assert!(w.iter().all(|&x| x == g.dx()));
        let w = g.interval_weights(-0.33, 0.57).unwrap();
        // Integrand x + 2 restricted, interpolant exact in the interior cells.
        let xs = g.interior();
        let approx: f64 = w.iter().zip(&xs).map(|(w, x)| w * (x + 2.0)).sum();
        let exact = (0.57f64.powi(2) - 0.33f64.powi(2)) / 2.0 + 2.0 * 0.9;
        assert!((approx - exact).abs() < 1e-13);
    }
}
