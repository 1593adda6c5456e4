//! Symmetric tridiagonal eigensolvers.
//!
//! Sturm bisection for individual eigenvalues, inverse iteration for the
//! matching eigenvectors and implicit QL for full decompositions.

use crate::error::{Error, Result};

/// Real symmetric tridiagonal matrix stored as its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

/// Eigenvalues in ascending order with eigenvectors normalised in the
/// Euclidean inner product (`vectors[k]` belongs to `values[k]`).
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::domain("empty tridiagonal matrix"));
        }
        if off.len() + 1 != diag.len() {
            return Err(Error::domain(format!(
                "off-diagonal length {} does not match diagonal length {}",
                off.len(),
                diag.len()
            )));
        }
        if diag.iter().chain(off.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tridiagonal entries".into()));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    /// Gershgorin enclosure of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// Infinity norm of the matrix.
    pub fn norm_inf(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.off[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x`.
    #[must_use]
    pub fn sturm_count(&self, x: f64) -> usize {
        let n = self.dim();
        let tiny = f64::MIN_POSITIVE.sqrt() * (1.0 + self.norm_inf());
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..n {
            if i > 0 {
                let e = self.off[i - 1];
                q = self.diag[i] - x - e * e / q;
            }
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection on the Sturm count.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        let n = self.dim();
        if k >= n {
            return Err(Error::domain(format!("eigenvalue index {k} out of range for dimension {n}")));
        }
        let (mut lo, mut hi) = self.gershgorin();
        let pad = f64::EPSILON * (1.0 + lo.abs().max(hi.abs()));
        lo -= pad;
        hi += pad;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Solves `(T - shift) y = rhs` by Gaussian elimination with partial pivoting.
    fn shifted_solve(&self, shift: f64, rhs: &mut [f64]) {
        let n = self.dim();
        if n == 1 {
            let mut p = self.diag[0] - shift;
            if p == 0.0 {
                p = f64::EPSILON * (1.0 + shift.abs());
            }
            rhs[0] /= p;
            return;
        }
        let guard = f64::EPSILON * self.norm_inf().max(1.0);
        let mut dl = self.off.clone();
        let mut dd: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
        let mut du = self.off.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n - 1];
        for i in 0..n - 1 {
            if dd[i].abs() >= dl[i].abs() {
                if dd[i] == 0.0 {
                    dd[i] = guard;
                }
                let fact = dl[i] / dd[i];
                dl[i] = fact;
                dd[i + 1] -= fact * du[i];
            } else {
                let fact = dd[i] / dl[i];
                dd[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = dd[i + 1];
                dd[i + 1] = temp - fact * dd[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                swapped[i] = true;
            }
        }
        if dd[n - 1] == 0.0 {
            dd[n - 1] = guard;
        }
        for i in 0..n - 1 {
            if swapped[i] {
                rhs.swap(i, i + 1);
            }
            rhs[i + 1] -= dl[i] * rhs[i];
        }
        rhs[n - 1] /= dd[n - 1];
        rhs[n - 2] = (rhs[n - 2] - du[n - 2] * rhs[n - 1]) / dd[n - 2];
        for i in (0..n.saturating_sub(2)).rev() {
            rhs[i] = (rhs[i] - du[i] * rhs[i + 1] - du2[i] * rhs[i + 2]) / dd[i];
        }
    }

    /// Lowest `k` eigenpairs: bisection for the values, inverse iteration with
    /// full reorthogonalisation for the vectors.
    pub fn lowest(&self, k: usize) -> Result<TridiagEigen> {
        let n = self.dim();
        if k == 0 || k > n {
            return Err(Error::domain(format!("requested {k} eigenpairs from dimension {n}")));
        }
        let mut values = Vec::with_capacity(k);
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        let scale = self.norm_inf().max(1.0);
        for idx in 0..k {
            let lambda = self.eigenvalue(idx)?;
            let mut v = start_vector(n, idx);
            let mut converged = false;
            for _ in 0..8 {
                normalize(&mut v);
                self.shifted_solve(lambda, &mut v);
                for _ in 0..2 {
                    for u in &vectors {
                        let c = dot(u, &v);
                        v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
                    }
                }
                let growth = normalize(&mut v);
                let res = self.residual(&v, lambda);
                if res <= 64.0 * f64::EPSILON * scale * (n as f64).sqrt() || growth > 1e14 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                let res = self.residual(&v, lambda);
                if res > 1e-6 * scale {
                    return Err(Error::NoConvergence { iterations: 8 });
                }
            }
            values.push(lambda);
            vectors.push(v);
        }
        Ok(TridiagEigen { values, vectors })
    }

    fn residual(&self, v: &[f64], lambda: f64) -> f64 {
        self.matvec(v)
            .iter()
            .zip(v)
            .map(|(a, b)| (a - lambda * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Full eigendecomposition by the implicit QL algorithm.
    pub fn full(&self) -> Result<TridiagEigen> {
        let n = self.dim();
        let mut d = self.diag.clone();
        let mut e = self.off.clone();
        e.push(0.0);
        // w[i] holds eigenvector i (a column of the accumulated rotation).
        let mut w: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r = vec![0.0; n];
                r[i] = 1.0;
                r
            })
            .collect();
        let eps = f64::EPSILON;
        let max_iter = 60 * n.max(1);
        let mut total = 0usize;
        let mut f = 0.0;
        let mut tst1: f64 = 0.0;
        for l in 0..n {
            tst1 = tst1.max(d[l].abs() + e[l].abs());
            let mut m = l;
            while m < n {
                if e[m].abs() <= eps * tst1 {
                    break;
                }
                m += 1;
            }
            if m > l {
                loop {
                    total += 1;
                    if total > max_iter {
                        return Err(Error::NoConvergence { iterations: total });
                    }
                    let mut g = d[l];
                    let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                    let mut r = p.hypot(1.0);
                    if p < 0.0 {
                        r = -r;
                    }
                    d[l] = e[l] / (p + r);
                    d[l + 1] = e[l] * (p + r);
                    let dl1 = d[l + 1];
                    let mut h = g - d[l];
                    for di in d.iter_mut().skip(l + 2) {
                        *di -= h;
                    }
                    f += h;
                    p = d[m];
                    let mut c = 1.0;
                    let mut c2 = c;
                    let mut c3 = c;
                    let el1 = e[l + 1];
                    let mut s = 0.0;
                    let mut s2 = 0.0;
                    for i in (l..m).rev() {
                        c3 = c2;
                        c2 = c;
                        s2 = s;
                        g = c * e[i];
                        h = c * p;
                        r = p.hypot(e[i]);
                        e[i + 1] = s * r;
                        s = e[i] / r;
                        c = p / r;
                        p = c * d[i] - s * g;
                        d[i + 1] = h + s * (c * g + s * d[i]);
                        let (lo, hi) = w.split_at_mut(i + 1);
                        let wi = &mut lo[i];
                        let wi1 = &mut hi[0];
                        for k in 0..n {
                            let t = wi1[k];
                            wi1[k] = s * wi[k] + c * t;
                            wi[k] = c * wi[k] - s * t;
                        }
                    }
                    p = -s * s2 * c3 * el1 * e[l] / dl1;
                    e[l] = s * p;
                    d[l] = c * p;
                    if e[l].abs() <= eps * tst1 {
                        break;
                    }
                }
            }
            d[l] += f;
            e[l] = 0.0;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        let values = order.iter().map(|&i| d[i]).collect();
        let vectors = order.iter().map(|&i| w[i].clone()).collect();
        Ok(TridiagEigen { values, vectors })
    }
}

fn start_vector(n: usize, seed: usize) -> Vec<f64> {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (seed as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = dot(v, v).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    fn exact(n: usize, k: usize) -> f64 {
        2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos()
    }

    #[test]
    fn bisection_matches_closed_form() {
        let t = laplacian(50);
        for k in [0, 7, 25, 49] {
            assert!((t.eigenvalue(k).unwrap() - exact(50, k)).abs() < 1e-13);
        }
    }

    #[test]
    fn ql_matches_closed_form_and_is_orthonormal() {
        let t = laplacian(40);
        let eig = t.full().unwrap();
        for (k, v) in eig.values.iter().enumerate() {
            assert!((v - exact(40, k)).abs() < 1e-12);
        }
        for i in 0..40 {
            for j in 0..40 {
                let g = dot(&eig.vectors[i], &eig.vectors[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_iteration_agrees_with_ql() {
        let diag: Vec<f64> = (0..60).map(|i| 2.0 + (i as f64 * 0.1).sin() * 3.0).collect();
        let t = SymTridiagonal::new(diag, vec![-1.0; 59]).unwrap();
        let full = t.full().unwrap();
        let low = t.lowest(10).unwrap();
        for k in 0..10 {
            assert!((full.values[k] - low.values[k]).abs() < 1e-12);
            assert!((dot(&full.vectors[k], &low.vectors[k]).abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sturm_count_brackets() {
        let t = laplacian(10);
        assert_eq!(t.sturm_count(-1.0), 0);
        assert_eq!(t.sturm_count(5.0), 10);
        assert_eq!(t.sturm_count(exact(10, 3) + 1e-9), 4);
    }

    #[test]
    fn rejects_mismatched_lengths() {
        assert!(SymTridiagonal::new(vec![1.0, 2.0], vec![]).is_err());
    }
}
