//! Fourier-mode reduction in `(y, z)`: fields on `(-1,1)×𝕋×𝕋` and their
//! truncated coefficient stacks, plus the shear change of variables
//! `z = x₃ + x₁x₂/2`.
//!
//! Coefficients follow `g_{n,p}(x) = (2π)^{-2} ∫∫ g e^{-i(ny+pz)} dy dz` and
//! synthesis carries no prefactor, so `‖g‖²_{L²(Ω)} = (2π)² Σ ‖g_{n,p}‖²`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mode_operator::{Grid1D, ModeParams};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex grid function on the interior nodes; boundary values are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub grid: Grid1D,
    pub values: Vec<Complex64>,
    pub time_stamp: f64,
}

impl ModeField {
    pub fn new(grid: Grid1D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.interior_len() {
            return Err(Error::domain(format!(
                "mode field has {} values, grid has {} interior nodes",
                values.len(),
                grid.interior_len()
            )));
        }
        if values.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("mode field".into()));
        }
        Ok(Self { grid, values, time_stamp: 0.0 })
    }

    pub fn zeros(grid: Grid1D) -> Self {
        Self { grid, values: vec![ZERO; grid.interior_len()], time_stamp: 0.0 }
    }

    /// Samples a real profile at the interior nodes.
    pub fn from_fn(grid: Grid1D, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.interior().iter().map(|&x| Complex64::new(f(x), 0.0)).collect();
        Self { grid, values, time_stamp: 0.0 }
    }

    pub fn from_real(grid: Grid1D, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time_stamp = t;
        self
    }

    pub fn norm_sq(&self) -> f64 {
        self.grid.norm_sq(&self.values)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    pub fn add_scaled(&mut self, other: &ModeField, c: Complex64) {
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b * c);
    }

    pub fn conj(&self) -> Self {
        Self { values: self.values.iter().map(|v| v.conj()).collect(), ..self.clone() }
    }
}

/// Truncated stack `{(n, p) → g_{n,p}}` over `|n| ≤ N`, `|p| ≤ P`.
#[derive(Debug, Clone)]
pub struct FourierStack {
    pub n_max: i64,
    pub p_max: i64,
    pub grid: Grid1D,
    pub time_stamp: f64,
    modes: BTreeMap<(i64, i64), ModeField>,
}

impl FourierStack {
    pub fn new(n_max: i64, p_max: i64, grid: Grid1D) -> Result<Self> {
        if n_max < 0 || p_max < 0 {
            return Err(Error::domain("truncation must be nonnegative"));
        }
        Ok(Self { n_max, p_max, grid, time_stamp: 0.0, modes: BTreeMap::new() })
    }

    pub fn insert(&mut self, n: i64, p: i64, field: ModeField) -> Result<()> {
        if n.abs() > self.n_max || p.abs() > self.p_max {
            return Err(Error::domain(format!("mode ({n}, {p}) outside truncation ({}, {})", self.n_max, self.p_max)));
        }
        if field.grid != self.grid {
            return Err(Error::domain("mode grid differs from stack grid"));
        }
        self.modes.insert((n, p), field);
        Ok(())
    }

    pub fn get(&self, n: i64, p: i64) -> Option<&ModeField> {
        self.modes.get(&(n, p))
    }

    /// Stored modes in `(n, p)` order. Absent modes are zero.
    pub fn iter(&self) -> impl Iterator<Item = (ModeParams, &ModeField)> {
        self.modes.iter().map(|(&(n, p), f)| (ModeParams::torus(n, p), f))
    }

    pub fn keys(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.modes.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Keeps only modes for which `keep(n, p)` holds.
    pub fn filtered(&self, keep: impl Fn(i64, i64) -> bool) -> Self {
        let modes = self.modes.iter().filter(|(&(n, p), _)| keep(n, p)).map(|(k, v)| (*k, v.clone())).collect();
        Self { modes, ..self.clone_empty() }
    }

    pub fn clone_empty(&self) -> Self {
        Self { n_max: self.n_max, p_max: self.p_max, grid: self.grid, time_stamp: self.time_stamp, modes: BTreeMap::new() }
    }

    /// Largest deviation from `g_{-n,-p} = conj(g_{n,p})`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (&(n, p), f) in &self.modes {
            let zero = ModeField::zeros(self.grid);
            let g = self.modes.get(&(-n, -p)).unwrap_or(&zero);
            for (a, b) in f.values.iter().zip(&g.values) {
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }
}

/// Samples of a field on interior x-nodes × periodic `y` × periodic `z`.
/// `y_j = -π + 2πj/q_y`; `z_l = -L/2 + L l/q_z` with window length `L`
/// (`2π` on the torus).
#[derive(Debug, Clone)]
pub struct Sampled3DField {
    pub grid: Grid1D,
    pub qy: usize,
    pub qz: usize,
    pub z_length: f64,
    /// Row-major `[x][y][z]`.
    pub values: Vec<Complex64>,
}

impl Sampled3DField {
    pub fn new(grid: Grid1D, qy: usize, qz: usize, z_length: f64, values: Vec<Complex64>) -> Result<Self> {
        if qy == 0 || qz == 0 {
            return Err(Error::domain("sample counts must be positive"));
        }
        if !(z_length.is_finite() && z_length > 0.0) {
            return Err(Error::domain("z window must be positive"));
        }
        if values.len() != grid.interior_len() * qy * qz {
            return Err(Error::domain("sample array has the wrong length"));
        }
        Ok(Self { grid, qy, qz, z_length, values })
    }

    /// Torus samples of `f(x, y, z)`.
    pub fn from_fn(grid: Grid1D, qy: usize, qz: usize, f: impl Fn(f64, f64, f64) -> Complex64) -> Result<Self> {
        let mut field = Self::new(grid, qy, qz, 2.0 * PI, vec![ZERO; grid.interior_len() * qy * qz])?;
        for (i, x) in grid.interior().into_iter().enumerate() {
            for j in 0..qy {
                for l in 0..qz {
                    let v = f(x, field.y(j), field.z(l));
                    let idx = field.index(i, j, l);
                    field.values[idx] = v;
                }
            }
        }
        Ok(field)
    }

    pub fn y(&self, j: usize) -> f64 {
        -PI + 2.0 * PI * j as f64 / self.qy as f64
    }

    pub fn z(&self, l: usize) -> f64 {
        -0.5 * self.z_length + self.z_length * l as f64 / self.qz as f64
    }

    pub fn index(&self, i: usize, j: usize, l: usize) -> usize {
        (i * self.qy + j) * self.qz + l
    }

    pub fn at(&self, i: usize, j: usize, l: usize) -> Complex64 {
        self.values[self.index(i, j, l)]
    }

    /// Direct quadrature of `∫_Ω |g|²`.
    pub fn l2_norm_sq(&self) -> f64 {
        let cell = self.grid.dx() * (2.0 * PI / self.qy as f64) * (self.z_length / self.qz as f64);
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * cell
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.im.abs()))
    }
}

/// Seeded band-limited stack: mode `(n, p)` gets `Σ_{j≤3} c_j sin(jπ(x+1)/2)`
/// with complex `c_j` of size `~ 1/(1+|n|+|p|)`, drawn from its own stream.
/// With `real` the coefficients satisfy `g_{-n,-p} = conj(g_{n,p})`.
pub fn random_stack(n_max: i64, p_max: i64, grid: Grid1D, seed: u64, real: bool) -> Result<FourierStack> {
    use rand::{Rng, SeedableRng};
    let mut stack = FourierStack::new(n_max, p_max, grid)?;
    let xs = grid.interior();
    let width = (2 * n_max + 1) as u64;
    for p in -p_max..=p_max {
        for n in -n_max..=n_max {
            if real && (p, n) < (0, 0) {
                continue;
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((p + p_max) as u64) * width + (n + n_max) as u64);
            let scale = 1.0 / (1.0 + n.abs() as f64 + p.abs() as f64);
            let coef: Vec<Complex64> = (0..3)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), if real && n == 0 && p == 0 { 0.0 } else { rng.gen_range(-1.0..1.0) }) * scale)
                .collect();
            let values: Vec<Complex64> = xs
                .iter()
                .map(|&x| coef.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * PI * 0.5 * (x + 1.0)).sin()).sum())
                .collect();
            let field = ModeField::new(grid, values)?;
            if real && (n, p) != (0, 0) {
                stack.insert(-n, -p, field.conj())?;
            }
            stack.insert(n, p, field)?;
        }
    }
    Ok(stack)
}

fn signed_index(k: i64, q: usize) -> usize {
    k.rem_euclid(q as i64) as usize
}

fn sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// In-place 2D DFT over one `qy × qz` block.
fn fft2(block: &mut [Complex64], qy: usize, qz: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let fz = if inverse { planner.plan_fft_inverse(qz) } else { planner.plan_fft_forward(qz) };
    let fy = if inverse { planner.plan_fft_inverse(qy) } else { planner.plan_fft_forward(qy) };
    for row in block.chunks_mut(qz) {
        fz.process(row);
    }
    let mut col = vec![ZERO; qy];
    for l in 0..qz {
        for j in 0..qy {
            col[j] = block[j * qz + l];
        }
        fy.process(&mut col);
        for j in 0..qy {
            block[j * qz + l] = col[j];
        }
    }
}

fn check_alias(n_max: i64, p_max: i64, qy: usize, qz: usize) -> Result<()> {
    if (qy as i64) < 2 * n_max + 2 || (qz as i64) < 2 * p_max + 2 {
        return Err(Error::domain(format!(
            "aliasing: truncation ({n_max}, {p_max}) needs q_y ≥ {} and q_z ≥ {}, got ({qy}, {qz})",
            2 * n_max + 2,
            2 * p_max + 2
        )));
    }
    Ok(())
}

/// Coefficients `g_{n,p}` for `|n| ≤ N`, `|p| ≤ P` by 2D DFT at every x-node.
pub fn decompose(field: &Sampled3DField, n_max: i64, p_max: i64) -> Result<FourierStack> {
    if (field.z_length - 2.0 * PI).abs() > 1e-12 {
        return Err(Error::domain("decompose expects the torus window of length 2π in z"));
    }
    check_alias(n_max, p_max, field.qy, field.qz)?;
    let (qy, qz) = (field.qy, field.qz);
    let block = qy * qz;
    let spectra: Vec<Vec<Complex64>> = field
        .values
        .par_chunks(block)
        .map(|chunk| {
            let mut buf = chunk.to_vec();
            let mut planner = FftPlanner::new();
            fft2(&mut buf, qy, qz, false, &mut planner);
            buf
        })
        .collect();
    let mut stack = FourierStack::new(n_max, p_max, field.grid)?;
    let norm = 1.0 / block as f64;
    for n in -n_max..=n_max {
        for p in -p_max..=p_max {
            let idx = signed_index(n, qy) * qz + signed_index(p, qz);
            let s = sign(n) * sign(p) * norm;
            let values = spectra.iter().map(|sp| sp[idx] * s).collect();
            stack.modes.insert((n, p), ModeField { grid: field.grid, values, time_stamp: stack.time_stamp });
        }
    }
    Ok(stack)
}

/// Evaluates the truncated series on a `q_y × q_z` torus grid.
pub fn reconstruct(stack: &FourierStack, qy: usize, qz: usize) -> Result<Sampled3DField> {
    check_alias(stack.n_max, stack.p_max, qy, qz)?;
    let nx = stack.grid.interior_len();
    let block = qy * qz;
    let blocks: Vec<Vec<Complex64>> = (0..nx)
        .into_par_iter()
        .map(|i| {
            let mut buf = vec![ZERO; block];
            for (&(n, p), f) in &stack.modes {
                let idx = signed_index(n, qy) * qz + signed_index(p, qz);
                buf[idx] += f.values[i] * (sign(n) * sign(p));
            }
            let mut planner = FftPlanner::new();
            fft2(&mut buf, qy, qz, true, &mut planner);
            buf
        })
        .collect();
    Sampled3DField::new(stack.grid, qy, qz, 2.0 * PI, blocks.concat())
}

/// `(2π)² Σ ‖g_{n,p}‖²`.
pub fn parseval_norm(stack: &FourierStack) -> f64 {
    (2.0 * PI).powi(2) * stack.modes.values().map(ModeField::norm_sq).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CvarDirection {
    /// `G(x₁,x₂,x₃) ↦ g(x,y,z)` with `z = x₃ + x₁x₂/2`.
    Forward,
    Inverse,
}

/// Band-limited samples of `f(z + shift)` from periodic samples of `f`.
pub fn shift_periodic(samples: &[Complex64], shift: f64, period: f64, planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let q = samples.len();
    let mut buf = samples.to_vec();
    planner.plan_fft_forward(q).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let mut kk = k as i64;
        if kk > q as i64 / 2 {
            kk -= q as i64;
        }
        // The Nyquist term of an even-length grid has no well-defined shift.
        let freq = if q.is_multiple_of(2) && kk == q as i64 / 2 { 0.0 } else { 2.0 * PI * kk as f64 / period };
        *c *= Complex64::from_polar(1.0 / q as f64, freq * shift);
    }
    planner.plan_fft_inverse(q).process(&mut buf);
    buf
}

/// Shear change of variables in the third coordinate, by spectral
/// interpolation on the periodic `z` window.
pub fn cvar_transform(field: &Sampled3DField, direction: CvarDirection) -> Result<Sampled3DField> {
    let xs = field.grid.interior();
    let max_shear = xs.iter().map(|x| x.abs()).fold(0.0, f64::max) * PI / 2.0;
    if max_shear >= field.z_length / 2.0 {
        return Err(Error::domain(format!(
            "shear up to {max_shear:.3} exceeds half the z window {:.3}",
            field.z_length / 2.0
        )));
    }
    let qz = field.qz;
    let mut planner = FftPlanner::new();
    let mut out = field.values.clone();
    for (i, &x) in xs.iter().enumerate() {
        for j in 0..field.qy {
            let y = field.y(j);
            let shift = match direction {
                CvarDirection::Forward => -0.5 * x * y,
                CvarDirection::Inverse => 0.5 * x * y,
            };
            let start = field.index(i, j, 0);
            let shifted = shift_periodic(&field.values[start..start + qz], shift, field.z_length, &mut planner);
            out[start..start + qz].copy_from_slice(&shifted);
        }
    }
    Sampled3DField::new(field.grid, field.qy, field.qz, field.z_length, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn constant_in_yz_gives_single_mode() {
        let g = Grid1D::new(8).unwrap();
        let f = Sampled3DField::from_fn(g, 8, 8, |x, _, _| c(1.0 - x * x)).unwrap();
        let s = decompose(&f, 2, 2).unwrap();
        for (mp, m) in s.iter() {
            let want = if mp.n == 0 && mp.p == 0.0 { 1.0 } else { 0.0 };
            for (v, x) in m.values.iter().zip(g.interior()) {
                assert!((v - c(want * (1.0 - x * x))).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn cosine_in_y_splits_evenly() {
        let g = Grid1D::new(6).unwrap();
        let f = Sampled3DField::from_fn(g, 8, 6, |x, y, _| c(x.exp() * y.cos())).unwrap();
        let s = decompose(&f, 3, 2).unwrap();
        for (mp, m) in s.iter() {
            let want = if mp.n.abs() == 1 && mp.p == 0.0 { 0.5 } else { 0.0 };
            for (v, x) in m.values.iter().zip(g.interior()) {
                assert!((v - c(want * x.exp())).norm() < 1e-14, "{mp:?}");
            }
        }
    }

    #[test]
    fn direct_quadrature_oracle_for_coefficients() {
        let g = Grid1D::new(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let amps: Vec<(i64, i64, Complex64)> =
            (0..6).map(|_| (rng.gen_range(-2..=2), rng.gen_range(-1..=1), Complex64::new(rng.gen(), rng.gen()))).collect();
        let f = Sampled3DField::from_fn(g, 7, 5, |x, y, z| {
            amps.iter().map(|&(n, p, a)| a * (1.0 + x) * Complex64::from_polar(1.0, n as f64 * y + p as f64 * z)).sum()
        })
        .unwrap();
        let s = decompose(&f, 2, 1).unwrap();
        for (n, p) in [(0, 0), (1, -1), (-2, 1)] {
            for i in 0..g.interior_len() {
                let mut direct = Complex64::new(0.0, 0.0);
                for j in 0..f.qy {
                    for l in 0..f.qz {
                        direct += f.at(i, j, l) * Complex64::from_polar(1.0, -(n as f64 * f.y(j) + p as f64 * f.z(l)));
                    }
                }
                direct /= (f.qy * f.qz) as f64;
                assert!((direct - s.get(n, p).unwrap().values[i]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn aliasing_rejected() {
        let g = Grid1D::new(4).unwrap();
        let f = Sampled3DField::from_fn(g, 4, 4, |_, _, _| c(1.0)).unwrap();
        assert!(decompose(&f, 2, 0).is_err());
    }

    #[test]
    fn single_mode_reconstructs_plane_wave() {
        let g = Grid1D::new(4).unwrap();
        let mut s = FourierStack::new(1, 1, g).unwrap();
        s.insert(1, 1, ModeField::from_fn(g, |x| x + 2.0)).unwrap();
        let f = reconstruct(&s, 5, 4).unwrap();
        for (i, x) in g.interior().into_iter().enumerate() {
            for j in 0..5 {
                for l in 0..4 {
                    let want = Complex64::from_polar(x + 2.0, f.y(j) + f.z(l));
                    assert!((f.at(i, j, l) - want).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn shift_of_plane_wave_is_phase() {
        let q = 16;
        let samples: Vec<Complex64> = (0..q).map(|l| Complex64::from_polar(1.0, -PI + 2.0 * PI * l as f64 / q as f64)).collect();
        let mut planner = FftPlanner::new();
        let out = shift_periodic(&samples, 0.5, 2.0 * PI, &mut planner);
        for (a, b) in out.iter().zip(&samples) {
            assert!((a - b * Complex64::from_polar(1.0, 0.5)).norm() < 1e-13);
        }
    }
}
