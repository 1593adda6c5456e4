//! Carleman weights and a numerical check of the global Carleman estimate
//! for single Fourier modes.

use std::sync::Arc;

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{ModePropagator, SourceSpec};
use crate::fourier_stack::ModeField;
use crate::linalg::gauss_legendre;
use crate::mode_operator::{assemble_operator, eigendecompose, Grid1D, ModeParams};

/// Strict-inequality margin required by the certificate.
pub const CERTIFY_MARGIN: f64 = 1e-3;
pub const CERTIFY_SAMPLES: usize = 10_000;
const MAX_RETRIES: usize = 8;
const RETRY_SHRINK: f64 = 0.7;
const DEFAULT_DELTA: f64 = 0.5;
const EXP_CUTOFF: f64 = 700.0;

/// Polynomial `Σ c_k (x - x0)^k` of degree at most 7.
#[derive(Debug, Clone, Copy, Serialize)]
struct Piece {
    x0: f64,
    c: [f64; 8],
}

fn falling(k: usize, d: usize) -> f64 {
    (k + 1 - d..=k).map(|j| j as f64).product()
}

fn eval_poly(c: &[f64; 8], u: f64) -> [f64; 4] {
    let mut out = [0.0; 4];
    for (d, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in (d..8).rev() {
            acc = acc * u + c[k] * falling(k, d);
        }
        *slot = acc;
    }
    out
}

/// Degree-7 Hermite piece matching `(β, β', β'', β''')` at both ends.
fn hermite7(x0: f64, x1: f64, left: [f64; 4], right: [f64; 4]) -> Result<Piece> {
    let h = x1 - x0;
    let mut c = [0.0; 8];
    c[0] = left[0];
    c[1] = left[1];
    c[2] = left[2] / 2.0;
    c[3] = left[3] / 6.0;
    let mut mat = Matrix4::zeros();
    let mut rhs = Vector4::zeros();
    for d in 0..4 {
        let known: f64 = (d..4).map(|k| c[k] * falling(k, d) * h.powi((k - d) as i32)).sum();
        rhs[d] = right[d] - known;
        for (col, k) in (4..8).enumerate() {
            mat[(d, col)] = falling(k, d) * h.powi((k - d) as i32);
        }
    }
    let sol = mat.lu().solve(&rhs).ok_or_else(|| Error::Numeric("singular Hermite system".into()))?;
    c[4..8].copy_from_slice(sol.as_slice());
    Ok(Piece { x0, c })
}

/// Per-hypothesis margins (positive means satisfied).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Certification {
    /// `min β - 1`.
    pub beta_margin: f64,
    /// `min |β'|` on `[-1, a'] ∪ [b', 1]`.
    pub slope_margin: f64,
    /// `min(β'(1), -β'(-1))`.
    pub boundary_margin: f64,
    /// `min -β''` on `[-1, a'] ∪ [b', 1]`.
    pub concavity_margin: f64,
}

impl Certification {
    pub fn passed(&self) -> bool {
        self.violated().is_empty()
    }

    pub fn violated(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (name, m) in [
            ("beta >= 1", self.beta_margin),
            ("|beta'| > 0 off (a', b')", self.slope_margin),
            ("beta'(-1) < 0 < beta'(1)", self.boundary_margin),
            ("beta'' < 0 off (a', b')", self.concavity_margin),
        ] {
            if !(m >= CERTIFY_MARGIN) {
                v.push(name);
            }
        }
        v
    }
}

/// C³ weight on `[-1, 1]`: concave quadratics on `[-1, a']` and `[b', 1]`
/// joined by a degree-7 Hermite valley on `[a', b']`.
#[derive(Debug, Clone, Serialize)]
pub struct CarlemanWeight {
    pub a: f64,
    pub b: f64,
    pub a_prime: f64,
    pub b_prime: f64,
    /// Height of the outer pieces above `β(a') = β(b') = 1 + δ`.
    pub drop: f64,
    pub delta: f64,
    pub attempts: usize,
    pub certification: Certification,
    pieces: [Piece; 3],
}

impl CarlemanWeight {
    fn piece(&self, x: f64) -> &Piece {
        if x < self.a_prime {
            &self.pieces[0]
        } else if x <= self.b_prime {
            &self.pieces[1]
        } else {
            &self.pieces[2]
        }
    }

    /// `(β, β', β'', β''')` at `x ∈ [-1, 1]`.
    pub fn derivs(&self, x: f64) -> [f64; 4] {
        let p = self.piece(x);
        eval_poly(&p.c, x - p.x0)
    }

    pub fn beta(&self, x: f64) -> f64 {
        self.derivs(x)[0]
    }

    /// Rows `(x, β, β', β'')` on `samples` uniform points.
    pub fn export(&self, samples: usize) -> Vec<[f64; 4]> {
        let samples = samples.max(2);
        (0..samples)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
                let d = self.derivs(x);
                [x, d[0], d[1], d[2]]
            })
            .collect()
    }

    fn assemble(a: f64, b: f64, delta: f64, drop: f64) -> Result<Self> {
        let a_prime = a + (b - a) / 4.0;
        let b_prime = b - (b - a) / 4.0;
        let base = 1.0 + delta;
        // Left: decreasing, slope -s at -1 steepening to -s1 at a'.
        let l1 = a_prime + 1.0;
        let ml = drop / l1;
        let (sl, rl) = (0.5 * ml, ml / l1);
        let mut cl = [0.0; 8];
        cl[0] = base + drop;
        cl[1] = -sl;
        cl[2] = -rl / 2.0;
        let left = Piece { x0: -1.0, c: cl };
        let l2 = 1.0 - b_prime;
        let mr = drop / l2;
        let (s1r, rr) = (1.5 * mr, mr / l2);
        let mut cr = [0.0; 8];
        cr[0] = base;
        cr[1] = s1r;
        cr[2] = -rr / 2.0;
        let right = Piece { x0: b_prime, c: cr };
        let at_a = eval_poly(&left.c, l1);
        let middle = hermite7(a_prime, b_prime, at_a, [base, s1r, -rr, 0.0])?;
        let mut w = Self {
            a,
            b,
            a_prime,
            b_prime,
            drop,
            delta,
            attempts: 0,
            certification: Certification { beta_margin: 0.0, slope_margin: 0.0, boundary_margin: 0.0, concavity_margin: 0.0 },
            pieces: [left, middle, right],
        };
        w.certification = w.certify(CERTIFY_SAMPLES);
        Ok(w)
    }

    /// Checks the four hypotheses on `samples` uniform points.
    pub fn certify(&self, samples: usize) -> Certification {
        let mut c = Certification {
            beta_margin: f64::INFINITY,
            slope_margin: f64::INFINITY,
            boundary_margin: self.derivs(1.0)[1].min(-self.derivs(-1.0)[1]),
            concavity_margin: f64::INFINITY,
        };
        for i in 0..samples {
            let x = -1.0 + 2.0 * i as f64 / (samples - 1) as f64;
            let d = self.derivs(x);
            c.beta_margin = c.beta_margin.min(d[0] - 1.0);
            if x <= self.a_prime || x >= self.b_prime {
                c.slope_margin = c.slope_margin.min(d[1].abs());
                c.concavity_margin = c.concavity_margin.min(-d[2]);
            }
        }
        c
    }
}

/// Certified weight for the observation interval `(a, b)`.
pub fn build_weight(a: f64, b: f64) -> Result<CarlemanWeight> {
    if !(-1.0 <= a && a < b && b <= 1.0) {
        return Err(Error::domain(format!("need -1 <= a < b <= 1, got ({a}, {b})")));
    }
    let mut drop = 1.0 - DEFAULT_DELTA;
    let mut last = None;
    for attempt in 0..=MAX_RETRIES {
        let mut w = CarlemanWeight::assemble(a, b, DEFAULT_DELTA, drop)?;
        w.attempts = attempt + 1;
        if w.certification.passed() {
            return Ok(w);
        }
        last = Some(w);
        drop *= RETRY_SHRINK;
    }
    let w = last.expect("at least one attempt");
    Err(Error::Numeric(format!(
        "Carleman weight for ({a}, {b}) failed after {} attempts: {}",
        w.attempts,
        w.certification.violated().join(", ")
    )))
}

/// `M = C2 max{T + T², (|n| + p) T²}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CarlemanParams {
    pub m: f64,
    pub c2: f64,
    pub t: f64,
    pub n: i64,
    pub p: f64,
}

pub fn m_param(c2: f64, t: f64, n: i64, p: f64) -> Result<CarlemanParams> {
    if !(c2 > 0.0 && t > 0.0) {
        return Err(Error::domain("C2 and T must be positive"));
    }
    let m = c2 * (t + t * t).max((n.unsigned_abs() as f64 + p) * t * t);
    Ok(CarlemanParams { m, c2, t, n, p })
}

fn check_open_time(t: f64, t_final: f64) -> Result<()> {
    if !(t > 0.0 && t < t_final) {
        return Err(Error::domain(format!("t = {t} outside (0, {t_final})")));
    }
    Ok(())
}

/// `α(t, x) = Mβ(x) / (t(T - t))`.
pub fn alpha_weight(w: &CarlemanWeight, m: f64, t: f64, t_final: f64, x: f64) -> Result<f64> {
    check_open_time(t, t_final)?;
    Ok(m * w.beta(x) / (t * (t_final - t)))
}

/// `(α, α_t, α_x, α_xx)`.
fn alpha_derivs(w: &CarlemanWeight, m: f64, t: f64, t_final: f64, x: f64) -> [f64; 4] {
    let theta = t * (t_final - t);
    let d = w.derivs(x);
    [
        m * d[0] / theta,
        -m * d[0] * (t_final - 2.0 * t) / (theta * theta),
        m * d[1] / theta,
        m * d[2] / theta,
    ]
}

fn damp(alpha: f64) -> f64 {
    if alpha > EXP_CUTOFF {
        0.0
    } else {
        (-alpha).exp()
    }
}

/// Space-time samples on interior nodes at strictly interior times.
#[derive(Debug, Clone)]
pub struct SpaceTimeSamples {
    pub grid: Grid1D,
    pub times: Vec<f64>,
    pub values: Vec<Vec<Complex64>>,
}

impl SpaceTimeSamples {
    pub fn new(grid: Grid1D, times: Vec<f64>, values: Vec<Vec<Complex64>>) -> Result<Self> {
        if times.len() != values.len() || values.iter().any(|v| v.len() != grid.interior_len()) {
            return Err(Error::domain("space-time samples do not match the grid"));
        }
        Ok(Self { grid, times, values })
    }
}

/// `z = g e^{-α}`, flushed to zero where `α > 700`.
pub fn z_transform(g: &SpaceTimeSamples, w: &CarlemanWeight, m: f64, t_final: f64) -> Result<SpaceTimeSamples> {
    let xs = g.grid.interior();
    let values = g
        .times
        .iter()
        .zip(&g.values)
        .map(|(&t, row)| {
            check_open_time(t, t_final)?;
            Ok(row.iter().zip(&xs).map(|(v, &x)| v * damp(m * w.beta(x) / (t * (t_final - t)))).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpaceTimeSamples { grid: g.grid, times: g.times.clone(), values })
}

#[derive(Debug, Clone)]
pub struct SplitSamples {
    pub times: Vec<f64>,
    pub p1: Vec<Vec<Complex64>>,
    pub p2: Vec<Vec<Complex64>>,
}

impl SplitSamples {
    /// `max |e^{-α} P g - P₁z - P₂z|` against weighted samples at `self.times`.
    pub fn identity_defect(&self, weighted_pg: &[Vec<Complex64>]) -> f64 {
        self.p1
            .iter()
            .zip(&self.p2)
            .zip(weighted_pg)
            .flat_map(|((a, b), c)| a.iter().zip(b).zip(c).map(|((x, y), z)| (z - x - y).norm()))
            .fold(0.0, f64::max)
    }
}

/// `P₁z = -z_xx + (α_t - α_x² - α_xx) z + (px+n)² z`, `P₂z = z_t - 2α_x z_x`,
/// with centred differences in `x` and `t` (uniform times), evaluated at the
/// inner time samples.
pub fn p1_p2_split(z: &SpaceTimeSamples, w: &CarlemanWeight, m: f64, t_final: f64, params: ModeParams) -> Result<SplitSamples> {
    let nt = z.times.len();
    if nt < 3 {
        return Err(Error::domain("need three or more time samples"));
    }
    let dt = z.times[1] - z.times[0];
    if z.times.windows(2).any(|p| ((p[1] - p[0]) - dt).abs() > 1e-12 * dt.abs().max(1.0)) || dt <= 0.0 {
        return Err(Error::domain("time samples must be uniform and increasing"));
    }
    let h = z.grid.dx();
    let xs = z.grid.interior();
    let n = xs.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut out = SplitSamples { times: z.times[1..nt - 1].to_vec(), p1: Vec::new(), p2: Vec::new() };
    for j in 1..nt - 1 {
        let t = z.times[j];
        check_open_time(t, t_final)?;
        let row = &z.values[j];
        let at = |i: isize| if i < 0 || i as usize >= n { zero } else { row[i as usize] };
        let mut p1 = Vec::with_capacity(n);
        let mut p2 = Vec::with_capacity(n);
        for (i, &x) in xs.iter().enumerate() {
            let ii = i as isize;
            let zxx = (at(ii - 1) - 2.0 * row[i] + at(ii + 1)) / (h * h);
            let zx = (at(ii + 1) - at(ii - 1)) / (2.0 * h);
            let zt = (z.values[j + 1][i] - z.values[j - 1][i]) / (2.0 * dt);
            let a = alpha_derivs(w, m, t, t_final, x);
            p1.push(-zxx + row[i] * (a[1] - a[2] * a[2] - a[3] + params.potential(x)));
            p2.push(zt - zx * (2.0 * a[2]));
        }
        out.p1.push(p1);
        out.p2.push(p2);
    }
    Ok(out)
}

/// One corpus entry: a mode problem with data `g0` and source `P g = h`.
#[derive(Debug, Clone)]
pub struct CorpusElement {
    pub id: usize,
    pub params: ModeParams,
    pub t: f64,
    pub g0: ModeField,
    pub source: SourceSpec,
}

/// Seeded corpus over `(n, p) ∈ {0..=n_max} × {0..=p_max}` and the horizons
/// in `t_values`; odd entries carry a separable source.
pub fn generate_corpus(size: usize, seed: u64, n_max: i64, p_max: i64, t_values: &[f64], grid: Grid1D) -> Result<Vec<CorpusElement>> {
    if t_values.is_empty() || n_max < 0 || p_max < 0 {
        return Err(Error::domain("corpus needs horizons and nonnegative frequency ranges"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let smooth = |rng: &mut ChaCha8Rng| {
        let coef: Vec<f64> = (1..=6).map(|j| rng.gen_range(-1.0..1.0) / j as f64).collect();
        ModeField::from_fn(grid, move |x| {
            coef.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * std::f64::consts::FRAC_PI_2 * (x + 1.0)).sin()).sum()
        })
    };
    (0..size)
        .map(|id| {
            let n = rng.gen_range(0..=n_max);
            let p = rng.gen_range(0..=p_max);
            let t = t_values[id % t_values.len()];
            let g0 = smooth(&mut rng);
            let source = if id % 2 == 1 {
                let h = smooth(&mut rng);
                let (om, ph) = (rng.gen_range(0.5..4.0), rng.gen_range(0.0..std::f64::consts::TAU));
                SourceSpec::TimeProfile { r: Arc::new(move |s| (om * s + ph).cos()), h }
            } else {
                SourceSpec::None
            };
            Ok(CorpusElement { id, params: ModeParams::torus(n, p), t, g0, source })
        })
        .collect()
}

/// How `C1` is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum C1FitMode {
    /// Minimum of `RHS/LHS` over a seeded half, checked on the other half.
    Split,
    /// Minimum over the whole corpus; no held-out check.
    Whole,
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub a: f64,
    pub b: f64,
    pub c2: f64,
    pub time_nodes: usize,
    pub time_samples: usize,
    pub slack: f64,
    pub split_seed: u64,
    pub fit: C1FitMode,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { a: -0.5, b: 0.5, c2: 1.0, time_nodes: 64, time_samples: 129, slack: 1e-6, split_seed: 7, fit: C1FitMode::Split }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ElementRow {
    pub id: usize,
    pub n: i64,
    pub p: f64,
    pub t: f64,
    pub m: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub training: bool,
    pub violated: bool,
}

impl ElementRow {
    pub fn ratio(&self) -> Option<f64> {
        (self.lhs > 0.0).then(|| self.rhs / self.lhs)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CarlemanReport {
    pub rows: Vec<ElementRow>,
    pub c1: f64,
    pub c2: f64,
    pub split_seed: u64,
    pub violations: usize,
    /// Held-out element with the smallest `RHS / (C1 LHS)`.
    pub worst_element: Option<usize>,
    pub certification: Certification,
    pub weight_attempts: usize,
}

impl CarlemanReport {
    pub fn passed(&self) -> bool {
        self.c1 > 0.0 && self.violations == 0 && self.certification.passed()
    }
}

/// `(LHS with C1 = 1, RHS)` of the Carleman estimate for one element.
pub fn carleman_sides(el: &CorpusElement, w: &CarlemanWeight, m: f64, opts: &CheckOptions) -> Result<(f64, f64)> {
    let grid = el.g0.grid;
    let basis = Arc::new(eigendecompose(&assemble_operator(el.params, grid)?)?);
    let prop = ModePropagator::new(basis, &el.g0, el.source.clone(), el.t, opts.time_samples)?;
    let rule = gauss_legendre(opts.time_nodes, 0.0, el.t)?;
    let h = grid.dx();
    let xs = grid.interior();
    let obs = grid.interval_weights(opts.a, opts.b)?;
    let beta: Vec<f64> = xs.iter().map(|&x| w.beta(x)).collect();
    let beta_mid: Vec<f64> = (0..=xs.len()).map(|i| w.beta(grid.node(i) + 0.5 * h)).collect();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
        let theta = t * (el.t - t);
        let lm = (m / theta).ln();
        let weight = |k: f64, b: f64| {
            let e = k * lm - m * b / theta;
            if e < -EXP_CUTOFF { 0.0 } else { e.exp() }
        };
        let g = prop.state_at(t)?.values;
        let src = el.source.eval(t, grid)?;
        let mut grad = 0.0;
        for c in 0..=g.len() {
            let left = if c == 0 { Complex64::new(0.0, 0.0) } else { g[c - 1] };
            let right = if c == g.len() { Complex64::new(0.0, 0.0) } else { g[c] };
            grad += ((right - left) / h).norm_sqr() * h * weight(1.0, beta_mid[c]);
        }
        let mut zero = 0.0;
        let mut observed = 0.0;
        let mut forcing = 0.0;
        for i in 0..g.len() {
            let w3 = weight(3.0, beta[i]);
            zero += g[i].norm_sqr() * h * w3;
            observed += g[i].norm_sqr() * obs[i] * w3;
            if let Some(s) = &src {
                forcing += s.values[i].norm_sqr() * h * weight(0.0, beta[i]);
            }
        }
        lhs += wt * (grad + zero);
        rhs += wt * (forcing + observed);
    }
    Ok((lhs, rhs))
}

/// Fits `C1` and checks `C1·LHS ≤ RHS (1 + slack)` on the held-out half.
pub fn carleman_check(corpus: &[CorpusElement], opts: &CheckOptions) -> Result<CarlemanReport> {
    if corpus.is_empty() {
        return Err(Error::domain("empty Carleman corpus"));
    }
    let w = build_weight(opts.a, opts.b)?;
    let sides = corpus
        .par_iter()
        .map(|el| {
            let cp = m_param(opts.c2, el.t, el.params.n, el.params.p)?;
            carleman_sides(el, &w, cp.m, opts).map(|s| (cp.m, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let training: Vec<bool> = match opts.fit {
        C1FitMode::Whole => vec![true; corpus.len()],
        C1FitMode::Split => {
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.split_seed));
            let mut flags = vec![false; corpus.len()];
            order.iter().take(corpus.len().div_ceil(2)).for_each(|&i| flags[i] = true);
            flags
        }
    };
    let mut rows: Vec<ElementRow> = corpus
        .iter()
        .zip(&sides)
        .zip(&training)
        .map(|((el, &(m, (lhs, rhs))), &tr)| ElementRow { id: el.id, n: el.params.n, p: el.params.p, t: el.t, m, lhs, rhs, training: tr, violated: false })
        .collect();
    let c1 = rows.iter().filter(|r| r.training).filter_map(|r| r.ratio()).fold(f64::INFINITY, f64::min);
    if !(c1.is_finite() && c1 > 0.0) {
        return Err(Error::Numeric(format!("training split gives no positive C1 (got {c1})")));
    }
    let mut worst: Option<(usize, f64)> = None;
    for r in rows.iter_mut().filter(|r| !r.training) {
        r.violated = c1 * r.lhs > r.rhs * (1.0 + opts.slack);
        if let Some(q) = r.ratio().map(|q| q / c1) {
            if worst.is_none_or(|(_, wq)| q < wq) {
                worst = Some((r.id, q));
            }
        }
    }
    Ok(CarlemanReport {
        violations: rows.iter().filter(|r| r.violated).count(),
        rows,
        c1,
        c2: opts.c2,
        split_seed: opts.split_seed,
        worst_element: worst.map(|w| w.0),
        certification: w.certification,
        weight_attempts: w.attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weight() -> CarlemanWeight {
        build_weight(-0.5, 0.5).unwrap()
    }

    #[test]
    fn m_param_arithmetic() {
        assert_eq!(m_param(1.0, 1.0, 2, 3.0).unwrap().m, 5.0);
        assert_eq!(m_param(1.0, 1.0, 0, 0.0).unwrap().m, 2.0);
        assert_eq!(m_param(2.0, 1.0, 2, 3.0).unwrap().m, 10.0);
        assert_eq!(m_param(1.0, 2.0, -1, 0.0).unwrap().m, 6.0);
        assert!(m_param(0.0, 1.0, 0, 0.0).is_err());
    }

    #[test]
    fn weight_hypotheses() {
        let w = weight();
        assert!(w.certification.passed(), "{:?}", w.certification);
        assert!(w.derivs(1.0)[1] > 0.0 && w.derivs(-1.0)[1] < 0.0);
        let (xmin, bmin) = (0..=2000)
            .map(|i| -1.0 + i as f64 / 1000.0)
            .map(|x| (x, w.beta(x)))
            .fold((0.0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
        assert!(bmin >= 1.0);
        assert!(xmin > w.a_prime && xmin < w.b_prime, "minimum at {xmin}");
    }

    #[test]
    fn weight_is_c3_at_joints() {
        let w = weight();
        for x in [w.a_prime, w.b_prime] {
            let (l, r) = (w.derivs(x - 1e-12), w.derivs(x + 1e-12));
            for k in 0..4 {
                assert!((l[k] - r[k]).abs() < 1e-6 * (1.0 + l[k].abs()), "jump in derivative {k} at {x}: {} vs {}", l[k], r[k]);
            }
        }
    }

    #[test]
    fn weight_derivatives_match_differences() {
        let w = weight();
        let h = 1e-5;
        for x in [-0.9, -0.4, -0.1, 0.2, 0.45, 0.8] {
            let d = w.derivs(x);
            for k in 0..3 {
                let fd = (w.derivs(x + h)[k] - w.derivs(x - h)[k]) / (2.0 * h);
                assert!((fd - d[k + 1]).abs() < 1e-5 * (1.0 + d[k + 1].abs()), "x={x} k={k}");
            }
        }
    }

    #[test]
    fn other_regions_certify() {
        for (a, b) in [(-1.0, 1.0), (-1.0, -0.5), (0.8, 1.0), (-0.1, 0.1)] {
            let w = build_weight(a, b).unwrap();
            assert!(w.certification.passed());
        }
        assert!(build_weight(0.5, 0.5).is_err());
    }

    #[test]
    fn alpha_values() {
        let w = weight();
        let (m, t) = (3.0, 2.0);
        for x in [-0.7, 0.0, 0.9] {
            let mid = alpha_weight(&w, m, t / 2.0, t, x).unwrap();
            assert!((mid - 4.0 * m * w.beta(x) / (t * t)).abs() < 1e-12 * mid);
            assert!((alpha_weight(&w, 2.0 * m, t / 2.0, t, x).unwrap() - 2.0 * mid).abs() < 1e-12 * mid);
            assert!(alpha_weight(&w, m, t / 200.0, t, x).unwrap() >= mid);
        }
        assert!(alpha_weight(&w, m, 0.0, t, 0.0).is_err());
        assert!(alpha_weight(&w, m, t, t, 0.0).is_err());
    }

    #[test]
    fn z_transform_bounds_and_flush() {
        let w = weight();
        let grid = Grid1D::new(40).unwrap();
        let n = grid.interior_len();
        let times = vec![1e-4, 0.25, 0.5, 0.75, 1.0 - 1e-4];
        let ones = vec![vec![Complex64::new(1.0, -2.0); n]; times.len()];
        let g = SpaceTimeSamples::new(grid, times.clone(), ones).unwrap();
        let z = z_transform(&g, &w, 2.0, 1.0).unwrap();
        assert!(z.values[0].iter().chain(&z.values[4]).all(|v| *v == Complex64::new(0.0, 0.0)));
        for (&t, row) in times.iter().zip(&z.values) {
            let cap = 5f64.sqrt() * (-2.0 / (t * (1.0 - t))).exp();
            assert!(row.iter().all(|v| v.norm() <= cap * (1.0 + 1e-14)));
        }
        let zeros = SpaceTimeSamples::new(grid, times.clone(), vec![vec![Complex64::new(0.0, 0.0); n]; times.len()]).unwrap();
        let z0 = z_transform(&zeros, &w, 2.0, 1.0).unwrap();
        assert!(z0.values.iter().flatten().all(|v| v.norm() == 0.0));
    }

    /// `g = e^{-t} cos(πx/2)(1 + x/3)`: returns the split defect on an
    /// `m`-cell grid with time step `dt`.
    fn split_defect(m: usize, dt: f64) -> f64 {
        let w = weight();
        let params = ModeParams::torus(1, 1);
        let (mm, t_final) = (2.0, 1.0);
        let grid = Grid1D::new(m).unwrap();
        let xs = grid.interior();
        let q = std::f64::consts::FRAC_PI_2;
        let f = |x: f64| (q * x).cos() * (1.0 + x / 3.0);
        let fxx = |x: f64| -q * q * (q * x).cos() * (1.0 + x / 3.0) - 2.0 * q * (q * x).sin() / 3.0;
        let times: Vec<f64> = (0..=2).map(|j| 0.5 + (j as f64 - 1.0) * dt).collect();
        let values = times.iter().map(|&t| xs.iter().map(|&x| Complex64::new((-t).exp() * f(x), 0.0)).collect()).collect();
        let g = SpaceTimeSamples::new(grid, times, values).unwrap();
        let z = z_transform(&g, &w, mm, t_final).unwrap();
        let split = p1_p2_split(&z, &w, mm, t_final, params).unwrap();
        let t: f64 = 0.5;
        let weighted: Vec<Complex64> = xs
            .iter()
            .map(|&x| {
                let pg = (-t).exp() * (-f(x) - fxx(x) + params.potential(x) * f(x));
                Complex64::new(pg * (-alpha_weight(&w, mm, t, t_final, x).unwrap()).exp(), 0.0)
            })
            .collect();
        split.identity_defect(&[weighted])
    }

    #[test]
    fn split_identity_is_second_order() {
        let d: Vec<f64> = [(100, 0.02), (200, 0.01), (400, 0.005)].iter().map(|&(m, dt)| split_defect(m, dt)).collect();
        let rate = d[1] / d[2];
        assert!((rate - 4.0).abs() < 0.4, "defects {d:?}");
    }

    #[test]
    fn split_needs_uniform_times() {
        let w = weight();
        let grid = Grid1D::new(20).unwrap();
        let n = grid.interior_len();
        let z = SpaceTimeSamples::new(grid, vec![0.2, 0.3, 0.5], vec![vec![Complex64::new(0.0, 0.0); n]; 3]).unwrap();
        assert!(p1_p2_split(&z, &w, 1.0, 1.0, ModeParams::torus(0, 0)).is_err());
    }

    fn element(scale: f64, n: i64, p: i64, source: bool) -> CorpusElement {
        let grid = Grid1D::new(80).unwrap();
        let g0 = ModeField::from_fn(grid, move |x| scale * (std::f64::consts::FRAC_PI_2 * (x + 1.0)).sin() * (1.0 + 0.5 * x));
        let source = if source { SourceSpec::constant(ModeField::from_fn(grid, move |x| scale * (1.0 - x * x))) } else { SourceSpec::None };
        CorpusElement { id: 0, params: ModeParams::torus(n, p), t: 1.0, g0, source }
    }

    fn opts() -> CheckOptions {
        CheckOptions { time_nodes: 24, time_samples: 65, ..CheckOptions::default() }
    }

    #[test]
    fn sides_are_two_homogeneous() {
        let w = weight();
        for src in [false, true] {
            let (l1, r1) = carleman_sides(&element(1.0, 2, 1, src), &w, 3.0, &opts()).unwrap();
            let (l10, r10) = carleman_sides(&element(10.0, 2, 1, src), &w, 3.0, &opts()).unwrap();
            assert!(l1 > 0.0 && r1 > 0.0);
            assert!((l10 / l1 - 100.0).abs() < 1e-8 && (r10 / r1 - 100.0).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_element_is_trivial() {
        let w = weight();
        let (l, r) = carleman_sides(&element(0.0, 1, 1, false), &w, 2.0, &opts()).unwrap();
        assert_eq!((l, r), (0.0, 0.0));
    }

    #[test]
    fn homogeneous_full_observation_fit() {
        let corpus: Vec<CorpusElement> = [(0, 0), (1, 2), (3, 1)]
            .iter()
            .enumerate()
            .map(|(id, &(n, p))| CorpusElement { id, ..element(1.0, n, p, false) })
            .collect();
        let o = CheckOptions { a: -1.0, b: 1.0, fit: C1FitMode::Whole, ..opts() };
        let report = carleman_check(&corpus, &o).unwrap();
        assert!(report.c1 > 0.0 && report.passed());
        // Full observation: the RHS is the zero-order part of the LHS.
        assert!(report.rows.iter().all(|r| r.rhs < r.lhs && r.rhs > 0.0));
    }

    #[test]
    fn fitted_c1_is_scale_invariant() {
        let build = |s: f64| -> Vec<CorpusElement> {
            (0..4).map(|id| CorpusElement { id, ..element(s, id as i64, (id % 2) as i64, id % 2 == 1) }).collect()
        };
        let a = carleman_check(&build(1.0), &opts()).unwrap();
        let b = carleman_check(&build(10.0), &opts()).unwrap();
        assert!((a.c1 / b.c1 - 1.0).abs() < 1e-10);
    }
}
