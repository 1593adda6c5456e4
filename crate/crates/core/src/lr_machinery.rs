//! Lebeau–Robbiano machinery: frequency packets `Π_{j,p}`, the dyadic time
//! schedule and the `δ / A / B` constant recursions (in log space).

use std::f64::consts::{LN_2, PI};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{evolve_mode, source_energy, StackSource};
use crate::fourier_stack::FourierStack;

/// `j₀(p) = ⌊log₂|p|⌋ + 2`, and `0` for `p = 0`; `2^{j₀-1} ≤ 2|p| < 2^{j₀}`.
pub fn j0_of_p(p: f64) -> u32 {
    if p == 0.0 {
        return 0;
    }
    let ap = p.abs();
    let mut j0 = (ap.log2().floor() + 2.0).max(0.0) as i64;
    // Guard against libm rounding near powers of two.
    while j0 > 0 && 2f64.powi(j0 as i32 - 1) > 2.0 * ap {
        j0 -= 1;
    }
    while 2.0 * ap >= 2f64.powi(j0 as i32) {
        j0 += 1;
    }
    j0 as u32
}

/// `λ(2^j) = 2^{2j}/4`.
pub fn lambda_packet(j: u32) -> f64 {
    4f64.powi(j as i32) / 4.0
}

/// Constant `K_*(ρ) = (2^ρ - 1)/2^{2+ρ}`, for which `K ≥ 2 K_* T` for every `p`.
pub fn k_star(rho: f64) -> f64 {
    (2f64.powf(rho) - 1.0) / 2f64.powf(2.0 + rho)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LRSchedule {
    pub t: f64,
    pub p: f64,
    pub rho: f64,
    pub j0: u32,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScheduleRow {
    pub j: u32,
    pub tau: f64,
    pub alpha: f64,
    pub i_lo: f64,
    pub i_hi: f64,
    pub j_lo: f64,
    pub j_hi: f64,
}

/// Builds the schedule `K = T(1 - 2^{-ρ}) 2^{ρ j₀}/2`.
pub fn build_schedule(t: f64, p: f64, rho: f64) -> Result<LRSchedule> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::domain("T must be positive"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !p.is_finite() {
        return Err(Error::NonFinite("p".into()));
    }
    let j0 = j0_of_p(p);
    let k = t * (1.0 - 2f64.powf(-rho)) * 2f64.powf(rho * j0 as f64) / 2.0;
    let s = LRSchedule { t, p, rho, j0, k };
    if p != 0.0 {
        let (lo, hi) = s.k_bracket();
        if !(lo < k && k <= hi * (1.0 + 1e-12)) {
            return Err(Error::Numeric(format!("K = {k} outside bracket ({lo}, {hi}]")));
        }
    }
    Ok(s)
}

impl LRSchedule {
    /// `τ_j = K 2^{-jρ}`.
    pub fn tau(&self, j: u32) -> f64 {
        self.k * 2f64.powf(-(j as f64) * self.rho)
    }

    /// `α_j = 2 Σ_{k=j₀}^{j} τ_k` (zero for `j < j₀`).
    pub fn alpha(&self, j: u32) -> f64 {
        if j < self.j0 {
            return 0.0;
        }
        neumaier((self.j0..=j).map(|k| 2.0 * self.tau(k)))
    }

    /// `lim α_j`, summed until the terms fall below the double-precision floor.
    pub fn alpha_limit(&self) -> f64 {
        let mut terms = Vec::new();
        let mut j = self.j0;
        loop {
            let term = 2.0 * self.tau(j);
            terms.push(term);
            if term < 1e-20 * self.t {
                break;
            }
            j += 1;
        }
        neumaier(terms.into_iter())
    }

    /// Bracket `((2^ρ-1)/2 T|p|^ρ, 2^ρ(2^ρ-1)/2 T|p|^ρ]` valid for `p ≠ 0`.
    pub fn k_bracket(&self) -> (f64, f64) {
        let base = (2f64.powf(self.rho) - 1.0) / 2.0 * self.t * self.p.abs().powf(self.rho);
        (base, 2f64.powf(self.rho) * base)
    }

    /// Rows `j = j₀ .. j_max`; interval columns are NaN at `j = j₀`.
    pub fn table(&self, j_max: u32) -> Vec<ScheduleRow> {
        let mut rows = Vec::new();
        let mut prev_alpha = 0.0;
        for j in self.j0..=j_max.max(self.j0) {
            let tau = self.tau(j);
            let alpha = self.alpha(j);
            let (i_lo, i_hi, j_lo, j_hi) = if j > self.j0 {
                (self.t - prev_alpha - tau, self.t - prev_alpha, self.t - alpha, self.t - prev_alpha)
            } else {
                (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
            };
            rows.push(ScheduleRow { j, tau, alpha, i_lo, i_hi, j_lo, j_hi });
            prev_alpha = alpha;
        }
        rows
    }
}

fn neumaier(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in terms {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Keeps modes with z-frequency `p` and `|n| ≤ 2^j` (`j = None` keeps all `n`).
pub fn packet_project(stack: &FourierStack, j: Option<u32>, p: i64) -> Result<FourierStack> {
    let bound = match j {
        Some(j) => {
            let b = 1i64.checked_shl(j).filter(|&b| b > 0).ok_or_else(|| Error::domain("packet index too large"))?;
            if b > stack.n_max {
                return Err(Error::domain(format!("truncation N = {} does not cover |n| ≤ 2^{j}", stack.n_max)));
            }
            b
        }
        None => i64::MAX,
    };
    Ok(stack.filtered(|n, q| q == p && n.abs() <= bound))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RecursionRow {
    pub j: u32,
    pub log_delta: f64,
    pub log_a: f64,
    pub log_b: f64,
    pub log_btilde: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RecursionInputs {
    pub c8: f64,
    pub c9: f64,
    pub k_star: f64,
    pub t: f64,
    pub p: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecursionState {
    pub inputs: RecursionInputs,
    pub j0: u32,
    pub rows: Vec<RecursionRow>,
    /// `log sup_j B̃_j`.
    pub log_sup_btilde: f64,
    /// `log sup_j A_j`.
    pub log_sup_a: f64,
    /// `log(sup_j B̃_j / T)`.
    pub log_sup_btilde_over_t: f64,
    /// `log(sup_j A_j / T²)`.
    pub log_sup_a_over_t2: f64,
    pub a_nondecreasing: bool,
    pub bounded: bool,
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Constant grid `C8, C9 ∈ {1/2, 1, 2}`, `T ∈ {1, 2, 4}`, `p ∈ {0, 4}` at
/// `ρ = 1/2` with `K* = K*(ρ)`.
pub fn default_recursion_grid() -> Vec<RecursionInputs> {
    let rho = 0.5;
    let mut out = Vec::new();
    for c8 in [0.5, 1.0, 2.0] {
        for c9 in [0.5, 1.0, 2.0] {
            for t in [1.0, 2.0, 4.0] {
                for p in [0.0, 4.0] {
                    out.push(RecursionInputs { c8, c9, k_star: k_star(rho), t, p, rho });
                }
            }
        }
    }
    out
}

/// Runs `δ_{j+1} = 1 + B_j e^{C8 2^{j+1}}`,
/// `A_{j+1} = A_j + B_j/2^{2j} + δ_{j+1} C9 T/2^{j+1}`,
/// `B_{j+1} = (2B_j + δ_{j+1}T) e^{-K_* T 2^{(2-ρ)(j+1)}}` from `j₀+1` to `j_max`.
pub fn run_constant_recursion(inputs: RecursionInputs, j_max: u32) -> Result<RecursionState> {
    let RecursionInputs { c8, c9, k_star, t, p, rho } = inputs;
    if [c8, c9, k_star, t].iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(Error::domain("recursion constants must be positive"));
    }
    if t < 1.0 {
        return Err(Error::domain("the recursion assumes T ≥ 1"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain("rho must lie in (0, 1)"));
    }
    let j0 = j0_of_p(p);
    let first = j0 + 1;
    if j_max < first {
        return Err(Error::domain(format!("j_max must be at least j0 + 1 = {first}")));
    }
    let ln_t = t.ln();
    let ln_c9t = (c9 * t).ln();
    let dissip = |j: u32| k_star * t * 2f64.powf((2.0 - rho) * j as f64);
    let gain = |j: u32| c8 * 2f64.powi(j as i32 + 1);
    let mut log_delta = 0.0;
    let mut log_a = ln_c9t - first as f64 * LN_2;
    let mut log_b = ln_t - dissip(first);
    let mut rows = vec![RecursionRow { j: first, log_delta, log_a, log_b, log_btilde: log_b + gain(first) }];
    let mut a_nondecreasing = true;
    for j in first..j_max {
        let next_delta = softplus(log_b + gain(j));
        let next_a = log_sum_exp(&[log_a, log_b - 2.0 * j as f64 * LN_2, next_delta + ln_c9t - (j + 1) as f64 * LN_2]);
        let next_b = log_sum_exp(&[LN_2 + log_b, next_delta + ln_t]) - dissip(j + 1);
        if next_a < log_a {
            a_nondecreasing = false;
        }
        log_delta = next_delta;
        log_a = next_a;
        log_b = next_b;
        if ![log_delta, log_a, log_b].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("recursion at j = {}", j + 1)));
        }
        rows.push(RecursionRow { j: j + 1, log_delta, log_a, log_b, log_btilde: log_b + gain(j + 1) });
    }
    let log_sup_btilde = rows.iter().map(|r| r.log_btilde).fold(f64::NEG_INFINITY, f64::max);
    let log_sup_a = rows.iter().map(|r| r.log_a).fold(f64::NEG_INFINITY, f64::max);
    let tail = &rows[rows.len().saturating_sub(6)..];
    let btilde_decaying = tail.windows(2).all(|w| w[1].log_btilde < w[0].log_btilde);
    let delta_settled = rows.last().map(|r| r.log_delta < 1e-6).unwrap_or(false);
    let bounded = log_sup_btilde.is_finite() && log_sup_a.is_finite() && a_nondecreasing && btilde_decaying && delta_settled;
    Ok(RecursionState {
        inputs,
        j0,
        log_sup_btilde_over_t: log_sup_btilde - ln_t,
        log_sup_a_over_t2: log_sup_a - 2.0 * ln_t,
        log_sup_btilde,
        log_sup_a,
        rows,
        a_nondecreasing,
        bounded,
    })
}

/// Both sides of the packet Duhamel inequality for `Π_{j2} - Π_{j1}` at fixed `p`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PacketDuhamelReport {
    pub p: i64,
    pub j1: u32,
    pub j2: Option<u32>,
    pub lambda_packet: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `‖(Π_{j2}-Π_{j1})g(T2)‖² ≤ 2‖(Π_{j2}-Π_{j1})g(T1)‖² e^{-2λ(2^{j1})(T2-T1)}
///  + λ(2^{j1})^{-1} ∫_{T1}^{T2} ‖(Π_{j2}-Π_{j1})h‖²`, norms in `L²(Ω)`.
pub fn check_packet_duhamel(
    stack0: &FourierStack,
    source: &StackSource,
    p: i64,
    j1: u32,
    j2: Option<u32>,
    t1: f64,
    t2: f64,
) -> Result<PacketDuhamelReport> {
    if !(0.0 <= t1 && t1 < t2) {
        return Err(Error::domain("need 0 ≤ T1 < T2"));
    }
    if j1 < j0_of_p(p as f64) {
        return Err(Error::domain(format!("j1 = {j1} below j0(p) = {}", j0_of_p(p as f64))));
    }
    if let Some(j2) = j2 {
        if j2 <= j1 {
            return Err(Error::domain("need j2 > j1"));
        }
    }
    let hi = packet_project(stack0, j2, p)?;
    let lo_bound = 1i64 << j1;
    let packet = hi.filtered(|n, _| n.abs() > lo_bound);
    let lam = lambda_packet(j1);
    let modes: Vec<_> = packet.iter().map(|(mp, f)| (mp, f.clone())).collect();
    let parts = modes
        .par_iter()
        .map(|(mp, g0)| {
            let src = source(*mp);
            let traj = evolve_mode(*mp, g0, &src, t2, &[t1, t2])?;
            let e = source_energy(&src, g0.grid, t1, t2)?;
            Ok((traj.states[0].norm_sq(), traj.states[1].norm_sq(), e))
        })
        .collect::<Result<Vec<_>>>()?;
    let w = (2.0 * PI).powi(2);
    let n1: f64 = w * parts.iter().map(|x| x.0).sum::<f64>();
    let lhs: f64 = w * parts.iter().map(|x| x.1).sum::<f64>();
    let src: f64 = w * parts.iter().map(|x| x.2).sum::<f64>();
    let rhs = 2.0 * n1 * (-2.0 * lam * (t2 - t1)).exp() + src / lam;
    Ok(PacketDuhamelReport { p, j1, j2, lambda_packet: lam, lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-6) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier_stack::ModeField;
    use crate::mode_operator::Grid1D;

    #[test]
    fn j0_values() {
        assert_eq!(j0_of_p(0.0), 0);
        assert_eq!(j0_of_p(4.0), 4);
        assert_eq!(j0_of_p(1.0), 2);
        for p in [0.3, 1.0, 1.5, 2.0, 3.0, 7.99, 8.0, 1024.0, -5.0] {
            let j0 = j0_of_p(p) as i32;
            assert!(2f64.powi(j0 - 1) <= 2.0 * p.abs() && 2.0 * p.abs() < 2f64.powi(j0), "p={p}");
        }
    }

    #[test]
    fn schedule_hand_values() {
        let s = build_schedule(1.0, 4.0, 0.5).unwrap();
        assert_eq!(s.j0, 4);
        assert!((s.k - 2.0 * (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-15);
        assert!((s.tau(4) - 0.146_446_609_406_726_24).abs() < 1e-15);
        assert!((s.alpha_limit() - 1.0).abs() < 1e-12);
        assert!(build_schedule(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn lambda_packet_values() {
        assert_eq!(lambda_packet(2), 4.0);
        assert_eq!(lambda_packet(0), 0.25);
    }

    #[test]
    fn recursion_hand_values() {
        let r = run_constant_recursion(RecursionInputs { c8: 1.0, c9: 1.0, k_star: 1.0, t: 1.0, p: 0.0, rho: 0.5 }, 10).unwrap();
        assert_eq!(r.rows[0].j, 1);
        assert_eq!(r.rows[0].log_delta, 0.0);
        assert!((r.rows[0].log_a - (0.5f64).ln()).abs() < 1e-15);
        let b1 = (-(2f64.powf(1.5))).exp();
        assert!((r.rows[0].log_b.exp() - b1).abs() < 1e-15);
        assert!((r.rows[0].log_b.exp() - 0.059_10).abs() < 1e-5);
        assert!((r.rows[1].log_delta.exp() - (1.0 + b1 * 4f64.exp())).abs() < 1e-13);
    }

    #[test]
    fn projection_examples() {
        let g = Grid1D::new(4).unwrap();
        let f = ModeField::from_fn(g, |x| 1.0 - x * x);
        let mut s = FourierStack::new(8, 2, g).unwrap();
        s.insert(3, 1, f.clone()).unwrap();
        assert_eq!(packet_project(&s, Some(2), 1).unwrap().len(), 1);
        let mut s5 = FourierStack::new(8, 2, g).unwrap();
        s5.insert(5, 1, f).unwrap();
        assert!(packet_project(&s5, Some(2), 1).unwrap().is_empty());
        assert!(packet_project(&s5, Some(4), 1).is_err());
    }
}
