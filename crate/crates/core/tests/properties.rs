use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use heisenberg_obs::carleman::{alpha_weight, build_weight, m_param};
use heisenberg_obs::fourier_stack::{decompose, parseval_norm, random_stack, reconstruct, ModeField};
use heisenberg_obs::harness::Experiment;
use heisenberg_obs::lr_machinery::{build_schedule, j0_of_p};
use heisenberg_obs::mode_operator::{lambda_np, Grid1D, ModeParams};
use heisenberg_obs::observability::{exp_integral, mode_obs_quotient};
use heisenberg_obs::quasimode::CutoffPair;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dissipation_bounds(n in -12i64..=12, p in -12i64..=12) {
        let lambda = lambda_np(ModeParams::torus(n, p), Grid1D::new(300).unwrap()).unwrap();
        prop_assert!(lambda >= (p.abs() as f64 + 1.0) / 4.0 - 1e-6);
        if n.abs() >= 2 * p.abs() {
            prop_assert!(lambda >= (n * n) as f64 / 4.0 - 1e-6);
        }
    }

    #[test]
    fn exp_integral_matches_closed_form(s in -50.0f64..50.0, t in 1e-3f64..5.0) {
        let v = exp_integral(s, t);
        let direct = if s.abs() < 1e-12 { t } else { (1.0 - (-s * t).exp()) / s };
        prop_assert!((v - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        prop_assert!(v > 0.0);
    }

    #[test]
    fn fourier_round_trip(seed in 0u64..1000, n_max in 0i64..6, p_max in 0i64..6, real in any::<bool>()) {
        let grid = Grid1D::new(8).unwrap();
        let s = random_stack(n_max, p_max, grid, seed, real).unwrap();
        let q = 4 * n_max.max(p_max) as usize + 2;
        let field = reconstruct(&s, q, q).unwrap();
        prop_assert!((field.l2_norm_sq() - parseval_norm(&s)).abs() <= 1e-10 * parseval_norm(&s));
        let back = decompose(&field, n_max, p_max).unwrap();
        for ((_, a), (_, b)) in s.iter().zip(back.iter()) {
            for (u, v) in a.values.iter().zip(&b.values) {
                prop_assert!((u - v).norm() < 1e-12);
            }
        }
        if real {
            prop_assert!(field.max_imag() < 1e-12);
        }
    }

    #[test]
    fn schedule_sums_to_horizon(t in 0.1f64..10.0, p in -50.0f64..50.0, rho in 0.05f64..0.95) {
        let s = build_schedule(t, p, rho).unwrap();
        prop_assert!((s.alpha_limit() - t).abs() <= 1e-12 * t.max(1.0));
        if p != 0.0 {
            let j0 = j0_of_p(p);
            prop_assert!(2f64.powi(j0 as i32 - 1) <= 2.0 * p.abs() && 2.0 * p.abs() < 2f64.powi(j0 as i32));
        }
    }

    #[test]
    fn carleman_parameter_scaling(c2 in 0.1f64..4.0, t in 0.1f64..4.0, n in -10i64..10, p in 0.0f64..10.0) {
        let one = m_param(1.0, t, n, p).unwrap().m;
        prop_assert!((m_param(c2, t, n, p).unwrap().m - c2 * one).abs() <= 1e-12 * c2 * one);
        prop_assert!(one >= t + t * t);
    }

    #[test]
    fn alpha_is_smallest_mid_window(x in -1.0f64..1.0, s in 0.001f64..0.999) {
        let w = build_weight(-0.5, 0.5).unwrap();
        let mid = alpha_weight(&w, 2.0, 1.0, 2.0, x).unwrap();
        prop_assert!(alpha_weight(&w, 2.0, 2.0 * s, 2.0, x).unwrap() >= mid * (1.0 - 1e-14));
        prop_assert!(w.beta(x) >= 1.0);
    }

    #[test]
    fn cutoffs_stay_in_unit_interval(center in -0.95f64..0.95, x in -1.0f64..1.0) {
        let c = CutoffPair::around(center, center.max(-0.9)).unwrap();
        for sigma in [-1i8, 1] {
            let (v, _, _) = c.theta(sigma, x);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn unknown_keys_are_rejected(key in "[a-z]{3,8}") {
        prop_assume!(!["n", "p", "m", "k", "richardson", "command", "out"].contains(&key.as_str()));
        let text = format!("n = 0\np = 0.0\nm = 100\n{key} = 1\n");
        prop_assert!(Experiment::parse(Some("eig"), &text).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn observing_less_raises_the_quotient(seed in 0u64..100, n in -3i64..=3, p in -3i64..=3, t in 0.2f64..1.5) {
        let grid = Grid1D::new(80).unwrap();
        let s = random_stack(0, 0, grid, seed, false).unwrap();
        let g0: &ModeField = s.get(0, 0).unwrap();
        let g0 = g0.scaled(Complex64::from_polar(1.0, PI / 3.0));
        let params = ModeParams::torus(n, p);
        let full = mode_obs_quotient(params, &g0, -1.0, 1.0, t).unwrap();
        let part = mode_obs_quotient(params, &g0, -0.5, 0.5, t).unwrap();
        prop_assert!(part >= full * (1.0 - 1e-10));
    }
}
