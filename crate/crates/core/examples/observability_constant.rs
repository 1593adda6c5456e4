//! Truncated observability constant of a tube region and its spectral
//! inequality counterpart on the `y`-arcs.

use std::f64::consts::PI;

use heisenberg_obs::error::Result;
use heisenberg_obs::mode_operator::EigenCache;
use heisenberg_obs::observability::{obs_constant_truncated, spectral_inequality_scan, ObservationRegion, Truncation, YArc};

fn main() -> Result<()> {
    let arcs = vec![YArc { start: 0.0, length: PI }];
    let region = ObservationRegion::new(-0.5, 0.5, arcs.clone())?;
    let cache = EigenCache::new();
    for t in [0.5, 1.0, 2.0] {
        let trunc = Truncation { n_max: 3, p_max: 3, m: 200, kx: 8 };
        let r = obs_constant_truncated(&region, t, trunc, &cache)?;
        println!("T = {t}: C_obs = {:.6e} (argmax p = {}, jitter {:.1e})", r.value, r.argmax_p, r.jitter);
    }
    let (rows, fit) = spectral_inequality_scan(&arcs, &[4, 8, 16, 32])?;
    for r in &rows {
        println!("{r:?}");
    }
    println!("log-constant slope vs N: {:.4}", fit.slope);
    Ok(())
}
