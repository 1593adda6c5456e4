//! Crossover horizon of the quasi-mode scan at large `k`, where the
//! finite-`k` bias of the `k ≤ 40` scan has mostly gone.
//!
//! Usage: `minimal_time_large_k [a] [m]` (defaults `-0.5`, `6000`).

use heisenberg_obs::error::Result;
use heisenberg_obs::quasimode::{theoretical_threshold, tmin_scan, ScanOptions};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let a: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(-0.5);
    let m: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(6000);
    let threshold = theoretical_threshold(a);
    let ks = [200, 300, 400, 600, 800];
    let ts: Vec<f64> = (-4..=4).map(|i| threshold * 2f64.powf(i as f64 / 4.0)).collect();
    let report = tmin_scan(a, &ks, &ts, ScanOptions { m: Some(m), modes: 48 })?;
    for s in &report.slopes {
        println!("T = {:.5}  slope {:+.5}  (R² {:.4})", s.t, s.ratio_slope, s.ratio_r_squared);
    }
    println!("crossover {:?}, threshold {threshold:.5}, projection residual {:.1e}", report.crossover, report.max_projection_residual);
    Ok(())
}
