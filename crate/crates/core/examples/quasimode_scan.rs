//! Gaussian quasi-modes: observation/final energy slopes in `k` and the
//! crossover horizon, compared with `(1+a)²/8`.

use heisenberg_obs::error::Result;
use heisenberg_obs::quasimode::{tmin_scan, ScanOptions};

fn main() -> Result<()> {
    let a = -0.5;
    let ks = [8, 16, 24, 32, 40];
    let ts: Vec<f64> = (0..9).map(|i| 0.0078125 * 2f64.powf(i as f64 * 0.5)).collect();
    let report = tmin_scan(a, &ks, &ts, ScanOptions::default())?;
    for s in &report.slopes {
        println!("T = {:.5}  d log ratio / dk = {:+.4}", s.t, s.ratio_slope);
    }
    println!("crossover {:?}, threshold {:.5}", report.crossover, report.theoretical_threshold);
    Ok(())
}
