//! Lowest eigenvalue of `-∂² + (px+n)²` and the two dissipation bounds.

use heisenberg_obs::error::Result;
use heisenberg_obs::mode_operator::{lambda_np_richardson, verify_dissipation_bounds, Grid1D, ModeParams};

fn main() -> Result<()> {
    let grid = Grid1D::new(1000)?;
    for (n, p) in [(0, 0), (0, 4), (3, 0), (10, 2), (-6, 9)] {
        let e = lambda_np_richardson(ModeParams::torus(n, p), grid)?;
        println!("lambda({n:>3},{p:>2}) = {:.8}  (m={} {:.8}, 2m {:.8})", e.richardson, grid.m(), e.coarse, e.fine);
    }
    let report = verify_dissipation_bounds(8, 8, Grid1D::new(400)?)?;
    println!("bounds hold on |n|,|p| <= 8: {}", report.passed());
    Ok(())
}
