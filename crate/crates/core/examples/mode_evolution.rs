//! Forced evolution of one Fourier mode and the Duhamel energy bound.

use std::sync::Arc;

use heisenberg_obs::error::Result;
use heisenberg_obs::evolution::{check_duhamel_bound, evolve_mode, SourceSpec};
use heisenberg_obs::fourier_stack::ModeField;
use heisenberg_obs::mode_operator::{Grid1D, ModeParams};

fn main() -> Result<()> {
    let grid = Grid1D::new(400)?;
    let params = ModeParams::torus(2, 3);
    let g0 = ModeField::from_fn(grid, |x| (std::f64::consts::FRAC_PI_2 * (x + 1.0)).sin());
    let h = ModeField::from_fn(grid, |x| (-(x - 0.2).powi(2) / 0.02).exp());
    let source = SourceSpec::TimeProfile { r: Arc::new(|t| (2.0 * t).cos()), h };
    let times: Vec<f64> = (0..=5).map(|i| 0.1 * i as f64).collect();
    let traj = evolve_mode(params, &g0, &source, 0.5, &times)?;
    for (t, norm) in traj.times.iter().zip(traj.norms()) {
        println!("t = {t:.2}  |g| = {norm:.6e}");
    }
    let d = check_duhamel_bound(params, &g0, &source, 0.1, 0.5)?;
    println!("Duhamel: {:.4e} <= {:.4e} ({})", d.lhs, d.rhs, d.holds);
    Ok(())
}
