//! Stability ratios of the inverse source problem, per mode and for a random
//! real source stack.

use std::f64::consts::PI;

use heisenberg_obs::error::Result;
use heisenberg_obs::fourier_stack::{random_stack, ModeField};
use heisenberg_obs::mode_operator::{Grid1D, ModeParams};
use heisenberg_obs::observability::{ObservationRegion, YArc};
use heisenberg_obs::stability::{stability_3d, uniform_stability_sweep, SourceModel, StabilityOptions, StabilityThresholds};

fn main() -> Result<()> {
    let grid = Grid1D::new(64)?;
    let opts = StabilityOptions::default();
    let model = SourceModel::unit();
    let profile = move |_: ModeParams| ModeField::from_fn(grid, |x| (1.0 - x * x) * (1.0 + 0.5 * x));
    let sweep: Vec<ModeParams> = (-8..=8).flat_map(|n| (-8..=8).map(move |p| ModeParams::torus(n, p))).collect();
    let r = uniform_stability_sweep((-0.5, 0.5), 4.0, 8.0, &model, &profile, &sweep, &opts)?;
    println!("max ratio {:.6} at {:?}, bounded {}", r.max_ratio, r.argmax, r.bounded);

    let region = ObservationRegion::new(-0.5, 0.5, vec![YArc { start: 0.0, length: PI }])?;
    let h = random_stack(3, 3, grid, 3, true)?;
    let rep = stability_3d(&region, &model, &h, 4.0, 8.0, StabilityThresholds { t_star: 1.0, c10: 4.0 }, &opts)?;
    println!("3D ratio {:.6}, smallness {} < eta {}: {}", rep.ratio, rep.smallness, rep.eta, rep.passed);
    Ok(())
}
