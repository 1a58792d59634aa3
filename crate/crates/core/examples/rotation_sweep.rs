//! Stability of the SFD slope when channels are redrawn at every degree.

use sfd::estimation::EstimatorKind;
use sfd::inference::SeMethod;
use sfd::robustness::{full_thetas, rotation_sweep};
use sfd::simulation::simulate_isotropic_grid;

fn main() -> sfd::Result<()> {
    let sim = simulate_isotropic_grid(30, 8)?;
    let sweep = rotation_sweep(&sim.dataset, 1.0, &full_thetas(), EstimatorKind::Sfd, &SeMethod::Hc)?;
    let d = sweep.dispersion(EstimatorKind::Sfd, "x").unwrap();
    println!(
        "{} angles: mean {:.4}, min {:.4}, median {:.4}, max {:.4}, CoV {:?}",
        d.n, d.mean, d.min, d.median, d.max, d.coefficient_of_variation
    );
    for p in sweep.points.iter().step_by(30) {
        let slope = p
            .fit
            .as_ref()
            .and_then(|f| f.coefficients.iter().find(|c| c.name == "x"))
            .map(|c| c.estimate);
        println!("  theta {:>4}: {:?}", p.theta.unwrap_or_default(), slope);
    }
    Ok(())
}
