//! Splits x'c into history and difference terms on one sinusoid draw.

use sfd::decompose_bias;
use sfd::estimation::{fit, EstimatorKind};
use sfd::inference::SeMethod;
use sfd::ordering::{order_1d, Axis};
use sfd::simulation::simulate_sinusoid;

fn main() -> sfd::Result<()> {
    for lambda in [90.0, 360.0, 2000.0] {
        let sim = simulate_sinusoid(1000, lambda, 0.5, 4)?;
        let path = order_1d(&sim.dataset, Axis::X);
        let d = decompose_bias(&sim.dataset, &sim.confounder, &sim.alpha, &path)?;
        let lev = fit(&sim.dataset, &path, EstimatorKind::Levels, &SeMethod::Ols)?;
        let sfd = fit(&sim.dataset, &path, EstimatorKind::Sfd, &SeMethod::Ols)?;
        println!("lambda {lambda}");
        println!(
            "  W1 {:>9.3}  W2 {:>9.3}  W3 {:>9.3}  total {:>9.3}",
            d.w1[(0, 0)],
            d.w2[(0, 0)],
            d.w3[(0, 0)],
            d.total[(0, 0)]
        );
        println!(
            "  history part of levels bias {:.4}, levels - sfd {:.4}",
            d.implied_bias_levels[0],
            lev.coefficients[1] - sfd.coefficients[1]
        );
    }
    Ok(())
}
