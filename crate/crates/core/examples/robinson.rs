//! Robinson partial-linear fits over a range of window half-widths.

use sfd::estimation::{fit, robinson_fit, EstimatorKind};
use sfd::inference::SeMethod;
use sfd::ordering::{order_1d, Axis};
use sfd::simulation::{DGPConfig, DgpKind};

fn main() -> sfd::Result<()> {
    let sim = DGPConfig::new(DgpKind::SmoothTrend, 800, 6).draw(0)?;
    let path = order_1d(&sim.dataset, Axis::X);
    let lev = fit(&sim.dataset, &path, EstimatorKind::Levels, &SeMethod::Hc)?;
    let sfd = fit(&sim.dataset, &path, EstimatorKind::Sfd, &SeMethod::Hc)?;
    println!(
        "levels {:.4}   sfd {:.4}",
        lev.coef("x").unwrap(),
        sfd.coef("x").unwrap()
    );
    for h in [1, 2, 5, 20, 100, 800] {
        let r = robinson_fit(&sim.dataset, &path, h, &SeMethod::Hc)?;
        println!(
            "h = {h:>3}: slope {:.4} (se {:.4})",
            r.coef("x").unwrap(),
            r.se("x").unwrap()
        );
    }
    Ok(())
}
