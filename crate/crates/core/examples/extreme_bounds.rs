//! Every subset of controls, levels vs SFD, on a lattice whose rows carry
//! an unobserved-looking confounder.

use sfd::estimation::EstimatorKind;
use sfd::inference::SeMethod;
use sfd::robustness::{extreme_bounds, CovariateGroup};
use sfd::simulation::{DGPConfig, DgpKind};

fn main() -> sfd::Result<()> {
    let sim = DGPConfig::new(DgpKind::ChannelConfounded { rows: 20 }, 2000, 10).draw(0)?;
    let path = sim.default_path()?;
    let controls = [
        CovariateGroup::new("confounder proxy", &["c_proxy"]),
        CovariateGroup::new("w", &["w1", "w2"]),
    ];
    let r = extreme_bounds(
        &sim.dataset,
        &path,
        &CovariateGroup::new("x", &["x"]),
        &controls,
        &[EstimatorKind::Levels, EstimatorKind::Sfd],
        &SeMethod::Ols,
    )?;
    for p in &r.points {
        let est = p.fit.as_ref().map(|f| f.coefficients[1].estimate);
        println!("{:>7} {:<28} {:?}", p.kind.to_string(), p.id, est);
    }
    for kind in [EstimatorKind::Levels, EstimatorKind::Sfd] {
        let d = r.dispersion(kind, "x").unwrap();
        println!(
            "{kind}: range [{:.4}, {:.4}], variance {:.2e}",
            d.min, d.max, d.variance
        );
    }
    Ok(())
}
