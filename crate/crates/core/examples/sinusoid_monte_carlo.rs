//! Levels vs SFD on the sinusoid process across a few noise levels.
//!
//! cargo run --release --example sinusoid_monte_carlo

use sfd::estimation::EstimatorKind;
use sfd::simulation::{monte_carlo, DGPConfig, DgpKind, EstimatorSpec};

fn main() -> sfd::Result<()> {
    let estimators = [
        EstimatorSpec::new(EstimatorKind::Levels),
        EstimatorSpec::new(EstimatorKind::Sfd),
    ];
    println!(
        "{:>6} {:>10} {:>22} {:>10} {:>22}",
        "phi", "levels", "95% band", "sfd", "95% band"
    );
    for phi in [0.04, 0.25, 0.5, 1.0] {
        let cfg = DGPConfig::new(DgpKind::Sinusoid { lambda: 360.0, phi }, 1000, 1);
        let r = monte_carlo(&cfg, &estimators, 500)?;
        let l = r.estimator("levels").unwrap().summary("x").unwrap();
        let s = r.estimator("sfd").unwrap().summary("x").unwrap();
        println!(
            "{phi:>6} {:>10.4} {:>22} {:>10.4} {:>22}",
            l.mean,
            format!("[{:.3}, {:.3}]", l.q025, l.q975),
            s.mean,
            format!("[{:.3}, {:.3}]", s.q025, s.q975),
        );
    }
    Ok(())
}
