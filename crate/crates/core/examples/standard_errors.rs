//! One SFD fit, every standard-error method.

use sfd::difference;
use sfd::estimation::{fit, EstimatorKind};
use sfd::inference::{residual_autocorrelation, yatchew_variance, SeMethod};
use sfd::simulation::{DGPConfig, DgpKind};

fn main() -> sfd::Result<()> {
    let sim = DGPConfig::new(DgpKind::ChannelConfounded { rows: 10 }, 1000, 5).draw(0)?;
    let ds = sim.dataset.select_columns(&["x", "w1"])?;
    let path = sim.default_path()?;
    let base = fit(&ds, &path, EstimatorKind::Sfd, &SeMethod::Ols)?;

    let methods = [
        "ols",
        "hc",
        "newey-west:1",
        "newey-west:4",
        "conley:3:1.5",
        "cluster",
        "bootstrap:500:1",
        "block-bootstrap:500:1",
    ];
    println!("slope on x = {:.4}", base.coef("x").unwrap());
    for m in methods {
        let se: SeMethod = m.parse()?;
        let f = base.with_se(&se)?;
        println!("{:>22}  se(x) = {:.5}", se.label(), f.se("x").unwrap());
        for w in &f.warnings {
            println!("{:>22}  warning: {w}", "");
        }
    }

    let rho = residual_autocorrelation(&base.residuals, &base.layout().channel_of_row, 1);
    println!("lag-1 residual autocorrelation {rho:.3}");
    let y = yatchew_variance(&difference(&ds, &path, 1)?)?;
    println!(
        "large-sample variance of the slopes: {:?}",
        y.vcov.diagonal().as_slice()
    );
    Ok(())
}
