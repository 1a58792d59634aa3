//! First vs double differences on the same ordering.

use sfd::inference::SeMethod;
use sfd::robustness::sdd_check;
use sfd::simulation::{DGPConfig, DgpKind};

fn main() -> sfd::Result<()> {
    let sim = DGPConfig::new(DgpKind::ChannelConfounded { rows: 20 }, 2000, 12).draw(0)?;
    let ds = sim.dataset.select_columns(&["x", "w1", "w2"])?;
    let check = sdd_check(&ds, &sim.default_path()?, &SeMethod::NeweyWest { lag: 2 })?;
    for g in &check.gaps {
        println!(
            "{:>3}: sfd {:.4} ({:.4})  sdd {:.4} ({:.4})  gap {:+.4}  z {:.2}  inside sfd CI: {}",
            g.coefficient, g.sfd, g.sfd_se, g.sdd, g.sdd_se, g.gap, g.z, g.inside_sfd_ci
        );
    }
    Ok(())
}
