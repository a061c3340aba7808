//! Large-radius coefficients of the union and intersection volumes of a
//! triangle's disks against the triangle's perimeter.

use kpv::asymptotics::{verify_capoyleas_pach, verify_csikos};
use kpv::configurations::PointConfiguration;

fn main() -> kpv::Result<()> {
    let tri = PointConfiguration::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.8]])?;
    for report in [verify_capoyleas_pach(&tri, None)?, verify_csikos(&tri, None)?] {
        println!("{}:", report.check);
        for r in &report.records {
            println!(
                "  [{}] {:<42} lhs {:>14.9} rhs {:>14.9} gap {:.1e}",
                if r.pass { "ok" } else { "FAIL" },
                r.claim,
                r.lhs,
                r.rhs,
                r.gap
            );
        }
    }
    Ok(())
}
