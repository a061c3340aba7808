//! The planar union area equals the radial derivative of the union volume
//! of the same disks lifted to E^4, divided by 2 pi r.

use kpv::asymptotics::verify_lift_identity;
use kpv::configurations::PointConfiguration;

fn main() -> kpv::Result<()> {
    let p = PointConfiguration::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]])?;
    let rep = verify_lift_identity(&p, &[2.0, 5.0], 2_000_000, 11)?;
    for r in &rep.records {
        println!("{}: area {:.6}, from E^4 {:.6} (3 sigma {:.1e})", r.claim, r.lhs, r.rhs, r.tolerance);
    }
    Ok(())
}
