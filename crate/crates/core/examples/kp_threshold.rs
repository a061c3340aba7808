//! Radius beyond which the union grows and the intersection shrinks under
//! a random expansion.

use kpv::asymptotics::{kp_threshold, ThresholdGrid};
use kpv::configurations::{random_expansion, PointConfiguration};

fn main() -> kpv::Result<()> {
    let p = PointConfiguration::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]])?;
    let q = random_expansion(&p, 5, 0.2)?;
    let res = kp_threshold(&p, &q, &ThresholdGrid::for_pair(&p, &q))?;
    println!("r0 = {:.4}, all hold: {}, margin {:.4e}", res.r0, res.all_hold, res.strictness_margin);
    for pt in res.points.iter().step_by(6) {
        println!("  r = {:>10.3}: gaps {:?}", pt.r, pt.gaps.map(|g| (g * 1e6).round() / 1e6));
    }

    // below the diameter the union inequality may fail; scan there too
    let low = ThresholdGrid { r_min: 0.05, r_max: 100.0, count: 40 };
    let res = kp_threshold(&p, &q, &low)?;
    println!("small-radius scan: r0 = {:.4}, violations at {:?}", res.r0, res.violations);
    Ok(())
}
