//! `W'(0)` of a wedge and of its complementary wedge cancel, and so do the
//! union and intersection coefficients of a simplex's balls.

use kpv::asymptotics::verify_ww_proposition;
use kpv::configurations::PointConfiguration;
use kpv::polyhedra::Halfspace;
use kpv::truncated_volume::check_ww_lemma;

fn main() -> kpv::Result<()> {
    let wedge = [
        Halfspace::new(vec![1.0, 0.2, 0.0], 0.7)?,
        Halfspace::new(vec![-0.3, 1.0, 0.4], -0.2)?,
        Halfspace::new(vec![0.1, -0.5, 1.0], 1.1)?,
    ];
    let c = check_ww_lemma(&wedge, &[0.0, 0.0, 0.0])?;
    println!(
        "W'_P(0) = {:.9}, W'_Pbar(0) = {:.9}, defect {:.1e} (max h {:.2})",
        c.w_prime, c.w_prime_complement, c.defect, c.max_h
    );

    let simplex = PointConfiguration::new(3, vec![
        vec![0.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.2, 0.9, 0.0],
        vec![0.3, 0.3, 0.8],
    ])?;
    let rep = verify_ww_proposition(&simplex)?;
    println!("simplex: union + intersection W'(0) = {:.2e} (tolerance {:.1e})", rep.records[0].lhs, rep.records[0].tolerance);
    Ok(())
}
