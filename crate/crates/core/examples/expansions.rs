//! Distance matrices, expansions and congruence.

use kpv::configurations::{are_congruent, distance_matrix, embed, is_expansion, random_expansion, PointConfiguration};

fn main() -> kpv::Result<()> {
    let p = PointConfiguration::new(2, vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 4.0]])?;
    let d = distance_matrix(&p);
    println!("distances: {:?}", d.pairs().collect::<Vec<_>>());

    let q = random_expansion(&p, 1, 0.3)?;
    println!("expansion: {:?}", q.points().collect::<Vec<_>>());
    println!("is expansion: {}, congruent: {}", is_expansion(&p, &q, 0.0)?, are_congruent(&p, &q, 1e-9)?);

    let lifted = embed(&p, 4)?;
    println!("embedded in E^4: {:?}, still congruent: {}", lifted.point(2), are_congruent(&p, &embed(&p, 2)?, 0.0)?);
    Ok(())
}
