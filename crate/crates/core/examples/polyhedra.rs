//! Faces of a polygon seen from a base point, and the complementary set.

use kpv::polyhedra::{complement_set, contains, face_data, Halfspace, PolyhedralSet};

fn main() -> kpv::Result<()> {
    let tri = PolyhedralSet::new(
        2,
        vec![
            Halfspace::new(vec![0.0, -1.0], 0.0)?,
            Halfspace::new(vec![1.0, 1.0], 2.0)?,
            Halfspace::new(vec![-1.0, 1.0], 0.5)?,
        ],
    )?;
    let p0 = [0.5, -1.0];
    println!("p0 inside: {}", contains(&tri, &p0)?);
    for f in face_data(&tri, &p0)? {
        println!(
            "face {}: h = {:.6}, eps = {:+}, foot {:?}, edge constraints {:?}",
            f.face_index,
            f.h,
            f.epsilon,
            f.foot,
            f.induced_face.halfspaces()
        );
    }
    let wedge = PolyhedralSet::new(2, vec![Halfspace::new(vec![1.0, 0.0], 1.0)?, Halfspace::new(vec![0.0, 1.0], 1.0)?])?;
    let comp = complement_set(&wedge)?;
    println!("complement of the wedge: {:?}", comp.halfspaces());
    Ok(())
}
