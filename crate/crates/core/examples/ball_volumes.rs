//! Union and intersection of two unit disks at distance one.

use kpv::ball_volumes::{
    ball_system_volumes, boundary_volume, farthest_voronoi, mc_ball_volume, nearest_voronoi, BallSystem, VolumeMethod,
};
use kpv::configurations::PointConfiguration;

fn main() -> kpv::Result<()> {
    let p = PointConfiguration::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]])?;
    let near = nearest_voronoi(&p, 0)?;
    let far = farthest_voronoi(&p, 0)?;
    println!("nearest region of site 0: {:?}", near.region.map(|r| r.halfspaces().to_vec()));
    println!("farthest region of site 0: {:?}", far.region.map(|r| r.halfspaces().to_vec()));

    let v = ball_system_volumes(&p, 1.0, &VolumeMethod::VoronoiOde)?;
    println!("union {:.9}, intersection {:.9}", v.union_volume, v.intersection_volume);
    println!(
        "union boundary {:.9}, intersection boundary {:.9}",
        boundary_volume(&p, 1.0, BallSystem::Union)?,
        boundary_volume(&p, 1.0, BallSystem::Intersection)?
    );
    let mc = mc_ball_volume(&p, 1.0, BallSystem::Union, 1_000_000, 42)?;
    println!("sampled union {:.5} +- {:.5}", mc.estimate, mc.stderr);
    Ok(())
}
