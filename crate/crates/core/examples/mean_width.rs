//! Mean width of a few hulls by every available method.

use kpv::configurations::PointConfiguration;
use kpv::meanwidth::{
    calibrate, edge_curvatures_3d, mean_width, mean_width_edge_sum_3d, mean_width_exact_2d, mean_width_quadrature,
};

fn main() -> kpv::Result<()> {
    let square = PointConfiguration::new(
        2,
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]],
    )?;
    let exact = mean_width_exact_2d(&square)?;
    let quad = mean_width_quadrature(&square, 4096, 0)?;
    println!("unit square: perimeter {} | trapezoid {:.9} (bound {:.1e})", exact.value, quad.value, quad.stderr);

    let cube = PointConfiguration::new(
        3,
        (0..8)
            .map(|i| vec![(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64])
            .collect(),
    )?;
    let c = calibrate(3, 3)?;
    let edges = edge_curvatures_3d(&cube)?;
    let edge_sum = mean_width_edge_sum_3d(&cube, &c)?;
    let mc = mean_width_quadrature(&cube, 1_000_000, 1)?;
    println!(
        "unit cube: {} edges, c_3 = {:.8}, edge sum {:.6} | sampled {:.6} +- {:.1e}",
        edges.len(),
        c.value,
        edge_sum.value,
        mc.value,
        mc.stderr
    );

    // a flat square in space: lifted from its planar perimeter
    let flat = square.map_points(|p| vec![p[0], p[1], 0.5])?;
    let lifted = mean_width(&flat)?;
    println!(
        "flat square in E^3: {:.9} = c_(2,3) * 4 with c_(2,3) = {:.9}",
        lifted.value,
        calibrate(2, 3)?.value
    );
    Ok(())
}
