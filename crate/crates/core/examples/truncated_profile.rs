//! Volume of a halfplane truncated by a growing disk, and its behaviour at
//! large radius.

use kpv::polyhedra::{Halfspace, PolyhedralSet};
use kpv::truncated_volume::{volume_profile, volume_profile_for_fit, w_prime_at_zero, ProfileOptions};

fn main() -> kpv::Result<()> {
    let half = PolyhedralSet::new(2, vec![Halfspace::new(vec![1.0, 0.0], 1.0)?])?;
    let origin = [0.0, 0.0];
    let options = ProfileOptions::default();

    let prof = volume_profile(&half, &origin, 3.0, &options)?;
    println!("breakpoints: {:?}", prof.breakpoints());
    for r in [0.5f64, 1.0, 1.5, 2.0, 3.0] {
        let segment = r * r * (1.0 / r).min(1.0).acos() - (r * r - 1.0f64).max(0.0).sqrt();
        println!(
            "r = {r:>3}: V = {:.12}  closed form {:.12}  dV/dr = {:.9}",
            prof.value(r)?,
            std::f64::consts::PI * r * r - segment,
            prof.derivative(r)?
        );
    }

    let far = volume_profile_for_fit(&half, &origin, &options)?;
    let fit = w_prime_at_zero(&far)?;
    println!(
        "W(0) = {:.10} (pi/2), W'(0) = {:.8} (2), window [{}, {}], residual {:.1e}",
        fit.leading(),
        fit.second(),
        fit.window.r_min,
        fit.window.r_max,
        fit.residual_norm
    );
    print!("{}", volume_profile(&half, &origin, 1.2, &options)?.to_csv().lines().take(6).collect::<Vec<_>>().join("\n"));
    println!("\n...");
    Ok(())
}
