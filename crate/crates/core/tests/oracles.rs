use std::f64::consts::PI;

use kpv::ball_volumes::{ball_system_volumes, boundary_volume, BallSystem, VolumeMethod};
use kpv::configurations::PointConfiguration;
use kpv::meanwidth::{calibrate, mean_width_edge_sum_3d, mean_width_exact_2d, mean_width_quadrature};
use kpv::polyhedra::{Halfspace, PolyhedralSet};
use kpv::truncated_volume::{ball_volume, volume_profile, ProfileOptions};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn lens_volume_3d(d: f64, r: f64) -> f64 {
    PI * (4.0 * r + d) * (2.0 * r - d).powi(2) / 12.0
}

#[test]
fn two_balls_in_space() {
    let d = 1.3;
    let p = PointConfiguration::new(3, vec![vec![0.0, 0.0, 0.0], vec![d, 0.0, 0.0]]).unwrap();
    for r in [0.7, 1.0, 2.5, 9.0] {
        let v = ball_system_volumes(&p, r, &VolumeMethod::VoronoiOde).unwrap();
        let lens = lens_volume_3d(d, r);
        let ball = 4.0 / 3.0 * PI * r.powi(3);
        assert!(rel(v.intersection_volume, lens) < 1e-8, "r={r}: {} vs {lens}", v.intersection_volume);
        assert!(rel(v.union_volume, 2.0 * ball - lens) < 1e-8);
        let cap = 2.0 * PI * r * (r - d / 2.0);
        let inter_b = boundary_volume(&p, r, BallSystem::Intersection).unwrap();
        let union_b = boundary_volume(&p, r, BallSystem::Union).unwrap();
        assert!(rel(inter_b, 2.0 * cap) < 1e-7, "r={r}: {inter_b} vs {}", 2.0 * cap);
        assert!(rel(union_b, 2.0 * (4.0 * PI * r * r - cap)) < 1e-7);
    }
}

#[test]
fn distant_balls_are_disjoint() {
    let p = PointConfiguration::new(2, vec![vec![0.0, 0.0], vec![5.0, 0.0], vec![0.0, 7.0]]).unwrap();
    let v = ball_system_volumes(&p, 1.5, &VolumeMethod::VoronoiOde).unwrap();
    assert!(rel(v.union_volume, 3.0 * PI * 2.25) < 1e-10);
    assert_eq!(v.intersection_volume, 0.0);
}

#[test]
fn halfspace_cap_in_space() {
    let h = 0.6;
    let set = PolyhedralSet::new(3, vec![Halfspace::new(vec![0.0, 0.0, 1.0], h).unwrap()]).unwrap();
    let prof = volume_profile(&set, &[0.0, 0.0, 0.0], 4.0, &ProfileOptions::default()).unwrap();
    for r in [0.3, 0.6, 0.61, 1.0, 2.2, 4.0] {
        let c = (r - h).max(0.0);
        let expected = 4.0 / 3.0 * PI * r.powi(3) - PI * c * c * (3.0 * r - c) / 3.0;
        assert!(rel(prof.value(r).unwrap(), expected) < 1e-9, "r={r}");
        if (r - h).abs() > 1e-3 {
            let dexp = 4.0 * PI * r * r - 2.0 * PI * r * c;
            assert!(rel(prof.derivative(r).unwrap(), dexp) < 1e-8, "r={r}");
        }
    }
}

#[test]
fn quadrant_in_the_plane() {
    // the quadrant x <= 1, y <= 1 seen from the origin
    let set = PolyhedralSet::new(
        2,
        vec![Halfspace::new(vec![1.0, 0.0], 1.0).unwrap(), Halfspace::new(vec![0.0, 1.0], 1.0).unwrap()],
    )
    .unwrap();
    let prof = volume_profile(&set, &[0.0, 0.0], 5.0, &ProfileOptions::default()).unwrap();
    for r in [0.5f64, 1.2, 1.5, 3.0, 5.0] {
        // area of the disk part with x > 1 or y > 1 by inclusion-exclusion
        let seg = |h: f64| if r > h { r * r * (h / r).acos() - h * (r * r - h * h).sqrt() } else { 0.0 };
        let corner = if r * r > 2.0 {
            let s = (r * r - 1.0).sqrt();
            // region x > 1, y > 1 inside the disk
            let f = |x: f64| 0.5 * (x * (r * r - x * x).sqrt() + r * r * (x / r).asin()) - x;
            f(s) - f(1.0)
        } else {
            0.0
        };
        let expected = PI * r * r - 2.0 * seg(1.0) + corner;
        assert!(rel(prof.value(r).unwrap(), expected) < 1e-9, "r={r}: {} vs {expected}", prof.value(r).unwrap());
    }
}

#[test]
fn box_mean_width() {
    let (a, b, c) = (1.0, 2.5, 0.4);
    let mut pts = Vec::new();
    for i in 0..8 {
        pts.push(vec![a * (i & 1) as f64, b * ((i >> 1) & 1) as f64, c * ((i >> 2) & 1) as f64]);
    }
    let p = PointConfiguration::new(3, pts).unwrap();
    // h(u) = sum of |u_i| times half-sides about the centre; each |u_i| integrates to 2 pi
    let exact = PI * (a + b + c);
    let edge = mean_width_edge_sum_3d(&p, &calibrate(3, 3).unwrap()).unwrap();
    assert!(rel(edge.value, exact) < 1e-5, "{} vs {exact}", edge.value);
    let mc = mean_width_quadrature(&p, 400_000, 17).unwrap();
    assert!((mc.value - exact).abs() < 5.0 * mc.stderr);
}

#[test]
fn regular_polygon_perimeter() {
    for k in [3usize, 5, 12] {
        let pts = (0..k)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / k as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        let p = PointConfiguration::new(2, pts).unwrap();
        let exact = 2.0 * k as f64 * (PI / k as f64).sin();
        assert!(rel(mean_width_exact_2d(&p).unwrap().value, exact) < 1e-13);
        let q = mean_width_quadrature(&p, 20_000, 0).unwrap();
        assert!((q.value - exact).abs() <= q.stderr);
    }
}

#[test]
fn ball_volume_values() {
    assert!(rel(ball_volume(2), PI) < 1e-15);
    assert!(rel(ball_volume(3), 4.0 * PI / 3.0) < 1e-15);
    assert!(rel(ball_volume(4), PI * PI / 2.0) < 1e-15);
    assert!(rel(ball_volume(7), 16.0 * PI.powi(3) / 105.0) < 1e-14);
}
