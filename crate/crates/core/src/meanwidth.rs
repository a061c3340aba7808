//! Mean width `M_n[K] = ∫_{S^(n-1)} h_K(u) dσ(u)` of the convex hull of a
//! finite point set, with `σ` the unnormalized surface measure. In the
//! plane this is the perimeter.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::configurations::{dist, PointConfiguration};
use crate::error::{KpvError, Result};
use crate::polyhedra::{convex_hull_2d, dot, support_value};
use crate::sampling::{chunked, unit_vector};
use crate::truncated_volume::{ball_volume, sphere_area};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanWidthMethod {
    Quadrature,
    Exact2d,
    EdgeSum3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanWidthResult {
    pub value: f64,
    pub method: MeanWidthMethod,
    pub stderr: f64,
    pub nodes_used: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdgeCurvatureData {
    pub edge: (usize, usize),
    pub length: f64,
    /// Angle between the outward normals of the two incident facets.
    pub exterior_angle: f64,
}

/// Dimensional constant of an edge-sum or lower-dimensional mean-width formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationConstant {
    pub n0: usize,
    pub n: usize,
    pub value: f64,
    /// Relative uncertainty of `value` from the reference quadrature.
    pub uncertainty: f64,
}

/// Sphere quadrature of the support function.
///
/// In the plane this is the trapezoidal rule on `nodes` equally spaced
/// angles and `stderr` is a bound on its discretization error. In higher
/// dimensions `nodes` antithetic pairs of random directions are used and
/// `stderr` is the sampling standard error.
pub fn mean_width_quadrature(points: &PointConfiguration, nodes: u64, seed: u64) -> Result<MeanWidthResult> {
    if nodes == 0 {
        return Err(KpvError::InvalidParameter("quadrature needs at least one node".into()));
    }
    let n = points.dimension();
    let center = points.centroid();
    let centered = points.translated(&center.iter().map(|c| -c).collect::<Vec<_>>())?;
    match n {
        1 => Ok(MeanWidthResult {
            value: support_value(&centered, &[1.0]) + support_value(&centered, &[-1.0]),
            method: MeanWidthMethod::Quadrature,
            stderr: 0.0,
            nodes_used: 2,
        }),
        2 => {
            let step = 2.0 * PI / nodes as f64;
            let sum: f64 = (0..nodes)
                .map(|k| {
                    let t = k as f64 * step;
                    support_value(&centered, &[t.cos(), t.sin()])
                })
                .sum();
            let radius = centered.points().map(|p| dot(p, p).sqrt()).fold(0.0, f64::max);
            // smooth arcs contribute R h^2 / 12 per interval, each kink R h^2 / 4
            let bound = step * step * radius * (PI / 6.0 + centered.len() as f64 / 4.0);
            Ok(MeanWidthResult {
                value: step * sum,
                method: MeanWidthMethod::Quadrature,
                stderr: bound,
                nodes_used: nodes,
            })
        }
        _ => {
            let parts = chunked(nodes, seed, |rng: &mut ChaCha8Rng, count| {
                let mut u = vec![0.0; n];
                let mut neg = vec![0.0; n];
                let (mut s, mut s2) = (0.0, 0.0);
                for _ in 0..count {
                    unit_vector(rng, &mut u);
                    neg.iter_mut().zip(&u).for_each(|(m, x)| *m = -x);
                    let w = 0.5 * (support_value(&centered, &u) + support_value(&centered, &neg));
                    s += w;
                    s2 += w * w;
                }
                (s, s2)
            });
            let (s, s2) = parts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
            let m = nodes as f64;
            let mean = s / m;
            let var = if nodes > 1 {
                ((s2 - m * mean * mean) / (m - 1.0)).max(0.0)
            } else {
                0.0
            };
            let area = sphere_area(n);
            Ok(MeanWidthResult {
                value: area * mean,
                method: MeanWidthMethod::Quadrature,
                stderr: area * (var / m).sqrt(),
                nodes_used: nodes,
            })
        }
    }
}

/// Perimeter of the planar hull (twice the length for a segment).
pub fn mean_width_exact_2d(points: &PointConfiguration) -> Result<MeanWidthResult> {
    if points.dimension() != 2 {
        return Err(KpvError::DimensionMismatch {
            expected: 2,
            found: points.dimension(),
        });
    }
    let hull = convex_hull_2d(points)?;
    let value = match hull.len() {
        0 | 1 => 0.0,
        m => (0..m)
            .map(|k| dist(points.point(hull[k]), points.point(hull[(k + 1) % m])))
            .sum(),
    };
    Ok(MeanWidthResult {
        value,
        method: MeanWidthMethod::Exact2d,
        stderr: 0.0,
        nodes_used: 0,
    })
}

struct Facet {
    normal: [f64; 3],
    on_plane: Vec<usize>,
}

fn sub3(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Supporting planes of the hull through at least three points, merged
/// when their normals agree within `1e-8`.
fn hull_facets_3d(points: &PointConfiguration) -> Result<Vec<Facet>> {
    if points.dimension() != 3 {
        return Err(KpvError::DimensionMismatch {
            expected: 3,
            found: points.dimension(),
        });
    }
    if affine_dimension(points) < 3 {
        return Err(KpvError::DegenerateHull(
            "hull is not full-dimensional; use the planar formula or quadrature".into(),
        ));
    }
    let m = points.len();
    let tol = 1e-9 * points.diameter();
    let mut facets: Vec<Facet> = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            for k in j + 1..m {
                let (pi, pj, pk) = (points.point(i), points.point(j), points.point(k));
                let c = cross(&sub3(pj, pi), &sub3(pk, pi));
                let len = dot(&c, &c).sqrt();
                if len <= tol * points.diameter() {
                    continue;
                }
                let mut normal = c.map(|x| x / len);
                let (mut above, mut below) = (false, false);
                for p in points.points() {
                    let s = dot(&normal, &sub3(p, pi));
                    above |= s > tol;
                    below |= s < -tol;
                }
                if above && below {
                    continue;
                }
                if above {
                    normal = normal.map(|x| -x);
                }
                if facets
                    .iter()
                    .any(|f| f.normal.iter().zip(&normal).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) <= 1e-8)
                {
                    continue;
                }
                let offset = dot(&normal, pi);
                let on_plane = (0..m)
                    .filter(|&q| (dot(&normal, points.point(q)) - offset).abs() <= tol)
                    .collect();
                facets.push(Facet { normal, on_plane });
            }
        }
    }
    Ok(facets)
}

/// Edges of the 3D hull with their lengths and exterior angles.
pub fn edge_curvatures_3d(points: &PointConfiguration) -> Result<Vec<EdgeCurvatureData>> {
    let facets = hull_facets_3d(points)?;
    let mut edges = Vec::new();
    for (a, fa) in facets.iter().enumerate() {
        for fb in &facets[a + 1..] {
            let shared: Vec<usize> = fa
                .on_plane
                .iter()
                .copied()
                .filter(|q| fb.on_plane.contains(q))
                .collect();
            if shared.len() < 2 {
                continue;
            }
            let dir = cross(&fa.normal, &fb.normal);
            let along = |q: usize| dot(&dir, points.point(q));
            let lo = *shared
                .iter()
                .min_by(|&&x, &&y| along(x).total_cmp(&along(y)))
                .expect("non-empty");
            let hi = *shared
                .iter()
                .max_by(|&&x, &&y| along(x).total_cmp(&along(y)))
                .expect("non-empty");
            let edge = (lo.min(hi), lo.max(hi));
            edges.push(EdgeCurvatureData {
                edge,
                length: dist(points.point(lo), points.point(hi)),
                exterior_angle: dot(&fa.normal, &fb.normal).clamp(-1.0, 1.0).acos(),
            });
        }
    }
    edges.sort_by_key(|e| e.edge);
    Ok(edges)
}

/// `c * Σ β_ij d_ij` over the hull edges.
pub fn mean_width_edge_sum_3d(points: &PointConfiguration, c: &CalibrationConstant) -> Result<MeanWidthResult> {
    if c.n0 != 3 {
        return Err(KpvError::InvalidParameter(format!(
            "edge-sum constant must have n0 = 3, got {}",
            c.n0
        )));
    }
    let sum: f64 = edge_curvatures_3d(points)?
        .iter()
        .map(|e| e.exterior_angle * e.length)
        .sum();
    let value = c.value * sum;
    Ok(MeanWidthResult {
        value,
        method: MeanWidthMethod::EdgeSum3d,
        stderr: value * c.uncertainty,
        nodes_used: 0,
    })
}

/// Mean width of the unit segment in `E^k`: `|S^(k-2)| ∫_0^{π/2} cos θ sin^(k-2) θ dθ`,
/// by composite Simpson on `2m` panels.
fn segment_mean_width_simpson(k: usize, m: usize) -> f64 {
    if k == 1 {
        return 1.0;
    }
    let f = |t: f64| t.cos() * t.sin().powi(k as i32 - 2);
    let panels = 2 * m;
    let h = 0.5 * PI / panels as f64;
    let mut s = f(0.0) + f(0.5 * PI);
    for i in 1..panels {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    sphere_area(k - 1) * s * h / 3.0
}

/// Midpoint product rule in `(z, φ)` for `∫_{S²} h dσ` of the unit cube.
fn cube_mean_width(m: usize) -> f64 {
    let dz = 2.0 / m as f64;
    let dphi = 2.0 * PI / m as f64;
    let mut total = 0.0;
    for a in 0..m {
        let z = -1.0 + (a as f64 + 0.5) * dz;
        let rho = (1.0 - z * z).sqrt();
        let row: f64 = (0..m)
            .map(|b| {
                let phi = (b as f64 + 0.5) * dphi;
                0.5 * (rho * phi.cos().abs() + rho * phi.sin().abs() + z.abs())
            })
            .sum();
        total += row;
    }
    total * dz * dphi
}

/// Dimensional constants, fixed against reference bodies.
///
/// For `n0 < n` the constant maps the mean width in `E^n0` of a body lying
/// in an `n0`-flat to its mean width in `E^n`, pinned on the unit segment.
/// `calibrate(3, 3)` is the edge-sum constant, pinned on the unit cube; the
/// other same-dimension constants are 1.
pub fn calibrate(n0: usize, n: usize) -> Result<CalibrationConstant> {
    if !(2..=4).contains(&n0) || !(n0..=4).contains(&n) {
        return Err(KpvError::UnsupportedDimension {
            operation: "calibrate",
            dimension: n,
        });
    }
    if n0 == n && n != 3 {
        return Ok(CalibrationConstant {
            n0,
            n,
            value: 1.0,
            uncertainty: 0.0,
        });
    }
    if n0 == n {
        static CUBE: OnceLock<CalibrationConstant> = OnceLock::new();
        return Ok(*CUBE.get_or_init(|| {
            let fine = cube_mean_width(2000);
            let coarse = cube_mean_width(1000);
            let edge_sum = 12.0 * (PI / 2.0);
            CalibrationConstant {
                n0: 3,
                n: 3,
                value: fine / edge_sum,
                uncertainty: ((fine - coarse) / fine).abs(),
            }
        }));
    }
    let (fine_n, coarse_n) = (segment_mean_width_simpson(n, 20_000), segment_mean_width_simpson(n, 10_000));
    let (fine_0, coarse_0) = (segment_mean_width_simpson(n0, 20_000), segment_mean_width_simpson(n0, 10_000));
    let value = fine_n / fine_0;
    Ok(CalibrationConstant {
        n0,
        n,
        value,
        uncertainty: ((value - coarse_n / coarse_0) / value).abs(),
    })
}

/// Number of nodes and seed used when no exact formula applies.
pub const REFERENCE_NODES: u64 = 1_000_000;
pub const REFERENCE_SEED: u64 = 0x6d77;

/// Dimension of the affine hull, and coordinates of the points in an
/// orthonormal frame of it.
fn affine_frame(points: &PointConfiguration) -> (usize, Vec<Vec<f64>>) {
    let n = points.dimension();
    let m = points.len();
    let c = points.centroid();
    let centered = DMatrix::from_fn(m, n, |i, j| points.point(i)[j] - c[j]);
    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let tol = 1e-9 * points.diameter().max(f64::MIN_POSITIVE) * (m as f64).sqrt();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let rank = order.iter().filter(|&&k| svd.singular_values[k] > tol).count();
    let coords = (0..m)
        .map(|i| {
            order[..rank]
                .iter()
                .map(|&k| (0..n).map(|j| v_t[(k, j)] * centered[(i, j)]).sum())
                .collect()
        })
        .collect();
    (rank, coords)
}

pub(crate) fn affine_dimension(points: &PointConfiguration) -> usize {
    affine_frame(points).0
}

/// Ratio `c_{n0,n} = δ_{n-1} / δ_{n0-1}` between mean widths of a body in
/// `E^n0` and of the same body embedded in `E^n`.
fn lift_ratio(n0: usize, n: usize) -> f64 {
    ball_volume(n - 1) / ball_volume(n0 - 1)
}

/// Most accurate available mean width: exact in the body's own affine hull
/// when that has dimension at most 3, lifted to `E^n`, and quadrature
/// otherwise.
pub fn mean_width(points: &PointConfiguration) -> Result<MeanWidthResult> {
    let n = points.dimension();
    let (d, coords) = affine_frame(points);
    let exact = |value: f64, method| MeanWidthResult {
        value,
        method,
        stderr: 0.0,
        nodes_used: 0,
    };
    match d {
        0 => Ok(exact(0.0, MeanWidthMethod::Exact2d)),
        1 => {
            let (lo, hi) = coords
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[0]), b.max(p[0])));
            Ok(exact((hi - lo) * lift_ratio(1, n), MeanWidthMethod::Exact2d))
        }
        2 => {
            let flat = PointConfiguration::new(2, coords)?;
            let m = mean_width_exact_2d(&flat)?;
            Ok(exact(m.value * lift_ratio(2, n), MeanWidthMethod::Exact2d))
        }
        3 => {
            let body = PointConfiguration::new(3, coords)?;
            let mut m = mean_width_edge_sum_3d(&body, &calibrate(3, 3)?)?;
            let k = lift_ratio(3, n);
            m.value *= k;
            m.stderr *= k;
            Ok(m)
        }
        _ => mean_width_quadrature(points, REFERENCE_NODES, REFERENCE_SEED),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, pts: &[&[f64]]) -> PointConfiguration {
        PointConfiguration::new(n, pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    fn unit_cube() -> PointConfiguration {
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(vec![(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]);
        }
        PointConfiguration::new(3, pts).unwrap()
    }

    fn tetrahedron() -> PointConfiguration {
        let s = 0.5 / 2f64.sqrt();
        cfg(
            3,
            &[&[s, s, s], &[s, -s, -s], &[-s, s, -s], &[-s, -s, s]],
        )
    }

    #[test]
    fn quadrature_examples() {
        let origin = cfg(2, &[&[0.0, 0.0]]);
        assert_eq!(mean_width_quadrature(&origin, 64, 1).unwrap().value, 0.0);

        let diamond = cfg(2, &[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
        let m = mean_width_quadrature(&diamond, 4096, 1).unwrap();
        assert!((m.value - 4.0 * 2f64.sqrt()).abs() <= m.stderr);

        let seg = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0]]);
        let m = mean_width_quadrature(&seg, 1000, 1).unwrap();
        assert!((m.value - 2.0).abs() <= m.stderr);
        assert!(mean_width_quadrature(&seg, 0, 1).is_err());
    }

    #[test]
    fn exact_2d_examples() {
        let square = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        assert!((mean_width_exact_2d(&square).unwrap().value - 4.0).abs() < 1e-15);
        let seg = cfg(2, &[&[0.0, 0.0], &[3.0, 0.0]]);
        assert_eq!(mean_width_exact_2d(&seg).unwrap().value, 6.0);
        assert_eq!(mean_width_exact_2d(&cfg(2, &[&[2.0, 5.0]])).unwrap().value, 0.0);
    }

    #[test]
    fn tetrahedron_and_cube_edges() {
        let beta = PI - (1.0f64 / 3.0).acos();
        let edges = edge_curvatures_3d(&tetrahedron()).unwrap();
        assert_eq!(edges.len(), 6);
        for e in &edges {
            assert!((e.exterior_angle - beta).abs() < 1e-12);
            assert!((e.length - 1.0).abs() < 1e-12);
        }
        let edges = edge_curvatures_3d(&unit_cube()).unwrap();
        assert_eq!(edges.len(), 12);
        for e in &edges {
            assert!((e.exterior_angle - PI / 2.0).abs() < 1e-12);
        }
        let flat = cfg(3, &[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[1.0, 1.0, 0.0]]);
        assert!(matches!(edge_curvatures_3d(&flat), Err(KpvError::DegenerateHull(_))));
    }

    #[test]
    fn calibration_constants() {
        let c = calibrate(3, 3).unwrap();
        assert!((c.value - 0.5).abs() < 1e-5, "{c:?}");
        assert!(c.uncertainty < 1e-5);
        let c23 = calibrate(2, 3).unwrap();
        assert!((c23.value - PI / 2.0).abs() < 1e-10);
        assert_eq!(calibrate(2, 2).unwrap().value, 1.0);
        assert!(calibrate(1, 3).is_err());
        assert!(calibrate(3, 5).is_err());

        let cube = mean_width_edge_sum_3d(&unit_cube(), &c).unwrap();
        let quad = mean_width_quadrature(&unit_cube(), 1_000_000, 9).unwrap();
        assert!((cube.value - quad.value).abs() <= 3.0 * quad.stderr, "{cube:?} {quad:?}");
        assert!(((cube.value - quad.value) / quad.value).abs() <= 1e-3);

        let tet = mean_width_edge_sum_3d(&tetrahedron(), &c).unwrap();
        let beta = PI - (1.0f64 / 3.0).acos();
        assert!((tet.value - 6.0 * beta * c.value).abs() < 1e-12);
        let big = mean_width_edge_sum_3d(&unit_cube().scaled(2.5).unwrap(), &c).unwrap();
        assert!((big.value - 2.5 * cube.value).abs() < 1e-12);
    }

    #[test]
    fn reference_mean_width_lifts() {
        let seg3 = cfg(3, &[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
        assert!((mean_width(&seg3).unwrap().value - PI).abs() < 1e-12);
        let sq3 = cfg(3, &[&[0.0, 0.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 1.0], &[0.0, 1.0, 1.0]]);
        let lifted = mean_width(&sq3).unwrap().value;
        assert!((lifted - 2.0 * PI).abs() < 1e-12);
        let quad = mean_width_quadrature(&sq3, 1_000_000, 4).unwrap();
        assert!((lifted - quad.value).abs() <= 3.0 * quad.stderr);
    }
}
