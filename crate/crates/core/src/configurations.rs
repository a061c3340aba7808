//! Indexed point configurations, their distance structure, and the
//! expansion / congruence predicates used to state the large-radius
//! inequalities.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{KpvError, Result};

/// Default absolute tolerance for comparing lengths of order one.
pub const DEFAULT_LENGTH_TOL: f64 = 1e-9;

/// An ordered list of `N >= 1` points in `E^n`.
///
/// Duplicate points are allowed; operations that need distinct sites say so.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigurationFile", into = "ConfigurationFile")]
pub struct PointConfiguration {
    dimension: usize,
    coords: Vec<f64>,
    label: Option<String>,
    metadata: Option<BTreeMap<String, serde_json::Value>>,
}

/// On-disk schema: `{"dimension": n, "points": [[x, ...], ...], "label": "..."}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigurationFile {
    dimension: usize,
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<BTreeMap<String, serde_json::Value>>,
}

impl TryFrom<ConfigurationFile> for PointConfiguration {
    type Error = KpvError;

    fn try_from(file: ConfigurationFile) -> Result<Self> {
        let mut config = PointConfiguration::new(file.dimension, file.points)?;
        config.label = file.label;
        config.metadata = file.metadata;
        Ok(config)
    }
}

impl From<PointConfiguration> for ConfigurationFile {
    fn from(config: PointConfiguration) -> Self {
        ConfigurationFile {
            dimension: config.dimension,
            points: config.points().map(<[f64]>::to_vec).collect(),
            label: config.label,
            metadata: config.metadata,
        }
    }
}

impl PointConfiguration {
    pub fn new(dimension: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dimension == 0 {
            return Err(KpvError::InvalidConfiguration(
                "dimension must be positive".into(),
            ));
        }
        if points.is_empty() {
            return Err(KpvError::InvalidConfiguration(
                "a configuration needs at least one point".into(),
            ));
        }
        let mut coords = Vec::with_capacity(points.len() * dimension);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dimension {
                return Err(KpvError::InvalidConfiguration(format!(
                    "point {i} has {} coordinates, expected {dimension}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(KpvError::InvalidConfiguration(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self {
            dimension,
            coords,
            label: None,
            metadata: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: serde_json::Value) -> Self {
        self.metadata
            .get_or_insert_with(BTreeMap::new)
            .insert(key.into(), value);
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn metadata(&self) -> Option<&BTreeMap<String, serde_json::Value>> {
        self.metadata.as_ref()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dimension)
    }

    /// Applies `f` to every point, keeping label and metadata.
    pub fn map_points(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        let points: Vec<Vec<f64>> = self.points().map(&mut f).collect();
        let dimension = points.first().map_or(self.dimension, Vec::len);
        let mut out = Self::new(dimension, points)?;
        out.label.clone_from(&self.label);
        out.metadata.clone_from(&self.metadata);
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        self.map_points(|p| p.iter().map(|x| x * factor).collect())
    }

    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dimension {
            return Err(KpvError::DimensionMismatch {
                expected: self.dimension,
                found: shift.len(),
            });
        }
        self.map_points(|p| p.iter().zip(shift).map(|(x, s)| x + s).collect())
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dimension];
        for p in self.points() {
            for (ci, x) in c.iter_mut().zip(p) {
                *ci += x;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|x| *x /= n);
        c
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                d = d.max(dist(self.point(i), self.point(j)));
            }
        }
        d
    }

    /// Axis-aligned bounding box of the points as `(min, max)` corners.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dimension];
        let mut hi = vec![f64::NEG_INFINITY; self.dimension];
        for p in self.points() {
            for k in 0..self.dimension {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// First pair of points closer than `tol`, if any.
    pub fn find_duplicate(&self, tol: f64) -> Option<(usize, usize)> {
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                if dist(self.point(i), self.point(j)) <= tol {
                    return Some((i, j));
                }
            }
        }
        None
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Symmetric matrix of pairwise Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    /// Iterates over `(i, j, d_ij)` for `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.size).flat_map(move |i| (i + 1..self.size).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn satisfies_triangle_inequality(&self, tol: f64) -> bool {
        let n = self.size;
        (0..n).all(|i| {
            (0..n).all(|j| (0..n).all(|k| self.get(i, k) <= self.get(i, j) + self.get(j, k) + tol))
        })
    }
}

pub fn distance_matrix(config: &PointConfiguration) -> DistanceMatrix {
    let n = config.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(config.point(i), config.point(j));
            entries[i * n + j] = d;
            entries[j * n + i] = d;
        }
    }
    DistanceMatrix { size: n, entries }
}

fn check_comparable(p: &PointConfiguration, q: &PointConfiguration) -> Result<()> {
    if p.len() != q.len() {
        return Err(KpvError::Incomparable {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

/// True iff every pairwise distance of `q` is at least the matching
/// distance of `p`, up to `tol`.
pub fn is_expansion(p: &PointConfiguration, q: &PointConfiguration, tol: f64) -> Result<bool> {
    check_comparable(p, q)?;
    let n = p.len();
    for i in 0..n {
        for j in i + 1..n {
            if dist(q.point(i), q.point(j)) < dist(p.point(i), p.point(j)) - tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Labelled congruence: the indexed distance matrices agree within `tol`.
pub fn are_congruent(p: &PointConfiguration, q: &PointConfiguration, tol: f64) -> Result<bool> {
    check_comparable(p, q)?;
    let n = p.len();
    for i in 0..n {
        for j in i + 1..n {
            if (dist(q.point(i), q.point(j)) - dist(p.point(i), p.point(j))).abs() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Pads every point with zeros up to `target_dim` coordinates.
pub fn embed(config: &PointConfiguration, target_dim: usize) -> Result<PointConfiguration> {
    if target_dim < config.dimension() {
        return Err(KpvError::DimensionMismatch {
            expected: config.dimension(),
            found: target_dim,
        });
    }
    config.map_points(|p| {
        let mut v = p.to_vec();
        v.resize(target_dim, 0.0);
        v
    })
}

const EXPANSION_SWEEPS: usize = 2000;

/// Random perturbation of `p` pushed back into the expansion cone.
///
/// Every point receives Gaussian noise scaled by `magnitude`; pairs that
/// got closer are then pushed apart symmetrically along their connecting
/// line until no pairwise distance has decreased.
pub fn random_expansion(
    p: &PointConfiguration,
    seed: u64,
    magnitude: f64,
) -> Result<PointConfiguration> {
    if !(magnitude >= 0.0) || !magnitude.is_finite() {
        return Err(KpvError::InvalidParameter(format!(
            "magnitude must be finite and non-negative, got {magnitude}"
        )));
    }
    if magnitude == 0.0 {
        return Ok(p.clone());
    }
    let n = p.len();
    let dim = p.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = distance_matrix(p);
    let mut q: Vec<Vec<f64>> = p
        .points()
        .map(|x| {
            x.iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + magnitude * z
                })
                .collect()
        })
        .collect();

    for _ in 0..EXPANSION_SWEEPS {
        let mut violated = false;
        for i in 0..n {
            for j in i + 1..n {
                let want = target.get(i, j);
                let have = dist(&q[i], &q[j]);
                if have >= want {
                    continue;
                }
                violated = true;
                let mut dir: Vec<f64> = q[j].iter().zip(&q[i]).map(|(a, b)| a - b).collect();
                if have <= f64::EPSILON * (1.0 + want) {
                    dir = (0..dim)
                        .map(|_| StandardNormal.sample(&mut rng))
                        .collect::<Vec<f64>>();
                }
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm == 0.0 {
                    continue;
                }
                // Overshoot slightly so the floating-point comparison is
                // not left sitting exactly on the boundary.
                let push = 0.5 * (want * (1.0 + 1e-12) - have) + 1e-15 * want;
                for k in 0..dim {
                    let step = push * dir[k] / norm;
                    q[i][k] -= step;
                    q[j][k] += step;
                }
            }
        }
        if !violated {
            let mut out = PointConfiguration::new(dim, q)?;
            out.label.clone_from(&p.label);
            if is_expansion(p, &out, 0.0)? {
                return Ok(out);
            }
            return Err(KpvError::GeneratorExhausted {
                iterations: EXPANSION_SWEEPS,
            });
        }
    }
    Err(KpvError::GeneratorExhausted {
        iterations: EXPANSION_SWEEPS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dim: usize, pts: &[&[f64]]) -> PointConfiguration {
        PointConfiguration::new(dim, pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn distance_matrix_examples() {
        let single = distance_matrix(&cfg(2, &[&[1.0, 2.0]]));
        assert_eq!(single.size(), 1);
        assert_eq!(single.get(0, 0), 0.0);

        let two = distance_matrix(&cfg(2, &[&[0.0, 0.0], &[3.0, 4.0]]));
        assert_eq!(two.get(0, 1), 5.0);

        let tri = distance_matrix(&cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]));
        assert_eq!(tri.get(0, 1), 1.0);
        assert_eq!(tri.get(0, 2), 1.0);
        assert!((tri.get(1, 2) - 2f64.sqrt()).abs() < 1e-15);
        assert!(tri.satisfies_triangle_inequality(0.0));
    }

    #[test]
    fn expansion_examples() {
        let square = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        assert!(is_expansion(&square, &square, 0.0).unwrap());
        assert!(is_expansion(&square, &square.scaled(2.0).unwrap(), 0.0).unwrap());
        let p = cfg(2, &[&[0.0, 0.0], &[2.0, 0.0]]);
        let q = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0]]);
        assert!(!is_expansion(&p, &q, DEFAULT_LENGTH_TOL).unwrap());
        let three = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[2.0, 0.0]]);
        assert!(matches!(
            is_expansion(&p, &three, 0.0),
            Err(KpvError::Incomparable { left: 2, right: 3 })
        ));
    }

    #[test]
    fn congruence_examples() {
        let p = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[0.3, 0.7]]);
        let moved = p.translated(&[5.0, -2.0]).unwrap();
        assert!(are_congruent(&p, &moved, DEFAULT_LENGTH_TOL).unwrap());
        let reflected = p.map_points(|x| vec![-x[0], x[1]]).unwrap();
        assert!(are_congruent(&p, &reflected, DEFAULT_LENGTH_TOL).unwrap());
        let a = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0]]);
        let b = cfg(2, &[&[0.0, 0.0], &[1.5, 0.0]]);
        assert!(!are_congruent(&a, &b, DEFAULT_LENGTH_TOL).unwrap());
    }

    #[test]
    fn embed_examples() {
        let p = cfg(2, &[&[1.0, 2.0]]);
        let e = embed(&p, 3).unwrap();
        assert_eq!(e.point(0), &[1.0, 2.0, 0.0]);
        assert_eq!(embed(&p, 2).unwrap(), p);
        assert!(embed(&e, 2).is_err());

        let q = cfg(2, &[&[0.0, 0.0], &[1.0, 3.0], &[-2.0, 0.5]]);
        assert_eq!(distance_matrix(&embed(&q, 4).unwrap()), distance_matrix(&q));
    }

    #[test]
    fn random_expansion_contract() {
        let p = cfg(3, &[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(random_expansion(&p, 3, 0.0).unwrap(), p);
        for seed in 0..20 {
            let q = random_expansion(&p, seed, 0.3).unwrap();
            assert!(is_expansion(&p, &q, 0.0).unwrap());
            assert_eq!(q, random_expansion(&p, seed, 0.3).unwrap());
        }
        assert!(random_expansion(&p, 0, -1.0).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(PointConfiguration::new(2, vec![]).is_err());
        assert!(PointConfiguration::new(2, vec![vec![1.0]]).is_err());
        assert!(PointConfiguration::new(1, vec![vec![f64::NAN]]).is_err());
        let parsed: std::result::Result<PointConfiguration, _> =
            serde_json::from_str(r#"{"dimension": 2, "points": [[0, 0], [1]]}"#);
        assert!(parsed.is_err());
    }

    #[test]
    fn json_schema_round_trip() {
        let text = r#"{"dimension":2,"points":[[0.0,0.0],[3.0,4.0]],"label":"pair"}"#;
        let p: PointConfiguration = serde_json::from_str(text).unwrap();
        assert_eq!(p.label(), Some("pair"));
        assert_eq!(serde_json::to_string(&p).unwrap(), text);
    }
}
