//! Closed halfspaces, polyhedral sets (finite halfspace intersections),
//! their facets relative to a base point, and support values of point sets.

use serde::{Deserialize, Serialize};

use crate::configurations::PointConfiguration;
use crate::error::{KpvError, Result};

/// Slack used by [`contains`].
pub const CONTAINS_SLACK: f64 = 1e-12;
/// Two hyperplanes are the same when their unit normals differ by less
/// than this (an angle, in radians, for small values) and their offsets agree.
pub const HYPERPLANE_ANGLE_TOL: f64 = 1e-10;
/// Relative margin below which a face is treated as lower dimensional.
pub const FACET_MARGIN_TOL: f64 = 1e-9;

/// `{x : <x, normal> <= offset}` with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HalfspaceFile")]
pub struct Halfspace {
    normal: Vec<f64>,
    offset: f64,
}

#[derive(Deserialize)]
struct HalfspaceFile {
    normal: Vec<f64>,
    offset: f64,
}

impl TryFrom<HalfspaceFile> for Halfspace {
    type Error = KpvError;

    fn try_from(file: HalfspaceFile) -> Result<Self> {
        Halfspace::new(file.normal, file.offset)
    }
}

impl Halfspace {
    /// Builds the halfspace, rescaling `normal` (and `offset` with it) to unit length.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self> {
        let norm = norm(&normal);
        if !(norm > 0.0) || !norm.is_finite() || !offset.is_finite() {
            return Err(KpvError::InvalidHalfspace(format!(
                "normal {normal:?} / offset {offset} do not define a halfspace"
            )));
        }
        Ok(Self {
            normal: normal.iter().map(|x| x / norm).collect(),
            offset: offset / norm,
        })
    }

    pub fn normal(&self) -> &[f64] {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dimension(&self) -> usize {
        self.normal.len()
    }

    /// The closure of the complement: normal and offset negated.
    pub fn flipped(&self) -> Self {
        Self {
            normal: self.normal.iter().map(|x| -x).collect(),
            offset: -self.offset,
        }
    }

    /// `offset - <x, normal>`: non-negative inside, and the distance to
    /// the boundary hyperplane in absolute value.
    pub fn slack(&self, x: &[f64]) -> f64 {
        self.offset - dot(&self.normal, x)
    }
}

/// A non-empty intersection of finitely many closed halfspaces in `E^n`.
/// An empty list is the whole space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyhedralFile")]
pub struct PolyhedralSet {
    dimension: usize,
    halfspaces: Vec<Halfspace>,
}

#[derive(Deserialize)]
struct PolyhedralFile {
    dimension: usize,
    halfspaces: Vec<Halfspace>,
}

impl TryFrom<PolyhedralFile> for PolyhedralSet {
    type Error = KpvError;

    fn try_from(file: PolyhedralFile) -> Result<Self> {
        PolyhedralSet::new(file.dimension, file.halfspaces)
    }
}

impl PolyhedralSet {
    /// Validates dimensions and rejects empty intersections.
    pub fn new(dimension: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        let set = Self::new_unchecked(dimension, halfspaces)?;
        if !set.is_feasible() {
            return Err(KpvError::Infeasible(format!(
                "the {} halfspaces have an empty intersection",
                set.halfspaces.len()
            )));
        }
        Ok(set)
    }

    /// Validates dimensions only; the intersection may be empty.
    pub fn new_unchecked(dimension: usize, halfspaces: Vec<Halfspace>) -> Result<Self> {
        if dimension == 0 {
            return Err(KpvError::InvalidHalfspace("dimension must be positive".into()));
        }
        if let Some(h) = halfspaces.iter().find(|h| h.dimension() != dimension) {
            return Err(KpvError::DimensionMismatch {
                expected: dimension,
                found: h.dimension(),
            });
        }
        Ok(Self {
            dimension,
            halfspaces,
        })
    }

    pub fn whole_space(dimension: usize) -> Self {
        Self {
            dimension,
            halfspaces: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    fn scale_about(&self, p0: &[f64]) -> f64 {
        1.0 + self
            .halfspaces
            .iter()
            .map(|h| h.slack(p0).abs())
            .fold(0.0, f64::max)
    }

    /// Radius of the largest ball inside the set (capped at a large value,
    /// negative when the set is empty).
    pub fn inner_margin(&self) -> f64 {
        let origin = vec![0.0; self.dimension];
        max_margin(&self.halfspaces, self.dimension, self.scale_about(&origin))
    }

    pub fn is_feasible(&self) -> bool {
        let origin = vec![0.0; self.dimension];
        self.inner_margin() >= -FACET_MARGIN_TOL * self.scale_about(&origin)
    }

    /// True when the set contains a ball of positive radius.
    pub fn has_interior(&self) -> bool {
        let origin = vec![0.0; self.dimension];
        self.inner_margin() > FACET_MARGIN_TOL * self.scale_about(&origin)
    }
}

pub fn contains(set: &PolyhedralSet, x: &[f64]) -> Result<bool> {
    if x.len() != set.dimension {
        return Err(KpvError::DimensionMismatch {
            expected: set.dimension,
            found: x.len(),
        });
    }
    Ok(set.halfspaces.iter().all(|h| h.slack(x) >= -CONTAINS_SLACK))
}

/// Intersection of the complementary closed halfspaces.
pub fn complement_set(set: &PolyhedralSet) -> Result<PolyhedralSet> {
    let flipped = set.halfspaces.iter().map(Halfspace::flipped).collect();
    PolyhedralSet::new(set.dimension, flipped)
        .map_err(|_| KpvError::Infeasible("the complementary halfspaces do not intersect".into()))
}

/// One `(n-1)`-dimensional face of a polyhedral set seen from a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceData {
    /// Index of the defining halfspace in the set's list.
    pub face_index: usize,
    /// Distance from the base point to the face hyperplane.
    pub h: f64,
    /// `+1` when the base point lies in the face's halfspace (or on its boundary).
    pub epsilon: f64,
    /// Orthogonal projection of the base point onto the hyperplane.
    pub foot: Vec<f64>,
    /// The face in intrinsic hyperplane coordinates centred at `foot`.
    pub induced_face: PolyhedralSet,
}

/// Facets of `set` relative to `p0`. Redundant and duplicate halfspaces,
/// and faces that only touch the set in lower dimension, are dropped.
pub fn face_data(set: &PolyhedralSet, p0: &[f64]) -> Result<Vec<FaceData>> {
    let n = set.dimension;
    if p0.len() != n {
        return Err(KpvError::DimensionMismatch {
            expected: n,
            found: p0.len(),
        });
    }
    let scale = set.scale_about(p0);
    let tol = FACET_MARGIN_TOL * scale;
    let kept = dedup_hyperplanes(&set.halfspaces, scale);

    // Constraints written relative to p0 keep the margin problem centred.
    let local: Vec<Halfspace> = kept
        .iter()
        .map(|&k| {
            let h = &set.halfspaces[k];
            Halfspace {
                normal: h.normal.clone(),
                offset: h.slack(p0),
            }
        })
        .collect();
    let margin = max_margin(&local, n, scale);
    if margin < -tol {
        return Err(KpvError::Infeasible("empty polyhedral set".into()));
    }
    if margin <= tol {
        return Ok(Vec::new());
    }

    let mut faces = Vec::new();
    for (slot, &k) in kept.iter().enumerate() {
        let hs = &local[slot];
        let signed = hs.offset;
        let foot: Vec<f64> = p0
            .iter()
            .zip(&hs.normal)
            .map(|(x, a)| x + signed * a)
            .collect();
        let epsilon = if signed >= -CONTAINS_SLACK * scale { 1.0 } else { -1.0 };
        let induced = if n == 1 {
            let point_ok = local
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != slot)
                .all(|(_, other)| other.offset - other.normal[0] * hs.normal[0] * signed >= -tol);
            if !point_ok {
                continue;
            }
            PolyhedralSet {
                dimension: 0,
                halfspaces: Vec::new(),
            }
        } else {
            match induced_face(&local, slot, n, tol) {
                Some(face) if face_margin(&face, scale) > tol => face,
                _ => continue,
            }
        };
        faces.push(FaceData {
            face_index: k,
            h: signed.abs(),
            epsilon,
            foot,
            induced_face: induced,
        });
    }
    Ok(faces)
}

fn face_margin(face: &PolyhedralSet, scale: f64) -> f64 {
    max_margin(&face.halfspaces, face.dimension, scale)
}

/// Restricts the constraints (given relative to the base point) to the
/// hyperplane of constraint `slot`, in coordinates centred at the foot.
/// Returns `None` when some constraint excludes the whole hyperplane.
fn induced_face(local: &[Halfspace], slot: usize, n: usize, tol: f64) -> Option<PolyhedralSet> {
    let a = &local[slot].normal;
    let basis = complement_basis(a);
    let foot_shift = local[slot].offset;
    let mut halfspaces = Vec::new();
    for (j, other) in local.iter().enumerate() {
        if j == slot {
            continue;
        }
        let projected: Vec<f64> = basis.iter().map(|e| dot(e, &other.normal)).collect();
        let offset = other.offset - foot_shift * dot(&other.normal, a);
        let len = norm(&projected);
        if len <= 1e-12 {
            if offset < -tol {
                return None;
            }
            continue;
        }
        let normal: Vec<f64> = projected.iter().map(|x| x / len).collect();
        let offset = offset / len;
        // parallel constraints on the face: keep the tighter one
        let same = halfspaces.iter_mut().find(|g: &&mut Halfspace| {
            let gap: f64 = g.normal.iter().zip(&normal).map(|(x, y)| (x - y) * (x - y)).sum();
            gap.sqrt() <= HYPERPLANE_ANGLE_TOL
        });
        match same {
            Some(g) => g.offset = g.offset.min(offset),
            None => halfspaces.push(Halfspace { normal, offset }),
        }
    }
    Some(PolyhedralSet {
        dimension: n - 1,
        halfspaces,
    })
}

/// Indices of halfspaces left after dropping repeated hyperplanes.
fn dedup_hyperplanes(halfspaces: &[Halfspace], scale: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (k, h) in halfspaces.iter().enumerate() {
        let repeated = kept.iter().any(|&j| {
            let g = &halfspaces[j];
            let angle = g
                .normal
                .iter()
                .zip(&h.normal)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            angle <= HYPERPLANE_ANGLE_TOL && (g.offset - h.offset).abs() <= HYPERPLANE_ANGLE_TOL * scale
        });
        if !repeated {
            kept.push(k);
        }
    }
    kept
}

/// Orthonormal basis of the complement of the unit vector `a`, taken from
/// the columns of the Householder reflection sending `a` to a coordinate axis.
pub(crate) fn complement_basis(a: &[f64]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = (0..n)
        .max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()))
        .unwrap_or(0);
    // v = a + sign(a_m) e_m
    let mut v = a.to_vec();
    v[m] = a[m] + if a[m] >= 0.0 { 1.0 } else { -1.0 };
    let vv = dot(&v, &v);
    (0..n)
        .filter(|&k| k != m)
        .map(|k| {
            (0..n)
                .map(|i| {
                    let delta = if i == k { 1.0 } else { 0.0 };
                    delta - 2.0 * v[i] * v[k] / vv
                })
                .collect()
        })
        .collect()
}

/// Largest `t` (capped) such that some `x` satisfies `<a_j, x> + t <= b_j`
/// for all constraints, found by enumerating vertices of the lifted
/// problem inside a large box. Negative when the constraints are infeasible.
pub(crate) fn max_margin(halfspaces: &[Halfspace], n: usize, scale: f64) -> f64 {
    let big = 1e6 * scale;
    let cap = 4.0 * big;
    if halfspaces.is_empty() {
        return cap;
    }
    if n == 0 {
        return halfspaces
            .iter()
            .map(|h| h.offset)
            .fold(f64::INFINITY, f64::min)
            .min(cap);
    }
    let vars = n + 1;
    // Rows of [a | 1] z <= b followed by the box and the caps on t.
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(halfspaces.len() + 2 * n + 2);
    for h in halfspaces {
        let mut r = h.normal.clone();
        r.push(1.0);
        rows.push((r, h.offset));
    }
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let mut r = vec![0.0; vars];
            r[k] = sign;
            rows.push((r, big));
        }
    }
    for sign in [1.0, -1.0] {
        let mut r = vec![0.0; vars];
        r[n] = sign;
        rows.push((r, cap));
    }

    let mut best = f64::NEG_INFINITY;
    let mut subset: Vec<usize> = (0..vars).collect();
    let m = rows.len();
    let mut mat = vec![0.0; vars * vars];
    let mut rhs = vec![0.0; vars];
    loop {
        for (r, &idx) in subset.iter().enumerate() {
            mat[r * vars..(r + 1) * vars].copy_from_slice(&rows[idx].0);
            rhs[r] = rows[idx].1;
        }
        if solve_in_place(&mut mat, &mut rhs, vars) {
            let t = rhs[n];
            if t > best {
                let feasible = rows.iter().all(|(row, b)| {
                    dot(row, &rhs) <= b + 1e-9 * (1.0 + b.abs())
                });
                if feasible {
                    best = t;
                }
            }
        }
        if !next_combination(&mut subset, m) {
            break;
        }
    }
    best
}

fn next_combination(subset: &mut [usize], m: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < m - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting; the solution overwrites `rhs`.
pub(crate) fn solve_in_place(mat: &mut [f64], rhs: &mut [f64], n: usize) -> bool {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| mat[i * n + col].abs().total_cmp(&mat[j * n + col].abs()))
            .unwrap_or(col);
        if mat[pivot * n + col].abs() < 1e-12 {
            return false;
        }
        if pivot != col {
            for k in 0..n {
                mat.swap(pivot * n + k, col * n + k);
            }
            rhs.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = mat[row * n + col] / mat[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    mat[row * n + k] -= f * mat[col * n + k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
    }
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= mat[row * n + k] * rhs[k];
        }
        rhs[row] = acc / mat[row * n + row];
    }
    true
}

/// Support function of the point set's hull in direction `u`.
pub fn support_value(points: &PointConfiguration, u: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), points.dimension());
    points
        .points()
        .map(|p| dot(p, u))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Counter-clockwise extreme points (as indices) of a planar point set,
/// starting from the lowest-leftmost one. Collinear boundary points are
/// excluded; two indices describe a segment and one a single point.
pub fn convex_hull_2d(points: &PointConfiguration) -> Result<Vec<usize>> {
    if points.dimension() != 2 {
        return Err(KpvError::DimensionMismatch {
            expected: 2,
            found: points.dimension(),
        });
    }
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = (points.point(i), points.point(j));
        a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
    });
    idx.dedup_by(|&mut i, &mut j| points.point(i) == points.point(j));
    if idx.len() <= 2 {
        return Ok(idx);
    }
    let scale = points.diameter().max(f64::MIN_POSITIVE);
    let eps = 1e-12 * scale * scale;
    let cross = |o: usize, a: usize, b: usize| {
        let (o, a, b) = (points.point(o), points.point(a), points.point(b));
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for &i in &idx {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= eps {
            hull.pop();
        }
        hull.push(i);
    }
    let lower = hull.len() + 1;
    for &i in idx.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= eps {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    Ok(hull)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
