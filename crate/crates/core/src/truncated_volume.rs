//! Volume of a polyhedral set truncated by a ball, as a function of the
//! ball radius.
//!
//! The volume `V(r)` of `P ∩ B(p0, r)` splits into the cone over the
//! spherical part of the boundary plus signed cones over the planar faces:
//!
//! ```text
//! n V(r) = sum_i eps_i h_i V_i(sqrt(r^2 - h_i^2)) + r V'(r)
//! ```
//!
//! where `h_i` is the distance from `p0` to the hyperplane of face `F_i`,
//! `eps_i` records which side `p0` is on, and `V_i` is the same kind of
//! function for `F_i` (one dimension lower) about the foot of `p0` on that
//! hyperplane. [`TruncatedPolytope`] builds the tree of faces down to
//! dimension one, where the volume is an explicit interval length, and
//! [`TruncatedPolytope::integrate`] solves the equation upwards.
//!
//! The right-hand side is only continuous where a face term switches on,
//! at `r = h_i` and at the images `sqrt(h_i^2 + b^2)` of the face's own
//! breakpoints `b`. Near such a point the solution behaves like a power
//! series in `sqrt(r - b)`, so every segment between breakpoints is
//! integrated in the variable `u = sqrt(r - b)`, in which it is smooth.

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{KpvError, Result};
use crate::laurent::{fit_laurent, FitWindow, LaurentFit};
use crate::ode::{integrate, DenseSolution, StepControl};
use crate::polyhedra::{complement_set, contains, dot, face_data, Halfspace, PolyhedralSet};
use crate::sampling::{chunked, point_in_ball, unit_vector};

/// Volume of the unit ball in `E^n`.
pub fn ball_volume(n: usize) -> f64 {
    let mut delta = if n.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut k = if n.is_multiple_of(2) { 2 } else { 3 };
    while k <= n {
        delta *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    delta
}

/// Surface area of the unit sphere `S^(n-1)`.
pub fn sphere_area(n: usize) -> f64 {
    n as f64 * ball_volume(n)
}

/// `delta_n`, the volume of the unit `n`-ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallConstant {
    pub n: usize,
    pub delta: f64,
}

impl BallConstant {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            delta: ball_volume(n),
        }
    }
}

/// Grid size and span ratio of the default fit window.
pub const DEFAULT_FIT_POINTS: usize = 32;
pub const DEFAULT_FIT_RATIO: f64 = 100.0;
/// The default window starts at this multiple of the outermost breakpoint.
pub const DEFAULT_FIT_START: f64 = 10.0;
pub const DEFAULT_FIT_TERMS: usize = 4;

/// Options for building a radial volume profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub step: StepControl,
    /// Directions used to estimate the solid-angle fraction at a base point
    /// on the boundary of at least three facets (dimension three and up).
    pub omega_samples: u64,
    pub omega_seed: u64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            step: StepControl::default(),
            omega_samples: 1_000_000,
            omega_seed: 0x6b70_7631,
        }
    }
}

/// The face tree of a truncated polytope, before any integration.
#[derive(Debug, Clone)]
pub struct TruncatedPolytope {
    dimension: usize,
    node: Node,
}

#[derive(Debug, Clone)]
enum Node {
    /// No interior: the volume is identically zero.
    Zero,
    /// One-dimensional set `[lo, hi]` relative to the base point.
    Interval { lo: f64, hi: f64 },
    Cone {
        omega: f64,
        omega_stderr: f64,
        faces: Vec<FaceNode>,
    },
}

#[derive(Debug, Clone)]
struct FaceNode {
    h: f64,
    epsilon: f64,
    child: TruncatedPolytope,
}

impl TruncatedPolytope {
    pub fn new(set: &PolyhedralSet, p0: &[f64], options: &ProfileOptions) -> Result<Self> {
        let n = set.dimension();
        if p0.len() != n {
            return Err(KpvError::DimensionMismatch {
                expected: n,
                found: p0.len(),
            });
        }
        if n == 1 {
            let mut lo = f64::NEG_INFINITY;
            let mut hi = f64::INFINITY;
            for h in set.halfspaces() {
                let bound = h.slack(p0);
                if h.normal()[0] > 0.0 {
                    hi = hi.min(bound);
                } else {
                    lo = lo.max(-bound);
                }
            }
            let scale = 1.0 + lo.abs().min(hi.abs()).min(1e300);
            if lo > hi + 1e-12 * scale {
                return Err(KpvError::Infeasible("empty interval".into()));
            }
            let node = if hi - lo <= 1e-12 * scale {
                Node::Zero
            } else {
                Node::Interval { lo, hi }
            };
            return Ok(Self { dimension: 1, node });
        }
        if !set.has_interior() {
            return Ok(Self {
                dimension: n,
                node: Node::Zero,
            });
        }
        let faces = face_data(set, p0)?;
        let scale = 1.0 + faces.iter().map(|f| f.h).fold(0.0, f64::max);
        let tight_tol = 1e-12 * scale;

        let (omega, omega_stderr) = if !contains(set, p0)? {
            (0.0, 0.0)
        } else {
            let tight: Vec<&[f64]> = faces
                .iter()
                .filter(|f| f.h <= tight_tol)
                .map(|f| set.halfspaces()[f.face_index].normal())
                .collect();
            cone_fraction(&tight, n, options)
        };

        let origin = vec![0.0; n - 1];
        let mut nodes = Vec::new();
        for f in faces.iter().filter(|f| f.h > tight_tol) {
            nodes.push(FaceNode {
                h: f.h,
                epsilon: f.epsilon,
                child: TruncatedPolytope::new(&f.induced_face, &origin, options)?,
            });
        }
        Ok(Self {
            dimension: n,
            node: Node::Cone {
                omega,
                omega_stderr,
                faces: nodes,
            },
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Radii where the volume function can fail to be smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match &self.node {
            Node::Zero => {}
            Node::Interval { lo, hi } => {
                for b in [lo.abs(), hi.abs()] {
                    if b.is_finite() && b > 0.0 {
                        out.push(b);
                    }
                }
            }
            Node::Cone { faces, .. } => {
                for f in faces {
                    out.push(f.h);
                    out.extend(f.child.breakpoints().into_iter().map(|b| f.h.hypot(b)));
                }
            }
        }
        sort_dedup(&mut out);
        out
    }

    /// Default Laurent-fit window: 32 radii over `[R, 100 R]` with `R` ten
    /// times the outermost breakpoint (or one when there is none).
    pub fn default_window(&self) -> FitWindow {
        let outer = self.breakpoints().last().copied().unwrap_or(0.0);
        let start = if outer > 0.0 {
            DEFAULT_FIT_START * outer
        } else {
            1.0
        };
        FitWindow::geometric(start, DEFAULT_FIT_RATIO, DEFAULT_FIT_POINTS)
    }

    /// Solves for the volume profile on `[0, r_max]`.
    pub fn integrate(&self, r_max: f64, options: &ProfileOptions) -> Result<RadialVolumeProfile> {
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(KpvError::InvalidParameter(format!(
                "r_max must be positive and finite, got {r_max}"
            )));
        }
        let n = self.dimension;
        let window = self.default_window();
        let breakpoints = self.breakpoints();
        let body = match &self.node {
            Node::Zero => Body::Zero,
            Node::Interval { lo, hi } => Body::Interval { lo: *lo, hi: *hi },
            Node::Cone {
                omega,
                omega_stderr,
                faces,
            } => {
                let mut face_profiles = Vec::with_capacity(faces.len());
                for f in faces {
                    let reach = if r_max > f.h {
                        ((r_max - f.h) * (r_max + f.h)).sqrt()
                    } else {
                        0.0
                    };
                    let profile = f.child.integrate(reach.max(f64::MIN_POSITIVE), options)?;
                    face_profiles.push(FaceProfile {
                        h: f.h,
                        epsilon: f.epsilon,
                        profile,
                    });
                }
                let inner: Vec<f64> = breakpoints.iter().copied().filter(|&b| b < r_max).collect();
                let delta = ball_volume(n);
                let mut segments: Vec<Segment> = Vec::with_capacity(inner.len());
                if let Some(&first) = inner.first() {
                    let mut control = options.step;
                    control.atol = control.rtol * delta * first.powi(n as i32) * 1e-2;
                    let mut v = omega * delta * first.powi(n as i32);
                    for (k, &start) in inner.iter().enumerate() {
                        let end = inner.get(k + 1).copied().unwrap_or(r_max);
                        let u_end = (end - start).sqrt();
                        let rhs = |u: f64, v: f64| {
                            2.0 * u * volume_rhs(n, &face_profiles, start + u * u, v)
                        };
                        let sol = integrate(rhs, u_end, v, &control, |u| start + u * u)?;
                        v = sol.last();
                        segments.push(Segment { start, sol });
                    }
                }
                Body::Ode {
                    omega: *omega,
                    omega_stderr: *omega_stderr,
                    faces: face_profiles,
                    segments,
                }
            }
        };
        let mut profile = RadialVolumeProfile {
            dimension: n,
            r_max,
            breakpoints: breakpoints.into_iter().filter(|&b| b <= r_max).collect(),
            window,
            body,
            w_at_zero: None,
            w_prime_at_zero: None,
        };
        if r_max >= window.r_max * (1.0 - 1e-12) {
            let fit = w_fit(&profile, &window, DEFAULT_FIT_TERMS)?;
            profile.w_at_zero = Some(fit.leading());
            profile.w_prime_at_zero = Some(fit.second());
        }
        Ok(profile)
    }
}

fn sort_dedup(values: &mut Vec<f64>) {
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
}

/// Solid-angle fraction of `{x : <a_j, x> <= 0 for all j}`.
fn cone_fraction(normals: &[&[f64]], n: usize, options: &ProfileOptions) -> (f64, f64) {
    use std::f64::consts::PI;
    match normals.len() {
        0 => (1.0, 0.0),
        1 => (0.5, 0.0),
        2 => {
            let c = dot(normals[0], normals[1]).clamp(-1.0, 1.0);
            ((PI - c.acos()) / (2.0 * PI), 0.0)
        }
        _ if n == 2 => (planar_cone_fraction(normals), 0.0),
        _ => {
            let samples = options.omega_samples.max(1);
            let hits: u64 = chunked(samples, options.omega_seed, |rng: &mut ChaCha8Rng, count| {
                let mut u = vec![0.0; n];
                let mut hits = 0u64;
                for _ in 0..count {
                    unit_vector(rng, &mut u);
                    if normals.iter().all(|a| dot(a, &u) <= 0.0) {
                        hits += 1;
                    }
                }
                hits
            })
            .into_iter()
            .sum();
            let p = hits as f64 / samples as f64;
            (p, (p * (1.0 - p) / samples as f64).sqrt())
        }
    }
}

/// Exact angular measure of a planar polyhedral cone, from the arcs cut
/// out by the boundary rays of its constraints.
fn planar_cone_fraction(normals: &[&[f64]]) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut cuts: Vec<f64> = normals
        .iter()
        .flat_map(|a| {
            let phi = a[1].atan2(a[0]);
            [phi + PI / 2.0, phi - PI / 2.0]
        })
        .map(|t| t.rem_euclid(TAU))
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for k in 0..cuts.len() {
        let a = cuts[k];
        let b = if k + 1 < cuts.len() { cuts[k + 1] } else { cuts[0] + TAU };
        let mid = 0.5 * (a + b);
        let u = [mid.cos(), mid.sin()];
        if normals.iter().all(|nrm| dot(nrm, &u) <= 0.0) {
            total += b - a;
        }
    }
    total / TAU
}

fn volume_rhs(n: usize, faces: &[FaceProfile], r: f64, v: f64) -> f64 {
    let mut acc = n as f64 * v;
    for f in faces {
        if r > f.h {
            let rho = ((r - f.h) * (r + f.h)).sqrt();
            acc -= f.epsilon * f.h * f.profile.value_unchecked(rho);
        }
    }
    acc / r
}

#[derive(Debug, Clone)]
struct FaceProfile {
    h: f64,
    epsilon: f64,
    profile: RadialVolumeProfile,
}

#[derive(Debug, Clone)]
struct Segment {
    start: f64,
    sol: DenseSolution,
}

#[derive(Debug, Clone)]
enum Body {
    Zero,
    Interval {
        lo: f64,
        hi: f64,
    },
    Ode {
        omega: f64,
        omega_stderr: f64,
        faces: Vec<FaceProfile>,
        segments: Vec<Segment>,
    },
}

/// Truncated volume `V(r)` on `[0, r_max]`, evaluable at any radius in range.
#[derive(Debug, Clone)]
pub struct RadialVolumeProfile {
    dimension: usize,
    r_max: f64,
    breakpoints: Vec<f64>,
    window: FitWindow,
    body: Body,
    w_at_zero: Option<f64>,
    w_prime_at_zero: Option<f64>,
}

/// One row of a profile table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub r: f64,
    pub volume: f64,
    pub derivative: f64,
}

impl RadialVolumeProfile {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Breakpoints up to `r_max`, sorted.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn default_window(&self) -> FitWindow {
        self.window
    }

    /// Leading Laurent coefficient, available when the profile reaches the
    /// top of its default fit window.
    pub fn w_at_zero(&self) -> Option<f64> {
        self.w_at_zero
    }

    pub fn w_prime_at_zero(&self) -> Option<f64> {
        self.w_prime_at_zero
    }

    /// Fraction of the small ball about the base point that lies in the set.
    pub fn omega(&self) -> f64 {
        match &self.body {
            Body::Zero => 0.0,
            Body::Interval { lo, hi } => {
                if *lo < 0.0 && *hi > 0.0 {
                    1.0
                } else if *lo == 0.0 || *hi == 0.0 {
                    0.5
                } else {
                    0.0
                }
            }
            Body::Ode { omega, .. } => *omega,
        }
    }

    pub fn omega_stderr(&self) -> f64 {
        match &self.body {
            Body::Ode { omega_stderr, .. } => *omega_stderr,
            _ => 0.0,
        }
    }

    fn check_range(&self, r: f64) -> Result<()> {
        if r > self.r_max * (1.0 + 1e-12) || r.is_nan() {
            return Err(KpvError::OutOfRange {
                radius: r,
                r_max: self.r_max,
            });
        }
        Ok(())
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        Ok(self.value_unchecked(r))
    }

    /// `dV/dr`, read off the right-hand side of the volume equation.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        self.check_range(r)?;
        Ok(self.derivative_unchecked(r))
    }

    pub(crate) fn value_unchecked(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let r = r.min(self.r_max);
        match &self.body {
            Body::Zero => 0.0,
            Body::Interval { lo, hi } => (hi.min(r) - lo.max(-r)).max(0.0),
            Body::Ode {
                omega, segments, ..
            } => {
                if segments.is_empty() || r <= segments[0].start {
                    return omega * ball_volume(self.dimension) * r.powi(self.dimension as i32);
                }
                let k = segments.partition_point(|s| s.start <= r) - 1;
                let seg = &segments[k];
                seg.sol.eval((r - seg.start).sqrt())
            }
        }
    }

    pub(crate) fn derivative_unchecked(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let n = self.dimension;
        match &self.body {
            Body::Zero => 0.0,
            Body::Interval { lo, hi } => {
                if hi.min(r) - lo.max(-r) <= 0.0 {
                    0.0
                } else {
                    f64::from(u8::from(r < *hi)) + f64::from(u8::from(r < -*lo))
                }
            }
            Body::Ode {
                omega,
                faces,
                segments,
                ..
            } => {
                if segments.is_empty() || r <= segments[0].start {
                    return n as f64 * omega * ball_volume(n) * r.powi(n as i32 - 1);
                }
                volume_rhs(n, faces, r, self.value_unchecked(r))
            }
        }
    }

    /// Knot radii of the solution (plus breakpoints), with values and slopes.
    pub fn grid(&self) -> Vec<ProfilePoint> {
        let mut radii: Vec<f64> = match &self.body {
            Body::Ode { segments, .. } => segments
                .iter()
                .flat_map(|s| s.sol.xs.iter().map(move |u| s.start + u * u))
                .collect(),
            _ => self.breakpoints.clone(),
        };
        radii.push(self.r_max);
        radii.retain(|&r| r > 0.0 && r <= self.r_max);
        sort_dedup(&mut radii);
        radii
            .into_iter()
            .map(|r| ProfilePoint {
                r,
                volume: self.value_unchecked(r),
                derivative: self.derivative_unchecked(r),
            })
            .collect()
    }

    /// CSV table with columns `r,V,dV/dr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,V,dV/dr\n");
        for p in self.grid() {
            out.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", p.r, p.volume, p.derivative));
        }
        out
    }
}

/// Profile of `P ∩ B(p0, r)` for `r` in `[0, r_max]`.
pub fn volume_profile(
    set: &PolyhedralSet,
    p0: &[f64],
    r_max: f64,
    options: &ProfileOptions,
) -> Result<RadialVolumeProfile> {
    TruncatedPolytope::new(set, p0, options)?.integrate(r_max, options)
}

/// Profile integrated far enough to carry its own Laurent coefficients.
pub fn volume_profile_for_fit(
    set: &PolyhedralSet,
    p0: &[f64],
    options: &ProfileOptions,
) -> Result<RadialVolumeProfile> {
    let tree = TruncatedPolytope::new(set, p0, options)?;
    let top = tree.default_window().r_max;
    tree.integrate(top, options)
}

/// Laurent fit of a profile on an explicit window.
pub fn w_fit(profile: &RadialVolumeProfile, window: &FitWindow, terms: usize) -> Result<LaurentFit> {
    if window.r_max > profile.r_max * (1.0 + 1e-12) {
        return Err(KpvError::InvalidWindow(format!(
            "window reaches r = {} but the profile stops at {}; integrate to a larger r_max",
            window.r_max, profile.r_max
        )));
    }
    fit_laurent(|r| Ok(profile.value_unchecked(r)), profile.dimension, terms, window)
}

/// `W(0)` and `W'(0)` from a fit on the profile's default window.
pub fn w_prime_at_zero(profile: &RadialVolumeProfile) -> Result<LaurentFit> {
    w_fit(profile, &profile.default_window(), DEFAULT_FIT_TERMS)
}

/// Both sides of the complementary-halfspace identity
/// `W'_P(0) + W'_Pbar(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WwCheck {
    pub w_prime: f64,
    pub w_prime_complement: f64,
    pub defect: f64,
    pub max_h: f64,
}

/// Fits `W'(0)` for `P = ∩ H_i` and for the intersection of the
/// complementary halfspaces, and returns `|W'_P(0) + W'_Pbar(0)|`.
pub fn check_ww_lemma(halfspaces: &[Halfspace], p0: &[f64]) -> Result<WwCheck> {
    let n = p0.len();
    let k = halfspaces.len();
    if k > n {
        return Err(KpvError::GeneralPosition(format!(
            "{k} halfspaces in dimension {n}"
        )));
    }
    if k > 0 {
        let gram = nalgebra::DMatrix::from_fn(k, k, |i, j| {
            dot(halfspaces[i].normal(), halfspaces[j].normal())
        });
        let smallest = gram.symmetric_eigenvalues().min();
        if smallest <= 1e-10 {
            return Err(KpvError::GeneralPosition(
                "halfspace normals are linearly dependent".into(),
            ));
        }
    }
    let options = ProfileOptions::default();
    let set = PolyhedralSet::new(n, halfspaces.to_vec())?;
    let complement = complement_set(&set)?;
    let w = w_prime_at_zero(&volume_profile_for_fit(&set, p0, &options)?)?.second();
    let wc = w_prime_at_zero(&volume_profile_for_fit(&complement, p0, &options)?)?.second();
    let max_h = halfspaces
        .iter()
        .map(|h| h.slack(p0).abs())
        .fold(0.0, f64::max);
    Ok(WwCheck {
        w_prime: w,
        w_prime_complement: wc,
        defect: (w + wc).abs(),
        max_h,
    })
}

/// Hit-or-miss estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
    pub hits: u64,
}

impl MonteCarloEstimate {
    pub(crate) fn from_hits(hits: u64, samples: u64, region_volume: f64) -> Self {
        let p = hits as f64 / samples as f64;
        Self {
            estimate: p * region_volume,
            stderr: region_volume * (p * (1.0 - p) / samples as f64).sqrt(),
            samples,
            hits,
        }
    }
}

/// Uniform samples in `B(p0, r)`; the fraction inside `P` times the ball volume.
pub fn mc_truncated_volume(
    set: &PolyhedralSet,
    p0: &[f64],
    r: f64,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let n = set.dimension();
    if p0.len() != n {
        return Err(KpvError::DimensionMismatch {
            expected: n,
            found: p0.len(),
        });
    }
    if samples == 0 {
        return Err(KpvError::InvalidParameter("samples must be at least 1".into()));
    }
    let hits: u64 = chunked(samples, seed, |rng: &mut ChaCha8Rng, count| {
        let mut x = vec![0.0; n];
        let mut hits = 0u64;
        for _ in 0..count {
            point_in_ball(rng, p0, r, &mut x);
            if set.halfspaces().iter().all(|h| h.slack(&x) >= 0.0) {
                hits += 1;
            }
        }
        hits
    })
    .into_iter()
    .sum();
    Ok(MonteCarloEstimate::from_hits(
        hits,
        samples,
        ball_volume(n) * r.powi(n as i32),
    ))
}
