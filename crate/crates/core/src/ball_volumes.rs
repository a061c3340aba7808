//! Volumes and boundary volumes of unions and intersections of `N` balls
//! of a common radius.
//!
//! The union of the balls `B(p_i, r)` is tiled by the nearest-point
//! Voronoi regions truncated by the balls around their own sites, and the
//! intersection by the farthest-point regions:
//!
//! ```text
//! V_n(p, r) = Σ_i Vol[C_i ∩ B(p_i, r)]      V^n(p, r) = Σ_i Vol[C^i ∩ B(p_i, r)]
//! ```
//!
//! Each term is a truncated-polytope profile, so both volumes and their
//! radial derivatives (the boundary volumes) come out of the same ODE.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::configurations::PointConfiguration;
use crate::error::{KpvError, Result};
use crate::laurent::{fit_laurent, FitWindow, LaurentFit};
use crate::polyhedra::{dot, Halfspace, PolyhedralSet};
use crate::sampling::chunked;
use crate::truncated_volume::{
    ball_volume, sphere_area, MonteCarloEstimate, ProfileOptions, RadialVolumeProfile, TruncatedPolytope,
    DEFAULT_FIT_POINTS, DEFAULT_FIT_RATIO, DEFAULT_FIT_START, DEFAULT_FIT_TERMS,
};

/// Sites closer than this are treated as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-9;
/// Largest dimension handled by the Voronoi decomposition.
pub const MAX_ODE_DIMENSION: usize = 3;
/// Relative distance from a breakpoint below which boundary volumes are refused.
pub const BREAKPOINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VoronoiKind {
    Nearest,
    Farthest,
}

/// Union or intersection of the balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BallSystem {
    Union,
    Intersection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VoronoiRegion {
    pub kind: VoronoiKind,
    pub site_index: usize,
    /// `None` when the region has empty interior (a site that is never farthest).
    pub region: Option<PolyhedralSet>,
}

fn check_sites(p: &PointConfiguration, i: usize) -> Result<()> {
    if i >= p.len() {
        return Err(KpvError::SiteIndex { index: i, len: p.len() });
    }
    if let Some((a, b)) = p.find_duplicate(DUPLICATE_TOL) {
        return Err(KpvError::DuplicateSites { i: a, j: b });
    }
    Ok(())
}

/// Bisector halfspaces `<x, p_j - p_i> <= (|p_j|^2 - |p_i|^2) / 2`.
fn bisectors(p: &PointConfiguration, i: usize) -> Result<Vec<Halfspace>> {
    let pi = p.point(i);
    (0..p.len())
        .filter(|&j| j != i)
        .map(|j| {
            let pj = p.point(j);
            let normal: Vec<f64> = pj.iter().zip(pi).map(|(a, b)| a - b).collect();
            Halfspace::new(normal, 0.5 * (dot(pj, pj) - dot(pi, pi)))
        })
        .collect()
}

pub fn nearest_voronoi(p: &PointConfiguration, i: usize) -> Result<VoronoiRegion> {
    check_sites(p, i)?;
    let region = PolyhedralSet::new(p.dimension(), bisectors(p, i)?)?;
    Ok(VoronoiRegion {
        kind: VoronoiKind::Nearest,
        site_index: i,
        region: Some(region),
    })
}

pub fn farthest_voronoi(p: &PointConfiguration, i: usize) -> Result<VoronoiRegion> {
    check_sites(p, i)?;
    let flipped = bisectors(p, i)?.iter().map(Halfspace::flipped).collect();
    let set = PolyhedralSet::new_unchecked(p.dimension(), flipped)?;
    Ok(VoronoiRegion {
        kind: VoronoiKind::Farthest,
        site_index: i,
        region: set.has_interior().then_some(set),
    })
}

/// How to evaluate ball-system volumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum VolumeMethod {
    VoronoiOde,
    MonteCarlo { samples: u64, seed: u64 },
}

/// A volume with its standard error (zero for the ODE path).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallSystemVolumes {
    pub r: f64,
    pub union_volume: f64,
    pub intersection_volume: f64,
    /// Not available from plain hit-or-miss sampling.
    pub union_boundary: Option<f64>,
    pub intersection_boundary: Option<f64>,
    pub method: VolumeMethod,
    pub union_stderr: f64,
    pub intersection_stderr: f64,
}

/// Per-site truncated-region profiles for both decompositions, valid on
/// `[0, r_max]`.
#[derive(Debug, Clone)]
pub struct BallSystemProfile {
    dimension: usize,
    sites: usize,
    r_max: f64,
    nearest: Vec<RadialVolumeProfile>,
    farthest: Vec<Option<RadialVolumeProfile>>,
    window: FitWindow,
}

struct SiteTrees {
    nearest: Vec<TruncatedPolytope>,
    farthest: Vec<Option<TruncatedPolytope>>,
}

fn site_trees(p: &PointConfiguration, options: &ProfileOptions) -> Result<SiteTrees> {
    let n = p.dimension();
    if n > MAX_ODE_DIMENSION {
        return Err(KpvError::UnsupportedDimension {
            operation: "voronoi_ode",
            dimension: n,
        });
    }
    if p.is_empty() {
        return Err(KpvError::InvalidConfiguration("no sites".into()));
    }
    let built: Vec<(TruncatedPolytope, Option<TruncatedPolytope>)> = (0..p.len())
        .into_par_iter()
        .map(|i| {
            let near = nearest_voronoi(p, i)?.region.expect("nearest regions are never empty");
            let near = TruncatedPolytope::new(&near, p.point(i), options)?;
            let far = match farthest_voronoi(p, i)?.region {
                Some(set) => Some(TruncatedPolytope::new(&set, p.point(i), options)?),
                None => None,
            };
            Ok((near, far))
        })
        .collect::<Result<_>>()?;
    let (nearest, farthest) = built.into_iter().unzip();
    Ok(SiteTrees { nearest, farthest })
}

impl SiteTrees {
    fn outer_breakpoint(&self) -> f64 {
        self.nearest
            .iter()
            .chain(self.farthest.iter().flatten())
            .filter_map(|t| t.breakpoints().last().copied())
            .fold(0.0, f64::max)
    }
}

impl BallSystemProfile {
    /// Profiles on `[0, r_max]`.
    pub fn new(p: &PointConfiguration, r_max: f64, options: &ProfileOptions) -> Result<Self> {
        let trees = site_trees(p, options)?;
        Self::integrate(p, trees, r_max, options)
    }

    /// Profiles reaching the top of the default fit window.
    pub fn for_fit(p: &PointConfiguration, options: &ProfileOptions) -> Result<Self> {
        let trees = site_trees(p, options)?;
        let top = default_window_for(trees.outer_breakpoint()).r_max;
        Self::integrate(p, trees, top, options)
    }

    fn integrate(p: &PointConfiguration, trees: SiteTrees, r_max: f64, options: &ProfileOptions) -> Result<Self> {
        let window = default_window_for(trees.outer_breakpoint());
        let nearest = trees
            .nearest
            .par_iter()
            .map(|t| t.integrate(r_max, options))
            .collect::<Result<Vec<_>>>()?;
        let farthest = trees
            .farthest
            .par_iter()
            .map(|t| t.as_ref().map(|t| t.integrate(r_max, options)).transpose())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dimension: p.dimension(),
            sites: p.len(),
            r_max,
            nearest,
            farthest,
            window,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Fit window starting at ten times the outermost breakpoint of any site.
    pub fn default_window(&self) -> FitWindow {
        self.window
    }

    fn profiles(&self, which: BallSystem) -> Vec<&RadialVolumeProfile> {
        match which {
            BallSystem::Union => self.nearest.iter().collect(),
            BallSystem::Intersection => self.farthest.iter().flatten().collect(),
        }
    }

    /// All radii where the summed volume can fail to be smooth.
    pub fn breakpoints(&self, which: BallSystem) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .profiles(which)
            .iter()
            .flat_map(|p| p.breakpoints().iter().copied())
            .collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        all
    }

    pub fn volume(&self, which: BallSystem, r: f64) -> Result<f64> {
        if self.sites == 1 {
            return Ok(ball_volume(self.dimension) * r.powi(self.dimension as i32));
        }
        let mut total = 0.0;
        for prof in self.profiles(which) {
            total += prof.value(r)?;
        }
        Ok(total)
    }

    /// `dV/dr`, refused within a relative `1e-9` of a breakpoint.
    pub fn boundary(&self, which: BallSystem, r: f64) -> Result<f64> {
        if let Some(&b) = self
            .breakpoints(which)
            .iter()
            .find(|&&b| (r - b).abs() <= BREAKPOINT_TOL * b)
        {
            return Err(KpvError::AtBreakpoint { radius: r, breakpoint: b });
        }
        let mut total = 0.0;
        for prof in self.profiles(which) {
            total += prof.derivative(r)?;
        }
        Ok(total)
    }

    /// Laurent fit of the summed volume.
    pub fn fit(&self, which: BallSystem, window: &FitWindow, terms: usize) -> Result<LaurentFit> {
        if window.r_max > self.r_max * (1.0 + 1e-12) {
            return Err(KpvError::InvalidWindow(format!(
                "window reaches r = {} but the profiles stop at {}",
                window.r_max, self.r_max
            )));
        }
        fit_laurent(|r| self.volume(which, r), self.dimension, terms, window)
    }

    pub fn default_fit(&self, which: BallSystem) -> Result<LaurentFit> {
        self.fit(which, &self.window, DEFAULT_FIT_TERMS)
    }
}

fn default_window_for(outer: f64) -> FitWindow {
    let start = if outer > 0.0 { DEFAULT_FIT_START * outer } else { 1.0 };
    FitWindow::geometric(start, DEFAULT_FIT_RATIO, DEFAULT_FIT_POINTS)
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(KpvError::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    Ok(())
}

fn volume_of(p: &PointConfiguration, r: f64, method: &VolumeMethod, which: BallSystem) -> Result<VolumeEstimate> {
    check_radius(r)?;
    match *method {
        VolumeMethod::VoronoiOde => {
            let prof = BallSystemProfile::new(p, r, &ProfileOptions::default())?;
            Ok(VolumeEstimate {
                value: prof.volume(which, r)?,
                stderr: 0.0,
            })
        }
        VolumeMethod::MonteCarlo { samples, seed } => {
            let mc = mc_ball_volume(p, r, which, samples, seed)?;
            Ok(VolumeEstimate {
                value: mc.estimate,
                stderr: mc.stderr,
            })
        }
    }
}

/// Volume of `∪ B(p_i, r)`.
pub fn union_volume(p: &PointConfiguration, r: f64, method: &VolumeMethod) -> Result<VolumeEstimate> {
    volume_of(p, r, method, BallSystem::Union)
}

/// Volume of `∩ B(p_i, r)`.
pub fn intersection_volume(p: &PointConfiguration, r: f64, method: &VolumeMethod) -> Result<VolumeEstimate> {
    volume_of(p, r, method, BallSystem::Intersection)
}

/// Both volumes, plus boundary volumes on the ODE path.
pub fn ball_system_volumes(p: &PointConfiguration, r: f64, method: &VolumeMethod) -> Result<BallSystemVolumes> {
    check_radius(r)?;
    match *method {
        VolumeMethod::VoronoiOde => {
            let prof = BallSystemProfile::new(p, r, &ProfileOptions::default())?;
            Ok(BallSystemVolumes {
                r,
                union_volume: prof.volume(BallSystem::Union, r)?,
                intersection_volume: prof.volume(BallSystem::Intersection, r)?,
                union_boundary: prof.boundary(BallSystem::Union, r).ok(),
                intersection_boundary: prof.boundary(BallSystem::Intersection, r).ok(),
                method: *method,
                union_stderr: 0.0,
                intersection_stderr: 0.0,
            })
        }
        VolumeMethod::MonteCarlo { samples, seed } => {
            let (u, i) = mc_ball_volumes(p, r, samples, seed)?;
            Ok(BallSystemVolumes {
                r,
                union_volume: u.estimate,
                intersection_volume: i.estimate,
                union_boundary: None,
                intersection_boundary: None,
                method: *method,
                union_stderr: u.stderr,
                intersection_stderr: i.stderr,
            })
        }
    }
}

/// `d/dr` of the union or intersection volume: the `(n-1)`-volume of its boundary.
pub fn boundary_volume(p: &PointConfiguration, r: f64, which: BallSystem) -> Result<f64> {
    check_radius(r)?;
    if p.len() == 1 {
        return Ok(sphere_area(p.dimension()) * r.powi(p.dimension() as i32 - 1));
    }
    BallSystemProfile::new(p, r * (1.0 + 1e-6), &ProfileOptions::default())?.boundary(which, r)
}

/// Hit-or-miss sampling of the bounding box of the union, counting hits
/// for both the union and the intersection.
pub fn mc_ball_volumes(
    p: &PointConfiguration,
    r: f64,
    samples: u64,
    seed: u64,
) -> Result<(MonteCarloEstimate, MonteCarloEstimate)> {
    check_radius(r)?;
    if samples == 0 {
        return Err(KpvError::InvalidParameter("samples must be at least 1".into()));
    }
    let n = p.dimension();
    let (lo, hi) = p.bounding_box();
    let lo: Vec<f64> = lo.iter().map(|x| x - r).collect();
    let span: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| h + r - l).collect();
    let box_volume: f64 = span.iter().product();
    let r2 = r * r;
    let counts = chunked(samples, seed, |rng: &mut ChaCha8Rng, count| {
        use rand::Rng;
        let mut x = vec![0.0; n];
        let (mut union, mut inter) = (0u64, 0u64);
        for _ in 0..count {
            for k in 0..n {
                x[k] = lo[k] + span[k] * rng.random::<f64>();
            }
            let (mut any, mut all) = (false, true);
            for c in p.points() {
                let d2: f64 = c.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 <= r2 {
                    any = true;
                } else {
                    all = false;
                }
            }
            union += u64::from(any);
            inter += u64::from(all);
        }
        (union, inter)
    });
    let (u, i) = counts.iter().fold((0, 0), |(a, b), (x, y)| (a + x, b + y));
    Ok((
        MonteCarloEstimate::from_hits(u, samples, box_volume),
        MonteCarloEstimate::from_hits(i, samples, box_volume),
    ))
}

pub fn mc_ball_volume(
    p: &PointConfiguration,
    r: f64,
    which: BallSystem,
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    let (u, i) = mc_ball_volumes(p, r, samples, seed)?;
    Ok(match which {
        BallSystem::Union => u,
        BallSystem::Intersection => i,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg(n: usize, pts: &[&[f64]]) -> PointConfiguration {
        PointConfiguration::new(n, pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    fn lens(r: f64, d: f64) -> f64 {
        2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt()
    }

    #[test]
    fn voronoi_examples() {
        let two = cfg(2, &[&[0.0, 0.0], &[2.0, 0.0]]);
        let near = nearest_voronoi(&two, 0).unwrap().region.unwrap();
        assert_eq!(near.halfspaces().len(), 1);
        assert_eq!(near.halfspaces()[0].normal(), &[1.0, 0.0]);
        assert_eq!(near.halfspaces()[0].offset(), 1.0);
        let far = farthest_voronoi(&two, 0).unwrap().region.unwrap();
        assert_eq!(far.halfspaces()[0].normal(), &[-1.0, 0.0]);
        assert_eq!(far.halfspaces()[0].offset(), -1.0);

        let one = cfg(3, &[&[1.0, 2.0, 3.0]]);
        assert!(nearest_voronoi(&one, 0).unwrap().region.unwrap().halfspaces().is_empty());
        assert!(farthest_voronoi(&one, 0).unwrap().region.unwrap().halfspaces().is_empty());

        let sq = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0], &[0.5, 0.5]]);
        assert!(farthest_voronoi(&sq, 4).unwrap().region.is_none());

        let dup = cfg(2, &[&[0.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(nearest_voronoi(&dup, 0), Err(KpvError::DuplicateSites { .. })));
        assert!(matches!(nearest_voronoi(&two, 5), Err(KpvError::SiteIndex { .. })));
    }

    #[test]
    fn two_disk_lens() {
        let two = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0]]);
        let u = union_volume(&two, 1.0, &VolumeMethod::VoronoiOde).unwrap().value;
        let i = intersection_volume(&two, 1.0, &VolumeMethod::VoronoiOde).unwrap().value;
        let l = lens(1.0, 1.0);
        assert!((u - (2.0 * PI - l)).abs() <= 1e-8 * u, "{u}");
        assert!((i - l).abs() <= 1e-8 * l, "{i}");

        let ub = boundary_volume(&two, 1.0, BallSystem::Union).unwrap();
        let ib = boundary_volume(&two, 1.0, BallSystem::Intersection).unwrap();
        assert!((ub - 8.0 * PI / 3.0).abs() < 1e-7, "{ub}");
        assert!((ib - 4.0 * PI / 3.0).abs() < 1e-7, "{ib}");
    }

    #[test]
    fn disjoint_and_single() {
        let far = cfg(2, &[&[0.0, 0.0], &[10.0, 0.0]]);
        assert!((union_volume(&far, 1.0, &VolumeMethod::VoronoiOde).unwrap().value - 2.0 * PI).abs() < 1e-10);
        assert_eq!(intersection_volume(&far, 1.0, &VolumeMethod::VoronoiOde).unwrap().value, 0.0);
        let one = cfg(3, &[&[0.0, 0.0, 0.0]]);
        let v = ball_volume(3) * 8.0;
        assert_eq!(union_volume(&one, 2.0, &VolumeMethod::VoronoiOde).unwrap().value, v);
        assert_eq!(intersection_volume(&one, 2.0, &VolumeMethod::VoronoiOde).unwrap().value, v);
        assert!((boundary_volume(&one, 2.0, BallSystem::Union).unwrap() - 16.0 * PI).abs() < 1e-12);
        let mc = mc_ball_volume(&one, 2.0, BallSystem::Union, 200_000, 1).unwrap();
        assert!((mc.estimate - v).abs() <= 3.0 * mc.stderr);
        let mc = mc_ball_volume(&far, 1.0, BallSystem::Intersection, 10_000, 1).unwrap();
        assert_eq!((mc.estimate, mc.stderr, mc.hits), (0.0, 0.0, 0));
    }

    #[test]
    fn breakpoint_is_refused() {
        let two = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0]]);
        assert!(matches!(
            boundary_volume(&two, 0.5, BallSystem::Union),
            Err(KpvError::AtBreakpoint { .. })
        ));
        let four = cfg(4, &[&[0.0; 4], &[1.0, 0.0, 0.0, 0.0]]);
        assert!(matches!(
            union_volume(&four, 1.0, &VolumeMethod::VoronoiOde),
            Err(KpvError::UnsupportedDimension { .. })
        ));
    }
}
