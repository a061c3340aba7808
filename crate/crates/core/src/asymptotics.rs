//! Large-radius behaviour of ball-system volumes: Laurent coefficients,
//! checks of the asymptotic identities they satisfy, and the radius beyond
//! which the Kneser–Poulsen inequalities hold for an expansion.

use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ball_volumes::{BallSystem, BallSystemProfile};
use crate::configurations::{are_congruent, embed, is_expansion, PointConfiguration, DEFAULT_LENGTH_TOL};
use crate::error::{KpvError, Result};
pub use crate::laurent::{fit_laurent as laurent_fit, FitWindow, LaurentFit, CONDITION_BOUND};
use crate::meanwidth::{affine_dimension, mean_width, MeanWidthResult};
use crate::sampling::chunked;
use crate::truncated_volume::{ball_volume, MonteCarloEstimate, ProfileOptions};

/// Relative tolerance for coefficients of the size of the mean width.
pub const COEFFICIENT_TOL: f64 = 0.01;
/// Relative tolerance for the leading coefficient against `δ_n`.
pub const LEADING_TOL: f64 = 0.005;

/// One checked claim: `pass` iff `gap <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimRecord {
    pub claim: String,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ClaimRecord {
    pub fn new(claim: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let gap = (lhs - rhs).abs();
        Self {
            claim: claim.into(),
            lhs,
            rhs,
            gap,
            tolerance,
            pass: gap <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub records: Vec<ClaimRecord>,
    /// Raw fits and reference values behind the records.
    pub details: serde_json::Value,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn record(&self, claim: &str) -> Option<&ClaimRecord> {
        self.records.iter().find(|r| r.claim == claim)
    }
}

fn floor(n: usize) -> f64 {
    1e-6 * ball_volume(n)
}

/// Tolerance for a coefficient of order `scale`.
fn coefficient_tol(n: usize, scale: f64) -> f64 {
    (COEFFICIENT_TOL * scale.abs()).max(floor(n))
}

fn system_profile(p: &PointConfiguration, window: Option<&FitWindow>) -> Result<BallSystemProfile> {
    let options = ProfileOptions::default();
    match window {
        Some(w) => BallSystemProfile::new(p, w.r_max, &options),
        None => BallSystemProfile::for_fit(p, &options),
    }
}

struct SystemFits {
    union: LaurentFit,
    intersection: LaurentFit,
    mean_width: MeanWidthResult,
}

fn system_fits(p: &PointConfiguration, window: Option<&FitWindow>) -> Result<SystemFits> {
    let prof = system_profile(p, window)?;
    let w = window.copied().unwrap_or_else(|| prof.default_window());
    Ok(SystemFits {
        union: prof.fit(BallSystem::Union, &w, crate::truncated_volume::DEFAULT_FIT_TERMS)?,
        intersection: prof.fit(BallSystem::Intersection, &w, crate::truncated_volume::DEFAULT_FIT_TERMS)?,
        mean_width: mean_width(p)?,
    })
}

fn fits_json(f: &SystemFits) -> serde_json::Value {
    serde_json::json!({
        "union_fit": f.union,
        "intersection_fit": f.intersection,
        "mean_width": f.mean_width,
    })
}

/// Leading union coefficients against `δ_n` and the mean width of the hull.
pub fn verify_capoyleas_pach(p: &PointConfiguration, window: Option<&FitWindow>) -> Result<VerificationReport> {
    let n = p.dimension();
    let f = system_fits(p, window)?;
    let delta = ball_volume(n);
    let m = f.mean_width.value;
    let records = vec![
        ClaimRecord::new("union a_n = delta_n", f.union.leading(), delta, LEADING_TOL * delta),
        ClaimRecord::new(
            "union a_{n-1} = M_n",
            f.union.second(),
            m,
            coefficient_tol(n, m) + 3.0 * f.mean_width.stderr,
        ),
    ];
    Ok(VerificationReport {
        check: "capoyleas_pach".into(),
        records,
        details: fits_json(&f),
    })
}

/// Intersection coefficients against `-M_n`, and cancellation in the sum
/// of the union and intersection volumes.
pub fn verify_csikos(p: &PointConfiguration, window: Option<&FitWindow>) -> Result<VerificationReport> {
    let n = p.dimension();
    let f = system_fits(p, window)?;
    let delta = ball_volume(n);
    let m = f.mean_width.value;
    let tol = coefficient_tol(n, m) + 3.0 * f.mean_width.stderr;
    let records = vec![
        ClaimRecord::new("intersection a_{n-1} = -M_n", f.intersection.second(), -m, tol),
        ClaimRecord::new(
            "union a_n + intersection a_n = 2 delta_n",
            f.union.leading() + f.intersection.leading(),
            2.0 * delta,
            2.0 * LEADING_TOL * delta,
        ),
        ClaimRecord::new(
            "union a_{n-1} + intersection a_{n-1} = 0",
            f.union.second() + f.intersection.second(),
            0.0,
            tol,
        ),
    ];
    Ok(VerificationReport {
        check: "csikos".into(),
        records,
        details: fits_json(&f),
    })
}

/// `W_n'(0) + W^n'(0) = 0` for at most `n + 1` affinely independent sites.
pub fn verify_ww_proposition(p: &PointConfiguration) -> Result<VerificationReport> {
    let n = p.dimension();
    let count = p.len();
    if count > n + 1 {
        return Err(KpvError::GeneralPosition(format!("{count} sites in dimension {n}")));
    }
    if affine_dimension(p) + 1 != count {
        return Err(KpvError::GeneralPosition("sites are affinely dependent".into()));
    }
    let tol = 1e-3 * p.diameter() + floor(n);
    if count == 1 {
        return Ok(VerificationReport {
            check: "ww_proposition".into(),
            records: vec![ClaimRecord::new("W_n'(0) + W^n'(0) = 0", 0.0, 0.0, tol)],
            details: serde_json::Value::Null,
        });
    }
    let f = system_fits(p, None)?;
    Ok(VerificationReport {
        check: "ww_proposition".into(),
        records: vec![ClaimRecord::new(
            "W_n'(0) + W^n'(0) = 0",
            f.union.second() + f.intersection.second(),
            0.0,
            tol,
        )],
        details: fits_json(&f),
    })
}

/// Relative half-width of the radial difference used for `dV/dr`.
pub const LIFT_STEP: f64 = 0.01;
/// Largest relative standard error accepted for the shell estimate.
pub const LIFT_MAX_RELATIVE_ERROR: f64 = 0.05;

/// Monte Carlo estimate of `(V(r + Δ) - V(r - Δ)) / 2Δ` for the union,
/// from points of the bounding box that fall in the shell between the two
/// unions (one sample set for both radii).
pub fn mc_union_derivative(p: &PointConfiguration, r: f64, samples: u64, seed: u64) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(KpvError::InvalidParameter("samples must be at least 1".into()));
    }
    let n = p.dimension();
    let delta = LIFT_STEP * r;
    let (outer, inner) = (r + delta, r - delta);
    let (lo, hi) = p.bounding_box();
    let lo: Vec<f64> = lo.iter().map(|x| x - outer).collect();
    let span: Vec<f64> = hi.iter().zip(&lo).map(|(h, l)| h + outer - l).collect();
    let box_volume: f64 = span.iter().product();
    let hits: u64 = chunked(samples, seed, |rng: &mut ChaCha8Rng, count| {
        use rand::Rng;
        let mut x = vec![0.0; n];
        let mut hits = 0u64;
        for _ in 0..count {
            for k in 0..n {
                x[k] = lo[k] + span[k] * rng.random::<f64>();
            }
            let nearest = p
                .points()
                .map(|c| c.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            if nearest > inner && nearest <= outer {
                hits += 1;
            }
        }
        hits
    })
    .into_iter()
    .sum();
    let shell = MonteCarloEstimate::from_hits(hits, samples, box_volume);
    Ok(MonteCarloEstimate {
        estimate: shell.estimate / (2.0 * delta),
        stderr: shell.stderr / (2.0 * delta),
        ..shell
    })
}

/// Compares `V_n(p, r)` with `(1 / 2πr) d/dr V_{n+2}(p, r)`, the second
/// from sampling in `E^(n+2)`.
pub fn verify_lift_identity(
    p: &PointConfiguration,
    r_samples: &[f64],
    samples: u64,
    seed: u64,
) -> Result<VerificationReport> {
    let n = p.dimension();
    let lifted = embed(p, n + 2)?;
    let r_top = r_samples.iter().copied().fold(0.0, f64::max);
    let prof = if p.len() > 1 {
        Some(BallSystemProfile::new(p, r_top, &ProfileOptions::default())?)
    } else {
        None
    };
    let mut records = Vec::new();
    let mut details = Vec::new();
    for (k, &r) in r_samples.iter().enumerate() {
        let exact = match &prof {
            Some(prof) => prof.volume(BallSystem::Union, r)?,
            None => ball_volume(n) * r.powi(n as i32),
        };
        let d = mc_union_derivative(&lifted, r, samples, seed.wrapping_add(k as u64))?;
        let relative = if d.estimate > 0.0 { d.stderr / d.estimate } else { f64::INFINITY };
        if relative > LIFT_MAX_RELATIVE_ERROR {
            let required = (samples as f64 * (relative / LIFT_MAX_RELATIVE_ERROR).powi(2)).ceil();
            return Err(KpvError::InsufficientSamples {
                relative,
                required: required.min(u64::MAX as f64) as u64,
            });
        }
        let scale = 2.0 * PI * r;
        let lifted_value = d.estimate / scale;
        let stderr = d.stderr / scale;
        records.push(ClaimRecord::new(
            format!("V_n(r) = dV_(n+2)/dr / (2 pi r) at r = {r}"),
            exact,
            lifted_value,
            3.0 * stderr,
        ));
        details.push(serde_json::json!({"r": r, "derivative": d, "stderr": stderr}));
    }
    Ok(VerificationReport {
        check: "lift_identity".into(),
        records,
        details: serde_json::Value::Array(details),
    })
}

/// Geometric radius grid for [`kp_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdGrid {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl ThresholdGrid {
    /// 30 radii from the larger diameter to a thousand times it.
    pub fn for_pair(p: &PointConfiguration, q: &PointConfiguration) -> Self {
        let d = p.diameter().max(q.diameter()).max(f64::MIN_POSITIVE);
        Self {
            r_min: d,
            r_max: 1000.0 * d,
            count: 30,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        FitWindow {
            r_min: self.r_min,
            r_max: self.r_max,
            count: self.count,
        }
        .radii()
    }
}

/// Signed gaps of the four inequalities at one radius, positive when the
/// inequality holds: union volume, intersection volume, union boundary,
/// intersection boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdPoint {
    pub r: f64,
    pub gaps: [f64; 4],
    pub tolerances: [f64; 4],
}

impl ThresholdPoint {
    fn holds(&self) -> bool {
        self.gaps.iter().zip(&self.tolerances).all(|(g, t)| *g >= -t)
    }

    fn strict_volumes(&self) -> bool {
        self.gaps[..2].iter().zip(&self.tolerances[..2]).all(|(g, t)| g > t)
    }

    fn within_tolerance(&self) -> bool {
        self.gaps.iter().zip(&self.tolerances).all(|(g, t)| g.abs() <= *t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    /// Smallest grid radius from which all four inequalities hold.
    pub r0: f64,
    pub checked_grid: Vec<f64>,
    /// Union and intersection volume inequalities hold at every grid
    /// radius from `r0` on, strictly unless the pair is congruent.
    pub all_hold: bool,
    /// Smallest gap from `r0` on, volume gaps divided by `r^(n-1)` and
    /// boundary gaps by `r^(n-2)`.
    pub strictness_margin: f64,
    pub congruent: bool,
    /// Grid radii below `r0` at which some inequality fails.
    pub violations: Vec<f64>,
    pub points: Vec<ThresholdPoint>,
}

/// Relative numerical tolerance on volumes and boundary volumes.
pub const THRESHOLD_TOL: f64 = 1e-9;

/// Scans `grid` for the radius beyond which the union and intersection
/// volumes and boundary volumes are ordered as the expansion predicts.
pub fn kp_threshold(p: &PointConfiguration, q: &PointConfiguration, grid: &ThresholdGrid) -> Result<ThresholdResult> {
    if p.dimension() != q.dimension() {
        return Err(KpvError::DimensionMismatch {
            expected: p.dimension(),
            found: q.dimension(),
        });
    }
    if !is_expansion(p, q, DEFAULT_LENGTH_TOL)? {
        return Err(KpvError::InvalidConfiguration("q is not an expansion of p".into()));
    }
    if !(grid.r_min > 0.0 && grid.r_max > grid.r_min && grid.count >= 2) {
        return Err(KpvError::InvalidParameter(format!("bad threshold grid {grid:?}")));
    }
    let n = p.dimension();
    let congruent = are_congruent(p, q, DEFAULT_LENGTH_TOL)?;
    let options = ProfileOptions::default();
    let top = grid.r_max * (1.0 + 1e-6);
    let (pp, qp) = rayon::join(
        || BallSystemProfile::new(p, top, &options),
        || BallSystemProfile::new(q, top, &options),
    );
    let (pp, qp) = (pp?, qp?);
    let mut breaks: Vec<f64> = [&pp, &qp]
        .iter()
        .flat_map(|s| {
            let mut b = s.breakpoints(BallSystem::Union);
            b.extend(s.breakpoints(BallSystem::Intersection));
            b
        })
        .collect();
    breaks.sort_by(f64::total_cmp);

    let radii = grid.radii();
    let delta = ball_volume(n);
    let points = radii
        .par_iter()
        .map(|&r0| {
            let mut r = r0;
            while breaks.iter().any(|&b| (r - b).abs() <= 1e-8 * b) {
                r *= 1.0 + 1e-7;
            }
            let vu = (pp.volume(BallSystem::Union, r)?, qp.volume(BallSystem::Union, r)?);
            let vi = (pp.volume(BallSystem::Intersection, r)?, qp.volume(BallSystem::Intersection, r)?);
            let bu = (pp.boundary(BallSystem::Union, r)?, qp.boundary(BallSystem::Union, r)?);
            let bi = (pp.boundary(BallSystem::Intersection, r)?, qp.boundary(BallSystem::Intersection, r)?);
            let vol_tol = THRESHOLD_TOL * delta * r.powi(n as i32) * p.len() as f64;
            let bdry_tol = THRESHOLD_TOL * n as f64 * delta * r.powi(n as i32 - 1) * p.len() as f64;
            Ok(ThresholdPoint {
                r,
                gaps: [vu.1 - vu.0, vi.0 - vi.1, bu.1 - bu.0, bi.0 - bi.1],
                tolerances: [vol_tol, vol_tol, bdry_tol, bdry_tol],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let last = points.last().expect("grid has at least two radii");
    if !last.holds() {
        return Err(KpvError::ThresholdNotReached { radius: last.r });
    }
    let start = points.iter().rposition(|pt| !pt.holds()).map_or(0, |k| k + 1);
    let above = &points[start..];
    let all_hold = if congruent {
        above.iter().all(ThresholdPoint::within_tolerance)
    } else {
        above.iter().all(ThresholdPoint::strict_volumes)
    };
    let strictness_margin = above
        .iter()
        .map(|pt| {
            let v = pt.r.powi(n as i32 - 1);
            let b = pt.r.powi(n as i32 - 2);
            (pt.gaps[0] / v).min(pt.gaps[1] / v).min(pt.gaps[2] / b).min(pt.gaps[3] / b)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(ThresholdResult {
        r0: points[start].r,
        checked_grid: points.iter().map(|pt| pt.r).collect(),
        all_hold,
        strictness_margin,
        congruent,
        violations: points[..start].iter().filter(|pt| !pt.holds()).map(|pt| pt.r).collect(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, pts: &[&[f64]]) -> PointConfiguration {
        PointConfiguration::new(n, pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn single_ball_fit() {
        let one = cfg(3, &[&[0.5, 0.0, 1.0]]);
        let fit = laurent_fit(
            |r| Ok(ball_volume(3) * r.powi(3)),
            3,
            4,
            &FitWindow::geometric(1.0, 100.0, 32),
        )
        .unwrap();
        assert!((fit.leading() / ball_volume(3) - 1.0).abs() < 1e-6);
        assert!(fit.second().abs() < 1e-6);
        let rep = verify_capoyleas_pach(&one, None).unwrap();
        assert!(rep.passed(), "{rep:?}");
        let rep = verify_ww_proposition(&one).unwrap();
        assert_eq!(rep.records[0].gap, 0.0);
    }

    #[test]
    fn segment_coefficients() {
        let seg = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0]]);
        let rep = verify_capoyleas_pach(&seg, None).unwrap();
        assert!(rep.passed(), "{rep:#?}");
        let a1 = rep.record("union a_{n-1} = M_n").unwrap().lhs;
        assert!((a1 - 2.0).abs() < 1e-4, "{a1}");
        let rep = verify_csikos(&seg, None).unwrap();
        assert!(rep.passed(), "{rep:#?}");
        let rep = verify_ww_proposition(&seg).unwrap();
        assert!(rep.records[0].gap <= 1e-3, "{rep:?}");
    }

    #[test]
    fn unit_square_perimeter() {
        let sq = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let rep = verify_capoyleas_pach(&sq, None).unwrap();
        assert!(rep.passed(), "{rep:#?}");
        assert!(matches!(verify_ww_proposition(&sq), Err(KpvError::GeneralPosition(_))));
    }

    #[test]
    fn lift_identity_single_ball() {
        let one = cfg(2, &[&[0.0, 0.0]]);
        let rep = verify_lift_identity(&one, &[2.0], 1_000_000, 3).unwrap();
        assert!(rep.passed(), "{rep:#?}");
        assert!(matches!(
            verify_lift_identity(&one, &[2.0], 10, 3),
            Err(KpvError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn scaled_square_threshold() {
        let sq = cfg(2, &[&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.0, 1.0]]);
        let big = sq.scaled(1.1).unwrap();
        let res = kp_threshold(&sq, &big, &ThresholdGrid::for_pair(&sq, &big)).unwrap();
        assert!(res.all_hold && res.strictness_margin > 0.0, "{res:#?}");
        let same = kp_threshold(&sq, &sq, &ThresholdGrid::for_pair(&sq, &sq)).unwrap();
        assert!(same.all_hold && same.congruent);
        assert!(same.strictness_margin.abs() <= 1e-9);
        assert!(kp_threshold(&big, &sq, &ThresholdGrid::for_pair(&sq, &big)).is_err());
    }
}
