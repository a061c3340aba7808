//! Least-squares recovery of the leading Laurent coefficients of a radial
//! volume function near `r = infinity`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{KpvError, Result};

/// Fits are refused above this condition number of the design matrix.
pub const CONDITION_BOUND: f64 = 1e10;

/// Geometric radius grid used by a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitWindow {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl FitWindow {
    /// `count` radii spanning `[r_min, ratio * r_min]`.
    pub fn geometric(r_min: f64, ratio: f64, count: usize) -> Self {
        Self {
            r_min,
            r_max: r_min * ratio,
            count,
        }
    }

    pub fn radii(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.r_min];
        }
        let ratio = self.r_max / self.r_min;
        (0..self.count)
            .map(|i| self.r_min * ratio.powf(i as f64 / (self.count - 1) as f64))
            .collect()
    }

    fn validate(&self, terms: usize) -> Result<()> {
        if !(self.r_min > 0.0) || !(self.r_max > self.r_min) || !self.r_max.is_finite() {
            return Err(KpvError::InvalidWindow(format!(
                "need 0 < r_min < r_max, got [{}, {}]",
                self.r_min, self.r_max
            )));
        }
        if self.count < terms {
            return Err(KpvError::InvalidWindow(format!(
                "{} grid radii cannot determine {terms} coefficients",
                self.count
            )));
        }
        Ok(())
    }
}

/// Coefficients `(a_n, a_{n-1}, ...)` of `V(r) ~ sum_k a_{n-k} r^{n-k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaurentFit {
    pub dimension: usize,
    pub coefficients: Vec<f64>,
    pub window: FitWindow,
    /// Root-mean-square residual of `V(r) / r^n` over the grid.
    pub residual_norm: f64,
    pub condition_estimate: f64,
}

impl LaurentFit {
    /// Coefficient of `r^n` (the value of `W` at `s = 0`).
    pub fn leading(&self) -> f64 {
        self.coefficients[0]
    }

    /// Coefficient of `r^(n-1)` (the derivative of `W` at `s = 0`).
    pub fn second(&self) -> f64 {
        self.coefficients.get(1).copied().unwrap_or(0.0)
    }
}

/// Fits `terms` Laurent coefficients to `evaluate` on the window.
///
/// The model is solved in the scaled variable `t = r_min / r`, where
/// `V(r) / r^n` is a polynomial in `t`.
pub fn fit_laurent(
    mut evaluate: impl FnMut(f64) -> Result<f64>,
    dimension: usize,
    terms: usize,
    window: &FitWindow,
) -> Result<LaurentFit> {
    if terms == 0 {
        return Err(KpvError::InvalidParameter("a fit needs at least one term".into()));
    }
    window.validate(terms)?;
    let radii = window.radii();
    let m = radii.len();
    let mut design = DMatrix::<f64>::zeros(m, terms);
    let mut rhs = DVector::<f64>::zeros(m);
    for (i, &r) in radii.iter().enumerate() {
        let t = window.r_min / r;
        let mut power = 1.0;
        for k in 0..terms {
            design[(i, k)] = power;
            power *= t;
        }
        rhs[i] = evaluate(r)? / r.powi(dimension as i32);
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= CONDITION_BOUND) {
        return Err(KpvError::IllConditioned {
            condition,
            bound: CONDITION_BOUND,
        });
    }
    let scaled = svd
        .solve(&rhs, 0.0)
        .map_err(|e| KpvError::InvalidWindow(e.to_string()))?;
    let residual = (&design * &scaled - &rhs).norm() / (m as f64).sqrt();
    let coefficients = (0..terms)
        .map(|k| scaled[k] * window.r_min.powi(k as i32))
        .collect();
    Ok(LaurentFit {
        dimension,
        coefficients,
        window: *window,
        residual_norm: residual,
        condition_estimate: condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_laurent_polynomial() {
        let v = |r: f64| Ok(3.0 * r * r * r - 2.0 * r * r + 0.5 * r + 7.0);
        let fit = fit_laurent(v, 3, 4, &FitWindow::geometric(10.0, 100.0, 32)).unwrap();
        let want = [3.0, -2.0, 0.5, 7.0];
        for (a, b) in fit.coefficients.iter().zip(want) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn negative_powers_are_allowed() {
        let v = |r: f64| Ok(std::f64::consts::PI / 2.0 * r * r + 2.0 * r - 1.0 / (3.0 * r));
        let fit = fit_laurent(v, 2, 4, &FitWindow::geometric(5.0, 100.0, 32)).unwrap();
        assert!((fit.leading() - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        assert!((fit.second() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_windows() {
        let v = |r: f64| Ok(r);
        assert!(fit_laurent(v, 1, 2, &FitWindow::geometric(1.0, 1.0, 8)).is_err());
        assert!(fit_laurent(v, 1, 4, &FitWindow::geometric(1.0, 10.0, 3)).is_err());
        assert!(matches!(
            fit_laurent(v, 1, 12, &FitWindow::geometric(1.0, 1.01, 32)),
            Err(KpvError::IllConditioned { .. })
        ));
    }
}
