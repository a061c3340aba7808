//! Scalar Dormand–Prince 5(4) integrator with its fourth-order continuous
//! extension for dense output.

use crate::error::{KpvError, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Local error targets: a step is accepted when
/// `|err| <= atol + rtol * max(|y_old|, |y_new|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step as a fraction of the interval length.
    pub max_step_fraction: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-14,
            max_step_fraction: 1.0 / 16.0,
        }
    }
}

/// Knots `(x, y, dy/dx)` of an integrated solution plus, for every step,
/// the coefficients of its interpolating polynomial.
#[derive(Debug, Clone, Default)]
pub struct DenseSolution {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub slopes: Vec<f64>,
    cont: Vec<[f64; 4]>,
}

impl DenseSolution {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let s = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        let s1 = 1.0 - s;
        let [c2, c3, c4, c5] = self.cont[i];
        self.ys[i] + s * (c2 + s1 * (c3 + s * (c4 + s1 * c5)))
    }

    pub fn last(&self) -> f64 {
        *self.ys.last().expect("dense solution has at least one knot")
    }
}

/// Integrates `y' = f(x, y)` from `x = 0` to `x_end` starting at `y0`.
///
/// `report` maps the integration variable to the physical radius used in
/// error messages.
pub fn integrate(
    f: impl Fn(f64, f64) -> f64,
    x_end: f64,
    y0: f64,
    control: &StepControl,
    report: impl Fn(f64) -> f64,
) -> Result<DenseSolution> {
    let mut sol = DenseSolution::default();
    let mut x = 0.0;
    let mut y = y0;
    let mut k1 = f(x, y);
    sol.xs.push(x);
    sol.ys.push(y);
    sol.slopes.push(k1);
    if x_end <= 0.0 {
        return Ok(sol);
    }
    let max_step = x_end * control.max_step_fraction;
    let mut h = max_step.min(x_end / 64.0);
    let min_step = 1e-13 * x_end;
    let mut rejects = 0usize;

    while x < x_end {
        let last = x + h >= x_end * (1.0 - 1e-14);
        if last {
            h = x_end - x;
        }
        let k2 = f(x + C2 * h, y + h * A21 * k1);
        let k3 = f(x + C3 * h, y + h * (A31 * k1 + A32 * k2));
        let k4 = f(x + C4 * h, y + h * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = f(x + C5 * h, y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
        let k6 = f(
            x + h,
            y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        );
        let y_new = y + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let x_new = if last { x_end } else { x + h };
        let k7 = f(x_new, y_new);
        let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let scale = control.atol + control.rtol * y.abs().max(y_new.abs());
        let ratio = (err / scale).abs();

        if !ratio.is_finite() || !y_new.is_finite() {
            return Err(KpvError::StepFailure { radius: report(x) });
        }
        if ratio <= 1.0 {
            let ydiff = y_new - y;
            let bspl = h * k1 - ydiff;
            sol.cont.push([
                ydiff,
                bspl,
                ydiff - h * k7 - bspl,
                h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
            ]);
            x = x_new;
            y = y_new;
            k1 = k7;
            sol.xs.push(x);
            sol.ys.push(y);
            sol.slopes.push(k1);
            rejects = 0;
            let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * grow).min(max_step);
        } else {
            rejects += 1;
            h *= (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
            if h < min_step || rejects > 200 {
                return Err(KpvError::StepFailure { radius: report(x) });
            }
        }
    }
    Ok(sol)
}
