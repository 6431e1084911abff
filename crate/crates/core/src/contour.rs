//! Smooth exterior scaling path `F(x)`.
//!
//! The switch is a pair of tanh steps at `±x_cap`:
//!
//! ```text
//! g(x)  = 1 + ½[tanh(λ(x − x_cap)) − tanh(λ(x + x_cap))]
//! F'(x) = 1 + (e^{iθ} − 1) g(x)
//! F(x)  = x + (e^{iθ} − 1) { x + (1/2λ) ln[cosh(λ(x − x_cap)) / cosh(λ(x + x_cap))] }
//! ```
//!
//! `F` is odd, equals `x` to exponential accuracy for `|x| < x_cap`, and
//! approaches the exterior-scaling ray `±x_cap + (x ∓ x_cap)e^{iθ}` outside.
//! Every tail quantity is written in terms of `exp(-2|·|)` so that the inner
//! region stays accurate far below machine epsilon relative to 1.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContourParams {
    /// Rotation angle in radians.
    pub theta: f64,
    /// Sharpness of the switch (inverse length).
    pub lambda: f64,
    /// Onset of scaling.
    pub x_cap: f64,
}

impl Default for ContourParams {
    fn default() -> Self {
        ContourParams {
            theta: 0.5,
            lambda: 0.9,
            x_cap: 90.0,
        }
    }
}

/// `F` and its first three derivatives at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourPoint {
    pub f: C64,
    pub d1: C64,
    pub d2: C64,
    pub d3: C64,
}

/// Shape of an analytic initial state `exp(-a x^N)`, which fixes the largest
/// admissible scaling angle `π/N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialFamily {
    Gaussian,
    SuperGaussian { exponent: u32 },
}

impl InitialFamily {
    pub fn exponent(self) -> u32 {
        match self {
            InitialFamily::Gaussian => 2,
            InitialFamily::SuperGaussian { exponent } => exponent,
        }
    }

    pub fn critical_angle(self) -> f64 {
        PI / self.exponent() as f64
    }
}

// 1/(1+e^{-z}) without overflow
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

// sech²(y) = 4e^{-2|y|}/(1+e^{-2|y|})²
fn sech2(y: f64) -> f64 {
    let e = (-2.0 * y.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

impl ContourParams {
    pub fn new(theta: f64, lambda: f64, x_cap: f64) -> Self {
        ContourParams {
            theta,
            lambda,
            x_cap,
        }
    }

    /// The unscaled path `F(x) = x`.
    pub fn identity() -> Self {
        ContourParams::new(0.0, 1.0, 1.0)
    }

    pub fn is_identity(&self) -> bool {
        self.theta == 0.0
    }

    /// Checks the parameter ranges against a box of half-width `half_box`.
    pub fn validate(&self, half_box: f64) -> Result<()> {
        if !(self.theta.is_finite() && (0.0..PI / 2.0).contains(&self.theta)) {
            return Err(Error::param("contour.theta", format!("must lie in [0, π/2), got {}", self.theta)));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::param("contour.lambda", format!("must be positive, got {}", self.lambda)));
        }
        if !(self.x_cap.is_finite() && self.x_cap >= 0.0 && self.x_cap < half_box) {
            return Err(Error::param(
                "contour.x_cap",
                format!("must lie in [0, {half_box}), got {}", self.x_cap),
            ));
        }
        Ok(())
    }

    /// `e^{iθ} − 1`
    pub fn rotation_minus_one(&self) -> C64 {
        C64::from_polar(1.0, self.theta) - 1.0
    }

    /// Half-width of the region where the path is real to better than ~1e-8:
    /// `x_cap − 10/λ`.
    pub fn inner_halfwidth(&self) -> f64 {
        self.x_cap - 10.0 / self.lambda
    }

    /// The switch `g(x)` and its first two derivatives.
    pub fn switch(&self, x: f64) -> (f64, f64, f64) {
        let lam = self.lambda;
        let a = lam * (x - self.x_cap);
        let b = lam * (x + self.x_cap);
        // 1 + tanh(a) = 2σ(2a), 1 − tanh(b) = 2σ(−2b)
        let g = logistic(2.0 * a) + logistic(-2.0 * b);
        let (sa, sb) = (sech2(a), sech2(b));
        let g1 = 0.5 * lam * (sa - sb);
        let g2 = lam * lam * (-sa * a.tanh() + sb * b.tanh());
        (g, g1, g2)
    }

    /// `x + (1/2λ) ln[cosh(λ(x−x_cap))/cosh(λ(x+x_cap))]`, the real
    /// displacement multiplied by `e^{iθ} − 1` in `F`.
    pub fn ramp(&self, x: f64) -> f64 {
        let lam = self.lambda;
        let a = (lam * (x - self.x_cap)).abs();
        let b = (lam * (x + self.x_cap)).abs();
        // ln cosh(y) = |y| + ln(1 + e^{-2|y|}) − ln 2; the |y| terms combine
        // into the piecewise-linear exterior-scaling ramp.
        let linear = if x > self.x_cap {
            x - self.x_cap
        } else if x < -self.x_cap {
            x + self.x_cap
        } else {
            0.0
        };
        linear + ((-2.0 * a).exp().ln_1p() - (-2.0 * b).exp().ln_1p()) / (2.0 * lam)
    }

    pub fn eval(&self, x: f64) -> ContourPoint {
        let e = self.rotation_minus_one();
        let (g, g1, g2) = self.switch(x);
        ContourPoint {
            f: x + e * self.ramp(x),
            d1: 1.0 + e * g,
            d2: e * g1,
            d3: e * g2,
        }
    }

    pub fn f(&self, x: f64) -> C64 {
        x + self.rotation_minus_one() * self.ramp(x)
    }

    /// Rejects angles at or beyond the square-integrability limit `π/N` of a
    /// scaled `exp(-a x^N)` state.
    pub fn validate_against_initial(&self, family: InitialFamily) -> Result<()> {
        let critical = family.critical_angle();
        if self.theta < critical {
            Ok(())
        } else {
            Err(Error::ThetaAboveCritical {
                theta: self.theta,
                critical,
                exponent: family.exponent(),
            })
        }
    }
}
