//! Reflection-free absorbing potential generated by smooth exterior scaling,
//! plus the monomial absorber used as a comparison baseline.
//!
//! Scaling `x → F(x)` turns the kinetic operator into
//! `−(ħ²/2M)·F'^{-1/2} ∂ F'^{-1} ∂ F'^{-1/2}`; its difference from the
//! unscaled `−(ħ²/2M)∂²` is the local form
//!
//! ```text
//! V₀ + V₁ ∂ + V₂ ∂²
//! V₀ = ħ²/(4M F'³)·[F''' − 5F''²/(2F')]
//! V₁ = ħ² F''/(M F'³)
//! V₂ = (ħ²/2M)·(1 − F'^{-2})
//! ```
//!
//! The coefficients vanish wherever `F' = 1`. Because `V₁ = dV₂/dx`, the
//! operator is symmetric under the bilinear (unconjugated) product.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::contour::ContourParams;
use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::potential::PotentialModel;

/// ħ in atomic units.
pub const HBAR: f64 = 1.0;

#[derive(Clone, Debug)]
pub struct CapOperator {
    pub v0: Vec<C64>,
    pub v1: Vec<C64>,
    pub v2: Vec<C64>,
    /// `dV₂/dx`, evaluated from the contour derivatives. Equal to `v1` for a
    /// consistent operator; matrix assembly uses the split `∂V₂∂ + (V₁ − V₂')∂`.
    pub v2_slope: Vec<C64>,
    pub delta_v: Vec<C64>,
    pub mass: f64,
    pub contour: ContourParams,
    grid: Arc<Grid>,
}

impl CapOperator {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn with_delta_v(mut self, delta_v: Vec<C64>) -> Result<Self> {
        if delta_v.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        self.delta_v = delta_v;
        Ok(self)
    }

    /// Largest coefficient magnitude over `|x| <= halfwidth`.
    pub fn max_inner_magnitude(&self, halfwidth: f64) -> f64 {
        self.grid
            .inner_indices(halfwidth)
            .into_iter()
            .map(|j| self.v0[j].norm().max(self.v1[j].norm()).max(self.v2[j].norm()))
            .fold(0.0, f64::max)
    }

    /// Test hook: flips the sign of `V₁`, breaking the `V₁ = dV₂/dx` identity.
    #[doc(hidden)]
    pub fn corrupt_v1_sign(&mut self) {
        self.v1.iter_mut().for_each(|v| *v = -*v);
    }
}

pub fn build_rf_cap(contour: &ContourParams, grid: &Arc<Grid>, mass: f64) -> Result<CapOperator> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::param("mass", format!("must be positive, got {mass}")));
    }
    contour.validate(0.5 * grid.length())?;
    let c = HBAR * HBAR / mass;
    let n = grid.len();
    let (mut v0, mut v1, mut v2, mut slope) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for &x in grid.x() {
        let p = contour.eval(x);
        let inv1 = 1.0 / p.d1;
        let inv3 = inv1 * inv1 * inv1;
        v0.push(0.25 * c * inv3 * (p.d3 - 2.5 * p.d2 * p.d2 * inv1));
        v1.push(c * p.d2 * inv3);
        v2.push(0.5 * c * (1.0 - inv1 * inv1));
        // d/dx ½(1 − F'^{-2}) = F''·F'^{-3}
        slope.push(c * inv3 * p.d2);
    }
    Ok(CapOperator {
        v0,
        v1,
        v2,
        v2_slope: slope,
        delta_v: vec![C64::new(0.0, 0.0); n],
        mass,
        contour: *contour,
        grid: grid.clone(),
    })
}

/// `V(F(x)) − V(x)` on the grid.
///
/// With `bound = Some(b)`, any point where `|ΔV| > b` is rejected; a
/// non-finite value is always rejected.
pub fn build_delta_v(
    potential: &PotentialModel,
    contour: &ContourParams,
    grid: &Grid,
    bound: Option<f64>,
) -> Result<Vec<C64>> {
    grid.x()
        .iter()
        .enumerate()
        .map(|(index, &x)| {
            let dv = potential.eval(contour.f(x)) - potential.real(x);
            if !dv.is_finite() {
                return Err(Error::NonFinite {
                    what: "potential correction",
                    index,
                    x,
                });
            }
            match bound {
                Some(b) if dv.norm() > b => Err(Error::Overflow {
                    what: "potential correction",
                    index,
                    x,
                    magnitude: dv.norm(),
                    bound: b,
                }),
                _ => Ok(dv),
            }
        })
        .collect()
}

/// `(V₀ + ΔV)ψ + V₁ψ' + V₂ψ''` with spectral derivatives.
pub fn apply_cap(cap: &CapOperator, state: &State) -> Result<Vec<C64>> {
    if **state.grid() != *cap.grid {
        return Err(Error::GridMismatch);
    }
    let psi = state.amplitudes();
    let d1 = cap.grid.derivative(psi, 1)?;
    let d2 = cap.grid.derivative(psi, 2)?;
    Ok((0..psi.len())
        .map(|j| (cap.v0[j] + cap.delta_v[j]) * psi[j] + cap.v1[j] * d1[j] + cap.v2[j] * d2[j])
        .collect())
}

/// Two-sided monomial absorber `−iλ(|x| − x₀)ⁿ` for `|x| >= x₀`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialCap {
    pub strength: f64,
    pub x0: f64,
    pub power: u32,
}

impl MonomialCap {
    pub fn validate(&self, half_box: f64) -> Result<()> {
        if !(1..=8).contains(&self.power) {
            return Err(Error::param("monomial_cap.power", format!("must be in 1..=8, got {}", self.power)));
        }
        if !(self.x0.is_finite() && self.x0 >= 0.0 && self.x0 < half_box) {
            return Err(Error::param("monomial_cap.x0", format!("must lie in [0, {half_box}), got {}", self.x0)));
        }
        if !(self.strength.is_finite() && self.strength >= 0.0) {
            return Err(Error::param("monomial_cap.strength", "must be non-negative"));
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> C64 {
        let d = x.abs() - self.x0;
        if d >= 0.0 {
            C64::new(0.0, -self.strength * d.powi(self.power as i32))
        } else {
            C64::new(0.0, 0.0)
        }
    }
}

pub fn build_monomial_cap(strength: f64, x0: f64, power: u32, grid: &Grid) -> Result<Vec<C64>> {
    let cap = MonomialCap { strength, x0, power };
    cap.validate(0.5 * grid.length())?;
    Ok(grid.x().iter().map(|&x| cap.eval(x)).collect())
}
