//! Uniform periodic collocation grid and Fourier bookkeeping.
//!
//! Coefficients are stored in signed wavenumber order, `k_m = 2πm/L` for
//! `m = -N/2 .. N/2-1`, and are phase-referenced to the physical coordinate:
//!
//! ```text
//! c_m = N^{-1/2} Σ_j ψ_j exp(-i k_m x_j),     ψ_j = N^{-1/2} Σ_m c_m exp(i k_m x_j)
//! ```
//!
//! The transform pair is unitary, so `Σ|ψ_j|² = Σ|c_m|²`. A plane wave
//! `exp(i k x)` with `k` on the grid maps to a single coefficient equal to `√N`.
//!
//! The Fourier basis makes the box periodic: whatever leaves through `x = L/2`
//! re-enters at `x = -L/2`. That wrap-around is part of the edge-reflection
//! behaviour studied with this crate, not a separate artefact.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const MIN_POINTS: usize = 4;

#[derive(Clone)]
pub struct Grid {
    n: usize,
    length: f64,
    dx: f64,
    x: Vec<f64>,
    k: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("length", &self.length)
            .field("dx", &self.dx)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

impl Grid {
    /// Builds the grid `x_j = -L/2 + jΔx` with `Δx = L/N`.
    ///
    /// `n_points` must be even. The smallest accepted size is four points;
    /// production runs use hundreds to thousands.
    pub fn new(n_points: usize, box_length: f64) -> Result<Arc<Self>> {
        if n_points < MIN_POINTS || !n_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_points must be even and at least {MIN_POINTS}, got {n_points}"
            )));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {box_length}"
            )));
        }
        let dx = box_length / n_points as f64;
        let x = (0..n_points)
            .map(|j| -0.5 * box_length + j as f64 * dx)
            .collect();
        let half = (n_points / 2) as isize;
        let k = (-half..half)
            .map(|m| 2.0 * PI * m as f64 / box_length)
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Grid {
            n: n_points,
            length: box_length,
            dx,
            x,
            k,
            fft: planner.plan_fft_forward(n_points),
            ifft: planner.plan_fft_inverse(n_points),
        }))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Wavenumbers in signed order, `k[0] = -π/Δx`.
    pub fn k(&self) -> &[f64] {
        &self.k
    }

    pub fn k_max(&self) -> f64 {
        self.k[self.n - 1]
    }

    /// Index of the Nyquist mode in signed order (always 0).
    pub fn nyquist_index(&self) -> usize {
        0
    }

    /// Index of the grid point closest to `x`, without periodic wrapping.
    pub fn nearest_index(&self, x: f64) -> usize {
        let j = ((x - self.x[0]) / self.dx).round();
        j.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Indices with `|x_j| <= halfwidth`.
    pub fn inner_indices(&self, halfwidth: f64) -> Vec<usize> {
        (0..self.n)
            .filter(|&j| self.x[j].abs() <= halfwidth + 1e-12)
            .collect()
    }

    fn fft_slot(&self, m_signed: usize) -> usize {
        (m_signed + self.n / 2) % self.n
    }

    /// Unitary forward transform into signed-k order.
    pub fn forward(&self, psi: &[C64]) -> Vec<C64> {
        assert_eq!(psi.len(), self.n, "amplitude array length");
        let mut buf = psi.to_vec();
        self.fft.process(&mut buf);
        let scale = 1.0 / (self.n as f64).sqrt();
        let half = self.n / 2;
        (0..self.n)
            .map(|s| {
                // exp(-i k_m x_0) = (-1)^m with m = s - N/2
                let sign = if (s + half).is_multiple_of(2) { 1.0 } else { -1.0 };
                buf[self.fft_slot(s)] * (sign * scale)
            })
            .collect()
    }

    /// Inverse of [`Grid::forward`].
    pub fn inverse(&self, coeffs: &[C64]) -> Vec<C64> {
        assert_eq!(coeffs.len(), self.n, "coefficient array length");
        let half = self.n / 2;
        let mut buf = vec![C64::new(0.0, 0.0); self.n];
        for (s, c) in coeffs.iter().enumerate() {
            let sign = if (s + half).is_multiple_of(2) { 1.0 } else { -1.0 };
            buf[self.fft_slot(s)] = c * sign;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / (self.n as f64).sqrt();
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }

    /// Spectral symbol of `(d/dx)^order` in signed-k order.
    ///
    /// Odd orders drop the unpaired Nyquist mode so the resulting grid
    /// operator is real; even orders keep it.
    pub fn derivative_symbol(&self, order: u32) -> Result<Vec<C64>> {
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        Ok(self
            .k
            .iter()
            .enumerate()
            .map(|(s, &k)| {
                if order % 2 == 1 && s == self.nyquist_index() {
                    C64::new(0.0, 0.0)
                } else {
                    C64::new(0.0, k).powu(order)
                }
            })
            .collect())
    }

    /// `(d/dx)^order ψ` by multiplication in Fourier space.
    pub fn derivative(&self, psi: &[C64], order: u32) -> Result<Vec<C64>> {
        let symbol = self.derivative_symbol(order)?;
        let mut c = self.forward(psi);
        c.iter_mut().zip(&symbol).for_each(|(c, s)| *c *= s);
        Ok(self.inverse(&c))
    }

    /// Dense real differentiation matrix in the collocation basis, row-major.
    ///
    /// The operator is circulant, so only its first column is transformed.
    pub fn derivative_matrix(&self, order: u32) -> Result<Vec<f64>> {
        let n = self.n;
        let mut e0 = vec![C64::new(0.0, 0.0); n];
        e0[0] = C64::new(1.0, 0.0);
        let col = self.derivative(&e0, order)?;
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                m[i * n + j] = col[(i + n - j) % n].re;
            }
        }
        Ok(m)
    }

    /// Band-limited (trigonometric) interpolation of grid samples at arbitrary,
    /// possibly complex, coordinates. The Nyquist mode is split symmetrically.
    pub fn interpolate(&self, psi: &[C64], points: &[C64]) -> Vec<C64> {
        let c = self.forward(psi);
        self.interpolate_coeffs(&c, points)
    }

    pub fn interpolate_coeffs(&self, c: &[C64], points: &[C64]) -> Vec<C64> {
        let n = self.n;
        let scale = 1.0 / (n as f64).sqrt();
        let dk = 2.0 * PI / self.length;
        let k_nyq = self.k[0];
        points
            .iter()
            .map(|&z| {
                // exp(i k_m z) by recurrence from m = -N/2 + 1
                let step = (C64::i() * dk * z).exp();
                let mut phase = (C64::i() * (k_nyq + dk) * z).exp();
                let mut acc = C64::new(0.0, 0.0);
                for cm in &c[1..] {
                    acc += cm * phase;
                    phase *= step;
                }
                acc += c[0] * (k_nyq * z).cos();
                acc * scale
            })
            .collect()
    }
}

/// Complex amplitudes on a grid, stamped with a time.
#[derive(Clone, Debug)]
pub struct State {
    amplitudes: Vec<C64>,
    time: f64,
    grid: Arc<Grid>,
}

impl State {
    pub fn new(grid: Arc<Grid>, amplitudes: Vec<C64>, time: f64) -> Result<Self> {
        if amplitudes.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(index) = amplitudes.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFinite {
                what: "wavefunction amplitude",
                index,
                x: grid.x()[index],
            });
        }
        Ok(State {
            amplitudes,
            time,
            grid,
        })
    }

    pub fn from_fn(grid: Arc<Grid>, time: f64, f: impl Fn(f64) -> C64) -> Result<Self> {
        let amps = grid.x().iter().map(|&x| f(x)).collect();
        State::new(grid, amps, time)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// `sqrt(Σ|ψ_j|² Δx)`.
    pub fn norm(&self) -> f64 {
        (self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.grid.dx()).sqrt()
    }

    pub fn at(&self, x: f64) -> C64 {
        self.amplitudes[self.grid.nearest_index(x)]
    }
}

/// `(d/dx)^order` of a state, order 1 or 2.
pub fn spectral_derivative(state: &State, order: u32) -> Result<Vec<C64>> {
    state.grid.derivative(&state.amplitudes, order)
}
