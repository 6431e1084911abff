//! Aids against edge reflection of slow components: a static field near the
//! box edges, and outgoing-wave extrapolation of the edge rows of the
//! one-step evolution matrix.
//!
//! Both are mirrored onto the two edges of the symmetric box.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::contour::ContourParams;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Below this magnitude an edge sample counts as "no wave".
pub const EDGE_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DcFieldParams {
    pub x_dc: f64,
    pub strength: f64,
    pub enabled: bool,
}

impl Default for DcFieldParams {
    fn default() -> Self {
        DcFieldParams {
            x_dc: 95.0,
            strength: 2.0,
            enabled: false,
        }
    }
}

impl DcFieldParams {
    pub fn validate(&self, x_cap: f64, half_box: f64) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if !(self.x_dc.is_finite() && self.x_dc >= x_cap && self.x_dc < half_box) {
            return Err(Error::param(
                "dc.x_dc",
                format!("must lie in [x_cap, L/2) = [{x_cap}, {half_box}), got {}", self.x_dc),
            ));
        }
        if !self.strength.is_finite() {
            return Err(Error::param("dc.strength", "must be finite"));
        }
        Ok(())
    }

    fn active(&self) -> bool {
        self.enabled && self.strength != 0.0
    }
}

/// `−(ℰ/2)(|x| − x_dc)` for `|x| >= x_dc`, zero inside.
pub fn dc_potential(params: &DcFieldParams, grid: &Grid) -> Vec<f64> {
    grid.x()
        .iter()
        .map(|&x| {
            let d = x.abs() - params.x_dc;
            if params.active() && d >= 0.0 {
                -0.5 * params.strength * d
            } else {
                0.0
            }
        })
        .collect()
}

/// The field continued along the scaled path: `−(ℰ/2)(±F(x) − F(x_dc))`,
/// which is continuous at `x_dc` and reduces to [`dc_potential`] for θ = 0.
pub fn dc_potential_on_contour(params: &DcFieldParams, contour: &ContourParams, grid: &Grid) -> Vec<C64> {
    let f_dc = contour.f(params.x_dc);
    grid.x()
        .iter()
        .map(|&x| {
            if params.active() && x.abs() >= params.x_dc {
                -0.5 * params.strength * (contour.f(x.abs()) - f_dc)
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// Outcome of fitting a single outgoing wave to two edge samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeWave {
    /// Wavevector from the principal-branch logarithm of the sample ratio.
    pub k: C64,
    /// `Re k <= 0`: the tail does not look outgoing.
    pub incoming: bool,
}

impl EdgeWave {
    /// `k` with `Re k → |Re k|`.
    pub fn outgoing_k(&self) -> C64 {
        C64::new(self.k.re.abs(), self.k.im)
    }
}

/// Solves `exp(i e^{iθ} k Δr) = outer/inner` for `k`, where `Δr` is the
/// outward spacing between the two samples.
pub fn wavevector_from_ratio(outer: C64, inner: C64, theta: f64, spacing: f64) -> Option<EdgeWave> {
    if inner.norm() <= EDGE_FLOOR {
        return None;
    }
    let log = (outer / inner).ln();
    let k = log / (C64::i() * C64::from_polar(1.0, theta) * spacing);
    Some(EdgeWave { k, incoming: k.re <= 0.0 })
}

/// Right-edge wavevector from the two outermost-but-one samples
/// `ψ(x_{N−2}) / ψ(x_{N−3})`. `None` when there is no wave at the edge.
pub fn estimate_edge_wavevector(psi: &[C64], grid: &Grid, contour: &ContourParams) -> Option<EdgeWave> {
    let n = grid.len();
    wavevector_from_ratio(psi[n - 2], psi[n - 3], contour.theta, grid.dx())
}

/// Outward-ordered indices of the two edges: `[outermost, next, ...]`.
pub(crate) fn edge_orders(n: usize) -> [Vec<usize>; 2] {
    let right = (0..n / 2).map(|i| n - 1 - i).collect();
    let left = (0..n / 2).collect();
    [right, left]
}

/// Outgoing-wave ratio for one edge, with `modified` rows replaced.
///
/// The ratio is measured between the two innermost unmodified points. An
/// incoming-looking fit is flipped to its outgoing counterpart. `None` means
/// the edge rows stay untouched this step.
pub(crate) fn edge_ratio(psi: &[C64], order: &[usize], modified: usize, theta: f64, dx: f64) -> Option<C64> {
    let a = psi[order[modified]];
    let b = psi[order[modified + 1]];
    if b.norm() <= EDGE_FLOOR {
        return None;
    }
    if a.norm() == 0.0 {
        return Some(C64::new(0.0, 0.0));
    }
    let wave = wavevector_from_ratio(a, b, theta, dx)?;
    if wave.incoming {
        Some((C64::i() * C64::from_polar(1.0, theta) * wave.outgoing_k() * dx).exp())
    } else {
        Some(a / b)
    }
}

fn modified_rows(n: usize, j_c: usize) -> usize {
    n.saturating_sub(j_c).min(n / 2 - 2)
}

/// Replaces the edge rows of the evolution matrix so that the outermost
/// points extrapolate a single outgoing wave.
///
/// `j_c` counts rows in outward order as in the one-sided formulation: rows
/// `j > j_c` of `N` are rewritten, i.e. `N − j_c` rows at each edge. Row `j`
/// becomes row `j − 1` (already rewritten, if it was) times the measured
/// ratio, so the modified block extrapolates geometrically.
pub fn tbc_modify_rows(u: &Mat<C64>, psi: &[C64], j_c: usize, theta: f64, dx: f64) -> Mat<C64> {
    let n = u.nrows();
    let mut out = u.clone();
    let m = modified_rows(n, j_c);
    if m == 0 {
        return out;
    }
    for order in edge_orders(n) {
        let Some(ratio) = edge_ratio(psi, &order, m, theta, dx) else {
            continue;
        };
        for i in (0..m).rev() {
            let (dst, src) = (order[i], order[i + 1]);
            for col in 0..n {
                let v = out[(src, col)] * ratio;
                out[(dst, col)] = v;
            }
        }
    }
    out
}

/// Applies the row rewrite directly to `next = U·psi`, equivalent to
/// multiplying by [`tbc_modify_rows`] without touching the matrix.
pub(crate) fn tbc_apply(next: &mut [C64], psi: &[C64], j_c: usize, theta: f64, dx: f64) {
    let n = psi.len();
    let m = modified_rows(n, j_c);
    if m == 0 {
        return;
    }
    for order in edge_orders(n) {
        if let Some(ratio) = edge_ratio(psi, &order, m, theta, dx) {
            for i in (0..m).rev() {
                next[order[i]] = next[order[i + 1]] * ratio;
            }
        }
    }
}
