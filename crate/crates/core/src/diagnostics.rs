//! Momentum spectra, the edge-reflection criterion, error norms against a
//! reference and reflection-onset detection.

use std::io::{self, Write};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::contour::ContourParams;
use crate::error::{Error, Result};
use crate::grid::State;
use crate::par::Exec;
use crate::propagation::Trajectory;

/// Default accuracy target.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Unitary Fourier coefficients in signed-k order, paired with `k`.
pub fn momentum_spectrum(state: &State) -> Vec<(f64, C64)> {
    let c = state.grid().forward(state.amplitudes());
    state.grid().k().iter().copied().zip(c).collect()
}

/// Box plane-wave amplitudes `b_m = ∫ψ e^{−ik_m x} dx / √L`, normalised so
/// that `Σ|b_m|² = ‖ψ‖²`.
pub fn box_amplitudes(state: &State) -> Vec<(f64, C64)> {
    let s = state.grid().dx().sqrt();
    momentum_spectrum(state).into_iter().map(|(k, c)| (k, c * s)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReflectionReport {
    pub epsilon: f64,
    pub theta: f64,
    pub absorber_length: f64,
    /// Positive wavenumbers, ascending.
    pub k: Vec<f64>,
    /// `|C(k)| e^{−k sinθ ℓ}` at each `k`.
    pub bound: Vec<f64>,
    pub max_bound: f64,
    /// Smallest and largest violating `k`, if any.
    pub violation: Option<(f64, f64)>,
    /// First time the edge amplitude exceeds the threshold, when measured.
    pub onset: Option<f64>,
    pub onset_threshold: Option<f64>,
}

impl ReflectionReport {
    /// The violating `k` form one interval that starts at the smallest
    /// positive `k`.
    pub fn violation_is_low_k_interval(&self) -> bool {
        let flags: Vec<bool> = self.bound.iter().map(|&b| b > self.epsilon).collect();
        match flags.iter().position(|&f| !f) {
            None => true,
            Some(first_ok) => first_ok > 0 && flags[first_ok..].iter().all(|&f| !f),
        }
    }

    pub fn with_onset(mut self, onset: f64, threshold: f64) -> Self {
        self.onset = Some(onset);
        self.onset_threshold = Some(threshold);
        self
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "# epsilon={:e} theta={} absorber_length={} max_bound={:e}",
            self.epsilon, self.theta, self.absorber_length, self.max_bound
        )?;
        if let (Some(t), Some(th)) = (self.onset, self.onset_threshold) {
            writeln!(w, "# onset={t} threshold={th:e}")?;
        }
        writeln!(w, "# k, bound")?;
        for (k, b) in self.k.iter().zip(&self.bound) {
            writeln!(w, "{k:.17e}, {b:.17e}")?;
        }
        Ok(())
    }
}

/// `|C(k)| e^{−k sinθ ℓ}` for the positive-k part of `spectrum`.
pub fn reflection_bound(spectrum: &[(f64, C64)], theta: f64, absorber_length: f64, epsilon: f64) -> ReflectionReport {
    let s = theta.sin();
    let mut pairs: Vec<(f64, f64)> = spectrum
        .iter()
        .filter(|(k, _)| *k > 0.0)
        .map(|&(k, c)| (k, c.norm() * (-k * s * absorber_length).exp()))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (k, bound): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let max_bound = bound.iter().copied().fold(0.0, f64::max);
    let bad: Vec<f64> = k.iter().zip(&bound).filter(|(_, &b)| b > epsilon).map(|(&k, _)| k).collect();
    let violation = match (bad.first(), bad.last()) {
        (Some(&lo), Some(&hi)) => Some((lo, hi)),
        _ => None,
    };
    ReflectionReport {
        epsilon,
        theta,
        absorber_length,
        k,
        bound,
        max_bound,
        violation,
        onset: None,
        onset_threshold: None,
    }
}

/// Criterion for a state on a scaled grid: box amplitudes of `state`, tail
/// length `L/2 − x_cap`.
pub fn reflection_report(state: &State, contour: &ContourParams, epsilon: f64) -> ReflectionReport {
    let ell = 0.5 * state.grid().length() - contour.x_cap;
    reflection_bound(&box_amplitudes(state), contour.theta, ell, epsilon)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    Max,
    /// `sqrt(Σ|Δψ|² Δx)` over the region.
    L2,
}

/// Error of `candidate` against `reference` over `|x| ≤ halfwidth`.
///
/// The coarser state's grid points inside the region are used; the finer
/// state is evaluated there by trigonometric interpolation (exactly its grid
/// values when both grids coincide).
pub fn state_error(candidate: &State, reference: &State, halfwidth: f64, norm: ErrorNorm) -> f64 {
    let (coarse, fine) = if candidate.grid().dx() >= reference.grid().dx() {
        (candidate, reference)
    } else {
        (reference, candidate)
    };
    let idx = coarse.grid().inner_indices(halfwidth);
    let a: Vec<C64> = idx.iter().map(|&j| coarse.amplitudes()[j]).collect();
    let b: Vec<C64> = if **coarse.grid() == **fine.grid() {
        idx.iter().map(|&j| fine.amplitudes()[j]).collect()
    } else {
        let pts: Vec<C64> = idx.iter().map(|&j| C64::new(coarse.grid().x()[j], 0.0)).collect();
        fine.grid().interpolate(fine.amplitudes(), &pts)
    };
    let diffs = a.iter().zip(&b).map(|(x, y)| (x - y).norm());
    match norm {
        ErrorNorm::Max => diffs.fold(0.0, f64::max),
        ErrorNorm::L2 => (diffs.map(|d| d * d).sum::<f64>() * coarse.grid().dx()).sqrt(),
    }
}

/// Max error over `|x| ≤ halfwidth` of a scaled-grid state `Ψ(F(x_j))`
/// against the reference continued to the same complex points `F(x_j)`.
pub fn state_error_on_contour(candidate: &State, reference: &State, contour: &ContourParams, halfwidth: f64) -> f64 {
    let idx = candidate.grid().inner_indices(halfwidth);
    let pts: Vec<C64> = idx.iter().map(|&j| contour.f(candidate.grid().x()[j])).collect();
    let r = reference.grid().interpolate(reference.amplitudes(), &pts);
    idx.iter()
        .zip(&r)
        .map(|(&j, r)| (candidate.amplitudes()[j] - r).norm())
        .fold(0.0, f64::max)
}

/// Per-snapshot error series `(t, error)`.
pub fn inner_region_error(
    candidate: &Trajectory,
    reference: &Trajectory,
    halfwidth: f64,
    norm: ErrorNorm,
    exec: Exec,
) -> Result<Vec<(f64, f64)>> {
    if candidate.len() != reference.len() {
        return Err(Error::TimeMismatch {
            candidate: candidate.last().map_or(f64::NAN, State::time),
            reference: reference.last().map_or(f64::NAN, State::time),
        });
    }
    for (c, r) in candidate.snapshots().iter().zip(reference.snapshots()) {
        if (c.time() - r.time()).abs() > 1e-9 {
            return Err(Error::TimeMismatch {
                candidate: c.time(),
                reference: r.time(),
            });
        }
    }
    let pairs: Vec<(&State, &State)> = candidate.snapshots().iter().zip(reference.snapshots()).collect();
    Ok(exec.map_slice(&pairs, |(c, r)| (c.time(), state_error(c, r, halfwidth, norm))))
}

/// `(t, max(|Ψ(−x_edge)|, |Ψ(+x_edge)|))` at the grid points nearest to the
/// two edges.
pub fn edge_amplitudes(trajectory: &Trajectory, x_edge: f64) -> Vec<(f64, f64)> {
    trajectory
        .snapshots()
        .iter()
        .map(|s| (s.time(), s.at(x_edge).norm().max(s.at(-x_edge).norm())))
        .collect()
}

/// First snapshot time at which the edge amplitude exceeds `threshold`;
/// `+∞` if it never does.
pub fn edge_onset(trajectory: &Trajectory, x_edge: f64, threshold: f64) -> f64 {
    edge_amplitudes(trajectory, x_edge)
        .into_iter()
        .find(|&(_, a)| a > threshold)
        .map_or(f64::INFINITY, |(t, _)| t)
}

/// Writes `# header` lines followed by comma-separated rows.
pub fn write_table<W: Write>(mut w: W, header: &[String], columns: &str, rows: &[Vec<f64>]) -> io::Result<()> {
    for h in header {
        for line in h.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    writeln!(w, "# {columns}")?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(w, "{}", cells.join(", "))?;
    }
    Ok(())
}

/// `t, error` report.
pub fn write_error_series<W: Write>(w: W, header: &[String], series: &[(f64, f64)]) -> io::Result<()> {
    let rows: Vec<Vec<f64>> = series.iter().map(|&(t, e)| vec![t, e]).collect();
    write_table(w, header, "t, error", &rows)
}

/// `t, x, Re ψ, Im ψ, |ψ|` rows for every snapshot.
pub fn write_snapshots<W: Write>(w: W, header: &[String], trajectory: &Trajectory) -> io::Result<()> {
    let mut rows = Vec::new();
    for s in trajectory.snapshots() {
        for (x, a) in s.grid().x().iter().zip(s.amplitudes()) {
            rows.push(vec![s.time(), *x, a.re, a.im, a.norm()]);
        }
    }
    write_table(w, header, "t, x, Re psi, Im psi, |psi|", &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::propagation::{initial_gaussian, GaussianPacket, Provenance};
    use std::f64::consts::PI;

    fn traj(states: Vec<State>) -> Trajectory {
        let mut t = Trajectory::new(Provenance::new("test"));
        for s in states {
            t.push(s).unwrap();
        }
        t
    }

    #[test]
    fn plane_wave_has_one_coefficient() {
        let g = Grid::new(64, 20.0).unwrap();
        let k0 = g.k()[40];
        let s = State::from_fn(g.clone(), 0.0, |x| C64::from_polar(1.0, k0 * x)).unwrap();
        let spec = momentum_spectrum(&s);
        let nonzero: Vec<_> = spec.iter().filter(|(_, c)| c.norm() > 1e-10).collect();
        assert_eq!(nonzero.len(), 1);
        assert!((nonzero[0].0 - k0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_spectrum_matches_analytic_transform() {
        let g = Grid::new(400, 200.0).unwrap();
        let s = initial_gaussian(&g, &GaussianPacket::new(0.1, 1.0, 0.0)).unwrap();
        let b = box_amplitudes(&s);
        let peak = b.iter().max_by(|x, y| x.1.norm().total_cmp(&y.1.norm())).unwrap();
        // nearest grid wavenumber to p0
        assert!((peak.0 - 1.0).abs() <= 0.5 * (g.k()[1] - g.k()[0]));
        // ∫ψ e^{-ikx}dx/√L = (2a/π)^{1/4} √(π/a) e^{-(k-p)²/4a} / √L
        let a: f64 = 0.1;
        for &(k, c) in &b {
            let exact = (2.0 * a / PI).powf(0.25) * (PI / a).sqrt() * (-(k - 1.0) * (k - 1.0) / (4.0 * a)).exp()
                / 200f64.sqrt();
            assert!((c.norm() - exact).abs() < 1e-6, "k = {k}");
        }
        let total: f64 = b.iter().map(|(_, c)| c.norm_sqr()).sum();
        assert!((total - s.norm().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn empty_spectrum_has_no_violation() {
        let spec = vec![(1.0, C64::new(0.0, 0.0)), (2.0, C64::new(0.0, 0.0))];
        let r = reflection_bound(&spec, 0.5, 10.0, 1e-6);
        assert!(r.violation.is_none());
        assert_eq!(r.max_bound, 0.0);
    }

    #[test]
    fn single_mode_bound() {
        let r = reflection_bound(&[(2.0, C64::new(1.0, 0.0))], 0.5, 10.0, 1e-6);
        let expect = (-2.0 * 0.5f64.sin() * 10.0).exp();
        assert!((r.max_bound - expect).abs() < 1e-18);
        assert!((r.max_bound - 6.8e-5).abs() < 1e-6);
        assert_eq!(r.violation, Some((2.0, 2.0)));
    }

    #[test]
    fn zero_angle_bound_is_the_spectrum() {
        let spec: Vec<(f64, C64)> = (1..5).map(|k| (k as f64, C64::new(0.1 * k as f64, 0.0))).collect();
        let r = reflection_bound(&spec, 0.0, 10.0, 1e-6);
        for (b, (_, c)) in r.bound.iter().zip(&spec) {
            assert_eq!(*b, c.norm());
        }
    }

    #[test]
    fn low_k_interval_detection() {
        let spec: Vec<(f64, C64)> = (1..20).map(|k| (0.1 * k as f64, C64::new(1.0, 0.0))).collect();
        let r = reflection_bound(&spec, 0.5, 10.0, 1e-3);
        assert!(r.violation.is_some());
        assert!(r.violation_is_low_k_interval());
        assert!((r.violation.unwrap().0 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let g = Grid::new(64, 20.0).unwrap();
        let s = initial_gaussian(&g, &GaussianPacket::new(0.5, 1.0, 0.0)).unwrap();
        let t = traj(vec![s.clone()]);
        let e = inner_region_error(&t, &t, 8.0, ErrorNorm::Max, Exec::Sequential).unwrap();
        assert_eq!(e, vec![(0.0, 0.0)]);
    }

    #[test]
    fn error_is_symmetric_across_grids() {
        let coarse = Grid::new(64, 20.0).unwrap();
        let fine = Grid::new(256, 40.0).unwrap();
        let p = GaussianPacket::new(0.5, 1.0, 0.0);
        let a = initial_gaussian(&coarse, &p).unwrap();
        let b = State::from_fn(fine, 0.0, |x| 1.01 * p_eval(&p, x)).unwrap();
        let e1 = state_error(&a, &b, 5.0, ErrorNorm::Max);
        let e2 = state_error(&b, &a, 5.0, ErrorNorm::Max);
        assert_eq!(e1, e2);
        assert!((e1 - 0.01 * (2.0 * 0.5 / PI).powf(0.25)).abs() < 1e-10);
        assert!(state_error(&a, &a, 5.0, ErrorNorm::L2) == 0.0);
    }

    fn p_eval(p: &GaussianPacket, x: f64) -> C64 {
        use crate::propagation::AnalyticInitial;
        p.eval(C64::new(x, 0.0))
    }

    #[test]
    fn time_mismatch_is_reported() {
        let g = Grid::new(8, 1.0).unwrap();
        let a = traj(vec![State::new(g.clone(), vec![C64::new(0.0, 0.0); 8], 1.0).unwrap()]);
        let b = traj(vec![State::new(g, vec![C64::new(0.0, 0.0); 8], 2.0).unwrap()]);
        assert!(matches!(
            inner_region_error(&a, &b, 1.0, ErrorNorm::Max, Exec::Sequential),
            Err(Error::TimeMismatch { .. })
        ));
    }

    #[test]
    fn onset_detection() {
        let g = Grid::new(8, 8.0).unwrap();
        let zero = traj(vec![State::new(g.clone(), vec![C64::new(0.0, 0.0); 8], 0.0).unwrap()]);
        assert_eq!(edge_onset(&zero, 4.0, 1e-6), f64::INFINITY);
        let mk = |t: f64, edge: f64| {
            let mut v = vec![C64::new(0.0, 0.0); 8];
            v[7] = C64::new(edge, 0.0);
            State::new(g.clone(), v, t).unwrap()
        };
        let t = traj(vec![mk(0.0, 1e-8), mk(1.0, 1e-5), mk(2.0, 1e-3)]);
        assert_eq!(edge_onset(&t, 4.0, 1e-6), 1.0);
        assert_eq!(edge_onset(&t, 4.0, 1e-4), 2.0);
        assert!(edge_onset(&t, 4.0, 1e-6) <= edge_onset(&t, 4.0, 1e-4));
    }

    #[test]
    fn table_format() {
        let mut buf = Vec::new();
        write_error_series(&mut buf, &["run a\nline b".to_string()], &[(1.0, 2.5e-7)]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# run a");
        assert_eq!(lines[1], "# line b");
        assert_eq!(lines[2], "# t, error");
        let vals: Vec<f64> = lines[3].split(',').map(|v| v.trim().parse().unwrap()).collect();
        assert_eq!(vals, vec![1.0, 2.5e-7]);
    }
}
