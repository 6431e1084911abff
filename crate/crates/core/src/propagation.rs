//! Time propagation: split-operator reference, eigen-expansion and short-step
//! evolution-matrix propagators, plus initial-state construction.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::boundary::tbc_apply;
use crate::contour::{ContourParams, InitialFamily};
use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::hamiltonian::{matvec, EigenDecomposition, HamiltonianMatrix, InnerProduct};
use crate::par::Exec;
use crate::potential::PotentialModel;

/// Tolerance on `|‖ψ‖ − 1|` for a freshly sampled initial state.
pub const INITIAL_NORM_TOL: f64 = 1e-6;
/// Largest accepted `max |Σ a_j φ_j − ψ₀|` of an eigen-expansion.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;
/// Largest accepted a-priori local error of a Taylor step.
pub const STEP_ERROR_TOL: f64 = 1e-9;
/// Norm growth that aborts a matrix-step run.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// A closed-form initial state that can be evaluated off the real axis.
pub trait AnalyticInitial {
    fn eval(&self, z: C64) -> C64;
    fn family(&self) -> InitialFamily;
}

/// `(2a/π)^{1/4} exp(−a(x−x0)² + i p0 (x−x0))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianPacket {
    pub a: f64,
    pub p0: f64,
    pub x0: f64,
}

impl Default for GaussianPacket {
    fn default() -> Self {
        GaussianPacket {
            a: 0.1,
            p0: 1.0,
            x0: 0.0,
        }
    }
}

impl GaussianPacket {
    pub fn new(a: f64, p0: f64, x0: f64) -> Self {
        GaussianPacket { a, p0, x0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::param("initial.a", format!("must be positive, got {}", self.a)));
        }
        if !(self.p0.is_finite() && self.x0.is_finite()) {
            return Err(Error::param("initial", "p0 and x0 must be finite"));
        }
        Ok(())
    }
}

impl AnalyticInitial for GaussianPacket {
    fn eval(&self, z: C64) -> C64 {
        let d = z - self.x0;
        let pref = (2.0 * self.a / std::f64::consts::PI).powf(0.25);
        pref * (-self.a * d * d + C64::i() * self.p0 * d).exp()
    }

    fn family(&self) -> InitialFamily {
        InitialFamily::Gaussian
    }
}

/// Samples the packet on the real grid and checks its norm.
pub fn initial_gaussian(grid: &Arc<Grid>, packet: &GaussianPacket) -> Result<State> {
    packet.validate()?;
    let state = State::from_fn(grid.clone(), 0.0, |x| packet.eval(C64::new(x, 0.0)))?;
    let norm = state.norm();
    if (norm - 1.0).abs() > INITIAL_NORM_TOL {
        return Err(Error::Normalization { norm });
    }
    Ok(state)
}

/// `ψ_j = ψ₀(F(x_j))`.
pub fn transform_initial<A: AnalyticInitial + ?Sized>(
    initial: &A,
    contour: &ContourParams,
    grid: &Arc<Grid>,
) -> Result<State> {
    contour.validate_against_initial(initial.family())?;
    State::from_fn(grid.clone(), 0.0, |x| initial.eval(contour.f(x)))
}

/// How a matrix-step propagator approximates `exp(−iH dt)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepApproximant {
    /// Truncated Taylor series of the given order.
    Taylor { order: u32 },
    /// Exponential through a full eigendecomposition.
    Exact,
}

impl Default for StepApproximant {
    fn default() -> Self {
        StepApproximant::Taylor { order: 12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Split5,
    Eigen,
    MatrixStep,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Split5 => "split5",
            Method::Eigen => "eigen",
            Method::MatrixStep => "matrix_step",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagatorSpec {
    pub method: Method,
    pub dt: f64,
    pub t_final: f64,
    /// Steps of `dt` between snapshots.
    pub snapshot_stride: usize,
    /// Set from the aids section of a run configuration.
    #[serde(skip)]
    pub dc_field: bool,
    /// Transparent-boundary row modification, `Some(j_c)` when on. Set from
    /// the aids section of a run configuration.
    #[serde(skip)]
    pub tbc: Option<usize>,
    #[serde(default)]
    pub approximant: StepApproximant,
}

impl Default for PropagatorSpec {
    fn default() -> Self {
        PropagatorSpec {
            method: Method::Eigen,
            dt: 0.01,
            t_final: 60.0,
            snapshot_stride: 100,
            dc_field: false,
            tbc: None,
            approximant: StepApproximant::default(),
        }
    }
}

impl PropagatorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("propagator.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= self.dt) {
            return Err(Error::param(
                "propagator.t_final",
                format!("must be at least dt = {}, got {}", self.dt, self.t_final),
            ));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::param("propagator.snapshot_stride", "must be at least 1"));
        }
        if self.tbc.is_some() && self.method != Method::MatrixStep {
            return Err(Error::param("aids.tbc", "transparent boundary rows need the matrix_step method"));
        }
        if let StepApproximant::Taylor { order } = self.approximant {
            if order == 0 {
                return Err(Error::param("propagator.approximant.order", "must be at least 1"));
            }
        }
        Ok(())
    }

    /// `0, s·dt, 2s·dt, ...` up to `t_final`, which is always included.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let steps = (self.t_final / self.dt).round() as usize;
        let mut times: Vec<f64> = (0..=steps)
            .step_by(self.snapshot_stride)
            .map(|i| i as f64 * self.dt)
            .collect();
        if !steps.is_multiple_of(self.snapshot_stride) {
            times.push(steps as f64 * self.dt);
        }
        times
    }
}

/// Where a trajectory came from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub method: String,
    pub dt: Option<f64>,
    pub details: Vec<String>,
}

impl Provenance {
    pub fn new(method: &str) -> Self {
        Provenance {
            method: method.to_string(),
            dt: None,
            details: Vec::new(),
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn note(mut self, detail: impl Into<String>) -> Self {
        self.details.push(detail.into());
        self
    }

    pub fn describe(&self) -> String {
        let mut s = format!("method={}", self.method);
        if let Some(dt) = self.dt {
            s += &format!(" dt={dt}");
        }
        for d in &self.details {
            s += "; ";
            s += d;
        }
        s
    }
}

/// Snapshots with strictly increasing times.
#[derive(Clone, Debug)]
pub struct Trajectory {
    snapshots: Vec<State>,
    provenance: Provenance,
}

impl Trajectory {
    pub fn new(provenance: Provenance) -> Self {
        Trajectory {
            snapshots: Vec::new(),
            provenance,
        }
    }

    pub fn push(&mut self, state: State) -> Result<()> {
        if let Some(last) = self.snapshots.last() {
            if state.time() <= last.time() {
                return Err(Error::param(
                    "trajectory",
                    format!("snapshot time {} does not follow {}", state.time(), last.time()),
                ));
            }
        }
        self.snapshots.push(state);
        Ok(())
    }

    pub fn snapshots(&self) -> &[State] {
        &self.snapshots
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(State::time).collect()
    }

    pub fn last(&self) -> Option<&State> {
        self.snapshots.last()
    }

    /// Snapshot whose time is within `1e-9` of `t`.
    pub fn at_time(&self, t: f64) -> Option<&State> {
        self.snapshots.iter().find(|s| (s.time() - t).abs() <= 1e-9)
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::param("times", "at least one snapshot time is required"));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::param("times", "snapshot times must be finite and non-negative"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("times", "snapshot times must be strictly increasing"));
    }
    Ok(())
}

/// Step counts for each time; every time must be a multiple of `dt`.
fn step_counts(times: &[f64], dt: f64) -> Result<Vec<usize>> {
    check_times(times)?;
    times
        .iter()
        .map(|&t| {
            let n = (t / dt).round();
            if (n * dt - t).abs() > 1e-9 * t.max(1.0) {
                Err(Error::param("times", format!("t = {t} is not a multiple of dt = {dt}")))
            } else {
                Ok(n as usize)
            }
        })
        .collect()
}

/// Fourth-order Suzuki fractal composition of Strang steps, error term
/// `O(dt⁵)` per step.
pub fn suzuki_weights() -> [f64; 5] {
    let p = 1.0 / (4.0 - 4f64.powf(1.0 / 3.0));
    [p, p, 1.0 - 4.0 * p, p, p]
}

/// Split-operator propagator for `−½∂²/M + V(x)` with real `V`.
#[derive(Clone, Debug)]
pub struct SplitOperator {
    grid: Arc<Grid>,
    dt: f64,
    // per distinct stage weight: (half potential phase, kinetic phase)
    stages: Vec<(Vec<C64>, Vec<C64>)>,
}

impl SplitOperator {
    pub fn new(grid: &Arc<Grid>, potential: &[f64], mass: f64, dt: f64) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::param("mass", format!("must be positive, got {mass}")));
        }
        let stages = suzuki_weights()
            .iter()
            .map(|&w| {
                let tau = w * dt;
                let half_v = potential.iter().map(|&v| C64::from_polar(1.0, -0.5 * tau * v)).collect();
                let kin = grid
                    .k()
                    .iter()
                    .map(|&k| C64::from_polar(1.0, -tau * k * k / (2.0 * mass)))
                    .collect();
                (half_v, kin)
            })
            .collect();
        Ok(SplitOperator {
            grid: grid.clone(),
            dt,
            stages,
        })
    }

    pub fn step(&self, psi: &mut Vec<C64>) {
        for (half_v, kin) in &self.stages {
            psi.iter_mut().zip(half_v).for_each(|(p, v)| *p *= v);
            let mut c = self.grid.forward(psi);
            c.iter_mut().zip(kin).for_each(|(c, k)| *c *= k);
            *psi = self.grid.inverse(&c);
            psi.iter_mut().zip(half_v).for_each(|(p, v)| *p *= v);
        }
    }

    pub fn run(&self, initial: &State, times: &[f64]) -> Result<Trajectory> {
        if **initial.grid() != *self.grid {
            return Err(Error::GridMismatch);
        }
        let counts = step_counts(times, self.dt)?;
        let w = suzuki_weights();
        let mut traj = Trajectory::new(
            Provenance::new("split5")
                .with_dt(self.dt)
                .note(format!("Suzuki composition of Strang steps, weights {w:?}")),
        );
        let mut psi = initial.amplitudes().to_vec();
        let mut done = 0;
        for (&t, &n) in times.iter().zip(&counts) {
            for _ in done..n {
                self.step(&mut psi);
            }
            done = n;
            traj.push(State::new(self.grid.clone(), psi.clone(), initial.time() + t)?)?;
        }
        Ok(traj)
    }
}

/// Reference split-operator propagation of `initial` under `potential`.
pub fn propagate_split5(
    initial: &State,
    potential: &PotentialModel,
    dt: f64,
    times: &[f64],
) -> Result<Trajectory> {
    let v = potential.sample(initial.grid().x());
    SplitOperator::new(initial.grid(), &v, 1.0, dt)?.run(initial, times)
}

/// `Ψ(t) = Σ_j a_j e^{−iE_j t} φ_j` with `a_j` projected in the
/// decomposition's own product.
pub fn propagate_eigen(
    decomp: &EigenDecomposition,
    initial: &State,
    times: &[f64],
    exec: Exec,
) -> Result<Trajectory> {
    if **initial.grid() != **decomp.grid() {
        return Err(Error::GridMismatch);
    }
    check_times(times)?;
    let psi = initial.amplitudes();
    let a = decomp.project(psi);
    let back = decomp.synthesize(&a);
    let recon = back.iter().zip(psi).map(|(b, p)| (b - p).norm()).fold(0.0, f64::max);
    if !(recon <= RECONSTRUCTION_TOL) {
        return Err(Error::PoorRepresentation(recon));
    }
    let product = match decomp.product() {
        InnerProduct::Conjugated => "conjugated",
        InnerProduct::Bilinear => "c-product",
    };
    let amps = exec.map_slice(times, |&t| decomp.evolve(&a, t));
    let mut traj = Trajectory::new(
        Provenance::new("eigen").note(format!("projection={product} reconstruction_error={recon:.3e}")),
    );
    for (t, amp) in times.iter().zip(amps) {
        traj.push(State::new(initial.grid().clone(), amp, initial.time() + t)?)?;
    }
    Ok(traj)
}

/// Transparent-boundary settings for a matrix-step run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TbcSettings {
    pub j_c: usize,
    /// Angle used to read the edge wavevector (0 for an unscaled grid).
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixStepOptions {
    pub approximant: StepApproximant,
    pub tbc: Option<TbcSettings>,
    /// Required a-priori step error; `None` skips the check.
    pub step_tolerance: Option<f64>,
}

impl Default for MatrixStepOptions {
    fn default() -> Self {
        MatrixStepOptions {
            approximant: StepApproximant::default(),
            tbc: None,
            step_tolerance: Some(STEP_ERROR_TOL),
        }
    }
}

/// Bound on `‖exp(−iHdt) − T_m(−iHdt)‖∞` for the order-`m` Taylor
/// polynomial: `(‖H‖dt)^{m+1}/(m+1)! · e^{‖H‖dt}`.
pub fn taylor_step_bound(h_norm: f64, dt: f64, order: u32) -> f64 {
    let z = h_norm * dt;
    let mut term = 1.0;
    for m in 1..=order + 1 {
        term *= z / m as f64;
    }
    term * z.exp()
}

/// Dense one-step evolution matrix `U ≈ exp(−iH dt)`.
pub fn evolution_matrix(h: &HamiltonianMatrix, dt: f64, approximant: StepApproximant) -> Result<Mat<C64>> {
    let n = h.dim();
    match approximant {
        StepApproximant::Taylor { order } => {
            // Horner: U = I + A(I + A/2(I + A/3(...)))
            let a = Mat::<C64>::from_fn(n, n, |i, j| -C64::i() * dt * h.matrix()[(i, j)]);
            let mut u = Mat::<C64>::identity(n, n);
            for m in (1..=order).rev() {
                let mut next = &a * &u;
                next *= faer::Scale(C64::new(1.0 / m as f64, 0.0));
                for i in 0..n {
                    next[(i, i)] += 1.0;
                }
                u = next;
            }
            Ok(u)
        }
        StepApproximant::Exact => {
            let d = crate::hamiltonian::eigendecompose(h)?;
            let v = d.vectors();
            let phased = Mat::<C64>::from_fn(n, n, |i, j| v[(i, j)] * (-C64::i() * d.values()[j] * dt).exp());
            Ok(match d.product() {
                InnerProduct::Conjugated => &phased * v.adjoint(),
                InnerProduct::Bilinear => &phased * v.transpose(),
            })
        }
    }
}

/// Iterates `ψ ← Uψ`, with the transparent-boundary rewrite after each step
/// when enabled.
pub fn propagate_matrix_step(
    h: &HamiltonianMatrix,
    initial: &State,
    dt: f64,
    times: &[f64],
    options: MatrixStepOptions,
) -> Result<Trajectory> {
    if **initial.grid() != **h.grid() {
        return Err(Error::GridMismatch);
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let counts = step_counts(times, dt)?;
    let mut prov = Provenance::new("matrix_step").with_dt(dt);
    match options.approximant {
        StepApproximant::Taylor { order } => {
            let bound = taylor_step_bound(h.inf_norm(), dt, order);
            if let Some(tol) = options.step_tolerance {
                if bound > tol {
                    return Err(Error::param(
                        "propagator.dt",
                        format!("Taylor order {order} step error bound {bound:.2e} exceeds {tol:.0e}; reduce dt or raise the order"),
                    ));
                }
            }
            prov = prov.note(format!("taylor order={order} step_error_bound={bound:.2e}"));
        }
        StepApproximant::Exact => prov = prov.note("exact exponential via eigendecomposition"),
    }
    if let Some(tbc) = options.tbc {
        prov = prov.note(format!("tbc j_c={} theta={}", tbc.j_c, tbc.theta));
    }
    let u = evolution_matrix(h, dt, options.approximant)?;
    let grid = initial.grid().clone();
    let dx = grid.dx();
    let norm0 = initial.norm();
    let mut psi = initial.amplitudes().to_vec();
    let mut traj = Trajectory::new(prov);
    let mut done = 0;
    for (&t, &n) in times.iter().zip(&counts) {
        for step in done..n {
            let mut next = matvec(&u, &psi);
            if let Some(tbc) = options.tbc {
                tbc_apply(&mut next, &psi, tbc.j_c, tbc.theta, dx);
            }
            psi = next;
            let norm = (psi.iter().map(|a| a.norm_sqr()).sum::<f64>() * dx).sqrt();
            if !(norm <= DIVERGENCE_FACTOR * norm0) {
                return Err(Error::Divergence {
                    time: initial.time() + (step + 1) as f64 * dt,
                    growth: norm / norm0,
                });
            }
        }
        done = n;
        traj.push(State::new(grid.clone(), psi.clone(), initial.time() + t)?)?;
    }
    Ok(traj)
}

/// Large-box split-operator reference with grid doubling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceSpec {
    pub box_length: f64,
    pub n_start: usize,
    pub dt: f64,
    /// Required change of the final inner-region state between doublings.
    pub tolerance: f64,
    /// Half-width of the region compared between doublings.
    pub region_halfwidth: f64,
    pub max_doublings: u32,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec {
            box_length: 2000.0,
            n_start: 8192,
            dt: 0.005,
            tolerance: 1e-9,
            region_halfwidth: 100.0,
            max_doublings: 3,
        }
    }
}

/// Converged reference trajectory and how converged it is.
#[derive(Clone, Debug)]
pub struct Reference {
    pub trajectory: Trajectory,
    pub n_points: usize,
    /// Max change of the final inner-region state over the last doubling.
    pub change: f64,
    pub converged: bool,
}

impl Reference {
    /// Reference amplitudes at `points` (trigonometric interpolation) for
    /// the snapshot at time `t`.
    pub fn sample(&self, t: f64, points: &[C64]) -> Result<Vec<C64>> {
        let s = self.trajectory.at_time(t).ok_or(Error::TimeMismatch {
            candidate: t,
            reference: f64::NAN,
        })?;
        Ok(s.grid().interpolate(s.amplitudes(), points))
    }
}

fn inner_change(a: &State, b: &State, halfwidth: f64) -> f64 {
    let pts: Vec<C64> = a
        .grid()
        .inner_indices(halfwidth)
        .into_iter()
        .map(|j| C64::new(a.grid().x()[j], 0.0))
        .collect();
    let va = a.grid().interpolate(a.amplitudes(), &pts);
    let vb = b.grid().interpolate(b.amplitudes(), &pts);
    va.iter().zip(&vb).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Runs the packet on the large box, doubling the grid until the final
/// snapshot over `|x| ≤ region_halfwidth` changes by less than the tolerance.
/// The finer of the last two runs is returned.
pub fn converged_reference<A: AnalyticInitial + Sync>(
    spec: &ReferenceSpec,
    potential: &PotentialModel,
    initial: &A,
    times: &[f64],
    exec: Exec,
) -> Result<Reference> {
    check_times(times)?;
    let run = |n: usize| -> Result<Trajectory> {
        let grid = Grid::new(n, spec.box_length)?;
        let psi0 = State::from_fn(grid.clone(), 0.0, |x| initial.eval(C64::new(x, 0.0)))?;
        let v = potential.sample(grid.x());
        let mut t = SplitOperator::new(&grid, &v, 1.0, spec.dt)?.run(&psi0, times)?;
        t.provenance = t.provenance.clone().note(format!("box={} n={n}", spec.box_length));
        Ok(t)
    };
    let t_last = *times.last().unwrap();
    let mut n = spec.n_start;
    let mut pair = exec.map_slice(&[n, 2 * n], |&m| run(m));
    let mut fine = pair.pop().unwrap()?;
    let mut coarse = pair.pop().unwrap()?;
    n *= 2;
    let mut doublings = 1;
    loop {
        let change = inner_change(
            coarse.at_time(t_last).unwrap(),
            fine.at_time(t_last).unwrap(),
            spec.region_halfwidth,
        );
        let converged = change < spec.tolerance;
        if converged || doublings >= spec.max_doublings {
            fine.provenance = fine
                .provenance
                .clone()
                .note(format!("doubling change={change:.2e} converged={converged}"));
            return Ok(Reference {
                trajectory: fine,
                n_points: n,
                change,
                converged,
            });
        }
        n *= 2;
        doublings += 1;
        coarse = fine;
        fine = run(n)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{assemble_hermitian, eigendecompose, HamiltonianBuilder};
    use std::f64::consts::PI;

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn default_packet_is_normalised() {
        let g = Grid::new(400, 200.0).unwrap();
        let s = initial_gaussian(&g, &GaussianPacket::new(0.1, 1.0, 0.0)).unwrap();
        assert!((s.norm() - 1.0).abs() < 1e-10);
        let pref = (1.0 / (5.0 * PI)).powf(0.25);
        assert!((s.at(0.0) - pref).norm() < 1e-15);
    }

    #[test]
    fn resting_packet_is_real_and_even() {
        let g = Grid::new(400, 200.0).unwrap();
        let s = initial_gaussian(&g, &GaussianPacket::new(0.1, 0.0, 0.0)).unwrap();
        let a = s.amplitudes();
        for j in 1..g.len() / 2 {
            assert_eq!(a[j].im, 0.0);
            assert!((a[j] - a[g.len() - j]).norm() < 1e-15);
        }
    }

    #[test]
    fn too_small_box_is_rejected() {
        let g = Grid::new(64, 8.0).unwrap();
        assert!(matches!(
            initial_gaussian(&g, &GaussianPacket::new(0.1, 0.0, 0.0)),
            Err(Error::Normalization { .. })
        ));
    }

    #[test]
    fn transformed_packet_inside_the_unscaled_region() {
        let g = Grid::new(400, 200.0).unwrap();
        let p = GaussianPacket::new(0.1, 1.0, 0.0);
        let plain = initial_gaussian(&g, &p).unwrap();
        let scaled = transform_initial(&p, &ContourParams::default(), &g).unwrap();
        assert!(max_diff(plain.amplitudes(), scaled.amplitudes()) < 1e-12);
        let same = transform_initial(&p, &ContourParams::new(0.0, 0.9, 90.0), &g).unwrap();
        assert_eq!(plain.amplitudes(), same.amplitudes());
    }

    #[test]
    fn transformed_packet_in_the_scaled_region() {
        let g = Grid::new(400, 200.0).unwrap();
        let p = GaussianPacket::new(0.1, 0.0, 95.0);
        let s = transform_initial(&p, &ContourParams::new(0.2, 0.9, 90.0), &g).unwrap();
        assert!(s.norm().is_finite());
        assert!(s.at(95.0).im.abs() > 1e-3);
        let steep = ContourParams::new(1.6, 0.9, 90.0);
        assert!(matches!(transform_initial(&p, &steep, &g), Err(Error::ThetaAboveCritical { .. })));
    }

    #[test]
    fn snapshot_schedule() {
        let spec = PropagatorSpec {
            dt: 0.5,
            t_final: 2.0,
            snapshot_stride: 3,
            ..PropagatorSpec::default()
        };
        assert_eq!(spec.snapshot_times(), vec![0.0, 1.5, 2.0]);
        let bad = PropagatorSpec {
            tbc: Some(399),
            ..PropagatorSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn trajectory_rejects_non_increasing_times() {
        let g = Grid::new(8, 1.0).unwrap();
        let mut t = Trajectory::new(Provenance::new("test"));
        t.push(State::new(g.clone(), vec![C64::new(0.0, 0.0); 8], 1.0).unwrap()).unwrap();
        assert!(t.push(State::new(g, vec![C64::new(0.0, 0.0); 8], 1.0).unwrap()).is_err());
    }

    // free spreading Gaussian, ψ(x,0) = (2a/π)^{1/4} exp(−a x² + i p x)
    fn free_gaussian(a: f64, p: f64, x: f64, t: f64) -> C64 {
        let s = C64::new(1.0, 2.0 * a * t);
        let pref = (2.0 * a / PI).powf(0.25) / s.sqrt();
        let arg = (-a * x * x + C64::i() * p * (x - 0.5 * p * t)) / s;
        pref * arg.exp()
    }

    #[test]
    fn split_operator_free_gaussian() {
        let g = Grid::new(1024, 200.0).unwrap();
        let p = GaussianPacket::new(0.1, 1.0, 0.0);
        let s = initial_gaussian(&g, &p).unwrap();
        let tr = propagate_split5(&s, &PotentialModel::Free, 0.05, &[10.0]).unwrap();
        let out = tr.last().unwrap();
        let exact: Vec<C64> = g.x().iter().map(|&x| free_gaussian(0.1, 1.0, x, 10.0)).collect();
        assert!(max_diff(out.amplitudes(), &exact) < 1e-8);
    }

    #[test]
    fn split_operator_coherent_state_period() {
        let g = Grid::new(256, 40.0).unwrap();
        // displaced ground state of ω = 1
        let p = GaussianPacket::new(0.5, 0.0, 3.0);
        let s = initial_gaussian(&g, &p).unwrap();
        let dt = 2.0 * PI / 2000.0;
        let tr = propagate_split5(&s, &PotentialModel::Harmonic { omega: 1.0 }, dt, &[2000.0 * dt]).unwrap();
        let out = tr.last().unwrap().amplitudes();
        // zero-point phase e^{-iωT/2} = −1 after one period
        let overlap: C64 = out.iter().zip(s.amplitudes()).map(|(a, b)| a * b.conj()).sum::<C64>() * g.dx();
        let phase = overlap / overlap.norm();
        let back: Vec<C64> = out.iter().map(|a| a / phase).collect();
        assert!(max_diff(&back, s.amplitudes()) < 1e-7);
        assert!((phase + 1.0).norm() < 1e-7);
    }

    #[test]
    fn split_operator_conserves_norm() {
        let g = Grid::new(400, 200.0).unwrap();
        let s = initial_gaussian(&g, &GaussianPacket::default()).unwrap();
        let tr = propagate_split5(&s, &PotentialModel::TestWellBarrier, 0.01, &[60.0]).unwrap();
        assert!((tr.last().unwrap().norm() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn eigen_propagation_reproduces_initial_state() {
        let g = Grid::new(128, 60.0).unwrap();
        let s = initial_gaussian(&g, &GaussianPacket::default()).unwrap();
        let h = assemble_hermitian(&g, PotentialModel::TestWellBarrier).unwrap();
        let d = eigendecompose(&h).unwrap();
        let tr = propagate_eigen(&d, &s, &[0.0, 1.0], Exec::Sequential).unwrap();
        assert!(max_diff(tr.snapshots()[0].amplitudes(), s.amplitudes()) < 1e-8);
        assert!((tr.snapshots()[1].norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn eigen_matches_split_operator_before_edge_effects() {
        let g = Grid::new(400, 200.0).unwrap();
        let s = initial_gaussian(&g, &GaussianPacket::default()).unwrap();
        let h = assemble_hermitian(&g, PotentialModel::TestWellBarrier).unwrap();
        let d = eigendecompose(&h).unwrap();
        let e = propagate_eigen(&d, &s, &[20.0], Exec::default()).unwrap();
        let r = propagate_split5(&s, &PotentialModel::TestWellBarrier, 0.01, &[20.0]).unwrap();
        assert!(max_diff(e.last().unwrap().amplitudes(), r.last().unwrap().amplitudes()) < 1e-6);
    }

    #[test]
    fn parallel_and_sequential_eigen_agree_bitwise() {
        let g = Grid::new(64, 40.0).unwrap();
        let s = initial_gaussian(&g, &GaussianPacket::default()).unwrap();
        let h = assemble_hermitian(&g, PotentialModel::TestWellBarrier).unwrap();
        let d = eigendecompose(&h).unwrap();
        let times = [0.5, 1.0, 1.5, 2.0];
        let a = propagate_eigen(&d, &s, &times, Exec::Parallel).unwrap();
        let b = propagate_eigen(&d, &s, &times, Exec::Sequential).unwrap();
        for (x, y) in a.snapshots().iter().zip(b.snapshots()) {
            assert_eq!(x.amplitudes(), y.amplitudes());
        }
    }

    #[test]
    fn matrix_step_agrees_with_eigen_on_scaled_problem() {
        let g = Grid::new(160, 80.0).unwrap();
        let c = ContourParams::new(0.5, 0.9, 30.0);
        let p = GaussianPacket::default();
        let s = transform_initial(&p, &c, &g).unwrap();
        let h = HamiltonianBuilder::new(&g, PotentialModel::TestWellBarrier).contour(c).build().unwrap();
        let d = eigendecompose(&h).unwrap();
        let e = propagate_eigen(&d, &s, &[10.0], Exec::default()).unwrap();
        let m = propagate_matrix_step(&h, &s, 0.01, &[10.0], MatrixStepOptions::default()).unwrap();
        assert!(max_diff(e.last().unwrap().amplitudes(), m.last().unwrap().amplitudes()) < 1e-6);
        let x = propagate_matrix_step(
            &h,
            &s,
            0.5,
            &[10.0],
            MatrixStepOptions {
                approximant: StepApproximant::Exact,
                ..MatrixStepOptions::default()
            },
        )
        .unwrap();
        assert!(max_diff(e.last().unwrap().amplitudes(), x.last().unwrap().amplitudes()) < 1e-8);
    }

    #[test]
    fn taylor_step_converges_at_its_order() {
        let g = Grid::new(64, 40.0).unwrap();
        let s = initial_gaussian(&g, &GaussianPacket::default()).unwrap();
        let h = assemble_hermitian(&g, PotentialModel::TestWellBarrier).unwrap();
        let d = eigendecompose(&h).unwrap();
        let exact = propagate_eigen(&d, &s, &[1.0], Exec::default()).unwrap();
        let err = |dt: f64| {
            let opts = MatrixStepOptions {
                approximant: StepApproximant::Taylor { order: 3 },
                step_tolerance: None,
                ..MatrixStepOptions::default()
            };
            let m = propagate_matrix_step(&h, &s, dt, &[1.0], opts).unwrap();
            max_diff(m.last().unwrap().amplitudes(), exact.last().unwrap().amplitudes())
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!((order - 3.0).abs() < 0.3, "observed order {order} ({e1:e} -> {e2:e})");
    }

    #[test]
    fn coarse_taylor_step_is_rejected() {
        let g = Grid::new(64, 40.0).unwrap();
        let s = initial_gaussian(&g, &GaussianPacket::default()).unwrap();
        let h = assemble_hermitian(&g, PotentialModel::TestWellBarrier).unwrap();
        assert!(propagate_matrix_step(&h, &s, 0.5, &[1.0], MatrixStepOptions::default()).is_err());
    }

    #[test]
    fn step_bound_formula() {
        // z = 0.1, order 1: z²/2 · e^z
        let b = taylor_step_bound(1.0, 0.1, 1);
        assert!((b - 0.005 * 0.1f64.exp()).abs() < 1e-15);
    }
}
