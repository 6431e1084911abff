//! Run configuration and the experiments behind the command-line front end:
//! single configured runs, reference comparisons, spectra and the presets
//! for the six figure analogues.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::boundary::DcFieldParams;
use crate::cap::MonomialCap;
use crate::contour::ContourParams;
use crate::diagnostics::{
    edge_amplitudes, edge_onset, inner_region_error, reflection_report, ErrorNorm, ReflectionReport,
};
use crate::error::{Error, Result};
use crate::grid::{Grid, State};
use crate::hamiltonian::{bound_like_eigenvalues, eigendecompose, HamiltonianBuilder, HamiltonianMatrix};
use crate::par::Exec;
use crate::potential::PotentialModel;
use crate::propagation::{
    converged_reference, initial_gaussian, propagate_eigen, propagate_matrix_step, transform_initial, GaussianPacket,
    MatrixStepOptions, Method, PropagatorSpec, Reference, ReferenceSpec, SplitOperator, TbcSettings, Trajectory,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 400, length: 200.0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TbcConfig {
    pub enabled: bool,
    /// Rows `j > j_c` (of `N`) are rewritten; defaults to `N − 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_c: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AidsConfig {
    pub dc: DcFieldParams,
    pub tbc: TbcConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    pub enabled: bool,
    #[serde(flatten)]
    pub spec: ReferenceSpec,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            enabled: true,
            spec: ReferenceSpec::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub region_halfwidth: f64,
    pub epsilon: f64,
    pub edge_x: f64,
    pub onset_threshold: f64,
    pub error_norm: ErrorNorm,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            region_halfwidth: 85.0,
            epsilon: 1e-6,
            edge_x: 100.0,
            onset_threshold: 1e-4,
            error_norm: ErrorNorm::Max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    pub snapshots: bool,
    pub reports: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "out".to_string(),
            snapshots: true,
            reports: true,
        }
    }
}

/// Everything a run needs. Defaults reproduce the figure 1 setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mass: f64,
    pub grid: GridConfig,
    pub contour: ContourParams,
    pub potential: PotentialModel,
    pub initial: GaussianPacket,
    pub propagator: PropagatorSpec,
    pub aids: AidsConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monomial_cap: Option<MonomialCap>,
    pub reference: ReferenceConfig,
    pub diagnostics: DiagnosticsConfig,
    pub outputs: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mass: 1.0,
            grid: GridConfig::default(),
            contour: ContourParams::default(),
            potential: PotentialModel::TestWellBarrier,
            initial: GaussianPacket::default(),
            propagator: PropagatorSpec::default(),
            aids: AidsConfig::default(),
            monomial_cap: None,
            reference: ReferenceConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            outputs: OutputConfig::default(),
        }
    }
}

fn config_error(reason: impl Into<String>) -> Error {
    Error::param("config", reason)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes to TOML")
    }

    /// Sets the value at a dotted key path, e.g. `contour.theta=0.3`. The
    /// value is read as a TOML value, falling back to a bare string.
    pub fn set(&mut self, path: &str, raw: &str) -> Result<()> {
        let mut doc = toml::Value::try_from(&*self).map_err(|e| config_error(e.to_string()))?;
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let keys: Vec<&str> = path.split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(config_error(format!("malformed key path `{path}`")));
        }
        let mut node = &mut doc;
        for key in &keys[..keys.len() - 1] {
            let table = node
                .as_table_mut()
                .ok_or_else(|| config_error(format!("`{path}`: `{key}` is not a table")))?;
            node = table
                .entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| config_error(format!("`{path}` does not name a table entry")))?;
        let last = keys[keys.len() - 1];
        // keep floats floats when the user writes `theta=1`
        let value = match (table.get(last), value) {
            (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
            (_, v) => v,
        };
        table.insert(last.to_string(), value);
        *self = doc.try_into().map_err(|e: toml::de::Error| config_error(format!("`{path}`: {e}")))?;
        Ok(())
    }

    /// Propagator spec with the aid toggles filled in.
    pub fn propagator_spec(&self) -> PropagatorSpec {
        let mut p = self.propagator.clone();
        p.dc_field = self.aids.dc.enabled;
        p.tbc = self.aids.tbc.enabled.then(|| self.aids.tbc.j_c.unwrap_or(self.grid.n.saturating_sub(1)));
        p
    }

    pub fn scaled(&self) -> bool {
        !self.contour.is_identity()
    }

    /// Cross-field validation; every failure names the offending key.
    pub fn validate(&self) -> Result<()> {
        Grid::new(self.grid.n, self.grid.length)?;
        let half = 0.5 * self.grid.length;
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::param("mass", format!("must be positive, got {}", self.mass)));
        }
        self.contour.validate(half)?;
        if self.scaled() {
            self.contour
                .validate_against_initial(crate::propagation::AnalyticInitial::family(&self.initial))?;
        }
        self.initial.validate()?;
        self.aids.dc.validate(if self.scaled() { self.contour.x_cap } else { 0.0 }, half)?;
        if let Some(m) = &self.monomial_cap {
            m.validate(half)?;
        }
        let spec = self.propagator_spec();
        spec.validate()?;
        if let Some(j_c) = spec.tbc {
            if j_c > self.grid.n {
                return Err(Error::param("aids.tbc.j_c", format!("must not exceed n = {}", self.grid.n)));
            }
        }
        if spec.method == Method::Split5 && (self.scaled() || self.monomial_cap.is_some()) {
            return Err(Error::param(
                "propagator.method",
                "split5 propagates Hermitian problems only; set contour.theta = 0 and remove monomial_cap",
            ));
        }
        let d = &self.diagnostics;
        if !(d.region_halfwidth > 0.0 && d.epsilon > 0.0 && d.onset_threshold > 0.0 && d.edge_x.is_finite()) {
            return Err(Error::param("diagnostics", "halfwidth, epsilon and threshold must be positive"));
        }
        if self.reference.enabled {
            if self.mass != 1.0 {
                return Err(Error::param("reference.enabled", "the reference propagator assumes mass = 1"));
            }
            let r = &self.reference.spec;
            if !(r.box_length >= self.grid.length && r.dt > 0.0 && r.n_start >= 4 && r.tolerance > 0.0) {
                return Err(Error::param(
                    "reference",
                    "box_length must cover the grid; dt, n_start and tolerance must be positive",
                ));
            }
        }
        Ok(())
    }

    pub fn hamiltonian(&self, grid: &Arc<Grid>) -> Result<HamiltonianMatrix> {
        let mut b = HamiltonianBuilder::new(grid, self.potential).mass(self.mass);
        if self.scaled() {
            b = b.contour(self.contour);
        }
        if self.aids.dc.enabled {
            b = b.dc_field(self.aids.dc);
        }
        if let Some(m) = self.monomial_cap {
            b = b.monomial_cap(m);
        }
        b.build()
    }

    pub fn initial_state(&self, grid: &Arc<Grid>) -> Result<State> {
        if self.scaled() {
            transform_initial(&self.initial, &self.contour, grid)
        } else {
            initial_gaussian(grid, &self.initial)
        }
    }
}

/// Results of one configured run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trajectory: Trajectory,
    pub meta: String,
    /// `(t, error)` against the converged reference, when enabled.
    pub reference_error: Option<Vec<(f64, f64)>>,
    pub reference_note: Option<String>,
    /// `(t, max edge amplitude)`.
    pub edge: Vec<(f64, f64)>,
    pub onset: f64,
    /// Criterion at the final snapshot (scaled runs only).
    pub reflection: Option<ReflectionReport>,
    pub spectrum: Option<Vec<C64>>,
}

/// Propagates the configured problem.
pub fn propagate(config: &RunConfig, exec: Exec) -> Result<(Trajectory, String, Option<Vec<C64>>)> {
    config.validate()?;
    let spec = config.propagator_spec();
    let grid = Grid::new(config.grid.n, config.grid.length)?;
    let psi0 = config.initial_state(&grid)?;
    let times = spec.snapshot_times();
    match spec.method {
        Method::Split5 => {
            let mut v = config.potential.sample(grid.x());
            if config.aids.dc.enabled {
                for (v, d) in v.iter_mut().zip(crate::boundary::dc_potential(&config.aids.dc, &grid)) {
                    *v += d;
                }
            }
            let meta = format!("potential={} mass={} dc={}", config.potential.name(), config.mass, config.aids.dc.enabled);
            let tr = SplitOperator::new(&grid, &v, config.mass, spec.dt)?.run(&psi0, &times)?;
            Ok((tr, meta, None))
        }
        Method::Eigen => {
            let h = config.hamiltonian(&grid)?;
            let d = eigendecompose(&h)?;
            let tr = propagate_eigen(&d, &psi0, &times, exec)?;
            Ok((tr, h.meta().describe(), Some(d.values().to_vec())))
        }
        Method::MatrixStep => {
            let h = config.hamiltonian(&grid)?;
            let opts = MatrixStepOptions {
                approximant: spec.approximant,
                tbc: spec.tbc.map(|j_c| TbcSettings {
                    j_c,
                    theta: if config.scaled() { config.contour.theta } else { 0.0 },
                }),
                ..MatrixStepOptions::default()
            };
            let tr = propagate_matrix_step(&h, &psi0, spec.dt, &times, opts)?;
            Ok((tr, h.meta().describe(), None))
        }
    }
}

/// Converged large-box reference for the configured packet at `times`.
pub fn reference(config: &RunConfig, times: &[f64], exec: Exec) -> Result<Reference> {
    converged_reference(&config.reference.spec, &config.potential, &config.initial, times, exec)
}

pub fn run(config: &RunConfig, exec: Exec) -> Result<RunOutput> {
    let (trajectory, meta, spectrum) = propagate(config, exec)?;
    let d = &config.diagnostics;
    let (reference_error, reference_note) = if config.reference.enabled {
        let r = reference(config, &trajectory.times(), exec)?;
        let err = inner_region_error(&trajectory, &r.trajectory, d.region_halfwidth, d.error_norm, exec)?;
        (Some(err), Some(r.trajectory.provenance().describe()))
    } else {
        (None, None)
    };
    let edge = edge_amplitudes(&trajectory, d.edge_x);
    let onset = edge_onset(&trajectory, d.edge_x, d.onset_threshold);
    let reflection = if config.scaled() {
        trajectory
            .last()
            .map(|s| reflection_report(s, &config.contour, d.epsilon).with_onset(onset, d.onset_threshold))
    } else {
        None
    };
    Ok(RunOutput {
        trajectory,
        meta,
        reference_error,
        reference_note,
        edge,
        onset,
        reflection,
        spectrum,
    })
}

/// Eigenvalues of the configured Hamiltonian and the bound-like subset.
pub fn spectrum(config: &RunConfig) -> Result<(Vec<C64>, Vec<C64>, String)> {
    config.validate()?;
    let grid = Grid::new(config.grid.n, config.grid.length)?;
    let h = config.hamiltonian(&grid)?;
    let d = eigendecompose(&h)?;
    let halfwidth = if config.scaled() {
        config.contour.inner_halfwidth()
    } else {
        config.diagnostics.region_halfwidth
    };
    let bound = bound_like_eigenvalues(&d, halfwidth);
    Ok((d.sorted_values(), bound, h.meta().describe()))
}

/// A plot-ready table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: String,
    pub rows: Vec<Vec<f64>>,
    pub notes: Vec<String>,
}

/// Inner-region error series of the configured run and of the unscaled
/// (Hermitian) eigen run against the same reference.
pub fn compare(config: &RunConfig, exec: Exec) -> Result<Table> {
    config.validate()?;
    let (tr, meta, _) = propagate(config, exec)?;
    let mut herm = config.clone();
    herm.contour.theta = 0.0;
    herm.monomial_cap = None;
    herm.aids = AidsConfig::default();
    herm.propagator.method = Method::Eigen;
    let (htr, _, _) = propagate(&herm, exec)?;
    let r = reference(config, &tr.times(), exec)?;
    let d = &config.diagnostics;
    let e = inner_region_error(&tr, &r.trajectory, d.region_halfwidth, d.error_norm, exec)?;
    let eh = inner_region_error(&htr, &r.trajectory, d.region_halfwidth, d.error_norm, exec)?;
    Ok(Table {
        name: "compare".to_string(),
        columns: "t, error, error_hermitian".to_string(),
        rows: e.iter().zip(&eh).map(|(a, b)| vec![a.0, a.1, b.1]).collect(),
        notes: vec![
            format!("candidate: {} ({meta})", tr.provenance().describe()),
            format!("hermitian: {}", htr.provenance().describe()),
            format!("reference: {}", r.trajectory.provenance().describe()),
        ],
    })
}

/// `base` with the caption settings of a figure: plain eigen propagation of
/// the packet with momentum `p0` to `t_final`, aids switched off.
fn preset(base: &RunConfig, p0: f64, t_final: f64) -> RunConfig {
    let mut c = base.clone();
    c.initial.p0 = p0;
    c.propagator.method = Method::Eigen;
    c.propagator.t_final = t_final;
    c.propagator.snapshot_stride = (t_final / c.propagator.dt).round() as usize;
    c.aids.dc.enabled = false;
    c.aids.tbc = TbcConfig::default();
    c.monomial_cap = None;
    c.reference.enabled = false;
    c
}

fn profile_columns(states: &[&State]) -> Vec<Vec<f64>> {
    let grid = states[0].grid();
    (0..grid.len())
        .map(|j| {
            let mut row = vec![grid.x()[j]];
            for s in states {
                let a = s.amplitudes()[j];
                row.extend([a.re, a.im, a.norm()]);
            }
            row
        })
        .collect()
}

fn sample_reference(r: &Reference, t: f64, grid: &Arc<Grid>) -> Result<State> {
    let pts: Vec<C64> = grid.x().iter().map(|&x| C64::new(x, 0.0)).collect();
    State::new(grid.clone(), r.sample(t, &pts)?, t)
}

fn curve_columns(labels: &[&str]) -> String {
    let mut s = "x".to_string();
    for l in labels {
        s += &format!(", Re {l}, Im {l}, |{l}|");
    }
    s
}

/// Data for the analogue of figure `n` (1–6). Grid, contour, packet width,
/// dc and reference settings come from `base`; momentum, final time and
/// which aids are on follow the figure captions.
pub fn figure(n: u32, base: &RunConfig, exec: Exec) -> Result<Table> {
    if !(1..=6).contains(&n) {
        return Err(Error::param("figure", format!("must be 1..=6, got {n}")));
    }
    let grid = Grid::new(base.grid.n, base.grid.length)?;
    let last = |c: &RunConfig| -> Result<(State, String)> {
        let (tr, _, _) = propagate(c, exec)?;
        let s = tr.last().cloned().ok_or_else(|| Error::param("propagator", "no snapshots"))?;
        Ok((s, tr.provenance().describe()))
    };
    let mut notes = Vec::new();
    let (columns, rows) = match n {
        1 | 6 => {
            let c = preset(base, 1.0, 60.0);
            let (nh, prov) = last(&c)?;
            notes.push(format!("NH-QM: {prov}"));
            let r = reference(&c, &[60.0], exec)?;
            notes.push(format!("exact: {}", r.trajectory.provenance().describe()));
            let exact = sample_reference(&r, 60.0, &grid)?;
            if n == 1 {
                (curve_columns(&["exact", "NH"]), profile_columns(&[&exact, &nh]))
            } else {
                let mut h = c.clone();
                h.contour.theta = 0.0;
                let (hq, prov) = last(&h)?;
                notes.push(format!("H-QM: {prov}"));
                (curve_columns(&["exact", "HQM", "NH"]), profile_columns(&[&exact, &hq, &nh]))
            }
        }
        2 => {
            let mut c = preset(base, 0.0, 250.0);
            c.propagator.snapshot_stride = 10;
            let (plain, _, _) = propagate(&c, exec)?;
            c.aids.dc.enabled = true;
            let (dc, _, _) = propagate(&c, exec)?;
            notes.push(format!("NH-QM/dc: x_dc={} strength={}", c.aids.dc.x_dc, c.aids.dc.strength));
            let a = edge_amplitudes(&plain, base.diagnostics.edge_x);
            let b = edge_amplitudes(&dc, base.diagnostics.edge_x);
            (
                "t, |NH(edge)|, |NH+dc(edge)|".to_string(),
                a.iter().zip(&b).map(|(a, b)| vec![a.0, a.1, b.1]).collect(),
            )
        }
        3 | 4 => {
            let mut c = preset(base, 0.0, 250.0);
            let (plain, _) = last(&c)?;
            c.aids.dc.enabled = true;
            let (dc, prov) = last(&c)?;
            notes.push(format!("NH-QM/dc: {prov}"));
            if n == 3 {
                (curve_columns(&["NH", "NH+dc"]), profile_columns(&[&plain, &dc]))
            } else {
                let r = reference(&c, &[250.0], exec)?;
                notes.push(format!("exact: {}", r.trajectory.provenance().describe()));
                let exact = sample_reference(&r, 250.0, &grid)?;
                (curve_columns(&["exact", "NH", "NH+dc"]), profile_columns(&[&exact, &plain, &dc]))
            }
        }
        _ => {
            let mut c = preset(base, 1.0, 60.0);
            c.contour.theta = 0.0;
            c.propagator.method = Method::MatrixStep;
            c.aids.tbc.enabled = true;
            let (tbc, prov) = last(&c)?;
            notes.push(format!("TBC: {prov}"));
            let r = reference(&c, &[60.0], exec)?;
            notes.push(format!("exact: {}", r.trajectory.provenance().describe()));
            let exact = sample_reference(&r, 60.0, &grid)?;
            (curve_columns(&["exact", "TBC"]), profile_columns(&[&exact, &tbc]))
        }
    };
    Ok(Table {
        name: format!("figure{n}"),
        columns,
        rows,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let c = RunConfig::default();
        let text = c.to_toml();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), c);
        let mut d = c.clone();
        d.monomial_cap = Some(MonomialCap {
            strength: 0.01,
            x0: 90.0,
            power: 2,
        });
        d.aids.tbc = TbcConfig {
            enabled: true,
            j_c: Some(395),
        };
        d.potential = PotentialModel::Harmonic { omega: 0.5 };
        assert_eq!(RunConfig::from_toml(&d.to_toml()).unwrap(), d);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let c = RunConfig::from_toml("[contour]\ntheta = 0.3\nlambda = 0.9\nx_cap = 90.0\n").unwrap();
        assert_eq!(c.contour.theta, 0.3);
        assert_eq!(c.grid, GridConfig::default());
        assert!(RunConfig::from_toml("[grid]\nn = 400\nlength = 200.0\nbogus = 1\n").is_err());
    }

    #[test]
    fn dotted_overrides() {
        let mut c = RunConfig::default();
        c.set("contour.theta", "0.25").unwrap();
        assert_eq!(c.contour.theta, 0.25);
        c.set("contour.x_cap", "80").unwrap();
        assert_eq!(c.contour.x_cap, 80.0);
        c.set("propagator.method", "split5").unwrap();
        assert_eq!(c.propagator.method, Method::Split5);
        c.set("potential.kind", "free").unwrap();
        assert_eq!(c.potential, PotentialModel::Free);
        c.set("aids.tbc.j_c", "390").unwrap();
        assert_eq!(c.aids.tbc.j_c, Some(390));
        assert!(c.set("grid.n", "\"many\"").is_err());
        assert!(c.set("nonsense.key", "1").is_err());
        assert!(c.set("contour..theta", "1").is_err());
    }

    #[test]
    fn validation_names_the_key() {
        let mut c = RunConfig::default();
        c.contour.theta = 1.6;
        let e = c.validate().unwrap_err();
        assert!(e.is_validation());
        assert!(e.to_string().contains("contour.theta"));

        let mut c = RunConfig::default();
        c.propagator.method = Method::Split5;
        assert!(c.validate().unwrap_err().to_string().contains("propagator.method"));

        let mut c = RunConfig::default();
        c.aids.tbc.enabled = true;
        assert!(c.validate().unwrap_err().to_string().contains("aids.tbc"));
        c.propagator.method = Method::MatrixStep;
        c.validate().unwrap();
        assert_eq!(c.propagator_spec().tbc, Some(399));
    }

    #[test]
    fn unscaled_run_equals_hermitian_run() {
        let mut c = RunConfig::default();
        c.grid = GridConfig { n: 128, length: 60.0 };
        c.contour = ContourParams::new(0.0, 0.9, 20.0);
        c.propagator.t_final = 2.0;
        c.reference.enabled = false;
        let (a, _, _) = propagate(&c, Exec::Sequential).unwrap();
        let mut h = c.clone();
        h.contour = ContourParams::identity();
        let (b, _, _) = propagate(&h, Exec::Sequential).unwrap();
        for (x, y) in a.snapshots().iter().zip(b.snapshots()) {
            assert_eq!(x.amplitudes(), y.amplitudes());
        }
    }
}
