//! Desk-scale self-checks: structural invariants of the scaled Hamiltonian
//! and its propagators on a small box, quick enough to run on every build.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::cap::build_rf_cap;
use crate::contour::{ContourParams, InitialFamily};
use crate::diagnostics::{reflection_report, state_error, ErrorNorm};
use crate::error::Result;
use crate::grid::Grid;
use crate::hamiltonian::{assemble_hermitian, eigendecompose, HamiltonianBuilder, HamiltonianMatrix};
use crate::par::Exec;
use crate::potential::PotentialModel;
use crate::propagation::{
    initial_gaussian, propagate_eigen, propagate_matrix_step, propagate_split5, transform_initial, GaussianPacket,
    MatrixStepOptions, StepApproximant,
};

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const RESIDUAL_TOL: f64 = 1e-8;
pub const AGREEMENT_TOL: f64 = 1e-7;
pub const INNER_CAP_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

impl CheckResult {
    fn measured(name: &'static str, value: f64, tol: f64) -> Self {
        CheckResult {
            name,
            status: if value <= tol { Status::Pass } else { Status::Fail },
            detail: format!("{value:.3e} (tolerance {tol:.0e})"),
        }
    }

    fn failed(name: &'static str, detail: impl Into<String>) -> Self {
        CheckResult {
            name,
            status: Status::Fail,
            detail: detail.into(),
        }
    }

    fn skipped(name: &'static str, detail: &str) -> Self {
        CheckResult {
            name,
            status: Status::Skipped,
            detail: detail.to_string(),
        }
    }
}

/// Fault injection for exercising the suite itself.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CheckOptions {
    /// Replace the scaling angle.
    pub theta: Option<f64>,
    /// Flip the sign of `V₁` before assembly.
    pub flip_v1: bool,
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.status != Status::Fail)
}

struct Setup {
    grid: Arc<Grid>,
    contour: ContourParams,
    packet: GaussianPacket,
    potential: PotentialModel,
}

fn scaled_hamiltonian(s: &Setup, opts: &CheckOptions) -> Result<HamiltonianMatrix> {
    let mut cap = build_rf_cap(&s.contour, &s.grid, 1.0)?;
    if opts.flip_v1 {
        cap.corrupt_v1_sign();
    }
    HamiltonianBuilder::new(&s.grid, s.potential).cap(cap).build()
}

pub fn run_checks(opts: CheckOptions, exec: Exec) -> Vec<CheckResult> {
    let mut contour = ContourParams::new(0.4, 0.9, 20.0);
    if let Some(theta) = opts.theta {
        contour.theta = theta;
    }
    let grid = Grid::new(128, 60.0).expect("desk grid");
    let s = Setup {
        grid,
        contour,
        packet: GaussianPacket::new(0.1, 1.0, 0.0),
        potential: PotentialModel::TestWellBarrier,
    };
    let mut out = Vec::new();

    let valid = contour
        .validate(0.5 * s.grid.length())
        .and_then(|_| contour.validate_against_initial(InitialFamily::Gaussian));
    out.push(match &valid {
        Ok(()) => CheckResult {
            name: "validate_theta",
            status: Status::Pass,
            detail: format!("theta = {}", contour.theta),
        },
        Err(e) => CheckResult::failed("validate_theta", e.to_string()),
    });

    let herm = assemble_hermitian(&s.grid, s.potential);
    out.push(match &herm {
        Ok(h) => CheckResult::measured("hermitian_assembly", h.hermitian_defect(), SYMMETRY_TOL),
        Err(e) => CheckResult::failed("hermitian_assembly", e.to_string()),
    });

    let unscaled = HamiltonianBuilder::new(&s.grid, s.potential)
        .contour(ContourParams::new(0.0, contour.lambda, contour.x_cap))
        .build();
    out.push(match (&herm, &unscaled) {
        (Ok(h), Ok(u)) => CheckResult::measured("theta_zero_is_hermitian", h.max_abs_diff(u), 0.0),
        (Err(e), _) | (_, Err(e)) => CheckResult::failed("theta_zero_is_hermitian", e.to_string()),
    });

    if let Ok(h) = &herm {
        out.push(split_vs_eigen(&s, h, exec));
    }

    const NH: [&str; 6] = [
        "complex_symmetry",
        "inner_cap_vanishes",
        "eigen_residual",
        "c_orthonormality",
        "eigen_vs_taylor",
        "reflection_bound",
    ];
    if valid.is_err() {
        out.extend(NH.iter().map(|n| CheckResult::skipped(n, "needs a valid scaling angle")));
        return out;
    }

    let h = match scaled_hamiltonian(&s, &opts) {
        Ok(h) => h,
        Err(e) => {
            out.push(CheckResult::failed(NH[0], e.to_string()));
            return out;
        }
    };
    out.push(CheckResult::measured(NH[0], h.transpose_asymmetry(), SYMMETRY_TOL));

    let inner = build_rf_cap(&s.contour, &s.grid, 1.0)
        .map(|c| c.max_inner_magnitude(s.contour.inner_halfwidth()));
    out.push(match inner {
        Ok(v) => CheckResult::measured(NH[1], v, INNER_CAP_TOL),
        Err(e) => CheckResult::failed(NH[1], e.to_string()),
    });

    let d = match eigendecompose(&h) {
        Ok(d) => d,
        Err(e) => {
            out.push(CheckResult::failed(NH[2], e.to_string()));
            return out;
        }
    };
    out.push(CheckResult::measured(NH[2], d.max_residual(&h), RESIDUAL_TOL));
    out.push(CheckResult::measured(NH[3], d.orthonormality_defect(), RESIDUAL_TOL));

    let agreement = (|| -> Result<f64> {
        let psi0 = transform_initial(&s.packet, &s.contour, &s.grid)?;
        let times = [0.0, 1.0, 2.0];
        let a = propagate_eigen(&d, &psi0, &times, exec)?;
        let opts = MatrixStepOptions {
            approximant: StepApproximant::Taylor { order: 12 },
            ..MatrixStepOptions::default()
        };
        let b = propagate_matrix_step(&h, &psi0, 0.01, &times, opts)?;
        let last = |t: &crate::propagation::Trajectory| t.last().cloned().expect("snapshots");
        Ok(state_error(&last(&a), &last(&b), s.contour.inner_halfwidth(), ErrorNorm::Max))
    })();
    out.push(match agreement {
        Ok(v) => CheckResult::measured(NH[4], v, AGREEMENT_TOL),
        Err(e) => CheckResult::failed(NH[4], e.to_string()),
    });

    let report = transform_initial(&s.packet, &s.contour, &s.grid).map(|psi| reflection_report(&psi, &s.contour, 1e-6));
    out.push(match report {
        Ok(r) if r.bound.iter().all(|b| b.is_finite()) && r.max_bound.is_finite() => CheckResult {
            name: NH[5],
            status: Status::Pass,
            detail: format!("max bound {:.3e}", r.max_bound),
        },
        Ok(_) => CheckResult::failed(NH[5], "bound is not finite"),
        Err(e) => CheckResult::failed(NH[5], e.to_string()),
    });
    out
}

fn split_vs_eigen(s: &Setup, h: &HamiltonianMatrix, exec: Exec) -> CheckResult {
    let name = "split_vs_eigen";
    let r = (|| -> Result<f64> {
        let psi0 = initial_gaussian(&s.grid, &s.packet)?;
        let times = [0.0, 2.0];
        let d = eigendecompose(h)?;
        let a = propagate_eigen(&d, &psi0, &times, exec)?;
        let b = propagate_split5(&psi0, &s.potential, 0.005, &times)?;
        let (a, b) = (a.last().expect("snapshots"), b.last().expect("snapshots"));
        Ok(a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y): (&C64, &C64)| (x - y).norm())
            .fold(0.0, f64::max))
    })();
    match r {
        Ok(v) => CheckResult::measured(name, v, AGREEMENT_TOL),
        Err(e) => CheckResult::failed(name, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn status(results: &[CheckResult], name: &str) -> Status {
        results.iter().find(|r| r.name == name).unwrap().status
    }

    #[test]
    fn clean_run_passes() {
        let r = run_checks(CheckOptions::default(), Exec::Sequential);
        for c in &r {
            assert_eq!(c.status, Status::Pass, "{}: {}", c.name, c.detail);
        }
        assert_eq!(r.len(), 10);
    }

    #[test]
    fn flipped_v1_breaks_symmetry() {
        let r = run_checks(
            CheckOptions {
                flip_v1: true,
                ..CheckOptions::default()
            },
            Exec::Sequential,
        );
        assert_eq!(status(&r, "complex_symmetry"), Status::Fail);
        assert!(!all_passed(&r));
    }

    #[test]
    fn forced_theta_fails_validation() {
        let r = run_checks(
            CheckOptions {
                theta: Some(1.6),
                ..CheckOptions::default()
            },
            Exec::Sequential,
        );
        assert_eq!(status(&r, "validate_theta"), Status::Fail);
        assert_eq!(status(&r, "eigen_residual"), Status::Skipped);
        assert!(!all_passed(&r));
    }
}
