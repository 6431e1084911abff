use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Physical potentials, all analytic so they can be continued onto the
/// scaled contour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum PotentialModel {
    /// `(0.5x² − 0.8)·exp(−0.1x²)`: a well at the origin between two barriers.
    #[default]
    TestWellBarrier,
    Free,
    Harmonic { omega: f64 },
}


impl PotentialModel {
    pub fn eval(&self, z: C64) -> C64 {
        match *self {
            PotentialModel::TestWellBarrier => (0.5 * z * z - 0.8) * (-0.1 * z * z).exp(),
            PotentialModel::Free => C64::new(0.0, 0.0),
            PotentialModel::Harmonic { omega } => 0.5 * omega * omega * z * z,
        }
    }

    pub fn real(&self, x: f64) -> f64 {
        match *self {
            PotentialModel::TestWellBarrier => (0.5 * x * x - 0.8) * (-0.1 * x * x).exp(),
            PotentialModel::Free => 0.0,
            PotentialModel::Harmonic { omega } => 0.5 * omega * omega * x * x,
        }
    }

    pub fn sample(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&x| self.real(x)).collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            PotentialModel::TestWellBarrier => "test_well_barrier",
            PotentialModel::Free => "free",
            PotentialModel::Harmonic { .. } => "harmonic",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_and_barriers() {
        let v = PotentialModel::TestWellBarrier;
        assert_eq!(v.real(0.0), -0.8);
        // V' = x e^{-0.1x²}(1 − 0.1x² + 0.16) vanishes at x*² = 11.6
        let xs = 11.6f64.sqrt();
        let peak = v.real(xs);
        assert!(peak > 0.0);
        assert!(peak > v.real(xs - 0.05) && peak > v.real(xs + 0.05));
        assert_eq!(v.real(-xs), peak);
    }

    #[test]
    fn complex_evaluation_agrees_on_real_axis() {
        let v = PotentialModel::TestWellBarrier;
        for x in [-5.0, -1.0, 0.3, 2.0, 7.5] {
            assert!((v.eval(C64::new(x, 0.0)).re - v.real(x)).abs() < 1e-15);
        }
        let h = PotentialModel::Harmonic { omega: 2.0 };
        assert_eq!(h.eval(C64::new(0.0, 1.0)), C64::new(-2.0, 0.0));
    }
}
