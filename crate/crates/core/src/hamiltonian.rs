//! Dense Hamiltonian matrices in the Fourier collocation basis and their
//! eigendecomposition.
//!
//! The collocation basis (grid values) is the unitary image of the plane-wave
//! basis `exp(i k_m x)/√L`, so spectra are identical in both. It is used here
//! because it is a real basis: a Hamiltonian built from the scaled operator is
//! complex symmetric in it, and eigenvectors are normalised with the bilinear
//! c-product `Σ_n C_n,j C_n,j'`.

use std::sync::Arc;

use faer::{Mat, Side};
use num_complex::Complex64 as C64;

use crate::boundary::{dc_potential, dc_potential_on_contour, DcFieldParams};
use crate::cap::{build_delta_v, build_rf_cap, CapOperator, MonomialCap};
use crate::contour::ContourParams;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::par::Exec;
pub use crate::potential::PotentialModel;

/// Relative c-norm below which an eigenvector is reported as self-orthogonal.
pub const SELF_ORTHOGONAL_TOL: f64 = 1e-8;
/// Eigenvalues closer than this (relative) are treated as one cluster and
/// re-orthogonalised together.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct AssemblyMeta {
    pub potential: PotentialModel,
    pub mass: f64,
    pub contour: Option<ContourParams>,
    pub dc: Option<DcFieldParams>,
    pub monomial: Option<MonomialCap>,
}

impl AssemblyMeta {
    pub fn describe(&self) -> String {
        let mut s = format!("potential={} mass={}", self.potential.name(), self.mass);
        if let Some(c) = &self.contour {
            s += &format!(" contour(theta={}, lambda={}, x_cap={})", c.theta, c.lambda, c.x_cap);
        }
        if let Some(d) = &self.dc {
            s += &format!(" dc(x_dc={}, strength={})", d.x_dc, d.strength);
        }
        if let Some(m) = &self.monomial {
            s += &format!(" monomial(strength={}, x0={}, power={})", m.strength, m.x0, m.power);
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    matrix: Mat<C64>,
    hermitian: bool,
    grid: Arc<Grid>,
    meta: AssemblyMeta,
}

impl HamiltonianMatrix {
    pub fn matrix(&self) -> &Mat<C64> {
        &self.matrix
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn meta(&self) -> &AssemblyMeta {
        &self.meta
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |H − H^T|`.
    pub fn transpose_asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).norm());
            }
        }
        worst
    }

    /// `max |H − H^†|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &HamiltonianMatrix) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.matrix[(i, j)] - other.matrix[(i, j)]).norm());
            }
        }
        worst
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.matrix[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, psi: &[C64]) -> Vec<C64> {
        matvec(&self.matrix, psi)
    }
}

pub(crate) fn matvec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let n = m.nrows();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for j in 0..m.ncols() {
        let vj = v[j];
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = m.col(j);
        for i in 0..n {
            out[i] += col[i] * vj;
        }
    }
    out
}

/// Collects the optional ingredients of a Hamiltonian.
#[derive(Clone, Debug)]
pub struct HamiltonianBuilder {
    grid: Arc<Grid>,
    potential: PotentialModel,
    mass: f64,
    contour: Option<ContourParams>,
    dc: Option<DcFieldParams>,
    monomial: Option<MonomialCap>,
    delta_v_bound: Option<f64>,
    cap_override: Option<CapOperator>,
    exec: Exec,
}

impl HamiltonianBuilder {
    pub fn new(grid: &Arc<Grid>, potential: PotentialModel) -> Self {
        HamiltonianBuilder {
            grid: grid.clone(),
            potential,
            mass: 1.0,
            contour: None,
            dc: None,
            monomial: None,
            delta_v_bound: None,
            cap_override: None,
            exec: Exec::default(),
        }
    }

    pub fn mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn contour(mut self, contour: ContourParams) -> Self {
        self.contour = Some(contour);
        self
    }

    pub fn dc_field(mut self, dc: DcFieldParams) -> Self {
        self.dc = dc.enabled.then_some(dc);
        self
    }

    pub fn monomial_cap(mut self, cap: MonomialCap) -> Self {
        self.monomial = Some(cap);
        self
    }

    pub fn delta_v_bound(mut self, bound: f64) -> Self {
        self.delta_v_bound = Some(bound);
        self
    }

    /// Uses a prebuilt (possibly modified) CAP instead of building one from
    /// the contour.
    pub fn cap(mut self, cap: CapOperator) -> Self {
        self.contour = Some(cap.contour);
        self.cap_override = Some(cap);
        self
    }

    pub fn exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn build(self) -> Result<HamiltonianMatrix> {
        let grid = self.grid;
        let n = grid.len();
        let half_box = 0.5 * grid.length();
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::param("mass", format!("must be positive, got {}", self.mass)));
        }
        if let Some(m) = &self.monomial {
            m.validate(half_box)?;
        }
        if let Some(c) = &self.contour {
            c.validate(half_box)?;
        }
        if let Some(d) = &self.dc {
            d.validate(self.contour.map_or(0.0, |c| c.x_cap), half_box)?;
        }

        // diagonal: physical potential (+ static field) on the real axis,
        // plus the contour correction ΔV and V₀
        let mut diag: Vec<C64> = grid.x().iter().map(|&x| C64::new(self.potential.real(x), 0.0)).collect();
        if let Some(dc) = &self.dc {
            for (d, v) in diag.iter_mut().zip(dc_potential(dc, &grid)) {
                *d += v;
            }
        }
        if let Some(m) = &self.monomial {
            for (d, &x) in diag.iter_mut().zip(grid.x()) {
                *d += m.eval(x);
            }
        }

        let cap = match (self.cap_override, &self.contour) {
            (Some(cap), _) => {
                if **cap.grid() != *grid {
                    return Err(Error::GridMismatch);
                }
                Some(cap)
            }
            (None, Some(c)) if !c.is_identity() => {
                let dv = build_delta_v(&self.potential, c, &grid, self.delta_v_bound)?;
                Some(build_rf_cap(c, &grid, self.mass)?.with_delta_v(dv)?)
            }
            _ => None,
        };
        if let Some(cap) = &cap {
            for j in 0..n {
                diag[j] += cap.v0[j] + cap.delta_v[j];
            }
            if let Some(dc) = &self.dc {
                let on_contour = dc_potential_on_contour(dc, &cap.contour, &grid);
                for ((d, c), r) in diag.iter_mut().zip(on_contour).zip(dc_potential(dc, &grid)) {
                    *d += c - r;
                }
            }
        }

        let d2 = grid.derivative_matrix(2)?;
        let kin = -0.5 * crate::cap::HBAR * crate::cap::HBAR / self.mass;
        let mut h = Mat::<C64>::from_fn(n, n, |i, j| C64::new(kin * d2[i * n + j], 0.0));
        for j in 0..n {
            h[(j, j)] += diag[j];
        }

        if let Some(cap) = &cap {
            // v0 + ∂ v2 ∂ + (v1 − v2')∂: the middle term is the symmetric part
            // of v2∂² + v1∂; the last vanishes when v1 = dv2/dx
            let d1v = grid.derivative_matrix(1)?;
            let d1 = Mat::<C64>::from_fn(n, n, |i, j| C64::new(d1v[i * n + j], 0.0));
            let scaled = Mat::<C64>::from_fn(n, n, |i, j| cap.v2[i] * d1[(i, j)]);
            let sym = &d1 * &scaled;
            let rows = self.exec.map_range(n, |i| {
                let r = cap.v1[i] - cap.v2_slope[i];
                (0..n).map(|j| sym[(i, j)] + r * d1[(i, j)]).collect::<Vec<_>>()
            });
            for (i, row) in rows.into_iter().enumerate() {
                for (j, v) in row.into_iter().enumerate() {
                    h[(i, j)] += v;
                }
            }
        }

        let hermitian = cap.is_none() && self.monomial.is_none();
        let meta = AssemblyMeta {
            potential: self.potential,
            mass: self.mass,
            contour: self.contour,
            dc: self.dc,
            monomial: self.monomial,
        };
        if let Some((i, j)) = first_non_finite(&h) {
            return Err(Error::NonFinite {
                what: "Hamiltonian matrix element",
                index: i * n + j,
                x: grid.x()[i],
            });
        }
        Ok(HamiltonianMatrix {
            matrix: h,
            hermitian,
            grid,
            meta,
        })
    }
}

fn first_non_finite(m: &Mat<C64>) -> Option<(usize, usize)> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

/// `−½ d²/dx² + V(x)` with unit mass.
pub fn assemble_hermitian(grid: &Arc<Grid>, potential: PotentialModel) -> Result<HamiltonianMatrix> {
    HamiltonianBuilder::new(grid, potential).build()
}

/// `H + ΔV + V₀ + V₁∂ + V₂∂²` for the given scaling path.
pub fn assemble_nonhermitian(
    grid: &Arc<Grid>,
    potential: PotentialModel,
    contour: ContourParams,
    mass: f64,
) -> Result<HamiltonianMatrix> {
    let mut h = HamiltonianBuilder::new(grid, potential).mass(mass).contour(contour).build()?;
    h.hermitian = false;
    Ok(h)
}

/// Which product the eigenvectors are orthonormal in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerProduct {
    /// `Σ conj(a_n) b_n`
    Conjugated,
    /// `Σ a_n b_n` (c-product)
    Bilinear,
}

impl InnerProduct {
    pub fn eval(self, a: &[C64], b: &[C64]) -> C64 {
        match self {
            InnerProduct::Conjugated => a.iter().zip(b).map(|(a, b)| a.conj() * b).sum(),
            InnerProduct::Bilinear => a.iter().zip(b).map(|(a, b)| a * b).sum(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    values: Vec<C64>,
    /// Eigenvectors, one per column, normalised in `product`.
    vectors: Mat<C64>,
    product: InnerProduct,
    grid: Arc<Grid>,
}

impl EigenDecomposition {
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn vectors(&self) -> &Mat<C64> {
        &self.vectors
    }

    pub fn vector(&self, j: usize) -> Vec<C64> {
        self.vectors.col(j).iter().copied().collect()
    }

    pub fn product(&self) -> InnerProduct {
        self.product
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `max_j ‖Hφ_j − E_j φ_j‖ / ‖φ_j‖`.
    pub fn max_residual(&self, h: &HamiltonianMatrix) -> f64 {
        let hv = h.matrix() * &self.vectors;
        (0..self.len())
            .map(|j| {
                let e = self.values[j];
                let mut r2 = 0.0;
                let mut v2 = 0.0;
                for i in 0..self.vectors.nrows() {
                    let v = self.vectors[(i, j)];
                    r2 += (hv[(i, j)] - e * v).norm_sqr();
                    v2 += v.norm_sqr();
                }
                (r2 / v2).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max_{j,j'} |⟨φ_j, φ_j'⟩ − δ_jj'|` in the declared product.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = match self.product {
            InnerProduct::Conjugated => self.vectors.adjoint() * &self.vectors,
            InnerProduct::Bilinear => self.vectors.transpose() * &self.vectors,
        };
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).norm());
            }
        }
        worst
    }

    /// Expansion coefficients `a_j = ⟨φ_j, ψ⟩` in the declared product,
    /// followed by one round of residual correction, which compensates for
    /// the loss of bi-orthogonality in ill-conditioned eigenbases.
    pub fn project(&self, psi: &[C64]) -> Vec<C64> {
        let mut a = self.project_once(psi);
        let back = self.synthesize(&a);
        let residual: Vec<C64> = psi.iter().zip(&back).map(|(p, b)| p - b).collect();
        for (a, d) in a.iter_mut().zip(self.project_once(&residual)) {
            *a += d;
        }
        a
    }

    fn project_once(&self, psi: &[C64]) -> Vec<C64> {
        (0..self.len())
            .map(|j| self.product.eval(self.vectors.col(j).try_as_col_major().unwrap().as_slice(), psi))
            .collect()
    }

    /// `Σ_j a_j φ_j`.
    pub fn synthesize(&self, a: &[C64]) -> Vec<C64> {
        matvec(&self.vectors, a)
    }

    /// `Σ_j a_j exp(−i E_j t) φ_j`.
    pub fn evolve(&self, a: &[C64], t: f64) -> Vec<C64> {
        let phased: Vec<C64> = a
            .iter()
            .zip(&self.values)
            .map(|(a, e)| a * (-C64::i() * e * t).exp())
            .collect();
        self.synthesize(&phased)
    }

    /// Eigenvalues sorted by real part, ties by imaginary part.
    pub fn sorted_values(&self) -> Vec<C64> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }
}

pub fn eigendecompose(h: &HamiltonianMatrix) -> Result<EigenDecomposition> {
    let n = h.dim();
    if let Some((i, _)) = first_non_finite(h.matrix()) {
        return Err(Error::NonFinite {
            what: "Hamiltonian matrix element",
            index: i,
            x: h.grid().x()[i],
        });
    }
    if h.is_hermitian() {
        let evd = h
            .matrix()
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let values = (0..n).map(|j| evd.S()[j]).collect();
        return Ok(EigenDecomposition {
            values,
            vectors: evd.U().to_owned(),
            product: InnerProduct::Conjugated,
            grid: h.grid().clone(),
        });
    }

    let evd = h.matrix().eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values: Vec<C64> = (0..n).map(|j| evd.S()[j]).collect();
    let mut vectors = evd.U().to_owned();

    // re-orthogonalise degenerate clusters in the c-product
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let scale = values[i].norm().max(1.0);
        let cluster: Vec<usize> = (i..n)
            .filter(|&j| !assigned[j] && (values[j] - values[i]).norm() <= DEGENERACY_TOL * scale)
            .collect();
        for (pos, &j) in cluster.iter().enumerate() {
            assigned[j] = true;
            for &prev in &cluster[..pos] {
                let overlap: C64 = (0..n).map(|r| vectors[(r, prev)] * vectors[(r, j)]).sum();
                for r in 0..n {
                    let p = vectors[(r, prev)];
                    vectors[(r, j)] -= overlap * p;
                }
            }
            let norm2: f64 = (0..n).map(|r| vectors[(r, j)].norm_sqr()).sum();
            let c_norm: C64 = (0..n).map(|r| vectors[(r, j)] * vectors[(r, j)]).sum();
            if c_norm.norm() < SELF_ORTHOGONAL_TOL * norm2 {
                return Err(Error::SelfOrthogonal {
                    index: j,
                    c_norm: c_norm.norm() / norm2,
                });
            }
            let s = 1.0 / c_norm.sqrt();
            for r in 0..n {
                vectors[(r, j)] *= s;
            }
        }
    }

    Ok(EigenDecomposition {
        values,
        vectors,
        product: InnerProduct::Bilinear,
        grid: h.grid().clone(),
    })
}

/// Eigenvalues with `Re E < 0` whose eigenvector keeps more than half of its
/// weight `Σ|φ|²` inside `|x| <= halfwidth`. Edge-localised states created by
/// a field in the scaled tail are excluded.
pub fn bound_like_eigenvalues(decomp: &EigenDecomposition, halfwidth: f64) -> Vec<C64> {
    let inner = decomp.grid().inner_indices(halfwidth);
    (0..decomp.len())
        .filter(|&j| decomp.values()[j].re < 0.0)
        .filter(|&j| {
            let col = decomp.vectors().col(j);
            let total: f64 = col.iter().map(|v| v.norm_sqr()).sum();
            let inside: f64 = inner.iter().map(|&i| col[i].norm_sqr()).sum();
            inside > 0.5 * total
        })
        .map(|j| decomp.values()[j])
        .collect()
}

/// Plain-text spectrum dump: one `index, Re E, Im E` row per eigenvalue.
pub fn write_spectrum<W: std::io::Write>(mut w: W, values: &[C64]) -> std::io::Result<()> {
    writeln!(w, "# index, Re E, Im E")?;
    for (i, e) in values.iter().enumerate() {
        writeln!(w, "{i}, {:.17e}, {:.17e}", e.re, e.im)?;
    }
    Ok(())
}
