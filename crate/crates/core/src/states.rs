//! Density matrices, Bloch vectors, mixedness and decompositions.

use crate::error::{Error, Result};
use crate::linalg::{
    self, eigh, identity, inner, max_abs, projector, psd_sqrt, r, tensor, ComplexMatrix, C64,
    DEFAULT_TOL,
};

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    matrix: ComplexMatrix,
}

impl State {
    pub fn new(matrix: ComplexMatrix) -> Result<State> {
        State::with_tol(matrix, DEFAULT_TOL)
    }

    pub fn with_tol(matrix: ComplexMatrix, tol: f64) -> Result<State> {
        validate_density(&matrix, tol)?;
        Ok(State { matrix: linalg::hermitian_part(&matrix) })
    }

    /// Pure state of a ket; the ket is normalized first.
    pub fn pure(ket: &ComplexMatrix) -> Result<State> {
        let n = ket.norm();
        if ket.ncols() != 1 || n == 0.0 {
            return Err(Error::InvalidParameter("ket must be a nonzero column".into()));
        }
        let k = ket / r(n);
        Ok(State { matrix: projector(&k) })
    }

    pub fn maximally_mixed(d: usize) -> State {
        State { matrix: identity(d) / r(d as f64) }
    }

    /// Qubit state `(I + r·σ)/2`.
    pub fn qubit(bloch: [f64; 3]) -> Result<State> {
        from_bloch(&BlochVector { dim: 2, components: bloch.to_vec() })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `tr[ρE]`, real part.
    pub fn expectation(&self, e: &ComplexMatrix) -> f64 {
        (&self.matrix * e).trace().re
    }
}

pub fn validate_density(m: &ComplexMatrix, tol: f64) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Dimension(format!("state must be square, got {}x{}", m.nrows(), m.ncols())));
    }
    let dev = max_abs(&(m - m.adjoint()));
    if dev > tol * linalg::operator_norm(m).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let t = m.trace();
    if (t - r(1.0)).norm() > tol * (m.nrows() as f64).max(1.0) {
        return Err(Error::NotNormalized(t.re));
    }
    let lo = linalg::min_eigenvalue(m);
    if lo < -tol {
        return Err(Error::NotPsd(lo));
    }
    Ok(())
}

/// Zero eigenvalue within `tol`: the state sits on the boundary of the state space.
pub fn is_boundary(rho: &State, tol: f64) -> bool {
    linalg::min_eigenvalue(&rho.matrix) < tol
}

pub fn purity(rho: &State) -> f64 {
    (&rho.matrix * &rho.matrix).trace().re
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    E,
    Two,
}

pub fn von_neumann_entropy(rho: &State, base: LogBase) -> f64 {
    let s: f64 = linalg::eigvalsh(&rho.matrix)
        .into_iter()
        .filter(|&l| l > DEFAULT_TOL)
        .map(|l| -l * l.ln())
        .sum();
    let s = s.max(0.0);
    match base {
        LogBase::E => s,
        LogBase::Two => s / std::f64::consts::LN_2,
    }
}

/// Traceless Hermitian basis of dimension `d` (generalized Gell-Mann), scaled so
/// that `tr[E_j E_k] = d δ_jk`. For `d = 2` this is `σx, σy, σz`.
pub fn gell_mann_basis(d: usize) -> Vec<ComplexMatrix> {
    let s = (d as f64 / 2.0).sqrt();
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in j + 1..d {
            let mut sym = linalg::zeros(d, d);
            sym[(j, k)] = r(s);
            sym[(k, j)] = r(s);
            out.push(sym);
            let mut anti = linalg::zeros(d, d);
            anti[(j, k)] = C64::new(0.0, -s);
            anti[(k, j)] = C64::new(0.0, s);
            out.push(anti);
        }
    }
    for l in 1..d {
        let f = s * (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut diag = linalg::zeros(d, d);
        for j in 0..l {
            diag[(j, j)] = r(f);
        }
        diag[(l, l)] = r(-(l as f64) * f);
        out.push(diag);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlochVector {
    pub dim: usize,
    pub components: Vec<f64>,
}

impl BlochVector {
    pub fn norm(&self) -> f64 {
        self.components.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn to_bloch(rho: &State) -> BlochVector {
    let d = rho.dim();
    let components = gell_mann_basis(d).iter().map(|e| rho.expectation(e)).collect();
    BlochVector { dim: d, components }
}

/// Matrix `(1/d)(I + r·E)` without any positivity check.
pub fn bloch_matrix(b: &BlochVector) -> Result<ComplexMatrix> {
    let d = b.dim;
    if d < 2 || b.components.len() != d * d - 1 {
        return Err(Error::Dimension(format!(
            "Bloch vector for d={d} needs {} components, got {}",
            d * d - 1,
            b.components.len()
        )));
    }
    let mut m = identity(d);
    for (x, e) in b.components.iter().zip(gell_mann_basis(d)) {
        m += e * r(*x);
    }
    Ok(m / r(d as f64))
}

pub fn from_bloch(b: &BlochVector) -> Result<State> {
    let m = bloch_matrix(b)?;
    let lo = linalg::min_eigenvalue(&m);
    if lo < -DEFAULT_TOL {
        return Err(Error::OutsideStateSpace(lo));
    }
    Ok(State { matrix: m })
}

/// Weighted orthonormal kets, weights descending.
pub type Decomposition = Vec<(f64, ComplexMatrix)>;

/// Spectral decomposition with zero weights dropped.
pub fn canonical_decomposition(rho: &State) -> Decomposition {
    let e = eigh(&rho.matrix).expect("state is Hermitian");
    e.values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > DEFAULT_TOL)
        .map(|(j, &l)| (l, e.vector(j)))
        .collect()
}

pub fn check_orthonormal(kets: &[ComplexMatrix], tol: f64) -> Result<()> {
    for (i, a) in kets.iter().enumerate() {
        for (j, b) in kets.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            if (inner(a, b) - r(expect)).norm() > tol {
                return Err(Error::InvalidParameter(format!("kets {i} and {j} are not orthonormal")));
            }
        }
    }
    Ok(())
}

/// Decomposition induced by an orthonormal basis: `λ_j = ‖√ρ φ_j‖²`,
/// `φ̂_j = λ_j^{-1/2} √ρ φ_j`.
pub fn convex_decomposition(rho: &State, basis: &[ComplexMatrix]) -> Result<Decomposition> {
    check_orthonormal(basis, 1e-8)?;
    if basis.iter().any(|b| b.nrows() != rho.dim()) {
        return Err(Error::Dimension("basis kets do not match the state dimension".into()));
    }
    let s = psd_sqrt(&rho.matrix)?;
    Ok(basis
        .iter()
        .filter_map(|phi| {
            let v = &s * phi;
            let w = v.norm_squared();
            (w > DEFAULT_TOL).then(|| (w, v / r(w.sqrt())))
        })
        .collect())
}

pub fn reconstruct(dec: &Decomposition) -> ComplexMatrix {
    let d = dec.first().map(|(_, k)| k.nrows()).unwrap_or(0);
    let mut m = linalg::zeros(d, d);
    for (w, k) in dec {
        m += projector(k) * r(*w);
    }
    m
}

#[derive(Debug, Clone)]
pub struct Purification {
    pub ket: ComplexMatrix,
    pub ancilla_dim: usize,
}

/// Canonical purification `Σ √λ_j φ_j ⊗ e_j` on system ⊗ ancilla with ancilla
/// dimension equal to the rank.
pub fn purify(rho: &State) -> Purification {
    let dec = canonical_decomposition(rho);
    let k = dec.len();
    let mut ket = linalg::zeros(rho.dim() * k, 1);
    for (j, (w, phi)) in dec.iter().enumerate() {
        ket += tensor(phi, &linalg::basis_ket(k, j)) * r(w.sqrt());
    }
    Purification { ket, ancilla_dim: k }
}

/// Change of `tr[E·]` between the superposition `(aψ + bφ)/N` and the mixture
/// `(|a|²P_ψ + |b|²P_φ)/N²`.
pub fn interference_term(psi: &ComplexMatrix, phi: &ComplexMatrix, a: C64, b: C64, e: &ComplexMatrix) -> Result<f64> {
    if psi.shape() != phi.shape() || psi.ncols() != 1 || e.nrows() != psi.nrows() {
        return Err(Error::Dimension("kets and effect must share a dimension".into()));
    }
    if inner(psi, phi).norm() > 1e-8 {
        return Err(Error::InvalidParameter("kets are not orthogonal".into()));
    }
    let n2 = a.norm_sqr() + b.norm_sqr();
    if n2 == 0.0 {
        return Err(Error::InvalidParameter("a and b are both zero".into()));
    }
    let omega = (psi * a + phi * b) / r(n2.sqrt());
    let mix = (projector(psi) * r(a.norm_sqr()) + projector(phi) * r(b.norm_sqr())) / r(n2);
    let sup = (projector(&omega) * e).trace().re;
    Ok(sup - (mix * e).trace().re)
}
