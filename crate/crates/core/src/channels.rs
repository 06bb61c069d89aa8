//! Quantum operations and channels.
//!
//! A linear map on operators can be held as a list of Kraus operators, a Choi
//! matrix, a χ-matrix over an orthonormal operator basis, or (for
//! trace-preserving maps on one system) an affine action on Bloch vectors.
//! The Choi matrix lets the map act on the first tensor factor:
//! `Ω = (1/d) Σ_jk E(e_jk) ⊗ e_jk`, and `Φ = dΩ`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;

use crate::discrimination::trace_distance_matrices;
use crate::entanglement;
use crate::error::{Error, Result};
use crate::linalg::{
    self, c, identity, max_abs, projector, r, tensor, zeros, ComplexMatrix, OperatorExt,
    Side, C64, DEFAULT_TOL, ONE,
};
use crate::random;
use crate::states::{gell_mann_basis, State};

/// Common interface of every channel representation.
pub trait LinearMap {
    fn in_dim(&self) -> usize;
    fn out_dim(&self) -> usize;
    fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix>;

    fn to_choi(&self) -> ChoiMatrix {
        ChoiMatrix::from_map(self.in_dim(), self.out_dim(), |x| {
            self.apply(x).expect("basis operator has the input dimension")
        })
    }
}

fn check_input(x: &ComplexMatrix, d: usize) -> Result<()> {
    if x.nrows() != d || x.ncols() != d {
        return Err(Error::Dimension(format!("map acts on {d}x{d}, got {}x{}", x.nrows(), x.ncols())));
    }
    Ok(())
}

fn matrix_unit(d: usize, j: usize, k: usize) -> ComplexMatrix {
    let mut e = zeros(d, d);
    e[(j, k)] = ONE;
    e
}

/// Row-major vectorization, entry `(i, j)` at index `i * cols + j`.
pub fn vectorize(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.ncols();
    ComplexMatrix::from_fn(a.nrows() * n, 1, |k, _| a[(k / n, k % n)])
}

pub fn unvectorize(v: &ComplexMatrix, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |i, j| v[(i * cols + j, 0)])
}

fn scale(t: &ComplexMatrix) -> f64 {
    linalg::operator_norm(t).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub cp: bool,
    pub tp: bool,
    pub unital: bool,
    pub trace_decreasing: bool,
    pub choi_min_eigenvalue: f64,
    /// Largest entry of `ΣA†A − I`.
    pub tp_deviation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    kraus: Vec<ComplexMatrix>,
    in_dim: usize,
    out_dim: usize,
}

impl KrausChannel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<KrausChannel> {
        let first = kraus.first().ok_or_else(|| Error::InvalidParameter("empty Kraus list".into()))?;
        let (out_dim, in_dim) = first.shape();
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Dimension("zero-sized Kraus operator".into()));
        }
        if let Some(bad) = kraus.iter().find(|a| a.shape() != (out_dim, in_dim)) {
            return Err(Error::Dimension(format!(
                "Kraus operators of shape {out_dim}x{in_dim} and {}x{}",
                bad.nrows(),
                bad.ncols()
            )));
        }
        Ok(KrausChannel { kraus, in_dim, out_dim })
    }

    pub fn identity(d: usize) -> KrausChannel {
        KrausChannel { kraus: vec![identity(d)], in_dim: d, out_dim: d }
    }

    /// `ρ ↦ UρU†`.
    pub fn unitary(u: &ComplexMatrix) -> Result<KrausChannel> {
        if !u.is_unitary(DEFAULT_TOL * 10.0) {
            return Err(Error::InvalidParameter("operator is not unitary".into()));
        }
        KrausChannel::new(vec![u.clone()])
    }

    pub fn random<R: Rng + ?Sized>(d_in: usize, d_out: usize, n: usize, rng: &mut R) -> KrausChannel {
        KrausChannel { kraus: random::kraus_ops(d_in, d_out, n, rng), in_dim: d_in, out_dim: d_out }
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn len(&self) -> usize {
        self.kraus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kraus.is_empty()
    }

    /// `Σ A_k† A_k`.
    pub fn kraus_sum(&self) -> ComplexMatrix {
        self.kraus.iter().fold(zeros(self.in_dim, self.in_dim), |acc, a| acc + a.adjoint() * a)
    }

    /// `Σ A_k A_k†`.
    pub fn kraus_co_sum(&self) -> ComplexMatrix {
        self.kraus.iter().fold(zeros(self.out_dim, self.out_dim), |acc, a| acc + a * a.adjoint())
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        max_abs(&(self.kraus_sum() - identity(self.in_dim))) <= tol
    }

    fn require_tp(&self, tol: f64) -> Result<()> {
        let dev = max_abs(&(self.kraus_sum() - identity(self.in_dim)));
        if dev > tol {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(())
    }

    /// Kraus list without operators that vanish within `tol`.
    pub fn pruned(&self, tol: f64) -> KrausChannel {
        let kept: Vec<_> = self.kraus.iter().filter(|a| max_abs(a) > tol).cloned().collect();
        if kept.is_empty() {
            return KrausChannel { kraus: vec![zeros(self.out_dim, self.in_dim)], ..self.clone() };
        }
        KrausChannel { kraus: kept, ..self.clone() }
    }

    /// Output state; fails when the output is not a state.
    pub fn apply_state(&self, rho: &State) -> Result<State> {
        State::with_tol(self.apply(rho.matrix())?, 1e-8)
    }

    /// `then ∘ self`.
    pub fn compose(&self, then: &KrausChannel) -> Result<KrausChannel> {
        if then.in_dim != self.out_dim {
            return Err(Error::Dimension(format!("cannot feed {} into {}", self.out_dim, then.in_dim)));
        }
        let kraus = then.kraus.iter().flat_map(|b| self.kraus.iter().map(move |a| b * a)).collect();
        KrausChannel::new(kraus)
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &KrausChannel) -> KrausChannel {
        let kraus = self.kraus.iter().flat_map(|a| other.kraus.iter().map(move |b| tensor(a, b))).collect();
        KrausChannel { kraus, in_dim: self.in_dim * other.in_dim, out_dim: self.out_dim * other.out_dim }
    }

    /// Heisenberg-picture map `E ↦ Σ A_k† E A_k`.
    pub fn heisenberg_dual(&self) -> KrausChannel {
        KrausChannel {
            kraus: self.kraus.iter().map(|a| a.adjoint()).collect(),
            in_dim: self.out_dim,
            out_dim: self.in_dim,
        }
    }

    pub fn certify(&self, tol: f64) -> Certificate {
        let choi = self.to_choi();
        let sum = self.kraus_sum();
        let tp_deviation = max_abs(&(&sum - identity(self.in_dim)));
        let unital = max_abs(&(self.kraus_co_sum() - identity(self.out_dim))) <= tol;
        let choi_min_eigenvalue = linalg::min_eigenvalue(choi.matrix());
        Certificate {
            cp: choi_min_eigenvalue >= -tol * scale(choi.matrix()),
            tp: tp_deviation <= tol,
            unital,
            trace_decreasing: (identity(self.in_dim) - sum).is_psd(tol),
            choi_min_eigenvalue,
            tp_deviation,
        }
    }
}

impl LinearMap for KrausChannel {
    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_input(x, self.in_dim)?;
        Ok(self.kraus.iter().fold(zeros(self.out_dim, self.out_dim), |acc, a| acc + a * x * a.adjoint()))
    }

    fn to_choi(&self) -> ChoiMatrix {
        let n = self.in_dim * self.out_dim;
        let mut m = zeros(n, n);
        for a in &self.kraus {
            let v = vectorize(a);
            m += &v * v.adjoint();
        }
        ChoiMatrix { matrix: m / r(self.in_dim as f64), in_dim: self.in_dim, out_dim: self.out_dim }
    }
}

/// Normalized Choi matrix `Ω` of a linear map (not necessarily CP).
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix {
    matrix: ComplexMatrix,
    in_dim: usize,
    out_dim: usize,
}

impl ChoiMatrix {
    pub fn new(matrix: ComplexMatrix, in_dim: usize, out_dim: usize) -> Result<ChoiMatrix> {
        let n = in_dim * out_dim;
        if n == 0 || matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::Dimension(format!(
                "Choi matrix for {in_dim}->{out_dim} must be {n}x{n}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(ChoiMatrix { matrix, in_dim, out_dim })
    }

    /// Choi matrix of an arbitrary linear map given by its action.
    pub fn from_map(in_dim: usize, out_dim: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> ChoiMatrix {
        let n = in_dim * out_dim;
        let mut m = zeros(n, n);
        for j in 0..in_dim {
            for k in 0..in_dim {
                let e = matrix_unit(in_dim, j, k);
                m += tensor(&f(&e), &e);
            }
        }
        ChoiMatrix { matrix: m / r(in_dim as f64), in_dim, out_dim }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    /// Unnormalized form `Φ = dΩ`.
    pub fn phi(&self) -> ComplexMatrix {
        &self.matrix * r(self.in_dim as f64)
    }

    /// `E(e_jk)` read off the blocks of `Ω`.
    pub fn basis_image(&self, j: usize, k: usize) -> ComplexMatrix {
        let d = self.in_dim;
        ComplexMatrix::from_fn(self.out_dim, self.out_dim, |i, l| self.matrix[(i * d + j, l * d + k)] * r(d as f64))
    }

    /// `tr_1 Ω`, which is `(ΣA†A)^T / d`.
    pub fn input_marginal(&self) -> ComplexMatrix {
        linalg::partial_trace(&self.matrix, self.out_dim, self.in_dim, Side::A).expect("dimensions fixed at construction")
    }

    pub fn is_cp(&self, tol: f64) -> bool {
        self.matrix.is_psd(tol)
    }

    pub fn certify(&self, tol: f64) -> Certificate {
        let d = self.in_dim;
        let choi_min_eigenvalue = linalg::min_eigenvalue(&self.matrix);
        let marginal = self.input_marginal() * r(d as f64);
        let tp_deviation = max_abs(&(&marginal - identity(d)));
        let unital = max_abs(&(self.apply(&identity(d)).expect("square input") - identity(self.out_dim))) <= tol;
        Certificate {
            cp: choi_min_eigenvalue >= -tol * scale(&self.matrix),
            tp: tp_deviation <= tol,
            unital,
            trace_decreasing: (identity(d) - marginal).is_psd(tol),
            choi_min_eigenvalue,
            tp_deviation,
        }
    }

    /// Kraus operators from the eigenvectors of `Φ`; one per eigenvalue above `tol`.
    pub fn to_kraus(&self, tol: f64) -> Result<KrausChannel> {
        let phi = self.phi();
        let e = linalg::eigh_tol(&phi, tol.max(DEFAULT_TOL) * scale(&phi))
            .map_err(|_| Error::NotCompletelyPositive(f64::NAN))?;
        let s = scale(&phi);
        let lo = *e.values.last().expect("nonempty");
        if lo < -tol * s {
            return Err(Error::NotCompletelyPositive(lo / self.in_dim as f64));
        }
        let kraus: Vec<_> = e
            .values
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > tol * s)
            .map(|(k, &l)| unvectorize(&e.vector(k), self.out_dim, self.in_dim) * r(l.sqrt()))
            .collect();
        if kraus.is_empty() {
            return KrausChannel::new(vec![zeros(self.out_dim, self.in_dim)]);
        }
        KrausChannel::new(kraus)
    }

    /// Dual map defined by `tr[N(T)E] = tr[T N_*(E)]`.
    pub fn heisenberg_dual(&self) -> ChoiMatrix {
        let images: Vec<Vec<ComplexMatrix>> =
            (0..self.in_dim).map(|j| (0..self.in_dim).map(|k| self.basis_image(j, k)).collect()).collect();
        ChoiMatrix::from_map(self.out_dim, self.in_dim, |e| {
            ComplexMatrix::from_fn(self.in_dim, self.in_dim, |k, j| (&images[j][k] * e).trace())
        })
    }

    pub fn compose(&self, then: &impl LinearMap) -> Result<ChoiMatrix> {
        if then.in_dim() != self.out_dim {
            return Err(Error::Dimension(format!("cannot feed {} into {}", self.out_dim, then.in_dim())));
        }
        Ok(ChoiMatrix::from_map(self.in_dim, then.out_dim(), |x| {
            then.apply(&self.apply(x).expect("input dimension")).expect("matching dimension")
        }))
    }
}

impl LinearMap for ChoiMatrix {
    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// `E(X) = d · tr_2[(I ⊗ X^T) Ω]`.
    fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_input(x, self.in_dim)?;
        let lifted = tensor(&identity(self.out_dim), &x.transpose()) * &self.matrix;
        let out = linalg::partial_trace(&lifted, self.out_dim, self.in_dim, Side::B)?;
        Ok(out * r(self.in_dim as f64))
    }

    fn to_choi(&self) -> ChoiMatrix {
        self.clone()
    }
}

/// `Ω` of the transposition `X ↦ X^T`, which is positive but not CP.
pub fn transposition(d: usize) -> ChoiMatrix {
    ChoiMatrix::from_map(d, d, |x| x.transpose())
}

/// `ρ ↦ (UρU†)^T`, the channel-like action of an antiunitary.
pub fn antiunitary(u: &ComplexMatrix) -> ChoiMatrix {
    ChoiMatrix::from_map(u.nrows(), u.nrows(), |x| (u * x * u.adjoint()).transpose())
}

/// Operator basis for the χ representation. Elements must be orthonormal
/// under `⟨A, B⟩ = tr[A†B]`.
pub fn check_operator_basis(basis: &[ComplexMatrix], rows: usize, cols: usize, tol: f64) -> Result<()> {
    if basis.len() != rows * cols || basis.iter().any(|b| b.shape() != (rows, cols)) {
        return Err(Error::Dimension(format!("need {} operators of shape {rows}x{cols}", rows * cols)));
    }
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let want = if i == j { ONE } else { C64::new(0.0, 0.0) };
            if (linalg::hs_inner(a, b) - want).norm() > tol {
                return Err(Error::InvalidParameter(format!("operator basis not orthonormal at ({i},{j})")));
            }
        }
    }
    Ok(())
}

/// `{I, σx, σy, σz}/√2`.
pub fn pauli_operator_basis() -> Vec<ComplexMatrix> {
    linalg::paulis().into_iter().map(|p| p / r(2f64.sqrt())).collect()
}

/// `{I, E_1, …, E_{d²−1}}/√d` with `E_j` the Gell-Mann basis of the Bloch representation.
pub fn gell_mann_operator_basis(d: usize) -> Vec<ComplexMatrix> {
    let s = r((d as f64).sqrt());
    std::iter::once(identity(d) / s).chain(gell_mann_basis(d).into_iter().map(|e| e / s)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiMatrix {
    matrix: ComplexMatrix,
    basis: Vec<ComplexMatrix>,
    in_dim: usize,
    out_dim: usize,
}

impl ChiMatrix {
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn basis(&self) -> &[ComplexMatrix] {
        &self.basis
    }

    fn basis_columns(basis: &[ComplexMatrix]) -> ComplexMatrix {
        let n = basis[0].nrows() * basis[0].ncols();
        ComplexMatrix::from_fn(n, basis.len(), |i, k| vectorize(&basis[k])[(i, 0)])
    }
}

/// `χ_rs` with `E(ρ) = Σ χ_rs E_r ρ E_s†`; equals `B† Φ B` for the basis columns `B`.
pub fn to_chi(ch: &impl LinearMap, basis: &[ComplexMatrix]) -> Result<ChiMatrix> {
    check_operator_basis(basis, ch.out_dim(), ch.in_dim(), 1e-9)?;
    let b = ChiMatrix::basis_columns(basis);
    let phi = ch.to_choi().phi();
    Ok(ChiMatrix { matrix: b.adjoint() * phi * &b, basis: basis.to_vec(), in_dim: ch.in_dim(), out_dim: ch.out_dim() })
}

impl LinearMap for ChiMatrix {
    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.out_dim
    }

    fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_input(x, self.in_dim)?;
        let mut out = zeros(self.out_dim, self.out_dim);
        for (rr, er) in self.basis.iter().enumerate() {
            let left = er * x;
            for (s, es) in self.basis.iter().enumerate() {
                let w = self.matrix[(rr, s)];
                if w.norm() > 0.0 {
                    out += &left * es.adjoint() * w;
                }
            }
        }
        Ok(out)
    }

    fn to_choi(&self) -> ChoiMatrix {
        let b = ChiMatrix::basis_columns(&self.basis);
        let phi = &b * &self.matrix * b.adjoint();
        ChoiMatrix { matrix: phi / r(self.in_dim as f64), in_dim: self.in_dim, out_dim: self.out_dim }
    }
}

/// Action `r ↦ T r + t` on Bloch vectors of a trace-preserving map.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRep {
    pub dim: usize,
    pub t_matrix: DMatrix<f64>,
    pub t_vector: DVector<f64>,
}

/// `T_jk = tr[E_j E(E_k)]/d`, `t_j = tr[E_j E(I)]/d` in the Gell-Mann basis.
pub fn to_affine(ch: &impl LinearMap, tol: f64) -> Result<AffineRep> {
    let d = ch.in_dim();
    if ch.out_dim() != d {
        return Err(Error::Dimension("affine form needs equal input and output dimension".into()));
    }
    let cert = ch.to_choi().certify(tol);
    if !cert.tp {
        return Err(Error::NotTracePreserving(cert.tp_deviation));
    }
    let basis = gell_mann_basis(d);
    let n = basis.len();
    let images: Vec<ComplexMatrix> = basis.iter().map(|e| ch.apply(e)).collect::<Result<_>>()?;
    let shift = ch.apply(&identity(d))?;
    let df = d as f64;
    let t_matrix = DMatrix::from_fn(n, n, |j, k| (&basis[j] * &images[k]).trace().re / df);
    let t_vector = DVector::from_fn(n, |j, _| (&basis[j] * &shift).trace().re / df);
    Ok(AffineRep { dim: d, t_matrix, t_vector })
}

impl AffineRep {
    pub fn new(dim: usize, t_matrix: DMatrix<f64>, t_vector: DVector<f64>) -> Result<AffineRep> {
        let n = dim * dim - 1;
        if t_matrix.shape() != (n, n) || t_vector.len() != n {
            return Err(Error::Dimension(format!("affine form for d={dim} needs {n}x{n} and {n}")));
        }
        Ok(AffineRep { dim, t_matrix, t_vector })
    }

    pub fn apply_bloch(&self, bloch: &[f64]) -> Result<Vec<f64>> {
        if bloch.len() != self.t_vector.len() {
            return Err(Error::Dimension(format!("Bloch vector of length {}", bloch.len())));
        }
        let v = &self.t_matrix * DVector::from_column_slice(bloch) + &self.t_vector;
        Ok(v.iter().copied().collect())
    }
}

impl LinearMap for AffineRep {
    fn in_dim(&self) -> usize {
        self.dim
    }

    fn out_dim(&self) -> usize {
        self.dim
    }

    /// Linear extension: `X = (tr[X] I + Σ_l tr[E_l X] E_l)/d`.
    fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.dim;
        check_input(x, d)?;
        let basis = gell_mann_basis(d);
        let coeffs: Vec<C64> = basis.iter().map(|e| (e * x).trace()).collect();
        let tr = x.trace();
        let mut out = identity(d) * tr;
        for (m, em) in basis.iter().enumerate() {
            let mut w = tr * r(self.t_vector[m]);
            for (l, cl) in coeffs.iter().enumerate() {
                w += cl * r(self.t_matrix[(m, l)]);
            }
            out += em * w;
        }
        Ok(out / r(d as f64))
    }
}

/// A channel in any of the four representations.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Kraus(KrausChannel),
    Choi(ChoiMatrix),
    Chi(ChiMatrix),
    Affine(AffineRep),
}

impl Channel {
    pub fn certify(&self, tol: f64) -> Certificate {
        match self {
            Channel::Kraus(k) => k.certify(tol),
            other => other.to_choi().certify(tol),
        }
    }
}

impl LinearMap for Channel {
    fn in_dim(&self) -> usize {
        match self {
            Channel::Kraus(k) => k.in_dim(),
            Channel::Choi(k) => k.in_dim(),
            Channel::Chi(k) => k.in_dim(),
            Channel::Affine(k) => k.in_dim(),
        }
    }

    fn out_dim(&self) -> usize {
        match self {
            Channel::Kraus(k) => k.out_dim(),
            Channel::Choi(k) => k.out_dim(),
            Channel::Chi(k) => k.out_dim(),
            Channel::Affine(k) => k.out_dim(),
        }
    }

    fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        match self {
            Channel::Kraus(k) => k.apply(x),
            Channel::Choi(k) => k.apply(x),
            Channel::Chi(k) => k.apply(x),
            Channel::Affine(k) => k.apply(x),
        }
    }

    fn to_choi(&self) -> ChoiMatrix {
        match self {
            Channel::Kraus(k) => k.to_choi(),
            Channel::Choi(k) => k.clone(),
            Channel::Chi(k) => k.to_choi(),
            Channel::Affine(k) => k.to_choi(),
        }
    }
}

/// Same map, decided by the Choi matrices.
pub fn kraus_equivalent(k1: &KrausChannel, k2: &KrausChannel, tol: f64) -> bool {
    if k1.in_dim != k2.in_dim || k1.out_dim != k2.out_dim {
        return false;
    }
    linalg::trace_norm(&(k1.to_choi().matrix - k2.to_choi().matrix)) < tol
}

/// Least-squares `u` with `B_j = Σ_k u_jk A_k`, both lists zero-padded to a
/// common length; `None` when the lists describe different maps.
pub fn kraus_mixing(k1: &KrausChannel, k2: &KrausChannel, tol: f64) -> Option<ComplexMatrix> {
    if !kraus_equivalent(k1, k2, tol) {
        return None;
    }
    let n = k1.len().max(k2.len());
    let rows = k1.in_dim * k1.out_dim;
    let col = |ops: &[ComplexMatrix], k: usize| {
        if k < ops.len() {
            vectorize(&ops[k])
        } else {
            zeros(rows, 1)
        }
    };
    let a = ComplexMatrix::from_fn(rows, n, |i, k| col(&k1.kraus, k)[(i, 0)]);
    let b = ComplexMatrix::from_fn(rows, n, |i, k| col(&k2.kraus, k)[(i, 0)]);
    let pinv = a.clone().pseudo_inverse(1e-10).ok()?;
    let u = (pinv * &b).transpose();
    let residual = max_abs(&(&a * u.transpose() - b));
    (residual < tol.max(1e-8)).then_some(u)
}

/// Unitary dilation `E(ρ) = tr_E[U(ρ ⊗ |φ1⟩⟨φ1|)U†]`, system first.
#[derive(Debug, Clone)]
pub struct Stinespring {
    pub env_dim: usize,
    pub unitary: ComplexMatrix,
    pub env_ket: ComplexMatrix,
    /// `Vφ = Σ_k A_kφ ⊗ φ_k`.
    pub isometry: ComplexMatrix,
}

impl Stinespring {
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.unitary.nrows() / self.env_dim;
        check_input(rho, d)?;
        let joint = &self.unitary * tensor(rho, &projector(&self.env_ket)) * self.unitary.adjoint();
        linalg::partial_trace(&joint, d, self.env_dim, Side::B)
    }

    /// The environment's share, which defines the conjugate channel.
    pub fn environment_output(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.unitary.nrows() / self.env_dim;
        check_input(rho, d)?;
        let joint = &self.unitary * tensor(rho, &projector(&self.env_ket)) * self.unitary.adjoint();
        linalg::partial_trace(&joint, d, self.env_dim, Side::A)
    }
}

pub fn stinespring(ch: &KrausChannel, tol: f64) -> Result<Stinespring> {
    ch.require_tp(tol)?;
    if ch.in_dim != ch.out_dim {
        return Err(Error::Dimension("a unitary dilation needs equal input and output dimension".into()));
    }
    let ch = ch.pruned(tol);
    let (unitary, isometry) = dilation_unitary(&ch.kraus);
    Ok(Stinespring { env_dim: ch.len(), unitary, env_ket: linalg::basis_ket(ch.len(), 0), isometry })
}

/// Unitary `U` on system⊗environment with `U(φ⊗φ_0) = Σ_k A_kφ ⊗ φ_k`, and
/// the isometry it extends. The Kraus operators must be square and sum to I.
pub(crate) fn dilation_unitary(kraus: &[ComplexMatrix]) -> (ComplexMatrix, ComplexMatrix) {
    let (d, n) = (kraus[0].ncols(), kraus.len());
    let v = ComplexMatrix::from_fn(d * n, d, |row, j| kraus[row % n][(row / n, j)]);
    let w = linalg::complete_to_unitary(&v);
    let mut order: Vec<usize> = Vec::with_capacity(d * n);
    let mut rest = d..d * n;
    for pos in 0..d * n {
        if pos % n == 0 {
            order.push(pos / n);
        } else {
            order.push(rest.next().expect("enough columns"));
        }
    }
    (ComplexMatrix::from_fn(d * n, d * n, |i, pos| w[(i, order[pos])]), v)
}

/// Complementary channel `E′(T) = Σ_jk tr[A_j T A_k†] |φ_j⟩⟨φ_k|`.
pub fn conjugate(ch: &KrausChannel, tol: f64) -> Result<KrausChannel> {
    ch.require_tp(tol)?;
    let n = ch.len();
    let kraus = (0..ch.out_dim)
        .map(|i| ComplexMatrix::from_fn(n, ch.in_dim, |k, j| ch.kraus[k][(i, j)]))
        .collect();
    KrausChannel::new(kraus)
}

/// Unitary coupling to an environment prepared in a (possibly mixed) state.
#[derive(Debug, Clone)]
pub struct Dilation {
    pub unitary: ComplexMatrix,
    pub env_state: ComplexMatrix,
}

impl Dilation {
    fn joint(&self, rho: &ComplexMatrix) -> Result<(ComplexMatrix, usize, usize)> {
        let n = self.env_state.nrows();
        let d = self.unitary.nrows() / n;
        check_input(rho, d)?;
        Ok((&self.unitary * tensor(rho, &self.env_state) * self.unitary.adjoint(), d, n))
    }

    pub fn system_output(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (j, d, n) = self.joint(rho)?;
        linalg::partial_trace(&j, d, n, Side::B)
    }

    pub fn environment_output(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (j, d, n) = self.joint(rho)?;
        linalg::partial_trace(&j, d, n, Side::A)
    }
}

/// Controlled coupling `Σ_j U_j ⊗ |φ_j⟩⟨φ_j|` with the environment in
/// `diag(p)`; the system sees `Σ p_j U_j ρ U_j†` and the environment ends
/// in `diag(p)` whatever the input.
pub fn random_unitary_dilation(terms: &[(f64, ComplexMatrix)]) -> Result<Dilation> {
    random_unitary(terms)?;
    let n = terms.len();
    let d = terms[0].1.nrows();
    let mut unitary = zeros(d * n, d * n);
    let mut env_state = zeros(n, n);
    for (j, (p, u)) in terms.iter().enumerate() {
        unitary += tensor(u, &projector(&linalg::basis_ket(n, j)));
        env_state[(j, j)] = r(*p);
    }
    Ok(Dilation { unitary, env_state })
}

fn check_probability(p: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::InvalidParameter(format!("{name} = {p} is not in [0, 1]")));
    }
    Ok(())
}

/// `D_p(ρ) = (1−p)ρ + p tr[ρ] I/d`.
pub fn depolarizing(d: usize, p: f64) -> Result<KrausChannel> {
    check_probability(p, "p")?;
    let mut kraus = Vec::with_capacity(d * d + 1);
    if p < 1.0 {
        kraus.push(identity(d) * r((1.0 - p).sqrt()));
    }
    if p > 0.0 {
        let w = r((p / d as f64).sqrt());
        for j in 0..d {
            for k in 0..d {
                kraus.push(matrix_unit(d, j, k) * w);
            }
        }
    }
    KrausChannel::new(kraus)
}

/// `ρ ↦ Σ q_j σ_j ρ σ_j` with `σ_0 = I`.
pub fn pauli(q: [f64; 4]) -> Result<KrausChannel> {
    let ops: Vec<(f64, ComplexMatrix)> = q.iter().copied().zip(linalg::paulis()).collect();
    random_unitary(&ops)
}

/// `ρ ↦ Σ p_j U_j ρ U_j†`.
pub fn random_unitary(terms: &[(f64, ComplexMatrix)]) -> Result<KrausChannel> {
    let total: f64 = terms.iter().map(|t| t.0).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
    }
    for (p, u) in terms {
        check_probability(*p, "weight")?;
        if !u.is_unitary(1e-9) {
            return Err(Error::InvalidParameter("mixture element is not unitary".into()));
        }
    }
    KrausChannel::new(terms.iter().filter(|t| t.0 > 0.0).map(|(p, u)| u * r(p.sqrt())).collect())
}

/// `ρ ↦ tr[ρ] ξ`.
pub fn contraction(xi: &State) -> KrausChannel {
    let d = xi.dim();
    let e = linalg::eigh(xi.matrix()).expect("state is Hermitian");
    let mut kraus = Vec::new();
    for (j, &l) in e.values.iter().enumerate() {
        if l <= DEFAULT_TOL {
            continue;
        }
        let v = e.vector(j) * r(l.sqrt());
        for k in 0..d {
            kraus.push(&v * linalg::basis_ket(d, k).adjoint());
        }
    }
    KrausChannel { kraus, in_dim: d, out_dim: d }
}

/// Qubit map `ηρ + (1−η) UρU†` with `U = n·σ`.
pub fn phase_damping(eta: f64, axis: [f64; 3]) -> Result<KrausChannel> {
    check_probability(eta, "eta")?;
    let norm = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("axis has length {norm}")));
    }
    random_unitary(&[(eta, identity(2)), (1.0 - eta, linalg::pauli_dot(axis))])
}

/// `4×4` matrix `Φ_D` of the diagonal qubit map `r ↦ diag(λ) r + t`, in the
/// layout with the reference system first.
pub fn qubit_diagonal_choi(lambda: [f64; 3], t: [f64; 3]) -> ComplexMatrix {
    let [l1, l2, l3] = lambda;
    let [t1, t2, t3] = t;
    let m = [
        [c(1.0 + t3 + l3, 0.0), c(t1, -t2), c(0.0, 0.0), c(l1 + l2, 0.0)],
        [c(t1, t2), c(1.0 - t3 - l3, 0.0), c(l1 - l2, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(l1 - l2, 0.0), c(1.0 + t3 - l3, 0.0), c(t1, -t2)],
        [c(l1 + l2, 0.0), c(0.0, 0.0), c(t1, t2), c(1.0 - t3 + l3, 0.0)],
    ];
    ComplexMatrix::from_fn(4, 4, |i, j| m[i][j] * 0.5)
}

/// The diagonal qubit map as an affine form.
pub fn qubit_diagonal_map(lambda: [f64; 3], t: [f64; 3]) -> AffineRep {
    AffineRep {
        dim: 2,
        t_matrix: DMatrix::from_diagonal(&DVector::from_column_slice(&lambda)),
        t_vector: DVector::from_column_slice(&t),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitCpReport {
    pub cp: bool,
    pub choi: ComplexMatrix,
    pub min_eigenvalue: f64,
    /// Same quantity from the affine form through the general Choi construction.
    pub affine_route_min_eigenvalue: f64,
    /// The three textbook inequalities as written; diagnostic only, the third
    /// one is known to be misprinted.
    pub inequalities: [bool; 3],
}

pub fn qubit_cp_check(lambda: [f64; 3], t: [f64; 3], tol: f64) -> QubitCpReport {
    let choi = qubit_diagonal_choi(lambda, t);
    let min_eigenvalue = linalg::min_eigenvalue(&choi);
    let affine_route_min_eigenvalue = linalg::min_eigenvalue(&qubit_diagonal_map(lambda, t).to_choi().phi());
    let [l1, l2, l3] = lambda;
    let [t1, t2, t3] = t;
    let ln2 = l1 * l1 + l2 * l2 + l3 * l3;
    let tn2 = t1 * t1 + t2 * t2 + t3 * t3;
    let third_rhs = 4.0
        * (l1 * l1 * (t1 * t1 + t2 * t2) + l2 * l2 * (t2 * t2 + t3 * t3) + l3 * l3 * (t3 * t3 + t1 * t1)
            - 2.0 * l1 * l2 * l3);
    let inequalities = [
        (l1 + l2).powi(2) <= (1.0 + l3).powi(2) - t3 * t3 + tol,
        (l1 - l2).powi(2) <= (1.0 - l3).powi(2) - t3 * t3 + tol,
        (1.0 - ln2 - tn2).powi(2) + tol >= third_rhs,
    ];
    QubitCpReport { cp: min_eigenvalue >= -tol, choi, min_eigenvalue, affine_route_min_eigenvalue, inequalities }
}

/// Bloch rotation of `σ_U`: `R_jk = ½ tr[σ_j U σ_k U†]`.
pub fn bloch_rotation(u: &ComplexMatrix) -> Matrix3<f64> {
    let p = linalg::paulis();
    Matrix3::from_fn(|j, k| 0.5 * (&p[j + 1] * u * &p[k + 1] * u.adjoint()).trace().re)
}

/// A qubit unitary whose Bloch rotation is `rot` (which must be special orthogonal).
pub fn rotation_unitary(rot: &Matrix3<f64>) -> ComplexMatrix {
    let m = rot;
    let tr = m.trace();
    let (w, x, y, z);
    if tr > 0.0 {
        let s = 2.0 * (1.0 + tr).sqrt();
        w = s / 4.0;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
        let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = s / 4.0;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if m[(1, 1)] > m[(2, 2)] {
        let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = s / 4.0;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = s / 4.0;
    }
    let [_, sx, sy, sz] = linalg::paulis();
    identity(2) * r(w) - (sx * r(x) + sy * r(y) + sz * r(z)) * linalg::I
}

/// `E = σ_U ∘ D ∘ σ_V` with `D` diagonal in the Bloch picture.
#[derive(Debug, Clone)]
pub struct QubitNormalForm {
    pub u: ComplexMatrix,
    pub lambda: [f64; 3],
    pub t: [f64; 3],
    pub v: ComplexMatrix,
}

impl QubitNormalForm {
    pub fn to_choi(&self) -> ChoiMatrix {
        let d = qubit_diagonal_map(self.lambda, self.t);
        ChoiMatrix::from_map(2, 2, |x| {
            let inner = d.apply(&(&self.v * x * self.v.adjoint())).expect("qubit input");
            &self.u * inner * self.u.adjoint()
        })
    }
}

pub fn qubit_normal_form(ch: &impl LinearMap, tol: f64) -> Result<QubitNormalForm> {
    if ch.in_dim() != 2 || ch.out_dim() != 2 {
        return Err(Error::Dimension("normal form is defined for qubit channels".into()));
    }
    let aff = to_affine(ch, tol)?;
    let t = Matrix3::from_fn(|j, k| aff.t_matrix[(j, k)]);
    let tau = Vector3::new(aff.t_vector[0], aff.t_vector[1], aff.t_vector[2]);
    let svd = t.svd(true, true);
    let mut q1 = svd.u.expect("requested U");
    let mut q2 = svd.v_t.expect("requested V");
    let mut sign = 1.0;
    if q1.determinant() < 0.0 {
        q1 = -q1;
        sign = -sign;
    }
    if q2.determinant() < 0.0 {
        q2 = -q2;
        sign = -sign;
    }
    let mu = svd.singular_values;
    let lambda = [sign * mu[0], sign * mu[1], sign * mu[2]];
    let shift = q1.transpose() * tau;
    Ok(QubitNormalForm {
        u: rotation_unitary(&q1),
        lambda,
        t: [shift[0], shift[1], shift[2]],
        v: rotation_unitary(&q2),
    })
}

/// Settings of the pure-state maximizer used by [`sup_distance`].
#[derive(Debug, Clone, Copy)]
pub struct Optimizer {
    pub restarts: usize,
    pub min_step: f64,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer { restarts: 64, min_step: 1e-7 }
    }
}

#[derive(Debug, Clone)]
pub struct SupDistance {
    pub value: f64,
    pub argmax: ComplexMatrix,
}

/// Maximize `f` over unit kets in `C^d` by random restarts and coordinate
/// pattern search on the real and imaginary parts.
pub(crate) fn maximize_over_kets<R: Rng + ?Sized>(
    d: usize,
    opt: Optimizer,
    rng: &mut R,
    f: impl Fn(&ComplexMatrix) -> f64,
) -> (f64, ComplexMatrix) {
    let mut best = (f64::NEG_INFINITY, linalg::basis_ket(d, 0));
    for _ in 0..opt.restarts.max(1) {
        let mut x = random::ket(d, rng);
        let mut fx = f(&x);
        let mut step = 0.25;
        while step > opt.min_step {
            let mut improved = false;
            for k in 0..2 * d {
                for sgn in [1.0, -1.0] {
                    let mut y = x.clone();
                    if k < d {
                        y[(k, 0)].re += sgn * step;
                    } else {
                        y[(k - d, 0)].im += sgn * step;
                    }
                    let y = linalg::normalized(&y);
                    let fy = f(&y);
                    if fy > fx {
                        x = y;
                        fx = fy;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if fx > best.0 {
            best = (fx, x);
        }
    }
    best
}

/// `sup_ρ ½‖E1(ρ) − E2(ρ)‖_tr`, attained on pure states.
pub fn sup_distance<R: Rng + ?Sized>(
    ch1: &impl LinearMap,
    ch2: &impl LinearMap,
    opt: Optimizer,
    rng: &mut R,
) -> Result<SupDistance> {
    if ch1.in_dim() != ch2.in_dim() || ch1.out_dim() != ch2.out_dim() {
        return Err(Error::Dimension("channels of different shapes".into()));
    }
    let d = ch1.in_dim();
    let diff = ChoiMatrix { matrix: ch1.to_choi().matrix - ch2.to_choi().matrix, in_dim: d, out_dim: ch1.out_dim() };
    let images: Vec<Vec<ComplexMatrix>> = (0..d).map(|j| (0..d).map(|k| diff.basis_image(j, k)).collect()).collect();
    let out = ch1.out_dim();
    let objective = |psi: &ComplexMatrix| {
        let mut m = zeros(out, out);
        for j in 0..d {
            for k in 0..d {
                m += &images[j][k] * (psi[(j, 0)] * psi[(k, 0)].conj());
            }
        }
        trace_distance_matrices(&m, &zeros(out, out))
    };
    let (value, argmax) = maximize_over_kets(d, opt, rng, objective);
    Ok(SupDistance { value, argmax })
}

/// Trace distance between the normalized Choi matrices.
pub fn choi_distance(ch1: &impl LinearMap, ch2: &impl LinearMap) -> Result<f64> {
    if ch1.in_dim() != ch2.in_dim() || ch1.out_dim() != ch2.out_dim() {
        return Err(Error::Dimension("channels of different shapes".into()));
    }
    Ok(trace_distance_matrices(&ch1.to_choi().matrix, &ch2.to_choi().matrix))
}

/// Fidelity `tr√(√Ω1 Ω2 √Ω1)` of the normalized Choi matrices; for unitary
/// channels this is `|tr[U1†U2]|/d`.
pub fn process_fidelity(ch1: &impl LinearMap, ch2: &impl LinearMap) -> Result<f64> {
    if ch1.in_dim() != ch2.in_dim() || ch1.out_dim() != ch2.out_dim() {
        return Err(Error::Dimension("channels of different shapes".into()));
    }
    Ok(crate::discrimination::fidelity_matrices(&ch1.to_choi().matrix, &ch2.to_choi().matrix))
}

/// Iterate `ρ ↦ E(ρ)` until successive iterates are within `tol` in trace norm.
pub fn fixed_point(ch: &impl LinearMap, rho0: &State, max_iter: usize, tol: f64) -> Result<State> {
    if ch.in_dim() != ch.out_dim() {
        return Err(Error::Dimension("fixed points need equal input and output dimension".into()));
    }
    let mut rho = rho0.matrix().clone();
    for _ in 0..=max_iter {
        let next = ch.apply(&rho)?;
        let gap = 2.0 * trace_distance_matrices(&next, &rho);
        if gap < tol {
            return State::with_tol(next, 1e-7);
        }
        rho = next;
    }
    Err(Error::NoConvergence(max_iter))
}

/// Largest sampled ratio `‖E(ρ) − E(σ)‖_tr / ‖ρ − σ‖_tr` over pure pairs; a
/// lower bound on the contraction constant.
pub fn contraction_factor<R: Rng + ?Sized>(ch: &impl LinearMap, samples: usize, rng: &mut R) -> Result<f64> {
    let d = ch.in_dim();
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let a = random::pure_state(d, rng);
        let b = random::pure_state(d, rng);
        let den = trace_distance_matrices(&a, &b);
        if den < 1e-6 {
            continue;
        }
        let num = trace_distance_matrices(&ch.apply(&a)?, &ch.apply(&b)?);
        best = best.max(num / den);
    }
    Ok(best)
}

/// Every Kraus operator commutes with every basis projector.
pub fn is_pure_decoherence(ch: &KrausChannel, basis: &[ComplexMatrix], tol: f64) -> Result<bool> {
    crate::states::check_orthonormal(basis, 1e-9)?;
    if basis.len() != ch.in_dim || ch.in_dim != ch.out_dim {
        return Err(Error::Dimension("basis must span the channel's space".into()));
    }
    let projectors: Vec<_> = basis.iter().map(projector).collect();
    Ok(ch.kraus.iter().all(|a| projectors.iter().all(|p| max_abs(&(a * p - p * a)) <= tol)))
}

/// `E(ρ) = Σ_n tr[ρ F_n] ξ_n`.
#[derive(Debug, Clone)]
pub struct MeasurePrepare {
    pub effects: Vec<ComplexMatrix>,
    pub states: Vec<ComplexMatrix>,
}

impl LinearMap for MeasurePrepare {
    fn in_dim(&self) -> usize {
        self.effects[0].nrows()
    }

    fn out_dim(&self) -> usize {
        self.states[0].nrows()
    }

    fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        check_input(x, self.in_dim())?;
        let out = self.out_dim();
        Ok(self.effects.iter().zip(&self.states).fold(zeros(out, out), |acc, (f, xi)| acc + xi * (x * f).trace()))
    }
}

#[derive(Debug, Clone)]
pub enum EntanglementBreaking {
    Yes(MeasurePrepare),
    No { min_pt_eigenvalue: f64 },
    Inconclusive,
}

/// Decided from the partial transpose of the Choi matrix: NPPT means no; for
/// qubit channels PPT means yes and the measure-and-prepare form is built
/// from a product decomposition of the Choi state.
pub fn is_entanglement_breaking(ch: &impl LinearMap, tol: f64) -> EntanglementBreaking {
    let choi = ch.to_choi();
    let (d_in, d_out) = (choi.in_dim, choi.out_dim);
    let omega = choi.matrix();
    let out_marginal = linalg::partial_trace(omega, d_out, d_in, Side::B).expect("fixed dims");
    let in_marginal = choi.input_marginal();
    if max_abs(&(tensor(&out_marginal, &in_marginal) - omega)) <= tol {
        return EntanglementBreaking::Yes(MeasurePrepare {
            effects: vec![in_marginal.transpose() * r(d_in as f64)],
            states: vec![out_marginal],
        });
    }
    let pt = linalg::partial_transpose(omega, d_out, d_in, Side::B).expect("fixed dims");
    let min_pt_eigenvalue = linalg::min_eigenvalue(&pt);
    if min_pt_eigenvalue < -tol {
        return EntanglementBreaking::No { min_pt_eigenvalue };
    }
    if d_in != 2 || d_out != 2 {
        return EntanglementBreaking::Inconclusive;
    }
    match entanglement::two_qubit_product_decomposition(omega, tol.max(1e-9)) {
        Some(terms) => {
            let mut effects = Vec::new();
            let mut states = Vec::new();
            for (p, a, b) in terms {
                // Ω = Σ p |a⟩⟨a| ⊗ |b⟩⟨b| gives E(ρ) = Σ d p ⟨b̄|ρ|b̄⟩ |a⟩⟨a|.
                effects.push(projector(&b.map(|z| z.conj())) * r(d_in as f64 * p));
                states.push(projector(&a));
            }
            EntanglementBreaking::Yes(MeasurePrepare { effects, states })
        }
        None => EntanglementBreaking::Inconclusive,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::maximally_entangled_ket;
    use crate::linalg::{inner, paulis, real_ket};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        a.shape() == b.shape() && max_abs(&(a - b)) <= tol
    }

    fn weyl(d: usize) -> Vec<ComplexMatrix> {
        let mut out = Vec::new();
        for shift in 0..d {
            for mult in 0..d {
                out.push(ComplexMatrix::from_fn(d, d, |row, col| {
                    if (col + d - shift) % d == row {
                        C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (mult * col) as f64 / d as f64)
                    } else {
                        C64::new(0.0, 0.0)
                    }
                }));
            }
        }
        out
    }

    #[test]
    fn apply_examples() {
        let mut g = rng(1);
        let rho = random::state(3, &mut g);
        assert!(close(&KrausChannel::identity(3).apply(&rho).unwrap(), &rho, 1e-12));

        // E_F(T) = tr[T]/tr[F] F for an unnormalized positive F.
        let f = random::state(3, &mut g) * r(2.5);
        let ef = contraction(&State::new(&f / r(2.5)).unwrap());
        let t = random::ginibre(3, 3, &mut g);
        assert!(close(&ef.apply(&t).unwrap(), &(&f * (t.trace() / f.trace())), 1e-10));

        let full = depolarizing(3, 1.0).unwrap();
        assert!(close(&full.apply(&rho).unwrap(), &(identity(3) / r(3.0)), 1e-12));
        assert!(full.apply(&identity(2)).is_err());
    }

    #[test]
    fn certify_examples() {
        let id = KrausChannel::identity(2).certify(1e-9);
        assert!(id.cp && id.tp && id.unital && id.trace_decreasing);

        for d in [2, 3] {
            let t = transposition(d).certify(1e-9);
            assert!(!t.cp && t.tp && t.unital);
            assert!((t.choi_min_eigenvalue + 1.0 / d as f64).abs() < 1e-12);
        }
        // d·Ω of the transposition is the swap matrix.
        let printed = real_ket(&[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.]);
        let printed = ComplexMatrix::from_fn(4, 4, |i, j| printed[(i * 4 + j, 0)]);
        assert!(close(transposition(2).matrix(), &(printed / r(2.0)), 1e-15));

        for p in [0.0, 0.3, 1.0] {
            let c = depolarizing(2, p).unwrap().certify(1e-9);
            assert!(c.cp && c.tp && c.unital);
            // Choi spectrum: (1 − 3p/4)/2 · 2 on ψ+ and p/4 elsewhere.
            let ev = linalg::eigvalsh(depolarizing(2, p).unwrap().to_choi().matrix());
            assert!((ev[0] - (1.0 - 0.75 * p)).abs() < 1e-12 && (ev[3] - p / 4.0).abs() < 1e-12);
        }

        let lossy = KrausChannel::new(vec![identity(2) * r(0.5)]).unwrap().certify(1e-9);
        assert!(lossy.cp && !lossy.tp && lossy.trace_decreasing);
        let gain = KrausChannel::new(vec![identity(2) * r(1.5)]).unwrap().certify(1e-9);
        assert!(!gain.tp && !gain.trace_decreasing);
        assert!(Channel::Choi(transposition(2)).certify(1e-9).choi_min_eigenvalue < 0.0);
    }

    #[test]
    fn choi_examples() {
        let psi = maximally_entangled_ket(3);
        assert!(close(KrausChannel::identity(3).to_choi().matrix(), &projector(&psi), 1e-14));

        let mut g = rng(2);
        let u = random::haar_unitary(3, &mut g);
        let omega = KrausChannel::unitary(&u).unwrap().to_choi();
        let ket = tensor(&u, &identity(3)) * &psi;
        assert!(close(omega.matrix(), &projector(&ket), 1e-12));
        assert_eq!(linalg::rank(omega.matrix(), 1e-9), 1);

        for n in 1..=4 {
            let ch = KrausChannel::random(3, 3, n, &mut g);
            let choi = ch.to_choi();
            let back = choi.to_kraus(1e-10).unwrap();
            assert_eq!(back.len(), n);
            assert_eq!(back.len(), linalg::rank(choi.matrix(), 1e-9));
            for _ in 0..5 {
                let rho = random::state(3, &mut g);
                let a = ch.apply(&rho).unwrap();
                assert!(close(&a, &back.apply(&rho).unwrap(), 1e-8));
                assert!(close(&a, &choi.apply(&rho).unwrap(), 1e-8));
            }
        }
        assert!(matches!(transposition(2).to_kraus(1e-9), Err(Error::NotCompletelyPositive(_))));
    }

    #[test]
    fn choi_of_rectangular_maps() {
        let mut g = rng(3);
        let ch = KrausChannel::random(2, 3, 2, &mut g);
        let choi = ch.to_choi();
        assert!(choi.certify(1e-9).tp);
        let x = random::ginibre(2, 2, &mut g);
        assert!(close(&ch.apply(&x).unwrap(), &choi.apply(&x).unwrap(), 1e-10));
        let from_map = ChoiMatrix::from_map(2, 3, |y| ch.apply(y).unwrap());
        assert!(close(from_map.matrix(), choi.matrix(), 1e-12));
        // tr_1 Ω = (ΣA†A)^T / d.
        let lossy = KrausChannel::new(vec![random::ginibre(3, 2, &mut g)]).unwrap();
        let marginal = lossy.to_choi().input_marginal();
        assert!(close(&marginal, &(lossy.kraus_sum().transpose() / r(2.0)), 1e-12));
    }

    #[test]
    fn chi_examples() {
        let basis = pauli_operator_basis();
        let chi = to_chi(&KrausChannel::identity(2), &basis).unwrap();
        let mut want = zeros(4, 4);
        want[(0, 0)] = r(2.0);
        assert!(close(chi.matrix(), &want, 1e-12));

        let q = [0.4, 0.3, 0.2, 0.1];
        let chi = to_chi(&pauli(q).unwrap(), &basis).unwrap();
        let want = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(4, q.iter().map(|x| r(2.0 * x))));
        assert!(close(chi.matrix(), &want, 1e-12));

        let mut g = rng(4);
        for d in [2, 3] {
            let basis = gell_mann_operator_basis(d);
            let ch = KrausChannel::random(d, d, 3, &mut g);
            let chi = to_chi(&ch, &basis).unwrap();
            assert!((chi.matrix().trace().re - d as f64).abs() < 1e-10);
            assert!(chi.matrix().is_psd(1e-10));
            // Independent route: χ_rs = Σ_k a_kr a_ks^* with a_kr = tr[E_r† A_k].
            let mut oracle = zeros(d * d, d * d);
            for a in ch.kraus() {
                let coeff: Vec<C64> = basis.iter().map(|e| (e.adjoint() * a).trace()).collect();
                for i in 0..d * d {
                    for j in 0..d * d {
                        oracle[(i, j)] += coeff[i] * coeff[j].conj();
                    }
                }
            }
            assert!(close(chi.matrix(), &oracle, 1e-10));
            let rho = random::state(d, &mut g);
            assert!(close(&chi.apply(&rho).unwrap(), &ch.apply(&rho).unwrap(), 1e-10));
            assert!(close(chi.to_choi().matrix(), ch.to_choi().matrix(), 1e-10));
        }
        let bad: Vec<_> = paulis().into_iter().collect();
        assert!(to_chi(&KrausChannel::identity(2), &bad).is_err());
    }

    #[test]
    fn affine_examples() {
        let mut g = rng(5);
        let u = random::haar_unitary(2, &mut g);
        let aff = to_affine(&KrausChannel::unitary(&u).unwrap(), 1e-9).unwrap();
        assert!(aff.t_vector.norm() < 1e-12);
        let t = &aff.t_matrix;
        assert!((t.transpose() * t - DMatrix::identity(3, 3)).abs().max() < 1e-12);
        assert!((t.determinant() - 1.0).abs() < 1e-12);

        let p = 0.35;
        let aff = to_affine(&depolarizing(2, p).unwrap(), 1e-9).unwrap();
        assert!((&aff.t_matrix - DMatrix::identity(3, 3) * (1.0 - p)).abs().max() < 1e-12);
        assert!(aff.t_vector.norm() < 1e-12);

        let aff = to_affine(&contraction(&State::maximally_mixed(3)), 1e-9).unwrap();
        assert!(aff.t_matrix.abs().max() < 1e-12 && aff.t_vector.norm() < 1e-12);

        for d in [2, 3] {
            let ch = KrausChannel::random(d, d, 2, &mut g);
            let aff = to_affine(&ch, 1e-9).unwrap();
            for _ in 0..5 {
                let rho = State::new(random::state(d, &mut g)).unwrap();
                let b = crate::states::to_bloch(&rho);
                let image = aff.apply_bloch(&b.components).unwrap();
                let via_bloch = crate::states::bloch_matrix(&crate::states::BlochVector { dim: d, components: image }).unwrap();
                assert!(close(&via_bloch, &ch.apply(rho.matrix()).unwrap(), 1e-10));
            }
            assert!(close(aff.to_choi().matrix(), ch.to_choi().matrix(), 1e-10));
        }
        let lossy = KrausChannel::new(vec![identity(2) * r(0.5)]).unwrap();
        assert!(matches!(to_affine(&lossy, 1e-9), Err(Error::NotTracePreserving(_))));
    }

    #[test]
    fn kraus_equivalence() {
        let mut g = rng(6);
        let ch = KrausChannel::random(2, 2, 3, &mut g);
        let mut ops = ch.kraus().to_vec();
        ops.reverse();
        ops.push(zeros(2, 2));
        let shuffled = KrausChannel::new(ops).unwrap();
        assert!(kraus_equivalent(&ch, &shuffled, 1e-9));

        let u = random::haar_unitary(3, &mut g);
        let mixed: Vec<_> = (0..3)
            .map(|j| (0..3).fold(zeros(2, 2), |acc, k| acc + &ch.kraus()[k] * u[(j, k)]))
            .collect();
        let mixed = KrausChannel::new(mixed).unwrap();
        assert!(kraus_equivalent(&ch, &mixed, 1e-9));
        let w = kraus_mixing(&ch, &mixed, 1e-9).unwrap();
        assert!(close(&w, &u, 1e-8));
        assert!((w.adjoint() * &w).is_projection(1e-8));

        let half = depolarizing(2, 0.5).unwrap();
        assert!(!kraus_equivalent(&KrausChannel::identity(2), &half, 1e-9));
        assert!(kraus_mixing(&KrausChannel::identity(2), &half, 1e-9).is_none());
    }

    #[test]
    fn stinespring_examples() {
        let mut g = rng(7);
        let u = random::haar_unitary(2, &mut g);
        let s = stinespring(&KrausChannel::unitary(&u).unwrap(), 1e-9).unwrap();
        assert_eq!(s.env_dim, 1);

        let full = depolarizing(2, 1.0).unwrap();
        assert_eq!(full.len(), 4);
        let s = stinespring(&full, 1e-9).unwrap();
        assert_eq!(s.env_dim, 4);
        assert!(s.unitary.is_unitary(1e-12));
        for _ in 0..5 {
            let rho = random::state(2, &mut g);
            assert!(close(&s.apply(&rho).unwrap(), &full.apply(&rho).unwrap(), 1e-9));
        }

        for n in 1..4 {
            let ch = KrausChannel::random(3, 3, n, &mut g);
            let s = stinespring(&ch, 1e-9).unwrap();
            assert!(close(&(s.isometry.adjoint() * &s.isometry), &identity(3), 1e-12));
            let rho = random::state(3, &mut g);
            assert!(close(&s.apply(&rho).unwrap(), &ch.apply(&rho).unwrap(), 1e-10));
        }
        let lossy = KrausChannel::new(vec![identity(2) * r(0.5)]).unwrap();
        assert!(stinespring(&lossy, 1e-9).is_err());
    }

    #[test]
    fn conjugate_examples() {
        let mut g = rng(8);
        let u = random::haar_unitary(3, &mut g);
        let conj = conjugate(&KrausChannel::unitary(&u).unwrap(), 1e-9).unwrap();
        let a = conj.apply(&random::state(3, &mut g)).unwrap();
        let b = conj.apply(&random::state(3, &mut g)).unwrap();
        assert!(close(&a, &b, 1e-12));
        assert!(a.is_projection(1e-12));

        let p = [0.5, 0.3, 0.2];
        let terms: Vec<_> = p.iter().map(|&w| (w, random::haar_unitary(2, &mut g))).collect();
        let dil = random_unitary_dilation(&terms).unwrap();
        let rc = random_unitary(&terms).unwrap();
        let diag = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, p.iter().map(|&x| r(x))));
        for _ in 0..5 {
            let rho = random::state(2, &mut g);
            assert!(close(&dil.environment_output(&rho).unwrap(), &diag, 1e-12));
            assert!(close(&dil.system_output(&rho).unwrap(), &rc.apply(&rho).unwrap(), 1e-12));
        }

        for _ in 0..5 {
            let ch = KrausChannel::random(2, 2, 3, &mut g);
            let conj = conjugate(&ch, 1e-9).unwrap();
            let cert = conj.certify(1e-9);
            assert!(cert.cp && cert.tp);
            let s = stinespring(&ch, 1e-9).unwrap();
            let rho = random::state(2, &mut g);
            assert!(close(&conj.apply(&rho).unwrap(), &s.environment_output(&rho).unwrap(), 1e-10));
        }
    }

    #[test]
    fn dual_examples() {
        let mut g = rng(9);
        let f = random::state(3, &mut g);
        let ef = contraction(&State::new(f.clone()).unwrap());
        let a = random::hermitian(3, &mut g);
        let want = identity(3) * (&f * &a).trace();
        assert!(close(&ef.heisenberg_dual().apply(&a).unwrap(), &want, 1e-10));
        assert!(close(&ef.to_choi().heisenberg_dual().apply(&a).unwrap(), &want, 1e-10));

        let id = KrausChannel::identity(3);
        assert!(close(id.heisenberg_dual().to_choi().matrix(), id.to_choi().matrix(), 1e-14));

        for tp in [true, false] {
            let mut ch = KrausChannel::random(3, 2, 2, &mut g);
            if !tp {
                ch = KrausChannel::new(ch.kraus().iter().map(|a| a * r(0.9)).collect()).unwrap();
            }
            assert_eq!(ch.certify(1e-9).tp, tp);
            assert_eq!(ch.heisenberg_dual().certify(1e-9).unital, tp);
            assert_eq!(ch.to_choi().heisenberg_dual().certify(1e-9).unital, tp);
            let t = random::ginibre(3, 3, &mut g);
            let e = random::ginibre(2, 2, &mut g);
            let lhs = (ch.apply(&t).unwrap() * &e).trace();
            let rhs = (&t * ch.heisenberg_dual().apply(&e).unwrap()).trace();
            let rhs2 = (&t * ch.to_choi().heisenberg_dual().apply(&e).unwrap()).trace();
            assert!((lhs - rhs).norm() < 1e-10 && (lhs - rhs2).norm() < 1e-10);
        }
    }

    #[test]
    fn constructor_examples() {
        for p in [0.0, 0.2, 0.9, 1.0] {
            let a = pauli([1.0 - 0.75 * p, p / 4.0, p / 4.0, p / 4.0]).unwrap();
            assert!(kraus_equivalent(&a, &depolarizing(2, p).unwrap(), 1e-12));
        }
        for d in [2, 3, 4] {
            let terms: Vec<_> = weyl(d).into_iter().map(|u| (1.0 / (d * d) as f64, u)).collect();
            let avg = random_unitary(&terms).unwrap();
            assert!(kraus_equivalent(&avg, &contraction(&State::maximally_mixed(d)), 1e-12));
        }
        let eta = 0.8;
        let pd = phase_damping(eta, [0.0, 0.0, 1.0]).unwrap();
        let aff = to_affine(&pd, 1e-9).unwrap();
        let lam = 2.0 * eta - 1.0;
        let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![lam, lam, 1.0]));
        assert!((&aff.t_matrix - want).abs().max() < 1e-12);

        assert!(depolarizing(2, 1.2).is_err());
        assert!(pauli([0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(phase_damping(0.5, [1.0, 1.0, 0.0]).is_err());
        assert!(random_unitary(&[(1.0, identity(2) * r(2.0))]).is_err());
    }

    #[test]
    fn qubit_cp_examples() {
        let z = [0.0; 3];
        assert!(qubit_cp_check([1.0; 3], z, 1e-9).cp);
        let not = qubit_cp_check([-1.0; 3], z, 1e-9);
        assert!(!not.cp && not.min_eigenvalue < -0.5);
        assert!(qubit_cp_check([-1.0 / 3.0; 3], z, 1e-9).cp);
        assert!(!qubit_cp_check([-0.4; 3], z, 1e-9).cp);
    }

    #[test]
    fn qubit_cp_matrix_matches_general_choi() {
        let mut g = rng(10);
        for _ in 0..50 {
            let lambda = [g.random_range(-1.0..1.0), g.random_range(-1.0..1.0), g.random_range(-1.0..1.0)];
            let t = [g.random_range(-0.5..0.5), g.random_range(-0.5..0.5), g.random_range(-0.5..0.5)];
            let rep = qubit_cp_check(lambda, t, 1e-9);
            assert!((rep.min_eigenvalue - rep.affine_route_min_eigenvalue).abs() < 1e-12);
            // The printed matrix is the general Φ with the two factors swapped.
            let phi = qubit_diagonal_map(lambda, t).to_choi().phi();
            let v = linalg::swap_operator(2);
            assert!(close(&rep.choi, &(&v * phi * &v), 1e-12));
        }
    }

    #[test]
    fn rotation_unitary_round_trip() {
        let mut g = rng(11);
        for _ in 0..20 {
            let u = random::haar_unitary(2, &mut g);
            let rot = bloch_rotation(&u);
            let back = rotation_unitary(&rot);
            assert!((bloch_rotation(&back) - rot).abs().max() < 1e-10);
        }
        let half_turn = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        assert!((bloch_rotation(&rotation_unitary(&half_turn)) - half_turn).abs().max() < 1e-12);
    }

    #[test]
    fn normal_form_examples() {
        let mut g = rng(12);
        let u = random::haar_unitary(2, &mut g);
        let nf = qubit_normal_form(&KrausChannel::unitary(&u).unwrap(), 1e-9).unwrap();
        assert!(nf.lambda.iter().all(|l| (l - 1.0).abs() < 1e-10));
        assert!(nf.t.iter().all(|t| t.abs() < 1e-10));

        let p = 0.4;
        let nf = qubit_normal_form(&depolarizing(2, p).unwrap(), 1e-9).unwrap();
        assert!(nf.lambda.iter().all(|l| (l.abs() - (1.0 - p)).abs() < 1e-10));
        assert!((nf.lambda.iter().product::<f64>() - (1.0 - p).powi(3)).abs() < 1e-10);

        for _ in 0..20 {
            let ch = KrausChannel::random(2, 2, 1 + g.random_range(0..4), &mut g);
            let nf = qubit_normal_form(&ch, 1e-9).unwrap();
            assert!(close(nf.to_choi().matrix(), ch.to_choi().matrix(), 1e-8));
            let aff = to_affine(&ch, 1e-9).unwrap();
            let det = aff.t_matrix.determinant();
            assert!((nf.lambda.iter().product::<f64>() - det).abs() < 1e-10);
            let mut sv: Vec<f64> = aff.t_matrix.clone().svd(false, false).singular_values.iter().copied().collect();
            let mut abs: Vec<f64> = nf.lambda.iter().map(|l| l.abs()).collect();
            sv.sort_by(f64::total_cmp);
            abs.sort_by(f64::total_cmp);
            assert!(sv.iter().zip(&abs).all(|(a, b)| (a - b).abs() < 1e-10));
            assert!(qubit_cp_check(nf.lambda, nf.t, 1e-8).cp);
        }
        assert!(qubit_normal_form(&KrausChannel::identity(3), 1e-9).is_err());
    }

    #[test]
    fn sup_distance_examples() {
        let mut g = rng(13);
        for d in [2, 3] {
            let u = random::haar_unitary(d, &mut g);
            let a0 = contraction(&State::maximally_mixed(d));
            let v = sup_distance(&KrausChannel::unitary(&u).unwrap(), &a0, Optimizer { restarts: 4, ..Default::default() }, &mut g).unwrap();
            assert!((v.value - (d as f64 - 1.0) / d as f64).abs() < 1e-9);
        }
        let ch = KrausChannel::random(2, 2, 2, &mut g);
        let v = sup_distance(&ch, &ch, Optimizer { restarts: 2, ..Default::default() }, &mut g).unwrap();
        assert!(v.value.abs() < 1e-12);

        let psi = random::ket(3, &mut g);
        let to_pure = contraction(&State::pure(&psi).unwrap());
        let v = sup_distance(&to_pure, &KrausChannel::identity(3), Optimizer::default(), &mut g).unwrap();
        assert!((v.value - 1.0).abs() < 1e-3);
        assert!(inner(&psi, &v.argmax).norm() < 1e-2);
    }

    #[test]
    fn fixed_point_examples() {
        let mut g = rng(14);
        let rho0 = State::new(random::state(3, &mut g)).unwrap();
        let fp = fixed_point(&depolarizing(3, 0.3).unwrap(), &rho0, 500, 1e-12).unwrap();
        assert!(close(fp.matrix(), &(identity(3) / r(3.0)), 1e-11));

        let u = random::haar_unitary(3, &mut g);
        let e = linalg::eigh(&linalg::hermitian_part(&(&u + u.adjoint()))).unwrap();
        let eig = State::pure(&e.vector(0)).unwrap();
        let fp = fixed_point(&KrausChannel::unitary(&u).unwrap(), &eig, 3, 1e-10).unwrap();
        assert!(close(fp.matrix(), eig.matrix(), 1e-10));

        let xi = State::new(random::state(3, &mut g)).unwrap();
        let fp = fixed_point(&contraction(&xi), &rho0, 1, 1e-12).unwrap();
        assert!(close(fp.matrix(), xi.matrix(), 1e-12));

        let flip = KrausChannel::unitary(&paulis()[1]).unwrap();
        let up = State::qubit([0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(fixed_point(&flip, &up, 50, 1e-9), Err(Error::NoConvergence(50))));
    }

    #[test]
    fn contraction_factor_examples() {
        let mut g = rng(15);
        for p in [0.1, 0.5, 0.9] {
            let k = contraction_factor(&depolarizing(3, p).unwrap(), 20, &mut g).unwrap();
            assert!((k - (1.0 - p)).abs() < 1e-10);
        }
        let u = random::haar_unitary(2, &mut g);
        let k = contraction_factor(&KrausChannel::unitary(&u).unwrap(), 20, &mut g).unwrap();
        assert!((k - 1.0).abs() < 1e-10);

        for n in [1usize, 3, 10] {
            let w = 1.0 / (2 * n) as f64;
            let mix = ChoiMatrix::new(
                KrausChannel::unitary(&u).unwrap().to_choi().matrix() * r(1.0 - w)
                    + contraction(&State::qubit([0.0, 0.0, 1.0]).unwrap()).to_choi().matrix() * r(w),
                2,
                2,
            )
            .unwrap();
            let k = contraction_factor(&mix, 200, &mut g).unwrap();
            assert!(k <= 1.0 - w + 1e-10 && k < 1.0);
        }
    }

    #[test]
    fn pure_decoherence_examples() {
        let z: Vec<_> = (0..2).map(|j| linalg::basis_ket(2, j)).collect();
        let pd = phase_damping(0.7, [0.0, 0.0, 1.0]).unwrap();
        assert!(is_pure_decoherence(&pd, &z, 1e-12).unwrap());
        for a in pd.kraus() {
            for b in pd.kraus() {
                assert!(max_abs(&(a * b - b * a)) < 1e-12);
            }
        }
        assert!(!is_pure_decoherence(&depolarizing(2, 0.2).unwrap(), &z, 1e-9).unwrap());
        let d = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::from_polar(1.0, 0.3), C64::from_polar(1.0, -1.1)]));
        assert!(is_pure_decoherence(&KrausChannel::unitary(&d).unwrap(), &z, 1e-12).unwrap());
        let x: Vec<_> = [[1.0, 1.0], [1.0, -1.0]].iter().map(|v| real_ket(v) / r(2f64.sqrt())).collect();
        assert!(is_pure_decoherence(&phase_damping(0.7, [1.0, 0.0, 0.0]).unwrap(), &x, 1e-12).unwrap());
        assert!(!is_pure_decoherence(&pd, &x, 1e-9).unwrap());
    }

    fn check_measure_prepare(mp: &MeasurePrepare, ch: &impl LinearMap) {
        let d = ch.in_dim();
        let sum = mp.effects.iter().fold(zeros(d, d), |acc, f| acc + f);
        assert!(close(&sum, &identity(d), 1e-8));
        assert!(mp.effects.iter().all(|f| f.is_psd(1e-10)));
        assert!(mp.states.iter().all(|s| (s.trace().re - 1.0).abs() < 1e-10 && s.is_psd(1e-10)));
        assert!(close(mp.to_choi().matrix(), ch.to_choi().matrix(), 1e-8));
    }

    #[test]
    fn entanglement_breaking_examples() {
        let mut g = rng(16);
        let xi = State::new(random::state(3, &mut g)).unwrap();
        let con = contraction(&xi);
        match is_entanglement_breaking(&con, 1e-9) {
            EntanglementBreaking::Yes(mp) => {
                assert_eq!(mp.effects.len(), 1);
                assert!(close(&mp.effects[0], &identity(3), 1e-10));
                check_measure_prepare(&mp, &con);
            }
            other => panic!("{other:?}"),
        }
        match is_entanglement_breaking(&KrausChannel::identity(2), 1e-9) {
            EntanglementBreaking::No { min_pt_eigenvalue } => assert!((min_pt_eigenvalue + 0.5).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        for p in [0.67, 0.8, 1.0] {
            let ch = depolarizing(2, p).unwrap();
            match is_entanglement_breaking(&ch, 1e-9) {
                EntanglementBreaking::Yes(mp) => check_measure_prepare(&mp, &ch),
                other => panic!("p={p}: {other:?}"),
            }
        }
        for p in [0.0, 0.3, 0.66] {
            assert!(matches!(is_entanglement_breaking(&depolarizing(2, p).unwrap(), 1e-9), EntanglementBreaking::No { .. }));
        }
        assert!(matches!(is_entanglement_breaking(&depolarizing(3, 0.9).unwrap(), 1e-9), EntanglementBreaking::Inconclusive));
        assert!(matches!(is_entanglement_breaking(&depolarizing(3, 0.5).unwrap(), 1e-9), EntanglementBreaking::No { .. }));

        // Random measure-and-prepare channels are recognized and rebuilt.
        for _ in 0..10 {
            let povm_u = random::haar_unitary(2, &mut g);
            let effects: Vec<_> = (0..2).map(|j| projector(&povm_u.columns(j, 1).into_owned())).collect();
            let states: Vec<_> = (0..2).map(|_| random::state(2, &mut g)).collect();
            let ch = MeasurePrepare { effects, states };
            match is_entanglement_breaking(&ch, 1e-9) {
                EntanglementBreaking::Yes(mp) => check_measure_prepare(&mp, &ch),
                other => panic!("{other:?}"),
            }
        }
    }

    #[test]
    fn antiunitary_is_positive_not_cp() {
        let mut g = rng(17);
        let u = random::haar_unitary(3, &mut g);
        let anti = antiunitary(&u);
        for _ in 0..20 {
            let rho = random::state(3, &mut g);
            assert!(anti.apply(&rho).unwrap().is_psd(1e-10));
        }
        assert!(!anti.certify(1e-9).cp);
        let not = ChoiMatrix::from_map(2, 2, |x| {
            let sy = &paulis()[2];
            sy * x.transpose() * sy
        });
        let c = not.certify(1e-9);
        assert!(!c.cp && c.tp);
        let from_affine = qubit_diagonal_map([-1.0; 3], [0.0; 3]).to_choi();
        assert!(close(from_affine.matrix(), not.matrix(), 1e-12));
    }

    #[test]
    fn composition_and_tensor_stay_cptp() {
        let mut g = rng(18);
        let a = KrausChannel::random(2, 3, 2, &mut g);
        let b = KrausChannel::random(3, 2, 3, &mut g);
        let ab = a.compose(&b).unwrap();
        let cert = ab.certify(1e-9);
        assert!(cert.cp && cert.tp);
        let rho = random::state(2, &mut g);
        assert!(close(&ab.apply(&rho).unwrap(), &b.apply(&a.apply(&rho).unwrap()).unwrap(), 1e-12));
        let t = a.tensor(&b);
        let cert = t.certify(1e-9);
        assert!(cert.cp && cert.tp);
        assert!(a.compose(&a).is_err());
        let via_choi = a.to_choi().compose(&b).unwrap();
        assert!(close(via_choi.matrix(), ab.to_choi().matrix(), 1e-12));
    }
}
