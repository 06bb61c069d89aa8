//! Dense complex linear algebra on top of nalgebra.
//!
//! Kets are `d×1` columns. Tensor products use the block layout where the
//! `(i,j)` entry of the left factor scales the `(i,j)` block, so a product
//! basis is ordered `e_0⊗f_0, e_0⊗f_1, …`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type ComplexMatrix = DMatrix<C64>;

pub const DEFAULT_TOL: f64 = 1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// Computational basis ket `|j⟩` in dimension `d`.
pub fn basis_ket(d: usize, j: usize) -> ComplexMatrix {
    let mut k = zeros(d, 1);
    k[(j, 0)] = ONE;
    k
}

pub fn ket(amplitudes: &[C64]) -> ComplexMatrix {
    ComplexMatrix::from_column_slice(amplitudes.len(), 1, amplitudes)
}

pub fn real_ket(amplitudes: &[f64]) -> ComplexMatrix {
    let v: Vec<C64> = amplitudes.iter().map(|&x| r(x)).collect();
    ket(&v)
}

pub fn normalized(k: &ComplexMatrix) -> ComplexMatrix {
    let n = k.norm();
    k / r(n)
}

/// `|v⟩⟨v|`.
pub fn projector(v: &ComplexMatrix) -> ComplexMatrix {
    v * v.adjoint()
}

/// `⟨a|b⟩`, conjugate-linear in `a`.
pub fn inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    (a.adjoint() * b)[(0, 0)]
}

/// Hilbert-Schmidt product `tr[a†b]`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn tensor_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    let mut out = ComplexMatrix::from_element(1, 1, ONE);
    for f in factors {
        out = out.kronecker(*f);
    }
    out
}

pub fn hermitian_part(t: &ComplexMatrix) -> ComplexMatrix {
    (t + t.adjoint()) * r(0.5)
}

/// Pauli matrices `[I, σx, σy, σz]`.
pub fn paulis() -> [ComplexMatrix; 4] {
    [
        identity(2),
        ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

/// `n·σ` for a real 3-vector `n`.
pub fn pauli_dot(n: [f64; 3]) -> ComplexMatrix {
    let p = paulis();
    &p[1] * r(n[0]) + &p[2] * r(n[1]) + &p[3] * r(n[2])
}

/// Largest absolute entry, used as a cheap residual measure.
pub fn max_abs(t: &ComplexMatrix) -> f64 {
    t.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn scale(t: &ComplexMatrix) -> f64 {
    operator_norm(t).max(1.0)
}

pub trait OperatorExt {
    fn dag(&self) -> ComplexMatrix;
    fn tr(&self) -> C64;
    fn is_hermitian(&self, tol: f64) -> bool;
    fn is_psd(&self, tol: f64) -> bool;
    fn is_unitary(&self, tol: f64) -> bool;
    fn is_projection(&self, tol: f64) -> bool;
}

impl OperatorExt for ComplexMatrix {
    fn dag(&self) -> ComplexMatrix {
        self.adjoint()
    }

    fn tr(&self) -> C64 {
        self.trace()
    }

    fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && max_abs(&(self - self.adjoint())) <= tol * scale(self)
    }

    fn is_psd(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && min_eigenvalue(self) >= -tol * scale(self)
    }

    fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && max_abs(&(self.adjoint() * self - identity(self.nrows()))) <= tol
    }

    fn is_projection(&self, tol: f64) -> bool {
        self.is_hermitian(tol) && max_abs(&(self * self - self)) <= tol * scale(self)
    }
}

pub fn is_hermitian(t: &ComplexMatrix, tol: f64) -> bool {
    t.is_hermitian(tol)
}

pub fn is_psd(t: &ComplexMatrix, tol: f64) -> bool {
    t.is_psd(tol)
}

pub fn is_unitary(t: &ComplexMatrix, tol: f64) -> bool {
    t.is_unitary(tol)
}

pub fn is_projection(t: &ComplexMatrix, tol: f64) -> bool {
    t.is_projection(tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

fn check_bipartite(t: &ComplexMatrix, d_a: usize, d_b: usize) -> Result<()> {
    let n = d_a * d_b;
    if t.nrows() != n || t.ncols() != n {
        return Err(Error::Dimension(format!(
            "expected {n}x{n} for {d_a}x{d_b}, got {}x{}",
            t.nrows(),
            t.ncols()
        )));
    }
    Ok(())
}

/// Trace over the given factor of an operator on `C^dA ⊗ C^dB`.
pub fn partial_trace(t: &ComplexMatrix, d_a: usize, d_b: usize, side: Side) -> Result<ComplexMatrix> {
    check_bipartite(t, d_a, d_b)?;
    Ok(match side {
        Side::A => ComplexMatrix::from_fn(d_b, d_b, |k, l| {
            (0..d_a).map(|i| t[(i * d_b + k, i * d_b + l)]).sum()
        }),
        Side::B => ComplexMatrix::from_fn(d_a, d_a, |i, j| {
            (0..d_b).map(|k| t[(i * d_b + k, j * d_b + k)]).sum()
        }),
    })
}

/// Transposition of one tensor factor in the computational product basis.
pub fn partial_transpose(t: &ComplexMatrix, d_a: usize, d_b: usize, side: Side) -> Result<ComplexMatrix> {
    check_bipartite(t, d_a, d_b)?;
    let n = d_a * d_b;
    Ok(ComplexMatrix::from_fn(n, n, |row, col| {
        let (i, k) = (row / d_b, row % d_b);
        let (j, l) = (col / d_b, col % d_b);
        match side {
            Side::A => t[(j * d_b + k, i * d_b + l)],
            Side::B => t[(i * d_b + l, j * d_b + k)],
        }
    }))
}

/// The swap `φ⊗ψ ↦ ψ⊗φ` on `C^d ⊗ C^d`.
pub fn swap_operator(d: usize) -> ComplexMatrix {
    let n = d * d;
    let mut v = zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            v[(j * d + i, i * d + j)] = ONE;
        }
    }
    v
}

#[derive(Debug, Clone)]
pub struct Eigh {
    /// Descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, matching `values`.
    pub vectors: ComplexMatrix,
}

impl Eigh {
    pub fn vector(&self, j: usize) -> ComplexMatrix {
        self.vectors.columns(j, 1).into_owned()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.values.len();
        let mut out = zeros(self.vectors.nrows(), self.vectors.nrows());
        for j in 0..n {
            let v = self.vector(j);
            out += projector(&v) * r(self.values[j]);
        }
        out
    }
}

fn eigh_unchecked(t: &ComplexMatrix) -> Eigh {
    let eig = SymmetricEigen::new(hermitian_part(t));
    let n = t.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    Eigh { values, vectors }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
pub fn eigh(t: &ComplexMatrix) -> Result<Eigh> {
    eigh_tol(t, DEFAULT_TOL)
}

pub fn eigh_tol(t: &ComplexMatrix, tol: f64) -> Result<Eigh> {
    if !t.is_square() {
        return Err(Error::Dimension(format!("eigh needs a square matrix, got {}x{}", t.nrows(), t.ncols())));
    }
    let dev = max_abs(&(t - t.adjoint()));
    if dev > tol * scale(t) {
        return Err(Error::NotHermitian(dev));
    }
    Ok(eigh_unchecked(t))
}

/// Eigenvalues of the Hermitian part, descending.
pub fn eigvalsh(t: &ComplexMatrix) -> Vec<f64> {
    eigh_unchecked(t).values
}

pub fn min_eigenvalue(t: &ComplexMatrix) -> f64 {
    eigvalsh(t).last().copied().unwrap_or(0.0)
}

/// `f(t)` for Hermitian `t` through its spectral decomposition.
pub fn hermitian_fn(t: &ComplexMatrix, f: impl Fn(f64) -> f64) -> ComplexMatrix {
    let e = eigh_unchecked(t);
    let n = t.nrows();
    let mut out = zeros(n, n);
    for (j, &lam) in e.values.iter().enumerate() {
        out += projector(&e.vector(j)) * r(f(lam));
    }
    out
}

/// Unique positive square root. Eigenvalues in `[-tol·‖t‖, 0)` are clamped to zero.
pub fn psd_sqrt(t: &ComplexMatrix) -> Result<ComplexMatrix> {
    psd_sqrt_tol(t, DEFAULT_TOL)
}

pub fn psd_sqrt_tol(t: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let e = eigh_tol(t, tol)?;
    let floor = -tol * scale(t);
    if let Some(&lo) = e.values.last() {
        if lo < floor {
            return Err(Error::NotPsd(lo));
        }
    }
    let n = t.nrows();
    let noise = roundoff_floor(&e.values);
    let mut out = zeros(n, n);
    for (j, &lam) in e.values.iter().enumerate() {
        if lam > noise {
            out += projector(&e.vector(j)) * r(lam.sqrt());
        }
    }
    Ok(out)
}

/// Eigenvalues below this are indistinguishable from rounding noise; the
/// square root would otherwise amplify them to ~1e-8.
pub fn roundoff_floor(values: &[f64]) -> f64 {
    let top = values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    8.0 * f64::EPSILON * values.len() as f64 * top
}

/// Inverse square root on the support, zero on the kernel.
pub fn psd_inv_sqrt(t: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    hermitian_fn(t, |x| if x > tol { 1.0 / x.sqrt() } else { 0.0 })
}

#[derive(Debug, Clone)]
pub struct Polar {
    pub v: ComplexMatrix,
    pub abs: ComplexMatrix,
}

/// `t = v·|t|` with `v` a partial isometry supported on the range of `|t|`.
pub fn polar(t: &ComplexMatrix) -> Result<Polar> {
    if !t.is_square() {
        return Err(Error::Dimension("polar needs a square matrix".into()));
    }
    let n = t.nrows();
    let svd = t.clone().svd(true, true);
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numeric("SVD did not return singular vectors".into())),
    };
    let cut = DEFAULT_TOL * svd.singular_values.max().max(1.0);
    let mut v = zeros(n, n);
    let mut abs = zeros(n, n);
    for k in 0..svd.singular_values.len() {
        let s = svd.singular_values[k];
        let x = vt.rows(k, 1).adjoint();
        let w = u.columns(k, 1).into_owned();
        abs += &x * x.adjoint() * r(s);
        if s > cut {
            v += w * x.adjoint();
        }
    }
    Ok(Polar { v, abs })
}

pub fn singular_values(t: &ComplexMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = t.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub operator: f64,
    pub trace: f64,
    pub hs: f64,
}

pub fn norms(t: &ComplexMatrix) -> Norms {
    let s = singular_values(t);
    Norms {
        operator: s.first().copied().unwrap_or(0.0),
        trace: s.iter().sum(),
        hs: t.norm(),
    }
}

pub fn operator_norm(t: &ComplexMatrix) -> f64 {
    singular_values(t).first().copied().unwrap_or(0.0)
}

pub fn trace_norm(t: &ComplexMatrix) -> f64 {
    singular_values(t).iter().sum()
}

pub fn hs_norm(t: &ComplexMatrix) -> f64 {
    t.norm()
}

/// Rank counting singular values above `tol` times the largest one.
pub fn rank(t: &ComplexMatrix, tol: f64) -> usize {
    let s = singular_values(t);
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * top).count()
}

/// Orthonormal basis of the column space, as columns.
pub fn range_basis(t: &ComplexMatrix, tol: f64) -> ComplexMatrix {
    let svd = t.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| top > 0.0 && svd.singular_values[k] > tol * top)
        .collect();
    ComplexMatrix::from_fn(t.nrows(), keep.len(), |i, k| u[(i, keep[k])])
}

/// Gram–Schmidt completion of orthonormal columns to a unitary, trying
/// computational basis vectors in order.
pub fn complete_to_unitary(cols: &ComplexMatrix) -> ComplexMatrix {
    let n = cols.nrows();
    let mut basis: Vec<ComplexMatrix> = (0..cols.ncols()).map(|k| cols.columns(k, 1).into_owned()).collect();
    let mut j = 0;
    while basis.len() < n && j < n {
        let mut v = basis_ket(n, j);
        for _ in 0..2 {
            for b in &basis {
                let p = inner(b, &v);
                v -= b * p;
            }
        }
        let nv = v.norm();
        if nv > 1e-6 {
            basis.push(v / r(nv));
        }
        j += 1;
    }
    ComplexMatrix::from_fn(n, n, |i, k| basis[k][(i, 0)])
}
