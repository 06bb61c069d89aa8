//! Finite-outcome observables (POVMs).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, c, hermitian_part, identity, max_abs, projector, r, ComplexMatrix, OperatorExt, DEFAULT_TOL};
use crate::states::State;

/// Operator `E` with `O ≤ E ≤ I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Effect(ComplexMatrix);

impl Effect {
    pub fn new(m: ComplexMatrix) -> Result<Effect> {
        validate_effect(&m, DEFAULT_TOL)?;
        Ok(Effect(hermitian_part(&m)))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }
}

pub fn validate_effect(m: &ComplexMatrix, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension("effect must be square".into()));
    }
    let dev = max_abs(&(m - m.adjoint()));
    if dev > tol * linalg::operator_norm(m).max(1.0) {
        return Err(Error::NotHermitian(dev));
    }
    let ev = linalg::eigvalsh(m);
    let (hi, lo) = (ev[0], ev[ev.len() - 1]);
    if lo < -tol {
        return Err(Error::NotPsd(lo));
    }
    if hi > 1.0 + tol {
        return Err(Error::InvalidPovm(format!("effect exceeds identity (eigenvalue {hi:.12e})")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    labels: Vec<String>,
    effects: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(labels: Vec<String>, effects: Vec<ComplexMatrix>) -> Result<Povm> {
        Povm::with_tol(labels, effects, DEFAULT_TOL)
    }

    pub fn with_tol(labels: Vec<String>, effects: Vec<ComplexMatrix>, tol: f64) -> Result<Povm> {
        if labels.len() != effects.len() {
            return Err(Error::InvalidPovm(format!("{} labels for {} effects", labels.len(), effects.len())));
        }
        let d = effects.first().map(|e| e.nrows()).ok_or_else(|| Error::InvalidPovm("no effects".into()))?;
        let mut sum = linalg::zeros(d, d);
        for (k, e) in effects.iter().enumerate() {
            if e.shape() != (d, d) {
                return Err(Error::Dimension(format!("effect {k} has shape {:?}, expected ({d}, {d})", e.shape())));
            }
            validate_effect(e, tol).map_err(|err| Error::InvalidPovm(format!("effect {k}: {err}")))?;
            sum += e;
        }
        let dev = max_abs(&(sum - identity(d)));
        if dev > tol * (effects.len() as f64).max(1.0) {
            return Err(Error::InvalidPovm(format!("effects sum to identity only within {dev:.3e}")));
        }
        let effects = effects.iter().map(hermitian_part).collect();
        Ok(Povm { labels, effects })
    }

    /// Labels `"0", "1", …`.
    pub fn numbered(effects: Vec<ComplexMatrix>) -> Result<Povm> {
        let labels = (0..effects.len()).map(|j| j.to_string()).collect();
        Povm::new(labels, effects)
    }

    /// Sharp observable of an orthonormal basis.
    pub fn from_basis(kets: &[ComplexMatrix]) -> Result<Povm> {
        crate::states::check_orthonormal(kets, 1e-8)?;
        Povm::numbered(kets.iter().map(projector).collect())
    }

    pub fn computational(d: usize) -> Povm {
        Povm::from_basis(&(0..d).map(|j| linalg::basis_ket(d, j)).collect::<Vec<_>>()).expect("standard basis")
    }

    /// Two-outcome qubit spin observable along the unit vector `n`, labels `+1, -1`.
    pub fn spin(n: [f64; 3]) -> Result<Povm> {
        let s = linalg::pauli_dot(n);
        let up = (identity(2) + &s) * r(0.5);
        let down = (identity(2) - &s) * r(0.5);
        Povm::new(vec!["1".into(), "-1".into()], vec![up, down])
    }

    pub fn trivial(d: usize) -> Povm {
        Povm { labels: vec!["0".into()], effects: vec![identity(d)] }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn effects(&self) -> &[ComplexMatrix] {
        &self.effects
    }

    pub fn effect(&self, j: usize) -> &ComplexMatrix {
        &self.effects[j]
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].nrows()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// `A(X)` for a set of outcome indices.
    pub fn event(&self, outcomes: &[usize]) -> ComplexMatrix {
        let d = self.dim();
        outcomes.iter().fold(linalg::zeros(d, d), |acc, &j| acc + &self.effects[j])
    }

    pub fn real_labels(&self) -> Result<Vec<f64>> {
        self.labels
            .iter()
            .map(|l| l.trim().parse::<f64>().map_err(|_| Error::InvalidParameter(format!("label {l:?} is not a number"))))
            .collect()
    }
}

/// `tr[ρA(x)]` for every outcome.
pub fn outcome_distribution(a: &Povm, rho: &State) -> Result<Vec<f64>> {
    if a.dim() != rho.dim() {
        return Err(Error::Dimension(format!("observable on d={} applied to state on d={}", a.dim(), rho.dim())));
    }
    Ok(a.effects.iter().map(|e| rho.expectation(e).clamp(0.0, 1.0)).collect())
}

pub fn is_sharp(a: &Povm) -> bool {
    let sharp = a.effects.iter().all(|e| e.is_projection(DEFAULT_TOL));
    if sharp {
        for (j, x) in a.effects.iter().enumerate() {
            for y in &a.effects[j + 1..] {
                debug_assert!(max_abs(&(x * y)) < 1e-6, "projections of a sharp observable must be orthogonal");
            }
        }
    }
    sharp
}

/// Real coordinates of a Hermitian matrix in a basis of the `d²`-dimensional
/// real space of Hermitian matrices.
fn hermitian_coordinates(m: &ComplexMatrix) -> Vec<f64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        v.push(m[(i, i)].re);
        for j in i + 1..d {
            v.push(m[(i, j)].re);
            v.push(m[(i, j)].im);
        }
    }
    v
}

/// Dimension of the real span of the effects.
pub fn effect_span_dimension(a: &Povm) -> usize {
    let d = a.dim();
    let rows: Vec<Vec<f64>> = a.effects.iter().map(hermitian_coordinates).collect();
    let m = DMatrix::from_fn(rows.len(), d * d, |i, j| rows[i][j]);
    let sv = m.svd(false, false).singular_values;
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > DEFAULT_TOL * top).count()
}

pub fn is_informationally_complete(a: &Povm) -> bool {
    let d = a.dim();
    effect_span_dimension(a) == d * d
}

/// The `d²` rank-one effects `T^{-1/2} P_jk T^{-1/2}` with `P_jj` the basis
/// projectors, `P_jk` projecting on `(φ_j + φ_k)/√2` for `j > k` and on
/// `(φ_j + iφ_k)/√2` for `j < k`.
pub fn minimal_ic_povm(d: usize) -> Result<Povm> {
    if d < 2 {
        return Err(Error::InvalidParameter("dimension must be at least 2".into()));
    }
    let s = 0.5f64.sqrt();
    let mut labels = Vec::new();
    let mut ps = Vec::new();
    for j in 0..d {
        for k in 0..d {
            let mut v = linalg::zeros(d, 1);
            if j == k {
                v[(j, 0)] = r(1.0);
            } else if j > k {
                v[(j, 0)] = r(s);
                v[(k, 0)] = r(s);
            } else {
                v[(j, 0)] = r(s);
                v[(k, 0)] = c(0.0, s);
            }
            labels.push(format!("({j},{k})"));
            ps.push(projector(&v));
        }
    }
    let t = ps.iter().fold(linalg::zeros(d, d), |acc, p| acc + p);
    let ti = linalg::psd_inv_sqrt(&t, DEFAULT_TOL);
    let effects = ps.iter().map(|p| &ti * p * &ti).collect();
    Povm::new(labels, effects)
}

/// Row-stochastic check: entries in `[0,1]`, rows summing to one.
pub fn check_stochastic(nu: &DMatrix<f64>, tol: f64) -> Result<()> {
    for i in 0..nu.nrows() {
        let row = nu.row(i);
        if row.iter().any(|&x| !(-tol..=1.0 + tol).contains(&x)) {
            return Err(Error::InvalidParameter(format!("row {i} has entries outside [0,1]")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > tol {
            return Err(Error::InvalidParameter(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// `B(b_j) = Σ_i ν_ij A(a_i)`, rows of `ν` indexed by the outcomes of `a`.
pub fn coarse_grain(a: &Povm, nu: &DMatrix<f64>) -> Result<Povm> {
    if nu.nrows() != a.len() {
        return Err(Error::Dimension(format!("ν has {} rows for {} outcomes", nu.nrows(), a.len())));
    }
    check_stochastic(nu, 1e-9)?;
    let d = a.dim();
    let effects = (0..nu.ncols())
        .map(|j| (0..a.len()).fold(linalg::zeros(d, d), |acc, i| acc + &a.effects[i] * r(nu[(i, j)])))
        .collect();
    Povm::numbered(effects)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Photon counting with detector efficiency `eps` on the Fock space cut at `k_max`.
pub fn photon_counting(eps: f64, k_max: usize) -> Result<Povm> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("efficiency {eps} outside [0,1]")));
    }
    let dim = k_max + 1;
    let effects = (0..dim)
        .map(|n| {
            let mut e = linalg::zeros(dim, dim);
            for k in n..dim {
                e[(k, k)] = r(binomial(k, n) * eps.powi(n as i32) * (1.0 - eps).powi((k - n) as i32));
            }
            e
        })
        .collect();
    Povm::numbered(effects)
}

/// Stochastic matrix `μ_kn` with `Σ_k μ_kn N^{ε2}(k) = N^{ε1}(n)`.
pub fn efficiency_coarse_matrix(eps1: f64, eps2: f64, k_max: usize) -> Result<DMatrix<f64>> {
    if !(eps1 > 0.0 && eps2 <= 1.0) {
        return Err(Error::InvalidParameter("efficiencies must satisfy 0 < ε1, ε2 ≤ 1".into()));
    }
    if eps1 > eps2 {
        return Err(Error::Impossible(format!(
            "coarse-graining impossible: efficiency {eps1} cannot be obtained from {eps2}"
        )));
    }
    let dim = k_max + 1;
    Ok(DMatrix::from_fn(dim, dim, |k, n| {
        if n > k {
            0.0
        } else {
            binomial(k, n) * eps1.powi(n as i32) * eps2.powi(-(k as i32)) * (eps2 - eps1).powi((k - n) as i32)
        }
    }))
}

/// `Σ x_j A(x_j)`.
pub fn first_moment_operator(a: &Povm) -> Result<ComplexMatrix> {
    let xs = a.real_labels()?;
    let d = a.dim();
    Ok(xs.iter().zip(&a.effects).fold(linalg::zeros(d, d), |acc, (x, e)| acc + e * r(*x)))
}

/// Mean and variance of a real-valued observable.
pub fn mean_variance(a: &Povm, rho: &State) -> Result<(f64, f64)> {
    let xs = a.real_labels()?;
    let p = outcome_distribution(a, rho)?;
    let mean: f64 = xs.iter().zip(&p).map(|(x, q)| x * q).sum();
    let var: f64 = xs.iter().zip(&p).map(|(x, q)| (x - mean).powi(2) * q).sum();
    Ok((mean, var))
}

/// Joint observable `{AB, (I−A)B, A(I−B), (I−A)(I−B)}` of two commuting effects,
/// labelled `1..4`.
pub fn commuting_joint(a: &Effect, b: &Effect) -> Result<Povm> {
    let (a, b) = (a.matrix(), b.matrix());
    if a.shape() != b.shape() {
        return Err(Error::Dimension("effects act on different spaces".into()));
    }
    let comm = max_abs(&(a * b - b * a));
    if comm > DEFAULT_TOL {
        return Err(Error::InvalidParameter(format!("effects do not commute (‖[A,B]‖ ≈ {comm:.3e})")));
    }
    let id = identity(a.nrows());
    let na = &id - a;
    let nb = &id - b;
    let effects = [a * b, &na * b, a * &nb, &na * &nb].iter().map(hermitian_part).collect();
    Povm::new((1..=4).map(|j| j.to_string()).collect(), effects)
}
