//! Bipartite states: Schmidt decomposition, separability tests, witnesses,
//! Werner states and twirling.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, identity, inner, max_abs, projector, r, swap_operator, tensor, zeros, ComplexMatrix,
    OperatorExt, Side, C64, ONE,
};
use crate::random;
use crate::states::State;

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    state: State,
    d_a: usize,
    d_b: usize,
}

impl BipartiteState {
    pub fn new(matrix: ComplexMatrix, d_a: usize, d_b: usize) -> Result<BipartiteState> {
        BipartiteState::from_state(State::new(matrix)?, d_a, d_b)
    }

    pub fn from_state(state: State, d_a: usize, d_b: usize) -> Result<BipartiteState> {
        if d_a * d_b != state.dim() || d_a == 0 {
            return Err(Error::Dimension(format!("{d_a}x{d_b} does not match dimension {}", state.dim())));
        }
        Ok(BipartiteState { state, d_a, d_b })
    }

    pub fn pure(ket: &ComplexMatrix, d_a: usize, d_b: usize) -> Result<BipartiteState> {
        BipartiteState::from_state(State::pure(ket)?, d_a, d_b)
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.state.matrix()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_a, self.d_b)
    }

    /// Reduced state after tracing out `side`.
    pub fn reduced(&self, traced: Side) -> State {
        let m = linalg::partial_trace(self.matrix(), self.d_a, self.d_b, traced).expect("dims checked");
        State::with_tol(m, 1e-8).expect("partial trace of a state is a state")
    }

    /// `ρ_A` (system B traced out).
    pub fn rho_a(&self) -> State {
        self.reduced(Side::B)
    }

    /// `ρ_B` (system A traced out).
    pub fn rho_b(&self) -> State {
        self.reduced(Side::A)
    }
}

/// `ψ+ = Σ_j e_j ⊗ e_j / √d`.
pub fn maximally_entangled_ket(d: usize) -> ComplexMatrix {
    let mut v = zeros(d * d, 1);
    for j in 0..d {
        v[(j * d + j, 0)] = r(1.0 / (d as f64).sqrt());
    }
    v
}

/// `(e_0⊗e_1 − e_1⊗e_0)/√2`.
pub fn singlet() -> ComplexMatrix {
    linalg::real_ket(&[0.0, 1.0, -1.0, 0.0]) / r(2f64.sqrt())
}

#[derive(Debug, Clone)]
pub struct SchmidtData {
    /// `√λ_j`, descending.
    pub coefficients: Vec<f64>,
    pub left: Vec<ComplexMatrix>,
    pub right: Vec<ComplexMatrix>,
    pub rank: usize,
}

impl SchmidtData {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.left[0].nrows() * self.right[0].nrows();
        self.coefficients
            .iter()
            .zip(self.left.iter().zip(&self.right))
            .fold(zeros(n, 1), |acc, (s, (e, f))| acc + tensor(e, f) * r(*s))
    }

    /// Schmidt vector `λ_j` (squares of the coefficients).
    pub fn lambdas(&self) -> Vec<f64> {
        self.coefficients.iter().map(|s| s * s).collect()
    }
}

/// Schmidt form `ψ = Σ √λ_j e_j ⊗ f_j` from the SVD of the coefficient matrix.
pub fn schmidt(psi: &ComplexMatrix, d_a: usize, d_b: usize, tol: f64) -> Result<SchmidtData> {
    if psi.shape() != (d_a * d_b, 1) {
        return Err(Error::Dimension(format!("ket of length {} for {d_a}x{d_b}", psi.nrows())));
    }
    if (psi.norm() - 1.0).abs() > tol.max(1e-9) {
        return Err(Error::NotNormalized(psi.norm_squared()));
    }
    let m = ComplexMatrix::from_fn(d_a, d_b, |i, k| psi[(i * d_b + k, 0)]);
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let coefficients: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let left = order.iter().map(|&k| u.columns(k, 1).into_owned()).collect();
    let right = order.iter().map(|&k| v_t.rows(k, 1).transpose()).collect();
    let rank = coefficients.iter().filter(|&&s| s > tol).count();
    Ok(SchmidtData { coefficients, left, right, rank })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PptReport {
    pub ppt: bool,
    pub min_eigenvalue: f64,
}

pub fn partial_transpose(rho: &BipartiteState, side: Side) -> ComplexMatrix {
    linalg::partial_transpose(rho.matrix(), rho.d_a, rho.d_b, side).expect("dims checked")
}

pub fn ppt(rho: &BipartiteState, tol: f64) -> PptReport {
    let min_eigenvalue = linalg::min_eigenvalue(&partial_transpose(rho, Side::B));
    PptReport { ppt: min_eigenvalue >= -tol, min_eigenvalue }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Separability {
    Separable,
    Entangled,
}

/// Exact separability test for `2×2`, `2×3` and `3×2` systems.
pub fn peres_horodecki(rho: &BipartiteState, tol: f64) -> Result<Separability> {
    match rho.dims() {
        (2, 2) | (2, 3) | (3, 2) => Ok(if ppt(rho, tol).ppt { Separability::Separable } else { Separability::Entangled }),
        (a, b) => Err(Error::Dimension(format!(
            "PPT is not sufficient for separability in {a}x{b}; use the one-sided ppt test"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionReport {
    pub detected: bool,
    /// Smallest eigenvalue of `I ⊗ ρ_B − ρ`.
    pub min_eigenvalue_b: f64,
    /// Smallest eigenvalue of `ρ_A ⊗ I − ρ`.
    pub min_eigenvalue_a: f64,
}

pub fn reduction_criterion(rho: &BipartiteState, tol: f64) -> ReductionReport {
    let (d_a, d_b) = rho.dims();
    let m = rho.matrix();
    let min_eigenvalue_b = linalg::min_eigenvalue(&(tensor(&identity(d_a), rho.rho_b().matrix()) - m));
    let min_eigenvalue_a = linalg::min_eigenvalue(&(tensor(rho.rho_a().matrix(), &identity(d_b)) - m));
    ReductionReport { detected: min_eigenvalue_a < -tol || min_eigenvalue_b < -tol, min_eigenvalue_b, min_eigenvalue_a }
}

fn unit3(v: [f64; 3], name: &str) -> Result<()> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("{name} has length {n}, expected 1")));
    }
    Ok(())
}

/// `a·σ ⊗ (b+b′)·σ + a′·σ ⊗ (b−b′)·σ`.
pub fn chsh_operator(a: [f64; 3], a2: [f64; 3], b: [f64; 3], b2: [f64; 3]) -> Result<ComplexMatrix> {
    for (v, name) in [(a, "a"), (a2, "a'"), (b, "b"), (b2, "b'")] {
        unit3(v, name)?;
    }
    let sum = [b[0] + b2[0], b[1] + b2[1], b[2] + b2[2]];
    let diff = [b[0] - b2[0], b[1] - b2[1], b[2] - b2[2]];
    Ok(tensor(&linalg::pauli_dot(a), &linalg::pauli_dot(sum)) + tensor(&linalg::pauli_dot(a2), &linalg::pauli_dot(diff)))
}

/// `2 − |tr[B ρ]|` with `B` the CHSH operator; negative values certify entanglement.
pub fn chsh_value(rho: &BipartiteState, a: [f64; 3], a2: [f64; 3], b: [f64; 3], b2: [f64; 3]) -> Result<f64> {
    if rho.dims() != (2, 2) {
        return Err(Error::Dimension("CHSH needs two qubits".into()));
    }
    let bell = chsh_operator(a, a2, b, b2)?;
    Ok(2.0 - rho.state().expectation(&bell).abs())
}

/// Correlation matrix `T_ij = tr[ρ σ_i⊗σ_j]` of a two-qubit state.
pub fn correlation_matrix(rho: &BipartiteState) -> Result<DMatrix<f64>> {
    if rho.dims() != (2, 2) {
        return Err(Error::Dimension("correlation matrix needs two qubits".into()));
    }
    let p = linalg::paulis();
    Ok(DMatrix::from_fn(3, 3, |i, j| rho.state().expectation(&tensor(&p[i + 1], &p[j + 1]))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalChsh {
    /// `2 − max|tr[Bρ]|`, in the convention of [`chsh_value`].
    pub value: f64,
    pub a: [f64; 3],
    pub a2: [f64; 3],
    pub b: [f64; 3],
    pub b2: [f64; 3],
}

/// Best CHSH settings from the two largest singular values `t1, t2` of the
/// correlation matrix: `a, a′` and `v1, v2` the singular vectors,
/// `b, b′ = cos θ v1 ± sin θ v2` with `tan θ = t2/t1`, so `max = 2√(t1²+t2²)`.
/// The value is recomputed through the CHSH operator at those settings.
pub fn optimal_chsh(rho: &BipartiteState) -> Result<OptimalChsh> {
    let t = correlation_matrix(rho)?;
    let svd = t.svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let (i1, i2) = (order[0], order[1]);
    let (t1, t2) = (svd.singular_values[i1], svd.singular_values[i2]);
    let theta = t2.atan2(t1);
    let col = |m: &DMatrix<f64>, j: usize| [m[(0, j)], m[(1, j)], m[(2, j)]];
    let row = |m: &DMatrix<f64>, j: usize| [m[(j, 0)], m[(j, 1)], m[(j, 2)]];
    let (v1, v2) = (row(&vt, i1), row(&vt, i2));
    let mix = |s: f64| {
        let w = [0, 1, 2].map(|k| theta.cos() * v1[k] + s * theta.sin() * v2[k]);
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.map(|x| x / n)
    };
    let (a, a2, b, b2) = (col(&u, i1), col(&u, i2), mix(1.0), mix(-1.0));
    let value = chsh_value(rho, a, a2, b, b2)?;
    Ok(OptimalChsh { value, a, a2, b, b2 })
}

/// `⟨ψ+|(U†⊗I)ρ(U⊗I)|ψ+⟩`, using `(U⊗I)ψ+ = vec(U)/√d`.
fn mef_objective(rho: &ComplexMatrix, u: &ComplexMatrix) -> f64 {
    let d = u.nrows();
    let v = ComplexMatrix::from_fn(d * d, 1, |k, _| u[(k / d, k % d)]);
    (v.adjoint() * rho * &v)[(0, 0)].re / d as f64
}

fn expm_i_hermitian(h: &ComplexMatrix) -> ComplexMatrix {
    let e = linalg::eigh(h).expect("Hermitian generator");
    let n = h.nrows();
    let mut out = zeros(n, n);
    for (j, &l) in e.values.iter().enumerate() {
        out += projector(&e.vector(j)) * C64::from_polar(1.0, l);
    }
    out
}

/// Settings for the maximally-entangled-fraction search.
#[derive(Debug, Clone, Copy)]
pub struct MefOptions {
    pub restarts: usize,
    pub window: f64,
}

impl Default for MefOptions {
    fn default() -> Self {
        MefOptions { restarts: 64, window: 1e-8 }
    }
}

/// `max_U ⟨ψ+|(U†⊗I)ρ(U⊗I)|ψ+⟩` by seeded restarts and coordinate moves
/// along the Gell-Mann generators.
pub fn max_entangled_fraction<R: Rng + ?Sized>(rho: &BipartiteState, opts: MefOptions, rng: &mut R) -> Result<f64> {
    let (d, d_b) = rho.dims();
    if d != d_b {
        return Err(Error::Dimension("maximally entangled fraction needs dA = dB".into()));
    }
    let generators = crate::states::gell_mann_basis(d);
    let m = rho.matrix();
    let mut best = f64::NEG_INFINITY;
    for _ in 0..opts.restarts.max(1) {
        let mut u = random::haar_unitary(d, rng);
        let mut fu = mef_objective(m, &u);
        let mut step = 0.5;
        while step > opts.window {
            let moves: Vec<ComplexMatrix> = generators
                .iter()
                .flat_map(|g| [expm_i_hermitian(&(g * r(step))), expm_i_hermitian(&(g * r(-step)))])
                .collect();
            let mut improved = false;
            for mv in &moves {
                let cand = &u * mv;
                let fc = mef_objective(m, &cand);
                if fc > fu + 1e-15 {
                    u = cand;
                    fu = fc;
                    improved = true;
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.max(fu);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymAntisym {
    pub p_plus: ComplexMatrix,
    pub p_minus: ComplexMatrix,
    pub swap: ComplexMatrix,
}

pub fn sym_antisym(d: usize) -> SymAntisym {
    let swap = swap_operator(d);
    let id = identity(d * d);
    SymAntisym { p_plus: (&id + &swap) * r(0.5), p_minus: (&id - &swap) * r(0.5), swap }
}

fn d_pm(d: usize) -> (f64, f64) {
    let d = d as f64;
    (d * (d + 1.0) / 2.0, d * (d - 1.0) / 2.0)
}

/// `μ P+/d+ + (1−μ) P−/d−`.
pub fn werner(d: usize, mu: f64) -> Result<BipartiteState> {
    if d < 2 {
        return Err(Error::InvalidParameter("Werner states need d >= 2".into()));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidParameter(format!("mu = {mu} is not in [0, 1]")));
    }
    let p = sym_antisym(d);
    let (dp, dm) = d_pm(d);
    let m = p.p_plus * r(mu / dp) + p.p_minus * r((1.0 - mu) / dm);
    BipartiteState::new(m, d, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WernerReport {
    pub d: usize,
    pub mu: f64,
    pub swap_expectation: f64,
    /// Werner states are separable exactly when `μ ≥ ½`.
    pub separable: bool,
    pub ppt: bool,
    pub ppt_min_eigenvalue: f64,
    pub reduction_detects: bool,
    pub reduction_min_eigenvalue: f64,
}

pub fn werner_report(d: usize, mu: f64, tol: f64) -> Result<WernerReport> {
    let rho = werner(d, mu)?;
    let swap_expectation = rho.state().expectation(&swap_operator(d));
    let p = ppt(&rho, tol);
    let red = reduction_criterion(&rho, tol);
    Ok(WernerReport {
        d,
        mu,
        swap_expectation,
        separable: mu >= 0.5,
        ppt: p.ppt,
        ppt_min_eigenvalue: p.min_eigenvalue,
        reduction_detects: red.detected,
        reduction_min_eigenvalue: red.min_eigenvalue_a.min(red.min_eigenvalue_b),
    })
}

/// Average of `(U⊗U) x (U⊗U)†` over Haar unitaries, in closed form.
pub fn twirl(x: &ComplexMatrix, d: usize) -> Result<ComplexMatrix> {
    if x.shape() != (d * d, d * d) {
        return Err(Error::Dimension(format!("twirl on {d}x{d} needs a {}-square matrix", d * d)));
    }
    let p = sym_antisym(d);
    let (dp, dm) = d_pm(d);
    let wp = (x * &p.p_plus).trace() / r(dp);
    let wm = (x * &p.p_minus).trace() / r(dm);
    Ok(p.p_plus * wp + p.p_minus * wm)
}

/// The nine product kets `ψ_jk ⊗ φ_jk` of the 3×3 factorized basis that is
/// not perfectly distinguishable by local operations.
pub fn nonlocal_product_basis() -> Vec<ComplexMatrix> {
    let s = 1.0 / 2f64.sqrt();
    let e = |j: usize| linalg::basis_ket(3, j);
    let plus = |j: usize, k: usize| (e(j) + e(k)) * r(s);
    let minus = |j: usize, k: usize| (e(j) - e(k)) * r(s);
    vec![
        tensor(&e(0), &plus(0, 1)),
        tensor(&e(0), &minus(0, 1)),
        tensor(&e(2), &plus(1, 2)),
        tensor(&e(2), &minus(1, 2)),
        tensor(&e(1), &e(1)),
        tensor(&plus(1, 2), &e(0)),
        tensor(&minus(1, 2), &e(0)),
        tensor(&plus(0, 1), &e(2)),
        tensor(&minus(0, 1), &e(2)),
    ]
}

/// The five "tiles" product kets in `C^3 ⊗ C^3`; no product ket is orthogonal to all of them.
pub fn tiles_upb() -> Vec<ComplexMatrix> {
    let s2 = 1.0 / 2f64.sqrt();
    let e = |j: usize| linalg::basis_ket(3, j);
    let m01 = (e(0) - e(1)) * r(s2);
    let m12 = (e(1) - e(2)) * r(s2);
    let all = (e(0) + e(1) + e(2)) * r(1.0 / 3f64.sqrt());
    vec![
        tensor(&e(0), &m01),
        tensor(&e(2), &m12),
        tensor(&m01, &e(2)),
        tensor(&m12, &e(0)),
        tensor(&all, &all),
    ]
}

pub fn upb_projector() -> ComplexMatrix {
    tiles_upb().iter().fold(zeros(9, 9), |acc, k| acc + projector(k))
}

/// `(I − Π_upb)/4`, entangled but PPT.
pub fn upb_state() -> BipartiteState {
    BipartiteState::new((identity(9) - upb_projector()) * r(0.25), 3, 3).expect("valid state")
}

/// `min ⟨a⊗b|W|a⊗b⟩` over unit product kets by alternating smallest-eigenvector
/// steps, keeping the best of `restarts` seeded starts.
pub fn min_product_expectation<R: Rng + ?Sized>(
    w: &ComplexMatrix,
    d_a: usize,
    d_b: usize,
    restarts: usize,
    rng: &mut R,
) -> (f64, ComplexMatrix, ComplexMatrix) {
    let reduce_b = |b: &ComplexMatrix| {
        ComplexMatrix::from_fn(d_a, d_a, |i, j| {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..d_b {
                for l in 0..d_b {
                    s += b[(k, 0)].conj() * w[(i * d_b + k, j * d_b + l)] * b[(l, 0)];
                }
            }
            s
        })
    };
    let reduce_a = |a: &ComplexMatrix| {
        ComplexMatrix::from_fn(d_b, d_b, |k, l| {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..d_a {
                for j in 0..d_a {
                    s += a[(i, 0)].conj() * w[(i * d_b + k, j * d_b + l)] * a[(j, 0)];
                }
            }
            s
        })
    };
    let lowest = |m: &ComplexMatrix| {
        let e = linalg::eigh(&linalg::hermitian_part(m)).expect("Hermitian part");
        let k = e.values.len() - 1;
        (e.values[k], e.vector(k))
    };
    let mut best = (f64::INFINITY, zeros(d_a, 1), zeros(d_b, 1));
    for _ in 0..restarts.max(1) {
        let mut b = random::ket(d_b, rng);
        let mut a = lowest(&reduce_b(&b)).1;
        let mut value = f64::INFINITY;
        for _ in 0..500 {
            let (_, nb) = lowest(&reduce_a(&a));
            b = nb;
            let (v, na) = lowest(&reduce_b(&b));
            a = na;
            let done = (value - v).abs() < 1e-14;
            value = v;
            if done {
                break;
            }
        }
        if value < best.0 {
            best = (value, a, b);
        }
    }
    best
}

/// Hermitian operator, not PSD, numerically nonnegative on product kets.
#[derive(Debug, Clone)]
pub struct Witness {
    matrix: ComplexMatrix,
    d_a: usize,
    d_b: usize,
    certified_min_product_value: f64,
    min_eigenvalue: f64,
}

impl Witness {
    pub fn certify<R: Rng + ?Sized>(
        matrix: ComplexMatrix,
        d_a: usize,
        d_b: usize,
        restarts: usize,
        tol: f64,
        rng: &mut R,
    ) -> Result<Witness> {
        if matrix.shape() != (d_a * d_b, d_a * d_b) {
            return Err(Error::Dimension(format!("witness for {d_a}x{d_b}")));
        }
        if !matrix.is_hermitian(tol) {
            return Err(Error::NotHermitian(max_abs(&(&matrix - matrix.adjoint()))));
        }
        let min_eigenvalue = linalg::min_eigenvalue(&matrix);
        if min_eigenvalue >= -tol {
            return Err(Error::InvalidParameter("positive operator detects no entanglement".into()));
        }
        let (certified_min_product_value, _, _) = min_product_expectation(&matrix, d_a, d_b, restarts, rng);
        if certified_min_product_value < -tol {
            return Err(Error::InvalidParameter(format!(
                "negative on a product state ({certified_min_product_value:.3e})"
            )));
        }
        Ok(Witness { matrix, d_a, d_b, certified_min_product_value, min_eigenvalue })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.d_a, self.d_b)
    }

    pub fn certified_min_product_value(&self) -> f64 {
        self.certified_min_product_value
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

/// `2I − s·B_CHSH` for a sign `s = ±1`; both signs give witnesses.
pub fn chsh_witness<R: Rng + ?Sized>(
    a: [f64; 3],
    a2: [f64; 3],
    b: [f64; 3],
    b2: [f64; 3],
    sign: f64,
    rng: &mut R,
) -> Result<Witness> {
    let bell = chsh_operator(a, a2, b, b2)?;
    Witness::certify(identity(4) * r(2.0) - bell * r(sign.signum()), 2, 2, 32, 1e-9, rng)
}

#[derive(Debug, Clone)]
pub struct UpbWitness {
    pub witness: Witness,
    /// `min ⟨a⊗b|Π_upb|a⊗b⟩` over product kets.
    pub epsilon: f64,
    /// Unit ket in the range of the UPB state.
    pub phi: ComplexMatrix,
}

/// `W = Π_upb − ε|φ⟩⟨φ|`, with `φ` the normalized projection of `phi_seed`
/// onto the complement of the UPB span. On product kets
/// `⟨W⟩ ≥ ε(1 − |⟨φ|a⊗b⟩|²) ≥ 0`, and `tr[ρ_upb W] = −ε/4`.
pub fn upb_witness<R: Rng + ?Sized>(phi_seed: &ComplexMatrix, restarts: usize, rng: &mut R) -> Result<UpbWitness> {
    let pi = upb_projector();
    let raw = (identity(9) - &pi) * phi_seed;
    if raw.norm() < 1e-9 {
        return Err(Error::InvalidParameter("seed has no component outside the UPB span".into()));
    }
    let phi = linalg::normalized(&raw);
    let (epsilon, _, _) = min_product_expectation(&pi, 3, 3, restarts, rng);
    let w = &pi - projector(&phi) * r(epsilon);
    let witness = Witness::certify(w, 3, 3, restarts, 1e-9, rng)?;
    Ok(UpbWitness { witness, epsilon, phi })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessVerdict {
    Entangled,
    /// A witness can never certify separability.
    Undetermined,
}

pub fn witness_evaluate(w: &Witness, rho: &BipartiteState, tol: f64) -> Result<(f64, WitnessVerdict)> {
    if w.dims() != rho.dims() {
        return Err(Error::Dimension("witness and state dimensions differ".into()));
    }
    let value = rho.state().expectation(w.matrix());
    let verdict = if value < -tol { WitnessVerdict::Entangled } else { WitnessVerdict::Undetermined };
    Ok((value, verdict))
}

/// Whether `φ` can be reached from `ψ` by local operations and classical
/// communication: the Schmidt vector of `ψ` must be majorized by that of `φ`.
pub fn majorization_convertible(psi: &ComplexMatrix, phi: &ComplexMatrix, d_a: usize, d_b: usize) -> Result<bool> {
    let lp = schmidt(psi, d_a, d_b, 1e-12)?.lambdas();
    let lf = schmidt(phi, d_a, d_b, 1e-12)?.lambdas();
    let mut sp = 0.0;
    let mut sf = 0.0;
    for (a, b) in lp.iter().zip(&lf) {
        sp += a;
        sf += b;
        if sp > sf + 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Takagi factorization `A = U diag(σ) U^T` of a complex symmetric matrix.
pub fn takagi(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let n = a.nrows();
    let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let z = a[(ii, jj)];
        match (bi, bj) {
            (0, 0) => z.re,
            (0, 1) | (1, 0) => z.im,
            _ => -z.re,
        }
    });
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let top = eig.eigenvalues.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1e-300);
    let mut values = Vec::with_capacity(n);
    let mut cols: Vec<ComplexMatrix> = Vec::with_capacity(n);
    for &k in order.iter().take(n) {
        let s = eig.eigenvalues[k];
        if s <= 1e-12 * top {
            break;
        }
        let col = eig.eigenvectors.column(k);
        let u = ComplexMatrix::from_fn(n, 1, |i, _| c(col[i], col[i + n]));
        values.push(s);
        cols.push(linalg::normalized(&u));
    }
    if cols.len() < n {
        // Rows of V† with zero singular value are conj(ker A), orthogonal to the range of A.
        let svd = a.clone().svd(false, true);
        let v_t = svd.v_t.expect("requested V");
        let mut null: Vec<(f64, ComplexMatrix)> = (0..n)
            .map(|k| (svd.singular_values[k], v_t.rows(k, 1).transpose()))
            .collect();
        null.sort_by(|x, y| x.0.total_cmp(&y.0));
        for (_, v) in null.into_iter().take(n - cols.len()) {
            values.push(0.0);
            cols.push(v);
        }
    }
    let u = ComplexMatrix::from_fn(n, n, |i, k| cols[k][(i, 0)]);
    (values, u)
}

/// Unit numbers `z` with `Σ z_j λ_j = 0` for descending `λ` with
/// `λ_1 ≤ λ_2 + λ_3 + λ_4`.
pub fn close_polygon(l: [f64; 4]) -> [C64; 4] {
    let one = ONE;
    if l[0] <= 0.0 {
        return [one; 4];
    }
    let m = (l[0] - l[1]).max(l[2] - l[3]).max(0.0).min((l[0] + l[1]).min(l[2] + l[3]));
    let alpha = if l[1] > 0.0 {
        ((m * m - l[0] * l[0] - l[1] * l[1]) / (2.0 * l[0] * l[1])).clamp(-1.0, 1.0).acos()
    } else {
        0.0
    };
    let z2 = C64::from_polar(1.0, alpha);
    let target = -(r(l[0]) + z2 * l[1]);
    let tm = target.norm();
    let (z3, z4);
    if tm < 1e-300 {
        z3 = one;
        z4 = -one;
    } else {
        let u = target / tm;
        let beta = if l[2] > 0.0 {
            ((tm * tm + l[2] * l[2] - l[3] * l[3]) / (2.0 * tm * l[2])).clamp(-1.0, 1.0).acos()
        } else {
            0.0
        };
        z3 = u * C64::from_polar(1.0, beta);
        let rest = target - z3 * l[2];
        z4 = if rest.norm() > 0.0 { rest / rest.norm() } else { one };
    }
    [one, z2, z3, z4]
}

/// Wootters concurrence of a two-qubit operator, built on the spin flip
/// `ρ̃ = (σy⊗σy) ρ* (σy⊗σy)`.
pub fn concurrence(rho: &ComplexMatrix) -> f64 {
    let l = wootters_lambdas(rho);
    (l[0] - l[1] - l[2] - l[3]).max(0.0)
}

fn spin_flip() -> ComplexMatrix {
    let sy = &linalg::paulis()[2];
    tensor(sy, sy)
}

fn wootters_lambdas(rho: &ComplexMatrix) -> [f64; 4] {
    let (mut l, _) = wootters_basis(rho);
    l.resize(4, 0.0);
    [l[0], l[1], l[2], l[3]]
}

/// Subnormalized kets `x_i` with `ρ = Σ|x_i⟩⟨x_i|` and `⟨x_i|x̃_j⟩ = λ_i δ_ij`.
fn wootters_basis(rho: &ComplexMatrix) -> (Vec<f64>, Vec<ComplexMatrix>) {
    let e = linalg::eigh(&linalg::hermitian_part(rho)).expect("Hermitian part");
    let vs: Vec<ComplexMatrix> = e
        .values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 1e-14)
        .map(|(j, &l)| e.vector(j) * r(l.sqrt()))
        .collect();
    let n = vs.len();
    let y = spin_flip();
    let tau = ComplexMatrix::from_fn(n, n, |i, j| inner(&vs[i], &(&y * vs[j].map(|z| z.conj()))));
    let (values, u) = takagi(&tau);
    let xs = (0..n)
        .map(|i| (0..n).fold(zeros(4, 1), |acc, j| acc + &vs[j] * u[(j, i)]))
        .collect();
    (values, xs)
}

/// `ρ = Σ p_n |a_n⟩⟨a_n| ⊗ |b_n⟩⟨b_n|` for a separable two-qubit `ρ` (trace
/// arbitrary), following Wootters' construction. `None` when `ρ` is entangled
/// beyond `tol` or the rebuilt sum misses `ρ`.
pub fn two_qubit_product_decomposition(
    rho: &ComplexMatrix,
    tol: f64,
) -> Option<Vec<(f64, ComplexMatrix, ComplexMatrix)>> {
    if rho.shape() != (4, 4) {
        return None;
    }
    let (mut lambdas, mut xs) = wootters_basis(rho);
    while lambdas.len() < 4 {
        lambdas.push(0.0);
        xs.push(zeros(4, 1));
    }
    if lambdas[0] > lambdas[1] + lambdas[2] + lambdas[3] + tol {
        return None;
    }
    let z = close_polygon([lambdas[0], lambdas[1], lambdas[2], lambdas[3]]);
    let phases: Vec<C64> = z.iter().map(|zj| zj.sqrt().conj()).collect();
    let h = [[1.0, 1.0, 1.0, 1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
    let mut terms = Vec::new();
    for row in h {
        let yk = (0..4).fold(zeros(4, 1), |acc, j| acc + &xs[j] * (phases[j] * (0.5 * row[j])));
        let p = yk.norm_squared();
        if p < 1e-15 {
            continue;
        }
        let m = ComplexMatrix::from_fn(2, 2, |i, k| yk[(i * 2 + k, 0)]);
        // y_k is a product vector, so m = a b^T has rank one.
        let col = if m.column(0).norm() >= m.column(1).norm() { 0 } else { 1 };
        let a = linalg::normalized(&m.columns(col, 1).into_owned());
        let b = (a.adjoint() * &m).transpose();
        let b = &b / r(b.norm());
        terms.push((p, a, b));
    }
    let rebuilt = terms.iter().fold(zeros(4, 4), |acc, (p, a, b)| acc + tensor(&projector(a), &projector(b)) * r(*p));
    (max_abs(&(rebuilt - rho)) <= tol.max(1e-8)).then_some(terms)
}

/// `⟨ψ+|I⊗X|ψ+⟩`, which equals `tr[X]/d`.
pub fn max_entangled_expectation(x: &ComplexMatrix) -> C64 {
    let d = x.nrows();
    let psi = maximally_entangled_ket(d);
    (psi.adjoint() * tensor(&identity(d), x) * &psi)[(0, 0)]
}
