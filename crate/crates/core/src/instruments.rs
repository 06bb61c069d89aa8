//! Discrete instruments and the measurement models that realize them.
//!
//! An instrument assigns to each outcome a completely positive,
//! trace-decreasing operation; the operations sum to a channel. Every
//! operation here is held as a Kraus list.

use crate::channels::{self, KrausChannel, LinearMap};
use crate::error::{Error, Result};
use crate::linalg::{self, c, identity, max_abs, projector, r, tensor, zeros, ComplexMatrix, OperatorExt, Side};
use crate::observables::{is_sharp, Povm};
use crate::states::State;

/// Threshold for "has eigenvalue 1".
pub const EIGENVALUE_ONE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteInstrument {
    labels: Vec<String>,
    operations: Vec<KrausChannel>,
}

impl DiscreteInstrument {
    pub fn new(labels: Vec<String>, operations: Vec<KrausChannel>, tol: f64) -> Result<DiscreteInstrument> {
        if labels.len() != operations.len() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} operations",
                labels.len(),
                operations.len()
            )));
        }
        let first = operations.first().ok_or_else(|| Error::InvalidParameter("no operations".into()))?;
        let dims = (first.in_dim(), first.out_dim());
        if let Some(bad) = operations.iter().find(|op| (op.in_dim(), op.out_dim()) != dims) {
            return Err(Error::Dimension(format!(
                "operations map {}->{} and {}->{}",
                dims.0,
                dims.1,
                bad.in_dim(),
                bad.out_dim()
            )));
        }
        let ins = DiscreteInstrument { labels, operations };
        let dev = max_abs(&(ins.total().kraus_sum() - identity(dims.0)));
        if dev > tol {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(ins)
    }

    /// Labels `"0", "1", …`.
    pub fn numbered(operations: Vec<KrausChannel>, tol: f64) -> Result<DiscreteInstrument> {
        let labels = (0..operations.len()).map(|j| j.to_string()).collect();
        DiscreteInstrument::new(labels, operations, tol)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn operations(&self) -> &[KrausChannel] {
        &self.operations
    }

    pub fn operation(&self, x: usize) -> &KrausChannel {
        &self.operations[x]
    }

    pub fn len(&self) -> usize {
        self.operations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operations.is_empty()
    }

    pub fn in_dim(&self) -> usize {
        self.operations[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.operations[0].out_dim()
    }

    /// The channel `Σ_x I_x`.
    pub fn total(&self) -> KrausChannel {
        let kraus = self.operations.iter().flat_map(|op| op.kraus().iter().cloned()).collect();
        KrausChannel::new(kraus).expect("operations share their shape")
    }

    /// Unnormalized `I_x(ρ)`.
    pub fn apply(&self, x: usize, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.outcome(x)?.apply(rho)
    }

    pub fn probability(&self, x: usize, rho: &State) -> Result<f64> {
        Ok(self.apply(x, rho.matrix())?.trace().re)
    }

    /// `tr[I_y(I_x(ρ))]`, the probability of `x` followed by `y`.
    pub fn sequential_probability(&self, x: usize, y: usize, rho: &ComplexMatrix) -> Result<f64> {
        if self.in_dim() != self.out_dim() {
            return Err(Error::Dimension("sequential use needs equal input and output dimension".into()));
        }
        Ok(self.apply(y, &self.apply(x, rho)?)?.trace().re)
    }

    fn outcome(&self, x: usize) -> Result<&KrausChannel> {
        self.operations
            .get(x)
            .ok_or_else(|| Error::InvalidParameter(format!("outcome {x} out of range ({} outcomes)", self.len())))
    }
}

/// Effects `I_x*(I)`.
pub fn induced_observable(ins: &DiscreteInstrument) -> Povm {
    let effects = ins.operations.iter().map(|op| op.kraus_sum()).collect();
    Povm::with_tol(ins.labels.clone(), effects, 1e-8).expect("instrument sums to a channel")
}

/// Normalized `I_x(ρ)`.
pub fn conditional_output(ins: &DiscreteInstrument, rho: &State, x: usize, tol: f64) -> Result<State> {
    let out = ins.apply(x, rho.matrix())?;
    let p = out.trace().re;
    if p <= tol {
        return Err(Error::InvalidParameter(format!(
            "outcome {x} has probability {p:.3e}; conditional state undefined"
        )));
    }
    State::with_tol(out / r(p), 1e-8)
}

/// `I_x(ρ) = A(x)^{1/2} ρ A(x)^{1/2}`.
pub fn luders(a: &Povm) -> DiscreteInstrument {
    let ops = a
        .effects()
        .iter()
        .map(|e| KrausChannel::new(vec![linalg::psd_sqrt(e).expect("effects are positive")]).expect("square"))
        .collect();
    DiscreteInstrument::new(a.labels().to_vec(), ops, 1e-8).expect("Lüders operations sum to a channel")
}

/// `I_x(ρ) = tr[ρA(x)] ξ`.
pub fn trivial_instrument(a: &Povm, xi: &State) -> DiscreteInstrument {
    let xi_eig = linalg::eigh(xi.matrix()).expect("state is Hermitian");
    let ops = a
        .effects()
        .iter()
        .map(|e| {
            let e_eig = linalg::eigh(e).expect("effect is Hermitian");
            let mut kraus = Vec::new();
            for (i, &ai) in e_eig.values.iter().enumerate() {
                for (j, &qj) in xi_eig.values.iter().enumerate() {
                    if ai > 0.0 && qj > 0.0 {
                        kraus.push(xi_eig.vector(j) * e_eig.vector(i).adjoint() * r((ai * qj).sqrt()));
                    }
                }
            }
            if kraus.is_empty() {
                kraus.push(zeros(xi.dim(), a.dim()));
            }
            KrausChannel::new(kraus).expect("consistent shapes")
        })
        .collect();
    DiscreteInstrument::new(a.labels().to_vec(), ops, 1e-8).expect("operations sum to a channel")
}

/// Hermitian operators spanning all `d×d` matrices: `e_jj`, `e_jk + e_kj`,
/// `i(e_jk − e_kj)`.
pub fn hermitian_spanning_set(d: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in j..d {
            let mut sym = zeros(d, d);
            sym[(j, k)] = r(1.0);
            sym[(k, j)] = r(1.0);
            if j == k {
                out.push(sym);
                continue;
            }
            out.push(sym);
            let mut anti = zeros(d, d);
            anti[(j, k)] = c(0.0, 1.0);
            anti[(k, j)] = c(0.0, -1.0);
            out.push(anti);
        }
    }
    out
}

/// `tr[I_x(I_x(ρ))] = tr[I_x(ρ)]` for every outcome, checked on a spanning set.
pub fn is_repeatable(ins: &DiscreteInstrument, tol: f64) -> bool {
    if ins.in_dim() != ins.out_dim() {
        return false;
    }
    let basis = hermitian_spanning_set(ins.in_dim());
    (0..ins.len()).all(|x| {
        basis.iter().all(|b| {
            let once = ins.apply(x, b).expect("square input");
            let twice = ins.apply(x, &once).expect("square input");
            (twice.trace() - once.trace()).norm() <= tol
        })
    })
}

/// `I_x(ρ) = tr[ρA(x)] |ψ_x⟩⟨ψ_x|` with `A(x)ψ_x = ψ_x`. Impossible when some
/// nonzero effect lacks the eigenvalue 1.
pub fn repeatable_instrument(a: &Povm) -> Result<DiscreteInstrument> {
    let d = a.dim();
    let mut ops = Vec::with_capacity(a.len());
    for (x, e) in a.effects().iter().enumerate() {
        let eig = linalg::eigh(e)?;
        let top = eig.values[0];
        if top <= EIGENVALUE_ONE_TOL {
            ops.push(KrausChannel::new(vec![zeros(d, d)])?);
            continue;
        }
        if (top - 1.0).abs() >= EIGENVALUE_ONE_TOL {
            return Err(Error::Impossible(format!(
                "effect {} has largest eigenvalue {top:.6}, so no repeatable instrument exists",
                a.labels()[x]
            )));
        }
        let psi = eig.vector(0);
        let kraus = eig
            .values
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0.0)
            .map(|(i, &l)| &psi * eig.vector(i).adjoint() * r(l.sqrt()))
            .collect();
        ops.push(KrausChannel::new(kraus)?);
    }
    DiscreteInstrument::new(a.labels().to_vec(), ops, 1e-8)
}

pub fn observables_commute(a: &Povm, b: &Povm, tol: f64) -> bool {
    a.effects()
        .iter()
        .all(|x| b.effects().iter().all(|y| max_abs(&(x * y - y * x)) <= tol))
}

/// Whether the Lüders instrument of the sharp `a` changes the statistics of
/// `b`, i.e. `Σ_x A(x)B(y)A(x) ≠ B(y)` for some `y`.
pub fn luders_disturbs(a: &Povm, b: &Povm, tol: f64) -> Result<bool> {
    if !is_sharp(a) {
        return Err(Error::InvalidParameter("the first observable must be sharp".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("observables on {} and {} levels", a.dim(), b.dim())));
    }
    Ok(b.effects().iter().any(|y| {
        let after = a.effects().iter().fold(zeros(a.dim(), a.dim()), |acc, x| acc + x * y * x);
        max_abs(&(after - y)) > tol
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisturbanceReport {
    /// First outcome whose operation is not a multiple of the identity map.
    pub disturbing_outcome: Option<usize>,
    /// First effect of the induced observable that is not a multiple of I.
    pub nontrivial_effect: Option<usize>,
}

impl DisturbanceReport {
    pub fn non_disturbing(&self) -> bool {
        self.disturbing_outcome.is_none()
    }

    pub fn trivial_observable(&self) -> bool {
        self.nontrivial_effect.is_none()
    }

    /// A non-disturbing instrument can only measure a trivial observable.
    pub fn consistent(&self) -> bool {
        !self.non_disturbing() || self.trivial_observable()
    }
}

/// Checks `I_x(ρ) = c_x ρ` on a spanning set and whether every induced effect is
/// `c_x I`.
pub fn no_information_no_disturbance_check(ins: &DiscreteInstrument, tol: f64) -> DisturbanceReport {
    let d = ins.in_dim();
    let basis = hermitian_spanning_set(d);
    let observable = induced_observable(ins);
    let scalar = |e: &ComplexMatrix| e.trace() / r(d as f64);
    let disturbing_outcome = (0..ins.len()).find(|&x| {
        if ins.out_dim() != d {
            return true;
        }
        let cx = scalar(observable.effect(x));
        basis.iter().any(|b| max_abs(&(ins.apply(x, b).expect("square input") - b * cx)) > tol)
    });
    let nontrivial_effect = observable
        .effects()
        .iter()
        .position(|e| max_abs(&(e - identity(d) * scalar(e))) > tol);
    DisturbanceReport { disturbing_outcome, nontrivial_effect }
}

/// Probe in `probe_state`, coupled by a unitary on system⊗probe, then read by
/// `pointer`.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    probe_state: State,
    coupling: ComplexMatrix,
    pointer: Povm,
}

impl MeasurementModel {
    pub fn new(probe_state: State, coupling: ComplexMatrix, pointer: Povm, tol: f64) -> Result<MeasurementModel> {
        let k = probe_state.dim();
        if pointer.dim() != k {
            return Err(Error::Dimension(format!("pointer on {} levels, probe on {k}", pointer.dim())));
        }
        let n = coupling.nrows();
        if coupling.ncols() != n || !n.is_multiple_of(k) {
            return Err(Error::Dimension(format!("coupling of shape {:?} for a {k}-level probe", coupling.shape())));
        }
        if !coupling.is_unitary(tol) {
            return Err(Error::InvalidParameter("coupling is not unitary".into()));
        }
        Ok(MeasurementModel { probe_state, coupling, pointer })
    }

    pub fn probe_state(&self) -> &State {
        &self.probe_state
    }

    pub fn coupling(&self) -> &ComplexMatrix {
        &self.coupling
    }

    pub fn pointer(&self) -> &Povm {
        &self.pointer
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_state.dim()
    }

    pub fn system_dim(&self) -> usize {
        self.coupling.nrows() / self.probe_dim()
    }

    /// `tr_probe[V(ρ⊗ρ_0)V†(I⊗F(x))]` computed directly.
    pub fn conditional_operation(&self, x: usize, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let (d, k) = (self.system_dim(), self.probe_dim());
        if rho.shape() != (d, d) {
            return Err(Error::Dimension(format!("model acts on {d} levels")));
        }
        let joint = &self.coupling * tensor(rho, self.probe_state.matrix()) * self.coupling.adjoint();
        let read = joint * tensor(&identity(d), self.pointer.effect(x));
        linalg::partial_trace(&read, d, k, Side::B)
    }
}

/// Kraus form of the instrument a measurement model induces:
/// `K = √(q_j f_l) (I⊗⟨g_l|) V (I⊗|φ_j⟩)` over the eigenpairs of the probe
/// state and of each pointer effect.
pub fn memo_to_instrument(m: &MeasurementModel) -> Result<DiscreteInstrument> {
    let d = m.system_dim();
    let probe = linalg::eigh(m.probe_state.matrix())?;
    let mut ops = Vec::with_capacity(m.pointer.len());
    for f in m.pointer.effects() {
        let fe = linalg::eigh(f)?;
        let mut kraus = Vec::new();
        for (j, &q) in probe.values.iter().enumerate() {
            for (l, &fl) in fe.values.iter().enumerate() {
                if q <= 1e-14 || fl <= 1e-14 {
                    continue;
                }
                let phi = probe.vector(j);
                let g = fe.vector(l);
                let op = tensor(&identity(d), &g.adjoint()) * &m.coupling * tensor(&identity(d), &phi);
                kraus.push(op * r((q * fl).sqrt()));
            }
        }
        if kraus.is_empty() {
            kraus.push(zeros(d, d));
        }
        ops.push(KrausChannel::new(kraus)?);
    }
    DiscreteInstrument::new(m.pointer.labels().to_vec(), ops, 1e-8)
}

/// `V: ψ_j⊗φ_0 ↦ ψ_j⊗φ_j` with `V = Σ_j |ψ_j⟩⟨ψ_j| ⊗ S^j` for the cyclic shift
/// `S` on the probe, and pointer `{|φ_j⟩⟨φ_j|}`.
pub fn luders_memo(basis: &[ComplexMatrix]) -> Result<MeasurementModel> {
    let d = basis.len();
    crate::states::check_orthonormal(basis, 1e-9)?;
    if basis[0].nrows() != d {
        return Err(Error::Dimension("basis must span the system".into()));
    }
    let shift = ComplexMatrix::from_fn(d, d, |i, j| if i == (j + 1) % d { r(1.0) } else { r(0.0) });
    let mut coupling = zeros(d * d, d * d);
    let mut power = identity(d);
    for psi in basis {
        coupling += tensor(&projector(psi), &power);
        power = &shift * power;
    }
    MeasurementModel::new(State::pure(&linalg::basis_ket(d, 0))?, coupling, Povm::computational(d), 1e-9)
}

/// A normal measurement model realizing `ins`: pure probe `φ_0`, the dilation
/// unitary of the outcome-tagged Kraus list, and the sharp pointer that
/// projects on each outcome's block of probe levels.
pub fn normal_memo(ins: &DiscreteInstrument) -> Result<MeasurementModel> {
    if ins.in_dim() != ins.out_dim() {
        return Err(Error::Dimension("a unitary coupling needs equal input and output dimension".into()));
    }
    let kraus: Vec<ComplexMatrix> = ins.operations.iter().flat_map(|op| op.kraus().iter().cloned()).collect();
    let n = kraus.len();
    let (coupling, _) = channels::dilation_unitary(&kraus);
    let mut effects = Vec::with_capacity(ins.len());
    let mut start = 0;
    for op in &ins.operations {
        let mut f = zeros(n, n);
        for j in start..start + op.len() {
            f[(j, j)] = r(1.0);
        }
        start += op.len();
        effects.push(f);
    }
    let pointer = Povm::new(ins.labels.clone(), effects)?;
    MeasurementModel::new(State::pure(&linalg::basis_ket(n, 0))?, coupling, pointer, 1e-8)
}
