//! Seeded simulations of standard protocols built from the rest of the crate.
//!
//! Every protocol takes a `seed`; round `n` draws from the ChaCha8 stream `n`
//! of that seed, so a report depends only on its arguments.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{self, ChoiMatrix, KrausChannel, LinearMap};
use crate::discrimination::{self, fidelity_matrices, Conclusion};
use crate::error::{Error, Result};
use crate::instruments::{memo_to_instrument, MeasurementModel};
use crate::linalg::{
    self, basis_ket, c, identity, inner, ket, max_abs, projector, r, real_ket, tensor, zeros, ComplexMatrix,
    OperatorExt, Side, C64,
};
use crate::observables::{outcome_distribution, Povm};
use crate::random;
use crate::states::State;

pub type Record = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub protocol: String,
    pub seed: u64,
    pub rounds: usize,
    pub records: Vec<Record>,
    pub summary: BTreeMap<String, f64>,
}

impl ProtocolReport {
    fn new(protocol: &str, seed: u64, records: Vec<Record>) -> ProtocolReport {
        ProtocolReport { protocol: protocol.into(), seed, rounds: records.len(), records, summary: BTreeMap::new() }
    }

    fn set(&mut self, key: &str, value: f64) {
        self.summary.insert(key.into(), value);
    }

    /// Values of `key` over all records that carry it.
    pub fn column(&self, key: &str) -> Vec<f64> {
        self.records.iter().filter_map(|rec| rec.get(key).copied()).collect()
    }

    /// Mean of `key` over the records where `filter` is 1.
    pub fn conditional_mean(&self, key: &str, filter: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .records
            .iter()
            .filter(|rec| rec.get(filter) == Some(&1.0))
            .filter_map(|rec| rec.get(key).copied())
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn record(pairs: &[(&str, f64)]) -> Record {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Generator for round `round` of a run seeded with `seed`.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

fn sample<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<usize> {
    let w: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
    let dist = WeightedIndex::new(&w).map_err(|e| Error::Numeric(format!("cannot sample outcome: {e}")))?;
    Ok(dist.sample(rng))
}

/// The `d²` unitaries `U_rs = Σ_l e^{−2πisl/d} |l ⊖ r⟩⟨l|` and the Bell kets
/// `(U_rs⊗I)ψ+`, indexed by `r*d + s`.
#[derive(Debug, Clone)]
pub struct ShiftMultiplyBasis {
    d: usize,
    unitaries: Vec<ComplexMatrix>,
    bell: Vec<ComplexMatrix>,
}

impl ShiftMultiplyBasis {
    pub fn new(d: usize) -> Result<ShiftMultiplyBasis> {
        if d < 2 {
            return Err(Error::InvalidParameter(format!("dimension {d} < 2")));
        }
        let psi = crate::entanglement::maximally_entangled_ket(d);
        let mut unitaries = Vec::with_capacity(d * d);
        for rr in 0..d {
            for s in 0..d {
                let mut u = zeros(d, d);
                for l in 0..d {
                    let phase = -2.0 * PI * (s * l) as f64 / d as f64;
                    u[((l + d - rr) % d, l)] = C64::from_polar(1.0, phase);
                }
                unitaries.push(u);
            }
        }
        let bell = unitaries.iter().map(|u| tensor(u, &identity(d)) * &psi).collect();
        Ok(ShiftMultiplyBasis { d, unitaries, bell })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn unitaries(&self) -> &[ComplexMatrix] {
        &self.unitaries
    }

    pub fn unitary(&self, r: usize, s: usize) -> &ComplexMatrix {
        &self.unitaries[r * self.d + s]
    }

    pub fn bell_kets(&self) -> &[ComplexMatrix] {
        &self.bell
    }

    pub fn bell_povm(&self) -> Povm {
        let labels = (0..self.d * self.d).map(|j| format!("{},{}", j / self.d, j % self.d)).collect();
        Povm::new(labels, self.bell.iter().map(projector).collect()).expect("Bell kets form a basis")
    }
}

/// Post-measurement branches of `ρ_in ⊗ P+` under the Bell measurement on the
/// first two factors, each corrected by `U_rs` on the last.
fn teleport_branches(smb: &ShiftMultiplyBasis, rho: &ComplexMatrix) -> Result<Vec<(f64, ComplexMatrix)>> {
    let d = smb.d;
    let pplus = projector(&crate::entanglement::maximally_entangled_ket(d));
    let joint = tensor(rho, &pplus);
    smb.bell
        .iter()
        .zip(&smb.unitaries)
        .map(|(b, u)| {
            let p = tensor(&projector(b), &identity(d));
            let branch = &p * &joint * &p;
            let bob = linalg::partial_trace(&branch, d * d, d, Side::A)?;
            let prob = bob.trace().re;
            Ok((prob, u * bob * u.adjoint()))
        })
        .collect()
}

/// The whole protocol as a channel `ρ ↦ Σ_rs U_rs tr_{A′A}[(P_rs⊗I)(ρ⊗P+)] U_rs†`.
pub fn teleportation_channel(d: usize) -> Result<ChoiMatrix> {
    let smb = ShiftMultiplyBasis::new(d)?;
    Ok(ChoiMatrix::from_map(d, d, |x| {
        teleport_branches(&smb, x)
            .expect("dimensions fixed by construction")
            .into_iter()
            .fold(zeros(d, d), |acc, (_, m)| acc + m)
    }))
}

/// Teleport `rho_in` through `P+`. One record per Bell outcome with its
/// probability and the corrected output's fidelity to the input; the seeded
/// draw picks the outcome that actually occurs.
pub fn teleport(rho_in: &State, seed: u64) -> Result<ProtocolReport> {
    let d = rho_in.dim();
    let smb = ShiftMultiplyBasis::new(d)?;
    let branches = teleport_branches(&smb, rho_in.matrix())?;
    let mut records = Vec::with_capacity(d * d);
    for (j, (p, out)) in branches.iter().enumerate() {
        let fid = fidelity_matrices(rho_in.matrix(), &(out / r(*p)));
        records.push(record(&[("r", (j / d) as f64), ("s", (j % d) as f64), ("probability", *p), ("fidelity", fid)]));
    }
    let probs: Vec<f64> = branches.iter().map(|(p, _)| *p).collect();
    let occurred = sample(&probs, &mut round_rng(seed, 0))?;
    let mut rep = ProtocolReport::new("teleport", seed, records);
    let fids = rep.column("fidelity");
    rep.set("dim", d as f64);
    rep.set("max_probability_deviation", probs.iter().map(|p| (p - 1.0 / (d * d) as f64).abs()).fold(0.0, f64::max));
    rep.set("min_fidelity", fids.iter().copied().fold(f64::INFINITY, f64::min));
    rep.set("sampled_outcome", occurred as f64);
    rep.set("sampled_fidelity", fids[occurred]);
    Ok(rep)
}

fn pauli_bell_kets() -> Vec<ComplexMatrix> {
    let psi = crate::entanglement::maximally_entangled_ket(2);
    linalg::paulis().iter().map(|s| tensor(s, &identity(2)) * &psi).collect()
}

/// Dense coding of each message `j ∈ {0,1,2,3}` as `(σ_j⊗I)ψ+`, decoded by
/// Bob's Bell measurement.
pub fn superdense(messages: &[usize], seed: u64) -> Result<ProtocolReport> {
    let bell = pauli_bell_kets();
    let bell_povm = Povm::from_basis(&bell)?;
    let psi = crate::entanglement::maximally_entangled_ket(2);
    let mut records = Vec::with_capacity(messages.len());
    for (n, &m) in messages.iter().enumerate() {
        if m > 3 {
            return Err(Error::InvalidParameter(format!("message {m} is not two bits")));
        }
        let sent = tensor(&linalg::paulis()[m], &identity(2)) * &psi;
        let rho = State::pure(&sent)?;
        let probs = outcome_distribution(&bell_povm, &rho)?;
        let decoded = sample(&probs, &mut round_rng(seed, n as u64))?;
        let carried = linalg::partial_trace(rho.matrix(), 2, 2, Side::B)?;
        let marginal_dev = max_abs(&(carried - identity(2) * r(0.5)));
        records.push(record(&[
            ("message", m as f64),
            ("decoded", decoded as f64),
            ("correct", flag(decoded == m)),
            ("p_decode", probs[m]),
            ("marginal_deviation", marginal_dev),
        ]));
    }
    let mut rep = ProtocolReport::new("superdense", seed, records);
    rep.set("success_rate", mean(&rep.column("correct")));
    rep.set("min_decode_probability", rep.column("p_decode").into_iter().fold(1.0, f64::min));
    rep.set("max_marginal_deviation", rep.column("marginal_deviation").into_iter().fold(0.0, f64::max));
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Eve {
    None,
    InterceptResend,
}

#[derive(Debug, Clone, Copy)]
pub struct Bb84Options {
    pub eve: Eve,
    /// Share of the sifted key published to estimate the error rate.
    pub sample_fraction: f64,
}

impl Default for Bb84Options {
    fn default() -> Self {
        Bb84Options { eve: Eve::None, sample_fraction: 0.25 }
    }
}

/// Basis 0 is `{|0⟩, |1⟩}`, basis 1 is `{|+⟩, |−⟩}`.
fn bb84_ket(basis: usize, bit: usize) -> ComplexMatrix {
    match (basis, bit) {
        (0, b) => basis_ket(2, b),
        (_, 0) => real_ket(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]),
        _ => real_ket(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]),
    }
}

fn bb84_measure<R: Rng + ?Sized>(state: &ComplexMatrix, basis: usize, rng: &mut R) -> Result<usize> {
    let povm = Povm::from_basis(&[bb84_ket(basis, 0), bb84_ket(basis, 1)])?;
    sample(&outcome_distribution(&povm, &State::pure(state)?)?, rng)
}

pub fn bb84(rounds: usize, opts: Bb84Options, seed: u64) -> Result<ProtocolReport> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("at least one round".into()));
    }
    if !(0.0..=1.0).contains(&opts.sample_fraction) {
        return Err(Error::InvalidParameter(format!("sample fraction {}", opts.sample_fraction)));
    }
    let mut records = Vec::with_capacity(rounds);
    for n in 0..rounds {
        let mut rng = round_rng(seed, n as u64);
        let a_bit = rng.random_range(0..2usize);
        let a_basis = rng.random_range(0..2usize);
        let b_basis = rng.random_range(0..2usize);
        let release = rng.random::<f64>() < opts.sample_fraction;
        let mut carrier = bb84_ket(a_basis, a_bit);
        let mut rec = record(&[("alice_bit", a_bit as f64), ("alice_basis", a_basis as f64), ("bob_basis", b_basis as f64)]);
        if opts.eve == Eve::InterceptResend {
            let e_basis = rng.random_range(0..2usize);
            let e_bit = bb84_measure(&carrier, e_basis, &mut rng)?;
            carrier = bb84_ket(e_basis, e_bit);
            rec.insert("eve_basis".into(), e_basis as f64);
            rec.insert("eve_bit".into(), e_bit as f64);
            rec.insert("eve_basis_match".into(), flag(e_basis == a_basis));
            rec.insert("eve_correct".into(), flag(e_bit == a_bit));
        }
        let b_bit = bb84_measure(&carrier, b_basis, &mut rng)?;
        let sifted = a_basis == b_basis;
        rec.insert("bob_bit".into(), b_bit as f64);
        rec.insert("sifted".into(), flag(sifted));
        rec.insert("released".into(), flag(sifted && release));
        rec.insert("error".into(), flag(a_bit != b_bit));
        records.push(rec);
    }
    let mut rep = ProtocolReport::new("bb84", seed, records);
    let sifted = rep.column("sifted").iter().sum::<f64>();
    let released = rep.column("released").iter().sum::<f64>();
    rep.set("sift_rate", sifted / rounds as f64);
    rep.set("released", released);
    rep.set("key_length", sifted - released);
    rep.set("qber", rep.conditional_mean("error", "released").unwrap_or(0.0));
    rep.set("sifted_error_rate", rep.conditional_mean("error", "sifted").unwrap_or(0.0));
    rep.set("sample_fraction", opts.sample_fraction);
    rep.set("eve", flag(opts.eve == Eve::InterceptResend));
    if opts.eve == Eve::InterceptResend {
        rep.set("eve_known_fraction", rep.conditional_mean("eve_basis_match", "sifted").unwrap_or(0.0));
        rep.set("eve_correct_fraction", rep.conditional_mean("eve_correct", "sifted").unwrap_or(0.0));
    }
    Ok(rep)
}

/// Bit 0 is sent as `|0⟩`, bit 1 as `o|0⟩ + √(1−o²)|1⟩`; Bob applies the
/// optimal unambiguous measurement for equal priors.
pub fn b92(rounds: usize, overlap: f64, seed: u64) -> Result<ProtocolReport> {
    if rounds == 0 {
        return Err(Error::InvalidParameter("at least one round".into()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("overlap {overlap} outside [0,1)")));
    }
    let kets = [basis_ket(2, 0), real_ket(&[overlap, (1.0 - overlap * overlap).sqrt()])];
    let disc = discrimination::unambiguous_two_pure(&kets[0], &kets[1], 0.5)?;
    let dists = [
        outcome_distribution(&disc.povm, &State::pure(&kets[0])?)?,
        outcome_distribution(&disc.povm, &State::pure(&kets[1])?)?,
    ];
    let mut records = Vec::with_capacity(rounds);
    for n in 0..rounds {
        let mut rng = round_rng(seed, n as u64);
        let bit = rng.random_range(0..2usize);
        let outcome = sample(&dists[bit], &mut rng)?;
        let (conclusive, guess) = match disc.conclusions[outcome] {
            Conclusion::First => (true, 0),
            Conclusion::Second => (true, 1),
            Conclusion::Inconclusive => (false, 0),
        };
        records.push(record(&[
            ("alice_bit", bit as f64),
            ("outcome", outcome as f64),
            ("conclusive", flag(conclusive)),
            ("error", flag(conclusive && guess != bit)),
        ]));
    }
    let mut rep = ProtocolReport::new("b92", seed, records);
    rep.set("overlap", overlap);
    rep.set("conclusive_rate", mean(&rep.column("conclusive")));
    rep.set("conclusive_errors", rep.column("error").iter().sum());
    rep.set("expected_conclusive_rate", disc.p_success);
    Ok(rep)
}

/// Encrypt random pure messages with a uniformly drawn `U_rs` per message.
pub fn private_quantum_channel(d: usize, n_messages: usize, seed: u64) -> Result<ProtocolReport> {
    let smb = ShiftMultiplyBasis::new(d)?;
    let mixed = State::maximally_mixed(d);
    let mut records = Vec::with_capacity(n_messages);
    for n in 0..n_messages {
        let mut rng = round_rng(seed, n as u64);
        let msg = random::pure_state(d, &mut rng);
        let key = rng.random_range(0..d * d);
        let u = &smb.unitaries[key];
        let cipher = u * &msg * u.adjoint();
        let decoded = u.adjoint() * &cipher * u;
        let keyless = smb.unitaries.iter().fold(zeros(d, d), |acc, v| acc + v * &msg * v.adjoint()) / r((d * d) as f64);
        records.push(record(&[
            ("key", key as f64),
            ("fidelity", fidelity_matrices(&msg, &decoded)),
            ("keyless_deviation", max_abs(&(keyless - mixed.matrix()))),
        ]));
    }
    let average = channels::random_unitary(
        &smb.unitaries.iter().map(|u| (1.0 / (d * d) as f64, u.clone())).collect::<Vec<_>>(),
    )?;
    let mut rep = ProtocolReport::new("pqc", seed, records);
    rep.set("dim", d as f64);
    rep.set("min_fidelity", rep.column("fidelity").into_iter().fold(1.0, f64::min));
    rep.set("max_keyless_deviation", rep.column("keyless_deviation").into_iter().fold(0.0, f64::max));
    rep.set("average_choi_distance", channels::choi_distance(&average, &channels::contraction(&mixed))?);
    rep.set("key_bits", 2.0 * n_messages as f64 * (d as f64).log2());
    Ok(rep)
}

/// Alice's measurement basis, `↑ = |0⟩`, `↓ = |1⟩`.
pub fn mean_king_basis() -> [ComplexMatrix; 4] {
    let h = FRAC_1_SQRT_2;
    let p = C64::from_polar(0.5, PI / 4.0);
    let m = C64::from_polar(0.5, -PI / 4.0);
    // amplitudes of |↑↑⟩, |↑↓⟩, |↓↑⟩, |↓↓⟩
    [
        ket(&[m, r(h), r(0.0), -p]),
        ket(&[-m, r(h), r(0.0), p]),
        ket(&[p, r(0.0), r(h), -m]),
        ket(&[-p, r(0.0), r(h), m]),
    ]
}

/// Published table of `|⟨θ_k|Φ_{b,±}⟩|²`, columns `x+, x−, y+, y−, z+, z−`.
pub const MEAN_KING_TABLE: [[f64; 6]; 4] = [
    [0.5, 0.0, 0.5, 0.0, 0.0, 0.5],
    [0.0, 0.5, 0.0, 0.5, 0.0, 0.5],
    [0.0, 0.5, 0.5, 0.0, 0.5, 0.0],
    [0.5, 0.0, 0.0, 0.5, 0.5, 0.0],
];

/// `(|↑_b⟩, |↓_b⟩)` for `b = x, y, z`.
fn spin_kets(b: usize) -> [ComplexMatrix; 2] {
    let h = FRAC_1_SQRT_2;
    match b {
        0 => [real_ket(&[h, h]), real_ket(&[h, -h])],
        1 => [ket(&[r(h), c(0.0, h)]), ket(&[r(h), c(0.0, -h)])],
        _ => [basis_ket(2, 0), basis_ket(2, 1)],
    }
}

/// `Φ_{b,+} = |↓_b⟩⊗|↑_b⟩`, `Φ_{b,−} = |↑_b⟩⊗|↓_b⟩`; the king holds the second qubit.
fn king_kets(b: usize) -> [ComplexMatrix; 2] {
    let [up, down] = spin_kets(b);
    [tensor(&down, &up), tensor(&up, &down)]
}

pub fn mean_king_table() -> [[f64; 6]; 4] {
    let theta = mean_king_basis();
    let mut t = [[0.0; 6]; 4];
    for (k, th) in theta.iter().enumerate() {
        for b in 0..3 {
            for (sign, phi) in king_kets(b).iter().enumerate() {
                t[k][2 * b + sign] = inner(th, phi).norm_sqr();
            }
        }
    }
    t
}

/// Alice's guess for the king's sign (0 for `+`) given her outcome and the
/// revealed axis, read off the published table.
fn mean_king_guess(k: usize, b: usize) -> Option<usize> {
    match (MEAN_KING_TABLE[k][2 * b] > 0.0, MEAN_KING_TABLE[k][2 * b + 1] > 0.0) {
        (true, false) => Some(0),
        (false, true) => Some(1),
        _ => None,
    }
}

/// Alice prepares the singlet, the king measures `σ_b` on his qubit (Lüders),
/// Alice measures `θ_k` on both and, once `b` is revealed, names the king's
/// result. Round `n` uses axis `n mod 3`.
pub fn mean_king(rounds: usize, seed: u64) -> Result<ProtocolReport> {
    let theta = mean_king_basis();
    let gram_dev = (0..4)
        .flat_map(|j| (0..4).map(move |k| (j, k)))
        .map(|(j, k)| (inner(&theta[j], &theta[k]) - r(if j == k { 1.0 } else { 0.0 })).norm())
        .fold(0.0, f64::max);
    let alice = Povm::from_basis(&theta)?;
    let singlet = State::pure(&real_ket(&[0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0]))?;

    // conditional states and outcome probabilities for every axis and sign
    let mut king = Vec::with_capacity(3);
    let mut exact = 0.0;
    let mut max_branch_dev: f64 = 0.0;
    for b in 0..3 {
        let [up, down] = spin_kets(b);
        let mut branches = Vec::with_capacity(2);
        for (sign, (proj, expect)) in [projector(&up), projector(&down)].iter().zip(king_kets(b)).enumerate() {
            let p = tensor(&identity(2), proj);
            let post = &p * singlet.matrix() * &p;
            let prob = post.trace().re;
            let post = State::with_tol(post / r(prob), 1e-9)?;
            max_branch_dev = max_branch_dev.max(max_abs(&(post.matrix() - projector(&expect))));
            let alice_probs = outcome_distribution(&alice, &post)?;
            for (k, q) in alice_probs.iter().enumerate() {
                if mean_king_guess(k, b) == Some(sign) {
                    exact += prob * q / 3.0;
                }
            }
            branches.push((prob, alice_probs));
        }
        king.push(branches);
    }

    let mut records = Vec::with_capacity(rounds);
    for n in 0..rounds {
        let mut rng = round_rng(seed, n as u64);
        let b = n % 3;
        let sign = sample(&[king[b][0].0, king[b][1].0], &mut rng)?;
        let k = sample(&king[b][sign].1, &mut rng)?;
        let guess = mean_king_guess(k, b);
        records.push(record(&[
            ("axis", b as f64),
            ("king_sign", sign as f64),
            ("alice_outcome", k as f64),
            ("correct", flag(guess == Some(sign))),
        ]));
    }
    let table = mean_king_table();
    let mut rep = ProtocolReport::new("meanking", seed, records);
    let mut mismatches = 0.0;
    for k in 0..4 {
        for col in 0..6 {
            if (table[k][col] - MEAN_KING_TABLE[k][col]).abs() > 1e-12 {
                mismatches += 1.0;
            }
            rep.set(&format!("table_{}_{col}", k + 1), table[k][col]);
        }
    }
    rep.set("table_mismatches", mismatches);
    rep.set("gram_deviation", gram_dev);
    rep.set("branch_deviation", max_branch_dev);
    rep.set("exact_success_probability", exact);
    rep.set("success_rate", mean(&rep.column("correct")));
    Ok(rep)
}

/// A programmable processor: a unitary `G` on data ⊗ program.
#[derive(Debug, Clone)]
pub struct Processor {
    data_dim: usize,
    program_dim: usize,
    gate: ComplexMatrix,
}

impl Processor {
    pub fn new(data_dim: usize, gate: ComplexMatrix, tol: f64) -> Result<Processor> {
        let n = gate.nrows();
        if data_dim == 0 || gate.ncols() != n || !n.is_multiple_of(data_dim) {
            return Err(Error::Dimension(format!("gate of shape {:?} for data dimension {data_dim}", gate.shape())));
        }
        if !gate.is_unitary(tol) {
            return Err(Error::InvalidParameter("processor gate is not unitary".into()));
        }
        Ok(Processor { data_dim, program_dim: n / data_dim, gate })
    }

    pub fn data_dim(&self) -> usize {
        self.data_dim
    }

    pub fn program_dim(&self) -> usize {
        self.program_dim
    }

    pub fn gate(&self) -> &ComplexMatrix {
        &self.gate
    }

    /// `A_j = (I⊗⟨j|) G (I⊗|Ξ⟩)` over the computational program basis.
    pub fn program_kraus(&self, program: &ComplexMatrix) -> Result<Vec<ComplexMatrix>> {
        if program.shape() != (self.program_dim, 1) {
            return Err(Error::Dimension(format!("program ket must have {} entries", self.program_dim)));
        }
        let id = identity(self.data_dim);
        let applied = &self.gate * tensor(&id, program);
        Ok((0..self.program_dim)
            .map(|j| tensor(&id, &basis_ket(self.program_dim, j).adjoint()) * &applied)
            .collect())
    }

    /// The channel `ρ ↦ tr_prog[G(ρ⊗ξ)G†]` programmed by a (mixed) state.
    pub fn channel(&self, program: &State) -> Result<ChoiMatrix> {
        if program.dim() != self.program_dim {
            return Err(Error::Dimension(format!("program must live on {} levels", self.program_dim)));
        }
        let (d, k) = (self.data_dim, self.program_dim);
        Ok(ChoiMatrix::from_map(d, d, |x| {
            let joint = &self.gate * tensor(x, program.matrix()) * self.gate.adjoint();
            linalg::partial_trace(&joint, d, k, Side::B).expect("shape fixed by construction")
        }))
    }

    pub fn pure_channel(&self, program: &ComplexMatrix) -> Result<KrausChannel> {
        KrausChannel::new(self.program_kraus(program)?)
    }
}

/// `G = Σ_j U_j ⊗ |j⟩⟨j|`.
pub fn controlled_unitary_processor(unitaries: &[ComplexMatrix]) -> Result<Processor> {
    let Some(first) = unitaries.first() else {
        return Err(Error::InvalidParameter("no unitaries".into()));
    };
    let (d, n) = (first.nrows(), unitaries.len());
    let mut gate = zeros(d * n, d * n);
    for (j, u) in unitaries.iter().enumerate() {
        if u.shape() != (d, d) {
            return Err(Error::Dimension("unitaries of different sizes".into()));
        }
        gate += tensor(u, &projector(&basis_ket(n, j)));
    }
    Processor::new(d, gate, 1e-9)
}

#[derive(Debug, Clone)]
pub struct ProcessorPair {
    pub processor: Processor,
    pub program1: ComplexMatrix,
    pub program2: ComplexMatrix,
}

/// One processor for two channels: the dilation unitaries `V1, V2` of the
/// Kraus lists act on the blocks `H⊗K1` and `H⊗K2` of `H⊗(K1⊕K2)`, and the
/// programs are the first basis vectors of `K1` and `K2`.
pub fn processor_pair(e1: &KrausChannel, e2: &KrausChannel, tol: f64) -> Result<ProcessorPair> {
    for e in [e1, e2] {
        if !e.is_trace_preserving(tol) {
            return Err(Error::NotTracePreserving(max_abs(&(e.kraus_sum() - identity(e.in_dim())))));
        }
        if e.in_dim() != e.out_dim() {
            return Err(Error::Dimension("processor channels must map a system to itself".into()));
        }
    }
    let d = e1.in_dim();
    if e2.in_dim() != d {
        return Err(Error::Dimension("channels on different systems".into()));
    }
    let (n1, n2) = (e1.len(), e2.len());
    let k = n1 + n2;
    let (v1, _) = channels::dilation_unitary(e1.kraus());
    let (v2, _) = channels::dilation_unitary(e2.kraus());
    let mut gate = zeros(d * k, d * k);
    for i in 0..d {
        for j in 0..d {
            for a in 0..n1 {
                for b in 0..n1 {
                    gate[(i * k + a, j * k + b)] = v1[(i * n1 + a, j * n1 + b)];
                }
            }
            for a in 0..n2 {
                for b in 0..n2 {
                    gate[(i * k + n1 + a, j * k + n1 + b)] = v2[(i * n2 + a, j * n2 + b)];
                }
            }
        }
    }
    Ok(ProcessorPair { processor: Processor::new(d, gate, tol)?, program1: basis_ket(k, 0), program2: basis_ket(k, n1) })
}

/// `(Σ_j A_j†B_j, ⟨Ξ1|Ξ2⟩)` for the Kraus operators `A_j`, `B_j` the processor
/// assigns to the two programs; the first equals the second times `I`.
pub fn processor_identity_check(p: &Processor, xi1: &ComplexMatrix, xi2: &ComplexMatrix) -> Result<(ComplexMatrix, C64)> {
    let a = p.program_kraus(xi1)?;
    let b = p.program_kraus(xi2)?;
    let lhs = a.iter().zip(&b).fold(zeros(p.data_dim, p.data_dim), |acc, (x, y)| acc + x.adjoint() * y);
    Ok((lhs, inner(xi1, xi2)))
}

/// `Ξ_η = √η Ξ_I + √(1−η) Ξ_U` on the program space of
/// `controlled_unitary_processor(&[I, U])`, which then runs `ηρ + (1−η)UρU†`.
pub fn phase_damping_program(eta: f64) -> Result<ComplexMatrix> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("eta {eta} outside [0,1]")));
    }
    Ok(real_ket(&[eta.sqrt(), (1.0 - eta).sqrt()]))
}

/// Controlled-`U_rs` processor with the success pointer `|φ⟩⟨φ|`,
/// `φ = (1/d) Σ_rs φ_rs`, programmed with `Ξ = Σ_rs a_rs φ_rs`,
/// `a_rs = tr[U_rs†U]/d`.
#[derive(Debug, Clone)]
pub struct ProbabilisticProcessor {
    pub basis: ShiftMultiplyBasis,
    pub model: MeasurementModel,
    pub amplitudes: Vec<C64>,
}

pub fn probabilistic_processor_model(target: &ComplexMatrix) -> Result<ProbabilisticProcessor> {
    let d = target.nrows();
    if !target.is_unitary(1e-9) {
        return Err(Error::InvalidParameter("target is not unitary".into()));
    }
    let basis = ShiftMultiplyBasis::new(d)?;
    let n = d * d;
    let gate = controlled_unitary_processor(&basis.unitaries)?.gate;
    let amplitudes: Vec<C64> = basis.unitaries.iter().map(|u| (u.adjoint() * target).trace() / r(d as f64)).collect();
    let program = ket(&amplitudes);
    let phi = ComplexMatrix::from_element(n, 1, r(1.0 / d as f64));
    let f = projector(&phi);
    let pointer = Povm::new(vec!["success".into(), "failure".into()], vec![f.clone(), identity(n) - f])?;
    let model = MeasurementModel::new(State::pure(&program)?, gate, pointer, 1e-9)?;
    Ok(ProbabilisticProcessor { basis, model, amplitudes })
}

/// Run the probabilistic processor for `target` on random inputs.
pub fn probabilistic_processor(target: &ComplexMatrix, rounds: usize, seed: u64) -> Result<ProtocolReport> {
    let pp = probabilistic_processor_model(target)?;
    let d = target.nrows();
    let ins = memo_to_instrument(&pp.model)?;
    let mut records = Vec::with_capacity(rounds);
    for n in 0..rounds {
        let mut rng = round_rng(seed, n as u64);
        let rho = State::new(random::state(d, &mut rng))?;
        let p = ins.probability(0, &rho)?;
        let out = ins.apply(0, rho.matrix())? / r(p);
        let want = target * rho.matrix() * target.adjoint();
        let success = rng.random::<f64>() < p;
        records.push(record(&[
            ("p_success", p),
            ("fidelity", fidelity_matrices(&want, &out)),
            ("success", flag(success)),
        ]));
    }
    let mut rep = ProtocolReport::new("processor", seed, records);
    rep.set("dim", d as f64);
    rep.set("amplitude_norm", pp.amplitudes.iter().map(|a| a.norm_sqr()).sum());
    let ps = rep.column("p_success");
    rep.set("p_success", mean(&ps));
    rep.set("max_p_deviation", ps.iter().map(|p| (p - 1.0 / (d * d) as f64).abs()).fold(0.0, f64::max));
    rep.set("min_fidelity", rep.column("fidelity").into_iter().fold(1.0, f64::min));
    rep.set("success_rate", mean(&rep.column("success")));
    Ok(rep)
}
