//! Batch command-line front end.
//!
//! Matrices travel as [`MatrixDocument`] JSON with complex entries written as
//! `[re, im]` pairs in row-major order. Every command prints one JSON document
//! (or a flat `key,value` CSV table) on stdout; failures print a JSON error on
//! stderr and exit with 2 for invalid input or 3 for numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::channels::{self, ChoiMatrix, KrausChannel, LinearMap};
use crate::discrimination::{self, Conclusion};
use crate::entanglement::{self, BipartiteState, MefOptions};
use crate::error::Error;
use crate::linalg::{self, ComplexMatrix, OperatorExt, C64};
use crate::observables::Povm;
use crate::protocols::{self, Bb84Options, Eve};
use crate::random;
use crate::states::State;

/// Environment variable consulted for the tolerance when `--tol` is absent.
pub const TOL_ENV: &str = "QINFO_TOL";
pub const DEFAULT_TOL: f64 = 1e-9;
const SIGNIFICANT_DIGITS: usize = 12;
const MAX_DIM: usize = 32;
const MAX_ROUNDS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    State,
    Effect,
    Povm,
    Kraus,
    Choi,
    Ket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entries {
    Single(Vec<[f64; 2]>),
    Many(Vec<Vec<[f64; 2]>>),
}

/// A matrix, or a list of equally shaped matrices for `povm` and `kraus`.
///
/// `dims` is `[rows, cols]` of each matrix. `bipartite` gives the tensor
/// factors: `[dA, dB]` for states, `[d_out, d_in]` for a Choi matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDocument {
    pub kind: Kind,
    pub dims: [usize; 2],
    pub entries: Entries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bipartite: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub enum MatrixObject {
    State(State),
    Effect(ComplexMatrix),
    Povm(Povm),
    Kraus(KrausChannel),
    Choi(ChoiMatrix),
    Ket(ComplexMatrix),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Validation { path: String, message: String },
    Numeric(String),
}

impl CliError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> CliError {
        CliError::Validation { path: path.into(), message: message.into() }
    }

    fn at(path: &str) -> impl Fn(Error) -> CliError + '_ {
        move |e| match e {
            Error::NoConvergence(_) | Error::Numeric(_) => CliError::Numeric(e.to_string()),
            _ => CliError::invalid(path, e.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Validation { .. } => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            CliError::Usage(m) => json!({"error": "usage", "message": m}),
            CliError::Validation { path, message } => json!({"error": "validation", "path": path, "message": message}),
            CliError::Numeric(m) => json!({"error": "numeric", "message": m}),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn flat(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push([m[(i, j)].re, m[(i, j)].im]);
        }
    }
    out
}

fn unflat(entries: &[[f64; 2]], dims: [usize; 2], path: &str) -> CliResult<ComplexMatrix> {
    let [rows, cols] = dims;
    let n = rows.checked_mul(cols).ok_or_else(|| CliError::invalid("dims", "dimensions overflow"))?;
    if entries.len() != n {
        return Err(CliError::invalid(path, format!("expected {n} entries for {rows}x{cols}, got {}", entries.len())));
    }
    if let Some(k) = entries.iter().position(|[a, b]| !a.is_finite() || !b.is_finite()) {
        return Err(CliError::invalid(format!("{path}[{k}]"), "entry is not a finite number"));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        let [re, im] = entries[i * cols + j];
        C64::new(re, im)
    }))
}

impl MatrixDocument {
    pub fn parse(text: &str) -> CliResult<MatrixDocument> {
        serde_json::from_str(text).map_err(|e| CliError::invalid("$", format!("malformed document: {e}")))
    }

    pub fn single(kind: Kind, m: &ComplexMatrix) -> MatrixDocument {
        MatrixDocument { kind, dims: [m.nrows(), m.ncols()], entries: Entries::Single(flat(m)), bipartite: None, labels: None }
    }

    pub fn many(kind: Kind, ms: &[ComplexMatrix]) -> MatrixDocument {
        let dims = ms.first().map_or([0, 0], |m| [m.nrows(), m.ncols()]);
        MatrixDocument { kind, dims, entries: Entries::Many(ms.iter().map(flat).collect()), bipartite: None, labels: None }
    }

    pub fn from_object(obj: &MatrixObject) -> MatrixDocument {
        match obj {
            MatrixObject::State(s) => MatrixDocument::single(Kind::State, s.matrix()),
            MatrixObject::Effect(e) => MatrixDocument::single(Kind::Effect, e),
            MatrixObject::Ket(k) => MatrixDocument::single(Kind::Ket, k),
            MatrixObject::Povm(p) => {
                MatrixDocument { labels: Some(p.labels().to_vec()), ..MatrixDocument::many(Kind::Povm, p.effects()) }
            }
            MatrixObject::Kraus(k) => MatrixDocument::many(Kind::Kraus, k.kraus()),
            MatrixObject::Choi(c) => MatrixDocument {
                bipartite: Some([c.out_dim(), c.in_dim()]),
                ..MatrixDocument::single(Kind::Choi, c.matrix())
            },
        }
    }

    fn one(&self) -> CliResult<ComplexMatrix> {
        match &self.entries {
            Entries::Single(e) => unflat(e, self.dims, "entries"),
            Entries::Many(_) => Err(CliError::invalid("entries", "expected a single matrix")),
        }
    }

    fn list(&self) -> CliResult<Vec<ComplexMatrix>> {
        match &self.entries {
            Entries::Many(es) if !es.is_empty() => {
                es.iter().enumerate().map(|(k, e)| unflat(e, self.dims, &format!("entries[{k}]"))).collect()
            }
            Entries::Many(_) => Err(CliError::invalid("entries", "empty list")),
            Entries::Single(e) if e.is_empty() => Err(CliError::invalid("entries", "empty list")),
            Entries::Single(_) => Err(CliError::invalid("entries", "expected a list of matrices")),
        }
    }

    fn square(&self) -> CliResult<usize> {
        let [rows, cols] = self.dims;
        if rows != cols || rows == 0 {
            return Err(CliError::invalid("dims", format!("expected a nonempty square shape, got {rows}x{cols}")));
        }
        Ok(rows)
    }

    /// Validate against the invariants of the document's kind.
    pub fn to_object(&self, tol: f64) -> CliResult<MatrixObject> {
        if let Some([a, b]) = self.bipartite {
            let n = match self.kind {
                Kind::Ket => self.dims[0],
                _ => self.square()?,
            };
            if a.checked_mul(b) != Some(n) || a == 0 {
                return Err(CliError::invalid("bipartite", format!("{a}x{b} does not factor dimension {n}")));
            }
        }
        match self.kind {
            Kind::State => {
                self.square()?;
                Ok(MatrixObject::State(State::with_tol(self.one()?, tol).map_err(CliError::at("entries"))?))
            }
            Kind::Effect => {
                self.square()?;
                let e = self.one()?;
                crate::observables::validate_effect(&e, tol).map_err(CliError::at("entries"))?;
                Ok(MatrixObject::Effect(e))
            }
            Kind::Ket => {
                if self.dims[1] != 1 || self.dims[0] == 0 {
                    return Err(CliError::invalid("dims", "a ket has shape [n, 1]"));
                }
                let k = self.one()?;
                let norm = k.norm();
                if (norm - 1.0).abs() > tol.max(1e-12) * 10.0 {
                    return Err(CliError::invalid("entries", format!("ket has norm {norm:.12e}, expected 1")));
                }
                Ok(MatrixObject::Ket(k))
            }
            Kind::Povm => {
                self.square()?;
                let effects = self.list()?;
                let labels = match &self.labels {
                    Some(l) => l.clone(),
                    None => (0..effects.len()).map(|j| j.to_string()).collect(),
                };
                if labels.len() != effects.len() {
                    return Err(CliError::invalid("labels", format!("{} labels for {} effects", labels.len(), effects.len())));
                }
                Ok(MatrixObject::Povm(Povm::with_tol(labels, effects, tol).map_err(CliError::at("entries"))?))
            }
            Kind::Kraus => {
                if self.dims[0] == 0 || self.dims[1] == 0 {
                    return Err(CliError::invalid("dims", "empty Kraus operators"));
                }
                Ok(MatrixObject::Kraus(KrausChannel::new(self.list()?).map_err(CliError::at("entries"))?))
            }
            Kind::Choi => {
                let n = self.square()?;
                let [d_out, d_in] = match self.bipartite {
                    Some(f) => f,
                    None => {
                        let d = (n as f64).sqrt().round() as usize;
                        if d * d != n {
                            return Err(CliError::invalid("bipartite", "needed when the dimension is not a square"));
                        }
                        [d, d]
                    }
                };
                let m = self.one()?;
                if !m.is_hermitian(tol) {
                    return Err(CliError::invalid("entries", "Choi matrix of a Hermiticity-preserving map must be Hermitian"));
                }
                Ok(MatrixObject::Choi(ChoiMatrix::new(m, d_in, d_out).map_err(CliError::at("entries"))?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rep {
    Kraus,
    Choi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EntTest {
    Ppt,
    Reduction,
    Mef,
    Chsh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Minerror,
    Unambiguous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoKind {
    Teleport,
    Superdense,
    Bb84,
    B92,
    Pqc,
    Meanking,
    Processor,
}

#[derive(Debug, Parser)]
#[command(name = "qinfo", version, about = "Finite-dimensional quantum information toolkit")]
pub struct Cli {
    /// Numerical tolerance (falls back to $QINFO_TOL, then 1e-9).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Complete positivity, trace preservation and unitality of a channel.
    CertifyChannel {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        rep: Option<Rep>,
    },
    /// Run separability tests on a bipartite state.
    Entanglement {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "ppt,reduction,mef,chsh")]
        tests: Vec<EntTest>,
    },
    /// Discriminate two states.
    Discriminate {
        #[arg(long)]
        s1: PathBuf,
        #[arg(long)]
        s2: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Prior probability of the first state.
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
    },
    /// Werner state report: swap expectation, separability, PPT and reduction tests.
    Werner {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        mu: f64,
    },
    /// Run a protocol simulation.
    Demo {
        #[arg(value_enum)]
        protocol: DemoKind,
        #[arg(long)]
        rounds: Option<usize>,
        /// Intercept-resend eavesdropper (bb84).
        #[arg(long)]
        eve: bool,
        /// Dimension for teleport, pqc and processor.
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// State overlap for b92.
        #[arg(long, default_value_t = 0.5)]
        overlap: f64,
        /// Share of the sifted key released for error estimation (bb84).
        #[arg(long, default_value_t = 0.25)]
        sample_fraction: f64,
    },
    /// Complete positivity of the qubit map `r ↦ diag(lambda) r + t`.
    QubitChannel {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        t: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let err = CliError::Usage(text);
                Outcome { code: err.exit_code(), stdout: String::new(), stderr: format!("{}\n", err.to_json()) }
            } else {
                Outcome { code: 0, stdout: text, stderr: String::new() }
            };
        }
    };
    let format = cli.format;
    match resolve_tol(cli.tol).and_then(|tol| execute(&cli, tol)) {
        Ok(value) => match render(&value, format) {
            Ok(stdout) => Outcome { code: 0, stdout, stderr: String::new() },
            Err(e) => Outcome { code: e.exit_code(), stdout: String::new(), stderr: format!("{}\n", e.to_json()) },
        },
        Err(e) => Outcome { code: e.exit_code(), stdout: String::new(), stderr: format!("{}\n", e.to_json()) },
    }
}

fn resolve_tol(flag: Option<f64>) -> CliResult<f64> {
    let tol = match flag {
        Some(t) => t,
        None => match std::env::var(TOL_ENV) {
            Ok(s) => s.trim().parse().map_err(|_| CliError::invalid(TOL_ENV, format!("cannot parse {s:?}")))?,
            Err(_) => DEFAULT_TOL,
        },
    };
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::invalid("tol", format!("tolerance must be positive, got {tol}")));
    }
    Ok(tol)
}

fn read_document(path: &Path, flag: &str, tol: f64) -> CliResult<(MatrixDocument, MatrixObject)> {
    let text = if path.as_os_str() == "-" {
        std::io::read_to_string(std::io::stdin())
    } else {
        std::fs::read_to_string(path)
    }
    .map_err(|e| CliError::invalid(flag, format!("cannot read {}: {e}", path.display())))?;
    let doc = MatrixDocument::parse(&text)?;
    let obj = doc.to_object(tol)?;
    Ok((doc, obj))
}

fn execute(cli: &Cli, tol: f64) -> CliResult<Value> {
    match &cli.command {
        Command::CertifyChannel { input, rep } => certify_channel(input, *rep, tol),
        Command::Entanglement { input, dims, tests } => entanglement_tests(input, dims, tests, cli.seed, tol),
        Command::Discriminate { s1, s2, mode, eta } => discriminate(s1, s2, *mode, *eta, tol),
        Command::Werner { d, mu } => {
            check_size(*d, None)?;
            if *d < 2 {
                return Err(CliError::invalid("d", "Werner states need d >= 2"));
            }
            let w = entanglement::werner_report(*d, *mu, tol).map_err(CliError::at("mu"))?;
            Ok(json!({
                "d": w.d,
                "mu": w.mu,
                "swap_expectation": w.swap_expectation,
                "separable": w.separable,
                "entangled": !w.separable,
                "ppt": w.ppt,
                "ppt_min_eigenvalue": w.ppt_min_eigenvalue,
                "reduction_detects": w.reduction_detects,
                "reduction_min_eigenvalue": w.reduction_min_eigenvalue,
            }))
        }
        Command::Demo { protocol, rounds, eve, d, overlap, sample_fraction } => {
            demo(*protocol, *rounds, *eve, *d, *overlap, *sample_fraction, cli.seed)
        }
        Command::QubitChannel { lambda, t } => {
            let three = |v: &[f64], name: &str| -> CliResult<[f64; 3]> {
                <[f64; 3]>::try_from(v).map_err(|_| CliError::invalid(name, format!("expected 3 values, got {}", v.len())))
            };
            let (l, tv) = (three(lambda, "lambda")?, three(t, "t")?);
            if l.iter().chain(&tv).any(|x| !x.is_finite()) {
                return Err(CliError::invalid("lambda", "parameters must be finite"));
            }
            let rep = channels::qubit_cp_check(l, tv, tol);
            Ok(json!({
                "lambda": l,
                "t": tv,
                "cp": rep.cp,
                "choi_min_eig": rep.min_eigenvalue,
                "affine_route_min_eig": rep.affine_route_min_eigenvalue,
            }))
        }
    }
}

fn certify_channel(input: &Path, rep: Option<Rep>, tol: f64) -> CliResult<Value> {
    let (_, obj) = read_document(input, "in", tol)?;
    let cert = match (obj, rep) {
        (MatrixObject::Kraus(k), None | Some(Rep::Kraus)) => k.certify(tol),
        (MatrixObject::Choi(c), None | Some(Rep::Choi)) => c.certify(tol),
        (MatrixObject::Kraus(_), Some(Rep::Choi)) | (MatrixObject::Choi(_), Some(Rep::Kraus)) => {
            return Err(CliError::invalid("kind", "document kind does not match --rep"));
        }
        _ => return Err(CliError::invalid("kind", "expected a kraus or choi document")),
    };
    Ok(json!({
        "cp": cert.cp,
        "tp": cert.tp,
        "unital": cert.unital,
        "trace_decreasing": cert.trace_decreasing,
        "choi_min_eig": cert.choi_min_eigenvalue,
        "tp_deviation": cert.tp_deviation,
    }))
}

fn entanglement_tests(input: &Path, dims: &[usize], tests: &[EntTest], seed: u64, tol: f64) -> CliResult<Value> {
    let (doc, obj) = read_document(input, "in", tol)?;
    let state = match obj {
        MatrixObject::State(s) => s,
        MatrixObject::Ket(k) => State::pure(&k).map_err(CliError::at("entries"))?,
        _ => return Err(CliError::invalid("kind", "expected a state or ket document")),
    };
    let (d_a, d_b) = match (dims, doc.bipartite) {
        ([a, b], _) => (*a, *b),
        ([], Some([a, b])) => (a, b),
        ([], None) => return Err(CliError::invalid("dims", "give --dims dA,dB")),
        _ => return Err(CliError::invalid("dims", "expected two dimensions dA,dB")),
    };
    if d_a.checked_mul(d_b) != Some(state.dim()) {
        return Err(CliError::invalid("dims", format!("{d_a}x{d_b} does not factor dimension {}", state.dim())));
    }
    let rho = BipartiteState::from_state(state, d_a, d_b).map_err(CliError::at("dims"))?;
    let mut out = Map::new();
    out.insert("dims".into(), json!([d_a, d_b]));
    for test in tests {
        let (name, value) = match test {
            EntTest::Ppt => {
                let p = entanglement::ppt(&rho, tol);
                let exact = matches!((d_a, d_b), (2, 2) | (2, 3) | (3, 2));
                ("ppt", json!({"ppt": p.ppt, "min_eigenvalue": p.min_eigenvalue, "entangled": !p.ppt, "conclusive": !p.ppt || exact}))
            }
            EntTest::Reduction => {
                let r = entanglement::reduction_criterion(&rho, tol);
                let min = r.min_eigenvalue_a.min(r.min_eigenvalue_b);
                ("reduction", json!({"entangled": r.detected, "min_eigenvalue": min}))
            }
            EntTest::Mef => {
                if d_a != d_b {
                    ("mef", json!({"skipped": "needs dA = dB"}))
                } else {
                    let mut rng = protocols::round_rng(seed, 0);
                    let f = entanglement::max_entangled_fraction(&rho, MefOptions::default(), &mut rng)
                        .map_err(CliError::at("in"))?;
                    let bound = 1.0 / d_a as f64;
                    ("mef", json!({"value": f, "separable_bound": bound, "entangled": f > bound + tol}))
                }
            }
            EntTest::Chsh => {
                if (d_a, d_b) != (2, 2) {
                    ("chsh", json!({"skipped": "needs two qubits"}))
                } else {
                    let best = entanglement::optimal_chsh(&rho).map_err(CliError::at("in"))?;
                    ("chsh", json!({
                        "value": best.value,
                        "violated": best.value < -tol,
                        "a": best.a, "a2": best.a2, "b": best.b, "b2": best.b2,
                    }))
                }
            }
        };
        out.insert(name.into(), value);
    }
    Ok(Value::Object(out))
}

fn pure_ket(obj: MatrixObject, flag: &str, tol: f64) -> CliResult<ComplexMatrix> {
    match obj {
        MatrixObject::Ket(k) => Ok(k),
        MatrixObject::State(s) => {
            let rank = linalg::rank(s.matrix(), tol.max(1e-9));
            if rank != 1 {
                return Err(CliError::invalid(flag, format!("unambiguous mode needs pure states, got rank {rank}")));
            }
            let e = linalg::eigh(s.matrix()).map_err(CliError::at(flag))?;
            Ok(e.vector(0))
        }
        _ => Err(CliError::invalid(flag, "expected a state or ket document")),
    }
}

fn as_state(obj: MatrixObject, flag: &str) -> CliResult<State> {
    match obj {
        MatrixObject::State(s) => Ok(s),
        MatrixObject::Ket(k) => State::pure(&k).map_err(CliError::at(flag)),
        _ => Err(CliError::invalid(flag, "expected a state or ket document")),
    }
}

fn discriminate(s1: &Path, s2: &Path, mode: Mode, eta: f64, tol: f64) -> CliResult<Value> {
    let (_, o1) = read_document(s1, "s1", tol)?;
    let (_, o2) = read_document(s2, "s2", tol)?;
    let res = match mode {
        Mode::Minerror => {
            let (r1, r2) = (as_state(o1, "s1")?, as_state(o2, "s2")?);
            discrimination::helstrom(&r1, &r2, eta).map_err(CliError::at("eta"))?
        }
        Mode::Unambiguous => {
            let (k1, k2) = (pure_ket(o1, "s1", tol)?, pure_ket(o2, "s2", tol)?);
            discrimination::unambiguous_two_pure(&k1, &k2, eta).map_err(CliError::at("s2"))?
        }
    };
    let povm: Vec<Value> = res
        .povm
        .labels()
        .iter()
        .zip(res.povm.effects())
        .zip(&res.conclusions)
        .map(|((label, e), c)| {
            let conclusion = match c {
                Conclusion::First => "first",
                Conclusion::Second => "second",
                Conclusion::Inconclusive => "inconclusive",
            };
            json!({"label": label, "conclusion": conclusion, "effect": MatrixDocument::single(Kind::Effect, e)})
        })
        .collect();
    Ok(json!({
        "mode": match mode { Mode::Minerror => "minerror", Mode::Unambiguous => "unambiguous" },
        "eta": eta,
        "p_success": res.p_success,
        "p_error": res.p_error,
        "p_inconclusive": res.p_inconclusive,
        "povm": povm,
    }))
}

fn check_size(d: usize, rounds: Option<usize>) -> CliResult<()> {
    if d > MAX_DIM {
        return Err(CliError::invalid("d", format!("dimension {d} exceeds {MAX_DIM}")));
    }
    if rounds.is_some_and(|n| n > MAX_ROUNDS) {
        return Err(CliError::invalid("rounds", format!("at most {MAX_ROUNDS} rounds")));
    }
    Ok(())
}

fn demo(kind: DemoKind, rounds: Option<usize>, eve: bool, d: usize, overlap: f64, fraction: f64, seed: u64) -> CliResult<Value> {
    check_size(d, rounds)?;
    let err = CliError::at("demo");
    let report = match kind {
        DemoKind::Teleport => {
            let mut rng = protocols::round_rng(seed, u64::MAX);
            if d < 2 {
                return Err(CliError::invalid("d", "dimension must be at least 2"));
            }
            let input = State::pure(&random::ket(d, &mut rng)).map_err(&err)?;
            protocols::teleport(&input, seed)
        }
        DemoKind::Superdense => {
            let messages: Vec<usize> = (0..rounds.unwrap_or(4)).map(|n| n % 4).collect();
            protocols::superdense(&messages, seed)
        }
        DemoKind::Bb84 => {
            let opts = Bb84Options { eve: if eve { Eve::InterceptResend } else { Eve::None }, sample_fraction: fraction };
            protocols::bb84(rounds.unwrap_or(1000), opts, seed)
        }
        DemoKind::B92 => protocols::b92(rounds.unwrap_or(1000), overlap, seed),
        DemoKind::Pqc => protocols::private_quantum_channel(d, rounds.unwrap_or(10), seed),
        DemoKind::Meanking => protocols::mean_king(rounds.unwrap_or(300), seed),
        DemoKind::Processor => {
            let target = if d == 2 {
                let h = std::f64::consts::FRAC_1_SQRT_2;
                ComplexMatrix::from_row_slice(2, 2, &[h, h, h, -h].map(|x| C64::new(x, 0.0)))
            } else if d > 2 {
                random::haar_unitary(d, &mut protocols::round_rng(seed, u64::MAX))
            } else {
                return Err(CliError::invalid("d", "dimension must be at least 2"));
            };
            protocols::probabilistic_processor(&target, rounds.unwrap_or(10), seed)
        }
    }
    .map_err(&err)?;
    serde_json::to_value(report).map_err(|e| CliError::Numeric(e.to_string()))
}

fn round_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Round every floating-point number to 12 significant digits.
pub fn round_value(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().expect("checked"));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.iter().map(round_value).collect()),
        Value::Object(m) => Value::Object(m.iter().map(|(k, v)| (k.clone(), round_value(v))).collect()),
        other => other.clone(),
    }
}

fn flatten(prefix: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, rows);
            }
        }
        Value::Array(a) => {
            for (j, v) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{j}]"), v, rows);
            }
        }
        Value::String(s) => rows.push((prefix.into(), s.clone())),
        other => rows.push((prefix.into(), other.to_string())),
    }
}

fn render(value: &Value, format: Format) -> CliResult<String> {
    let value = round_value(value);
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&value).map_err(|e| CliError::Numeric(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            // protocol reports keep only their summary; per-round records stay in JSON
            let table = match value {
                Value::Object(mut m) if m.contains_key("records") => {
                    m.remove("records");
                    Value::Object(m)
                }
                other => other,
            };
            let mut rows = Vec::new();
            flatten("", &table, &mut rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| CliError::Numeric(e.to_string());
            w.write_record(["key", "value"]).map_err(io)?;
            for (k, v) in rows {
                w.write_record([k, v]).map_err(io)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Numeric(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| CliError::Numeric(e.to_string()))
        }
    }
}
