//! End-to-end acceptance checks. Prints one line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::FRAC_1_SQRT_2;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qinfo::channels::{
    choi_distance, contraction, conjugate, depolarizing, gell_mann_operator_basis, pauli_operator_basis,
    qubit_cp_check, stinespring, sup_distance, to_chi, transposition, KrausChannel, LinearMap, Optimizer,
};
use qinfo::discrimination::{
    fidelity_matrices, helstrom, prob_distances, trace_distance_matrices, unambiguous_mixture_povm,
    unambiguous_two_pure,
};
use qinfo::entanglement::{
    self, chsh_value, maximally_entangled_ket, ppt, reduction_criterion, singlet, tiles_upb, twirl, upb_state,
    upb_witness, werner, witness_evaluate, BipartiteState, WitnessVerdict,
};
use qinfo::instruments::{is_repeatable, luders, luders_disturbs, luders_memo, memo_to_instrument, trivial_instrument};
use qinfo::linalg::{self, basis_ket, identity, inner, max_abs, projector, r, real_ket, tensor, ComplexMatrix};
use qinfo::observables::{coarse_grain, efficiency_coarse_matrix, outcome_distribution, photon_counting, Povm};
use qinfo::protocols::{self, Bb84Options, Eve};
use qinfo::states::{from_bloch, purity, to_bloch, von_neumann_entropy, LogBase};
use qinfo::{random, Error, State};

/// Outcome of one sub-check: description, pass flag.
type Check = (String, bool);
type Criterion = (&'static str, fn() -> Vec<Check>);

fn check(name: impl Into<String>, ok: bool) -> Check {
    (name.into(), ok)
}

fn near(name: &str, got: f64, want: f64, tol: f64) -> Check {
    check(format!("{name}: {got:.12e} vs {want:.12e} (tol {tol:.0e})"), (got - want).abs() <= tol)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pair_with_overlap(s: f64) -> (ComplexMatrix, ComplexMatrix) {
    (real_ket(&[1.0, 0.0]), real_ket(&[s, (1.0 - s * s).sqrt()]))
}

fn bloch_geometry() -> Vec<Check> {
    let mut out = Vec::new();
    let mut g = rng(1);
    for _ in 0..20 {
        let rv = random::bloch_ball(&mut g);
        let n = rv.iter().map(|x| x * x).sum::<f64>().sqrt();
        let ev = linalg::eigvalsh(State::qubit(rv).unwrap().matrix());
        let ok = (ev[0] - (1.0 + n) / 2.0).abs() < 1e-9 && (ev[1] - (1.0 - n) / 2.0).abs() < 1e-9;
        out.push(check(format!("qubit eigenvalues (1±{n:.4})/2"), ok));
    }
    let p = State::pure(&random::ket(3, &mut g)).unwrap();
    let b = to_bloch(&p);
    out.push(near("d=3 pure Bloch norm", b.norm(), 2f64.sqrt(), 1e-9));
    let mut anti = b.clone();
    anti.components.iter_mut().for_each(|x| *x = -*x);
    match from_bloch(&anti) {
        Err(Error::OutsideStateSpace(l)) => out.push(near("antipode rejected, eigenvalue", l, -1.0 / 3.0, 1e-9)),
        other => out.push(check(format!("antipode rejected: got {other:?}"), false)),
    }
    out
}

fn discrimination() -> Vec<Check> {
    let (k1, k2) = pair_with_overlap(0.5);
    let (r1, r2) = (State::pure(&k1).unwrap(), State::pure(&k2).unwrap());
    let me = helstrom(&r1, &r2, 0.5).unwrap();
    let ua = unambiguous_two_pure(&k1, &k2, 0.5).unwrap();
    let mix = unambiguous_mixture_povm(&k1, &k2, 0.5, 0.5).unwrap();
    vec![
        near("minimum-error p_error", me.p_error, 0.5 * (1.0 - 3f64.sqrt() / 2.0), 1e-9),
        near("unambiguous p_success", ua.p_success, 0.5, 1e-9),
        check(
            format!("no-error tr[ρ2 D(1)] = {:.1e}", r2.expectation(ua.povm.effect(0)).abs()),
            r2.expectation(ua.povm.effect(0)).abs() < 1e-10,
        ),
        check(
            format!("no-error tr[ρ1 D(2)] = {:.1e}", r1.expectation(ua.povm.effect(1)).abs()),
            r1.expectation(ua.povm.effect(1)).abs() < 1e-10,
        ),
        check(format!("mixture POVM p_success = {} exactly 0.375", mix.p_success), mix.p_success == 0.375),
    ]
}

fn channel_representations() -> Vec<Check> {
    let mut g = rng(3);
    let mut worst_round_trip: f64 = 0.0;
    let mut worst_chi: f64 = 0.0;
    for k in 0..50 {
        let d = 2 + k % 2;
        let ch = KrausChannel::random(d, d, 1 + k % 4, &mut g);
        let back = ch.to_choi().to_kraus(1e-10).unwrap();
        for _ in 0..3 {
            let rho = random::state(d, &mut g);
            worst_round_trip = worst_round_trip.max(max_abs(&(ch.apply(&rho).unwrap() - back.apply(&rho).unwrap())));
        }
        let basis = if d == 2 { pauli_operator_basis() } else { gell_mann_operator_basis(d) };
        let chi = to_chi(&ch, &basis).unwrap();
        worst_chi = worst_chi.max((chi.matrix().trace().re - d as f64).abs());
    }
    let mut out = vec![
        check(format!("Kraus→Choi→Kraus residual {worst_round_trip:.1e} < 1e-8"), worst_round_trip < 1e-8),
        check(format!("max |tr χ − d| = {worst_chi:.1e}"), worst_chi < 1e-9),
    ];
    for d in [2, 3] {
        let m = linalg::min_eigenvalue(transposition(d).matrix());
        out.push(near(&format!("transposition Choi min eigenvalue d={d}"), m, -1.0 / d as f64, 1e-9));
    }
    out
}

fn qubit_cp() -> Vec<Check> {
    let z = [0.0; 3];
    let a = qubit_cp_check([1.0; 3], z, 1e-9);
    let b = qubit_cp_check([-1.0; 3], z, 1e-9);
    let c = qubit_cp_check([-1.0 / 3.0; 3], z, 1e-9);
    vec![
        check("(1,1,1;0) is CP", a.cp),
        check("(−1,−1,−1;0) is not CP", !b.cp),
        check("(−⅓,−⅓,−⅓;0) is CP", c.cp),
        near("(−⅓,−⅓,−⅓;0) Choi min eigenvalue", c.min_eigenvalue, 0.0, 1e-9),
    ]
}

fn channel_distances() -> Vec<Check> {
    let mut g = rng(5);
    let u = random::haar_unitary(2, &mut g);
    let a0 = contraction(&State::maximally_mixed(2));
    let ds = sup_distance(&KrausChannel::unitary(&u).unwrap(), &a0, Optimizer::default(), &mut g).unwrap();
    let mut out = vec![near("D_sup(σ_U, A_0)", ds.value, 0.5, 1e-3)];
    let mut worst: f64 = 0.0;
    for p in [0.1, 0.3, 0.5, 0.8] {
        let dep = depolarizing(3, p).unwrap();
        for _ in 0..25 {
            let a = random::state(3, &mut g);
            let b = random::state(3, &mut g);
            let ratio = trace_distance_matrices(&dep.apply(&a).unwrap(), &dep.apply(&b).unwrap())
                / trace_distance_matrices(&a, &b);
            worst = worst.max((ratio - (1.0 - p)).abs());
        }
    }
    out.push(check(format!("depolarizing contraction = 1−p on all pairs (max dev {worst:.1e})"), worst < 1e-9));
    out
}

fn dilation_replay() -> Vec<Check> {
    let mut g = rng(6);
    let full = depolarizing(2, 1.0).unwrap();
    let s = stinespring(&full, 1e-9).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let rho = random::state(2, &mut g);
        worst = worst.max(max_abs(&(s.apply(&rho).unwrap() - full.apply(&rho).unwrap())));
    }
    let mut out = vec![check(format!("Stinespring replay of full depolarizing: {worst:.1e}"), worst < 1e-9)];
    for d in [2, 3, 4] {
        let u = random::haar_unitary(d, &mut g);
        // redundant Kraus list √0.3 U, √0.7 U so the environment is a qubit
        let redundant = KrausChannel::new(vec![&u * r(0.3f64.sqrt()), &u * r(0.7f64.sqrt())]).unwrap();
        let conj = conjugate(&redundant, 1e-9).unwrap();
        let image = conj.apply(&random::state(d, &mut g)).unwrap();
        let ev = linalg::eigh(&image).unwrap();
        let phi = ev.vector(0);
        let target = KrausChannel::new((0..d).map(|j| &phi * basis_ket(d, j).adjoint()).collect()).unwrap();
        let dist = choi_distance(&conj, &target).unwrap();
        out.push(check(format!("conjugate of unitary channel d={d} is a pure contraction ({dist:.1e})"), dist < 1e-9));
    }
    out
}

fn instruments() -> Vec<Check> {
    let mut g = rng(7);
    let u = random::haar_unitary(3, &mut g);
    let basis: Vec<_> = (0..3).map(|j| u.columns(j, 1).into_owned()).collect();
    let sharp = Povm::from_basis(&basis).unwrap();
    let two = Povm::numbered(vec![projector(&basis_ket(2, 0)), projector(&basis_ket(2, 1))]).unwrap();
    let xi = State::new(random::state(2, &mut g)).unwrap();
    let ins = memo_to_instrument(&luders_memo(&basis).unwrap()).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let rho = random::state(3, &mut g);
        for (k, psi) in basis.iter().enumerate() {
            let p = projector(psi);
            worst = worst.max(max_abs(&(ins.apply(k, &rho).unwrap() - &p * &rho * &p)));
        }
    }
    let z = Povm::spin([0.0, 0.0, 1.0]).unwrap();
    let x = Povm::spin([1.0, 0.0, 0.0]).unwrap();
    let diag = |v: &[f64]| ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|&t| r(t))));
    let da = Povm::numbered(vec![diag(&[1.0, 0.0, 0.0]), diag(&[0.0, 1.0, 1.0])]).unwrap();
    let db = Povm::numbered(vec![diag(&[0.3, 0.6, 0.1]), diag(&[0.7, 0.4, 0.9])]).unwrap();
    vec![
        check("sharp Lüders instrument is repeatable", is_repeatable(&luders(&sharp), 1e-10)),
        check("trivial instrument of a nontrivial 2-outcome observable is not", !is_repeatable(&trivial_instrument(&two, &xi), 1e-6)),
        check(format!("Lüders measurement model = P ρ P ({worst:.1e})"), worst < 1e-10),
        check("σz Lüders disturbs σx", luders_disturbs(&z, &x, 1e-12).unwrap()),
        check("commuting diagonal observables undisturbed", !luders_disturbs(&da, &db, 1e-12).unwrap()),
    ]
}

fn entanglement_battery() -> Vec<Check> {
    let mut out = Vec::new();
    let (mut swap_dev, mut ppt_ok, mut pt_dev, mut red_ok) = (0.0f64, true, 0.0f64, true);
    for d in [2usize, 3] {
        for i in 0..=10 {
            let mu = i as f64 / 10.0;
            let rep = entanglement::werner_report(d, mu, 1e-9).unwrap();
            swap_dev = swap_dev.max((rep.swap_expectation - (2.0 * mu - 1.0)).abs());
            ppt_ok &= rep.ppt == (mu >= 0.5);
            let w = werner(d, mu).unwrap();
            let pt_spectrum = linalg::eigvalsh(&entanglement::partial_transpose(&w, linalg::Side::B));
            let target = (2.0 * mu - 1.0) / d as f64;
            let closest = pt_spectrum.iter().map(|l| (l - target).abs()).fold(f64::INFINITY, f64::min);
            pt_dev = pt_dev.max(closest);
            if mu < 0.5 {
                pt_dev = pt_dev.max((rep.ppt_min_eigenvalue - target).abs());
            }
            red_ok &= rep.reduction_detects == (d == 2 && mu < 0.5);
        }
    }
    out.push(check(format!("Werner swap expectation 2μ−1 (max dev {swap_dev:.1e})"), swap_dev < 1e-10));
    out.push(check("Werner PPT ⇔ μ ≥ ½", ppt_ok));
    out.push(check(format!("PT eigenvalue (2μ−1)/d, minimal for μ<½ (dev {pt_dev:.1e})"), pt_dev < 1e-9));
    out.push(check("reduction detects exactly d=2, μ<½", red_ok));
    let s = BipartiteState::pure(&singlet(), 2, 2).unwrap();
    let h = FRAC_1_SQRT_2;
    let v = chsh_value(&s, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [h, h, 0.0], [h, -h, 0.0]).unwrap();
    out.push(near("CHSH on singlet", v, 2.0 - 2.0 * 2f64.sqrt(), 1e-9));
    for d in [2, 3, 4] {
        let pp = BipartiteState::pure(&maximally_entangled_ket(d), d, d).unwrap();
        let rep = reduction_criterion(&pp, 1e-9);
        out.push(near(&format!("reduction eigenvalue on P+ d={d}"), rep.min_eigenvalue_b, (1.0 - d as f64) / d as f64, 1e-9));
    }
    out
}

fn tiles_upb_check() -> Vec<Check> {
    let tiles = tiles_upb();
    let gram = ComplexMatrix::from_fn(5, 5, |i, j| inner(&tiles[i], &tiles[j]));
    let gram_dev = max_abs(&(gram - identity(5)));
    let rho = upb_state();
    let p = ppt(&rho, 1e-9);
    let mut g = rng(9);
    let uw = upb_witness(&random::ket(9, &mut g), 200, &mut g).unwrap();
    let (value, verdict) = witness_evaluate(&uw.witness, &rho, 1e-9).unwrap();
    vec![
        check(format!("Tiles Gram = I ({gram_dev:.1e})"), gram_dev < 1e-12),
        check(format!("ρ_upb is PPT (min PT eigenvalue {:.3e})", p.min_eigenvalue), p.min_eigenvalue >= -1e-9),
        check(format!("ε = {:.6e} > 0", uw.epsilon), uw.epsilon > 0.0),
        near("witness value = −ε/4", value, -uw.epsilon / 4.0, 1e-12),
        check(format!("witness value {value:.6e} < −1e-4"), value < -1e-4),
        check("certified PPT-entangled", verdict == WitnessVerdict::Entangled && p.ppt),
    ]
}

fn protocol_suite() -> Vec<Check> {
    let mut out = Vec::new();
    let mut g = rng(10);
    for d in [2, 3] {
        for rho in [State::pure(&random::ket(d, &mut g)).unwrap(), State::new(random::state(d, &mut g)).unwrap()] {
            let rep = protocols::teleport(&rho, 1).unwrap();
            out.push(check(
                format!(
                    "teleport d={d}: prob dev {:.1e}, min fidelity {:.12}",
                    rep.summary["max_probability_deviation"], rep.summary["min_fidelity"]
                ),
                rep.summary["max_probability_deviation"] < 1e-9 && (1.0 - rep.summary["min_fidelity"]).abs() < 1e-9,
            ));
        }
    }
    let sd = protocols::superdense(&[0, 1, 2, 3], 1).unwrap();
    out.push(check("superdense decodes 4/4", sd.column("correct").iter().sum::<f64>() == 4.0));
    out.push(check(
        format!("superdense marginal = I/2 ({:.1e})", sd.summary["max_marginal_deviation"]),
        sd.summary["max_marginal_deviation"] < 1e-10,
    ));
    let clean = protocols::bb84(20000, Bb84Options::default(), 7).unwrap();
    out.push(check(format!("BB84 without Eve: QBER {}", clean.summary["qber"]), clean.summary["qber"] == 0.0));
    let eve = protocols::bb84(20000, Bb84Options { eve: Eve::InterceptResend, ..Default::default() }, 7).unwrap();
    out.push(near("BB84 intercept-resend QBER", eve.summary["qber"], 0.25, 0.02));
    let b92 = protocols::b92(20000, 0.5, 7).unwrap();
    out.push(near("B92 conclusive rate", b92.summary["conclusive_rate"], 0.5, 0.02));
    out.push(check("B92 conclusive errors = 0", b92.summary["conclusive_errors"] == 0.0));
    for d in [2, 3] {
        let pqc = protocols::private_quantum_channel(d, 20, 7).unwrap();
        out.push(check(
            format!("private channel d={d}: keyless Choi distance {:.1e}", pqc.summary["average_choi_distance"]),
            pqc.summary["average_choi_distance"] < 1e-9,
        ));
    }
    let mk = protocols::mean_king(600, 7).unwrap();
    out.push(check(
        format!("mean king: table mismatches {}", mk.summary["table_mismatches"]),
        mk.summary["table_mismatches"] == 0.0,
    ));
    let settings_ok = (0..3).all(|b| mk.records.iter().any(|rec| rec["axis"] == b as f64 && rec["king_sign"] == 0.0))
        && (0..3).all(|b| mk.records.iter().any(|rec| rec["axis"] == b as f64 && rec["king_sign"] == 1.0));
    out.push(check("mean king: all 6 settings simulated", settings_ok));
    out.push(check(
        format!("mean king: guess success {} (exact {})", mk.summary["success_rate"], mk.summary["exact_success_probability"]),
        mk.summary["success_rate"] == 1.0 && (mk.summary["exact_success_probability"] - 1.0).abs() < 1e-12,
    ));
    let h = ComplexMatrix::from_row_slice(2, 2, &[r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2), r(FRAC_1_SQRT_2), r(-FRAC_1_SQRT_2)]);
    let pp = protocols::probabilistic_processor(&h, 10, 7).unwrap();
    out.push(check(
        format!("processor d=2: p_success dev {:.1e}, fidelity {:.12}", pp.summary["max_p_deviation"], pp.summary["min_fidelity"]),
        pp.summary["max_p_deviation"] < 1e-9 && (1.0 - pp.summary["min_fidelity"]).abs() < 1e-9,
    ));
    out
}

fn photon_counting_suite() -> Vec<Check> {
    let k = 20;
    let mu = efficiency_coarse_matrix(0.3, 0.6, k).unwrap();
    let b = coarse_grain(&photon_counting(0.6, k).unwrap(), &mu).unwrap();
    let target = photon_counting(0.3, k).unwrap();
    let worst = (0..=k).map(|n| max_abs(&(b.effect(n) - target.effect(n)))).fold(0.0, f64::max);
    let zeta = |n: usize| State::pure(&basis_ket(k + 1, n)).unwrap();
    let dist = |eps: f64| {
        let a = photon_counting(eps, k).unwrap();
        let p = outcome_distribution(&a, &zeta(1)).unwrap();
        let q = outcome_distribution(&a, &zeta(2)).unwrap();
        prob_distances(&p, &q).unwrap().kolmogorov
    };
    let (sharp, half) = (dist(1.0), dist(0.5));
    vec![
        check(format!("Σ_k μ_kn N^0.6(k) = N^0.3(n), residual {worst:.1e}"), worst < 1e-9),
        check(format!("Kolmogorov distance N: {sharp} > N^0.5: {half}"), sharp > half),
    ]
}

fn property_suites() -> Vec<Check> {
    let mut g = rng(12);
    let (mut contract, mut monotone) = (true, true);
    for k in 0..100 {
        let d = 2 + k % 2;
        let ch = KrausChannel::random(d, d, 1 + k % 3, &mut g);
        let (a, b) = (random::state(d, &mut g), random::state(d, &mut g));
        let (ea, eb) = (ch.apply(&a).unwrap(), ch.apply(&b).unwrap());
        contract &= trace_distance_matrices(&ea, &eb) <= trace_distance_matrices(&a, &b) + 1e-9;
        monotone &= fidelity_matrices(&ea, &eb) >= fidelity_matrices(&a, &b) - 1e-9;
    }
    let (mut convex, mut concave) = (true, true);
    for k in 0..200 {
        let d = 2 + k % 3;
        let a = State::new(random::state(d, &mut g)).unwrap();
        let b = State::new(random::state(d, &mut g)).unwrap();
        let l = (k as f64 + 0.5) / 200.0;
        let m = State::new(a.matrix() * r(l) + b.matrix() * r(1.0 - l)).unwrap();
        convex &= purity(&m) <= l * purity(&a) + (1.0 - l) * purity(&b) + 1e-12;
        concave &= von_neumann_entropy(&m, LogBase::Two)
            >= l * von_neumann_entropy(&a, LogBase::Two) + (1.0 - l) * von_neumann_entropy(&b, LogBase::Two) - 1e-12;
    }
    let mut ppt_kept = true;
    let sources = [werner(3, 0.7).unwrap(), upb_state(), werner(2, 0.5).unwrap()];
    for k in 0..50 {
        let rho = &sources[k % 3];
        let (da, db) = rho.dims();
        let ch = KrausChannel::random(da, da, 1 + k % 3, &mut g).tensor(&KrausChannel::random(db, db, 2, &mut g));
        let out = BipartiteState::new(ch.apply(rho.matrix()).unwrap(), da, db).unwrap();
        ppt_kept &= ppt(&out, 1e-9).ppt;
    }
    let x = random::state(4, &mut g);
    let tw = twirl(&x, 2).unwrap();
    let mut commute_dev: f64 = 0.0;
    for _ in 0..100 {
        let u = random::haar_unitary(2, &mut g);
        let uu = tensor(&u, &u);
        commute_dev = commute_dev.max(max_abs(&(&uu * &tw * uu.adjoint() - &tw)));
    }
    let n = 100_000;
    let mut avg = linalg::zeros(4, 4);
    for _ in 0..n {
        let u = random::haar_unitary(2, &mut g);
        let uu = tensor(&u, &u);
        avg += &uu * &x * uu.adjoint();
    }
    avg /= r(n as f64);
    let mc = max_abs(&(avg - &tw));
    vec![
        check("trace distance contracts under 100 channels", contract),
        check("fidelity monotone under 100 channels", monotone),
        check("purity convex on 200 mixtures", convex),
        check("entropy concave on 200 mixtures", concave),
        check("PPT kept under 50 local channels", ppt_kept),
        check(format!("twirl commutes with U⊗U ({commute_dev:.1e})"), commute_dev < 1e-8),
        check(format!("twirl matches Haar Monte-Carlo ({mc:.1e})"), mc < 1e-2),
    ]
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("Bloch geometry", bloch_geometry),
        ("discrimination", discrimination),
        ("channel representations", channel_representations),
        ("qubit CP certification", qubit_cp),
        ("channel distances", channel_distances),
        ("dilation replay", dilation_replay),
        ("instruments", instruments),
        ("entanglement battery", entanglement_battery),
        ("Tiles UPB", tiles_upb_check),
        ("protocols", protocol_suite),
        ("photon counting", photon_counting_suite),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(checks) => {
                let bad: Vec<&str> = checks.iter().filter(|(_, ok)| !ok).map(|(s, _)| s.as_str()).collect();
                if bad.is_empty() {
                    (true, format!("{} checks", checks.len()))
                } else {
                    (false, bad.join("; "))
                }
            }
            Err(_) => (false, "panicked".to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {detail}", k + 1, if ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
