//! Distances between states and distributions; two-state discrimination.

use crate::error::{Error, Result};
use crate::linalg::{self, identity, inner, max_abs, projector, psd_sqrt, r, ComplexMatrix, DEFAULT_TOL};
use crate::observables::Povm;
use crate::states::State;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbDistances {
    pub max_diff: f64,
    pub kolmogorov: f64,
    pub bhattacharyya: f64,
}

pub fn prob_distances(p: &[f64], q: &[f64]) -> Result<ProbDistances> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("distributions of length {} and {}", p.len(), q.len())));
    }
    for (name, v) in [("p", p), ("q", q)] {
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-9 || v.iter().any(|&x| x < -1e-12) {
            return Err(Error::InvalidParameter(format!("{name} is not a probability distribution (sum {s})")));
        }
    }
    let diffs = p.iter().zip(q).map(|(a, b)| (a - b).abs());
    Ok(ProbDistances {
        max_diff: diffs.clone().fold(0.0, f64::max),
        kolmogorov: 0.5 * diffs.sum::<f64>(),
        bhattacharyya: p.iter().zip(q).map(|(a, b)| (a.max(0.0) * b.max(0.0)).sqrt()).sum(),
    })
}

fn same_dim(a: &State, b: &State) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!("states of dimension {} and {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// `½ tr|ρ1 − ρ2|`.
pub fn trace_distance(rho1: &State, rho2: &State) -> Result<f64> {
    same_dim(rho1, rho2)?;
    Ok(trace_distance_matrices(rho1.matrix(), rho2.matrix()))
}

/// `½ tr|a − b|` for Hermitian `a`, `b`.
pub fn trace_distance_matrices(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    0.5 * linalg::eigvalsh(&(a - b)).iter().map(|x| x.abs()).sum::<f64>()
}

/// `tr √(√ρ1 ρ2 √ρ1)`.
pub fn fidelity(rho1: &State, rho2: &State) -> Result<f64> {
    same_dim(rho1, rho2)?;
    Ok(fidelity_matrices(rho1.matrix(), rho2.matrix()))
}

pub fn fidelity_matrices(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let floor = linalg::roundoff_floor(&linalg::eigvalsh(a));
    let s = linalg::hermitian_fn(a, |x| if x > floor { x.sqrt() } else { 0.0 });
    let m = &s * b * &s;
    let ev = linalg::eigvalsh(&m);
    let floor = linalg::roundoff_floor(&ev);
    let f: f64 = ev.iter().filter(|&&x| x > floor).map(|x| x.sqrt()).sum();
    f.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conclusion {
    First,
    Second,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct DiscriminationResult {
    pub povm: Povm,
    pub conclusions: Vec<Conclusion>,
    pub p_success: f64,
    pub p_error: f64,
    pub p_inconclusive: f64,
}

fn evaluate(povm: Povm, conclusions: Vec<Conclusion>, rho1: &State, rho2: &State, eta: f64) -> DiscriminationResult {
    let (mut ok, mut err, mut inc) = (0.0, 0.0, 0.0);
    for (e, c) in povm.effects().iter().zip(&conclusions) {
        let p1 = eta * rho1.expectation(e);
        let p2 = (1.0 - eta) * rho2.expectation(e);
        match c {
            Conclusion::First => {
                ok += p1;
                err += p2;
            }
            Conclusion::Second => {
                ok += p2;
                err += p1;
            }
            Conclusion::Inconclusive => inc += p1 + p2,
        }
    }
    DiscriminationResult { povm, conclusions, p_success: ok, p_error: err, p_inconclusive: inc }
}

fn check_prior(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("prior {eta} must lie in (0,1)")));
    }
    Ok(())
}

/// Minimum-error measurement: conclude `ρ1` on the negative eigenspace of
/// `(1−η)ρ2 − ηρ1`; the kernel is split evenly between the two conclusions.
pub fn helstrom(rho1: &State, rho2: &State, eta: f64) -> Result<DiscriminationResult> {
    same_dim(rho1, rho2)?;
    check_prior(eta)?;
    let d = rho1.dim();
    let gamma = rho2.matrix() * r(1.0 - eta) - rho1.matrix() * r(eta);
    let e = linalg::eigh(&gamma)?;
    let mut c1 = linalg::zeros(d, d);
    for (j, &lam) in e.values.iter().enumerate() {
        let w = if lam < -DEFAULT_TOL {
            1.0
        } else if lam <= DEFAULT_TOL {
            0.5
        } else {
            0.0
        };
        if w > 0.0 {
            c1 += projector(&e.vector(j)) * r(w);
        }
    }
    let c2 = identity(d) - &c1;
    let povm = Povm::new(vec!["1".into(), "2".into()], vec![c1, c2])?;
    Ok(evaluate(povm, vec![Conclusion::First, Conclusion::Second], rho1, rho2, eta))
}

/// `½(1 − ½‖ρ1 − ρ2‖_tr)`, the optimum for equal priors.
pub fn helstrom_error_equal_priors(rho1: &State, rho2: &State) -> Result<f64> {
    Ok(0.5 * (1.0 - trace_distance(rho1, rho2)?))
}

fn unit(k: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = k.norm();
    if k.ncols() != 1 || n == 0.0 {
        return Err(Error::InvalidParameter("ket must be a nonzero column".into()));
    }
    Ok(k / r(n))
}

/// Optimal error-free discrimination of two pure states:
/// `D(1) = (Q − P_ψ2)/(1 + |⟨ψ1|ψ2⟩|)`, `D(2) = (Q − P_ψ1)/(1 + |⟨ψ1|ψ2⟩|)`
/// with `Q` the projector onto `span{ψ1, ψ2}`.
pub fn unambiguous_two_pure(psi1: &ComplexMatrix, psi2: &ComplexMatrix, eta: f64) -> Result<DiscriminationResult> {
    check_prior(eta)?;
    let (a, b) = (unit(psi1)?, unit(psi2)?);
    if a.nrows() != b.nrows() {
        return Err(Error::Dimension("kets of different dimension".into()));
    }
    let ov = inner(&a, &b);
    let s = ov.norm();
    if 1.0 - s < 1e-9 {
        return Err(Error::Impossible("states identical - nothing to discriminate".into()));
    }
    let perp = (&b - &a * ov) / r((1.0 - s * s).sqrt());
    let q = projector(&a) + projector(&perp);
    let d1 = (&q - projector(&b)) / r(1.0 + s);
    let d2 = (&q - projector(&a)) / r(1.0 + s);
    let dq = identity(a.nrows()) - &d1 - &d2;
    let povm = Povm::new(vec!["1".into(), "2".into(), "?".into()], vec![d1, d2, dq])?;
    let (r1, r2) = (State::pure(&a)?, State::pure(&b)?);
    Ok(evaluate(povm, vec![Conclusion::First, Conclusion::Second, Conclusion::Inconclusive], &r1, &r2, eta))
}

/// `C(1) = q(I−ρ2)`, `C(2) = (1−q)(I−ρ1)`, `C(?) = qρ2 + (1−q)ρ1`.
pub fn unambiguous_mixture_povm(
    psi1: &ComplexMatrix,
    psi2: &ComplexMatrix,
    q: f64,
    eta: f64,
) -> Result<DiscriminationResult> {
    check_prior(eta)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidParameter(format!("mixing weight {q} outside [0,1]")));
    }
    let (r1, r2) = (State::pure(psi1)?, State::pure(psi2)?);
    same_dim(&r1, &r2)?;
    let id = identity(r1.dim());
    let c1 = (&id - r2.matrix()) * r(q);
    let c2 = (&id - r1.matrix()) * r(1.0 - q);
    let cq = r2.matrix() * r(q) + r1.matrix() * r(1.0 - q);
    let povm = Povm::new(vec!["1".into(), "2".into(), "?".into()], vec![c1, c2, cq])?;
    Ok(evaluate(povm, vec![Conclusion::First, Conclusion::Second, Conclusion::Inconclusive], &r1, &r2, eta))
}

/// Upper bound `1 − 2√(η(1−η))·tr|√ρ1 √ρ2|` on error-free success. The
/// trace norm is the maximum of `|tr[U√ρ1√ρ2]|` over unitaries `U`, which
/// equals the fidelity.
pub fn idp_bound(rho1: &State, rho2: &State, eta: f64) -> Result<f64> {
    same_dim(rho1, rho2)?;
    check_prior(eta)?;
    Ok(1.0 - 2.0 * (eta * (1.0 - eta)).sqrt() * fidelity(rho1, rho2)?)
}

/// `tr|√ρ1 √ρ2|` computed from singular values, independent of [`fidelity`].
pub fn root_overlap_trace_norm(rho1: &State, rho2: &State) -> Result<f64> {
    same_dim(rho1, rho2)?;
    let s1 = psd_sqrt(rho1.matrix())?;
    let s2 = psd_sqrt(rho2.matrix())?;
    Ok(linalg::trace_norm(&(s1 * s2)))
}

/// Which of the two states can ever be identified without error:
/// `ρ1` can iff its support is not contained in the support of `ρ2`.
pub fn unambiguous_feasible(rho1: &State, rho2: &State) -> Result<(bool, bool)> {
    same_dim(rho1, rho2)?;
    let outside = |a: &ComplexMatrix, b: &ComplexMatrix| {
        let basis = linalg::range_basis(b, DEFAULT_TOL);
        let p = &basis * basis.adjoint();
        max_abs(&((identity(a.nrows()) - p) * a)) > DEFAULT_TOL
    };
    Ok((outside(rho1.matrix(), rho2.matrix()), outside(rho2.matrix(), rho1.matrix())))
}
