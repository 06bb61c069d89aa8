//! Seeded sampling of matrices, states, unitaries and channels.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, r, ComplexMatrix};

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

pub fn hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(d, d, rng);
    (&g + g.adjoint()) * r(0.5)
}

/// Haar-distributed unit ket.
pub fn ket<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(d, 1, rng);
    let n = g.norm();
    g / r(n)
}

/// Haar-distributed unitary (QR of a Ginibre matrix with the phase fix).
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let qr = ginibre(d, d, rng).qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..d {
        let x = rr[(j, j)];
        let phase = if x.norm() > 0.0 { x / r(x.norm()) } else { r(1.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random density matrix of the given rank (Hilbert–Schmidt measure when `rank = d`).
pub fn state_of_rank<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(d, rank, rng);
    let rho = &g * g.adjoint();
    let t = rho.trace();
    rho / t
}

pub fn state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    state_of_rank(d, d, rng)
}

pub fn pure_state<R: Rng + ?Sized>(d: usize, rng: &mut R) -> ComplexMatrix {
    let k = ket(d, rng);
    &k * k.adjoint()
}

/// Kraus operators of a random channel, cut from a Haar isometry.
pub fn kraus_ops<R: Rng + ?Sized>(d_in: usize, d_out: usize, n: usize, rng: &mut R) -> Vec<ComplexMatrix> {
    let u = haar_unitary(d_out * n, rng);
    (0..n)
        .map(|k| ComplexMatrix::from_fn(d_out, d_in, |i, j| u[(i * n + k, j)]))
        .collect()
}

/// Uniform point in the closed unit ball of `R^3`.
pub fn bloch_ball<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        if v.iter().map(|x: &f64| x * x).sum::<f64>() <= 1.0 {
            return v;
        }
    }
}

pub fn unit_vector3<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)];
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}
