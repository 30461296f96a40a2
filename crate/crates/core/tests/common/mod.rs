#![allow(dead_code)]

use phnet::nalgebra::{DMatrix, DVector};
use phnet::{CoupledNetwork, CouplingLaw, ExternalLayout, LinearPhSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_skew(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    &a - a.transpose()
}

/// `AᵀA`, positive semidefinite.
pub fn random_psd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    a.transpose() * a
}

pub fn random_spd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    random_psd(rng, n) + DMatrix::identity(n, n) * 0.5
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// Explicit subsystem with one external input column.
pub fn random_subsystem(rng: &mut impl Rng, n: usize) -> LinearPhSystem {
    LinearPhSystem::explicit(
        random_skew(rng, n),
        random_psd(rng, n) * 0.5,
        random_matrix(rng, n, 1),
        random_spd(rng, n),
    )
    .expect("consistent sizes")
}

/// `s ∈ {2, 3}` subsystems with `nᵢ ≤ 4`, `m̂ᵢ ≤ 2` and a random skew `Ĉ`.
pub fn random_network(rng: &mut impl Rng) -> CoupledNetwork {
    let s = rng.random_range(2..=3);
    let mut subsystems = Vec::with_capacity(s);
    let mut ports = Vec::with_capacity(s);
    for _ in 0..s {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=2);
        subsystems.push(random_subsystem(rng, n));
        ports.push(random_matrix(rng, n, m));
    }
    let total: usize = ports.iter().map(|p| p.ncols()).sum();
    let c = random_skew(rng, total);
    CoupledNetwork::new(subsystems, ports, CouplingLaw::Matrix(c), ExternalLayout::Separate).expect("consistent sizes")
}

/// `ẋ = A x` by the classical fourth-order Runge–Kutta method.
pub fn rk4_linear(a: &DMatrix<f64>, x0: &DVector<f64>, t1: f64, dt: f64) -> DVector<f64> {
    let steps = (t1 / dt).round() as usize;
    let mut x = x0.clone();
    for _ in 0..steps {
        let k1 = a * &x;
        let k2 = a * (&x + &k1 * (0.5 * dt));
        let k3 = a * (&x + &k2 * (0.5 * dt));
        let k4 = a * (&x + &k3 * dt);
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    }
    x
}

/// Two-mass right-hand side matrix `(J − R) Q`, written out independently
/// of the library constructor.
pub fn two_mass_operator(m1: f64, m2: f64, k: f64, k1: f64, k2: f64, r1: f64, r2: f64) -> DMatrix<f64> {
    #[rustfmt::skip]
    let jr = DMatrix::from_row_slice(5, 5, &[
        -r1, -1.0, -1.0,  0.0,  0.0,
        1.0,  0.0,  0.0,  0.0,  0.0,
        1.0,  0.0,  0.0, -1.0,  0.0,
        0.0,  0.0,  1.0,  -r2, -1.0,
        0.0,  0.0,  0.0,  1.0,  0.0,
    ]);
    jr * DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / m1, k1, k, 1.0 / m2, k2]))
}
