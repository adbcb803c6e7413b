//! Random instance generation shared by the integration targets.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_qdr::model::{AroProblem, BallUncertainty, ConstraintRow};

/// Problem sizes of a random instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
}

pub fn random_shape(rng: &mut impl Rng, max_nkl: usize, max_m: usize) -> Shape {
    Shape {
        n: rng.random_range(1..=max_nkl),
        k: rng.random_range(1..=max_nkl),
        l: rng.random_range(1..=max_nkl),
        m: rng.random_range(1..=max_m),
    }
}

fn uniform_vec(rng: &mut impl Rng, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-scale..=scale))
}

/// A random problem that is strictly feasible and bounded.
///
/// `x = 0` with the zero rule satisfies every row with margin because
/// `d0 > r‖d‖`. Boundedness comes from multipliers `μ > 0` with
/// `c = −Σ μᵢ aᵢ` and `Σ μᵢ bᵢ = 0`: at `z = 0` every feasible pair gives
/// `cᵀx ≥ −Σ μᵢ d0ᵢ`.
pub fn random_problem(seed: u64, shape: Shape) -> AroProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Shape { n, k, l, m } = shape;
    let r = rng.random_range(0.5..=2.0);
    let mu: Vec<f64> = (0..m).map(|_| rng.random_range(0.2..=1.0)).collect();
    let mut rows: Vec<ConstraintRow> = (0..m)
        .map(|_| {
            let d = uniform_vec(&mut rng, l, 1.0);
            let d0 = r * d.norm() + rng.random_range(0.1..=1.0);
            ConstraintRow {
                a: uniform_vec(&mut rng, n, 1.0),
                a_z: DMatrix::from_fn(n, l, |_, _| rng.random_range(-0.5..=0.5)),
                b: uniform_vec(&mut rng, k, 1.0),
                d0,
                d,
            }
        })
        .collect();
    let partial = rows[..m - 1]
        .iter()
        .zip(&mu)
        .fold(DVector::zeros(k), |acc, (row, mu)| acc + &row.b * *mu);
    rows[m - 1].b = -partial / mu[m - 1];
    let c = rows
        .iter()
        .zip(&mu)
        .fold(DVector::zeros(n), |acc: DVector<f64>, (row, mu)| acc - &row.a * *mu);
    AroProblem {
        c,
        k,
        rows,
        uncertainty: BallUncertainty::new(r, l),
        w: None,
        cost_uncertainty: None,
    }
}

/// A random symmetric matrix with entries in `[-scale, scale]`.
pub fn random_symmetric(rng: &mut impl Rng, l: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(l, l, |_, _| rng.random_range(-scale..=scale));
    (&a + a.transpose()) * 0.5
}

/// A random orthogonal matrix from the QR factor of a Gaussian-like draw.
pub fn random_rotation(rng: &mut impl Rng, l: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(l, l, |_, _| rng.random_range(-1.0..=1.0));
    a.qr().q()
}

pub fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}
