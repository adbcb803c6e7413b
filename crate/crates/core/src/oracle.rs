//! Independent certification of robust feasibility.
//!
//! Under a quadratic rule each row's residual is a quadratic in `z`,
//!
//! ```text
//! f_i(z) = zᵀ M z + gᵀz + c,   M = (1−θ) Σ_j b_j Q_j,
//!                              g = Aᵀx + θWᵀb − d,
//!                              c = aᵀx + θbᵀy0 − d0,
//! ```
//!
//! and the row holds over the ball iff `max_{‖z‖≤r} f_i(z) ≤ 0`. That maximum
//! is a trust-region subproblem, solved here exactly from an
//! eigendecomposition of `M`; no conic solver is involved.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::model::{AroProblem, ConstraintRow, QdrCoefficients};

/// Relative width below which the secular bisection stops.
const SECULAR_TOL: f64 = 1e-15;

/// Global maximum of `zᵀQz + gᵀz + c0` over `‖z‖ ≤ r`, with a maximizer.
///
/// In eigen-coordinates `Q = V diag(λ) Vᵀ`, `ĝ = Vᵀg`, a global maximizer is
/// `ŷ_i = ĝ_i / (2(μ − λ_i))` for the multiplier `μ ≥ max(λ_max, 0)` with
/// `‖ŷ‖ = r` (or `μ = 0` when that point is interior). When `ĝ` has no
/// weight on the top eigenspace and the remaining components stay inside
/// the ball at `μ = λ_max` (the hard case), the leftover radius is spent
/// along a top eigenvector.
pub fn worst_case_quadratic(q: &DMatrix<f64>, g: &DVector<f64>, c0: f64, r: f64) -> (f64, DVector<f64>) {
    let l = g.len();
    assert!(q.shape() == (l, l), "quadratic and linear parts disagree in size");
    assert!(r > 0.0, "radius must be positive");
    if l == 0 {
        return (c0, DVector::zeros(0));
    }
    let sym = (q + q.transpose()) * 0.5;
    let eig = sym.clone().symmetric_eigen();
    let lam = &eig.eigenvalues;
    let v = &eig.eigenvectors;
    let gh = v.transpose() * g;
    let scale = lam.amax().max(gh.amax()).max(1.0);
    let lmax = lam.max();

    let point = |mu: f64, skip: &dyn Fn(usize) -> bool| -> DVector<f64> {
        DVector::from_fn(l, |i, _| if skip(i) { 0.0 } else { gh[i] / (2.0 * (mu - lam[i])) })
    };
    let none = |_: usize| false;

    let y = 'found: {
        // Interior stationary point of a concave quadratic.
        if lmax < 0.0 {
            let y0 = point(0.0, &none);
            if y0.norm() <= r {
                break 'found y0;
            }
        }
        let lo = lmax.max(0.0);
        let top = |i: usize| lam[i] >= lmax - 1e-12 * scale;
        let top_weight = (0..l).filter(|&i| top(i)).map(|i| gh[i].abs()).fold(0.0, f64::max);
        if lo == lmax && top_weight <= 1e-14 * scale {
            let base = point(lmax, &top);
            let rest = r * r - base.norm_squared();
            if rest >= 0.0 {
                let lead = (0..l).find(|&i| top(i)).expect("top eigenspace is nonempty");
                let mut y = base;
                y[lead] += rest.sqrt();
                break 'found y;
            }
        }
        // ‖ŷ(μ)‖ decreases on (λ_max, ∞) and is at most r at μ = lo + ‖ĝ‖/(2r).
        let mut a = lo;
        let mut b = lo + gh.norm() / (2.0 * r) + f64::EPSILON * scale;
        for _ in 0..400 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b || b - a <= SECULAR_TOL * scale {
                break;
            }
            if point(mid, &none).norm() > r {
                a = mid;
            } else {
                b = mid;
            }
        }
        let y = point(b, &none);
        let norm = y.norm();
        if norm > 0.0 {
            y * (r / norm)
        } else {
            y
        }
    };

    let z = v * &y;
    let value = (z.transpose() * &sym * &z)[0] + g.dot(&z) + c0;
    (value, z)
}

/// `(M, g, c)` of row `row` under `(x, rule)`; see the module docs.
pub fn row_quadratic(
    row: &ConstraintRow,
    x: &DVector<f64>,
    rule: &QdrCoefficients,
) -> Result<(DMatrix<f64>, DVector<f64>, f64)> {
    check_len("x", row.a.len(), x.len())?;
    check_len("rule k", row.b.len(), rule.k())?;
    check_len("rule l", row.d.len(), rule.l())?;
    let theta = rule.theta;
    let l = rule.l();
    let mut m = DMatrix::zeros(l, l);
    for (j, qj) in rule.q.iter().enumerate() {
        m += qj * ((1.0 - theta) * row.b[j]);
    }
    let g = row.a_z.transpose() * x + rule.w.transpose() * &row.b * theta - &row.d;
    let c = row.a.dot(x) + theta * row.b.dot(&rule.y0) - row.d0;
    Ok((m, g, c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluation {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowReport {
    pub label: String,
    pub worst_value: f64,
    pub maximizer: Vec<f64>,
    pub method: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub rows: Vec<RowReport>,
    /// `max wᵀy(z)` and its maximizer when the objective is adjustable.
    pub objective: Option<RowReport>,
    /// Largest positive worst-case residual (0 when every row holds).
    pub max_violation: f64,
    pub tolerance: f64,
    pub feasible: bool,
}

impl VerificationReport {
    /// The constraint row with the largest worst-case value.
    pub fn worst_row(&self) -> Option<&RowReport> {
        self.rows.iter().max_by(|a, b| a.worst_value.total_cmp(&b.worst_value))
    }
}

/// Exact worst case of every row over the ball.
///
/// With an adjustable objective, `max wᵀy(z)` is reported separately; it
/// is a cost, not a feasibility condition, and never enters `max_violation`.
pub fn verify_robust_feasibility(
    problem: &AroProblem,
    x: &DVector<f64>,
    rule: &QdrCoefficients,
    tol: f64,
) -> Result<VerificationReport> {
    check_len("x", problem.n(), x.len())?;
    check_len("rule k", problem.k(), rule.k())?;
    check_len("rule l", problem.l(), rule.l())?;
    let r = problem.radius();
    let rows = problem
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let (m, g, c) = row_quadratic(row, x, rule)?;
            let (worst, z) = worst_case_quadratic(&m, &g, c, r);
            Ok(RowReport {
                label: format!("row[{i}]"),
                worst_value: worst,
                maximizer: z.as_slice().to_vec(),
                method: Evaluation::Exact,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_violation = rows.iter().map(|r| r.worst_value).fold(0.0, f64::max);
    let objective = problem
        .w
        .as_ref()
        .map(|w| {
            let (value, z) = worst_objective(problem, w, rule)?;
            Ok::<_, Error>(RowReport {
                label: "objective".into(),
                worst_value: value,
                maximizer: z.as_slice().to_vec(),
                method: Evaluation::Exact,
            })
        })
        .transpose()?;
    Ok(VerificationReport {
        rows,
        objective,
        max_violation,
        tolerance: tol,
        feasible: max_violation <= tol,
    })
}

/// `max_{‖z‖≤r} wᵀy(z)` and its maximizer.
pub fn worst_objective(problem: &AroProblem, w: &DVector<f64>, rule: &QdrCoefficients) -> Result<(f64, DVector<f64>)> {
    let row = crate::epigraph::objective_row(problem, w);
    let (m, g, c) = row_quadratic(&row, &DVector::zeros(problem.n()), rule)?;
    Ok(worst_case_quadratic(&m, &g, c, problem.radius()))
}

/// Default relative eigenvalue tolerance for [`slemma_certificate`].
pub const CERTIFICATE_TOL: f64 = 1e-7;

/// The S-lemma test `B − λA ⪰ 0` with a relative eigenvalue tolerance:
/// true iff `λ_min(B − λA) ≥ −tol·(1 + ‖B − λA‖_F)`.
pub fn slemma_certificate(a: &DMatrix<f64>, b: &DMatrix<f64>, lambda: f64, tol: f64) -> Result<bool> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::Invalid(format!(
            "S-lemma matrices must be square and equal in size, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let asym = |m: &DMatrix<f64>| (m - m.transpose()).amax();
    if asym(a) > 1e-12 * (1.0 + a.amax()) || asym(b) > 1e-12 * (1.0 + b.amax()) {
        return Err(Error::Invalid("S-lemma matrices must be symmetric".into()));
    }
    if lambda < 0.0 {
        return Err(Error::Invalid(format!("multiplier must be nonnegative, got {lambda}")));
    }
    let s = b - a * lambda;
    let min = s.clone().symmetric_eigenvalues().min();
    Ok(min >= -tol * (1.0 + s.norm()))
}

/// The pair `(A, B)` of the S-lemma for one row: `A` describes the ball,
/// `[1; z]ᵀA[1; z] = r² − ‖z‖²`, and `B` the negated residual,
/// `[1; z]ᵀB[1; z] = −f(z)`.
pub fn slemma_matrices(
    row: &ConstraintRow,
    x: &DVector<f64>,
    rule: &QdrCoefficients,
    r: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (m, g, c) = row_quadratic(row, x, rule)?;
    let l = g.len();
    let mut a = -DMatrix::identity(l + 1, l + 1);
    a[(0, 0)] = r * r;
    let mut b = DMatrix::zeros(l + 1, l + 1);
    b[(0, 0)] = -c;
    for p in 0..l {
        b[(0, p + 1)] = -0.5 * g[p];
        b[(p + 1, 0)] = -0.5 * g[p];
    }
    b.view_mut((1, 1), (l, l)).copy_from(&(-m));
    Ok((a, b))
}

/// A point drawn uniformly from the ball of radius `r` in `ℝˡ`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, l: usize, r: f64) -> DVector<f64> {
    loop {
        let dir = DVector::from_fn(l, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = dir.norm();
        if norm > 0.0 {
            let u: f64 = rng.random();
            return dir * (r * u.powf(1.0 / l as f64) / norm);
        }
    }
}

/// Largest row residual over `n_samples` uniform draws from the ball.
pub fn sample_feasibility(
    problem: &AroProblem,
    x: &DVector<f64>,
    rule: &QdrCoefficients,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if n_samples == 0 {
        return Err(Error::Invalid("n_samples must be at least 1".into()));
    }
    let quads = problem
        .rows
        .iter()
        .map(|row| row_quadratic(row, x, rule))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (l, r) = (problem.l(), problem.radius());
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let z = sample_ball(&mut rng, l, r);
        for (m, g, c) in &quads {
            worst = worst.max((z.transpose() * m * &z)[0] + g.dot(&z) + c);
        }
    }
    Ok(worst)
}
