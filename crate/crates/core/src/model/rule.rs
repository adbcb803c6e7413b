use nalgebra::{DMatrix, DVector};

use super::{AroProblem, Diagnostic};
use crate::error::{check_len, Error, Result};

/// Asymmetry above this level is logged when a rule is symmetrized.
pub const SYMMETRY_WARN_TOL: f64 = 1e-9;

const SYMMETRY_CHECK_TOL: f64 = 1e-12;

/// Coefficients of the parameterized quadratic decision rule
///
/// ```text
/// y(z) = θ (y0 + W z) + (1 − θ) (zᵀQ₁z, …, zᵀQₖz)ᵀ
/// ```
///
/// `θ = 1` is the affine rule, `θ = 0` the homogeneous quadratic rule.
/// With `separable` set every `Q_j` is diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct QdrCoefficients {
    pub theta: f64,
    pub y0: DVector<f64>,
    pub w: DMatrix<f64>,
    pub q: Vec<DMatrix<f64>>,
    pub separable: bool,
}

impl QdrCoefficients {
    /// Builds a rule, replacing each `Q_j` by its symmetric part.
    pub fn new(theta: f64, y0: DVector<f64>, w: DMatrix<f64>, q: Vec<DMatrix<f64>>, separable: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Invalid(format!("theta must lie in [0, 1], got {theta}")));
        }
        let k = y0.len();
        check_len("rule W rows", k, w.nrows())?;
        check_len("rule Q count", k, q.len())?;
        let l = w.ncols();
        let mut sym = Vec::with_capacity(k);
        for (j, qj) in q.into_iter().enumerate() {
            if qj.shape() != (l, l) {
                return Err(Error::Dimension {
                    context: format!("rule Q[{j}]"),
                    expected: l,
                    found: qj.nrows(),
                });
            }
            let asym = (&qj - qj.transpose()).amax();
            if asym > SYMMETRY_WARN_TOL {
                log::warn!("Q[{j}] asymmetric by {asym:e}; using its symmetric part");
            }
            let s = (&qj + qj.transpose()) * 0.5;
            if separable && s.iter().enumerate().any(|(idx, v)| idx % l != idx / l && *v != 0.0) {
                return Err(Error::Invalid(format!("separable rule requires diagonal Q[{j}]")));
            }
            sym.push(s);
        }
        Ok(Self {
            theta,
            y0,
            w,
            q: sym,
            separable,
        })
    }

    /// The all-zero rule.
    pub fn zeros(theta: f64, k: usize, l: usize, separable: bool) -> Self {
        Self {
            theta,
            y0: DVector::zeros(k),
            w: DMatrix::zeros(k, l),
            q: vec![DMatrix::zeros(l, l); k],
            separable,
        }
    }

    /// The affine rule `y(z) = y0 + W z`, i.e. `θ = 1` with `Q = 0`.
    pub fn affine(y0: DVector<f64>, w: DMatrix<f64>) -> Self {
        let (k, l) = w.shape();
        Self {
            theta: 1.0,
            y0,
            w,
            q: vec![DMatrix::zeros(l, l); k],
            separable: true,
        }
    }

    /// A separable rule from the diagonal entries `q[(p, j)] = (Q_j)_pp`.
    pub fn separable_from_diagonals(
        theta: f64,
        y0: DVector<f64>,
        w: DMatrix<f64>,
        diag: &DMatrix<f64>,
    ) -> Result<Self> {
        let k = diag.ncols();
        check_len("separable diagonal columns", y0.len(), k)?;
        let q = (0..k)
            .map(|j| DMatrix::from_diagonal(&diag.column(j).into_owned()))
            .collect();
        Self::new(theta, y0, w, q, true)
    }

    pub fn k(&self) -> usize {
        self.y0.len()
    }

    pub fn l(&self) -> usize {
        self.w.ncols()
    }

    /// Diagonal entries as an l×k matrix, column `j` holding `diag(Q_j)`.
    pub fn diagonals(&self) -> DMatrix<f64> {
        let (k, l) = (self.k(), self.l());
        DMatrix::from_fn(l, k, |p, j| self.q[j][(p, p)])
    }

    /// Invariant check for rules that were not built through [`Self::new`].
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if !(0.0..=1.0).contains(&self.theta) {
            out.push(Diagnostic::new("theta", format!("{} not in [0, 1]", self.theta)));
        }
        let (k, l) = (self.k(), self.l());
        if self.w.nrows() != k {
            out.push(Diagnostic::new("W", format!("{} rows != k = {k}", self.w.nrows())));
        }
        if self.q.len() != k {
            out.push(Diagnostic::new("Q", format!("{} matrices != k = {k}", self.q.len())));
        }
        for (j, qj) in self.q.iter().enumerate() {
            if qj.shape() != (l, l) {
                out.push(Diagnostic::new(
                    format!("Q[{j}]"),
                    format!("shape {:?} != ({l}, {l})", qj.shape()),
                ));
                continue;
            }
            let asym = (qj - qj.transpose()).amax();
            if asym > SYMMETRY_CHECK_TOL {
                out.push(Diagnostic::new(format!("Q[{j}]"), format!("asymmetric by {asym:e}")));
            }
            if self.separable {
                let off = (0..l)
                    .flat_map(|a| (0..l).map(move |b| (a, b)))
                    .any(|(a, b)| a != b && qj[(a, b)] != 0.0);
                if off {
                    out.push(Diagnostic::new(
                        format!("Q[{j}]"),
                        "separable rule has off-diagonal entries",
                    ));
                }
            }
        }
        out
    }
}

/// Evaluates `y(z)` for the given rule.
pub fn evaluate_rule(rule: &QdrCoefficients, z: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("z", rule.l(), z.len())?;
    let theta = rule.theta;
    let affine = &rule.y0 + &rule.w * z;
    let quad = DVector::from_iterator(rule.k(), rule.q.iter().map(|qj| qj.dot(&(z * z.transpose()))));
    Ok(affine * theta + quad * (1.0 - theta))
}

/// Row residuals `(a_i + A_i z)ᵀx + b_iᵀ y(z) − d0_i − d_iᵀ z` at a fixed `z`.
/// A row is satisfied at `z` iff its residual is nonpositive.
pub fn constraint_residuals(
    problem: &AroProblem,
    x: &DVector<f64>,
    rule: &QdrCoefficients,
    z: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_len("x", problem.n(), x.len())?;
    check_len("rule k", problem.k(), rule.k())?;
    check_len("z", problem.l(), z.len())?;
    let y = evaluate_rule(rule, z)?;
    Ok(DVector::from_iterator(
        problem.m(),
        problem
            .rows
            .iter()
            .map(|row| (&row.a + &row.a_z * z).dot(x) + row.b.dot(&y) - row.d0 - row.d.dot(z)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BallUncertainty, ConstraintRow};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn theta_one_is_affine() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 0.5, 2.0]);
        let q = vec![DMatrix::from_element(2, 2, 7.0), DMatrix::identity(2, 2)];
        let rule = QdrCoefficients::new(1.0, dv(&[3.0, -1.0]), w.clone(), q, false).unwrap();
        let z = dv(&[1.0, 2.0]);
        let y = evaluate_rule(&rule, &z).unwrap();
        assert_eq!(y, dv(&[3.0, -1.0]) + w * z);
    }

    #[test]
    fn theta_zero_identity_gives_squared_norm() {
        let rule = QdrCoefficients::new(
            0.0,
            dv(&[9.0]),
            DMatrix::from_element(1, 2, 4.0),
            vec![DMatrix::identity(2, 2)],
            false,
        )
        .unwrap();
        let y = evaluate_rule(&rule, &dv(&[3.0, 4.0])).unwrap();
        assert_eq!(y[0], 25.0);
    }

    #[test]
    fn half_theta_hand_value() {
        // ½(2 + 1) + ½·2 = 2.5
        let rule = QdrCoefficients::new(
            0.5,
            dv(&[2.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            vec![DMatrix::from_diagonal(&dv(&[2.0, 0.0]))],
            true,
        )
        .unwrap();
        let y = evaluate_rule(&rule, &dv(&[1.0, 1.0])).unwrap();
        assert_eq!(y[0], 2.5);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let rule = QdrCoefficients::zeros(0.5, 2, 3, false);
        assert!(matches!(
            evaluate_rule(&rule, &dv(&[1.0])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn asymmetric_q_is_symmetrized() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let rule = QdrCoefficients::new(0.0, dv(&[0.0]), DMatrix::zeros(1, 2), vec![q], false).unwrap();
        assert_eq!(rule.q[0], DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert!(rule.validate().is_empty());
    }

    #[test]
    fn validate_flags_asymmetry() {
        let mut rule = QdrCoefficients::zeros(0.5, 1, 2, false);
        rule.q[0][(0, 1)] = 1e-3;
        let diags = rule.validate();
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].field, "Q[0]");
    }

    #[test]
    fn separable_rejects_off_diagonal() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(QdrCoefficients::new(0.5, dv(&[0.0]), DMatrix::zeros(1, 2), vec![q], true).is_err());
    }

    #[test]
    fn residuals_of_zero_problem_vanish() {
        let p = AroProblem {
            c: DVector::zeros(2),
            k: 2,
            rows: vec![ConstraintRow::zeros(2, 2, 2); 3],
            uncertainty: BallUncertainty::new(1.0, 2),
            w: None,
            cost_uncertainty: None,
        };
        let rule = QdrCoefficients::new(
            0.3,
            dv(&[1.0, 2.0]),
            DMatrix::from_element(2, 2, 1.0),
            vec![DMatrix::identity(2, 2); 2],
            false,
        )
        .unwrap();
        let r = constraint_residuals(&p, &dv(&[5.0, -1.0]), &rule, &dv(&[0.3, 0.1])).unwrap();
        assert_eq!(r, DVector::zeros(3));
    }

    #[test]
    fn residual_single_row() {
        let mut row = ConstraintRow::zeros(1, 1, 1);
        row.a[0] = 1.0;
        row.d0 = 2.0;
        let p = AroProblem {
            c: dv(&[1.0]),
            k: 1,
            rows: vec![row],
            uncertainty: BallUncertainty::new(1.0, 1),
            w: None,
            cost_uncertainty: None,
        };
        let rule = QdrCoefficients::zeros(1.0, 1, 1, false);
        let r = constraint_residuals(&p, &dv(&[1.0]), &rule, &dv(&[0.4])).unwrap();
        assert_eq!(r[0], -1.0);
    }

    #[test]
    fn residuals_match_scalar_reevaluation() {
        // Random 2x2 instance re-evaluated with explicit index loops.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut u = || rng.random_range(-2.0..2.0);
        let (n, k, l) = (2, 2, 2);
        let rows: Vec<ConstraintRow> = (0..2)
            .map(|_| ConstraintRow {
                a: DVector::from_fn(n, |_, _| u()),
                a_z: DMatrix::from_fn(n, l, |_, _| u()),
                b: DVector::from_fn(k, |_, _| u()),
                d0: u(),
                d: DVector::from_fn(l, |_, _| u()),
            })
            .collect();
        let p = AroProblem {
            c: DVector::zeros(n),
            k,
            rows,
            uncertainty: BallUncertainty::new(1.0, l),
            w: None,
            cost_uncertainty: None,
        };
        let q = vec![DMatrix::from_fn(l, l, |_, _| u()), DMatrix::from_fn(l, l, |_, _| u())];
        let rule = QdrCoefficients::new(
            0.4,
            DVector::from_fn(k, |_, _| u()),
            DMatrix::from_fn(k, l, |_, _| u()),
            q,
            false,
        )
        .unwrap();
        let x = DVector::from_fn(n, |_, _| u());
        let z = DVector::from_fn(l, |_, _| u());
        let got = constraint_residuals(&p, &x, &rule, &z).unwrap();
        for (i, row) in p.rows.iter().enumerate() {
            let mut lhs = 0.0;
            for s in 0..n {
                let mut coef = row.a[s];
                for t in 0..l {
                    coef += row.a_z[(s, t)] * z[t];
                }
                lhs += coef * x[s];
            }
            for j in 0..k {
                let mut yj = rule.y0[j];
                for t in 0..l {
                    yj += rule.w[(j, t)] * z[t];
                }
                let mut quad = 0.0;
                for a in 0..l {
                    for b in 0..l {
                        quad += z[a] * rule.q[j][(a, b)] * z[b];
                    }
                }
                lhs += row.b[j] * (rule.theta * yj + (1.0 - rule.theta) * quad);
            }
            let mut rhs = row.d0;
            for t in 0..l {
                rhs += row.d[t] * z[t];
            }
            assert_abs_diff_eq!(got[i], lhs - rhs, epsilon = 1e-12);
        }
    }

    fn arb_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0..3.0f64, len)
    }

    proptest! {
        #[test]
        fn affine_rule_has_vanishing_second_differences(
            y0 in arb_vec(2), w in arb_vec(6), qv in arb_vec(18), z in arb_vec(3), h in arb_vec(3)
        ) {
            let q = (0..2).map(|j| DMatrix::from_column_slice(3, 3, &qv[9 * j..9 * j + 9])).collect();
            let rule = QdrCoefficients::new(1.0, DVector::from_vec(y0), DMatrix::from_row_slice(2, 3, &w), q, false).unwrap();
            let z = DVector::from_vec(z);
            let h = DVector::from_vec(h);
            let f = |v: &DVector<f64>| evaluate_rule(&rule, v).unwrap();
            let second = f(&(&z + &h)) - f(&z) * 2.0 + f(&(&z - &h));
            prop_assert!(second.amax() <= 1e-10);
        }

        #[test]
        fn theta_zero_is_pure_quadratic(y0 in arb_vec(2), w in arb_vec(4), qv in arb_vec(8), z in arb_vec(2)) {
            let q: Vec<_> = (0..2).map(|j| DMatrix::from_column_slice(2, 2, &qv[4 * j..4 * j + 4])).collect();
            let rule = QdrCoefficients::new(0.0, DVector::from_vec(y0), DMatrix::from_row_slice(2, 2, &w), q, false).unwrap();
            let z = DVector::from_vec(z);
            let y = evaluate_rule(&rule, &z).unwrap();
            for j in 0..2 {
                let quad = (z.transpose() * &rule.q[j] * &z)[0];
                prop_assert!((y[j] - quad).abs() <= 1e-12 * (1.0 + quad.abs()));
            }
        }

        #[test]
        fn separable_matches_sum_of_squares(theta in 0.0..=1.0f64, y0 in arb_vec(2), w in arb_vec(6), dq in arb_vec(6), z in arb_vec(3)) {
            let diag = DMatrix::from_column_slice(3, 2, &dq);
            let rule = QdrCoefficients::separable_from_diagonals(theta, DVector::from_vec(y0.clone()), DMatrix::from_row_slice(2, 3, &w), &diag).unwrap();
            let y = evaluate_rule(&rule, &DVector::from_vec(z.clone())).unwrap();
            for j in 0..2 {
                let lin: f64 = y0[j] + (0..3).map(|p| w[j * 3 + p] * z[p]).sum::<f64>();
                let quad: f64 = (0..3).map(|p| dq[j * 3 + p] * z[p] * z[p]).sum();
                let expect = theta * lin + (1.0 - theta) * quad;
                prop_assert!((y[j] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
    }
}
