//! The per-row second-order cone system against exact robust feasibility,
//! at fixed decision points with the slack `s` chosen in closed form.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_qdr::conic::{pack_rule, Layout};
use robust_qdr::model::{AroProblem, BallUncertainty, ConstraintRow, QdrCoefficients};
use robust_qdr::oracle::verify_robust_feasibility;
use robust_qdr::socp::reformulate_socp;

struct Point {
    problem: AroProblem,
    x: DVector<f64>,
    rule: QdrCoefficients,
}

fn random_point(rng: &mut ChaCha8Rng) -> Point {
    let (n, k, l) = (
        rng.random_range(1..=2),
        rng.random_range(1..=2),
        rng.random_range(1..=3),
    );
    let mut u = |len: usize| DVector::from_fn(len, |_, _| rng.random_range(-1.0..=1.0));
    let row = ConstraintRow {
        a: u(n),
        a_z: DMatrix::from_column_slice(n, l, u(n * l).as_slice()),
        b: u(k),
        d0: 0.0,
        d: u(l),
    };
    let x = u(n);
    let y0 = u(k);
    let w = DMatrix::from_column_slice(k, l, u(k * l).as_slice());
    let diag = DMatrix::from_column_slice(l, k, u(l * k).as_slice());
    let theta = [0.0, 0.3, 0.5, 1.0][rng.random_range(0..4)];
    let d0 = rng.random_range(-1.0..=4.0);
    let r = rng.random_range(0.5..=1.5);
    let rule = QdrCoefficients::separable_from_diagonals(theta, y0, w, &diag).unwrap();
    let problem = AroProblem {
        c: DVector::zeros(n),
        k,
        rows: vec![ConstraintRow { d0, ..row }],
        uncertainty: BallUncertainty::new(r, l),
        w: None,
        cost_uncertainty: None,
    };
    Point { problem, x, rule }
}

/// Budget slack `d0 − aᵀx − θbᵀy0 − λr² − Σ s_p(λ)` with
/// `s_p = u_p² / (4(λ − (1−θ)σ_p))`, and the slacks themselves.
fn budget_slack(point: &Point, lambda: f64) -> (f64, Vec<f64>) {
    let row = &point.problem.rows[0];
    let rule = &point.rule;
    let theta = rule.theta;
    let r = point.problem.radius();
    let u = &row.d - row.a_z.transpose() * &point.x - rule.w.transpose() * &row.b * theta;
    let mut s = Vec::new();
    let mut slack = row.d0 - row.a.dot(&point.x) - theta * row.b.dot(&rule.y0) - lambda * r * r;
    for p in 0..u.len() {
        let sigma: f64 = (0..rule.k()).map(|j| row.b[j] * rule.q[j][(p, p)]).sum();
        let beta = lambda - (1.0 - theta) * sigma;
        let sp = if u[p] == 0.0 && beta >= 0.0 {
            0.0
        } else if beta > 0.0 {
            u[p] * u[p] / (4.0 * beta)
        } else {
            f64::INFINITY
        };
        slack -= sp;
        s.push(sp);
    }
    (slack, s)
}

/// Golden-section search of the concave budget slack over `λ`.
fn best_multiplier(point: &Point) -> (f64, f64) {
    let row = &point.problem.rows[0];
    let rule = &point.rule;
    let lo = (0..rule.l())
        .map(|p| (1.0 - rule.theta) * (0..rule.k()).map(|j| row.b[j] * rule.q[j][(p, p)]).sum::<f64>())
        .fold(0.0, f64::max);
    let (mut a, mut b) = (lo, lo + 1e3);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if budget_slack(point, c).0 >= budget_slack(point, d).0 {
            b = d;
        } else {
            a = c;
        }
    }
    let lambda = 0.5 * (a + b);
    (lambda, budget_slack(point, lambda).0)
}

#[test]
fn closed_form_slack_agrees_with_the_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let (mut feasible, mut infeasible, mut checked) = (0, 0, 0);
    for _ in 0..100 {
        let point = random_point(&mut rng);
        let report = verify_robust_feasibility(&point.problem, &point.x, &point.rule, 0.0).unwrap();
        let worst = report.rows[0].worst_value;
        let (lambda, slack) = best_multiplier(&point);
        if worst.abs() < 1e-6 || slack.abs() < 1e-6 {
            continue;
        }
        checked += 1;
        assert_eq!(worst <= 0.0, slack >= 0.0, "oracle {worst} vs system slack {slack}");

        let (program, layout) = reformulate_socp(&point.problem, point.rule.theta).unwrap();
        let mut values = pack_rule(&Layout::Socp(layout.clone()), &point.x, &point.rule).unwrap();
        values[layout.lambda(0)] = lambda;
        for (p, sp) in budget_slack(&point, lambda).1.into_iter().enumerate() {
            values[layout.s(0, p)] = sp;
        }
        let violation = program.max_violation(&values);
        if worst <= 0.0 {
            feasible += 1;
            assert!(violation <= 1e-9, "feasible point violates the program by {violation}");
        } else {
            infeasible += 1;
            assert!(violation > 0.0);
        }
    }
    assert!(
        checked >= 90 && feasible >= 10 && infeasible >= 10,
        "{feasible} feasible, {infeasible} infeasible"
    );
}
