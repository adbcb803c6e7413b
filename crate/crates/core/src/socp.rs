//! Second-order cone reformulation for separable (diagonal-`Q`) rules.
//!
//! With diagonal `Q_j = diag(q_{·,j})` the lower-right block of each LMI is
//! diagonal, `λI − (1−θ) diag(σ)` with `σ_p = Σ_j b_j q_{p,j}`. A Schur
//! complement then splits the LMI into per-coordinate pieces: nonnegative
//! slacks `s_p` with
//!
//! ```text
//! Σ_p s_p ≤ d0 − aᵀx − θbᵀy0 − λr²,
//! λ − (1−θ)σ_p ≥ 0,
//! u_p² ≤ 4 s_p (λ − (1−θ)σ_p),        u = d − Aᵀx − θWᵀb,
//! ```
//!
//! and each product bound becomes a three-dimensional second-order cone.

use nalgebra::{DMatrix, DVector};

use crate::conic::{Cone, ConeRow, ConicProgram, Layout, LinExpr, SocpLayout};
use crate::epigraph::{check_inputs, objective_row, set_objective};
use crate::error::{check_len, Error, Result};
use crate::model::{AroProblem, ConstraintRow};

/// `σ_p = Σ_j b_j q_{p,j}` for `q` stored as an l×k matrix.
pub fn sigma_coefficients(b: &DVector<f64>, q: &DMatrix<f64>) -> Result<DVector<f64>> {
    check_len("sigma b", q.ncols(), b.len())?;
    Ok(q * b)
}

/// `t² ≤ 4αβ, α, β ≥ 0` as the cone row `‖(t, α − β)‖ ≤ α + β`.
pub fn product_to_soc(t: &LinExpr, alpha: &LinExpr, beta: &LinExpr) -> Cone {
    let mut head = alpha.clone();
    head.add_scaled(beta, 1.0);
    let mut diff = alpha.clone();
    diff.add_scaled(beta, -1.0);
    Cone::SecondOrder(vec![head, t.clone(), diff])
}

/// Every cone row for one constraint group: `λ ≥ 0`, `s ≥ 0`, the budget,
/// the shift rows and the product cones.
///
/// `epigraph` adds that variable to the budget's right-hand side (used for
/// the objective group).
pub fn soc_rows_for_constraint(
    row: &ConstraintRow,
    theta: f64,
    r: f64,
    layout: &SocpLayout,
    group: usize,
    epigraph: Option<usize>,
) -> Result<Vec<ConeRow>> {
    let (n, k, l) = (layout.n, layout.k, layout.l);
    check_len("row a", n, row.a.len())?;
    check_len("row A rows", n, row.a_z.nrows())?;
    check_len("row A cols", l, row.a_z.ncols())?;
    check_len("row b", k, row.b.len())?;
    check_len("row d", l, row.d.len())?;
    if group >= layout.groups {
        return Err(Error::Layout(format!("group {group} out of {}", layout.groups)));
    }
    assert!(r > 0.0, "radius must be positive");
    let lambda = layout.lambda(group);
    let tag = |what: &str| format!("{what}[{group}]");
    let mut out = Vec::with_capacity(3 * l + 2);
    let mut push = |label: String, cone: Cone| {
        let mut cone = cone;
        if let Cone::SecondOrder(v) = &mut cone {
            v.iter_mut().for_each(LinExpr::compact);
        } else if let Cone::Nonneg(e) = &mut cone {
            e.compact();
        }
        out.push(ConeRow { label, cone });
    };

    push(tag("lambda"), Cone::Nonneg(LinExpr::var(lambda)));
    for p in 0..l {
        push(
            format!("s[{group}][{p}]"),
            Cone::Nonneg(LinExpr::var(layout.s(group, p))),
        );
    }

    let mut budget = LinExpr::constant(row.d0);
    for s in 0..n {
        budget.add_term(layout.x(s), -row.a[s]);
    }
    for j in 0..k {
        budget.add_term(layout.y0(j), -theta * row.b[j]);
    }
    budget.add_term(lambda, -r * r);
    if let Some(t) = epigraph {
        budget.add_term(t, 1.0);
    }
    for p in 0..l {
        budget.add_term(layout.s(group, p), -1.0);
    }
    push(tag("budget"), Cone::Nonneg(budget));

    for p in 0..l {
        // β_p = λ − (1−θ)σ_p with σ_p expanded over q.
        let mut beta = LinExpr::var(lambda);
        for j in 0..k {
            beta.add_term(layout.q(p, j), -(1.0 - theta) * row.b[j]);
        }
        let mut u = LinExpr::constant(row.d[p]);
        for s in 0..n {
            u.add_term(layout.x(s), -row.a_z[(s, p)]);
        }
        for j in 0..k {
            u.add_term(layout.w(j, p), -theta * row.b[j]);
        }
        let alpha = LinExpr::var(layout.s(group, p));
        push(format!("shift[{group}][{p}]"), Cone::Nonneg(beta.clone()));
        push(format!("soc[{group}][{p}]"), product_to_soc(&u, &alpha, &beta));
    }
    Ok(out)
}

/// Builds the SOCP for a problem without an adjustable objective.
pub fn reformulate_separable_qdr_socp(problem: &AroProblem, theta: f64) -> Result<(ConicProgram, SocpLayout)> {
    if problem.w.is_some() {
        return Err(Error::Invalid(
            "problem has an adjustable objective w; use reformulate_objective_socp".into(),
        ));
    }
    reformulate_socp(problem, theta)
}

/// Builds the SOCP for a problem with an adjustable objective `wᵀy(z)`.
pub fn reformulate_objective_socp(problem: &AroProblem, theta: f64) -> Result<(ConicProgram, SocpLayout)> {
    if problem.w.is_none() {
        return Err(Error::Invalid(
            "problem has no adjustable objective w; use reformulate_separable_qdr_socp".into(),
        ));
    }
    reformulate_socp(problem, theta)
}

/// Builds the SOCP for any problem, with or without `w` and cost uncertainty.
pub fn reformulate_socp(problem: &AroProblem, theta: f64) -> Result<(ConicProgram, SocpLayout)> {
    check_inputs(problem, theta)?;
    let (n, k, l, m) = (problem.n(), problem.k(), problem.l(), problem.m());
    let r = problem.radius();
    let groups = m + usize::from(problem.w.is_some());
    let layout = SocpLayout::new(
        n,
        k,
        l,
        theta,
        groups,
        problem.w.is_some(),
        problem.cost_uncertainty.is_some(),
    );
    let mut program = ConicProgram::new("sep-qdr-socp", layout.num_vars);
    set_objective(&mut program, problem, |s| layout.x(s), layout.tau, layout.tau_cost);
    for (i, row) in problem.rows.iter().enumerate() {
        program
            .rows
            .extend(soc_rows_for_constraint(row, theta, r, &layout, i, None)?);
    }
    if let Some(w) = &problem.w {
        let row = objective_row(problem, w);
        program
            .rows
            .extend(soc_rows_for_constraint(&row, theta, r, &layout, m, layout.tau)?);
    }
    program.layout = Some(Layout::Socp(layout.clone()));
    Ok((program, layout))
}
