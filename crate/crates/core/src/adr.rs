//! Classical robust counterpart under the affine rule `y(z) = y0 + Wz`.
//!
//! Each row is linear in `z`, so its worst case over the ball is a norm:
//!
//! ```text
//! aᵀx + bᵀy0 + r‖Aᵀx + Wᵀb − d‖ ≤ d0.
//! ```
//!
//! Rows whose uncertainty map vanishes identically are emitted as plain
//! linear inequalities, so fully certain problems stay linear programs.

use crate::conic::{AdrLayout, Cone, ConicProgram, Layout, LinExpr};
use crate::epigraph::{objective_row, set_objective};
use crate::error::Result;
use crate::model::{AroProblem, ConstraintRow};

fn robust_row(
    program: &mut ConicProgram,
    label: String,
    row: &ConstraintRow,
    r: f64,
    layout: &AdrLayout,
    epigraph: Option<usize>,
) {
    let (n, k, l) = (layout.n, layout.k, layout.l);
    let mut head = LinExpr::constant(row.d0);
    for s in 0..n {
        head.add_term(layout.x + s, -row.a[s]);
    }
    for j in 0..k {
        head.add_term(layout.y0 + j, -row.b[j]);
    }
    if let Some(t) = epigraph {
        head.add_term(t, 1.0);
    }
    let mut tail: Vec<LinExpr> = (0..l)
        .map(|p| {
            let mut e = LinExpr::constant(r * row.d[p]);
            for s in 0..n {
                e.add_term(layout.x + s, -r * row.a_z[(s, p)]);
            }
            for j in 0..k {
                e.add_term(layout.w(j, p), -r * row.b[j]);
            }
            e
        })
        .collect();
    tail.retain(|e| !e.terms.is_empty() || e.constant != 0.0);
    if tail.is_empty() {
        program.push(label, Cone::Nonneg(head));
    } else {
        let mut cone = vec![head];
        cone.extend(tail);
        program.push(label, Cone::SecondOrder(cone));
    }
}

/// Builds the affine-rule robust counterpart (with the objective epigraph
/// and cost-uncertainty row when the problem carries them).
pub fn reformulate_adr(problem: &AroProblem) -> Result<(ConicProgram, AdrLayout)> {
    problem.ensure_valid()?;
    let (n, k, l) = (problem.n(), problem.k(), problem.l());
    let r = problem.radius();
    let layout = AdrLayout::new(n, k, l, problem.w.is_some(), problem.cost_uncertainty.is_some());
    let mut program = ConicProgram::new("adr-socp", layout.num_vars);
    set_objective(&mut program, problem, |s| layout.x + s, layout.tau, layout.tau_cost);
    for (i, row) in problem.rows.iter().enumerate() {
        robust_row(&mut program, format!("row[{i}]"), row, r, &layout, None);
    }
    if let Some(w) = &problem.w {
        let row = objective_row(problem, w);
        robust_row(&mut program, "objective".into(), &row, r, &layout, layout.tau);
    }
    program.layout = Some(Layout::Adr(layout.clone()));
    Ok((program, layout))
}
