//! Objective assembly shared by every reformulation.

use crate::conic::{Cone, ConicProgram, LinExpr};
use crate::model::AroProblem;

/// Sets `program.objective` to the first-stage cost plus the optional
/// adjustable-objective epigraph `τ`.
///
/// With cost uncertainty `‖c − c0‖ ≤ ρ` the worst-case first-stage cost is
/// `c0ᵀx + ρ‖x‖`; it is bounded by `τ_c` through the second-order cone row
/// `‖ρx‖ ≤ τ_c − c0ᵀx`, and `τ_c` replaces `cᵀx` in the objective.
pub(crate) fn set_objective(
    program: &mut ConicProgram,
    problem: &AroProblem,
    x: impl Fn(usize) -> usize,
    tau: Option<usize>,
    tau_cost: Option<usize>,
) {
    let n = problem.n();
    let mut objective = LinExpr::default();
    match (&problem.cost_uncertainty, tau_cost) {
        (Some(cu), Some(tc)) => {
            let mut head = LinExpr::var(tc);
            for s in 0..n {
                head.add_term(x(s), -cu.c0[s]);
            }
            let mut cone = vec![head];
            cone.extend((0..n).map(|s| LinExpr::default().with_term(x(s), cu.rho)));
            program.push("cost_uncertainty", Cone::SecondOrder(cone));
            objective.add_term(tc, 1.0);
        }
        _ => {
            for s in 0..n {
                objective.add_term(x(s), problem.c[s]);
            }
        }
    }
    if let Some(t) = tau {
        objective.add_term(t, 1.0);
    }
    objective.compact();
    program.objective = objective;
}

/// The row `wᵀy(z) ≤ τ`, expressed as a constraint row with zero
/// first-stage data; `τ` itself is added by the caller.
pub(crate) fn objective_row(problem: &AroProblem, w: &nalgebra::DVector<f64>) -> crate::model::ConstraintRow {
    let mut row = crate::model::ConstraintRow::zeros(problem.n(), problem.k(), problem.l());
    row.b.copy_from(w);
    row
}

/// Common preconditions of every builder.
pub(crate) fn check_inputs(problem: &AroProblem, theta: f64) -> crate::Result<()> {
    problem.ensure_valid()?;
    if !(0.0..=1.0).contains(&theta) {
        return Err(crate::Error::Invalid(format!("theta must lie in [0, 1], got {theta}")));
    }
    Ok(())
}
