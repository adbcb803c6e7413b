//! Semidefinite reformulation for general (full-`Q`) quadratic rules.
//!
//! Row `i` holds for every `z` in the ball iff some `λᵢ ≥ 0` makes
//!
//! ```text
//!       ⎡ d0 − aᵀx − θbᵀy0 − λr²        ½(d − Aᵀx − θWᵀb)ᵀ   ⎤
//! Pᵢ =  ⎣ ½(d − Aᵀx − θWᵀb)        λI − (1−θ) Σⱼ bⱼ Qⱼ    ⎦  ⪰ 0,
//! ```
//!
//! which is affine in `(x, y0, W, Q, λ)`. An adjustable objective `wᵀy(z)`
//! adds one more block of the same shape with `b = w` and `τ` in the corner.

use crate::conic::{AffineMatrix, Cone, ConicProgram, Layout, LinExpr, SdpLayout};
use crate::epigraph::{check_inputs, objective_row, set_objective};
use crate::error::{check_len, Error, Result};
use crate::model::{AroProblem, ConstraintRow};

/// Builder switches for [`reformulate_sdp`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SdpOptions {
    /// Restrict every `Q_j` to be diagonal (the separable rule), keeping the
    /// LMI form. Off-diagonal slots are pinned to zero.
    pub diagonal_q: bool,
}

/// The affine matrix map `Pᵢ` for one row and multiplier `λ_group`.
///
/// When `epigraph` is given, that variable is added to the `(0, 0)` entry;
/// this is how the objective block `τ − θwᵀy0 − λr²` is formed.
pub fn lmi_block(
    row: &ConstraintRow,
    theta: f64,
    r: f64,
    layout: &SdpLayout,
    group: usize,
    epigraph: Option<usize>,
) -> Result<AffineMatrix> {
    let (n, k, l) = (layout.n, layout.k, layout.l);
    check_len("row a", n, row.a.len())?;
    check_len("row A rows", n, row.a_z.nrows())?;
    check_len("row A cols", l, row.a_z.ncols())?;
    check_len("row b", k, row.b.len())?;
    check_len("row d", l, row.d.len())?;
    if group >= layout.groups {
        return Err(Error::Layout(format!("group {group} out of {}", layout.groups)));
    }
    let lambda = layout.lambda(group);

    let mut corner = LinExpr::constant(row.d0);
    for s in 0..n {
        corner.add_term(layout.x(s), -row.a[s]);
    }
    for j in 0..k {
        corner.add_term(layout.y0(j), -theta * row.b[j]);
    }
    corner.add_term(lambda, -r * r);
    if let Some(t) = epigraph {
        corner.add_term(t, 1.0);
    }

    // ½(d − Aᵀx − θWᵀb)_p
    let border = |p: usize| {
        let mut e = LinExpr::constant(0.5 * row.d[p]);
        for s in 0..n {
            e.add_term(layout.x(s), -0.5 * row.a_z[(s, p)]);
        }
        for j in 0..k {
            e.add_term(layout.w(j, p), -0.5 * theta * row.b[j]);
        }
        e
    };

    // λδ_pq − (1−θ) Σ_j b_j (Q_j)_pq
    let inner = |p: usize, q: usize| {
        let mut e = LinExpr::default();
        if p == q {
            e.add_term(lambda, 1.0);
        }
        if !(layout.diagonal_q && p != q) {
            for j in 0..k {
                e.add_term(layout.q(j, p, q), -(1.0 - theta) * row.b[j]);
            }
        }
        e
    };

    Ok(AffineMatrix::from_fn(1 + l, |i, j| match (i, j) {
        (0, 0) => corner.clone(),
        (0, q) => border(q - 1),
        (p, q) => inner(p - 1, q - 1),
    }))
}

/// Builds the SDP for a problem without an adjustable objective.
pub fn reformulate_qdr_sdp(problem: &AroProblem, theta: f64) -> Result<(ConicProgram, SdpLayout)> {
    if problem.w.is_some() {
        return Err(Error::Invalid(
            "problem has an adjustable objective w; use reformulate_objective_sdp".into(),
        ));
    }
    reformulate_sdp(problem, theta, SdpOptions::default())
}

/// Builds the SDP for a problem with an adjustable objective `wᵀy(z)`.
pub fn reformulate_objective_sdp(problem: &AroProblem, theta: f64) -> Result<(ConicProgram, SdpLayout)> {
    if problem.w.is_none() {
        return Err(Error::Invalid(
            "problem has no adjustable objective w; use reformulate_qdr_sdp".into(),
        ));
    }
    reformulate_sdp(problem, theta, SdpOptions::default())
}

/// Builds the SDP for any problem, with or without `w` and cost uncertainty.
pub fn reformulate_sdp(problem: &AroProblem, theta: f64, options: SdpOptions) -> Result<(ConicProgram, SdpLayout)> {
    check_inputs(problem, theta)?;
    let (n, k, l, m) = (problem.n(), problem.k(), problem.l(), problem.m());
    let r = problem.radius();
    let groups = m + usize::from(problem.w.is_some());
    let mut layout = SdpLayout::new(
        n,
        k,
        l,
        theta,
        groups,
        problem.w.is_some(),
        problem.cost_uncertainty.is_some(),
    );
    layout.diagonal_q = options.diagonal_q;

    let name = if options.diagonal_q {
        "qdr-sdp-diagonal"
    } else {
        "qdr-sdp"
    };
    let mut program = ConicProgram::new(name, layout.num_vars);
    set_objective(&mut program, problem, |s| layout.x(s), layout.tau, layout.tau_cost);

    for (i, row) in problem.rows.iter().enumerate() {
        program.push(format!("lambda[{i}]"), Cone::Nonneg(LinExpr::var(layout.lambda(i))));
        program.push(
            format!("P[{i}]"),
            Cone::Psd(lmi_block(row, theta, r, &layout, i, None)?),
        );
    }
    if let Some(w) = &problem.w {
        let row = objective_row(problem, w);
        program.push(format!("lambda[{m}]"), Cone::Nonneg(LinExpr::var(layout.lambda(m))));
        program.push(
            "P[objective]",
            Cone::Psd(lmi_block(&row, theta, r, &layout, m, layout.tau)?),
        );
    }
    if options.diagonal_q {
        for j in 0..k {
            for q in 1..l {
                for p in 0..q {
                    program.push(
                        format!("Q[{j}][{p},{q}]=0"),
                        Cone::Zero(LinExpr::var(layout.q(j, p, q))),
                    );
                }
            }
        }
    }

    program.layout = Some(Layout::Sdp(layout.clone()));
    Ok((program, layout))
}
