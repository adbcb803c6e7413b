use std::collections::BTreeMap;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::{Cone, ConicProgram, LinExpr, Solution, SolveStatus, SolverSettings};
use crate::error::{Error, Result};

/// A conic solver adapter.
pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether every row of `program` lies in a cone this backend handles.
    fn supports(&self, program: &ConicProgram) -> bool;

    fn solve(&self, program: &ConicProgram, settings: &SolverSettings) -> Result<Solution>;
}

/// Solves with the default backend (Clarabel, which handles every cone in
/// the IR).
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<Solution> {
    solve_with(&ClarabelBackend, program, settings)
}

pub fn solve_with(backend: &dyn Backend, program: &ConicProgram, settings: &SolverSettings) -> Result<Solution> {
    program.check()?;
    if !backend.supports(program) {
        return Err(Error::Unsupported(format!(
            "backend {} cannot represent program {}",
            backend.name(),
            program.name
        )));
    }
    backend.solve(program, settings)
}

/// Interior-point backend for zero, nonnegative, second-order and PSD cones.
#[derive(Debug, Default, Clone, Copy)]
pub struct ClarabelBackend;

/// Sparse `A`, `b` and cone list in Clarabel's `Ax + s = b, s ∈ K` form.
struct StandardForm {
    a: CscMatrix<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

fn standard_form(program: &ConicProgram) -> StandardForm {
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut b = Vec::new();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    // s = expr  ⇒  A row = −coefficients, b = constant.
    let emit = |expr: &LinExpr, scale: f64, triplets: &mut Vec<(usize, usize, f64)>, b: &mut Vec<f64>| {
        let r = b.len();
        for &(v, c) in &expr.terms {
            triplets.push((r, v, -c * scale));
        }
        b.push(expr.constant * scale);
    };

    for row in &program.rows {
        match &row.cone {
            Cone::Zero(e) => {
                emit(e, 1.0, &mut triplets, &mut b);
                match cones.last_mut() {
                    Some(SupportedConeT::ZeroConeT(n)) => *n += 1,
                    _ => cones.push(SupportedConeT::ZeroConeT(1)),
                }
            }
            Cone::Nonneg(e) => {
                emit(e, 1.0, &mut triplets, &mut b);
                match cones.last_mut() {
                    Some(SupportedConeT::NonnegativeConeT(n)) => *n += 1,
                    _ => cones.push(SupportedConeT::NonnegativeConeT(1)),
                }
            }
            Cone::SecondOrder(v) => {
                for e in v {
                    emit(e, 1.0, &mut triplets, &mut b);
                }
                cones.push(SupportedConeT::SecondOrderConeT(v.len()));
            }
            Cone::Psd(m) => {
                // Clarabel's svec: column-major upper triangle, off-diagonals × √2.
                for j in 0..m.side {
                    for i in 0..=j {
                        let scale = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
                        emit(m.entry(i, j), scale, &mut triplets, &mut b);
                    }
                }
                cones.push(SupportedConeT::PSDTriangleConeT(m.side));
            }
        }
    }

    let nrows = b.len();
    let ncols = program.num_vars;
    let mut cols: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); ncols];
    for (r, c, v) in triplets {
        *cols[c].entry(r).or_insert(0.0) += v;
    }
    let mut colptr = Vec::with_capacity(ncols + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in cols {
        for (r, v) in col {
            if v != 0.0 {
                rowval.push(r);
                nzval.push(v);
            }
        }
        colptr.push(rowval.len());
    }
    StandardForm {
        a: CscMatrix::new(nrows, ncols, colptr, rowval, nzval),
        b,
        cones,
    }
}

fn map_status(status: SolverStatus) -> SolveStatus {
    match status {
        SolverStatus::Solved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => SolveStatus::Unbounded,
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::IterationLimit,
        _ => SolveStatus::NumericalError,
    }
}

impl Backend for ClarabelBackend {
    fn name(&self) -> &'static str {
        "clarabel"
    }

    fn supports(&self, _program: &ConicProgram) -> bool {
        true
    }

    fn solve(&self, program: &ConicProgram, settings: &SolverSettings) -> Result<Solution> {
        let n = program.num_vars;
        let form = standard_form(program);
        let p = CscMatrix::<f64>::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(v, c) in &program.objective.terms {
            q[v] += c;
        }
        let clarabel_settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(settings.max_iter)
            .tol_gap_abs(settings.abs_tol)
            .tol_gap_rel(settings.rel_tol)
            .tol_feas(settings.abs_tol)
            .max_threads(1)
            .build()
            .map_err(|e| Error::Solver(e.to_string()))?;
        let mut solver = DefaultSolver::new(&p, &q, &form.a, &form.b, &form.cones, clarabel_settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        log::debug!("clarabel: {:?} after {} iterations", sol.status, sol.iterations);
        let status = map_status(sol.status);
        let values = sol.x.clone();
        let objective_value = if status == SolveStatus::Optimal {
            program.objective_value(&values)
        } else {
            f64::NAN
        };
        Ok(Solution {
            status,
            values,
            objective_value,
            solver_name: self.name().to_string(),
            iterations: sol.iterations,
        })
    }
}

/// Simplex backend for programs with only zero and nonnegative rows.
#[derive(Debug, Default, Clone, Copy)]
pub struct SimplexBackend;

impl Backend for SimplexBackend {
    fn name(&self) -> &'static str {
        "simplex"
    }

    fn supports(&self, program: &ConicProgram) -> bool {
        program
            .rows
            .iter()
            .all(|r| matches!(r.cone, Cone::Zero(_) | Cone::Nonneg(_)))
    }

    fn solve(&self, program: &ConicProgram, _settings: &SolverSettings) -> Result<Solution> {
        use minilp::{ComparisonOp, OptimizationDirection, Problem};

        // minilp mishandles free columns, so each referenced variable is
        // split as v = v⁺ − v⁻ with v± ≥ 0; unreferenced variables stay 0.
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let mut obj = vec![0.0; program.num_vars];
        for &(v, c) in &program.objective.terms {
            obj[v] += c;
        }
        let mut used = vec![false; program.num_vars];
        for &(v, _) in &program.objective.terms {
            used[v] = true;
        }
        for row in &program.rows {
            if let Cone::Zero(e) | Cone::Nonneg(e) = &row.cone {
                for &(v, _) in &e.terms {
                    used[v] = true;
                }
            }
        }
        let vars: Vec<_> = (0..program.num_vars)
            .map(|v| {
                used[v].then(|| {
                    let pos = lp.add_var(obj[v], (0.0, f64::INFINITY));
                    let neg = lp.add_var(-obj[v], (0.0, f64::INFINITY));
                    (pos, neg)
                })
            })
            .collect();
        for row in &program.rows {
            let (e, op) = match &row.cone {
                Cone::Zero(e) => (e, ComparisonOp::Eq),
                Cone::Nonneg(e) => (e, ComparisonOp::Ge),
                _ => unreachable!("checked by supports"),
            };
            let mut terms = Vec::with_capacity(2 * e.terms.len());
            for &(v, c) in &e.terms {
                let (pos, neg) = vars[v].expect("referenced variable");
                terms.push((pos, c));
                terms.push((neg, -c));
            }
            lp.add_constraint(terms.as_slice(), op, -e.constant);
        }
        let nan = || vec![f64::NAN; program.num_vars];
        let (status, values) = match lp.solve() {
            Ok(sol) if !sol.objective().is_finite() => (SolveStatus::Unbounded, nan()),
            Ok(sol) => (
                SolveStatus::Optimal,
                vars.iter()
                    .map(|pair| pair.map_or(0.0, |(p, n)| *sol.var_value(p) - *sol.var_value(n)))
                    .collect(),
            ),
            Err(minilp::Error::Infeasible) => (SolveStatus::Infeasible, nan()),
            Err(minilp::Error::Unbounded) => (SolveStatus::Unbounded, nan()),
        };
        let objective_value = if status == SolveStatus::Optimal {
            program.objective_value(&values)
        } else {
            f64::NAN
        };
        Ok(Solution {
            status,
            values,
            objective_value,
            solver_name: self.name().to_string(),
            iterations: 0,
        })
    }
}
