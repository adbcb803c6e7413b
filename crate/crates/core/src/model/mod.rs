//! Problem data for two-stage adjustable robust linear programs.
//!
//! A problem is stored row by row. Row `i` encodes the semi-infinite
//! constraint
//!
//! ```text
//! (a_i + A_i z)ᵀ x + b_iᵀ y(z) ≤ d0_i + d_iᵀ z      for all ‖z‖ ≤ r
//! ```
//!
//! where `x ∈ ℝⁿ` is decided before `z ∈ ℝˡ` is revealed and `y(z) ∈ ℝᵏ`
//! follows a decision rule (see [`QdrCoefficients`]).

mod io;
mod rule;

pub use io::{
    load_problem, policy_from_json, policy_to_json, problem_from_json, problem_to_json, save_problem, PolicyRecord,
    SCHEMA_VERSION,
};
pub use rule::{constraint_residuals, evaluate_rule, QdrCoefficients, SYMMETRY_WARN_TOL};

use nalgebra::{DMatrix, DVector};

/// The centered Euclidean ball `{z ∈ ℝˡ : ‖z‖² ≤ r²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallUncertainty {
    pub radius: f64,
    pub dim: usize,
}

impl BallUncertainty {
    pub fn new(radius: f64, dim: usize) -> Self {
        Self { radius, dim }
    }

    pub fn contains(&self, z: &DVector<f64>) -> bool {
        z.len() == self.dim && z.norm_squared() <= self.radius * self.radius
    }
}

/// One robust constraint row: `(a + A z)ᵀ x + bᵀ y(z) ≤ d0 + dᵀ z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    /// Nominal first-stage coefficients, length n.
    pub a: DVector<f64>,
    /// Uncertainty map of the first-stage coefficients, n×l.
    pub a_z: DMatrix<f64>,
    /// Fixed recourse coefficients, length k.
    pub b: DVector<f64>,
    pub d0: f64,
    /// Uncertainty map of the right-hand side, length l.
    pub d: DVector<f64>,
}

impl ConstraintRow {
    pub fn zeros(n: usize, k: usize, l: usize) -> Self {
        Self {
            a: DVector::zeros(n),
            a_z: DMatrix::zeros(n, l),
            b: DVector::zeros(k),
            d0: 0.0,
            d: DVector::zeros(l),
        }
    }
}

/// Uncertain first-stage cost `c ∈ {c : ‖c − c0‖₂ ≤ rho}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostUncertainty {
    pub c0: DVector<f64>,
    pub rho: f64,
}

/// A two-stage adjustable robust linear program.
///
/// When `w` is present the recourse also appears in the objective, which
/// becomes `cᵀx + max_{z} wᵀ y(z)`. When `cost_uncertainty` is present the
/// first-stage cost is the worst case over the cost ball and `c0` takes the
/// place of `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AroProblem {
    pub c: DVector<f64>,
    /// Number of adjustable variables.
    pub k: usize,
    pub rows: Vec<ConstraintRow>,
    pub uncertainty: BallUncertainty,
    pub w: Option<DVector<f64>>,
    pub cost_uncertainty: Option<CostUncertainty>,
}

impl AroProblem {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.uncertainty.dim
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn radius(&self) -> f64 {
        self.uncertainty.radius
    }

    /// Checks every structural invariant. Returns one diagnostic per
    /// violation; an empty list means the problem is well formed.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let (n, k, l) = (self.n(), self.k(), self.l());

        if !(self.uncertainty.radius.is_finite() && self.uncertainty.radius > 0.0) {
            out.push(Diagnostic::new(
                "uncertainty.radius",
                format!("radius must be finite and r > 0, got {}", self.uncertainty.radius),
            ));
        }
        if l == 0 {
            out.push(Diagnostic::new("uncertainty.dim", "l must be at least 1"));
        }
        if n == 0 {
            out.push(Diagnostic::new("c", "n must be at least 1"));
        }
        if k == 0 {
            out.push(Diagnostic::new("k", "k must be at least 1"));
        }
        if self.rows.is_empty() {
            out.push(Diagnostic::new("rows", "m must be at least 1"));
        }
        check_finite_vec(&mut out, "c", &self.c);

        for (i, row) in self.rows.iter().enumerate() {
            let at = |field: &str| format!("rows[{i}].{field}");
            if row.a.len() != n {
                out.push(Diagnostic::new(at("a"), format!("length {} != n = {n}", row.a.len())));
            }
            if row.a_z.shape() != (n, l) {
                out.push(Diagnostic::new(
                    at("A"),
                    format!("shape {:?} != (n, l) = ({n}, {l})", row.a_z.shape()),
                ));
            }
            if row.b.len() != k {
                out.push(Diagnostic::new(at("b"), format!("length {} != k = {k}", row.b.len())));
            }
            if row.d.len() != l {
                out.push(Diagnostic::new(at("d"), format!("length {} != l = {l}", row.d.len())));
            }
            check_finite_vec(&mut out, &at("a"), &row.a);
            check_finite_vec(&mut out, &at("b"), &row.b);
            check_finite_vec(&mut out, &at("d"), &row.d);
            if row.a_z.iter().any(|v| !v.is_finite()) {
                out.push(Diagnostic::new(at("A"), "non-finite entry"));
            }
            if !row.d0.is_finite() {
                out.push(Diagnostic::new(at("d0"), "non-finite value"));
            }
        }

        if let Some(w) = &self.w {
            if w.len() != k {
                out.push(Diagnostic::new("w", format!("length {} != k = {k}", w.len())));
            }
            check_finite_vec(&mut out, "w", w);
        }
        if let Some(cu) = &self.cost_uncertainty {
            if cu.c0.len() != n {
                out.push(Diagnostic::new(
                    "cost_uncertainty.c0",
                    format!("length {} != n = {n}", cu.c0.len()),
                ));
            }
            check_finite_vec(&mut out, "cost_uncertainty.c0", &cu.c0);
            if !(cu.rho.is_finite() && cu.rho >= 0.0) {
                out.push(Diagnostic::new(
                    "cost_uncertainty.rho",
                    format!("rho must be finite and nonnegative, got {}", cu.rho),
                ));
            }
        }
        out
    }

    /// `validate` as a `Result`, joining all diagnostics into one message.
    pub fn ensure_valid(&self) -> crate::Result<()> {
        let diags = self.validate();
        if diags.is_empty() {
            Ok(())
        } else {
            let msg = diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ");
            Err(crate::Error::Invalid(msg))
        }
    }
}

fn check_finite_vec(out: &mut Vec<Diagnostic>, field: &str, v: &DVector<f64>) {
    if v.iter().any(|x| !x.is_finite()) {
        out.push(Diagnostic::new(field, "non-finite entry"));
    }
}

/// A single invariant violation, located by field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}
