//! Solver-neutral conic program representation.
//!
//! A [`ConicProgram`] minimizes an affine objective over `num_vars` free
//! variables subject to cone rows. Each row is an affine expression (or a
//! vector / symmetric matrix of them) required to lie in its cone. PSD blocks
//! are stored as plain, unscaled upper triangles; backends apply whatever
//! vectorization scaling they need.

mod backend;
mod layout;

pub use backend::{solve, solve_with, Backend, ClarabelBackend, SimplexBackend};
pub use layout::{extract_rule, pack_rule, program_stats, AdrLayout, Layout, ProgramStats, SdpLayout, SocpLayout};

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `Σ coef·var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(index: usize) -> Self {
        Self {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    /// Adds `coef·var`; exact zeros are dropped so that absent dependence
    /// stays structurally absent.
    pub fn add_term(&mut self, index: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((index, coef));
        }
        self
    }

    pub fn with_term(mut self, index: usize, coef: f64) -> Self {
        self.add_term(index, coef);
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn add_constant(&mut self, c: f64) -> &mut Self {
        self.constant += c;
        self
    }

    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) -> &mut Self {
        for &(i, c) in &other.terms {
            self.add_term(i, c * scale);
        }
        self.constant += other.constant * scale;
        self
    }

    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = LinExpr::constant(0.0);
        out.add_scaled(self, scale);
        out
    }

    /// Merges duplicate variables and drops cancelled terms.
    pub fn compact(&mut self) {
        self.terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for &(i, c) in &self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.terms = merged;
    }

    pub fn coefficient(&self, index: usize) -> f64 {
        self.terms.iter().filter(|t| t.0 == index).map(|t| t.1).sum()
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * values[i]).sum::<f64>()
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for &(i, c) in &self.terms {
            if first {
                write!(f, "{c}·v{i}")?;
            } else if c < 0.0 {
                write!(f, " - {}·v{i}", -c)?;
            } else {
                write!(f, " + {c}·v{i}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant < 0.0 {
            write!(f, " - {}", -self.constant)
        } else if self.constant > 0.0 {
            write!(f, " + {}", self.constant)
        } else {
            Ok(())
        }
    }
}

/// Index of entry `(i, j)`, `i ≤ j`, in a column-major packed upper triangle.
pub fn triu_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// An affine map into symmetric `side × side` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMatrix {
    pub side: usize,
    /// Packed upper triangle, column-major (see [`triu_index`]).
    pub entries: Vec<LinExpr>,
}

impl AffineMatrix {
    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> LinExpr) -> Self {
        let mut entries = vec![LinExpr::default(); side * (side + 1) / 2];
        for j in 0..side {
            for i in 0..=j {
                entries[triu_index(i, j)] = f(i, j);
            }
        }
        Self { side, entries }
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinExpr {
        &self.entries[triu_index(i, j)]
    }

    pub fn eval(&self, values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.side, self.side, |i, j| self.entry(i, j).eval(values))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// `expr = 0`
    Zero(LinExpr),
    /// `expr ≥ 0`
    Nonneg(LinExpr),
    /// `‖(e₁, …, e_{d−1})‖ ≤ e₀`
    SecondOrder(Vec<LinExpr>),
    /// `M ⪰ 0`
    Psd(AffineMatrix),
}

impl Cone {
    pub fn kind(&self) -> &'static str {
        match self {
            Cone::Zero(_) => "zero",
            Cone::Nonneg(_) => "nonneg",
            Cone::SecondOrder(_) => "soc",
            Cone::Psd(_) => "psd",
        }
    }

    fn exprs(&self) -> Box<dyn Iterator<Item = &LinExpr> + '_> {
        match self {
            Cone::Zero(e) | Cone::Nonneg(e) => Box::new(std::iter::once(e)),
            Cone::SecondOrder(v) => Box::new(v.iter()),
            Cone::Psd(m) => Box::new(m.entries.iter()),
        }
    }

    fn exprs_mut(&mut self) -> Box<dyn Iterator<Item = &mut LinExpr> + '_> {
        match self {
            Cone::Zero(e) | Cone::Nonneg(e) => Box::new(std::iter::once(e)),
            Cone::SecondOrder(v) => Box::new(v.iter_mut()),
            Cone::Psd(m) => Box::new(m.entries.iter_mut()),
        }
    }

    /// Amount by which `values` violates this row (0 when inside the cone).
    /// PSD rows report the negated minimum eigenvalue.
    pub fn violation(&self, values: &[f64]) -> f64 {
        match self {
            Cone::Zero(e) => e.eval(values).abs(),
            Cone::Nonneg(e) => (-e.eval(values)).max(0.0),
            Cone::SecondOrder(v) => {
                let head = v[0].eval(values);
                let tail: f64 = v[1..].iter().map(|e| e.eval(values).powi(2)).sum::<f64>().sqrt();
                (tail - head).max(0.0)
            }
            Cone::Psd(m) => {
                let mat = m.eval(values);
                let min = mat.symmetric_eigenvalues().min();
                (-min).max(0.0)
            }
        }
    }
}

/// A labelled cone constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeRow {
    pub label: String,
    pub cone: Cone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub name: String,
    pub num_vars: usize,
    pub objective: LinExpr,
    pub rows: Vec<ConeRow>,
    pub layout: Option<Layout>,
}

impl ConicProgram {
    pub fn new(name: impl Into<String>, num_vars: usize) -> Self {
        Self {
            name: name.into(),
            num_vars,
            objective: LinExpr::default(),
            rows: Vec::new(),
            layout: None,
        }
    }

    pub fn push(&mut self, label: impl Into<String>, mut cone: Cone) {
        for e in cone.exprs_mut() {
            e.compact();
        }
        self.rows.push(ConeRow {
            label: label.into(),
            cone,
        });
    }

    /// Checks the structural invariants: variable indices in range, SOC
    /// dimension ≥ 2, PSD side ≥ 1 with a full triangle.
    pub fn check(&self) -> Result<()> {
        if self.num_vars == 0 && !self.rows.is_empty() {
            return Err(Error::Invalid("program has constraints but no variables".into()));
        }
        let in_range = |e: &LinExpr| e.max_var().is_none_or(|v| v < self.num_vars);
        if !in_range(&self.objective) {
            return Err(Error::Invalid("objective references an unknown variable".into()));
        }
        for row in &self.rows {
            match &row.cone {
                Cone::SecondOrder(v) if v.len() < 2 => {
                    return Err(Error::Invalid(format!(
                        "{}: second-order cone of dimension {}",
                        row.label,
                        v.len()
                    )))
                }
                Cone::Psd(m) if m.side == 0 || m.entries.len() != m.side * (m.side + 1) / 2 => {
                    return Err(Error::Invalid(format!("{}: malformed PSD block", row.label)))
                }
                _ => {}
            }
            if !row.cone.exprs().all(in_range) {
                return Err(Error::Invalid(format!("{}: unknown variable", row.label)));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.eval(values)
    }

    /// Largest row violation at `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.cone.violation(values)).fold(0.0, f64::max)
    }

    pub fn uses_psd(&self) -> bool {
        self.rows.iter().any(|r| matches!(r.cone, Cone::Psd(_)))
    }

    pub fn uses_soc(&self) -> bool {
        self.rows.iter().any(|r| matches!(r.cone, Cone::SecondOrder(_)))
    }
}

impl fmt::Display for ConicProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "program {} ({} variables, {} rows)",
            self.name,
            self.num_vars,
            self.rows.len()
        )?;
        writeln!(f, "minimize {}", self.objective)?;
        for row in &self.rows {
            match &row.cone {
                Cone::Zero(e) => writeln!(f, "  [{}] {e} == 0", row.label)?,
                Cone::Nonneg(e) => writeln!(f, "  [{}] {e} >= 0", row.label)?,
                Cone::SecondOrder(v) => {
                    writeln!(f, "  [{}] soc({}):", row.label, v.len())?;
                    writeln!(f, "      head {}", v[0])?;
                    for e in &v[1..] {
                        writeln!(f, "      tail {e}")?;
                    }
                }
                Cone::Psd(m) => {
                    writeln!(f, "  [{}] psd({}):", row.label, m.side)?;
                    for j in 0..m.side {
                        for i in 0..=j {
                            writeln!(f, "      ({i},{j}) {}", m.entry(i, j))?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalError,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalError => "numerical_error",
            SolveStatus::IterationLimit => "iteration_limit",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub solver_name: String,
    pub iterations: u32,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Interior-point termination settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: u32,
}

/// Threshold used when certifying solver output, one order looser than the
/// default solver tolerance.
pub const VERIFY_TOL: f64 = 1e-6;

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triu_index_is_column_major() {
        let order: Vec<_> = (0..3).flat_map(|j| (0..=j).map(move |i| triu_index(i, j))).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(triu_index(2, 0), triu_index(0, 2));
    }

    #[test]
    fn compact_merges_and_drops() {
        let mut e = LinExpr::var(2).with_term(0, 1.0).with_term(2, -1.0).with_term(1, 3.0);
        e.compact();
        assert_eq!(e.terms, vec![(0, 1.0), (1, 3.0)]);
    }

    #[test]
    fn zero_coefficients_are_not_stored() {
        let e = LinExpr::constant(1.0).with_term(0, 0.0);
        assert!(e.terms.is_empty());
    }

    #[test]
    fn check_rejects_bad_rows() {
        let mut p = ConicProgram::new("t", 1);
        p.push("x", Cone::Nonneg(LinExpr::var(1)));
        assert!(p.check().is_err());
        let mut p = ConicProgram::new("t", 1);
        p.push("soc", Cone::SecondOrder(vec![LinExpr::var(0)]));
        assert!(p.check().is_err());
        let p = ConicProgram {
            num_vars: 0,
            rows: vec![ConeRow {
                label: "c".into(),
                cone: Cone::Nonneg(LinExpr::constant(1.0)),
            }],
            ..ConicProgram::new("t", 0)
        };
        assert!(p.check().is_err());
    }

    #[test]
    fn violations_per_cone() {
        let v = [2.0, -1.0];
        assert_eq!(Cone::Nonneg(LinExpr::var(1)).violation(&v), 1.0);
        assert_eq!(Cone::Zero(LinExpr::var(1)).violation(&v), 1.0);
        let soc = Cone::SecondOrder(vec![LinExpr::constant(1.0), LinExpr::var(0)]);
        assert_eq!(soc.violation(&v), 1.0);
        let psd = Cone::Psd(AffineMatrix::from_fn(2, |i, j| {
            if i == j {
                LinExpr::constant(1.0)
            } else {
                LinExpr::var(0)
            }
        }));
        assert!((psd.violation(&v) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn display_dumps_every_row() {
        let mut p = ConicProgram::new("toy", 2);
        p.objective = LinExpr::var(0);
        p.push("lb", Cone::Nonneg(LinExpr::var(0).with_term(1, -2.0).with_term(0, 0.0)));
        let text = p.to_string();
        assert!(text.contains("minimize 1·v0"));
        assert!(text.contains("[lb] 1·v0 - 2·v1 >= 0"));
    }
}
