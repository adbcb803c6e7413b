//! JSON persistence for problems and policies.
//!
//! Matrices are nested row-major arrays. Floats are written in shortest
//! round-trip decimal form, so `load(save(p)) == p` bit for bit.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{AroProblem, BallUncertainty, ConstraintRow, CostUncertainty, QdrCoefficients};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    version: u32,
    n: usize,
    k: usize,
    l: usize,
    m: usize,
    c: Vec<f64>,
    rows: Vec<RowFile>,
    uncertainty: UncertaintyFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost_uncertainty: Option<CostFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowFile {
    a: Vec<f64>,
    #[serde(rename = "A")]
    a_z: Vec<Vec<f64>>,
    b: Vec<f64>,
    d0: f64,
    d: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UncertaintyFile {
    radius: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostFile {
    c0: Vec<f64>,
    rho: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RuleFile {
    theta: f64,
    y0: Vec<f64>,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<Vec<f64>>>,
    separable: bool,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(field: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::Schema(format!(
            "{field}: expected {nrows} rows, found {}",
            rows.len()
        )));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::Schema(format!(
                "{field}[{i}]: expected {ncols} columns, found {}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn vector(field: &str, v: &[f64], len: usize) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(Error::Schema(format!(
            "{field}: expected length {len}, found {}",
            v.len()
        )));
    }
    Ok(DVector::from_column_slice(v))
}

fn check_version(value: &serde_json::Value) -> Result<()> {
    match value.get("version") {
        None => Err(Error::Schema("missing field `version`".into())),
        Some(v) if v.as_u64() == Some(SCHEMA_VERSION as u64) => Ok(()),
        Some(v) => Err(Error::Schema(format!(
            "unsupported schema version {v}, expected {SCHEMA_VERSION}"
        ))),
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Schema(e.to_string())
}

/// Serializes a problem to the JSON schema.
pub fn problem_to_json(p: &AroProblem) -> Result<String> {
    let file = ProblemFile {
        version: SCHEMA_VERSION,
        n: p.n(),
        k: p.k(),
        l: p.l(),
        m: p.m(),
        c: p.c.iter().copied().collect(),
        rows: p
            .rows
            .iter()
            .map(|r| RowFile {
                a: r.a.iter().copied().collect(),
                a_z: rows_of(&r.a_z),
                b: r.b.iter().copied().collect(),
                d0: r.d0,
                d: r.d.iter().copied().collect(),
            })
            .collect(),
        uncertainty: UncertaintyFile {
            radius: p.uncertainty.radius,
        },
        w: p.w.as_ref().map(|w| w.iter().copied().collect()),
        cost_uncertainty: p.cost_uncertainty.as_ref().map(|cu| CostFile {
            c0: cu.c0.iter().copied().collect(),
            rho: cu.rho,
        }),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Schema(e.to_string()))
}

/// Parses a problem from the JSON schema, checking all declared dimensions.
pub fn problem_from_json(text: &str) -> Result<AroProblem> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_error)?;
    check_version(&value)?;
    let file: ProblemFile = serde_json::from_str(text).map_err(parse_error)?;
    let (n, k, l, m) = (file.n, file.k, file.l, file.m);
    if file.rows.len() != m {
        return Err(Error::Schema(format!(
            "rows: expected m = {m} rows, found {}",
            file.rows.len()
        )));
    }
    let rows = file
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(ConstraintRow {
                a: vector(&format!("rows[{i}].a"), &r.a, n)?,
                a_z: matrix_from_rows(&format!("rows[{i}].A"), &r.a_z, n, l)?,
                b: vector(&format!("rows[{i}].b"), &r.b, k)?,
                d0: r.d0,
                d: vector(&format!("rows[{i}].d"), &r.d, l)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AroProblem {
        c: vector("c", &file.c, n)?,
        k,
        rows,
        uncertainty: BallUncertainty::new(file.uncertainty.radius, l),
        w: file.w.as_deref().map(|w| vector("w", w, k)).transpose()?,
        cost_uncertainty: file
            .cost_uncertainty
            .map(|cu| {
                Ok::<_, Error>(CostUncertainty {
                    c0: vector("cost_uncertainty.c0", &cu.c0, n)?,
                    rho: cu.rho,
                })
            })
            .transpose()?,
    })
}

pub fn save_problem(path: impl AsRef<Path>, p: &AroProblem) -> Result<()> {
    let path = path.as_ref();
    let text = problem_to_json(p)?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<AroProblem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    problem_from_json(&text).map_err(|e| match e {
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}

impl From<&QdrCoefficients> for RuleFile {
    fn from(r: &QdrCoefficients) -> Self {
        RuleFile {
            theta: r.theta,
            y0: r.y0.iter().copied().collect(),
            w: rows_of(&r.w),
            q: r.q.iter().map(rows_of).collect(),
            separable: r.separable,
        }
    }
}

impl RuleFile {
    pub(crate) fn into_rule(self) -> Result<QdrCoefficients> {
        let k = self.y0.len();
        let l = self.w.first().map_or(0, |r| r.len());
        let w = matrix_from_rows("rule.W", &self.w, k, l)?;
        if self.q.len() != k {
            return Err(Error::Schema(format!(
                "rule.Q: expected {k} matrices, found {}",
                self.q.len()
            )));
        }
        let q = self
            .q
            .iter()
            .enumerate()
            .map(|(j, qj)| matrix_from_rows(&format!("rule.Q[{j}]"), qj, l, l))
            .collect::<Result<Vec<_>>>()?;
        let rule = QdrCoefficients {
            theta: self.theta,
            y0: DVector::from_vec(self.y0),
            w,
            q,
            separable: self.separable,
        };
        let diags = rule.validate();
        if let Some(d) = diags.first() {
            return Err(Error::Schema(format!("rule.{d}")));
        }
        Ok(rule)
    }
}

/// A solved policy as persisted by the command-line tool.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRecord {
    pub status: String,
    pub value: f64,
    pub x: DVector<f64>,
    pub rule: QdrCoefficients,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyFile {
    version: u32,
    status: String,
    value: f64,
    x: Vec<f64>,
    rule: RuleFile,
}

pub fn policy_to_json(p: &PolicyRecord) -> Result<String> {
    let file = PolicyFile {
        version: SCHEMA_VERSION,
        status: p.status.clone(),
        value: p.value,
        x: p.x.iter().copied().collect(),
        rule: (&p.rule).into(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Schema(e.to_string()))
}

pub fn policy_from_json(text: &str) -> Result<PolicyRecord> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(parse_error)?;
    check_version(&value)?;
    let file: PolicyFile = serde_json::from_str(text).map_err(parse_error)?;
    Ok(PolicyRecord {
        status: file.status,
        value: file.value,
        x: DVector::from_vec(file.x),
        rule: file.rule.into_rule()?,
    })
}
