//! Variable layouts: where each decision block lives in the solution vector.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{triu_index, Cone, ConicProgram, Solution};
use crate::error::{Error, Result};
use crate::model::QdrCoefficients;

/// Layout of the general-rule SDP program.
///
/// Blocks are contiguous in the order x, y0, W (row-major k×l), Q (one packed
/// upper triangle of length l(l+1)/2 per j), λ, then the optional epigraph
/// variables τ (adjustable objective) and τ_c (uncertain cost).
#[derive(Debug, Clone, PartialEq)]
pub struct SdpLayout {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub theta: f64,
    /// Number of λ multipliers (m, or m + 1 with an adjustable objective).
    pub groups: usize,
    pub diagonal_q: bool,
    pub x: usize,
    pub y0: usize,
    pub w: usize,
    pub q: usize,
    pub lambda: usize,
    pub tau: Option<usize>,
    pub tau_cost: Option<usize>,
    pub num_vars: usize,
}

impl SdpLayout {
    pub fn new(n: usize, k: usize, l: usize, theta: f64, groups: usize, with_tau: bool, with_cost: bool) -> Self {
        let x = 0;
        let y0 = x + n;
        let w = y0 + k;
        let q = w + k * l;
        let lambda = q + k * Self::tri(l);
        let mut next = lambda + groups;
        let mut take = |flag: bool| {
            flag.then(|| {
                next += 1;
                next - 1
            })
        };
        let tau = take(with_tau);
        let tau_cost = take(with_cost);
        Self {
            n,
            k,
            l,
            theta,
            groups,
            diagonal_q: false,
            x,
            y0,
            w,
            q,
            lambda,
            tau,
            tau_cost,
            num_vars: next,
        }
    }

    fn tri(l: usize) -> usize {
        l * (l + 1) / 2
    }

    pub fn x(&self, s: usize) -> usize {
        self.x + s
    }

    pub fn y0(&self, j: usize) -> usize {
        self.y0 + j
    }

    pub fn w(&self, j: usize, p: usize) -> usize {
        self.w + j * self.l + p
    }

    /// Slot of `(Q_j)_{ab}`; `(a, b)` and `(b, a)` share one slot.
    pub fn q(&self, j: usize, a: usize, b: usize) -> usize {
        self.q + j * Self::tri(self.l) + triu_index(a, b)
    }

    pub fn lambda(&self, i: usize) -> usize {
        self.lambda + i
    }

    /// `n + k + kl + k·l(l+1)/2`.
    pub fn rule_dim(&self) -> usize {
        self.n + self.k + self.k * self.l + self.k * Self::tri(self.l)
    }
}

/// Layout of the separable-rule SOCP program.
///
/// Blocks: x, y0, W (row-major), q (column j holds diag(Q_j), stored
/// `q + j·l + p`), λ (one per group), s (`s + i·l + p`), then τ and τ_c.
/// The aggregates σ_{p,i} = Σ_j (b_i)_j q_{p,j} are affine expressions in q
/// and occupy no solution slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SocpLayout {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub theta: f64,
    pub groups: usize,
    pub x: usize,
    pub y0: usize,
    pub w: usize,
    pub q: usize,
    pub lambda: usize,
    pub s: usize,
    pub tau: Option<usize>,
    pub tau_cost: Option<usize>,
    pub num_vars: usize,
}

impl SocpLayout {
    pub fn new(n: usize, k: usize, l: usize, theta: f64, groups: usize, with_tau: bool, with_cost: bool) -> Self {
        let x = 0;
        let y0 = x + n;
        let w = y0 + k;
        let q = w + k * l;
        let lambda = q + k * l;
        let s = lambda + groups;
        let mut next = s + groups * l;
        let mut take = |flag: bool| {
            flag.then(|| {
                next += 1;
                next - 1
            })
        };
        let tau = take(with_tau);
        let tau_cost = take(with_cost);
        Self {
            n,
            k,
            l,
            theta,
            groups,
            x,
            y0,
            w,
            q,
            lambda,
            s,
            tau,
            tau_cost,
            num_vars: next,
        }
    }

    pub fn x(&self, s: usize) -> usize {
        self.x + s
    }

    pub fn y0(&self, j: usize) -> usize {
        self.y0 + j
    }

    pub fn w(&self, j: usize, p: usize) -> usize {
        self.w + j * self.l + p
    }

    /// Slot of `q_{p,j} = (Q_j)_{pp}`.
    pub fn q(&self, p: usize, j: usize) -> usize {
        self.q + j * self.l + p
    }

    pub fn lambda(&self, i: usize) -> usize {
        self.lambda + i
    }

    pub fn s(&self, i: usize, p: usize) -> usize {
        self.s + i * self.l + p
    }

    /// Number of σ aggregates, counted as layout slots although they are
    /// affine aliases rather than variables.
    pub fn sigma_slots(&self) -> usize {
        self.groups * self.l
    }

    /// `n + k + kl + m + 2ml`, counting λ, s and σ per group.
    pub fn rule_dim(&self) -> usize {
        self.n + self.k + self.k * self.l + self.groups + 2 * self.groups * self.l
    }
}

/// Layout of the classical affine-rule robust counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct AdrLayout {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub x: usize,
    pub y0: usize,
    pub w: usize,
    pub tau: Option<usize>,
    pub tau_cost: Option<usize>,
    pub num_vars: usize,
}

impl AdrLayout {
    pub fn new(n: usize, k: usize, l: usize, with_tau: bool, with_cost: bool) -> Self {
        let x = 0;
        let y0 = x + n;
        let w = y0 + k;
        let mut next = w + k * l;
        let mut take = |flag: bool| {
            flag.then(|| {
                next += 1;
                next - 1
            })
        };
        let tau = take(with_tau);
        let tau_cost = take(with_cost);
        Self {
            n,
            k,
            l,
            x,
            y0,
            w,
            tau,
            tau_cost,
            num_vars: next,
        }
    }

    pub fn w(&self, j: usize, p: usize) -> usize {
        self.w + j * self.l + p
    }

    pub fn rule_dim(&self) -> usize {
        self.n + self.k + self.k * self.l
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layout {
    Sdp(SdpLayout),
    Socp(SocpLayout),
    Adr(AdrLayout),
}

impl Layout {
    pub fn num_vars(&self) -> usize {
        match self {
            Layout::Sdp(l) => l.num_vars,
            Layout::Socp(l) => l.num_vars,
            Layout::Adr(l) => l.num_vars,
        }
    }

    pub fn rule_dim(&self) -> usize {
        match self {
            Layout::Sdp(l) => l.rule_dim(),
            Layout::Socp(l) => l.rule_dim(),
            Layout::Adr(l) => l.rule_dim(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layout::Sdp(_) => "sdp",
            Layout::Socp(_) => "socp",
            Layout::Adr(_) => "adr",
        }
    }

    /// Index of the adjustable-objective epigraph variable τ.
    pub fn tau(&self) -> Option<usize> {
        match self {
            Layout::Sdp(l) => l.tau,
            Layout::Socp(l) => l.tau,
            Layout::Adr(l) => l.tau,
        }
    }

    fn dims(&self) -> (usize, usize, usize) {
        match self {
            Layout::Sdp(l) => (l.n, l.k, l.l),
            Layout::Socp(l) => (l.n, l.k, l.l),
            Layout::Adr(l) => (l.n, l.k, l.l),
        }
    }

    fn blocks(&self) -> (usize, usize, usize) {
        match self {
            Layout::Sdp(l) => (l.x, l.y0, l.w),
            Layout::Socp(l) => (l.x, l.y0, l.w),
            Layout::Adr(l) => (l.x, l.y0, l.w),
        }
    }
}

/// Unpacks `(x, rule)` from an optimal solution.
pub fn extract_rule(solution: &Solution, layout: &Layout) -> Result<(DVector<f64>, QdrCoefficients)> {
    if !solution.is_optimal() {
        return Err(Error::Solver(format!(
            "cannot extract a rule from a {} solution",
            solution.status
        )));
    }
    if solution.values.len() != layout.num_vars() {
        return Err(Error::Layout(format!(
            "{} layout expects {} values, solution has {}",
            layout.kind(),
            layout.num_vars(),
            solution.values.len()
        )));
    }
    let v = &solution.values;
    let (n, k, l) = layout.dims();
    let (xo, yo, wo) = layout.blocks();
    let x = DVector::from_column_slice(&v[xo..xo + n]);
    let y0 = DVector::from_column_slice(&v[yo..yo + k]);
    let w = DMatrix::from_fn(k, l, |j, p| v[wo + j * l + p]);
    let rule = match layout {
        Layout::Sdp(s) => {
            let q = (0..k)
                .map(|j| DMatrix::from_fn(l, l, |a, b| if s.diagonal_q && a != b { 0.0 } else { v[s.q(j, a, b)] }))
                .collect();
            QdrCoefficients {
                theta: s.theta,
                y0,
                w,
                q,
                separable: s.diagonal_q,
            }
        }
        Layout::Socp(s) => {
            let q = (0..k)
                .map(|j| DMatrix::from_fn(l, l, |a, b| if a == b { v[s.q(a, j)] } else { 0.0 }))
                .collect();
            QdrCoefficients {
                theta: s.theta,
                y0,
                w,
                q,
                separable: true,
            }
        }
        Layout::Adr(_) => QdrCoefficients::affine(y0, w),
    };
    Ok((x, rule))
}

/// Writes `(x, rule)` into a zero vector shaped by `layout`; the inverse of
/// [`extract_rule`] on the rule slots.
pub fn pack_rule(layout: &Layout, x: &DVector<f64>, rule: &QdrCoefficients) -> Result<Vec<f64>> {
    let (n, k, l) = layout.dims();
    if x.len() != n || rule.k() != k || rule.l() != l {
        return Err(Error::Layout(format!(
            "rule of shape (n={}, k={}, l={}) does not fit {} layout ({n}, {k}, {l})",
            x.len(),
            rule.k(),
            rule.l(),
            layout.kind()
        )));
    }
    let mut v = vec![0.0; layout.num_vars()];
    let (xo, yo, wo) = layout.blocks();
    v[xo..xo + n].copy_from_slice(x.as_slice());
    v[yo..yo + k].copy_from_slice(rule.y0.as_slice());
    for j in 0..k {
        for p in 0..l {
            v[wo + j * l + p] = rule.w[(j, p)];
        }
    }
    match layout {
        Layout::Sdp(s) => {
            for j in 0..k {
                for b in 0..l {
                    for a in 0..=b {
                        v[s.q(j, a, b)] = rule.q[j][(a, b)];
                    }
                }
            }
        }
        Layout::Socp(s) => {
            for j in 0..k {
                for p in 0..l {
                    v[s.q(p, j)] = rule.q[j][(p, p)];
                }
            }
        }
        Layout::Adr(_) => {}
    }
    Ok(v)
}

/// Size summary of a built program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProgramStats {
    pub layout: &'static str,
    /// Dimension of the decision tuple as counted for each reformulation.
    pub rule_dim: usize,
    pub total_vars: usize,
    pub zero_rows: usize,
    pub nonneg_rows: usize,
    pub soc_rows: usize,
    pub psd_blocks: usize,
    pub max_soc_dim: usize,
    pub max_psd_side: usize,
}

pub fn program_stats(program: &ConicProgram, layout: &Layout) -> ProgramStats {
    let mut stats = ProgramStats {
        layout: layout.kind(),
        rule_dim: layout.rule_dim(),
        total_vars: program.num_vars,
        zero_rows: 0,
        nonneg_rows: 0,
        soc_rows: 0,
        psd_blocks: 0,
        max_soc_dim: 0,
        max_psd_side: 0,
    };
    for row in &program.rows {
        match &row.cone {
            Cone::Zero(_) => stats.zero_rows += 1,
            Cone::Nonneg(_) => stats.nonneg_rows += 1,
            Cone::SecondOrder(v) => {
                stats.soc_rows += 1;
                stats.max_soc_dim = stats.max_soc_dim.max(v.len());
            }
            Cone::Psd(m) => {
                stats.psd_blocks += 1;
                stats.max_psd_side = stats.max_psd_side.max(m.side);
            }
        }
    }
    stats
}
