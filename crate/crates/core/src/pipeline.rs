//! Reformulate, solve and unpack in one call.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::adr::reformulate_adr;
use crate::conic::{
    extract_rule, program_stats, solve_with, Backend, ClarabelBackend, ConicProgram, Layout, ProgramStats, Solution,
    SolveStatus, SolverSettings,
};
use crate::error::{Error, Result};
use crate::model::{AroProblem, QdrCoefficients};
use crate::sdp::{reformulate_sdp, SdpOptions};
use crate::socp::reformulate_socp;

/// Which reformulation to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Affine rule, second-order cone counterpart (ignores θ).
    AdrSocp,
    /// General quadratic rule, semidefinite program.
    QdrSdp,
    /// Separable quadratic rule, second-order cone program.
    SepQdrSocp,
    /// Separable quadratic rule through the semidefinite program with
    /// diagonal `Q` (a cross-check of `SepQdrSocp`).
    SepQdrSdp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::AdrSocp, Method::QdrSdp, Method::SepQdrSocp, Method::SepQdrSdp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::AdrSocp => "adr_socp",
            Method::QdrSdp => "qdr_sdp",
            Method::SepQdrSocp => "sep_qdr_socp",
            Method::SepQdrSdp => "sep_qdr_sdp",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adr" | "adr_socp" => Ok(Method::AdrSocp),
            "sdp" | "qdr_sdp" => Ok(Method::QdrSdp),
            "socp" | "sep_qdr_socp" => Ok(Method::SepQdrSocp),
            "sep_qdr_sdp" => Ok(Method::SepQdrSdp),
            other => Err(Error::Invalid(format!(
                "unknown method {other:?} (expected adr, sdp, socp or one of {})",
                Method::ALL.map(|m| m.as_str()).join(", ")
            ))),
        }
    }
}

pub fn reformulate(problem: &AroProblem, method: Method, theta: f64) -> Result<(ConicProgram, Layout)> {
    Ok(match method {
        Method::AdrSocp => {
            let (p, l) = reformulate_adr(problem)?;
            (p, Layout::Adr(l))
        }
        Method::QdrSdp => {
            let (p, l) = reformulate_sdp(problem, theta, SdpOptions::default())?;
            (p, Layout::Sdp(l))
        }
        Method::SepQdrSdp => {
            let (p, l) = reformulate_sdp(problem, theta, SdpOptions { diagonal_q: true })?;
            (p, Layout::Sdp(l))
        }
        Method::SepQdrSocp => {
            let (p, l) = reformulate_socp(problem, theta)?;
            (p, Layout::Socp(l))
        }
    })
}

/// An optimal first-stage decision and decision rule.
#[derive(Debug, Clone)]
pub struct Policy {
    pub method: Method,
    pub theta: f64,
    /// Optimal value of the reformulated program (worst-case cost).
    pub value: f64,
    pub x: DVector<f64>,
    pub rule: QdrCoefficients,
    /// S-lemma multipliers λ, one per group (empty for the affine rule).
    pub multipliers: Vec<f64>,
    /// Optimal epigraph value `τ` of the adjustable objective, if any.
    pub tau: Option<f64>,
    pub stats: ProgramStats,
    pub solve_time: Duration,
    pub solution: Solution,
}

pub fn solve_policy(problem: &AroProblem, method: Method, theta: f64, settings: &SolverSettings) -> Result<Policy> {
    solve_policy_with(&ClarabelBackend, problem, method, theta, settings)
}

/// Builds, solves and unpacks. A non-optimal solver status is returned as
/// [`Error::NotOptimal`].
pub fn solve_policy_with(
    backend: &dyn Backend,
    problem: &AroProblem,
    method: Method,
    theta: f64,
    settings: &SolverSettings,
) -> Result<Policy> {
    let (program, layout) = reformulate(problem, method, theta)?;
    let start = Instant::now();
    let solution = solve_with(backend, &program, settings)?;
    let solve_time = start.elapsed();
    if !solution.is_optimal() {
        return Err(Error::NotOptimal(solution.status));
    }
    let (x, rule) = extract_rule(&solution, &layout)?;
    let multipliers = match &layout {
        Layout::Sdp(l) => (0..l.groups).map(|i| solution.values[l.lambda(i)]).collect(),
        Layout::Socp(l) => (0..l.groups).map(|i| solution.values[l.lambda(i)]).collect(),
        Layout::Adr(_) => Vec::new(),
    };
    let tau = layout.tau().map(|t| solution.values[t]);
    Ok(Policy {
        method,
        theta: if method == Method::AdrSocp { 1.0 } else { theta },
        value: solution.objective_value,
        x,
        rule,
        multipliers,
        tau,
        stats: program_stats(&program, &layout),
        solve_time,
        solution,
    })
}

/// Like [`solve_policy`], but a numerical failure at tolerances tighter
/// than the defaults is retried with both tolerances loosened tenfold, down
/// to [`SolverSettings::default`]. The returned policy records the time of
/// the successful attempt only.
pub fn solve_policy_with_fallback(
    problem: &AroProblem,
    method: Method,
    theta: f64,
    settings: &SolverSettings,
) -> Result<Policy> {
    let floor = SolverSettings::default();
    let mut current = *settings;
    loop {
        match solve_policy(problem, method, theta, &current) {
            Err(Error::NotOptimal(SolveStatus::NumericalError))
                if current.abs_tol < floor.abs_tol || current.rel_tol < floor.rel_tol =>
            {
                current.abs_tol = (current.abs_tol * 10.0).min(floor.abs_tol.max(current.abs_tol));
                current.rel_tol = (current.rel_tol * 10.0).min(floor.rel_tol.max(current.rel_tol));
                log::info!(
                    "{method}: numerical failure, retrying at abs_tol {:e} rel_tol {:e}",
                    current.abs_tol,
                    current.rel_tol
                );
            }
            other => return other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert_eq!("sdp".parse::<Method>().unwrap(), Method::QdrSdp);
        assert!("lp".parse::<Method>().is_err());
    }

    #[test]
    fn fallback_matches_plain_solve_at_default_tolerances() {
        let p = crate::lotsizing::build_aro(&crate::lotsizing::generate_instance(2, 10.0, 3).unwrap());
        let s = SolverSettings::default();
        let a = solve_policy(&p, Method::SepQdrSocp, 0.5, &s).unwrap();
        let b = solve_policy_with_fallback(&p, Method::SepQdrSocp, 0.5, &s).unwrap();
        assert_eq!(a.value, b.value);
    }
}
