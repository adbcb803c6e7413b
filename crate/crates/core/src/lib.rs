//! Exact conic reformulations of two-stage adjustable robust linear programs
//! with Euclidean-ball uncertainty under parameterized quadratic decision
//! rules.
//!
//! The pipeline is: describe an [`AroProblem`](model::AroProblem), build a
//! [`ConicProgram`](conic::ConicProgram) with [`sdp`], [`socp`] or [`adr`],
//! solve it through a [`conic::Backend`], unpack the policy with
//! [`conic::extract_rule`], and certify it with [`oracle`]. The [`pipeline`]
//! module wires those steps together; [`lotsizing`] runs the network
//! lot-sizing benchmark on top of it.
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use robust_qdr::model::{AroProblem, BallUncertainty, ConstraintRow};
//! use robust_qdr::pipeline::{solve_policy, Method};
//! use robust_qdr::conic::SolverSettings;
//! use robust_qdr::oracle::verify_robust_feasibility;
//!
//! // x ≥ z + y(z) − 1 with y(z) ≥ 0, z ∈ [−1, 1]: the best x is 0.
//! let row = |a: f64, b: f64, d0: f64, d: f64| ConstraintRow {
//!     a: DVector::from_element(1, a),
//!     a_z: DMatrix::zeros(1, 1),
//!     b: DVector::from_element(1, b),
//!     d0,
//!     d: DVector::from_element(1, d),
//! };
//! let problem = AroProblem {
//!     c: DVector::from_element(1, 1.0),
//!     k: 1,
//!     rows: vec![row(-1.0, 1.0, 1.0, -1.0), row(0.0, -1.0, 0.0, 0.0)],
//!     uncertainty: BallUncertainty::new(1.0, 1),
//!     w: None,
//!     cost_uncertainty: None,
//! };
//! let policy = solve_policy(&problem, Method::QdrSdp, 0.5, &SolverSettings::default()).unwrap();
//! assert!(policy.value.abs() < 1e-6);
//! let report = verify_robust_feasibility(&problem, &policy.x, &policy.rule, 1e-6).unwrap();
//! assert!(report.feasible);
//! ```

pub mod adr;
pub mod conic;
mod epigraph;
pub mod error;
pub mod lotsizing;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod sdp;
pub mod socp;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/problems.md")]
    mod problems {}
    #[doc = include_str!("../../../book/src/decision-rules.md")]
    mod decision_rules {}
    #[doc = include_str!("../../../book/src/reformulations.md")]
    mod reformulations {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/lot-sizing.md")]
    mod lot_sizing {}
}
