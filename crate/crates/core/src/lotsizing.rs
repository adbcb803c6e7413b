//! Network lot-sizing under demand uncertainty.
//!
//! `N` stores receive stock `x_i ∈ [0, Γ]` at unit cost `c_i` before the
//! demand `z` is known; afterwards stock moves between stores along
//! `y_ij(z) ≥ 0` at unit cost `t_ij`. Demand ranges over the ball
//! `‖z‖² ≤ Γ²/2`, and each store must end with enough stock:
//!
//! ```text
//! x_i + Σ_j y_ji(z) − Σ_j y_ij(z) ≥ z_i.
//! ```
//!
//! The worst-case transport cost `max_z Σ t_ij y_ij(z)` is the adjustable
//! objective. Policies are judged against the clairvoyant linear program
//! for one realized demand ([`solve_td`]) and against the box worst case
//! `d_i = Γ/√2` ([`solve_wc`]).

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conic::{solve, Cone, ConicProgram, LinExpr, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{evaluate_rule, AroProblem, BallUncertainty, ConstraintRow, QdrCoefficients};
use crate::oracle::{sample_ball, verify_robust_feasibility};
use crate::pipeline::{solve_policy_with_fallback, Method};

/// Default store capacity.
pub const DEFAULT_GAMMA: f64 = 10.0;
/// Default rule parameter.
pub const DEFAULT_THETA: f64 = 0.5;
/// Costs are drawn uniformly from `[0, COST_MAX]`.
pub const COST_MAX: f64 = 1000.0;
/// Tolerance used when certifying policies inside an experiment.
pub const CERTIFY_TOL: f64 = 1e-6;
/// Realized flows below `−REALIZED_FLOW_TOL` mean the policy was not robust.
/// A policy certified at [`CERTIFY_TOL`] only guarantees `y(d) ≥ −CERTIFY_TOL`
/// on the sign rows, so the two tolerances coincide.
pub const REALIZED_FLOW_TOL: f64 = CERTIFY_TOL;

#[derive(Debug, Clone, PartialEq)]
pub struct LotSizingInstance {
    pub n: usize,
    pub gamma: f64,
    /// Storage costs, length N.
    pub c: DVector<f64>,
    /// Transport costs, N×N with zero diagonal.
    pub t: DMatrix<f64>,
    pub seed: u64,
}

impl LotSizingInstance {
    /// Radius `Γ/√2` of the demand ball.
    pub fn radius(&self) -> f64 {
        self.gamma / std::f64::consts::SQRT_2
    }

    /// Position of `y_ij` in the adjustable vector.
    pub fn flow(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }
}

pub fn generate_instance(n: usize, gamma: f64, seed: u64) -> Result<LotSizingInstance> {
    if n < 2 {
        return Err(Error::Invalid(format!("lot-sizing needs at least 2 stores, got {n}")));
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Invalid(format!(
            "capacity must be finite and positive, got {gamma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = DVector::from_fn(n, |_, _| rng.random_range(0.0..=COST_MAX));
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                t[(i, j)] = rng.random_range(0.0..=COST_MAX);
            }
        }
    }
    Ok(LotSizingInstance { n, gamma, c, t, seed })
}

/// The robust model in row form.
///
/// Rows, in order: `N` demand rows, `N²` flow-sign rows `−y_ij ≤ 0`, then
/// `x_i ≤ Γ` and `−x_i ≤ 0` for each store. The adjustable objective is
/// `w = vec(t)` in row-major flow order.
pub fn build_aro(instance: &LotSizingInstance) -> AroProblem {
    let n = instance.n;
    let (k, l) = (n * n, n);
    let mut rows = Vec::with_capacity(n + k + 2 * n);
    for i in 0..n {
        // −x_i − Σ_j y_ji + Σ_j y_ij ≤ −z_i
        let mut row = ConstraintRow::zeros(n, k, l);
        row.a[i] = -1.0;
        for j in 0..n {
            row.b[instance.flow(j, i)] -= 1.0;
            row.b[instance.flow(i, j)] += 1.0;
        }
        row.d[i] = -1.0;
        rows.push(row);
    }
    for f in 0..k {
        let mut row = ConstraintRow::zeros(n, k, l);
        row.b[f] = -1.0;
        rows.push(row);
    }
    for i in 0..n {
        let mut upper = ConstraintRow::zeros(n, k, l);
        upper.a[i] = 1.0;
        upper.d0 = instance.gamma;
        rows.push(upper);
        let mut lower = ConstraintRow::zeros(n, k, l);
        lower.a[i] = -1.0;
        rows.push(lower);
    }
    let w = DVector::from_fn(k, |f, _| instance.t[(f / n, f % n)]);
    AroProblem {
        c: instance.c.clone(),
        k,
        rows,
        uncertainty: BallUncertainty::new(instance.radius(), l),
        w: Some(w),
        cost_uncertainty: None,
    }
}

/// The linear program with demand fixed to `d`.
pub fn td_program(instance: &LotSizingInstance, d: &DVector<f64>) -> ConicProgram {
    let n = instance.n;
    let y = |i: usize, j: usize| n + instance.flow(i, j);
    let mut p = ConicProgram::new("td", n + n * n);
    let mut objective = LinExpr::default();
    for i in 0..n {
        objective.add_term(i, instance.c[i]);
        for j in 0..n {
            objective.add_term(y(i, j), instance.t[(i, j)]);
        }
    }
    p.objective = objective;
    for i in 0..n {
        let mut balance = LinExpr::var(i).offset(-d[i]);
        for j in 0..n {
            balance.add_term(y(j, i), 1.0);
            balance.add_term(y(i, j), -1.0);
        }
        p.push(format!("demand[{i}]"), Cone::Nonneg(balance));
        p.push(format!("x[{i}]>=0"), Cone::Nonneg(LinExpr::var(i)));
        p.push(
            format!("x[{i}]<=G"),
            Cone::Nonneg(LinExpr::constant(instance.gamma).with_term(i, -1.0)),
        );
        for j in 0..n {
            p.push(format!("y[{i}][{j}]>=0"), Cone::Nonneg(LinExpr::var(y(i, j))));
        }
    }
    p
}

/// Optimal cost when the demand `d` is known in advance.
pub fn solve_td(instance: &LotSizingInstance, d: &DVector<f64>) -> Result<f64> {
    if d.len() != instance.n {
        return Err(Error::Dimension {
            context: "demand".into(),
            expected: instance.n,
            found: d.len(),
        });
    }
    if d.iter().any(|&v| v < 0.0) {
        return Err(Error::Invalid("demand must be nonnegative".into()));
    }
    let s = solve(&td_program(instance, d), &SolverSettings::default())?;
    if !s.is_optimal() {
        return Err(Error::NotOptimal(s.status));
    }
    Ok(s.objective_value)
}

/// [`solve_td`] at `d_i = Γ/√2` for every store.
pub fn solve_wc(instance: &LotSizingInstance) -> Result<f64> {
    solve_td(instance, &DVector::from_element(instance.n, instance.radius()))
}

/// Cost `cᵀx + Σ t_ij y_ij(d)` of a policy once demand `d` is revealed.
pub fn realized_value(
    instance: &LotSizingInstance,
    x: &DVector<f64>,
    rule: &QdrCoefficients,
    d: &DVector<f64>,
) -> Result<f64> {
    let y = evaluate_rule(rule, d)?;
    if let Some((f, v)) = y.iter().enumerate().find(|(_, v)| **v < -REALIZED_FLOW_TOL) {
        return Err(Error::Uncertified(format!(
            "flow y[{}][{}] = {v:e} at the realized demand",
            f / instance.n,
            f % instance.n
        )));
    }
    let transport: f64 = (0..instance.n * instance.n)
        .map(|f| instance.t[(f / instance.n, f % instance.n)] * y[f])
        .sum();
    Ok(instance.c.dot(x) + transport)
}

/// `m1 = 100(v − t)/v` and `m2 = 100(w − v)/w`.
pub fn metrics(v: f64, t: f64, w: f64) -> Result<(f64, f64)> {
    if v == 0.0 || w == 0.0 {
        return Err(Error::Invalid("metrics need nonzero v and w".into()));
    }
    Ok((100.0 * (v - t) / v, 100.0 * (w - v) / w))
}

/// A demand drawn uniformly from the ball, redrawn until nonnegative.
pub fn sample_demand<R: Rng + ?Sized>(rng: &mut R, instance: &LotSizingInstance) -> DVector<f64> {
    loop {
        let d = sample_ball(rng, instance.n, instance.radius());
        if d.iter().all(|&v| v >= 0.0) {
            return d;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    pub instances_per_n: usize,
    pub theta: f64,
    pub gamma: f64,
    pub methods: Vec<Method>,
    /// Instance `i` uses seed `seed + i`.
    pub seed: u64,
    /// Base seed of the demand streams.
    pub demand_seed: u64,
    /// Tightest solver tolerances tried; numerical failures fall back
    /// towards the defaults.
    pub settings: SolverSettings,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_values: vec![2, 3, 4, 5],
            instances_per_n: 50,
            theta: DEFAULT_THETA,
            gamma: DEFAULT_GAMMA,
            methods: vec![Method::AdrSocp, Method::QdrSdp, Method::SepQdrSocp],
            seed: 0,
            demand_seed: 1,
            settings: SolverSettings::default(),
            jobs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.instances_per_n == 0 {
            return Err(Error::Invalid("instances_per_n must be at least 1".into()));
        }
        if self.methods.is_empty() || self.n_values.is_empty() {
            return Err(Error::Invalid("need at least one method and one N".into()));
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < 2) {
            return Err(Error::Invalid(format!("N must be at least 2, got {n}")));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::Invalid(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        Ok(())
    }

    fn demand_seed_for(&self, n: usize, index: usize) -> u64 {
        self.demand_seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add((n as u64) << 32)
            .wrapping_add(index as u64)
    }
}

/// One (instance, method) outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    #[serde(rename = "N")]
    pub n: usize,
    pub method: String,
    pub theta: f64,
    pub seed: u64,
    /// Optimal worst-case value `cᵀx + τ` of the method.
    pub value: f64,
    pub td: f64,
    pub wc: f64,
    pub m1: f64,
    pub m2: f64,
    pub solve_ms: f64,
    pub status: String,
    /// Realized cost at the drawn demand.
    pub realized: f64,
}

impl Record {
    pub fn ok(&self) -> bool {
        self.status == "optimal"
    }
}

/// Averages of one (N, method) cell over its successful instances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub method: String,
    pub mean_m1: f64,
    pub mean_m2: f64,
    pub mean_solve_ms: f64,
    pub solved: usize,
    pub failed: usize,
    pub rule_dim: usize,
    pub total_vars: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub records: Vec<Record>,
    pub summary: Vec<SummaryRow>,
}

struct Outcome {
    record: Record,
    dims: Option<(usize, usize)>,
}

fn run_instance(config: &ExperimentConfig, n: usize, index: usize) -> Result<Vec<Outcome>> {
    let seed = config.seed.wrapping_add(index as u64);
    let instance = generate_instance(n, config.gamma, seed)?;
    let problem = build_aro(&instance);
    let mut rng = ChaCha8Rng::seed_from_u64(config.demand_seed_for(n, index));
    let d = sample_demand(&mut rng, &instance);
    let td = solve_td(&instance, &d)?;
    let wc = solve_wc(&instance)?;

    let mut out = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let theta = if method == Method::AdrSocp { 1.0 } else { config.theta };
        let mut record = Record {
            n,
            method: method.as_str().to_string(),
            theta,
            seed,
            value: f64::NAN,
            td,
            wc,
            m1: f64::NAN,
            m2: f64::NAN,
            solve_ms: f64::NAN,
            status: String::new(),
            realized: f64::NAN,
        };
        let policy = match solve_policy_with_fallback(&problem, method, config.theta, &config.settings) {
            Ok(p) => p,
            Err(Error::NotOptimal(status)) => {
                log::warn!("N={n} seed={seed} {method}: solver status {status}");
                record.status = status.as_str().to_string();
                out.push(Outcome { record, dims: None });
                continue;
            }
            Err(e) => return Err(e),
        };
        record.value = policy.value;
        record.solve_ms = duration_ms(policy.solve_time);
        let dims = Some((policy.stats.rule_dim, policy.stats.total_vars));
        let report = verify_robust_feasibility(&problem, &policy.x, &policy.rule, CERTIFY_TOL)?;
        if !report.feasible {
            log::warn!(
                "N={n} seed={seed} {method}: policy violates a row by {:e}",
                report.max_violation
            );
            record.status = "uncertified".into();
            out.push(Outcome { record, dims });
            continue;
        }
        match realized_value(&instance, &policy.x, &policy.rule, &d) {
            Ok(v) => {
                record.realized = v;
                record.m1 = metrics(v, td, wc)?.0;
                record.m2 = metrics(policy.value, td, wc)?.1;
                record.status = SolveStatus::Optimal.as_str().to_string();
            }
            Err(Error::Uncertified(msg)) => {
                log::warn!("N={n} seed={seed} {method}: {msg}");
                record.status = "uncertified".into();
            }
            Err(e) => return Err(e),
        }
        out.push(Outcome { record, dims });
    }
    Ok(out)
}

fn duration_ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    }
}

/// Runs every (N, instance, method) combination and aggregates per cell.
///
/// Records are sorted by (N, seed, method order) before averaging, so the
/// report does not depend on thread scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> = config
        .n_values
        .iter()
        .flat_map(|&n| (0..config.instances_per_n).map(move |i| (n, i)))
        .collect();
    let work = || {
        tasks
            .par_iter()
            .map(|&(n, i)| run_instance(config, n, i))
            .collect::<Result<Vec<_>>>()
    };
    let results = match config.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };

    let mut outcomes: Vec<Outcome> = results.into_iter().flatten().collect();
    let order = |m: &str| {
        config
            .methods
            .iter()
            .position(|x| x.as_str() == m)
            .unwrap_or(usize::MAX)
    };
    outcomes.sort_by(|a, b| {
        (a.record.n, a.record.seed, order(&a.record.method)).cmp(&(b.record.n, b.record.seed, order(&b.record.method)))
    });

    let mut cells: BTreeMap<(usize, usize), Vec<&Outcome>> = BTreeMap::new();
    for o in &outcomes {
        cells.entry((o.record.n, order(&o.record.method))).or_default().push(o);
    }
    let summary = cells
        .into_iter()
        .map(|((n, m), cell)| {
            let ok: Vec<&Record> = cell.iter().map(|o| &o.record).filter(|r| r.ok()).collect();
            let (rule_dim, total_vars) = cell.iter().find_map(|o| o.dims).unwrap_or((0, 0));
            SummaryRow {
                n,
                method: config.methods[m].as_str().to_string(),
                mean_m1: mean(ok.iter().map(|r| r.m1)),
                mean_m2: mean(ok.iter().map(|r| r.m2)),
                mean_solve_ms: mean(ok.iter().map(|r| r.solve_ms)),
                solved: ok.len(),
                failed: cell.len() - ok.len(),
                rule_dim,
                total_vars,
            }
        })
        .collect();
    Ok(ExperimentReport {
        records: outcomes.into_iter().map(|o| o.record).collect(),
        summary,
    })
}

/// Writes one CSV line per record. Without `timing` the `solve_ms` column
/// is left empty so that repeated runs produce identical bytes.
pub fn write_csv<W: Write>(out: W, records: &[Record], timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    w.write_record([
        "N", "method", "theta", "seed", "value", "td", "wc", "m1", "m2", "solve_ms", "status", "realized",
    ])
    .map_err(io)?;
    for r in records {
        let f = |v: f64| if v.is_nan() { String::new() } else { v.to_string() };
        w.write_record([
            r.n.to_string(),
            r.method.clone(),
            r.theta.to_string(),
            r.seed.to_string(),
            f(r.value),
            f(r.td),
            f(r.wc),
            f(r.m1),
            f(r.m2),
            if timing { f(r.solve_ms) } else { String::new() },
            r.status.clone(),
            f(r.realized),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
    Ok(())
}

/// Fixed-width table of mean m1 and m2 per N and method.
pub fn format_summary(summary: &[SummaryRow], timing: bool) -> String {
    let mut s = String::new();
    let header = if timing {
        format!(
            "{:>3}  {:<14} {:>9} {:>9} {:>7} {:>6} {:>10}\n",
            "N", "method", "m1", "m2", "solved", "failed", "mean ms"
        )
    } else {
        format!(
            "{:>3}  {:<14} {:>9} {:>9} {:>7} {:>6}\n",
            "N", "method", "m1", "m2", "solved", "failed"
        )
    };
    s.push_str(&header);
    for r in summary {
        s.push_str(&format!(
            "{:>3}  {:<14} {:>9.4} {:>9.4} {:>7} {:>6}",
            r.n, r.method, r.mean_m1, r.mean_m2, r.solved, r.failed
        ));
        if timing {
            s.push_str(&format!(" {:>10.1}", r.mean_solve_ms));
        }
        s.push('\n');
    }
    s
}
