mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use robust_qdr::conic::{program_stats, SolveStatus, SolverSettings, VERIFY_TOL};
use robust_qdr::lotsizing::{
    build_aro, format_summary, generate_instance, run_experiment, write_csv, ExperimentConfig,
};
use robust_qdr::model::{load_problem, policy_from_json, policy_to_json, save_problem, AroProblem, PolicyRecord};
use robust_qdr::oracle::verify_robust_feasibility;
use robust_qdr::pipeline::{reformulate, solve_policy, Method};
use robust_qdr::Error;

const EXIT_OK: u8 = 0;
const EXIT_INFEASIBLE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_SOLVER: u8 = 3;

/// Exact conic reformulations of two-stage robust linear programs with
/// quadratic decision rules.
#[derive(Parser, Debug)]
#[command(name = "robust-qdr", version)]
struct Cli {
    /// TOML file with `solver.abs_tol`, `solver.rel_tol`, `solver.max_iter`.
    #[arg(long, global = true, env = config::CONFIG_ENV)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the conic program and its size statistics.
    Reformulate {
        problem: PathBuf,
        #[command(flatten)]
        choice: MethodChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for an optimal policy and write it as JSON.
    Solve {
        problem: PathBuf,
        #[command(flatten)]
        choice: MethodChoice,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify a stored policy against every row over the whole ball.
    Verify {
        problem: PathBuf,
        solution: PathBuf,
        #[arg(long, default_value_t = VERIFY_TOL)]
        tol: f64,
        /// Write the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal value over a list of θ values, as CSV.
    Sweep {
        problem: PathBuf,
        #[arg(long, default_value = "sdp", value_parser = parse_method)]
        method: Method,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
        thetas: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the lot-sizing experiment and write per-instance CSV.
    Lotsizing(LotSizingArgs),
    /// Write one generated lot-sizing problem as JSON.
    Instance {
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = robust_qdr::lotsizing::DEFAULT_GAMMA)]
        gamma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct MethodChoice {
    /// adr, sdp, socp or sep_qdr_sdp.
    #[arg(long, default_value = "sdp", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = robust_qdr::lotsizing::DEFAULT_THETA)]
    theta: f64,
    /// Insist on a rule family; rejected when the method cannot provide it.
    #[arg(long, value_enum)]
    rule: Option<RuleKind>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum RuleKind {
    Affine,
    General,
    Separable,
}

#[derive(Args, Debug)]
struct LotSizingArgs {
    #[arg(long = "N", value_delimiter = ',', default_values_t = [2usize, 3, 4, 5])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = robust_qdr::lotsizing::DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = robust_qdr::lotsizing::DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, value_delimiter = ',', default_value = "adr,sdp,socp", value_parser = parse_method)]
    methods: Vec<Method>,
    /// Instance i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    demand_seed: u64,
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV destination; without it the CSV goes to stdout and the summary to stderr.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include wall-clock solve times (makes the CSV run-dependent).
    #[arg(long)]
    timing: bool,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl MethodChoice {
    fn check(&self) -> anyhow::Result<()> {
        let provided = match self.method {
            Method::AdrSocp => RuleKind::Affine,
            Method::QdrSdp => RuleKind::General,
            Method::SepQdrSocp | Method::SepQdrSdp => RuleKind::Separable,
        };
        match self.rule {
            Some(wanted) if wanted != provided => Err(Error::Invalid(format!(
                "method {} yields {provided:?} rules, not {wanted:?}; use {}",
                self.method,
                match wanted {
                    RuleKind::Affine => "--method adr",
                    RuleKind::General => "--method sdp",
                    RuleKind::Separable => "--method socp or --method sep_qdr_sdp",
                }
            ))
            .into()),
            _ => Ok(()),
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NotOptimal(SolveStatus::Infeasible)) => EXIT_INFEASIBLE,
        Some(Error::NotOptimal(_) | Error::Solver(_)) => EXIT_SOLVER,
        Some(Error::Uncertified(_)) => EXIT_INFEASIBLE,
        _ => EXIT_USAGE,
    }
}

/// Writes to `path`, or to stdout when absent.
fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| {
            Error::Io {
                path: p.to_path_buf(),
                source,
            }
            .into()
        }),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load(path: &Path) -> anyhow::Result<AroProblem> {
    let problem = load_problem(path)?;
    let issues = problem.validate();
    if !issues.is_empty() {
        return Err(Error::Invalid(format!(
            "{}: {}",
            path.display(),
            issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
        ))
        .into());
    }
    Ok(problem)
}

fn cmd_reformulate(problem: &Path, choice: &MethodChoice, out: Option<&Path>) -> anyhow::Result<u8> {
    choice.check()?;
    let problem = load(problem)?;
    let (program, layout) = reformulate(&problem, choice.method, choice.theta)?;
    let stats = program_stats(&program, &layout);
    let mut text = program.to_string();
    text.push_str(&format!(
        "stats layout={} rule_dim={} total_vars={} zero_rows={} nonneg_rows={} soc_rows={} psd_blocks={} max_soc_dim={} max_psd_side={}\n",
        stats.layout,
        stats.rule_dim,
        stats.total_vars,
        stats.zero_rows,
        stats.nonneg_rows,
        stats.soc_rows,
        stats.psd_blocks,
        stats.max_soc_dim,
        stats.max_psd_side
    ));
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn cmd_solve(
    problem: &Path,
    choice: &MethodChoice,
    out: Option<&Path>,
    settings: &SolverSettings,
) -> anyhow::Result<u8> {
    choice.check()?;
    let problem = load(problem)?;
    let policy = solve_policy(&problem, choice.method, choice.theta, settings)?;
    log::info!("{}: value {} in {:?}", choice.method, policy.value, policy.solve_time);
    let record = PolicyRecord {
        status: SolveStatus::Optimal.as_str().to_string(),
        value: policy.value,
        x: policy.x,
        rule: policy.rule,
    };
    let mut text = policy_to_json(&record)?;
    text.push('\n');
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn cmd_verify(problem: &Path, solution: &Path, tol: f64, json: bool, out: Option<&Path>) -> anyhow::Result<u8> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(Error::Invalid(format!("--tol must be nonnegative, got {tol}")).into());
    }
    let problem = load(problem)?;
    let text = fs::read_to_string(solution).map_err(|source| Error::Io {
        path: solution.to_path_buf(),
        source,
    })?;
    let record = policy_from_json(&text).with_context(|| format!("reading {}", solution.display()))?;
    let report = verify_robust_feasibility(&problem, &record.x, &record.rule, tol)?;
    let text = if json {
        let mut s = serde_json::to_string_pretty(&report)?;
        s.push('\n');
        s
    } else {
        let mut s = format!("{:<12} {:>14} {:>8}  maximizer\n", "row", "worst", "method");
        for row in report.rows.iter().chain(&report.objective) {
            let method = match row.method {
                robust_qdr::oracle::Evaluation::Exact => "exact",
                robust_qdr::oracle::Evaluation::Sampled => "sampled",
            };
            s.push_str(&format!(
                "{:<12} {:>14.6e} {:>8}  {:?}\n",
                row.label, row.worst_value, method, row.maximizer
            ));
        }
        s.push_str(&format!(
            "max violation {:.6e} at tolerance {:.1e}: {}\n",
            report.max_violation,
            report.tolerance,
            if report.feasible { "certified" } else { "NOT certified" }
        ));
        s
    };
    emit(out, &text)?;
    if report.feasible {
        return Ok(EXIT_OK);
    }
    if let Some(row) = report.worst_row() {
        eprintln!(
            "witness for {}: z* = {:?} (residual {:.6e})",
            row.label, row.maximizer, row.worst_value
        );
    }
    Ok(EXIT_INFEASIBLE)
}

fn cmd_sweep(
    problem: &Path,
    method: Method,
    thetas: &[f64],
    out: Option<&Path>,
    settings: &SolverSettings,
) -> anyhow::Result<u8> {
    let problem = load(problem)?;
    let mut text = String::from("theta,method,value,status\n");
    let mut code = EXIT_OK;
    for &theta in thetas {
        match solve_policy(&problem, method, theta, settings) {
            Ok(p) => text.push_str(&format!("{theta},{method},{},optimal\n", p.value)),
            Err(Error::NotOptimal(status)) => {
                let err = anyhow::Error::from(Error::NotOptimal(status));
                code = code.max(exit_code(&err));
                text.push_str(&format!("{theta},{method},,{}\n", status.as_str()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    emit(out, &text)?;
    Ok(code)
}

fn cmd_lotsizing(args: &LotSizingArgs, settings: &SolverSettings) -> anyhow::Result<u8> {
    let config = ExperimentConfig {
        n_values: args.n.clone(),
        instances_per_n: args.instances,
        theta: args.theta,
        gamma: args.gamma,
        methods: args.methods.clone(),
        seed: args.seed,
        demand_seed: args.demand_seed,
        settings: *settings,
        jobs: args.jobs,
    };
    let report = run_experiment(&config)?;
    let mut csv = Vec::new();
    write_csv(&mut csv, &report.records, args.timing)?;
    let summary = format_summary(&report.summary, args.timing);
    match &args.out {
        Some(p) => {
            fs::write(p, &csv).map_err(|source| Error::Io {
                path: p.clone(),
                source,
            })?;
            print!("{summary}");
        }
        None => {
            io::stdout().write_all(&csv)?;
            eprint!("{summary}");
        }
    }
    let failed = report.records.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} solves did not reach optimality", report.records.len());
        return Ok(EXIT_SOLVER);
    }
    Ok(EXIT_OK)
}

fn cmd_instance(n: usize, gamma: f64, seed: u64, out: Option<&Path>) -> anyhow::Result<u8> {
    let problem = build_aro(&generate_instance(n, gamma, seed)?);
    match out {
        Some(p) => save_problem(p, &problem)?,
        None => emit(None, &(robust_qdr::model::problem_to_json(&problem)? + "\n"))?,
    }
    Ok(EXIT_OK)
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let settings = config::resolve_settings(cli.config.as_deref(), cli.abs_tol, cli.rel_tol, cli.max_iter)?;
    match &cli.command {
        Command::Reformulate { problem, choice, out } => cmd_reformulate(problem, choice, out.as_deref()),
        Command::Solve { problem, choice, out } => cmd_solve(problem, choice, out.as_deref(), &settings),
        Command::Verify {
            problem,
            solution,
            tol,
            json,
            out,
        } => cmd_verify(problem, solution, *tol, *json, out.as_deref()),
        Command::Sweep {
            problem,
            method,
            thetas,
            out,
        } => cmd_sweep(problem, *method, thetas, out.as_deref(), &settings),
        Command::Lotsizing(args) => cmd_lotsizing(args, &settings),
        Command::Instance { n, gamma, seed, out } => cmd_instance(*n, *gamma, *seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
