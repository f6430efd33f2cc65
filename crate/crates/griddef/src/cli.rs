//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use griddef_core::report::render_table_i_style;
use griddef_core::uncertainty::extreme_realization_count;
use griddef_core::{ccg_solve_observed, BigMConfig, CcgParams, CcgStatus, Error, GridCase, IterationRecord, OracleCaps};

use crate::backend::BackendKind;
use crate::case_io::{check_case, load_case_document, CaseFileError, Overrides};
use crate::dump::DumpingBackend;
use crate::oracle_check::{self, random_instances};
use crate::report::{write_convergence, write_sweep, ResultDocument};
use crate::sweep::{row_failed, run_sweep, SweepParameter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
/// Not converged, or (oracle-check) a mismatch.
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "griddef", version, about = "Robust grid defense planning against coordinated attacks and uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one case and write result.json and convergence.csv.
    Solve {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        ccg: CcgArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write every MILP solved to <out>/models.
        #[arg(long)]
        dump_models: bool,
    },
    /// One solve per value of a parameter; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        ccg: CcgArgs,
        #[arg(long, value_enum)]
        parameter: SweepParameter,
        /// Comma-separated values, solved in this order.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare C&CG with exhaustive enumeration.
    OracleCheck {
        #[arg(long, required_unless_present = "random", conflicts_with = "random")]
        case: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[command(flatten)]
        ccg: CcgArgs,
        /// Generate this many random small instances instead of reading a case.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check a case file and list every problem found.
    Validate {
        #[arg(long)]
        case: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct CaseArgs {
    #[arg(long)]
    pub case: PathBuf,
    #[command(flatten)]
    pub overrides: OverrideArgs,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct OverrideArgs {
    #[arg(long, value_name = "R")]
    pub defense_budget: Option<f64>,
    #[arg(long, value_name = "R")]
    pub attack_budget: Option<f64>,
    /// Load uncertainty budget.
    #[arg(long, value_name = "N")]
    pub ud: Option<f64>,
    /// Wind uncertainty budget.
    #[arg(long, value_name = "N")]
    pub uw: Option<f64>,
    /// Symmetric deviation for every load.
    #[arg(long, value_name = "MW")]
    pub load_dev: Option<f64>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            defense_budget: a.defense_budget,
            attack_budget: a.attack_budget,
            load_budget: a.ud,
            wind_budget: a.uw,
            load_deviation_mw: a.load_dev,
        }
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct CcgArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub gap_abs: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Multiplies every big-M bound.
    #[arg(long, default_value_t = 1.0)]
    pub big_m_scale: f64,
}

impl CcgArgs {
    pub fn params(&self) -> CcgParams {
        CcgParams {
            gap_abs: self.gap_abs,
            max_iterations: self.max_iters,
            bigm: BigMConfig::default().scaled(self.big_m_scale),
            ..CcgParams::default()
        }
    }
}

fn solver_exit(e: &Error) -> i32 {
    match e {
        Error::Context { source, .. } => solver_exit(source),
        Error::InvalidCase(_)
        | Error::Domain(_)
        | Error::DimensionMismatch { .. }
        | Error::OverBudget(_)
        | Error::BigMTooSmall { .. }
        | Error::SizeCap { .. } => EXIT_INVALID_INPUT,
        _ => EXIT_SOLVER,
    }
}

fn load(args: &CaseArgs) -> Result<(GridCase, Option<String>), CaseFileError> {
    let doc = load_case_document(&args.case)?;
    let case = Overrides::from(args.overrides).apply(&doc.case);
    check_case(&case, &format!("{} (with overrides)", args.case.display()))?;
    Ok((case, doc.name))
}

fn backend_kind() -> Result<BackendKind, i32> {
    BackendKind::from_env().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_INVALID_INPUT
    })
}

fn create_out(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Validate { case } => match load_case_document(&case) {
            Ok(doc) => {
                println!(
                    "{}: valid ({} buses, {} branches, {} generators, {} wind farms, {} loads)",
                    case.display(),
                    doc.case.buses.len(),
                    doc.case.branches.len(),
                    doc.case.generators.len(),
                    doc.case.wind_farms.len(),
                    doc.case.loads.len()
                );
                EXIT_OK
            }
            Err(e) => {
                eprintln!("{e}");
                EXIT_INVALID_INPUT
            }
        },
        Command::Solve {
            case,
            ccg,
            out,
            dump_models,
        } => cmd_solve(&case, &ccg, &out, dump_models),
        Command::Sweep {
            case,
            ccg,
            parameter,
            values,
            jobs,
            out,
        } => cmd_sweep(&case, &ccg, parameter, &values, jobs, &out),
        Command::OracleCheck {
            case,
            overrides,
            ccg,
            random,
            seed,
            jobs,
        } => cmd_oracle_check(case.as_deref(), overrides, &ccg, random, seed, jobs),
    }
}

fn cmd_solve(args: &CaseArgs, ccg: &CcgArgs, out: &Path, dump_models: bool) -> i32 {
    let (case, name) = match load(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_INVALID_INPUT;
        }
    };
    let kind = match backend_kind() {
        Ok(k) => k,
        Err(code) => return code,
    };
    if let Err(e) = create_out(out) {
        eprintln!("error: {e:#}");
        return EXIT_INVALID_INPUT;
    }
    let params = ccg.params();
    let mut progress = |r: &IterationRecord| {
        eprintln!(
            "iter {:>3}  LB {:>12.4}  UB {:>12.4}  eta {:>12.4}  {}",
            r.iter, r.lower_bound_mw, r.upper_bound_mw, r.eta_mw, r.scenario_signature
        );
    };
    let start = Instant::now();
    let outcome = if dump_models {
        match DumpingBackend::new(kind.create(), out.join("models")) {
            Ok(mut b) => ccg_solve_observed(&case, &params, &mut b, &mut progress),
            Err(e) => {
                eprintln!("error: creating model dump directory: {e}");
                return EXIT_INVALID_INPUT;
            }
        }
    } else {
        ccg_solve_observed(&case, &params, &mut kind.create(), &mut progress)
    };
    let elapsed = start.elapsed().as_secs_f64();
    let report = match outcome {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return solver_exit(&e);
        }
    };
    let doc = ResultDocument::new(&report, &case, name, kind_name(kind), elapsed);
    let written = doc
        .write(&out.join("result.json"))
        .context("writing result.json")
        .and_then(|_| write_convergence(&out.join("convergence.csv"), &report).context("writing convergence.csv"));
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return EXIT_SOLVER;
    }
    print!("{}", render_table_i_style(&report, &case));
    println!(
        "Status               {} after {} iteration(s), LB {:.4} MW, {:.2} s",
        report.status.as_str(),
        report.iterations.len(),
        report.lower_bound_mw,
        elapsed
    );
    if report.status == CcgStatus::Converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    }
}

fn kind_name(kind: BackendKind) -> &'static str {
    match kind {
        BackendKind::Highs => "highs",
        BackendKind::Pure => "pure",
    }
}

fn cmd_sweep(args: &CaseArgs, ccg: &CcgArgs, parameter: SweepParameter, values: &[f64], jobs: usize, out: &Path) -> i32 {
    let (case, _) = match load(args) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_INVALID_INPUT;
        }
    };
    let kind = match backend_kind() {
        Ok(k) => k,
        Err(code) => return code,
    };
    if let Err(e) = ccg.params().check() {
        eprintln!("error: {e}");
        return EXIT_INVALID_INPUT;
    }
    if let Err(e) = create_out(out) {
        eprintln!("error: {e:#}");
        return EXIT_INVALID_INPUT;
    }
    let rows = match run_sweep(&case, parameter, values, &ccg.params(), kind, jobs) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_INVALID_INPUT;
        }
    };
    if let Err(e) = write_sweep(&out.join("sweep.csv"), &rows) {
        eprintln!("error: writing sweep.csv: {e}");
        return EXIT_SOLVER;
    }
    println!("{:>10}  {:>14}  {:<20}  {:<24}  {:>5}  status", "value", "load loss MW", "defended", "attacked", "iters");
    for r in &rows {
        let loss = r.load_loss_mw.map_or_else(|| "-".to_string(), |l| format!("{l:.2}"));
        println!(
            "{:>10}  {:>14}  {:<20}  {:<24}  {:>5}  {}",
            r.value, loss, r.defended, r.attacked, r.iterations, r.status
        );
    }
    if rows.iter().any(|r| r.load_loss_mw.is_none()) {
        EXIT_SOLVER
    } else if rows.iter().any(row_failed) {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    }
}

fn cmd_oracle_check(
    path: Option<&Path>,
    overrides: OverrideArgs,
    ccg: &CcgArgs,
    random: Option<usize>,
    seed: u64,
    jobs: usize,
) -> i32 {
    let ccg_kind = match backend_kind() {
        Ok(k) => k,
        Err(code) => return code,
    };
    let instances: Vec<(String, GridCase)> = match (path, random) {
        (_, Some(n)) => random_instances(n, seed)
            .into_iter()
            .enumerate()
            .map(|(i, c)| (format!("random #{} (seed {seed})", i + 1), Overrides::from(overrides).apply(&c)))
            .collect(),
        (Some(p), None) => match load(&CaseArgs {
            case: p.to_path_buf(),
            overrides,
        }) {
            Ok((c, _)) => vec![(p.display().to_string(), c)],
            Err(e) => {
                eprintln!("{e}");
                return EXIT_INVALID_INPUT;
            }
        },
        (None, None) => unreachable!("clap requires --case or --random"),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_SOLVER;
        }
    };
    let params = ccg.params();
    let mut worst = EXIT_OK;
    let mut passed = 0;
    for (label, case) in &instances {
        if let Err(e) = check_case(case, label) {
            eprintln!("{e}");
            worst = worst.max(EXIT_INVALID_INPUT);
            continue;
        }
        let outcome = pool.install(|| {
            oracle_check::check_case(
                label.clone(),
                case,
                &params,
                OracleCaps::default(),
                ccg_kind,
                BackendKind::Pure,
            )
        });
        match outcome {
            Ok(o) if o.passed() => {
                passed += 1;
                println!(
                    "PASS  {label}: C&CG {:.6} MW, oracle {:.6} MW, |diff| {:.2e}",
                    o.ccg_loss_mw,
                    o.oracle_loss_mw,
                    o.difference_mw()
                );
            }
            Ok(o) => {
                worst = worst.max(EXIT_NOT_CONVERGED);
                println!(
                    "FAIL  {label}: C&CG {:.6} MW ({}), oracle {:.6} MW, oracle value of C&CG defense {:.6} MW",
                    o.ccg_loss_mw,
                    o.ccg_status.as_str(),
                    o.oracle_loss_mw,
                    o.ccg_defense_oracle_mw
                );
            }
            Err(e) => {
                let code = solver_exit(&e);
                worst = worst.max(code);
                println!("FAIL  {label}: {e}");
                if matches!(e, Error::SizeCap { .. }) {
                    println!("      extreme realizations: {}", extreme_realization_count(case));
                }
            }
        }
    }
    println!("{passed}/{} passed", instances.len());
    worst
}
