//! The `flowcalc` command line.
//!
//! Every subcommand takes `--system` (a builtin name or a JSON file), writes CSV
//! or JSON to standard output or `--output`, and exits with 0 on success, 2 on
//! invalid input and 3 on numerical failure (blow-up, stalled planner).
//! Relative `--output` paths are resolved against `$FLOWCALC_OUTPUT_DIR` when it is set.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowcalc_core::chrono::{fit_order, remainder_eval, sample_grid, volterra_truncate};
use flowcalc_core::liealg::{bracket_asymptotics_check, eval_bracket_expression, flow_bracket, inverse_expansion_check};
use flowcalc_core::paramflow::{fd_param_derivative, param_derivative, Mode, PerturbedSystem};
use flowcalc_core::reach::{bracket_rank, plan_reach, simulate_schedule};
use flowcalc_core::{
    linalg, AffineControlSystem, BracketExpression, ChartPoint, FlowMap, FlowSolver, LocallyBoundedWitness, VectorField,
};
use serde::Serialize;

use crate::error::{CliError, CliResult, EXIT_OK, EXIT_VALIDATION};
use crate::report::{write_json, write_probe_csv, write_table_csv, ProbeRow, ProbeSummary};
use crate::schedule::{load_schedule, write_schedule_csv, PlanDoc};
use crate::system::{load_observable, load_system, parse_vector, BUILTIN_NAMES};

pub const OUTPUT_DIR_ENV: &str = "FLOWCALC_OUTPUT_DIR";

/// Halton-style sample count for witness bounds.
const WITNESS_SAMPLES: usize = 256;
/// Safety factor applied to sampled witness bounds.
const WITNESS_INFLATION: f64 = 1.1;

#[derive(Debug, Parser)]
#[command(name = "flowcalc", version, about = "Flows of polynomial vector fields as operators on observables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Residual {
    Remainder,
    FlowBracket,
    InverseExpansion,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Builtin system name or path of a system/field JSON document.
    #[arg(long, help = format!("Builtin ({BUILTIN_NAMES}) or JSON file"))]
    pub system: String,
    /// RK4 steps per unit of time.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(1..))]
    pub steps_per_unit: u32,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flow endpoint and pushforward of one field.
    Flow {
        #[command(flatten)]
        common: Common,
        /// 1-based field index.
        #[arg(long, default_value_t = 1)]
        field: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        /// Comma-separated start point.
        #[arg(long, allow_hyphen_values = true)]
        q: String,
    },
    /// Volterra truncation of order k and its remainder over a dyadic t-grid.
    Volterra {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        series: SeriesArgs,
    },
    /// Log-log order estimate for a named residual.
    OrderProbe {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        residual: Residual,
        #[command(flatten)]
        series: SeriesArgs,
        /// Bracket expression for `flow-bracket`, e.g. "[V1,V2]".
        #[arg(long)]
        expr: Option<String>,
    },
    /// Evaluate a bracket expression at a point.
    Bracket {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        expr: String,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t: f64,
    },
    /// Endpoints of a flow bracket for a list of times.
    FlowBracket {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        expr: String,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        /// Comma-separated times.
        #[arg(long)]
        t: String,
    },
    /// Derivative of a flow along a perturbation, both integral forms and a finite-difference oracle.
    ParamDeriv {
        #[command(flatten)]
        common: Common,
        /// 1-based index of the base field.
        #[arg(long, default_value_t = 1)]
        field: usize,
        /// 1-based index of the perturbation field.
        #[arg(long, default_value_t = 2)]
        perturbation: usize,
        /// Take the perturbation from this system instead of `--system`.
        #[arg(long)]
        perturbation_system: Option<String>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t0: f64,
        #[arg(long, allow_hyphen_values = true)]
        t1: f64,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..=256))]
        nodes: u64,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
    },
    /// Rank of the bracket span at a point.
    Rank {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=6))]
        max_degree: u64,
        #[arg(long, default_value_t = 1e-8)]
        rel_tol: f64,
    },
    /// Greedy bracket-motion planner.
    Plan {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        q0: String,
        #[arg(long, allow_hyphen_values = true)]
        target: String,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=6))]
        max_degree: u64,
        #[arg(long, default_value_t = 200)]
        max_iters: usize,
        /// Also write the schedule here (`.json`, otherwise CSV).
        #[arg(long)]
        schedule_out: Option<PathBuf>,
    },
    /// Run a schedule file from a start point.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Schedule file (`.json` or CSV).
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        q0: String,
    },
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    /// 1-based field index.
    #[arg(long, default_value_t = 1)]
    pub field: usize,
    /// `identity`, `x<i>` or an observable JSON file.
    #[arg(long, default_value = "identity")]
    pub observable: String,
    #[arg(long, allow_hyphen_values = true)]
    pub q: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t0: f64,
    /// Largest time offset of the dyadic grid.
    #[arg(long, default_value_t = 0.1)]
    pub t_max: f64,
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(4..=16))]
    pub levels: u64,
    /// Truncation order (the remainder is O(t^k)).
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=4))]
    pub k: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..=256))]
    pub nodes: u64,
    /// Sample a local bound C on a ball of this radius and report C t^k / k!.
    #[arg(long)]
    pub witness_radius: Option<f64>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind::{DisplayHelp, DisplayVersion};
            let rendered = e.render().to_string();
            return if matches!(e.kind(), DisplayHelp | DisplayVersion) {
                let _ = write!(stdout, "{rendered}");
                EXIT_OK
            } else {
                let _ = write!(stderr, "{rendered}");
                EXIT_VALIDATION
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn point(s: &str, dim: usize) -> CliResult<ChartPoint> {
    let p = ChartPoint::new(parse_vector(s)?)?;
    if p.dim() != dim {
        return Err(CliError::usage(format!("point {s:?} has {} coordinates, system dimension is {dim}", p.dim())));
    }
    Ok(p)
}

fn pick(fields: &[VectorField], one_based: usize) -> CliResult<&VectorField> {
    one_based
        .checked_sub(1)
        .and_then(|i| fields.get(i))
        .ok_or_else(|| CliError::usage(format!("field index {one_based} out of range: system has {} field(s)", fields.len())))
}

fn parse_expr(s: &str, num_fields: usize) -> CliResult<BracketExpression> {
    let e: BracketExpression = s.parse()?;
    if e.max_index() >= num_fields {
        return Err(CliError::usage(format!("{s} refers to V{} but the system has {num_fields} field(s)", e.max_index() + 1)));
    }
    Ok(e)
}

struct Sink<'a> {
    format: Format,
    path: Option<PathBuf>,
    stdout: &'a mut dyn Write,
}

impl Sink<'_> {
    fn new<'a>(common: &Common, default: Format, stdout: &'a mut dyn Write) -> Sink<'a> {
        Sink { format: common.format.unwrap_or(default), path: common.output.as_ref().map(|p| resolve_output(p)), stdout }
    }

    fn emit(&mut self, write: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
        match &self.path {
            Some(path) => {
                let mut file = BufWriter::new(create_file(path)?);
                write(&mut file)?;
                file.flush()?;
                Ok(())
            }
            None => write(self.stdout),
        }
    }
}

fn resolve_output(path: &std::path::Path) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn create_file(path: &std::path::Path) -> CliResult<File> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.to_path_buf(), source })?;
    }
    File::create(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn coordinate_header(first: &str, n: usize) -> Vec<String> {
    std::iter::once(first.to_owned()).chain((1..=n).map(|i| format!("q{i}"))).collect()
}

#[derive(Serialize)]
struct FlowOut {
    t0: f64,
    t: f64,
    start: Vec<f64>,
    endpoint: Vec<f64>,
    pushforward: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct VolterraRow {
    t: f64,
    truncation: Vec<f64>,
    exact: Vec<f64>,
    norm: f64,
    bound: Option<f64>,
}

#[derive(Serialize)]
struct BracketOut {
    expr: String,
    t: f64,
    point: Vec<f64>,
    value: Vec<f64>,
}

#[derive(Serialize)]
struct FlowBracketRow {
    t: f64,
    endpoint: Vec<f64>,
}

#[derive(Serialize)]
struct ParamOut {
    in_formula: Vec<f64>,
    out_formula: Vec<f64>,
    finite_difference: Vec<f64>,
    epsilon: f64,
    mode_gap: f64,
    fd_relative_gap: f64,
}

#[derive(Serialize)]
struct RankBracket {
    expr: String,
    value: Vec<f64>,
}

#[derive(Serialize)]
struct RankOut {
    dim: usize,
    numerical_rank: usize,
    rel_tol: f64,
    singular_values: Vec<f64>,
    brackets: Vec<RankBracket>,
}

#[derive(Serialize)]
struct SimulateOut {
    start: Vec<f64>,
    endpoint: Vec<f64>,
    segments: usize,
    total_duration: f64,
}

fn witness(field: &VectorField, obs: &flowcalc_core::Observable, q: &ChartPoint, radius: Option<f64>, k: usize) -> CliResult<Option<LocallyBoundedWitness>> {
    radius
        .map(|r| Ok(LocallyBoundedWitness::sample_lift_bound(field, obs, q, r, k as u32, WITNESS_SAMPLES)?.inflated(WITNESS_INFLATION)))
        .transpose()
}

fn execute(command: Command, stdout: &mut dyn Write) -> CliResult<()> {
    match command {
        Command::Flow { common, field, t0, t, q } => {
            let fields = load_system(&common.system)?;
            let f = pick(&fields, field)?;
            let q = point(&q, f.dim())?;
            let solver = FlowSolver::with_density(common.steps_per_unit);
            let (end, jac) = FlowMap::new(f, t0, t, solver).apply_with_pushforward(&q)?;
            let mut sink = Sink::new(&common, Format::Json, stdout);
            let out = FlowOut { t0, t, start: q.coords().to_vec(), endpoint: end.coords().to_vec(), pushforward: jac.to_rows() };
            match sink.format {
                Format::Json => sink.emit(|w| write_json(&out, w)),
                Format::Csv => {
                    let header: Vec<String> = ["coordinate", "endpoint"].map(String::from).to_vec();
                    let rows: Vec<_> = out.endpoint.iter().enumerate().map(|(i, v)| (Some(format!("q{}", i + 1)), vec![*v])).collect();
                    sink.emit(|w| write_table_csv(&header, &rows, w))
                }
            }
        }
        Command::Volterra { common, series } => {
            let fields = load_system(&common.system)?;
            let f = pick(&fields, series.field)?;
            let q = point(&series.q, f.dim())?;
            let obs = load_observable(&series.observable, f.dim())?;
            let solver = FlowSolver::with_density(common.steps_per_unit);
            let k = series.k as usize;
            let nodes = series.nodes as usize;
            let w = witness(f, &obs, &q, series.witness_radius, k)?;
            let mut rows = Vec::new();
            sample_grid(
                |dt| {
                    let t = series.t0 + dt;
                    let truncation = volterra_truncate(f, &obs, &q, series.t0, t, k, nodes)?;
                    let report = remainder_eval(f, &obs, &q, series.t0, t, k, &solver, nodes, w.as_ref())?;
                    let exact = FlowMap::new(f, series.t0, t, solver).apply_operator(&obs, &q)?;
                    rows.push(VolterraRow { t: dt, truncation, exact, norm: report.remainder_norm, bound: report.bound });
                    Ok(report.remainder_norm)
                },
                series.t_max,
                series.levels as usize,
            )?;
            let mut sink = Sink::new(&common, Format::Csv, stdout);
            match sink.format {
                Format::Json => sink.emit(|w| write_json(&rows, w)),
                Format::Csv => {
                    let probe: Vec<ProbeRow> = rows.iter().map(|r| ProbeRow { t: r.t, norm: r.norm, bound: r.bound }).collect();
                    sink.emit(|w| write_probe_csv(&probe, w))
                }
            }
        }
        Command::OrderProbe { common, residual, series, expr } => {
            let fields = load_system(&common.system)?;
            let solver = FlowSolver::with_density(common.steps_per_unit);
            let levels = series.levels as usize;
            let (name, rows, estimate) = match residual {
                Residual::Remainder => {
                    let f = pick(&fields, series.field)?;
                    let q = point(&series.q, f.dim())?;
                    let obs = load_observable(&series.observable, f.dim())?;
                    let k = series.k as usize;
                    let nodes = series.nodes as usize;
                    let w = witness(f, &obs, &q, series.witness_radius, k)?;
                    let mut bounds = Vec::new();
                    let (grid, norms) = sample_grid(
                        |dt| {
                            let r = remainder_eval(f, &obs, &q, series.t0, series.t0 + dt, k, &solver, nodes, w.as_ref())?;
                            bounds.push(r.bound);
                            Ok(r.remainder_norm)
                        },
                        series.t_max,
                        levels,
                    )?;
                    let rows = grid.iter().zip(&norms).zip(&bounds).map(|((&t, &norm), &bound)| ProbeRow { t, norm, bound }).collect();
                    ("remainder", rows, fit_order(grid, norms).ok())
                }
                Residual::FlowBracket => {
                    let text = expr.ok_or_else(|| CliError::usage("--residual flow-bracket needs --expr"))?;
                    let e = parse_expr(&text, fields.len())?;
                    let q = point(&series.q, fields[0].dim())?;
                    let check = bracket_asymptotics_check(&e, &fields, &q, series.t_max, levels, &solver)?;
                    let rows = check.t_grid.iter().zip(&check.norms).map(|(&t, &norm)| ProbeRow { t, norm, bound: None }).collect();
                    ("flow-bracket", rows, check.estimate)
                }
                Residual::InverseExpansion => {
                    let f = pick(&fields, series.field)?;
                    let q = point(&series.q, f.dim())?;
                    let check = inverse_expansion_check(f, &q, series.t_max, levels, &solver)?;
                    let rows = check.t_grid.iter().zip(&check.norms).map(|(&t, &norm)| ProbeRow { t, norm, bound: None }).collect();
                    ("inverse-expansion", rows, check.estimate)
                }
            };
            let mut sink = Sink::new(&common, Format::Csv, stdout);
            match sink.format {
                Format::Json => {
                    let summary = ProbeSummary::new(name, rows, estimate.as_ref());
                    sink.emit(|w| write_json(&summary, w))
                }
                Format::Csv => sink.emit(|w| write_probe_csv(&rows, w)),
            }
        }
        Command::Bracket { common, expr, q, t } => {
            let fields = load_system(&common.system)?;
            let e = parse_expr(&expr, fields.len())?;
            let q = point(&q, fields[0].dim())?;
            let value = eval_bracket_expression(&e, &fields, t, &q)?;
            let out = BracketOut { expr: e.to_string(), t, point: q.coords().to_vec(), value };
            let mut sink = Sink::new(&common, Format::Json, stdout);
            match sink.format {
                Format::Json => sink.emit(|w| write_json(&out, w)),
                Format::Csv => {
                    let header = coordinate_header("expr", out.value.len());
                    sink.emit(|w| write_table_csv(&header, &[(Some(out.expr.clone()), out.value.clone())], w))
                }
            }
        }
        Command::FlowBracket { common, expr, q, t } => {
            let fields = load_system(&common.system)?;
            let e = parse_expr(&expr, fields.len())?;
            let q = point(&q, fields[0].dim())?;
            let solver = FlowSolver::with_density(common.steps_per_unit);
            let rows = parse_vector(&t)?
                .into_iter()
                .map(|t| Ok(FlowBracketRow { t, endpoint: flow_bracket(&e, &fields, t, &q, &solver)?.into_coords() }))
                .collect::<CliResult<Vec<_>>>()?;
            let mut sink = Sink::new(&common, Format::Csv, stdout);
            match sink.format {
                Format::Json => sink.emit(|w| write_json(&rows, w)),
                Format::Csv => {
                    let header = coordinate_header("t", q.dim());
                    let table: Vec<_> =
                        rows.iter().map(|r| (None, std::iter::once(r.t).chain(r.endpoint.iter().copied()).collect())).collect();
                    sink.emit(|w| write_table_csv(&header, &table, w))
                }
            }
        }
        Command::ParamDeriv { common, field, perturbation, perturbation_system, t0, t1, q, nodes, epsilon } => {
            let fields = load_system(&common.system)?;
            let v = pick(&fields, field)?.clone();
            let w = match &perturbation_system {
                Some(other) => pick(&load_system(other)?, perturbation)?.clone(),
                None => pick(&fields, perturbation)?.clone(),
            };
            let q = point(&q, v.dim())?;
            let solver = FlowSolver::with_density(common.steps_per_unit);
            let sys = PerturbedSystem::new(v, w, t0, t1)?;
            let in_formula = param_derivative(&sys, &q, Mode::In, &solver, nodes as usize)?;
            let out_formula = param_derivative(&sys, &q, Mode::Out, &solver, nodes as usize)?;
            let fd = fd_param_derivative(&sys, &q, epsilon, &solver)?;
            let out = ParamOut {
                mode_gap: linalg::distance(&in_formula, &out_formula),
                fd_relative_gap: linalg::distance(&in_formula, &fd) / (1.0 + linalg::norm(&fd)),
                in_formula,
                out_formula,
                finite_difference: fd,
                epsilon,
            };
            let mut sink = Sink::new(&common, Format::Json, stdout);
            match sink.format {
                Format::Json => sink.emit(|w| write_json(&out, w)),
                Format::Csv => {
                    let header = coordinate_header("method", q.dim());
                    let rows = vec![
                        (Some("in".to_owned()), out.in_formula.clone()),
                        (Some("out".to_owned()), out.out_formula.clone()),
                        (Some("finite-difference".to_owned()), out.finite_difference.clone()),
                    ];
                    sink.emit(|w| write_table_csv(&header, &rows, w))
                }
            }
        }
        Command::Rank { common, q, max_degree, rel_tol } => {
            let sys = AffineControlSystem::new(load_system(&common.system)?)?;
            let q = point(&q, sys.dim())?;
            let report = bracket_rank(&sys, &q, max_degree as usize, rel_tol)?;
            let out = RankOut {
                dim: sys.dim(),
                numerical_rank: report.numerical_rank,
                rel_tol,
                singular_values: report.singular_values,
                brackets: report.brackets.into_iter().map(|(e, value)| RankBracket { expr: e.to_string(), value }).collect(),
            };
            let mut sink = Sink::new(&common, Format::Json, stdout);
            match sink.format {
                Format::Json => sink.emit(|w| write_json(&out, w)),
                Format::Csv => {
                    let header = coordinate_header("expr", out.dim);
                    let rows: Vec<_> = out.brackets.iter().map(|b| (Some(b.expr.clone()), b.value.clone())).collect();
                    sink.emit(|w| write_table_csv(&header, &rows, w))
                }
            }
        }
        Command::Plan { common, q0, target, epsilon, max_degree, max_iters, schedule_out } => {
            let sys = AffineControlSystem::new(load_system(&common.system)?)?;
            let q0 = point(&q0, sys.dim())?;
            let target = point(&target, sys.dim())?;
            let solver = FlowSolver::with_density(common.steps_per_unit);
            let (result, failure) = match plan_reach(&sys, &q0, &target, epsilon, max_degree as usize, max_iters, &solver) {
                Ok(r) => (r, None),
                Err(flowcalc_core::Error::Stalled(best)) => {
                    let best = *best;
                    let err = flowcalc_core::Error::Stalled(Box::new(best.clone()));
                    (best, Some(err))
                }
                Err(e) => return Err(e.into()),
            };
            if let Some(path) = &schedule_out {
                let path = resolve_output(path);
                let mut file = BufWriter::new(create_file(&path)?);
                if path.extension().and_then(|e| e.to_str()) == Some("json") {
                    write_json(&crate::schedule::ScheduleDoc::from_schedule(&result.schedule), &mut file)?;
                } else {
                    write_schedule_csv(&result.schedule, &mut file)?;
                }
                file.flush()?;
            }
            let doc = PlanDoc::new(q0.coords(), target.coords(), &result);
            let mut sink = Sink::new(&common, Format::Json, stdout);
            match sink.format {
                Format::Json => sink.emit(|w| write_json(&doc, w))?,
                Format::Csv => sink.emit(|w| write_schedule_csv(&result.schedule, w))?,
            }
            match failure {
                Some(e) => Err(e.into()),
                None => Ok(()),
            }
        }
        Command::Simulate { common, schedule, q0 } => {
            let sys = AffineControlSystem::new(load_system(&common.system)?)?;
            let q0 = point(&q0, sys.dim())?;
            let sched = load_schedule(&schedule)?;
            let solver = FlowSolver::with_density(common.steps_per_unit);
            let end = simulate_schedule(&sys, &q0, &sched, &solver)?;
            let out = SimulateOut {
                start: q0.coords().to_vec(),
                endpoint: end.coords().to_vec(),
                segments: sched.len(),
                total_duration: sched.total_duration(),
            };
            let mut sink = Sink::new(&common, Format::Json, stdout);
            match sink.format {
                Format::Json => sink.emit(|w| write_json(&out, w)),
                Format::Csv => {
                    let header: Vec<String> = ["coordinate", "endpoint"].map(String::from).to_vec();
                    let rows: Vec<_> = out.endpoint.iter().enumerate().map(|(i, v)| (Some(format!("q{}", i + 1)), vec![*v])).collect();
                    sink.emit(|w| write_table_csv(&header, &rows, w))
                }
            }
        }
    }
}
