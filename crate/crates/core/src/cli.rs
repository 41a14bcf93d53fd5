//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::adaptive::{
    adaptive_solve, format_trace, AdaptiveConfig, IterationRecord, DEFAULT_EPSILON, DEFAULT_MAX_ITERATIONS,
};
use crate::error::{EldpError, Result};
use crate::model::{bundled, load_problem, DispatchProblem, BUNDLED};
use crate::solver::{export_lp, solve_surrogate, SolveReport, SolverConfig, DEFAULT_GAP_TOL, DEFAULT_NODE_CAP};
use crate::surrogate::{identity_pwl, tangent_pwl, PiecewiseLinear, TangentConfig};

/// Environment variable capping the worker count in parallel mode.
pub const THREADS_ENV: &str = "ELDP_THREADS";

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_UNCERTIFIED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "eldp", version, about = "Certified global economic load dispatch with valve-point effects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one dataset.
    Solve(SolveArgs),
    /// Run every bundled case and compare with the reference costs.
    Bench(BenchArgs),
    /// Write the mixed-integer surrogate model in LP format.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Simple,
    Tangent,
    Adaptive,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Simple => "simple",
            Method::Tangent => "tangent",
            Method::Adaptive => "adaptive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Machine,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value_t = Method::Simple)]
    pub method: Method,
    /// First tangent angle, radians or a multiple of pi such as `0.35pi`.
    #[arg(long, value_parser = parse_angle)]
    pub theta1: Option<f64>,
    /// Second tangent angle.
    #[arg(long, value_parser = parse_angle)]
    pub theta2: Option<f64>,
    /// Target gap of the adaptive method, $/h.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Iteration limit of the adaptive method.
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Absolute optimality gap of each surrogate solve, $/h.
    #[arg(long, default_value_t = DEFAULT_GAP_TOL)]
    pub gap_tol: f64,
    #[arg(long, default_value_t = DEFAULT_NODE_CAP)]
    pub node_cap: usize,
    /// Use a worker pool, capped by ELDP_THREADS when set.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Dataset file, or the name of a bundled case.
    pub dataset: String,
    #[command(flatten)]
    pub method: MethodArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Format::Human)]
    pub format: Format,
    /// Write the adaptive iteration table to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Include wall and CPU time in machine output.
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    pub dataset: String,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Output file; standard output when omitted or `-`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Parses `0.35pi`, `0.35*pi`, `pi`, `0.35π`, or a plain number of radians.
pub fn parse_angle(text: &str) -> std::result::Result<f64, String> {
    let s = text.trim();
    let lower = s.to_ascii_lowercase();
    let scaled = lower.strip_suffix("pi").or_else(|| s.strip_suffix('π'));
    let value = match scaled {
        Some(head) => {
            let head = head.trim().trim_end_matches('*').trim();
            let factor = if head.is_empty() {
                1.0
            } else {
                head.parse::<f64>().map_err(|e| format!("bad angle `{text}`: {e}"))?
            };
            factor * std::f64::consts::PI
        }
        None => s.parse::<f64>().map_err(|e| format!("bad angle `{text}`: {e}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("bad angle `{text}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    Simple,
    Tangent(TangentConfig),
    Adaptive { epsilon: f64, max_iterations: usize },
}

impl MethodSpec {
    pub fn method(&self) -> Method {
        match self {
            MethodSpec::Simple => Method::Simple,
            MethodSpec::Tangent(_) => Method::Tangent,
            MethodSpec::Adaptive { .. } => Method::Adaptive,
        }
    }

    /// Checks that angles are given only with the tangent method and ε only with the
    /// adaptive one.
    pub fn from_args(args: &MethodArgs) -> Result<Self> {
        let has_theta = args.theta1.is_some() || args.theta2.is_some();
        let has_adaptive = args.epsilon.is_some() || args.max_iterations.is_some();
        if has_theta && args.method != Method::Tangent {
            return Err(EldpError::InvalidArgument("--theta1/--theta2 apply only to --method tangent".into()));
        }
        if has_adaptive && args.method != Method::Adaptive {
            return Err(EldpError::InvalidArgument(
                "--epsilon/--max-iterations apply only to --method adaptive".into(),
            ));
        }
        Ok(match args.method {
            Method::Simple => MethodSpec::Simple,
            Method::Tangent => {
                let d = TangentConfig::default();
                MethodSpec::Tangent(TangentConfig::new(
                    args.theta1.unwrap_or(d.theta1),
                    args.theta2.unwrap_or(d.theta2),
                )?)
            }
            Method::Adaptive => MethodSpec::Adaptive {
                epsilon: args.epsilon.unwrap_or(DEFAULT_EPSILON),
                max_iterations: args.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
            },
        })
    }

    /// Per-generator surrogates for the fixed-surrogate methods.
    pub fn pwls(&self, n: usize) -> Result<Vec<PiecewiseLinear>> {
        match self {
            MethodSpec::Simple => Ok(vec![identity_pwl(); n]),
            MethodSpec::Tangent(cfg) => Ok(vec![tangent_pwl(cfg)?; n]),
            MethodSpec::Adaptive { .. } => {
                Err(EldpError::InvalidArgument("the adaptive method has no fixed surrogate to export".into()))
            }
        }
    }
}

/// Everything needed to run one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: MethodSpec,
    pub dataset: String,
    pub format: Format,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn new(dataset: impl Into<String>, method: MethodSpec) -> Self {
        RunConfig { method, dataset: dataset.into(), format: Format::Human, solver: SolverConfig::default() }
    }
}

fn solver_config(args: &SolverArgs) -> Result<SolverConfig> {
    if !(args.gap_tol > 0.0) {
        return Err(EldpError::InvalidArgument("--gap-tol must be positive".into()));
    }
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Some(n),
            _ => {
                return Err(EldpError::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))
            }
        },
        Err(_) => None,
    };
    Ok(SolverConfig {
        gap_tol: args.gap_tol,
        node_cap: args.node_cap,
        parallel: args.parallel,
        threads,
        check_kkt: false,
    })
}

/// Loads a dataset file, falling back to a bundled case of that name.
pub fn load_dataset(spec: &str) -> Result<DispatchProblem> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| EldpError::Io(format!("cannot read {spec}: {e}")))?;
        let mut problem = load_problem(&text)?;
        if problem.name == "unnamed" {
            if let Some(stem) = path.file_stem() {
                problem.name = stem.to_string_lossy().into_owned();
            }
        }
        return Ok(problem);
    }
    if BUNDLED.contains(&spec) {
        return bundled(spec);
    }
    Err(EldpError::Io(format!("no dataset file or bundled case named `{spec}`")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub name: String,
    pub method: Method,
    pub report: SolveReport,
    /// Adaptive runs only.
    pub trace: Option<Vec<IterationRecord>>,
    pub epsilon: Option<f64>,
    /// Process CPU seconds spent in the solve.
    pub cpu_time: f64,
}

impl RunOutcome {
    pub fn certified(&self) -> bool {
        self.report.certified
    }
}

fn cpu_seconds() -> f64 {
    let mut ts = libc::timespec { tv_sec: 0, tv_nsec: 0 };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return f64::NAN;
    }
    ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
}

/// Solves `problem` with the configured method.
pub fn run(problem: &DispatchProblem, cfg: &RunConfig) -> Result<RunOutcome> {
    let cpu0 = cpu_seconds();
    let wall = Instant::now();
    let (mut report, trace, epsilon) = match &cfg.method {
        MethodSpec::Adaptive { epsilon, max_iterations } => {
            let acfg = AdaptiveConfig {
                epsilon: *epsilon,
                max_iterations: *max_iterations,
                solver: cfg.solver.clone(),
                ..AdaptiveConfig::default()
            };
            let out = adaptive_solve(problem, &acfg)?;
            (out.report, Some(out.trace), Some(*epsilon))
        }
        spec => (solve_surrogate(problem, &spec.pwls(problem.len())?, &cfg.solver)?, None, None),
    };
    report.wall_time = wall.elapsed().as_secs_f64();
    Ok(RunOutcome {
        name: problem.name.clone(),
        method: cfg.method.method(),
        report,
        trace,
        epsilon,
        cpu_time: cpu_seconds() - cpu0,
    })
}

/// Table in the layout of the published results: MW to 3 decimals, $/h to 2.
pub fn render_human(out: &RunOutcome) -> String {
    let r = &out.report;
    let mut s = String::new();
    let _ = writeln!(s, "case {}, method {}", out.name, out.method.name());
    let _ = writeln!(s, "{:>6} {:>12}", "unit", "power (MW)");
    for (i, p) in r.p.as_slice().iter().enumerate() {
        let _ = writeln!(s, "{:>6} {:>12.3}", format!("p{}", i + 1), p);
    }
    let _ = writeln!(s, "{:>6} {:>12.3}", "total", r.p.total());
    let _ = writeln!(s, "total cost ($/h)      {:.2}", r.true_cost);
    let _ = writeln!(s, "surrogate ($/h)       {:.2}", r.surrogate_value);
    let _ = writeln!(s, "lower bound ($/h)     {:.2}", r.certified_bound);
    let _ = writeln!(s, "certified gap ($/h)   {:.3e}", r.absolute_gap);
    if let Some(trace) = &out.trace {
        let _ = writeln!(s, "iterations            {}", trace.len());
    }
    let _ = writeln!(s, "nodes                 {}", r.nodes_explored);
    let _ = writeln!(s, "real time (s)         {:.3}", r.wall_time);
    let _ = writeln!(s, "cpu time (s)          {:.3}", out.cpu_time);
    let _ = writeln!(s, "status                {}", if r.certified { "certified" } else { "not certified" });
    s
}

/// One `key=value` line per field, floats in shortest round-trip form. Timing is
/// left out unless requested, so repeated runs print identical bytes.
pub fn render_machine(out: &RunOutcome, timing: bool) -> String {
    let r = &out.report;
    let mut s = String::new();
    let _ = writeln!(s, "case={}", out.name);
    let _ = writeln!(s, "method={}", out.method.name());
    let _ = writeln!(s, "units={}", r.p.len());
    for (i, p) in r.p.as_slice().iter().enumerate() {
        let _ = writeln!(s, "p{}={}", i + 1, p);
    }
    let _ = writeln!(s, "total_power={}", r.p.total());
    let _ = writeln!(s, "total_cost={}", r.true_cost);
    let _ = writeln!(s, "surrogate_value={}", r.surrogate_value);
    let _ = writeln!(s, "certified_bound={}", r.certified_bound);
    let _ = writeln!(s, "absolute_gap={}", r.absolute_gap);
    let _ = writeln!(s, "nodes={}", r.nodes_explored);
    if let (Some(trace), Some(eps)) = (&out.trace, out.epsilon) {
        let _ = writeln!(s, "epsilon={eps}");
        let _ = writeln!(s, "iterations={}", trace.len());
    }
    let _ = writeln!(s, "certified={}", r.certified);
    if timing {
        let _ = writeln!(s, "wall_time={}", r.wall_time);
        let _ = writeln!(s, "cpu_time={}", out.cpu_time);
    }
    s
}

/// Reference result of one bundled case and method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchCase {
    pub case: &'static str,
    pub method: Method,
    /// Published cost for this method, $/h.
    pub expected: f64,
    /// Lowest published cost for the case, $/h.
    pub best_in_lit: f64,
    pub tolerance: f64,
}

pub const BENCH_CASES: [BenchCase; 9] = [
    BenchCase { case: "case1", method: Method::Simple, expected: 8234.07, best_in_lit: 8234.07, tolerance: 0.01 },
    BenchCase { case: "case1", method: Method::Adaptive, expected: 8234.07, best_in_lit: 8234.07, tolerance: 0.01 },
    BenchCase { case: "case2a", method: Method::Simple, expected: 17963.83, best_in_lit: 17963.83, tolerance: 0.01 },
    BenchCase { case: "case2a", method: Method::Adaptive, expected: 17963.83, best_in_lit: 17963.83, tolerance: 0.01 },
    BenchCase { case: "case2b", method: Method::Simple, expected: 24170.66, best_in_lit: 24169.92, tolerance: 0.01 },
    BenchCase { case: "case2b", method: Method::Adaptive, expected: 24169.92, best_in_lit: 24169.92, tolerance: 0.01 },
    BenchCase { case: "case3", method: Method::Simple, expected: 121415.31, best_in_lit: 121412.54, tolerance: 0.02 },
    BenchCase { case: "case3", method: Method::Tangent, expected: 121412.54, best_in_lit: 121412.54, tolerance: 0.02 },
    BenchCase { case: "case3", method: Method::Adaptive, expected: 121412.54, best_in_lit: 121412.54, tolerance: 0.02 },
];

fn default_spec(method: Method) -> MethodSpec {
    match method {
        Method::Simple => MethodSpec::Simple,
        Method::Tangent => MethodSpec::Tangent(TangentConfig::default()),
        Method::Adaptive => MethodSpec::Adaptive { epsilon: DEFAULT_EPSILON, max_iterations: DEFAULT_MAX_ITERATIONS },
    }
}

/// Runs every benchmark row. Returns the table and whether all rows passed.
pub fn bench(solver: &SolverConfig) -> Result<(String, bool)> {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<7} {:<9} {:>12} {:>12} {:>12} {:>10} {:>9}  status",
        "case", "method", "cost", "expected", "best lit.", "deviation", "time (s)"
    );
    let mut all_ok = true;
    for row in BENCH_CASES {
        let problem = bundled(row.case)?;
        let cfg = RunConfig { solver: solver.clone(), ..RunConfig::new(row.case, default_spec(row.method)) };
        let out = run(&problem, &cfg)?;
        let cost = out.report.true_cost;
        let ok = (cost - row.expected).abs() <= row.tolerance && out.certified();
        all_ok &= ok;
        // Adding 0.0 turns a rounded -0.00 into +0.00.
        let deviation = ((cost - row.best_in_lit) * 100.0).round() / 100.0 + 0.0;
        let _ = writeln!(
            s,
            "{:<7} {:<9} {:>12.2} {:>12.2} {:>12.2} {:>+10.2} {:>9.3}  {}",
            row.case,
            row.method.name(),
            cost,
            row.expected,
            row.best_in_lit,
            deviation,
            out.report.wall_time,
            if ok { "ok" } else { "FAIL" }
        );
    }
    Ok((s, all_ok))
}

fn write_text(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) if p != Path::new("-") => {
            std::fs::write(p, text).map_err(|e| EldpError::Io(format!("cannot write {}: {e}", p.display())))
        }
        _ => out.write_all(text.as_bytes()).map_err(EldpError::from),
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Solve(args) => {
            let method = MethodSpec::from_args(&args.method)?;
            if args.trace.is_some() && method.method() != Method::Adaptive {
                return Err(EldpError::InvalidArgument("--trace applies only to --method adaptive".into()));
            }
            let cfg = RunConfig {
                method,
                dataset: args.dataset.clone(),
                format: args.format,
                solver: solver_config(&args.solver)?,
            };
            let problem = load_dataset(&cfg.dataset)?;
            let outcome = run(&problem, &cfg)?;
            if let (Some(path), Some(trace)) = (&args.trace, &outcome.trace) {
                write_text(Some(path), &format_trace(trace), out)?;
            }
            let text = match cfg.format {
                Format::Human => render_human(&outcome),
                Format::Machine => render_machine(&outcome, args.timing),
            };
            out.write_all(text.as_bytes())?;
            Ok(if outcome.certified() { EXIT_CERTIFIED } else { EXIT_UNCERTIFIED })
        }
        Command::Bench(args) => {
            let (table, ok) = bench(&solver_config(&args.solver)?)?;
            out.write_all(table.as_bytes())?;
            Ok(if ok { EXIT_CERTIFIED } else { EXIT_UNCERTIFIED })
        }
        Command::Export(args) => {
            let method = MethodSpec::from_args(&args.method)?;
            let problem = load_dataset(&args.dataset)?;
            let pwls = method.pwls(problem.len())?;
            let mut buf = Vec::new();
            export_lp(&problem, &pwls, &mut buf)?;
            write_text(args.output.as_deref(), &String::from_utf8_lossy(&buf), out)?;
            Ok(EXIT_CERTIFIED)
        }
    }
}

/// Parses `args` (including the program name) and runs the command. Returns the
/// process exit status: 0 when the result is certified, 1 when it is not, 2 on error.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
                EXIT_ERROR
            } else {
                let _ = out.write_all(text.as_bytes());
                EXIT_CERTIFIED
            };
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}
