//! Command-line front end: argument parsing, experiment orchestration and
//! CSV/JSON emission.
//!
//! Exit codes: 0 on success, 1 on evaluation failures or non-convergence
//! (partial output is still written), 2 on usage errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{self, LipschitzClass, DEFAULT_RESOLUTION};
use crate::error::Error;
use crate::function::Function;
use crate::moments::{self, default_report_grid};
use crate::operator::{self, uniform_grid, PQParams, TruncationPolicy};
use crate::statistical::{self, korovkin_grid, SequenceScheme, DEFAULT_NS};

pub const SCHEMA_VERSION: u32 = 1;

/// Figure 1 parameters: `n = 3` with truncation levels 100 and 500.
pub const FIGURE1_N: u32 = 3;
pub const FIGURE1_PAIR: (f64, f64) = (0.95, 0.9);
pub const FIGURE1_LEVELS: [usize; 2] = [100, 500];
pub const FIGURE2_N: u32 = 10;
pub const FIGURE2_PAIRS: [(f64, f64); 3] = [(0.9, 0.85), (0.95, 0.9), (0.999, 0.995)];
pub const FIGURE_GRID_POINTS: usize = 201;

#[derive(Parser, Debug)]
#[command(name = "pqmkz", version, about = "(p,q)-Meyer-Koenig-Zeller operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate M_{n,p,q}(f; x) at a point or over a grid.
    Eval(EvalArgs),
    /// Raw and central moments with the moment-inequality slacks.
    Moments(GridCommand),
    /// Empirical error against the modulus-of-continuity bounds.
    Bounds(BoundsArgs),
    /// Truncated series identity sum_k w_k(x) = 1 over a grid.
    Identity(GridCommand),
    /// Plot-ready data for figure 1 (partial sums) or 2 (convergence).
    Figure(FigureArgs),
    /// Statistical Korovkin density tables along a parameter scheme.
    Stat(StatArgs),
}

#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(long, default_value_t = 10)]
    n: u32,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 0.9)]
    q: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<PQParams, Failure> {
        PQParams::from_parts(self.n, self.p, self.q).map_err(Failure::usage)
    }
}

#[derive(Args, Debug)]
struct PolicyArgs {
    /// Stop once the tail mass is at most this.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Hard cap on the number of series terms.
    #[arg(long, default_value_t = 100_000)]
    kmax: usize,
    /// Trusted bound on sup |f| used to certify the tail.
    #[arg(long = "sup-bound")]
    sup_bound: Option<f64>,
}

impl PolicyArgs {
    fn policy(&self) -> Result<TruncationPolicy, Failure> {
        let p = TruncationPolicy::new(self.tol, self.kmax).map_err(Failure::usage)?;
        match self.sup_bound {
            Some(b) => p.with_sup_bound(b).map_err(Failure::usage),
            None => Ok(p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file (a directory for `figure`); standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// Expression in x or a preset (paper_cubic, identity, one).
    #[arg(long = "fn", default_value = "one")]
    function: String,
    #[arg(long, conflicts_with = "grid")]
    x: Option<f64>,
    /// `N` points on [0, 1] or `N:a:b`.
    #[arg(long)]
    grid: Option<String>,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct GridCommand {
    #[command(flatten)]
    params: ParamArgs,
    /// `N` points on [0, 1] or `N:a:b`; defaults to 101 points on [0, 0.99] plus 1.
    #[arg(long)]
    grid: Option<String>,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long = "fn", default_value = "paper_cubic")]
    function: String,
    #[arg(long)]
    grid: Option<String>,
    /// Lattice size for the moduli of continuity.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: usize,
    /// Lipschitz exponent; requires --lip-M.
    #[arg(long, requires = "lip_m")]
    alpha: Option<f64>,
    /// Lipschitz constant; requires --alpha.
    #[arg(long = "lip-M", requires = "alpha")]
    lip_m: Option<f64>,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct FigureArgs {
    /// 1 or 2.
    id: u32,
    /// Overrides the figure's n.
    #[arg(long)]
    n: Option<u32>,
    /// Overrides the figure 1 pair.
    #[arg(long, requires = "q")]
    p: Option<f64>,
    #[arg(long, requires = "p")]
    q: Option<f64>,
    /// Overrides the x-grid.
    #[arg(long)]
    grid: Option<String>,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct StatArgs {
    /// `paper`, or two expressions in n for p_n and q_n separated by a comma.
    #[arg(long, default_value = "paper")]
    scheme: String,
    #[arg(long = "fn", default_value = "paper_cubic")]
    function: String,
    #[arg(long, default_value_t = 0.2)]
    eps: f64,
    /// Comma-separated increasing list.
    #[arg(long = "Ns", value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[command(flatten)]
    policy: PolicyArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: e.to_string(),
        }
    }

    fn eval(e: impl std::fmt::Display) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }

    fn classify(e: Error) -> Self {
        match e {
            Error::Domain { .. } | Error::OracleCap(_) => Self::eval(e),
            _ => Self::usage(e),
        }
    }
}

/// Result of a command whose output was written: warnings turn into exit 1.
#[derive(Default)]
struct Outcome {
    warnings: Vec<String>,
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Eval(a) => run_eval(a, stdout),
        Command::Moments(a) => run_moments(a, stdout),
        Command::Bounds(a) => run_bounds(a, stdout, stderr),
        Command::Identity(a) => run_identity(a, stdout),
        Command::Figure(a) => run_figure(a, stdout),
        Command::Stat(a) => run_stat(a, stdout),
    };
    match result {
        Ok(outcome) if outcome.warnings.is_empty() => 0,
        Ok(outcome) => {
            for w in outcome.warnings {
                let _ = writeln!(stderr, "pqmkz: {w}");
            }
            1
        }
        Err(f) => {
            let _ = writeln!(stderr, "pqmkz: {}", f.message);
            f.code
        }
    }
}

/// Parses `N` or `N:a:b` into a uniform grid inside `[0, 1]`.
pub fn parse_grid(spec: &str) -> crate::Result<Vec<f64>> {
    let bad = |why: &str| Error::Invalid(format!("bad grid `{spec}`: {why}"));
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let (count, lo, hi) = match parts.as_slice() {
        [n] => (*n, "0", "1"),
        [n, a, b] => (*n, *a, *b),
        _ => return Err(bad("expected N or N:a:b")),
    };
    let count: usize = count
        .parse()
        .map_err(|_| bad("point count is not a positive integer"))?;
    let lo: f64 = lo.parse().map_err(|_| bad("lower end is not a number"))?;
    let hi: f64 = hi.parse().map_err(|_| bad("upper end is not a number"))?;
    if count == 0 {
        return Err(bad("need at least one point"));
    }
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(bad("range must satisfy 0 <= a <= b <= 1"));
    }
    Ok(uniform_grid(count, lo, hi))
}

fn grid_or(spec: &Option<String>, default: impl FnOnce() -> Vec<f64>) -> Result<Vec<f64>, Failure> {
    match spec {
        Some(s) => parse_grid(s).map_err(Failure::usage),
        None => Ok(default()),
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    command: &'a str,
    #[serde(flatten)]
    body: T,
}

fn json<T: Serialize>(command: &str, body: T) -> String {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        command,
        body,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("report types serialize");
    s.push('\n');
    s
}

fn emit(text: &str, out: &Option<PathBuf>, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => write_file(path, text),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::eval(format!("writing output: {e}"))),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::eval(format!("writing {}: {e}", path.display())))
}

#[derive(Serialize)]
struct ParamsInfo {
    n: u32,
    p: f64,
    q: f64,
}

impl From<PQParams> for ParamsInfo {
    fn from(pp: PQParams) -> Self {
        Self {
            n: pp.n(),
            p: pp.pq().p(),
            q: pp.pq().q(),
        }
    }
}

#[derive(Serialize)]
struct EvalRow {
    x: f64,
    value: Option<f64>,
    f_x: Option<f64>,
    abs_error: Option<f64>,
    tail_mass: Option<f64>,
    terms: Option<usize>,
    error_bound: Option<f64>,
    converged: bool,
    heuristic_bound: bool,
    error: Option<String>,
}

const EVAL_HEADER: &str = "x,value,f_x,abs_error,tail_mass,terms,error_bound,converged";

impl EvalRow {
    fn csv(&self, s: &mut String) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(self.x),
            opt_num(self.value),
            opt_num(self.f_x),
            opt_num(self.abs_error),
            opt_num(self.tail_mass),
            self.terms.map(|t| t.to_string()).unwrap_or_default(),
            opt_num(self.error_bound),
            self.converged
        );
    }
}

fn eval_rows(
    params: PQParams,
    f: &Function,
    grid: &[f64],
    policy: &TruncationPolicy,
    outcome: &mut Outcome,
) -> Vec<EvalRow> {
    let results = operator::evaluate_grid(params, f, grid, policy);
    grid.iter()
        .zip(results)
        .map(|(&x, r)| {
            let fx = f.eval(x);
            match (r, fx) {
                (Ok(o), Ok(fx)) => {
                    if !o.converged {
                        outcome.warnings.push(format!(
                            "x = {x}: not converged after {} terms (tail mass {:e})",
                            o.terms_used, o.tail_mass
                        ));
                    }
                    EvalRow {
                        x,
                        value: Some(o.value),
                        f_x: Some(fx),
                        abs_error: Some((o.value - fx).abs()),
                        tail_mass: Some(o.tail_mass),
                        terms: Some(o.terms_used),
                        error_bound: Some(o.error_bound),
                        converged: o.converged,
                        heuristic_bound: o.heuristic_bound,
                        error: None,
                    }
                }
                (Err(e), _) | (_, Err(e)) => {
                    outcome.warnings.push(format!("x = {x}: {e}"));
                    EvalRow {
                        x,
                        value: None,
                        f_x: None,
                        abs_error: None,
                        tail_mass: None,
                        terms: None,
                        error_bound: None,
                        converged: false,
                        heuristic_bound: false,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect()
}

fn render_eval(
    command: &str,
    params: PQParams,
    f: &Function,
    policy: &TruncationPolicy,
    rows: &[EvalRow],
    format: Format,
) -> String {
    match format {
        Format::Csv => {
            let mut s = String::from(EVAL_HEADER);
            s.push('\n');
            for r in rows {
                r.csv(&mut s);
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                params: ParamsInfo,
                function: &'a str,
                policy: &'a TruncationPolicy,
                rows: &'a [EvalRow],
            }
            json(
                command,
                Body {
                    params: params.into(),
                    function: f.label(),
                    policy,
                    rows,
                },
            )
        }
    }
}

fn run_eval(a: EvalArgs, stdout: &mut dyn Write) -> Result<Outcome, Failure> {
    let params = a.params.params()?;
    let policy = a.policy.policy()?;
    let f = Function::parse(&a.function).map_err(Failure::usage)?;
    let grid = match a.x {
        Some(x) if (0.0..=1.0).contains(&x) => vec![x],
        Some(x) => return Err(Failure::usage(format!("x = {x} is outside [0, 1]"))),
        None => grid_or(&a.grid, || uniform_grid(101, 0.0, 1.0))?,
    };
    let mut outcome = Outcome::default();
    let rows = eval_rows(params, &f, &grid, &policy, &mut outcome);
    let text = render_eval("eval", params, &f, &policy, &rows, a.output.format);
    emit(&text, &a.output.out, stdout)?;
    Ok(outcome)
}

fn run_moments(a: GridCommand, stdout: &mut dyn Write) -> Result<Outcome, Failure> {
    let params = a.params.params()?;
    let policy = a.policy.policy()?;
    let grid = grid_or(&a.grid, default_report_grid)?;
    let mut outcome = Outcome::default();
    let mut reports = Vec::with_capacity(grid.len());
    for (x, r) in grid
        .iter()
        .zip(moments::moment_bounds_report(params, &grid, &policy))
    {
        match r {
            Ok(r) => {
                if !r.converged() {
                    outcome
                        .warnings
                        .push(format!("x = {x}: moments not converged"));
                }
                reports.push(r);
            }
            Err(e) => outcome.warnings.push(format!("x = {x}: {e}")),
        }
    }
    let text = match a.output.format {
        Format::Csv => {
            let mut s = String::from(
                "x,m0,m1,m2,central2,l1_lower_slack,l1_upper_slack,l2_slack,tail_mass_max,\
                 m1_defect,l1_upper_alt_slack,l2_bound,converged\n",
            );
            for r in &reports {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    num(r.x),
                    num(r.m0.value),
                    num(r.m1.value),
                    num(r.m2.value),
                    num(r.central2),
                    num(r.slack[0]),
                    num(r.slack[1]),
                    num(r.slack[2]),
                    num(r.tail_mass_max()),
                    num(r.first_moment_defect),
                    num(r.upper_alt_slack),
                    num(r.central_bound),
                    r.converged()
                );
            }
            s
        }
        Format::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                params: ParamsInfo,
                policy: &'a TruncationPolicy,
                negative_central_bound_points: usize,
                rows: &'a [moments::MomentReport],
            }
            json(
                "moments",
                Body {
                    params: params.into(),
                    policy: &policy,
                    negative_central_bound_points: reports
                        .iter()
                        .filter(|r| r.central_bound < 0.0)
                        .count(),
                    rows: &reports,
                },
            )
        }
    };
    emit(&text, &a.output.out, stdout)?;
    Ok(outcome)
}

fn run_bounds(
    a: BoundsArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<Outcome, Failure> {
    let params = a.params.params()?;
    let policy = a.policy.policy()?;
    let f = Function::parse(&a.function).map_err(Failure::usage)?;
    let grid = grid_or(&a.grid, default_report_grid)?;
    let lipschitz = match (a.lip_m, a.alpha) {
        (Some(m), Some(alpha)) => Some(LipschitzClass::new(m, alpha).map_err(Failure::usage)?),
        _ => None,
    };
    if a.resolution < 2 {
        return Err(Failure::usage("--resolution must be at least 2"));
    }
    let report = bounds::bound_report(params, &f, &grid, &policy, a.resolution, lipschitz)
        .map_err(Failure::classify)?;
    let mut outcome = Outcome::default();
    if report.rows.iter().any(|r| !r.converged) {
        outcome
            .warnings
            .push("some grid points did not converge".into());
    }
    let text = match a.output.format {
        Format::Csv => {
            let mut s = format!("{EVAL_HEADER},delta_n_sq,omega2,lipschitz_bound\n");
            for r in &report.rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    num(r.x),
                    num(r.value),
                    num(r.f_x),
                    num(r.abs_error),
                    num(r.tail_mass),
                    r.terms,
                    num(r.error_bound),
                    r.converged,
                    num(r.delta_n_sq),
                    opt_num(r.omega2),
                    opt_num(r.lipschitz_bound)
                );
            }
            let _ = writeln!(
                stderr,
                "empirical_sup_error={} max_error_bound={} uniform_bound={} within={} omega2_sup={} \
                 negative_delta_points={}",
                num(report.empirical_sup_error),
                num(report.max_error_bound),
                num(report.uniform_bound),
                report.within_uniform_bound,
                num(report.omega2_sup),
                report.negative_delta_points
            );
            s
        }
        Format::Json => json("bounds", &report),
    };
    emit(&text, &a.output.out, stdout)?;
    Ok(outcome)
}

fn run_identity(a: GridCommand, stdout: &mut dyn Write) -> Result<Outcome, Failure> {
    let params = a.params.params()?;
    let policy = a
        .policy
        .policy()?
        .with_sup_bound(1.0)
        .map_err(Failure::usage)?;
    let grid = grid_or(&a.grid, default_report_grid)?;
    let mut outcome = Outcome::default();
    let rows = eval_rows(params, &Function::one(), &grid, &policy, &mut outcome);
    let text = match a.output.format {
        Format::Csv => {
            let mut s =
                String::from("x,partial_sum,defect,tail_mass,terms,error_bound,converged\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    num(r.x),
                    opt_num(r.value),
                    opt_num(r.abs_error),
                    opt_num(r.tail_mass),
                    r.terms.map(|t| t.to_string()).unwrap_or_default(),
                    opt_num(r.error_bound),
                    r.converged
                );
            }
            s
        }
        Format::Json => render_eval(
            "identity",
            params,
            &Function::one(),
            &policy,
            &rows,
            Format::Json,
        ),
    };
    emit(&text, &a.output.out, stdout)?;
    Ok(outcome)
}

#[derive(Serialize)]
struct PartialSumRow {
    x: f64,
    levels: Vec<PartialSumLevel>,
}

#[derive(Serialize)]
struct PartialSumLevel {
    k: usize,
    partial_sum: f64,
    tail_mass: f64,
    converged: bool,
}

/// Partial sums `S_K(x)` of `M(1; x)` at each level `K`. At `x = 1` the
/// operator takes its endpoint value, so every level reports 1.
fn partial_sum_rows(
    params: PQParams,
    grid: &[f64],
    levels: &[usize],
    tol: f64,
) -> crate::Result<Vec<PartialSumRow>> {
    grid.iter()
        .map(|&x| {
            let levels = levels
                .iter()
                .map(|&k| {
                    let s = if x == 1.0 {
                        1.0
                    } else {
                        operator::partial_sum(params, x, k)?
                    };
                    let tail = (1.0 - s).max(0.0);
                    Ok(PartialSumLevel {
                        k,
                        partial_sum: s,
                        tail_mass: tail,
                        converged: tail <= tol,
                    })
                })
                .collect::<crate::Result<Vec<_>>>()?;
            Ok(PartialSumRow { x, levels })
        })
        .collect()
}

fn run_figure(a: FigureArgs, stdout: &mut dyn Write) -> Result<Outcome, Failure> {
    let policy = a.policy.policy()?;
    let grid = grid_or(&a.grid, || uniform_grid(FIGURE_GRID_POINTS, 0.0, 1.0))?;
    let dir = a.output.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let ext = a.output.format.extension();
    let mut outcome = Outcome::default();
    let mut written = Vec::new();
    match a.id {
        1 => {
            let (p, q) = match (a.p, a.q) {
                (Some(p), Some(q)) => (p, q),
                _ => FIGURE1_PAIR,
            };
            let params =
                PQParams::from_parts(a.n.unwrap_or(FIGURE1_N), p, q).map_err(Failure::usage)?;
            let rows = partial_sum_rows(params, &grid, &FIGURE1_LEVELS, policy.tail_tol)
                .map_err(Failure::classify)?;
            let text = match a.output.format {
                Format::Csv => {
                    let mut s = String::from("x");
                    for k in FIGURE1_LEVELS {
                        let _ = write!(s, ",s{k},tail_mass_{k},converged_{k}");
                    }
                    s.push('\n');
                    for r in &rows {
                        s.push_str(&num(r.x));
                        for l in &r.levels {
                            let _ = write!(
                                s,
                                ",{},{},{}",
                                num(l.partial_sum),
                                num(l.tail_mass),
                                l.converged
                            );
                        }
                        s.push('\n');
                    }
                    s
                }
                Format::Json => {
                    #[derive(Serialize)]
                    struct Body<'a> {
                        figure: u32,
                        params: ParamsInfo,
                        rows: &'a [PartialSumRow],
                    }
                    json(
                        "figure",
                        Body {
                            figure: 1,
                            params: params.into(),
                            rows: &rows,
                        },
                    )
                }
            };
            let path = dir.join(format!("figure1.{ext}"));
            write_file(&path, &text)?;
            written.push(path);
        }
        2 => {
            if a.p.is_some() {
                return Err(Failure::usage(
                    "figure 2 uses its three preset pairs; --p/--q apply to figure 1",
                ));
            }
            let n = a.n.unwrap_or(FIGURE2_N);
            let f = Function::cubic();
            #[derive(Serialize)]
            struct Summary {
                n: u32,
                p: f64,
                q: f64,
                sup_gap: f64,
                max_error_bound: f64,
                converged: bool,
            }
            let mut summary = Vec::new();
            for (p, q) in FIGURE2_PAIRS {
                let params = PQParams::from_parts(n, p, q).map_err(Failure::usage)?;
                let rows = eval_rows(params, &f, &grid, &policy, &mut outcome);
                let fold = |g: fn(&EvalRow) -> Option<f64>| {
                    rows.iter().filter_map(g).fold(0.0_f64, f64::max)
                };
                summary.push(Summary {
                    n,
                    p,
                    q,
                    sup_gap: fold(|r| r.abs_error),
                    max_error_bound: fold(|r| r.error_bound),
                    converged: rows.iter().all(|r| r.converged),
                });
                let path = dir.join(format!("figure2_p{p}_q{q}.{ext}"));
                write_file(
                    &path,
                    &render_eval("figure", params, &f, &policy, &rows, a.output.format),
                )?;
                written.push(path);
            }
            let text = match a.output.format {
                Format::Csv => {
                    let mut s = String::from("n,p,q,sup_gap,max_error_bound,converged\n");
                    for r in &summary {
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{},{}",
                            r.n,
                            num(r.p),
                            num(r.q),
                            num(r.sup_gap),
                            num(r.max_error_bound),
                            r.converged
                        );
                    }
                    s
                }
                Format::Json => {
                    #[derive(Serialize)]
                    struct Body<'a> {
                        figure: u32,
                        function: &'a str,
                        series: &'a [Summary],
                    }
                    json(
                        "figure",
                        Body {
                            figure: 2,
                            function: f.label(),
                            series: &summary,
                        },
                    )
                }
            };
            let path = dir.join(format!("figure2_summary.{ext}"));
            write_file(&path, &text)?;
            written.push(path);
        }
        other => {
            return Err(Failure::usage(format!(
                "unknown figure {other}; expected 1 or 2"
            )))
        }
    }
    let mut listing = String::new();
    for p in written {
        let _ = writeln!(listing, "{}", p.display());
    }
    stdout
        .write_all(listing.as_bytes())
        .map_err(|e| Failure::eval(format!("writing output: {e}")))?;
    Ok(outcome)
}

fn run_stat(a: StatArgs, stdout: &mut dyn Write) -> Result<Outcome, Failure> {
    let policy = a.policy.policy()?;
    let scheme = SequenceScheme::parse(&a.scheme).map_err(Failure::usage)?;
    let f = Function::parse(&a.function).map_err(Failure::usage)?;
    let ns = a.ns.clone().unwrap_or_else(|| DEFAULT_NS.to_vec());
    let report = statistical::st_korovkin_check(&scheme, &f, a.eps, &ns, &korovkin_grid(), &policy)
        .map_err(Failure::classify)?;
    let mut outcome = Outcome::default();
    let big_n = *ns.last().expect("validated nonempty");
    let below_start = (scheme.start() as usize - 1).min(big_n);
    for r in &report.reports {
        let failed = r.excluded.last().copied().unwrap_or(0) - below_start;
        if failed > 0 {
            outcome.warnings.push(format!(
                "{}: {failed} indices failed to evaluate and were excluded",
                r.function
            ));
        }
    }
    let text = match a.output.format {
        Format::Csv => {
            let mut s = String::from("function,N,count,density,excluded\n");
            for r in &report.reports {
                for i in 0..r.ns.len() {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{}",
                        csv_field(&r.function),
                        r.ns[i],
                        r.member_counts[i],
                        num(r.densities[i]),
                        r.excluded[i]
                    );
                }
            }
            s
        }
        Format::Json => json("stat", &report),
    };
    emit(&text, &a.output.out, stdout)?;
    Ok(outcome)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
