//! Command-line driver: argument parsing, configuration merging and file
//! output for single runs, cumulative runs, basin images and problem checks.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use broyden_core::basin::{basin_solver_options, render_basin, BasinError, GridSpec};
use broyden_core::diagnostics::metrics_from_trace;
use broyden_core::format::{sci, NumberStyle};
use broyden_core::harness::{
    cumulative_run, run_rng, single_run, uniform_symmetric, AcceptanceCriteria, B0Choice, CumulativeSummary,
    HarnessError, SeriesConfig, SmpParams,
};
use broyden_core::linalg::{PrecisionContext, Vector};
use broyden_core::problems::{registry_names, Problem};
use broyden_core::solvers::{Method, SolverOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EMPTY: i32 = 3;

pub const METRICS_HEADER: &str = "k,F_norm,u_norm,r,q,eps_prev,R,Q,delta,zeta,Lambda1,Lambda2,E_norm";

#[derive(Parser, Debug)]
#[command(
    name = "broyden-lab",
    version,
    about = "Quasi-Newton experiments near singular roots"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One seeded run; writes metrics.csv.
    Single(RunArgs),
    /// m seeded BMP runs with filtering; writes summary.csv.
    Cumulative(RunArgs),
    /// Classify a grid of starting points; writes basin.ppm and basin.csv.
    Basin(BasinArgs),
    /// Print the registered problems.
    ListProblems,
    /// Check the second-derivative assumption and the analytic Jacobian.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum B0Arg {
    Jacobian,
    BroydenUpdate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Bm,
    Bmp,
    Smp,
    Newton,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON file with series settings; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum)]
    b0_mode: Option<B0Arg>,
    #[arg(long, value_enum, default_value = "bmp")]
    method: MethodArg,
    /// Stop when ‖F‖₂ ≤ 10^(−tol).
    #[arg(long)]
    tol: Option<u32>,
    /// Working precision in decimal digits.
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run index within the seeded series.
    #[arg(long, default_value_t = 0)]
    run: u64,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.5)]
    order_alpha: f64,
    #[arg(long)]
    workers: Option<usize>,
    /// Write every digit instead of six significant ones.
    #[arg(long)]
    full_precision: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BasinArgs {
    #[arg(long, default_value = "example1")]
    problem: String,
    #[arg(long, default_value_t = 101)]
    grid_res: usize,
    #[arg(long, default_value = "1e-1")]
    half_width: String,
    #[arg(long)]
    tol: Option<u32>,
    #[arg(long)]
    precision: Option<u32>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    full_precision: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 100)]
    precision: u32,
    /// Step of the central second difference.
    #[arg(long, default_value = "1e-20")]
    h: String,
}

enum CliError {
    Config(String),
    Empty(String),
    Failure(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Empty(_) => EXIT_EMPTY,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Empty(m) | CliError::Failure(m) => m,
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::InvalidConfig(_) | HarnessError::Problem(_) | HarnessError::Solver(_) => {
                CliError::Config(e.to_string())
            }
            HarnessError::EmptyAcceptedSet { .. } => CliError::Empty(e.to_string()),
            HarnessError::Linalg(_) => CliError::Failure(e.to_string()),
        }
    }
}

impl From<BasinError> for CliError {
    fn from(e: BasinError) -> Self {
        CliError::Config(e.to_string())
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code. Diagnostics go to stderr as a single line.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let text = e.to_string();
            let line = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments");
            eprintln!("{}", line.trim());
            return EXIT_CONFIG;
        }
    };
    let result = match cli.command {
        Command::Single(args) => cmd_single(&args),
        Command::Cumulative(args) => cmd_cumulative(&args),
        Command::Basin(args) => cmd_basin(&args),
        Command::ListProblems => {
            for name in registry_names() {
                println!("{name}");
            }
            Ok(())
        }
        Command::Verify(args) => cmd_verify(&args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn series_config(args: &RunArgs) -> Result<SeriesConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<SeriesConfig>(&text)
                .map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))?
        }
        None => {
            let problem = args
                .problem
                .clone()
                .ok_or_else(|| CliError::Config("--problem is required without --config".into()))?;
            let alpha = args
                .alpha
                .ok_or_else(|| CliError::Config("--alpha is required without --config".into()))?;
            SeriesConfig::new(&problem, alpha, 0.0)
        }
    };
    if let Some(p) = &args.problem {
        cfg.problem = p.clone();
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(b) = args.beta {
        cfg.beta = b;
    }
    if let Some(mode) = args.b0_mode {
        cfg.b0_mode = match mode {
            B0Arg::Jacobian => B0Choice::Jacobian,
            B0Arg::BroydenUpdate => B0Choice::BroydenUpdate,
        };
    }
    if let Some(t) = args.tol {
        cfg.tol_exponent = t;
    }
    if let Some(p) = args.precision {
        cfg.precision = p;
    }
    if let Some(k) = args.max_iter {
        cfg.max_iter = k;
    }
    if let Some(s) = args.seed {
        cfg.rng_seed = s;
    }
    if let Some(m) = args.m {
        cfg.m = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn style(full: bool, ctx: &PrecisionContext) -> NumberStyle {
    if full {
        NumberStyle::Full {
            digits: ctx.decimal_digits() as usize,
        }
    } else {
        NumberStyle::Display
    }
}

fn write_outputs(dir: &Path, files: &[(&str, &[u8])]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Failure(format!("cannot create {}: {e}", dir.display())))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_single(args: &RunArgs) -> Result<(), CliError> {
    let cfg = series_config(args)?;
    let method = match args.method {
        MethodArg::Bm => Method::Broyden,
        MethodArg::Bmp => Method::BroydenPreceded,
        MethodArg::Smp => Method::Shamanskii,
        MethodArg::Newton => Method::Newton,
    };
    let smp = SmpParams {
        c: args.c,
        order_alpha: args.order_alpha,
    };
    if !(smp.c > 0.0 && smp.order_alpha > 0.0 && smp.order_alpha <= 1.0) {
        return Err(CliError::Config(
            "--C must be positive and --order-alpha in (0, 1]".into(),
        ));
    }
    let opts = cfg.solver_options()?;
    let (p, rec) = single_run(&cfg, method, smp, args.run, &opts)?;
    let rows = metrics_from_trace(&rec, &p);
    let st = style(args.full_precision, &opts.precision);
    let mut csv = format!("{METRICS_HEADER}\n");
    for r in &rows {
        let cols = [
            Some(&r.f_norm),
            r.err.as_ref(),
            r.r.as_ref(),
            r.q.as_ref(),
            r.eps_prev.as_ref(),
            r.big_r.as_ref(),
            r.big_q.as_ref(),
            r.delta.as_ref(),
            r.zeta.as_ref(),
            r.lambda1(),
            r.lambda2(),
            r.e_norm.as_ref(),
        ];
        let _ = write!(csv, "{}", r.k);
        for c in cols {
            let _ = write!(csv, ",{}", st.render_opt(c));
        }
        csv.push('\n');
    }
    write_outputs(&args.out, &[("metrics.csv", csv.as_bytes())])?;
    println!(
        "{} {}: {:?} after {} iterations, final ||F|| {}",
        p.name(),
        method.label(),
        rec.status,
        rec.kbar,
        sci(rec.final_f_norm(), 6)
    );
    Ok(())
}

fn cmd_cumulative(args: &RunArgs) -> Result<(), CliError> {
    let cfg = series_config(args)?;
    let ctx = cfg.context()?;
    let kind = Problem::by_name(&cfg.problem, &ctx).map_err(HarnessError::from)?.kind();
    let crit = AcceptanceCriteria::for_problem(kind);
    let summary = cumulative_run(&cfg, &crit, args.workers)?;
    let csv = format!(
        "{}\n{}\n",
        CumulativeSummary::CSV_HEADER,
        summary.csv_row(style(args.full_precision, &ctx))
    );
    write_outputs(&args.out, &[("summary.csv", csv.as_bytes())])?;
    println!(
        "{}: {} accepted, {} removed, iterations {}..{}",
        cfg.problem,
        summary.accepted,
        summary.rem(),
        summary.it_minus,
        summary.it_plus
    );
    Ok(())
}

fn cmd_basin(args: &BasinArgs) -> Result<(), CliError> {
    let defaults = basin_solver_options();
    let ctx = match args.precision {
        Some(d) => PrecisionContext::with_digits(d).map_err(|e| CliError::Config(e.to_string()))?,
        None => defaults.precision,
    };
    let opts = SolverOptions::new(ctx, args.tol.unwrap_or(defaults.tol_exponent))
        .map_err(|e| CliError::Config(e.to_string()))?
        .with_max_iter(args.max_iter.unwrap_or(defaults.max_iter))
        .with_matrix_error(false);
    let p = Problem::by_name(&args.problem, &ctx).map_err(|e| CliError::Config(e.to_string()))?;
    let half_width = ctx
        .parse(&args.half_width)
        .map_err(|e| CliError::Config(format!("--half-width: {e}")))?;
    let grid = GridSpec::centered(half_width, args.grid_res, &ctx)?;
    let crit = AcceptanceCriteria::for_problem(p.kind());
    let img = render_basin(&p, &grid, &crit, &opts, args.workers)?;
    let csv = img.csv(style(args.full_precision, &ctx));
    write_outputs(&args.out, &[("basin.ppm", &img.ppm()), ("basin.csv", csv.as_bytes())])?;
    use broyden_core::basin::Classification::*;
    println!(
        "{}x{} grid: in-band {:.4}, out-of-band {:.4}, no-convergence {:.4}",
        args.grid_res,
        args.grid_res,
        img.fraction(InBand),
        img.fraction(OutOfBand),
        img.fraction(NoConvergence)
    );
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let ctx = PrecisionContext::with_digits(args.precision).map_err(|e| CliError::Config(e.to_string()))?;
    let p = Problem::by_name(&args.problem, &ctx).map_err(|e| CliError::Config(e.to_string()))?;
    let h = ctx.parse(&args.h).map_err(|e| CliError::Config(format!("--h: {e}")))?;
    println!("problem {} (n = {})", p.name(), p.n());
    if p.phi().is_some() {
        let a2 = p.verify_a2(&h).map_err(|e| CliError::Config(e.to_string()))?;
        let entries: Vec<String> = (0..a2.len()).map(|i| sci(&a2[i], 6)).collect();
        println!("P_N F''(0)(phi,phi) = ({})", entries.join(", "));
        println!("||P_N F''(0)(phi,phi)|| = {}", sci(&a2.norm2(), 6));
    } else {
        println!("||P_N F''(0)(phi,phi)|| = n/a (regular root)");
    }
    let tol = p.jacobian_fd_tolerance();
    let mut worst = ctx.zero();
    let mut rng = run_rng(0, 0);
    for _ in 0..8 {
        let coords = (0..p.n()).map(|_| uniform_symmetric(&mut rng, &ctx) / 2u32).collect();
        let mismatch = p.jacobian_fd_mismatch(&Vector::from_reals(coords, &ctx));
        if mismatch > worst {
            worst = mismatch;
        }
    }
    let ok = worst <= tol;
    println!(
        "jacobian finite-difference mismatch {} (tolerance {}): {}",
        sci(&worst, 6),
        sci(&tol, 6),
        if ok { "ok" } else { "FAILED" }
    );
    if ok {
        Ok(())
    } else {
        Err(CliError::Failure(
            "analytic Jacobian disagrees with finite differences".into(),
        ))
    }
}
