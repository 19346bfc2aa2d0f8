//! Command-line front end for the spintree toolkit.
//!
//! Subcommands: `verify`, `fixed-points`, `sweep`, `sample`, `dlr-check`,
//! `apply`. Every run echoes its resolved configuration into a comment
//! header so outputs are reproducible from their own first lines. Flags
//! may be defaulted from a `key=value` config file (`--config`); explicit
//! flags always win.
//!
//! Exit codes: 0 success (claims verified), 1 usage or validation error,
//! 2 numerical certification failure, 3 claim mismatch.

mod config;
mod output;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use spintree::bifurcation::{refine_threshold, sweep, SweepMethod};
use spintree::hammerstein::{
    apply_hammerstein, hammerstein_residual, ClosedFormDensity, DensityRef, SampledDensity,
};
use spintree::reduction::{
    analytic_fixed_points, enumerate_fixed_points, ClassifiedPoint, FixedPointReport,
    DEFAULT_DEDUPE_TOL, DEFAULT_GRID_DENSITY,
};
use spintree::treesim::{
    dlr_check, expected_basis, observable, sample_tree_jobs, write_samples_csv, BoundaryField,
    Observable, RootDegree, TreeSampler, TreeSpec,
};
use spintree::verify::{threshold, verify};
use spintree::ModelParams;

use config::ConfigMap;
use output::Resolved;

const EXIT_USAGE: u8 = 1;
const EXIT_CERTIFICATION: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

/// Discrepancy bound the `dlr-check` command certifies against.
const DLR_PASS_TOL: f64 = 1e-7;

#[derive(Parser)]
#[command(
    name = "spintree",
    version,
    about = "Translation-invariant Gibbs measures of a continuous-spin model on Cayley trees",
    after_help = "Outputs are plain text or CSV ('.' decimal, ',' separator, LF, 17 significant \
                  digits) and start with a '#' header echoing the resolved run configuration.\n\
                  Sweep CSV columns: theta,count_positive,x_1,y_1,... with positive branches \
                  ordered constant-one first, then descending y; absent branches are blank."
)]
struct Cli {
    /// Optional key=value file supplying defaults; explicit flags override it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for sweeps and sampling; results do not depend on it
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the Gibbs-measure count at (k, theta) against the proved value
    Verify {
        /// Branching order (2 or 3)
        #[arg(long)]
        k: Option<usize>,
        /// Coupling, 0 <= theta < 1
        #[arg(long)]
        theta: Option<f64>,
        /// Inverse temperature (recorded in headers; the kernel is beta-free)
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Enumerate and classify the fixed points of the plane map at (k, theta)
    FixedPoints {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// "analytic" (k = 2, 3; complete) or "newton" (any k; found set)
        #[arg(long)]
        method: Option<String>,
        /// "table" or "structured" (JSON)
        #[arg(long)]
        format: Option<String>,
        /// Newton multistart grid density per axis
        #[arg(long)]
        grid: Option<usize>,
        /// Newton root deduplication tolerance (sup norm)
        #[arg(long)]
        dedupe: Option<f64>,
        /// Write to a file instead of stdout
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Sweep the coupling, count measures per step, and bracket the transition
    Sweep {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        theta_min: Option<f64>,
        #[arg(long)]
        theta_max: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// "analytic" (k = 2, 3; rows independent) or "newton" (continuation)
        #[arg(long)]
        method: Option<String>,
        /// CSV output path (stdout when absent)
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Bisect the bracket and append a threshold_estimate line
        #[arg(long)]
        refine: bool,
        /// Bisection tolerance for --refine
        #[arg(long)]
        refine_tol: Option<f64>,
    },
    /// Draw tree-indexed Markov samples from a certified positive branch
    Sample {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        /// Positive branch index; 0 is the constant branch, then descending y
        #[arg(long)]
        branch: Option<usize>,
        /// Ball radius (1..=8)
        #[arg(long)]
        depth: Option<usize>,
        /// Number of samples
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Root convention: "full" (k+1 children) or "rooted" (k children)
        #[arg(long)]
        root_degree: Option<String>,
        /// Sample CSV output path (stdout when absent)
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Brute-force finite-volume consistency check of a branch
    DlrCheck {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        branch: Option<usize>,
        /// Volume depth (1 or 2; the spin count is capped)
        #[arg(long)]
        depth: Option<usize>,
        /// Tensor quadrature order per dimension (auto-reduced on big volumes)
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        root_degree: Option<String>,
    },
    /// Apply the order-k operator to a density supplied as t,value CSV
    Apply {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
        /// Input density CSV
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        /// Output CSV path (stdout when absent)
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Also print the sup fixed-point residual of the input density
        #[arg(long)]
        residual: bool,
    },
}

/// A failure that already knows its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<spintree::Error> for Failure {
    fn from(e: spintree::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(format!("io error: {e}"))
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CmdResult {
    let cfg = match &cli.config {
        Some(path) => ConfigMap::load(path).map_err(Failure::usage)?,
        None => ConfigMap::empty(),
    };
    let jobs = cfg.resolve("jobs", cli.jobs, 1)?;
    match cli.command {
        Command::Verify { k, theta, beta } => cmd_verify(&cfg, k, theta, beta),
        Command::FixedPoints {
            k,
            theta,
            beta,
            method,
            format,
            grid,
            dedupe,
            out,
        } => cmd_fixed_points(&cfg, k, theta, beta, method, format, grid, dedupe, out),
        Command::Sweep {
            k,
            theta_min,
            theta_max,
            step,
            method,
            out,
            refine,
            refine_tol,
        } => cmd_sweep(
            &cfg, k, theta_min, theta_max, step, method, out, refine, refine_tol, jobs,
        ),
        Command::Sample {
            k,
            theta,
            branch,
            depth,
            n,
            seed,
            root_degree,
            out,
        } => cmd_sample(&cfg, k, theta, branch, depth, n, seed, root_degree, out, jobs),
        Command::DlrCheck {
            k,
            theta,
            branch,
            depth,
            order,
            root_degree,
        } => cmd_dlr_check(&cfg, k, theta, branch, depth, order, root_degree),
        Command::Apply {
            k,
            theta,
            input,
            out,
            residual,
        } => cmd_apply(&cfg, k, theta, input, out, residual),
    }
}

fn model(cfg: &ConfigMap, k: Option<usize>, theta: Option<f64>, beta: Option<f64>) -> Result<ModelParams, Failure> {
    let k = cfg
        .resolve_required("k", k)
        .map_err(Failure::usage)?;
    let theta = cfg
        .resolve_required("theta", theta)
        .map_err(Failure::usage)?;
    let beta = cfg.resolve("beta", beta, 1.0)?;
    ModelParams::new(k, theta, beta).map_err(Failure::from)
}

fn parse_method(s: &str) -> Result<SweepMethod, Failure> {
    match s {
        "analytic" => Ok(SweepMethod::Analytic),
        "newton" => Ok(SweepMethod::Newton),
        other => Err(Failure::usage(format!(
            "unknown method `{other}` (expected analytic or newton)"
        ))),
    }
}

fn parse_root_degree(s: &str) -> Result<RootDegree, Failure> {
    match s {
        "full" | "k+1" => Ok(RootDegree::Full),
        "rooted" | "k" => Ok(RootDegree::Rooted),
        other => Err(Failure::usage(format!(
            "unknown root degree `{other}` (expected full or rooted)"
        ))),
    }
}

/// Picks the positive branch with the given index from a complete
/// enumeration: 0 is the constant branch, then descending y.
fn select_branch(params: &ModelParams, index: usize) -> Result<ClassifiedPoint, Failure> {
    let report = analytic_fixed_points(params)?;
    let positive = report.positive_points();
    positive.get(index).copied().ok_or_else(|| {
        Failure::usage(
            spintree::Error::NoSuchBranch {
                index,
                k: params.k(),
                theta: params.theta(),
                count: positive.len(),
            }
            .to_string(),
        )
    })
}

fn write_or_print(out: Option<&PathBuf>, body: &str) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            f.write_all(body.as_bytes())?;
            f.flush()?;
            Ok(())
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn cmd_verify(cfg: &ConfigMap, k: Option<usize>, theta: Option<f64>, beta: Option<f64>) -> CmdResult {
    let params = model(cfg, k, theta, beta)?;
    if !matches!(params.k(), 2 | 3) {
        return Err(Failure::usage(format!(
            "verify needs k in {{2, 3}}, got {}",
            params.k()
        )));
    }
    let resolved = Resolved::new()
        .with("k", params.k())
        .with("theta", params.theta())
        .with("beta", params.beta());
    for line in resolved.header() {
        println!("# {line}");
    }
    let v = verify(&params)?;
    println!(
        "# threshold: {} ({})",
        spintree::fmt_float(threshold(params.k())?),
        if params.theta() > threshold(params.k())? {
            "above: three measures expected"
        } else {
            "at or below: unique measure expected"
        }
    );
    print_points_table(&v.report);
    println!(
        "residuals: max |V_k(p)-p| = {:.3e}, max Hammerstein = {:.3e}",
        v.max_residual_vk, v.max_residual_hk
    );
    println!("{}", v.count_positive());
    if !v.residuals_ok {
        eprintln!("error: residual certification failed");
        return Ok(EXIT_CERTIFICATION);
    }
    if !v.count_ok {
        eprintln!(
            "error: count {} does not match predicted {}",
            v.count_positive(),
            v.expected_count
        );
        return Ok(EXIT_MISMATCH);
    }
    Ok(0)
}

fn print_points_table(report: &FixedPointReport) {
    println!(
        "{:>24} {:>24} {:>20} {:>13} {:>13}",
        "x", "y", "class", "residual_vk", "residual_hk"
    );
    for p in &report.points {
        println!(
            "{:>24} {:>24} {:>20} {:>13.3e} {:>13.3e}",
            spintree::fmt_float(p.x),
            spintree::fmt_float(p.y),
            p.class.as_str(),
            p.residual_vk,
            p.residual_hk
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_fixed_points(
    cfg: &ConfigMap,
    k: Option<usize>,
    theta: Option<f64>,
    beta: Option<f64>,
    method: Option<String>,
    format: Option<String>,
    grid: Option<usize>,
    dedupe: Option<f64>,
    out: Option<PathBuf>,
) -> CmdResult {
    let params = model(cfg, k, theta, beta)?;
    let method = cfg.resolve("method", method, "analytic".to_string())?;
    let format = cfg.resolve("format", format, "table".to_string())?;
    let grid = cfg.resolve("grid", grid, DEFAULT_GRID_DENSITY)?;
    let dedupe = cfg.resolve("dedupe", dedupe, DEFAULT_DEDUPE_TOL)?;
    let report = match parse_method(&method)? {
        SweepMethod::Analytic => analytic_fixed_points(&params)?,
        SweepMethod::Newton => enumerate_fixed_points(&params, grid, dedupe)?,
    };
    let resolved = Resolved::new()
        .with("k", params.k())
        .with("theta", params.theta())
        .with("beta", params.beta())
        .with("method", &method)
        .with("grid", grid)
        .with("dedupe", dedupe)
        .with("format", &format);
    let mut body = String::new();
    for line in resolved.header() {
        body.push_str(&format!("# {line}\n"));
    }
    match format.as_str() {
        "structured" => {
            body.push_str(&report.to_json());
            body.push('\n');
        }
        "table" => {
            use std::fmt::Write as _;
            let _ = writeln!(
                body,
                "{:>24} {:>24} {:>20} {:>13} {:>13}",
                "x", "y", "class", "residual_vk", "residual_hk"
            );
            for p in &report.points {
                let _ = writeln!(
                    body,
                    "{:>24} {:>24} {:>20} {:>13.3e} {:>13.3e}",
                    spintree::fmt_float(p.x),
                    spintree::fmt_float(p.y),
                    p.class.as_str(),
                    p.residual_vk,
                    p.residual_hk
                );
            }
            let _ = writeln!(
                body,
                "count_positive={} complete={} non_converged_starts={}",
                report.count_positive, report.complete, report.non_converged_starts
            );
        }
        other => {
            return Err(Failure::usage(format!(
                "unknown format `{other}` (expected table or structured)"
            )))
        }
    }
    write_or_print(out.as_ref(), &body)?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    cfg: &ConfigMap,
    k: Option<usize>,
    theta_min: Option<f64>,
    theta_max: Option<f64>,
    step: Option<f64>,
    method: Option<String>,
    out: Option<PathBuf>,
    refine: bool,
    refine_tol: Option<f64>,
    jobs: usize,
) -> CmdResult {
    let k = cfg.resolve_required("k", k).map_err(Failure::usage)?;
    let theta_min = cfg.resolve("theta-min", theta_min, 0.0)?;
    let default_max = 0.99;
    let theta_max = cfg.resolve("theta-max", theta_max, default_max)?;
    let step = cfg.resolve("step", step, 0.005)?;
    let method_name = cfg.resolve("method", method, "analytic".to_string())?;
    let refine_tol = cfg.resolve("refine-tol", refine_tol, 1e-6)?;
    let method = parse_method(&method_name)?;
    let base = ModelParams::new(k, theta_min.max(0.0), 1.0)?;
    let table = sweep(&base, theta_min, theta_max, step, method, jobs)?;

    let resolved = Resolved::new()
        .with("k", k)
        .with("theta-min", theta_min)
        .with("theta-max", theta_max)
        .with("step", step)
        .with("method", &method_name)
        .with("jobs", jobs)
        .with("refine", refine)
        .with("refine-tol", refine_tol);

    let mut summary = None;
    match table.threshold_bracket {
        Some((lo, hi)) => {
            println!(
                "threshold bracket: [{}, {}]",
                spintree::fmt_float(lo),
                spintree::fmt_float(hi)
            );
            if refine {
                let estimate = refine_threshold(&base, (lo, hi), refine_tol)?;
                let conjectural = !matches!(k, 2 | 3);
                let line = if conjectural {
                    format!(
                        "threshold_estimate={} (conjectural)",
                        spintree::fmt_float(estimate)
                    )
                } else {
                    format!("threshold_estimate={}", spintree::fmt_float(estimate))
                };
                println!("{line}");
                summary = Some(line);
            }
        }
        None => println!("threshold bracket: none (no count jump in range)"),
    }

    let mut buf = Vec::new();
    table
        .write_csv(&mut buf, &resolved.header(), summary.as_deref())
        .map_err(Failure::from)?;
    write_or_print(out.as_ref(), &String::from_utf8(buf).expect("utf8 csv"))?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    cfg: &ConfigMap,
    k: Option<usize>,
    theta: Option<f64>,
    branch: Option<usize>,
    depth: Option<usize>,
    n: Option<usize>,
    seed: Option<u64>,
    root_degree: Option<String>,
    out: Option<PathBuf>,
    jobs: usize,
) -> CmdResult {
    let params = model(cfg, k, theta, None)?;
    let branch = cfg.resolve("branch", branch, 0)?;
    let depth = cfg.resolve("depth", depth, 3)?;
    let n = cfg.resolve("n", n, 10_000)?;
    let seed = cfg.resolve("seed", seed, 0u64)?;
    let degree_name = cfg.resolve("root-degree", root_degree, "full".to_string())?;
    let degree = parse_root_degree(&degree_name)?;

    let point = select_branch(&params, branch)?;
    let field = BoundaryField::new(ClosedFormDensity::new(point.x, point.y, params))?;
    let spec = TreeSpec::new(depth, params.k(), degree)?;
    let sampler = TreeSampler::new(&field, &spec)?;
    let samples = sample_tree_jobs(&field, &spec, seed, n, jobs)?;

    let resolved = Resolved::new()
        .with("k", params.k())
        .with("theta", params.theta())
        .with("branch", branch)
        .with("branch-x", spintree::fmt_float(point.x))
        .with("branch-y", spintree::fmt_float(point.y))
        .with("depth", depth)
        .with("n", n)
        .with("seed", seed)
        .with("root-degree", &degree_name)
        .with("jobs", jobs);

    let mut buf = Vec::new();
    write_samples_csv(&mut buf, sampler.topology(), &samples, &resolved.header())
        .map_err(Failure::from)?;
    write_or_print(out.as_ref(), &String::from_utf8(buf).expect("utf8 csv"))?;

    // Observable summary: name,estimate,std_error.
    for which in [Observable::MeanSpin, Observable::MeanBasis] {
        let est = observable(&samples, which)?;
        println!(
            "{},{},{}",
            which.name(),
            spintree::fmt_float(est.estimate),
            est.std_error
                .map(spintree::fmt_float)
                .unwrap_or_else(|| "undefined".to_string())
        );
    }
    println!(
        "# quadrature mean_basis = {}",
        spintree::fmt_float(expected_basis(&field, degree)?)
    );
    Ok(0)
}

fn cmd_dlr_check(
    cfg: &ConfigMap,
    k: Option<usize>,
    theta: Option<f64>,
    branch: Option<usize>,
    depth: Option<usize>,
    order: Option<usize>,
    root_degree: Option<String>,
) -> CmdResult {
    let params = model(cfg, k, theta, None)?;
    let branch = cfg.resolve("branch", branch, 0)?;
    let depth = cfg.resolve("depth", depth, 1)?;
    let order = cfg.resolve("order", order, 32)?;
    let degree_name = cfg.resolve("root-degree", root_degree, "full".to_string())?;
    let degree = parse_root_degree(&degree_name)?;

    let point = select_branch(&params, branch)?;
    let field = BoundaryField::new(ClosedFormDensity::new(point.x, point.y, params))?;
    let spec = TreeSpec::new(depth, params.k(), degree)?;

    let resolved = Resolved::new()
        .with("k", params.k())
        .with("theta", params.theta())
        .with("branch", branch)
        .with("depth", depth)
        .with("order", order)
        .with("root-degree", &degree_name);
    for line in resolved.header() {
        println!("# {line}");
    }

    let report = dlr_check(&field, &spec, order)?;
    println!(
        "compatibility_discrepancy={}",
        spintree::fmt_float(report.compatibility_discrepancy)
    );
    println!(
        "markov_discrepancy={}",
        spintree::fmt_float(report.markov_discrepancy)
    );
    println!(
        "volume_spins={} effective_order={}",
        report.volume_spins, report.effective_order
    );
    if report.compatibility_discrepancy < DLR_PASS_TOL && report.markov_discrepancy < DLR_PASS_TOL
    {
        println!("status=pass (both below {DLR_PASS_TOL:e})");
        Ok(0)
    } else {
        eprintln!("error: discrepancy at or above {DLR_PASS_TOL:e}");
        Ok(EXIT_CERTIFICATION)
    }
}

fn cmd_apply(
    cfg: &ConfigMap,
    k: Option<usize>,
    theta: Option<f64>,
    input: Option<PathBuf>,
    out: Option<PathBuf>,
    residual: bool,
) -> CmdResult {
    let params = model(cfg, k, theta, None)?;
    let input = input
        .or_else(|| cfg.get_path("input"))
        .ok_or_else(|| Failure::usage("missing --input density CSV"))?;
    let density = SampledDensity::read_csv(BufReader::new(File::open(&input)?))?;
    let values: Vec<f64> = density
        .grid()
        .iter()
        .map(|&t| apply_hammerstein(DensityRef::Sampled(&params, &density), t))
        .collect::<spintree::Result<_>>()?;
    let image = SampledDensity::new(density.grid().to_vec(), values)?;

    let resolved = Resolved::new()
        .with("k", params.k())
        .with("theta", params.theta())
        .with("input", input.display())
        .with("grid", density.len());
    let mut buf = Vec::new();
    image
        .write_csv(&mut buf, &resolved.header())
        .map_err(Failure::from)?;
    write_or_print(out.as_ref(), &String::from_utf8(buf).expect("utf8 csv"))?;
    if residual {
        let r = hammerstein_residual(DensityRef::Sampled(&params, &density), density.len())?;
        println!("residual={}", spintree::fmt_float(r));
    }
    Ok(0)
}
