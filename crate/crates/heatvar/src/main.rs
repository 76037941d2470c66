//! Command-line front end: exact simulation, covariance dumps, asymptotic
//! variance evaluation, estimation from increment CSVs, and Monte Carlo
//! CLT verification. Options come from flags and/or a JSON config file;
//! flags override the file. Every JSON output embeds the resolved config.

use clap::{Args, Parser, Subcommand};
use heatvar::asymptotics;
use heatvar::cov::{self, GridSpec, ModelParams};
use heatvar::montecarlo::{self, MCConfig};
use heatvar::sampler::{self, Seed};
use heatvar::stats::{self, Known, PVResult};
use heatvar::{Error, Power};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "heatvar", version, about = "Exact simulation and inference for the discretely observed stochastic heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample one exact increment field and write it as CSV
    Simulate(Opts),
    /// Write the full grid covariance matrix as CSV
    Cov(Opts),
    /// Evaluate the asymptotic variance constants as JSON
    Asymvar(Opts),
    /// Estimate parameters from an increments CSV, writing JSON
    Estimate(Opts),
    /// Monte Carlo verification of the CLT, writing a JSON report
    McClt(Opts),
}

/// One shared option set; each subcommand validates the subset it needs.
#[derive(Debug, Args, Default, Clone)]
struct Opts {
    /// Number of time steps
    #[arg(long)]
    n: Option<usize>,
    /// Number of spatial points (uniform spacing, with --dx)
    #[arg(long)]
    m: Option<usize>,
    /// Time step
    #[arg(long = "delta-n")]
    delta_n: Option<f64>,
    /// Uniform spatial spacing (with --m)
    #[arg(long, conflicts_with = "xs")]
    dx: Option<f64>,
    /// Explicit comma-separated spatial points (alternative to --m/--dx)
    #[arg(long)]
    xs: Option<String>,
    /// Diffusivity theta
    #[arg(long)]
    theta: Option<f64>,
    /// Volatility sigma
    #[arg(long)]
    sigma: Option<f64>,
    /// Power-variation exponent
    #[arg(long)]
    p: Option<u32>,
    /// Root seed
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo replications
    #[arg(long)]
    reps: Option<usize>,
    /// Series truncation radius
    #[arg(long)]
    radius: Option<usize>,
    /// Significance level (confidence = 1 - alpha)
    #[arg(long)]
    alpha: Option<f64>,
    /// Output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Additional output file for the reconstructed path CSV (simulate)
    #[arg(long = "path-out")]
    path_out: Option<PathBuf>,
    /// Input increments CSV (estimate)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Treat theta as known and estimate sigma
    #[arg(long = "known-theta", conflicts_with = "known_sigma")]
    known_theta: Option<f64>,
    /// Treat sigma as known and estimate theta
    #[arg(long = "known-sigma")]
    known_sigma: Option<f64>,
    /// Additional output file for raw CLT samples CSV (mc-clt)
    #[arg(long = "samples-out")]
    samples_out: Option<PathBuf>,
    /// JSON config file; explicit flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker thread cap (fallback: env HEATVAR_THREADS)
    #[arg(long)]
    threads: Option<usize>,
}

/// JSON mirror of the flags, so experiments are reproducible from a file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n: Option<usize>,
    m: Option<usize>,
    delta_n: Option<f64>,
    dx: Option<f64>,
    xs: Option<Vec<f64>>,
    theta: Option<f64>,
    sigma: Option<f64>,
    p: Option<u32>,
    seed: Option<u64>,
    reps: Option<usize>,
    radius: Option<usize>,
    alpha: Option<f64>,
    known_theta: Option<f64>,
    known_sigma: Option<f64>,
    threads: Option<usize>,
}

/// Fully resolved options, embedded in every JSON output.
#[derive(Debug, Clone, Serialize)]
struct ResolvedConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    known_theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    known_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
}

#[derive(Debug)]
enum CliError {
    /// Bad or missing arguments: exit code 2.
    Usage(String),
    /// Failure while running: exit code 1.
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Run(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                CliError::Run(_) => ExitCode::from(1),
            }
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (opts, label) = match cli.command {
        Command::Simulate(o) => (o, "simulate"),
        Command::Cov(o) => (o, "cov"),
        Command::Asymvar(o) => (o, "asymvar"),
        Command::Estimate(o) => (o, "estimate"),
        Command::McClt(o) => (o, "mc-clt"),
    };
    let opts = merge_config(opts)?;
    init_threads(&opts)?;
    match label {
        "simulate" => cmd_simulate(&opts),
        "cov" => cmd_cov(&opts),
        "asymvar" => cmd_asymvar(&opts),
        "estimate" => cmd_estimate(&opts),
        _ => cmd_mc_clt(&opts),
    }
}

/// Overlay file-config entries under explicit flags.
fn merge_config(mut opts: Opts) -> CliResult<Opts> {
    let Some(path) = opts.config.clone() else {
        return Ok(opts);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let file: FileConfig = serde_json::from_str(&text)
        .map_err(|e| usage(format!("malformed config {}: {e}", path.display())))?;
    opts.n = opts.n.or(file.n);
    opts.m = opts.m.or(file.m);
    opts.delta_n = opts.delta_n.or(file.delta_n);
    opts.dx = opts.dx.or(file.dx);
    if opts.xs.is_none() {
        opts.xs = file.xs.map(|v| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",")
        });
    }
    opts.theta = opts.theta.or(file.theta);
    opts.sigma = opts.sigma.or(file.sigma);
    opts.p = opts.p.or(file.p);
    opts.seed = opts.seed.or(file.seed);
    opts.reps = opts.reps.or(file.reps);
    opts.radius = opts.radius.or(file.radius);
    opts.alpha = opts.alpha.or(file.alpha);
    opts.known_theta = opts.known_theta.or(file.known_theta);
    opts.known_sigma = opts.known_sigma.or(file.known_sigma);
    opts.threads = opts.threads.or(file.threads);
    if opts.known_theta.is_some() && opts.known_sigma.is_some() {
        return Err(usage(
            "--known-theta and --known-sigma are mutually exclusive",
        ));
    }
    Ok(opts)
}

fn init_threads(opts: &Opts) -> CliResult<()> {
    let threads = match opts.threads {
        Some(t) => Some(t),
        None => match std::env::var("HEATVAR_THREADS") {
            Ok(v) => Some(
                v.parse::<usize>()
                    .map_err(|_| usage(format!("HEATVAR_THREADS must be an integer, got {v:?}")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage("thread cap must be at least 1"));
        }
        // a second invocation in-process would fail; the global pool is
        // already sized, so ignore that
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    Ok(())
}

fn require<T: Copy>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| usage(format!("missing required option {flag}")))
}

fn resolve_grid(opts: &Opts) -> CliResult<GridSpec> {
    let n = require(opts.n, "--n")?;
    let delta_n = require(opts.delta_n, "--delta-n")?;
    let grid = if let Some(list) = &opts.xs {
        let xs: Vec<f64> = list
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("--xs entry {tok:?} is not a number")))
            })
            .collect::<CliResult<_>>()?;
        GridSpec::new(n, delta_n, xs)
    } else {
        let m = require(opts.m, "--m")?;
        let dx = if m >= 2 {
            require(opts.dx, "--dx")?
        } else {
            opts.dx.unwrap_or(0.0)
        };
        GridSpec::uniform(n, delta_n, m, dx)
    };
    grid.map_err(|e| usage(e.to_string()))
}

fn resolve_params(opts: &Opts) -> CliResult<ModelParams> {
    let theta = require(opts.theta, "--theta")?;
    let sigma = require(opts.sigma, "--sigma")?;
    ModelParams::new(theta, sigma).map_err(|e| usage(e.to_string()))
}

fn resolve_power(opts: &Opts) -> CliResult<Power> {
    let p = require(opts.p, "--p")?;
    Power::new(p).map_err(|e| usage(e.to_string()))
}

fn resolve_known(opts: &Opts) -> Known {
    match (opts.known_theta, opts.known_sigma) {
        (Some(t), _) => Known::Theta(t),
        (_, Some(s)) => Known::Sigma(s),
        _ => Known::Neither,
    }
}

fn resolved_config(opts: &Opts, grid: Option<&GridSpec>) -> ResolvedConfig {
    ResolvedConfig {
        n: grid.map(|g| g.n()).or(opts.n),
        delta_n: grid.map(|g| g.delta_n()).or(opts.delta_n),
        xs: grid.map(|g| g.xs().to_vec()),
        theta: opts.theta,
        sigma: opts.sigma,
        p: opts.p,
        seed: opts.seed,
        reps: opts.reps,
        radius: opts.radius,
        alpha: opts.alpha,
        known_theta: opts.known_theta,
        known_sigma: opts.known_sigma,
        input: opts.input.as_ref().map(|p| p.display().to_string()),
    }
}

fn write_output(out: &Option<PathBuf>, body: &[u8]) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, body).map_err(|e| CliError::Run(e.into())),
        None => {
            let mut stdout = std::io::stdout();
            stdout.write_all(body).map_err(|e| CliError::Run(e.into()))
        }
    }
}

/// Serialize `payload` with the resolved config attached under "config".
fn json_with_config<T: Serialize>(payload: &T, config: &ResolvedConfig) -> CliResult<Vec<u8>> {
    let mut value = serde_json::to_value(payload)
        .map_err(|e| CliError::Run(Error::Invalid(e.to_string())))?;
    let cfg = serde_json::to_value(config)
        .map_err(|e| CliError::Run(Error::Invalid(e.to_string())))?;
    value
        .as_object_mut()
        .expect("payload serializes to an object")
        .insert("config".into(), cfg);
    let mut body = serde_json::to_vec_pretty(&value)
        .map_err(|e| CliError::Run(Error::Invalid(e.to_string())))?;
    body.push(b'\n');
    Ok(body)
}

fn cmd_simulate(opts: &Opts) -> CliResult<()> {
    let grid = resolve_grid(opts)?;
    let params = resolve_params(opts)?;
    let seed = Seed::new(opts.seed.unwrap_or(0), 0);
    let field = sampler::sample_increments(&grid, &params, seed)?;
    let mut buf = Vec::new();
    field.write_csv(&mut buf)?;
    write_output(&opts.out, &buf)?;
    if let Some(path) = &opts.path_out {
        let mut pbuf = Vec::new();
        field.write_path_csv(&mut pbuf)?;
        fs::write(path, pbuf).map_err(|e| CliError::Run(e.into()))?;
    }
    Ok(())
}

fn cmd_cov(opts: &Opts) -> CliResult<()> {
    let grid = resolve_grid(opts)?;
    let params = resolve_params(opts)?;
    let cov = cov::build_cov_matrix(&grid, &params)?;
    let mut buf = Vec::new();
    cov.write_csv(&mut buf)?;
    write_output(&opts.out, &buf)
}

fn cmd_asymvar(opts: &Opts) -> CliResult<()> {
    let p = resolve_power(opts)?;
    let params = resolve_params(opts)?;
    let radius = opts.radius.unwrap_or(asymptotics::DEFAULT_RADIUS);
    let av = asymptotics::asymptotic_variance(p, &params, radius)?;
    let body = json_with_config(&av, &resolved_config(opts, None))?;
    write_output(&opts.out, &body)
}

fn cmd_estimate(opts: &Opts) -> CliResult<()> {
    let input = opts
        .input
        .clone()
        .ok_or_else(|| usage("missing required option --input"))?;
    let p = resolve_power(opts)?;
    let alpha = opts.alpha.unwrap_or(0.05);
    let (grid, columns) = read_increments_csv(&input)?;
    let per_point: Vec<f64> = columns
        .iter()
        .map(|col| stats::power_variation(col, p, grid.delta_n()))
        .collect::<heatvar::Result<_>>()?;
    let averaged = per_point.iter().sum::<f64>() / per_point.len() as f64;
    let pv = PVResult {
        per_point,
        averaged,
        p,
        n: grid.n(),
        m: grid.m(),
        delta_n: grid.delta_n(),
    };
    let est = stats::estimate(&pv, resolve_known(opts), 1.0 - alpha)?;
    let body = json_with_config(&est, &resolved_config(opts, Some(&grid)))?;
    write_output(&opts.out, &body)
}

fn cmd_mc_clt(opts: &Opts) -> CliResult<()> {
    let grid = resolve_grid(opts)?;
    let params = resolve_params(opts)?;
    let config = MCConfig {
        grid: grid.clone(),
        params,
        p: resolve_power(opts)?,
        reps: require(opts.reps, "--reps")?,
        root_seed: opts.seed.unwrap_or(0),
        alpha: opts.alpha.unwrap_or(0.05),
        known: resolve_known(opts),
    };
    let report = montecarlo::run_replications(&config)?;
    if let Some(path) = &opts.samples_out {
        let mut buf = String::from("s\n");
        for s in &report.samples {
            buf.push_str(&format!("{s}\n"));
        }
        fs::write(path, buf).map_err(|e| CliError::Run(e.into()))?;
    }
    let body = json_with_config(&report, &resolved_config(opts, Some(&grid)))?;
    write_output(&opts.out, &body)
}

/// Parse an increments CSV with header `i,k,t,x,dX` back into a grid and
/// per-spatial-point increment columns.
fn read_increments_csv(path: &Path) -> CliResult<(GridSpec, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Run(e.into()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != "i,k,t,x,dX" {
        return Err(CliError::Run(Error::Csv {
            row: 1,
            col: 1,
            msg: format!("expected header i,k,t,x,dX, got {header:?}"),
        }));
    }
    struct Row {
        i: usize,
        k: usize,
        t: f64,
        x: f64,
        dx_val: f64,
    }
    let mut rows = Vec::new();
    for (line_no, line) in lines.enumerate() {
        let row_no = line_no + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(CliError::Run(Error::Csv {
                row: row_no,
                col: cells.len(),
                msg: format!("expected 5 cells, got {}", cells.len()),
            }));
        }
        let cell_err = |col: usize, tok: &str| {
            CliError::Run(Error::Csv {
                row: row_no,
                col,
                msg: format!("non-numeric cell {tok:?}"),
            })
        };
        let i: usize = cells[0].trim().parse().map_err(|_| cell_err(1, cells[0]))?;
        let k: usize = cells[1].trim().parse().map_err(|_| cell_err(2, cells[1]))?;
        let t: f64 = cells[2].trim().parse().map_err(|_| cell_err(3, cells[2]))?;
        let x: f64 = cells[3].trim().parse().map_err(|_| cell_err(4, cells[3]))?;
        let dx_val: f64 = cells[4].trim().parse().map_err(|_| cell_err(5, cells[4]))?;
        rows.push(Row { i, k, t, x, dx_val });
    }
    if rows.is_empty() {
        return Err(CliError::Run(Error::Csv {
            row: 2,
            col: 1,
            msg: "no data rows".into(),
        }));
    }
    let n = rows.iter().map(|r| r.i).max().unwrap();
    let m = rows.iter().map(|r| r.k).max().unwrap() + 1;
    if rows.len() != n * m {
        return Err(CliError::Run(Error::Csv {
            row: rows.len() + 1,
            col: 1,
            msg: format!("expected {} data rows for n={n}, m={m}, got {}", n * m, rows.len()),
        }));
    }
    let first = rows
        .iter()
        .find(|r| r.i == 1)
        .expect("a row with i = 1 exists");
    let delta_n = first.t;
    let mut xs = vec![f64::NAN; m];
    let mut columns = vec![vec![f64::NAN; n]; m];
    for r in &rows {
        if r.i < 1 || r.k >= m {
            return Err(CliError::Run(Error::Csv {
                row: 2,
                col: 1,
                msg: format!("index ({}, {}) out of range", r.i, r.k),
            }));
        }
        xs[r.k] = r.x;
        columns[r.k][r.i - 1] = r.dx_val;
    }
    if columns.iter().flatten().any(|v| v.is_nan()) || xs.iter().any(|v| v.is_nan()) {
        return Err(CliError::Run(Error::Csv {
            row: 2,
            col: 1,
            msg: "missing (i, k) combinations".into(),
        }));
    }
    let grid = GridSpec::new(n, delta_n, xs).map_err(CliError::Run)?;
    Ok((grid, columns))
}
