//! Command-line laboratory for generalized urn processes: each subcommand
//! dispatches one library operation and emits a plot-ready CSV or JSON
//! artifact on stdout or at `--out`.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible or degenerate
//! request, 4 work budget exceeded, 5 numerical failure. Every artifact is
//! byte-identical across repeated invocations with identical flags; commands
//! that draw randomness take an explicit `--rng` seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use urnlab::{
    action_report, entropy_curve, estimate_urn_function, exact_distribution, fixed_points,
    importance_estimate, legendre, minimize_action, run_batch, simulate, solve_mgf,
    zero_cost_trajectory, CurveKind, Error, ErrorKind, EventSpec, LipschitzPath, Result,
    ScalarCurve, Seed, Trajectory, UrnFunction, WorkBudget,
};

/// Laboratory for generalized urn processes: simulation, exact final-share
/// laws, scaling limits, inverse estimation, and large-deviation machinery.
#[derive(Parser)]
#[command(name = "urnlab", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

/// Urn function shared by every subcommand that evaluates a drift.
#[derive(Args)]
struct UrnArg {
    /// Urn function as inline JSON or @file; families: {"family":"constant","p":P},
    /// {"family":"linear","a":A,"b":B}, {"family":"majority","m":M},
    /// {"family":"table","xs":[...],"ys":[...]}
    #[arg(long, value_name = "JSON|@FILE")]
    urn: String,
}

impl UrnArg {
    fn parse(&self) -> Result<UrnFunction> {
        let text = match self.urn.strip_prefix('@') {
            Some(path) => fs::read_to_string(path).map_err(|e| {
                Error::InvalidArgument(format!("cannot read urn spec {path}: {e}"))
            })?,
            None => self.urn.clone(),
        };
        serde_json::from_str(&text).map_err(|e| {
            let message = e.to_string();
            // Family validation failures already carry the variant prefix.
            let message = message
                .strip_prefix("invalid urn function: ")
                .unwrap_or(&message);
            Error::InvalidSpec(message.to_string())
        })
    }
}

/// Initial urn composition shared by the stochastic and exact-law commands.
#[derive(Args)]
struct SeedArgs {
    /// Black balls in the initial urn (count, >= 0; seed total must be >= 1)
    #[arg(long, value_name = "BALLS", default_value_t = 1)]
    seed_black: u64,

    /// White balls in the initial urn (count, >= 0)
    #[arg(long, value_name = "BALLS", default_value_t = 1)]
    seed_white: u64,
}

impl SeedArgs {
    fn seed(&self) -> Result<Seed> {
        Seed::new(self.seed_black, self.seed_white)
    }
}

/// Artifact destination shared by every subcommand.
#[derive(Args)]
struct OutArg {
    /// Write the artifact to this file instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

impl OutArg {
    fn write(&self, artifact: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, artifact).map_err(|e| {
                Error::InvalidArgument(format!("cannot write {}: {e}", path.display()))
            }),
            None => {
                print!("{artifact}");
                Ok(())
            }
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one run to capacity; CSV "n,sigma,psi,phi" with one row per
    /// drawn ball: draw outcome sigma (1 black, 0 white), black share psi
    /// after the draw, and rescaled black count phi = blacks/T
    Simulate {
        #[command(flatten)]
        urn: UrnArg,
        /// Final number of balls T (count, > seed total)
        #[arg(long = "T", value_name = "BALLS", default_value_t = 1000)]
        capacity: u64,
        #[command(flatten)]
        seed: SeedArgs,
        /// RNG seed; the same seed reproduces the run bit-exactly
        #[arg(long, value_name = "SEED", default_value_t = 0)]
        rng: u64,
        #[command(flatten)]
        out: OutArg,
    },

    /// Exact final-share law by dynamic programming; CSV "k,prob" over the
    /// reachable black-ball counts at capacity
    Dp {
        #[command(flatten)]
        urn: UrnArg,
        /// Final number of balls T (count, >= seed total)
        #[arg(long = "T", value_name = "BALLS", default_value_t = 1000)]
        capacity: u64,
        #[command(flatten)]
        seed: SeedArgs,
        /// Work budget in table-cell updates, roughly T*(T - seed total);
        /// defaults to $URNLAB_WORK_BUDGET or 25000000
        #[arg(long, value_name = "CELLS")]
        budget: Option<u64>,
        #[command(flatten)]
        out: OutArg,
    },

    /// Deterministic scaling-limit share trajectory from a macroscopic start;
    /// CSV "tau,psi" on a uniform saturation grid ending at tau = 1
    Trajectory {
        #[command(flatten)]
        urn: UrnArg,
        /// Initial saturation tau0 = (seed total)/T (fraction in (0, 1])
        #[arg(long, value_name = "FRACTION", default_value_t = 0.5)]
        tau0: f64,
        /// Initial black share psi0 (fraction in [0, 1])
        #[arg(long, value_name = "FRACTION", default_value_t = 0.5)]
        psi0: f64,
        /// Number of output grid points from tau0 to 1 inclusive (count, >= 2)
        #[arg(long, value_name = "COUNT", default_value_t = 1000)]
        points: usize,
        #[command(flatten)]
        out: OutArg,
    },

    /// Fixed points of the urn function with stability labels; JSON list
    /// sorted by location
    Fixpoints {
        #[command(flatten)]
        urn: UrnArg,
        /// Residual threshold for accepting a tangency as a fixed point
        /// (dimensionless)
        #[arg(long, value_name = "EPS", default_value_t = 1e-9)]
        tol: f64,
        #[command(flatten)]
        out: OutArg,
    },

    /// Estimate the urn function from one observed share trajectory; reads
    /// CSV "tau,psi", emits CSV "psi,pi_hat,density" with an observation-
    /// density diagnostic per estimation point
    Invert {
        /// Input trajectory CSV with columns tau,psi (header optional)
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Smoothing bandwidth in share units; estimated from the data when
        /// omitted
        #[arg(long, value_name = "SHARE")]
        bandwidth: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },

    /// Action functionals of a rescaled path against an urn function; reads
    /// the path as CSV "grid,value" on the uniform grid k/M, emits a JSON
    /// report with per-cell samples
    Action {
        #[command(flatten)]
        urn: UrnArg,
        /// Input path CSV with columns grid,value: row k holds (k/M, phi(k/M))
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },

    /// Minimize the path action over an endpoint event; emits the optimal
    /// path as CSV "grid,value" and prints the exponential rate (<= 0) of the
    /// event on stderr
    Minimize {
        #[command(flatten)]
        urn: UrnArg,
        /// Lower end of the endpoint interval for phi(1) (fraction; pair with --hi)
        #[arg(long, value_name = "FRACTION")]
        lo: Option<f64>,
        /// Upper end of the endpoint interval for phi(1) (fraction; pair with --lo)
        #[arg(long, value_name = "FRACTION")]
        hi: Option<f64>,
        /// Sharp endpoint target for phi(1) (fraction; pair with --halfwidth)
        #[arg(long, value_name = "FRACTION")]
        x: Option<f64>,
        /// Halfwidth of the sharp endpoint window (fraction > 0; pair with --x)
        #[arg(long, value_name = "FRACTION")]
        halfwidth: Option<f64>,
        /// Pin the start: hold share psi0 up to saturation tau0 (fraction in
        /// (0, 1); pair with --psi0; start is free when omitted)
        #[arg(long, value_name = "FRACTION")]
        tau0: Option<f64>,
        /// Pinned entry share (fraction in [0, 1]; pair with --tau0)
        #[arg(long, value_name = "FRACTION")]
        psi0: Option<f64>,
        /// Number of uniform path cells M (count, >= 2)
        #[arg(long, value_name = "CELLS", default_value_t = 256)]
        segments: usize,
        #[command(flatten)]
        out: OutArg,
    },

    /// Entropy density of the final share: per-step exponential rate (<= 0)
    /// of ending at each grid share; CSV "grid,value"
    Entropy {
        #[command(flatten)]
        urn: UrnArg,
        /// Share grid as start:stop:step (fractions in [0, 1])
        #[arg(long, value_name = "A:B:STEP", default_value = "0.02:0.98:0.02")]
        grid: String,
        /// Number of uniform path cells M in the underlying minimization
        /// (count, >= 2)
        #[arg(long, value_name = "CELLS", default_value_t = 1024)]
        segments: usize,
        #[command(flatten)]
        out: OutArg,
    },

    /// Scaled cumulant generating function of the final black count; CSV
    /// "grid,value" over the exponent grid, with the worst functional-equation
    /// residual on stderr
    Mgf {
        #[command(flatten)]
        urn: UrnArg,
        /// Largest exponent beta in the grid (dimensionless, > 0)
        #[arg(long, value_name = "BETA", default_value_t = 5.0)]
        beta_max: f64,
        /// Exponent grid step (dimensionless, > 0, dividing --beta-max)
        #[arg(long, value_name = "STEP", default_value_t = 0.01)]
        beta_step: f64,
        #[command(flatten)]
        out: OutArg,
    },

    /// Legendre transform of a convex curve into an entropy density; reads
    /// CSV "grid,value", emits CSV "grid,value" on the requested share grid
    Legendre {
        /// Input convex curve CSV with columns grid,value (header optional)
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Output share grid as start:stop:step (fractions in [0, 1])
        #[arg(long, value_name = "A:B:STEP", default_value = "0.02:0.98:0.02")]
        grid: String,
        #[command(flatten)]
        out: OutArg,
    },

    /// Monte Carlo batch of terminal black counts; JSON histogram plus an
    /// optional CSV "run,share" of per-run terminal shares
    Batch {
        #[command(flatten)]
        urn: UrnArg,
        /// Final number of balls T per run (count, > seed total)
        #[arg(long = "T", value_name = "BALLS", default_value_t = 1000)]
        capacity: u64,
        #[command(flatten)]
        seed: SeedArgs,
        /// Number of independent runs (count, >= 1)
        #[arg(long = "R", value_name = "RUNS", default_value_t = 10000)]
        runs: u64,
        /// RNG seed; run r draws from stream r of this seed, so results do
        /// not depend on the number of worker threads
        #[arg(long, value_name = "SEED", default_value_t = 0)]
        rng: u64,
        /// Also write per-run terminal shares as CSV "run,share" to this file
        #[arg(long, value_name = "PATH")]
        shares: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },

    /// Importance-sampled probability that the terminal black count lands in
    /// [lo, hi], using a fair-coin proposal; JSON estimate with standard error
    Importance {
        #[command(flatten)]
        urn: UrnArg,
        /// Final number of balls T per run (count, > seed total)
        #[arg(long = "T", value_name = "BALLS", default_value_t = 1000)]
        capacity: u64,
        #[command(flatten)]
        seed: SeedArgs,
        /// Smallest terminal black count in the event (count)
        #[arg(long, value_name = "BALLS")]
        lo: u64,
        /// Largest terminal black count in the event (count, >= --lo)
        #[arg(long, value_name = "BALLS")]
        hi: u64,
        /// Number of proposal runs (count, >= 1)
        #[arg(long = "R", value_name = "RUNS", default_value_t = 100000)]
        runs: u64,
        /// RNG seed; run r draws from stream r of this seed
        #[arg(long, value_name = "SEED", default_value_t = 0)]
        rng: u64,
        #[command(flatten)]
        out: OutArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Infeasible => 3,
                ErrorKind::Budget => 4,
                ErrorKind::Numerical => 5,
            })
        }
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Simulate {
            urn,
            capacity,
            seed,
            rng,
            out,
        } => {
            let history = simulate(&urn.parse()?, capacity, seed.seed()?, rng)?;
            let counts = history.black_counts();
            let n0 = history.seed().total();
            let t = capacity as f64;
            let mut csv = String::from("n,sigma,psi,phi\n");
            for (j, &drew_black) in history.steps().iter().enumerate() {
                let n = n0 + 1 + j as u64;
                let blacks = counts[j + 1] as f64;
                let _ = writeln!(
                    csv,
                    "{n},{},{},{}",
                    u8::from(drew_black),
                    blacks / n as f64,
                    blacks / t
                );
            }
            out.write(&csv)
        }

        Cmd::Dp {
            urn,
            capacity,
            seed,
            budget,
            out,
        } => {
            let dist = exact_distribution(
                &urn.parse()?,
                capacity,
                seed.seed()?,
                resolve_budget(budget)?,
            )?;
            let mut csv = String::from("k,prob\n");
            for (k, &p) in dist.support().zip(dist.probs()) {
                let _ = writeln!(csv, "{k},{p}");
            }
            out.write(&csv)
        }

        Cmd::Trajectory {
            urn,
            tau0,
            psi0,
            points,
            out,
        } => {
            let taus = saturation_grid(tau0, points)?;
            let outcome = zero_cost_trajectory(&urn.parse()?, tau0, psi0, &taus)?;
            if let Some(at) = outcome.stalled_at {
                eprintln!("warning: integration stalled at saturation {at}; trajectory truncated");
            }
            out.write(&csv_pairs("tau,psi", outcome.trajectory.points()))
        }

        Cmd::Fixpoints { urn, tol, out } => {
            let set = fixed_points::<f64>(&urn.parse()?, tol)?;
            out.write(&to_json(&set)?)
        }

        Cmd::Invert {
            input,
            bandwidth,
            out,
        } => {
            let (taus, psis) = read_csv_pairs(&input)?;
            let estimate = estimate_urn_function(&Trajectory::new(taus, psis)?, bandwidth)?;
            for warning in estimate.warnings() {
                eprintln!("warning: {warning}");
            }
            let mut csv = String::from("psi,pi_hat,density\n");
            for ((&psi, &pi), &density) in estimate
                .psi_grid()
                .iter()
                .zip(estimate.pi_hat())
                .zip(estimate.density())
            {
                let _ = writeln!(csv, "{psi},{pi},{density}");
            }
            out.write(&csv)
        }

        Cmd::Action { urn, input, out } => {
            let path = read_path(&input)?;
            out.write(&to_json(&action_report(&path, &urn.parse()?))?)
        }

        Cmd::Minimize {
            urn,
            lo,
            hi,
            x,
            halfwidth,
            tau0,
            psi0,
            segments,
            out,
        } => {
            let event = build_event(lo, hi, x, halfwidth, tau0, psi0)?;
            let (path, rate) = minimize_action(&urn.parse()?, &event, segments)?;
            eprintln!("rate {rate}");
            let m = path.grid_size();
            let rows = path
                .values()
                .iter()
                .enumerate()
                .map(|(k, &v)| (k as f64 / m as f64, v));
            out.write(&csv_pairs("grid,value", rows))
        }

        Cmd::Entropy {
            urn,
            grid,
            segments,
            out,
        } => {
            let curve = entropy_curve(&urn.parse()?, &parse_grid(&grid)?, segments)?;
            out.write(&csv_pairs("grid,value", curve.points()))
        }

        Cmd::Mgf {
            urn,
            beta_max,
            beta_step,
            out,
        } => {
            let betas = uniform_grid(0.0, beta_max, beta_step)?;
            let solution = solve_mgf::<f64>(&urn.parse()?, &betas)?;
            eprintln!("max residual {:e}", solution.max_residual());
            out.write(&csv_pairs("grid,value", solution.curve().points()))
        }

        Cmd::Legendre { input, grid, out } => {
            let (xs, ys) = read_csv_pairs(&input)?;
            let curve = ScalarCurve::new(CurveKind::MomentGenerating, xs, ys)?;
            let transformed = legendre(&curve, &parse_grid(&grid)?)?;
            out.write(&csv_pairs("grid,value", transformed.points()))
        }

        Cmd::Batch {
            urn,
            capacity,
            seed,
            runs,
            rng,
            shares,
            out,
        } => {
            let batch = run_batch(
                &urn.parse()?,
                capacity,
                seed.seed()?,
                runs,
                rng,
                shares.is_some(),
            )?;
            if let Some(path) = &shares {
                let values = batch.shares().expect("shares were requested");
                let rows = values.iter().enumerate().map(|(r, &s)| (r as f64, s));
                let csv = csv_pairs("run,share", rows);
                fs::write(path, csv).map_err(|e| {
                    Error::InvalidArgument(format!("cannot write {}: {e}", path.display()))
                })?;
            }
            out.write(&to_json(&batch)?)
        }

        Cmd::Importance {
            urn,
            capacity,
            seed,
            lo,
            hi,
            runs,
            rng,
            out,
        } => {
            let estimate =
                importance_estimate(&urn.parse()?, capacity, seed.seed()?, lo..=hi, runs, rng)?;
            out.write(&to_json(&estimate)?)
        }
    }
}

/// Work budget for the dynamic program: flag, else $URNLAB_WORK_BUDGET, else
/// the library default.
fn resolve_budget(flag: Option<u64>) -> Result<WorkBudget> {
    if let Some(budget) = flag {
        return Ok(WorkBudget(budget));
    }
    match std::env::var("URNLAB_WORK_BUDGET") {
        Ok(text) => text.trim().parse().map(WorkBudget).map_err(|_| {
            Error::InvalidArgument(format!(
                "URNLAB_WORK_BUDGET must be a nonnegative integer, got {text:?}"
            ))
        }),
        Err(std::env::VarError::NotPresent) => Ok(WorkBudget::default()),
        Err(e) => Err(Error::InvalidArgument(format!("URNLAB_WORK_BUDGET: {e}"))),
    }
}

/// Uniform saturation grid from `tau0` to exactly `1.0`, inclusive.
fn saturation_grid(tau0: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidArgument(format!(
            "--points must be at least 2, got {points}"
        )));
    }
    let cells = (points - 1) as f64;
    let mut taus: Vec<f64> = (0..points)
        .map(|i| tau0 + (1.0 - tau0) * (i as f64 / cells))
        .collect();
    *taus.last_mut().unwrap() = 1.0;
    Ok(taus)
}

/// Parse "start:stop:step" into the inclusive uniform grid it describes.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Option<Vec<f64>> = (parts.len() == 3)
        .then(|| parts.iter().map(|p| p.trim().parse().ok()).collect())
        .flatten();
    match nums.as_deref() {
        Some(&[start, stop, step]) => uniform_grid(start, stop, step),
        _ => Err(Error::InvalidArgument(format!(
            "grid must be start:stop:step with numeric entries, got {text:?}"
        ))),
    }
}

/// The grid `start, start+step, ..., stop`; `step` must divide the span.
fn uniform_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && step.is_finite() && stop >= start) {
        return Err(Error::InvalidArgument(format!(
            "grid must satisfy start <= stop with a positive step, got {start}:{stop}:{step}"
        )));
    }
    let n = ((stop - start) / step).round() as usize;
    if (start + n as f64 * step - stop).abs() > 1e-9 * step.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} does not divide the span [{start}, {stop}]"
        )));
    }
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

/// Assemble the endpoint event from the mutually exclusive flag pairs.
fn build_event(
    lo: Option<f64>,
    hi: Option<f64>,
    x: Option<f64>,
    halfwidth: Option<f64>,
    tau0: Option<f64>,
    psi0: Option<f64>,
) -> Result<EventSpec> {
    let event = match (lo, hi, x, halfwidth) {
        (Some(lo), Some(hi), None, None) => EventSpec::endpoint_in(lo, hi)?,
        (None, None, Some(x), Some(w)) => EventSpec::endpoint_eq(x, w)?,
        _ => {
            return Err(Error::InvalidArgument(
                "specify the endpoint event as either --lo with --hi or --x with --halfwidth"
                    .into(),
            ))
        }
    };
    match (tau0, psi0) {
        (Some(tau0), Some(psi0)) => event.with_pinned_start(tau0, psi0),
        (None, None) => Ok(event),
        _ => Err(Error::InvalidArgument(
            "--tau0 and --psi0 must be given together".into(),
        )),
    }
}

/// Two-column CSV with a header line; numbers print in shortest
/// round-trip form so artifacts are byte-stable.
fn csv_pairs(header: &str, rows: impl Iterator<Item = (f64, f64)>) -> String {
    let mut csv = String::from(header);
    csv.push('\n');
    for (a, b) in rows {
        // `+ 0.0` turns negative zero into plain `0`.
        let _ = writeln!(csv, "{},{}", a + 0.0, b + 0.0);
    }
    csv
}

/// Read a two-column numeric CSV, tolerating one header line.
fn read_csv_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let parsed = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => a
                .trim()
                .parse::<f64>()
                .ok()
                .zip(b.trim().parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((x, y)) => {
                xs.push(x);
                ys.push(y);
            }
            None if index == 0 => continue,
            None => {
                return Err(Error::InvalidArgument(format!(
                    "{}: line {} is not two numeric columns",
                    path.display(),
                    index + 1
                )))
            }
        }
    }
    if xs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: no numeric rows",
            path.display()
        )));
    }
    Ok((xs, ys))
}

/// Read a rescaled path stored as CSV rows `(k/M, value)` on the uniform grid.
fn read_path(path: &Path) -> Result<LipschitzPath> {
    let (grid, values) = read_csv_pairs(path)?;
    if grid.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "{}: a path needs at least two rows",
            path.display()
        )));
    }
    let m = grid.len() - 1;
    for (k, &tau) in grid.iter().enumerate() {
        let expected = k as f64 / m as f64;
        if (tau - expected).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "{}: path grid must be uniform k/M on [0, 1]; row {} has {tau}, expected {expected}",
                path.display(),
                k + 1
            )));
        }
    }
    LipschitzPath::new(values)
}

/// Pretty JSON with a trailing newline.
fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Numerical(format!("cannot serialize artifact: {e}")))?;
    text.push('\n');
    Ok(text)
}
