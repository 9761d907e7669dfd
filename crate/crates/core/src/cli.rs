//! Command-line front end: `fit`, `simulate` and `bootstrap`.
//!
//! Options may also come from a `key=value` file given with `--config`;
//! flags given on the command line take precedence. Keys use the long flag
//! names with `_` for `-` (`max_splits`, ...), plus the scenario keys
//! understood by [`Scenario::from_map`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::glm::Family;
use crate::harness::{default_methods, run_cell, CellRun};
use crate::inference::bootstrap_ci;
use crate::io;
use crate::simulate::{parse_kv, Scenario};
use crate::tsc::{fit_tsc, ModelSpec};

#[derive(Debug, Parser)]
#[command(name = "tsclust", version, about = "Tree-structured clustering of unit intercepts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the tree to a CSV file of `unit,y,<covariates>` rows.
    Fit(FitArgs),
    /// Run a simulation cell.
    Simulate(SimulateArgs),
    /// Percentile bootstrap intervals for a CSV data file.
    Bootstrap(BootstrapArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// gaussian or binomial
    #[arg(long)]
    pub family: Option<String>,
    /// Significance level of the global stopping test.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "max-splits")]
    pub max_splits: Option<usize>,
    /// Ridge penalty used when an unpenalized fit does not exist.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// `key=value` options file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// `n,n_i,m0,rho,dist`; m0 may be `both` (5 and 10) or a `/`-separated list.
    #[arg(long)]
    pub cell: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of bootstrap replicates.
    #[arg(long = "bootstrap")]
    pub b: Option<usize>,
    #[arg(long)]
    pub level: Option<f64>,
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Input { .. }
        | Error::Csv(_)
        | Error::InvalidArgument(_)
        | Error::InvalidM0 { .. }
        | Error::EmptyUnit(_)
        | Error::Domain(_)
        | Error::DimensionMismatch(_)
        | Error::LengthMismatch { .. } => 2,
        Error::FullModelUnfit(_) => 3,
        Error::SimulationFailures { .. } => 4,
        Error::TooManyFailures { .. } => 5,
        _ => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(a) => {
            let mut opts = Options::load(&a.common)?;
            opts.set_path("input", a.input.as_deref());
            with_threads(&opts, || cmd_fit(&opts))
        }
        Command::Simulate(a) => {
            let mut opts = Options::load(&a.common)?;
            if let Some(cell) = &a.cell {
                opts.set_cell(cell)?;
            }
            opts.set("reps", a.reps);
            with_threads(&opts, || cmd_simulate(&opts))
        }
        Command::Bootstrap(a) => {
            let mut opts = Options::load(&a.common)?;
            opts.set_path("input", a.input.as_deref());
            opts.set("bootstrap", a.b);
            opts.set("level", a.level);
            with_threads(&opts, || cmd_bootstrap(&opts))
        }
    }
}

/// Merged config-file and flag values.
#[derive(Debug, Clone, Default)]
struct Options(BTreeMap<String, String>);

impl Options {
    fn load(common: &CommonArgs) -> Result<Self> {
        let mut opts = match &common.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Input {
                    line: 0,
                    message: format!("cannot read {}: {e}", path.display()),
                })?;
                Options(parse_kv(&text)?)
            }
            None => Options::default(),
        };
        opts.set("family", common.family.clone());
        opts.set("alpha", common.alpha);
        opts.set("max_splits", common.max_splits);
        opts.set("ridge", common.ridge);
        opts.set("seed", common.seed);
        opts.set("threads", common.threads);
        opts.set_path("out", common.out.as_deref());
        Ok(opts)
    }

    fn set<T: ToString>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.0.insert(key.to_string(), v.to_string());
        }
    }

    fn set_path(&mut self, key: &str, value: Option<&Path>) {
        self.set(key, value.map(|p| p.display().to_string()));
    }

    fn set_cell(&mut self, cell: &str) -> Result<()> {
        let parts: Vec<&str> = cell.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(Error::InvalidArgument(format!(
                "--cell expects n,n_i,m0,rho,dist, got '{cell}'"
            )));
        }
        for (key, v) in ["n", "n_i", "m0", "rho", "intercept_dist"].iter().zip(parts) {
            self.0.insert(key.to_string(), v.to_string());
        }
        Ok(())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.0
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::InvalidArgument(format!("invalid value '{v}' for {key}")))
            })
            .transpose()
    }

    fn family(&self) -> Result<Family> {
        Ok(self.get("family")?.unwrap_or(Family::GaussianIdentity))
    }

    fn spec(&self) -> Result<ModelSpec> {
        let mut spec = ModelSpec::new(self.family()?);
        if let Some(a) = self.get("alpha")? {
            spec = spec.with_alpha(a);
        }
        if let Some(m) = self.get("max_splits")? {
            spec = spec.with_max_splits(Some(m));
        }
        if let Some(r) = self.get("ridge")? {
            spec = spec.with_ridge(r);
        }
        Ok(spec)
    }

    fn input(&self) -> Result<PathBuf> {
        self.0
            .get("input")
            .map(PathBuf::from)
            .ok_or_else(|| Error::InvalidArgument("--input is required".into()))
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = PathBuf::from(self.0.get("out").map_or("tsclust-out", String::as_str));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    fn m0_list(&self) -> Result<Vec<usize>> {
        match self.0.get("m0").map(String::as_str) {
            None => Ok(vec![5]),
            Some("both") => Ok(vec![5, 10]),
            Some(list) => list
                .split('/')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("invalid m0 '{v}'")))
                })
                .collect(),
        }
    }
}

fn with_threads<F: FnOnce() -> Result<()> + Send>(opts: &Options, f: F) -> Result<()> {
    match opts.get::<usize>("threads")? {
        Some(0) => Err(Error::InvalidArgument("--threads must be positive".into())),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            pool.install(f)
        }
        None => f(),
    }
}

fn cmd_fit(opts: &Options) -> Result<()> {
    let spec = opts.spec()?;
    let data = io::read_dataset_file(&opts.input()?, spec.family)?;
    let fit = fit_tsc(&data, &spec)?;
    let out = opts.out_dir()?;
    io::write_summary(&out.join("summary.csv"), &data, &fit)?;
    io::write_steps(&out.join("steps.csv"), &fit)?;
    io::write_partition(&out.join("partition.csv"), &data, &fit)?;
    io::write_path(&out.join("path.csv"), &data, &fit)?;
    println!(
        "{} units, {} clusters, log-likelihood {:.6}",
        data.n_units(),
        fit.n_clusters(),
        fit.final_log_likelihood
    );
    for (name, b) in data.covariate_names().iter().zip(&fit.shared_beta) {
        println!("  {name} = {b:.6}");
    }
    Ok(())
}

fn cmd_simulate(opts: &Options) -> Result<()> {
    let spec = opts.spec()?;
    let reps: usize = opts.get("reps")?.unwrap_or(100);
    let mut runs: Vec<CellRun> = Vec::new();
    for m0 in opts.m0_list()? {
        let mut map = opts.0.clone();
        map.insert("m0".into(), m0.to_string());
        map.insert("family".into(), spec.family.name().to_string());
        let scenario = Scenario::from_map(&map)?;
        runs.push(run_cell(&scenario, reps, &spec, &default_methods(scenario.family))?);
    }
    let out = opts.out_dir()?;
    io::write_raw_metrics(&out.join("raw_metrics.csv"), &runs)?;
    io::write_cell_table(&out.join("cell_table.csv"), &runs)?;
    io::write_cell_spread(&out.join("cell_spread.csv"), &runs)?;
    if let Some(first) = runs.first() {
        fs::write(out.join("scenario.txt"), first.scenario.to_kv())?;
    }
    for run in &runs {
        for s in &run.summaries {
            println!(
                "m0={} {}: mse_intercepts {:.4}  mse_linear {:.4}  clusters {:.2}  ({} ok)",
                run.scenario.m0,
                s.method.label(),
                s.mse_intercepts.mean,
                s.mse_linear.mean,
                s.n_clusters.mean,
                s.reps
            );
        }
    }
    match runs.iter().find_map(CellRun::quota_violation) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_bootstrap(opts: &Options) -> Result<()> {
    let spec = opts.spec()?;
    let b: usize = opts.get("bootstrap")?.unwrap_or(200);
    let level: f64 = opts.get("level")?.unwrap_or(0.95);
    let seed: u64 = opts.get("seed")?.unwrap_or(0);
    if b < 2 {
        return Err(Error::InvalidArgument(format!("bootstrap needs B >= 2, got {b}")));
    }
    let data = io::read_dataset_file(&opts.input()?, spec.family)?;
    let result = bootstrap_ci(&data, &spec, b, level, seed)?;
    let out = opts.out_dir()?;
    io::write_intervals(&out.join("intervals.csv"), &result)?;
    println!(
        "{} of {} replicates succeeded; {:.0}% percentile intervals:",
        b - result.n_failed,
        b,
        100.0 * level
    );
    for ((name, est), iv) in result
        .parameter_names
        .iter()
        .zip(&result.estimates)
        .zip(&result.intervals)
    {
        println!("  {name} = {est:.6}  [{:.6}, {:.6}]", iv.lower, iv.upper);
    }
    Ok(())
}
