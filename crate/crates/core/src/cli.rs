//! Command-line front end. `main` in the binary only forwards to [`run`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::basis::IntervalPartition;
use crate::bundle::{fmt_num, read_xy, write_bundle, write_xy, Bundle, Table};
use crate::chain::Chain;
use crate::config::{BasisName, Estimator, ModelChoice, RunConfig, StrategyName};
use crate::data::Dataset;
use crate::error::Result;
use crate::fit::{fit, fit_gpd, fit_tombs, Detail, Fit, GpdFit, TombsFit};
use crate::models::ModeKind;
use crate::outputs::{diagnostics, MapEstimate};
use crate::priors::PriorConfig;
use crate::simulate::{simulate_example, tombs_transform, Example};
use crate::study::{replicate_study, StudySpec};

/// Environment variable that overrides the output directory of every
/// command (an explicit `--out` still wins).
pub const OUTPUT_DIR_ENV: &str = "AUXSPLINE_OUTPUT_DIR";

/// The bundled synthetic tombs dataset (`d,r` columns).
pub const TOMBS_CSV: &str = include_str!("../data/tombs.csv");

#[derive(Debug, Parser)]
#[command(
    name = "auxspline",
    version,
    about = "Bayesian free-knot splines with auxiliary-variable MCMC"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a curve to x,y data and write an output bundle.
    Fit(FitArgs),
    /// Draw a dataset from one of the built-in examples.
    Simulate(SimulateArgs),
    /// Repeat simulate-and-fit and report MSE of the MAP and BMA curves.
    ReplicateStudy(StudyArgs),
    /// Change-point fit to depth/radius data (bundled data by default).
    Tombs(TombsArgs),
    /// Seasonal generalised Pareto fit to day,exceedance data.
    Gpd(GpdArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "x")]
    pub x_col: String,
    #[arg(long, default_value = "y")]
    pub y_col: String,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// sk1, dms2, dgk3 or poisson.
    #[arg(long)]
    pub example: Example,
    #[arg(long)]
    pub n: usize,
    /// Noise sd (Gaussian examples only).
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub example: Example,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub replicates: usize,
    /// Replicate r simulates with seed base_seed + r.
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct TombsArgs {
    /// CSV with `d` and `r` columns; the bundled dataset when absent.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct GpdArgs {
    /// CSV with `day` and `y` (exceedance) columns.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub zeta_u: Option<f64>,
    #[arg(long)]
    pub n_y: Option<f64>,
    #[arg(long)]
    pub return_period: Option<f64>,
}

/// Flags shared by the fitting commands. Each one overrides the matching
/// config field.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// TOML run configuration; replaces the command's built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = OUTPUT_DIR_ENV)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelChoice>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long, value_parser = parse_basis)]
    pub basis: Option<BasisName>,
    /// mle or map.
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<ModeKind>,
    /// Intervals from every n_x sorted distinct x values.
    #[arg(long, conflicts_with_all = ["interval_count", "bounds"])]
    pub n_x: Option<usize>,
    /// Equal-width intervals.
    #[arg(long, conflicts_with = "bounds")]
    pub interval_count: Option<usize>,
    /// Explicit interval bounds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub bounds: Option<Vec<f64>>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_knots: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub z_steps: Option<usize>,
    #[arg(long)]
    pub gamma_steps: Option<usize>,
    #[arg(long)]
    pub kappa: Option<usize>,
    /// Refresh coefficients after every model move, not only accepted ones.
    #[arg(long)]
    pub refresh_always: bool,
    #[arg(long)]
    pub delta_z: Option<f64>,
    #[arg(long)]
    pub delta_beta: Option<f64>,
    #[arg(long)]
    pub move_split: Option<f64>,
    /// Hold knot locations at their initial values.
    #[arg(long)]
    pub fixed_locations: bool,
    /// map, bma or both.
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<Estimator>,
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub band_level: Option<f64>,
    /// Average posterior-mean rather than least-squares curves.
    #[arg(long)]
    pub shrunken: bool,
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown value '{s}'"))
}

fn parse_model(s: &str) -> std::result::Result<ModelChoice, String> {
    parse_enum(s)
}

fn parse_basis(s: &str) -> std::result::Result<BasisName, String> {
    parse_enum(s)
}

fn parse_mode(s: &str) -> std::result::Result<ModeKind, String> {
    parse_enum(s)
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    parse_enum(s)
}

impl RunArgs {
    /// `--config` if given, else `preset`, with flag overrides applied.
    pub fn resolve(&self, preset: RunConfig) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => preset,
        };
        macro_rules! set {
            ($flag:ident => $($field:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($field).+ = v;
                }
            };
        }
        set!(seed => seed);
        set!(model => model.kind);
        set!(degree => model.degree);
        set!(basis => model.basis);
        set!(iterations => sampler.iterations);
        set!(burnin => sampler.burnin);
        set!(z_steps => sampler.z_steps_per_sweep);
        set!(gamma_steps => sampler.gamma_steps_per_sweep);
        set!(kappa => sampler.kappa);
        if self.refresh_always {
            c.sampler.refresh_always = true;
        }
        set!(delta_z => sampler.delta_z);
        set!(delta_beta => sampler.delta_beta);
        set!(move_split => sampler.move_split);
        set!(estimator => output.estimator);
        set!(grid_size => output.grid_size);
        set!(band_level => output.band_level);
        set!(out => output.dir);
        if self.mode.is_some() {
            c.model.mode = self.mode;
        }
        if let Some(v) = self.n_x {
            c.intervals.strategy = StrategyName::EveryNx;
            c.intervals.n_x = v;
        }
        if let Some(v) = self.interval_count {
            c.intervals.strategy = StrategyName::EqualCount;
            c.intervals.count = v;
        }
        if let Some(v) = &self.bounds {
            c.intervals.strategy = StrategyName::Explicit;
            c.intervals.bounds = v.clone();
        }
        if self.c.is_some() {
            c.prior.c = self.c;
        }
        if self.lambda.is_some() {
            c.prior.lambda = self.lambda;
        }
        if self.max_knots.is_some() {
            c.prior.max_knots = self.max_knots;
        }
        if self.fixed_locations {
            c.sampler.update_gamma = false;
        }
        if self.shrunken {
            c.output.shrunken = true;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Parses `args` (program name first) and runs the command, returning the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Fit(a) => fit_command(&a),
        Command::Simulate(a) => simulate_command(&a),
        Command::ReplicateStudy(a) => study_command(&a),
        Command::Tombs(a) => tombs_command(&a),
        Command::Gpd(a) => gpd_command(&a),
    }
}

fn fit_command(a: &FitArgs) -> Result<()> {
    let config = a.run.resolve(RunConfig::default())?;
    if config.model.kind == ModelChoice::Gpd {
        let data = read_xy(&a.data, &a.x_col, &a.y_col)?;
        let g = fit_gpd(&data, &config)?;
        return write_gpd(&g, &config);
    }
    let data = read_xy(&a.data, &a.x_col, &a.y_col)?;
    let f = fit(&data, &config, Detail::Full)?;
    let summary = fit_summary(&f, &config, data.n());
    write_bundle(
        &config.output.dir,
        &Bundle {
            chain: &f.chain,
            curve: select_estimators(&f, &config),
            summary,
        },
    )?;
    print_fit(&f, &config);
    Ok(())
}

fn simulate_command(a: &SimulateArgs) -> Result<()> {
    let sim = simulate_example(a.example, a.n, a.sigma, a.seed)?;
    match &a.out {
        Some(path) => write_xy(path, &sim.data, "x", "y"),
        None => {
            println!("x,y");
            for (x, y) in sim.data.x().iter().zip(sim.data.y()) {
                println!("{},{}", fmt_num(*x), fmt_num(*y));
            }
            Ok(())
        }
    }
}

fn study_command(a: &StudyArgs) -> Result<()> {
    let degree = a.run.degree.unwrap_or(3);
    let config = a
        .run
        .resolve(RunConfig::for_example(a.example, a.n, degree))?;
    let spec = StudySpec {
        example: a.example,
        n: a.n,
        replicates: a.replicates,
        sigma: a.sigma,
        base_seed: a.base_seed,
        config: config.clone(),
        fixed_seeds: false,
        threads: a.threads,
    };
    let r = replicate_study(&spec)?;
    println!(
        "example {} n {} replicates {} failed {}",
        r.example,
        r.n,
        r.replicates,
        r.failures.len()
    );
    println!("estimator,mean_mse,sd_mse");
    println!("map,{},{}", fmt_num(r.map.mean), fmt_num(r.map.sd));
    println!("bma,{},{}", fmt_num(r.bma.mean), fmt_num(r.bma.sd));
    if a.run.out.is_some() || a.run.config.is_some() {
        let dir = &config.output.dir;
        std::fs::create_dir_all(dir)?;
        let mut v = serde_json::to_value(&r)?;
        v["config"] = serde_json::to_value(&config)?;
        std::fs::write(
            dir.join("study.json"),
            serde_json::to_string_pretty(&v)? + "\n",
        )?;
    }
    Ok(())
}

fn load_tombs(path: Option<&Path>) -> Result<Dataset> {
    match path {
        Some(p) => read_xy(p, "d", "r"),
        None => crate::bundle::read_xy_from(TOMBS_CSV.as_bytes(), "d", "r"),
    }
}

fn tombs_command(a: &TombsArgs) -> Result<()> {
    let config = a.run.resolve(RunConfig::tombs())?;
    let raw = load_tombs(a.data.as_deref())?;
    let data = tombs_transform(&raw)?;
    let t = fit_tombs(&data, &config)?;
    let mut summary = fit_summary(&t.fit, &config, data.n());
    summary["tombs"] = tombs_report(&t);
    write_bundle(
        &config.output.dir,
        &Bundle {
            chain: &t.fit.chain,
            curve: select_estimators(&t.fit, &config),
            summary,
        },
    )?;
    println!("MAP change points: {}", join(&t.changepoints));
    println!("segment,log_a,b");
    for (j, s) in t.segments.iter().enumerate() {
        println!("{},{},{}", j + 1, fmt_num(s.log_a), fmt_num(s.b));
    }
    Ok(())
}

fn gpd_command(a: &GpdArgs) -> Result<()> {
    let mut config = a.run.resolve(RunConfig::gpd())?;
    if let Some(v) = a.threshold {
        config.gpd.threshold = v;
    }
    if let Some(v) = a.zeta_u {
        config.gpd.zeta_u = v;
    }
    if let Some(v) = a.n_y {
        config.gpd.n_y = v;
    }
    if let Some(v) = a.return_period {
        config.gpd.return_period = v;
    }
    config.validate()?;
    let data = read_xy(&a.data, "day", "y")?;
    let g = fit_gpd(&data, &config)?;
    write_gpd(&g, &config)
}

fn write_gpd(g: &GpdFit, config: &RunConfig) -> Result<()> {
    let mut curve = Table::new();
    curve.push("day", g.days.clone());
    for (name, c) in [
        ("sigma", &g.sigma),
        ("xi", &g.xi),
        ("return_level", &g.return_level),
    ] {
        curve.push(&format!("{name}_mean"), c.mean.clone());
        curve.push(&format!("{name}_lower"), c.lower.clone());
        curve.push(&format!("{name}_upper"), c.upper.clone());
    }
    let mut summary = common_summary(&g.chain, &g.partition, &g.priors, config, g.chain.len());
    summary["mode_kind"] = serde_json::to_value(g.mode_kind)?;
    summary["map"] = map_json(&g.map);
    summary["nonpositive_sigma_days"] = json!(g.nonpositive_sigma);
    summary["return_period_years"] = json!(config.gpd.return_period);
    write_bundle(
        &config.output.dir,
        &Bundle {
            chain: &g.chain,
            curve,
            summary,
        },
    )?;
    if !g.nonpositive_sigma.is_empty() {
        eprintln!(
            "warning: posterior-mean scale is not positive on {} day(s), first day {}",
            g.nonpositive_sigma.len(),
            g.nonpositive_sigma[0]
        );
    }
    let (lo, hi) = min_max(&g.return_level.mean);
    println!(
        "{}-year return level: min {} max {} (written to {})",
        fmt_num(config.gpd.return_period),
        fmt_num(lo),
        fmt_num(hi),
        config.output.dir.display()
    );
    Ok(())
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(",")
}

fn select_estimators(f: &Fit, config: &RunConfig) -> Table {
    let mut t = f.curve_table();
    let drop = match config.output.estimator {
        Estimator::Map => Some("bma"),
        Estimator::Bma => Some("map"),
        Estimator::Both => None,
    };
    if let Some(name) = drop {
        if let Some(i) = t.headers.iter().position(|h| h == name) {
            t.headers.remove(i);
            t.columns.remove(i);
        }
    }
    t
}

fn map_json(m: &MapEstimate) -> Value {
    json!({
        "iteration": m.iteration,
        "log_post": m.log_post,
        "size": m.state.size(),
        "z": m.state.z_string(),
        "knots": m.state.active_locations(),
        "beta": m.beta,
    })
}

fn common_summary(
    chain: &Chain,
    partition: &IntervalPartition,
    priors: &PriorConfig,
    config: &RunConfig,
    n: usize,
) -> Value {
    let d = diagnostics(chain, partition, priors.max_knots);
    let bounds: Vec<f64> = partition
        .intervals()
        .iter()
        .map(|i| i.lower)
        .chain(partition.intervals().last().map(|i| i.upper))
        .collect();
    json!({
        "seed": config.seed,
        "n": n,
        "samples": chain.len(),
        "interval_bounds": bounds,
        "prior": { "c": priors.c, "lambda": priors.lambda, "max_knots": priors.max_knots },
        "diagnostics": d,
        "config": config,
    })
}

fn fit_summary(f: &Fit, config: &RunConfig, n: usize) -> Value {
    let mut s = common_summary(&f.chain, &f.partition, &f.priors, config, n);
    s["map"] = map_json(&f.map_at_data);
    s["bma"] = json!({
        "used": f.bma_at_data.used,
        "fallbacks": f.bma_at_data.fallbacks,
        "skipped": f.bma_at_data.skipped,
    });
    if let Some(k) = f.mode_kind {
        s["mode_kind"] = json!(k);
    }
    s
}

fn tombs_report(t: &TombsFit) -> Value {
    json!({
        "changepoints": t.changepoints,
        "segments": t.segments.iter().map(|s| json!({ "log_a": s.log_a, "b": s.b })).collect::<Vec<_>>(),
    })
}

fn print_fit(f: &Fit, config: &RunConfig) {
    let m = &f.map_at_data;
    println!(
        "MAP: {} knot(s) at [{}], log posterior {}",
        m.state.size(),
        join(&m.state.active_locations()),
        fmt_num(m.log_post)
    );
    let st = f.chain.stats.model_moves();
    println!(
        "model-move acceptance {} over {} proposals; bundle written to {}",
        fmt_num(st.rate()),
        st.proposed,
        config.output.dir.display()
    );
}
