//! `ratchet`: limit cycles, adiabatic currents, large-field expansions and
//! ensemble simulations of damped ac-driven ratchets.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ratchet_core::forcing::Mollifier;
use ratchet_core::potentials::PotentialSpec;

use config::{parse_potential, parse_value, ConfigError, RunConfig, Study};
use output::{Artifacts, CommandKind, RunManifest, Tolerances};

#[derive(Parser, Debug)]
#[command(name = "ratchet", version, about = "Directed transport in damped, ac-driven periodic potentials")]
struct Cli {
    /// Worker threads for ensemble runs; 1 gives the serial baseline.
    #[arg(long, global = true, env = "RATCHET_THREADS")]
    threads: Option<usize>,

    /// Suppress the JSON summary on stdout.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Running limit cycle v_E(x) of a static field.
    Cycle(CycleArgs),
    /// Adiabatic current of the two-plateau protocol.
    Current(CurrentArgs),
    /// Large-field expansion coefficients and residual scaling.
    Expansion(ExpansionArgs),
    /// Finite-time ensemble current at one (lambda, delta).
    Ensemble(EnsembleArgs),
    /// Ensemble currents over a lambda x delta grid against the adiabatic current.
    Sweep(SweepArgs),
    /// Canned studies: two-harmonic integral, sawtooth sign, tilt sign.
    Reproduce(ReproduceArgs),
    /// Replay a run from its manifest.json.
    Rerun(RerunArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file; flags override its values.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,

    /// cosine | two_harmonic:mu=0.5 | sawtooth:a=1.5pi,b=1,eps=0.05 | tabulated:path=u.csv
    #[arg(long, value_parser = parse_potential)]
    potential: Option<PotentialSpec>,

    /// Damping γ.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args, Debug)]
struct CycleArgs {
    #[command(flatten)]
    common: Common,
    /// Static field E; negative values give the backward cycle.
    #[arg(long, allow_negative_numbers = true)]
    field: Option<f64>,
    /// Grid points per period.
    #[arg(long)]
    grid: Option<usize>,
    /// Fixed-point tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct Fields {
    #[arg(long)]
    e1: Option<f64>,
    #[arg(long)]
    e2: Option<f64>,
}

#[derive(Args, Debug)]
struct CurrentArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    fields: Fields,
    /// Required excess of E1 over M and E2 over m.
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Args, Debug)]
struct ExpansionArgs {
    #[command(flatten)]
    common: Common,
    /// Truncation order N.
    #[arg(long)]
    order: Option<usize>,
    /// Comma-separated fields for the residual scaling.
    #[arg(long, value_delimiter = ',', value_parser = parse_value)]
    fields: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct Sampling {
    /// Horizon K in slow periods.
    #[arg(long)]
    periods: Option<f64>,
    /// Ensemble size n.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long, value_enum)]
    mollifier: Option<MollifierArg>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
enum MollifierArg {
    HalfCosine,
    SmoothBump,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    fields: Fields,
    #[arg(long, value_parser = parse_value)]
    lambda: Option<f64>,
    /// Switching width δ in slow time.
    #[arg(long, value_parser = parse_value)]
    delta: Option<f64>,
    #[command(flatten)]
    sampling: Sampling,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    fields: Fields,
    /// Strictly decreasing, comma-separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_value)]
    lambdas: Option<Vec<f64>>,
    /// Strictly decreasing, comma-separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_value)]
    deltas: Option<Vec<f64>>,
    #[command(flatten)]
    sampling: Sampling,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    study: Option<Study>,
    /// Plateau field of the symmetric protocols.
    #[arg(long)]
    field: Option<f64>,
    /// Base field of the tilted protocol.
    #[arg(long)]
    tilt_field: Option<f64>,
}

#[derive(Args, Debug)]
struct RerunArgs {
    manifest: PathBuf,
    /// Output directory; defaults to the one recorded in the manifest.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        set(&mut cfg.out, self.out.clone());
        set(&mut cfg.potential, self.potential.clone());
        set(&mut cfg.gamma, self.gamma);
        Ok(cfg)
    }
}

impl Fields {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.forcing.e1, self.e1);
        set(&mut cfg.forcing.e2, self.e2);
    }
}

impl Sampling {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.ensemble.periods, self.periods);
        set(&mut cfg.ensemble.samples, self.samples);
        set(&mut cfg.seed, self.seed);
        set(&mut cfg.integrator.rtol, self.rtol);
        set(&mut cfg.integrator.atol, self.atol);
        set(
            &mut cfg.forcing.mollifier,
            self.mollifier.map(|m| match m {
                MollifierArg::HalfCosine => Mollifier::HalfCosine,
                MollifierArg::SmoothBump => Mollifier::SmoothBump,
            }),
        );
    }
}

impl Command {
    fn resolve(self) -> Result<(CommandKind, RunConfig)> {
        Ok(match self {
            Command::Cycle(a) => {
                let mut cfg = a.common.resolve()?;
                set(&mut cfg.cycle.field, a.field);
                set(&mut cfg.cycle.numerics.grid_size, a.grid);
                set(&mut cfg.cycle.numerics.tol, a.tol);
                (CommandKind::Cycle, cfg)
            }
            Command::Current(a) => {
                let mut cfg = a.common.resolve()?;
                a.fields.apply(&mut cfg);
                set(&mut cfg.adiabatic.margin, a.margin);
                (CommandKind::Current, cfg)
            }
            Command::Expansion(a) => {
                let mut cfg = a.common.resolve()?;
                set(&mut cfg.expansion.order, a.order);
                set(&mut cfg.expansion.fields, a.fields);
                (CommandKind::Expansion, cfg)
            }
            Command::Ensemble(a) => {
                let mut cfg = a.common.resolve()?;
                a.fields.apply(&mut cfg);
                set(&mut cfg.forcing.lambda, a.lambda);
                set(&mut cfg.forcing.delta, a.delta);
                a.sampling.apply(&mut cfg);
                (CommandKind::Ensemble, cfg)
            }
            Command::Sweep(a) => {
                let mut cfg = a.common.resolve()?;
                a.fields.apply(&mut cfg);
                set(&mut cfg.sweep.lambdas, a.lambdas);
                set(&mut cfg.sweep.deltas, a.deltas);
                a.sampling.apply(&mut cfg);
                (CommandKind::Sweep, cfg)
            }
            Command::Reproduce(a) => {
                let mut cfg = a.common.resolve()?;
                set(&mut cfg.reproduce.study, a.study);
                set(&mut cfg.reproduce.field, a.field);
                set(&mut cfg.reproduce.tilt_field, a.tilt_field);
                (CommandKind::Reproduce, cfg)
            }
            Command::Rerun(a) => {
                let manifest = RunManifest::load(&a.manifest)?;
                let mut cfg = manifest.config;
                set(&mut cfg.out, a.out);
                (manifest.command, cfg)
            }
        })
    }
}

fn configure_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(ConfigError("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    let (kind, cfg) = cli.command.resolve()?;
    cfg.validate()?;

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let mut artifacts = Artifacts::create(&cfg.out)?;
    let summary = commands::execute(kind, &cfg, &mut artifacts)
        .with_context(|| format!("{} failed", kind.name()))?;
    let dir = artifacts.dir().to_path_buf();
    let mut outputs = artifacts.finish();
    outputs.push("manifest.json".into());

    let manifest = RunManifest {
        command: kind,
        version: env!("CARGO_PKG_VERSION").to_string(),
        tolerances: Tolerances::of(&cfg),
        config: cfg,
        threads: rayon::current_num_threads(),
        started_unix: started,
        duration_seconds: clock.elapsed().as_secs_f64(),
        outputs,
    };
    let mut writer = Artifacts::create(&dir)?;
    writer.json("manifest.json", &manifest)?;

    if !cli.quiet {
        let mut stdout = std::io::stdout().lock();
        match writeln!(stdout, "{}", serde_json::to_string_pretty(&summary)?) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        }
    }
    Ok(())
}

fn core_exit_code(e: &ratchet_core::Error) -> u8 {
    use ratchet_core::Error as E;
    match e {
        E::InvalidParameter { .. } | E::Table(_) | E::Csv(_) | E::Io(_) => 2,
        E::OutOfRegime(_) | E::SingularFlow { .. } | E::NoConvergence { .. } | E::NumericalConsistency(_) => 3,
        E::Integration { .. } => 4,
        E::Sample { source, .. } => core_exit_code(source),
    }
}

/// 2 for configuration errors, 3 for regime or convergence failures, 4 for
/// integration failures, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<ratchet_core::Error>() {
            return core_exit_code(e);
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
