//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::lattice::LossMode;
use crate::par::ExecPolicy;
use crate::scenarios::{self, ScenarioConfig, ScenarioId, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "phonon-lattice", version, about = "Few-excitation itinerant-phonon circuit simulator")]
#[command(args_conflicts_with_subcommands = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a config file and list every violated invariant.
    Validate { config: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossModeArg {
    Leak,
    Jump,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Scenario id (overrides the config file).
    #[arg(long)]
    pub scenario: Option<String>,
    /// Scenario config JSON; defaults apply to anything it omits.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory [default: runs/<scenario>].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override a config value by dotted key, e.g. scatter.kappa_max=0.1.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Sweep as name=start:stop:count, endpoints inclusive.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time step, ns.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Apply readout correction to reported populations.
    #[arg(long, overrides_with = "no_correct")]
    pub correct: bool,
    #[arg(long, overrides_with = "correct")]
    pub no_correct: bool,
    #[arg(long, value_enum)]
    pub loss_mode: Option<LossModeArg>,
}

/// Fully resolved configuration for a run.
pub fn resolve(args: &RunArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = &args.scenario {
        s.parse::<ScenarioId>()?;
        cfg.scenario = s.clone();
    } else if args.config.is_none() {
        return Err(Error::Config(format!("no scenario given; valid ids: {}", ScenarioId::valid_ids())));
    }
    cfg.id()?;
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set '{kv}' must look like key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = &args.sweep {
        cfg.sweep = Some(SweepSpec::parse(s)?);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dt) = args.dt {
        cfg.dt = dt;
    }
    if args.correct {
        cfg.readout.correct = true;
    }
    if args.no_correct {
        cfg.readout.correct = false;
    }
    if let Some(m) = args.loss_mode {
        cfg.loss.mode = match m {
            LossModeArg::Leak => LossMode::Leak,
            LossModeArg::Jump => LossMode::Jump,
        };
    }
    Ok(cfg)
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Violations of the config at `path`, or the load error.
pub fn validate_file(path: &Path) -> Result<Vec<String>> {
    Ok(ScenarioConfig::load(path)?.violations())
}

fn run_scenario(args: &RunArgs) -> Result<PathBuf> {
    let cfg = resolve(args)?;
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Config(format!("invalid configuration:\n  {}", v.join("\n  "))));
    }
    let out = args.out.clone().unwrap_or_else(|| Path::new("runs").join(&cfg.scenario));
    let result = scenarios::run(&cfg, ExecPolicy::from_env())?;
    result.write(&out)?;
    let m = &result.summary.metrics;
    let show = |name: &str, x: Option<f64>| x.map(|v| format!(" {name}={v:.6}")).unwrap_or_default();
    let n = m.n_mean.map(|n| format!(" n_mean=[{:.4}, {:.4}]", n[0], n[1])).unwrap_or_default();
    println!(
        "{}:{}{}{}{} -> {}",
        cfg.scenario,
        show("v_hom", m.v_hom),
        show("v_mz", m.v_mz),
        show("v_ee", m.v_ee),
        n,
        out.display()
    );
    Ok(out)
}

/// Parses `argv` and runs; returns the process exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Some(Command::Validate { config }) => match validate_file(&config) {
            Ok(v) if v.is_empty() => {
                println!("ok");
                EXIT_OK
            }
            Ok(v) => {
                for line in v {
                    println!("{line}");
                }
                EXIT_CONFIG
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        None => match run_scenario(&cli.run) {
            Ok(_) => EXIT_OK,
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
    }
}
