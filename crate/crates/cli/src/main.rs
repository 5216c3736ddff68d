use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{ConfigError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lorenz-pssp", version, about = "Parameter-shifted shadowing for geometric Lorenz maps and flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the admissibility conditions and the derived constants.
    Check(Common),
    /// Shadow pseudo-orbits of the 1D and planar maps.
    ShadowMap(Common),
    /// Shadow pseudo-orbits of the flow with reparametrized time.
    ShadowFlow(Common),
    /// Adversarial search for pseudo-orbits the unshifted map cannot shadow.
    Probe(ProbeArgs),
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// JSON config: a map spec, a flow spec or an experiment description.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds: `a..b`, `a,b,c` or a single value.
    #[arg(long)]
    seeds: Option<String>,
    /// Target accuracies, comma separated.
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Orbit modes, comma separated.
    #[arg(long, value_delimiter = ',')]
    mode: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Clone)]
pub struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    /// Step bound of the probed pseudo-orbits.
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    /// Number of independent restarts.
    #[arg(long, default_value_t = 4)]
    budget: usize,
}

/// Flags layered over the config file.
pub struct Resolved {
    pub cfg: ExperimentConfig,
    pub fingerprint: String,
    pub out: PathBuf,
}

impl Common {
    fn resolve(&self) -> Result<Resolved, ConfigError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.seeds {
            cfg.seeds = config::parse_seeds(s)?;
        }
        if !self.epsilon.is_empty() {
            cfg.epsilons = self.epsilon.clone();
        }
        if let Some(n) = self.steps {
            cfg.n_steps = Some(n);
        }
        if !self.mode.is_empty() {
            cfg.modes = self.mode.clone();
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(e) = cfg.epsilons.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(ConfigError(format!("epsilon {e} outside (0, 1)")));
        }
        if let Err(e) = cfg.flow_spec().validate() {
            return Err(ConfigError(format!("invalid spec: {e}")));
        }
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let fingerprint = cfg.fingerprint();
        Ok(Resolved { cfg, fingerprint, out })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Check(c) | Command::ShadowMap(c) | Command::ShadowFlow(c) => c,
        Command::Probe(p) => &p.common,
    };
    if let Some(j) = common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let resolved = match common.resolve() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = match &cli.command {
        Command::Check(_) => commands::check(&resolved),
        Command::ShadowMap(_) => commands::shadow_map(&resolved),
        Command::ShadowFlow(_) => commands::shadow_flow(&resolved),
        Command::Probe(p) => commands::probe(&resolved, p.delta, p.budget),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
