use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mclab_runner::{run, ConfigError, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "mclab",
    version,
    about = "Numerical laboratory for partially hyperbolic skew products"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (all cores by default).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Cone invariance and domination rate.
    VerifyPh(Common),
    /// Central Lyapunov exponent along one orbit.
    Lyapunov(Common),
    /// Negative central exponents on random admissible curves.
    MostlyContracting(Common),
    /// Density of the uniformly contracting set and Pliss times.
    Pliss(Common),
    /// Disintegration of a pushed-forward carrier measure.
    Disintegrate {
        #[command(flatten)]
        common: Common,
        /// Carrier CSV (columns s,theta,t,slope,phi).
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        a: Option<f64>,
    },
    /// Closed-form checks of the one-dimensional disintegration model.
    ToyCheck(Common),
    /// Physical measures from grid Birkhoff averages.
    Physical(Common),
    /// Basin map and intermingling statistics.
    Basins(Common),
    /// Holonomy between two carriers.
    Holonomy(Common),
    /// Stationary measures under shrinking noise.
    Stochastic {
        #[command(flatten)]
        common: Common,
        /// Comma-separated, strictly decreasing noise levels.
        #[arg(long, value_delimiter = ',')]
        eps_list: Option<Vec<f64>>,
        #[arg(long)]
        chains: Option<usize>,
    },
    /// Number and position of physical measures across a parameter range.
    Sweep(Common),
}

fn prepare(command: Command) -> Result<(Experiment, Common, ExperimentConfig)> {
    let load = |c: &Common| -> Result<ExperimentConfig> {
        let mut cfg = match &c.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = c.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    };
    let simple = |exp, c: Common| -> Result<_> {
        let cfg = load(&c)?;
        Ok((exp, c, cfg))
    };
    match command {
        Command::VerifyPh(c) => simple(Experiment::VerifyPh, c),
        Command::Lyapunov(c) => simple(Experiment::Lyapunov, c),
        Command::MostlyContracting(c) => simple(Experiment::MostlyContracting, c),
        Command::Pliss(c) => simple(Experiment::Pliss, c),
        Command::ToyCheck(c) => simple(Experiment::ToyCheck, c),
        Command::Physical(c) => simple(Experiment::Physical, c),
        Command::Basins(c) => simple(Experiment::Basins, c),
        Command::Holonomy(c) => simple(Experiment::Holonomy, c),
        Command::Sweep(c) => simple(Experiment::Sweep, c),
        Command::Disintegrate { common, input, n, a } => {
            let mut cfg = load(&common)?;
            let d = &mut cfg.disintegrate;
            d.input = input.or(d.input.take());
            d.n = n.unwrap_or(d.n);
            d.a = a.unwrap_or(d.a);
            Ok((Experiment::Disintegrate, common, cfg))
        }
        Command::Stochastic {
            common,
            eps_list,
            chains,
        } => {
            let mut cfg = load(&common)?;
            let s = &mut cfg.stochastic;
            if let Some(e) = eps_list {
                s.eps_list = e;
            }
            s.chains = chains.unwrap_or(s.chains);
            Ok((Experiment::Stochastic, common, cfg))
        }
    }
}

fn execute(command: Command) -> Result<()> {
    let (exp, common, cfg) = prepare(command)?;
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(ConfigError("--threads: need at least one thread".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let outcome = run(exp, &cfg, &common.out)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
