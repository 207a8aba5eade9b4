use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use finite_bath::harness::{self, config::RunConfig, Scenario};

/// Exact finite-bath thermalization runs compared against HAM rate equations.
#[derive(Parser, Debug)]
#[command(name = "finite-bath", version)]
struct Cli {
    /// JSON run configuration; the bundled preset when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for ensembles and sweeps (overrides `workers`).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Seeds {
    /// Seed of the random coupling matrix.
    #[arg(long)]
    coupling_seed: Option<u64>,
    /// Seed of the random bath part of the initial state.
    #[arg(long)]
    bath_seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the Markovianity and homogeneity conditions only.
    Check {
        #[command(flatten)]
        seeds: Seeds,
    },
    /// One trajectory with HAM overlay and D².
    Evolve {
        #[command(flatten)]
        seeds: Seeds,
        /// Initial state: excited, superposition or subspace_random.
        #[arg(long)]
        initial: Option<String>,
    },
    /// Correlated-state ensemble and D histogram.
    Ensemble {
        #[command(flatten)]
        seeds: Seeds,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        ensemble_seed: Option<u64>,
    },
    /// D² versus environment size with a log-log fit.
    Sweep {
        #[command(flatten)]
        seeds: Seeds,
    },
    /// Band kernel and recurrence diagnostics.
    Kernel {
        #[command(flatten)]
        seeds: Seeds,
    },
    /// Forward and backward propagation, plus the zero-width variant.
    Reverse {
        #[command(flatten)]
        seeds: Seeds,
    },
}

fn apply_seeds(cfg: &mut RunConfig, seeds: &Seeds) {
    if let Some(s) = seeds.coupling_seed {
        cfg.model.seed_coupling = s;
    }
    if let Some(s) = seeds.bath_seed {
        cfg.initial_state.seed = s;
    }
}

fn configure(cli: &Cli) -> finite_bath::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => harness::load_config(path)?,
        None => RunConfig::paper(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    let (scenario, seeds) = match &cli.command {
        Command::Check { seeds } => (Scenario::Check, seeds),
        Command::Evolve { seeds, initial } => {
            if let Some(kind) = initial {
                let quoted = format!("\"{kind}\"");
                cfg.initial_state.kind =
                    serde_json::from_str(&quoted).map_err(|_| harness::config::ConfigError::Invalid {
                        key: "initial_state.kind".into(),
                        reason: format!("unknown kind `{kind}` (excited, superposition, subspace_random)"),
                    })?;
            }
            (Scenario::Evolve, seeds)
        }
        Command::Ensemble { seeds, size, ensemble_seed } => {
            if let Some(n) = size {
                cfg.ensemble.size = *n;
            }
            if let Some(s) = ensemble_seed {
                cfg.ensemble.seed = *s;
            }
            (Scenario::Ensemble, seeds)
        }
        Command::Sweep { seeds } => (Scenario::Sweep, seeds),
        Command::Kernel { seeds } => (Scenario::Kernel, seeds),
        Command::Reverse { seeds } => (Scenario::Reverse, seeds),
    };
    cfg.scenario = scenario;
    apply_seeds(&mut cfg, seeds);
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match configure(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let run = harness::run_scenario(&cfg).and_then(|result| {
        let manifest = harness::write_outputs(&result, &cfg.output_dir)?;
        Ok((result, manifest))
    });
    match run {
        Ok((result, manifest)) => {
            let r = &result.report;
            println!("scenario {} -> {}", cfg.scenario.name(), cfg.output_dir.display());
            println!(
                "conditions: 2*lambda*N/de = {:.4}, lambda^2*N/de^2 = {:.3e}, pass = {}",
                r.conditions.criterion_one, r.conditions.criterion_two, r.conditions.pass
            );
            if let Some(d) = &r.deviation {
                println!("D = {:.5} (D^2 = {:.3e}, tau = {})", d.d, d.d_squared, d.tau);
            }
            if let Some(e) = &r.equilibria {
                println!(
                    "rho11 equilibrium: exact {:.4}, HAM {:.4}, Born {:.5}",
                    e.exact, e.ham_generalized, e.born_approximation
                );
            }
            if let Some(e) = &r.ensemble {
                println!("ensemble: median D {:.5}, fraction D <= 0.05: {:.3}", e.median_d, e.fraction_d_le_0_05);
            }
            if let Some(fit) = r.sweep.as_ref().and_then(|s| s.fit.as_ref()) {
                println!("sweep: slope of ln D^2 vs ln N = {:.3}", fit.slope);
            }
            for f in &manifest.files {
                println!("  {} {}", &f.sha256[..16], f.file);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
