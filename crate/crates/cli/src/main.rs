//! `pcmsyn` command-line driver.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 non-convergence, 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use pcmsyn::harness::{self, Provenance};
use pcmsyn::metrics::{read_voltage_sensitivity, variation_sweep};
use pcmsyn::{Error, Execution, RunConfig};

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "pcmsyn", about = "PCM crossbar Hopfield learning simulator")]
struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true, env = "PCMSYN_CONFIG")]
    config: Option<PathBuf>,

    /// Root seed, overriding the config file. For `calibrate` it sets the
    /// calibration seed base instead.
    #[arg(long, global = true, env = "PCMSYN_SEED")]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, env = "PCMSYN_OUT", default_value = "out")]
    out: PathBuf,

    /// Suppress summary lines on stdout.
    #[arg(long, global = true, env = "PCMSYN_QUIET")]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Binary cycling, array distribution and gradual-SET staircases (fig2*.csv).
    Characterize {
        /// SET/RESET pairs in the binary cycling sequence.
        #[arg(long, env = "PCMSYN_CYCLES")]
        cycles: Option<usize>,
    },
    /// Two-pattern learning on one array per cv.
    Learn {
        #[arg(long, env = "PCMSYN_MAX_EPOCHS")]
        max_epochs: Option<usize>,
        /// Comma-separated cvs, e.g. `0.60,0.09`.
        #[arg(long, env = "PCMSYN_CV")]
        cv: Option<String>,
    },
    /// Multi-seed epochs/energy table and read-voltage sensitivity.
    Sweep {
        /// Array seeds per cv.
        #[arg(long, env = "PCMSYN_SEEDS")]
        seeds: Option<usize>,
        #[arg(long, env = "PCMSYN_CV")]
        cv: Option<String>,
    },
    /// Grid search of the device schedule against the epoch targets.
    Calibrate {
        #[arg(long, env = "PCMSYN_SEEDS")]
        seeds: Option<usize>,
    },
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    NonConverged(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn parse_cvs(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("bad cv `{s}`: {e}"))))
        .collect()
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let (Some(seed), false) = (cli.seed, matches!(cli.command, Command::Calibrate { .. })) {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Characterize { cycles } => {
            if let Some(c) = cycles {
                cfg.characterize.cycles = *c;
            }
        }
        Command::Learn { max_epochs, cv } => {
            if let Some(m) = max_epochs {
                cfg.network.max_epochs = *m;
            }
            if let Some(cv) = cv {
                cfg.variations = parse_cvs(cv)?;
            }
        }
        Command::Sweep { seeds, cv } => {
            if let Some(n) = seeds {
                cfg.sweep.seeds = *n;
            }
            if let Some(cv) = cv {
                cfg.variations = parse_cvs(cv)?;
            }
        }
        Command::Calibrate { seeds } => {
            if let Some(seed) = cli.seed {
                cfg.calibrate.seed = seed;
            }
            if let Some(n) = seeds {
                cfg.calibrate.seeds = *n;
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn characterize(cfg: &RunConfig, out: &Path, prov: &Provenance, quiet: bool) -> Result<(), Failure> {
    let ch = harness::characterize_device(&cfg.device, &cfg.characterize, cfg.seed)?;
    let files = harness::write_characterization(&ch, out, prov)?;
    if !quiet {
        for f in files {
            println!("wrote {}", f.display());
        }
    }
    Ok(())
}

fn learn(cfg: &RunConfig, out: &Path, prov: &Provenance, quiet: bool) -> Result<(), Failure> {
    let scenarios = cfg.scenarios();
    let outcomes = Execution::default().map(&scenarios, harness::run_learn);
    let mut stuck = Vec::new();
    for (sc, outcome) in scenarios.iter().zip(outcomes) {
        let outcome = outcome?;
        harness::write_learn_outputs(&outcome, &out.join(&sc.name), prov)?;
        let epochs = match outcome.first.epochs_to_recall {
            Some(n) => n.to_string(),
            None => {
                stuck.push(format!("cv={:.2}", sc.variation.cv));
                "none".to_string()
            }
        };
        if !quiet {
            println!("cv={:.2} epochs={} energy={:.2e}", sc.variation.cv, epochs, outcome.first.total_energy);
        }
        if outcome.first.converged() && !outcome.second.converged() {
            stuck.push(format!("cv={:.2} (pattern 2)", sc.variation.cv));
        }
    }
    if stuck.is_empty() {
        Ok(())
    } else {
        Err(Failure::NonConverged(stuck))
    }
}

fn sweep(cfg: &RunConfig, out: &Path, prov: &Provenance, quiet: bool) -> Result<(), Failure> {
    let exec = Execution::default();
    let rows = variation_sweep(&cfg.variation_specs(), &cfg.sweep_seeds(), &cfg.device, &cfg.network, exec)?;
    let settings = cfg.figure_settings();
    let sens = exec.map(&cfg.scenarios(), |sc| {
        read_voltage_sensitivity(sc, &settings.sensitivity_grid, settings.replay, Execution::Sequential)
    });

    harness::write_sweep(&rows, out, prov)?;

    for (sc, s) in cfg.scenarios().iter().zip(sens) {
        let tag = format!("{:.2}", sc.variation.cv);
        match s {
            Ok(s) => {
                harness::write_sensitivity(&s, &out.join(format!("sensitivity_{tag}.json")), prov)?;
                if !quiet {
                    let flip = s.min_relative_perturbation.map_or("none".to_string(), |d| format!("{d:.2}"));
                    println!("cv={tag} sensitivity={flip}");
                }
            }
            Err(Error::NonConvergent { max_epochs }) => {
                eprintln!("warning: cv={tag}: no sensitivity, the array does not recall within {max_epochs} epochs");
            }
            Err(e) => return Err(e.into()),
        }
    }
    if !quiet {
        for r in &rows {
            let epochs = r.median_epochs.map_or("none".to_string(), |m| m.to_string());
            let energy = r.median_energy.map_or("none".to_string(), |j| format!("{j:.2e}"));
            println!("cv={:.2} epochs={epochs} energy={energy}", r.cv);
        }
    }
    Ok(())
}

fn calibrate(cfg: &RunConfig, out: &Path, prov: &Provenance, quiet: bool) -> Result<(), Failure> {
    let result = harness::calibrate_epochs(
        &cfg.device,
        &cfg.network,
        &cfg.calibrate.targets,
        &cfg.calibrate.grid,
        &cfg.calibrate_seeds(),
        Execution::default(),
    )?;
    let tuned = RunConfig {
        device: result.params.clone(),
        ..cfg.clone()
    };
    harness::write_calibration(&result, &tuned.to_toml_string(), out, prov)?;

    if !quiet {
        for p in &result.points {
            let m = p.median_epochs.map_or("none".to_string(), |m| m.to_string());
            println!("cv={:.2} target={} median_epochs={m}", p.cv, p.target);
        }
        let d = &result.params;
        println!(
            "residual={} step_scale={} first_step_scale={} sigma_c2c={} device_variance_share={}",
            result.residual, d.step_scale, d.first_step_scale, d.sigma_c2c, d.device_variance_share
        );
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let seed = match cli.command {
        Command::Calibrate { .. } => cfg.calibrate.seed,
        _ => cfg.seed,
    };
    let prov = Provenance::new(seed, cfg.hash());
    let out = cli.out.as_path();
    match cli.command {
        Command::Characterize { .. } => characterize(&cfg, out, &prov, cli.quiet),
        Command::Learn { .. } => learn(&cfg, out, &prov, cli.quiet),
        Command::Sweep { .. } => sweep(&cfg, out, &prov, cli.quiet),
        Command::Calibrate { .. } => calibrate(&cfg, out, &prov, cli.quiet),
    }
}

fn main() -> ExitCode {
    let version = format!("{} (default config {})", pcmsyn::VERSION, RunConfig::default().hash());
    let matches = Cli::command().version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NonConverged(which)) => {
            eprintln!("error: no recall within the epoch limit for {}", which.join(", "));
            ExitCode::from(EXIT_NONCONVERGED)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => EXIT_CONFIG,
                Error::Io { .. } => EXIT_IO,
                Error::NonConvergent { .. } => EXIT_NONCONVERGED,
                _ => EXIT_OTHER,
            })
        }
    }
}
