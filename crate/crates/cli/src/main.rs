//! `sim`: run PCM crossbar learning experiments from a JSON config.
//!
//! Exit codes: 0 success, 2 usage error, 3 config error, 4 I/O error, 5 simulation error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcm_crossbar::artifacts::{
    load_config, read_matrix_csv, write_curve_csv, write_learn_artifacts, write_probe_artifacts,
    write_sweep_csv, ArtifactError,
};
use pcm_crossbar::{
    compute_thresholds, gradual_set_curve, learn_and_recall, recall_probe, recall_success, rng,
    variation_sweep, CrossbarArray, ExperimentConfig, SimError,
};

#[derive(Parser, Debug)]
#[command(
    name = "sim",
    version,
    about = "Phase-change synapse array learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Override the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's max_epochs.
    #[arg(long, global = true)]
    epochs: Option<u32>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the configured patterns and probe recall after every epoch.
    Learn,
    /// Run one read-only recall probe on a stored resistance matrix.
    Recall {
        /// Resistance matrix CSV to probe.
        #[arg(long)]
        array: PathBuf,
        /// Untrained matrix CSV for thresholds; regenerated from the config and seed if absent.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Sweep initial variation over the config's `sweep` section.
    Sweep,
    /// Gradual-SET trajectory of a single cell.
    DeviceCurve {
        /// Number of SET pulses.
        #[arg(long, default_value_t = 20)]
        pulses: u32,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Io(String),
    Sim(SimError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::Io(_) => 4,
            CliError::Sim(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Io(msg) => write!(f, "I/O error: {msg}"),
            CliError::Sim(e) => write!(f, "simulation error: {e}"),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

/// Errors while writing outputs or reading auxiliary inputs.
fn output_err(e: ArtifactError) -> CliError {
    match e {
        ArtifactError::Io { .. } => CliError::Io(e.to_string()),
        ArtifactError::Parse { .. } => CliError::Config(e.to_string()),
        ArtifactError::Sim(e) => CliError::Sim(e),
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, CliError> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut config = load_config(path).map_err(|e| match e {
        ArtifactError::Io { .. } => CliError::Io(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(epochs) = common.epochs {
        config.max_epochs = epochs;
    }
    config
        .validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(config)
}

fn load_matrix(path: &Path, config: &ExperimentConfig) -> Result<CrossbarArray, CliError> {
    let rows = read_matrix_csv(path).map_err(output_err)?;
    CrossbarArray::from_resistances(&rows, &config.device)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = load(&cli.common)?;
    let out = &cli.common.out_dir;
    let say = |msg: String| {
        if !cli.common.quiet {
            println!("{msg}");
        }
    };

    match &cli.command {
        Command::Learn => {
            let report = learn_and_recall(&config)?;
            let files = write_learn_artifacts(out, &report).map_err(output_err)?;
            let epochs = report.epochs_to_recall.map_or_else(
                || format!("not reached in {} epochs", report.epochs_run),
                |e| e.to_string(),
            );
            say(format!(
                "epochs_to_recall: {epochs}\ntotal_energy_J: {:e}\nwrote {} files to {}",
                report.total_energy,
                files.len(),
                out.display()
            ));
        }
        Command::Recall { array, baseline } => {
            let trained = load_matrix(array, &config)?;
            let untrained = match baseline {
                Some(path) => load_matrix(path, &config)?,
                None => {
                    let mut init_rng = rng::stream(config.seed, rng::INIT_STREAM);
                    CrossbarArray::init(config.n, &config.init, &config.device, &mut init_rng)?
                }
            };
            if trained.n() != config.n || untrained.n() != config.n {
                return Err(CliError::Config(format!(
                    "array dimension {} / baseline {} does not match config n = {}",
                    trained.n(),
                    untrained.n(),
                    config.n
                )));
            }
            let thresholds =
                compute_thresholds(&untrained, &config.recall_stimulus, &config.protocol)?;
            let probe = recall_probe(
                &trained,
                &config.recall_stimulus,
                &thresholds,
                &config.protocol,
                config.n,
            )?;
            write_probe_artifacts(out, &probe).map_err(output_err)?;
            let recalled: Vec<usize> = probe.final_set.iter().map(|i| i + 1).collect();
            say(format!(
                "final firing set (1-based): {recalled:?}\nrecall_success: {}\nconverged: {}",
                recall_success(&probe.final_set, &config.recall_target),
                probe.converged
            ));
        }
        Command::Sweep => {
            let sweep = config
                .sweep
                .as_ref()
                .ok_or_else(|| CliError::Config("config has no `sweep` section".into()))?;
            let rows = variation_sweep(&config, &sweep.cvs, sweep.seeds_per_cv)?;
            let path = out.join("sweep.csv");
            write_sweep_csv(&path, &rows).map_err(output_err)?;
            for row in &rows {
                say(format!(
                    "cv {:.3}: median epochs {}, mean energy {:e} J, success {:.3}",
                    row.cv, row.median_epochs, row.mean_energy, row.success_rate
                ));
            }
            say(format!("wrote {}", path.display()));
        }
        Command::DeviceCurve { pulses } => {
            let r_start = config.init.median(&config.device);
            let curve = gradual_set_curve(
                &config.device,
                &config.protocol.program_pulse,
                r_start,
                *pulses,
                config.seed,
            )?;
            let path = out.join("device_curve.csv");
            write_curve_csv(&path, &curve).map_err(output_err)?;
            say(format!(
                "wrote {} points to {}",
                curve.len(),
                path.display()
            ));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
