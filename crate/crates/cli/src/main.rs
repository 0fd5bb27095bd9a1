//! `tiediv`: run the encounter-diversity pipeline stage by stage.

mod artifacts;
mod config;
mod stages;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing {}: run {stage} first (`tiediv {stage}`)", path.display())]
    Missing { path: PathBuf, stage: String },
    #[error(transparent)]
    Core(#[from] tiediv::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("artifact check failed: {0}")]
    Artifact(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(tiediv::Error::Config(_)) => 2,
            _ => 1,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "tiediv",
    version,
    about = "Encounter diversity and social tie strength from GPS traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Parse the raw GPS log and survey into canonical tables
    Ingest,
    /// Snap to five-minute slots, filter and keep well-covered users
    Preprocess,
    /// Detect co-located slots for surveyed pairs
    Encounters,
    /// Temporal diversity, location diversity and mean encounters per answer
    Features,
    /// F-test each feature against closeness and rank them
    Compare,
    /// Temporal diversity F-test across interval widths
    SweepT,
    /// Temporal diversity F-test across diversity orders
    SweepQ,
    /// Feature distributions per closeness label
    Subgroups,
    /// Mean temporal diversity over growing observation horizons
    Evolve,
    /// Generate a labeled synthetic GPS log and survey
    Synth,
    /// Every stage from ingest to evolve
    All,
}

/// Settings shared by all subcommands. Each flag overrides the same key
/// in the `--config` file.
#[derive(Args, Default)]
struct Settings {
    /// Flat `key = value` file using the flag names below as keys
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Raw GPS log
    #[arg(long, global = true, value_name = "PATH")]
    gps: Option<String>,
    /// Closeness survey
    #[arg(long, global = true, value_name = "PATH")]
    survey: Option<String>,
    /// Directory for all artifacts [default: tiediv-out]
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<String>,
    /// Field delimiter of the raw inputs ("tab" for tabs) [default: ,]
    #[arg(long, global = true)]
    delimiter: Option<String>,
    /// First local date analysed [default: 2016-04-01]
    #[arg(long, global = true, value_name = "DATE")]
    date_start: Option<String>,
    /// Exclusive end of the local date window [default: 2016-05-01]
    #[arg(long, global = true, value_name = "DATE")]
    date_end: Option<String>,
    /// Local time zone of the study site [default: +05:30]
    #[arg(long, global = true, value_name = "OFFSET", allow_hyphen_values = true)]
    utc_offset: Option<String>,
    /// Drop fixes with accuracy at or above this many meters [default: 60]
    #[arg(long, global = true, value_name = "M")]
    accuracy_cutoff: Option<String>,
    /// Fraction of the 288 daily slots a valid day needs [default: 0.2]
    #[arg(long, global = true, value_name = "F")]
    coverage_fraction: Option<String>,
    /// Valid days a user needs [default: 5]
    #[arg(long, global = true, value_name = "N")]
    min_days: Option<String>,
    /// Common valid days a pair needs [default: 7]
    #[arg(long, global = true, value_name = "N")]
    min_common_days: Option<String>,
    /// Encounter distance in meters [default: 50]
    #[arg(long, global = true, value_name = "M")]
    threshold_m: Option<String>,
    /// Interval width in minutes for temporal diversity [default: 60]
    #[arg(long, global = true, value_name = "MIN")]
    width_t: Option<String>,
    /// Diversity order; 1 is Shannon [default: 1]
    #[arg(long, global = true)]
    q: Option<String>,
    /// Comma-separated widths for sweep-t
    #[arg(long, global = true, value_name = "LIST")]
    widths: Option<String>,
    /// Comma-separated orders for sweep-q
    #[arg(long, global = true, value_name = "LIST")]
    orders: Option<String>,
    /// Comma-separated horizons in days for evolve
    #[arg(long, global = true, value_name = "LIST")]
    horizons: Option<String>,
    /// Random seed for synth [default: 7]
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Pairs per archetype for synth [default: 20]
    #[arg(long, global = true, value_name = "N")]
    synth_pairs: Option<String>,
    /// Days generated by synth [default: 14]
    #[arg(long, global = true, value_name = "N")]
    synth_days: Option<String>,
    /// Encounters on each meeting day [default: 4]
    #[arg(long, global = true, value_name = "N")]
    synth_encounters_per_day: Option<String>,
    /// Chance that a synthetic pair meets on a day [default: 0.75]
    #[arg(long, global = true, value_name = "P")]
    synth_meet_probability: Option<String>,
    /// Daily anchor slots of scheduled pairs [default: 3]
    #[arg(long, global = true, value_name = "N")]
    synth_schedule_slots: Option<String>,
    /// Slots a scheduled encounter may stray from its anchor [default: 2]
    #[arg(long, global = true, value_name = "N")]
    synth_jitter: Option<String>,
}

impl Settings {
    fn overrides(&self) -> Vec<(&'static str, &Option<String>)> {
        vec![
            ("gps", &self.gps),
            ("survey", &self.survey),
            ("out-dir", &self.out_dir),
            ("delimiter", &self.delimiter),
            ("date-start", &self.date_start),
            ("date-end", &self.date_end),
            ("utc-offset", &self.utc_offset),
            ("accuracy-cutoff", &self.accuracy_cutoff),
            ("coverage-fraction", &self.coverage_fraction),
            ("min-days", &self.min_days),
            ("min-common-days", &self.min_common_days),
            ("threshold-m", &self.threshold_m),
            ("width-t", &self.width_t),
            ("q", &self.q),
            ("widths", &self.widths),
            ("orders", &self.orders),
            ("horizons", &self.horizons),
            ("seed", &self.seed),
            ("synth-pairs", &self.synth_pairs),
            ("synth-days", &self.synth_days),
            ("synth-encounters-per-day", &self.synth_encounters_per_day),
            ("synth-meet-probability", &self.synth_meet_probability),
            ("synth-schedule-slots", &self.synth_schedule_slots),
            ("synth-jitter", &self.synth_jitter),
        ]
    }

    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.load_file(path)?;
        }
        for (key, value) in self.overrides() {
            debug_assert!(config::KEYS.contains(&key));
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.settings.resolve()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    match cli.command {
        Command::Ingest => stages::ingest(&cfg),
        Command::Preprocess => stages::preprocess(&cfg),
        Command::Encounters => stages::encounters(&cfg),
        Command::Features => stages::features(&cfg),
        Command::Compare => stages::compare(&cfg),
        Command::SweepT => stages::sweep_t(&cfg),
        Command::SweepQ => stages::sweep_q_stage(&cfg),
        Command::Subgroups => stages::subgroups(&cfg),
        Command::Evolve => stages::evolve(&cfg),
        Command::Synth => stages::synth(&cfg),
        Command::All => stages::all(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
