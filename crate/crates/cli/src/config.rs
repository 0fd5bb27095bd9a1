//! Run configuration: defaults, a flat `key = value` file, then flags.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{FixedOffset, NaiveDate, NaiveDateTime};
use tiediv::encounter::DEFAULT_THRESHOLD_M;
use tiediv::experiments::{default_orders, SynthConfig, DEFAULT_HORIZONS, DEFAULT_WIDTHS};
use tiediv::features::check_width;
use tiediv::{FeatureParams, PreprocessConfig};

use crate::CliError;

/// Every key accepted in a config file, also accepted as `--<key>`.
pub const KEYS: &[&str] = &[
    "gps",
    "survey",
    "out-dir",
    "delimiter",
    "date-start",
    "date-end",
    "utc-offset",
    "accuracy-cutoff",
    "coverage-fraction",
    "min-days",
    "min-common-days",
    "threshold-m",
    "width-t",
    "q",
    "widths",
    "orders",
    "horizons",
    "seed",
    "synth-pairs",
    "synth-days",
    "synth-encounters-per-day",
    "synth-meet-probability",
    "synth-schedule-slots",
    "synth-jitter",
];

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub gps: Option<PathBuf>,
    pub survey: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub delimiter: u8,
    pub preprocess: PreprocessConfig,
    pub threshold_m: f64,
    pub width_t: u32,
    pub q: f64,
    pub widths: Vec<u32>,
    pub orders: Vec<f64>,
    pub horizons: Vec<usize>,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = FeatureParams::default();
        RunConfig {
            gps: None,
            survey: None,
            out_dir: PathBuf::from("tiediv-out"),
            delimiter: b',',
            preprocess: PreprocessConfig::default(),
            threshold_m: DEFAULT_THRESHOLD_M,
            width_t: params.width_min,
            q: params.q,
            widths: DEFAULT_WIDTHS.to_vec(),
            orders: default_orders(),
            horizons: DEFAULT_HORIZONS.collect(),
            synth: SynthConfig {
                pairs_per_archetype: 20,
                ..SynthConfig::default()
            },
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid value for {key}: {value:?} ({e})")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, CliError>
where
    T::Err: Display,
{
    let items: Vec<T> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Usage(format!("{key} needs at least one value")));
    }
    Ok(items)
}

fn parse_datetime(key: &str, value: &str) -> Result<NaiveDateTime, CliError> {
    let v = value.trim();
    if let Ok(d) = NaiveDate::parse_from_str(v, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight exists"));
    }
    NaiveDateTime::parse_from_str(v, "%Y-%m-%dT%H:%M:%S")
        .or_else(|_| NaiveDateTime::parse_from_str(v, "%Y-%m-%d %H:%M:%S"))
        .map_err(|_| {
            CliError::Usage(format!(
                "invalid value for {key}: {value:?} (expected YYYY-MM-DD[THH:MM:SS])"
            ))
        })
}

fn parse_delimiter(value: &str) -> Result<u8, CliError> {
    match value {
        "\\t" | "tab" => Ok(b'\t'),
        v if v.len() == 1 && v.is_ascii() => Ok(v.as_bytes()[0]),
        _ => Err(CliError::Usage(format!(
            "delimiter must be a single ASCII character, got {value:?}"
        ))),
    }
}

fn join<T: Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let p = &mut self.preprocess;
        match key {
            "gps" => self.gps = Some(PathBuf::from(value)),
            "survey" => self.survey = Some(PathBuf::from(value)),
            "out-dir" => self.out_dir = PathBuf::from(value),
            "delimiter" => self.delimiter = parse_delimiter(value)?,
            "date-start" => p.window_start = parse_datetime(key, value)?,
            "date-end" => p.window_end = parse_datetime(key, value)?,
            "utc-offset" => {
                let offset: FixedOffset = parse(key, value)?;
                p.utc_offset = offset;
                self.synth.utc_offset = offset;
            }
            "accuracy-cutoff" => p.accuracy_cutoff_m = parse(key, value)?,
            "coverage-fraction" => p.coverage_fraction = parse(key, value)?,
            "min-days" => p.min_days = parse(key, value)?,
            "min-common-days" => p.min_common_days = parse(key, value)?,
            "threshold-m" => self.threshold_m = parse(key, value)?,
            "width-t" => self.width_t = parse(key, value)?,
            "q" => self.q = parse(key, value)?,
            "widths" => self.widths = parse_list(key, value)?,
            "orders" => self.orders = parse_list(key, value)?,
            "horizons" => self.horizons = parse_list(key, value)?,
            "seed" => self.synth.seed = parse(key, value)?,
            "synth-pairs" => self.synth.pairs_per_archetype = parse(key, value)?,
            "synth-days" => self.synth.n_days = parse(key, value)?,
            "synth-encounters-per-day" => self.synth.encounters_per_day = parse(key, value)?,
            "synth-meet-probability" => self.synth.meet_probability = parse(key, value)?,
            "synth-schedule-slots" => self.synth.schedule_slots = parse(key, value)?,
            "synth-jitter" => self.synth.jitter_slots = parse(key, value)?,
            _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a file of `key = value` lines; `#` starts a comment line.
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected key = value",
                    path.display(),
                    i + 1
                )));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: tiediv::Error| CliError::Usage(e.to_string());
        self.preprocess.validate().map_err(usage)?;
        if !(self.threshold_m > 0.0) {
            return Err(CliError::Usage("threshold-m must be positive".into()));
        }
        check_width(self.width_t).map_err(usage)?;
        for &w in &self.widths {
            check_width(w).map_err(usage)?;
        }
        if !(self.q >= 0.0) || self.orders.iter().any(|q| !(*q >= 0.0)) {
            return Err(CliError::Usage("orders must be non-negative".into()));
        }
        if self.horizons.contains(&0) {
            return Err(CliError::Usage("horizons must be at least one day".into()));
        }
        Ok(())
    }

    pub fn features(&self) -> FeatureParams {
        FeatureParams {
            width_min: self.width_t,
            q: self.q,
        }
    }

    /// Settings echoed into artifact headers. Paths are left out so that
    /// identical inputs give identical bytes wherever they live.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let p = &self.preprocess;
        let s = &self.synth;
        vec![
            (
                "delimiter",
                (self.delimiter as char).escape_default().to_string(),
            ),
            (
                "date-start",
                p.window_start.format("%Y-%m-%dT%H:%M:%S").to_string(),
            ),
            (
                "date-end",
                p.window_end.format("%Y-%m-%dT%H:%M:%S").to_string(),
            ),
            ("utc-offset", p.utc_offset.to_string()),
            ("accuracy-cutoff", p.accuracy_cutoff_m.to_string()),
            ("coverage-fraction", p.coverage_fraction.to_string()),
            ("min-days", p.min_days.to_string()),
            ("min-common-days", p.min_common_days.to_string()),
            ("threshold-m", self.threshold_m.to_string()),
            ("width-t", self.width_t.to_string()),
            ("q", self.q.to_string()),
            ("widths", join(&self.widths)),
            ("orders", join(&self.orders)),
            ("horizons", join(&self.horizons)),
            ("seed", s.seed.to_string()),
            ("synth-pairs", s.pairs_per_archetype.to_string()),
            ("synth-days", s.n_days.to_string()),
            ("synth-encounters-per-day", s.encounters_per_day.to_string()),
            ("synth-meet-probability", s.meet_probability.to_string()),
            ("synth-schedule-slots", s.schedule_slots.to_string()),
            ("synth-jitter", s.jitter_slots.to_string()),
        ]
    }
}
