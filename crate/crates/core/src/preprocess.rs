//! Cleaning pipeline: date window, accuracy cut, slot snapping, per-slot
//! deduplication, day coverage and minimum-days filters, survey join.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, Duration, FixedOffset, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};

use crate::error::{Error, Result};
use crate::ingest::{study_site_offset, RawFix, SurveyRecord};
use crate::types::{Slot, UserId};

pub const DAY_FORMAT: &str = "%Y-%m-%d";

/// A fix snapped onto the five-minute grid of a local calendar day.
#[derive(Clone, Debug, PartialEq)]
pub struct CleanFix {
    pub user: UserId,
    pub day: NaiveDate,
    pub slot: Slot,
    pub lat: f64,
    pub lon: f64,
    /// Accuracy of the surviving raw fix; always below the configured cutoff.
    pub accuracy: f64,
}

/// Snapped but not yet deduplicated.
#[derive(Clone, Debug, PartialEq)]
pub struct SnappedFix {
    pub user: UserId,
    pub day: NaiveDate,
    pub slot: Slot,
    pub lat: f64,
    pub lon: f64,
    pub accuracy: f64,
    pub raw_timestamp: DateTime<Utc>,
}

/// Regrouped closeness: 0 don't know, 1 acquaintance, 2 friends (includes
/// "sort of friends"), 3 good friends, 4 very good friends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClosenessLabel(u8);

impl ClosenessLabel {
    pub const ALL: [ClosenessLabel; 5] = [
        ClosenessLabel(0),
        ClosenessLabel(1),
        ClosenessLabel(2),
        ClosenessLabel(3),
        ClosenessLabel(4),
    ];

    pub fn new(value: u8) -> Option<Self> {
        (value <= 4).then_some(ClosenessLabel(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            0 => "Don't know the person",
            1 => "Acquaintance",
            2 => "Friends",
            3 => "Good Friends",
            _ => "Very Good Friends",
        }
    }
}

impl fmt::Display for ClosenessLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Maps the 0–5 survey answer onto the five regrouped categories.
pub fn regroup_closeness(closeness_raw: u8) -> Result<ClosenessLabel> {
    let value = match closeness_raw {
        0 => 0,
        1 => 1,
        2 | 3 => 2,
        4 => 3,
        5 => 4,
        other => return Err(Error::domain(format!("closeness {other} not in 0..=5"))),
    };
    Ok(ClosenessLabel(value))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidDaySet {
    pub user: UserId,
    pub days: BTreeSet<NaiveDate>,
}

/// Chronological intersection of two users' valid days.
pub fn common_days(a: &ValidDaySet, b: &ValidDaySet) -> Vec<NaiveDate> {
    a.days.intersection(&b.days).copied().collect()
}

/// Rounds to the nearest five-minute boundary in local time. Exact midpoints
/// round up, and rounding up to midnight rolls into slot 0 of the next day.
pub fn snap_to_slot(timestamp: DateTime<Utc>, offset: FixedOffset) -> (NaiveDate, Slot) {
    let local = timestamp.with_timezone(&offset).naive_local();
    let secs = i64::from(local.time().num_seconds_from_midnight());
    let rounded = (secs + Slot::SECONDS / 2) / Slot::SECONDS;
    if rounded >= i64::from(Slot::PER_DAY) {
        let next = local.date().succ_opt().expect("date within chrono range");
        (next, Slot::new(0).unwrap())
    } else {
        (local.date(), Slot::new(rounded as u16).unwrap())
    }
}

/// Local date-time at which a slot starts.
pub fn slot_start(day: NaiveDate, slot: Slot) -> NaiveDateTime {
    day.and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(i64::from(slot.start_minute()))
}

fn survivor_order(a: &SnappedFix, b: &SnappedFix) -> Ordering {
    a.accuracy
        .total_cmp(&b.accuracy)
        .then(a.raw_timestamp.cmp(&b.raw_timestamp))
        .then(a.lat.total_cmp(&b.lat))
        .then(a.lon.total_cmp(&b.lon))
}

/// Keeps one fix per (user, day, slot): smallest accuracy, then earliest raw
/// timestamp, then smallest (lat, lon). Output is sorted by (user, day, slot).
pub fn dedupe(mut candidates: Vec<SnappedFix>) -> Vec<CleanFix> {
    candidates.sort_by(|a, b| {
        (&a.user, a.day, a.slot)
            .cmp(&(&b.user, b.day, b.slot))
            .then_with(|| survivor_order(a, b))
    });
    candidates.dedup_by(|later, first| {
        later.user == first.user && later.day == first.day && later.slot == first.slot
    });
    candidates
        .into_iter()
        .map(|s| CleanFix {
            user: s.user,
            day: s.day,
            slot: s.slot,
            lat: s.lat,
            lon: s.lon,
            accuracy: s.accuracy,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreprocessConfig {
    /// Inclusive start of the analysis window, local time.
    pub window_start: NaiveDateTime,
    /// Exclusive end of the analysis window, local time.
    pub window_end: NaiveDateTime,
    pub utc_offset: FixedOffset,
    /// Fixes with accuracy at or above this many meters are discarded.
    pub accuracy_cutoff_m: f64,
    /// A user-day survives if it occupies at least this fraction of the 288 slots.
    pub coverage_fraction: f64,
    pub min_days: usize,
    pub min_common_days: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        let day = |m, d| {
            NaiveDate::from_ymd_opt(2016, m, d)
                .unwrap()
                .and_hms_opt(0, 0, 0)
                .unwrap()
        };
        PreprocessConfig {
            window_start: day(4, 1),
            window_end: day(5, 1),
            utc_offset: study_site_offset(),
            accuracy_cutoff_m: 60.0,
            coverage_fraction: 0.2,
            min_days: 5,
            min_common_days: 7,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_start >= self.window_end {
            return Err(Error::config("date window start must precede its end"));
        }
        if !(self.accuracy_cutoff_m > 0.0) {
            return Err(Error::config("accuracy cutoff must be positive"));
        }
        if !(0.0..=1.0).contains(&self.coverage_fraction) {
            return Err(Error::config("coverage fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Minimum occupied slots for a user-day to count: ceil(fraction * 288).
    pub fn min_slots_per_day(&self) -> usize {
        // Guard against 0.2 * 288 landing a hair above an integer.
        (self.coverage_fraction * f64::from(Slot::PER_DAY) - 1e-9)
            .ceil()
            .max(0.0) as usize
    }

    fn in_window(&self, local: NaiveDateTime) -> bool {
        local >= self.window_start && local < self.window_end
    }
}

/// Row counts removed at each stage, in pipeline order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PipelineReport {
    pub input_fixes: usize,
    pub outside_window: usize,
    pub inaccurate: usize,
    pub duplicates: usize,
    pub sparse_user_days: usize,
    pub users_with_few_days: usize,
    pub users_without_survey: usize,
    pub output_fixes: usize,
    pub retained_users: usize,
}

#[derive(Clone, Debug)]
pub struct Preprocessed {
    pub fixes: Vec<CleanFix>,
    pub valid_days: BTreeMap<UserId, ValidDaySet>,
    pub retained: BTreeSet<UserId>,
    pub report: PipelineReport,
    pub warnings: Vec<String>,
}

/// Duplicate points are collapsed per snapped slot, not per identical raw timestamp.
pub const DEDUPE_KEY: &str = "snapped-slot";

pub fn filter_pipeline(
    fixes: &[RawFix],
    survey: &[SurveyRecord],
    config: &PreprocessConfig,
) -> Result<Preprocessed> {
    config.validate()?;
    let mut report = PipelineReport {
        input_fixes: fixes.len(),
        ..Default::default()
    };

    let mut snapped = Vec::with_capacity(fixes.len());
    for f in fixes {
        let local = f.timestamp.with_timezone(&config.utc_offset).naive_local();
        if !config.in_window(local) {
            report.outside_window += 1;
            continue;
        }
        if !(f.accuracy < config.accuracy_cutoff_m) {
            report.inaccurate += 1;
            continue;
        }
        let (day, slot) = snap_to_slot(f.timestamp, config.utc_offset);
        // Rounding may carry a fix across the window edge.
        if !config.in_window(slot_start(day, slot)) {
            report.outside_window += 1;
            continue;
        }
        snapped.push(SnappedFix {
            user: f.user.clone(),
            day,
            slot,
            lat: f.lat,
            lon: f.lon,
            accuracy: f.accuracy,
            raw_timestamp: f.timestamp,
        });
    }
    let before = snapped.len();
    let deduped = dedupe(snapped);
    report.duplicates = before - deduped.len();

    let mut slots_per_user_day: BTreeMap<(&UserId, NaiveDate), usize> = BTreeMap::new();
    for f in &deduped {
        *slots_per_user_day.entry((&f.user, f.day)).or_default() += 1;
    }
    let min_slots = config.min_slots_per_day();
    let mut days_per_user: BTreeMap<UserId, BTreeSet<NaiveDate>> = BTreeMap::new();
    for (&(user, day), &n) in &slots_per_user_day {
        if n >= min_slots {
            days_per_user.entry(user.clone()).or_default().insert(day);
        } else {
            report.sparse_user_days += 1;
        }
    }

    let surveyed: BTreeSet<&UserId> = survey.iter().flat_map(|r| [&r.rater, &r.ratee]).collect();
    let mut valid_days = BTreeMap::new();
    for (user, days) in days_per_user {
        if days.len() < config.min_days {
            report.users_with_few_days += 1;
        } else if !surveyed.contains(&user) {
            report.users_without_survey += 1;
        } else {
            valid_days.insert(user.clone(), ValidDaySet { user, days });
        }
    }
    let fixes: Vec<CleanFix> = deduped
        .into_iter()
        .filter(|f| {
            valid_days
                .get(&f.user)
                .is_some_and(|v| v.days.contains(&f.day))
        })
        .collect();

    let retained: BTreeSet<UserId> = valid_days.keys().cloned().collect();
    report.output_fixes = fixes.len();
    report.retained_users = retained.len();
    let mut warnings = Vec::new();
    if retained.is_empty() {
        warnings.push("no users survived preprocessing".to_owned());
    }
    Ok(Preprocessed {
        fixes,
        valid_days,
        retained,
        report,
        warnings,
    })
}

/// Expresses cleaned fixes back as raw fixes stamped at their slot start.
pub fn clean_to_raw(fixes: &[CleanFix], offset: FixedOffset) -> Vec<RawFix> {
    fixes
        .iter()
        .map(|f| RawFix {
            user: f.user.clone(),
            timestamp: offset
                .from_local_datetime(&slot_start(f.day, f.slot))
                .single()
                .expect("fixed offsets are unambiguous")
                .with_timezone(&Utc),
            lat: f.lat,
            lon: f.lon,
            elevation: None,
            accuracy: f.accuracy,
            satellites: None,
            provider: None,
        })
        .collect()
}

pub fn write_clean_fixes<W: Write>(out: W, fixes: &[CleanFix]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "day", "slot", "lat", "lon", "accuracy"])?;
    for f in fixes {
        w.write_record([
            f.user.as_str(),
            &f.day.format(DAY_FORMAT).to_string(),
            &f.slot.to_string(),
            &f.lat.to_string(),
            &f.lon.to_string(),
            &f.accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn table_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(source)
}

pub(crate) fn field(row: &csv::StringRecord, i: usize) -> Result<&str> {
    row.get(i).ok_or_else(|| {
        Error::Schema(format!(
            "row {:?} lacks column {i}",
            row.position().map(|p| p.line())
        ))
    })
}

pub(crate) fn parse_field<T: std::str::FromStr>(
    row: &csv::StringRecord,
    i: usize,
    what: &str,
) -> Result<T> {
    let raw = field(row, i)?;
    raw.parse()
        .map_err(|_| Error::Schema(format!("bad {what} '{raw}'")))
}

pub(crate) fn parse_day(row: &csv::StringRecord, i: usize) -> Result<NaiveDate> {
    let raw = field(row, i)?;
    NaiveDate::parse_from_str(raw, DAY_FORMAT)
        .map_err(|_| Error::Schema(format!("bad day '{raw}'")))
}

pub(crate) fn parse_slot(row: &csv::StringRecord, i: usize) -> Result<Slot> {
    let idx: u16 = parse_field(row, i, "slot")?;
    Slot::new(idx).ok_or_else(|| Error::Schema(format!("slot {idx} out of range")))
}

pub(crate) fn expect_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers()?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(Error::Schema(format!(
            "expected columns {expected:?}, found {header:?}"
        )));
    }
    Ok(())
}

pub fn read_clean_fixes<R: Read>(source: R) -> Result<Vec<CleanFix>> {
    let mut rdr = table_reader(source);
    expect_header(
        &mut rdr,
        &["user_id", "day", "slot", "lat", "lon", "accuracy"],
    )?;
    let mut users: BTreeMap<String, UserId> = BTreeMap::new();
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let name = field(&row, 0)?;
        let user = users
            .entry(name.to_owned())
            .or_insert_with(|| UserId::new(name))
            .clone();
        out.push(CleanFix {
            user,
            day: parse_day(&row, 1)?,
            slot: parse_slot(&row, 2)?,
            lat: parse_field(&row, 3, "lat")?,
            lon: parse_field(&row, 4, "lon")?,
            accuracy: parse_field(&row, 5, "accuracy")?,
        });
    }
    Ok(out)
}

pub fn write_valid_days<W: Write>(out: W, valid: &BTreeMap<UserId, ValidDaySet>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "day"])?;
    for set in valid.values() {
        for day in &set.days {
            w.write_record([set.user.as_str(), &day.format(DAY_FORMAT).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_valid_days<R: Read>(source: R) -> Result<BTreeMap<UserId, ValidDaySet>> {
    let mut rdr = table_reader(source);
    expect_header(&mut rdr, &["user_id", "day"])?;
    let mut out: BTreeMap<UserId, ValidDaySet> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let user = UserId::new(field(&row, 0)?);
        let day = parse_day(&row, 1)?;
        out.entry(user.clone())
            .or_insert_with(|| ValidDaySet {
                user,
                days: BTreeSet::new(),
            })
            .days
            .insert(day);
    }
    Ok(out)
}
