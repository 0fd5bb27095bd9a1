//! Per-pair features: temporal encounter vectors, temporal diversity
//! (Shannon or Rényi order `q`), location diversity and mean encounters.

mod diversity;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use chrono::NaiveDate;

pub use diversity::{renyi_diversity, shannon_diversity, shannon_entropy, SHANNON_ORDER_TOLERANCE};

use crate::encounter::EncounterSet;
use crate::error::{Error, Result};
use crate::ingest::SurveyRecord;
use crate::preprocess::{
    common_days, expect_header, field, parse_field, regroup_closeness, table_reader,
    ClosenessLabel, ValidDaySet,
};
use crate::types::{PairKey, UserId};

pub const MINUTES_PER_DAY: u32 = 1440;
pub const DEFAULT_WIDTH_MIN: u32 = 60;

pub fn check_width(width_min: u32) -> Result<()> {
    if width_min == 0 || !MINUTES_PER_DAY.is_multiple_of(width_min) {
        return Err(Error::config(format!(
            "interval width {width_min} min does not divide 1440"
        )));
    }
    Ok(())
}

/// Encounter counts per width-`t` interval of the day, summed over days.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporalEncounterVector {
    width_min: u32,
    counts: Vec<u64>,
}

impl TemporalEncounterVector {
    /// Wraps precomputed counts; the length must be exactly `1440 / width_min`.
    pub fn from_counts(width_min: u32, counts: Vec<u64>) -> Result<Self> {
        check_width(width_min)?;
        let bins = (MINUTES_PER_DAY / width_min) as usize;
        if counts.len() != bins {
            return Err(Error::domain(format!(
                "{} counts for {bins} intervals",
                counts.len()
            )));
        }
        Ok(TemporalEncounterVector { width_min, counts })
    }

    pub fn width_min(&self) -> u32 {
        self.width_min
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Bins each encounter by the interval containing its slot's start minute.
pub fn build_tev(encounters: &EncounterSet, width_min: u32) -> Result<TemporalEncounterVector> {
    check_width(width_min)?;
    let mut counts = vec![0u64; (MINUTES_PER_DAY / width_min) as usize];
    for e in &encounters.encounters {
        counts[(e.slot.start_minute() / width_min) as usize] += 1;
    }
    Ok(TemporalEncounterVector { width_min, counts })
}

pub fn shannon_temporal_diversity(tev: &TemporalEncounterVector) -> f64 {
    shannon_diversity(&tev.counts)
}

pub fn renyi_temporal_diversity(tev: &TemporalEncounterVector, q: f64) -> Result<f64> {
    renyi_diversity(&tev.counts, q)
}

/// Shannon effective number of distinct geohash cells among the encounters.
pub fn location_diversity(encounters: &EncounterSet) -> f64 {
    let mut per_cell: BTreeMap<&str, u64> = BTreeMap::new();
    for e in &encounters.encounters {
        *per_cell.entry(e.cell.as_str()).or_default() += 1;
    }
    shannon_diversity(&per_cell.into_values().collect::<Vec<_>>())
}

pub fn mean_encounters(n_encounters: usize, n_common_days: usize) -> Result<f64> {
    if n_common_days == 0 {
        return Err(Error::domain(
            "mean encounters undefined without common days",
        ));
    }
    Ok(n_encounters as f64 / n_common_days as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureParams {
    pub width_min: u32,
    /// Rényi order for temporal diversity; 1 is Shannon.
    pub q: f64,
}

impl Default for FeatureParams {
    fn default() -> Self {
        FeatureParams {
            width_min: DEFAULT_WIDTH_MIN,
            q: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairFeatures {
    pub pair: PairKey,
    pub temporal_diversity: f64,
    pub location_diversity: f64,
    pub mean_encounters: f64,
    pub n_encounters: usize,
    pub n_common_days: usize,
}

pub fn pair_features(
    set: &EncounterSet,
    n_common_days: usize,
    params: FeatureParams,
) -> Result<PairFeatures> {
    let tev = build_tev(set, params.width_min)?;
    Ok(PairFeatures {
        pair: set.pair.clone(),
        temporal_diversity: renyi_temporal_diversity(&tev, params.q)?,
        location_diversity: location_diversity(set),
        mean_encounters: mean_encounters(set.len(), n_common_days)?,
        n_encounters: set.len(),
        n_common_days,
    })
}

/// A pair with enough common days, its chronologically ordered common days
/// and every encounter on them.
#[derive(Clone, Debug, PartialEq)]
pub struct PairRecord {
    pub pair: PairKey,
    pub common_days: Vec<NaiveDate>,
    pub encounters: EncounterSet,
}

impl PairRecord {
    /// The same pair seen through its first `d` common days only.
    pub fn first_days(&self, d: usize) -> Option<PairRecord> {
        if self.common_days.len() < d {
            return None;
        }
        let days: Vec<NaiveDate> = self.common_days[..d].to_vec();
        let keep: BTreeSet<NaiveDate> = days.iter().copied().collect();
        Some(PairRecord {
            pair: self.pair.clone(),
            common_days: days,
            encounters: self.encounters.restricted_to(&keep),
        })
    }

    pub fn features(&self, params: FeatureParams) -> Result<PairFeatures> {
        pair_features(&self.encounters, self.common_days.len(), params)
    }
}

/// One directed rater → ratee survey answer attached to its pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub rater: UserId,
    pub ratee: UserId,
    pub closeness: ClosenessLabel,
    pub pair: PairKey,
}

/// Everything the experiments need: eligible pairs and the directed
/// observations referring to them, sorted by (rater, ratee).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub pairs: BTreeMap<PairKey, PairRecord>,
    pub observations: Vec<Observation>,
}

impl Dataset {
    /// Joins survey answers with pairs that have at least `min_common_days`.
    /// Pairs absent from `encounters` are taken to have none.
    pub fn assemble(
        survey: &[SurveyRecord],
        valid_days: &BTreeMap<UserId, ValidDaySet>,
        encounters: &BTreeMap<PairKey, EncounterSet>,
        min_common_days: usize,
    ) -> Result<Dataset> {
        let mut pairs = BTreeMap::new();
        let mut observations = Vec::new();
        for r in survey {
            let (Some(a), Some(b)) = (valid_days.get(&r.rater), valid_days.get(&r.ratee)) else {
                continue;
            };
            let Some(pair) = PairKey::new(r.rater.clone(), r.ratee.clone()) else {
                continue;
            };
            let days = common_days(a, b);
            if days.len() < min_common_days.max(1) {
                continue;
            }
            if !pairs.contains_key(&pair) {
                let keep: BTreeSet<NaiveDate> = days.iter().copied().collect();
                let set = encounters
                    .get(&pair)
                    .map(|s| s.restricted_to(&keep))
                    .unwrap_or_else(|| EncounterSet::empty(pair.clone()));
                pairs.insert(
                    pair.clone(),
                    PairRecord {
                        pair: pair.clone(),
                        common_days: days,
                        encounters: set,
                    },
                );
            }
            observations.push(Observation {
                rater: r.rater.clone(),
                ratee: r.ratee.clone(),
                closeness: regroup_closeness(r.closeness_raw)?,
                pair,
            });
        }
        observations.sort_by(|x, y| (&x.rater, &x.ratee).cmp(&(&y.rater, &y.ratee)));
        Ok(Dataset {
            pairs,
            observations,
        })
    }

    pub fn pair(&self, obs: &Observation) -> &PairRecord {
        &self.pairs[&obs.pair]
    }

    /// Features for every observation, in observation order.
    pub fn feature_rows(&self, params: FeatureParams) -> Result<Vec<FeatureRow>> {
        let per_pair: BTreeMap<&PairKey, PairFeatures> = self
            .pairs
            .iter()
            .map(|(k, p)| Ok((k, p.features(params)?)))
            .collect::<Result<_>>()?;
        Ok(self
            .observations
            .iter()
            .map(|o| FeatureRow {
                rater: o.rater.clone(),
                ratee: o.ratee.clone(),
                closeness: o.closeness,
                features: per_pair[&o.pair].clone(),
            })
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub rater: UserId,
    pub ratee: UserId,
    pub closeness: ClosenessLabel,
    pub features: PairFeatures,
}

const FEATURE_COLUMNS: [&str; 8] = [
    "rater",
    "ratee",
    "temporal_diversity",
    "location_diversity",
    "mean_encounters",
    "n_encounters",
    "n_common_days",
    "closeness",
];

pub fn write_features<W: Write>(out: W, rows: &[FeatureRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURE_COLUMNS)?;
    for r in rows {
        let f = &r.features;
        w.write_record([
            r.rater.as_str(),
            r.ratee.as_str(),
            &f.temporal_diversity.to_string(),
            &f.location_diversity.to_string(),
            &f.mean_encounters.to_string(),
            &f.n_encounters.to_string(),
            &f.n_common_days.to_string(),
            &r.closeness.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features<R: Read>(source: R) -> Result<Vec<FeatureRow>> {
    let mut rdr = table_reader(source);
    expect_header(&mut rdr, &FEATURE_COLUMNS)?;
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let rater = UserId::new(field(&row, 0)?);
        let ratee = UserId::new(field(&row, 1)?);
        let pair = PairKey::new(rater.clone(), ratee.clone())
            .ok_or_else(|| Error::Schema(format!("self-pair for {rater}")))?;
        let label: u8 = parse_field(&row, 7, "closeness")?;
        out.push(FeatureRow {
            rater,
            ratee,
            closeness: ClosenessLabel::new(label)
                .ok_or_else(|| Error::Schema(format!("closeness label {label} out of range")))?,
            features: PairFeatures {
                pair,
                temporal_diversity: parse_field(&row, 2, "temporal_diversity")?,
                location_diversity: parse_field(&row, 3, "location_diversity")?,
                mean_encounters: parse_field(&row, 4, "mean_encounters")?,
                n_encounters: parse_field(&row, 5, "n_encounters")?,
                n_common_days: parse_field(&row, 6, "n_common_days")?,
            },
        });
    }
    Ok(out)
}
