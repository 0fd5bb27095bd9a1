//! Parameter sweeps, feature comparison, subgroup summaries and the
//! day-horizon evolution of temporal diversity.

mod summary;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt;

pub use summary::{subgroup_distributions, BoxStats, SubgroupSummary};
pub use synth::{synth_generate, Archetype, SynthConfig, SynthData};

use crate::error::{Error, Result};
use crate::features::{
    check_width, Dataset, FeatureParams, FeatureRow, PairFeatures, DEFAULT_WIDTH_MIN,
};
use crate::preprocess::ClosenessLabel;
use crate::stats::{univariate_f_test, RegressionResult};

/// Interval widths of the width sweep, in minutes.
pub const DEFAULT_WIDTHS: [u32; 10] = [5, 15, 30, 60, 90, 120, 180, 240, 360, 720];

/// Rényi orders 0.1 to 2.0 in steps of 0.1, without the Shannon point.
pub fn default_orders() -> Vec<f64> {
    (1..=20)
        .filter(|&i| i != 10)
        .map(|i| f64::from(i) / 10.0)
        .collect()
}

pub const DEFAULT_HORIZONS: std::ops::RangeInclusive<usize> = 1..=11;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    LocationDiversity,
    MeanEncounters,
    TemporalDiversity,
}

impl Feature {
    pub const ALL: [Feature; 3] = [
        Feature::LocationDiversity,
        Feature::MeanEncounters,
        Feature::TemporalDiversity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::LocationDiversity => "Location Diversity",
            Feature::MeanEncounters => "Mean Encounters",
            Feature::TemporalDiversity => "Temporal Diversity",
        }
    }

    pub fn value(self, f: &PairFeatures) -> f64 {
        match self {
            Feature::LocationDiversity => f.location_diversity,
            Feature::MeanEncounters => f.mean_encounters,
            Feature::TemporalDiversity => f.temporal_diversity,
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn closeness_column(rows: &[FeatureRow]) -> Vec<f64> {
    rows.iter()
        .map(|r| f64::from(r.closeness.value()))
        .collect()
}

fn test_feature(rows: &[FeatureRow], feature: Feature) -> Result<RegressionResult> {
    let x: Vec<f64> = rows.iter().map(|r| feature.value(&r.features)).collect();
    univariate_f_test(feature.name(), &x, &closeness_column(rows))
}

/// One point of a parameter sweep. A statistics failure is kept in the row.
#[derive(Debug)]
pub struct SweepRow {
    pub parameter: f64,
    pub outcome: Result<RegressionResult>,
}

fn sorted_rows(mut rows: Vec<SweepRow>) -> Vec<SweepRow> {
    rows.sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    rows
}

/// Shannon temporal diversity at each width, tested against closeness.
pub fn sweep_width(dataset: &Dataset, widths: &[u32]) -> Result<Vec<SweepRow>> {
    for &w in widths {
        check_width(w)?;
    }
    let mut rows = Vec::with_capacity(widths.len());
    for &w in widths {
        let features = dataset.feature_rows(FeatureParams {
            width_min: w,
            q: 1.0,
        })?;
        rows.push(SweepRow {
            parameter: f64::from(w),
            outcome: test_feature(&features, Feature::TemporalDiversity),
        });
    }
    Ok(sorted_rows(rows))
}

/// Rényi temporal diversity of each order at a fixed width, tested against closeness.
pub fn sweep_q(dataset: &Dataset, orders: &[f64], width_min: u32) -> Result<Vec<SweepRow>> {
    check_width(width_min)?;
    if let Some(bad) = orders.iter().find(|q| !(**q >= 0.0) || q.is_infinite()) {
        return Err(Error::config(format!(
            "diversity order {bad} must be finite and >= 0"
        )));
    }
    let mut rows = Vec::with_capacity(orders.len());
    for &q in orders {
        let features = dataset.feature_rows(FeatureParams { width_min, q })?;
        rows.push(SweepRow {
            parameter: q,
            outcome: test_feature(&features, Feature::TemporalDiversity),
        });
    }
    Ok(sorted_rows(rows))
}

#[derive(Debug)]
pub struct FeatureComparison {
    pub feature: Feature,
    pub outcome: Result<RegressionResult>,
}

/// F, p and r for each feature, in [`Feature::ALL`] order.
pub fn compare_features(rows: &[FeatureRow]) -> Vec<FeatureComparison> {
    Feature::ALL
        .iter()
        .map(|&feature| FeatureComparison {
            feature,
            outcome: test_feature(rows, feature),
        })
        .collect()
}

/// Features whose test succeeded, by decreasing F.
pub fn rank_by_f(comparisons: &[FeatureComparison]) -> Vec<(Feature, f64)> {
    let mut ranked: Vec<(Feature, f64)> = comparisons
        .iter()
        .filter_map(|c| c.outcome.as_ref().ok().map(|r| (c.feature, r.f_value)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionRow {
    pub closeness: ClosenessLabel,
    pub horizon_days: usize,
    /// Observations with at least `horizon_days` common days.
    pub n_pairs: usize,
    pub mean_temporal_diversity: Option<f64>,
}

/// Mean temporal diversity per closeness group computed from each pair's
/// first `d` common days only; pairs with fewer than `d` common days sit out.
pub fn evolution(
    dataset: &Dataset,
    horizons: &[usize],
    params: FeatureParams,
) -> Result<Vec<EvolutionRow>> {
    check_width(params.width_min)?;
    let mut rows = Vec::new();
    for &d in horizons {
        if d == 0 {
            return Err(Error::config("day horizon must be at least 1"));
        }
        let mut per_pair = BTreeMap::new();
        for (key, rec) in &dataset.pairs {
            if let Some(head) = rec.first_days(d) {
                per_pair.insert(key, head.features(params)?.temporal_diversity);
            }
        }
        let mut sums: BTreeMap<ClosenessLabel, (usize, f64)> = BTreeMap::new();
        for obs in &dataset.observations {
            if let Some(td) = per_pair.get(&obs.pair) {
                let e = sums.entry(obs.closeness).or_default();
                e.0 += 1;
                e.1 += td;
            }
        }
        for label in ClosenessLabel::ALL {
            let (n, total) = sums.get(&label).copied().unwrap_or_default();
            rows.push(EvolutionRow {
                closeness: label,
                horizon_days: d,
                n_pairs: n,
                mean_temporal_diversity: (n > 0).then(|| total / n as f64),
            });
        }
    }
    rows.sort_by_key(|r| (r.closeness, r.horizon_days));
    Ok(rows)
}

/// Width used by the comparison, order sweep and evolution unless overridden.
pub const COMPARISON_WIDTH_MIN: u32 = DEFAULT_WIDTH_MIN;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encounter::{Encounter, EncounterSet};
    use crate::geo::GeohashCell;
    use crate::ingest::SurveyRecord;
    use crate::preprocess::ValidDaySet;
    use crate::types::{PairKey, Slot, UserId};
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2016, 4, d).unwrap()
    }

    /// Pairs `p{i}a`/`p{i}b` whose encounters are spread over `spread[i]`
    /// hour-long intervals; closeness rises with the spread.
    fn toy_dataset(seed: u64, n: usize, n_days: u32) -> Dataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut valid = BTreeMap::new();
        let mut encounters = BTreeMap::new();
        let mut survey = Vec::new();
        for i in 0..n {
            let a = UserId::new(format!("p{i:02}a"));
            let b = UserId::new(format!("p{i:02}b"));
            for u in [&a, &b] {
                valid.insert(
                    u.clone(),
                    ValidDaySet {
                        user: u.clone(),
                        days: (1..=n_days).map(day).collect(),
                    },
                );
            }
            let pair = PairKey::new(a.clone(), b.clone()).unwrap();
            let closeness = (i % 6) as u8;
            let hours = 1 + closeness as u16 * 2;
            let mut set = EncounterSet::empty(pair.clone());
            for d in 1..=n_days {
                let n_today = rng.gen_range(0..4);
                let mut used = std::collections::BTreeSet::new();
                for _ in 0..n_today {
                    let slot = (8 + rng.gen_range(0..hours)) * 12 + rng.gen_range(0..12);
                    if used.insert(slot) {
                        set.encounters.push(Encounter {
                            pair: pair.clone(),
                            day: day(d),
                            slot: Slot::new(slot).unwrap(),
                            cell: "tsj8bcde".parse::<GeohashCell>().unwrap(),
                        });
                    }
                }
            }
            set.encounters.sort();
            encounters.insert(pair, set);
            survey.push(SurveyRecord {
                rater: a.clone(),
                ratee: b.clone(),
                closeness_raw: closeness,
                proximity_raw: 1,
            });
            survey.push(SurveyRecord {
                rater: b,
                ratee: a,
                closeness_raw: closeness,
                proximity_raw: 1,
            });
        }
        Dataset::assemble(&survey, &valid, &encounters, 7).unwrap()
    }

    #[test]
    fn default_grids() {
        assert_eq!(default_orders().len(), 19);
        assert_eq!(default_orders()[0], 0.1);
        assert_eq!(default_orders()[18], 2.0);
        assert!(!default_orders().contains(&1.0));
        assert!(DEFAULT_WIDTHS.iter().all(|w| 1440 % w == 0));
    }

    #[test]
    fn sweeps_are_sorted_and_consistent() {
        let ds = toy_dataset(1, 60, 10);
        let widths = sweep_width(&ds, &[120, 60, 5]).unwrap();
        assert_eq!(
            widths.iter().map(|r| r.parameter).collect::<Vec<_>>(),
            [5.0, 60.0, 120.0]
        );
        let single = sweep_width(&ds, &[60]).unwrap();
        assert_eq!(single.len(), 1);

        let qs = sweep_q(&ds, &[2.0, 1.0, 0.5], 60).unwrap();
        assert_eq!(
            qs.iter().map(|r| r.parameter).collect::<Vec<_>>(),
            [0.5, 1.0, 2.0]
        );
        let shannon = single[0].outcome.as_ref().unwrap();
        let q1 = qs[1].outcome.as_ref().unwrap();
        assert_eq!(shannon.f_value, q1.f_value);
        assert_eq!(shannon.p_value, q1.p_value);
    }

    #[test]
    fn sweep_rejects_bad_grid() {
        let ds = toy_dataset(1, 12, 8);
        assert!(sweep_width(&ds, &[60, 710]).is_err());
        assert!(sweep_q(&ds, &[-0.1], 60).is_err());
    }

    #[test]
    fn spread_signal_ranks_temporal_diversity_first() {
        let ds = toy_dataset(3, 120, 14);
        let rows = ds.feature_rows(FeatureParams::default()).unwrap();
        let cmp = compare_features(&rows);
        assert_eq!(cmp.len(), 3);
        // One shared cell, so location diversity is constant.
        assert!(matches!(cmp[0].outcome, Err(Error::Degenerate(_))));
        assert_eq!(rank_by_f(&cmp)[0].0, Feature::TemporalDiversity);
    }

    #[test]
    fn evolution_horizons() {
        let ds = toy_dataset(5, 30, 9);
        let params = FeatureParams::default();
        let rows = evolution(&ds, &[1, 9, 10], params).unwrap();
        assert_eq!(rows.len(), 15);
        assert!(rows
            .iter()
            .filter(|r| r.horizon_days == 10)
            .all(|r| r.n_pairs == 0 && r.mean_temporal_diversity.is_none()));

        // At the full horizon the averages equal those of the full-data features.
        let full = ds.feature_rows(params).unwrap();
        for label in ClosenessLabel::ALL {
            let vals: Vec<f64> = full
                .iter()
                .filter(|r| r.closeness == label)
                .map(|r| r.features.temporal_diversity)
                .collect();
            let row = rows
                .iter()
                .find(|r| r.closeness == label && r.horizon_days == 9)
                .unwrap();
            assert_eq!(row.n_pairs, vals.len());
            let want = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((row.mean_temporal_diversity.unwrap() - want).abs() < 1e-12);
        }
        assert!(evolution(&ds, &[0], params).is_err());
    }
}
