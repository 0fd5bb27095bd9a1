//! Box-plot style summaries of feature values per closeness subgroup.

use crate::features::FeatureRow;
use crate::preprocess::ClosenessLabel;

use super::Feature;

/// Five-number summary with mean and 1.5 × IQR outliers.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub outliers: Vec<f64>,
}

/// Linearly interpolated quantile of sorted data (the "type 7" definition).
fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    /// `None` for an empty sample.
    pub fn from_values(values: &[f64]) -> Option<BoxStats> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q1 = quantile(&sorted, 0.25);
        let q3 = quantile(&sorted, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        Some(BoxStats {
            min: sorted[0],
            q1,
            median: quantile(&sorted, 0.5),
            q3,
            max: sorted[sorted.len() - 1],
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            outliers: sorted
                .iter()
                .copied()
                .filter(|v| *v < lo_fence || *v > hi_fence)
                .collect(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubgroupSummary {
    pub closeness: ClosenessLabel,
    pub feature: Feature,
    pub count: usize,
    /// Absent when the subgroup is empty.
    pub stats: Option<BoxStats>,
}

/// One summary per (closeness label, feature), labels ascending, features in table order.
pub fn subgroup_distributions(rows: &[FeatureRow]) -> Vec<SubgroupSummary> {
    let mut out = Vec::new();
    for label in ClosenessLabel::ALL {
        let members: Vec<&FeatureRow> = rows.iter().filter(|r| r.closeness == label).collect();
        for feature in Feature::ALL {
            let values: Vec<f64> = members.iter().map(|r| feature.value(&r.features)).collect();
            out.push(SubgroupSummary {
                closeness: label,
                feature,
                count: values.len(),
                stats: BoxStats::from_values(&values),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singleton_collapses() {
        let s = BoxStats::from_values(&[2.5]).unwrap();
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max, s.mean),
            (2.5, 2.5, 2.5, 2.5, 2.5, 2.5)
        );
        assert!(s.outliers.is_empty());
    }

    #[test]
    fn flags_far_value() {
        // q1 = 2, q3 = 4, fences at -1 and 7
        let s = BoxStats::from_values(&[4.0, 100.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        assert_eq!(s.outliers, [100.0]);
        assert_eq!(s.max, 100.0);
        assert_eq!(s.mean, 22.0);
    }

    #[test]
    fn interpolates_between_ranks() {
        let s = BoxStats::from_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
    }

    #[test]
    fn empty_subgroups_have_no_stats() {
        let out = subgroup_distributions(&[]);
        assert_eq!(out.len(), 15);
        assert!(out.iter().all(|s| s.count == 0 && s.stats.is_none()));
    }
}
