//! End-to-end chaining of the stages for in-memory use.

use std::collections::BTreeMap;

use crate::encounter::{
    detect_encounters, eligible_pairs, EncounterSet, FixIndex, DEFAULT_THRESHOLD_M,
};
use crate::error::Result;
use crate::features::{Dataset, FeatureParams};
use crate::ingest::{RawFix, SurveyRecord};
use crate::preprocess::{filter_pipeline, PreprocessConfig, Preprocessed};
use crate::types::PairKey;

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub threshold_m: f64,
    pub features: FeatureParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preprocess: PreprocessConfig::default(),
            threshold_m: DEFAULT_THRESHOLD_M,
            features: FeatureParams::default(),
        }
    }
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub preprocessed: Preprocessed,
    pub encounters: BTreeMap<PairKey, EncounterSet>,
    pub dataset: Dataset,
}

/// Preprocesses, detects encounters for surveyed pairs with enough common
/// days, and assembles the observation dataset.
pub fn run_pipeline(
    fixes: &[RawFix],
    survey: &[SurveyRecord],
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    let preprocessed = filter_pipeline(fixes, survey, &config.preprocess)?;
    let pairs = eligible_pairs(
        survey,
        &preprocessed.valid_days,
        config.preprocess.min_common_days,
    );
    let index = FixIndex::new(&preprocessed.fixes);
    let encounters =
        detect_encounters(&index, &preprocessed.valid_days, &pairs, config.threshold_m)?;
    let dataset = Dataset::assemble(
        survey,
        &preprocessed.valid_days,
        &encounters,
        config.preprocess.min_common_days,
    )?;
    Ok(PipelineOutput {
        preprocessed,
        encounters,
        dataset,
    })
}
