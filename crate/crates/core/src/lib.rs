//! Social-tie strength from GPS traces.
//!
//! Raw fixes are cleaned onto a five-minute grid, pairs of users are
//! checked for co-location slot by slot, and each pair is described by how
//! its encounters spread over the hours of the day (temporal diversity),
//! over places (location diversity) and by how often it meets (mean
//! encounters). The [`experiments`] module relates these features to
//! self-reported closeness with univariate F-tests.
//!
//! Stages communicate through plain delimited tables so that each can be
//! run, inspected and resumed on its own; see the `write_*`/`read_*`
//! functions of each module.

pub mod encounter;
pub mod error;
pub mod experiments;
pub mod features;
pub mod geo;
pub mod ingest;
pub mod pipeline;
pub mod preprocess;
pub mod stats;
pub mod types;

pub use encounter::{detect_encounters, Encounter, EncounterSet};
pub use error::{Error, Result};
pub use features::{Dataset, FeatureParams, FeatureRow, PairFeatures, TemporalEncounterVector};
pub use geo::{geohash_encode, haversine_m, GeohashCell, LatLon};
pub use ingest::{RawFix, SurveyRecord};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput};
pub use preprocess::{CleanFix, ClosenessLabel, PreprocessConfig, ValidDaySet};
pub use stats::RegressionResult;
pub use types::{PairKey, Slot, UserId};
