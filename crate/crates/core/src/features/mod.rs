//! Client-level feature construction and preprocessing.

mod caps;
mod census;
mod filter;
mod matrix;
mod windows;

pub use self::caps::{apply_caps, fit_caps, CapRule, CapSet, MIN_VALUES_FOR_CAP};
pub use self::census::{
    assign_polygon, census_feature_name, census_join, competitors_within, COMPETITION_RADIUS_M,
    DENSITY_COMPETITION_300M,
};
pub use self::filter::{correlation_filter, FilterReport, PairDrop, TargetDrop, DEFAULT_R_MAX};
pub use self::matrix::{FeatureDescriptor, FeatureFamily, FeatureMatrix, FeatureMeta};
pub use self::windows::{
    group_prefix, month_gaps, rfm_stats, rolling_name, rolling_stats, Grouping, WindowConfig,
    MAX_WINDOW, MEASURES, MONTHS_WITH_TRANSACTION, RFM_STATS, STATS,
};

use crate::error::Result;
use crate::ingest::DatasetBundle;

/// Rolling, recency/frequency and census features for every registered
/// client, rows ordered by client id.
pub fn build_features(bundle: &DatasetBundle, config: &WindowConfig) -> Result<FeatureMatrix> {
    let rolling = rolling_stats(&bundle.transactions, &bundle.clients, config)?;
    let rfm = rfm_stats(&bundle.transactions, &bundle.clients, config)?;
    let competitors = (!bundle.competitors.is_empty()).then_some(bundle.competitors.as_slice());
    let census = census_join(&bundle.clients, &bundle.polygons, competitors)?;
    rolling.hstack(&rfm)?.hstack(&census)
}
