//! Journey-based transit equity analytics.
//!
//! The pipeline turns journey origin-destination records, a GTFS feed,
//! rider-survey demographics, and census geometries into ridership-weighted
//! area profiles and OLS equity regressions:
//!
//! ingest -> link journeys -> convenience metrics -> demographics join ->
//! buffer aggregation onto census areas -> regressions -> reports.
//!
//! All numeric kernels are generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the `f64` aliases below are what the CLI and most callers use.

pub mod demographics;
pub mod geometry;
pub mod gtfs;
pub mod journeys;
pub mod report;
pub mod scalar;
pub mod spatial;
pub mod stats;
pub mod synth;

pub use scalar::Scalar;

/// `f64` concrete aliases for the generic domain types.
pub type Point = geometry::Point<f64>;
pub type TransitNetwork = gtfs::TransitNetwork<f64>;
pub type Journey = journeys::Journey<f64>;
pub type ConvenienceMetrics = journeys::ConvenienceMetrics<f64>;
pub type StopProfile = journeys::StopProfile<f64>;
pub type DemographicShares = demographics::DemographicShares<f64>;
pub type SurveyTable = demographics::SurveyTable<f64>;
pub type CensusArea = spatial::CensusArea<f64>;
pub type AreaProfile = spatial::AreaProfile<f64>;
pub type DesignMatrix = stats::DesignMatrix<f64>;
pub type RegressionResult = stats::RegressionResult<f64>;
