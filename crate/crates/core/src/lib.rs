//! Smile dynamics toolkit.
//!
//! Takes per-frame facial-analysis output (confidence, AU12 intensity and a
//! handful of 2-D landmarks), cuts it into individual smiles with
//! onset/apex/offset boundaries, and measures eight dynamics features per
//! smile. On top of those features sit the statistical suite (per-smile-index
//! correlations, Welch t-tests, one-way ANOVA) and a sliding-window MLP
//! regressor for questionnaire scores.
//!
//! Module map:
//!
//! - [`ingest`]: strict CSV parsing of frame tables, speech intervals and score tables
//! - [`segmentation`]: confidence gating, AU12 episodes, onset/apex/offset runs
//! - [`features`]: per-smile features and per-session feature tables
//! - [`scales`]: questionnaire scales, ranges and categories
//! - [`stats`]: correlations, regression, Welch t, ANOVA and tail probabilities
//! - [`model`]: windowed samples, MLP training, cross-validated grid search
//! - [`synthgen`]: synthetic sessions with known ground truth
//! - [`seeds`]: derivation of per-task seeds from a single run seed

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod features;
pub mod ingest;
pub mod model;
pub mod scales;
pub mod seeds;
pub mod segmentation;
pub mod stats;
pub mod synthgen;

pub use error::{Error, ErrorKind, Result};
pub use features::{Feature, FeatureTable, SmileFeatures};
pub use ingest::{
    FrameRecord, FrameSeries, LandmarkConfig, Point, ScoreTable, ScoreTableRow, SessionInfo,
    SpeechInterval, VisitMonth,
};
pub use model::{MlpConfig, TrainReport, WindowedSample};
pub use scales::{ScaleKind, ScaleScore};
pub use segmentation::{Episode, SegmentationConfig, Smile};
pub use stats::{AnovaResult, CorrelationSeries, WelchResult};
pub use synthgen::{GroundTruth, SynthSpec};
