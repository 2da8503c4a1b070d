//! Domain-gap measurement: patch extraction, a small CNN domain classifier and
//! the H-divergence computed from its test errors.

pub mod divergence;
pub mod network;
pub mod patches;
pub mod split;
pub mod train;

pub use divergence::{
    divergence_from_errors, gap_report, h_divergence, measure_region, write_features, BeforeAfter, DivergenceReport, GapOptions, GapRow, RegionReport,
};
pub use network::{ClassifierParams, PARAM_COUNT};
pub use patches::{extract_patches, AnnotatedImage, Domain, Patch, PatchSet, Region};
pub use split::{split_patches, SplitSpec, Splits};
pub use train::{train_classifier, TrainConfig, TrainedClassifier};
