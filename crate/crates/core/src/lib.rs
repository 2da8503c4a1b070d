//! Balanced cut-and-paste synthetic data generation.
//!
//! Foreground instances are cut from seed images, diversified with lighting
//! styles and pasted onto simplified backgrounds, producing COCO-style
//! detection datasets. The [`gapmeter`] module measures foreground and
//! background domain gaps with a small trained domain classifier.

pub mod coco;
pub mod compose;
pub mod config;
pub mod dataset;
pub mod diversify;
pub mod error;
pub mod filter;
pub mod gapcmd;
pub mod gapmeter;
pub mod geometry;
pub mod maskproc;
pub mod pipeline;
pub mod rng;
pub mod simplify;

pub use error::{ComposeError, ConfigError, Error, GapError, GeometryError, Result};
pub use geometry::{iou, tight_bbox, AlphaMask, BBox, Raster};
pub use rng::{rng_stream, RngStream};
