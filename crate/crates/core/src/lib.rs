//! Stem emerging point (SEP) localization by likelihood-map regression.
//!
//! The crate covers the whole chain from annotated field images to
//! geo-referenced landmark maps:
//!
//! * [`raster`]: float rasters, exact Euclidean distance transform, Otsu
//!   thresholding, connected components and weighted centroids.
//! * [`groundtruth`]: annotations, Gaussian likelihood targets and augmentation.
//! * [`fcnn`]: a small fully convolutional encoder-decoder trained with SGD.
//! * [`extraction`]: likelihood map to scored SEP detections.
//! * [`eval`]: confidence-ranked matching, precision/recall, AP and MAD.
//! * [`geomap`]: GNSS averaging, UKF pose fusion, ground projection and
//!   landmark map building/comparison.
//! * [`synthfield`]: deterministic synthetic fields, images and sensor streams.
//! * [`pipeline`]: the stages above composed into file-level steps.
//!
//! Pixel convention used everywhere: pixel centers sit at integer
//! coordinates, `x` is the column and `y` is the row.

pub mod error;
pub mod eval;
pub mod extraction;
pub mod fcnn;
pub mod geomap;
pub mod groundtruth;
pub mod pipeline;
pub mod raster;
pub mod synthfield;

pub use error::{Error, Result};
