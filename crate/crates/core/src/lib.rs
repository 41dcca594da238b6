//! Bi-colored numbered tags for 360° panoramas: rendering, cubemap
//! projection, detection, reading, tour assembly, synthetic data and
//! evaluation.
//!
//! Pipeline stages, in order:
//!
//! 1. [`color_scheme`]: digit palette and tag rasters.
//! 2. [`projection`]: equirectangular ↔ cubemap, for images and points.
//! 3. [`detector`]: palette-mask tag detection on cube faces.
//! 4. [`recognizer`]: tag number from a detection crop.
//! 5. [`tour`]: back-projection and tour graph assembly.
//!
//! [`synth`] renders panoramas with exact ground truth and [`metrics`]
//! scores predictions against it. [`pipeline`] strings the stages together.

pub mod bbox;
pub mod color_scheme;
pub mod detector;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod metrics;
pub mod projection;
pub mod raster;
pub mod recognizer;
pub mod segment;
pub mod synth;
pub mod tour;

pub use bbox::BBox;
pub use error::{Error, Result};
pub use raster::RasterImage;
