//! A self-contained point-based neural renderer: scenes are point clouds
//! carrying small learnable descriptor vectors, rasterized into a
//! multi-resolution image pyramid and decoded to RGB by a gated
//! convolutional network. Descriptors and network weights train jointly
//! against posed photographs, and because appearance lives on the points,
//! scenes can be edited, stitched, and re-rendered without retraining.

pub mod camera;
pub mod edit;
pub mod error;
pub mod io;
pub mod net;
pub mod raster;
pub mod sampler;
pub mod scene;
pub mod synth;
pub mod train;
pub mod tensor;

#[doc(hidden)]
pub mod testutil;

pub use error::{Error, Result};
