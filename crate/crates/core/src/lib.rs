//! Fusion of anonymous camera tracklets with per-device RSSI by
//! multi-hypothesis tracklet merging.
//!
//! The algorithms are generic over the scalar type (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod filter;
pub mod geom;
pub mod io;
pub mod metrics;
pub mod num;
pub mod radio;
pub mod search;
pub mod sim;
pub mod tracklet;
pub mod tree;
pub mod types;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use num::Real;
pub use types::{BasestationId, DetectionKind, FrameIndex};

pub type Point = geom::Point2<f64>;
pub type Rect = geom::Rect<f64>;
pub type Detection = types::Detection<f64>;
pub type RadioMeasurement = types::RadioMeasurement<f64>;
pub type Basestation = types::Basestation<f64>;
pub type WindowConfig = types::WindowConfig<f64>;
pub type WindowBundle = types::WindowBundle<f64>;
pub type Recording = types::Recording<f64>;
pub type Tracklet = tracklet::Tracklet<f64>;
pub type TrackletGenConfig = tracklet::TrackletGenConfig<f64>;
pub type TreeConfig = tree::TreeConfig<f64>;
pub type Hypothesis = tree::Hypothesis<f64>;
pub type FilterConfig = filter::FilterConfig<f64>;
pub type RadioModel = radio::RadioModel<f64>;
pub type PriorConfig = radio::PriorConfig<f64>;
pub type TrackerConfig = search::TrackerConfig<f64>;
pub type WindowResult = search::WindowResult<f64>;
