//! Seismic intensity distribution prediction on a geographic grid.
//!
//! The pipeline: a hypocenter catalog ([`catalog`]) is rasterized onto a
//! Mercator grid ([`geo`], [`grid`]); each event is encoded as a sparse
//! two-channel input tensor ([`encoder`]) and fed to a single dense layer
//! ([`linmodel`]) with either a per-cell softmax or a per-cell linear head.
//! [`hybrid`] gates the regression output with the classifier, [`gmpe`] is
//! the attenuation-relation baseline, [`metrics`] scores predictions and
//! [`render`] draws grids as PPM images.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the common choices.

pub mod catalog;
pub mod encoder;
pub mod error;
pub mod geo;
pub mod gmpe;
pub mod grid;
pub mod hybrid;
pub mod linmodel;
pub mod metrics;
pub mod render;
pub mod scalar;
pub mod synthetic;

pub use catalog::{
    load_avs30, load_catalog, make_split, rasterize, Avs30Grid, Catalog, CatalogFormat, DatasetSplit,
    HypocenterEvent, LoadOptions, Observation, SplitMode, SplitPart,
};
pub use encoder::{encode, EncoderConfig, InputTensor, MagnitudeTransform};
pub use error::{Error, Result};
pub use geo::{cell_center, haversine_km, point_to_cell, CellIndex, GeoPoint, GridSpec, JmaClass, Projection};
pub use gmpe::{predict_grid_gmpe, AmpSigma, DistanceMode, GmpeConfig};
pub use grid::{ClassGrid, IntensityGrid};
pub use hybrid::{combine, HybridOutput};
pub use linmodel::{ModelKind, ModelParams, TrainConfig, TrainingLog};
pub use metrics::{EvalReport, Prediction};
pub use render::{render_ppm, Palette, RenderOptions};
pub use scalar::Scalar;

pub type IntensityGrid32 = IntensityGrid<f32>;
pub type IntensityGrid64 = IntensityGrid<f64>;
pub type InputTensor32 = InputTensor<f32>;
pub type InputTensor64 = InputTensor<f64>;
pub type ModelParams32 = ModelParams<f32>;
pub type ModelParams64 = ModelParams<f64>;
pub type GeoPoint32 = GeoPoint<f32>;
pub type GeoPoint64 = GeoPoint<f64>;
