//! Single fully connected layer over the flattened input grid, with either a
//! per-cell softmax head over the 10 JMA classes or a per-cell linear head
//! producing instrumental intensity.
//!
//! The weight matrix is stored row-major as `in_dim x out_dim`, so the
//! contribution of one input feature is one contiguous row. Inputs are
//! mostly zero (only the `k x k` patch is set), and both the forward pass
//! and the optimizer exploit that by touching only the rows of nonzero
//! features.
//!
//! Classification outputs are laid out cell-major: logit `c` of cell `i`
//! lives at `i * 10 + c`.

mod adam;
mod backward;
mod forward;
mod io;
mod loss;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use backward::{backward, Example, Gradients, Target, WeightGradient};
pub use forward::{forward_classification, forward_regression, linear, predicted_class_grid, softmax_in_place, ClassDistribution};
pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use loss::{class_weights_inverse_frequency, loss_mse, loss_weighted_ce, ClassWeights};
pub use train::{
    build_examples, sweep_k, train, train_on_examples, ClassWeighting, EpochRecord, SweepPoint, TrainConfig, TrainingLog,
};

use crate::catalog::HypocenterEvent;
use crate::encoder::{encode, feature_len, EncoderConfig};
use crate::error::{Error, Result};
use crate::geo::{GridSpec, JmaClass};
use crate::grid::{ClassGrid, IntensityGrid};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Classification,
    Regression,
}

impl ModelKind {
    /// Outputs per cell.
    pub fn outputs_per_cell(self) -> usize {
        match self {
            ModelKind::Classification => JmaClass::COUNT,
            ModelKind::Regression => 1,
        }
    }

    pub fn default_k(self) -> usize {
        match self {
            ModelKind::Classification => crate::encoder::DEFAULT_K_CLASSIFICATION,
            ModelKind::Regression => crate::encoder::DEFAULT_K_REGRESSION,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Classification => "classification",
            ModelKind::Regression => "regression",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" | "cls" => Ok(ModelKind::Classification),
            "regression" | "reg" => Ok(ModelKind::Regression),
            other => Err(Error::InvalidArgument(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Weights and bias of the dense layer, plus what is needed to rebuild the
/// inputs it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = f32> {
    pub kind: ModelKind,
    pub grid: GridSpec,
    pub encoder: EncoderConfig,
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `in_dim x out_dim`.
    pub w: Vec<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn zeros(kind: ModelKind, grid: GridSpec, encoder: EncoderConfig) -> Result<Self> {
        grid.validate()?;
        encoder.validate(&grid)?;
        let in_dim = feature_len(&grid);
        let out_dim = grid.n_cells() * kind.outputs_per_cell();
        Ok(ModelParams {
            kind,
            grid,
            encoder,
            in_dim,
            out_dim,
            w: vec![T::zero(); in_dim * out_dim],
            b: vec![T::zero(); out_dim],
        })
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    pub fn w_row(&self, i: usize) -> &[T] {
        &self.w[i * self.out_dim..(i + 1) * self.out_dim]
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.w.iter().chain(&self.b).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("model parameters".into()))
        }
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        let expected_out = self.n_cells() * self.kind.outputs_per_cell();
        if self.in_dim != feature_len(&self.grid) || self.out_dim != expected_out {
            return Err(Error::dim(
                format!("{} x {}", feature_len(&self.grid), expected_out),
                format!("{} x {}", self.in_dim, self.out_dim),
            ));
        }
        if self.w.len() != self.in_dim * self.out_dim || self.b.len() != self.out_dim {
            return Err(Error::dim(
                format!("{} weights + {} biases", self.in_dim * self.out_dim, self.out_dim),
                format!("{} weights + {} biases", self.w.len(), self.b.len()),
            ));
        }
        Ok(())
    }

    pub fn features(&self, event: &HypocenterEvent) -> Result<Vec<T>> {
        Ok(encode::<T>(event, &self.encoder, &self.grid)?.into_features())
    }

    /// Regression head output for an event.
    pub fn predict_intensity(&self, event: &HypocenterEvent) -> Result<IntensityGrid<T>> {
        forward_regression(self, &self.features(event)?)
    }

    /// Classification head hard prediction for an event.
    pub fn predict_classes(&self, event: &HypocenterEvent) -> Result<ClassGrid> {
        Ok(predicted_class_grid(&forward_classification(self, &self.features(event)?)?))
    }
}
