//! Model input construction.
//!
//! Depth and transformed magnitude are written into a two-channel grid over a
//! `k x k` patch centred on the epicenter cell (clipped at the grid edges);
//! every other cell stays 0. The tensor is flattened row-major with the two
//! channels of a cell adjacent: index `2 * (row * n_cols + col) + channel`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::HypocenterEvent;
use crate::error::{Error, Result};
use crate::geo::{point_to_cell, CellIndex, GridSpec};
use crate::scalar::Scalar;

pub const CHANNELS: usize = 2;
pub const DEPTH_CHANNEL: usize = 0;
pub const MAGNITUDE_CHANNEL: usize = 1;

/// Patch sizes used for the two model heads.
pub const DEFAULT_K_CLASSIFICATION: usize = 17;
pub const DEFAULT_K_REGRESSION: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeTransform {
    /// `10^((m - mag_ref) / 2)`
    #[default]
    Power10Half,
    Identity,
}

impl fmt::Display for MagnitudeTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MagnitudeTransform::Power10Half => "power10_half",
            MagnitudeTransform::Identity => "identity",
        })
    }
}

impl FromStr for MagnitudeTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "power10_half" | "power10-half" => Ok(MagnitudeTransform::Power10Half),
            "identity" => Ok(MagnitudeTransform::Identity),
            other => Err(Error::InvalidArgument(format!("unknown magnitude transform `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub k: usize,
    pub mag_transform: MagnitudeTransform,
    pub mag_ref: f64,
    pub depth_scale: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::with_k(DEFAULT_K_REGRESSION)
    }
}

impl EncoderConfig {
    pub fn with_k(k: usize) -> Self {
        EncoderConfig {
            k,
            mag_transform: MagnitudeTransform::Power10Half,
            mag_ref: 5.0,
            depth_scale: 100.0,
        }
    }

    pub fn validate(&self, spec: &GridSpec) -> Result<()> {
        if self.k == 0 || self.k.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("patch size k = {} must be odd and positive", self.k)));
        }
        if self.k > spec.n_rows {
            return Err(Error::InvalidArgument(format!(
                "patch size k = {} exceeds grid height {}",
                self.k, spec.n_rows
            )));
        }
        if !self.depth_scale.is_finite() || self.depth_scale <= 0.0 {
            return Err(Error::InvalidArgument(format!("depth scale {} must be positive", self.depth_scale)));
        }
        if !self.mag_ref.is_finite() {
            return Err(Error::NonFinite("mag_ref".into()));
        }
        Ok(())
    }

    pub fn transform_magnitude<T: Scalar>(&self, m: T) -> T {
        match self.mag_transform {
            MagnitudeTransform::Power10Half => T::lit(10.0).powf((m - T::lit(self.mag_ref)) / T::lit(2.0)),
            MagnitudeTransform::Identity => m,
        }
    }
}

/// Two `n_rows x n_cols` planes stored flattened (cell-major, channel-minor).
#[derive(Debug, Clone, PartialEq)]
pub struct InputTensor<T = f64> {
    spec: GridSpec,
    data: Vec<T>,
}

impl<T: Scalar> InputTensor<T> {
    pub fn zeros(spec: GridSpec) -> Self {
        InputTensor {
            spec,
            data: vec![T::zero(); spec.n_cells() * CHANNELS],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn get(&self, cell: CellIndex, channel: usize) -> T {
        self.data[self.spec.linear(cell) * CHANNELS + channel]
    }

    pub fn set(&mut self, cell: CellIndex, channel: usize, v: T) {
        let idx = self.spec.linear(cell) * CHANNELS + channel;
        self.data[idx] = v;
    }

    /// One channel as a row-major plane.
    pub fn plane(&self, channel: usize) -> Vec<T> {
        self.data.iter().skip(channel).step_by(CHANNELS).copied().collect()
    }

    /// Feature vector of length `n_cells * 2`.
    pub fn flatten(&self) -> Vec<T> {
        self.data.clone()
    }

    pub fn into_features(self) -> Vec<T> {
        self.data
    }

    /// Inverse of [`InputTensor::flatten`].
    pub fn reshape(spec: GridSpec, features: Vec<T>) -> Result<Self> {
        let expected = spec.n_cells() * CHANNELS;
        if features.len() != expected {
            return Err(Error::dim(expected, features.len()));
        }
        Ok(InputTensor { spec, data: features })
    }

    /// Cells with any nonzero channel.
    pub fn support(&self) -> Vec<CellIndex> {
        (0..self.spec.n_cells())
            .filter(|&i| self.data[i * CHANNELS..(i + 1) * CHANNELS].iter().any(|v| !v.is_zero()))
            .map(|i| self.spec.cell_of_linear(i))
            .collect()
    }
}

pub fn feature_len(spec: &GridSpec) -> usize {
    spec.n_cells() * CHANNELS
}

/// Encodes an event's hypocenter into the model input grid.
pub fn encode<T: Scalar>(event: &HypocenterEvent, cfg: &EncoderConfig, spec: &GridSpec) -> Result<InputTensor<T>> {
    cfg.validate(spec)?;
    let center = point_to_cell(event.epicenter, spec).ok_or(Error::OutsideWindow {
        lat: event.epicenter.lat,
        lon: event.epicenter.lon,
    })?;
    let depth = T::lit(event.depth_km) / T::lit(cfg.depth_scale);
    let mag = cfg.transform_magnitude(T::lit(event.magnitude_jma));
    if !depth.is_finite() || !mag.is_finite() {
        return Err(Error::NonFinite(format!("encoded inputs for event {}", event.id)));
    }
    let radius = cfg.k / 2;
    let rows = center.row.saturating_sub(radius)..=(center.row + radius).min(spec.n_rows - 1);
    let cols = center.col.saturating_sub(radius)..=(center.col + radius).min(spec.n_cols - 1);
    let mut t = InputTensor::zeros(*spec);
    for r in rows {
        for c in cols.clone() {
            let cell = CellIndex::new(r, c);
            t.set(cell, DEPTH_CHANNEL, depth);
            t.set(cell, MAGNITUDE_CHANNEL, mag);
        }
    }
    Ok(t)
}
