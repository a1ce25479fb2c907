//! Conventional attenuation baseline.
//!
//! Magnitude conversion, bedrock peak ground velocity, site amplification
//! from AVS30, and the PGV to instrumental intensity relation, evaluated
//! per cell to produce a full intensity grid.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{Avs30Grid, HypocenterEvent};
use crate::error::{Error, Result};
use crate::geo::{cell_center, haversine_km, GeoPoint};
use crate::grid::IntensityGrid;
use crate::scalar::Scalar;

/// Standard deviation term of the amplification relation.
pub const AMP_SIGMA: f64 = 0.166;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmpeInputs<T = f64> {
    pub mw: T,
    pub depth_km: T,
    pub distance_km: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// Surface great-circle distance from the epicenter.
    Epicentral,
    /// Straight-line distance from the hypocenter: `sqrt(surface^2 + depth^2)`.
    #[default]
    Slant,
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMode::Epicentral => "epicentral",
            DistanceMode::Slant => "slant",
        })
    }
}

impl FromStr for DistanceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epicentral" => Ok(DistanceMode::Epicentral),
            "slant" => Ok(DistanceMode::Slant),
            other => Err(Error::InvalidArgument(format!("unknown distance mode `{other}`"))),
        }
    }
}

/// Which end of the amplification scatter band to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmpSigma {
    Minus,
    #[default]
    Central,
    Plus,
}

impl AmpSigma {
    pub fn term(self) -> f64 {
        match self {
            AmpSigma::Minus => -AMP_SIGMA,
            AmpSigma::Central => 0.0,
            AmpSigma::Plus => AMP_SIGMA,
        }
    }
}

impl FromStr for AmpSigma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minus" | "-1" => Ok(AmpSigma::Minus),
            "central" | "0" => Ok(AmpSigma::Central),
            "plus" | "+1" | "1" => Ok(AmpSigma::Plus),
            other => Err(Error::InvalidArgument(format!("unknown amplification sigma `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GmpeConfig {
    pub distance_mode: DistanceMode,
    pub amp_sigma: AmpSigma,
}

/// `Mw = 0.78 * M_JMA + 1.08`.
pub fn mw_from_mjma<T: Scalar>(m_jma: T) -> T {
    T::lit(0.78) * m_jma + T::lit(1.08)
}

/// `log10` of bedrock PGV (cm/s).
pub fn log10_pgv_bedrock<T: Scalar>(inp: GmpeInputs<T>) -> T {
    let GmpeInputs { mw, depth_km, distance_km } = inp;
    let near_source = T::lit(0.0028) * T::lit(10.0).powf(T::lit(0.50) * mw);
    T::lit(0.58) * mw + T::lit(0.0038) * depth_km - T::lit(1.29) - (distance_km + near_source).log10()
        - T::lit(0.002) * distance_km
}

/// Peak ground velocity on engineering bedrock in cm/s.
pub fn pgv_bedrock<T: Scalar>(inp: GmpeInputs<T>) -> Result<T> {
    if !inp.distance_km.is_finite() || inp.distance_km < T::zero() {
        return Err(Error::InvalidArgument(format!("distance {} must be finite and >= 0", inp.distance_km)));
    }
    if !inp.mw.is_finite() || !inp.depth_km.is_finite() {
        return Err(Error::NonFinite("GMPE magnitude or depth".into()));
    }
    Ok(T::lit(10.0).powf(log10_pgv_bedrock(inp)))
}

/// Maximum velocity amplification factor for a site.
pub fn amplification<T: Scalar>(avs30: T, cfg: &GmpeConfig) -> Result<T> {
    if avs30.is_nan() || avs30 <= T::zero() {
        return Err(Error::NoSiteData(avs30.as_f64()));
    }
    let log_amp = T::lit(2.367) - T::lit(0.852) * avs30.log10() + T::lit(cfg.amp_sigma.term());
    Ok(T::lit(10.0).powf(log_amp))
}

/// Instrumental intensity from surface PGV (cm/s).
///
/// The linear branch is evaluated first; once it reaches 4 the quadratic
/// branch takes over.
pub fn intensity_from_pgv<T: Scalar>(pgv: T) -> Result<T> {
    if !pgv.is_finite() || pgv <= T::zero() {
        return Err(Error::InvalidArgument(format!("PGV {pgv} must be positive and finite")));
    }
    let l = pgv.log10();
    let linear = T::lit(2.165) + T::lit(2.262) * l;
    if linear < T::lit(4.0) {
        Ok(linear)
    } else {
        Ok(T::lit(2.002) + T::lit(2.603) * l - T::lit(0.213) * l * l)
    }
}

/// Distance from the source to a site under the configured mode.
pub fn source_distance_km<T: Scalar>(epicenter: GeoPoint<T>, depth_km: T, site: GeoPoint<T>, mode: DistanceMode) -> T {
    let surface = haversine_km(epicenter, site);
    match mode {
        DistanceMode::Epicentral => surface,
        DistanceMode::Slant => surface.hypot(depth_km),
    }
}

/// Intensity at one site.
pub fn site_intensity<T: Scalar>(
    epicenter: GeoPoint<T>,
    depth_km: T,
    mw: T,
    site: GeoPoint<T>,
    avs30: T,
    cfg: &GmpeConfig,
) -> Result<T> {
    let distance_km = source_distance_km(epicenter, depth_km, site, cfg.distance_mode);
    let pgv_b = pgv_bedrock(GmpeInputs { mw, depth_km, distance_km })?;
    let amp = if avs30 > T::zero() { amplification(avs30, cfg)? } else { T::one() };
    intensity_from_pgv(amp * pgv_b)
}

/// Baseline intensity grid for an event. Cells without AVS30 data use an
/// amplification of 1; the result is floored at 0.
pub fn predict_grid_gmpe<T: Scalar>(
    event: &HypocenterEvent,
    avs30: &Avs30Grid,
    cfg: &GmpeConfig,
) -> Result<IntensityGrid<T>> {
    let spec = *avs30.spec();
    let epicenter = event.epicenter.cast::<T>();
    let depth = T::lit(event.depth_km);
    let mw = mw_from_mjma(T::lit(event.magnitude_jma));
    let values = (0..spec.n_cells())
        .into_par_iter()
        .map(|idx| {
            let site = cell_center(spec.cell_of_linear(idx), &spec)?.cast::<T>();
            let i = site_intensity(epicenter, depth, mw, site, T::lit(avs30.values()[idx]), cfg)?;
            Ok(i.max(T::zero()))
        })
        .collect::<Result<Vec<T>>>()?;
    IntensityGrid::from_values(spec, values)
}
