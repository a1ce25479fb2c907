//! Classifier-gated regression.
//!
//! A cell takes the regression value (clamped to the physical range
//! [0, 7]) wherever the classifier's hard prediction is above class 0, and
//! 0 everywhere else.

use crate::error::{Error, Result};
use crate::geo::JmaClass;
use crate::grid::{ClassGrid, IntensityGrid};
use crate::scalar::Scalar;

pub const INTENSITY_CEILING: f64 = 7.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutput<T = f64> {
    pub grid: IntensityGrid<T>,
    /// Cells where the classifier predicted a nonzero class.
    pub mask: Vec<bool>,
}

pub fn combine<T: Scalar>(reg: &IntensityGrid<T>, cls: &ClassGrid) -> Result<HybridOutput<T>> {
    if reg.spec() != cls.spec() {
        return Err(Error::SpecMismatch);
    }
    let ceiling = T::lit(INTENSITY_CEILING);
    let mask: Vec<bool> = cls.classes().iter().map(|c| *c > JmaClass::ZERO).collect();
    let values = reg
        .values()
        .iter()
        .zip(&mask)
        .map(|(&r, &on)| if on { r.max(T::zero()).min(ceiling) } else { T::zero() })
        .collect();
    Ok(HybridOutput {
        grid: IntensityGrid::from_values(*reg.spec(), values)?,
        mask,
    })
}
