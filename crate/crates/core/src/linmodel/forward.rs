use crate::error::{Error, Result};
use crate::geo::{GridSpec, JmaClass};
use crate::grid::{ClassGrid, IntensityGrid};
use crate::scalar::Scalar;

use super::{ModelKind, ModelParams};

/// `y = W^T x + b`, skipping zero features.
pub fn linear<T: Scalar>(params: &ModelParams<T>, x: &[T]) -> Result<Vec<T>> {
    if x.len() != params.in_dim {
        return Err(Error::dim(params.in_dim, x.len()));
    }
    let mut y = params.b.clone();
    for (i, &xi) in x.iter().enumerate() {
        if xi.is_zero() {
            continue;
        }
        for (yj, &wij) in y.iter_mut().zip(params.w_row(i)) {
            *yj += xi * wij;
        }
    }
    Ok(y)
}

fn expect_kind<T: Scalar>(params: &ModelParams<T>, kind: ModelKind) -> Result<()> {
    if params.kind != kind {
        return Err(Error::InvalidArgument(format!("expected a {kind} model, got {}", params.kind)));
    }
    Ok(())
}

pub fn forward_regression<T: Scalar>(params: &ModelParams<T>, x: &[T]) -> Result<IntensityGrid<T>> {
    expect_kind(params, ModelKind::Regression)?;
    IntensityGrid::from_values(params.grid, linear(params, x)?)
}

/// Per-cell class probabilities, row `i` = cell `i`, 10 entries each.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution<T = f64> {
    spec: GridSpec,
    probs: Vec<T>,
}

impl<T: Scalar> ClassDistribution<T> {
    /// Softmax of cell-major logits.
    pub fn from_logits(spec: GridSpec, mut logits: Vec<T>) -> Result<Self> {
        if logits.len() != spec.n_cells() * JmaClass::COUNT {
            return Err(Error::dim(spec.n_cells() * JmaClass::COUNT, logits.len()));
        }
        for row in logits.chunks_mut(JmaClass::COUNT) {
            softmax_in_place(row);
        }
        Ok(ClassDistribution { spec, probs: logits })
    }

    /// Wraps probabilities as-is; rows are checked to be finite and
    /// non-negative.
    pub fn from_probs(spec: GridSpec, probs: Vec<T>) -> Result<Self> {
        if probs.len() != spec.n_cells() * JmaClass::COUNT {
            return Err(Error::dim(spec.n_cells() * JmaClass::COUNT, probs.len()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(Error::InvalidArgument("probabilities must be finite and non-negative".into()));
        }
        Ok(ClassDistribution { spec, probs })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn cell(&self, i: usize) -> &[T] {
        &self.probs[i * JmaClass::COUNT..(i + 1) * JmaClass::COUNT]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.probs.chunks_exact(JmaClass::COUNT)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.probs
    }
}

/// Numerically stable softmax over one slice.
pub fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

pub fn forward_classification<T: Scalar>(params: &ModelParams<T>, x: &[T]) -> Result<ClassDistribution<T>> {
    expect_kind(params, ModelKind::Classification)?;
    ClassDistribution::from_logits(params.grid, linear(params, x)?)
}

/// Per-cell argmax; ties go to the lower class.
pub fn predicted_class_grid<T: Scalar>(dist: &ClassDistribution<T>) -> ClassGrid {
    let classes = dist
        .rows()
        .map(|row| {
            let mut best = 0;
            for (c, p) in row.iter().enumerate() {
                if *p > row[best] {
                    best = c;
                }
            }
            JmaClass::from_ordinal(best).expect("ten classes per row")
        })
        .collect();
    ClassGrid::from_classes(dist.spec, classes).expect("one class per cell")
}
