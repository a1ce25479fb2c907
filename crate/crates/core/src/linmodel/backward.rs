use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::JmaClass;
use crate::grid::{ClassGrid, IntensityGrid};
use crate::scalar::Scalar;

use super::forward::{linear, softmax_in_place};
use super::loss::{ClassWeights, CE_PROB_FLOOR};
use super::{ModelKind, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub enum Target<T> {
    Intensity(IntensityGrid<T>),
    Classes(ClassGrid),
}

/// One training pair with the indices of its nonzero features cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub features: Vec<T>,
    pub target: Target<T>,
    nonzero: Vec<usize>,
}

impl<T: Scalar> Example<T> {
    pub fn new(features: Vec<T>, target: Target<T>) -> Self {
        let nonzero = features
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_zero())
            .map(|(i, _)| i)
            .collect();
        Example { features, target, nonzero }
    }

    pub fn nonzero(&self) -> &[usize] {
        &self.nonzero
    }
}

/// Weight gradient, either materialized or kept as the batch-mean of outer
/// products `x_s e_s^T` (the natural form for a dense layer with sparse
/// inputs; a full-size dense copy would be another 335M entries).
#[derive(Debug, Clone, PartialEq)]
pub enum WeightGradient<T> {
    Dense(Vec<T>),
    Outer {
        /// For every input row, the `(sample, x_s[row])` pairs with nonzero `x`.
        rows: Vec<Vec<(usize, T)>>,
        /// Output-error vector of every sample.
        errors: Vec<Vec<T>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: WeightGradient<T>,
    pub b: Vec<T>,
    /// Mean loss of the batch at the parameters the gradient was taken at.
    pub loss: T,
}

impl<T: Scalar> Gradients<T> {
    pub fn dense(in_dim: usize, out_dim: usize, w: Vec<T>, b: Vec<T>) -> Result<Self> {
        if w.len() != in_dim * out_dim || b.len() != out_dim {
            return Err(Error::dim(
                format!("{} + {}", in_dim * out_dim, out_dim),
                format!("{} + {}", w.len(), b.len()),
            ));
        }
        Ok(Gradients {
            in_dim,
            out_dim,
            w: WeightGradient::Dense(w),
            b,
            loss: T::zero(),
        })
    }

    /// Writes row `i` of the weight gradient into `out`. Returns `false` (and
    /// leaves `out` untouched) when the row is structurally zero.
    pub fn fill_w_row(&self, i: usize, out: &mut [T]) -> bool {
        match &self.w {
            WeightGradient::Dense(w) => {
                out.copy_from_slice(&w[i * self.out_dim..(i + 1) * self.out_dim]);
                true
            }
            WeightGradient::Outer { rows, errors } => {
                let entries = &rows[i];
                if entries.is_empty() {
                    return false;
                }
                let batch = T::lit(errors.len() as f64);
                out.iter_mut().for_each(|v| *v = T::zero());
                for &(s, xi) in entries {
                    for (o, &e) in out.iter_mut().zip(&errors[s]) {
                        *o += xi * e;
                    }
                }
                out.iter_mut().for_each(|v| *v /= batch);
                true
            }
        }
    }

    pub fn w_dense(&self) -> Vec<T> {
        let mut w = vec![T::zero(); self.in_dim * self.out_dim];
        for (i, row) in w.chunks_mut(self.out_dim).enumerate() {
            self.fill_w_row(i, row);
        }
        w
    }
}

/// Output error `dL/dy` and loss for one sample.
fn sample_error<T: Scalar>(
    params: &ModelParams<T>,
    ex: &Example<T>,
    weights: &ClassWeights,
) -> Result<(Vec<T>, T)> {
    let mut y = linear(params, &ex.features)?;
    let n_cells = params.n_cells();
    let inv_cells = T::one() / T::lit(n_cells as f64);
    match (&ex.target, params.kind) {
        (Target::Intensity(t), ModelKind::Regression) => {
            if t.values().len() != n_cells {
                return Err(Error::dim(n_cells, t.values().len()));
            }
            let two = T::lit(2.0);
            let mut loss = T::zero();
            for (yj, &tj) in y.iter_mut().zip(t.values()) {
                let d = *yj - tj;
                loss += d * d;
                *yj = two * d * inv_cells;
            }
            Ok((y, loss * inv_cells))
        }
        (Target::Classes(t), ModelKind::Classification) => {
            if t.classes().len() != n_cells {
                return Err(Error::dim(n_cells, t.classes().len()));
            }
            let floor = T::lit(CE_PROB_FLOOR);
            let mut loss = T::zero();
            for (row, &c) in y.chunks_mut(JmaClass::COUNT).zip(t.classes()) {
                softmax_in_place(row);
                let w = T::lit(weights.get(c));
                loss += w * -row[c.ordinal()].max(floor).ln();
                row[c.ordinal()] -= T::one();
                for v in row.iter_mut() {
                    *v *= w * inv_cells;
                }
            }
            Ok((y, loss * inv_cells))
        }
        (_, kind) => Err(Error::InvalidArgument(format!("target type does not match a {kind} model"))),
    }
}

/// Analytic gradient of the batch-mean loss with respect to `W` and `b`.
///
/// Regression uses MSE, so the output error is `2 (y - t) / n_cells`;
/// classification uses class-weighted cross-entropy through the softmax, so
/// it is `w[t] (p - onehot(t)) / n_cells`.
pub fn backward<T: Scalar>(params: &ModelParams<T>, batch: &[&Example<T>], weights: &ClassWeights) -> Result<Gradients<T>> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    params.check_shape()?;
    let per_sample = batch
        .par_iter()
        .map(|ex| sample_error(params, ex, weights))
        .collect::<Result<Vec<_>>>()?;

    let n = T::lit(batch.len() as f64);
    let mut b = vec![T::zero(); params.out_dim];
    let mut loss = T::zero();
    for (err, l) in &per_sample {
        for (bj, &e) in b.iter_mut().zip(err) {
            *bj += e;
        }
        loss += *l;
    }
    b.iter_mut().for_each(|v| *v /= n);

    let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); params.in_dim];
    for (s, ex) in batch.iter().enumerate() {
        for &i in ex.nonzero() {
            rows[i].push((s, ex.features[i]));
        }
    }
    let errors = per_sample.into_iter().map(|(e, _)| e).collect();
    Ok(Gradients {
        in_dim: params.in_dim,
        out_dim: params.out_dim,
        w: WeightGradient::Outer { rows, errors },
        b,
        loss: loss / n,
    })
}
