use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::backward::Gradients;
use super::ModelParams;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second moment estimates shaped like `(W, b)`.
///
/// `active` marks weight rows that have ever received a gradient. A row
/// that never has keeps zero moments, and Adam leaves such a row exactly
/// where it is, so the update skips it.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m_w: Vec<T>,
    pub v_w: Vec<T>,
    pub m_b: Vec<T>,
    pub v_b: Vec<T>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    active: Vec<bool>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<P: Scalar>(params: &ModelParams<P>) -> Self {
        Self::with_dims(params.in_dim, params.out_dim)
    }

    pub fn with_dims(in_dim: usize, out_dim: usize) -> Self {
        AdamState {
            m_w: vec![T::zero(); in_dim * out_dim],
            v_w: vec![T::zero(); in_dim * out_dim],
            m_b: vec![T::zero(); out_dim],
            v_b: vec![T::zero(); out_dim],
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            active: vec![false; in_dim],
        }
    }
}

struct Coeffs<T> {
    beta1: T,
    beta2: T,
    one_minus_beta1: T,
    one_minus_beta2: T,
    bias1: T,
    bias2: T,
    lr: T,
    eps: T,
}

#[inline]
fn update<T: Scalar>(p: &mut [T], m: &mut [T], v: &mut [T], g: &[T], c: &Coeffs<T>) {
    for (((p, m), v), &g) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g) {
        *m = c.beta1 * *m + c.one_minus_beta1 * g;
        *v = c.beta2 * *v + c.one_minus_beta2 * g * g;
        let m_hat = *m / c.bias1;
        let v_hat = *v / c.bias2;
        *p -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Scalar>(params: &mut ModelParams<T>, grads: &Gradients<T>, state: &mut AdamState<T>, lr: T) -> Result<()> {
    let (in_dim, out_dim) = (params.in_dim, params.out_dim);
    if grads.in_dim != in_dim
        || grads.out_dim != out_dim
        || grads.b.len() != out_dim
        || state.m_w.len() != in_dim * out_dim
        || state.m_b.len() != out_dim
        || state.active.len() != in_dim
    {
        return Err(Error::dim(
            format!("{in_dim} x {out_dim}"),
            format!("gradient {} x {}, state {} rows", grads.in_dim, grads.out_dim, state.active.len()),
        ));
    }
    state.t += 1;
    let t = state.t as i32;
    let c = Coeffs {
        beta1: T::lit(state.beta1),
        beta2: T::lit(state.beta2),
        one_minus_beta1: T::lit(1.0 - state.beta1),
        one_minus_beta2: T::lit(1.0 - state.beta2),
        bias1: T::lit(1.0 - state.beta1.powi(t)),
        bias2: T::lit(1.0 - state.beta2.powi(t)),
        lr,
        eps: T::lit(state.epsilon),
    };

    update(&mut params.b, &mut state.m_b, &mut state.v_b, &grads.b, &c);

    params
        .w
        .par_chunks_mut(out_dim)
        .zip(state.m_w.par_chunks_mut(out_dim))
        .zip(state.v_w.par_chunks_mut(out_dim))
        .zip(state.active.par_iter_mut())
        .enumerate()
        .for_each_init(
            || vec![T::zero(); out_dim],
            |g, (i, (((p, m), v), active))| {
                let has_grad = grads.fill_w_row(i, g);
                if !has_grad {
                    if !*active {
                        return;
                    }
                    g.iter_mut().for_each(|x| *x = T::zero());
                }
                *active = true;
                update(p, m, v, g, &c);
            },
        );
    Ok(())
}
