//! Evaluation over rounded predictions pooled across every cell of every
//! event in a split.
//!
//! * Pearson r on class ordinals 0..=9.
//! * Binary F1 with "class > 0" as the positive label.
//! * Multi-class MCC (Gorodkin's R_K) over the 10x10 confusion matrix.
//!
//! Degenerate inputs (zero variance, zero denominators) give `None` rather
//! than a number.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::catalog::{rasterize, Catalog, DatasetSplit, SplitPart};
use crate::error::{Error, Result};
use crate::geo::{GridSpec, JmaClass};
use crate::grid::{ClassGrid, IntensityGrid};
use crate::scalar::Scalar;

fn check_lengths(pred: &[JmaClass], truth: &[JmaClass]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::dim(truth.len(), pred.len()));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("no cells to evaluate".into()));
    }
    Ok(())
}

/// Pearson correlation of the class ordinals.
pub fn pearson_r(pred: &[JmaClass], truth: &[JmaClass]) -> Result<Option<f64>> {
    check_lengths(pred, truth)?;
    let n = pred.len() as f64;
    let mean = |xs: &[JmaClass]| xs.iter().map(|c| c.ordinal() as f64).sum::<f64>() / n;
    let (mp, mt) = (mean(pred), mean(truth));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, t) in pred.iter().zip(truth) {
        let dp = p.ordinal() as f64 - mp;
        let dt = t.ordinal() as f64 - mt;
        sxy += dp * dt;
        sxx += dp * dp;
        syy += dt * dt;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some(sxy / (sxx * syy).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl BinaryCounts {
    pub fn from_classes(pred: &[JmaClass], truth: &[JmaClass]) -> Self {
        let mut c = BinaryCounts::default();
        for (p, t) in pred.iter().zip(truth) {
            match (*p > JmaClass::ZERO, *t > JmaClass::ZERO) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    /// `2PR / (P + R)`, 0 when precision and recall are both 0 or undefined.
    pub fn f1(&self) -> f64 {
        let (tp, fp, fn_) = (self.tp as f64, self.fp as f64, self.fn_ as f64);
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }
}

pub fn f1_binary(pred: &[JmaClass], truth: &[JmaClass]) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(BinaryCounts::from_classes(pred, truth).f1())
}

/// 10x10 counts, `counts[true][pred]`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; JmaClass::COUNT]; JmaClass::COUNT],
}

impl ConfusionMatrix {
    pub fn from_classes(pred: &[JmaClass], truth: &[JmaClass]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::dim(truth.len(), pred.len()));
        }
        let mut m = ConfusionMatrix::default();
        m.add(pred, truth);
        Ok(m)
    }

    fn add(&mut self, pred: &[JmaClass], truth: &[JmaClass]) {
        for (p, t) in pred.iter().zip(truth) {
            self.counts[t.ordinal()][p.ordinal()] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_counts(&self) -> [u64; JmaClass::COUNT] {
        self.counts.map(|row| row.iter().sum())
    }

    pub fn pred_counts(&self) -> [u64; JmaClass::COUNT] {
        let mut out = [0; JmaClass::COUNT];
        for row in &self.counts {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// `(c s - sum p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2))`
    /// with `c` the trace, `s` the total, `t_k`/`p_k` true/predicted counts.
    pub fn mcc(&self) -> Option<f64> {
        let s = self.total() as f64;
        let c: f64 = (0..JmaClass::COUNT).map(|k| self.counts[k][k] as f64).sum();
        let t = self.true_counts();
        let p = self.pred_counts();
        let pt: f64 = t.iter().zip(&p).map(|(&a, &b)| a as f64 * b as f64).sum();
        let pp: f64 = p.iter().map(|&v| (v as f64).powi(2)).sum();
        let tt: f64 = t.iter().map(|&v| (v as f64).powi(2)).sum();
        let denom = (s * s - pp) * (s * s - tt);
        if denom <= 0.0 {
            return None;
        }
        Some((c * s - pt) / denom.sqrt())
    }
}

pub fn mcc_multiclass(pred: &[JmaClass], truth: &[JmaClass]) -> Result<Option<f64>> {
    check_lengths(pred, truth)?;
    Ok(ConfusionMatrix::from_classes(pred, truth)?.mcc())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pearson_r: Option<f64>,
    pub f1_binary: f64,
    pub mcc_multiclass: Option<f64>,
    pub confusion: ConfusionMatrix,
    pub n_cells_evaluated: u64,
}

impl EvalReport {
    pub fn from_classes(pred: &[JmaClass], truth: &[JmaClass]) -> Result<Self> {
        check_lengths(pred, truth)?;
        let confusion = ConfusionMatrix::from_classes(pred, truth)?;
        Ok(EvalReport {
            pearson_r: pearson_r(pred, truth)?,
            f1_binary: f1_binary(pred, truth)?,
            mcc_multiclass: confusion.mcc(),
            n_cells_evaluated: confusion.total(),
            confusion,
        })
    }
}

/// A model's output for one event.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction<T = f64> {
    /// Continuous intensities, rounded to classes before scoring.
    Intensity(IntensityGrid<T>),
    /// Hard class predictions, scored as-is.
    Classes(ClassGrid),
}

impl<T: Scalar> Prediction<T> {
    pub fn spec(&self) -> &GridSpec {
        match self {
            Prediction::Intensity(g) => g.spec(),
            Prediction::Classes(c) => c.spec(),
        }
    }

    pub fn to_classes(&self) -> Result<ClassGrid> {
        match self {
            Prediction::Intensity(g) => g.to_classes(),
            Prediction::Classes(c) => Ok(c.clone()),
        }
    }
}

/// Pooled (predicted, true) classes of one split, in split order then
/// row-major cell order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairedClasses {
    pub pred: Vec<JmaClass>,
    pub truth: Vec<JmaClass>,
}

impl PairedClasses {
    /// `pred_class,true_class` per cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "pred_class,true_class")?;
        for (p, t) in self.pred.iter().zip(&self.truth) {
            writeln!(w, "{},{}", p.ordinal(), t.ordinal())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rounds and pools predictions for every event of `part`, scoring against
/// rasterized observations.
pub fn collect_pairs<T: Scalar>(
    predictions: &HashMap<String, Prediction<T>>,
    catalog: &Catalog,
    split: &DatasetSplit,
    part: SplitPart,
) -> Result<PairedClasses> {
    let mut pairs = PairedClasses::default();
    for event in split.events(part, catalog)? {
        let pred = predictions
            .get(&event.id)
            .ok_or_else(|| Error::MissingPrediction(event.id.clone()))?;
        let truth = rasterize::<f64>(event, pred.spec()).to_classes()?;
        pairs.pred.extend_from_slice(pred.to_classes()?.classes());
        pairs.truth.extend_from_slice(truth.classes());
    }
    Ok(pairs)
}

pub fn evaluate<T: Scalar>(
    predictions: &HashMap<String, Prediction<T>>,
    catalog: &Catalog,
    split: &DatasetSplit,
    part: SplitPart,
) -> Result<(EvalReport, PairedClasses)> {
    let pairs = collect_pairs(predictions, catalog, split, part)?;
    Ok((EvalReport::from_classes(&pairs.pred, &pairs.truth)?, pairs))
}
