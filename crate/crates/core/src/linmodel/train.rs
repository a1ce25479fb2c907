use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{rasterize, Catalog, DatasetSplit, HypocenterEvent, SplitPart};
use crate::encoder::{encode, EncoderConfig};
use crate::error::{Error, Result};
use crate::geo::{GridSpec, JmaClass};
use crate::metrics::pearson_r;
use crate::scalar::Scalar;

use super::adam::{adam_step, AdamState};
use super::backward::{backward, Example, Target};
use super::forward::{forward_classification, forward_regression, predicted_class_grid};
use super::loss::{class_weights_inverse_frequency, ClassWeights};
use super::{ModelKind, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    None,
    #[default]
    InverseFrequency,
}

impl std::str::FromStr for ClassWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(ClassWeighting::None),
            "inverse_frequency" | "inverse-frequency" => Ok(ClassWeighting::InverseFrequency),
            other => Err(Error::InvalidArgument(format!("unknown class weighting `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Only used by the classification head.
    pub class_weights: ClassWeighting,
    /// Stop after this many epochs without a better validation correlation
    /// and return the best parameters seen.
    pub early_stop_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            learning_rate: 0.1,
            epochs: 100,
            seed: 0,
            class_weights: ClassWeighting::InverseFrequency,
            early_stop_patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::InvalidArgument(format!("learning rate {} must be finite and >= 0", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    /// Pearson r of rounded classes on the validation split; `None` when
    /// there is no validation data or the correlation is undefined.
    pub val_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
    /// Epoch whose parameters were returned.
    pub selected_epoch: usize,
    pub class_weights: Option<ClassWeights>,
}

impl TrainingLog {
    pub fn best_val_metric(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.val_metric)
            .fold(None, |best, v| Some(best.map_or(v, |b: f64| b.max(v))))
    }

    /// `epoch,train_loss,val_metric`, with an empty field for an undefined
    /// validation metric.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,train_loss,val_metric")?;
        for r in &self.records {
            match r.val_metric {
                Some(v) => writeln!(w, "{},{},{}", r.epoch, r.train_loss, v)?,
                None => writeln!(w, "{},{},", r.epoch, r.train_loss)?,
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Encodes events and rasterizes their targets for one head.
pub fn build_examples<T: Scalar>(
    events: &[&HypocenterEvent],
    grid: &GridSpec,
    encoder: &EncoderConfig,
    kind: ModelKind,
) -> Result<Vec<Example<T>>> {
    events
        .par_iter()
        .map(|e| {
            let features = encode::<T>(e, encoder, grid)?.into_features();
            let observed = rasterize::<T>(e, grid);
            let target = match kind {
                ModelKind::Regression => Target::Intensity(observed),
                ModelKind::Classification => Target::Classes(observed.to_classes()?),
            };
            Ok(Example::new(features, target))
        })
        .collect()
}

fn truth_classes<T: Scalar>(ex: &Example<T>) -> Result<Vec<JmaClass>> {
    Ok(match &ex.target {
        Target::Intensity(g) => g.to_classes()?.classes().to_vec(),
        Target::Classes(c) => c.classes().to_vec(),
    })
}

fn predicted_classes<T: Scalar>(params: &ModelParams<T>, ex: &Example<T>) -> Result<Vec<JmaClass>> {
    Ok(match params.kind {
        ModelKind::Regression => forward_regression(params, &ex.features)?.to_classes()?.classes().to_vec(),
        ModelKind::Classification => predicted_class_grid(&forward_classification(params, &ex.features)?)
            .classes()
            .to_vec(),
    })
}

/// Pooled Pearson r of rounded classes over a set of examples.
fn correlation_on<T: Scalar>(params: &ModelParams<T>, examples: &[Example<T>]) -> Result<Option<f64>> {
    if examples.is_empty() {
        return Ok(None);
    }
    let pairs = examples
        .par_iter()
        .map(|ex| Ok((predicted_classes(params, ex)?, truth_classes(ex)?)))
        .collect::<Result<Vec<_>>>()?;
    let (pred, truth): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    pearson_r(&pred.concat(), &truth.concat())
}

/// Mini-batch Adam from zero-initialized parameters.
///
/// Deterministic for a fixed seed: the shuffle uses a seeded ChaCha stream
/// and every reduction runs in a fixed order.
pub fn train_on_examples<T: Scalar>(
    mut params: ModelParams<T>,
    train_set: &[Example<T>],
    val_set: &[Example<T>],
    weights: &ClassWeights,
    cfg: &TrainConfig,
) -> Result<(ModelParams<T>, TrainingLog)> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptySplit);
    }
    let mut state = AdamState::<T>::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let lr = T::lit(cfg.learning_rate);
    let mut log = TrainingLog {
        class_weights: (params.kind == ModelKind::Classification).then_some(*weights),
        ..Default::default()
    };
    let mut best: Option<(f64, usize, ModelParams<T>)> = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Example<T>> = chunk.iter().map(|&i| &train_set[i]).collect();
            let grads = backward(&params, &batch, weights)?;
            let loss = grads.loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            loss_sum += loss * batch.len() as f64;
            adam_step(&mut params, &grads, &mut state, lr)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_metric = correlation_on(&params, val_set)?;
        log::info!(
            "epoch {epoch}: train loss {train_loss:.6}, val r {}",
            val_metric.map_or("undefined".to_string(), |v| format!("{v:.4}"))
        );
        log.records.push(EpochRecord {
            epoch,
            train_loss,
            val_metric,
        });

        if let Some(patience) = cfg.early_stop_patience {
            let improved = match (&best, val_metric) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some((b, _, _)), Some(v)) => v > *b,
            };
            if improved {
                best = Some((val_metric.unwrap_or(f64::NAN), epoch, params.clone()));
            } else if let Some((_, best_epoch, _)) = &best {
                if epoch - best_epoch >= patience {
                    log::info!("early stop at epoch {epoch}; best epoch {best_epoch}");
                    break;
                }
            }
        }
    }
    params.check_finite()?;
    match best {
        Some((_, epoch, p)) => {
            log.selected_epoch = epoch;
            Ok((p, log))
        }
        None => {
            log.selected_epoch = log.records.len();
            Ok((params, log))
        }
    }
}

/// Trains one head on the train part of `split`, scoring each epoch on the
/// validation part.
pub fn train<T: Scalar>(
    catalog: &Catalog,
    split: &DatasetSplit,
    grid: &GridSpec,
    encoder: &EncoderConfig,
    cfg: &TrainConfig,
    kind: ModelKind,
) -> Result<(ModelParams<T>, TrainingLog)> {
    let train_events = split.events(SplitPart::Train, catalog)?;
    if train_events.is_empty() {
        return Err(Error::EmptySplit);
    }
    let val_events = split.events(SplitPart::Validation, catalog)?;
    let params = ModelParams::zeros(kind, *grid, *encoder)?;
    let train_set = build_examples::<T>(&train_events, grid, encoder, kind)?;
    let val_set = build_examples::<T>(&val_events, grid, encoder, kind)?;
    let weights = match (kind, cfg.class_weights) {
        (ModelKind::Classification, ClassWeighting::InverseFrequency) => {
            class_weights_inverse_frequency(train_set.iter().filter_map(|ex| match &ex.target {
                Target::Classes(c) => Some(c),
                Target::Intensity(_) => None,
            }))
        }
        _ => ClassWeights::default(),
    };
    train_on_examples(params, &train_set, &val_set, &weights, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub k: usize,
    pub val_r: Option<f64>,
}

/// Trains one model per patch size and reports the best validation
/// correlation reached by each. The second value is the winning `k`.
pub fn sweep_k<T: Scalar>(
    catalog: &Catalog,
    split: &DatasetSplit,
    grid: &GridSpec,
    base: &EncoderConfig,
    cfg: &TrainConfig,
    kind: ModelKind,
    ks: &[usize],
) -> Result<(Vec<SweepPoint>, Option<usize>)> {
    let mut points = Vec::with_capacity(ks.len());
    for &k in ks {
        let encoder = EncoderConfig { k, ..*base };
        let (_, log) = train::<T>(catalog, split, grid, &encoder, cfg, kind)?;
        let val_r = log.best_val_metric();
        log::info!("k = {k}: best val r {val_r:?}");
        points.push(SweepPoint { k, val_r });
    }
    let best = points
        .iter()
        .filter_map(|p| p.val_r.map(|r| (p.k, r)))
        .fold(None, |acc: Option<(usize, f64)>, (k, r)| match acc {
            Some((_, br)) if br >= r => acc,
            _ => Some((k, r)),
        })
        .map(|(k, _)| k);
    Ok((points, best))
}
