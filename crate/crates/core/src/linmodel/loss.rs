use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::JmaClass;
use crate::grid::{ClassGrid, IntensityGrid};
use crate::scalar::Scalar;

use super::forward::ClassDistribution;

/// Probability floor inside the logarithm of the cross-entropy.
pub const CE_PROB_FLOOR: f64 = 1e-12;

/// Mean squared error over all cells.
pub fn loss_mse<T: Scalar>(pred: &IntensityGrid<T>, target: &IntensityGrid<T>) -> Result<T> {
    if pred.spec() != target.spec() {
        return Err(Error::SpecMismatch);
    }
    let n = T::lit(pred.values().len() as f64);
    let sum: T = pred
        .values()
        .iter()
        .zip(target.values())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// Per-class multipliers for the cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub [f64; JmaClass::COUNT]);

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights([1.0; JmaClass::COUNT])
    }
}

impl ClassWeights {
    pub fn new(weights: [f64; JmaClass::COUNT]) -> Result<Self> {
        let w = ClassWeights(weights);
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().all(|w| w.is_finite() && *w > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("class weights must be positive and finite: {:?}", self.0)))
        }
    }

    pub fn get(&self, c: JmaClass) -> f64 {
        self.0[c.ordinal()]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        ClassWeights(self.0.map(|w| w * factor))
    }
}

/// Mean over cells of `w[target] * -ln p[target]`, with `p` floored at 1e-12.
pub fn loss_weighted_ce<T: Scalar>(dist: &ClassDistribution<T>, target: &ClassGrid, weights: &ClassWeights) -> Result<T> {
    weights.validate()?;
    if dist.spec() != target.spec() {
        return Err(Error::SpecMismatch);
    }
    let floor = T::lit(CE_PROB_FLOOR);
    let sum: T = dist
        .rows()
        .zip(target.classes())
        .map(|(row, &c)| T::lit(weights.get(c)) * -row[c.ordinal()].max(floor).ln())
        .sum();
    Ok(sum / T::lit(target.classes().len() as f64))
}

/// Inverse-frequency weights over the cells of the training targets,
/// normalised so the count-weighted mean weight is 1. Classes absent from
/// the data get the largest weight among present classes.
pub fn class_weights_inverse_frequency<'a>(targets: impl IntoIterator<Item = &'a ClassGrid>) -> ClassWeights {
    let mut counts = [0u64; JmaClass::COUNT];
    for grid in targets {
        for c in grid.classes() {
            counts[c.ordinal()] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let present = counts.iter().filter(|&&n| n > 0).count();
    if present == 0 {
        return ClassWeights::default();
    }
    // sum_c count_c * w_c = total  <=>  w_c = total / (present * count_c)
    let scale = total as f64 / present as f64;
    let mut w = [0.0; JmaClass::COUNT];
    for (wc, &n) in w.iter_mut().zip(&counts) {
        if n > 0 {
            *wc = scale / n as f64;
        }
    }
    let max_present = w.iter().copied().fold(0.0, f64::max);
    for (wc, &n) in w.iter_mut().zip(&counts) {
        if n == 0 {
            *wc = max_present;
        }
    }
    ClassWeights(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GridSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cls(v: usize) -> JmaClass {
        JmaClass::from_ordinal(v).unwrap()
    }

    #[test]
    fn mse_basics() {
        let spec = GridSpec::square(4).unwrap();
        let a = IntensityGrid::from_values(spec, (0..16).map(|i| i as f64).collect()).unwrap();
        let b = IntensityGrid::from_values(spec, (0..16).map(|i| i as f64 + 1.0).collect()).unwrap();
        assert_eq!(loss_mse(&a, &a).unwrap(), 0.0);
        assert_eq!(loss_mse(&a, &b).unwrap(), 1.0);
        let other = IntensityGrid::<f64>::zeros(GridSpec::square(2).unwrap());
        assert!(matches!(loss_mse(&a, &other), Err(Error::SpecMismatch)));
    }

    #[test]
    fn mse_matches_loop_oracle() {
        let spec = GridSpec::square(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p: Vec<f64> = (0..49).map(|_| rng.gen_range(-1.0..7.0)).collect();
        let t: Vec<f64> = (0..49).map(|_| rng.gen_range(0.0..7.0)).collect();
        let mut acc = 0.0;
        for i in 0..49 {
            let d = p[i] - t[i];
            acc += d * d;
        }
        acc /= 49.0;
        let got = loss_mse(
            &IntensityGrid::from_values(spec, p).unwrap(),
            &IntensityGrid::from_values(spec, t).unwrap(),
        )
        .unwrap();
        assert!((got - acc).abs() < 1e-9);
    }

    #[test]
    fn ce_values() {
        let spec = GridSpec::square(2).unwrap();
        let target = ClassGrid::from_classes(spec, vec![cls(0), cls(3), cls(9), cls(5)]).unwrap();
        let mut hot = vec![0.0; 40];
        for (i, c) in target.classes().iter().enumerate() {
            hot[i * 10 + c.ordinal()] = 1.0;
        }
        let d = ClassDistribution::from_probs(spec, hot).unwrap();
        assert!(loss_weighted_ce(&d, &target, &ClassWeights::default()).unwrap() <= 1e-11);

        let uniform = ClassDistribution::from_probs(spec, vec![0.1; 40]).unwrap();
        let l = loss_weighted_ce(&uniform, &target, &ClassWeights::default()).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-12);

        let w = ClassWeights::new([0.3, 1.0, 2.0, 0.7, 1.1, 5.0, 0.2, 3.0, 1.0, 4.0]).unwrap();
        let base = loss_weighted_ce(&uniform, &target, &w).unwrap();
        assert_eq!(loss_weighted_ce(&uniform, &target, &w.scaled(2.0)).unwrap(), 2.0 * base);

        assert!(loss_weighted_ce(&uniform, &target, &ClassWeights([0.0; 10])).is_err());
        let zero = ClassDistribution::from_probs(spec, vec![0.0; 40]).unwrap();
        let capped = loss_weighted_ce(&zero, &target, &ClassWeights::default()).unwrap();
        assert!((capped - -(1e-12f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn inverse_frequency_weights() {
        let spec = GridSpec::square(10).unwrap();
        let all_zero = ClassGrid::filled(spec, cls(0));
        assert_eq!(class_weights_inverse_frequency([&all_zero]), ClassWeights([1.0; 10]));

        let mut g = ClassGrid::filled(spec, cls(0));
        for i in 0..10 {
            g.set(spec.cell_of_linear(i), cls(1));
        }
        let w = class_weights_inverse_frequency([&g]);
        assert!((w.0[0] / w.0[1] - 1.0 / 9.0).abs() < 1e-12);
        // 90 * w0 + 10 * w1 = 100
        assert!((90.0 * w.0[0] + 10.0 * w.0[1] - 100.0).abs() < 1e-9);
        for c in 2..10 {
            assert_eq!(w.0[c], w.0[1]);
        }
        let doubled = class_weights_inverse_frequency([&g, &g]);
        assert_eq!(doubled, w);
    }
}
