//! AdaBoost over depth-1 decision stumps, fixed round count.

use super::{Hyperparams, TextFeatures};

/// `x[feature] > threshold` predicts `polarity`, else `!polarity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: bool,
    pub alpha: f64,
}

impl Stump {
    fn predict(&self, dense: &[f64]) -> f64 {
        let above = dense[self.feature] > self.threshold;
        if above == self.polarity {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoost {
    pub stumps: Vec<Stump>,
}

impl AdaBoost {
    pub fn train(examples: &[(TextFeatures, bool)], params: &Hyperparams) -> Self {
        let n = examples.len();
        let dim = examples[0].0.dim;
        let dense: Vec<Vec<f64>> = examples.iter().map(|(x, _)| x.to_dense()).collect();
        let targets: Vec<f64> =
            examples.iter().map(|(_, y)| if *y { 1.0 } else { -1.0 }).collect();
        let mut weights = vec![1.0 / n as f64; n];
        let mut stumps = Vec::new();
        for _ in 0..params.adaboost_rounds {
            let stump = best_stump(&dense, &targets, &weights, dim);
            let err: f64 = dense
                .iter()
                .zip(&targets)
                .zip(&weights)
                .filter(|((x, &y), _)| stump.predict(x) != y)
                .map(|(_, &w)| w)
                .sum();
            let err = err.clamp(1e-12, 1.0 - 1e-12);
            let alpha = 0.5 * ((1.0 - err) / err).ln();
            let stump = Stump { alpha, ..stump };
            let mut total = 0.0;
            for ((x, &y), w) in dense.iter().zip(&targets).zip(weights.iter_mut()) {
                *w *= (-alpha * y * stump.predict(x)).exp();
                total += *w;
            }
            for w in &mut weights {
                *w /= total;
            }
            let perfect = err <= 1e-12;
            stumps.push(stump);
            if perfect {
                break;
            }
        }
        Self { stumps }
    }

    fn margin(&self, dense: &[f64]) -> f64 {
        self.stumps.iter().map(|s| s.alpha * s.predict(dense)).sum()
    }

    /// Logistic squashing of the boosted margin, in [0,1].
    pub fn predict_proba(&self, x: &TextFeatures) -> f64 {
        let m = self.margin(&x.to_dense());
        1.0 / (1.0 + (-2.0 * m).exp())
    }
}

fn best_stump(dense: &[Vec<f64>], targets: &[f64], weights: &[f64], dim: usize) -> Stump {
    let mut best = Stump { feature: 0, threshold: 0.0, polarity: true, alpha: 0.0 };
    let mut best_err = f64::INFINITY;
    for feature in 0..dim {
        let mut values: Vec<f64> = dense.iter().map(|x| x[feature]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        let mut candidates = vec![values[0] - 1.0];
        candidates.extend(values.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        for threshold in candidates {
            for polarity in [true, false] {
                let stump = Stump { feature, threshold, polarity, alpha: 0.0 };
                let err: f64 = dense
                    .iter()
                    .zip(targets)
                    .zip(weights)
                    .filter(|((x, &y), _)| stump.predict(x) != y)
                    .map(|(_, &w)| w)
                    .sum();
                if err < best_err {
                    best_err = err;
                    best = stump;
                }
            }
        }
    }
    best
}
