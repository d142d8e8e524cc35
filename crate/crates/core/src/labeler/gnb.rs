//! Gaussian naive Bayes with closed-form per-class mean/variance.

use super::{Hyperparams, TextFeatures};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb {
    pub log_prior: [f64; 2],
    /// Per class, per feature.
    pub means: [Vec<f64>; 2],
    pub vars: [Vec<f64>; 2],
}

impl GaussianNb {
    pub fn train(examples: &[(TextFeatures, bool)], params: &Hyperparams) -> Self {
        let dim = examples[0].0.dim;
        let n = examples.len() as f64;
        let mut counts = [0usize; 2];
        let mut sums = [vec![0.0; dim], vec![0.0; dim]];
        for (x, y) in examples {
            let c = *y as usize;
            counts[c] += 1;
            for &(i, v) in &x.counts {
                sums[c][i] += v;
            }
        }
        let means = [
            sums[0].iter().map(|s| s / counts[0] as f64).collect::<Vec<_>>(),
            sums[1].iter().map(|s| s / counts[1] as f64).collect::<Vec<_>>(),
        ];
        let mut sq = [vec![0.0; dim], vec![0.0; dim]];
        for (x, y) in examples {
            let c = *y as usize;
            let dense = x.to_dense();
            for i in 0..dim {
                let d = dense[i] - means[c][i];
                sq[c][i] += d * d;
            }
        }
        let floor = params.nb_var_floor;
        let vars = [
            sq[0].iter().map(|s| (s / counts[0] as f64).max(floor)).collect::<Vec<_>>(),
            sq[1].iter().map(|s| (s / counts[1] as f64).max(floor)).collect::<Vec<_>>(),
        ];
        let log_prior = [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()];
        Self { log_prior, means, vars }
    }

    fn log_likelihood(&self, class: usize, dense: &[f64]) -> f64 {
        let mut ll = self.log_prior[class];
        for (i, &v) in dense.iter().enumerate() {
            let var = self.vars[class][i];
            let d = v - self.means[class][i];
            ll -= 0.5 * ((2.0 * std::f64::consts::PI * var).ln() + d * d / var);
        }
        ll
    }

    pub fn predict_proba(&self, x: &TextFeatures) -> f64 {
        let dense = x.to_dense();
        let l0 = self.log_likelihood(0, &dense);
        let l1 = self.log_likelihood(1, &dense);
        let m = l0.max(l1);
        let e0 = (l0 - m).exp();
        let e1 = (l1 - m).exp();
        e1 / (e0 + e1)
    }
}
