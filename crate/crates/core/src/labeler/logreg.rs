//! Logistic regression trained by batch gradient descent on L2-penalized
//! log-loss.

use super::{Hyperparams, TextFeatures};

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    pub fn train(examples: &[(TextFeatures, bool)], params: &Hyperparams) -> Self {
        let dim = examples[0].0.dim;
        let mut model = Self { weights: vec![0.0; dim], bias: 0.0 };
        for _ in 0..params.lr_epochs {
            let (gw, gb) = model.gradient(examples, params.lr_l2);
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= params.lr_step * g;
            }
            model.bias -= params.lr_step * gb;
        }
        model
    }

    /// Mean log-loss plus (l2/2)·‖w‖² (bias unpenalized).
    pub fn loss(&self, examples: &[(TextFeatures, bool)], l2: f64) -> f64 {
        let n = examples.len() as f64;
        let mut total = 0.0;
        for (x, y) in examples {
            let z = self.margin(x);
            // log(1 + exp(-yz)) with y in {-1,+1}, stable form
            let yz = if *y { z } else { -z };
            total += if yz > 0.0 { (-yz).exp().ln_1p() } else { -yz + yz.exp().ln_1p() };
        }
        total / n + 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Gradient of `loss` with respect to (weights, bias).
    pub fn gradient(&self, examples: &[(TextFeatures, bool)], l2: f64) -> (Vec<f64>, f64) {
        let n = examples.len() as f64;
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = 0.0;
        for (x, y) in examples {
            let err = sigmoid(self.margin(x)) - (*y as u8 as f64);
            for &(i, c) in &x.counts {
                gw[i] += err * c;
            }
            gb += err;
        }
        for (g, w) in gw.iter_mut().zip(&self.weights) {
            *g = *g / n + l2 * w;
        }
        (gw, gb / n)
    }

    fn margin(&self, x: &TextFeatures) -> f64 {
        let mut z = self.bias;
        for &(i, c) in &x.counts {
            z += self.weights[i] * c;
        }
        z
    }

    pub fn predict_proba(&self, x: &TextFeatures) -> f64 {
        sigmoid(self.margin(x))
    }
}
