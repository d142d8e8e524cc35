//! Reward estimation: regularized least squares of final scores on
//! discounted feature maps, and reward scoring of states and subthreads.

use nalgebra::{DMatrix, DVector};

use crate::encoding::{FeatureMap, FeatureSchema, StateVector, TimeIndex, Variant};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub n: usize,
    pub residual_norm: f64,
    /// Condition estimate of the regularized Gram matrix.
    pub condition: f64,
}

/// A fitted linear reward function r(s) = theta . phi(s).
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    pub theta: Vec<f64>,
    pub schema: FeatureSchema,
    pub lambda: f64,
    pub diagnostics: FitDiagnostics,
}

/// Solve theta = argmin (1/n) sum (f_i - theta . mu_i)^2 + lambda |theta|^2.
///
/// The normal equations (M + n lambda I) theta = b with M = sum mu mu^T and
/// b = sum mu f are solved by Cholesky when lambda > 0. With lambda = 0 the
/// minimum-norm least-squares solution is taken via SVD of the design
/// matrix, which also covers singular M.
pub fn fit(schema: &FeatureSchema, pairs: &[(FeatureMap, f64)], lambda: f64) -> Result<RewardModel> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no (mu, f) pairs to fit".into()));
    }
    if lambda < 0.0 {
        return Err(Error::Validation(format!("lambda {lambda} negative")));
    }
    let d = schema.dim();
    let n = pairs.len();
    for (fm, f) in pairs {
        if fm.mu.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: fm.mu.len() });
        }
        if fm.mu.iter().any(|v| !v.is_finite()) || !f.is_finite() {
            return Err(Error::NonFinite("fit input".into()));
        }
    }
    let x = DMatrix::from_fn(n, d, |i, j| pairs[i].0.mu[j]);
    let y = DVector::from_fn(n, |i, _| pairs[i].1);
    let svd = x.clone().svd(false, false);
    let s_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let s_min = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let reg = n as f64 * lambda;
    let condition = (s_max * s_max + reg) / (s_min * s_min + reg).max(f64::MIN_POSITIVE);

    let theta = if lambda > 0.0 {
        let m = x.transpose() * &x + DMatrix::identity(d, d) * reg;
        let b = x.transpose() * &y;
        match m.cholesky() {
            Some(chol) => chol.solve(&b),
            None => {
                return Err(Error::Solver {
                    msg: "Cholesky factorization of regularized Gram matrix failed".into(),
                    cond: condition,
                })
            }
        }
    } else {
        let svd = x.clone().svd(true, true);
        svd.solve(&y, s_max * 1e-12).map_err(|msg| Error::Solver {
            msg: msg.to_string(),
            cond: condition,
        })?
    };
    let theta: Vec<f64> = theta.iter().cloned().collect();
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solver { msg: "non-finite solution".into(), cond: condition });
    }
    let residual_norm = (&x * DVector::from_column_slice(&theta) - &y).norm();
    Ok(RewardModel {
        theta,
        schema: schema.clone(),
        lambda,
        diagnostics: FitDiagnostics { n, residual_norm, condition },
    })
}

impl RewardModel {
    /// r(s) = theta . phi(s)
    pub fn reward(&self, state: &StateVector) -> Result<f64> {
        if state.values.len() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                got: state.values.len(),
            });
        }
        Ok(self.theta.iter().zip(&state.values).map(|(t, v)| t * v).sum())
    }

    /// Unweighted mean reward over a subthread's states.
    pub fn average_reward(&self, vectors: &[StateVector]) -> Result<f64> {
        if vectors.is_empty() {
            return Err(Error::EmptySubthread("average_reward".into()));
        }
        let total: f64 = vectors.iter().map(|v| self.reward(v)).sum::<Result<f64>>()?;
        Ok(total / vectors.len() as f64)
    }

    /// Discounted mean variant: sum gamma^t r(s_t) / sum gamma^t.
    pub fn discounted_average_reward(&self, vectors: &[StateVector]) -> Result<f64> {
        if vectors.is_empty() {
            return Err(Error::EmptySubthread("discounted_average_reward".into()));
        }
        let gamma = self.schema.gamma;
        let mut num = 0.0;
        let mut den = 0.0;
        for (t, v) in vectors.iter().enumerate() {
            let w = gamma.powi(t as i32);
            num += w * self.reward(v)?;
            den += w;
        }
        Ok(num / den)
    }

    /// Plain-text model record; `parse_model` round-trips it exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("format: reward-model-v1\n");
        out.push_str(&format!("variant: {}\n", variant_tag(self.schema.variant)));
        out.push_str(&format!("gamma: {}\n", self.schema.gamma));
        out.push_str(&format!("time_index: {}\n", time_tag(self.schema.time_index)));
        out.push_str(&format!("lambda: {}\n", self.lambda));
        out.push_str(&format!("n: {}\n", self.diagnostics.n));
        out.push_str(&format!("residual_norm: {}\n", self.diagnostics.residual_norm));
        out.push_str(&format!("condition: {}\n", self.diagnostics.condition));
        for (name, value) in self.schema.names.iter().zip(&self.theta) {
            out.push_str(&format!("theta {name} {value}\n"));
        }
        out
    }
}

fn variant_tag(v: Variant) -> &'static str {
    match v {
        Variant::ContextAgnostic => "context-agnostic",
        Variant::GraphAware => "graph-aware",
    }
}

fn time_tag(t: TimeIndex) -> &'static str {
    match t {
        TimeIndex::OwnUtterance => "own-utterance",
        TimeIndex::GlobalSeq => "global-seq",
    }
}

/// Parse the plain-text model record written by [`RewardModel::to_text`].
pub fn parse_model(text: &str) -> Result<RewardModel> {
    let mut fields: std::collections::BTreeMap<&str, &str> = Default::default();
    let mut names = Vec::new();
    let mut theta = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("theta ") {
            let (name, value) = rest
                .rsplit_once(' ')
                .ok_or_else(|| Error::ModelFormat(format!("bad theta line {line:?}")))?;
            names.push(name.to_string());
            theta.push(
                value
                    .parse::<f64>()
                    .map_err(|e| Error::ModelFormat(format!("theta {name}: {e}")))?,
            );
        } else if let Some((key, value)) = line.split_once(": ") {
            fields.insert(key, value);
        } else {
            return Err(Error::ModelFormat(format!("unrecognized line {line:?}")));
        }
    }
    let get = |key: &str| {
        fields
            .get(key)
            .copied()
            .ok_or_else(|| Error::ModelFormat(format!("missing field {key:?}")))
    };
    if get("format")? != "reward-model-v1" {
        return Err(Error::ModelFormat("unknown format tag".into()));
    }
    let variant = match get("variant")? {
        "context-agnostic" => Variant::ContextAgnostic,
        "graph-aware" => Variant::GraphAware,
        other => return Err(Error::ModelFormat(format!("unknown variant {other:?}"))),
    };
    let time_index = match get("time_index")? {
        "own-utterance" => TimeIndex::OwnUtterance,
        "global-seq" => TimeIndex::GlobalSeq,
        other => return Err(Error::ModelFormat(format!("unknown time_index {other:?}"))),
    };
    let parse_f64 = |key: &str| -> Result<f64> {
        get(key)?.parse().map_err(|e| Error::ModelFormat(format!("{key}: {e}")))
    };
    let schema = FeatureSchema {
        variant,
        names,
        gamma: parse_f64("gamma")?,
        time_index,
    };
    if schema.dim() != theta.len() || schema.dim() == 0 {
        return Err(Error::ModelFormat("theta length does not match schema".into()));
    }
    Ok(RewardModel {
        theta,
        schema,
        lambda: parse_f64("lambda")?,
        diagnostics: FitDiagnostics {
            n: get("n")?
                .parse()
                .map_err(|e| Error::ModelFormat(format!("n: {e}")))?,
            residual_norm: parse_f64("residual_norm")?,
            condition: parse_f64("condition")?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(mu: &[f64]) -> FeatureMap {
        FeatureMap { mu: mu.to_vec(), horizon: 0 }
    }

    fn schema(d: usize, gamma: f64) -> FeatureSchema {
        FeatureSchema {
            variant: Variant::ContextAgnostic,
            names: (0..d).map(|i| format!("x{i}")).collect(),
            gamma,
            time_index: TimeIndex::default(),
        }
    }

    #[test]
    fn zero_targets_give_zero_theta() {
        let pairs = vec![(fm(&[1.0, 2.0]), 0.0), (fm(&[3.0, -1.0]), 0.0)];
        let model = fit(&schema(2, 0.9), &pairs, 0.5).unwrap();
        assert_eq!(model.theta, vec![0.0, 0.0]);
    }

    #[test]
    fn orthonormal_design_reads_off_targets() {
        let pairs = vec![(fm(&[1.0, 0.0]), 2.0), (fm(&[0.0, 1.0]), 3.0)];
        let model = fit(&schema(2, 0.9), &pairs, 0.0).unwrap();
        assert!((model.theta[0] - 2.0).abs() <= 1e-12);
        assert!((model.theta[1] - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn rank_deficient_lambda_zero_gives_minimum_norm() {
        // Single row spans a line; min-norm solution lies on it.
        let pairs = vec![(fm(&[1.0, 1.0]), 2.0)];
        let model = fit(&schema(2, 0.9), &pairs, 0.0).unwrap();
        assert!((model.theta[0] - 1.0).abs() <= 1e-10, "{:?}", model.theta);
        assert!((model.theta[1] - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn noiseless_recovery_with_spanning_design() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let d = 4;
        let theta_star: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let pairs: Vec<(FeatureMap, f64)> = (0..20)
            .map(|_| {
                let mu: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let f = mu.iter().zip(&theta_star).map(|(a, b)| a * b).sum();
                (fm(&mu), f)
            })
            .collect();
        let model = fit(&schema(d, 0.9), &pairs, 0.0).unwrap();
        let err: f64 = model
            .theta
            .iter()
            .zip(&theta_star)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = theta_star.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm <= 1e-6, "relative error {}", err / norm);
    }

    #[test]
    fn ridge_shrinks_theta_norm() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pairs: Vec<(FeatureMap, f64)> = (0..12)
            .map(|_| {
                let mu: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (fm(&mu), rng.gen_range(-5.0..5.0))
            })
            .collect();
        let s = schema(3, 0.9);
        let norm = |lambda: f64| {
            let m = fit(&s, &pairs, lambda).unwrap();
            m.theta.iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let norms = [norm(1e-6), norm(1e-3), norm(1e-1), norm(10.0)];
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{norms:?}");
        }
    }

    #[test]
    fn target_scaling_scales_theta_and_keeps_comparisons() {
        let pairs = vec![
            (fm(&[1.0, 0.5]), 2.0),
            (fm(&[0.3, 1.0]), -1.0),
            (fm(&[0.7, 0.1]), 0.5),
        ];
        let s = schema(2, 0.9);
        let base = fit(&s, &pairs, 1e-6).unwrap();
        let scaled_pairs: Vec<(FeatureMap, f64)> =
            pairs.iter().map(|(m, f)| (m.clone(), 3.0 * f)).collect();
        let scaled = fit(&s, &scaled_pairs, 1e-6).unwrap();
        for (a, b) in base.theta.iter().zip(&scaled.theta) {
            assert!((3.0 * a - b).abs() <= 1e-9);
        }
        let va = StateVector { values: vec![1.0, 0.0] };
        let vb = StateVector { values: vec![0.0, 1.0] };
        let before = base.reward(&va).unwrap() > base.reward(&vb).unwrap();
        let after = scaled.reward(&va).unwrap() > scaled.reward(&vb).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn reward_probes() {
        let mut model = fit(&schema(3, 0.9), &[(fm(&[1.0, 0.0, 0.0]), 1.0)], 1e-3).unwrap();
        model.theta = vec![0.0, 0.0, 0.0];
        let v = StateVector { values: vec![4.0, 5.0, 6.0] };
        assert_eq!(model.reward(&v).unwrap(), 0.0);
        model.theta = vec![0.0, 1.0, 0.0];
        assert_eq!(model.reward(&v).unwrap(), 5.0);
    }

    #[test]
    fn reward_matches_direct_dot_product() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut model = fit(&schema(4, 0.9), &[(fm(&[1.0, 0.0, 0.0, 0.0]), 1.0)], 1e-3).unwrap();
        for _ in 0..20 {
            model.theta = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let direct: f64 = (0..4).map(|i| model.theta[i] * v[i]).sum();
            let got = model.reward(&StateVector { values: v }).unwrap();
            assert!((got - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn average_reward_cases() {
        let mut model = fit(&schema(1, 0.9), &[(fm(&[1.0]), 1.0)], 1e-3).unwrap();
        model.theta = vec![1.0];
        let vecs = |vals: &[f64]| {
            vals.iter().map(|&v| StateVector { values: vec![v] }).collect::<Vec<_>>()
        };
        assert_eq!(model.average_reward(&vecs(&[7.0])).unwrap(), 7.0);
        assert_eq!(model.average_reward(&vecs(&[3.0, 3.0, 3.0])).unwrap(), 3.0);
        assert_eq!(model.average_reward(&vecs(&[1.0, 2.0, 3.0])).unwrap(), 2.0);
        assert!(model.average_reward(&[]).is_err());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let model = fit(&schema(2, 0.9), &[(fm(&[1.0, 0.0]), 1.0)], 1e-3).unwrap();
        assert!(model.reward(&StateVector { values: vec![1.0] }).is_err());
        assert!(fit(&schema(2, 0.9), &[(fm(&[1.0]), 1.0)], 1e-3).is_err());
    }

    #[test]
    fn non_finite_inputs_rejected() {
        assert!(fit(&schema(1, 0.9), &[(fm(&[f64::NAN]), 1.0)], 1e-3).is_err());
        assert!(fit(&schema(1, 0.9), &[(fm(&[1.0]), f64::INFINITY)], 1e-3).is_err());
    }

    #[test]
    fn model_text_round_trips_exactly() {
        let pairs = vec![
            (fm(&[1.0, 0.3]), 2.0 / 3.0),
            (fm(&[0.1, -1.7]), std::f64::consts::PI),
            (fm(&[0.9, 0.2]), -0.125),
        ];
        let model = fit(&schema(2, 0.9), &pairs, 1e-6).unwrap();
        let text = model.to_text();
        let reparsed = parse_model(&text).unwrap();
        assert_eq!(model, reparsed);
        assert_eq!(reparsed.to_text(), text);
    }

    #[test]
    fn parse_model_rejects_garbage() {
        assert!(parse_model("not a model").is_err());
        assert!(parse_model("format: reward-model-v1\n").is_err());
    }
}
