//! Temporal-pooling softmax heads, cross-entropy, late fusion, and
//! clip-to-video score aggregation.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

pub const SIMPLEX_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    MeanPooled,
    MaxPooled,
    Fused,
    VideoLevel,
}

/// A probability distribution over action classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionVector {
    pub probs: Vec<f64>,
    /// Pre-softmax pooled logits, when the prediction came straight from a
    /// classifier head. Fused and aggregated predictions have none.
    pub logits: Option<Vec<f64>>,
    pub provenance: Provenance,
}

impl PredictionVector {
    pub fn validate(&self) -> Result<()> {
        if self.probs.len() < 2 {
            return Err(Error::invalid("prediction needs at least 2 classes"));
        }
        if self.probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(Error::invalid("prediction has negative or non-finite entries"));
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!(
                "prediction mass sums to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn argmax(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierParams<T> {
    /// `[hidden, classes]`, shared across timesteps.
    pub w: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Scalar> ClassifierParams<T> {
    pub fn new(w: Tensor<T>, bias: Option<Tensor<T>>) -> Result<Self> {
        if w.ndim() != 2 || w.shape()[1] < 2 {
            return Err(Error::invalid(format!(
                "classifier weight must be [hidden, classes>=2], got {:?}",
                w.shape()
            )));
        }
        if let Some(b) = &bias {
            if b.shape() != [w.shape()[1]] {
                return Err(Error::ShapeMismatch {
                    op: "classifier_bias",
                    lhs: vec![w.shape()[1]],
                    rhs: b.shape().to_vec(),
                });
            }
        }
        Ok(ClassifierParams { w, bias })
    }

    pub fn hidden_size(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn num_classes(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn init(hidden: usize, classes: usize, seed: u64) -> Result<Self> {
        ClassifierParams::new(
            crate::init::orthogonal_init(hidden, classes, seed)?,
            Some(Tensor::zeros(&[classes])),
        )
    }
}

fn per_step_logits<T: Scalar>(r: &Tensor<T>, p: &ClassifierParams<T>) -> Result<Tensor<T>> {
    if r.ndim() != 2 || r.shape()[1] != p.hidden_size() {
        return Err(Error::ShapeMismatch {
            op: "classifier_logits",
            lhs: r.shape().to_vec(),
            rhs: p.w.shape().to_vec(),
        });
    }
    let logits = r.matmul(&p.w)?;
    match &p.bias {
        Some(b) => logits.add_vec(b),
        None => Ok(logits),
    }
}

pub fn softmax_prediction(logits: &[f64], provenance: Provenance) -> PredictionVector {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    PredictionVector {
        probs: exps.iter().map(|&e| e / z).collect(),
        logits: Some(logits.to_vec()),
        provenance,
    }
}

/// Softmax of the time-averaged logits. `r` is `[T, hidden]`.
pub fn predict_mean<T: Scalar>(r: &Tensor<T>, p: &ClassifierParams<T>) -> Result<PredictionVector> {
    let logits = per_step_logits(r, p)?.mean_axis(0)?;
    let logits: Vec<f64> = logits.data().iter().map(|&v| Scalar::to_f64(v)).collect();
    Ok(softmax_prediction(&logits, Provenance::MeanPooled))
}

/// Softmax of the per-class maximum-over-time logits. `r` is `[T, hidden]`.
pub fn predict_max<T: Scalar>(r: &Tensor<T>, p: &ClassifierParams<T>) -> Result<PredictionVector> {
    let (logits, _) = per_step_logits(r, p)?.max_axis(0)?;
    let logits: Vec<f64> = logits.data().iter().map(|&v| Scalar::to_f64(v)).collect();
    Ok(softmax_prediction(&logits, Provenance::MaxPooled))
}

/// `-log p_label`. Uses the log-sum-exp form when the prediction retains its
/// logits, so a confident wrong head cannot underflow to `-inf`.
pub fn cross_entropy(pred: &PredictionVector, label: usize) -> Result<f64> {
    pred.validate()?;
    if label >= pred.num_classes() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            pred.num_classes()
        )));
    }
    match &pred.logits {
        Some(logits) => {
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + logits.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
            Ok(lse - logits[label])
        }
        None => Ok(-pred.probs[label].ln()),
    }
}

/// Stream weights for late fusion: `a` high, `b` mid, `c` low.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        FusionWeights {
            a: 0.7,
            b: 0.2,
            c: 0.1,
        }
    }
}

impl FusionWeights {
    pub fn validate(&self) -> Result<()> {
        if self.a < 0.0 || self.b < 0.0 || self.c < 0.0 {
            return Err(Error::invalid("fusion weights must be nonnegative"));
        }
        let sum = self.a + self.b + self.c;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "fusion weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Weighted average of the three per-level distributions.
pub fn fuse_levels(
    p_high: &PredictionVector,
    p_mid: &PredictionVector,
    p_low: &PredictionVector,
    w: &FusionWeights,
) -> Result<PredictionVector> {
    w.validate()?;
    for p in [p_high, p_mid, p_low] {
        p.validate()?;
    }
    let c = p_high.num_classes();
    if p_mid.num_classes() != c || p_low.num_classes() != c {
        return Err(Error::invalid(format!(
            "fuse_levels class counts differ: {c}/{}/{}",
            p_mid.num_classes(),
            p_low.num_classes()
        )));
    }
    let probs = (0..c)
        .map(|j| w.a * p_high.probs[j] + w.b * p_mid.probs[j] + w.c * p_low.probs[j])
        .collect();
    Ok(PredictionVector {
        probs,
        logits: None,
        provenance: Provenance::Fused,
    })
}

/// Arithmetic mean of clip-level distributions for one video.
pub fn aggregate_clips(preds: &[PredictionVector]) -> Result<PredictionVector> {
    let first = preds
        .first()
        .ok_or_else(|| Error::invalid("aggregate_clips on empty prediction list"))?;
    let c = first.num_classes();
    let mut probs = vec![0.0f64; c];
    for p in preds {
        p.validate()?;
        if p.num_classes() != c {
            return Err(Error::invalid(format!(
                "aggregate_clips class counts differ: {c} vs {}",
                p.num_classes()
            )));
        }
        for (acc, &v) in probs.iter_mut().zip(&p.probs) {
            *acc += v;
        }
    }
    let inv = 1.0 / preds.len() as f64;
    for v in &mut probs {
        *v *= inv;
    }
    Ok(PredictionVector {
        probs,
        logits: None,
        provenance: Provenance::VideoLevel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_head(c: usize) -> ClassifierParams<f64> {
        // hidden == classes, W = I, no bias: logits equal the inputs
        let mut w = Tensor::zeros(&[c, c]);
        for i in 0..c {
            w.data_mut()[i * c + i] = 1.0;
        }
        ClassifierParams::new(w, None).unwrap()
    }

    #[test]
    fn mean_t1_is_plain_softmax() {
        let p = identity_head(2);
        let r = Tensor::from_vec(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let pred = predict_mean(&r, &p).unwrap();
        let e = 1.0f64.exp();
        assert!((pred.probs[0] - e / (e + 1.0)).abs() < 1e-12);
        pred.validate().unwrap();
    }

    #[test]
    fn mean_of_opposed_logits_is_uniform() {
        // logits [1,0] and [0,1] -> mean [0.5,0.5] -> softmax [0.5,0.5]
        let p = identity_head(2);
        let r = Tensor::from_vec(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let pred = predict_mean(&r, &p).unwrap();
        assert!((pred.probs[0] - 0.5).abs() < 1e-12);
        assert!((pred.probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn max_pools_per_class_over_time() {
        // logits [[2,0],[0,1]] -> max [2,1] -> softmax([2,1])
        let p = identity_head(2);
        let r = Tensor::from_vec(vec![2, 2], vec![2.0, 0.0, 0.0, 1.0]).unwrap();
        let pred = predict_max(&r, &p).unwrap();
        let (e2, e1) = (2.0f64.exp(), 1.0f64.exp());
        assert!((pred.probs[0] - e2 / (e2 + e1)).abs() < 1e-12);
    }

    #[test]
    fn constant_logits_make_max_equal_mean() {
        let p = identity_head(3);
        let row = vec![0.4, -0.3, 0.8];
        let mut data = row.clone();
        data.extend_from_slice(&row);
        data.extend_from_slice(&row);
        let r = Tensor::from_vec(vec![3, 3], data).unwrap();
        let a = predict_mean(&r, &p).unwrap();
        let b = predict_max(&r, &p).unwrap();
        for j in 0..3 {
            assert!((a.probs[j] - b.probs[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_cross_entropy_is_ln_4() {
        let pred = PredictionVector {
            probs: vec![0.25; 4],
            logits: Some(vec![0.0; 4]),
            provenance: Provenance::MeanPooled,
        };
        for label in 0..4 {
            let l = cross_entropy(&pred, label).unwrap();
            assert!((l - 4.0f64.ln()).abs() < 1e-12);
            assert!((l - 1.386294).abs() < 1e-6);
        }
    }

    #[test]
    fn certain_prediction_has_zero_loss() {
        let pred = PredictionVector {
            probs: vec![1.0, 0.0],
            logits: None,
            provenance: Provenance::Fused,
        };
        assert_eq!(cross_entropy(&pred, 0).unwrap(), 0.0);
        assert!(cross_entropy(&pred, 5).is_err());
    }

    #[test]
    fn logit_shift_invariance() {
        let base = vec![0.3, -1.2, 2.0];
        let a = softmax_prediction(&base, Provenance::MeanPooled);
        let shifted: Vec<f64> = base.iter().map(|v| v + 17.0).collect();
        let b = softmax_prediction(&shifted, Provenance::MeanPooled);
        for j in 0..3 {
            assert!((a.probs[j] - b.probs[j]).abs() < 1e-6);
        }
        let la = cross_entropy(&a, 1).unwrap();
        let lb = cross_entropy(&b, 1).unwrap();
        assert!((la - lb).abs() < 1e-6);
    }

    #[test]
    fn fusion_fixed_point_and_example() {
        let p = PredictionVector {
            probs: vec![0.3, 0.7],
            logits: None,
            provenance: Provenance::VideoLevel,
        };
        let same = fuse_levels(&p, &p, &p, &FusionWeights::default()).unwrap();
        assert!((same.probs[0] - 0.3).abs() < 1e-12);

        let ph = PredictionVector {
            probs: vec![1.0, 0.0],
            logits: None,
            provenance: Provenance::VideoLevel,
        };
        let pm = PredictionVector {
            probs: vec![0.0, 1.0],
            logits: None,
            provenance: Provenance::VideoLevel,
        };
        let pl = PredictionVector {
            probs: vec![0.5, 0.5],
            logits: None,
            provenance: Provenance::VideoLevel,
        };
        let fused = fuse_levels(&ph, &pm, &pl, &FusionWeights::default()).unwrap();
        assert!((fused.probs[0] - 0.75).abs() < 1e-12);
        assert!((fused.probs[1] - 0.25).abs() < 1e-12);
        fused.validate().unwrap();

        let only_high = FusionWeights { a: 1.0, b: 0.0, c: 0.0 };
        let f = fuse_levels(&ph, &pm, &pl, &only_high).unwrap();
        assert_eq!(f.probs, ph.probs);
    }

    #[test]
    fn clip_aggregation_examples() {
        let a = PredictionVector {
            probs: vec![0.6, 0.4],
            logits: None,
            provenance: Provenance::MeanPooled,
        };
        let b = PredictionVector {
            probs: vec![0.8, 0.2],
            logits: None,
            provenance: Provenance::MeanPooled,
        };
        let v = aggregate_clips(&[a.clone(), b]).unwrap();
        assert!((v.probs[0] - 0.7).abs() < 1e-12);
        assert!((v.probs[1] - 0.3).abs() < 1e-12);

        let single = aggregate_clips(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single.probs, a.probs);
        let copies = aggregate_clips(&[a.clone(), a.clone(), a.clone()]).unwrap();
        for j in 0..2 {
            assert!((copies.probs[j] - a.probs[j]).abs() < 1e-12);
        }
        assert!(aggregate_clips(&[]).is_err());
    }

    #[test]
    fn max_logit_dominates_mean_logit_per_class() {
        let p = identity_head(3);
        let r = Tensor::from_vec(
            vec![4, 3],
            vec![0.1, -0.2, 0.7, 0.9, 0.0, -0.5, -0.3, 0.4, 0.2, 0.0, 0.1, 0.6],
        )
        .unwrap();
        let mean = predict_mean(&r, &p).unwrap().logits.unwrap();
        let max = predict_max(&r, &p).unwrap().logits.unwrap();
        for j in 0..3 {
            assert!(max[j] >= mean[j]);
        }
    }
}
