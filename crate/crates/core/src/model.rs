//! The full classification model (stacked SRU + pooled softmax head) built on
//! the autograd graph. The value-level code in `sru`/`head` computes the same
//! functions without a tape; tests hold the two routes together.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::head::ClassifierParams;
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::sru::{dropout_mask, SruLayerParams};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    Mean,
    Max,
}

impl std::str::FromStr for PoolMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PoolMode::Mean),
            "max" => Ok(PoolMode::Max),
            other => Err(Error::invalid(format!("unknown pool mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
    pub classes: usize,
}

/// All learnable tensors of one per-level model.
#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    pub dims: ModelDims,
    pub layers: Vec<SruLayerParams<T>>,
    pub classifier: ClassifierParams<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn init(dims: ModelDims, seed: u64) -> Result<Self> {
        let mut layers = Vec::with_capacity(dims.layers);
        for li in 0..dims.layers {
            let input = if li == 0 { dims.input } else { dims.hidden };
            layers.push(SruLayerParams::init(
                input,
                dims.hidden,
                derive_seed(seed, 100 + li as u64),
            )?);
        }
        let classifier = ClassifierParams::init(dims.hidden, dims.classes, derive_seed(seed, 999))?;
        Ok(ModelParams {
            dims,
            layers,
            classifier,
        })
    }

    /// Parameters in canonical order with their names. The same order is used
    /// for graph leaves, optimizer state, and checkpoints.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (li, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{li}.w"), &l.w));
            out.push((format!("layer{li}.w_f"), &l.w_f));
            out.push((format!("layer{li}.w_r"), &l.w_r));
            out.push((format!("layer{li}.b_f"), &l.b_f));
            out.push((format!("layer{li}.b_r"), &l.b_r));
            if let Some(p) = &l.w_h {
                out.push((format!("layer{li}.w_h"), p));
            }
        }
        out.push(("classifier.w".to_string(), &self.classifier.w));
        if let Some(b) = &self.classifier.bias {
            out.push(("classifier.b".to_string(), b));
        }
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (li, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{li}.w"), &mut l.w));
            out.push((format!("layer{li}.w_f"), &mut l.w_f));
            out.push((format!("layer{li}.w_r"), &mut l.w_r));
            out.push((format!("layer{li}.b_f"), &mut l.b_f));
            out.push((format!("layer{li}.b_r"), &mut l.b_r));
            if let Some(p) = &mut l.w_h {
                out.push((format!("layer{li}.w_h"), p));
            }
        }
        out.push(("classifier.w".to_string(), &mut self.classifier.w));
        if let Some(b) = &mut self.classifier.bias {
            out.push(("classifier.b".to_string(), b));
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            dims: self.dims,
            layers: self
                .layers
                .iter()
                .map(|l| SruLayerParams {
                    w: l.w.cast(),
                    w_f: l.w_f.cast(),
                    w_r: l.w_r.cast(),
                    b_f: l.b_f.cast(),
                    b_r: l.b_r.cast(),
                    w_h: l.w_h.as_ref().map(|p| p.cast()),
                })
                .collect(),
            classifier: ClassifierParams {
                w: self.classifier.w.cast(),
                bias: self.classifier.bias.as_ref().map(|b| b.cast()),
            },
        }
    }

    /// Rebuild from named tensors in canonical order (checkpoint load).
    pub fn from_named(dims: ModelDims, tensors: &[(String, Tensor<T>)]) -> Result<Self> {
        let mut it = tensors.iter();
        let mut next = |want: &str| -> Result<Tensor<T>> {
            match it.next() {
                Some((name, t)) if name == want => Ok(t.clone()),
                Some((name, _)) => Err(Error::invalid(format!(
                    "checkpoint parameter order: expected {want}, found {name}"
                ))),
                None => Err(Error::invalid(format!("checkpoint missing parameter {want}"))),
            }
        };
        let mut layers = Vec::with_capacity(dims.layers);
        for li in 0..dims.layers {
            let input = if li == 0 { dims.input } else { dims.hidden };
            let w = next(&format!("layer{li}.w"))?;
            let w_f = next(&format!("layer{li}.w_f"))?;
            let w_r = next(&format!("layer{li}.w_r"))?;
            let b_f = next(&format!("layer{li}.b_f"))?;
            let b_r = next(&format!("layer{li}.b_r"))?;
            let w_h = if input != dims.hidden {
                Some(next(&format!("layer{li}.w_h"))?)
            } else {
                None
            };
            layers.push(SruLayerParams::new(w, w_f, w_r, b_f, b_r, w_h)?);
        }
        let w = next("classifier.w")?;
        let bias = next("classifier.b")?;
        if it.next().is_some() {
            return Err(Error::invalid("checkpoint has extra parameters"));
        }
        Ok(ModelParams {
            dims,
            layers,
            classifier: ClassifierParams::new(w, Some(bias))?,
        })
    }
}

/// Dropout masks for the inter-layer gaps (first `layers - 1` entries, seeded
/// like the value-level [`crate::sru::stack_forward`]) plus one final mask
/// applied to the tanh output ahead of the classifier.
pub fn train_masks<T: Scalar>(
    dims: &ModelDims,
    t_len: usize,
    batch: usize,
    dropout: f64,
    seed: u64,
) -> Vec<Tensor<T>> {
    (0..dims.layers)
        .map(|li| {
            dropout_mask(
                &[t_len, batch, dims.hidden],
                dropout,
                derive_seed(seed, li as u64),
            )
        })
        .collect()
}

pub struct BuiltModel {
    /// Leaves in canonical parameter order.
    pub param_ids: Vec<NodeId>,
    /// Pooled logits `[B, classes]`.
    pub pooled: NodeId,
}

/// Build the forward graph. `x` is `[T, B, input]`; `masks`, when given, holds
/// one `[T, B, hidden]` dropout mask per inter-layer gap plus a final
/// pre-classifier mask (see [`train_masks`]).
pub fn build_model<T: Scalar>(
    g: &mut Graph<T>,
    params: &ModelParams<T>,
    x: &Tensor<T>,
    pool: PoolMode,
    masks: Option<&[Tensor<T>]>,
) -> Result<BuiltModel> {
    let leaf_tensors: Vec<Tensor<T>> = params.named().iter().map(|(_, t)| (*t).clone()).collect();
    let mut ids = Vec::with_capacity(leaf_tensors.len());
    for t in leaf_tensors {
        ids.push(g.leaf(t, true));
    }
    let pooled = build_model_from_leaves(g, &params.dims, &ids, x, pool, masks)?;
    Ok(BuiltModel {
        param_ids: ids,
        pooled,
    })
}

/// Same as [`build_model`] but over caller-created parameter leaves, in
/// canonical order. This is the entry point the gradient checker drives.
pub fn build_model_from_leaves<T: Scalar>(
    g: &mut Graph<T>,
    dims: &ModelDims,
    ids: &[NodeId],
    x: &Tensor<T>,
    pool: PoolMode,
    masks: Option<&[Tensor<T>]>,
) -> Result<NodeId> {
    if x.ndim() != 3 || x.shape()[2] != dims.input {
        return Err(Error::invalid(format!(
            "model input must be [T, B, {}], got {:?}",
            dims.input,
            x.shape()
        )));
    }
    if let Some(masks) = masks {
        if masks.len() != dims.layers {
            return Err(Error::invalid(format!(
                "expected {} dropout masks, got {}",
                dims.layers,
                masks.len()
            )));
        }
    }
    let mut it = ids.iter().copied();
    let mut take = || {
        it.next()
            .ok_or_else(|| Error::invalid("too few parameter leaves for model dims"))
    };

    let mut cur = g.leaf(x.clone(), false);
    for li in 0..dims.layers {
        let input = if li == 0 { dims.input } else { dims.hidden };
        let w = take()?;
        let w_f = take()?;
        let w_r = take()?;
        let b_f = take()?;
        let b_r = take()?;
        let w_h = if input != dims.hidden { Some(take()?) } else { None };

        let x_tilde = g.matmul(cur, w)?;
        let f_lin = g.matmul(cur, w_f)?;
        let f_lin = g.add_vec(f_lin, b_f)?;
        let f = g.sigmoid(f_lin)?;
        let r_lin = g.matmul(cur, w_r)?;
        let r_lin = g.add_vec(r_lin, b_r)?;
        let r = g.sigmoid(r_lin)?;
        let hw = match w_h {
            Some(p) => g.matmul(cur, p)?,
            None => cur,
        };

        let mut out = g.sru_scan(f, r, x_tilde, hw)?;
        if li > 0 && input == dims.hidden {
            out = g.add(out, cur)?;
        }
        if li + 1 < dims.layers {
            if let Some(masks) = masks {
                let m = g.constant(masks[li].clone());
                out = g.mul(out, m)?;
            }
        }
        cur = out;
    }

    let mut r_top = g.tanh(cur)?;
    if let Some(masks) = masks {
        let m = g.constant(masks[dims.layers - 1].clone());
        r_top = g.mul(r_top, m)?;
    }
    let w_c = take()?;
    let b_c = take()?;
    if take().is_ok() {
        return Err(Error::invalid("too many parameter leaves for model dims"));
    }
    let logits = g.matmul(r_top, w_c)?;
    let logits = g.add_vec(logits, b_c)?;
    let pooled = match pool {
        PoolMode::Mean => g.mean_axis(logits, 0)?,
        PoolMode::Max => g.max_axis(logits, 0)?,
    };
    Ok(pooled)
}

/// Pack one batch of equally-long clips into the `[T, B, dim]` layout.
pub fn pack_batch<T: Scalar>(clips: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = clips
        .first()
        .ok_or_else(|| Error::invalid("empty batch"))?;
    let (t_len, dim) = (first.shape()[0], first.shape()[1]);
    let b = clips.len();
    let mut data = vec![T::zero(); t_len * b * dim];
    for (ci, clip) in clips.iter().enumerate() {
        if clip.shape() != [t_len, dim] {
            return Err(Error::ShapeMismatch {
                op: "pack_batch",
                lhs: vec![t_len, dim],
                rhs: clip.shape().to_vec(),
            });
        }
        for t in 0..t_len {
            let dst = (t * b + ci) * dim;
            data[dst..dst + dim].copy_from_slice(&clip.data()[t * dim..(t + 1) * dim]);
        }
    }
    Tensor::from_vec(vec![t_len, b, dim], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sru::{stack_forward, StackConfig};

    fn tiny_dims() -> ModelDims {
        ModelDims {
            input: 3,
            hidden: 5,
            layers: 2,
            classes: 4,
        }
    }

    #[test]
    fn graph_forward_matches_value_level_stack() {
        let dims = tiny_dims();
        let params: ModelParams<f64> = ModelParams::init(dims, 17).unwrap();
        let x = Tensor::from_vec(
            vec![4, 2, 3],
            (0..24).map(|v| (v as f64 * 0.13).sin()).collect(),
        )
        .unwrap();

        let mut g = Graph::new();
        let built = build_model(&mut g, &params, &x, PoolMode::Mean, None).unwrap();
        let pooled = g.value(built.pooled).clone();

        // independent route: value-level stack + head on each sequence
        let cfg = StackConfig {
            layers: dims.layers,
            hidden: dims.hidden,
            input: dims.input,
            dropout: 0.0,
        };
        for b in 0..2 {
            let mut seq = Vec::with_capacity(4 * 3);
            for t in 0..4 {
                seq.extend_from_slice(&x.data()[(t * 2 + b) * 3..(t * 2 + b) * 3 + 3]);
            }
            let xb = Tensor::from_vec(vec![4, 1, 3], seq).unwrap();
            let r = stack_forward(&xb, &cfg, &params.layers, false, 0).unwrap();
            let r2 = Tensor::from_vec(vec![4, dims.hidden], r.data().to_vec()).unwrap();
            let pred = crate::head::predict_mean(&r2, &params.classifier).unwrap();
            let logits = pred.logits.unwrap();
            for c in 0..dims.classes {
                let got = pooled.data()[b * dims.classes + c];
                assert!(
                    (got - logits[c]).abs() < 1e-9,
                    "batch {b} class {c}: {got} vs {}",
                    logits[c]
                );
            }
        }
    }

    #[test]
    fn pack_batch_is_time_major() {
        let a = Tensor::from_vec(vec![2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(vec![2, 2], vec![5.0f32, 6.0, 7.0, 8.0]).unwrap();
        let packed = pack_batch(&[&a, &b]).unwrap();
        assert_eq!(packed.shape(), &[2, 2, 2]);
        assert_eq!(packed.data(), &[1.0, 2.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0]);
    }

    #[test]
    fn round_trip_named_tensors() {
        let dims = tiny_dims();
        let params: ModelParams<f32> = ModelParams::init(dims, 3).unwrap();
        let named: Vec<(String, Tensor<f32>)> = params
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        let back = ModelParams::from_named(dims, &named).unwrap();
        assert_eq!(back.named().len(), params.named().len());
        for ((n1, t1), (n2, t2)) in params.named().iter().zip(back.named().iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1, t2);
        }
    }
}
