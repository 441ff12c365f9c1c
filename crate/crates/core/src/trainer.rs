//! The optimization recipe: Adam with a two-stage learning-rate schedule,
//! per-clip mini-batches, dropout during training, clip-aggregated
//! evaluation, and the hyper-parameter sweep harness.

use crate::data::{load_clips, ClipProtocol, DatasetManifest, FeatureLevel};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::head::{softmax_prediction, FusionWeights, PredictionVector, Provenance};
use crate::model::{build_model, pack_batch, train_masks, ModelDims, ModelParams, PoolMode};
use crate::rng::{derive_seed, rng_for};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub level: FeatureLevel,
    pub layers: usize,
    pub hidden: usize,
    pub pool: PoolMode,
    pub epochs: usize,
    pub batch: usize,
    pub lr1: f64,
    pub lr2: f64,
    pub lr_drop_epoch: usize,
    pub dropout: f64,
    pub seed: u64,
    pub fusion: FusionWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            level: FeatureLevel::High,
            layers: 3,
            hidden: 1024,
            pool: PoolMode::Mean,
            epochs: 12,
            batch: 28,
            lr1: 1e-5,
            lr2: 1e-6,
            lr_drop_epoch: 8,
            dropout: 0.5,
            seed: 0,
            fusion: FusionWeights::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.epochs == 0 || self.batch == 0 {
            return Err(Error::invalid(format!("counts must be positive: {self:?}")));
        }
        if self.lr2 > self.lr1 {
            return Err(Error::invalid(format!(
                "lr2 ({}) must not exceed lr1 ({})",
                self.lr2, self.lr1
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        self.fusion.validate()
    }
}

/// Initial rate through `lr_drop_epoch` (inclusive), then the reduced rate.
/// Epochs are 1-based.
pub fn lr_schedule(cfg: &TrainConfig, epoch: usize) -> f64 {
    if epoch <= cfg.lr_drop_epoch {
        cfg.lr1
    } else {
        cfg.lr2
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &[(String, &Tensor<T>)]) -> Self {
        AdamState {
            step: 0,
            m: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
            v: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
        }
    }
}

/// One bias-corrected Adam update over all parameters in canonical order.
/// A non-finite gradient aborts with the offending parameter's name.
pub fn adam_step<T: Scalar>(
    params: &mut [(String, &mut Tensor<T>)],
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "adam_step: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((name, p), g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                lhs: p.shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
        if !g.all_finite() {
            return Err(Error::invalid(format!(
                "non-finite gradient for parameter {name}; training aborted"
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = T::from_f64(ADAM_BETA1);
    let b2 = T::from_f64(ADAM_BETA2);
    let eps = T::from_f64(ADAM_EPS);
    let lr_t = T::from_f64(lr);
    let c1 = T::one() - T::from_f64(ADAM_BETA1.powi(t));
    let c2 = T::one() - T::from_f64(ADAM_BETA2.powi(t));
    for (pi, ((_, p), g)) in params.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[pi];
        let v = &mut state.v[pi];
        for i in 0..g.numel() {
            let gi = g.data()[i];
            let mi = b1 * m.data()[i] + (T::one() - b1) * gi;
            let vi = b2 * v.data()[i] + (T::one() - b2) * gi * gi;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / c1;
            let v_hat = vi / c2;
            p.data_mut()[i] = p.data()[i] - lr_t * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut out = String::from("epoch,split,loss,accuracy,lr\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.epoch, r.split, r.loss, r.accuracy, r.lr
        ));
    }
    out
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub history: Vec<HistoryRow>,
    pub params: ModelParams<f32>,
    pub adam: AdamState<f32>,
    pub config: TrainConfig,
}

/// Train a per-level model on every clip of the manifest. Deterministic per
/// seed: batch order, initialization, and dropout masks all derive from it.
pub fn train(cfg: &TrainConfig, manifest: &DatasetManifest) -> Result<TrainOutcome> {
    cfg.validate()?;
    let proto = ClipProtocol::default();
    let clips = load_clips(manifest, cfg.level, &proto)?;
    if clips.is_empty() {
        return Err(Error::invalid("manifest yields no clips"));
    }
    let dims = ModelDims {
        input: cfg.level.dim(),
        hidden: cfg.hidden,
        layers: cfg.layers,
        classes: manifest.num_classes(),
    };
    if dims.classes < 2 {
        return Err(Error::invalid("training needs at least 2 classes"));
    }
    // surface dimension problems before epoch 1
    if let Some(bad) = clips.iter().find(|c| c.features.shape()[1] != dims.input) {
        return Err(Error::invalid(format!(
            "clip of video {} has dim {}, model expects {}",
            manifest.entries[bad.video_index].video_id,
            bad.features.shape()[1],
            dims.input
        )));
    }

    let mut params: ModelParams<f32> = ModelParams::init(dims, cfg.seed)?;
    let mut adam = AdamState::new(&params.named());
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let lr = lr_schedule(cfg, epoch);
        let mut order: Vec<usize> = (0..clips.len()).collect();
        order.shuffle(&mut rng_for(cfg.seed, 0x6570_0000 + epoch as u64));

        let mut epoch_loss = 0.0f64;
        let mut correct = 0usize;
        for (bi, batch) in order.chunks(cfg.batch).enumerate() {
            let tensors: Vec<&Tensor<f32>> = batch.iter().map(|&i| &clips[i].features).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| clips[i].label).collect();
            let x = pack_batch(&tensors)?;
            let masks = if cfg.dropout > 0.0 {
                Some(train_masks::<f32>(
                    &dims,
                    x.shape()[0],
                    batch.len(),
                    cfg.dropout,
                    derive_seed(derive_seed(cfg.seed, 0x6d61_0000 + epoch as u64), bi as u64),
                ))
            } else {
                None
            };
            let mut g = Graph::new();
            let built = build_model(&mut g, &params, &x, cfg.pool, masks.as_deref())?;
            let loss = g.xent_mean(built.pooled, &labels)?;
            epoch_loss += g.value(loss).item() as f64 * batch.len() as f64;

            let pooled = g.value(built.pooled);
            for (ci, &label) in labels.iter().enumerate() {
                let row = &pooled.data()[ci * dims.classes..(ci + 1) * dims.classes];
                let pred = row
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                if pred == label {
                    correct += 1;
                }
            }

            let grads = g.backward(loss)?;
            let grad_tensors: Vec<Tensor<f32>> = built
                .param_ids
                .iter()
                .map(|&id| grads.get(id).cloned().expect("parameter leaf has gradient"))
                .collect();
            adam_step(&mut params.named_mut(), &grad_tensors, &mut adam, lr)?;
        }
        history.push(HistoryRow {
            epoch,
            split: "train".to_string(),
            loss: epoch_loss / clips.len() as f64,
            accuracy: correct as f64 / clips.len() as f64,
            lr,
        });
    }
    Ok(TrainOutcome {
        history,
        params,
        adam,
        config: cfg.clone(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoPrediction {
    pub video_id: String,
    pub label: usize,
    pub prediction: PredictionVector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassStat {
    pub class: String,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub per_class: Vec<ClassStat>,
    /// `confusion[true_label][predicted]`
    pub confusion: Vec<Vec<usize>>,
    pub videos: Vec<VideoPrediction>,
}

/// Evaluate a trained model: clip predictions are aggregated per video by
/// averaging softmax scores before any scoring.
pub fn evaluate(
    params: &ModelParams<f32>,
    cfg: &TrainConfig,
    manifest: &DatasetManifest,
) -> Result<EvalResult> {
    if params.dims.classes != manifest.num_classes() {
        return Err(Error::invalid(format!(
            "checkpoint has {} classes, manifest has {}",
            params.dims.classes,
            manifest.num_classes()
        )));
    }
    let proto = ClipProtocol::default();
    let clips = load_clips(manifest, cfg.level, &proto)?;
    let classes = params.dims.classes;
    let provenance = match cfg.pool {
        PoolMode::Mean => Provenance::MeanPooled,
        PoolMode::Max => Provenance::MaxPooled,
    };

    let mut per_video: Vec<Vec<PredictionVector>> = vec![Vec::new(); manifest.entries.len()];
    for batch in clips.chunks(cfg.batch.max(1)) {
        let tensors: Vec<&Tensor<f32>> = batch.iter().map(|c| &c.features).collect();
        let x = pack_batch(&tensors)?;
        let mut g = Graph::new();
        let built = build_model(&mut g, params, &x, cfg.pool, None)?;
        let pooled = g.value(built.pooled);
        for (ci, clip) in batch.iter().enumerate() {
            let logits: Vec<f64> = pooled.data()[ci * classes..(ci + 1) * classes]
                .iter()
                .map(|&v| v as f64)
                .collect();
            per_video[clip.video_index].push(softmax_prediction(&logits, provenance));
        }
    }

    let mut videos = Vec::with_capacity(manifest.entries.len());
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (vi, entry) in manifest.entries.iter().enumerate() {
        let agg = crate::head::aggregate_clips(&per_video[vi])?;
        confusion[entry.label][agg.argmax()] += 1;
        videos.push(VideoPrediction {
            video_id: entry.video_id.clone(),
            label: entry.label,
            prediction: agg,
        });
    }
    Ok(summarize(videos, confusion, &manifest.class_names))
}

/// Score a set of per-video predictions (shared by `evaluate` and fusion).
pub fn summarize(
    videos: Vec<VideoPrediction>,
    confusion: Vec<Vec<usize>>,
    class_names: &[String],
) -> EvalResult {
    let mut per_class: Vec<ClassStat> = class_names
        .iter()
        .map(|n| ClassStat {
            class: n.clone(),
            correct: 0,
            total: 0,
            accuracy: 0.0,
        })
        .collect();
    let mut correct = 0usize;
    for v in &videos {
        per_class[v.label].total += 1;
        if v.prediction.argmax() == v.label {
            per_class[v.label].correct += 1;
            correct += 1;
        }
    }
    for c in &mut per_class {
        c.accuracy = if c.total > 0 {
            c.correct as f64 / c.total as f64
        } else {
            0.0
        };
    }
    EvalResult {
        accuracy: correct as f64 / videos.len().max(1) as f64,
        per_class,
        confusion,
        videos,
    }
}

pub const SWEEP_HIDDEN: [usize; 3] = [256, 512, 1024];
pub const SWEEP_LAYERS: [usize; 3] = [3, 4, 5];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub hidden: usize,
    pub layers: usize,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("hidden,layers,accuracy\n");
    for r in rows {
        match r.accuracy {
            Some(a) => out.push_str(&format!("{},{},{}\n", r.hidden, r.layers, a)),
            None => out.push_str(&format!("{},{},NA\n", r.hidden, r.layers)),
        }
    }
    out
}

/// Train and evaluate every grid point. Individual failures are recorded in
/// their row and the sweep continues.
pub fn sweep(
    base: &TrainConfig,
    train_manifest: &DatasetManifest,
    eval_manifest: &DatasetManifest,
    hidden_grid: &[usize],
    layers_grid: &[usize],
) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(hidden_grid.len() * layers_grid.len());
    for &hidden in hidden_grid {
        for &layers in layers_grid {
            let cfg = TrainConfig {
                hidden,
                layers,
                ..base.clone()
            };
            let outcome = train(&cfg, train_manifest)
                .and_then(|o| evaluate(&o.params, &cfg, eval_manifest));
            match outcome {
                Ok(res) => rows.push(SweepRow {
                    hidden,
                    layers,
                    accuracy: Some(res.accuracy),
                    error: None,
                }),
                Err(e) => rows.push(SweepRow {
                    hidden,
                    layers,
                    accuracy: None,
                    error: Some(e.to_string()),
                }),
            }
        }
    }
    rows
}
