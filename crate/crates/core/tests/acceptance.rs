//! Acceptance suite: one test per release criterion. Each test states its
//! contract in the doc comment and derives its expectations independently of
//! the implementation (closed forms, frozen integers, or naive reference
//! loops).

use mrrn_core::bench::{throughput_bench, CellKind};
use mrrn_core::complexity::{parse_arch, space_complexity, time_complexity, ConvArchDescription, ConvLayerSpec};
use mrrn_core::data::{
    read_features, split_clips, split_manifest, synth_dataset, write_features, ClipProtocol,
    FeatureLevel, FeatureSequence, SynthSpec,
};
use mrrn_core::gradcheck::gradient_check;
use mrrn_core::head::{fuse_levels, FusionWeights};
use mrrn_core::lstm::{build_lstm_forward, LstmParams};
use mrrn_core::model::{build_model_from_leaves, ModelDims, ModelParams, PoolMode};
use mrrn_core::rng::{rng_for, standard_normal};
use mrrn_core::sru::{sru_cell_step, sru_layer_forward, SruLayerParams};
use mrrn_core::tensor::Tensor;
use mrrn_core::trainer::{evaluate, lr_schedule, train, TrainConfig, VideoPrediction};
use rand::Rng;
use std::collections::BTreeMap;
use std::time::Instant;

fn random_input(t: usize, b: usize, dim: usize, seed: u64) -> Tensor<f64> {
    let mut rng = rng_for(seed, 0x6163_6301);
    let data = (0..t * b * dim)
        .map(|_| standard_normal(&mut rng) * 0.5)
        .collect();
    Tensor::from_vec(vec![t, b, dim], data).unwrap()
}

/// Criterion: finite differences (central, eps 1e-3, f64) confirm every
/// parameter gradient of the SRU cell, stacked SRU with skip connections,
/// both pooling heads, the cross-entropy head, and the LSTM baseline, at
/// relative tolerance 1e-4; randomized dims stay <= 8, sequence length
/// <= 6; the whole battery finishes inside 60 seconds. (Dropout-mask
/// gradients are covered separately in `gradients.rs` at a smaller step,
/// where the masks' 2x rescaling does not inflate finite-difference
/// truncation error.)
#[test]
fn a1_gradient_correctness() {
    const EPS: f64 = 1e-3;
    const TOL: f64 = 1e-4;
    let start = Instant::now();

    let mut rng = rng_for(41, 0x6131_0000);
    for case in 0..8u64 {
        let dims = ModelDims {
            input: rng.gen_range(2..=8),
            hidden: rng.gen_range(2..=8),
            layers: rng.gen_range(1..=3),
            classes: rng.gen_range(2..=5),
        };
        let pool = if case % 2 == 0 { PoolMode::Mean } else { PoolMode::Max };
        let (t_len, batch) = (rng.gen_range(2..=6), rng.gen_range(1..=3));
        let params: ModelParams<f64> = ModelParams::init(dims, 100 + case).unwrap();
        let named: Vec<(String, Tensor<f64>)> = params
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        let x = random_input(t_len, batch, dims.input, 200 + case);
        let labels: Vec<usize> = (0..batch).map(|i| i % dims.classes).collect();
        let report = gradient_check(
            |g, ids| {
                let pooled = build_model_from_leaves(g, &dims, ids, &x, pool, None)?;
                g.xent_mean(pooled, &labels)
            },
            &named,
            EPS,
            TOL,
        )
        .unwrap();
        for e in &report.entries {
            assert!(
                e.pass,
                "case {case} {dims:?} {pool:?}: param {} rel err {:.3e}",
                e.name, e.max_rel_err
            );
        }
    }

    // LSTM baseline through a fixed readout so every hidden unit matters
    let p = LstmParams::<f64>::init(4, 5, 51).unwrap();
    let named: Vec<(String, Tensor<f64>)> =
        p.named().into_iter().map(|(n, t)| (n, t.clone())).collect();
    let x = random_input(4, 2, 4, 52);
    let w_read =
        Tensor::from_vec(vec![5, 3], random_input(1, 5, 3, 53).data().to_vec()).unwrap();
    let labels = vec![0usize, 2];
    let report = gradient_check(
        |g, ids| {
            let hs = build_lstm_forward(g, ids, &x)?;
            let pooled = g.mean_axis(hs, 0)?;
            let w = g.constant(w_read.clone());
            let logits = g.matmul(pooled, w)?;
            g.xent_mean(logits, &labels)
        },
        &named,
        EPS,
        TOL,
    )
    .unwrap();
    for e in &report.entries {
        assert!(e.pass, "lstm param {} rel err {:.3e}", e.name, e.max_rel_err);
    }

    assert!(
        start.elapsed().as_secs() < 60,
        "battery took {:?}",
        start.elapsed()
    );
}

/// Criterion: the two-phase layer forward (batched projections, then an
/// elementwise scan) matches a naive per-step loop within 1e-6 max abs
/// error over 100 randomized configurations, including the production
/// shape T=30, batch=28, hidden=1024.
#[test]
fn a2_scan_equivalence() {
    fn naive_forward(x: &Tensor<f32>, p: &SruLayerParams<f32>) -> Tensor<f32> {
        let (t_len, b, i) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let h = p.hidden_size();
        let mut c = Tensor::zeros(&[b, h]);
        let mut out = Vec::with_capacity(t_len * b * h);
        for t in 0..t_len {
            let x_t = Tensor::from_vec(
                vec![b, i],
                x.data()[t * b * i..(t + 1) * b * i].to_vec(),
            )
            .unwrap();
            let (h_t, c_t) = sru_cell_step(&x_t, &c, p).unwrap();
            c = c_t;
            out.extend_from_slice(h_t.data());
        }
        Tensor::from_vec(vec![t_len, b, h], out).unwrap()
    }

    let mut rng = rng_for(42, 0x6132_0000);
    for case in 0..100u64 {
        // case 0 is the production shape; the rest sample small configs,
        // half of them square (no highway projection)
        let (input, hidden, t_len, batch) = if case == 0 {
            (1024, 1024, 30, 28)
        } else {
            let hidden = rng.gen_range(1..=8);
            let input = if rng.gen_bool(0.5) { hidden } else { rng.gen_range(1..=8) };
            (input, hidden, rng.gen_range(1..=6), rng.gen_range(1..=4))
        };
        let p: SruLayerParams<f32> = SruLayerParams::init(input, hidden, 400 + case).unwrap();
        let x = {
            let mut r = rng_for(500 + case, 0x6132_0001);
            let data = (0..t_len * batch * input)
                .map(|_| standard_normal(&mut r) as f32 * 0.5)
                .collect();
            Tensor::from_vec(vec![t_len, batch, input], data).unwrap()
        };
        let fast = sru_layer_forward(&x, &p).unwrap();
        let slow = naive_forward(&x, &p);
        let max_abs = fast
            .data()
            .iter()
            .zip(slow.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0f32, f32::max);
        assert!(
            max_abs <= 1e-6,
            "case {case} ({input}x{hidden}, T={t_len}, B={batch}): max abs diff {max_abs:e}"
        );
    }
}

/// Criterion: the complexity calculus reproduces the worked single-layer
/// examples exactly, and the bundled ResNet-34 description matches an
/// independent per-block hand summation (frozen before implementation).
#[test]
fn a3_complexity_exactness() {
    let single = |m, k, c_in, c_out| ConvArchDescription {
        name: "x".into(),
        convs: vec![ConvLayerSpec { m, k, c_in, c_out, repeat: 1 }],
        rnns: Vec::new(),
    };
    let a = single(28, 3, 3, 8);
    assert_eq!(time_complexity(&a).unwrap(), 169_344);
    assert_eq!(space_complexity(&a).unwrap(), 216);
    let b = single(112, 7, 3, 64);
    assert_eq!(time_complexity(&b).unwrap(), 118_013_952);
    assert_eq!(space_complexity(&b).unwrap(), 9_408);

    let arch = parse_arch("resnet34", include_str!("../../../configs/resnet34.arch")).unwrap();
    // per-block oracle: stem 9_408; stage1 221_184; stage2 1_114_112;
    // stage3 6_815_744; stage4 13_107_200; fc 512_000
    assert_eq!(space_complexity(&arch).unwrap(), 21_779_648);
    assert_eq!(time_complexity(&arch).unwrap(), 3_663_761_408);
}

/// Criterion: split_clips agrees with the closed-form clip count for every
/// video length in [1, 400]; feature files round-trip bitwise; the learning
/// rate schedule holds 1e-5 through epoch 8 and 1e-6 afterwards.
#[test]
fn a4_protocol_exactness() {
    let proto = ClipProtocol::default();
    assert_eq!((proto.clip_len, proto.stride, proto.max_clips), (30, 8, 20));
    for n in 1..=400usize {
        let clips = split_clips(n, &proto).unwrap();
        let expect = if n < proto.clip_len {
            1
        } else {
            ((n - proto.clip_len) / proto.stride + 1).min(proto.max_clips)
        };
        assert_eq!(clips.len(), expect, "num_frames {n}");
        for (ci, idx) in clips.iter().enumerate() {
            assert_eq!(idx.len(), proto.clip_len, "num_frames {n} clip {ci}");
            assert!(idx.iter().all(|&f| f < n), "num_frames {n} clip {ci}");
        }
    }

    // bitwise round-trip, including awkward f32 values
    let dim = FeatureLevel::Low.dim();
    let mut data = vec![0f32; 3 * dim];
    let specials = [
        0.0f32,
        -0.0,
        f32::MIN_POSITIVE,
        1e-45,          // subnormal
        f32::MAX,
        -f32::MAX,
        core::f32::consts::PI,
        -1.5e-20,
    ];
    let mut rng = rng_for(44, 0x6134_0000);
    for (i, v) in data.iter_mut().enumerate() {
        *v = if i < specials.len() {
            specials[i]
        } else {
            standard_normal(&mut rng) as f32
        };
    }
    let seq = FeatureSequence::new(
        FeatureLevel::Low,
        Tensor::from_vec(vec![3, dim], data).unwrap(),
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roundtrip.feat");
    write_features(&path, &seq).unwrap();
    let back = read_features(&path).unwrap();
    assert_eq!(back.level, seq.level);
    assert_eq!(back.frames.shape(), seq.frames.shape());
    for (a, b) in seq.frames.data().iter().zip(back.frames.data()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    let cfg = TrainConfig::default();
    for epoch in 1..=12 {
        let want = if epoch <= 8 { 1e-5 } else { 1e-6 };
        assert_eq!(lr_schedule(&cfg, epoch), want, "epoch {epoch}");
    }
}

/// Criterion: on the seeded synthetic 5-class dataset (400 clips per class
/// train, 100 per class held out, split by whole videos, T=30, dim=512),
/// the default configuration (3 layers, 1024 hidden, mean pooling) reaches
/// at least 95% train and 80% test accuracy within 12 epochs, in under
/// 10 minutes of single-machine CPU time.
#[test]
fn a5_desk_scale_learning() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let all = synth_dataset(&SynthSpec::new(5, 500, 30, 1), dir.path()).unwrap();
    let (train_m, test_m) = split_manifest(&all, &ClipProtocol::default(), 400).unwrap();
    let cfg = TrainConfig::default();
    assert_eq!(cfg.level.dim(), 512);
    assert_eq!((cfg.layers, cfg.hidden, cfg.epochs), (3, 1024, 12));
    let out = train(&cfg, &train_m).unwrap();
    let train_eval = evaluate(&out.params, &cfg, &train_m).unwrap();
    let test_eval = evaluate(&out.params, &cfg, &test_m).unwrap();
    let elapsed = start.elapsed();
    assert!(
        train_eval.accuracy >= 0.95,
        "train accuracy {:.4}",
        train_eval.accuracy
    );
    assert!(
        test_eval.accuracy >= 0.80,
        "test accuracy {:.4}",
        test_eval.accuracy
    );
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}");
}

/// Criterion: three per-level models trained on the low/mid/high feature
/// sets fuse at 0.7/0.2/0.1 into a valid probability distribution for every
/// video, and the fused accuracy is reported alongside the per-level
/// accuracies. No ordering between fused and per-level accuracy is
/// asserted: the margin depends on the data.
#[test]
fn a6_fusion_benefit_harness() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_dataset(&SynthSpec::new(3, 26, 30, 6), dir.path()).unwrap();
    let levels = [FeatureLevel::High, FeatureLevel::Mid, FeatureLevel::Low];
    let mut evals = Vec::new();
    for level in levels {
        let cfg = TrainConfig {
            level,
            layers: 2,
            hidden: 32,
            epochs: 2,
            lr1: 1e-3,
            lr2: 1e-4,
            seed: 6,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &manifest).unwrap();
        evals.push(evaluate(&out.params, &cfg, &manifest).unwrap());
    }
    let weights = FusionWeights::default();
    assert_eq!((weights.a, weights.b, weights.c), (0.7, 0.2, 0.1));

    let by_id = |e: &mrrn_core::trainer::EvalResult| -> BTreeMap<String, VideoPrediction> {
        e.videos
            .iter()
            .map(|v| (v.video_id.clone(), v.clone()))
            .collect()
    };
    let (mid, low) = (by_id(&evals[1]), by_id(&evals[2]));
    let mut correct = 0usize;
    for vh in &evals[0].videos {
        let fused = fuse_levels(
            &vh.prediction,
            &mid[&vh.video_id].prediction,
            &low[&vh.video_id].prediction,
            &weights,
        )
        .unwrap();
        fused.validate().unwrap(); // simplex: non-negative, sums to one
        if fused.argmax() == vh.label {
            correct += 1;
        }
    }
    let fused_acc = correct as f64 / evals[0].videos.len() as f64;
    println!(
        "accuracies: high {:.4} mid {:.4} low {:.4} fused {:.4}",
        evals[0].accuracy, evals[1].accuracy, evals[2].accuracy, fused_acc
    );
    assert!((0.0..=1.0).contains(&fused_acc));
}

/// Criterion: at T=30, batch=28, hidden=1024, the SRU forward's median wall
/// time over 20 timed repeats (after warm-up) does not exceed the LSTM
/// baseline's.
#[test]
fn a7_throughput_direction() {
    let sru = throughput_bench(CellKind::Sru, 30, 28, 1024, 20, 3).unwrap();
    let lstm = throughput_bench(CellKind::Lstm, 30, 28, 1024, 20, 3).unwrap();
    println!(
        "median ms: sru {:.3} lstm {:.3}",
        sru.median_ms, lstm.median_ms
    );
    assert!(
        sru.median_ms <= lstm.median_ms,
        "sru {:.3} ms > lstm {:.3} ms",
        sru.median_ms,
        lstm.median_ms
    );
}

/// Criterion: accuracies published for real video-action benchmarks are
/// explicitly NOT targets of this suite. Reaching them needs the original
/// datasets and a pretrained convolutional backbone, both out of scope
/// here; the sweep and fusion harnesses reproduce the shape of those
/// experiments on synthetic features only. This test pins the harness
/// defaults that define that shape — no accuracy beyond the synthetic
/// criteria above is asserted anywhere in the workspace.
#[test]
fn a8_external_benchmarks_are_not_targets() {
    use mrrn_core::trainer::{SWEEP_HIDDEN, SWEEP_LAYERS};
    assert_eq!(SWEEP_HIDDEN, [256, 512, 1024]);
    assert_eq!(SWEEP_LAYERS, [3, 4, 5]);
    let w = FusionWeights::default();
    assert_eq!((w.a, w.b, w.c), (0.7, 0.2, 0.1));
    let cfg = TrainConfig::default();
    assert_eq!((cfg.epochs, cfg.batch, cfg.dropout), (12, 28, 0.5));
    assert_eq!((cfg.lr1, cfg.lr2, cfg.lr_drop_epoch), (1e-5, 1e-6, 8));
    let dims: Vec<usize> = [FeatureLevel::Low, FeatureLevel::Mid, FeatureLevel::High]
        .iter()
        .map(|l| l.dim())
        .collect();
    assert_eq!(dims, [128, 256, 512]);
}
