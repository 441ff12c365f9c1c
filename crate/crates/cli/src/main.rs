//! `mrrn`: command-line front end over the engine crate. Every flag can also
//! come from a sectioned `key = value` config file; precedence is
//! flag > file > `MRRN_SEED` (for seeds) > built-in default.

use clap::{Args, Parser, Subcommand};
use mrrn_core::bench::{bench_csv_header, bench_csv_row, throughput_bench, CellKind};
use mrrn_core::checkpoint::Checkpoint;
use mrrn_core::complexity::{parse_arch, report};
use mrrn_core::data::{synth_dataset, DatasetManifest, FeatureLevel, SynthSpec, SYNTH_NOISE};
use mrrn_core::error::Error as CoreError;
use mrrn_core::gradcheck::gradient_check;
use mrrn_core::head::{fuse_levels, FusionWeights};
use mrrn_core::model::{build_model_from_leaves, ModelDims, ModelParams, PoolMode};
use mrrn_core::trainer::{
    evaluate, history_csv, summarize, sweep, sweep_csv, train, EvalResult, TrainConfig,
    VideoPrediction, SWEEP_HIDDEN, SWEEP_LAYERS,
};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

mod overlay;
use overlay::Overlay;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    msg: String,
}

type CliResult<T = ()> = Result<T, Failure>;

fn validation(msg: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_VALIDATION,
        msg: msg.into(),
    }
}

/// Map engine errors onto the exit-code contract: bad inputs are validation
/// failures, everything environmental or numeric is a runtime failure.
fn core_err(e: CoreError) -> Failure {
    let code = match &e {
        CoreError::InvalidArgument(_) | CoreError::ShapeMismatch { .. } => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    };
    Failure {
        code,
        msg: e.to_string(),
    }
}

#[derive(Parser)]
#[command(
    name = "mrrn",
    about = "Multi-level recurrent residual network engine",
    version
)]
struct Cli {
    /// Sectioned `key = value` config file supplying flag defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-level feature dataset
    Synth(SynthArgs),
    /// Train a per-level model and write history + checkpoint
    Train(TrainArgs),
    /// Evaluate a checkpoint on a manifest
    Eval(EvalArgs),
    /// Fuse three per-level evaluation outputs
    Fuse(FuseArgs),
    /// Train/evaluate the hidden-size x depth grid
    Sweep(SweepArgs),
    /// Analytic time/space complexity of architecture descriptions
    Complexity(ComplexityArgs),
    /// Recurrent-cell forward throughput microbenchmark
    Bench(BenchArgs),
    /// Finite-difference verification of the backward pass
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of classes [default: 5]
    #[arg(long)]
    classes: Option<usize>,
    /// Clips per class [default: 400]
    #[arg(long)]
    clips: Option<usize>,
    /// Frames per clip [default: 30]
    #[arg(long)]
    clip_len: Option<usize>,
    /// Feature noise standard deviation [default: 0.3]
    #[arg(long)]
    noise: Option<f64>,
    /// Generator seed [default: 0, or MRRN_SEED]
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: dataset]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TrainFlags {
    /// Feature level: low, mid, or high [default: high]
    #[arg(long)]
    level: Option<FeatureLevel>,
    /// Stacked recurrent layers [default: 3]
    #[arg(long)]
    layers: Option<usize>,
    /// Hidden units per layer [default: 1024]
    #[arg(long)]
    hidden: Option<usize>,
    /// Temporal pooling: mean or max [default: mean]
    #[arg(long)]
    pool: Option<PoolMode>,
    /// Training epochs [default: 12]
    #[arg(long)]
    epochs: Option<usize>,
    /// Clips per mini-batch [default: 28]
    #[arg(long)]
    batch: Option<usize>,
    /// Learning rate through the drop epoch [default: 1e-5]
    #[arg(long)]
    lr1: Option<f64>,
    /// Learning rate after the drop epoch [default: 1e-6]
    #[arg(long)]
    lr2: Option<f64>,
    /// Last epoch at the initial rate [default: 8]
    #[arg(long)]
    lr_drop_epoch: Option<usize>,
    /// Dropout probability [default: 0.5]
    #[arg(long)]
    dropout: Option<f64>,
    /// Training seed [default: 0, or MRRN_SEED]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset manifest (manifest.jsonl)
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
    /// Output directory [default: run]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained checkpoint file
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dataset manifest to score
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory [default: eval]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    /// eval.json produced from the high-level model
    #[arg(long)]
    high: Option<PathBuf>,
    /// eval.json produced from the mid-level model
    #[arg(long)]
    mid: Option<PathBuf>,
    /// eval.json produced from the low-level model
    #[arg(long)]
    low: Option<PathBuf>,
    /// Fusion weights as high,mid,low [default: 0.7,0.2,0.1]
    #[arg(long)]
    weights: Option<String>,
    /// Output directory [default: fuse]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Training manifest
    #[arg(long)]
    train_manifest: Option<PathBuf>,
    /// Evaluation manifest
    #[arg(long)]
    eval_manifest: Option<PathBuf>,
    /// Comma-separated hidden sizes [default: 256,512,1024]
    #[arg(long)]
    hidden_grid: Option<String>,
    /// Comma-separated layer counts [default: 3,4,5]
    #[arg(long)]
    layers_grid: Option<String>,
    #[command(flatten)]
    flags: TrainFlags,
    /// Output directory [default: sweep]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Architecture description files (repeatable)
    #[arg(long)]
    arch: Vec<PathBuf>,
    /// Optional output directory for complexity.csv
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Cell to time: sru, lstm, or both [default: both]
    #[arg(long)]
    cell: Option<String>,
    /// Sequence length [default: 30]
    #[arg(long)]
    t: Option<usize>,
    /// Batch size [default: 28]
    #[arg(long)]
    batch: Option<usize>,
    /// Hidden units [default: 1024]
    #[arg(long)]
    hidden: Option<usize>,
    /// Timed repeats [default: 20]
    #[arg(long)]
    repeats: Option<usize>,
    /// Unrecorded warm-up runs [default: 3]
    #[arg(long)]
    warmup: Option<usize>,
    /// Optional output directory for bench.csv
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Seed for the randomized model dims [default: 0, or MRRN_SEED]
    #[arg(long)]
    seed: Option<u64>,
    /// Central-difference step [default: 1e-3]
    #[arg(long)]
    eps: Option<f64>,
    /// Relative-error tolerance [default: 1e-4]
    #[arg(long)]
    tol: Option<f64>,
    /// Randomized configurations to check [default: 5]
    #[arg(long)]
    cases: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_VALIDATION,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let overlay = match Overlay::load(cli.config.as_deref()) {
        Ok(o) => o,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            return ExitCode::from(f.code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => run_synth(a, &overlay),
        Command::Train(a) => run_train(a, &overlay),
        Command::Eval(a) => run_eval(a, &overlay),
        Command::Fuse(a) => run_fuse(a, &overlay),
        Command::Sweep(a) => run_sweep(a, &overlay),
        Command::Complexity(a) => run_complexity(a, &overlay),
        Command::Bench(a) => run_bench(a, &overlay),
        Command::Gradcheck(a) => run_gradcheck(a, &overlay),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

/// Write through a temp file in the same directory, then rename into place.
fn write_atomic(path: &Path, contents: &[u8]) -> CliResult {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    let io = |e: std::io::Error| Failure {
        code: EXIT_RUNTIME,
        msg: format!("{}: {e}", path.display()),
    };
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

fn ensure_dir(path: &Path) -> CliResult {
    std::fs::create_dir_all(path).map_err(|e| Failure {
        code: EXIT_RUNTIME,
        msg: format!("{}: {e}", path.display()),
    })
}

fn load_manifest(path: &Path) -> CliResult<DatasetManifest> {
    DatasetManifest::load(path).map_err(core_err)
}

fn run_synth(a: SynthArgs, ov: &Overlay) -> CliResult {
    let sec = ov.section("synth");
    let spec = SynthSpec {
        num_classes: sec.get("classes", a.classes, 5)?,
        clips_per_class: sec.get("clips", a.clips, 400)?,
        clip_len: sec.get("clip_len", a.clip_len, 30)?,
        noise: sec.get("noise", a.noise, SYNTH_NOISE)?,
        seed: sec.seed(a.seed)?,
    };
    let out = sec.path("out", a.out, "dataset");
    ensure_dir(&out)?;
    let manifest = synth_dataset(&spec, &out).map_err(core_err)?;
    println!(
        "wrote {} videos ({} classes) under {}",
        manifest.entries.len(),
        manifest.num_classes(),
        out.display()
    );
    Ok(())
}

fn resolve_train_config(flags: &TrainFlags, sec: &overlay::Section) -> CliResult<TrainConfig> {
    let d = TrainConfig::default();
    Ok(TrainConfig {
        level: sec.get_parse("level", flags.level, d.level)?,
        layers: sec.get("layers", flags.layers, d.layers)?,
        hidden: sec.get("hidden", flags.hidden, d.hidden)?,
        pool: sec.get_parse("pool", flags.pool, d.pool)?,
        epochs: sec.get("epochs", flags.epochs, d.epochs)?,
        batch: sec.get("batch", flags.batch, d.batch)?,
        lr1: sec.get("lr1", flags.lr1, d.lr1)?,
        lr2: sec.get("lr2", flags.lr2, d.lr2)?,
        lr_drop_epoch: sec.get("lr_drop_epoch", flags.lr_drop_epoch, d.lr_drop_epoch)?,
        dropout: sec.get("dropout", flags.dropout, d.dropout)?,
        seed: sec.seed(flags.seed)?,
        fusion: FusionWeights::default(),
    })
}

fn run_train(a: TrainArgs, ov: &Overlay) -> CliResult {
    let sec = ov.section("train");
    let cfg = resolve_train_config(&a.flags, &sec)?;
    let manifest_path = sec.required_path("manifest", a.manifest)?;
    let out = sec.path("out", a.out, "run");
    let manifest = load_manifest(&manifest_path)?;
    ensure_dir(&out)?;
    let outcome = train(&cfg, &manifest).map_err(core_err)?;
    write_atomic(
        &out.join("history.csv"),
        history_csv(&outcome.history).as_bytes(),
    )?;
    let ckpt = Checkpoint {
        config: outcome.config.clone(),
        params: outcome.params,
        adam: outcome.adam,
        epoch: cfg.epochs,
    };
    ckpt.save(&out.join("model.ckpt")).map_err(core_err)?;
    let last = outcome.history.last().expect("at least one epoch");
    println!(
        "trained {} epochs; final train loss {:.4}, accuracy {:.4}; wrote {}",
        cfg.epochs,
        last.loss,
        last.accuracy,
        out.display()
    );
    Ok(())
}

fn eval_csv_outputs(res: &EvalResult) -> (String, String) {
    let mut per_class = String::from("class,correct,total,accuracy\n");
    for c in &res.per_class {
        per_class.push_str(&format!(
            "{},{},{},{}\n",
            c.class, c.correct, c.total, c.accuracy
        ));
    }
    let mut confusion = String::from("true\\predicted");
    for c in &res.per_class {
        confusion.push(',');
        confusion.push_str(&c.class);
    }
    confusion.push('\n');
    for (row, c) in res.confusion.iter().zip(&res.per_class) {
        confusion.push_str(&c.class);
        for n in row {
            confusion.push_str(&format!(",{n}"));
        }
        confusion.push('\n');
    }
    (per_class, confusion)
}

fn write_eval_outputs(res: &EvalResult, out: &Path) -> CliResult {
    ensure_dir(out)?;
    let json = serde_json::to_string_pretty(res).map_err(|e| Failure {
        code: EXIT_RUNTIME,
        msg: e.to_string(),
    })?;
    write_atomic(&out.join("eval.json"), json.as_bytes())?;
    let (per_class, confusion) = eval_csv_outputs(res);
    write_atomic(&out.join("per_class.csv"), per_class.as_bytes())?;
    write_atomic(&out.join("confusion.csv"), confusion.as_bytes())?;
    Ok(())
}

fn run_eval(a: EvalArgs, ov: &Overlay) -> CliResult {
    let sec = ov.section("eval");
    let ckpt_path = sec.required_path("checkpoint", a.checkpoint)?;
    let manifest_path = sec.required_path("manifest", a.manifest)?;
    let out = sec.path("out", a.out, "eval");
    let ckpt = Checkpoint::load(&ckpt_path).map_err(core_err)?;
    let manifest = load_manifest(&manifest_path)?;
    let res = evaluate(&ckpt.params, &ckpt.config, &manifest).map_err(core_err)?;
    write_eval_outputs(&res, &out)?;
    println!(
        "accuracy {:.4} over {} videos; wrote {}",
        res.accuracy,
        res.videos.len(),
        out.display()
    );
    Ok(())
}

fn load_eval(path: &Path) -> CliResult<EvalResult> {
    let bytes = std::fs::read(path).map_err(|e| Failure {
        code: EXIT_RUNTIME,
        msg: format!("{}: {e}", path.display()),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| validation(format!("{}: {e}", path.display())))
}

fn parse_weights(s: &str) -> CliResult<FusionWeights> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(validation(format!(
            "--weights expects three comma-separated values, got {s:?}"
        )));
    }
    let mut v = [0.0f64; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p
            .trim()
            .parse()
            .map_err(|e| validation(format!("--weights: {p:?}: {e}")))?;
    }
    let w = FusionWeights {
        a: v[0],
        b: v[1],
        c: v[2],
    };
    w.validate().map_err(core_err)?;
    Ok(w)
}

fn run_fuse(a: FuseArgs, ov: &Overlay) -> CliResult {
    let sec = ov.section("fuse");
    let weights = parse_weights(&sec.get_string("weights", a.weights, "0.7,0.2,0.1"))?;
    let high = load_eval(&sec.required_path("high", a.high)?)?;
    let mid = load_eval(&sec.required_path("mid", a.mid)?)?;
    let low = load_eval(&sec.required_path("low", a.low)?)?;
    let out = sec.path("out", a.out, "fuse");

    let classes: Vec<String> = high.per_class.iter().map(|c| c.class.clone()).collect();
    let index: BTreeMap<&str, &VideoPrediction> = mid
        .videos
        .iter()
        .map(|v| (v.video_id.as_str(), v))
        .collect();
    let index_low: BTreeMap<&str, &VideoPrediction> = low
        .videos
        .iter()
        .map(|v| (v.video_id.as_str(), v))
        .collect();

    let mut videos = Vec::with_capacity(high.videos.len());
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    for vh in &high.videos {
        let vm = index.get(vh.video_id.as_str()).ok_or_else(|| {
            validation(format!("video {} missing from mid eval", vh.video_id))
        })?;
        let vl = index_low.get(vh.video_id.as_str()).ok_or_else(|| {
            validation(format!("video {} missing from low eval", vh.video_id))
        })?;
        let fused = fuse_levels(&vh.prediction, &vm.prediction, &vl.prediction, &weights)
            .map_err(core_err)?;
        confusion[vh.label][fused.argmax()] += 1;
        videos.push(VideoPrediction {
            video_id: vh.video_id.clone(),
            label: vh.label,
            prediction: fused,
        });
    }
    let res = summarize(videos, confusion, &classes);
    write_eval_outputs(&res, &out)?;
    println!(
        "per-level accuracies high {:.4} mid {:.4} low {:.4}; fused {:.4}; wrote {}",
        high.accuracy,
        mid.accuracy,
        low.accuracy,
        res.accuracy,
        out.display()
    );
    Ok(())
}

fn parse_grid(s: &str, flag: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<usize>()
                .map_err(|e| validation(format!("{flag}: {p:?}: {e}")))
        })
        .collect()
}

fn run_sweep(a: SweepArgs, ov: &Overlay) -> CliResult {
    let sec = ov.section("sweep");
    let base = resolve_train_config(&a.flags, &sec)?;
    let train_path = sec.required_path("train_manifest", a.train_manifest)?;
    let eval_path = sec.required_path("eval_manifest", a.eval_manifest)?;
    let hidden = parse_grid(
        &sec.get_string(
            "hidden_grid",
            a.hidden_grid,
            &SWEEP_HIDDEN.map(|v| v.to_string()).join(","),
        ),
        "--hidden-grid",
    )?;
    let layers = parse_grid(
        &sec.get_string(
            "layers_grid",
            a.layers_grid,
            &SWEEP_LAYERS.map(|v| v.to_string()).join(","),
        ),
        "--layers-grid",
    )?;
    let out = sec.path("out", a.out, "sweep");
    let train_m = load_manifest(&train_path)?;
    let eval_m = load_manifest(&eval_path)?;
    ensure_dir(&out)?;
    let rows = sweep(&base, &train_m, &eval_m, &hidden, &layers);
    write_atomic(&out.join("sweep.csv"), sweep_csv(&rows).as_bytes())?;
    for r in &rows {
        match (&r.accuracy, &r.error) {
            (Some(acc), _) => println!("hidden {} layers {}: accuracy {acc:.4}", r.hidden, r.layers),
            (None, Some(e)) => println!("hidden {} layers {}: failed: {e}", r.hidden, r.layers),
            (None, None) => {}
        }
    }
    println!("wrote {}", out.join("sweep.csv").display());
    Ok(())
}

fn run_complexity(a: ComplexityArgs, ov: &Overlay) -> CliResult {
    let sec = ov.section("complexity");
    let mut paths = a.arch;
    if paths.is_empty() {
        if let Some(p) = sec.lookup("arch") {
            paths = p.split(',').map(|s| PathBuf::from(s.trim())).collect();
        }
    }
    if paths.is_empty() {
        return Err(validation("complexity needs at least one --arch file"));
    }
    let mut archs = Vec::with_capacity(paths.len());
    for p in &paths {
        let text = std::fs::read_to_string(p).map_err(|e| Failure {
            code: EXIT_RUNTIME,
            msg: format!("{}: {e}", p.display()),
        })?;
        let name = p
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("arch")
            .to_string();
        archs.push(parse_arch(&name, &text).map_err(core_err)?);
    }
    let csv = report(&archs).map_err(core_err)?;
    print!("{csv}");
    if let Some(out) = a.out.or_else(|| sec.lookup("out").map(PathBuf::from)) {
        ensure_dir(&out)?;
        write_atomic(&out.join("complexity.csv"), csv.as_bytes())?;
    }
    Ok(())
}

fn run_bench(a: BenchArgs, ov: &Overlay) -> CliResult {
    let sec = ov.section("bench");
    let cell = sec.get_string("cell", a.cell, "both");
    let t_len = sec.get("t", a.t, 30)?;
    let batch = sec.get("batch", a.batch, 28)?;
    let hidden = sec.get("hidden", a.hidden, 1024)?;
    let repeats = sec.get("repeats", a.repeats, 20)?;
    let warmup = sec.get("warmup", a.warmup, 3)?;
    let kinds: Vec<CellKind> = match cell.as_str() {
        "both" => vec![CellKind::Sru, CellKind::Lstm],
        other => vec![other.parse().map_err(core_err)?],
    };
    let mut csv = String::from(bench_csv_header());
    csv.push('\n');
    for kind in kinds {
        let r = throughput_bench(kind, t_len, batch, hidden, repeats, warmup).map_err(core_err)?;
        csv.push_str(&bench_csv_row(&r));
        csv.push('\n');
    }
    print!("{csv}");
    if let Some(out) = a.out.or_else(|| sec.lookup("out").map(PathBuf::from)) {
        ensure_dir(&out)?;
        write_atomic(&out.join("bench.csv"), csv.as_bytes())?;
    }
    Ok(())
}

fn run_gradcheck(a: GradcheckArgs, ov: &Overlay) -> CliResult {
    let sec = ov.section("gradcheck");
    let seed = sec.seed(a.seed)?;
    let eps = sec.get("eps", a.eps, 1e-3)?;
    let tol = sec.get("tol", a.tol, 1e-4)?;
    let cases = sec.get("cases", a.cases, 5)?;
    let mut failures = 0usize;
    for case in 0..cases {
        let mut rng = mrrn_core::rng::rng_for(seed, 0x6763_6800 + case as u64);
        use rand::Rng;
        let dims = ModelDims {
            input: rng.gen_range(2..=5),
            hidden: rng.gen_range(2..=6),
            layers: rng.gen_range(1..=3),
            classes: rng.gen_range(2..=4),
        };
        let pool = if rng.gen_bool(0.5) {
            PoolMode::Mean
        } else {
            PoolMode::Max
        };
        let (t_len, batch) = (rng.gen_range(2..=4), rng.gen_range(1..=3));
        let params: ModelParams<f64> =
            ModelParams::init(dims, seed ^ case as u64).map_err(core_err)?;
        let named: Vec<(String, mrrn_core::tensor::Tensor<f64>)> = params
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        let x = {
            let data = (0..t_len * batch * dims.input)
                .map(|_| mrrn_core::rng::standard_normal(&mut rng) * 0.5)
                .collect();
            mrrn_core::tensor::Tensor::from_vec(vec![t_len, batch, dims.input], data)
                .map_err(core_err)?
        };
        let labels: Vec<usize> = (0..batch).map(|i| i % dims.classes).collect();
        let report = gradient_check(
            |g, ids| {
                let pooled = build_model_from_leaves(g, &dims, ids, &x, pool, None)?;
                g.xent_mean(pooled, &labels)
            },
            &named,
            eps,
            tol,
        )
        .map_err(core_err)?;
        let status = if report.all_pass() { "pass" } else { "FAIL" };
        println!(
            "case {case}: dims {:?} pool {:?} -> {status} (worst rel err {:.3e})",
            dims,
            pool,
            report.worst()
        );
        if !report.all_pass() {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(Failure {
            code: EXIT_RUNTIME,
            msg: format!("{failures} of {cases} gradient checks failed"),
        });
    }
    Ok(())
}
