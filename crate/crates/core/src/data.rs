//! Clip extraction, frame preprocessing, feature-file I/O, and the synthetic
//! dataset generator that stands in for CNN features at desk scale.

use crate::error::{Error, Result};
use crate::rng::{rng_for, standard_normal};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

pub const FEATURE_MAGIC: &[u8; 4] = b"MRRN";
pub const FEATURE_VERSION: u16 = 1;

// ---------------------------------------------------------------------------
// clip protocol

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipProtocol {
    pub clip_len: usize,
    pub stride: usize,
    pub max_clips: usize,
}

impl Default for ClipProtocol {
    fn default() -> Self {
        ClipProtocol {
            clip_len: 30,
            stride: 8,
            max_clips: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipIndex {
    pub video_id: String,
    pub frames: Vec<usize>,
}

/// Frame-index lists for every clip of a `num_frames`-long video.
/// Videos shorter than one clip are looped from frame 0.
pub fn split_clips(num_frames: usize, proto: &ClipProtocol) -> Result<Vec<Vec<usize>>> {
    if num_frames == 0 {
        return Err(Error::invalid("split_clips on empty video"));
    }
    if proto.clip_len == 0 || proto.stride == 0 || proto.max_clips == 0 {
        return Err(Error::invalid(format!("degenerate clip protocol {proto:?}")));
    }
    if num_frames < proto.clip_len {
        return Ok(vec![(0..proto.clip_len).map(|i| i % num_frames).collect()]);
    }
    let mut clips = Vec::new();
    let mut start = 0;
    while start + proto.clip_len <= num_frames && clips.len() < proto.max_clips {
        clips.push((start..start + proto.clip_len).collect());
        start += proto.stride;
    }
    Ok(clips)
}

// ---------------------------------------------------------------------------
// frame preprocessing

/// Per-channel spatial mean of a `[C, H, W]` activation tensor.
pub fn spatial_average<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    if a.ndim() != 3 {
        return Err(Error::invalid(format!(
            "spatial_average expects [C, H, W], got {:?}",
            a.shape()
        )));
    }
    let (c, h, w) = (a.shape()[0], a.shape()[1], a.shape()[2]);
    let inv = T::one() / T::from_f64((h * w) as f64);
    let mut out = vec![T::zero(); c];
    for ci in 0..c {
        let plane = &a.data()[ci * h * w..(ci + 1) * h * w];
        out[ci] = plane.iter().cloned().sum::<T>() * inv;
    }
    Tensor::from_vec(vec![c], out)
}

pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// `channel = (channel - mean) / std`, per channel.
pub fn normalize_frame<T: Scalar>(frame: &Tensor<T>, mean: &[f64], std: &[f64]) -> Result<Tensor<T>> {
    if frame.ndim() != 3 {
        return Err(Error::invalid(format!(
            "normalize_frame expects [C, H, W], got {:?}",
            frame.shape()
        )));
    }
    let c = frame.shape()[0];
    if mean.len() != c || std.len() != c {
        return Err(Error::invalid(format!(
            "normalize_frame: {c} channels but {} means / {} stds",
            mean.len(),
            std.len()
        )));
    }
    if let Some(&bad) = std.iter().find(|&&s| s <= 0.0) {
        return Err(Error::invalid(format!("non-positive std {bad}")));
    }
    let plane = frame.shape()[1] * frame.shape()[2];
    let mut out = frame.clone();
    for ci in 0..c {
        let (m, s) = (T::from_f64(mean[ci]), T::from_f64(std[ci]));
        for v in &mut out.data_mut()[ci * plane..(ci + 1) * plane] {
            *v = (*v - m) / s;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CropMode {
    Train,
    Test,
}

pub const CROP_SIZE: usize = 224;

fn crop<T: Scalar>(frame: &Tensor<T>, top: usize, left: usize, size: usize) -> Tensor<T> {
    let (c, h, w) = (frame.shape()[0], frame.shape()[1], frame.shape()[2]);
    let _ = h;
    let mut out = Tensor::zeros(&[c, size, size]);
    for ci in 0..c {
        for r in 0..size {
            let src = ci * frame.shape()[1] * w + (top + r) * w + left;
            let dst = ci * size * size + r * size;
            out.data_mut()[dst..dst + size].copy_from_slice(&frame.data()[src..src + size]);
        }
    }
    out
}

/// Mirror a `[C, H, W]` frame horizontally.
pub fn hflip<T: Scalar>(frame: &Tensor<T>) -> Result<Tensor<T>> {
    if frame.ndim() != 3 {
        return Err(Error::invalid(format!(
            "hflip expects [C, H, W], got {:?}",
            frame.shape()
        )));
    }
    let (c, h, w) = (frame.shape()[0], frame.shape()[1], frame.shape()[2]);
    let mut out = frame.clone();
    for ci in 0..c {
        for r in 0..h {
            let row = ci * h * w + r * w;
            out.data_mut()[row..row + w].reverse();
        }
    }
    Ok(out)
}

/// 224x224 crop: random position plus 50% horizontal flip in train mode
/// (deterministic per seed), center crop without flip in test mode.
pub fn crop_flip<T: Scalar>(frame: &Tensor<T>, mode: CropMode, seed: u64) -> Result<Tensor<T>> {
    if frame.ndim() != 3 {
        return Err(Error::invalid(format!(
            "crop_flip expects [C, H, W], got {:?}",
            frame.shape()
        )));
    }
    let (h, w) = (frame.shape()[1], frame.shape()[2]);
    if h < CROP_SIZE || w < CROP_SIZE {
        return Err(Error::invalid(format!(
            "crop_flip needs spatial extents >= {CROP_SIZE}, got {h}x{w}"
        )));
    }
    match mode {
        CropMode::Test => Ok(crop(frame, (h - CROP_SIZE) / 2, (w - CROP_SIZE) / 2, CROP_SIZE)),
        CropMode::Train => {
            let mut rng = rng_for(seed, 0x63726f70); // "crop"
            let top = rng.gen_range(0..=h - CROP_SIZE);
            let left = rng.gen_range(0..=w - CROP_SIZE);
            let cropped = crop(frame, top, left, CROP_SIZE);
            if rng.gen::<bool>() {
                hflip(&cropped)
            } else {
                Ok(cropped)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// feature levels and files

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureLevel {
    Low,
    Mid,
    High,
}

impl FeatureLevel {
    pub const ALL: [FeatureLevel; 3] = [FeatureLevel::Low, FeatureLevel::Mid, FeatureLevel::High];

    pub fn dim(self) -> usize {
        match self {
            FeatureLevel::Low => 128,
            FeatureLevel::Mid => 256,
            FeatureLevel::High => 512,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            FeatureLevel::Low => 0,
            FeatureLevel::Mid => 1,
            FeatureLevel::High => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FeatureLevel::Low),
            1 => Some(FeatureLevel::Mid),
            2 => Some(FeatureLevel::High),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureLevel::Low => "low",
            FeatureLevel::Mid => "mid",
            FeatureLevel::High => "high",
        }
    }
}

impl std::str::FromStr for FeatureLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(FeatureLevel::Low),
            "mid" => Ok(FeatureLevel::Mid),
            "high" => Ok(FeatureLevel::High),
            other => Err(Error::invalid(format!("unknown level '{other}'"))),
        }
    }
}

/// One video's per-frame feature vectors at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub level: FeatureLevel,
    /// `[T, dim]`
    pub frames: Tensor<f32>,
}

impl FeatureSequence {
    pub fn new(level: FeatureLevel, frames: Tensor<f32>) -> Result<Self> {
        if frames.ndim() != 2 {
            return Err(Error::invalid(format!(
                "feature sequence must be [T, dim], got {:?}",
                frames.shape()
            )));
        }
        if frames.shape()[1] != level.dim() {
            return Err(Error::invalid(format!(
                "level {} expects dim {}, got {}",
                level.name(),
                level.dim(),
                frames.shape()[1]
            )));
        }
        Ok(FeatureSequence { level, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn write_features(path: &Path, seq: &FeatureSequence) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut w = BufWriter::new(std::fs::File::create(&tmp)?);
        w.write_all(FEATURE_MAGIC)?;
        w.write_u16::<LittleEndian>(FEATURE_VERSION)?;
        w.write_u8(seq.level.code())?;
        w.write_u8(0)?; // reserved
        w.write_u32::<LittleEndian>(seq.len() as u32)?;
        w.write_u32::<LittleEndian>(seq.frames.shape()[1] as u32)?;
        for &v in seq.frames.data() {
            w.write_f32::<LittleEndian>(v)?;
        }
        w.flush()?;
    }
    std::fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<FeatureSequence> {
    let file = std::fs::File::open(path)?;
    let total = file.metadata()?.len();
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Format {
        offset: 0,
        msg: format!("file too short for magic ({total} bytes)"),
    })?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {magic:?}, expected {FEATURE_MAGIC:?}"),
        });
    }
    let version = r.read_u16::<LittleEndian>().map_err(|_| Error::Format {
        offset: 4,
        msg: "truncated version field".into(),
    })?;
    if version != FEATURE_VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported version {version}, expected {FEATURE_VERSION}"),
        });
    }
    let level_code = r.read_u8()?;
    let level = FeatureLevel::from_code(level_code).ok_or(Error::Format {
        offset: 6,
        msg: format!("unknown level code {level_code}"),
    })?;
    let reserved = r.read_u8()?;
    if reserved != 0 {
        return Err(Error::Format {
            offset: 7,
            msg: format!("reserved byte must be 0, got {reserved}"),
        });
    }
    let t = r.read_u32::<LittleEndian>().map_err(|_| Error::Format {
        offset: 8,
        msg: "truncated frame count".into(),
    })? as usize;
    let dim = r.read_u32::<LittleEndian>().map_err(|_| Error::Format {
        offset: 12,
        msg: "truncated dim field".into(),
    })? as usize;
    if t == 0 || dim == 0 {
        return Err(Error::Format {
            offset: 8,
            msg: format!("degenerate extents T={t} dim={dim}"),
        });
    }
    let expected = 16 + (t * dim * 4) as u64;
    if total != expected {
        return Err(Error::Format {
            offset: total.min(expected),
            msg: format!("expected {expected} bytes for T={t} dim={dim}, file has {total}"),
        });
    }
    let mut data = vec![0f32; t * dim];
    for v in &mut data {
        *v = r.read_f32::<LittleEndian>()?;
    }
    FeatureSequence::new(level, Tensor::from_vec(vec![t, dim], data)?)
}

// ---------------------------------------------------------------------------
// manifest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub label: usize,
    pub num_frames: usize,
    pub paths: BTreeMap<String, PathBuf>,
}

impl ManifestEntry {
    pub fn path_for(&self, level: FeatureLevel) -> Result<&PathBuf> {
        self.paths.get(level.name()).ok_or_else(|| {
            Error::invalid(format!(
                "video {} has no {} feature path",
                self.video_id,
                level.name()
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub class_names: Vec<String>,
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    fn validate(entries: &[ManifestEntry]) -> Result<usize> {
        if entries.is_empty() {
            return Err(Error::invalid("empty manifest"));
        }
        let max = entries.iter().map(|e| e.label).max().unwrap();
        let mut seen = vec![false; max + 1];
        for e in entries {
            seen[e.label] = true;
        }
        if let Some(hole) = seen.iter().position(|&s| !s) {
            return Err(Error::invalid(format!(
                "labels not dense: class {hole} has no videos"
            )));
        }
        Ok(max + 1)
    }

    pub fn from_entries(entries: Vec<ManifestEntry>, class_names: Option<Vec<String>>) -> Result<Self> {
        let n = Self::validate(&entries)?;
        let class_names =
            class_names.unwrap_or_else(|| (0..n).map(|k| format!("class_{k}")).collect());
        if class_names.len() != n {
            return Err(Error::invalid(format!(
                "{} class names for {n} labels",
                class_names.len()
            )));
        }
        Ok(DatasetManifest {
            entries,
            class_names,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        {
            let mut w = BufWriter::new(std::fs::File::create(&tmp)?);
            for e in &self.entries {
                serde_json::to_writer(&mut w, e)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for (ln, line) in BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: ManifestEntry = serde_json::from_str(&line).map_err(|err| {
                Error::invalid(format!("{}: line {}: {err}", path.display(), ln + 1))
            })?;
            entries.push(e);
        }
        Self::from_entries(entries, None)
    }
}

// ---------------------------------------------------------------------------
// synthetic dataset

/// Number of hidden-Markov states shared by all classes.
pub const SYNTH_STATES: usize = 8;
/// Standard deviation of the additive feature noise.
pub const SYNTH_NOISE: f64 = 0.3;
/// State cycles a full generated video walks through. Two complete cycles
/// keep each video's overall state histogram exactly uniform, so a frame
/// permutation erases everything that distinguishes the classes.
pub const SYNTH_VIDEO_CYCLES: usize = 2;

#[derive(Debug, Clone, Copy)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub clips_per_class: usize,
    pub clip_len: usize,
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(num_classes: usize, clips_per_class: usize, clip_len: usize, seed: u64) -> Self {
        SynthSpec {
            num_classes,
            clips_per_class,
            clip_len,
            noise: SYNTH_NOISE,
            seed,
        }
    }
}

/// Class-specific visiting orders (paths) over the shared state set. Orders
/// are pairwise distinct, so two classes with zero noise produce different
/// sequences while every class visits the same states equally often.
fn class_orders(num_classes: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut orders: Vec<Vec<usize>> = Vec::new();
    let mut salt = 0u64;
    while orders.len() < num_classes {
        let mut order: Vec<usize> = (0..SYNTH_STATES).collect();
        order.shuffle(&mut rng_for(seed, 0x6f72_6400 + salt));
        salt += 1;
        if !orders.contains(&order) {
            orders.push(order);
        }
    }
    orders
}

fn state_embeddings(level: FeatureLevel, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(seed, 0x656d_6200 + level.code() as u64);
    (0..SYNTH_STATES)
        .map(|_| (0..level.dim()).map(|_| standard_normal(&mut rng)).collect())
        .collect()
}

/// Class direction for the order-sensitive pulse component, unit-norm.
fn class_direction(level: FeatureLevel, class: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(
        seed,
        0x6469_7200 + (class as u64) * 8 + level.code() as u64,
    );
    let mut v: Vec<f64> = (0..level.dim()).map(|_| standard_normal(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= norm;
    }
    v
}

/// Amplitude of the stride-periodic class pulse.
const SYNTH_PULSE: f64 = 4.5;

/// Generate the synthetic dataset: feature files for all three levels plus a
/// manifest, deterministic per seed.
///
/// Each video walks the shared hidden states in its class's order, one run
/// of `stride` frames per state, entered at a random whole-run phase, and
/// maps states through fixed random embeddings plus noise. The class signal
/// itself is a stride-periodic, zero-mean pulse along a class-specific
/// direction: positive in the first quarter of each period, negative in the
/// last. A clip window spans some whole periods (which cancel) plus a fixed
/// partial period, so every in-order clip mean carries the same positive
/// offset along its class direction. The video as a whole sums the pulse to
/// about zero, so permuting frames hands every clip a near-zero-mean random
/// sample of it — which is why a mean-pooled linear probe drops to chance
/// on shuffled copies while separating ordered ones.
pub fn synth_dataset(spec: &SynthSpec, out_dir: &Path) -> Result<DatasetManifest> {
    if spec.num_classes < 2 {
        return Err(Error::invalid("synth_dataset needs at least 2 classes"));
    }
    if spec.clips_per_class == 0 || spec.clip_len == 0 {
        return Err(Error::invalid("synth_dataset counts must be positive"));
    }
    let proto = ClipProtocol {
        clip_len: spec.clip_len,
        ..ClipProtocol::default()
    };
    let run_len = proto.stride;
    let cycle = SYNTH_STATES * run_len;
    let full_frames = SYNTH_VIDEO_CYCLES * cycle;
    let full_clips = split_clips(full_frames, &proto)?.len();
    let orders = class_orders(spec.num_classes, spec.seed);
    let embeddings: Vec<Vec<Vec<f64>>> = FeatureLevel::ALL
        .iter()
        .map(|&l| state_embeddings(l, spec.seed))
        .collect();
    let directions: Vec<Vec<Vec<f64>>> = (0..spec.num_classes)
        .map(|k| {
            FeatureLevel::ALL
                .iter()
                .map(|&l| class_direction(l, k, spec.seed))
                .collect()
        })
        .collect();
    // zero-sum pulse over one stride period, front-loaded so the partial
    // period at the end of a clip window leaves a positive residue
    let quarter = run_len / 4;
    let pulse = |f: usize| -> f64 {
        let i = f % run_len;
        if i < quarter {
            SYNTH_PULSE
        } else if i >= run_len - quarter {
            -SYNTH_PULSE
        } else {
            0.0
        }
    };

    let feat_dir = out_dir.join("features");
    std::fs::create_dir_all(&feat_dir)?;

    let mut entries = Vec::new();
    let mut video_idx = 0u64;
    for class in 0..spec.num_classes {
        let mut remaining = spec.clips_per_class;
        while remaining > 0 {
            let clips_here = remaining.min(full_clips);
            let num_frames = if clips_here == full_clips {
                full_frames
            } else {
                spec.clip_len + proto.stride * (clips_here - 1)
            };
            let video_id = format!("video_{video_idx:05}");
            let mut rng = rng_for(spec.seed, 0x7669_6400 + video_idx);
            // whole-run phase keeps state boundaries aligned with clip starts
            let phase = rng.gen_range(0..SYNTH_STATES) * run_len;
            let states: Vec<usize> = (0..num_frames)
                .map(|f| orders[class][((phase + f) / run_len) % SYNTH_STATES])
                .collect();

            let mut paths = BTreeMap::new();
            for (li, &level) in FeatureLevel::ALL.iter().enumerate() {
                let dim = level.dim();
                let mut data = vec![0f32; num_frames * dim];
                for (f, &s) in states.iter().enumerate() {
                    let p = pulse(f);
                    for d in 0..dim {
                        let v = embeddings[li][s][d]
                            + p * directions[class][li][d]
                            + spec.noise * standard_normal(&mut rng);
                        data[f * dim + d] = v as f32;
                    }
                }
                let seq = FeatureSequence::new(level, Tensor::from_vec(vec![num_frames, dim], data)?)?;
                let path = feat_dir.join(format!("{video_id}.{}.feat", level.name()));
                write_features(&path, &seq)?;
                paths.insert(level.name().to_string(), path);
            }
            entries.push(ManifestEntry {
                video_id,
                label: class,
                num_frames,
                paths,
            });
            remaining -= clips_here;
            video_idx += 1;
        }
    }
    let class_names = (0..spec.num_classes).map(|k| format!("class_{k}")).collect();
    let manifest = DatasetManifest::from_entries(entries, Some(class_names))?;
    manifest.save(&out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// clip loading for the trainer

#[derive(Debug, Clone)]
pub struct ClipSample {
    pub video_index: usize,
    pub label: usize,
    /// `[clip_len, dim]`
    pub features: Tensor<f32>,
}

/// Materialize every clip of every video at one level.
pub fn load_clips(
    manifest: &DatasetManifest,
    level: FeatureLevel,
    proto: &ClipProtocol,
) -> Result<Vec<ClipSample>> {
    let missing: Vec<String> = manifest
        .entries
        .iter()
        .filter_map(|e| match e.path_for(level) {
            Ok(p) if p.exists() => None,
            Ok(p) => Some(p.display().to_string()),
            Err(_) => Some(format!("{} (no {} path)", e.video_id, level.name())),
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "missing feature files: {}",
            missing.join(", ")
        )));
    }
    let mut clips = Vec::new();
    for (vi, e) in manifest.entries.iter().enumerate() {
        let seq = read_features(e.path_for(level)?)?;
        let dim = seq.frames.shape()[1];
        for idx in split_clips(seq.len(), proto)? {
            let mut data = Vec::with_capacity(idx.len() * dim);
            for &f in &idx {
                data.extend_from_slice(&seq.frames.data()[f * dim..(f + 1) * dim]);
            }
            clips.push(ClipSample {
                video_index: vi,
                label: e.label,
                features: Tensor::from_vec(vec![idx.len(), dim], data)?,
            });
        }
    }
    Ok(clips)
}

/// Split a manifest into train/test parts by whole videos: the earliest
/// videos of each class go to train until it holds at least
/// `train_clips_per_class` clips, the rest to test. Keeping the split at
/// video granularity means no video contributes clips to both sides.
pub fn split_manifest(
    manifest: &DatasetManifest,
    proto: &ClipProtocol,
    train_clips_per_class: usize,
) -> Result<(DatasetManifest, DatasetManifest)> {
    let mut taken = vec![0usize; manifest.num_classes()];
    let mut train = Vec::new();
    let mut test = Vec::new();
    for e in &manifest.entries {
        if taken[e.label] < train_clips_per_class {
            taken[e.label] += expected_clip_count(e.num_frames, proto);
            train.push(e.clone());
        } else {
            test.push(e.clone());
        }
    }
    Ok((
        DatasetManifest::from_entries(train, Some(manifest.class_names.clone()))?,
        DatasetManifest::from_entries(test, Some(manifest.class_names.clone()))?,
    ))
}

/// Closed-form clip count for a video (the oracle form of [`split_clips`]).
pub fn expected_clip_count(num_frames: usize, proto: &ClipProtocol) -> usize {
    if num_frames < proto.clip_len {
        1
    } else {
        ((num_frames - proto.clip_len) / proto.stride + 1).min(proto.max_clips)
    }
}
