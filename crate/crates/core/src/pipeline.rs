//! End-to-end glue: turning dataset samples into model inputs, the training
//! loop with its log and resumable checkpoints, and single caption requests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{crop_subject, load_frames, BBox, Dataset, Frames, SubjectRegion};
use crate::metrics::Prediction;
use crate::model::{
    load_checkpoint, load_optimizer_state, resize_bilinear, save_checkpoint, save_optimizer_state,
    state_path, CaptionModel, DecodeMode, ImageF, ModelInput, TrainConfig, TrainExample, Trainer,
    Vocabulary,
};
use crate::sampler::{extract_frame_features, sample_frames, SamplerConfig, SplitMix64, Strategy, ToyExtractor};
use crate::{Error, Result};

/// Samples `config.num_frames` frames for the subject in `region` and
/// prepares the model input. Returns the input and the sampled indices.
pub fn prepare_input(
    frames: &Frames,
    region: &SubjectRegion,
    num_frames: usize,
    frame_side: usize,
    sampler: &SamplerConfig,
) -> Result<(ModelInput, Vec<usize>)> {
    let crop = crop_subject(frames, region);
    let features = extract_frame_features(frames, &crop, &ToyExtractor)?;
    let config = SamplerConfig {
        t: num_frames,
        ..sampler.clone()
    };
    let sampled = sample_frames(&features, &config)?;
    let images = sampled
        .indices
        .iter()
        .map(|&i| resize_bilinear(&ImageF::from_u8(frames.frame(i)), frame_side, frame_side))
        .collect();
    Ok((
        ModelInput {
            frames: images,
            crop: ImageF::from_u8(crop.view()),
        },
        sampled.indices,
    ))
}

/// Caption vocabulary of a training split.
pub fn build_vocabulary(dataset: &Dataset, min_freq: usize) -> Vocabulary {
    let captions: Vec<&str> = dataset
        .videos
        .iter()
        .flat_map(|v| v.subjects.iter().flat_map(|s| s.captions.iter().map(String::as_str)))
        .collect();
    Vocabulary::build(&captions, min_freq)
}

/// One example per (subject, caption), using the subject's first region.
/// Ids are `video_id/subject_id#k` for the k-th caption.
pub fn build_examples(
    dataset: &Dataset,
    model: &CaptionModel,
    sampler: &SamplerConfig,
) -> Result<Vec<TrainExample>> {
    let cfg = &model.config;
    let mut out = Vec::new();
    for video in &dataset.videos {
        let frames = load_frames(video, &dataset.root)?;
        for s in &video.subjects {
            let region = s.regions.first().ok_or_else(|| {
                Error::validation(format!("{}/{}", video.video_id, s.subject_id), "subject has no region")
            })?;
            let (input, _) = prepare_input(&frames, region, cfg.num_frames, cfg.frame_side, sampler)?;
            for (k, c) in s.captions.iter().enumerate() {
                out.push(TrainExample {
                    id: format!("{}/{}#{k}", video.video_id, s.subject_id),
                    input: input.clone(),
                    target: model.vocab.encode(c, cfg.max_caption_len),
                });
            }
        }
    }
    Ok(out)
}

/// Example indices of the batch used at `step`: consecutive slices of a
/// sequence of seeded per-epoch permutations, so the schedule depends only on
/// `(seed, step)` and resumed runs see the same batches.
pub fn batch_indices(num_examples: usize, batch_size: usize, seed: u64, step: usize) -> Vec<usize> {
    let perm = |epoch: usize| {
        let mut rng = SplitMix64::seeded(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut p: Vec<usize> = (0..num_examples).collect();
        for i in (1..num_examples).rev() {
            p.swap(i, rng.below(i + 1));
        }
        p
    };
    let start = step * batch_size;
    let mut out = Vec::with_capacity(batch_size);
    let mut epoch = start / num_examples;
    let mut cur = perm(epoch);
    for pos in start..start + batch_size {
        if pos / num_examples != epoch {
            epoch = pos / num_examples;
            cur = perm(epoch);
        }
        out.push(cur[pos % num_examples]);
    }
    out
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TrainOutputs {
    /// Checkpoint written every `checkpoint_every` steps and at the end.
    pub checkpoint: Option<PathBuf>,
    /// JSON-lines log, appended to.
    pub log: Option<PathBuf>,
}

/// Runs `trainer` until its optimizer has taken `config.steps` steps. A
/// trainer restored from a checkpoint continues where it stopped. On a
/// non-finite loss the run aborts and the last checkpoint on disk is kept.
pub fn train_loop(
    trainer: &mut Trainer,
    examples: &[TrainExample],
    outputs: &TrainOutputs,
    mut on_step: impl FnMut(&LogEntry),
) -> Result<Vec<LogEntry>> {
    if examples.is_empty() {
        return Err(Error::DegenerateBatch("no training examples".into()));
    }
    let cfg = trainer.config.clone();
    let mut log = match &outputs.log {
        Some(p) => Some(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| Error::io(p, e))?,
        ),
        None => None,
    };
    let mut entries = Vec::new();
    while (trainer.optimizer.step as usize) < cfg.steps {
        let step = trainer.optimizer.step as usize;
        let batch: Vec<TrainExample> = batch_indices(examples.len(), cfg.batch_size, cfg.seed, step)
            .into_iter()
            .map(|i| examples[i].clone())
            .collect();
        let loss = trainer.train_step(&batch)?;
        let entry = LogEntry {
            step: step + 1,
            loss,
            lr: cfg.learning_rate,
        };
        if let (Some(f), Some(p)) = (log.as_mut(), outputs.log.as_ref()) {
            let line = serde_json::to_string(&entry).expect("log entry serializes");
            writeln!(f, "{line}").map_err(|e| Error::io(p, e))?;
        }
        on_step(&entry);
        entries.push(entry);
        let done = trainer.optimizer.step as usize;
        if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.steps {
            save_trainer(trainer, outputs)?;
        }
    }
    save_trainer(trainer, outputs)?;
    Ok(entries)
}

fn save_trainer(trainer: &Trainer, outputs: &TrainOutputs) -> Result<()> {
    if let Some(p) = &outputs.checkpoint {
        save_checkpoint(&trainer.model, p)?;
        save_optimizer_state(&trainer.optimizer, &state_path(p))?;
    }
    Ok(())
}

/// Restores a trainer from a checkpoint and its optimizer sidecar. A missing
/// sidecar restarts the optimizer from step zero.
pub fn resume_trainer(checkpoint: &Path, config: TrainConfig) -> Result<Trainer> {
    let model = load_checkpoint(checkpoint)?;
    let mut trainer = Trainer::new(model, config)?;
    let sp = state_path(checkpoint);
    if sp.exists() {
        let state = load_optimizer_state(&sp)?;
        if !state.matches(&trainer.model.params) {
            return Err(Error::Format(format!("{}: optimizer state does not match the checkpoint", sp.display())));
        }
        trainer.optimizer = state;
    }
    Ok(trainer)
}

/// Greedy (or beam) captions for each example, one per subject sample.
pub fn predict(model: &CaptionModel, examples: &[TrainExample], mode: DecodeMode) -> Result<Vec<Prediction>> {
    let mut out: Vec<Prediction> = Vec::new();
    for ex in examples {
        let id = ex.id.split('#').next().unwrap_or(&ex.id).to_string();
        if out.last().is_some_and(|p| p.id == id) {
            continue;
        }
        let g = model.caption(&ex.input, mode)?;
        out.push(Prediction { id, caption: g.caption });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionRequest {
    pub video_id: String,
    pub frame_index: u32,
    pub bbox: BBox,
    #[serde(default)]
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionResponse {
    pub caption: String,
    pub sampled_frame_indices: Vec<usize>,
    /// Service path of the subject crop image.
    pub subject_crop_ref: String,
    pub model_id: String,
}

/// Checks a request against the dataset. Validation errors name the
/// offending request field as their location.
pub fn validate_request<'a>(dataset: &'a Dataset, req: &CaptionRequest) -> Result<&'a crate::data::VideoRecord> {
    let video = dataset
        .video(&req.video_id)
        .ok_or_else(|| Error::validation("video_id", format!("unknown video {:?}", req.video_id)))?;
    if req.frame_index >= video.num_frames {
        return Err(Error::validation(
            "frame_index",
            format!("frame_index {} out of range (video has {} frames)", req.frame_index, video.num_frames),
        ));
    }
    req.bbox
        .check_within(video.width, video.height)
        .map_err(|m| Error::validation("bbox", m))?;
    Ok(video)
}

/// Samples frames for the boxed subject, encodes and decodes. Deterministic
/// for a fixed request seed.
pub fn caption_request(
    model: &CaptionModel,
    dataset: &Dataset,
    frames: &Frames,
    req: &CaptionRequest,
    sampler: &SamplerConfig,
    mode: DecodeMode,
    model_id: &str,
) -> Result<CaptionResponse> {
    let video = validate_request(dataset, req)?;
    let region = SubjectRegion {
        frame_index: req.frame_index,
        bbox: req.bbox,
    };
    let mut sampler = sampler.clone();
    if let Some(s) = req.strategy {
        sampler.strategy = s;
    }
    if let Some(seed) = req.seed {
        sampler.seed = seed;
    }
    let cfg = &model.config;
    let (input, mut indices) = prepare_input(frames, &region, cfg.num_frames, cfg.frame_side, &sampler)?;
    let g = model.caption(&input, mode)?;
    indices.sort_unstable();
    Ok(CaptionResponse {
        caption: g.caption,
        sampled_frame_indices: indices,
        subject_crop_ref: format!(
            "/videos/{}/frames/{}?bbox={},{},{},{}",
            video.video_id, req.frame_index, req.bbox.x, req.bbox.y, req.bbox.w, req.bbox.h
        ),
        model_id: model_id.to_string(),
    })
}
