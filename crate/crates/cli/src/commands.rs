//! Subcommand implementations. Each writes its JSON result to `out`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};
use sovc_core::annotate::{
    annotate_dataset, default_blacklist, read_corrections, read_detections, CorrectionFile, RuleTagger,
    TrigramSimilarity,
};
use sovc_core::data::{crop_subject, dataset_stats, load_dataset, load_dataset_unvalidated, load_frames, save_dataset, BBox, Split};
use sovc_core::metrics::{evaluate, pairs_from_dataset, read_predictions, write_predictions};
use sovc_core::model::{load_checkpoint, CaptionModel, Trainer};
use sovc_core::pipeline::{
    build_examples, build_vocabulary, caption_request, predict, resume_trainer, train_loop, validate_request,
    CaptionRequest, TrainOutputs,
};
use sovc_core::sampler::{extract_frame_features, sample_frames, Strategy, ToyExtractor};
use sovc_core::synthetic::{write_synthetic_dataset, SyntheticSpec};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "sovc", version, about = "Subject-oriented video captioning")]
pub struct Cli {
    /// JSON file mirroring the run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset directory (overrides `dataset`).
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Model checkpoint (overrides `checkpoint`).
    #[arg(long, global = true)]
    pub checkpoint: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank detections against subject words and apply reviewer corrections.
    Annotate {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        corrections: Option<PathBuf>,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Select frames for one subject sample.
    Sample {
        #[arg(long)]
        video: String,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train on the train split and write a checkpoint and JSON-lines log.
    Train {
        /// Continue from the checkpoint and its optimizer state.
        #[arg(long)]
        resume: bool,
        /// Training log (default: next to the checkpoint).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Caption the subject inside a box.
    Caption {
        #[arg(long)]
        video: String,
        #[arg(long)]
        frame: u32,
        /// Pixel box as x,y,w,h.
        #[arg(long)]
        bbox: BBox,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Caption every subject sample of the dataset into a predictions file.
    Predict {
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predictions file against the dataset.
    Eval {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dataset statistics.
    Stats,
    /// Run the HTTP caption and annotation service.
    Serve,
    /// Write the procedurally rendered training set.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        videos: usize,
    },
}

fn require_exists(p: &Path, what: &str) -> Result<(), CliError> {
    if p.exists() {
        Ok(())
    } else {
        Err(CliError::input(format!("{what} {} does not exist", p.display())))
    }
}

fn emit(out: &mut dyn Write, value: &impl serde::Serialize, file: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    match file {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::internal(format!("{}: {e}", p.display())))?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Hex SHA-256 of the checkpoint bytes.
pub fn model_id(checkpoint: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(checkpoint).map_err(|e| sovc_core::Error::io(checkpoint, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn default_log_path(checkpoint: &Path) -> PathBuf {
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    checkpoint.with_file_name(format!("{stem}.train.jsonl"))
}

pub fn execute(cli: Cli, cfg: RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { out: dir, videos } => {
            let spec = SyntheticSpec {
                num_videos: videos,
                ..SyntheticSpec::default()
            };
            let ds = write_synthetic_dataset(&dir, &spec)?;
            emit(out, &dataset_stats(&ds), None)
        }
        Command::Stats => {
            let path = cfg.dataset_path()?;
            require_exists(path, "dataset")?;
            emit(out, &dataset_stats(&load_dataset(path)?), None)
        }
        Command::Annotate {
            detections,
            corrections,
            out: dest,
        } => {
            let path = cfg.dataset_path()?;
            require_exists(path, "dataset")?;
            require_exists(&detections, "detections file")?;
            let draft = load_dataset_unvalidated(path)?;
            let dets = read_detections(&detections)?;
            let corr = match corrections {
                Some(p) => read_corrections(&p)?,
                None => CorrectionFile::default(),
            };
            let outcome = annotate_dataset(&draft, &dets, &corr, &TrigramSimilarity::new())?;
            let mut ds = outcome.dataset;
            let same_root = std::fs::canonicalize(&dest).ok() == std::fs::canonicalize(&draft.root).ok();
            if !same_root {
                let root = std::fs::canonicalize(&draft.root).unwrap_or_else(|_| draft.root.clone());
                for v in &mut ds.videos {
                    v.frame_source = root.join(&v.frame_source).to_string_lossy().into_owned();
                }
            }
            save_dataset(&ds, &dest)?;
            emit(out, &outcome.report, None)
        }
        Command::Sample {
            video,
            subject,
            strategy,
            t,
            seed,
            out: dest,
        } => {
            let path = cfg.dataset_path()?;
            require_exists(path, "dataset")?;
            let ds = load_dataset(path)?;
            let record = ds
                .video(&video)
                .ok_or_else(|| CliError::input(format!("unknown video {video:?}")))?;
            let sample = record
                .subject(&subject)
                .ok_or_else(|| CliError::input(format!("video {video:?} has no subject {subject:?}")))?;
            let mut sampler = cfg.sampler.clone();
            if let Some(s) = strategy {
                sampler.strategy = s;
            }
            if let Some(t) = t {
                sampler.t = t;
            }
            if let Some(s) = seed {
                sampler.seed = s;
            }
            let frames = load_frames(record, &ds.root)?;
            let crop = crop_subject(&frames, &sample.regions[0]);
            let features = extract_frame_features(&frames, &crop, &ToyExtractor)?;
            let result = sample_frames(&features, &sampler)?;
            let value = json!({
                "video_id": video,
                "subject_id": subject,
                "sampler": sampler,
                "indices": result.indices,
                "cluster_probs": result.probs,
                "cluster_labels": result.assignment.map(|a| a.labels),
            });
            emit(out, &value, dest.as_deref())
        }
        Command::Train { resume, log } => {
            let path = cfg.dataset_path()?;
            require_exists(path, "dataset")?;
            let ckpt = cfg.checkpoint_path()?.to_path_buf();
            let ds = load_dataset(path)?;
            if ds.split != Split::Train {
                return Err(CliError::input(format!(
                    "training needs the train split, {} holds {:?}",
                    path.display(),
                    ds.split
                )));
            }
            let mut trainer = if resume {
                require_exists(&ckpt, "checkpoint")?;
                resume_trainer(&ckpt, cfg.train.clone())?
            } else {
                let vocab = build_vocabulary(&ds, cfg.vocab_min_freq);
                Trainer::new(CaptionModel::new(cfg.model.clone(), vocab, cfg.train.seed)?, cfg.train.clone())?
            };
            let examples = build_examples(&ds, &trainer.model, &cfg.sampler)?;
            let outputs = TrainOutputs {
                log: Some(log.unwrap_or_else(|| default_log_path(&ckpt))),
                checkpoint: Some(ckpt.clone()),
            };
            let entries = train_loop(&mut trainer, &examples, &outputs, |e| {
                log::info!("step {} loss {:.5} lr {}", e.step, e.loss, e.lr);
            })?;
            let value = json!({
                "checkpoint": ckpt,
                "log": outputs.log,
                "examples": examples.len(),
                "steps_run": entries.len(),
                "final_step": trainer.optimizer.step,
                "final_loss": entries.last().map(|e| e.loss),
            });
            emit(out, &value, None)
        }
        Command::Caption {
            video,
            frame,
            bbox,
            strategy,
            seed,
        } => {
            let path = cfg.dataset_path()?;
            require_exists(path, "dataset")?;
            let ckpt = cfg.checkpoint_path()?;
            require_exists(ckpt, "checkpoint")?;
            let ds = load_dataset(path)?;
            let req = CaptionRequest {
                video_id: video,
                frame_index: frame,
                bbox,
                strategy,
                seed,
            };
            let record = validate_request(&ds, &req)?;
            let model = load_checkpoint(ckpt)?;
            let frames = load_frames(record, &ds.root)?;
            let resp = caption_request(&model, &ds, &frames, &req, &cfg.sampler, cfg.decode_mode()?, &model_id(ckpt)?)?;
            emit(out, &resp, None)
        }
        Command::Predict { out: dest } => {
            let path = cfg.dataset_path()?;
            require_exists(path, "dataset")?;
            let ckpt = cfg.checkpoint_path()?;
            require_exists(ckpt, "checkpoint")?;
            let ds = load_dataset(path)?;
            let model = load_checkpoint(ckpt)?;
            let examples = build_examples(&ds, &model, &cfg.sampler)?;
            let preds = predict(&model, &examples, cfg.decode_mode()?)?;
            write_predictions(&dest, &preds)?;
            emit(out, &json!({"predictions": preds.len(), "out": dest}), None)
        }
        Command::Eval { preds, out: dest } => {
            let path = cfg.dataset_path()?;
            require_exists(path, "dataset")?;
            require_exists(&preds, "predictions file")?;
            let ds = load_dataset(path)?;
            let pairs = pairs_from_dataset(&ds, &read_predictions(&preds)?)?;
            let report = evaluate(&pairs, &RuleTagger::default(), &default_blacklist())?;
            let mut text = report.to_json();
            text.push('\n');
            match dest {
                Some(p) => std::fs::write(&p, text).map_err(|e| CliError::internal(format!("{}: {e}", p.display())))?,
                None => out.write_all(text.as_bytes())?,
            }
            Ok(())
        }
        Command::Serve => {
            let state = crate::service::AppState::load(&cfg)?;
            let addr = format!("{}:{}", cfg.service.host, cfg.service.port);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::service::serve(state, &addr, async {
                let _ = tokio::signal::ctrl_c().await;
            }))
        }
    }
}
