use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use std::path::{Path, PathBuf};

use crate::datagen::{generate_scene, ShapeSpec};
use crate::diffusion::{save_checkpoint, train_tiny_denoiser, NoiseSchedule};
use crate::error::{Error, Result};
use crate::harness::{resolve_output, trial_seed, GenConfig, TrainDenoiserConfig};
use crate::io::{ensure_dir, list_scenes, read_scene, write_index, write_json, write_scene, DatasetIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSummary {
    pub command: String,
    pub output: PathBuf,
    pub scenes: usize,
}

/// Writes `count` ground-truth scenes plus an index. Scene `k` is seeded
/// from the base seed and its id, so it does not depend on `count`.
pub fn cmd_gen(cfg: &GenConfig, out_root: Option<&Path>) -> Result<GenSummary> {
    if cfg.count == 0 {
        return Err(Error::Config("count must be >= 1".into()));
    }
    let out = resolve_output(out_root, &cfg.output);
    ensure_dir(&out)?;
    let spec = ShapeSpec {
        family: cfg.family,
        parts: cfg.parts,
        points_per_part: cfg.points_per_part,
        jitter: cfg.jitter,
    };
    let mut ids = Vec::with_capacity(cfg.count);
    for k in 0..cfg.count {
        let id = format!("scene_{k:04}");
        let seed = trial_seed(cfg.seed, &id, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (scene, meta) = generate_scene(&spec, &mut rng)?;
        write_scene(&out.join(&id), &scene, &id, Some(seed), Some(&meta))?;
        ids.push(id);
    }
    write_index(&out, &DatasetIndex::new(cfg.family.label(), Some(cfg.seed), ids))?;
    log::info!("wrote {} scenes to {}", cfg.count, out.display());
    Ok(GenSummary {
        command: "gen".into(),
        output: out,
        scenes: cfg.count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub command: String,
    pub checkpoint: PathBuf,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub epochs: usize,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

/// Trains a tiny denoiser on the clean scenes of a dataset and writes the
/// checkpoint, `<checkpoint>.loss.csv` and `<checkpoint>.json`.
pub fn cmd_train_denoiser(cfg: &TrainDenoiserConfig, out_root: Option<&Path>) -> Result<TrainSummary> {
    let schedule = NoiseSchedule::try_from(cfg.schedule)?;
    let scenes = list_scenes(&cfg.dataset)?
        .iter()
        .map(|id| read_scene(&cfg.dataset.join(id)).map(|(s, _)| s))
        .collect::<Result<Vec<_>>>()?;
    let ckpt = resolve_output(out_root, &cfg.output);
    if let Some(parent) = ckpt.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (model, curve) = match train_tiny_denoiser(&scenes, &schedule, &cfg.train, &mut rng) {
        Ok(r) => r,
        Err(Error::TrainingFailure { epoch, reason, last_stable }) => {
            let path = sibling(&ckpt, ".last_stable");
            save_checkpoint(&last_stable, &path)?;
            log::error!("training diverged; last stable weights saved to {}", path.display());
            return Err(Error::TrainingFailure { epoch, reason, last_stable });
        }
        Err(e) => return Err(e),
    };
    save_checkpoint(&model, &ckpt)?;

    let mut csv = String::from("epoch,eval_loss,train_loss\n");
    for (k, e) in curve.eval.iter().enumerate() {
        let train = if k == 0 { String::new() } else { format!("{}", curve.train[k - 1]) };
        csv.push_str(&format!("{k},{e},{train}\n"));
    }
    let csv_path = sibling(&ckpt, ".loss.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

    let summary = TrainSummary {
        command: "train-denoiser".into(),
        checkpoint: ckpt.clone(),
        initial_loss: curve.initial(),
        final_loss: curve.last(),
        epochs: cfg.train.epochs,
    };
    write_json(&sibling(&ckpt, ".json"), &summary)?;
    Ok(summary)
}
