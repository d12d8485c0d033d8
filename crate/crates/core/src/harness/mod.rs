//! Command implementations behind the CLI.
//!
//! Every command writes only under its output directory, logs to stderr and
//! returns a summary that the CLI prints as one JSON line. Output is
//! deterministic under a fixed seed regardless of worker count.

mod config;
mod data;
mod evaluate;
mod plot;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    CustomLevel, DenoiserSpec, ExperimentConfig, GenConfig, TrainDenoiserConfig,
};
pub use data::{cmd_gen, cmd_train_denoiser, GenSummary, TrainSummary};
pub use evaluate::{cmd_evaluate, EvaluationSummary, SceneEvaluation};
pub use plot::{cmd_plot, PlotSummary};
pub use run::{cmd_assemble, cmd_baseline, RunReport, RunSummary, TrialFailure};

/// Environment variable that relocates relative output paths.
pub const OUTPUT_ROOT_ENV: &str = "ASSEMBLOID_OUT";

/// Joins a relative `path` onto `root` when a root is given.
pub fn resolve_output(root: Option<&Path>, path: &Path) -> PathBuf {
    match root {
        Some(r) if path.is_relative() => r.join(path),
        _ => path.to_path_buf(),
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed of one (scene, trial) job, independent of scheduling.
pub fn trial_seed(base: u64, scene: &str, trial: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(fnv1a(scene))) ^ trial)
}

/// Process exit status for a batch with `failed` of `total` jobs failing.
pub fn exit_code(total: usize, failed: usize) -> i32 {
    if failed == 0 {
        0
    } else if failed >= total {
        1
    } else {
        2
    }
}

/// Mean of each column, in row order.
pub(crate) fn column_means<const N: usize>(rows: &[[f64; N]]) -> Option<[f64; N]> {
    if rows.is_empty() {
        return None;
    }
    let mut sum = [0.0; N];
    for r in rows {
        for k in 0..N {
            sum[k] += r[k];
        }
    }
    Some(sum.map(|s| s / rows.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableMeans {
    pub scd_x1e3: f64,
    pub pa_pct: f64,
    pub rmse_t_x1e2: f64,
    pub rmse_r_deg: f64,
    pub fpa_pct: f64,
}

impl From<[f64; 5]> for TableMeans {
    fn from(v: [f64; 5]) -> Self {
        Self {
            scd_x1e3: v[0],
            pa_pct: v[1],
            rmse_t_x1e2: v[2],
            rmse_r_deg: v[3],
            fpa_pct: v[4],
        }
    }
}
