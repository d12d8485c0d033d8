use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{column_means, resolve_output, TableMeans};
use crate::io::{ensure_dir, list_scenes, read_scene, write_json};
use crate::metrics::{evaluate, format_row, MetricOptions, MetricsReport, TABLE_HEADER};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEvaluation {
    pub scene: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub command: String,
    pub output: PathBuf,
    pub scenes: Vec<SceneEvaluation>,
    /// Scene ids present on only one side, or that failed to load.
    pub missing: Vec<String>,
    pub aggregate: Option<TableMeans>,
}

/// Scores every scene of `pred_dir` against the same id in `gt_dir`.
/// Writes `evaluation.json`, `evaluation.csv` and `aggregate.csv`.
pub fn cmd_evaluate(
    pred_dir: &Path,
    gt_dir: &Path,
    output: &Path,
    opts: &MetricOptions,
    out_root: Option<&Path>,
) -> Result<EvaluationSummary> {
    let pred_ids: BTreeSet<String> = list_scenes(pred_dir)?.into_iter().collect();
    let gt_ids: BTreeSet<String> = list_scenes(gt_dir)?.into_iter().collect();
    let mut missing: Vec<String> = pred_ids.symmetric_difference(&gt_ids).cloned().collect();
    let mut scenes = Vec::new();
    for id in pred_ids.intersection(&gt_ids) {
        let res = read_scene(&pred_dir.join(id)).and_then(|(p, _)| {
            let (g, _) = read_scene(&gt_dir.join(id))?;
            evaluate(&p, &g, opts)
        });
        match res {
            Ok(metrics) => scenes.push(SceneEvaluation {
                scene: id.clone(),
                metrics,
            }),
            Err(e) => {
                log::warn!("scene {id}: {e}");
                missing.push(id.clone());
            }
        }
    }
    missing.sort();

    let out = resolve_output(out_root, output);
    ensure_dir(&out)?;
    let rows: Vec<[f64; 5]> = scenes.iter().map(|s| s.metrics.table_values()).collect();
    let mut csv = format!("scene,{TABLE_HEADER}\n");
    for (s, r) in scenes.iter().zip(&rows) {
        csv.push_str(&format!("{},{}\n", s.scene, format_row(r)));
    }
    let csv_path = out.join("evaluation.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    let means = column_means(&rows);
    let mut agg = format!("{TABLE_HEADER},scenes\n");
    if let Some(m) = means {
        agg.push_str(&format!("{},{}\n", format_row(&m), rows.len()));
    }
    let agg_path = out.join("aggregate.csv");
    std::fs::write(&agg_path, agg).map_err(|e| Error::io(&agg_path, e))?;

    let summary = EvaluationSummary {
        command: "evaluate".into(),
        output: out.clone(),
        scenes,
        missing,
        aggregate: means.map(TableMeans::from),
    };
    write_json(&out.join("evaluation.json"), &summary)?;
    Ok(summary)
}
