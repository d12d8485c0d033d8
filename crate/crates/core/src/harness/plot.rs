use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::ensure_dir;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSummary {
    pub command: String,
    pub files: Vec<PathBuf>,
    pub skipped: Vec<PathBuf>,
}

const METRICS: [(&str, &str); 5] = [
    ("scd_x1e3", "SCD (x1e-3)"),
    ("pa_pct", "PA (%)"),
    ("rmse_t_x1e2", "RMSE(T) (x1e-2)"),
    ("rmse_r_deg", "RMSE(R) (deg)"),
    ("fpa_pct", "fPA (%)"),
];

const W: f64 = 480.0;
const H: f64 = 320.0;
const MARGIN: f64 = 48.0;

/// A single-curve line chart. Values are also embedded verbatim as
/// `data-values` so plots can be checked against reports.
pub(crate) fn line_svg(title: &str, values: &[f64]) -> String {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 1.0, hi + 1.0) };
    let n = values.len().max(2) - 1;
    let x = |k: usize| MARGIN + (W - 2.0 * MARGIN) * k as f64 / n as f64;
    let y = |v: f64| H - MARGIN - (H - 2.0 * MARGIN) * (v - lo) / (hi - lo);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).unwrap();
    writeln!(s, "<title>{title}</title>").unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    )
    .unwrap();
    writeln!(s, r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{title}</text>"#, W / 2.0).unwrap();
    writeln!(s, r#"<text x="4" y="{:.1}" font-size="10">{hi}</text>"#, MARGIN).unwrap();
    writeln!(s, r#"<text x="4" y="{:.1}" font-size="10">{lo}</text>"#, H - MARGIN).unwrap();
    writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">iteration {}</text>"#, W - MARGIN, H - 16.0, values.len().saturating_sub(1)).unwrap();
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(k, &v)| format!("{:.3},{:.3}", x(k), y(v)))
        .collect();
    let data: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
    writeln!(
        s,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="2" data-values="{}" data-final="{}" points="{}"/>"#,
        data.join(" "),
        values.last().map_or(String::new(), |v| format!("{v}")),
        points.join(" ")
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Metric columns of a `curve.csv`, one vector per metric.
fn read_curve(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let cols: Vec<usize> = METRICS
        .iter()
        .map(|(name, _)| {
            header.iter().position(|h| h == name).ok_or_else(|| {
                Error::InvalidInput(format!("{}: missing column {name}", path.display()))
            })
        })
        .collect::<Result<_>>()?;
    let mut series = vec![Vec::new(); METRICS.len()];
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        for (m, &c) in cols.iter().enumerate() {
            let v: f64 = fields.get(c).and_then(|f| f.parse().ok()).ok_or_else(|| {
                Error::InvalidInput(format!("{}: bad value on row {}", path.display(), lineno + 2))
            })?;
            series[m].push(v);
        }
    }
    Ok(series)
}

fn write_svg(path: PathBuf, title: &str, values: &[f64], files: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, line_svg(title, values)).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

/// Metric-versus-iteration charts for every run under `results`, plus the
/// mean curve over runs of equal length in `results/plots`.
pub fn cmd_plot(results: &Path) -> Result<PlotSummary> {
    let runs = results.join("runs");
    let mut files = Vec::new();
    let mut skipped = Vec::new();
    let mut all: Vec<Vec<Vec<f64>>> = Vec::new();
    if runs.is_dir() {
        for scene in sorted_subdirs(&runs)? {
            for trial in sorted_subdirs(&scene)? {
                let curve = trial.join("curve.csv");
                let series = if curve.is_file() { read_curve(&curve)? } else { Vec::new() };
                if series.first().map_or(true, Vec::is_empty) {
                    log::warn!("no trace data in {}; skipped", trial.display());
                    skipped.push(trial);
                    continue;
                }
                for ((name, title), values) in METRICS.iter().zip(&series) {
                    write_svg(trial.join(format!("plot_{name}.svg")), title, values, &mut files)?;
                }
                all.push(series);
            }
        }
    }
    if let Some(first) = all.first() {
        let len = first[0].len();
        if all.iter().all(|s| s[0].len() == len) {
            let dir = results.join("plots");
            ensure_dir(&dir)?;
            for (m, (name, title)) in METRICS.iter().enumerate() {
                let mean: Vec<f64> = (0..len)
                    .map(|k| all.iter().map(|s| s[m][k]).sum::<f64>() / all.len() as f64)
                    .collect();
                write_svg(dir.join(format!("mean_{name}.svg")), &format!("mean {title}"), &mean, &mut files)?;
            }
        } else {
            log::warn!("runs differ in length; mean curves skipped");
        }
    }
    Ok(PlotSummary {
        command: "plot".into(),
        files,
        skipped,
    })
}
