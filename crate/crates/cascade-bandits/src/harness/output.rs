//! Result files: regret curve and detection CSVs, a JSON summary, and an
//! optional SVG plot of the mean regret curve.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::ExperimentSummary;

/// Writes `regret_curve.csv`, `detections.csv`, and `summary.json` into
/// `dir` (created if needed), plus `regret_curve.svg` when the config asks
/// for it. Returns the written paths. Serialization happens before any file
/// is touched, so a failure cannot leave a partial summary.json behind.
pub fn emit_outputs(summary: &ExperimentSummary, dir: &Path) -> Result<Vec<PathBuf>> {
    let json = serde_json::to_string_pretty(summary).map_err(|e| Error::Json {
        context: "serializing summary".into(),
        source: e,
    })? + "\n";

    let mut curve = String::from("checkpoint,mean_cumulative_regret,std\n");
    for ((slot, mean), std) in summary
        .checkpoints
        .iter()
        .zip(&summary.curve_mean)
        .zip(&summary.curve_std)
    {
        let _ = writeln!(curve, "{slot},{mean},{std}");
    }

    let mut detections = String::from("change_point,mean_detection_slot,std,missed\n");
    for det in &summary.detections {
        let mean = det.mean_slot.map(|v| v.to_string()).unwrap_or_default();
        let std = det.std_slot.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(detections, "{},{mean},{std},{}", det.change_point, det.missed);
    }

    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        context: format!("creating output directory {}", dir.display()),
        source: e,
    })?;
    let write = |name: &str, content: &str| -> Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::Io {
            context: format!("writing {}", path.display()),
            source: e,
        })?;
        Ok(path)
    };

    let mut written = vec![
        write("regret_curve.csv", &curve)?,
        write("detections.csv", &detections)?,
        write("summary.json", &json)?,
    ];
    if summary.config.svg {
        written.push(write("regret_curve.svg", &svg_curve(summary))?);
    }
    Ok(written)
}

/// Minimal line plot of the mean cumulative regret over the checkpoints.
fn svg_curve(summary: &ExperimentSummary) -> String {
    const W: f64 = 720.0;
    const H: f64 = 440.0;
    const ML: f64 = 70.0; // margins
    const MR: f64 = 20.0;
    const MT: f64 = 20.0;
    const MB: f64 = 50.0;
    let plot_w = W - ML - MR;
    let plot_h = H - MT - MB;

    let t_max = summary.checkpoints.last().copied().unwrap_or(1) as f64;
    let y_max = summary
        .curve_mean
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v))
        .max(1e-9);

    let mut points = String::new();
    for (&slot, &mean) in summary.checkpoints.iter().zip(&summary.curve_mean) {
        let x = ML + plot_w * slot as f64 / t_max;
        let y = MT + plot_h * (1.0 - mean / y_max);
        let _ = write!(points, "{x:.1},{y:.1} ");
    }

    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="13">"#,
            "\n",
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            "\n",
            r#"<line x1="{ml}" y1="{yb}" x2="{xr}" y2="{yb}" stroke="black"/>"#,
            "\n",
            r#"<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{yb}" stroke="black"/>"#,
            "\n",
            r#"<text x="{ml}" y="{h_lab}" text-anchor="middle">0</text>"#,
            "\n",
            r#"<text x="{xr}" y="{h_lab}" text-anchor="middle">{t_max}</text>"#,
            "\n",
            r#"<text x="{xmid}" y="{h_lab2}" text-anchor="middle">slot</text>"#,
            "\n",
            r#"<text x="{y_lab_x}" y="{mt2}" text-anchor="end">{y_max:.1}</text>"#,
            "\n",
            r#"<text x="{y_lab_x}" y="{yb}" text-anchor="end">0</text>"#,
            "\n",
            r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{points}"/>"#,
            "\n",
            r#"<text x="{xmid}" y="{mt3}" text-anchor="middle">{title}</text>"#,
            "\n</svg>\n",
        ),
        w = W,
        h = H,
        ml = ML,
        mt = MT,
        mt2 = MT + 12.0,
        mt3 = MT + 2.0,
        yb = H - MB,
        xr = W - MR,
        xmid = ML + plot_w / 2.0,
        h_lab = H - MB + 20.0,
        h_lab2 = H - MB + 38.0,
        y_lab_x = ML - 8.0,
        t_max = t_max,
        y_max = y_max,
        points = points.trim_end(),
        title = format!("{} mean cumulative regret", summary.config.policy),
    )
}
