//! CSV and SVG outputs. Column order and number formatting are fixed, so
//! identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use handpose_core::cascade::TrainingReport;
use handpose_core::metric::MetricCurve;

use crate::dataset::write_file;
use crate::error::{Error, Result};

fn csv_bytes(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::format(path, e.to_string()))
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    write_file(path, &csv_bytes(path, header, rows)?)
}

/// `threshold,proportion`, one row per threshold.
pub fn write_curve(path: &Path, curve: &MetricCurve) -> Result<()> {
    let rows: Vec<_> = curve
        .thresholds
        .iter()
        .zip(&curve.proportions)
        .map(|(t, p)| vec![t.to_string(), p.to_string()])
        .collect();
    write_csv(path, &["threshold", "proportion"], &rows)
}

/// `layer,joint,mean_error,median_error`; infinite errors are written as
/// `inf`.
pub fn write_per_joint(path: &Path, curve: &MetricCurve) -> Result<()> {
    let rows: Vec<_> = curve
        .per_joint
        .iter()
        .map(|j| {
            vec![
                j.layer.to_string(),
                j.joint.to_string(),
                j.mean.to_string(),
                j.median.to_string(),
            ]
        })
        .collect();
    write_csv(
        path,
        &["layer", "joint", "mean_error", "median_error"],
        &rows,
    )
}

/// `layer,stage,mean_error` on the training set, plus the holistic
/// baseline as layer `holistic`.
pub fn write_training_report(path: &Path, report: &TrainingReport) -> Result<()> {
    let mut rows: Vec<_> = report
        .stages
        .iter()
        .map(|s| {
            vec![
                s.layer.to_string(),
                s.stage.to_string(),
                s.mean_error.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "holistic".into(),
        "0".into(),
        report.holistic_error.to_string(),
    ]);
    write_csv(path, &["layer", "stage", "mean_error"], &rows)
}

/// Mean error of one layer after one cascade stage.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTrace {
    pub layer: usize,
    pub stage: usize,
    pub mean_error: f64,
}

pub fn write_stage_traces(path: &Path, traces: &[StageTrace]) -> Result<()> {
    let rows: Vec<_> = traces
        .iter()
        .map(|s| {
            vec![
                s.layer.to_string(),
                s.stage.to_string(),
                s.mean_error.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["layer", "stage", "mean_error"], &rows)
}

/// Global-best energy of one swarm generation.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTrace {
    pub frame: String,
    pub layer: usize,
    pub generation: usize,
    pub energy: f64,
}

pub fn write_energy_traces(path: &Path, traces: &[EnergyTrace]) -> Result<()> {
    let rows: Vec<_> = traces
        .iter()
        .map(|t| {
            vec![
                t.frame.clone(),
                t.layer.to_string(),
                t.generation.to_string(),
                t.energy.to_string(),
            ]
        })
        .collect();
    write_csv(path, &["frame", "layer", "generation", "energy"], &rows)
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Line plot of one or more labelled metric curves.
pub fn curves_svg(curves: &[(&str, &MetricCurve)]) -> String {
    let (w, h, m) = (480.0, 360.0, 48.0);
    let t_max = curves
        .iter()
        .flat_map(|(_, c)| c.thresholds.last().copied())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let px = |t: f64| m + (w - 2.0 * m) * t / t_max;
    let py = |p: f64| h - m - (h - 2.0 * m) * p;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<path d="M{m} {m} V{} H{}" fill="none" stroke="black"/>"#,
        h - m,
        w - m
    )
    .unwrap();
    for i in 0..=4 {
        let p = i as f64 / 4.0;
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{p}</text>"#,
            m - 6.0,
            py(p) + 4.0
        )
        .unwrap();
        let t = t_max * p;
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{t:.3}</text>"#,
            px(t),
            h - m + 16.0
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">max joint error</text>"#,
        w / 2.0,
        h - 8.0
    )
    .unwrap();
    for (k, (label, c)) in curves.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = c
            .thresholds
            .iter()
            .zip(&c.proportions)
            .map(|(t, p)| format!("{:.2},{:.2}", px(*t), py(*p)))
            .collect();
        writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            points.join(" ")
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{}</text>"#,
            w - m - 120.0,
            m + 16.0 * (k as f64 + 1.0),
            escape(label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn write_svg(path: &Path, curves: &[(&str, &MetricCurve)]) -> Result<()> {
    write_file(path, curves_svg(curves).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use handpose_core::metric::JointError;

    fn curve() -> MetricCurve {
        MetricCurve {
            thresholds: vec![0.0, 0.05, 0.1],
            proportions: vec![0.0, 0.5, 1.0],
            per_joint: vec![JointError {
                layer: 1,
                joint: 2,
                mean: f64::INFINITY,
                median: 0.25,
            }],
        }
    }

    #[test]
    fn curve_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        write_curve(&p, &curve()).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "threshold,proportion\n0,0\n0.05,0.5\n0.1,1\n"
        );
    }

    #[test]
    fn per_joint_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("j.csv");
        write_per_joint(&p, &curve()).unwrap();
        assert_eq!(
            std::fs::read_to_string(&p).unwrap(),
            "layer,joint,mean_error,median_error\n1,2,inf,0.25\n"
        );
    }

    #[test]
    fn svg_has_one_polyline_per_curve() {
        let c = curve();
        let svg = curves_svg(&[("a<b", &c), ("b", &c)]);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
    }
}
