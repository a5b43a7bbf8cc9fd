use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PrPoint, RocPoint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CurvePoints {
    Pr(Vec<PrPoint>),
    Roc(Vec<RocPoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    /// File stem for the emitted `.csv` and `.svg`.
    pub name: String,
    pub points: CurvePoints,
}

impl Curve {
    pub fn csv(&self) -> String {
        let mut out = String::new();
        match &self.points {
            CurvePoints::Pr(pts) => {
                out.push_str("# precision=1 when nothing is accepted; recall=0 when nothing is findable\n");
                out.push_str("threshold,precision,recall\n");
                for p in pts {
                    writeln!(out, "{},{},{}", p.threshold, p.precision, p.recall).unwrap();
                }
            }
            CurvePoints::Roc(pts) => {
                out.push_str("threshold,tpr,fpr\n");
                for p in pts {
                    writeln!(out, "{},{},{}", p.threshold, p.tpr, p.fpr).unwrap();
                }
            }
        }
        out
    }

    /// Plot coordinates: (recall, precision) or (fpr, tpr).
    fn xy(&self) -> Vec<(f64, f64)> {
        match &self.points {
            CurvePoints::Pr(pts) => pts.iter().map(|p| (p.recall, p.precision)).collect(),
            CurvePoints::Roc(pts) => pts.iter().map(|p| (p.fpr, p.tpr)).collect(),
        }
    }

    fn axis_labels(&self) -> (&'static str, &'static str) {
        match self.points {
            CurvePoints::Pr(_) => ("recall", "precision"),
            CurvePoints::Roc(_) => ("false positive rate", "true positive rate"),
        }
    }
}

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Standalone SVG with a unit-square frame and the curve as one polyline.
pub fn svg_polyline(title: &str, x_label: &str, y_label: &str, xy: &[(f64, f64)]) -> String {
    let px = |x: f64| MARGIN + x.clamp(0.0, 1.0) * SIZE;
    let py = |y: f64| MARGIN + (1.0 - y.clamp(0.0, 1.0)) * SIZE;
    let full = SIZE + 2.0 * MARGIN;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#).unwrap();
    writeln!(s, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#, full / 2.0, escape(title)).unwrap();
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, full / 2.0, full - 15.0, escape(x_label)).unwrap();
    writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 15 {})">{}</text>"#,
        full / 2.0,
        full / 2.0,
        escape(y_label)
    )
    .unwrap();
    let pts: Vec<String> = xy.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
    writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, pts.join(" ")).unwrap();
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `<name>.csv` and `<name>.svg` per curve into `dir`.
pub fn emit_curves(curves: &[Curve], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    if curves.is_empty() {
        return Ok(());
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for c in curves {
        let csv = dir.join(format!("{}.csv", c.name));
        std::fs::write(&csv, c.csv()).map_err(|e| Error::io(&csv, e))?;
        let (xl, yl) = c.axis_labels();
        let svg = dir.join(format!("{}.svg", c.name));
        std::fs::write(&svg, svg_polyline(&c.name, xl, yl, &c.xy())).map_err(|e| Error::io(&svg, e))?;
    }
    Ok(())
}

/// One JSON-lines record per experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub tag: String,
    pub features: String,
    /// None when the match labels are single-class.
    pub auc: Option<f64>,
    pub recall_at_full_precision: f64,
    pub accepted: usize,
    pub frames: usize,
}

impl SummaryRecord {
    pub fn append_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let line = serde_json::to_string(self).expect("summary serializes");
        writeln!(f, "{line}").map_err(|e| Error::io(path, e))
    }

    pub fn read_all(path: impl AsRef<Path>) -> Result<Vec<Self>> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::malformed(path, e.to_string())))
            .collect()
    }
}
