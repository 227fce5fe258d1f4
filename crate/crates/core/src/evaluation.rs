//! Center location error, overlap rate and sequence reports.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::tracker::{run_sequence, FrameResult, FrameSource};

/// Axis-aligned box, top-left corner plus size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.x.is_finite() && self.y.is_finite()
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = (self.x + self.w).min(other.x + other.w) - self.x.max(other.x);
        let h = (self.y + self.h).min(other.y + other.h) - self.y.max(other.y);
        w.max(0.0) * h.max(0.0)
    }

    /// Parses `"x,y,w,h"`; commas, tabs and spaces all separate fields.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let fields: Vec<&str> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 4 {
            return Err(format!("expected 4 fields x,y,w,h, found {}", fields.len()));
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = f
                .parse::<f64>()
                .map_err(|_| format!("invalid number {f:?}"))?;
        }
        Ok(Self::new(v[0], v[1], v[2], v[3]))
    }
}

/// Distance between box centers.
pub fn cle(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let (a, b) = (pred.center(), gt.center());
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Intersection over union; 0 for disjoint boxes.
pub fn overlap(pred: &BoundingBox, gt: &BoundingBox) -> f64 {
    let inter = pred.intersection_area(gt);
    let union = pred.area() + gt.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub frames: usize,
    pub per_frame_cle: Vec<f64>,
    pub per_frame_overlap: Vec<f64>,
    pub mean_cle: f64,
    pub mean_overlap: f64,
    /// Frames per second of the tracking loop, decode excluded. `None` when
    /// the report was built from files.
    pub fps: Option<f64>,
}

impl SequenceReport {
    /// Frame-by-frame comparison; both slices must have the same length.
    pub fn from_boxes(pred: &[BoundingBox], gt: &[BoundingBox], fps: Option<f64>) -> Result<Self> {
        if pred.len() != gt.len() {
            return Err(Error::LengthMismatch {
                pred: pred.len(),
                gt: gt.len(),
            });
        }
        let per_frame_cle: Vec<f64> = pred.iter().zip(gt).map(|(p, g)| cle(p, g)).collect();
        let per_frame_overlap: Vec<f64> =
            pred.iter().zip(gt).map(|(p, g)| overlap(p, g)).collect();
        let mean = |v: &[f64]| {
            if v.is_empty() {
                0.0
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        };
        Ok(Self {
            frames: pred.len(),
            mean_cle: mean(&per_frame_cle),
            mean_overlap: mean(&per_frame_overlap),
            per_frame_cle,
            per_frame_overlap,
            fps,
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path)?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }
}

/// One ground-truth box per line.
pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<BoundingBox>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut boxes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let b = BoundingBox::parse(line).map_err(|message| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        boxes.push(b);
    }
    Ok(boxes)
}

pub fn write_ground_truth(path: impl AsRef<Path>, boxes: &[BoundingBox]) -> Result<()> {
    let mut out = String::new();
    for b in boxes {
        out.push_str(&format!("{:.3},{:.3},{:.3},{:.3}\n", b.x, b.y, b.w, b.h));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Header of the tracking CSV.
pub const TRACK_CSV_HEADER: [&str; 8] = [
    "frame",
    "x",
    "y",
    "w",
    "h",
    "confidence",
    "neg_used",
    "occluded",
];

/// Writes `frame,x,y,w,h,confidence,neg_used,occluded`, one row per frame.
pub fn write_track_csv(path: impl AsRef<Path>, results: &[FrameResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACK_CSV_HEADER)?;
    for r in results {
        w.write_record([
            r.frame_index.to_string(),
            format!("{:.4}", r.bbox.x),
            format!("{:.4}", r.bbox.y),
            format!("{:.4}", r.bbox.w),
            format!("{:.4}", r.bbox.h),
            format!("{:.6e}", r.confidence),
            r.neg_used.to_string(),
            u8::from(r.occluded).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads boxes from a prediction CSV whose first five columns are
/// `frame,x,y,w,h`. A header row is optional; extra columns are ignored.
/// Lines with fewer fields are read as ground-truth style `x,y,w,h`.
pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<BoundingBox>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut boxes = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 1;
        if i == 0 && record.get(0).is_some_and(|f| f.eq_ignore_ascii_case("frame")) {
            continue;
        }
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() < 5 {
            // Ground-truth style line without a frame column.
            let text = record.iter().collect::<Vec<_>>().join(",");
            let b = BoundingBox::parse(&text).map_err(|m| {
                parse_err(format!("expected frame,x,y,w,h or x,y,w,h: {m}"))
            })?;
            boxes.push(b);
            continue;
        }
        let mut v = [0.0; 4];
        for (slot, f) in v.iter_mut().zip(record.iter().skip(1)) {
            *slot = f
                .parse::<f64>()
                .map_err(|_| parse_err(format!("invalid number {f:?}")))?;
        }
        boxes.push(BoundingBox::new(v[0], v[1], v[2], v[3]));
    }
    Ok(boxes)
}

/// Compares a prediction CSV against ground truth. With `truncate`, the
/// longer input is cut to the shorter one.
pub fn evaluate_files(
    pred_path: impl AsRef<Path>,
    gt_path: impl AsRef<Path>,
    truncate: bool,
) -> Result<SequenceReport> {
    let mut pred = read_predictions(pred_path)?;
    let mut gt = read_ground_truth(gt_path)?;
    if truncate {
        let n = pred.len().min(gt.len());
        pred.truncate(n);
        gt.truncate(n);
    }
    SequenceReport::from_boxes(&pred, &gt, None)
}

/// One row of a regularization sweep. `error` holds the failure message of a
/// run that did not complete.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mean_overlap: Option<f64>,
    pub mean_cle: Option<f64>,
    pub error: Option<String>,
}

/// Runs the tracker once per `lambda` with everything else fixed. Rows come
/// back in input order; a failing run produces a row with empty metrics.
pub fn lambda_sweep<S: FrameSource + Sync + ?Sized>(
    source: &S,
    ground_truth: &[BoundingBox],
    config: &RunConfig,
    lambdas: &[f64],
    parallel: bool,
) -> Vec<SweepRow> {
    let run = |&lambda: &f64| {
        let outcome = (|| {
            let cfg = RunConfig {
                lambda,
                ..config.clone()
            };
            let init = *ground_truth
                .first()
                .ok_or_else(|| Error::Config("ground truth is empty".into()))?;
            let run = run_sequence(source, &init, &cfg.tracker_config()?)?;
            let n = run.results.len().min(ground_truth.len());
            SequenceReport::from_boxes(&run.boxes()[..n], &ground_truth[..n], Some(run.fps()))
        })();
        match outcome {
            Ok(report) => SweepRow {
                lambda,
                mean_overlap: Some(report.mean_overlap),
                mean_cle: Some(report.mean_cle),
                error: None,
            },
            Err(e) => SweepRow {
                lambda,
                mean_overlap: None,
                mean_cle: None,
                error: Some(e.to_string()),
            },
        }
    };
    if parallel {
        lambdas.par_iter().map(run).collect()
    } else {
        lambdas.iter().map(run).collect()
    }
}

/// `lambda,mean_overlap,mean_cle`; failed runs leave the metric cells empty.
pub fn write_sweep_csv(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lambda", "mean_overlap", "mean_cle"])?;
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in rows {
        w.write_record([r.lambda.to_string(), cell(r.mean_overlap), cell(r.mean_cle)])?;
    }
    w.flush()?;
    Ok(())
}

/// Line plot of mean overlap against lambda, points evenly spaced in input
/// order and labelled with their lambda.
pub fn sweep_svg(rows: &[SweepRow]) -> String {
    let (width, height) = (480.0, 320.0);
    let (left, right, top, bottom) = (50.0, 20.0, 20.0, 40.0);
    let plot_w = width - left - right;
    let plot_h = height - top - bottom;
    let n = rows.len();
    let x_at = |i: usize| {
        if n <= 1 {
            left + plot_w / 2.0
        } else {
            left + plot_w * i as f64 / (n - 1) as f64
        }
    };
    let y_at = |v: f64| top + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    ));
    svg.push_str(&format!(
        "<rect x=\"{left}\" y=\"{top}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"#888\"/>\n"
    ));
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = y_at(tick);
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"end\">{tick:.2}</text>\n",
            left - 6.0,
            y + 3.0
        ));
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.mean_overlap.map(|v| (x_at(i), y_at(v))))
        .collect();
    if points.len() > 1 {
        let path: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f5fbf\" stroke-width=\"2\"/>\n",
            path.join(" ")
        ));
    }
    for (x, y) in &points {
        svg.push_str(&format!(
            "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3.5\" fill=\"#1f5fbf\"/>\n"
        ));
    }
    for (i, r) in rows.iter().enumerate() {
        svg.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
            x_at(i),
            top + plot_h + 14.0,
            r.lambda
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">lambda</text>\n",
        left + plot_w / 2.0,
        height - 6.0
    ));
    svg.push_str(&format!(
        "<text x=\"12\" y=\"{:.1}\" font-size=\"11\" transform=\"rotate(-90 12 {:.1})\" text-anchor=\"middle\">mean overlap</text>\n",
        top + plot_h / 2.0,
        top + plot_h / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}

pub fn write_sweep_svg(path: impl AsRef<Path>, rows: &[SweepRow]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(sweep_svg(rows).as_bytes())?;
    Ok(())
}
