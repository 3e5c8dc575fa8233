//! PASCAL-VOC-style detection evaluation: IoU, greedy matching, AP, and
//! the rate-of-descent comparison between AP numbers.
//!
//! Both the 2007 11-point interpolation and the continuous (monotone
//! envelope) AP are available; which one a result used is always part of
//! the config echo in the output table.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetIndex;
use crate::groundtruth::VocBox;
use crate::worldgen::ClassId;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("unknown detection class '{0}'")]
    UnknownClass(String),
    #[error("reference AP must be positive")]
    ZeroReference,
    #[error("detections line {line}: {message}")]
    BadDetectionLine { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub class: String,
    /// (xmin, ymin, xmax, ymax), 1-based inclusive.
    pub bbox: VocBox,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApMode {
    #[serde(rename = "voc2007_11pt")]
    Voc2007,
    #[serde(rename = "continuous")]
    Continuous,
}

impl std::str::FromStr for ApMode {
    type Err = String;
    fn from_str(s: &str) -> Result<ApMode, String> {
        match s {
            "voc2007_11pt" | "voc2007" | "11pt" => Ok(ApMode::Voc2007),
            "continuous" => Ok(ApMode::Continuous),
            other => Err(format!("unknown AP mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub ap_mode: ApMode,
    pub ignore_difficult: bool,
}

impl Default for EvalConfig {
    fn default() -> EvalConfig {
        EvalConfig { iou_threshold: 0.5, ap_mode: ApMode::Voc2007, ignore_difficult: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRPoint {
    pub recall: f64,
    pub precision: f64,
}

/// One ground-truth box for matching.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image_id: String,
    pub bbox: VocBox,
    pub difficult: bool,
}

/// Outcome per ranked detection. `Ignored` marks a match to a difficult
/// ground truth: neither rewarded nor penalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchFlag {
    Tp,
    Fp,
    Ignored,
}

/// Inclusive-pixel IoU; 0 for disjoint boxes.
pub fn iou(a: VocBox, b: VocBox) -> f64 {
    let area = |x: VocBox| ((x.2 - x.0 + 1) as f64) * ((x.3 - x.1 + 1) as f64);
    let ix = (a.2.min(b.2) as f64 - a.0.max(b.0) as f64 + 1.0).max(0.0);
    let iy = (a.3.min(b.3) as f64 - a.1.max(b.1) as f64 + 1.0).max(0.0);
    let inter = ix * iy;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (area(a) + area(b) - inter)
}

/// Greedy VOC matching. Detections are ranked by confidence descending
/// (ties: image id lexicographic, then input order); each is matched to
/// the unmatched same-image ground truth of maximal IoU when that IoU
/// clears the threshold. Returns flags in ranked order plus npos, the
/// non-difficult ground-truth count.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruth],
    config: &EvalConfig,
) -> (Vec<MatchFlag>, usize) {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .partial_cmp(&dets[i].score)
            .expect("finite confidence")
            .then_with(|| dets[i].image_id.cmp(&dets[j].image_id))
            .then_with(|| i.cmp(&j))
    });

    let mut by_image: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (gi, gt) in gts.iter().enumerate() {
        by_image.entry(gt.image_id.as_str()).or_default().push(gi);
    }
    let mut matched = vec![false; gts.len()];

    let mut flags = Vec::with_capacity(dets.len());
    for &di in &order {
        let det = &dets[di];
        let mut best: Option<(usize, f64)> = None;
        if let Some(candidates) = by_image.get(det.image_id.as_str()) {
            for &gi in candidates {
                if matched[gi] {
                    continue;
                }
                let v = iou(det.bbox, gts[gi].bbox);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((gi, v));
                }
            }
        }
        match best {
            Some((gi, v)) if v >= config.iou_threshold => {
                matched[gi] = true;
                if gts[gi].difficult && config.ignore_difficult {
                    flags.push(MatchFlag::Ignored);
                } else {
                    flags.push(MatchFlag::Tp);
                }
            }
            _ => flags.push(MatchFlag::Fp),
        }
    }
    let npos = gts.iter().filter(|g| !(g.difficult && config.ignore_difficult)).count();
    (flags, npos)
}

/// Cumulative precision/recall points from ranked flags (ignored entries
/// contribute nothing).
pub fn pr_curve(flags: &[MatchFlag], npos: usize) -> Vec<PRPoint> {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut out = Vec::new();
    for f in flags {
        match f {
            MatchFlag::Tp => tp += 1,
            MatchFlag::Fp => fp += 1,
            MatchFlag::Ignored => continue,
        }
        out.push(PRPoint {
            recall: if npos == 0 { 0.0 } else { tp as f64 / npos as f64 },
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    out
}

/// Average precision over ranked flags. npos = 0 is defined as AP 0 (the
/// caller should surface a warning).
pub fn average_precision(flags: &[MatchFlag], npos: usize, config: &EvalConfig) -> f64 {
    if npos == 0 {
        return 0.0;
    }
    let points = pr_curve(flags, npos);
    match config.ap_mode {
        ApMode::Voc2007 => {
            let mut sum = 0.0;
            for i in 0..=10 {
                let r = i as f64 / 10.0;
                let p = points
                    .iter()
                    .filter(|pt| pt.recall >= r - 1e-12)
                    .map(|pt| pt.precision)
                    .fold(0.0, f64::max);
                sum += p;
            }
            sum / 11.0
        }
        ApMode::Continuous => {
            // Monotone envelope over recall, integrated left to right.
            let mut recalls = vec![0.0];
            let mut precisions = vec![0.0];
            for p in &points {
                recalls.push(p.recall);
                precisions.push(p.precision);
            }
            for i in (0..precisions.len() - 1).rev() {
                precisions[i] = precisions[i].max(precisions[i + 1]);
            }
            let mut ap = 0.0;
            for i in 1..recalls.len() {
                ap += (recalls[i] - recalls[i - 1]) * precisions[i];
            }
            ap
        }
    }
}

/// Evaluated vehicle classes, in reporting order.
pub const EVAL_CLASSES: [&str; 3] = ["car", "bus", "truck"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub ap: f64,
    pub npos: usize,
    pub detections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTable {
    pub config: EvalConfig,
    /// Classes with no ground truth at all are absent, not reported as 0.
    pub classes: BTreeMap<String, ClassMetrics>,
}

/// Per-class AP over {car, bus, truck}. Detections of any other class are
/// rejected.
pub fn evaluate(
    index: &DatasetIndex,
    detections: &[Detection],
    config: &EvalConfig,
) -> Result<EvalTable, EvalError> {
    for d in detections {
        if !EVAL_CLASSES.contains(&d.class.as_str()) {
            return Err(EvalError::UnknownClass(d.class.clone()));
        }
        if !d.score.is_finite() {
            return Err(EvalError::BadDetectionLine {
                line: 0,
                message: format!("non-finite score for image '{}'", d.image_id),
            });
        }
    }

    let mut classes = BTreeMap::new();
    for class in EVAL_CLASSES {
        let gts: Vec<GroundTruth> = index
            .images
            .iter()
            .flat_map(|r| {
                r.objects.iter().filter(|o| o.name == class).map(|o| GroundTruth {
                    image_id: r.id.clone(),
                    bbox: o.bndbox,
                    difficult: o.difficult,
                })
            })
            .collect();
        if gts.is_empty() {
            continue;
        }
        let dets: Vec<Detection> =
            detections.iter().filter(|d| d.class == class).cloned().collect();
        let (flags, npos) = match_detections(&dets, &gts, config);
        let tp = flags.iter().filter(|&&f| f == MatchFlag::Tp).count();
        let fp = flags.iter().filter(|&&f| f == MatchFlag::Fp).count();
        classes.insert(
            class.to_string(),
            ClassMetrics {
                ap: average_precision(&flags, npos, config),
                npos,
                detections: dets.len(),
                true_positives: tp,
                false_positives: fp,
            },
        );
    }
    Ok(EvalTable { config: config.clone(), classes })
}

/// (ap_ref - ap) / ap_ref; how much of the reference AP was lost.
pub fn rate_of_descent(ap_ref: f64, ap: f64) -> Result<f64, EvalError> {
    if !(ap_ref > 0.0) {
        return Err(EvalError::ZeroReference);
    }
    Ok((ap_ref - ap) / ap_ref)
}

/// Parse detections from JSON lines: one object per line with image_id,
/// class, bbox [xmin, ymin, xmax, ymax], score.
pub fn parse_detections_jsonl(text: &str) -> Result<Vec<Detection>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let det: Detection = serde_json::from_str(line).map_err(|e| {
            EvalError::BadDetectionLine { line: i + 1, message: e.to_string() }
        })?;
        let (xmin, ymin, xmax, ymax) = det.bbox;
        if xmin < 1 || ymin < 1 || xmin > xmax || ymin > ymax {
            return Err(EvalError::BadDetectionLine {
                line: i + 1,
                message: format!("invalid box {:?}", det.bbox),
            });
        }
        if !det.score.is_finite() {
            return Err(EvalError::BadDetectionLine {
                line: i + 1,
                message: "non-finite score".into(),
            });
        }
        out.push(det);
    }
    Ok(out)
}

/// JSON form of an evaluation table.
pub fn table_json(table: &EvalTable) -> String {
    serde_json::to_string_pretty(table).expect("serializable")
}

/// Fixed-width text form of an evaluation table.
pub fn table_text(table: &EvalTable) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:<8} {:>8} {:>7} {:>7} {:>6} {:>6}\n",
        "class", "AP", "npos", "dets", "TP", "FP"
    ));
    for class in EVAL_CLASSES {
        let Some(m) = table.classes.get(class) else {
            s.push_str(&format!("{class:<8} {:>8} {:>7} {:>7} {:>6} {:>6}\n", "-", "-", "-", "-", "-"));
            continue;
        };
        s.push_str(&format!(
            "{:<8} {:>8.4} {:>7} {:>7} {:>6} {:>6}\n",
            class, m.ap, m.npos, m.detections, m.true_positives, m.false_positives
        ));
    }
    s
}

/// The three reference/measured AP columns of a descent row, left to
/// right over the sub-dataset variants.
pub fn descent_row(refs: [f64; 3], measured: [f64; 3]) -> Result<[f64; 3], EvalError> {
    Ok([
        rate_of_descent(refs[0], measured[0])?,
        rate_of_descent(refs[1], measured[1])?,
        rate_of_descent(refs[2], measured[2])?,
    ])
}

/// Convenience: class names of the generator vocabulary, for validation.
pub fn known_class(name: &str) -> bool {
    ClassId::from_name(name).is_some()
}
