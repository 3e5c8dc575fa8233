//! Thin wrappers over dataset surgery and evaluation: load inputs, run the
//! core operation, save, and shape a JSON report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use synthdrive_core::dataset::{
    compute_stats, filter_fully_visible, filter_min_area, mix, sample, split, DatasetIndex,
};
use synthdrive_core::eval::{
    evaluate, parse_detections_jsonl, rate_of_descent, table_text, ApMode, EvalConfig, EvalTable,
};

use crate::CliError;

fn load_index(root: &Path) -> Result<DatasetIndex, CliError> {
    Ok(DatasetIndex::load(root)?)
}

fn counts(index: &DatasetIndex) -> Value {
    json!({
        "root": index.root.display().to_string(),
        "images": index.image_count(),
        "objects": index.object_count(),
    })
}

/// Derived datasets always carry an `all` list so ImageSets reflects the
/// result of the operation, not just whatever the source had.
fn ensure_all_split(index: &mut DatasetIndex) {
    let ids: Vec<String> = index.images.iter().map(|r| r.id.clone()).collect();
    index.splits.insert("all".into(), ids);
}

fn require_distinct(input: &Path, output: &Path) -> Result<(), CliError> {
    if input == output {
        return Err(CliError::Config(format!(
            "output root {} must differ from the input dataset",
            output.display()
        )));
    }
    Ok(())
}

pub fn run_stats(dataset: &Path) -> Result<Value, CliError> {
    let index = load_index(dataset)?;
    let stats = compute_stats(&index);
    Ok(json!({
        "root": index.root.display().to_string(),
        "provenance": index.provenance,
        "stats": stats,
        "derived": {
            "mean_instances_per_image": stats.mean_instances(),
            "small_fraction": stats.small_fraction(),
            "largely_occluded_fraction": stats.largely_fraction(),
        },
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterMode {
    MinArea(u32),
    FullyVisible,
}

pub fn run_filter(dataset: &Path, out: &Path, mode: FilterMode) -> Result<Value, CliError> {
    require_distinct(dataset, out)?;
    let index = load_index(dataset)?;
    let mut filtered = match mode {
        FilterMode::MinArea(min_area) => {
            if min_area == 0 {
                return Err(CliError::Config("min-area must be at least 1".into()));
            }
            filter_min_area(&index, min_area)
        }
        FilterMode::FullyVisible => filter_fully_visible(&index)?,
    };
    ensure_all_split(&mut filtered);
    let saved = filtered.save_to(out)?;
    let mode_json = match mode {
        FilterMode::MinArea(a) => json!({"kind": "min_area", "min_area": a}),
        FilterMode::FullyVisible => json!({"kind": "fully_visible"}),
    };
    Ok(json!({
        "mode": mode_json,
        "input": counts(&index),
        "output": counts(&saved),
    }))
}

pub fn run_split(
    dataset: &Path,
    out_train: &Path,
    out_test: &Path,
    ratio: (u64, u64),
    seed: u64,
) -> Result<Value, CliError> {
    require_distinct(dataset, out_train)?;
    require_distinct(dataset, out_test)?;
    if out_train == out_test {
        return Err(CliError::Config("train and test output roots must differ".into()));
    }
    let index = load_index(dataset)?;
    let (mut train, mut test) = split(&index, ratio, seed);
    ensure_all_split(&mut train);
    ensure_all_split(&mut test);
    let train_saved = train.save_to(out_train)?;
    let test_saved = test.save_to(out_test)?;
    Ok(json!({
        "ratio": format!("{}:{}", ratio.0, ratio.1),
        "seed": seed,
        "input": counts(&index),
        "train": counts(&train_saved),
        "test": counts(&test_saved),
    }))
}

pub fn run_mix(parts: &[(String, PathBuf)], out: &Path) -> Result<Value, CliError> {
    if parts.is_empty() {
        return Err(CliError::Config("mix needs at least one --dataset NS=PATH".into()));
    }
    for (_, path) in parts {
        require_distinct(path, out)?;
    }
    let mut loaded = Vec::new();
    for (ns, path) in parts {
        loaded.push((ns.as_str(), load_index(path)?));
    }
    let refs: Vec<(&str, &DatasetIndex)> = loaded.iter().map(|(ns, idx)| (*ns, idx)).collect();
    let mut mixed = mix(&refs)?;
    ensure_all_split(&mut mixed);
    let saved = mixed.save_to(out)?;
    Ok(json!({
        "parts": loaded
            .iter()
            .map(|(ns, idx)| json!({"namespace": ns, "input": counts(idx)}))
            .collect::<Vec<_>>(),
        "output": counts(&saved),
    }))
}

pub fn run_sample(dataset: &Path, out: &Path, n: usize, seed: u64) -> Result<Value, CliError> {
    require_distinct(dataset, out)?;
    let index = load_index(dataset)?;
    let mut subset = sample(&index, n, seed)?;
    ensure_all_split(&mut subset);
    let saved = subset.save_to(out)?;
    Ok(json!({
        "count": n,
        "seed": seed,
        "input": counts(&index),
        "output": counts(&saved),
    }))
}

#[derive(Debug, Clone)]
pub struct EvalRequest {
    pub dataset: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    /// JSON map of label (class or dataset name) to reference AP.
    pub reference_ap: Option<PathBuf>,
    /// JSON map of label to measured AP; descent-only mode, no dataset needed.
    pub measured_ap: Option<PathBuf>,
    pub iou_threshold: f64,
    pub ap_mode: ApMode,
}

#[derive(Debug)]
pub struct EvalReport {
    pub json: Value,
    pub text: String,
    pub warnings: Vec<String>,
}

fn read_ap_map(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read AP file {}: {e}", path.display())))?;
    let map: BTreeMap<String, f64> = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("invalid AP file {}: {e}", path.display())))?;
    for (label, ap) in &map {
        if !ap.is_finite() {
            return Err(CliError::Io(format!(
                "invalid AP file {}: non-finite value for '{label}'",
                path.display()
            )));
        }
    }
    Ok(map)
}

/// Per-label descent over the labels both maps share, plus aligned text lines.
fn descent_section(
    reference: &BTreeMap<String, f64>,
    measured: &BTreeMap<String, f64>,
) -> Result<(Value, String), CliError> {
    let mut rows = serde_json::Map::new();
    let mut text = String::new();
    for (label, &ap_ref) in reference {
        let Some(&ap) = measured.get(label) else {
            continue;
        };
        let rate = rate_of_descent(ap_ref, ap)?;
        rows.insert(
            label.clone(),
            json!({"reference": ap_ref, "measured": ap, "rate": rate}),
        );
        text.push_str(&format!(
            "{label:<10} reference {ap_ref:>7.4}  measured {ap:>7.4}  descent {:>5.1}%\n",
            rate * 100.0
        ));
    }
    if rows.is_empty() {
        return Err(CliError::Config(
            "reference and measured AP share no labels; nothing to compare".into(),
        ));
    }
    Ok((Value::Object(rows), text))
}

fn table_ap_map(table: &EvalTable) -> BTreeMap<String, f64> {
    table.classes.iter().map(|(name, m)| (name.clone(), m.ap)).collect()
}

pub fn run_eval(req: &EvalRequest) -> Result<EvalReport, CliError> {
    if !(req.iou_threshold > 0.0 && req.iou_threshold <= 1.0) {
        return Err(CliError::Config(format!(
            "IoU threshold must lie in (0, 1], got {}",
            req.iou_threshold
        )));
    }
    match (&req.dataset, &req.detections, &req.measured_ap) {
        (Some(dataset), Some(detections), None) => {
            let index = load_index(dataset)?;
            let text = std::fs::read_to_string(detections).map_err(|e| {
                CliError::Io(format!("cannot read detections {}: {e}", detections.display()))
            })?;
            let dets = parse_detections_jsonl(&text)?;
            let config = EvalConfig {
                iou_threshold: req.iou_threshold,
                ap_mode: req.ap_mode,
                ignore_difficult: true,
            };
            let table = evaluate(&index, &dets, &config)?;

            let warnings = table
                .classes
                .iter()
                .filter(|(_, m)| m.npos == 0)
                .map(|(name, _)| {
                    format!("class '{name}' has no non-difficult ground truth; AP is 0 by definition")
                })
                .collect();

            let mut text_out = table_text(&table);
            let mut json = json!({
                "mode": "detections",
                "dataset": index.root.display().to_string(),
                "detections": dets.len(),
                "table": table,
            });
            if let Some(ref_path) = &req.reference_ap {
                let reference = read_ap_map(ref_path)?;
                let (rows, descent_text) = descent_section(&reference, &table_ap_map(&table))?;
                json["descent"] = rows;
                text_out.push_str("\nrate of descent vs reference\n");
                text_out.push_str(&descent_text);
            }
            Ok(EvalReport { json, text: text_out, warnings })
        }
        (None, None, Some(measured_path)) => {
            let ref_path = req.reference_ap.as_ref().ok_or_else(|| {
                CliError::Config("descent mode needs both --reference-ap and --measured-ap".into())
            })?;
            let reference = read_ap_map(ref_path)?;
            let measured = read_ap_map(measured_path)?;
            let (rows, descent_text) = descent_section(&reference, &measured)?;
            let text = format!("rate of descent\n{descent_text}");
            Ok(EvalReport {
                json: json!({
                    "mode": "descent",
                    "reference": reference,
                    "measured": measured,
                    "descent": rows,
                }),
                text,
                warnings: Vec::new(),
            })
        }
        _ => Err(CliError::Config(
            "eval needs either --dataset with --detections, or --reference-ap with --measured-ap"
                .into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use synthdrive_core::dataset::{ImageRecord, VocObject};

    fn write_fixture(root: &Path) {
        let mut index = DatasetIndex::new(root.to_path_buf(), "fixture".into());
        for (image, class, bbox, occ) in [
            ("img_a", "car", (10u32, 10u32, 109u32, 109u32), 0.0),
            ("img_b", "car", (5, 5, 64, 64), 0.5),
            ("img_c", "bus", (1, 1, 60, 60), 0.0),
            ("img_d", "car", (30, 30, 49, 49), 0.0),
        ] {
            index.images.push(ImageRecord {
                id: image.into(),
                width: 640,
                height: 480,
                objects: vec![VocObject {
                    name: class.into(),
                    bndbox: bbox,
                    truncated: false,
                    difficult: false,
                    occ_rate: Some(occ),
                }],
            });
        }
        index.save_to(root).unwrap();
    }

    #[test]
    fn stats_report_shape() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let report = run_stats(dir.path()).unwrap();
        assert_eq!(report["stats"]["image_count"], 4);
        assert_eq!(report["stats"]["object_count"], 4);
        assert!(report["derived"]["mean_instances_per_image"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn filter_and_split_reports() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let out = tempfile::tempdir().unwrap();
        let report =
            run_filter(dir.path(), out.path(), FilterMode::MinArea(3600)).unwrap();
        assert_eq!(report["input"]["images"], 4);
        assert_eq!(report["output"]["images"], 3);
        let all =
            std::fs::read_to_string(out.path().join("ImageSets/Main/all.txt")).unwrap();
        assert_eq!(all.lines().count(), 3);

        let tr = tempfile::tempdir().unwrap();
        let te = tempfile::tempdir().unwrap();
        let report = run_split(dir.path(), tr.path(), te.path(), (3, 1), 7).unwrap();
        assert_eq!(report["train"]["images"], 3);
        assert_eq!(report["test"]["images"], 1);
    }

    #[test]
    fn same_root_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let err = run_filter(dir.path(), dir.path(), FilterMode::MinArea(10)).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn eval_descent_only_mode() {
        let dir = tempfile::tempdir().unwrap();
        let refs = dir.path().join("refs.json");
        let meas = dir.path().join("meas.json");
        std::fs::write(&refs, r#"{"pe01": 0.485, "pe02": 0.570, "pe03": 0.585}"#).unwrap();
        std::fs::write(&meas, r#"{"pe01": 0.256, "pe02": 0.508, "pe03": 0.467}"#).unwrap();
        let report = run_eval(&EvalRequest {
            dataset: None,
            detections: None,
            reference_ap: Some(refs),
            measured_ap: Some(meas),
            iou_threshold: 0.5,
            ap_mode: ApMode::Voc2007,
        })
        .unwrap();
        let rate = report.json["descent"]["pe01"]["rate"].as_f64().unwrap();
        assert!((rate - 0.472).abs() < 1e-3);
        assert!(report.text.contains("47.2%"));
        assert!(report.text.contains("10.9%"));
        assert!(report.text.contains("20.2%"));
    }

    #[test]
    fn eval_detections_mode_with_reference() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path());
        let det_path = dir.path().join("dets.jsonl");
        std::fs::write(
            &det_path,
            concat!(
                r#"{"image_id": "img_a", "class": "car", "bbox": [10, 10, 109, 109], "score": 0.9}"#,
                "\n",
                r#"{"image_id": "img_c", "class": "bus", "bbox": [1, 1, 60, 60], "score": 0.8}"#,
                "\n",
            ),
        )
        .unwrap();
        let refs = dir.path().join("refs.json");
        std::fs::write(&refs, r#"{"car": 0.5, "bus": 1.0}"#).unwrap();
        let report = run_eval(&EvalRequest {
            dataset: Some(dir.path().to_path_buf()),
            detections: Some(det_path),
            reference_ap: Some(refs),
            measured_ap: None,
            iou_threshold: 0.5,
            ap_mode: ApMode::Voc2007,
        })
        .unwrap();
        assert_eq!(report.json["table"]["classes"]["bus"]["ap"], 1.0);
        assert!(report.json["descent"]["bus"]["rate"].as_f64().unwrap().abs() < 1e-12);
        assert!(report.text.contains("class"));
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn eval_rejects_incomplete_requests() {
        let err = run_eval(&EvalRequest {
            dataset: None,
            detections: None,
            reference_ap: None,
            measured_ap: None,
            iou_threshold: 0.5,
            ap_mode: ApMode::Voc2007,
        })
        .unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
