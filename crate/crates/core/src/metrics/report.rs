use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{MetricConfig, MetricScores};
use crate::error::{Error, Result};
use crate::grid::{load_field, load_mask, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRow {
    pub file: String,
    #[serde(flatten)]
    pub scores: MetricScores,
}

/// A matched pair that could not be scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFailure {
    pub file: String,
    pub error: String,
}

/// Mean and sample standard error of each score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricScores,
    pub stderr: MetricScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<ImageRow>,
    pub failures: Vec<PairFailure>,
    /// Files present in only one of the directories.
    pub unmatched: Vec<String>,
    pub mean: MetricScores,
    pub stderr: MetricScores,
}

/// Scores one prediction image against one label image. The prediction is
/// read as a field and hardened at 0.5.
pub fn evaluate_pair(
    pred_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
    cfg: &MetricConfig,
) -> Result<MetricScores> {
    let pred = load_field(pred_path)?.harden();
    let label = load_mask(label_path, DEFAULT_THRESHOLD)?;
    MetricScores::compute(&pred, &label, cfg)
}

/// Mean and standard error `s / √n` with the `n - 1` sample deviation; the
/// error is 0 for a single row.
pub fn aggregate(rows: &[MetricScores]) -> Option<Aggregate> {
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mut mean = [0.0; 6];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.values()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut stderr = [0.0; 6];
    if rows.len() > 1 {
        for r in rows {
            for ((s, m), v) in stderr.iter_mut().zip(mean).zip(r.values()) {
                *s += (v - m) * (v - m);
            }
        }
        stderr
            .iter_mut()
            .for_each(|s| *s = (*s / (n - 1.0)).sqrt() / n.sqrt());
    }
    Some(Aggregate {
        mean: MetricScores::from_values(mean),
        stderr: MetricScores::from_values(stderr),
    })
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
        .unwrap_or(false)
}

/// Image files keyed by stem. A repeated stem keeps the first name in sorted
/// order and reports the rest.
fn list_images(dir: &Path, extra: &mut Vec<String>) -> Result<BTreeMap<String, PathBuf>> {
    let io_err = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && is_image(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    let mut out = BTreeMap::new();
    for path in paths {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if out.contains_key(&stem) {
            extra.push(path.display().to_string());
        } else {
            out.insert(stem, path);
        }
    }
    Ok(out)
}

/// Pairs files of the two directories by exact stem and scores every pair in
/// parallel. Rows are ordered by stem.
pub fn evaluate_dirs(
    pred_dir: impl AsRef<Path>,
    label_dir: impl AsRef<Path>,
    cfg: &MetricConfig,
) -> Result<MetricReport> {
    cfg.validate()?;
    let mut unmatched = Vec::new();
    let preds = list_images(pred_dir.as_ref(), &mut unmatched)?;
    let labels = list_images(label_dir.as_ref(), &mut unmatched)?;

    let mut pairs = Vec::new();
    for (stem, p) in &preds {
        match labels.get(stem) {
            Some(l) => pairs.push((stem.clone(), p.clone(), l.clone())),
            None => unmatched.push(p.display().to_string()),
        }
    }
    for (stem, l) in &labels {
        if !preds.contains_key(stem) {
            unmatched.push(l.display().to_string());
        }
    }
    unmatched.sort();
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }

    let results: Vec<(String, Result<MetricScores>)> = pairs
        .par_iter()
        .map(|(stem, p, l)| (stem.clone(), evaluate_pair(p, l, cfg)))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (file, res) in results {
        match res {
            Ok(scores) => rows.push(ImageRow { file, scores }),
            Err(e) => failures.push(PairFailure {
                file,
                error: e.to_string(),
            }),
        }
    }
    let scores: Vec<MetricScores> = rows.iter().map(|r| r.scores).collect();
    let nan = MetricScores::from_values([f64::NAN; 6]);
    let (mean, stderr) = match aggregate(&scores) {
        Some(a) => (a.mean, a.stderr),
        None => (nan, nan),
    };
    Ok(MetricReport {
        rows,
        failures,
        unmatched,
        mean,
        stderr,
    })
}

/// One row per image followed by `MEAN` and `STDERR` rows.
pub fn write_csv<W: Write>(report: &MetricReport, out: W) -> Result<()> {
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["file"];
    header.extend(MetricScores::FIELDS);
    w.write_record(&header).map_err(ser)?;
    let mut record = |name: &str, s: &MetricScores| {
        let mut fields = vec![name.to_string()];
        fields.extend(s.values().iter().map(|v| v.to_string()));
        w.write_record(&fields)
    };
    for row in &report.rows {
        record(&row.file, &row.scores).map_err(ser)?;
    }
    record("MEAN", &report.mean).map_err(ser)?;
    record("STDERR", &report.stderr).map_err(ser)?;
    w.flush().map_err(|e| Error::Serialize(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{save_mask, BinaryMask};

    fn line(row: usize) -> BinaryMask {
        BinaryMask::from_fn(40, 30, |r, _| r == row)
    }

    #[test]
    fn identical_directories_score_one() {
        let pred = tempfile::tempdir().unwrap();
        let label = tempfile::tempdir().unwrap();
        for (i, row) in [5, 12, 20].into_iter().enumerate() {
            save_mask(&line(row), pred.path().join(format!("img{i}.png"))).unwrap();
            save_mask(&line(row), label.path().join(format!("img{i}.png"))).unwrap();
        }
        let report = evaluate_dirs(pred.path(), label.path(), &MetricConfig::default()).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.failures.is_empty() && report.unmatched.is_empty());
        assert_eq!(report.mean.values(), [1.0; 6]);
        assert_eq!(report.stderr.values(), [0.0; 6]);
        let files: Vec<_> = report.rows.iter().map(|r| r.file.as_str()).collect();
        assert_eq!(files, ["img0", "img1", "img2"]);
    }

    #[test]
    fn empty_directory_has_no_pairs() {
        let pred = tempfile::tempdir().unwrap();
        let label = tempfile::tempdir().unwrap();
        let err = evaluate_dirs(pred.path(), label.path(), &MetricConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NoPairs));
        assert_eq!(err.to_string(), "no pairs found");
    }

    #[test]
    fn unmatched_and_mismatched_files_are_reported() {
        let pred = tempfile::tempdir().unwrap();
        let label = tempfile::tempdir().unwrap();
        save_mask(&line(3), pred.path().join("a.png")).unwrap();
        save_mask(&line(3), label.path().join("a.pgm")).unwrap();
        save_mask(&line(3), pred.path().join("only_pred.png")).unwrap();
        save_mask(&line(3), label.path().join("only_label.png")).unwrap();
        save_mask(&line(3), pred.path().join("b.png")).unwrap();
        save_mask(&BinaryMask::zeros(10, 10), label.path().join("b.png")).unwrap();
        let report = evaluate_dirs(pred.path(), label.path(), &MetricConfig::default()).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert_eq!(report.rows[0].file, "a");
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.failures[0].file, "b");
        assert_eq!(report.unmatched.len(), 2);
        assert!(report.unmatched.iter().any(|f| f.ends_with("only_pred.png")));
        assert!(report.unmatched.iter().any(|f| f.ends_with("only_label.png")));
    }

    #[test]
    fn two_rows_aggregate() {
        let a = MetricScores::from_values([0.2, 0.4, 0.6, 0.8, 1.0, 0.5]);
        let b = MetricScores::from_values([0.6, 0.4, 0.1, 0.2, 0.0, 0.9]);
        let agg = aggregate(&[a, b]).unwrap();
        for i in 0..6 {
            let (x1, x2) = (a.values()[i], b.values()[i]);
            assert!((agg.mean.values()[i] - (x1 + x2) / 2.0).abs() < 1e-15);
            assert!((agg.stderr.values()[i] - (x1 - x2).abs() / 2.0).abs() < 1e-15);
        }
        assert!(aggregate(&[]).is_none());
        assert_eq!(aggregate(&[a]).unwrap().stderr.values(), [0.0; 6]);
    }

    #[test]
    fn csv_layout() {
        let s = MetricScores::from_values([1.0; 6]);
        let report = MetricReport {
            rows: vec![ImageRow {
                file: "x".into(),
                scores: s,
            }],
            failures: vec![],
            unmatched: vec![],
            mean: s,
            stderr: MetricScores::from_values([0.0; 6]),
        };
        let mut buf = Vec::new();
        write_csv(&report, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(
            lines[0],
            "file,iou,dice,lineacc_pos,lineacc_width,lineacc_length,lineacc_combined"
        );
        assert_eq!(lines[1], "x,1,1,1,1,1,1");
        assert!(lines[2].starts_with("MEAN,"));
        assert_eq!(lines[3], "STDERR,0,0,0,0,0,0");
        let json: serde_json::Value = serde_json::to_value(&report).unwrap();
        assert_eq!(json["rows"][0]["file"], "x");
        assert_eq!(json["rows"][0]["lineacc_pos"], 1.0);
    }
}
