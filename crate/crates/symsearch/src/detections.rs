//! Ingestion of labeled detection records.
//!
//! The input is a JSON-lines file, one record per line:
//!
//! ```text
//! {"image_id": "...", "label": 0|1, "detections": [{"category": "...", "bbox": [x1,y1,x2,y2], "score": 0.0-1.0}, ...]}
//! ```
//!
//! Detections below the score threshold are dropped at load time so that one
//! filtered dataset feeds every downstream stage consistently.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One detected entity: category label, pixel bounding box, confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub category: String,
    /// `[x1, y1, x2, y2]` with `x1 < x2` and `y1 < y2`.
    pub bbox: [f64; 4],
    pub score: f64,
}

impl Detection {
    pub fn area(&self) -> f64 {
        (self.bbox[2] - self.bbox[0]) * (self.bbox[3] - self.bbox[1])
    }
}

/// One image's label plus its detected entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub label: u8,
    pub detections: Vec<Detection>,
}

/// A labeled collection of records for one target event.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<DetectionRecord>,
    /// Sorted set of every category appearing in `records`.
    pub category_universe: Vec<String>,
    pub event_name: String,
}

impl Dataset {
    /// Assemble a dataset from already-validated records, recomputing the
    /// category universe.
    pub fn from_records(records: Vec<DetectionRecord>, event_name: &str) -> Self {
        let mut universe: Vec<String> = records
            .iter()
            .flat_map(|r| r.detections.iter().map(|d| d.category.clone()))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        universe.sort();
        Dataset {
            records,
            category_universe: universe,
            event_name: event_name.to_string(),
        }
    }

    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.records.iter().filter(|r| r.label == label).count()
    }

    /// Serialize back to the JSON-lines record schema.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut out = std::io::BufWriter::new(file);
        for record in &self.records {
            let line = serde_json::to_string(record).expect("record serializes");
            writeln!(out, "{line}").map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        }
        Ok(())
    }
}

/// How to partition a dataset into a search part and an evaluation part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of each label's records allocated to the search part.
    pub search_scale: f64,
    pub seed: u64,
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Load a JSON-lines dataset, dropping detections with `score < threshold`.
///
/// Categories are trimmed and lowercased on load. The category universe is
/// recomputed after filtering and record order is preserved. The event name
/// defaults to the file stem.
pub fn load_dataset(path: &Path, threshold: f64) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);

    let mut records = Vec::new();
    let mut seen_ids: HashSet<String> = HashSet::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: line_no,
            msg: e.to_string(),
        })?;
        let record = validate_record(raw, line_no, threshold)?;
        if !seen_ids.insert(record.image_id.clone()) {
            return Err(Error::DuplicateImageId {
                line: line_no,
                image_id: record.image_id,
            });
        }
        records.push(record);
    }

    let event_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "event".to_string());
    Ok(Dataset::from_records(records, &event_name))
}

#[derive(Deserialize)]
struct RawRecord {
    image_id: String,
    label: i64,
    detections: Vec<RawDetection>,
}

#[derive(Deserialize)]
struct RawDetection {
    category: String,
    bbox: [f64; 4],
    score: f64,
}

fn validate_record(raw: RawRecord, line: usize, threshold: f64) -> Result<DetectionRecord> {
    if raw.label != 0 && raw.label != 1 {
        return Err(Error::InvalidLabel {
            line,
            label: raw.label,
        });
    }
    let mut detections = Vec::with_capacity(raw.detections.len());
    for d in raw.detections {
        let [x1, y1, x2, y2] = d.bbox;
        if !(x1 < x2 && y1 < y2) || !d.bbox.iter().all(|v| v.is_finite()) {
            return Err(Error::InvertedBbox {
                image_id: raw.image_id,
                x1,
                y1,
                x2,
                y2,
            });
        }
        if !(0.0..=1.0).contains(&d.score) {
            return Err(Error::InvalidScore {
                image_id: raw.image_id,
                score: d.score,
            });
        }
        let category = d.category.trim().to_lowercase();
        if category.is_empty() {
            return Err(Error::EmptyCategory {
                image_id: raw.image_id,
            });
        }
        if d.score >= threshold {
            detections.push(Detection {
                category,
                bbox: d.bbox,
                score: d.score,
            });
        }
    }
    Ok(DetectionRecord {
        image_id: raw.image_id,
        label: raw.label as u8,
        detections,
    })
}

/// Partition a dataset into a search part and an evaluation part, stratified
/// by label.
///
/// Each label's records are split with fraction `search_scale` (rounded to
/// nearest, at least one record per label on each side). Membership is a
/// deterministic function of the dataset order and `spec.seed`; record order
/// within each part follows the original dataset order.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.search_scale > 0.0 && spec.search_scale < 1.0) {
        return Err(Error::InvalidSearchScale(spec.search_scale));
    }
    for label in [0u8, 1u8] {
        if dataset.count_label(label) < 2 {
            return Err(Error::MissingLabelClass { label });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut in_search = vec![false; dataset.records.len()];
    for label in [0u8, 1u8] {
        let mut indices: Vec<usize> = dataset
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect();
        indices.shuffle(&mut rng);
        let n = indices.len();
        let take = ((n as f64 * spec.search_scale).round() as usize).clamp(1, n - 1);
        for &i in indices.iter().take(take) {
            in_search[i] = true;
        }
    }

    let (mut search_records, mut eval_records) = (Vec::new(), Vec::new());
    for (i, record) in dataset.records.iter().enumerate() {
        if in_search[i] {
            search_records.push(record.clone());
        } else {
            eval_records.push(record.clone());
        }
    }
    Ok((
        Dataset::from_records(search_records, &dataset.event_name),
        Dataset::from_records(eval_records, &dataset.event_name),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f
    }

    fn record_json(id: &str, label: u8, dets: &[(&str, [f64; 4], f64)]) -> String {
        let detections: Vec<serde_json::Value> = dets
            .iter()
            .map(|(c, b, s)| {
                serde_json::json!({"category": c, "bbox": b, "score": s})
            })
            .collect();
        serde_json::json!({"image_id": id, "label": label, "detections": detections}).to_string()
    }

    #[test]
    fn threshold_filter_drops_below_keeps_at() {
        let lines = [
            record_json(
                "a",
                1,
                &[
                    ("person", [0.0, 0.0, 10.0, 10.0], 0.04),
                    ("person", [0.0, 0.0, 10.0, 10.0], 0.05),
                ],
            ),
            record_json("b", 0, &[("helmet", [1.0, 1.0, 5.0, 5.0], 0.9)]),
        ];
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_lines(&refs);
        let ds = load_dataset(f.path(), 0.05).unwrap();
        assert_eq!(ds.records[0].detections.len(), 1);
        assert_eq!(ds.records[0].detections[0].score, 0.05);
        assert_eq!(ds.category_universe, vec!["helmet", "person"]);
    }

    #[test]
    fn empty_detections_everywhere_is_valid() {
        let lines = [record_json("a", 1, &[]), record_json("b", 0, &[])];
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_lines(&refs);
        let ds = load_dataset(f.path(), 0.05).unwrap();
        assert!(ds.category_universe.is_empty());
        assert_eq!(ds.records.len(), 2);
    }

    #[test]
    fn category_universe_matches_independent_scan() {
        // 100 records over 3 categories; recount with a separate one-pass scan
        // of the raw file.
        let cats = ["person", "helmet", "head"];
        let mut lines = Vec::new();
        for i in 0..100 {
            let c = cats[i % 3];
            lines.push(record_json(
                &format!("img{i}"),
                (i % 2) as u8,
                &[(c, [0.0, 0.0, 10.0, 10.0], 0.5)],
            ));
        }
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_lines(&refs);
        let ds = load_dataset(f.path(), 0.05).unwrap();

        let raw = std::fs::read_to_string(f.path()).unwrap();
        let mut seen = HashSet::new();
        for line in raw.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            for d in v["detections"].as_array().unwrap() {
                if d["score"].as_f64().unwrap() >= 0.05 {
                    seen.insert(d["category"].as_str().unwrap().to_string());
                }
            }
        }
        let mut expected: Vec<String> = seen.into_iter().collect();
        expected.sort();
        assert_eq!(ds.category_universe, expected);
        assert_eq!(ds.category_universe.len(), 3);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let lines = [record_json("a", 1, &[]), "{not json".to_string()];
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_lines(&refs);
        match load_dataset(f.path(), 0.05) {
            Err(Error::MalformedLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed-line error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_image_id_rejected() {
        let lines = [record_json("a", 1, &[]), record_json("a", 0, &[])];
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_lines(&refs);
        assert!(matches!(
            load_dataset(f.path(), 0.05),
            Err(Error::DuplicateImageId { .. })
        ));
    }

    #[test]
    fn label_outside_01_rejected() {
        let line = serde_json::json!({"image_id": "a", "label": 2, "detections": []}).to_string();
        let f = write_lines(&[&line]);
        assert!(matches!(
            load_dataset(f.path(), 0.05),
            Err(Error::InvalidLabel { label: 2, .. })
        ));
    }

    #[test]
    fn inverted_bbox_names_image() {
        let lines = [record_json(
            "bad_img",
            1,
            &[("person", [10.0, 0.0, 5.0, 10.0], 0.5)],
        )];
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_lines(&refs);
        match load_dataset(f.path(), 0.05) {
            Err(Error::InvertedBbox { image_id, .. }) => assert_eq!(image_id, "bad_img"),
            other => panic!("expected inverted-bbox error, got {other:?}"),
        }
    }

    #[test]
    fn categories_lowercased_and_trimmed() {
        let lines = [record_json("a", 1, &[(" Person ", [0.0, 0.0, 1.0, 1.0], 0.5)])];
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_lines(&refs);
        let ds = load_dataset(f.path(), 0.05).unwrap();
        assert_eq!(ds.category_universe, vec!["person"]);
    }

    #[test]
    fn load_is_deterministic() {
        let mut lines = Vec::new();
        for i in 0..20 {
            lines.push(record_json(
                &format!("img{i}"),
                (i % 2) as u8,
                &[("person", [0.0, 0.0, 10.0, 10.0], 0.1 + 0.04 * i as f64 / 20.0)],
            ));
        }
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_lines(&refs);
        let a = load_dataset(f.path(), 0.11).unwrap();
        let b = load_dataset(f.path(), 0.11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn filter_is_idempotent_monotone() {
        // Filtering at tau then at tau' >= tau equals filtering once at tau'.
        let mut lines = Vec::new();
        for i in 0..50 {
            let s = i as f64 / 50.0;
            lines.push(record_json(
                &format!("img{i}"),
                (i % 2) as u8,
                &[("person", [0.0, 0.0, 10.0, 10.0], s)],
            ));
        }
        let refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let f = write_lines(&refs);

        let once = load_dataset(f.path(), 0.4).unwrap();
        // Emulate two-stage filtering: load at the lower threshold, write out,
        // reload at the higher threshold.
        let low = load_dataset(f.path(), 0.2).unwrap();
        let tmp = tempfile::NamedTempFile::new().unwrap();
        low.write_jsonl(tmp.path()).unwrap();
        let twice = load_dataset(tmp.path(), 0.4).unwrap();
        assert_eq!(once.records, twice.records);
        assert_eq!(once.category_universe, twice.category_universe);
    }

    fn balanced_dataset(n_pos: usize, n_neg: usize) -> Dataset {
        let mut records = Vec::new();
        for i in 0..(n_pos + n_neg) {
            records.push(DetectionRecord {
                image_id: format!("img{i}"),
                label: if i < n_pos { 1 } else { 0 },
                detections: vec![],
            });
        }
        Dataset::from_records(records, "test")
    }

    #[test]
    fn split_is_stratified_and_deterministic() {
        let ds = balanced_dataset(100, 100);
        let spec = SplitSpec {
            search_scale: 0.5,
            seed: 7,
        };
        let (s1, e1) = split(&ds, &spec).unwrap();
        let (s2, e2) = split(&ds, &spec).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(e1, e2);
        assert_eq!(s1.count_label(1), 50);
        assert_eq!(s1.count_label(0), 50);
        assert_eq!(e1.count_label(1), 50);
        assert_eq!(e1.count_label(0), 50);
    }

    #[test]
    fn split_minimum_one_per_label_per_side() {
        let ds = balanced_dataset(10, 10);
        let spec = SplitSpec {
            search_scale: 0.1,
            seed: 3,
        };
        let (s, e) = split(&ds, &spec).unwrap();
        assert_eq!(s.count_label(1), 1);
        assert_eq!(s.count_label(0), 1);
        assert_eq!(e.records.len(), 18);
    }

    #[test]
    fn split_is_a_partition() {
        let ds = balanced_dataset(33, 67);
        let spec = SplitSpec {
            search_scale: 0.3,
            seed: 11,
        };
        let (s, e) = split(&ds, &spec).unwrap();
        assert_eq!(s.records.len() + e.records.len(), ds.records.len());
        let ids_s: HashSet<_> = s.records.iter().map(|r| &r.image_id).collect();
        let ids_e: HashSet<_> = e.records.iter().map(|r| &r.image_id).collect();
        assert!(ids_s.is_disjoint(&ids_e));
    }

    #[test]
    fn different_seeds_same_size_profile_different_membership() {
        let ds = balanced_dataset(500, 500);
        let (s1, _) = split(
            &ds,
            &SplitSpec {
                search_scale: 0.5,
                seed: 1,
            },
        )
        .unwrap();
        let (s2, _) = split(
            &ds,
            &SplitSpec {
                search_scale: 0.5,
                seed: 2,
            },
        )
        .unwrap();
        assert_eq!(s1.count_label(1), s2.count_label(1));
        assert_eq!(s1.count_label(0), s2.count_label(0));
        let ids1: HashSet<_> = s1.records.iter().map(|r| &r.image_id).collect();
        let ids2: HashSet<_> = s2.records.iter().map(|r| &r.image_id).collect();
        assert_ne!(ids1, ids2);
    }

    #[test]
    fn split_requires_both_classes() {
        let mut records = Vec::new();
        for i in 0..10 {
            records.push(DetectionRecord {
                image_id: format!("img{i}"),
                label: 1,
                detections: vec![],
            });
        }
        let ds = Dataset::from_records(records, "test");
        assert!(matches!(
            split(
                &ds,
                &SplitSpec {
                    search_scale: 0.5,
                    seed: 0
                }
            ),
            Err(Error::MissingLabelClass { label: 0 })
        ));
    }
}
