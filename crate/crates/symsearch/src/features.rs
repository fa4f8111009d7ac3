//! Entity features extracted from detection records.
//!
//! Each record becomes a fixed-length numeric vector: per-category counts,
//! per-category max confidence, per-category share of total box area, and
//! pairwise overlap counts at an IoU threshold. Feature names follow the
//! grammar `kind.category[.category2]` and are referenced verbatim inside
//! expressions.

use std::collections::HashMap;

use crate::detections::{Dataset, Detection, DetectionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Count,
    MaxScore,
    AreaShare,
    Overlap,
}

/// How one named feature is derived.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
    pub category: String,
    /// Second category, for pair features.
    pub category2: Option<String>,
}

/// Ordered feature names plus their derivations; fixed for a search run.
#[derive(Debug, Clone)]
pub struct FeatureSchema {
    features: Vec<FeatureDef>,
    index: HashMap<String, usize>,
    categories: Vec<String>,
    pub iou_threshold: f64,
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    pub fn defs(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }
}

/// One record's feature values, parallel to the schema's name order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

/// Enumerate the feature set for a dataset's category universe.
///
/// Emits `count.c`, `maxscore.c`, `areashare.c` for each category (kinds in
/// that order, categories sorted), then `overlap.c1.c2` for each unordered
/// pair with `c1 < c2`. An empty universe yields an empty schema.
pub fn build_schema(dataset: &Dataset, iou_threshold: f64) -> FeatureSchema {
    schema_for_categories(&dataset.category_universe, iou_threshold)
}

/// Enumerate the feature set for an explicit category list (sorted first).
pub fn schema_for_categories(categories: &[String], iou_threshold: f64) -> FeatureSchema {
    let mut cats = categories.to_vec();
    cats.sort();
    cats.dedup();
    let cats = &cats;
    let mut features = Vec::new();
    for (kind, prefix) in [
        (FeatureKind::Count, "count"),
        (FeatureKind::MaxScore, "maxscore"),
        (FeatureKind::AreaShare, "areashare"),
    ] {
        for c in cats {
            features.push(FeatureDef {
                name: format!("{prefix}.{c}"),
                kind,
                category: c.clone(),
                category2: None,
            });
        }
    }
    for (i, c1) in cats.iter().enumerate() {
        for c2 in &cats[i + 1..] {
            features.push(FeatureDef {
                name: format!("overlap.{c1}.{c2}"),
                kind: FeatureKind::Overlap,
                category: c1.clone(),
                category2: Some(c2.clone()),
            });
        }
    }
    let index = features
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.clone(), i))
        .collect();
    FeatureSchema {
        features,
        index,
        categories: cats.clone(),
        iou_threshold,
    }
}

/// Intersection-over-union of two boxes in `[x1, y1, x2, y2]` form.
pub fn iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let ix = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let iy = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = ix * iy;
    if inter <= 0.0 {
        return 0.0;
    }
    let area_a = (a[2] - a[0]) * (a[3] - a[1]);
    let area_b = (b[2] - b[0]) * (b[3] - b[1]);
    inter / (area_a + area_b - inter)
}

/// Compute one record's feature vector. Total on valid inputs.
pub fn extract(record: &DetectionRecord, schema: &FeatureSchema) -> FeatureVector {
    let total_area: f64 = record.detections.iter().map(Detection::area).sum();
    let by_category: HashMap<&str, Vec<&Detection>> = {
        let mut m: HashMap<&str, Vec<&Detection>> = HashMap::new();
        for d in &record.detections {
            m.entry(d.category.as_str()).or_default().push(d);
        }
        m
    };
    let empty: Vec<&Detection> = Vec::new();

    let values = schema
        .features
        .iter()
        .map(|f| {
            let dets = by_category.get(f.category.as_str()).unwrap_or(&empty);
            match f.kind {
                FeatureKind::Count => dets.len() as f64,
                FeatureKind::MaxScore => dets.iter().map(|d| d.score).fold(0.0, f64::max),
                FeatureKind::AreaShare => {
                    if total_area == 0.0 {
                        0.0
                    } else {
                        dets.iter().map(|d| d.area()).sum::<f64>() / total_area
                    }
                }
                FeatureKind::Overlap => {
                    let other = f.category2.as_ref().expect("pair feature");
                    let others = by_category.get(other.as_str()).unwrap_or(&empty);
                    let mut n = 0usize;
                    for a in dets {
                        for b in others {
                            if iou(&a.bbox, &b.bbox) >= schema.iou_threshold {
                                n += 1;
                            }
                        }
                    }
                    n as f64
                }
            }
        })
        .collect();
    FeatureVector { values }
}

/// Extract every record in order.
pub fn extract_all(dataset: &Dataset, schema: &FeatureSchema) -> Vec<FeatureVector> {
    dataset.records.iter().map(|r| extract(r, schema)).collect()
}
