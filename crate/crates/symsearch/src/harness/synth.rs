//! Synthetic dataset generator with a planted ground-truth rule.
//!
//! Each record's detections are sampled until the planted rule, evaluated on
//! the record's true feature vector, matches the intended label. Label noise
//! flips labels after acceptance; detection noise adds and drops detections
//! after labeling. Geometry is fixed — 1000x1000 canvas, box sides 20-200 px,
//! scores in [0.3, 1.0] — so area and overlap features are non-degenerate at
//! the default IoU threshold.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detections::{Dataset, Detection, DetectionRecord};
use crate::error::{Error, Result};
use crate::expr::{evaluate, parse, Expr};
use crate::features::{extract, schema_for_categories, FeatureSchema};

const CANVAS: f64 = 1000.0;
const BOX_MIN: f64 = 20.0;
const BOX_MAX: f64 = 200.0;
const SCORE_MIN: f64 = 0.3;
const SCORE_MAX: f64 = 1.0;
const MAX_COUNT: usize = 4;
const MAX_ATTEMPTS: usize = 10_000;

/// Per-category rates for spurious and missed detections.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectionNoise {
    /// Probability of adding one spurious detection per category.
    pub spurious_rate: f64,
    /// Probability of dropping each real detection.
    pub miss_rate: f64,
}

/// Recipe for a planted-rule dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSpec {
    pub categories: Vec<String>,
    pub rule_text: String,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Independent label flip probability, in [0, 0.5).
    pub label_noise: f64,
    pub detection_noise: DetectionNoise,
    pub seed: u64,
    /// IoU threshold the rule's overlap features are defined against.
    pub iou_threshold: f64,
}

impl PlantedSpec {
    pub fn new(categories: &[&str], rule_text: &str, n_pos: usize, n_neg: usize, seed: u64) -> Self {
        PlantedSpec {
            categories: categories.iter().map(|s| s.to_string()).collect(),
            rule_text: rule_text.to_string(),
            n_pos,
            n_neg,
            label_noise: 0.0,
            detection_noise: DetectionNoise::default(),
            seed,
            iou_threshold: 0.1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.categories.is_empty() {
            return Err(Error::Config("planted spec needs at least one category".into()));
        }
        if self.n_pos == 0 || self.n_neg == 0 {
            return Err(Error::Config("n_pos and n_neg must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::Config("label_noise outside [0, 0.5)".into()));
        }
        Ok(())
    }

    /// Schema over the declared categories; the planted rule must resolve
    /// against it.
    pub fn schema(&self) -> FeatureSchema {
        schema_for_categories(&self.categories, self.iou_threshold)
    }

    pub fn rule(&self) -> Result<Expr> {
        parse(&self.rule_text, &self.schema())
    }
}

fn random_box<R: Rng>(rng: &mut R) -> [f64; 4] {
    let w = rng.gen_range(BOX_MIN..=BOX_MAX);
    let h = rng.gen_range(BOX_MIN..=BOX_MAX);
    let x1 = rng.gen_range(0.0..(CANVAS - w));
    let y1 = rng.gen_range(0.0..(CANVAS - h));
    [x1, y1, x1 + w, y1 + h]
}

fn random_detection<R: Rng>(rng: &mut R, category: &str) -> Detection {
    Detection {
        category: category.to_string(),
        bbox: random_box(rng),
        score: rng.gen_range(SCORE_MIN..=SCORE_MAX),
    }
}

fn sample_detections<R: Rng>(rng: &mut R, categories: &[String]) -> Vec<Detection> {
    let mut detections = Vec::new();
    for category in categories {
        let count = rng.gen_range(0..=MAX_COUNT);
        for _ in 0..count {
            detections.push(random_detection(rng, category));
        }
    }
    detections
}

/// Generate the dataset and write it in the JSON-lines record schema.
/// Deterministic given the seed.
pub fn generate_planted(spec: &PlantedSpec, path: &Path) -> Result<Dataset> {
    spec.validate()?;
    let schema = spec.schema();
    let rule = spec.rule()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.n_pos + spec.n_neg;
    let mut records = Vec::with_capacity(total);

    for i in 0..total {
        let want = i < spec.n_pos;
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let detections = sample_detections(&mut rng, &spec.categories);
            let probe = DetectionRecord {
                image_id: String::new(),
                label: 0,
                detections,
            };
            let fires = evaluate(&rule, &extract(&probe, &schema), &schema)?;
            if fires == want {
                accepted = Some(probe.detections);
                break;
            }
        }
        let mut detections = accepted.ok_or(Error::UnsatisfiableRule {
            record: i,
            attempts: MAX_ATTEMPTS,
        })?;

        let mut label = u8::from(want);
        if spec.label_noise > 0.0 && rng.gen_bool(spec.label_noise) {
            label = 1 - label;
        }

        let noise = spec.detection_noise;
        if noise.miss_rate > 0.0 {
            detections.retain(|_| !rng.gen_bool(noise.miss_rate));
        }
        if noise.spurious_rate > 0.0 {
            for category in &spec.categories {
                if rng.gen_bool(noise.spurious_rate) {
                    detections.push(random_detection(&mut rng, category));
                }
            }
        }

        records.push(DetectionRecord {
            image_id: format!("img_{i:06}"),
            label,
            detections,
        });
    }

    let event_name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "planted".to_string());
    let dataset = Dataset::from_records(records, &event_name);
    dataset.write_jsonl(path)?;
    Ok(dataset)
}
