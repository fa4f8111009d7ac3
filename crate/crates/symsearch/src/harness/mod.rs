//! Run orchestration: configuration, the end-to-end pipeline, standalone
//! rule evaluation, and report files.

pub mod synth;

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::detections::{load_dataset, split, SplitSpec};
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::features::{build_schema, extract_all, FeatureSchema};
use crate::fitness::{score, FeatureSet, FitnessConfig, Score};
use crate::guidance::{
    mock_provider, GuidanceEngine, HttpProvider, PromptContext, RunLog, SuggestionProvider,
};
use crate::search::{self, SearchConfig, SearchResult};

/// Environment variable holding the suggestion endpoint credential.
pub const LLM_KEY_ENV: &str = "SYMSEARCH_LLM_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LlmMode {
    Off,
    Mock,
    Http,
}

impl fmt::Display for LlmMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LlmMode::Off => "off",
            LlmMode::Mock => "mock",
            LlmMode::Http => "http",
        };
        write!(f, "{s}")
    }
}

impl FromStr for LlmMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(LlmMode::Off),
            "mock" => Ok(LlmMode::Mock),
            "http" => Ok(LlmMode::Http),
            other => Err(Error::Config(format!(
                "llm_mode '{other}' is not one of off|mock|http"
            ))),
        }
    }
}

/// Every knob of a run, serializable to and from a flat `key=value` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: String,
    pub event: Option<String>,
    pub scene: Option<String>,
    pub score_threshold: f64,
    pub search_scale: f64,
    pub seed: u64,
    pub iou_threshold: f64,
    pub lambda: f64,
    /// Population size; absent means twice the category count, floor 8.
    pub population: Option<usize>,
    pub crossover: f64,
    pub mutation: f64,
    pub iterations: usize,
    pub top_k: usize,
    pub max_depth: usize,
    pub patience: usize,
    pub guidance_period: usize,
    pub llm_mode: LlmMode,
    pub llm_endpoint: String,
    pub llm_model: String,
    pub max_suggestions: usize,
    pub llm_timeout_s: u64,
    pub cot_template: Option<String>,
    pub report: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: String::new(),
            event: None,
            scene: None,
            score_threshold: 0.05,
            search_scale: 0.5,
            seed: 0,
            iou_threshold: 0.1,
            lambda: 0.005,
            population: None,
            crossover: 0.5,
            mutation: 0.3,
            iterations: 5000,
            top_k: 4,
            max_depth: 6,
            patience: 200,
            guidance_period: 50,
            llm_mode: LlmMode::Off,
            llm_endpoint: String::new(),
            llm_model: String::new(),
            max_suggestions: 8,
            llm_timeout_s: 30,
            cot_template: None,
            report: "report.json".to_string(),
        }
    }
}

impl RunConfig {
    /// Flat `key=value` form, one flag per line; unset optional keys are
    /// omitted. Round-trips losslessly through `from_kv`.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        push("input", self.input.clone());
        if let Some(e) = &self.event {
            push("event", e.clone());
        }
        if let Some(s) = &self.scene {
            push("scene", s.clone());
        }
        push("score_threshold", self.score_threshold.to_string());
        push("search_scale", self.search_scale.to_string());
        push("seed", self.seed.to_string());
        push("iou_threshold", self.iou_threshold.to_string());
        push("lambda", self.lambda.to_string());
        if let Some(p) = self.population {
            push("population", p.to_string());
        }
        push("crossover", self.crossover.to_string());
        push("mutation", self.mutation.to_string());
        push("iterations", self.iterations.to_string());
        push("top_k", self.top_k.to_string());
        push("max_depth", self.max_depth.to_string());
        push("patience", self.patience.to_string());
        push("guidance_period", self.guidance_period.to_string());
        push("llm_mode", self.llm_mode.to_string());
        push("llm_endpoint", self.llm_endpoint.clone());
        push("llm_model", self.llm_model.clone());
        push("max_suggestions", self.max_suggestions.to_string());
        push("llm_timeout_s", self.llm_timeout_s.to_string());
        if let Some(t) = &self.cot_template {
            push("cot_template", t.clone());
        }
        push("report", self.report.clone());
        out
    }

    pub fn from_kv(text: &str) -> Result<RunConfig> {
        let mut config = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::Config(format!("{key}: invalid {what} '{value}'"));
            match key {
                "input" => config.input = value.to_string(),
                "event" => config.event = Some(value.to_string()),
                "scene" => config.scene = Some(value.to_string()),
                "score_threshold" => {
                    config.score_threshold = value.parse().map_err(|_| bad("number"))?
                }
                "search_scale" => config.search_scale = value.parse().map_err(|_| bad("number"))?,
                "seed" => config.seed = value.parse().map_err(|_| bad("integer"))?,
                "iou_threshold" => config.iou_threshold = value.parse().map_err(|_| bad("number"))?,
                "lambda" => config.lambda = value.parse().map_err(|_| bad("number"))?,
                "population" => config.population = Some(value.parse().map_err(|_| bad("integer"))?),
                "crossover" => config.crossover = value.parse().map_err(|_| bad("number"))?,
                "mutation" => config.mutation = value.parse().map_err(|_| bad("number"))?,
                "iterations" => config.iterations = value.parse().map_err(|_| bad("integer"))?,
                "top_k" => config.top_k = value.parse().map_err(|_| bad("integer"))?,
                "max_depth" => config.max_depth = value.parse().map_err(|_| bad("integer"))?,
                "patience" => config.patience = value.parse().map_err(|_| bad("integer"))?,
                "guidance_period" => {
                    config.guidance_period = value.parse().map_err(|_| bad("integer"))?
                }
                "llm_mode" => config.llm_mode = value.parse()?,
                "llm_endpoint" => config.llm_endpoint = value.to_string(),
                "llm_model" => config.llm_model = value.to_string(),
                "max_suggestions" => {
                    config.max_suggestions = value.parse().map_err(|_| bad("integer"))?
                }
                "llm_timeout_s" => config.llm_timeout_s = value.parse().map_err(|_| bad("integer"))?,
                "cot_template" => config.cot_template = Some(value.to_string()),
                "report" => config.report = value.to_string(),
                other => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score_threshold) {
            return Err(Error::Config("score_threshold outside [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::Config("iou_threshold outside [0,1]".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if self.max_suggestions == 0 {
            return Err(Error::Config("max_suggestions must be positive".into()));
        }
        Ok(())
    }

    pub fn search_config(&self, n_categories: usize) -> SearchConfig {
        SearchConfig {
            population_size: self.population.unwrap_or((2 * n_categories).max(8)),
            crossover_factor: self.crossover,
            mutation_factor: self.mutation,
            max_iterations: self.iterations,
            top_k_parents: self.top_k,
            max_depth: self.max_depth,
            convergence_patience: self.patience,
            guidance_period: self.guidance_period,
            rng_seed: self.seed,
        }
    }

    fn fitness_config(&self) -> FitnessConfig {
        FitnessConfig {
            lambda: self.lambda,
        }
    }

    fn report_sibling(&self, suffix: &str) -> PathBuf {
        let base = Path::new(&self.report);
        let stem = base
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "report".to_string());
        base.with_file_name(format!("{stem}{suffix}"))
    }

    /// Path of the per-generation trace CSV.
    pub fn trace_path(&self) -> PathBuf {
        self.report_sibling(".trace.csv")
    }

    /// Path of the guidance run log.
    pub fn log_path(&self) -> PathBuf {
        self.report_sibling(".log")
    }
}

/// Final report of a run: the rule, metrics on both splits, and the config
/// snapshot that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub expression: String,
    pub search_metrics: Score,
    pub eval_metrics: Score,
    pub generations_run: usize,
    pub guidance_calls: usize,
    pub wall_time_s: f64,
    pub seed: u64,
    pub config: String,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable rendering of the report.
    pub fn summary(&self) -> String {
        format!(
            "best rule       {}\n\
             search split    auroc {:.4}  loss {:.4}  fitness {:.4}  complexity {}\n\
             eval split      auroc {:.4}  loss {:.4}  fitness {:.4}  complexity {}\n\
             generations     {}\n\
             guidance calls  {}\n\
             wall time       {:.2}s\n\
             seed            {}\n",
            self.expression,
            self.search_metrics.auroc,
            self.search_metrics.loss,
            self.search_metrics.fitness,
            self.search_metrics.complexity,
            self.eval_metrics.auroc,
            self.eval_metrics.loss,
            self.eval_metrics.fitness,
            self.eval_metrics.complexity,
            self.generations_run,
            self.guidance_calls,
            self.wall_time_s,
            self.seed,
        )
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn load_cot_steps(config: &RunConfig) -> Result<Option<Vec<String>>> {
    match &config.cot_template {
        None => Ok(None),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            Ok(Some(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect(),
            ))
        }
    }
}

/// Output of the pipeline: the written report plus in-memory search detail
/// for callers that want the trace.
pub struct PipelineRun {
    pub report: EvalReport,
    pub result: SearchResult,
}

/// End-to-end run: load, split, extract, search, evaluate on the held-out
/// split, write report and trace files.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineRun> {
    let started = Instant::now();
    config.validate()?;
    let mut dataset = load_dataset(Path::new(&config.input), config.score_threshold)?;
    if let Some(event) = &config.event {
        dataset.event_name = event.clone();
    }
    let (search_ds, eval_ds) = split(
        &dataset,
        &SplitSpec {
            search_scale: config.search_scale,
            seed: config.seed,
        },
    )?;

    // Evaluation records must never be seen during search.
    let search_ids: HashSet<&str> = search_ds.records.iter().map(|r| r.image_id.as_str()).collect();
    assert!(
        eval_ds.records.iter().all(|r| !search_ids.contains(r.image_id.as_str())),
        "split produced overlapping record sets"
    );

    let schema = build_schema(&search_ds, config.iou_threshold);
    let search_set = FeatureSet {
        rows: extract_all(&search_ds, &schema),
        labels: search_ds.labels(),
    };
    let eval_set = FeatureSet {
        rows: extract_all(&eval_ds, &schema),
        labels: eval_ds.labels(),
    };

    let search_config = config.search_config(schema.categories().len());
    let fitness_config = config.fitness_config();

    let result = match config.llm_mode {
        LlmMode::Off => search::run(
            &search_set,
            &eval_set,
            &schema,
            &search_config,
            &fitness_config,
            None,
        )?,
        mode => {
            let provider: Box<dyn SuggestionProvider> = match mode {
                LlmMode::Mock => Box::new(mock_provider(
                    &search_set,
                    &schema,
                    config.max_suggestions,
                )),
                _ => Box::new(HttpProvider::new(
                    &config.llm_endpoint,
                    &config.llm_model,
                    std::env::var(LLM_KEY_ENV).ok(),
                    Duration::from_secs(config.llm_timeout_s),
                )),
            };
            let scene = config.scene.clone().unwrap_or_else(|| {
                format!(
                    "Decide whether the event '{}' occurs in an image, given only detected objects.",
                    dataset.event_name
                )
            });
            let mut context = PromptContext::new(&scene, schema.categories());
            if let Some(steps) = load_cot_steps(config)? {
                context.cot_steps = steps;
            }
            let log = RunLog::to_file(&config.log_path())?;
            let mut engine = GuidanceEngine::new(
                provider,
                context,
                &schema,
                config.max_suggestions,
                log,
            );
            search::run(
                &search_set,
                &eval_set,
                &schema,
                &search_config,
                &fitness_config,
                Some(&mut engine),
            )?
        }
    };

    let report = EvalReport {
        expression: result.best.printed.clone(),
        search_metrics: result.best.score,
        eval_metrics: result.eval_score,
        generations_run: result.generations_run,
        guidance_calls: result.guidance_calls,
        wall_time_s: started.elapsed().as_secs_f64(),
        seed: config.seed,
        config: config.to_kv(),
    };
    write_text(Path::new(&config.report), &report.to_json())?;
    write_text(&config.trace_path(), &search::trace_to_csv(&result.trace))?;
    Ok(PipelineRun { report, result })
}

fn first_rule_line(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .ok_or_else(|| Error::EmptyRuleFile {
            path: path.display().to_string(),
        })
}

/// Parse a rule against a dataset's schema, reporting every unknown feature
/// at once.
pub fn parse_rule_against(text: &str, schema: &FeatureSchema) -> Result<Expr> {
    let expr = crate::expr::parse_syntax(text)?;
    let mut unknown: Vec<String> = expr
        .nodes()
        .iter()
        .filter_map(|n| match n {
            Expr::Feature(name) if !schema.contains(name) => Some(name.clone()),
            _ => None,
        })
        .collect();
    unknown.sort();
    unknown.dedup();
    if !unknown.is_empty() {
        return Err(Error::UnknownFeatures(unknown));
    }
    expr.check_classifier(schema)?;
    Ok(expr)
}

/// Apply a rule file's first expression to every record of a dataset; no
/// search is performed and both metric blocks carry the whole-file score.
pub fn evaluate_rule(rule_file: &Path, dataset_path: &Path, config: &RunConfig) -> Result<EvalReport> {
    let started = Instant::now();
    config.validate()?;
    let dataset = load_dataset(dataset_path, config.score_threshold)?;
    let schema = build_schema(&dataset, config.iou_threshold);
    let line = first_rule_line(rule_file)?;
    let expr = parse_rule_against(&line, &schema)?;
    let set = FeatureSet {
        rows: extract_all(&dataset, &schema),
        labels: dataset.labels(),
    };
    let metrics = score(&expr, &set, &schema, &config.fitness_config())?;
    Ok(EvalReport {
        expression: expr.to_string(),
        search_metrics: metrics,
        eval_metrics: metrics,
        generations_run: 0,
        guidance_calls: 0,
        wall_time_s: started.elapsed().as_secs_f64(),
        seed: config.seed,
        config: config.to_kv(),
    })
}

/// Materialize the split as two JSON-lines files next to `prefix`.
pub fn write_split_manifests(config: &RunConfig, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let dataset = load_dataset(Path::new(&config.input), config.score_threshold)?;
    let (search_ds, eval_ds) = split(
        &dataset,
        &SplitSpec {
            search_scale: config.search_scale,
            seed: config.seed,
        },
    )?;
    let prefix_str = prefix.display().to_string();
    let search_path = PathBuf::from(format!("{prefix_str}.search.jsonl"));
    let eval_path = PathBuf::from(format!("{prefix_str}.eval.jsonl"));
    search_ds.write_jsonl(&search_path)?;
    eval_ds.write_jsonl(&eval_path)?;
    Ok((search_path, eval_path))
}

/// Evaluate one expression on a feature set; used to replay traces against
/// the held-out split.
pub fn score_rule_text(
    text: &str,
    set: &FeatureSet,
    schema: &FeatureSchema,
    lambda: f64,
) -> Result<Score> {
    let expr = parse(text, schema)?;
    score(&expr, set, schema, &FitnessConfig { lambda })
}

#[cfg(test)]
mod tests {
    use super::synth::{generate_planted, PlantedSpec};
    use super::*;

    #[test]
    fn config_round_trips_through_kv() {
        let mut config = RunConfig {
            input: "data/helmet.jsonl".into(),
            report: "out/report.json".into(),
            seed: 1234,
            search_scale: 0.35,
            lambda: 0.0025,
            population: Some(16),
            llm_mode: LlmMode::Mock,
            event: Some("helmet violation".into()),
            ..RunConfig::default()
        };
        let text = config.to_kv();
        let back = RunConfig::from_kv(&text).unwrap();
        assert_eq!(back, config);

        // Optional fields stay absent.
        config.population = None;
        config.event = None;
        let back = RunConfig::from_kv(&config.to_kv()).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        assert!(matches!(
            RunConfig::from_kv("bogus_key=1"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn invalid_numeric_config_rejected() {
        let config = RunConfig {
            lambda: -0.1,
            ..RunConfig::default()
        };
        assert!(matches!(config.validate(), Err(Error::Config(_))));
        let config = RunConfig {
            score_threshold: 1.5,
            ..RunConfig::default()
        };
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn planted_rule_loss_stays_within_noise_bound() {
        // Planted generation followed by standalone evaluation of the
        // planted rule: loss <= label_noise + 0.02 at n >= 1000.
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("bound.jsonl");
        let mut spec = PlantedSpec::new(
            &["person", "helmet"],
            "count.person > count.helmet",
            500,
            500,
            31,
        );
        spec.label_noise = 0.05;
        generate_planted(&spec, &input).unwrap();
        let rules = dir.path().join("rules.txt");
        std::fs::write(&rules, "count.person > count.helmet\n").unwrap();
        let report = evaluate_rule(&rules, &input, &RunConfig::default()).unwrap();
        assert!(
            report.eval_metrics.loss <= 0.05 + 0.02,
            "loss {} exceeds noise bound",
            report.eval_metrics.loss
        );
    }

    #[test]
    fn config_accepts_comments_and_blanks() {
        let config = RunConfig::from_kv("# comment\n\nseed=9\n").unwrap();
        assert_eq!(config.seed, 9);
    }

    fn planted_file(dir: &Path, seed: u64) -> PathBuf {
        let path = dir.join(format!("planted_{seed}.jsonl"));
        let spec = PlantedSpec::new(
            &["person", "helmet"],
            "count.person > count.helmet",
            80,
            80,
            seed,
        );
        generate_planted(&spec, &path).unwrap();
        path
    }

    #[test]
    fn pipeline_recovers_planted_rule_behaviour() {
        let dir = tempfile::tempdir().unwrap();
        let input = planted_file(dir.path(), 3);
        let config = RunConfig {
            input: input.display().to_string(),
            report: dir.path().join("r.json").display().to_string(),
            seed: 1,
            iterations: 2000,
            ..RunConfig::default()
        };
        let run = run_pipeline(&config).unwrap();
        assert!(run.report.eval_metrics.auroc >= 0.95, "{:?}", run.report.eval_metrics);
        assert!(config.trace_path().exists());
        assert!(Path::new(&config.report).exists());
        let parsed: EvalReport =
            serde_json::from_str(&std::fs::read_to_string(&config.report).unwrap()).unwrap();
        assert_eq!(parsed.expression, run.report.expression);
    }

    #[test]
    fn evaluate_rule_on_handcrafted_records() {
        // Two violations (more persons than helmets), two compliant.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hand.jsonl");
        let mk = |id: &str, label: u8, person: usize, helmet: usize| {
            let mut detections = Vec::new();
            for k in 0..person {
                detections.push(serde_json::json!({
                    "category": "person",
                    "bbox": [k as f64 * 30.0, 0.0, k as f64 * 30.0 + 20.0, 20.0],
                    "score": 0.9,
                }));
            }
            for k in 0..helmet {
                detections.push(serde_json::json!({
                    "category": "helmet",
                    "bbox": [k as f64 * 30.0, 100.0, k as f64 * 30.0 + 20.0, 120.0],
                    "score": 0.9,
                }));
            }
            serde_json::json!({"image_id": id, "label": label, "detections": detections})
                .to_string()
        };
        let lines = [
            mk("v1", 1, 3, 2),
            mk("v2", 1, 2, 0),
            mk("c1", 0, 2, 2),
            mk("c2", 0, 1, 3),
        ];
        std::fs::write(&path, lines.join("\n")).unwrap();

        let rules = dir.path().join("rules.txt");
        std::fs::write(&rules, "count.person > count.helmet\n").unwrap();

        let config = RunConfig::default();
        let report = evaluate_rule(&rules, &path, &config).unwrap();
        assert_eq!(report.eval_metrics.loss, 0.0);
        assert_eq!(report.eval_metrics.auroc, 1.0);
        assert_eq!(report.generations_run, 0);
    }

    #[test]
    fn evaluate_constant_rule_gives_half_auroc() {
        let dir = tempfile::tempdir().unwrap();
        let input = planted_file(dir.path(), 7);
        let rules = dir.path().join("rules.txt");
        std::fs::write(&rules, "count.person > count.person\n").unwrap();
        let report = evaluate_rule(&rules, &input, &RunConfig::default()).unwrap();
        assert_eq!(report.eval_metrics.auroc, 0.5);
    }

    #[test]
    fn evaluate_rule_lists_all_unknown_features() {
        let dir = tempfile::tempdir().unwrap();
        let input = planted_file(dir.path(), 8);
        let rules = dir.path().join("rules.txt");
        std::fs::write(&rules, "count.dragon > maxscore.wyvern\n").unwrap();
        match evaluate_rule(&rules, &input, &RunConfig::default()) {
            Err(Error::UnknownFeatures(names)) => {
                assert_eq!(names, vec!["count.dragon", "maxscore.wyvern"]);
            }
            other => panic!("expected unknown features, got {other:?}"),
        }
    }

    #[test]
    fn rule_reevaluated_on_search_manifest_matches_report() {
        let dir = tempfile::tempdir().unwrap();
        let input = planted_file(dir.path(), 11);
        let config = RunConfig {
            input: input.display().to_string(),
            report: dir.path().join("r.json").display().to_string(),
            seed: 4,
            ..RunConfig::default()
        };
        let run = run_pipeline(&config).unwrap();

        let (search_path, _) =
            write_split_manifests(&config, &dir.path().join("split")).unwrap();
        let rules = dir.path().join("best.txt");
        std::fs::write(&rules, format!("{}\n", run.report.expression)).unwrap();
        let re = evaluate_rule(&rules, &search_path, &config).unwrap();
        assert_eq!(re.eval_metrics.auroc, run.report.search_metrics.auroc);
        assert_eq!(re.eval_metrics.loss, run.report.search_metrics.loss);
        assert_eq!(re.eval_metrics.complexity, run.report.search_metrics.complexity);
    }

    #[test]
    fn split_manifests_partition_the_input() {
        let dir = tempfile::tempdir().unwrap();
        let input = planted_file(dir.path(), 15);
        let config = RunConfig {
            input: input.display().to_string(),
            search_scale: 0.3,
            seed: 2,
            ..RunConfig::default()
        };
        let (s, e) = write_split_manifests(&config, &dir.path().join("m")).unwrap();
        let sd = load_dataset(&s, 0.05).unwrap();
        let ed = load_dataset(&e, 0.05).unwrap();
        let full = load_dataset(&input, 0.05).unwrap();
        assert_eq!(sd.records.len() + ed.records.len(), full.records.len());
        let ids: HashSet<_> = sd
            .records
            .iter()
            .chain(&ed.records)
            .map(|r| r.image_id.clone())
            .collect();
        assert_eq!(ids.len(), full.records.len());
    }
}
