//! Suggestion loop: prompt construction, reply parsing, and providers.
//!
//! The prompt has three labeled sections — scene context, reasoning steps,
//! and prior attempts with effectiveness scores — followed by the current
//! best rule and the reply contract (one expression per line in a fenced
//! block). Provider failures and unparseable replies degrade to an empty
//! suggestion batch; they can never crash the search.

mod provider;

pub use provider::{HttpProvider, MockProvider, ProviderError, SuggestionProvider};

use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::Write as IoWrite;
use std::path::Path;

use crate::error::Result;
use crate::expr::{parse, Expr};
use crate::features::FeatureSchema;
use crate::fitness::FeatureSet;
use crate::search::{Candidate, GuidanceHook};

/// Default chain-of-thought steps; overridable from a template file with one
/// step per line.
pub const DEFAULT_COT_STEPS: [&str; 4] = [
    "Identify which detected entities are relevant to the event.",
    "Hypothesize relations among their counts, scores, areas, and overlaps.",
    "Express each hypothesis as comparisons combined with && / || / !.",
    "Prefer the simplest expressions that could separate event from non-event images.",
];

/// Inputs for one prompt: scene description, entity names, free-text
/// constraints, reasoning steps, and prior `(rule, effectiveness)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptContext {
    pub scene: String,
    pub entities: Vec<String>,
    pub constraints: Vec<String>,
    pub cot_steps: Vec<String>,
    pub feedback: Vec<(String, f64)>,
}

impl PromptContext {
    pub fn new(scene: &str, entities: &[String]) -> Self {
        PromptContext {
            scene: scene.to_string(),
            entities: entities.to_vec(),
            constraints: Vec::new(),
            cot_steps: DEFAULT_COT_STEPS.iter().map(|s| s.to_string()).collect(),
            feedback: Vec::new(),
        }
    }
}

/// A provider reply after parsing: surviving expressions plus per-line
/// rejections.
#[derive(Debug, Clone)]
pub struct SuggestionBatch {
    pub raw_reply: String,
    pub parsed: Vec<Expr>,
    pub rejected: Vec<(String, String)>,
}

impl SuggestionBatch {
    pub fn empty() -> Self {
        SuggestionBatch {
            raw_reply: String::new(),
            parsed: Vec::new(),
            rejected: Vec::new(),
        }
    }
}

/// Render the full prompt. Deterministic in its inputs.
pub fn build_prompt(context: &PromptContext, best_rule: &Expr) -> String {
    let mut p = String::new();

    writeln!(p, "## Scene Context").unwrap();
    writeln!(p, "Scene: {}", context.scene).unwrap();
    writeln!(p, "Entities: {}", context.entities.join(", ")).unwrap();
    if context.constraints.is_empty() {
        writeln!(p, "Constraints: none").unwrap();
    } else {
        writeln!(p, "Constraints:").unwrap();
        for c in &context.constraints {
            writeln!(p, "- {c}").unwrap();
        }
    }
    writeln!(p).unwrap();

    writeln!(p, "## Reasoning Steps").unwrap();
    for (i, s) in context.cot_steps.iter().enumerate() {
        writeln!(p, "{}. {s}", i + 1).unwrap();
    }
    writeln!(p).unwrap();

    writeln!(p, "## Prior Attempts").unwrap();
    if context.feedback.is_empty() {
        writeln!(p, "No prior attempts.").unwrap();
    } else {
        writeln!(p, "rule | effectiveness").unwrap();
        for (rule, alpha) in &context.feedback {
            writeln!(p, "{rule} | {alpha:.4}").unwrap();
        }
    }
    writeln!(p).unwrap();

    writeln!(p, "## Current Best Rule").unwrap();
    writeln!(p, "{best_rule}").unwrap();
    writeln!(p).unwrap();

    writeln!(p, "## Task").unwrap();
    writeln!(
        p,
        "Propose candidate boolean expressions that decide whether the event occurs in an image."
    )
    .unwrap();
    writeln!(
        p,
        "Available features: count.<entity>, maxscore.<entity>, areashare.<entity>, overlap.<a>.<b> for entities listed above."
    )
    .unwrap();
    writeln!(
        p,
        "Operators: + - * / max(,) min(,) on numbers; > >= < <= == comparisons; && || ! on booleans."
    )
    .unwrap();
    writeln!(
        p,
        "Reply with one expression per line inside a single fenced code block."
    )
    .unwrap();
    p
}

/// Extract candidate lines from a reply and parse each against the schema.
///
/// Lines come from the first fenced block when one exists, otherwise from
/// any line that starts like an expression. Total over arbitrary text:
/// failures land in `rejected`, never in an error.
pub fn parse_suggestions(
    raw_reply: &str,
    schema: &FeatureSchema,
    max_suggestions: usize,
) -> SuggestionBatch {
    let lines = candidate_lines(raw_reply);
    let mut parsed = Vec::new();
    let mut rejected = Vec::new();
    for line in lines {
        if parsed.len() >= max_suggestions {
            rejected.push((line, "discarded: max_suggestions reached".to_string()));
            continue;
        }
        match parse(&line, schema) {
            Ok(expr) => parsed.push(expr),
            Err(err) => rejected.push((line, err.to_string())),
        }
    }
    SuggestionBatch {
        raw_reply: raw_reply.to_string(),
        parsed,
        rejected,
    }
}

fn candidate_lines(raw: &str) -> Vec<String> {
    let mut inside = false;
    let mut fenced: Vec<String> = Vec::new();
    let mut saw_fence = false;
    for line in raw.lines() {
        if line.trim_start().starts_with("```") {
            if inside {
                // First fenced block only.
                return fenced;
            }
            inside = true;
            saw_fence = true;
            continue;
        }
        if inside && !line.trim().is_empty() {
            fenced.push(line.trim().to_string());
        }
    }
    if saw_fence {
        // Unterminated fence: take what we saw.
        return fenced;
    }
    raw.lines()
        .map(str::trim)
        .filter(|l| looks_like_expression(l))
        .map(str::to_string)
        .collect()
}

fn looks_like_expression(line: &str) -> bool {
    if line.is_empty() {
        return false;
    }
    let starters = ["(", "!", "count.", "maxscore.", "areashare.", "overlap.", "max(", "min("];
    starters.iter().any(|s| line.starts_with(s)) || line.starts_with(|c: char| c.is_ascii_digit())
}

/// Append-only log of guidance traffic: prompts, raw replies, failures,
/// and rejected lines.
#[derive(Debug, Default)]
pub struct RunLog {
    file: Option<File>,
    pub entries: Vec<String>,
}

impl RunLog {
    pub fn disabled() -> Self {
        RunLog::default()
    }

    pub fn to_file(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| crate::error::Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        Ok(RunLog {
            file: Some(file),
            entries: Vec::new(),
        })
    }

    pub fn record(&mut self, tag: &str, text: &str) {
        let entry = format!("[{tag}] {text}");
        if let Some(f) = self.file.as_mut() {
            let _ = writeln!(f, "{entry}");
        }
        self.entries.push(entry);
    }
}

/// Build the prompt, query the provider, and parse the reply. Provider
/// errors yield an empty batch and a log entry; this function never fails.
pub fn suggest(
    provider: &mut dyn SuggestionProvider,
    context: &PromptContext,
    best_rule: &Expr,
    schema: &FeatureSchema,
    max_suggestions: usize,
    log: &mut RunLog,
) -> SuggestionBatch {
    let prompt = build_prompt(context, best_rule);
    log.record("prompt", &prompt);
    match provider.complete(&prompt) {
        Ok(reply) => {
            log.record("reply", &reply);
            let batch = parse_suggestions(&reply, schema, max_suggestions);
            for (line, reason) in &batch.rejected {
                log.record("rejected", &format!("{line}: {reason}"));
            }
            batch
        }
        Err(err) => {
            log.record("provider-error", &err.to_string());
            SuggestionBatch::empty()
        }
    }
}

/// Adapter that plugs a provider into the search loop as its guidance hook.
pub struct GuidanceEngine<'a> {
    provider: Box<dyn SuggestionProvider + 'a>,
    base_context: PromptContext,
    schema: &'a FeatureSchema,
    max_suggestions: usize,
    pub log: RunLog,
    pub rejected_total: usize,
}

impl<'a> GuidanceEngine<'a> {
    pub fn new(
        provider: Box<dyn SuggestionProvider + 'a>,
        base_context: PromptContext,
        schema: &'a FeatureSchema,
        max_suggestions: usize,
        log: RunLog,
    ) -> Self {
        GuidanceEngine {
            provider,
            base_context,
            schema,
            max_suggestions,
            log,
            rejected_total: 0,
        }
    }
}

impl GuidanceHook for GuidanceEngine<'_> {
    fn suggest(&mut self, best: &Candidate, feedback: &[(String, f64)]) -> Vec<Expr> {
        let mut context = self.base_context.clone();
        context.feedback = feedback.to_vec();
        let batch = suggest(
            self.provider.as_mut(),
            &context,
            &best.expr,
            self.schema,
            self.max_suggestions,
            &mut self.log,
        );
        self.rejected_total += batch.rejected.len();
        batch.parsed
    }
}

/// Deterministic provider for offline runs: ranks single comparisons by
/// balanced accuracy on the split and replies with the top `k`, ignoring
/// the prompt text.
pub fn mock_provider(split: &FeatureSet, schema: &FeatureSchema, k: usize) -> MockProvider {
    MockProvider::from_split(split, schema, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detections::{Dataset, Detection, DetectionRecord};
    use crate::features::{build_schema, extract_all};
    use crate::fitness::FitnessConfig;

    fn schema_for(categories: &[&str]) -> FeatureSchema {
        let records = vec![DetectionRecord {
            image_id: "a".into(),
            label: 1,
            detections: categories
                .iter()
                .map(|c| Detection {
                    category: c.to_string(),
                    bbox: [0.0, 0.0, 10.0, 10.0],
                    score: 0.5,
                })
                .collect(),
        }];
        build_schema(&Dataset::from_records(records, "t"), 0.1)
    }

    fn best_rule(schema: &FeatureSchema) -> Expr {
        parse("count.person > count.helmet", schema).unwrap()
    }

    #[test]
    fn prompt_sections_in_order_with_empty_history_marker() {
        let schema = schema_for(&["person", "helmet", "head"]);
        let ctx = PromptContext::new(
            "construction site safety compliance",
            &["person".into(), "helmet".into(), "head".into()],
        );
        let prompt = build_prompt(&ctx, &best_rule(&schema));
        let scene = prompt.find("## Scene Context").unwrap();
        let cot = prompt.find("## Reasoning Steps").unwrap();
        let feed = prompt.find("## Prior Attempts").unwrap();
        let best = prompt.find("## Current Best Rule").unwrap();
        assert!(scene < cot && cot < feed && feed < best);
        assert!(prompt.contains("No prior attempts."));
        assert!(prompt.contains("Entities: person, helmet, head"));
        assert!(prompt.contains("(count.person > count.helmet)"));
    }

    #[test]
    fn prompt_renders_feedback_pairs_in_order() {
        let schema = schema_for(&["person", "helmet"]);
        let mut ctx = PromptContext::new("scene", &["person".into(), "helmet".into()]);
        ctx.feedback = vec![
            ("(count.person > 1)".into(), 0.61),
            ("(count.helmet < 2)".into(), 0.83),
        ];
        let prompt = build_prompt(&ctx, &best_rule(&schema));
        let first = prompt.find("(count.person > 1) | 0.6100").unwrap();
        let second = prompt.find("(count.helmet < 2) | 0.8300").unwrap();
        assert!(first < second);
        assert!(!prompt.contains("No prior attempts."));
    }

    #[test]
    fn prompt_changes_when_feedback_grows() {
        let schema = schema_for(&["person", "helmet"]);
        let mut ctx = PromptContext::new("scene", &["person".into(), "helmet".into()]);
        let p0 = build_prompt(&ctx, &best_rule(&schema));
        ctx.feedback.push(("(count.person > 1)".into(), 0.5));
        let p1 = build_prompt(&ctx, &best_rule(&schema));
        assert_ne!(p0, p1);
    }

    #[test]
    fn mixed_reply_parses_good_lines_and_rejects_bad() {
        let schema = schema_for(&["person", "helmet"]);
        let reply = "Here are my suggestions:\n```\ncount.person > count.helmet\ncount.person >= 2\n!(count.helmet > 0)\ncount.person >>> 1\n```\n";
        let batch = parse_suggestions(reply, &schema, 8);
        assert_eq!(batch.parsed.len(), 3);
        assert_eq!(batch.rejected.len(), 1);
        assert!(batch.rejected[0].1.contains("parse error"));
    }

    #[test]
    fn unknown_feature_lines_are_rejected_with_reason() {
        let schema = schema_for(&["person"]);
        let reply = "```\ncount.dragon > 1\ncount.person > 1\n```";
        let batch = parse_suggestions(reply, &schema, 8);
        assert_eq!(batch.parsed.len(), 1);
        assert_eq!(batch.rejected.len(), 1);
        assert!(batch.rejected[0].1.contains("count.dragon"));
    }

    #[test]
    fn empty_reply_yields_empty_batch() {
        let schema = schema_for(&["person"]);
        let batch = parse_suggestions("", &schema, 8);
        assert!(batch.parsed.is_empty());
        assert!(batch.rejected.is_empty());
    }

    #[test]
    fn bare_lines_without_fence_are_recognized_by_start_tokens() {
        let schema = schema_for(&["person", "helmet"]);
        let reply = "I think these will work\ncount.person > count.helmet\nmaybe also\n(count.helmet >= 1) && (count.person >= 1)\n";
        let batch = parse_suggestions(reply, &schema, 8);
        assert_eq!(batch.parsed.len(), 2);
        assert_eq!(batch.rejected.len(), 0);
    }

    #[test]
    fn suggestions_are_truncated_at_max() {
        let schema = schema_for(&["person"]);
        let mut reply = String::from("```\n");
        for i in 0..50 {
            reply.push_str(&format!("count.person > {i}\n"));
        }
        reply.push_str("```\n");
        let batch = parse_suggestions(&reply, &schema, 8);
        assert_eq!(batch.parsed.len(), 8);
        // Everything extracted is accounted for.
        assert_eq!(batch.parsed.len() + batch.rejected.len(), 50);
        assert!(batch
            .rejected
            .iter()
            .all(|(_, r)| r.contains("max_suggestions")));
    }

    #[test]
    fn parsed_suggestions_are_schema_resolved(){
        let schema = schema_for(&["person", "helmet"]);
        let reply = "```\ncount.person > count.helmet\nmaxscore.person >= 0.5\n```";
        let batch = parse_suggestions(reply, &schema, 8);
        for e in &batch.parsed {
            e.check_classifier(&schema).unwrap();
        }
    }

    fn planted_split() -> (FeatureSet, FeatureSchema) {
        // Hand-built records where only the count comparison separates:
        // box areas and scores are adversarial to area-share and max-score
        // rules, and boxes never overlap.
        let mut records = Vec::new();
        for i in 0..24 {
            let person = i % 4;
            let helmet = (i / 4) % 4;
            let label = u8::from(person > helmet);
            let (person_size, helmet_size) = if label == 1 { (10.0, 100.0) } else { (100.0, 10.0) };
            let (person_score, helmet_score) = if label == 1 { (0.4, 0.9) } else { (0.9, 0.4) };
            let mut detections = Vec::new();
            for k in 0..person {
                let x = k as f64 * 150.0;
                detections.push(Detection {
                    category: "person".into(),
                    bbox: [x, 0.0, x + person_size, person_size],
                    score: person_score,
                });
            }
            for k in 0..helmet {
                let x = k as f64 * 150.0;
                detections.push(Detection {
                    category: "helmet".into(),
                    bbox: [x, 500.0, x + helmet_size, 500.0 + helmet_size],
                    score: helmet_score,
                });
            }
            records.push(DetectionRecord {
                image_id: format!("img{i}"),
                label,
                detections,
            });
        }
        let ds = Dataset::from_records(records, "t");
        let schema = build_schema(&ds, 0.1);
        let rows = extract_all(&ds, &schema);
        let labels = ds.labels();
        (FeatureSet { rows, labels }, schema)
    }

    #[test]
    fn mock_provider_ranks_planted_comparison_first() {
        let (split, schema) = planted_split();
        let mut provider = mock_provider(&split, &schema, 4);
        let reply = provider.complete("ignored").unwrap();
        let batch = parse_suggestions(&reply, &schema, 4);
        assert_eq!(batch.parsed[0].to_string(), "(count.person > count.helmet)");
    }

    #[test]
    fn mock_provider_k_one_and_deterministic() {
        let (split, schema) = planted_split();
        let mut provider = mock_provider(&split, &schema, 1);
        let r1 = provider.complete("a").unwrap();
        let r2 = provider.complete("b").unwrap();
        assert_eq!(r1, r2);
        let batch = parse_suggestions(&r1, &schema, 8);
        assert_eq!(batch.parsed.len(), 1);
    }

    #[test]
    fn suggest_with_mock_contains_planted_rule() {
        let (split, schema) = planted_split();
        let mut provider = mock_provider(&split, &schema, 8);
        let ctx = PromptContext::new("helmet", &["person".into(), "helmet".into()]);
        let mut log = RunLog::disabled();
        let batch = suggest(
            &mut provider,
            &ctx,
            &best_rule(&schema),
            &schema,
            8,
            &mut log,
        );
        assert!(batch
            .parsed
            .iter()
            .any(|e| e.to_string() == "(count.person > count.helmet)"));
        assert!(log.entries.iter().any(|e| e.starts_with("[prompt]")));
        assert!(log.entries.iter().any(|e| e.starts_with("[reply]")));
    }

    #[test]
    fn unreachable_http_endpoint_degrades_to_empty_batch() {
        let schema = schema_for(&["person"]);
        let mut provider = HttpProvider::new(
            "http://127.0.0.1:9/v1/chat/completions",
            "test-model",
            None,
            std::time::Duration::from_millis(200),
        );
        let ctx = PromptContext::new("scene", &["person".into()]);
        let mut log = RunLog::disabled();
        let batch = suggest(
            &mut provider,
            &ctx,
            &parse("count.person > 0", &schema).unwrap(),
            &schema,
            8,
            &mut log,
        );
        assert!(batch.parsed.is_empty());
        assert!(log
            .entries
            .iter()
            .any(|e| e.starts_with("[provider-error]")));
    }

    #[test]
    fn engine_surfaces_rejections_and_never_fails() {
        struct GarbageProvider;
        impl SuggestionProvider for GarbageProvider {
            fn complete(&mut self, _prompt: &str) -> std::result::Result<String, ProviderError> {
                Ok("```\ncount.dragon > 1\n%%%%\ncount.person > 1\n```".to_string())
            }
        }
        let (split, schema) = planted_split();
        let cfg = crate::search::SearchConfig::for_categories(2, 3);
        let state =
            crate::search::initialize(&schema, &split, &cfg, &FitnessConfig::default()).unwrap();
        let ctx = PromptContext::new("scene", &["person".into(), "helmet".into()]);
        let mut engine = GuidanceEngine::new(
            Box::new(GarbageProvider),
            ctx,
            &schema,
            8,
            RunLog::disabled(),
        );
        let exprs = GuidanceHook::suggest(
            &mut engine,
            &state.best_so_far,
            &[],
        );
        assert_eq!(exprs.len(), 1);
        assert_eq!(engine.rejected_total, 2);
        assert!(engine
            .log
            .entries
            .iter()
            .filter(|e| e.starts_with("[rejected]"))
            .count() == 2);
    }
}
