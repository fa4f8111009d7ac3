//! Command-line front end: `search`, `eval`, `synth`, and `split`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use symsearch::harness::synth::{generate_planted, DetectionNoise, PlantedSpec};
use symsearch::harness::{
    evaluate_rule, run_pipeline, write_split_manifests, LlmMode, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "symsearch",
    about = "Discover interpretable logical rules that recognize events from object-detection records",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run the full pipeline: load, split, search, evaluate, report.
    Search(SearchArgs),
    /// Apply a rule file to a dataset without searching.
    Eval(EvalArgs),
    /// Generate a synthetic planted-rule dataset.
    Synth(SynthArgs),
    /// Write the search/eval split as two JSON-lines manifests.
    Split(SplitArgs),
}

/// Flags shared by subcommands that read a dataset and a config file.
#[derive(Args)]
struct CommonArgs {
    /// Config file in flat key=value form; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Input dataset (JSON-lines detection records).
    #[arg(long)]
    input: Option<String>,

    /// Drop detections scoring below this at load time.
    #[arg(long)]
    score_threshold: Option<f64>,

    /// Report output path.
    #[arg(long)]
    report: Option<String>,

    /// RNG seed for split and search.
    #[arg(long)]
    seed: Option<u64>,

    /// IoU threshold for pairwise overlap features.
    #[arg(long)]
    iou_threshold: Option<f64>,

    /// Complexity penalty per expression node.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Fraction of each label allocated to the search split.
    #[arg(long)]
    search_scale: Option<f64>,

    /// Population size (default: twice the category count, floor 8).
    #[arg(long)]
    population: Option<usize>,

    /// Per-slot crossover probability.
    #[arg(long)]
    crossover: Option<f64>,

    /// Per-offspring mutation probability.
    #[arg(long)]
    mutation: Option<f64>,

    /// Generation budget.
    #[arg(long)]
    iterations: Option<usize>,

    /// Parents selected per generation.
    #[arg(long)]
    top_k: Option<usize>,

    /// Expression depth bound.
    #[arg(long)]
    max_depth: Option<usize>,

    /// Generations without improvement before stopping.
    #[arg(long)]
    patience: Option<usize>,

    /// Generations between guidance calls.
    #[arg(long)]
    guidance_period: Option<usize>,

    /// Suggestion source.
    #[arg(long, value_parser = ["off", "mock", "http"])]
    llm_mode: Option<String>,

    /// Chat-completion endpoint URL (http mode).
    #[arg(long)]
    llm_endpoint: Option<String>,

    /// Model name sent to the endpoint (http mode).
    #[arg(long)]
    llm_model: Option<String>,

    /// Suggestions kept per guidance call.
    #[arg(long)]
    max_suggestions: Option<usize>,

    /// Per-attempt provider timeout in seconds.
    #[arg(long)]
    llm_timeout_s: Option<u64>,

    /// File with one reasoning step per line.
    #[arg(long)]
    cot_template: Option<String>,

    /// Event name used in reports and prompts (default: input file stem).
    #[arg(long)]
    event: Option<String>,

    /// Scene description for the prompt's context section.
    #[arg(long)]
    scene: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Rule file: one expression per line, first non-empty line is applied.
    #[arg(long)]
    rules: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,

    /// Comma-separated category names.
    #[arg(long, value_delimiter = ',')]
    categories: Vec<String>,

    /// Planted rule over the categories' features.
    #[arg(long)]
    rule: String,

    #[arg(long, default_value_t = 500)]
    n_pos: usize,

    #[arg(long, default_value_t = 500)]
    n_neg: usize,

    /// Independent label flip probability, in [0, 0.5).
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,

    /// Per-category probability of one spurious detection.
    #[arg(long, default_value_t = 0.0)]
    spurious: f64,

    /// Per-detection drop probability.
    #[arg(long, default_value_t = 0.0)]
    miss: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// IoU threshold used by the rule's overlap features.
    #[arg(long, default_value_t = 0.1)]
    iou_threshold: f64,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Fraction of each label allocated to the search split.
    #[arg(long)]
    search_scale: Option<f64>,

    /// Manifest path prefix; writes <prefix>.search.jsonl and <prefix>.eval.jsonl.
    #[arg(long)]
    out_prefix: PathBuf,
}

fn base_config(common: &CommonArgs) -> symsearch::Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| symsearch::Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            RunConfig::from_kv(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = &common.input {
        config.input = v.clone();
    }
    if let Some(v) = common.score_threshold {
        config.score_threshold = v;
    }
    if let Some(v) = &common.report {
        config.report = v.clone();
    }
    if let Some(v) = common.seed {
        config.seed = v;
    }
    if let Some(v) = common.iou_threshold {
        config.iou_threshold = v;
    }
    if let Some(v) = common.lambda {
        config.lambda = v;
    }
    Ok(config)
}

fn run_search(args: &SearchArgs) -> symsearch::Result<()> {
    let mut config = base_config(&args.common)?;
    if let Some(v) = args.search_scale {
        config.search_scale = v;
    }
    if args.population.is_some() {
        config.population = args.population;
    }
    if let Some(v) = args.crossover {
        config.crossover = v;
    }
    if let Some(v) = args.mutation {
        config.mutation = v;
    }
    if let Some(v) = args.iterations {
        config.iterations = v;
    }
    if let Some(v) = args.top_k {
        config.top_k = v;
    }
    if let Some(v) = args.max_depth {
        config.max_depth = v;
    }
    if let Some(v) = args.patience {
        config.patience = v;
    }
    if let Some(v) = args.guidance_period {
        config.guidance_period = v;
    }
    if let Some(v) = &args.llm_mode {
        config.llm_mode = v.parse::<LlmMode>()?;
    }
    if let Some(v) = &args.llm_endpoint {
        config.llm_endpoint = v.clone();
    }
    if let Some(v) = &args.llm_model {
        config.llm_model = v.clone();
    }
    if let Some(v) = args.max_suggestions {
        config.max_suggestions = v;
    }
    if let Some(v) = args.llm_timeout_s {
        config.llm_timeout_s = v;
    }
    if args.cot_template.is_some() {
        config.cot_template = args.cot_template.clone();
    }
    if args.event.is_some() {
        config.event = args.event.clone();
    }
    if args.scene.is_some() {
        config.scene = args.scene.clone();
    }
    if config.input.is_empty() {
        return Err(symsearch::Error::Config(
            "no input dataset: pass --input or set it in the config file".into(),
        ));
    }

    let run = run_pipeline(&config)?;
    print!("{}", run.report.summary());
    println!("report          {}", config.report);
    println!("trace           {}", config.trace_path().display());
    Ok(())
}

fn run_eval(args: &EvalArgs) -> symsearch::Result<()> {
    let config = base_config(&args.common)?;
    if config.input.is_empty() {
        return Err(symsearch::Error::Config(
            "no input dataset: pass --input or set it in the config file".into(),
        ));
    }
    let report = evaluate_rule(&args.rules, Path::new(&config.input), &config)?;
    print!("{}", report.summary());
    if let Some(parent) = Path::new(&config.report).parent() {
        if !parent.as_os_str().is_empty() && !parent.exists() {
            std::fs::create_dir_all(parent).ok();
        }
    }
    std::fs::write(&config.report, report.to_json()).map_err(|e| symsearch::Error::Io {
        path: config.report.clone(),
        source: e,
    })?;
    println!("report          {}", config.report);
    Ok(())
}

fn run_synth(args: &SynthArgs) -> symsearch::Result<()> {
    let spec = PlantedSpec {
        categories: args.categories.clone(),
        rule_text: args.rule.clone(),
        n_pos: args.n_pos,
        n_neg: args.n_neg,
        label_noise: args.label_noise,
        detection_noise: DetectionNoise {
            spurious_rate: args.spurious,
            miss_rate: args.miss,
        },
        seed: args.seed,
        iou_threshold: args.iou_threshold,
    };
    let dataset = generate_planted(&spec, &args.out)?;
    println!(
        "wrote {} records ({} positive, {} negative) to {}",
        dataset.records.len(),
        dataset.count_label(1),
        dataset.count_label(0),
        args.out.display()
    );
    Ok(())
}

fn run_split(args: &SplitArgs) -> symsearch::Result<()> {
    let mut config = base_config(&args.common)?;
    if let Some(v) = args.search_scale {
        config.search_scale = v;
    }
    if config.input.is_empty() {
        return Err(symsearch::Error::Config(
            "no input dataset: pass --input or set it in the config file".into(),
        ));
    }
    let (search_path, eval_path) = write_split_manifests(&config, &args.out_prefix)?;
    println!("search manifest {}", search_path.display());
    println!("eval manifest   {}", eval_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Search(args) => run_search(args).map_err(|e| format!("search: {e}")),
        Command::Eval(args) => run_eval(args).map_err(|e| format!("eval: {e}")),
        Command::Synth(args) => run_synth(args).map_err(|e| format!("synth: {e}")),
        Command::Split(args) => run_split(args).map_err(|e| format!("split: {e}")),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
