//! Evolutionary search over classifier expressions.
//!
//! Generational loop with elitism: the top candidates parent offspring via
//! subtree crossover and point mutation, suggested expressions are injected
//! when a guidance hook is present, and the population is deduplicated by
//! printed form and truncated back to size by rank each generation. The
//! whole trajectory is a deterministic function of the seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expr::{clip_depth, gen_boolean, gen_typed_subtree, Expr};
use crate::features::FeatureSchema;
use crate::fitness::{self, FeatureSet, FitnessConfig, Score};

/// Improvement below this counts as stagnation for the convergence rule.
const IMPROVEMENT_EPSILON: f64 = 1e-6;
/// Generations a perfect (zero-loss) best must persist before stopping.
const PERFECT_LOSS_STREAK: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub population_size: usize,
    pub crossover_factor: f64,
    pub mutation_factor: f64,
    pub max_iterations: usize,
    pub top_k_parents: usize,
    pub max_depth: usize,
    pub convergence_patience: usize,
    pub guidance_period: usize,
    pub rng_seed: u64,
}

impl SearchConfig {
    /// Defaults: population twice the category count (floor 8), crossover
    /// 0.5, mutation 0.3, up to 5000 generations, top-4 parents.
    pub fn for_categories(n_categories: usize, rng_seed: u64) -> Self {
        SearchConfig {
            population_size: (2 * n_categories).max(8),
            crossover_factor: 0.5,
            mutation_factor: 0.3,
            max_iterations: 5000,
            top_k_parents: 4,
            max_depth: 6,
            convergence_patience: 200,
            guidance_period: 50,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(Error::Config("population_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.crossover_factor) {
            return Err(Error::Config("crossover_factor outside [0,1]".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_factor) {
            return Err(Error::Config("mutation_factor outside [0,1]".into()));
        }
        if self.top_k_parents == 0 || self.top_k_parents > self.population_size {
            return Err(Error::Config(
                "top_k_parents must be in 1..=population_size".into(),
            ));
        }
        if self.max_depth == 0
            || self.max_iterations == 0
            || self.convergence_patience == 0
            || self.guidance_period == 0
        {
            return Err(Error::Config(
                "max_depth, max_iterations, convergence_patience and guidance_period must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Seeded,
    Crossover,
    Mutation,
    LlmSuggested,
    Elite,
}

/// An expression plus its score on the search split.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub expr: Expr,
    pub printed: String,
    pub score: Score,
    pub provenance: Provenance,
    pub generation_born: usize,
}

impl Candidate {
    /// Score an expression into a candidate. Every candidate is type-checked
    /// on construction, so ill-typed trees can never enter a population.
    fn new(
        expr: Expr,
        provenance: Provenance,
        generation_born: usize,
        split: &FeatureSet,
        schema: &FeatureSchema,
        fitness_config: &FitnessConfig,
    ) -> Result<Candidate> {
        expr.check_classifier(schema)?;
        let score = fitness::score(&expr, split, schema, fitness_config)?;
        let printed = expr.to_string();
        Ok(Candidate {
            expr,
            printed,
            score,
            provenance,
            generation_born,
        })
    }
}

/// Mutable search state threaded through the generational loop.
#[derive(Debug, Clone)]
pub struct SearchState {
    /// Kept sorted by rank (best first).
    pub population: Vec<Candidate>,
    pub generation: usize,
    pub best_so_far: Candidate,
    /// One `(rule_text, effectiveness)` entry per guidance invocation.
    pub feedback_history: Vec<(String, f64)>,
    rng: ChaCha8Rng,
}

fn sort_by_rank(candidates: &mut [Candidate]) {
    candidates.sort_by(|a, b| {
        fitness::rank_order((&a.score, a.printed.as_str()), (&b.score, b.printed.as_str()))
    });
}

fn ranks_above(a: &Candidate, b: &Candidate) -> bool {
    fitness::rank_order((&a.score, a.printed.as_str()), (&b.score, b.printed.as_str()))
        == std::cmp::Ordering::Less
}

/// Build and score the initial population. Deterministic given the seed.
pub fn initialize(
    schema: &FeatureSchema,
    split: &FeatureSet,
    config: &SearchConfig,
    fitness_config: &FitnessConfig,
) -> Result<SearchState> {
    config.validate()?;
    if schema.is_empty() {
        return Err(Error::EmptySchema);
    }
    if !split.has_both_classes() {
        return Err(Error::SingleClassSplit);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut population = Vec::with_capacity(config.population_size);
    for _ in 0..config.population_size {
        // Ramped depths: plenty of shallow comparisons next to deeper trees.
        let depth = rng.gen_range(1..=config.max_depth);
        let expr = gen_boolean(&mut rng, schema, depth);
        population.push(Candidate::new(
            expr,
            Provenance::Seeded,
            0,
            split,
            schema,
            fitness_config,
        )?);
    }
    sort_by_rank(&mut population);
    let best_so_far = population[0].clone();
    Ok(SearchState {
        population,
        generation: 0,
        best_so_far,
        feedback_history: Vec::new(),
        rng,
    })
}

fn mutate<R: Rng>(expr: &Expr, rng: &mut R, schema: &FeatureSchema, max_depth: usize) -> Expr {
    let nodes = expr.nodes();
    let idx = rng.gen_range(0..nodes.len());
    let replacement = match nodes[idx] {
        Expr::Const(v) => {
            let delta = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            Expr::Const(v + delta)
        }
        picked => gen_typed_subtree(rng, schema, picked.ty(), 2),
    };
    let mutated = expr.with_replaced(idx, &replacement);
    clip_depth(&mutated, max_depth, rng, schema)
}

fn crossover<R: Rng>(
    a: &Expr,
    b: &Expr,
    rng: &mut R,
    schema: &FeatureSchema,
    max_depth: usize,
) -> Expr {
    let a_nodes = a.nodes();
    let idx = rng.gen_range(0..a_nodes.len());
    let want = a_nodes[idx].ty();
    let b_nodes = b.nodes();
    let compatible: Vec<&&Expr> = b_nodes.iter().filter(|n| n.ty() == want).collect();
    // A boolean-rooted tree always holds nodes of both types.
    let donor = compatible[rng.gen_range(0..compatible.len())];
    let child = a.with_replaced(idx, donor);
    clip_depth(&child, max_depth, rng, schema)
}

/// Advance one generation: carry the elite, add injected suggestions, breed
/// offspring from the top parents, then dedup, truncate to size, and pad
/// with clones of ranked survivors.
pub fn step(
    state: &mut SearchState,
    split: &FeatureSet,
    schema: &FeatureSchema,
    config: &SearchConfig,
    fitness_config: &FitnessConfig,
    injected: &[Expr],
) -> Result<()> {
    let generation = state.generation + 1;
    let parent_count = config.top_k_parents.min(state.population.len());
    let mut pool: Vec<Candidate> =
        Vec::with_capacity(config.population_size + injected.len() + 1);

    let mut elite = state.best_so_far.clone();
    elite.provenance = Provenance::Elite;
    pool.push(elite);

    for expr in injected {
        pool.push(Candidate::new(
            expr.clone(),
            Provenance::LlmSuggested,
            generation,
            split,
            schema,
            fitness_config,
        )?);
    }

    for _ in 0..config.population_size.saturating_sub(1) {
        let (expr, provenance) = if state.rng.gen_bool(config.crossover_factor) {
            let i = state.rng.gen_range(0..parent_count);
            let j = state.rng.gen_range(0..parent_count);
            if i == j {
                // Identical parents: crossover degenerates to cloning.
                (state.population[i].expr.clone(), state.population[i].provenance)
            } else {
                (
                    crossover(
                        &state.population[i].expr,
                        &state.population[j].expr,
                        &mut state.rng,
                        schema,
                        config.max_depth,
                    ),
                    Provenance::Crossover,
                )
            }
        } else {
            let i = state.rng.gen_range(0..parent_count);
            (state.population[i].expr.clone(), state.population[i].provenance)
        };
        let (expr, provenance) = if state.rng.gen_bool(config.mutation_factor) {
            (
                mutate(&expr, &mut state.rng, schema, config.max_depth),
                Provenance::Mutation,
            )
        } else {
            (expr, provenance)
        };
        pool.push(Candidate::new(
            expr,
            provenance,
            generation,
            split,
            schema,
            fitness_config,
        )?);
    }

    sort_by_rank(&mut pool);
    let mut seen = std::collections::HashSet::new();
    pool.retain(|c| seen.insert(c.printed.clone()));
    pool.truncate(config.population_size);

    // Pad back to exact size with clones of the ranked survivors.
    let distinct = pool.len();
    let mut fill = 0usize;
    while pool.len() < config.population_size {
        let clone = pool[fill % distinct].clone();
        pool.push(clone);
        fill += 1;
    }

    if ranks_above(&pool[0], &state.best_so_far) {
        state.best_so_far = pool[0].clone();
    }
    state.population = pool;
    state.generation = generation;
    Ok(())
}

/// One row of the per-generation trace. The CSV form carries the columns
/// `generation,best_fitness,best_auroc,best_complexity,injected_count`;
/// the best rule's text is kept in memory for downstream analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub best_auroc: f64,
    pub best_complexity: usize,
    pub injected_count: usize,
    pub best_text: String,
}

/// Render the trace in its CSV interchange form.
pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("generation,best_fitness,best_auroc,best_complexity,injected_count\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.generation, r.best_fitness, r.best_auroc, r.best_complexity, r.injected_count
        ));
    }
    out
}

/// Callback that proposes expressions for injection, given the current best
/// candidate and the feedback history.
pub trait GuidanceHook {
    fn suggest(&mut self, best: &Candidate, feedback: &[(String, f64)]) -> Vec<Expr>;
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: Candidate,
    pub population: Vec<Candidate>,
    pub trace: Vec<TraceRow>,
    /// Score of the best candidate on the held-out evaluation split.
    pub eval_score: Score,
    pub generations_run: usize,
    pub guidance_calls: usize,
    pub feedback_history: Vec<(String, f64)>,
}

fn trace_row(state: &SearchState, injected_count: usize) -> TraceRow {
    TraceRow {
        generation: state.generation,
        best_fitness: state.best_so_far.score.fitness,
        best_auroc: state.best_so_far.score.auroc,
        best_complexity: state.best_so_far.score.complexity,
        injected_count,
        best_text: state.best_so_far.printed.clone(),
    }
}

/// Run the full search loop on a pre-split dataset.
///
/// Stops early when the best fitness has not improved by at least 1e-6 for
/// `convergence_patience` generations, or when a zero-loss best persists for
/// 10 generations. When a guidance hook is present it is invoked every
/// `guidance_period` generations (including generation 0) and its
/// suggestions are injected into the next update.
pub fn run(
    search_split: &FeatureSet,
    eval_split: &FeatureSet,
    schema: &FeatureSchema,
    config: &SearchConfig,
    fitness_config: &FitnessConfig,
    mut guidance: Option<&mut dyn GuidanceHook>,
) -> Result<SearchResult> {
    let mut state = initialize(schema, search_split, config, fitness_config)?;
    let mut trace = vec![trace_row(&state, 0)];
    let mut guidance_calls = 0usize;
    let mut stagnation = 0usize;
    let mut perfect_streak = usize::from(state.best_so_far.score.loss == 0.0);
    let mut previous_fitness = state.best_so_far.score.fitness;

    for _ in 0..config.max_iterations {
        if perfect_streak >= PERFECT_LOSS_STREAK {
            break;
        }
        let injected: Vec<Expr> = match guidance.as_deref_mut() {
            Some(hook) if state.generation % config.guidance_period == 0 => {
                let suggestions = hook.suggest(&state.best_so_far, &state.feedback_history);
                let effectiveness = 1.0 - state.best_so_far.score.loss;
                state
                    .feedback_history
                    .push((state.best_so_far.printed.clone(), effectiveness));
                guidance_calls += 1;
                suggestions
            }
            _ => Vec::new(),
        };
        let injected_count = injected.len();
        step(&mut state, search_split, schema, config, fitness_config, &injected)?;
        trace.push(trace_row(&state, injected_count));

        let best = &state.best_so_far.score;
        if best.fitness - previous_fitness >= IMPROVEMENT_EPSILON {
            stagnation = 0;
        } else {
            stagnation += 1;
        }
        previous_fitness = best.fitness;
        if best.loss == 0.0 {
            perfect_streak += 1;
        } else {
            perfect_streak = 0;
        }
        if stagnation >= config.convergence_patience {
            break;
        }
    }

    let eval_score = fitness::score(
        &state.best_so_far.expr,
        eval_split,
        schema,
        fitness_config,
    )?;
    Ok(SearchResult {
        best: state.best_so_far.clone(),
        generations_run: state.generation,
        population: state.population,
        trace,
        eval_score,
        guidance_calls,
        feedback_history: state.feedback_history,
    })
}
