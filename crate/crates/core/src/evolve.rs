//! Genetic search over circuit angles.
//!
//! Genes are the flattened angles `[beta_1..beta_p, gamma_1..gamma_p]`.
//! Fitness is the negated shaped cost of a shot sample, so the GA maximizes.
//! Every random draw comes from a ChaCha stream keyed by the master seed and a
//! `(purpose, generation, individual)` triple, so results do not depend on how
//! evaluations are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{default_params, CnfFormula, CostParams, PackedFormula};
use crate::qsim::{prepare_state, sample, AngleVector, QubitOrder, BETA_BOUND, GAMMA_BOUND};
use crate::shaping::{cost_histogram, shaped_cost, CostHistogram, QuantileSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub generations: usize,
    pub population: usize,
    pub mutation_prob: f64,
    pub tournament_size: usize,
    pub elites: usize,
    pub shots_per_eval: usize,
    pub depth: usize,
    pub quantile_levels: QuantileSet,
    #[serde(default)]
    pub mutation: MutationOp,
    #[serde(default)]
    pub qubit_order: QubitOrder,
    pub seed: u64,
}

/// How a gene selected for mutation changes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MutationOp {
    /// Redraw uniformly within the gene's bound.
    #[default]
    Reset,
    /// Add a uniform offset in `[-width, width]`, wrapped into the bound.
    Perturb { width: f64 },
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            generations: 150,
            population: 30,
            mutation_prob: 0.25,
            tournament_size: 3,
            elites: 4,
            shots_per_eval: 250,
            depth: 2,
            quantile_levels: QuantileSet::default(),
            mutation: MutationOp::Reset,
            qubit_order: QubitOrder::LsbFirst,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("population must be positive")]
    EmptyPopulation,
    #[error("elites ({elites}) must be smaller than the population ({population})")]
    TooManyElites { elites: usize, population: usize },
    #[error("tournament size must be in 1..={population}, got {size}")]
    BadTournament { size: usize, population: usize },
    #[error("mutation probability {0} outside [0, 1]")]
    BadMutation(f64),
    #[error("shots per evaluation must be positive")]
    NoShots,
    #[error("circuit depth must be positive")]
    ZeroDepth,
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population == 0 {
            return Err(ConfigError::EmptyPopulation);
        }
        if self.elites >= self.population {
            return Err(ConfigError::TooManyElites { elites: self.elites, population: self.population });
        }
        if self.tournament_size == 0 || self.tournament_size > self.population {
            return Err(ConfigError::BadTournament { size: self.tournament_size, population: self.population });
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(ConfigError::BadMutation(self.mutation_prob));
        }
        if self.shots_per_eval == 0 {
            return Err(ConfigError::NoShots);
        }
        if self.depth == 0 {
            return Err(ConfigError::ZeroDepth);
        }
        Ok(())
    }
}

/// Purpose tags for derived random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    Init = 1,
    Eval = 2,
    Breed = 3,
    FinalSample = 4,
}

/// Independent stream for `(kind, generation, index)` under `seed`.
pub fn stream_rng(seed: u64, kind: StreamKind, generation: u64, index: u64) -> ChaCha8Rng {
    debug_assert!(generation < 1 << 32 && index < 1 << 24);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind as u64) << 56 | generation << 24 | index);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub angles: AngleVector,
    pub fitness: Option<f64>,
}

impl Individual {
    pub fn new(angles: AngleVector) -> Self {
        Self { angles, fitness: None }
    }

    pub fn random<R: Rng + ?Sized>(depth: usize, rng: &mut R) -> Self {
        let betas = (0..depth).map(|_| rng.random_range(0.0..BETA_BOUND)).collect();
        let gammas = (0..depth).map(|_| rng.random_range(0.0..GAMMA_BOUND)).collect();
        Self::new(AngleVector::unbounded(betas, gammas))
    }

    fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn in_bounds(&self) -> bool {
        self.angles.betas().iter().all(|b| (0.0..BETA_BOUND).contains(b))
            && self.angles.gammas().iter().all(|g| (0.0..GAMMA_BOUND).contains(g))
    }
}

/// Sampled-objective evaluator with the formula pre-packed in register order.
pub struct Evaluator<'a> {
    n: usize,
    packed: PackedFormula,
    params: CostParams,
    shots: usize,
    levels: &'a QuantileSet,
}

impl<'a> Evaluator<'a> {
    pub fn new(formula: &CnfFormula, cfg: &'a GaConfig) -> Self {
        Self {
            n: formula.num_vars(),
            packed: PackedFormula::new(&cfg.qubit_order.arrange(formula)),
            params: default_params(formula),
            shots: cfg.shots_per_eval,
            levels: &cfg.quantile_levels,
        }
    }

    pub fn histogram<R: Rng + ?Sized>(&self, angles: &AngleVector, rng: &mut R) -> CostHistogram {
        let state = prepare_state(self.n, angles);
        let shots = sample(&state, self.shots, rng);
        CostHistogram::from_counts(shots.ranks().iter().map(|&r| (self.packed.g(r, &self.params), 1)))
    }

    pub fn fitness<R: Rng + ?Sized>(&self, angles: &AngleVector, rng: &mut R) -> f64 {
        -shaped_cost(&self.histogram(angles, rng), self.levels)
    }
}

/// Negated shaped cost of a `cfg.shots_per_eval`-shot sample at `angles`.
pub fn evaluate_fitness<R: Rng + ?Sized>(f: &CnfFormula, angles: &AngleVector, cfg: &GaConfig, rng: &mut R) -> f64 {
    let state = prepare_state(f.num_vars(), angles);
    let shots = sample(&state, cfg.shots_per_eval, rng);
    let arranged = cfg.qubit_order.arrange(f);
    -shaped_cost(&cost_histogram(&arranged, &shots, &default_params(f)), &cfg.quantile_levels)
}

/// Index of the fittest of `k` uniform draws (with replacement); ties go to
/// the lower population index.
pub fn tournament_index<R: Rng + ?Sized>(population: &[Individual], k: usize, rng: &mut R) -> usize {
    assert!(!population.is_empty() && k >= 1);
    let mut best = rng.random_range(0..population.len());
    for _ in 1..k {
        let i = rng.random_range(0..population.len());
        let (si, sb) = (population[i].score(), population[best].score());
        if si > sb || (si == sb && i < best) {
            best = i;
        }
    }
    best
}

pub fn tournament_select<'p, R: Rng + ?Sized>(population: &'p [Individual], k: usize, rng: &mut R) -> &'p Individual {
    &population[tournament_index(population, k, rng)]
}

/// Child with genes `a[..cut] ++ b[cut..]`.
pub fn crossover_at(a: &Individual, b: &Individual, cut: usize) -> Individual {
    let (ga, gb) = (a.angles.genes(), b.angles.genes());
    assert_eq!(ga.len(), gb.len());
    let genes: Vec<f64> = ga[..cut].iter().chain(&gb[cut..]).copied().collect();
    Individual::new(AngleVector::from_genes(&genes))
}

/// Single-point crossover with the cut uniform in `1..=2p-1`.
pub fn crossover<R: Rng + ?Sized>(a: &Individual, b: &Individual, rng: &mut R) -> Individual {
    let len = a.angles.depth() * 2;
    let cut = rng.random_range(1..len);
    crossover_at(a, b, cut)
}

/// Resamples each gene uniformly within its bound with probability `prob`.
pub fn mutate<R: Rng + ?Sized>(ind: &Individual, prob: f64, rng: &mut R) -> Individual {
    mutate_with(ind, prob, MutationOp::Reset, rng)
}

pub fn mutate_with<R: Rng + ?Sized>(ind: &Individual, prob: f64, op: MutationOp, rng: &mut R) -> Individual {
    let depth = ind.angles.depth();
    let mut genes = ind.angles.genes();
    let mut changed = false;
    for (i, g) in genes.iter_mut().enumerate() {
        if rng.random::<f64>() < prob {
            let bound = if i < depth { BETA_BOUND } else { GAMMA_BOUND };
            *g = match op {
                MutationOp::Reset => rng.random_range(0.0..bound),
                MutationOp::Perturb { width } => wrap(*g + rng.random_range(-width..=width), bound),
            };
            changed = true;
        }
    }
    if !changed {
        return ind.clone();
    }
    Individual::new(AngleVector::from_genes(&genes))
}

fn wrap(x: f64, bound: f64) -> f64 {
    let w = x.rem_euclid(bound);
    // rem_euclid may round up to the bound itself
    if w >= bound {
        0.0
    } else {
        w
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub best_so_far_fitness: f64,
    pub best_so_far_angles: AngleVector,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunHistory {
    pub records: Vec<GenerationRecord>,
}

impl RunHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimized {
    pub best_angles: AngleVector,
    pub best_fitness: f64,
    pub history: RunHistory,
    pub final_population: Vec<Individual>,
}

fn evaluate_pending(pop: &mut [Individual], evaluator: &Evaluator<'_>, seed: u64, generation: usize) {
    pop.par_iter_mut().enumerate().filter(|(_, ind)| ind.fitness.is_none()).for_each(|(i, ind)| {
        let mut rng = stream_rng(seed, StreamKind::Eval, generation as u64, i as u64);
        ind.fitness = Some(evaluator.fitness(&ind.angles, &mut rng));
    });
}

/// Population indices ordered by fitness, best first; ties by index.
fn ranking(pop: &[Individual]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| pop[b].score().total_cmp(&pop[a].score()).then(a.cmp(&b)));
    order
}

fn record(generation: usize, pop: &[Individual], best: &Individual) -> GenerationRecord {
    let scores: Vec<f64> = pop.iter().map(Individual::score).collect();
    GenerationRecord {
        generation,
        best_fitness: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_fitness: scores.iter().sum::<f64>() / scores.len() as f64,
        best_so_far_fitness: best.score(),
        best_so_far_angles: best.angles.clone(),
    }
}

/// Runs the generational GA and returns the best recorded individual.
pub fn optimize(f: &CnfFormula, cfg: &GaConfig) -> Result<Optimized, ConfigError> {
    cfg.validate()?;
    let evaluator = Evaluator::new(f, cfg);

    let mut pop: Vec<Individual> = (0..cfg.population)
        .map(|i| Individual::random(cfg.depth, &mut stream_rng(cfg.seed, StreamKind::Init, 0, i as u64)))
        .collect();
    evaluate_pending(&mut pop, &evaluator, cfg.seed, 0);

    let mut best = pop[ranking(&pop)[0]].clone();
    let mut history = RunHistory { records: vec![record(0, &pop, &best)] };

    for generation in 1..=cfg.generations {
        let order = ranking(&pop);
        let mut next: Vec<Individual> = order[..cfg.elites].iter().map(|&i| pop[i].clone()).collect();
        let mut rng = stream_rng(cfg.seed, StreamKind::Breed, generation as u64, 0);
        while next.len() < cfg.population {
            let a = tournament_select(&pop, cfg.tournament_size, &mut rng);
            let b = tournament_select(&pop, cfg.tournament_size, &mut rng);
            let child = crossover(a, b, &mut rng);
            next.push(mutate_with(&child, cfg.mutation_prob, cfg.mutation, &mut rng));
        }
        // children are re-evaluated even when identical to a parent
        next[cfg.elites..].iter_mut().for_each(|ind| ind.fitness = None);
        pop = next;
        evaluate_pending(&mut pop, &evaluator, cfg.seed, generation);

        let top = &pop[ranking(&pop)[0]];
        if top.score() > best.score() {
            best = top.clone();
        }
        history.records.push(record(generation, &pop, &best));
    }

    Ok(Optimized { best_angles: best.angles.clone(), best_fitness: best.score(), history, final_population: pop })
}
