mod common;

use std::f64::consts::{PI, TAU};

use iqaoa_sat::evolve::{crossover, mutate_with, optimize, GaConfig, Individual, MutationOp};
use iqaoa_sat::qsim::AngleVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn individual(depth: usize) -> impl Strategy<Value = Individual> {
    (prop::collection::vec(0.0..PI, depth), prop::collection::vec(0.0..TAU, depth))
        .prop_map(|(b, g)| Individual::new(AngleVector::new(b, g).unwrap()))
}

proptest! {
    #[test]
    fn children_stay_in_bounds(
        (a, b) in (1usize..=4).prop_flat_map(|p| (individual(p), individual(p))),
        seed in any::<u64>(),
        width in 0.01f64..10.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let child = crossover(&a, &b, &mut rng);
        prop_assert!(child.in_bounds());
        prop_assert!(mutate_with(&child, 0.5, MutationOp::Reset, &mut rng).in_bounds());
        let perturb = MutationOp::Perturb { width };
        prop_assert!(mutate_with(&child, 0.5, perturb, &mut rng).in_bounds());
        for (x, (ga, gb)) in child.angles.genes().iter().zip(a.angles.genes().iter().zip(b.angles.genes())) {
            prop_assert!(x == ga || *x == gb);
        }
    }
}

fn small_config(seed: u64) -> GaConfig {
    GaConfig { generations: 12, population: 10, elites: 2, seed, ..GaConfig::default() }
}

#[test]
fn population_and_best_so_far_invariants() {
    let f = common::widget();
    for seed in 0..3 {
        let cfg = small_config(seed);
        let run = optimize(&f, &cfg).unwrap();
        assert_eq!(run.history.len(), cfg.generations + 1);
        assert_eq!(run.final_population.len(), cfg.population);
        assert!(run.final_population.iter().all(|i| i.in_bounds() && i.fitness.is_some()));
        for w in run.history.records.windows(2) {
            assert!(w[1].best_so_far_fitness >= w[0].best_so_far_fitness);
            assert!(w[1].best_fitness >= w[0].best_fitness);
        }
        assert_eq!(run.best_fitness, run.history.records.last().unwrap().best_so_far_fitness);
    }
}

#[test]
fn reproducible_across_thread_counts() {
    let f = common::widget();
    let cfg = small_config(42);
    let run_with = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| optimize(&f, &cfg).unwrap())
    };
    let one = run_with(1);
    let four = run_with(4);
    assert_eq!(one, four);
    assert_eq!(one.best_angles.genes(), four.best_angles.genes());
}

#[test]
fn different_seeds_diverge() {
    let f = common::widget();
    let a = optimize(&f, &small_config(1)).unwrap();
    let b = optimize(&f, &small_config(2)).unwrap();
    assert_ne!(a.history, b.history);
}
