mod common;

use iqaoa_sat::cnf::{
    default_params, divergence, eval_clause, g_cost, h_count, max_divergence, parse_dimacs, satisfied_weight,
    Assignment, PackedFormula,
};
use iqaoa_sat::qsim::assignment_of_rank;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn formula_strategy() -> impl Strategy<Value = iqaoa_sat::CnfFormula> {
    (any::<u64>(), 1usize..=10, 0usize..=30).prop_map(|(seed, n, m)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        common::random_formula(&mut rng, n, m, 3)
    })
}

proptest! {
    #[test]
    fn dimacs_round_trip(f in formula_strategy()) {
        let back = parse_dimacs(&f.to_dimacs()).unwrap();
        prop_assert_eq!(back.num_vars(), f.num_vars());
        prop_assert_eq!(back.num_clauses(), f.num_clauses());
        for (a, b) in back.clauses().iter().zip(f.clauses()) {
            prop_assert_eq!(a.literals(), b.literals());
        }
    }

    #[test]
    fn reversing_variables_twice_is_identity(f in formula_strategy()) {
        prop_assert_eq!(f.reverse_variables().reverse_variables(), f);
    }

    #[test]
    fn h_plus_satisfied_is_m(f in formula_strategy(), rank in any::<u64>()) {
        let a = assignment_of_rank(rank & ((1 << f.num_vars()) - 1), f.num_vars());
        let sat = f.clauses().iter().filter(|c| eval_clause(c, &a)).count();
        prop_assert_eq!(h_count(&f, &a) + sat, f.num_clauses());
    }

    #[test]
    fn divergence_zero_iff_h_zero(f in formula_strategy(), rank in any::<u64>()) {
        prop_assume!(f.num_clauses() >= 1);
        let a = assignment_of_rank(rank & ((1 << f.num_vars()) - 1), f.num_vars());
        prop_assert_eq!(divergence(&f, &a) == 0, h_count(&f, &a) == 0);
    }

    #[test]
    fn g_orders_by_h_first(f in formula_strategy(), r1 in any::<u64>(), r2 in any::<u64>()) {
        let params = default_params(&f);
        prop_assert!(params.dominates(f.num_clauses()));
        let mask = (1u64 << f.num_vars()) - 1;
        let (a1, a2) = (assignment_of_rank(r1 & mask, f.num_vars()), assignment_of_rank(r2 & mask, f.num_vars()));
        if h_count(&f, &a1) < h_count(&f, &a2) {
            prop_assert!(g_cost(&f, &a1, &params) < g_cost(&f, &a2, &params));
        }
    }

    #[test]
    fn packed_matches_reference(f in formula_strategy(), rank in any::<u64>()) {
        let rank = rank & ((1 << f.num_vars()) - 1);
        let a = assignment_of_rank(rank, f.num_vars());
        let packed = PackedFormula::new(&f);
        let params = default_params(&f);
        prop_assert_eq!(packed.h_and_divergence(rank), (h_count(&f, &a) as u32, divergence(&f, &a)));
        prop_assert_eq!(packed.g(rank, &params), g_cost(&f, &a, &params));
    }
}

#[test]
fn g_hierarchy_exhaustive_over_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let f = common::random_formula(&mut rng, 6, 25, 3);
        let params = default_params(&f);
        let costs: Vec<(usize, f64)> = (0..1u64 << 6)
            .map(|r| {
                let a = assignment_of_rank(r, 6);
                (h_count(&f, &a), g_cost(&f, &a, &params))
            })
            .collect();
        for &(h1, g1) in &costs {
            for &(h2, g2) in &costs {
                if h1 < h2 {
                    assert!(g1 < g2);
                }
            }
        }
    }
}

#[test]
fn unit_weight_identity_exhaustive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [1usize, 4, 8, 12] {
        let f = common::random_formula(&mut rng, n, 4 * n, 3);
        for r in 0..1u64 << n {
            let a = assignment_of_rank(r, n);
            assert_eq!(satisfied_weight(&f, &a) + h_count(&f, &a) as f64, f.num_clauses() as f64);
        }
    }
}

#[test]
fn worst_single_violation_stays_below_two_violations() {
    for m in [1usize, 10, 91] {
        let dmax = max_divergence(m) as f64;
        let zeta = dmax + 1.0;
        assert!(zeta + ((m * m) as f64) < 2.0 * zeta);
    }
}

#[test]
fn widget_solution_is_zero_cost() {
    let f = common::widget();
    let a = Assignment::from_bits(&[1, 1, 1, 0, 1]);
    assert_eq!(h_count(&f, &a), 0);
    assert_eq!(g_cost(&f, &a, &default_params(&f)), 0.0);
}
