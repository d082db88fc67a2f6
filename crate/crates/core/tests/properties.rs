use proptest::prelude::*;

use atsp_lab::assignment::{solve_ap, solve_ap_warm, Restriction, TIGHT_TOLERANCE};
use atsp_lab::bnb::{solve_bnb, BnbOptions};
use atsp_lab::exact::{count_matchings_below, held_karp};
use atsp_lab::tour::{cycle_cover, is_single_cycle, karp_patch};
use atsp_lab::CostMatrix;

fn restriction(n: usize, edges: &[(usize, usize, bool)]) -> Option<Restriction> {
    let pick = |keep: bool| {
        edges
            .iter()
            .filter(move |e| e.2 == keep)
            .map(move |&(i, j, _)| (i % n, j % n))
            .filter(|(i, j)| i != j)
    };
    Restriction::new(n, pick(true).take(2), pick(false).take(4)).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn optimal_solutions_carry_a_valid_certificate(
        n in 3usize..12,
        seed in any::<u64>(),
        edges in prop::collection::vec((0usize..12, 0usize..12, any::<bool>()), 0..6),
    ) {
        let c = CostMatrix::generate_uniform(n, seed).unwrap();
        let Some(f) = restriction(n, &edges) else { return Ok(()) };
        if let Ok(sol) = solve_ap(&c, &f) {
            prop_assert!(sol.verify(&c, &f, TIGHT_TOLERANCE).is_ok());
            prop_assert!(f.admits(&sol.assignment));
            prop_assert_eq!(sol.value, c.permutation_cost(&sol.assignment));
        }
    }

    #[test]
    fn warm_start_matches_cold_solve(n in 4usize..14, seed in any::<u64>(), i in 0usize..14, j in 0usize..14) {
        let c = CostMatrix::generate_uniform(n, seed).unwrap();
        let root = solve_ap(&c, &Restriction::empty(n)).unwrap();
        let e = (i % n, j % n);
        prop_assume!(e.0 != e.1);
        let child = Restriction::empty(n).with_forced_out(e).unwrap();
        let cold = solve_ap(&c, &child).unwrap();
        let warm = solve_ap_warm(&c, &child, &root).unwrap();
        prop_assert!((cold.value - warm.value).abs() < 1e-9);
        prop_assert!(warm.value >= root.value - 1e-9);
    }

    #[test]
    fn row_shift_preserves_optimal_matchings(n in 3usize..10, seed in any::<u64>(), row in 0usize..10) {
        let c = CostMatrix::generate_uniform(n, seed).unwrap();
        let row = row % n;
        let shift = 0.25;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 0.0 } else { c.cost(i, j) * 0.5 + if i == row { shift } else { 0.0 } }).collect())
            .collect();
        let shifted = CostMatrix::from_rows(&rows).unwrap();
        let f = Restriction::empty(n);
        let a = solve_ap(&c, &f).unwrap();
        let b = solve_ap(&shifted, &f).unwrap();
        // Halving and shifting a row changes every matching the same way.
        prop_assert!((b.value - (a.value * 0.5 + shift)).abs() < 1e-9);
        prop_assert!((shifted.permutation_cost(&a.assignment) - b.value).abs() < 1e-9);
    }

    #[test]
    fn matching_counts_grow_with_the_threshold(n in 3usize..8, seed in any::<u64>(), t in 0.0f64..2.0) {
        let c = CostMatrix::generate_uniform(n, seed).unwrap();
        let lo = count_matchings_below(&c, t).unwrap();
        let hi = count_matchings_below(&c, t + 0.25).unwrap();
        prop_assert!(lo <= hi);
    }

    #[test]
    fn patched_tour_bounds_the_optimum(n in 3usize..11, seed in any::<u64>()) {
        let c = CostMatrix::generate_uniform(n, seed).unwrap();
        let sol = solve_ap(&c, &Restriction::empty(n)).unwrap();
        let tour = karp_patch(&c, &sol);
        let (opt, _) = held_karp(&c).unwrap();
        prop_assert!(is_single_cycle(&tour.successor()));
        prop_assert!(tour.cost >= opt - 1e-12);
        prop_assert!(opt >= sol.value - 1e-12);
        prop_assert!(cycle_cover(&sol).count() >= 1);
    }

    #[test]
    fn file_round_trip_is_exact(n in 3usize..9, seed in any::<u64>(), range in 1u64..50) {
        let c = CostMatrix::generate_integer_scaled(n, range, seed).unwrap();
        let back = CostMatrix::parse(&c.to_file_string()).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn bnb_matches_held_karp_at_twelve() {
    for seed in 0..50 {
        let c = CostMatrix::generate_uniform(12, seed).unwrap();
        let (opt, _) = held_karp(&c).unwrap();
        let run = solve_bnb(&c, &BnbOptions::default()).unwrap();
        assert!((run.cost - opt).abs() < 1e-9, "seed {seed}");
        assert!(run.nodes_explored >= 1);
    }
}

#[test]
fn bnb_json_round_trip() {
    let c = CostMatrix::generate_uniform(9, 1).unwrap();
    let run = solve_bnb(&c, &BnbOptions::default()).unwrap();
    let text = serde_json::to_string(&run).unwrap();
    let back: atsp_lab::bnb::BnbRun = serde_json::from_str(&text).unwrap();
    assert_eq!(back.nodes_explored, run.nodes_explored);
    assert_eq!(back.options, run.options);
    assert_eq!(back.incumbent_history.len(), run.incumbent_history.len());
}
