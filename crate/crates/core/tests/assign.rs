mod oracles;

use oracles::permutation_min_cost;
use proptest::prelude::*;
use radtrack_core::assign::{assign, CostMatrix};
use radtrack_core::sim::oracle_assignment;

fn arb_matrix(max: usize) -> impl Strategy<Value = CostMatrix> {
    (0..=max, 0..=max).prop_flat_map(|(n, m)| {
        proptest::collection::vec(0.0f64..10.0, n * m).prop_map(move |data| CostMatrix::new(n, m, data))
    })
}

/// Small integer costs produce many ties.
fn arb_tied_matrix(max: usize) -> impl Strategy<Value = CostMatrix> {
    (1..=max, 1..=max).prop_flat_map(|(n, m)| {
        proptest::collection::vec(0u8..4, n * m)
            .prop_map(move |data| CostMatrix::new(n, m, data.into_iter().map(f64::from).collect()))
    })
}

fn check_structure(costs: &CostMatrix, pairs: &[(usize, usize)], unmatched_rows: &[usize], unmatched_cols: &[usize]) {
    let mut rows: Vec<usize> = pairs.iter().map(|p| p.0).chain(unmatched_rows.iter().copied()).collect();
    let mut cols: Vec<usize> = pairs.iter().map(|p| p.1).chain(unmatched_cols.iter().copied()).collect();
    rows.sort();
    cols.sort();
    assert_eq!(rows, (0..costs.rows()).collect::<Vec<_>>());
    assert_eq!(cols, (0..costs.cols()).collect::<Vec<_>>());
}

#[test]
fn permutation_search_sanity() {
    let c = CostMatrix::new(2, 3, vec![4.0, 1.0, 3.0, 2.0, 0.0, 5.0]);
    assert_eq!(permutation_min_cost(&c), 3.0);
    let m = assign(&c, f64::INFINITY);
    assert_eq!(m.pairs, vec![(0, 1), (1, 0)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ungated_matches_permutation_search(costs in arb_matrix(7)) {
        let m = assign(&costs, f64::INFINITY);
        check_structure(&costs, &m.pairs, &m.unmatched_rows, &m.unmatched_cols);
        prop_assert_eq!(m.pairs.len(), costs.rows().min(costs.cols()));
        prop_assert_eq!(m.total_cost(&costs), permutation_min_cost(&costs));
    }

    #[test]
    fn ties_still_reach_the_optimum(costs in arb_tied_matrix(6)) {
        let m = assign(&costs, f64::INFINITY);
        prop_assert_eq!(m.total_cost(&costs), permutation_min_cost(&costs));
    }

    #[test]
    fn gated_matches_exhaustive_partial_search(costs in arb_matrix(6), gate in 0.5f64..9.0) {
        let m = assign(&costs, gate);
        check_structure(&costs, &m.pairs, &m.unmatched_rows, &m.unmatched_cols);
        prop_assert!(m.pairs.iter().all(|&(r, c)| costs.get(r, c) <= gate));
        let oracle = oracle_assignment(&costs, gate).unwrap();
        let objective = |pairs: usize, cost: f64| {
            cost + 0.5 * gate * (costs.rows() + costs.cols() - 2 * pairs) as f64
        };
        let got = objective(m.pairs.len(), m.total_cost(&costs));
        let want = objective(oracle.pairs.len(), oracle.cost);
        prop_assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn is_deterministic(costs in arb_matrix(6), gate in 0.5f64..9.0) {
        prop_assert_eq!(assign(&costs, gate), assign(&costs, gate));
    }
}
