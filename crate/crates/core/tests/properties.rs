//! Property-based tests: algebraic laws of the measure algebra, the
//! convolution transform and its inverse, order operations, and the
//! graph decomposition checked against a brute-force subset oracle.

use std::collections::BTreeMap;

use proptest::prelude::*;

use nfdesim_core::d_operator::DOperator;
use nfdesim_core::diagnostics::{d_order_compare, positive_part, Relation};
use nfdesim_core::history::{metric_d, sup_distance, HistoryFn};
use nfdesim_core::measures::{Kernel, ScalarMeasure};
use nfdesim_core::structure::{PipeGraph, SingletonPolicy};
use nfdesim_core::Grid;

fn grid() -> Grid {
    Grid::new(0.5, 4.0).unwrap()
}

/// Deduplicated atom measure from (depth, mass) specs.
fn measure_from(grid: Grid, specs: &[(usize, f64)]) -> ScalarMeasure {
    let mut by_depth: BTreeMap<usize, f64> = BTreeMap::new();
    for &(d, m) in specs {
        *by_depth.entry(d).or_insert(0.0) += m;
    }
    let atoms: Vec<(f64, f64)> = by_depth
        .into_iter()
        .filter(|&(_, m)| m != 0.0)
        .map(|(d, m)| (-(d as f64) * grid.step(), m))
        .collect();
    ScalarMeasure::from_atoms(grid, &atoms).unwrap()
}

/// Canonical (depth -> mass, tail) form for comparing measures.
fn canon(m: &ScalarMeasure) -> (BTreeMap<usize, i64>, i64) {
    let quant = |v: f64| (v * 1e12).round() as i64;
    let mut atoms = BTreeMap::new();
    for &(d, mass) in m.atoms() {
        let q = quant(mass);
        if q != 0 {
            atoms.insert(d, q);
        }
    }
    (atoms, quant(m.tail()))
}

fn atom_specs(max_depth: usize, max_len: usize) -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec((0..=max_depth, -0.5..0.5f64), 0..=max_len)
}

fn history_samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n..=n)
}

/// Contractive 1x1 kernel with atoms strictly in the past.
fn contractive_scalar_kernel() -> impl Strategy<Value = Kernel> {
    prop::collection::vec((1..=8usize, -0.5..0.5f64), 1..=3).prop_map(|specs| {
        let g = grid();
        let mut m = measure_from(g, &specs);
        let tv = m.total_variation();
        if tv > 0.8 {
            m = m.scale(0.8 / tv);
        }
        Kernel::from_entries(1, g, vec![(0, 0, m)]).unwrap()
    })
}

proptest! {
    // -------------------------------------------------------- measures

    #[test]
    fn convolution_commutes(a in atom_specs(8, 4), b in atom_specs(8, 4)) {
        let g = grid();
        let (ma, mb) = (measure_from(g, &a), measure_from(g, &b));
        let ab = ma.convolve(&mb).unwrap();
        let ba = mb.convolve(&ma).unwrap();
        prop_assert_eq!(canon(&ab), canon(&ba));
    }

    #[test]
    fn convolution_associates_inside_the_window(
        a in atom_specs(2, 3),
        b in atom_specs(2, 3),
        c in atom_specs(2, 3),
    ) {
        // Depths capped at 2 so no three-fold product can cross the
        // depth-8 horizon: associativity is then exact on bodies.
        let g = grid();
        let (ma, mb, mc) = (measure_from(g, &a), measure_from(g, &b), measure_from(g, &c));
        let left = ma.convolve(&mb).unwrap().convolve(&mc).unwrap();
        let right = ma.convolve(&mb.convolve(&mc).unwrap()).unwrap();
        prop_assert_eq!(canon(&left), canon(&right));
    }

    #[test]
    fn convolution_totals_multiply(a in atom_specs(8, 4), b in atom_specs(8, 4)) {
        // Even when products fall past the horizon into the declared
        // tail, the signed total is exactly multiplicative.
        let g = grid();
        let (ma, mb) = (measure_from(g, &a), measure_from(g, &b));
        let ab = ma.convolve(&mb).unwrap();
        prop_assert!((ab.total_full() - ma.total_full() * mb.total_full()).abs() < 1e-12);
    }

    #[test]
    fn variation_is_submultiplicative(a in atom_specs(8, 4), b in atom_specs(8, 4)) {
        let g = grid();
        let (ma, mb) = (measure_from(g, &a), measure_from(g, &b));
        let ab = ma.convolve(&mb).unwrap();
        prop_assert!(
            ab.total_variation_full()
                <= ma.total_variation_full() * mb.total_variation_full() + 1e-12
        );
    }

    // --------------------------------------------------------- history

    #[test]
    fn metric_is_a_bounded_symmetric_divergence(
        xs in history_samples(9),
        ys in history_samples(9),
    ) {
        let g = grid();
        let x = HistoryFn::from_samples(g, vec![xs], vec![0.0]).unwrap();
        let y = HistoryFn::from_samples(g, vec![ys], vec![0.0]).unwrap();
        let dxy = metric_d(&x, &y).unwrap();
        let dyx = metric_d(&y, &x).unwrap();
        prop_assert!((dxy - dyx).abs() < 1e-12);
        prop_assert!(dxy >= 0.0 && dxy <= 1.0);
        prop_assert!(metric_d(&x, &x).unwrap() == 0.0);
        // The metric is dominated by the squashed sup distance.
        let sup = sup_distance(&x, &y).unwrap();
        prop_assert!(dxy <= sup / (1.0 + sup) + 1e-12);
    }

    #[test]
    fn shift_composes(
        xs in history_samples(9),
        k1 in 0..4usize,
        k2 in 0..4usize,
    ) {
        let g = grid();
        let x = HistoryFn::from_samples(g, vec![xs], vec![0.25]).unwrap();
        let s1 = -(k1 as f64) * g.step();
        let s2 = -(k2 as f64) * g.step();
        let two_hops = x.shift(s1).unwrap().shift(s2).unwrap();
        let one_hop = x.shift(s1 + s2).unwrap();
        prop_assert!(sup_distance(&two_hops, &one_hop).unwrap() < 1e-12);
    }

    // ------------------------------------------------------ d_operator

    #[test]
    fn transform_is_linear(
        nu in contractive_scalar_kernel(),
        xs in history_samples(9),
        ys in history_samples(9),
        k in -2.0..2.0f64,
    ) {
        let g = grid();
        let op = DOperator::new(nu).unwrap();
        let x = HistoryFn::from_samples(g, vec![xs], vec![0.5]).unwrap();
        let y = HistoryFn::from_samples(g, vec![ys], vec![-0.5]).unwrap();
        let lhs = op.apply_dhat(&x.add(&y).unwrap()).unwrap();
        let rhs = op.apply_dhat(&x).unwrap().add(&op.apply_dhat(&y).unwrap()).unwrap();
        prop_assert!(sup_distance(&lhs, &rhs).unwrap() < 1e-12);

        let lhs = op.apply_dhat(&x.scale(k)).unwrap();
        let rhs = op.apply_dhat(&x).unwrap().scale(k);
        prop_assert!(sup_distance(&lhs, &rhs).unwrap() < 1e-12);
    }

    #[test]
    fn transform_round_trips_both_ways(
        nu in contractive_scalar_kernel(),
        xs in history_samples(9),
    ) {
        let g = grid();
        let op = DOperator::new(nu).unwrap();
        let c = op.contraction();
        let x = HistoryFn::from_samples(g, vec![xs], vec![0.25]).unwrap();

        // Forward then back.
        let h = op.apply_dhat(&x).unwrap();
        let x_back = op.invert_dhat(&h, 1e-12).unwrap();
        prop_assert!(sup_distance(&x_back, &x).unwrap() < 1e-9);

        // Back then forward, with the geometric gain bound.
        let inv = op.invert_dhat(&x, 1e-12).unwrap();
        let h_back = op.apply_dhat(&inv).unwrap();
        prop_assert!(sup_distance(&h_back, &x).unwrap() < 1e-9);
        prop_assert!(inv.sup_norm() <= x.sup_norm() / (1.0 - c) + 1e-9);
    }

    #[test]
    fn inverse_preserves_positivity_for_nonnegative_kernels(
        specs in prop::collection::vec((1..=8usize, 0.0..0.4f64), 1..=3),
        xs in prop::collection::vec(0.0..2.0f64, 9..=9),
    ) {
        let g = grid();
        let mut m = measure_from(g, &specs);
        let tv = m.total_variation();
        if tv > 0.8 {
            m = m.scale(0.8 / tv);
        }
        let nu = Kernel::from_entries(1, g, vec![(0, 0, m)]).unwrap();
        let op = DOperator::new(nu).unwrap();
        let h = HistoryFn::from_samples(g, vec![xs], vec![0.0]).unwrap();
        let x = op.invert_dhat(&h, 1e-12).unwrap();
        for i in 0..g.samples() {
            prop_assert!(x.samples(0)[i] >= -1e-10);
        }
        prop_assert!(x.pre(0) >= -1e-10);
    }

    #[test]
    fn head_adjustment_hits_its_target(
        nu in contractive_scalar_kernel(),
        xs in history_samples(9),
        target in -2.0..2.0f64,
    ) {
        let g = grid();
        let op = DOperator::new(nu).unwrap();
        let x = HistoryFn::from_samples(g, vec![xs], vec![0.0]).unwrap();
        let adjusted = op.adjust_head(&x, &[target]).unwrap();
        let d = op.apply_d(&adjusted).unwrap();
        prop_assert!((d[0] - target).abs() < 1e-10);
    }

    // ----------------------------------------------------- diagnostics

    #[test]
    fn positive_part_is_an_idempotent_upper_bound(
        nu in contractive_scalar_kernel(),
        xs in history_samples(9),
    ) {
        let g = grid();
        let op = DOperator::new(nu).unwrap();
        let x = HistoryFn::from_samples(g, vec![xs], vec![0.3]).unwrap();
        let pp = positive_part(&op, &x).unwrap();

        // Dominates x and dominates zero, in the transform order.
        let zero = HistoryFn::constant(g, &[0.0]);
        let vs_x = d_order_compare(&op, &x, &pp).unwrap();
        prop_assert!(matches!(vs_x.relation, Relation::Le | Relation::Equal));
        let vs_zero = d_order_compare(&op, &zero, &pp).unwrap();
        prop_assert!(matches!(vs_zero.relation, Relation::Le | Relation::Equal));

        // Idempotent.
        let pp2 = positive_part(&op, &pp).unwrap();
        prop_assert!(sup_distance(&pp2, &pp).unwrap() < 1e-9);
    }

    // ------------------------------------------------------- structure

    #[test]
    fn decomposition_matches_subset_enumeration(
        m in 1..=5usize,
        edge_bits in 0u32..(1 << 25),
    ) {
        let mut edges = Vec::new();
        for src in 0..m {
            for dst in 0..m {
                if edge_bits & (1 << (src * 5 + dst)) != 0 {
                    edges.push((src, dst));
                }
            }
        }
        let graph = PipeGraph::new(m, &edges).unwrap();

        for policy in [SingletonPolicy::Include, SingletonPolicy::Exclude] {
            let deco = graph.decompose(policy);
            let expected = brute_force_minimal_closed(m, &edges, policy);
            prop_assert_eq!(&deco.irreducible, &expected, "policy {:?}", policy);

            // J0 is exactly the complement of the union.
            let mut in_some = vec![false; m];
            for set in &deco.irreducible {
                for &v in set {
                    in_some[v] = true;
                }
            }
            let complement: Vec<usize> = (0..m).filter(|&v| !in_some[v]).collect();
            prop_assert_eq!(&deco.j0, &complement);
        }
    }
}

/// Independent oracle: enumerate all nonempty subsets, keep those closed
/// under the successor map, and filter to inclusion-minimal ones.
fn brute_force_minimal_closed(
    m: usize,
    edges: &[(usize, usize)],
    policy: SingletonPolicy,
) -> Vec<Vec<usize>> {
    let closed = |mask: u32| -> bool {
        for &(src, dst) in edges {
            if mask & (1 << src) != 0 && mask & (1 << dst) == 0 {
                return false;
            }
        }
        true
    };
    let mut closed_masks: Vec<u32> = (1..(1u32 << m)).filter(|&s| closed(s)).collect();
    closed_masks.sort_by_key(|s| s.count_ones());
    let mut minimal: Vec<u32> = Vec::new();
    for &s in &closed_masks {
        if !minimal.iter().any(|&t| t & s == t) {
            minimal.push(s);
        }
    }
    let mut sets: Vec<Vec<usize>> = minimal
        .into_iter()
        .map(|s| (0..m).filter(|&v| s & (1 << v) != 0).collect::<Vec<_>>())
        .filter(|set: &Vec<usize>| {
            if set.len() > 1 || policy == SingletonPolicy::Include {
                return true;
            }
            // Exclude policy drops only fully isolated nodes; a singleton
            // with a self-loop or an incoming pipe is a genuine sink.
            let v = set[0];
            edges.iter().any(|&(s, d)| s == v || d == v)
        })
        .collect();
    sets.sort();
    sets
}
