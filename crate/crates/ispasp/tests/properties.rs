//! Property tests for the matrix-operator invariants.

use proptest::prelude::*;

use ispasp::matrix::{l1_norm, l2_norm, top_k_by_value, DenseMatrix, IndexSet};

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    proptest::collection::vec(-50.0f64..50.0, rows * cols)
        .prop_map(move |data| DenseMatrix::new(rows, cols, data).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mu_is_linear(a in matrix_strategy(5, 4), b in matrix_strategy(5, 4)) {
        let lhs = a.add(&b).unwrap().mu();
        let mu_a = a.mu();
        let mu_b = b.mu();
        for i in 0..5 {
            let rhs = mu_a[i] + mu_b[i];
            let scale = lhs[i].abs().max(rhs.abs()).max(1.0);
            prop_assert!((lhs[i] - rhs).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn mu_commutes_with_matmul(a in matrix_strategy(4, 3), b in matrix_strategy(3, 6)) {
        let lhs = a.matmul(&b).unwrap().mu();
        let mu_b = DenseMatrix::new(3, 1, b.mu()).unwrap();
        let rhs = a.matmul(&mu_b).unwrap();
        for (l, r) in lhs.iter().zip(rhs.data()) {
            let scale = l.abs().max(r.abs()).max(1.0);
            prop_assert!((l - r).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn flatten_norm_is_frobenius(m in matrix_strategy(6, 5)) {
        let diff = (l2_norm(&m.vec_flatten()) - m.frobenius_norm()).abs();
        prop_assert!(diff <= 1e-12 * m.frobenius_norm().max(1.0));
    }

    #[test]
    fn l2_never_exceeds_l1(v in proptest::collection::vec(-100.0f64..100.0, 1..40)) {
        prop_assert!(l2_norm(&v) <= l1_norm(&v) + 1e-12);
    }

    #[test]
    fn top_k_is_permutation_consistent(
        v in proptest::collection::vec(-1000.0f64..1000.0, 8),
        k in 1usize..8,
    ) {
        // distinct values so the selection is unambiguous under permutation
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[0] != w[1]));

        let base = top_k_by_value(&v, k).unwrap();
        // rotate as a concrete permutation
        let rotated: Vec<f64> = (0..v.len()).map(|i| v[(i + 3) % v.len()]).collect();
        let rotated_set = top_k_by_value(&rotated, k).unwrap();
        let mapped: Vec<usize> = rotated_set.iter().map(|i| (i + 3) % v.len()).collect();
        let mapped = IndexSet::new(v.len(), mapped).unwrap();
        prop_assert_eq!(base, mapped);
    }

    #[test]
    fn row_restrict_is_idempotent(
        m in matrix_strategy(7, 4),
        mask in proptest::collection::vec(proptest::bool::ANY, 7),
    ) {
        let indices: Vec<usize> = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &keep)| keep.then_some(i))
            .collect();
        let set = IndexSet::new(7, indices).unwrap();
        let once = m.row_restrict(&set).unwrap();
        prop_assert_eq!(once.row_restrict(&set).unwrap(), once.clone());
        // support of the restriction stays inside the set
        prop_assert!(once.row_support().iter().all(|i| set.contains(i)));
    }

    #[test]
    fn compressibility_is_scale_equivariant(
        m in matrix_strategy(6, 4),
        factor in 0.1f64..10.0,
    ) {
        let nonneg = m.map(f64::abs);
        let r1 = nonneg.compressibility_magnitude(0.5).unwrap();
        let r2 = nonneg.scale(factor).compressibility_magnitude(0.5).unwrap();
        prop_assert!((r2 - factor * r1).abs() <= 1e-10 * (factor * r1).max(1.0));
    }
}
