//! Algebraic identities between the closed-form solvers, checked on random
//! binary interaction matrices and random real embeddings.

use proptest::prelude::*;
use wrec::embedding::embed_ridge_traced;
use wrec::linalg::{self, eigh, spd_solve, GramSide};
use wrec::whitening::{covariance, fit_zca, whiten, Normalization};
use wrec::{
    ease, ease_decompose, embed_ridge, ridge_dual, ridge_primal, zca_similarity, DenseMatrix,
    EmbeddingMatrix, InteractionMatrix, RidgeConfig, SymmetricMatrix,
};

fn binary_matrix(max_dim: usize) -> impl Strategy<Value = InteractionMatrix> {
    (2..=max_dim, 2..=max_dim)
        .prop_flat_map(|(u, i)| prop::collection::vec(prop::collection::vec(any::<bool>(), i), u))
        .prop_filter("needs at least one interaction", |rows| {
            rows.iter().flatten().any(|&b| b)
        })
        .prop_map(|rows| {
            let p: Vec<Vec<u8>> = rows.iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect();
            InteractionMatrix::from_dense(&p).unwrap()
        })
}

fn lambda() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.1, 1.0, 10.0, 200.0])
}

fn embedding() -> impl Strategy<Value = DenseMatrix> {
    (1usize..=6, 0usize..=8).prop_flat_map(|(d, extra)| {
        let n = d + 1 + extra;
        prop::collection::vec(-2.0f64..2.0, d * n)
            .prop_map(move |v| DenseMatrix::new(d, n, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn primal_equals_dual(x in binary_matrix(12), lambda in lambda()) {
        let cfg = RidgeConfig::new(lambda);
        let p = ridge_primal(&x, &cfg).unwrap();
        let d = ridge_dual(&x, &cfg).unwrap();
        prop_assert!(p.values.rel_diff(&d.values) <= 1e-8);
    }

    #[test]
    fn zca_similarity_equals_ridge(x in binary_matrix(10), lambda in lambda()) {
        let z = zca_similarity(&x, lambda).unwrap();
        let cfg = RidgeConfig::new(lambda);
        prop_assert!(ridge_primal(&x, &cfg).unwrap().values.rel_diff(&z.values) <= 1e-8);
        prop_assert!(ridge_dual(&x, &cfg).unwrap().values.rel_diff(&z.values) <= 1e-8);
    }

    #[test]
    fn ridge_is_symmetric_with_unit_interval_spectrum(x in binary_matrix(10), lambda in lambda()) {
        let b = ridge_primal(&x, &RidgeConfig::new(lambda)).unwrap();
        prop_assert!(b.values.is_symmetric(1e-10));
        let sigma = eigh(&linalg::gram(&x, GramSide::Items).unwrap()).unwrap().values;
        let got = eigh(&SymmetricMatrix::symmetrize(&b.values).unwrap()).unwrap().values;
        for (s, g) in sigma.iter().zip(&got) {
            let want = s.max(0.0) / (s.max(0.0) + lambda);
            prop_assert!((want - g).abs() <= 1e-8);
            prop_assert!(*g > -1e-10 && *g < 1.0);
        }
    }

    #[test]
    fn ease_forms_agree_and_split(x in binary_matrix(10), lambda in lambda()) {
        let sol = ease(&x, lambda).unwrap();
        prop_assert!(sol.b.values.diag().iter().all(|&v| v == 0.0));
        let g = linalg::gram(&x, GramSide::Items).unwrap();
        let rhs = g.as_dense().sub(&DenseMatrix::diagonal(&sol.alpha));
        let lagrangian = spd_solve(&g.shifted(lambda), &rhs).unwrap();
        prop_assert!(sol.b.values.max_abs_diff(&lagrangian) <= 1e-10);
        for (a, p) in sol.alpha.iter().zip(sol.p_hat.diag()) {
            prop_assert!((a - (1.0 / p - lambda)).abs() <= 1e-9 * a.abs().max(1.0));
        }
        let (w, d) = ease_decompose(&sol, &x, lambda).unwrap();
        prop_assert!(sol.b.values.sub(&w.values.sub(&d)).frobenius_norm() <= 1e-10);
        let ridge = ridge_primal(&x, &RidgeConfig::new(lambda)).unwrap();
        prop_assert!(ridge.values.max_abs_diff(&w.values) <= 1e-10);
    }

    #[test]
    fn exact_whitening_gives_identity_covariance(m in embedding()) {
        // rows are features; D <= N random reals are full row rank almost surely
        let gram = m.gram_rows();
        let eig = eigh(&gram).unwrap();
        prop_assume!(eig.values.last().copied().unwrap_or(0.0) > 1e-6 * eig.values[0]);
        let t = fit_zca(&m, 0.0).unwrap();
        let w = whiten(&t, &m).unwrap();
        let c = covariance(&w, Normalization::Raw).unwrap();
        prop_assert!(c.values.as_dense().max_abs_diff(&DenseMatrix::identity(m.n_rows())) <= 1e-8);
    }

    #[test]
    fn embedding_triple_equality(m in embedding(), lambda in lambda()) {
        let d = m.n_rows();
        let n = m.n_cols();
        let e = EmbeddingMatrix::from_values(m.clone()).unwrap();
        let (dual, trace) = embed_ridge_traced(&e, lambda).unwrap();
        prop_assert!(trace.iter().all(|&(r, c)| r.min(c) <= d && (r, c) != (n, n)));
        let g = m.gram_cols();
        let primal = spd_solve(&g.shifted(lambda), g.as_dense()).unwrap();
        let p = fit_zca(&m, lambda).unwrap();
        let pe = whiten(&p, &m).unwrap();
        let whitened = pe.gram_cols().into_dense();
        prop_assert!(primal.rel_diff(&dual.values) <= 1e-8);
        prop_assert!(primal.rel_diff(&whitened) <= 1e-8);
    }
}

#[test]
fn embed_ridge_matches_primal_on_3x10() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let m = DenseMatrix::from_fn(3, 10, |_, _| rng.gen_range(-1.0..1.0));
    let e = EmbeddingMatrix::from_values(m.clone()).unwrap();
    let b = embed_ridge(&e, 1.0).unwrap();
    let g = m.gram_cols();
    let primal = spd_solve(&g.shifted(1.0), g.as_dense()).unwrap();
    assert!(primal.rel_diff(&b.values) < 1e-8);
}

#[test]
fn ridge_limits_in_lambda() {
    let x = InteractionMatrix::from_dense(&[
        vec![1, 0, 1, 0],
        vec![0, 1, 1, 0],
        vec![1, 1, 0, 1],
        vec![0, 0, 1, 1],
        vec![1, 0, 0, 1],
    ])
    .unwrap();
    let g = linalg::gram(&x, GramSide::Items).unwrap();
    let g_norm = g.as_dense().frobenius_norm();

    // B ~ G / λ for large λ
    let big = ridge_primal(&x, &RidgeConfig::new(1e6)).unwrap();
    assert!(big.values.frobenius_norm() < 1e-3 * g_norm);
    assert!(big.values.rel_diff(&g.as_dense().scale(1e-6)) < 1e-5);

    // full column rank: B -> I as λ -> 0+
    assert_eq!(eigh(&g).unwrap().numerical_rank(), 4);
    let small = ridge_primal(&x, &RidgeConfig::new(1e-9)).unwrap();
    assert!(small.values.max_abs_diff(&DenseMatrix::identity(4)) < 1e-6);
}

#[test]
fn gram_is_psd() {
    let x = InteractionMatrix::from_dense(&[vec![1, 1, 0], vec![0, 1, 1], vec![1, 1, 1]]).unwrap();
    for side in [GramSide::Items, GramSide::Users] {
        let g = linalg::gram(&x, side).unwrap();
        let tr = g.trace();
        assert!(eigh(&g).unwrap().values.iter().all(|&s| s >= -1e-10 * tr));
    }
}
