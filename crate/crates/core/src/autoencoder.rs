//! Closed-form linear autoencoders: ridge (primal and dual forms) and EASE.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::InteractionMatrix;
use crate::linalg::{self, DenseMatrix, GramSide, Limits, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimilarityKind {
    Ridge,
    Ease,
    Zca,
    EmbedDot,
    EmbedRidge,
    EmbedEase,
}

impl SimilarityKind {
    pub const ALL: [SimilarityKind; 6] = [
        SimilarityKind::Ridge,
        SimilarityKind::Ease,
        SimilarityKind::Zca,
        SimilarityKind::EmbedDot,
        SimilarityKind::EmbedRidge,
        SimilarityKind::EmbedEase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityKind::Ridge => "ridge",
            SimilarityKind::Ease => "ease",
            SimilarityKind::Zca => "zca",
            SimilarityKind::EmbedDot => "embed_dot",
            SimilarityKind::EmbedRidge => "embed_ridge",
            SimilarityKind::EmbedEase => "embed_ease",
        }
    }

    pub fn is_embedding(self) -> bool {
        matches!(
            self,
            SimilarityKind::EmbedDot | SimilarityKind::EmbedRidge | SimilarityKind::EmbedEase
        )
    }

    pub fn needs_lambda(self) -> bool {
        self != SimilarityKind::EmbedDot
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimilarityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind `{s}`")))
    }
}

/// Which closed form the ridge solver inverts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RidgeForm {
    /// `(X^T X + λI)^{-1} X^T X`, inverts an |I| x |I| matrix.
    Primal,
    /// `X^T (X X^T + λI)^{-1} X`, inverts a |U| x |U| matrix.
    Dual,
    /// Primal when |I| <= |U|, dual otherwise.
    #[default]
    Auto,
}

impl RidgeForm {
    pub fn resolve(self, n_users: usize, n_items: usize) -> RidgeForm {
        match self {
            RidgeForm::Auto if n_items <= n_users => RidgeForm::Primal,
            RidgeForm::Auto => RidgeForm::Dual,
            other => other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RidgeForm::Primal => "primal",
            RidgeForm::Dual => "dual",
            RidgeForm::Auto => "auto",
        }
    }
}

impl FromStr for RidgeForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primal" => Ok(RidgeForm::Primal),
            "dual" => Ok(RidgeForm::Dual),
            "auto" => Ok(RidgeForm::Auto),
            other => Err(Error::InvalidArgument(format!("unknown ridge form `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeConfig {
    pub lambda: f64,
    pub form: RidgeForm,
    pub limits: Limits,
}

impl RidgeConfig {
    pub fn new(lambda: f64) -> Self {
        RidgeConfig {
            lambda,
            form: RidgeForm::Auto,
            limits: Limits::default(),
        }
    }

    pub fn with_form(mut self, form: RidgeForm) -> Self {
        self.form = form;
        self
    }
}

/// Parameters a similarity matrix was produced with.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConfigSnapshot {
    pub lambda: Option<f64>,
    pub form: Option<RidgeForm>,
    pub embedding_dim: Option<usize>,
}

/// Dense |I| x |I| item-item matrix `B`; scores are `s = y^T B`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: DenseMatrix,
    pub kind: SimilarityKind,
    pub config: ConfigSnapshot,
}

impl SimilarityMatrix {
    pub fn new(values: DenseMatrix, kind: SimilarityKind, config: ConfigSnapshot) -> Result<Self> {
        if values.n_rows() != values.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: values.n_rows(),
                found: values.n_cols(),
            });
        }
        Ok(SimilarityMatrix {
            values,
            kind,
            config,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.n_rows()
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lambda must be positive and finite, got {lambda}")))
    }
}

/// `X^T Z` for binary `X` (|U| x |I|) and dense `Z` (|U| x k): row `i` of the
/// result sums the rows of `Z` belonging to users of item `i`.
pub(crate) fn xt_times(x: &InteractionMatrix, z: &DenseMatrix) -> DenseMatrix {
    let cols = x.columns();
    let k = z.n_cols();
    let mut out = DenseMatrix::zeros(x.n_items(), k);
    if k == 0 {
        return out;
    }
    let values: Vec<Vec<f64>> = cols
        .par_iter()
        .map(|users| {
            let mut acc = vec![0.0; k];
            for &u in users {
                for (a, &b) in acc.iter_mut().zip(z.row(u)) {
                    *a += b;
                }
            }
            acc
        })
        .collect();
    for (i, row) in values.into_iter().enumerate() {
        out.row_mut(i).copy_from_slice(&row);
    }
    out
}

/// `X B` for binary `X` and dense `B` (|I| x k).
pub(crate) fn x_times(x: &InteractionMatrix, b: &DenseMatrix) -> DenseMatrix {
    let k = b.n_cols();
    let mut out = DenseMatrix::zeros(x.n_users(), k);
    for (u, items) in x.rows().enumerate() {
        let row = out.row_mut(u);
        for &i in items {
            for (a, &v) in row.iter_mut().zip(b.row(i)) {
                *a += v;
            }
        }
    }
    out
}

fn ridge_snapshot(lambda: f64, form: RidgeForm) -> ConfigSnapshot {
    ConfigSnapshot {
        lambda: Some(lambda),
        form: Some(form),
        embedding_dim: None,
    }
}

/// Ridge autoencoder via `(X^T X + λI)^{-1} X^T X`.
pub fn ridge_primal(x: &InteractionMatrix, cfg: &RidgeConfig) -> Result<SimilarityMatrix> {
    check_lambda(cfg.lambda)?;
    let g = linalg::gram_with_limits(x, GramSide::Items, &cfg.limits)?;
    let b = linalg::spd_solve(&g.shifted(cfg.lambda), g.as_dense())?;
    SimilarityMatrix::new(b, SimilarityKind::Ridge, ridge_snapshot(cfg.lambda, RidgeForm::Primal))
}

/// Ridge autoencoder via `X^T (X X^T + λI)^{-1} X`.
pub fn ridge_dual(x: &InteractionMatrix, cfg: &RidgeConfig) -> Result<SimilarityMatrix> {
    check_lambda(cfg.lambda)?;
    cfg.limits.check(x.n_items())?;
    let k = linalg::gram_with_limits(x, GramSide::Users, &cfg.limits)?;
    let z = linalg::spd_solve(&k.shifted(cfg.lambda), &x.to_dense())?;
    let b = xt_times(x, &z);
    SimilarityMatrix::new(b, SimilarityKind::Ridge, ridge_snapshot(cfg.lambda, RidgeForm::Dual))
}

/// Ridge autoencoder in whichever form `cfg.form` resolves to.
pub fn ridge(x: &InteractionMatrix, cfg: &RidgeConfig) -> Result<SimilarityMatrix> {
    match cfg.form.resolve(x.n_users(), x.n_items()) {
        RidgeForm::Dual => ridge_dual(x, cfg),
        _ => ridge_primal(x, cfg),
    }
}

/// `||X - X B||_F^2 + λ ||B||_F^2`.
pub fn ridge_objective(x: &InteractionMatrix, b: &DenseMatrix, lambda: f64) -> f64 {
    let xb = x_times(x, b);
    let residual = x.to_dense().sub(&xb).frobenius_norm();
    residual * residual + lambda * b.frobenius_norm().powi(2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EaseSolution {
    pub b: SimilarityMatrix,
    /// Lagrange multipliers of the zero-diagonal constraint.
    pub alpha: Vec<f64>,
    /// `(G + λI)^{-1}`.
    pub p_hat: SymmetricMatrix,
}

pub fn ease(x: &InteractionMatrix, lambda: f64) -> Result<EaseSolution> {
    ease_with_limits(x, lambda, &Limits::default())
}

pub fn ease_with_limits(x: &InteractionMatrix, lambda: f64, limits: &Limits) -> Result<EaseSolution> {
    check_lambda(lambda)?;
    let g = linalg::gram_with_limits(x, GramSide::Items, limits)?;
    ease_from_gram(&g, lambda, SimilarityKind::Ease, None)
}

/// EASE closed form `B = I - P̂ diagMat(1 ⊘ diag P̂)` for an arbitrary Gram matrix.
pub(crate) fn ease_from_gram(
    g: &SymmetricMatrix,
    lambda: f64,
    kind: SimilarityKind,
    embedding_dim: Option<usize>,
) -> Result<EaseSolution> {
    check_lambda(lambda)?;
    let p_hat = linalg::spd_inverse(&g.shifted(lambda))?;
    let d = p_hat.diag();
    if let Some(j) = d.iter().position(|&v| v == 0.0 || !v.is_finite()) {
        return Err(Error::Numerical(format!("diag(P̂) entry {j} is {}", d[j])));
    }
    let n = g.dim();
    let p = p_hat.as_dense();
    let b = DenseMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { -p.get(i, j) / d[j] });
    let alpha = d.iter().map(|&v| 1.0 / v - lambda).collect();
    let config = ConfigSnapshot {
        lambda: Some(lambda),
        form: None,
        embedding_dim,
    };
    Ok(EaseSolution {
        b: SimilarityMatrix::new(b, kind, config)?,
        alpha,
        p_hat,
    })
}

/// Split an EASE solution into the ridge/whitening term `P̂ X^T X` and the
/// diagonal-constraint term `P̂ diagMat(α)`; `B = whitening - diagonal`.
pub fn ease_decompose(
    sol: &EaseSolution,
    x: &InteractionMatrix,
    lambda: f64,
) -> Result<(SimilarityMatrix, DenseMatrix)> {
    check_lambda(lambda)?;
    if sol.p_hat.dim() != x.n_items() {
        return Err(Error::DimensionMismatch {
            expected: sol.p_hat.dim(),
            found: x.n_items(),
        });
    }
    let g = linalg::gram_with_limits(x, GramSide::Items, &Limits {
        max_dense_dim: usize::MAX,
    })?;
    let p = sol.p_hat.as_dense();
    let whitening = p.matmul(g.as_dense())?;
    let n = p.n_rows();
    let diagonal = DenseMatrix::from_fn(n, n, |i, j| p.get(i, j) * sol.alpha[j]);
    let term = SimilarityMatrix::new(whitening, SimilarityKind::Zca, ConfigSnapshot {
        lambda: Some(lambda),
        form: Some(RidgeForm::Primal),
        embedding_dim: None,
    })?;
    Ok((term, diagonal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, spd_solve};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_binary(u: usize, i: usize, rng: &mut ChaCha8Rng) -> InteractionMatrix {
        loop {
            let p: Vec<Vec<u8>> = (0..u)
                .map(|_| (0..i).map(|_| rng.gen_bool(0.45) as u8).collect())
                .collect();
            if p.iter().flatten().any(|&v| v == 1) {
                return InteractionMatrix::from_dense(&p).unwrap();
            }
        }
    }

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn ridge_identity_data() {
        let x = InteractionMatrix::from_dense(&[vec![1, 0], vec![0, 1]]).unwrap();
        for form in [RidgeForm::Primal, RidgeForm::Dual] {
            let b = ridge(&x, &RidgeConfig::new(1.0).with_form(form)).unwrap();
            assert!(b.values.max_abs_diff(&DenseMatrix::identity(2).scale(0.5)) < 1e-15);
            assert_eq!(b.config.form, Some(form));
        }
    }

    #[test]
    fn ridge_all_ones_hand_value() {
        let x = InteractionMatrix::from_dense(&[vec![1, 1], vec![1, 1]]).unwrap();
        let b = ridge_primal(&x, &RidgeConfig::new(2.0)).unwrap();
        let third = 1.0 / 3.0;
        assert!(b.values.max_abs_diff(&mat(&[&[third, third], &[third, third]])) < 1e-15);
    }

    #[test]
    fn ridge_spectrum_is_shrunk_gram_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_binary(7, 4, &mut rng);
        let lambda = 1.0;
        let b = ridge_primal(&x, &RidgeConfig::new(lambda)).unwrap();
        let sigma = eigh(&linalg::gram(&x, GramSide::Items).unwrap()).unwrap().values;
        let sb = SymmetricMatrix::symmetrize(&b.values).unwrap();
        let got = eigh(&sb).unwrap().values;
        for (s, g) in sigma.iter().zip(&got) {
            let s = s.max(0.0);
            assert!((s / (s + lambda) - g).abs() < 1e-8);
            assert!((0.0 - 1e-12..1.0).contains(g));
        }
    }

    #[test]
    fn dual_matches_primal_both_aspects() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (u, i) in [(5, 3), (3, 5), (4, 4)] {
            let x = random_binary(u, i, &mut rng);
            let cfg = RidgeConfig::new(1.0);
            let p = ridge_primal(&x, &cfg).unwrap();
            let d = ridge_dual(&x, &cfg).unwrap();
            assert!(p.values.rel_diff(&d.values) < 1e-8);
            assert_eq!(p.kind, d.kind);
            assert_eq!(p.config.lambda, d.config.lambda);
        }
    }

    #[test]
    fn auto_form_picks_smaller_inverse() {
        assert_eq!(RidgeForm::Auto.resolve(10, 4), RidgeForm::Primal);
        assert_eq!(RidgeForm::Auto.resolve(4, 4), RidgeForm::Primal);
        assert_eq!(RidgeForm::Auto.resolve(3, 4), RidgeForm::Dual);
    }

    #[test]
    fn ridge_rejects_bad_lambda_and_capacity() {
        let x = InteractionMatrix::from_dense(&[vec![1, 1, 0], vec![0, 1, 1]]).unwrap();
        assert!(matches!(ridge_primal(&x, &RidgeConfig::new(0.0)), Err(Error::InvalidArgument(_))));
        let mut cfg = RidgeConfig::new(1.0);
        cfg.limits.max_dense_dim = 2;
        assert!(matches!(ridge_primal(&x, &cfg), Err(Error::Capacity { requested: 3, .. })));
        assert!(matches!(ridge_dual(&x, &cfg), Err(Error::Capacity { requested: 3, .. })));
    }

    #[test]
    fn objective_beats_trivial_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for lambda in [0.1, 1.0, 10.0] {
            let x = random_binary(9, 5, &mut rng);
            let b = ridge_primal(&x, &RidgeConfig::new(lambda)).unwrap();
            let at_b = ridge_objective(&x, &b.values, lambda);
            let at_i = ridge_objective(&x, &DenseMatrix::identity(5), lambda);
            let at_0 = ridge_objective(&x, &DenseMatrix::zeros(5, 5), lambda);
            assert!(at_b < at_i);
            assert!(at_b < at_0);
        }
    }

    #[test]
    fn ease_identity_is_zero() {
        let x = InteractionMatrix::from_dense(&[vec![1, 0], vec![0, 1]]).unwrap();
        for lambda in [0.5, 1.0, 7.0] {
            let sol = ease(&x, lambda).unwrap();
            assert_eq!(sol.b.values, DenseMatrix::zeros(2, 2));
        }
    }

    #[test]
    fn ease_hand_example() {
        let x = InteractionMatrix::from_dense(&[vec![1, 1], vec![1, 1]]).unwrap();
        let sol = ease(&x, 2.0).unwrap();
        assert!(sol.b.values.max_abs_diff(&mat(&[&[0.0, 0.5], &[0.5, 0.0]])) < 1e-12);
        for a in &sol.alpha {
            assert!((a - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ease_matches_lagrangian_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_binary(8, 5, &mut rng);
        let lambda = 3.0;
        let sol = ease(&x, lambda).unwrap();
        let g = linalg::gram(&x, GramSide::Items).unwrap();
        let rhs = g.as_dense().sub(&DenseMatrix::diagonal(&sol.alpha));
        let lagrangian = spd_solve(&g.shifted(lambda), &rhs).unwrap();
        assert!(sol.b.values.max_abs_diff(&lagrangian) < 1e-10);
        assert!(sol.b.values.diag().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ease_decompose_examples() {
        let x = InteractionMatrix::from_dense(&[vec![1, 0], vec![0, 1]]).unwrap();
        let sol = ease(&x, 1.0).unwrap();
        let (w, d) = ease_decompose(&sol, &x, 1.0).unwrap();
        let half = DenseMatrix::identity(2).scale(0.5);
        assert!(w.values.max_abs_diff(&half) < 1e-15);
        assert!(d.max_abs_diff(&half) < 1e-15);

        let x = InteractionMatrix::from_dense(&[vec![1, 1], vec![1, 1]]).unwrap();
        let sol = ease(&x, 2.0).unwrap();
        let (w, d) = ease_decompose(&sol, &x, 2.0).unwrap();
        let third = 1.0 / 3.0;
        let sixth = 1.0 / 6.0;
        assert!(w.values.max_abs_diff(&mat(&[&[third, third], &[third, third]])) < 1e-14);
        assert!(d.max_abs_diff(&mat(&[&[third, -sixth], &[-sixth, third]])) < 1e-14);
    }

    #[test]
    fn ease_decompose_reconstructs_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_binary(8, 5, &mut rng);
        let sol = ease(&x, 1.5).unwrap();
        let (w, d) = ease_decompose(&sol, &x, 1.5).unwrap();
        assert!(sol.b.values.sub(&w.values.sub(&d)).frobenius_norm() < 1e-10);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in SimilarityKind::ALL {
            assert_eq!(k.as_str().parse::<SimilarityKind>().unwrap(), k);
        }
        assert!("slim".parse::<SimilarityKind>().is_err());
    }
}
