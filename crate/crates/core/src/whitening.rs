//! ZCA whitening and the whitened self-similarity `B = (P X)^T (P X)`.
//!
//! Columns of the data matrix are samples and rows are feature dimensions.
//! For interaction data the users play the role of features and the items
//! the role of samples, so `P` is |U| x |U|. No centering is applied unless
//! asked for explicitly via [`center_rows`].

use crate::autoencoder::{ConfigSnapshot, SimilarityKind, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::ingest::InteractionMatrix;
use crate::linalg::{self, DenseMatrix, EigenDecomposition, GramSide, Limits, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Divide by the number of samples (columns).
    Mean,
    /// No scaling: `M M^T`.
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    pub values: SymmetricMatrix,
    pub normalization: Normalization,
}

impl CovarianceMatrix {
    pub fn dim(&self) -> usize {
        self.values.dim()
    }
}

pub fn covariance(m: &DenseMatrix, normalization: Normalization) -> Result<CovarianceMatrix> {
    if m.n_rows() == 0 || m.n_cols() == 0 {
        return Err(Error::InvalidArgument("covariance of an empty matrix".into()));
    }
    let raw = m.gram_rows();
    let values = match normalization {
        Normalization::Raw => raw,
        Normalization::Mean => {
            let n = m.n_cols() as f64;
            SymmetricMatrix::from_upper(raw.dim(), |i, j| raw.get(i, j) / n)
        }
    };
    Ok(CovarianceMatrix {
        values,
        normalization,
    })
}

/// Subtract each row's mean across columns.
pub fn center_rows(m: &DenseMatrix) -> DenseMatrix {
    let n = m.n_cols().max(1) as f64;
    let means: Vec<f64> = (0..m.n_rows()).map(|i| m.row(i).iter().sum::<f64>() / n).collect();
    DenseMatrix::from_fn(m.n_rows(), m.n_cols(), |i, j| m.get(i, j) - means[i])
}

/// `P = U (Σ + εI)^{-1/2} U^T` fitted on `M M^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform {
    pub p: SymmetricMatrix,
    pub eps: f64,
    pub source_dim: usize,
    pub eig: EigenDecomposition,
}

pub fn fit_zca(m: &DenseMatrix, eps: f64) -> Result<WhiteningTransform> {
    if m.n_rows() == 0 || m.n_cols() == 0 {
        return Err(Error::InvalidArgument("cannot whiten an empty matrix".into()));
    }
    fit_zca_gram(&m.gram_rows(), eps)
}

/// Fit from a precomputed raw second-moment matrix `M M^T`.
pub fn fit_zca_gram(mmt: &SymmetricMatrix, eps: f64) -> Result<WhiteningTransform> {
    let eig = linalg::eigh(mmt)?;
    let p = linalg::inv_sqrt_from_eig(&eig, eps)?;
    Ok(WhiteningTransform {
        p,
        eps,
        source_dim: mmt.dim(),
        eig,
    })
}

pub fn whiten(t: &WhiteningTransform, m: &DenseMatrix) -> Result<DenseMatrix> {
    if m.n_rows() != t.source_dim {
        return Err(Error::DimensionMismatch {
            expected: t.source_dim,
            found: m.n_rows(),
        });
    }
    t.p.as_dense().matmul(m)
}

pub fn zca_similarity(x: &InteractionMatrix, eps: f64) -> Result<SimilarityMatrix> {
    zca_similarity_with_limits(x, eps, &Limits::default())
}

/// Whiten the interaction matrix over the user dimension and return the
/// item self-similarity `W^T W`.
pub fn zca_similarity_with_limits(x: &InteractionMatrix, eps: f64, limits: &Limits) -> Result<SimilarityMatrix> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!("eps must be positive for interaction data, got {eps}")));
    }
    limits.check(x.n_items())?;
    let users_gram = linalg::gram_with_limits(x, GramSide::Users, limits)?;
    let t = fit_zca_gram(&users_gram, eps)?;
    let w = whiten(&t, &x.to_dense())?;
    let b = w.gram_cols().into_dense();
    SimilarityMatrix::new(b, SimilarityKind::Zca, ConfigSnapshot {
        lambda: Some(eps),
        form: None,
        embedding_dim: None,
    })
}
