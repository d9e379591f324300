//! Item-item similarity learning for implicit-feedback recommendation.
//!
//! The crate learns dense item-item similarity matrices from a binary
//! user-item interaction matrix with closed-form linear autoencoders
//! (ridge and EASE), exposes the ZCA-whitening view of the same solutions,
//! builds SVD item embeddings, and evaluates top-N rankings with Recall@R
//! and NDCG@R under a strong-generalization split.

pub mod autoencoder;
pub mod binio;
pub mod embedding;
pub mod error;
pub mod evalmetrics;
pub mod ingest;
pub mod linalg;
pub mod recommend;
pub mod whitening;

pub use autoencoder::{
    ease, ease_decompose, ridge, ridge_dual, ridge_primal, ConfigSnapshot, EaseSolution,
    RidgeConfig, RidgeForm, SimilarityKind, SimilarityMatrix,
};
pub use embedding::{embed_dot, embed_ease, embed_ridge, svd_embed, EmbeddingMatrix};
pub use error::{Error, Result};
pub use evalmetrics::{evaluate, ndcg_at_r, recall_at_r, EvalReport, Metric};
pub use ingest::{
    load_interactions, preprocess, split_strong_generalization, HeldOutSet, InteractionMatrix,
    RawInteraction, Split, SplitSpec,
};
pub use linalg::{DenseMatrix, EigenDecomposition, Limits, SymmetricMatrix};
pub use recommend::{batch_recommend, score_user, top_n, RankedList};
pub use whitening::{covariance, fit_zca, whiten, zca_similarity, Normalization, WhiteningTransform};
