//! Low-dimensional item embeddings `E = Σ^{1/2} V^T` and similarity models
//! built on top of them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::warn;

use crate::binio::{read_exact, read_f64s, read_u32, read_vocab, write_vocab};
use crate::autoencoder::{self, check_lambda, ConfigSnapshot, SimilarityKind, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::ingest::InteractionMatrix;
use crate::linalg::{self, DenseMatrix, GramSide, Limits, RANK_TOLERANCE};

/// D x |I| item embedding, rows are latent dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub values: DenseMatrix,
    /// Singular values of the factorization, descending.
    pub singular_values: Vec<f64>,
    pub item_ids: Vec<String>,
}

impl EmbeddingMatrix {
    /// Wrap an arbitrary D x |I| matrix. Singular values are recovered as
    /// squared row norms (exact for `Σ^{1/2} V^T` with orthonormal `V`).
    pub fn from_values(values: DenseMatrix) -> Result<Self> {
        if values.n_rows() == 0 || values.n_rows() > values.n_cols() {
            return Err(Error::InvalidArgument(format!(
                "embedding must have 1 <= D <= |I|, got D = {} and |I| = {}",
                values.n_rows(),
                values.n_cols()
            )));
        }
        let singular_values = (0..values.n_rows())
            .map(|k| values.row(k).iter().map(|v| v * v).sum())
            .collect();
        let item_ids = (0..values.n_cols()).map(|i| format!("i{i}")).collect();
        Ok(EmbeddingMatrix {
            values,
            singular_values,
            item_ids,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.n_rows()
    }

    pub fn n_items(&self) -> usize {
        self.values.n_cols()
    }
}

pub fn svd_embed(x: &InteractionMatrix, dim: usize) -> Result<EmbeddingMatrix> {
    svd_embed_with_limits(x, dim, &Limits::default())
}

/// Top-`dim` SVD embedding via the eigendecomposition of the smaller Gram matrix.
pub fn svd_embed_with_limits(x: &InteractionMatrix, dim: usize, limits: &Limits) -> Result<EmbeddingMatrix> {
    let (n_users, n_items) = (x.n_users(), x.n_items());
    if dim == 0 || dim > n_users.min(n_items) {
        return Err(Error::InvalidArgument(format!(
            "embedding dimension {dim} must lie in 1..={}",
            n_users.min(n_items)
        )));
    }
    let mut values = DenseMatrix::zeros(dim, n_items);
    let mut singular_values = Vec::with_capacity(dim);
    let rank;
    if n_items <= n_users {
        // X^T X = V Σ² V^T; row k of E is σ_k^{1/2} v_k.
        let eig = linalg::eigh(&linalg::gram_with_limits(x, GramSide::Items, limits)?)?;
        rank = eig.numerical_rank();
        for k in 0..dim {
            let sigma = eig.values[k].max(0.0).sqrt();
            singular_values.push(sigma);
            let scale = sigma.sqrt();
            for (i, v) in values.row_mut(k).iter_mut().enumerate() {
                *v = scale * eig.vectors.get(i, k);
            }
        }
    } else {
        // X X^T = U Σ² U^T; v_k = X^T u_k / σ_k, so row k of E is X^T u_k / σ_k^{1/2}.
        let eig = linalg::eigh(&linalg::gram_with_limits(x, GramSide::Users, limits)?)?;
        rank = eig.numerical_rank();
        let top = eig.values[0].max(0.0);
        for k in 0..dim {
            let sq = eig.values[k].max(0.0);
            let sigma = sq.sqrt();
            singular_values.push(sigma);
            if sq <= RANK_TOLERANCE * top {
                continue;
            }
            let inv = 1.0 / sigma.sqrt();
            let row = values.row_mut(k);
            for (u, items) in x.rows().enumerate() {
                let c = eig.vectors.get(u, k) * inv;
                for &i in items {
                    row[i] += c;
                }
            }
        }
    }
    if dim > rank {
        warn!("embedding dimension {dim} exceeds numerical rank {rank}; trailing rows are near zero");
    }
    Ok(EmbeddingMatrix {
        values,
        singular_values,
        item_ids: x.item_ids().iter().cloned().collect(),
    })
}

fn embed_snapshot(e: &EmbeddingMatrix, lambda: Option<f64>) -> ConfigSnapshot {
    ConfigSnapshot {
        lambda,
        form: None,
        embedding_dim: Some(e.dim()),
    }
}

/// Inner-product baseline `E^T E`.
pub fn embed_dot(e: &EmbeddingMatrix) -> Result<SimilarityMatrix> {
    let b = e.values.gram_cols().into_dense();
    SimilarityMatrix::new(b, SimilarityKind::EmbedDot, embed_snapshot(e, None))
}

/// Ridge autoencoder on embeddings, `E^T (E E^T + λI_D)^{-1} E`.
pub fn embed_ridge(e: &EmbeddingMatrix, lambda: f64) -> Result<SimilarityMatrix> {
    embed_ridge_traced(e, lambda).map(|(b, _)| b)
}

/// Same as [`embed_ridge`], also returning the shape of every intermediate
/// matrix it allocates (the output itself is not listed).
pub fn embed_ridge_traced(e: &EmbeddingMatrix, lambda: f64) -> Result<(SimilarityMatrix, Vec<(usize, usize)>)> {
    check_lambda(lambda)?;
    let mut trace = Vec::new();
    let k = e.values.gram_rows().shifted(lambda);
    trace.push((k.dim(), k.dim()));
    let z = linalg::spd_solve(&k, &e.values)?;
    trace.push(z.shape());
    let et = e.values.transpose();
    trace.push(et.shape());
    let b = et.matmul(&z)?;
    Ok((
        SimilarityMatrix::new(b, SimilarityKind::EmbedRidge, embed_snapshot(e, Some(lambda)))?,
        trace,
    ))
}

pub fn embed_ease(e: &EmbeddingMatrix, lambda: f64) -> Result<SimilarityMatrix> {
    embed_ease_with_limits(e, lambda, &Limits::default())
}

/// EASE with the Gram matrix `E^T E`; materializes the |I| x |I| inverse.
pub fn embed_ease_with_limits(e: &EmbeddingMatrix, lambda: f64, limits: &Limits) -> Result<SimilarityMatrix> {
    check_lambda(lambda)?;
    limits.check(e.n_items())?;
    let g = e.values.gram_cols();
    autoencoder::ease_from_gram(&g, lambda, SimilarityKind::EmbedEase, Some(e.dim())).map(|s| s.b)
}

const EMB_MAGIC: &[u8; 8] = b"WREC-EMB";
const EMB_VERSION: u32 = 1;

/// Binary layout: magic, version u32, D u32, |I| u32, D*|I| little-endian
/// f64 row-major, then |I| length-prefixed (u32) UTF-8 item ids.
pub fn save_embeddings(path: impl AsRef<Path>, e: &EmbeddingMatrix) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|err| Error::io(path, err))?;
    let mut w = BufWriter::new(file);
    write_embeddings(&mut w, e)
        .and_then(|_| w.flush())
        .map_err(|err| Error::io(path, err))
}

pub fn write_embeddings(w: &mut impl Write, e: &EmbeddingMatrix) -> std::io::Result<()> {
    w.write_all(EMB_MAGIC)?;
    w.write_all(&EMB_VERSION.to_le_bytes())?;
    w.write_all(&(e.dim() as u32).to_le_bytes())?;
    w.write_all(&(e.n_items() as u32).to_le_bytes())?;
    for v in e.values.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    write_vocab(w, &e.item_ids)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|err| Error::io(path, err))?;
    read_embeddings(&mut BufReader::new(file))
}

pub fn read_embeddings(r: &mut impl Read) -> Result<EmbeddingMatrix> {
    let mut magic = [0u8; 8];
    read_exact(r, &mut magic)?;
    if &magic != EMB_MAGIC {
        return Err(Error::Format("not an embedding file (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != EMB_VERSION {
        return Err(Error::Format(format!("unsupported embedding file version {version}")));
    }
    let dim = read_u32(r)? as usize;
    let n_items = read_u32(r)? as usize;
    let values = read_f64s(r, dim * n_items)?;
    let item_ids = read_vocab(r, n_items)?;
    let mut e = EmbeddingMatrix::from_values(DenseMatrix::new(dim, n_items, values)?)?;
    e.item_ids = item_ids;
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn emb(rows: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_values(DenseMatrix::from_rows(rows)).unwrap()
    }

    #[test]
    fn svd_embed_diagonal() {
        // X = diag(3, 2) is not binary; 9 users on item p and 4 on item q give
        // the same X^T X = diag(9, 4) and hence singular values (3, 2).
        let mut rows = Vec::new();
        for _ in 0..9 {
            rows.push(vec![0]);
        }
        for _ in 0..4 {
            rows.push(vec![1]);
        }
        let ids = (0..13).map(|u| format!("u{u}")).collect();
        let x = InteractionMatrix::from_rows(ids, vec!["p".into(), "q".into()], rows).unwrap();
        let e = svd_embed(&x, 1).unwrap();
        assert!((e.values.get(0, 0) - 3f64.sqrt()).abs() < 1e-12);
        assert!(e.values.get(0, 1).abs() < 1e-12);
        assert!((e.singular_values[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn svd_embed_identity_is_orthonormal() {
        let x = InteractionMatrix::from_dense(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]).unwrap();
        let e = svd_embed(&x, 3).unwrap();
        let ete = e.values.gram_cols();
        assert!(ete.as_dense().max_abs_diff(&DenseMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn svd_embed_full_rank_gives_gram_square_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for (u, i) in [(8, 5), (4, 7)] {
            let p: Vec<Vec<u8>> = (0..u)
                .map(|_| (0..i).map(|_| rng.gen_bool(0.5) as u8).collect())
                .collect();
            let x = InteractionMatrix::from_dense(&p).unwrap();
            let d = u.min(i);
            let e = svd_embed(&x, d).unwrap();
            let g = linalg::gram(&x, GramSide::Items).unwrap();
            let eig = eigh(&g).unwrap();
            // eigenvalues at rounding level would otherwise leak ~1e-8 through the square root
            let floor = 1e-10 * eig.values[0];
            let root = eig.reconstruct_with(|s| if s > floor { s.sqrt() } else { 0.0 });
            let ete = e.values.gram_cols();
            assert!(ete.as_dense().max_abs_diff(root.as_dense()) < 1e-8, "shape {u}x{i}");
        }
    }

    #[test]
    fn svd_embed_rejects_bad_dim() {
        let x = InteractionMatrix::from_dense(&[vec![1, 1], vec![0, 1]]).unwrap();
        assert!(svd_embed(&x, 0).is_err());
        assert!(svd_embed(&x, 3).is_err());
    }

    #[test]
    fn dot_examples() {
        let b = embed_dot(&emb(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
        assert_eq!(b.values, DenseMatrix::identity(2));
        let b = embed_dot(&emb(&[vec![1.0, 2.0]])).unwrap();
        assert_eq!(b.values, DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]));
    }

    #[test]
    fn ridge_identity_embedding() {
        let b = embed_ridge(&emb(&[vec![1.0, 0.0], vec![0.0, 1.0]]), 1.0).unwrap();
        assert!(b.values.max_abs_diff(&DenseMatrix::identity(2).scale(0.5)) < 1e-15);
    }

    #[test]
    fn ridge_trace_has_no_item_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let e = EmbeddingMatrix::from_values(DenseMatrix::from_fn(3, 10, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        let (b, trace) = embed_ridge_traced(&e, 1.0).unwrap();
        assert_eq!(b.values.shape(), (10, 10));
        assert!(trace.iter().all(|&s| s != (10, 10)));
        assert!(trace.iter().all(|&(r, c)| r.min(c) <= 3));
    }

    #[test]
    fn ease_examples() {
        let b = embed_ease(&emb(&[vec![1.0, 0.0], vec![0.0, 1.0]]), 1.0).unwrap();
        assert_eq!(b.values, DenseMatrix::zeros(2, 2));
        // E^T E = [[1,1],[1,1]] is the Gram of the one-user matrix X' = [[1,1]]
        let b = embed_ease(&emb(&[vec![1.0, 1.0]]), 2.0).unwrap();
        let x1 = InteractionMatrix::from_dense(&[vec![1, 1]]).unwrap();
        let oracle = autoencoder::ease(&x1, 2.0).unwrap();
        assert!(b.values.max_abs_diff(&oracle.b.values) < 1e-12);
        let third = 1.0 / 3.0;
        let want = DenseMatrix::from_rows(&[vec![0.0, third], vec![third, 0.0]]);
        assert!(b.values.max_abs_diff(&want) < 1e-12);
        assert_eq!(b.kind, SimilarityKind::EmbedEase);
        assert_eq!(b.config.embedding_dim, Some(1));

        // E^T E = [[2,2],[2,2]] matches X = [[1,1],[1,1]], whose EASE solution is [[0,1/2],[1/2,0]]
        let r2 = 2f64.sqrt();
        let b = embed_ease(&emb(&[vec![r2, r2]]), 2.0).unwrap();
        let want = DenseMatrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert!(b.values.max_abs_diff(&want) < 1e-12);
        assert!(b.values.diag().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embedding_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let mut e = EmbeddingMatrix::from_values(DenseMatrix::from_fn(2, 4, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        e.item_ids = vec!["a".into(), "bé".into(), "".into(), "d d".into()];
        let mut buf = Vec::new();
        write_embeddings(&mut buf, &e).unwrap();
        assert_eq!(&buf[..8], b"WREC-EMB");
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 4);
        let back = read_embeddings(&mut buf.as_slice()).unwrap();
        assert_eq!(back.values, e.values);
        assert_eq!(back.item_ids, e.item_ids);
        assert!(read_embeddings(&mut &buf[..30]).is_err());
    }
}
