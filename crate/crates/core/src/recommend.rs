//! Scoring with an item-item matrix and top-N ranking.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;

use crate::autoencoder::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::ingest::HeldOutSet;

/// Top-N items for one user: scores non-increasing, ties by ascending item
/// index, seen items never present.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    /// Row of the user in the fold-in matrix the list was built from.
    pub user: usize,
    pub entries: Vec<(usize, f64)>,
}

impl RankedList {
    pub fn items(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `s_i = Σ_{j in history} B[j, i]`, summing the rows of `B` selected by the
/// user's items.
pub fn score_user(history: &[usize], b: &SimilarityMatrix) -> Result<Vec<f64>> {
    let dim = b.dim();
    let mut scores = vec![0.0; dim];
    for &j in history {
        if j >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: j + 1,
            });
        }
        for (s, &v) in scores.iter_mut().zip(b.values.row(j)) {
            *s += v;
        }
    }
    Ok(scores)
}

fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Best `n` unseen items by score. Returns fewer than `n` entries when fewer
/// unseen items exist.
pub fn top_n(scores: &[f64], seen: &[usize], n: usize) -> Result<RankedList> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let mut mask = vec![false; scores.len()];
    for &i in seen {
        if let Some(m) = mask.get_mut(i) {
            *m = true;
        }
    }
    let mut candidates: Vec<(usize, f64)> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| !mask[*i])
        .map(|(i, &s)| (i, s))
        .collect();
    if candidates.len() > n {
        candidates.select_nth_unstable_by(n - 1, rank_order);
        candidates.truncate(n);
    }
    candidates.sort_unstable_by(rank_order);
    Ok(RankedList {
        user: 0,
        entries: candidates,
    })
}

/// Score and rank every fold-in user of `heldout`, in row order.
pub fn batch_recommend(heldout: &HeldOutSet, b: &SimilarityMatrix, n: usize) -> Result<Vec<RankedList>> {
    if heldout.foldin.n_items() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            found: heldout.foldin.n_items(),
        });
    }
    (0..heldout.n_users())
        .into_par_iter()
        .map(|u| {
            let history = heldout.foldin.row(u);
            let scores = score_user(history, b)?;
            let mut list = top_n(&scores, history, n)?;
            list.user = u;
            Ok(list)
        })
        .collect()
}

/// CSV with columns `user_id,rank,item_id,score`; ranks start at 1.
pub fn write_ranked_csv(
    path: impl AsRef<Path>,
    lists: &[RankedList],
    user_ids: &[String],
    item_ids: &[String],
) -> Result<()> {
    let path = path.as_ref();
    let to_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    w.write_record(["user_id", "rank", "item_id", "score"]).map_err(to_err)?;
    for list in lists {
        for (rank, &(item, score)) in list.entries.iter().enumerate() {
            w.write_record([
                user_ids[list.user].as_str(),
                &(rank + 1).to_string(),
                item_ids[item].as_str(),
                &score.to_string(),
            ])
            .map_err(to_err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
