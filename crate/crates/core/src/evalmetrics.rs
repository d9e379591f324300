//! Recall@R and truncated NDCG@R over held-out users.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::autoencoder::SimilarityMatrix;
use crate::error::{Error, Result};
use crate::ingest::HeldOutSet;
use crate::recommend::{batch_recommend, RankedList};

fn check_inputs(targets: &[usize], r: usize) -> Result<()> {
    if targets.is_empty() {
        return Err(Error::UndefinedMetric("target set is empty".into()));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("cutoff R must be at least 1".into()));
    }
    Ok(())
}

fn hits<'a>(ranked: &'a RankedList, targets: &'a [usize], r: usize) -> impl Iterator<Item = bool> + 'a {
    ranked.items().take(r).map(move |i| targets.contains(&i))
}

/// `Σ_{r<=R} 1[ω(r) ∈ I_u] / min(R, |I_u|)`.
pub fn recall_at_r(ranked: &RankedList, targets: &[usize], r: usize) -> Result<f64> {
    check_inputs(targets, r)?;
    let found = hits(ranked, targets, r).filter(|&h| h).count();
    Ok(found as f64 / r.min(targets.len()) as f64)
}

/// `Σ_{r<=R} (2^{hit} - 1) / log2(r + 1)`.
pub fn dcg_at_r(ranked: &RankedList, targets: &[usize], r: usize) -> f64 {
    hits(ranked, targets, r)
        .enumerate()
        .filter(|&(_, h)| h)
        .map(|(k, _)| 1.0 / ((k + 2) as f64).log2())
        .sum()
}

/// DCG of the ideal ranking: all targets first.
pub fn ideal_dcg_at_r(n_targets: usize, r: usize) -> f64 {
    (0..r.min(n_targets)).map(|k| 1.0 / ((k + 2) as f64).log2()).sum()
}

pub fn ndcg_at_r(ranked: &RankedList, targets: &[usize], r: usize) -> Result<f64> {
    check_inputs(targets, r)?;
    Ok(dcg_at_r(ranked, targets, r) / ideal_dcg_at_r(targets.len(), r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Recall,
    Ndcg,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Recall => "recall",
            Metric::Ndcg => "ndcg",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricValues {
    pub mean: f64,
    /// One value per evaluated user, aligned with `EvalReport::users`.
    pub per_user: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub cutoffs: Vec<usize>,
    pub metrics: BTreeMap<(Metric, usize), MetricValues>,
    /// Ids of evaluated users, in held-out order.
    pub users: Vec<String>,
    pub n_users_evaluated: usize,
    pub excluded_users: usize,
    pub excluded_reasons: BTreeMap<String, usize>,
}

impl EvalReport {
    pub fn mean(&self, metric: Metric, r: usize) -> Option<f64> {
        self.metrics.get(&(metric, r)).map(|v| v.mean)
    }

    pub fn summary(&self) -> ReportSummary {
        let pick = |m: Metric| {
            self.cutoffs
                .iter()
                .map(|&r| (r, self.metrics[&(m, r)].mean))
                .collect()
        };
        ReportSummary {
            cutoffs: self.cutoffs.clone(),
            metrics: MetricMeans {
                recall: pick(Metric::Recall),
                ndcg: pick(Metric::Ndcg),
            },
            n_users_evaluated: self.n_users_evaluated,
            excluded_users: self.excluded_users,
            excluded_reasons: self.excluded_reasons.clone(),
        }
    }

    /// CSV with one row per evaluated user and one column per (metric, R).
    pub fn write_per_user_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let to_err = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(to_err)?;
        let keys: Vec<&(Metric, usize)> = self.metrics.keys().collect();
        let mut header = vec!["user_id".to_string()];
        header.extend(keys.iter().map(|(m, r)| format!("{m}@{r}")));
        w.write_record(&header).map_err(to_err)?;
        for (k, user) in self.users.iter().enumerate() {
            let mut row = vec![user.clone()];
            row.extend(keys.iter().map(|key| self.metrics[key].per_user[k].to_string()));
            w.write_record(&row).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Serializable aggregate view of an [`EvalReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub cutoffs: Vec<usize>,
    pub metrics: MetricMeans,
    pub n_users_evaluated: usize,
    pub excluded_users: usize,
    pub excluded_reasons: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricMeans {
    pub recall: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
}

pub const REASON_EMPTY_TARGETS: &str = "empty target set";
pub const REASON_SPLIT: &str = "empty fold-in or targets at split time";

/// Rank once at the largest cutoff, then score every (metric, R).
pub fn evaluate(heldout: &HeldOutSet, b: &SimilarityMatrix, cutoffs: &[usize]) -> Result<EvalReport> {
    let mut cutoffs = cutoffs.to_vec();
    cutoffs.sort_unstable();
    cutoffs.dedup();
    let Some(&max_r) = cutoffs.last() else {
        return Err(Error::InvalidArgument("at least one cutoff is required".into()));
    };
    if cutoffs[0] == 0 {
        return Err(Error::InvalidArgument("cutoffs must be at least 1".into()));
    }
    let lists = batch_recommend(heldout, b, max_r)?;

    let mut excluded_reasons = BTreeMap::new();
    if heldout.excluded > 0 {
        excluded_reasons.insert(REASON_SPLIT.to_string(), heldout.excluded);
    }
    let evaluable: Vec<usize> = (0..heldout.n_users())
        .filter(|&u| !heldout.targets[u].is_empty())
        .collect();
    let empty = heldout.n_users() - evaluable.len();
    if empty > 0 {
        excluded_reasons.insert(REASON_EMPTY_TARGETS.to_string(), empty);
    }
    if evaluable.is_empty() {
        return Err(Error::Evaluation("no held-out user has a non-empty target set".into()));
    }

    let mut metrics = BTreeMap::new();
    for &r in &cutoffs {
        for metric in [Metric::Recall, Metric::Ndcg] {
            let per_user = evaluable
                .iter()
                .map(|&u| {
                    let t = &heldout.targets[u];
                    match metric {
                        Metric::Recall => recall_at_r(&lists[u], t, r),
                        Metric::Ndcg => ndcg_at_r(&lists[u], t, r),
                    }
                })
                .collect::<Result<Vec<f64>>>()?;
            let mean = per_user.iter().sum::<f64>() / per_user.len() as f64;
            metrics.insert((metric, r), MetricValues { mean, per_user });
        }
    }
    Ok(EvalReport {
        cutoffs,
        metrics,
        users: evaluable
            .iter()
            .map(|&u| heldout.foldin.user_ids()[u].clone())
            .collect(),
        n_users_evaluated: evaluable.len(),
        excluded_users: excluded_reasons.values().sum(),
        excluded_reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{ConfigSnapshot, SimilarityKind};
    use crate::ingest::InteractionMatrix;
    use crate::linalg::DenseMatrix;
    use proptest::prelude::*;

    fn list(items: &[usize]) -> RankedList {
        RankedList {
            user: 0,
            entries: items.iter().enumerate().map(|(k, &i)| (i, -(k as f64))).collect(),
        }
    }

    #[test]
    fn recall_examples() {
        // a=0, b=1, c=2, d=3
        assert_eq!(recall_at_r(&list(&[0, 2, 3]), &[0, 1], 3).unwrap(), 0.5);
        assert_eq!(recall_at_r(&list(&[1, 0, 3]), &[0, 1], 3).unwrap(), 1.0);
        assert_eq!(recall_at_r(&list(&[2, 3]), &[0, 1], 2).unwrap(), 0.0);
        assert!(matches!(recall_at_r(&list(&[0]), &[], 1), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg_at_r(&list(&[5, 1, 2]), &[5], 1).unwrap(), 1.0);
        assert_eq!(ndcg_at_r(&list(&[5, 1, 2]), &[5], 3).unwrap(), 1.0);
        let v = ndcg_at_r(&list(&[1, 5, 2]), &[5], 3).unwrap();
        assert!((v - 0.630929753571457).abs() < 1e-12);
        assert_eq!(ndcg_at_r(&list(&[1, 2]), &[5], 2).unwrap(), 0.0);
        assert!(ndcg_at_r(&list(&[1]), &[], 2).is_err());
    }

    #[test]
    fn short_lists_count_missing_ranks_as_misses() {
        assert_eq!(recall_at_r(&list(&[0]), &[0, 1], 5).unwrap(), 0.5);
    }

    fn heldout(foldins: &[Vec<u8>], targets: Vec<Vec<usize>>) -> HeldOutSet {
        HeldOutSet {
            foldin: InteractionMatrix::from_dense(foldins).unwrap(),
            targets,
            excluded: 0,
        }
    }

    fn sim(rows: &[Vec<f64>]) -> SimilarityMatrix {
        SimilarityMatrix::new(DenseMatrix::from_rows(rows), SimilarityKind::Ridge, ConfigSnapshot::default()).unwrap()
    }

    #[test]
    fn evaluate_perfect_and_mean() {
        // item 0 points to 1 and 2, item 3 points nowhere useful
        let b = sim(&[
            vec![0.0, 1.0, 0.9, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ]);
        let h = heldout(&[vec![1, 0, 0, 0]], vec![vec![1, 2]]);
        let rep = evaluate(&h, &b, &[1, 2]).unwrap();
        for r in [1, 2] {
            assert_eq!(rep.mean(Metric::Recall, r), Some(1.0));
            assert_eq!(rep.mean(Metric::Ndcg, r), Some(1.0));
        }

        let h = heldout(&[vec![1, 0, 0, 0], vec![0, 0, 0, 1]], vec![vec![1], vec![2]]);
        let rep = evaluate(&h, &b, &[1]).unwrap();
        assert_eq!(rep.metrics[&(Metric::Recall, 1)].per_user, vec![1.0, 0.0]);
        assert_eq!(rep.mean(Metric::Recall, 1), Some(0.5));
    }

    #[test]
    fn evaluate_excludes_empty_targets() {
        let b = sim(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let h = heldout(&[vec![1, 0], vec![0, 1]], vec![vec![1], vec![]]);
        let rep = evaluate(&h, &b, &[1]).unwrap();
        assert_eq!(rep.n_users_evaluated, 1);
        assert_eq!(rep.excluded_users, 1);
        assert_eq!(rep.excluded_reasons[REASON_EMPTY_TARGETS], 1);

        let h = heldout(&[vec![1, 0]], vec![vec![]]);
        assert!(matches!(evaluate(&h, &b, &[1]), Err(Error::Evaluation(_))));
        let h = heldout(&[vec![1, 0]], vec![vec![1]]);
        assert!(evaluate(&h, &b, &[]).is_err());
    }

    proptest! {
        #[test]
        fn recall_monotone_and_ndcg_bounded(
            perm in Just((0usize..20).collect::<Vec<_>>()).prop_shuffle(),
            target_bits in prop::collection::vec(any::<bool>(), 20),
        ) {
            let targets: Vec<usize> = (0..20).filter(|&i| target_bits[i]).collect();
            prop_assume!(!targets.is_empty());
            let l = list(&perm);
            let mut prev = 0.0;
            for r in 1..=20 {
                let rec = recall_at_r(&l, &targets, r).unwrap();
                let nd = ndcg_at_r(&l, &targets, r).unwrap();
                prop_assert!((0.0..=1.0).contains(&rec));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&nd));
                let all_top = perm[..r.min(targets.len())].iter().all(|i| targets.contains(i));
                prop_assert_eq!((nd - 1.0).abs() < 1e-12, all_top);
                // recall's denominator grows only until |I_u|, after which hits only add
                if r >= targets.len() {
                    prop_assert!(rec + 1e-15 >= prev);
                    prev = rec;
                }
            }
        }
    }
}
