//! Raw interaction loading, preprocessing and strong-generalization splits.
//!
//! The pipeline is `load_interactions` -> `preprocess` ->
//! `split_strong_generalization`. Held-out users never appear in the training
//! matrix; each of them contributes a fold-in history and a set of target
//! items that the evaluation tries to recover.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::{IndexMap, IndexSet};
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct RawInteraction {
    pub user_id: String,
    pub item_id: String,
    pub rating: Option<f64>,
    pub timestamp: Option<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Csv,
    Tsv,
}

impl InputFormat {
    fn delimiter(self) -> u8 {
        match self {
            InputFormat::Csv => b',',
            InputFormat::Tsv => b'\t',
        }
    }

    /// Guess from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("tab") => {
                InputFormat::Tsv
            }
            _ => InputFormat::Csv,
        }
    }
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(InputFormat::Csv),
            "tsv" => Ok(InputFormat::Tsv),
            other => Err(Error::InvalidArgument(format!("unknown input format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// The first record is a header when its first field looks like a user
    /// column name (`user`, `userId`, `user_id`, `uid`, ...).
    #[default]
    Auto,
    Present,
    Absent,
}

fn looks_like_header(first_field: &str) -> bool {
    let f = first_field.trim().to_ascii_lowercase();
    f.starts_with("user") || f == "uid"
}

/// Load interactions with automatic header detection.
pub fn load_interactions(path: impl AsRef<Path>, format: InputFormat) -> Result<Vec<RawInteraction>> {
    load_interactions_with(path, format, HeaderMode::Auto)
}

pub fn load_interactions_with(
    path: impl AsRef<Path>,
    format: InputFormat,
    header: HeaderMode,
) -> Result<Vec<RawInteraction>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(format.delimiter())
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let mut out = Vec::new();
    let mut expected_cols: Option<usize> = None;
    let mut first = true;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        if first {
            first = false;
            let is_header = match header {
                HeaderMode::Present => true,
                HeaderMode::Absent => false,
                HeaderMode::Auto => record.get(0).is_some_and(looks_like_header),
            };
            if is_header {
                continue;
            }
        }
        let n = record.len();
        if !(2..=4).contains(&n) {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 to 4 columns, found {n}"),
            });
        }
        match expected_cols {
            None => expected_cols = Some(n),
            Some(m) if m != n => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {m} columns, found {n}"),
                })
            }
            _ => {}
        }
        let user_id = record[0].to_string();
        let item_id = record[1].to_string();
        if user_id.is_empty() || item_id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty user or item id".into(),
            });
        }
        let rating = match record.get(2) {
            Some(s) if !s.is_empty() => Some(s.parse::<f64>().ok().filter(|r| r.is_finite()).ok_or_else(
                || Error::Parse {
                    line,
                    message: format!("non-numeric rating `{s}`"),
                },
            )?),
            _ => None,
        };
        let timestamp = match record.get(3) {
            Some(s) if !s.is_empty() => Some(s.parse::<i64>().map_err(|_| Error::Parse {
                line,
                message: format!("non-integer timestamp `{s}`"),
            })?),
            _ => None,
        };
        out.push(RawInteraction {
            user_id,
            item_id,
            rating,
            timestamp,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset(format!("{} contains no interactions", path.display())));
    }
    Ok(out)
}

/// Sparse binary user-item matrix in compressed-row form.
///
/// Rows are users, columns are items; every stored entry is an implicit 1.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    user_ids: IndexSet<String>,
    item_ids: IndexSet<String>,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl InteractionMatrix {
    /// Build from per-user item lists. Each row is sorted and deduplicated.
    pub fn from_rows(
        user_ids: Vec<String>,
        item_ids: Vec<String>,
        rows: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if user_ids.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: user_ids.len(),
                found: rows.len(),
            });
        }
        let n_users = user_ids.len();
        let n_items = item_ids.len();
        let user_ids: IndexSet<String> = user_ids.into_iter().collect();
        let item_ids: IndexSet<String> = item_ids.into_iter().collect();
        if user_ids.len() != n_users || item_ids.len() != n_items {
            return Err(Error::InvalidArgument("duplicate user or item id".into()));
        }
        let mut indptr = Vec::with_capacity(n_users + 1);
        let mut indices = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last >= n_items {
                    return Err(Error::DimensionMismatch {
                        expected: n_items,
                        found: last + 1,
                    });
                }
            }
            indices.extend(row);
            indptr.push(indices.len());
        }
        Ok(InteractionMatrix {
            user_ids,
            item_ids,
            indptr,
            indices,
        })
    }

    /// Build from a dense 0/1 pattern with generated ids `u{k}` / `i{k}`.
    /// Any nonzero entry counts as an interaction.
    pub fn from_dense(pattern: &[Vec<u8>]) -> Result<Self> {
        let n_items = pattern.first().map_or(0, Vec::len);
        if pattern.iter().any(|r| r.len() != n_items) {
            return Err(Error::InvalidArgument("ragged dense pattern".into()));
        }
        let rows = pattern
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, _)| j).collect())
            .collect();
        Self::from_rows(
            (0..pattern.len()).map(|u| format!("u{u}")).collect(),
            (0..n_items).map(|i| format!("i{i}")).collect(),
            rows,
        )
    }

    pub fn n_users(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, user: usize) -> &[usize] {
        &self.indices[self.indptr[user]..self.indptr[user + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.n_users()).map(move |u| self.row(u))
    }

    pub fn user_ids(&self) -> &IndexSet<String> {
        &self.user_ids
    }

    pub fn item_ids(&self) -> &IndexSet<String> {
        &self.item_ids
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_ids.get_index_of(id)
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.item_ids.get_index_of(id)
    }

    pub fn contains(&self, user: usize, item: usize) -> bool {
        self.row(user).binary_search(&item).is_ok()
    }

    /// Number of interactions per item.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_items()];
        for &i in &self.indices {
            counts[i] += 1;
        }
        counts
    }

    /// Per-item lists of user indices (the transpose's rows), sorted.
    pub fn columns(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.n_items()];
        for (u, row) in self.rows().enumerate() {
            for &i in row {
                cols[i].push(u);
            }
        }
        cols
    }

    /// Every row and every column holds at least one entry.
    pub fn check_nonempty(&self) -> Result<()> {
        if let Some(u) = (0..self.n_users()).find(|&u| self.row(u).is_empty()) {
            return Err(Error::InvalidArgument(format!("user row {u} is empty")));
        }
        if let Some(i) = self.column_counts().iter().position(|&c| c == 0) {
            return Err(Error::InvalidArgument(format!("item column {i} is empty")));
        }
        Ok(())
    }

    /// Dense |U| x |I| copy with 0/1 entries.
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n_users(), self.n_items());
        for (u, row) in self.rows().enumerate() {
            let out = m.row_mut(u);
            for &i in row {
                out[i] = 1.0;
            }
        }
        m
    }
}

/// Preprocessing and split parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub heldout_user_fraction: f64,
    pub foldin_fraction: f64,
    pub rng_seed: u64,
    pub min_user_interactions: usize,
    pub min_item_interactions: usize,
    pub rating_threshold: Option<f64>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            heldout_user_fraction: 0.1,
            foldin_fraction: 0.8,
            rng_seed: 98765,
            min_user_interactions: 5,
            min_item_interactions: 1,
            rating_threshold: Some(4.0),
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.heldout_user_fraction) {
            return Err(Error::InvalidArgument(format!(
                "heldout_user_fraction must lie in (0, 1), got {}",
                self.heldout_user_fraction
            )));
        }
        if !open_unit(self.foldin_fraction) {
            return Err(Error::InvalidArgument(format!(
                "foldin_fraction must lie in (0, 1), got {}",
                self.foldin_fraction
            )));
        }
        if 2.0 * self.heldout_user_fraction >= 1.0 {
            return Err(Error::InvalidArgument(
                "heldout_user_fraction must leave training users (< 0.5)".into(),
            ));
        }
        Ok(())
    }
}

/// Filter, binarize, deduplicate and index raw interactions.
///
/// Records without a rating pass the rating threshold. User and item
/// minimum counts are enforced jointly by iterating to a fixed point.
/// Users and items are indexed in order of first appearance.
pub fn preprocess(raw: &[RawInteraction], spec: &SplitSpec) -> Result<InteractionMatrix> {
    if raw.is_empty() {
        return Err(Error::EmptyDataset("no raw interactions".into()));
    }
    let mut users: IndexMap<&str, BTreeSet<usize>> = IndexMap::new();
    let mut items: IndexSet<&str> = IndexSet::new();
    for r in raw {
        if let (Some(t), Some(rating)) = (spec.rating_threshold, r.rating) {
            if rating < t {
                continue;
            }
        }
        let (item, _) = items.insert_full(r.item_id.as_str());
        users.entry(r.user_id.as_str()).or_default().insert(item);
    }

    let mut user_alive = vec![true; users.len()];
    let mut item_alive = vec![true; items.len()];
    loop {
        let mut changed = false;
        let mut item_counts = vec![0usize; items.len()];
        for (u, (_, set)) in users.iter().enumerate() {
            if !user_alive[u] {
                continue;
            }
            let n = set.iter().filter(|&&i| item_alive[i]).count();
            if n < spec.min_user_interactions.max(1) {
                user_alive[u] = false;
                changed = true;
            } else {
                for &i in set {
                    if item_alive[i] {
                        item_counts[i] += 1;
                    }
                }
            }
        }
        for (i, &c) in item_counts.iter().enumerate() {
            if item_alive[i] && c < spec.min_item_interactions.max(1) {
                item_alive[i] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut item_map = vec![usize::MAX; items.len()];
    let mut item_ids = Vec::new();
    for (i, id) in items.iter().enumerate() {
        if item_alive[i] {
            item_map[i] = item_ids.len();
            item_ids.push(id.to_string());
        }
    }
    let mut user_ids = Vec::new();
    let mut rows = Vec::new();
    for (u, (id, set)) in users.iter().enumerate() {
        if !user_alive[u] {
            continue;
        }
        user_ids.push(id.to_string());
        rows.push(set.iter().filter(|&&i| item_alive[i]).map(|&i| item_map[i]).collect());
    }
    if user_ids.is_empty() || item_ids.is_empty() {
        return Err(Error::EmptyDataset("all interactions were filtered out".into()));
    }
    info!(
        "preprocessed {} raw records into {} users x {} items",
        raw.len(),
        user_ids.len(),
        item_ids.len()
    );
    InteractionMatrix::from_rows(user_ids, item_ids, rows)
}

/// Held-out users: fold-in histories given to the model plus target items.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOutSet {
    pub foldin: InteractionMatrix,
    /// Target item indices per fold-in row, sorted ascending.
    pub targets: Vec<Vec<usize>>,
    /// Users dropped because their fold-in or target set ended up empty.
    pub excluded: usize,
}

impl HeldOutSet {
    pub fn n_users(&self) -> usize {
        self.foldin.n_users()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: InteractionMatrix,
    pub validation: HeldOutSet,
    pub test: HeldOutSet,
}

fn heldout_count(n_users: usize, fraction: f64) -> usize {
    (n_users as f64 * fraction).round() as usize
}

/// Number of fold-in items for a history of length `n >= 2`; both parts are
/// kept non-empty.
fn foldin_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n - 1)
}

/// Partition users into train / validation / test and split each held-out
/// user's history into fold-in and targets.
pub fn split_strong_generalization(x: &InteractionMatrix, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let n = x.n_users();
    let n_heldout = heldout_count(n, spec.heldout_user_fraction);
    if n_heldout == 0 || n <= 2 * n_heldout {
        return Err(Error::Split(format!(
            "{n} users cannot be split with heldout_user_fraction {}",
            spec.heldout_user_fraction
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let n_train = n - 2 * n_heldout;
    let mut train_users = perm[..n_train].to_vec();
    let mut val_users = perm[n_train..n_train + n_heldout].to_vec();
    let mut test_users = perm[n_train + n_heldout..].to_vec();
    train_users.sort_unstable();
    val_users.sort_unstable();
    test_users.sort_unstable();

    // Items kept are exactly those with at least one training interaction.
    let mut keep = vec![false; x.n_items()];
    for &u in &train_users {
        for &i in x.row(u) {
            keep[i] = true;
        }
    }
    let mut item_map = vec![usize::MAX; x.n_items()];
    let mut item_ids = Vec::new();
    for (i, id) in x.item_ids().iter().enumerate() {
        if keep[i] {
            item_map[i] = item_ids.len();
            item_ids.push(id.clone());
        }
    }
    let dropped = x.n_items() - item_ids.len();
    if dropped > 0 {
        info!("dropping {dropped} items without training interactions");
    }

    let train = InteractionMatrix::from_rows(
        train_users.iter().map(|&u| x.user_ids()[u].clone()).collect(),
        item_ids.clone(),
        train_users
            .iter()
            .map(|&u| x.row(u).iter().map(|&i| item_map[i]).collect())
            .collect(),
    )?;

    let mut holdout = |users: &[usize], name: &str| -> Result<HeldOutSet> {
        let mut ids = Vec::new();
        let mut foldins = Vec::new();
        let mut targets = Vec::new();
        let mut excluded = 0;
        for &u in users {
            let row = x.row(u);
            if row.len() < 2 {
                excluded += 1;
                continue;
            }
            let mut shuffled = row.to_vec();
            shuffled.shuffle(&mut rng);
            let k = foldin_count(row.len(), spec.foldin_fraction);
            let remap = |items: &[usize]| -> Vec<usize> {
                let mut v: Vec<usize> =
                    items.iter().filter(|&&i| keep[i]).map(|&i| item_map[i]).collect();
                v.sort_unstable();
                v
            };
            let f = remap(&shuffled[..k]);
            let t = remap(&shuffled[k..]);
            if f.is_empty() || t.is_empty() {
                excluded += 1;
                continue;
            }
            ids.push(x.user_ids()[u].clone());
            foldins.push(f);
            targets.push(t);
        }
        if excluded > 0 {
            warn!("{name}: excluded {excluded} held-out users with empty fold-in or targets");
        }
        if ids.is_empty() {
            return Err(Error::Split(format!("{name}: every held-out user was excluded")));
        }
        Ok(HeldOutSet {
            foldin: InteractionMatrix::from_rows(ids, item_ids.clone(), foldins)?,
            targets,
            excluded,
        })
    };
    let validation = holdout(&val_users, "validation")?;
    let test = holdout(&test_users, "test")?;
    Ok(Split {
        train,
        validation,
        test,
    })
}

/// Write rows as the sparse-triplet text format: header `n_users n_items nnz`
/// then one `user_index item_index` pair per line.
pub fn write_triplets(path: impl AsRef<Path>, n_items: usize, rows: &[&[usize]]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let nnz: usize = rows.iter().map(|r| r.len()).sum();
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "{} {} {}", rows.len(), n_items, nnz)?;
        for (u, row) in rows.iter().enumerate() {
            for &i in row.iter() {
                writeln!(w, "{u} {i}")?;
            }
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

/// Read the sparse-triplet format back as `(n_items, rows)`.
pub fn read_triplets(path: impl AsRef<Path>) -> Result<(usize, Vec<Vec<usize>>)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let parse_err = |line: u64, message: String| Error::Parse { line, message };
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(|e| Error::io(path, e))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    let [n_users, n_items, nnz] = nums[..] else {
        return Err(parse_err(1, "header must be `n_users n_items nnz`".into()));
    };
    let mut rows = vec![Vec::new(); n_users];
    let mut count = 0;
    for (k, line) in lines.enumerate() {
        let lineno = k as u64 + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        let (Some(Ok(u)), Some(Ok(i)), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(lineno, format!("bad pair `{line}`")));
        };
        if u >= n_users || i >= n_items {
            return Err(parse_err(lineno, format!("pair ({u}, {i}) out of range")));
        }
        rows[u].push(i);
        count += 1;
    }
    if count != nnz {
        return Err(parse_err(1, format!("header declares {nnz} entries, found {count}")));
    }
    Ok((n_items, rows))
}

pub fn write_ids<'a>(path: impl AsRef<Path>, ids: impl IntoIterator<Item = &'a String>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let body = || -> std::io::Result<()> {
        for id in ids {
            writeln!(w, "{id}")?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

pub fn read_ids(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .collect()
}

const TRAIN_FILE: &str = "train.txt";
const ITEMS_FILE: &str = "items.txt";

/// Write a split to `dir`: `train.txt`, `{validation,test}_{foldin,targets}.txt`
/// in the triplet format, plus the id vocabularies
/// (`items.txt`, `{train,validation,test}_users.txt`).
pub fn write_split(dir: impl AsRef<Path>, split: &Split) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n_items = split.train.n_items();
    let train_rows: Vec<&[usize]> = split.train.rows().collect();
    write_triplets(dir.join(TRAIN_FILE), n_items, &train_rows)?;
    write_ids(dir.join(ITEMS_FILE), split.train.item_ids())?;
    write_ids(dir.join("train_users.txt"), split.train.user_ids())?;
    for (name, h) in [("validation", &split.validation), ("test", &split.test)] {
        let foldin: Vec<&[usize]> = h.foldin.rows().collect();
        let targets: Vec<&[usize]> = h.targets.iter().map(Vec::as_slice).collect();
        write_triplets(dir.join(format!("{name}_foldin.txt")), n_items, &foldin)?;
        write_triplets(dir.join(format!("{name}_targets.txt")), n_items, &targets)?;
        write_ids(dir.join(format!("{name}_users.txt")), h.foldin.user_ids())?;
    }
    Ok(())
}

fn read_matrix(dir: &Path, rows_file: &str, users_file: &str, items: &[String]) -> Result<InteractionMatrix> {
    let (n_items, rows) = read_triplets(dir.join(rows_file))?;
    if n_items != items.len() {
        return Err(Error::DimensionMismatch {
            expected: items.len(),
            found: n_items,
        });
    }
    InteractionMatrix::from_rows(read_ids(dir.join(users_file))?, items.to_vec(), rows)
}

pub fn read_train(dir: impl AsRef<Path>) -> Result<InteractionMatrix> {
    let dir = dir.as_ref();
    let items = read_ids(dir.join(ITEMS_FILE))?;
    read_matrix(dir, TRAIN_FILE, "train_users.txt", &items)
}

/// Read one held-out part (`"validation"` or `"test"`) of a split directory.
pub fn read_heldout(dir: impl AsRef<Path>, name: &str) -> Result<HeldOutSet> {
    let dir = dir.as_ref();
    let items = read_ids(dir.join(ITEMS_FILE))?;
    let foldin = read_matrix(
        dir,
        &format!("{name}_foldin.txt"),
        &format!("{name}_users.txt"),
        &items,
    )?;
    let (n_items, mut targets) = read_triplets(dir.join(format!("{name}_targets.txt")))?;
    if n_items != items.len() || targets.len() != foldin.n_users() {
        return Err(Error::Format(format!("{name} targets do not match the fold-in matrix")));
    }
    for t in &mut targets {
        t.sort_unstable();
        t.dedup();
    }
    Ok(HeldOutSet {
        foldin,
        targets,
        excluded: 0,
    })
}

pub fn read_split(dir: impl AsRef<Path>) -> Result<Split> {
    let dir = dir.as_ref();
    Ok(Split {
        train: read_train(dir)?,
        validation: read_heldout(dir, "validation")?,
        test: read_heldout(dir, "test")?,
    })
}

/// Group a raw fold-in listing (`user_id, item_id` pairs) into per-user item
/// index lists against `items`. Unknown items are skipped and counted.
pub fn group_foldin(
    raw: &[RawInteraction],
    items: &IndexSet<String>,
) -> (Vec<String>, Vec<Vec<usize>>, usize) {
    let mut grouped: IndexMap<&str, Vec<usize>> = IndexMap::new();
    let mut unknown = 0;
    for r in raw {
        let entry = grouped.entry(r.user_id.as_str()).or_default();
        match items.get_index_of(&r.item_id) {
            Some(i) => entry.push(i),
            None => unknown += 1,
        }
    }
    let mut users = Vec::with_capacity(grouped.len());
    let mut rows = Vec::with_capacity(grouped.len());
    for (u, mut row) in grouped {
        row.sort_unstable();
        row.dedup();
        users.push(u.to_string());
        rows.push(row);
    }
    (users, rows, unknown)
}

/// Map of id -> index for quick reverse lookups outside the matrix.
pub fn index_of(ids: &[String]) -> HashMap<&str, usize> {
    ids.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect()
}
