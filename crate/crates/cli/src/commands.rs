//! The four pipeline verbs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use indexmap::IndexSet;
use log::{info, warn};
use serde_json::json;

use wrec::autoencoder::ease_with_limits;
use wrec::embedding::{embed_ease_with_limits, save_embeddings, svd_embed_with_limits};
use wrec::evalmetrics::Metric;
use wrec::ingest::{self, group_foldin, load_interactions_with, HeaderMode, InputFormat};
use wrec::recommend::{score_user, top_n, write_ranked_csv, RankedList};
use wrec::whitening::zca_similarity_with_limits;
use wrec::{
    embed_dot, embed_ridge, evaluate, preprocess, ridge, split_strong_generalization,
    EmbeddingMatrix, InteractionMatrix, RidgeConfig, SimilarityKind, SimilarityMatrix,
};

use crate::config::PipelineConfig;
use crate::error::{CliError, EXIT_COMPAT};
use crate::model_file::ModelFile;

pub const SUMMARY_FILE: &str = "summary.json";
pub const MODEL_FILE: &str = "model.bin";
pub const EMBEDDING_FILE: &str = "embeddings.bin";
pub const REPORT_FILE: &str = "report.json";
pub const PER_USER_FILE: &str = "per_user.csv";
pub const RECOMMENDATIONS_FILE: &str = "recommendations.csv";

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn shape(x: &InteractionMatrix) -> serde_json::Value {
    json!({ "users": x.n_users(), "items": x.n_items(), "nnz": x.nnz() })
}

/// Load raw interactions, filter, split and write the split directory.
pub fn cmd_preprocess(cfg: &PipelineConfig) -> Result<(), CliError> {
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::usage("preprocess needs an input file (--input or `input =`)"))?;
    cfg.split.validate()?;
    let raw = ingest::load_interactions(input, InputFormat::from_path(input))?;
    let x = preprocess(&raw, &cfg.split)?;
    let split = split_strong_generalization(&x, &cfg.split)?;
    let dir = cfg.split_dir();
    create_dir(dir)?;
    ingest::write_split(dir, &split)?;

    let heldout = |h: &wrec::HeldOutSet| {
        let mut v = shape(&h.foldin);
        v["targets_nnz"] = json!(h.targets.iter().map(Vec::len).sum::<usize>());
        v["excluded"] = json!(h.excluded);
        v
    };
    let summary = json!({
        "raw_interactions": raw.len(),
        "filtered": shape(&x),
        "train": shape(&split.train),
        "validation": heldout(&split.validation),
        "test": heldout(&split.test),
        "rng_seed": cfg.split.rng_seed,
    });
    write_json(&dir.join(SUMMARY_FILE), &summary)?;
    println!(
        "split {} users x {} items: train {} users, validation {}, test {} ({} items kept)",
        x.n_users(),
        x.n_items(),
        split.train.n_users(),
        split.validation.n_users(),
        split.test.n_users(),
        split.train.n_items()
    );
    Ok(())
}

/// Build the configured similarity matrix from a training matrix, along
/// with the embeddings it was derived from for `embed_*` kinds.
pub fn build_model(
    x: &InteractionMatrix,
    cfg: &PipelineConfig,
) -> Result<(SimilarityMatrix, Option<EmbeddingMatrix>), CliError> {
    cfg.validate_model()?;
    let limits = &cfg.limits;
    limits.check(x.n_items())?;
    let rcfg = RidgeConfig {
        lambda: cfg.lambda,
        form: cfg.form,
        limits: *limits,
    };
    Ok(match cfg.kind {
        SimilarityKind::Ridge => (ridge(x, &rcfg)?, None),
        SimilarityKind::Ease => (ease_with_limits(x, cfg.lambda, limits)?.b, None),
        SimilarityKind::Zca => (zca_similarity_with_limits(x, cfg.lambda, limits)?, None),
        kind => {
            let e = train_embeddings(x, cfg)?;
            let b = match kind {
                SimilarityKind::EmbedDot => embed_dot(&e)?,
                SimilarityKind::EmbedRidge => embed_ridge(&e, cfg.lambda)?,
                _ => embed_ease_with_limits(&e, cfg.lambda, limits)?,
            };
            (b, Some(e))
        }
    })
}

fn effective_dim(x: &InteractionMatrix, requested: usize) -> usize {
    let cap = x.n_users().min(x.n_items());
    if requested > cap {
        warn!("embedding_dim {requested} exceeds min(|U|, |I|) = {cap}; using {cap}");
    }
    requested.min(cap)
}

pub fn train_embeddings(x: &InteractionMatrix, cfg: &PipelineConfig) -> Result<EmbeddingMatrix, CliError> {
    let dim = effective_dim(x, cfg.embedding_dim.unwrap_or(1));
    Ok(svd_embed_with_limits(x, dim, &cfg.limits)?)
}

/// Train on `train.txt` of the split directory and save a model file.
pub fn cmd_train(cfg: &PipelineConfig, model_path: Option<&Path>) -> Result<PathBuf, CliError> {
    cfg.validate_model()?;
    let x = ingest::read_train(cfg.split_dir())?;
    x.check_nonempty()?;
    create_dir(&cfg.output)?;
    let start = Instant::now();
    let (b, embeddings) = build_model(&x, cfg)?;
    let elapsed = start.elapsed();
    if let Some(e) = embeddings {
        save_embeddings(cfg.output.join(EMBEDDING_FILE), &e)?;
    }
    let model = ModelFile::new(b, x.item_ids().iter().cloned().collect())?;
    let path = model_path.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.join(MODEL_FILE));
    model.save(&path)?;
    println!(
        "trained {} model: {} x {} in {:.3}s -> {}",
        cfg.kind,
        model.matrix.dim(),
        model.matrix.dim(),
        elapsed.as_secs_f64(),
        path.display()
    );
    Ok(path)
}

/// Held-out users dropped at split time, as recorded by `preprocess`.
fn split_time_exclusions(dir: &Path, part: &str) -> usize {
    let Ok(text) = std::fs::read_to_string(dir.join(SUMMARY_FILE)) else {
        return 0;
    };
    serde_json::from_str::<serde_json::Value>(&text)
        .ok()
        .and_then(|v| v[part]["excluded"].as_u64())
        .unwrap_or(0) as usize
}

/// Evaluate a saved model on a held-out part (`test` or `validation`).
pub fn cmd_evaluate(cfg: &PipelineConfig, model_path: &Path, part: &str) -> Result<serde_json::Value, CliError> {
    cfg.validate_cutoffs()?;
    if part != "test" && part != "validation" {
        return Err(CliError::usage(format!("unknown held-out part `{part}`")));
    }
    let model = ModelFile::load(model_path)?;
    let dir = cfg.split_dir();
    let items = ingest::read_ids(dir.join("items.txt"))?;
    if items != model.item_ids {
        return Err(CliError::new(
            EXIT_COMPAT,
            format!(
                "model vocabulary ({} items) does not match the split vocabulary ({} items)",
                model.item_ids.len(),
                items.len()
            ),
        ));
    }
    let mut heldout = ingest::read_heldout(dir, part)?;
    heldout.excluded = split_time_exclusions(dir, part);
    let report = evaluate(&heldout, &model.matrix, &cfg.cutoffs)?;

    create_dir(&cfg.output)?;
    let value = json!({
        "model": {
            "kind": model.matrix.kind.as_str(),
            "dim": model.matrix.dim(),
            "lambda": model.matrix.config.lambda,
            "embedding_dim": model.matrix.config.embedding_dim,
        },
        "split": part,
        "report": serde_json::to_value(report.summary()).expect("summary serializes"),
    });
    write_json(&cfg.output.join(REPORT_FILE), &value)?;
    report.write_per_user_csv(cfg.output.join(PER_USER_FILE))?;

    println!("{} users evaluated, {} excluded", report.n_users_evaluated, report.excluded_users);
    println!("{:>8} {:>10} {:>10}", "R", "Recall", "NDCG");
    for &r in &report.cutoffs {
        println!(
            "{:>8} {:>10.5} {:>10.5}",
            r,
            report.mean(Metric::Recall, r).unwrap_or(f64::NAN),
            report.mean(Metric::Ndcg, r).unwrap_or(f64::NAN)
        );
    }
    Ok(value)
}

/// Rank `n` unseen items for every user listed in a `user_id,item_id` file.
pub fn cmd_recommend(
    cfg: &PipelineConfig,
    model_path: &Path,
    users_path: &Path,
    n: usize,
) -> Result<PathBuf, CliError> {
    if n == 0 {
        return Err(CliError::usage("N must be at least 1"));
    }
    let model = ModelFile::load(model_path)?;
    let raw = load_interactions_with(users_path, InputFormat::from_path(users_path), HeaderMode::Auto)?;
    let vocab: IndexSet<String> = model.item_ids.iter().cloned().collect();
    let (users, rows, unknown) = group_foldin(&raw, &vocab);
    if unknown > 0 {
        warn!("skipped {unknown} fold-in entries with unknown item ids");
    }
    let mut lists = Vec::new();
    let mut empty = 0;
    for (u, history) in rows.iter().enumerate() {
        if history.is_empty() {
            empty += 1;
            continue;
        }
        let scores = score_user(history, &model.matrix)?;
        let mut list: RankedList = top_n(&scores, history, n)?;
        list.user = u;
        lists.push(list);
    }
    if empty > 0 {
        warn!("{empty} users have an empty fold-in and receive no recommendations");
    }
    create_dir(&cfg.output)?;
    let out = cfg.output.join(RECOMMENDATIONS_FILE);
    write_ranked_csv(&out, &lists, &users, &model.item_ids)?;
    info!("wrote {} ranked lists", lists.len());
    println!(
        "recommended for {} users ({} empty fold-ins, {} unknown items skipped) -> {}",
        lists.len(),
        empty,
        unknown,
        out.display()
    );
    Ok(out)
}
