//! Flat `key = value` pipeline configuration.

use std::path::{Path, PathBuf};

use wrec::{Limits, RidgeForm, SimilarityKind, SplitSpec};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Raw interaction file for `preprocess`.
    pub input: Option<PathBuf>,
    /// Directory holding the split files; defaults to `output`.
    pub split_dir: Option<PathBuf>,
    pub output: PathBuf,
    pub split: SplitSpec,
    pub kind: SimilarityKind,
    pub lambda: f64,
    pub form: RidgeForm,
    pub embedding_dim: Option<usize>,
    pub cutoffs: Vec<usize>,
    pub threads: Option<usize>,
    pub limits: Limits,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: None,
            split_dir: None,
            output: PathBuf::from("."),
            split: SplitSpec::default(),
            kind: SimilarityKind::Ridge,
            lambda: 200.0,
            form: RidgeForm::Auto,
            embedding_dim: None,
            cutoffs: vec![20, 50, 100],
            threads: None,
            limits: Limits::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::usage(format!("invalid value `{value}` for `{key}`")))
}

fn optional(value: &str) -> Option<&str> {
    match value {
        "" | "none" => None,
        v => Some(v),
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Apply `key = value` lines; blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("config line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "input" => self.input = optional(value).map(PathBuf::from),
            "split_dir" => self.split_dir = optional(value).map(PathBuf::from),
            "output" => self.output = PathBuf::from(value),
            "kind" => self.kind = value.parse().map_err(CliError::from)?,
            "lambda" => self.lambda = parse(key, value)?,
            "form" => self.form = value.parse().map_err(CliError::from)?,
            "embedding_dim" => {
                self.embedding_dim = optional(value).map(|v| parse(key, v)).transpose()?
            }
            "cutoffs" => {
                self.cutoffs = value
                    .split(',')
                    .map(|c| parse(key, c.trim()))
                    .collect::<Result<_, _>>()?
            }
            "threads" => self.threads = optional(value).map(|v| parse(key, v)).transpose()?,
            "max_dense_dim" => self.limits.max_dense_dim = parse(key, value)?,
            "rng_seed" | "seed" => self.split.rng_seed = parse(key, value)?,
            "heldout_user_fraction" => self.split.heldout_user_fraction = parse(key, value)?,
            "foldin_fraction" => self.split.foldin_fraction = parse(key, value)?,
            "min_user_interactions" => self.split.min_user_interactions = parse(key, value)?,
            "min_item_interactions" => self.split.min_item_interactions = parse(key, value)?,
            "rating_threshold" => {
                self.split.rating_threshold = optional(value).map(|v| parse(key, v)).transpose()?
            }
            other => return Err(CliError::usage(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    pub fn split_dir(&self) -> &Path {
        self.split_dir.as_deref().unwrap_or(&self.output)
    }

    /// Checks that must hold before any model is built.
    pub fn validate_model(&self) -> Result<(), CliError> {
        if self.kind.needs_lambda() && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(CliError::usage(format!(
                "kind {} requires lambda > 0, got {}",
                self.kind, self.lambda
            )));
        }
        match (self.kind.is_embedding(), self.embedding_dim) {
            (true, None) => Err(CliError::usage(format!("kind {} requires embedding_dim", self.kind))),
            (true, Some(0)) => Err(CliError::usage("embedding_dim must be at least 1")),
            (false, Some(_)) => Err(CliError::usage(format!(
                "embedding_dim is only valid for embed_* kinds, not {}",
                self.kind
            ))),
            _ => Ok(()),
        }
    }

    pub fn validate_cutoffs(&self) -> Result<(), CliError> {
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(CliError::usage("cutoffs must be a non-empty list of positive counts"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_text() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(
            "# experiment\nkind = embed_ridge\nlambda = 1.5\nembedding_dim = 8 # small\n\
             cutoffs = 10, 20\nrating_threshold = none\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, SimilarityKind::EmbedRidge);
        assert_eq!(cfg.lambda, 1.5);
        assert_eq!(cfg.embedding_dim, Some(8));
        assert_eq!(cfg.cutoffs, vec![10, 20]);
        assert_eq!(cfg.split.rating_threshold, None);
        assert_eq!(cfg.split.rng_seed, 7);
        cfg.validate_model().unwrap();
    }

    #[test]
    fn rejects_bad_lines() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.apply_text("lambda 3").is_err());
        assert!(cfg.apply_text("colour = red").is_err());
        assert!(cfg.apply_text("lambda = abc").is_err());
    }

    #[test]
    fn model_validation() {
        let mut cfg = PipelineConfig {
            kind: SimilarityKind::EmbedRidge,
            ..Default::default()
        };
        assert!(cfg.validate_model().is_err());
        cfg.kind = SimilarityKind::Ease;
        cfg.embedding_dim = Some(4);
        assert!(cfg.validate_model().is_err());
        cfg.embedding_dim = None;
        cfg.lambda = 0.0;
        assert!(cfg.validate_model().is_err());
        cfg.kind = SimilarityKind::EmbedDot;
        cfg.embedding_dim = Some(4);
        cfg.validate_model().unwrap();
    }
}
