//! Command-line pipeline around the `wrec` library: preprocess, train,
//! evaluate and recommend.

pub mod commands;
pub mod config;
pub mod error;
pub mod model_file;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::error::{CliError, EXIT_GENERIC};

#[derive(Debug, Parser)]
#[command(name = "wrec", version, about = "Item-item similarity models for implicit feedback")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// ridge, ease, zca, embed_dot, embed_ridge or embed_ease.
    #[arg(long, global = true)]
    pub kind: Option<String>,
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    #[arg(long = "embedding-dim", global = true)]
    pub embedding_dim: Option<usize>,
    /// primal, dual or auto.
    #[arg(long, global = true)]
    pub form: Option<String>,
    /// Comma-separated cutoffs, e.g. 20,50,100.
    #[arg(long, global = true)]
    pub cutoffs: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker thread cap for the numerical kernels.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Directory with the split files (default: the output directory).
    #[arg(long, global = true)]
    pub split: Option<PathBuf>,
    #[arg(long = "max-dense-dim", global = true)]
    pub max_dense_dim: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter raw interactions and write a strong-generalization split.
    Preprocess {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Fit a similarity matrix on the training split and save it.
    Train {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score a saved model on held-out users.
    Evaluate {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Held-out part: test or validation.
        #[arg(long, default_value = "test")]
        on: String,
    },
    /// Write top-N lists for users given as user_id,item_id rows.
    Recommend {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        users: PathBuf,
        #[arg(short = 'n', long = "top", default_value_t = 20)]
        n: usize,
    },
}

impl CommonArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut push = |k, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        push("kind", self.kind.clone());
        push("lambda", self.lambda.map(|v| v.to_string()));
        push("embedding_dim", self.embedding_dim.map(|v| v.to_string()));
        push("form", self.form.clone());
        push("cutoffs", self.cutoffs.clone());
        push("rng_seed", self.seed.map(|v| v.to_string()));
        push("threads", self.threads.map(|v| v.to_string()));
        push("output", self.output.as_ref().map(|p| p.display().to_string()));
        push("split_dir", self.split.as_ref().map(|p| p.display().to_string()));
        push("max_dense_dim", self.max_dense_dim.map(|v| v.to_string()));
        out
    }

    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        for (k, v) in self.overrides() {
            cfg.set(k, &v)?;
        }
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut cfg = cli.common.resolve()?;
    let default_model = |m: Option<PathBuf>, cfg: &PipelineConfig| {
        m.unwrap_or_else(|| cfg.output.join(commands::MODEL_FILE))
    };
    let run = |cfg: &mut PipelineConfig| -> Result<(), CliError> {
        match cli.command {
            Command::Preprocess { input } => {
                if let Some(input) = input {
                    cfg.input = Some(input);
                }
                commands::cmd_preprocess(cfg)
            }
            Command::Train { model } => commands::cmd_train(cfg, model.as_deref()).map(|_| ()),
            Command::Evaluate { model, on } => {
                let model = default_model(model, cfg);
                commands::cmd_evaluate(cfg, &model, &on).map(|_| ())
            }
            Command::Recommend { model, users, n } => {
                let model = default_model(model, cfg);
                commands::cmd_recommend(cfg, &model, &users, n).map(|_| ())
            }
        }
    };
    match cfg.threads {
        Some(0) => Err(CliError::usage("threads must be at least 1")),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::usage(format!("cannot start thread pool: {e}")))?;
            pool.install(|| run(&mut cfg))
        }
        None => run(&mut cfg),
    }
}

/// Parse arguments, run the command and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_GENERIC } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
