//! Command-line entry point: sample, annotate, build-dataset, toy-train, evaluate, verify.

pub mod commands;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use commands::*;
pub use config::{write_mock_workspace, ConfigError, DecoderConfig, DefectSpec, PipelineConfig, StudentConfig};

use crate::annotation::TargetKind;
use crate::eval::metric_config_digest;
use crate::provenance::Provenance;

const DEFAULT_CONFIG: &str = "roadscene.toml";

#[derive(Debug, Parser)]
#[command(name = "roadscene", version, about = "Traffic clip annotation, SFT dataset building and caption evaluation")]
pub struct Cli {
    /// Pipeline config (TOML). Defaults to ./roadscene.toml.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker cap for per-clip work.
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// Provider response cache directory.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Report per-clip failures but exit 0.
    #[arg(long, global = true)]
    pub keep_going: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample and normalize frames for every manifest clip.
    Sample {
        /// Sampling interval in seconds.
        #[arg(long)]
        interval: Option<f64>,
    },
    /// Run the scene and risk agents and write unified annotations.
    Annotate,
    /// Write the SFT dataset from annotations and frames.
    BuildDataset {
        #[arg(long, default_value = "unified", value_parser = ["unified", "template"])]
        target: String,
    },
    /// Train the toy student and decode its outputs.
    ToyTrain {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        /// Sequences per update; 0 is full batch.
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Score candidate outputs against references.
    Evaluate {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        references: PathBuf,
        #[arg(long, default_value = "run")]
        run_tag: String,
        /// Directory for report.txt and report.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute composite scores of benchmark rows.
    Verify {
        /// JSONL rows to check instead of the built-in table.
        #[arg(long)]
        rows: Option<PathBuf>,
        /// Write the table and checks here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Process exit status.
pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURES: u8 = 1;
pub const EXIT_ERROR: u8 = 2;

impl Cli {
    /// Loads the config and applies the global overrides.
    pub fn pipeline_config(&self) -> Result<PipelineConfig, CliError> {
        let path = self.config.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_CONFIG));
        let mut cfg = PipelineConfig::load(&path)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(c) = self.concurrency {
            cfg.concurrency = c;
        }
        if let Some(dir) = &self.cache_dir {
            cfg.cache_dir = dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> u8 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn failures_exit(count: usize, keep_going: bool) -> u8 {
    if count == 0 || keep_going {
        EXIT_OK
    } else {
        EXIT_FAILURES
    }
}

fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Sample { interval } => {
            let mut cfg = cli.pipeline_config()?;
            if let Some(i) = interval {
                cfg.interval_s = *i;
                cfg.validate()?;
            }
            let s = cmd_sample(&cfg)?;
            println!(
                "sample: {} clips, {} sampled, {} already present, {} frames, {} failed",
                s.clips,
                s.sampled,
                s.skipped,
                s.frames,
                s.failures.len()
            );
            for (id, why) in &s.failures {
                eprintln!("  {id}: {why}");
            }
            Ok(failures_exit(s.failures.len(), cli.keep_going))
        }
        Command::Annotate => {
            let cfg = cli.pipeline_config()?;
            let s = cmd_annotate(&cfg)?;
            println!(
                "annotate: {} clips, {} annotated, {} quarantined, {} provider calls",
                s.clips, s.annotated, s.quarantined, s.provider_calls
            );
            if s.quarantined > 0 {
                eprintln!("  see {}", cfg.annotations_dir.join(QUARANTINE_FILE).display());
            }
            Ok(failures_exit(s.quarantined, cli.keep_going))
        }
        Command::BuildDataset { target } => {
            let cfg = cli.pipeline_config()?;
            let target = if target == "template" { TargetKind::Template } else { TargetKind::Unified };
            let s = match cmd_build_dataset(&cfg, target, cli.keep_going) {
                Ok(s) => s,
                Err(e @ CliError::Clip { .. }) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_FAILURES);
                }
                Err(e) => return Err(e),
            };
            println!("build-dataset: {} records -> {}", s.records, cfg.dataset_path.display());
            for (id, why) in &s.skipped {
                eprintln!("  skipped {id}: {why}");
            }
            Ok(EXIT_OK)
        }
        Command::ToyTrain { epochs, lr, batch_size } => {
            let cfg = cli.pipeline_config()?;
            let mut train = cfg.student.train_config();
            train.epochs = epochs.unwrap_or(train.epochs);
            train.learning_rate = lr.unwrap_or(train.learning_rate);
            train.batch_size = batch_size.unwrap_or(train.batch_size);
            let s = cmd_toy_train(&cfg, &train)?;
            println!(
                "toy-train: {} clips, vocab {}, {} parameters, {} updates",
                s.clips, s.vocab_size, s.parameters, s.report.updates
            );
            for (e, loss) in s.report.trajectory().iter().enumerate() {
                println!("  epoch {e}: mean loss {loss:.6}");
            }
            println!("  checkpoint {}", s.checkpoint.display());
            Ok(EXIT_OK)
        }
        Command::Evaluate { candidates, references, run_tag, out } => {
            let report = match cmd_evaluate(candidates, references, run_tag) {
                Ok(r) => r,
                Err(e @ CliError::Eval(_)) => {
                    eprintln!("error: {e}");
                    return Ok(EXIT_FAILURES);
                }
                Err(e) => return Err(e),
            };
            print!("{}", report.human);
            if let Some(dir) = out {
                write_evaluation(dir, &report, &standalone_provenance(cli))?;
            }
            Ok(EXIT_OK)
        }
        Command::Verify { rows, out } => {
            let (rows, checks) = cmd_verify(rows.as_deref())?;
            let table = crate::eval::render_report(&rows);
            print!("{}", table.human);
            let mut lines = String::new();
            for c in &checks {
                lines.push_str(&format!(
                    "{} {}: recomputed {:.4}, stated {:.2}\n",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.model_tag,
                    c.recomputed,
                    c.published
                ));
            }
            print!("{lines}");
            if let Some(path) = out {
                write_verify(path, &table.human, &lines, &standalone_provenance(cli))?;
            }
            Ok(if checks.iter().all(|c| c.pass) { EXIT_OK } else { EXIT_FAILURES })
        }
    }
}

fn standalone_provenance(cli: &Cli) -> Provenance {
    Provenance::new(crate::agent::PROMPT_VERSION, cli.seed.unwrap_or(0), &metric_config_digest())
}

fn write_verify(path: &Path, table: &str, lines: &str, prov: &Provenance) -> Result<(), CliError> {
    let err = |source| CliError::Io { path: path.into(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(err)?;
    }
    std::fs::write(path, format!("{table}\n{lines}")).map_err(err)?;
    crate::provenance::write_sidecar(path, prov).map_err(err)
}
