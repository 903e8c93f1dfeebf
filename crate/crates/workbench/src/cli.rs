use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::Result;
use crate::pipeline::{self, FinetuneArgs};
use crate::records_io::{read_meta, read_records, RecordMeta};
use crate::report::emit_report;

#[derive(Debug, Parser)]
#[command(
    name = "citrus",
    version,
    about = "Masked auto-encoding pre-training and transfer for bio-signals"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset from a JSON spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-train a model and write its final checkpoint.
    Pretrain {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune on one fold and append its run record.
    Finetune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        fold: usize,
        #[arg(long)]
        regime: Option<f64>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        record: PathBuf,
    },
    /// Run every fold under every model seed, appending run records.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        regime: Option<f64>,
        #[arg(long, default_value = "records.csv")]
        record: PathBuf,
    },
    /// Summarize record files into tables.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        records: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { spec, out } => {
            let set = pipeline::synth(&spec, &out)?;
            eprintln!("wrote {} windows to {}", set.len(), out.display());
        }
        Command::Pretrain { config, data, out } => {
            let cfg = RunConfig::load(&config)?;
            pipeline::pretrain(&cfg, &data, &out)?;
            eprintln!("wrote {}", out.display());
        }
        Command::Finetune {
            config,
            data,
            init,
            fold,
            regime,
            seed,
            out,
            record,
        } => {
            let cfg = RunConfig::load(&config)?;
            let args = FinetuneArgs {
                cfg: &cfg,
                data: &data,
                init: init.as_deref(),
                fold,
                regime,
                seed,
                out: &out,
                record: &record,
            };
            let (_, r) = pipeline::finetune(&args)?;
            eprintln!(
                "fold {fold} seed {seed}: acc {:.2} roc {:.2} prc {:.2}",
                r.metrics.acc, r.metrics.roc, r.metrics.prc
            );
        }
        Command::Evaluate {
            config,
            data,
            init,
            regime,
            record,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(r) = regime {
                cfg.regime_pct = r;
            }
            let records = pipeline::evaluate(
                &cfg,
                &data,
                init.as_deref(),
                &record,
                pipeline::worker_count(),
            )?;
            eprintln!("appended {} records to {}", records.len(), record.display());
        }
        Command::Report { records, out } => {
            let mut meta = RecordMeta::default();
            let mut all = Vec::new();
            for path in &records {
                meta.merge(&read_meta(path)?)?;
                all.extend(read_records(path)?);
            }
            for p in emit_report(&all, &out)? {
                eprintln!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

/// Parse `args` and run; returns the process exit code
/// (0 success, 2 usage error, 1 runtime failure).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
