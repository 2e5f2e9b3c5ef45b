//! `bondlab` command-line interface.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
//! error.

use bondlab::config::{self, RunConfig, SyntheticConfig};
use bondlab::{exit_code, io, pipeline, synth};
use bondlab_core::{Error, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "bondlab", about = "Corporate bond asset-pricing laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and filter trades and the bond master, emitting clean files
    /// and a JSON filter report.
    Ingest {
        #[arg(long)]
        trades: PathBuf,
        #[arg(long)]
        master: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Build the monthly bond-return panel only.
    Panel {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full pipeline and emit all report tables.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic universe with ground-truth files.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest {
            trades,
            master,
            out,
            report,
        } => {
            std::fs::create_dir_all(&out)
                .map_err(|e| Error::data(format!("cannot create {}: {e}", out.display())))?;
            let (clean_trades, universe, reports) = pipeline::run_ingest(&trades, &master)?;
            io::write_trades(&out.join("clean_trades.csv"), &clean_trades)?;
            let ids: Vec<Vec<String>> = universe
                .iter()
                .map(|b| {
                    vec![
                        b.master.bond_id.clone(),
                        b.master.issuer_id.clone(),
                        format!("{}", b.amount_outstanding),
                    ]
                })
                .collect();
            io::write_table(
                &out.join("universe.csv"),
                &["bond_id", "issuer_id", "amount_outstanding"],
                &ids,
            )?;
            let text = serde_json::to_string_pretty(&reports)
                .map_err(|e| Error::data(format!("cannot serialize filter report: {e}")))?;
            std::fs::write(&report, text + "\n")
                .map_err(|e| Error::data(format!("cannot write {}: {e}", report.display())))?;
            println!(
                "ingest: {} clean trades, {} eligible bonds",
                clean_trades.len(),
                universe.len()
            );
        }
        Command::Panel { config } => {
            let cfg: RunConfig = config::load(&config)?;
            let path = pipeline::run_panel(&cfg)?;
            println!("panel: wrote {}", path.display());
        }
        Command::Run { config } => {
            let cfg: RunConfig = config::load(&config)?;
            let bundle = pipeline::run_pipeline(&cfg)?;
            println!(
                "run: {} reports in {} (csr assets: {})",
                bundle.files.len(),
                bundle.out_dir.display(),
                bundle.csr_assets
            );
        }
        Command::Synth { config, out } => {
            let cfg: SyntheticConfig = config::load(&config)?;
            let uni = synth::gen_universe(&cfg, &out)?;
            println!(
                "synth: {} files in {} ({} true bond-month returns)",
                uni.files.len(),
                out.display(),
                uni.truth.returns.len()
            );
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
