use std::net::SocketAddr;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use headscope::exemplars::{render_text, RankMode};
use headscope_cli::commands::{cmd_analyze, cmd_exemplars, cmd_extract, HeadSelection};
use headscope_cli::config::{Overrides, RunConfig};
use headscope_cli::{exit_code, serve, EXIT_CONFIG};

/// Attention extraction and attention-vs-syntax statistics for GPT-2.
#[derive(Parser)]
#[command(name = "headscope", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    MaxEdge,
    TopEdgesMass,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the corpus, run the model, write the attention store.
    Extract,
    /// Compute every metric over the sample and write CSV and JSON reports.
    Analyze,
    /// Rank the sentences that most strongly drive a head.
    Exemplars {
        #[arg(long, requires = "head", conflicts_with = "all_heads")]
        layer: Option<usize>,
        #[arg(long, requires = "layer")]
        head: Option<usize>,
        /// Rank for every head instead of one.
        #[arg(long)]
        all_heads: bool,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        #[arg(long, value_enum, default_value = "max-edge")]
        mode: Mode,
        /// Edges summed per sentence under `--mode top-edges-mass`.
        #[arg(long, default_value_t = 3)]
        edges: usize,
    },
    /// Serve the JSON API for the explorer.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8000")]
        addr: SocketAddr,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let result = RunConfig::load(&cli.overrides).and_then(|c| match cli.command {
        Cmd::Extract => cmd_extract(&c).map(|p| println!("{}", p.display())),
        Cmd::Analyze => cmd_analyze(&c).map(|_| println!("{}", c.output_dir.join("report.json").display())),
        Cmd::Exemplars {
            layer,
            head,
            all_heads,
            k,
            mode,
            edges,
        } => {
            let heads = match (layer, head) {
                (Some(layer), Some(head)) => HeadSelection::One { layer, head },
                _ if all_heads => HeadSelection::All,
                _ => {
                    return Err(headscope::Error::Config {
                        field: "layer".into(),
                        message: "pass --layer and --head, or --all-heads".into(),
                    })
                }
            };
            let mode = match mode {
                Mode::MaxEdge => RankMode::MaxEdge,
                Mode::TopEdgesMass => RankMode::TopEdgesMass { edges },
            };
            cmd_exemplars(&c, &heads, k, mode).map(|out| print!("{}", render_text(&out)))
        }
        Cmd::Serve { addr } => serve(&c, addr),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
