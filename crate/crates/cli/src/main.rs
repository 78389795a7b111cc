use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use semhash_cli::commands::{self, QueryInput};
use semhash_cli::config::PipelineConfig;

/// Semantic hashing retrieval pipeline.
#[derive(Parser)]
#[command(name = "semhash", version)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 = one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize, build the vocabulary and vectorize the corpus.
    Ingest,
    /// Train the autoencoder.
    Train,
    /// Hash the training documents and build the hamming index.
    Index,
    /// Search with free text or a stored document; prints one JSON line.
    Query {
        #[arg(long, conflicts_with = "doc", required_unless_present = "doc")]
        text: Option<String>,
        #[arg(long)]
        doc: Option<u64>,
        /// Shorthand for --set query.variant=...
        #[arg(long)]
        variant: Option<String>,
    },
    /// Precision@k report over the query documents.
    Eval,
    /// Print an artifact (store, network, rbm, index) as JSON.
    Inspect { artifact: String },
}

fn resolve(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &cli.config {
        cfg.merge_file(path)?;
    }
    for pair in &cli.overrides {
        cfg.set_pair(pair)?;
    }
    if let Some(Command::Query { variant: Some(v), .. }) = &cli.command {
        cfg.set("query.variant", v)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(threads) = cli.threads {
        cfg.set("threads", &threads.to_string())?;
    }
    Ok(cfg)
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> Result<()> {
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: usize) -> Result<()> {
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    if cli.print_config {
        print!("{cfg}");
        return Ok(());
    }
    let Some(command) = &cli.command else {
        anyhow::bail!("no command given; see --help");
    };
    set_threads(cfg.get("threads")?)?;
    let stdout = std::io::stdout();
    match command {
        Command::Ingest => {
            commands::prepare_run_dir(&cfg)?;
            let path = commands::ingest(&cfg)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Train => {
            commands::prepare_run_dir(&cfg)?;
            let path = commands::train_stage(&cfg)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Index => {
            commands::prepare_run_dir(&cfg)?;
            let path = commands::index(&cfg)?;
            eprintln!("wrote {}", path.display());
        }
        Command::Query { text, doc, .. } => {
            let input = match (text, doc) {
                (Some(t), _) => QueryInput::Text(t.clone()),
                (None, Some(id)) => QueryInput::Doc(*id),
                (None, None) => unreachable!("clap requires one of --text/--doc"),
            };
            commands::query(&cfg, &input, &mut stdout.lock())?;
        }
        Command::Eval => {
            commands::prepare_run_dir(&cfg)?;
            let (csv, json) = commands::eval(&cfg)?;
            eprintln!("wrote {} and {}", csv.display(), json.display());
        }
        Command::Inspect { artifact } => commands::inspect(&cfg, artifact, &mut stdout.lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
