use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use flowbot_core::config::Assets;
use flowbot_core::engine::Engine;
use flowbot_service::{cli, router};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "flowbot", version, about = "Travel-destination recommendation dialogue engine")]
struct Args {
    /// Directory for session transcripts; overrides the configuration.
    #[arg(long, global = true, env = "DATA_DIR")]
    data_dir: Option<PathBuf>,
    /// Tracing filter, e.g. `info` or `flowbot_core=debug`.
    #[arg(long, global = true, env = "LOG_LEVEL", default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP and WebSocket API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "config/engine.toml")]
        config: PathBuf,
    },
    /// Talk to the engine in the terminal.
    Chat {
        #[arg(long, default_value = "config/engine.toml")]
        config: PathBuf,
    },
    /// Run a simulator script, or a random customer when only a seed is given.
    Simulate {
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "config/engine.toml")]
        config: PathBuf,
        /// Customer turns of a random script.
        #[arg(long, default_value_t = 40)]
        steps: usize,
        /// Print the full report, transcript included, as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Validate ontology, templates and cues against what the policy can say.
    Check {
        #[arg(long, default_value = "config/engine.toml")]
        config: PathBuf,
    },
}

fn engine(config: &std::path::Path, data_dir: Option<PathBuf>, seed: Option<u64>) -> anyhow::Result<Engine> {
    let mut config = cli::load_config(config, data_dir)?;
    if seed.is_some() {
        config.fixed_seed = seed;
    }
    Ok(Engine::new(Arc::new(Assets::build(config)?)))
}

async fn serve(engine: Engine, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(Arc::new(engine)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn run(args: Args) -> anyhow::Result<bool> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let ok = match args.command {
        Command::Serve { port, config } => {
            let engine = engine(&config, args.data_dir, None)?;
            tokio::runtime::Runtime::new()?.block_on(serve(engine, port))?;
            true
        }
        Command::Chat { config } => {
            let engine = engine(&config, args.data_dir, None)?;
            cli::chat(&engine, io::stdin().lock(), &mut out)?;
            true
        }
        Command::Simulate {
            script,
            seed,
            config,
            steps,
            json,
        } => {
            let engine = engine(&config, args.data_dir, seed)?;
            cli::simulate(&engine, script.as_deref(), steps, json, &mut out)?
        }
        Command::Check { config } => {
            let assets = Assets::build(cli::load_config(&config, args.data_dir)?)?;
            cli::check(&assets, &mut out)?
        }
    };
    out.flush()?;
    Ok(ok)
}

fn main() -> ExitCode {
    let args = Args::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&args.log_level).unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .init();
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
