use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use storyvocab_core::domain::{JobState, MaterialSetId, Theme, UnitId};
use storyvocab_core::ids::IdSource;
use storyvocab_core::store::Store;
use storyvocab_server::config::ApiConfig;
use storyvocab_server::{build_orchestrator, Service};
use tracing_subscriber::EnvFilter;

/// Story-script and sticker generation service.
#[derive(Parser)]
#[command(name = "storyvocab", version)]
struct Cli {
    /// TOML configuration file; CONTEXTVIS_* environment variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP API until interrupted.
    Serve,
    /// Import a unit-collection JSON document.
    Import {
        #[arg(long)]
        file: PathBuf,
    },
    /// Generate a material set for a unit.
    Generate {
        #[arg(long)]
        unit: String,
        #[arg(long, default_value = "")]
        theme: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Print the finished job and exit non-zero if it failed.
        #[arg(long)]
        wait: bool,
    },
    /// Write a ready material set's classroom bundle to a zip file.
    Export {
        #[arg(long)]
        set: String,
        #[arg(long)]
        out: PathBuf,
    },
}

type Failure = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    match runtime.block_on(run(cli)) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

async fn run(cli: Cli) -> Result<ExitCode, Failure> {
    let config = ApiConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Serve => {
            let service = Service::bind(&config).await?;
            service.run(shutdown_signal()).await?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Import { file } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|err| format!("{}: {err}", file.display()))?;
            let store = Store::open(&config.data_dir)?;
            let ids = store.import_units(&text, &IdSource::Random)?;
            println!("{}", json!({ "ids": ids }));
            Ok(ExitCode::SUCCESS)
        }
        Command::Generate {
            unit,
            theme,
            seed,
            wait,
        } => {
            let orchestrator = build_orchestrator(&config)?;
            let unit = UnitId::new(unit)?;
            let submission = orchestrator.submit_material_set(&unit, Theme::new(theme)?, seed)?;
            println!(
                "{}",
                json!({
                    "job_id": submission.job_id,
                    "material_set_id": submission.material_set_id,
                })
            );
            // Background work dies with the process, so always drain it.
            let job = orchestrator.wait_for(&submission.job_id).await?;
            orchestrator.shutdown().await;
            if !wait {
                return Ok(ExitCode::SUCCESS);
            }
            println!("{}", serde_json::to_string(&job)?);
            Ok(if job.state == JobState::Succeeded {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Export { set, out } => {
            let store = Store::open(&config.data_dir)?;
            let bytes = store.export_bundle(&MaterialSetId::new(set)?)?;
            std::fs::write(&out, &bytes).map_err(|err| format!("{}: {err}", out.display()))?;
            println!("{}", json!({ "path": out, "bytes": bytes.len() }));
            Ok(ExitCode::SUCCESS)
        }
    }
}

async fn shutdown_signal() {
    let interrupt = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut stream) => {
                stream.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        () = interrupt => {}
        () = terminate => {}
    }
}
