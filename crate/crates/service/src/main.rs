use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use inquiry_core::batch::{load_corpus, run_batch, write_report};
use inquiry_core::codec::canonical_pretty;
use inquiry_core::providers::Backend;
use inquiry_core::runtime::PolicyKind;
use inquiry_service::{router, AppState, ServiceConfig};

const EXIT_PIPELINE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "inquiry", version, about = "Spelling inquiry engine: HTTP service and batch evaluation")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Offline,
    Remote,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve {
        /// Overrides `bind` from the config.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Generate one transcript per marked misspelling in a corpus.
    BatchEvaluate {
        #[arg(long)]
        corpus: PathBuf,
        /// always-correct, always-wrong, empty-response or scripted:<file>
        #[arg(long, default_value = "always-correct")]
        policy: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
    },
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("configuration error: {msg}");
    ExitCode::from(EXIT_CONFIG)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match ServiceConfig::load(p) {
            Ok(c) => c,
            Err(e) => return config_error(e),
        },
        None => ServiceConfig::default(),
    };
    match cli.command {
        Command::Serve { bind } => {
            if let Some(b) = bind {
                cfg.bind = b;
            }
            serve(cfg)
        }
        Command::BatchEvaluate { corpus, policy, out, backend } => {
            if let Some(b) = backend {
                cfg.provider.backend = match b {
                    BackendArg::Offline => Backend::Offline,
                    BackendArg::Remote => Backend::Remote,
                };
            }
            batch(cfg, corpus, &policy, out)
        }
    }
}

fn batch(cfg: ServiceConfig, corpus: PathBuf, policy: &str, out: PathBuf) -> ExitCode {
    let policy: PolicyKind = match policy.parse() {
        Ok(p) => p,
        Err(e) => return config_error(e),
    };
    if let PolicyKind::Scripted(p) = &policy {
        if !p.is_file() {
            return config_error(format!("script {} does not exist", p.display()));
        }
    }
    let engine = match cfg.engine() {
        Ok(e) => e,
        Err(e) => return config_error(e),
    };
    let samples = match load_corpus(&corpus) {
        Ok(s) => s,
        Err(e) => return config_error(e),
    };
    let report = run_batch(&engine, &samples, &policy);
    if let Err(e) = write_report(&report, &out) {
        return config_error(e);
    }
    print!("{}", canonical_pretty(&report.summary));
    for f in &report.summary.failures {
        eprintln!("sample {} ({}): {}", f.sample_id, f.attempt, f.error);
    }
    if report.summary.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_PIPELINE)
    }
}

fn serve(cfg: ServiceConfig) -> ExitCode {
    if let Err(e) = cfg.validate() {
        return config_error(e);
    }
    let engine = match cfg.engine() {
        Ok(e) => e,
        Err(e) => return config_error(e),
    };
    let state = Arc::new(AppState::new(engine, cfg.capacity()));
    let app = router(state, cfg.body_limit);
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => return config_error(e),
    };
    rt.block_on(async move {
        let listener = match tokio::net::TcpListener::bind(&cfg.bind).await {
            Ok(l) => l,
            Err(e) => return config_error(format!("bind {}: {e}", cfg.bind)),
        };
        tracing::info!(bind = %cfg.bind, "listening");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("server error: {e}");
                ExitCode::FAILURE
            }
        }
    })
}
