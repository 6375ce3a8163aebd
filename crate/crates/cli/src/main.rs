use anyhow::Result;
use clap::Parser;
use hotbox_cli::{record_session, replay_session, serve, Cli, Command};
use tracing_subscriber::EnvFilter;

async fn interrupted() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::error!("cannot listen for Ctrl-C: {e}");
        std::future::pending::<()>().await;
    }
}

#[tokio::main]
async fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Serve(args) => serve(args, interrupted()).await,
        Command::Record(args) => record_session(args, interrupted()).await.map(|_| ()),
        Command::Replay(args) => {
            let report = args.report.is_some();
            let doc = tokio::task::spawn_blocking(move || replay_session(&args)).await??;
            if !report {
                println!("{doc}");
            }
            Ok(())
        }
    }
}
