use clap::Parser;
use kkmw_cli::Cli;
use tracing_subscriber::EnvFilter;

fn main() {
    let cli = Cli::parse();
    let level = cli.log_level.clone().or_else(|| std::env::var("KKMW_LOG").ok()).unwrap_or_else(|| "warn".into());
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_new(&level).unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    std::process::exit(kkmw_cli::run(cli, |k| std::env::var(k).ok()));
}
