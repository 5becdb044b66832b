use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = stratshap_cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stratshap_cli::run(cli, &mut stdout) {
        eprintln!("stratshap: {e}");
        std::process::exit(e.exit_code());
    }
}
