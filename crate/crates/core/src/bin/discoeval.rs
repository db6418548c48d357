use clap::Parser;
use discoeval::cli::{exit_code, run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = run(Cli::parse());
    if let Err(e) = &result {
        eprintln!("discoeval: {e}");
    }
    std::process::exit(exit_code(&result));
}
