use clap::Parser;

use cascade_hawkes::cli;

fn main() {
    // CASCADE_HAWKES_THREADS caps the rayon pool used by the EM E-step.
    if let Ok(v) = std::env::var("CASCADE_HAWKES_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: CASCADE_HAWKES_THREADS must be a positive integer, got {v:?}");
                std::process::exit(2);
            }
        }
    }
    let parsed = cli::Cli::parse();
    match cli::run(parsed) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(1);
        }
    }
}
