use clap::Parser;
use qetlab::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
        }
        Err(e) => {
            eprintln!("qetlab: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
