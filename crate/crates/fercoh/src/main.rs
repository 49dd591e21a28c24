use clap::Parser;
use fercoh::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(msg) => println!("{msg}"),
        Err(e) => {
            let kind = e.kind();
            eprintln!("error[{}]: {e}", kind.tag());
            std::process::exit(kind.exit_code());
        }
    }
}
