use std::io::Write;

use clap::Parser;

fn main() {
    let cli = specsim_cli::Cli::parse();
    let (out, err, code) = specsim_cli::dispatch(cli);
    let _ = std::io::stdout().write_all(out.as_bytes());
    let _ = std::io::stderr().write_all(err.as_bytes());
    std::process::exit(code);
}
