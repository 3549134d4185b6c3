//! `setcover` binary: see the library crate for the subcommands.

fn main() {
    let code = setcover_cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
