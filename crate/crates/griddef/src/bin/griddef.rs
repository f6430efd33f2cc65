use clap::error::ErrorKind;
use clap::Parser;
use griddef::cli::{run, Cli, EXIT_INVALID_INPUT, EXIT_OK};

fn main() {
    let code = match Cli::try_parse() {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID_INPUT,
            }
        }
    };
    std::process::exit(code);
}
