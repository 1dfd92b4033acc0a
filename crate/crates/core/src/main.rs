use clap::error::ErrorKind;
use clap::Parser;

use tlsgn::cli::{run, RunSpec, EXIT_IO};

fn main() {
    let spec = match RunSpec::try_parse() {
        Ok(spec) => spec,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_IO,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    std::process::exit(run(&spec));
}
