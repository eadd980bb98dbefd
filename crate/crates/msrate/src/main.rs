use clap::Parser;

use msrate::cli::{self, Cli};

fn main() {
    // clap exits with code 2 on usage errors before we get here.
    let cli = Cli::parse();
    std::process::exit(cli::run(cli));
}
