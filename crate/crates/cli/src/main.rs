mod args;
mod commands;
mod exit;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => exit::OK,
                _ => exit::USAGE,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(&cli.global, a),
        Command::Run(a) => commands::run(&cli.global, a),
        Command::Eval(a) => commands::eval(&cli.global, a),
        Command::SynthDataset(a) => commands::synth_dataset(&cli.global, a),
        Command::Report(a) => commands::report(&cli.global, a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(exit::code_of(&e));
    }
}
