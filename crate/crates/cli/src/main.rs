use std::process::ExitCode;

use clap::Parser;

mod commands;
mod run;

use run::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check => commands::check::run(&cli.opts),
        Command::Sector(args) => commands::sector::run(&cli.opts, args),
        Command::Certify => commands::certify::run(&cli.opts),
        Command::Lyap(args) => commands::lyap::run(&cli.opts, args),
        Command::Simulate(args) => commands::simulate::run(&cli.opts, args),
        Command::Compare => commands::compare::run(&cli.opts),
    };
    let outcome = result.and_then(|out| {
        out.emit(cli.command.name(), &cli.opts)?;
        Ok(out.status)
    });
    match outcome {
        Ok(status) => ExitCode::from(status as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(run::Status::InputError as u8)
        }
    }
}
