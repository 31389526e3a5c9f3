//! Argument parsing and the exit-code contract.

use std::ffi::OsString;
use std::path::Path;

use clap::{Arg, ArgAction};

use crate::commands;
use crate::config::{validate_config, Command, RunConfig, VERSION};
use crate::error::CliError;
use crate::parallel::with_threads;

/// Exit code of a successful run.
pub const EXIT_OK: i32 = 0;
/// Exit code for usage errors and invalid input.
pub const EXIT_USAGE: i32 = 1;
/// Exit code for numerical failures.
pub const EXIT_NUMERICAL: i32 = 2;

/// The argument parser; every configuration key is also a flag.
pub fn app() -> clap::Command {
    let mut app = clap::Command::new("geodesy")
        .version(VERSION)
        .about("Incremental causal effects along paths from the observed treatment density to a point mass")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for c in Command::ALL {
        let mut sub = clap::Command::new(c.name()).about(c.about()).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key = value file, or an output CSV whose header line is replayed; flags take precedence"),
        );
        for key in c.keys() {
            let help = match c.default_for(key.name) {
                Some(d) => format!("{} [default: {d}]", key.help),
                None => key.help.to_string(),
            };
            sub = sub.arg(
                Arg::new(key.name)
                    .long(key.flag())
                    .value_name("VALUE")
                    .help(help)
                    .action(ArgAction::Set)
                    .allow_hyphen_values(true),
            );
        }
        app = app.subcommand(sub);
    }
    app
}

fn usage(command: Command) -> String {
    let mut app = app();
    app.build();
    app.find_subcommand_mut(command.name()).map(|s| s.render_usage().to_string()).unwrap_or_default()
}

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match app().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let Some((name, sub)) = matches.subcommand() else {
        return EXIT_USAGE;
    };
    let command: Command = name.parse().expect("subcommands come from the command table");
    let mut cfg = RunConfig::new(command);
    for key in command.keys() {
        if let Some(v) = sub.get_one::<String>(key.name) {
            cfg.set(key.name, v.clone());
        }
    }
    if let Some(path) = sub.get_one::<String>("config") {
        if let Err(e) = cfg.merge_file(Path::new(path)) {
            return report(command, &e);
        }
    }
    let resolved = match validate_config(&cfg) {
        Ok(r) => r,
        Err(e) => return report(command, &CliError::Config(e)),
    };
    match with_threads(resolved.common.threads, || commands::run(&resolved)) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(e)) => report(command, &e),
        Err(msg) => {
            eprintln!("error: cannot start worker threads: {msg}");
            EXIT_USAGE
        }
    }
}

fn report(command: Command, e: &CliError) -> i32 {
    eprintln!("error: {e}");
    let code = e.exit_code();
    if matches!(e, CliError::Usage(_) | CliError::Config(_)) {
        eprintln!("\n{}\nFor more information, try 'geodesy {command} --help'.", usage(command));
    } else if code == EXIT_NUMERICAL {
        eprintln!("numerical failure; try more quadrature nodes, a smaller t_max or different nuisance settings");
    }
    code
}
