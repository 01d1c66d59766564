use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use twoscale_cli::{execute, init_threads, parse_config_for, CliError, Command};

/// Two-scale expansions of strongly oscillating ODEs.
#[derive(Parser, Debug)]
#[command(name = "twoscale", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Sub>,

    /// JSON run configuration (`-` reads stdin).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file; overrides `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Suppress the summary on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Sub {
    /// Reference trajectory and partial sums as CSV.
    Simulate,
    /// ε sweep with fitted convergence slopes.
    Converge,
    /// Closed forms against the generic engine at random states.
    Crosscheck,
    /// Density transported along approximate characteristics.
    Density,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Converge => Command::Converge,
            Sub::Crosscheck => Command::Crosscheck,
            Sub::Density => Command::Density,
        }
    }
}

fn read_config(path: &PathBuf) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| CliError::io("<stdin>", e))?;
        return Ok(s);
    }
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    init_threads()?;
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let text = read_config(path)?;
    let cfg = parse_config_for(&text, cli.command.map(Command::from))?;
    let outcome = execute(&cfg, cli.out.as_deref())?;
    if let Some(text) = &outcome.stdout {
        let mut out = std::io::stdout().lock();
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io("<stdout>", e))?;
    }
    if !cli.quiet {
        eprint!("{}", outcome.summary);
    }
    if outcome.failures > 0 {
        eprintln!("{} failure(s) recorded in the report", outcome.failures);
        return Ok(3);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("twoscale: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
