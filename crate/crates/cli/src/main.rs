use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bendfree_cli::config::{Check, RunConfig};
use bendfree_cli::run::run;
use bendfree_cli::scenarios;

#[derive(Parser)]
#[command(name = "bendfree", version, about = "Bending free-boundary experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file or a built-in scenario by name.
    Run {
        config: String,
        /// Restrict to these checks (repeatable); overrides the config.
        #[arg(long = "check", value_parser = parse_check)]
        checks: Vec<Check>,
        /// Output directory; defaults to `[output] dir` or `out/<scenario>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of grids in a refinement study (1 to 4).
        #[arg(long, default_value_t = 1)]
        levels: usize,
    },
    /// Print a built-in scenario's configuration.
    Show { name: String },
    /// List built-in scenarios.
    List,
}

fn parse_check(s: &str) -> Result<Check, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for (name, _) in scenarios::BUILTINS {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Show { name } => match scenarios::builtin_text(&name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: no built-in scenario `{name}`");
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            checks,
            out,
            levels,
        } => {
            let path = PathBuf::from(&config);
            let parsed = if path.exists() {
                RunConfig::from_path(&path)
            } else {
                scenarios::builtin(&config).unwrap_or_else(|| RunConfig::from_path(&path))
            };
            let mut cfg = match parsed {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            if !checks.is_empty() {
                let mut checks = checks;
                checks.sort();
                checks.dedup();
                cfg.checks = checks;
            }
            let out = out
                .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
            match run(&cfg, levels, &out) {
                Ok(report) => {
                    for (name, r) in &report.results {
                        let failed: Vec<&str> = r
                            .items
                            .iter()
                            .filter(|(_, ok)| !**ok)
                            .map(|(k, _)| k.as_str())
                            .collect();
                        if failed.is_empty() {
                            println!("{name:<12} PASS");
                        } else {
                            println!("{name:<12} FAIL ({})", failed.join(", "));
                        }
                    }
                    println!("report: {}", out.join("report.json").display());
                    if report.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}
