//! Command-line scenario runner.
//!
//! Exit status: 0 when the scenario ran and every self-assertion passed,
//! 1 with a JSON record on stderr when the run failed or an assertion did
//! not hold, 2 for usage errors (unknown flags, scenarios, or parameters).

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser};

use histphase::scenario::{self, OutputFormat, ScenarioConfig};
use histphase::Error;

#[derive(Debug, Parser)]
#[command(
    name = "histphase",
    version,
    about = "Geometric phases of discrete quantum histories: scenario runner and data emitter"
)]
struct Cli {
    /// Scenario to run (see --list-scenarios)
    scenario: Option<String>,

    /// Override one scenario parameter; repeatable
    #[arg(long = "param", value_name = "KEY=VALUE")]
    param: Vec<String>,

    /// Base step/sample count, an integer in [4, 2^20]
    #[arg(long, value_name = "N")]
    n_steps: Option<usize>,

    /// Seed for randomized scenarios
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,

    /// Output format: csv or json
    #[arg(long, value_name = "FMT")]
    format: Option<String>,

    /// Write the rendered record to this path instead of stdout
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Read the full run configuration from a JSON file
    /// (mutually exclusive with a scenario name on the command line)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// List the available scenarios and exit
    #[arg(long)]
    list_scenarios: bool,
}

fn main() -> ExitCode {
    let command = Cli::command().after_help(scenario::after_help_text());
    let matches = match command.try_get_matches() {
        Ok(matches) => matches,
        // clap exits 0 for --help/--version and 2 for usage errors
        Err(e) => e.exit(),
    };
    let cli = Cli::from_arg_matches(&matches).expect("matches come from this command");
    match run(&cli) {
        Ok(code) => code,
        Err(err) if is_usage_error(&err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("{}", serde_json::json!({ "error": err.to_string() }));
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> histphase::Result<ExitCode> {
    if cli.list_scenarios {
        print!("{}", scenario::list_text());
        return Ok(ExitCode::SUCCESS);
    }
    let config = build_config(cli)?;
    let record = scenario::run(&config)?;
    let rendered = record.render(config.format);
    match &config.output {
        Some(path) => std::fs::write(path, rendered)?,
        None => {
            print!("{rendered}");
            std::io::stdout().flush()?;
        }
    }
    if record.all_passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{}", record.failure_report());
        Ok(ExitCode::from(1))
    }
}

/// Errors that mean the invocation itself was malformed, not that the
/// computation failed.
fn is_usage_error(err: &Error) -> bool {
    matches!(
        err,
        Error::UnknownScenario { .. }
            | Error::UnknownParameter { .. }
            | Error::InvalidParameter { .. }
            | Error::StepsOutOfRange { .. }
            | Error::Config(_)
    )
}

fn build_config(cli: &Cli) -> histphase::Result<ScenarioConfig> {
    let mut config = match (&cli.config, &cli.scenario) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter {
                name: "config".to_string(),
                reason: "pass either a scenario name or --config, not both".to_string(),
            })
        }
        (Some(path), None) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Error::InvalidParameter {
                    name: "config".to_string(),
                    reason: format!("cannot read {}: {e}", path.display()),
                })?;
            serde_json::from_str::<ScenarioConfig>(&text)?
        }
        (None, Some(name)) => ScenarioConfig {
            scenario: name.clone(),
            params: Default::default(),
            n_steps: scenario::DEFAULT_N_STEPS,
            output: None,
            format: OutputFormat::default(),
            seed: 0,
        },
        (None, None) => {
            return Err(Error::InvalidParameter {
                name: "scenario".to_string(),
                reason: "missing scenario name; see --list-scenarios or --help".to_string(),
            })
        }
    };
    // command-line flags override whatever the config file supplied
    for pair in &cli.param {
        let (key, value) = pair.split_once('=').ok_or_else(|| Error::InvalidParameter {
            name: pair.clone(),
            reason: "expected KEY=VALUE".to_string(),
        })?;
        let parsed: f64 = value.parse().map_err(|_| Error::InvalidParameter {
            name: key.to_string(),
            reason: format!("{value:?} is not a number"),
        })?;
        config.params.insert(key.to_string(), parsed);
    }
    if let Some(n) = cli.n_steps {
        config.n_steps = n;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(format) = &cli.format {
        config.format = format.parse()?;
    }
    if let Some(path) = &cli.output {
        config.output = Some(path.clone());
    }
    Ok(config)
}
