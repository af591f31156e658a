use clap::{Parser, Subcommand, ValueEnum};
use relaframe::config::{parse_config, ConfigError, ExperimentConfig, ExperimentId};
use relaframe::experiment::run;
use relaframe::table::Format;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_IO: u8 = 1;
const EXIT_PARSE: u8 = 3;
const EXIT_VALIDATION: u8 = 4;
const EXIT_DOMAIN: u8 = 5;

#[derive(Parser)]
#[command(
    name = "relaframe",
    version,
    about = "Quantum reference frame experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `output.format`.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Overrides `output.path`; without either the table goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the effective config and timing to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
    /// List the registered experiment ids.
    ListExperiments,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Plotdata,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Plotdata => Format::Plotdata,
        }
    }
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    let bytes = std::fs::read(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_IO)
    })?;
    parse_config(&bytes).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(match e {
            ConfigError::Encoding | ConfigError::Parse(_) => EXIT_PARSE,
            ConfigError::Validation(_) => EXIT_VALIDATION,
        })
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for id in ExperimentId::ALL {
                println!("{:<18}{}", id.as_str(), id.summary());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(_) => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run {
            config,
            format,
            out,
            verbose,
        } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let table = match run(&cfg) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_DOMAIN);
                }
            };
            if verbose {
                eprintln!(
                    "{}",
                    serde_json::to_string_pretty(&table.meta).unwrap_or_default()
                );
            }
            let bytes = table.emit(format.map(Format::from).unwrap_or(cfg.output.format));
            let target = out.or_else(|| cfg.output.path.as_ref().map(PathBuf::from));
            let written = match &target {
                Some(p) => std::fs::write(p, &bytes),
                None => std::io::Write::write_all(&mut std::io::stdout().lock(), &bytes),
            };
            if let Err(e) = written {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(EXIT_IO);
            }
            ExitCode::SUCCESS
        }
    }
}
