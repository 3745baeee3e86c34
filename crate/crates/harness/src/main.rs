use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evalkit::commands;
use evalkit::{simulate, ClockMode, Config, HarnessError, Scenario};
use evalkit_core::persistence::ExportFormat;

#[derive(Parser)]
#[command(
    name = "evalkit",
    version,
    about = "Interactive retrieval evaluation server"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP server.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Import or export evaluation templates.
    #[command(subcommand)]
    Template(TemplateCommand),
    /// Register media collections.
    #[command(subcommand)]
    Collection(CollectionCommand),
    /// Run a scenario file on a simulated clock and print its transcript.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ClockArg::Virtual)]
        clock: ClockArg,
    },
    /// Export the results of a stored evaluation.
    ExportResults {
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        evaluation: String,
        #[arg(long, default_value = "fullJson")]
        format: ExportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TemplateCommand {
    Import {
        file: PathBuf,
        #[arg(long)]
        data_dir: PathBuf,
    },
    Export {
        id: String,
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CollectionCommand {
    Ingest {
        path: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        data_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockArg {
    Virtual,
    Wall,
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), HarnessError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| HarnessError::Runtime(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Serve { config } => {
            let config = Config::load(&config)?;
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .init();
            let rt = tokio::runtime::Runtime::new().map_err(HarnessError::runtime)?;
            rt.block_on(commands::serve(&config))
        }
        Command::Template(TemplateCommand::Import { file, data_dir }) => {
            let id = commands::import_template(&file, &data_dir)?;
            println!("{id}");
            Ok(())
        }
        Command::Template(TemplateCommand::Export { id, data_dir, out }) => {
            emit(&commands::export_template(&id, &data_dir)?, out.as_deref())
        }
        Command::Collection(CollectionCommand::Ingest {
            path,
            name,
            data_dir,
        }) => {
            let c = commands::ingest_collection(&path, &name, &data_dir)?;
            println!("{} {} items", c.name, c.items.len());
            Ok(())
        }
        Command::Simulate {
            scenario,
            out,
            clock,
        } => {
            let (scenario, base) = Scenario::load(&scenario)?;
            let plan = scenario.plan(&base)?;
            let clock = match clock {
                ClockArg::Virtual => ClockMode::Virtual,
                ClockArg::Wall => ClockMode::Wall,
            };
            emit(&simulate(&plan, clock)?.to_json(), out.as_deref())
        }
        Command::ExportResults {
            data_dir,
            evaluation,
            format,
            out,
        } => emit(
            &commands::export_results(&data_dir, &evaluation, format)?,
            out.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.into()
        }
    }
}
