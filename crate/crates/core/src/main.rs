use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tabular_obda::engine::ResultSet;
use tabular_obda::pipeline::Policy;
use tabular_obda::schema::DEFAULT_TAU;
use tabular_obda::{compare_modes, run, Error, Mode, RunConfig, RunReport};

#[derive(Parser)]
#[command(
    name = "tabular-obda",
    version,
    about = "Answer SPARQL over CSV files through mappings and metadata"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one query in one mode.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "enhanced")]
        mode: ModeArg,
    },
    /// Run all three modes and check that no answers are lost.
    Compare {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Enhanced,
    Baseline,
    Noselect,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Error,
    Warn,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Directory the mapping's source paths are relative to.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    mapping: PathBuf,
    #[arg(long)]
    metadata: Option<PathBuf>,
    #[arg(long)]
    query: PathBuf,
    /// Database connection string (sqlite://path, a path, or :memory:).
    #[arg(long, env = "TABULAR_OBDA_DB")]
    db: Option<String>,
    #[arg(long)]
    workdir: Option<PathBuf>,
    /// Results file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// JSON report file; a step table goes to stderr when absent.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long = "index-selectivity-threshold", default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, value_enum, default_value = "error")]
    range_violation: PolicyArg,
    #[arg(long)]
    no_fk: bool,
    #[arg(long)]
    no_index: bool,
    /// Worker threads for per-source preparation; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    keep_intermediate: bool,
    #[arg(long, default_value = "reference")]
    engine: String,
    #[arg(long)]
    dump_constraints: Option<PathBuf>,
    #[arg(long)]
    ddl_out: Option<PathBuf>,
    #[arg(long)]
    mapping_out: Option<PathBuf>,
}

impl Common {
    fn config(&self, mode: Mode) -> RunConfig {
        let mut cfg = RunConfig::new(&self.data, &self.mapping, self.metadata.clone(), &self.query);
        cfg.mode = mode;
        cfg.db_url = self.db.clone();
        cfg.workdir = self.workdir.clone();
        cfg.tau = self.tau;
        cfg.range_violation = match self.range_violation {
            PolicyArg::Error => Policy::Error,
            PolicyArg::Warn => Policy::Warn,
        };
        cfg.keep_intermediate = self.keep_intermediate;
        cfg.engine = self.engine.clone();
        cfg.repetitions = self.repetitions;
        cfg.no_fk = self.no_fk;
        cfg.no_index = self.no_index;
        cfg.jobs = self.jobs;
        cfg
    }

    fn write_outputs(&self, report: &RunReport) -> Result<(), Error> {
        let results = render(&report.results, self.format)?;
        match &self.out {
            Some(p) => write(p, &results)?,
            None => print!("{results}"),
        }
        if let Some(p) = &self.dump_constraints {
            write(p, &report.constraints.to_json())?;
        }
        if let Some(p) = &self.ddl_out {
            write(p, &report.ddl)?;
        }
        if let Some(p) = &self.mapping_out {
            write(p, &report.translated_mapping)?;
        }
        Ok(())
    }
}

fn render(r: &ResultSet, format: Format) -> Result<String, Error> {
    match format {
        Format::Csv => r.to_csv(),
        Format::Json => Ok(r.to_json()),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { common, mode } => {
            let mode = match mode {
                ModeArg::Enhanced => Mode::Enhanced,
                ModeArg::Baseline => Mode::Baseline,
                ModeArg::Noselect => Mode::Noselect,
            };
            run(&common.config(mode)).and_then(|report| {
                common.write_outputs(&report)?;
                match &common.report {
                    Some(p) => write(p, &report.to_json()),
                    None => {
                        eprint!("{}", report.to_table());
                        Ok(())
                    }
                }
            })
        }
        Command::Compare { common } => compare_modes(&common.config(Mode::Enhanced)).and_then(|report| {
            common.write_outputs(&report.enhanced)?;
            match &common.report {
                Some(p) => write(p, &report.to_json()),
                None => {
                    for r in [Some(&report.enhanced), report.baseline.as_ref(), Some(&report.noselect)]
                        .into_iter()
                        .flatten()
                    {
                        eprint!("{}", r.to_table());
                    }
                    if let Some(e) = &report.baseline_error {
                        eprintln!("baseline could not answer the query: {e}");
                    }
                    Ok(())
                }
            }
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
