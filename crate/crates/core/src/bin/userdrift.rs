use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use userdrift::harness::{self, BackendKind, LoadedConfig, Overrides};
use userdrift::scm::{RespondentMode, Scm};
use userdrift::{Error, Result};

#[derive(Parser)]
#[command(name = "userdrift", version, about = "Simulated-respondent drift experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunFlags {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long)]
    max_iterations: Option<u32>,
}

impl RunFlags {
    fn load(&self) -> Result<LoadedConfig> {
        let mut loaded = LoadedConfig::load(&self.config)?;
        loaded.apply(&Overrides {
            out: self.out.clone(),
            seed: self.seed,
            backend: self.backend,
            max_iterations: self.max_iterations,
        });
        Ok(loaded)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) an experiment.
    Run {
        #[command(flatten)]
        flags: RunFlags,
        /// Continue from checkpoint.json in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Print exact SCM quantities for one persona as JSON.
    Oracle {
        /// SCM file; the bundled toy model when omitted.
        #[arg(long)]
        scm: Option<PathBuf>,
        /// Observed persona value, `name=value`.
        #[arg(long = "persona")]
        persona: Vec<String>,
        /// Assigned confounder value, `name=value`.
        #[arg(long = "assign")]
        assign: Vec<String>,
        /// Use the treatment-independent latent posterior.
        #[arg(long)]
        randomized: bool,
    },
    /// Recompute iteration reports from a record file.
    Report {
        #[command(flatten)]
        flags: RunFlags,
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        iteration: Option<u32>,
    },
    /// Write plotting CSVs from report files or a run directory.
    Plotdata {
        #[arg(long, conflicts_with = "reports")]
        run: Option<PathBuf>,
        #[arg(long, num_args = 1..)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a config, an SCM file, or a question bank without running.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        scm: Option<PathBuf>,
        #[arg(long)]
        bank: Option<PathBuf>,
    },
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v)?;
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { flags, resume } => {
            let summary = harness::run(flags.load()?, resume)?;
            print_json(&summary)
        }
        Command::Oracle {
            scm,
            persona,
            assign,
            randomized,
        } => {
            let scm = match scm {
                Some(p) => Scm::load(&p)?,
                None => Scm::toy_drift_v1(),
            };
            let mut observed = harness::parse_assignments(&persona)?;
            // Unspecified observed variables default to their first state.
            for v in &scm.spec().l_vars {
                observed.entry(v.name.clone()).or_insert_with(|| v.states[0].clone());
            }
            let mode = if randomized {
                RespondentMode::Randomized
            } else {
                RespondentMode::Abductive
            };
            print_json(&harness::oracle_json(&scm, &observed, &harness::parse_assignments(&assign)?, mode)?)
        }
        Command::Report {
            flags,
            records,
            iteration,
        } => {
            let loaded = flags.load()?;
            let out = flags.out.clone();
            let reports = harness::recompute_reports(loaded, &records, iteration)?;
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
                    for r in &reports {
                        let p = dir.join(harness::report_file_name(r.iteration));
                        let text = serde_json::to_string_pretty(r)? + "\n";
                        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
                    }
                    Ok(())
                }
                None => print_json(&reports),
            }
        }
        Command::Plotdata { run, reports, out } => {
            let paths = match run {
                Some(dir) => harness::report_paths(&dir)?,
                None => reports,
            };
            harness::write_plotdata(&harness::load_reports(&paths)?, &out)
        }
        Command::Validate { config, scm, bank } => {
            if config.is_none() && scm.is_none() && bank.is_none() {
                return Err(Error::Config("nothing to validate; pass --config, --scm or --bank".into()));
            }
            if let Some(p) = scm {
                harness::validate_scm_file(&p)?;
                Scm::load(&p)?;
            }
            if let Some(p) = bank {
                userdrift::population::QuestionBank::load(&p)?;
            }
            if let Some(p) = config {
                harness::Prepared::new(LoadedConfig::load(&p)?)?;
            }
            println!("ok");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", harness::error_json(&e));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
