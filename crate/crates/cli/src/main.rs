use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fockprobe_cli::commands::{self, RunContext};
use fockprobe_cli::config::{ExperimentConfig, Format};
use fockprobe_cli::error::{exit, CliError, CliResult};
use fockprobe_cli::output::sha256_hex;
use fockprobe_cli::OUT_DIR_ENV;

#[derive(Parser)]
#[command(name = "fockprobe", version, about = "Steady-state spectroscopy of a qubit probing a squeezed cavity field")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Qubit spectrum over the configured sweep.
    Spectrum(Common),
    /// Cavity photon-number distribution and Klyshko table.
    Distribution(Common),
    /// Spectra and distributions for each squeezed-drive detuning.
    DetuningSweep(Common),
    /// Fit model parameters to a spectrum CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Spectrum CSV to fit; overrides `target` in the config.
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Closed-form calibration quantities and simulated T1/Ramsey fits.
    Calibrate(Common),
    /// Check that the files in the output directory match the config.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory. Precedence: this flag, then $FOCKPROBE_OUT_DIR,
    /// then `[output] directory`, then `fockprobe-out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps; defaults to `[solver] jobs`, then to the
    /// number of available cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

fn out_dir(flag: Option<PathBuf>, config: Option<&PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| config.cloned())
        .unwrap_or_else(|| PathBuf::from("fockprobe-out"))
}

fn read_config(path: &PathBuf) -> CliResult<(Vec<u8>, ExperimentConfig)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::config("config is not valid UTF-8"))?;
    Ok((bytes, ExperimentConfig::parse(&text)?))
}

fn context(c: Common) -> CliResult<RunContext> {
    if c.jobs == Some(0) {
        return Err(CliError::config("--jobs must be at least 1"));
    }
    let (bytes, config) = read_config(&c.config)?;
    let format = match c.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        Some(FormatArg::Both) => Format::Both,
        None => config.format,
    };
    let jobs = c
        .jobs
        .or(config.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let seed = c.seed.or(config.fit.as_ref().map(|f| f.seed)).unwrap_or(0);
    Ok(RunContext {
        out_dir: out_dir(c.out, config.out_dir.as_ref()),
        config_path: c.config,
        digest: sha256_hex(&bytes),
        config,
        format,
        jobs,
        seed,
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    })
}

fn run(cli: Cli) -> CliResult<()> {
    let dir = match cli.command {
        Command::Spectrum(c) => commands::spectrum(&context(c)?)?,
        Command::Distribution(c) => commands::distribution(&context(c)?)?,
        Command::DetuningSweep(c) => commands::detuning_sweep(&context(c)?)?,
        Command::Fit { common, target } => commands::fit(&context(common)?, target.as_deref())?,
        Command::Calibrate(c) => commands::calibrate(&context(c)?)?,
        Command::Verify(c) => {
            let (bytes, config) = read_config(&c.config)?;
            let dir = out_dir(c.out, config.out_dir.as_ref());
            let (report, mismatches) = commands::verify(&bytes, &dir)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
            if mismatches > 0 {
                return Err(CliError::Verify(mismatches));
            }
            return Ok(());
        }
    };
    println!("{}", json!({ "status": "ok", "out_dir": dir.display().to_string() }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
