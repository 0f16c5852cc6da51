use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use snr_geom::cli::{
    cmd_catalog, cmd_check, cmd_lemma34, cmd_variation, emit, CliError, Lemma34Config,
    OutputFormat, RunConfig,
};
use snr_geom::report::RunReport;
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical checks of submanifold geometry in S^n x R.
#[derive(Parser)]
#[command(name = "snr-geom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the catalog surfaces.
    Catalog {
        #[arg(long)]
        json: bool,
    },
    /// Run every applicable check on one surface.
    Check(RunArgs),
    /// Random sweep of the trace inequality for symmetric matrices.
    Lemma34 {
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        /// Matrices per family (random in 2..=6 when omitted).
        #[arg(long)]
        p: Option<usize>,
        /// Matrix size (random in 1..=5 when omitted).
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Compare finite differences of the total mean curvature with its first variation.
    Variation {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// RFC-3339 time stamp (default: SOURCE_DATE_EPOCH, else now).
    #[arg(long)]
    timestamp: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value file; flags override its settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    surface: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    t0: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// Nodes per axis, e.g. 64x64.
    #[arg(long)]
    grid: Option<String>,
    /// Use finite-difference jets with this step.
    #[arg(long)]
    fd_step: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// NAME=VALUE, repeatable.
    #[arg(long = "tol")]
    tol: Vec<String>,
    #[command(flatten)]
    output: OutputArgs,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("surface", &self.surface),
            ("n", &self.n),
            ("t0", &self.t0),
            ("rho", &self.rho),
            ("eps", &self.eps),
            ("grid", &self.grid),
            ("fd_step", &self.fd_step),
            ("seed", &self.seed),
            ("format", &self.output.format),
            ("timestamp", &self.output.timestamp),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if let Some(p) = &self.output.out {
            cfg.out = Some(p.clone());
        }
        for t in &self.tol {
            let (name, value) = snr_geom::cli::parse_tolerance(t)?;
            cfg.tolerances.insert(name, value);
        }
        Ok(cfg)
    }
}

fn finish(
    report: &RunReport,
    format: OutputFormat,
    out: Option<&std::path::Path>,
) -> Result<ExitCode, CliError> {
    if let Some(text) = emit(report, format, out)? {
        print!("{text}");
    }
    Ok(if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Catalog { json } => {
            print!("{}", cmd_catalog(json));
            Ok(ExitCode::SUCCESS)
        }
        Command::Check(args) => {
            let cfg = args.config()?;
            let report = cmd_check(&cfg)?;
            finish(&report, cfg.format, cfg.out.as_deref())
        }
        Command::Variation { run, delta } => {
            let cfg = run.config()?;
            let report = cmd_variation(&cfg, delta)?;
            finish(&report, cfg.format, cfg.out.as_deref())
        }
        Command::Lemma34 {
            trials,
            p,
            m,
            seed,
            output,
        } => {
            let format = match &output.format {
                Some(f) => f.parse()?,
                None => OutputFormat::Json,
            };
            let report = cmd_lemma34(
                &Lemma34Config { trials, p, m, seed },
                output.timestamp.as_deref(),
            )?;
            finish(&report, format, output.out.as_deref())
        }
    }
}

fn main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => Ok(code),
        Err(e) => {
            let code = e.exit_code();
            let err = anyhow::Error::new(e).context("snr-geom failed");
            eprintln!("{err:#}");
            Ok(ExitCode::from(
                u8::try_from(code).context("exit code fits in a byte")?,
            ))
        }
    }
}
