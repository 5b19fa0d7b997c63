use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use modspace::cli::{self, Command, Format, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "modspace", version, about = "Numerical checks for multiplication and composition in modulation and Fourier–Lebesgue spaces")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Norms of one test function.
    Norm(Common),
    /// Paradifferential decomposition of G(f) with reconstruction error.
    Decompose(Common),
    /// Run one experiment and exit 1 if it fails.
    Verify(Common),
}

#[derive(clap::Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn run(command: Command, opts: Common) -> modspace::error::Result<i32> {
    let mut cfg = RunConfig::from_file(&opts.config)?;
    let env = std::env::var(cli::SEED_ENV).ok();
    cfg.apply_seed_override(opts.seed, env.as_deref())?;
    let format = opts.format.map(|f| match f {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    });
    let (path, format) = cfg.output(opts.out, format)?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = opts.jobs {
        if jobs == 0 {
            return Err(modspace::error::Error::Config("--jobs must be positive".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool
        .build()
        .map_err(|e| modspace::error::Error::Config(format!("thread pool: {e}")))?;
    let out = pool.install(|| cli::run_command(command, &cfg))?;

    let text = cli::render(&out, format)?;
    match path {
        Some(p) => cli::write_atomic(&p, &text)?,
        None => print!("{text}"),
    }
    eprintln!("{}: {}", out.report.name, out.report.verdict.as_str());
    Ok(cli::verdict_code(out.report.verdict))
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (command, opts) = match args.command {
        Cmd::Norm(o) => (Command::Norm, o),
        Cmd::Decompose(o) => (Command::Decompose, o),
        Cmd::Verify(o) => (Command::Verify, o),
    };
    match run(command, opts) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
