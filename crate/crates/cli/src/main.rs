use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use theta_cli::{
    run, Experiment, ExperimentConfig, Format, PieceCount, RunOutput, EXIT_INVALID, EXIT_OK,
};
use theta_core::SpaceSpec;

#[derive(Parser)]
#[command(name = "theta", version, about = "Covering-index laboratory for finite surrogate Banach spaces")]
struct Cli {
    /// Run the experiment described by a JSON config file instead of a subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Two-piece Hilbert cover: sampled verification and per-set inradius intervals.
    Hilbert2(Opts),
    /// Inradius intervals of L_p block covers across a range of piece counts.
    LpSweep(Opts),
    /// Monte-Carlo verification of a block cover (pulled back for Bochner spaces).
    CoverVerify(Opts),
    /// Inradius intervals for each set of one block cover.
    Inradius(Opts),
    /// Symmetric and asymptotic-surrogate moduli with power-type fits.
    Modulus(Opts),
    /// Clarkson inequality checks on random pairs.
    Clarkson(Opts),
    /// Measured intervals next to the recorded two-piece Hilbert interval and power-law curves.
    CompareRaja(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum SpaceKind {
    EllP,
    WeightedLp,
    Schatten,
    Bochner,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct Opts {
    #[arg(long, value_enum)]
    space: Option<SpaceKind>,
    /// Outer exponent.
    #[arg(long)]
    p: Option<f64>,
    /// Number of atoms (coordinates, or rows of a Bochner space).
    #[arg(long)]
    dim: Option<usize>,
    /// Comma-separated atom weights for weighted and Bochner spaces.
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// Inner exponent of a Bochner space.
    #[arg(long)]
    q: Option<f64>,
    /// Inner dimension of a Bochner space.
    #[arg(long)]
    inner_dim: Option<usize>,
    /// Piece count, or an inclusive range such as `2..8`.
    #[arg(long)]
    n: Option<PieceCount>,
    /// Explicit partition of the atoms, e.g. `0,1,2;3,4,5`.
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    codim_budget: Option<usize>,
    /// Comma-separated t values.
    #[arg(long, value_delimiter = ',')]
    t_grid: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Directory receiving `<experiment>.json` and `<experiment>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format printed to stdout when no output directory is given.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn parse_partition(text: &str) -> anyhow::Result<Vec<Vec<usize>>> {
    text.split(';')
        .map(|block| {
            block
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad atom index {s:?}")))
                .collect()
        })
        .collect()
}

fn build_space(experiment: Experiment, o: &Opts) -> anyhow::Result<SpaceSpec> {
    let default_kind = match experiment {
        Experiment::Modulus | Experiment::Clarkson => SpaceKind::Schatten,
        _ => SpaceKind::EllP,
    };
    let p = o.p.unwrap_or(2.0);
    let dim = o.dim.unwrap_or(16);
    let weights = || o.weights.clone().unwrap_or_else(|| vec![1.0; dim]);
    let space = match o.space.unwrap_or(default_kind) {
        SpaceKind::EllP => SpaceSpec::ell_p(p, dim),
        SpaceKind::WeightedLp => SpaceSpec::weighted_lp(p, weights()),
        SpaceKind::Schatten => {
            let rows = o.rows.unwrap_or(8);
            SpaceSpec::schatten(p, rows, o.cols.unwrap_or(rows))
        }
        SpaceKind::Bochner => SpaceSpec::bochner(p, weights(), o.q.unwrap_or(2.0), o.inner_dim.unwrap_or(2)),
    };
    Ok(space?)
}

fn config_from_opts(experiment: Experiment, o: &Opts) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(experiment, build_space(experiment, o)?);
    if let Some(n) = o.n {
        cfg.n = n;
    } else if matches!(experiment, Experiment::LpSweep | Experiment::CompareRaja) {
        cfg.n = PieceCount::Range([2, 8]);
    }
    if let Some(text) = &o.partition {
        cfg.partition = Some(parse_partition(text)?);
    }
    if let Some(k) = o.codim_budget {
        cfg.codim_budget = k;
    }
    if let Some(t) = &o.t_grid {
        cfg.t_grid = t.clone();
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(s) = o.samples {
        cfg.samples = s;
    } else if experiment == Experiment::Clarkson {
        cfg.samples = 10_000;
    }
    if let Some(r) = o.restarts {
        cfg.restarts = r;
    }
    cfg.out = o.out.clone();
    if let Some(f) = o.format {
        cfg.format = match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        };
    }
    cfg.validate().map_err(anyhow::Error::msg)?;
    Ok(cfg)
}

fn load_config(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let (experiment, opts) = match (&cli.command, &cli.config) {
        (Some(_), Some(_)) => bail!("give either --config or a subcommand, not both"),
        (None, None) => bail!("missing subcommand (or --config <path>)"),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return ExperimentConfig::from_json(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()));
        }
        (Some(cmd), None) => match cmd {
            Command::Hilbert2(o) => (Experiment::Hilbert2, o),
            Command::LpSweep(o) => (Experiment::LpSweep, o),
            Command::CoverVerify(o) => (Experiment::CoverVerify, o),
            Command::Inradius(o) => (Experiment::Inradius, o),
            Command::Modulus(o) => (Experiment::Modulus, o),
            Command::Clarkson(o) => (Experiment::Clarkson, o),
            Command::CompareRaja(o) => (Experiment::CompareRaja, o),
        },
    };
    config_from_opts(experiment, opts)
}

fn emit(cfg: &ExperimentConfig, output: &RunOutput) -> anyhow::Result<()> {
    if let Some(dir) = &cfg.out {
        output.write_to_dir(dir)?;
        log::info!("wrote {} report to {}", cfg.experiment.name(), dir.display());
        return Ok(());
    }
    let mut stdout = std::io::stdout().lock();
    match cfg.format {
        Format::Json => writeln!(stdout, "{}", output.report.to_json())?,
        Format::Csv => output.table.write(&mut stdout)?,
    }
    Ok(())
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("THETA_THREADS") {
        let n: usize = v.parse().with_context(|| format!("THETA_THREADS={v:?} is not a thread count"))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_INVALID as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_OK as u8);
        }
    };
    let prepared = configure_threads().and_then(|_| load_config(&cli));
    let cfg = match prepared {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    let output = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    for f in &output.report.soundness.failures {
        eprintln!("soundness failure: {f}");
    }
    if let Err(e) = emit(&cfg, &output) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_INVALID as u8);
    }
    ExitCode::from(output.exit_code() as u8)
}
