use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use llctrack::config::{resolve, ConfigOverrides};
use llctrack::evaluation::{
    evaluate_files, lambda_sweep, write_sweep_csv, write_sweep_svg, write_track_csv, BoundingBox,
    SequenceReport,
};
use llctrack::sequence::FrameSequence;
use llctrack::synth::{SynthKind, SynthSpec};
use llctrack::tracker::run_sequence;
use llctrack::Error;

#[derive(Debug, Parser)]
#[command(name = "llctrack", version, about = "Regularized LLC particle-filter tracker")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct ConfigArgs {
    /// Flat JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    particles: Option<usize>,
}

impl ConfigArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            seed: self.seed,
            lambda: self.lambda,
            beta: self.beta,
            n_particles: self.particles,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track a target through a frame directory.
    Track {
        #[arg(long)]
        seq: PathBuf,
        /// Initial box "x,y,w,h"; defaults to the first ground-truth line.
        #[arg(long)]
        init: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare predictions with ground truth and write a JSON report.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Cut the longer input to the length of the shorter one.
        #[arg(long)]
        truncate: bool,
    },
    /// Generate a synthetic sequence.
    Synth {
        #[arg(long, default_value = "moving-square")]
        kind: SynthKind,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Track once per regularization weight and report mean overlap.
    Sweep {
        #[arg(long)]
        seq: PathBuf,
        #[arg(long, default_value = "0,0.01,0.1,0.5,0.8,1,5,10")]
        lambdas: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Run the lambda branches concurrently.
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::BoxOutOfFrame { .. }
            | Error::DegenerateBox { .. }
            | Error::Parse { .. }
            | Error::LengthMismatch { .. } => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn parse_lambdas(text: &str) -> Result<Vec<f64>, Failure> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() && v.iter().all(|x| *x >= 0.0 && x.is_finite()) => Ok(v),
        _ => Err(Failure::Usage(format!(
            "--lambdas must be a comma-separated list of nonnegative numbers, got {text:?}"
        ))),
    }
}

fn init_box(seq: &FrameSequence, init: Option<&str>) -> Result<BoundingBox, Failure> {
    match init {
        Some(text) => BoundingBox::parse(text)
            .map_err(|m| Failure::Usage(format!("--init: {m}"))),
        None => seq
            .ground_truth()?
            .and_then(|gt| gt.first().copied())
            .ok_or_else(|| {
                Failure::Usage("--init is required when the sequence has no ground truth".into())
            }),
    }
}

fn track(seq: &Path, init: Option<&str>, out: &Path, config: &ConfigArgs) -> Result<(), Failure> {
    let cfg = resolve(config.config.as_deref(), &config.overrides())?;
    let sequence = FrameSequence::open(seq)?;
    let init = init_box(&sequence, init)?;
    let run = run_sequence(&sequence, &init, &cfg.tracker_config()?)?;
    write_track_csv(out, &run.results)?;
    eprintln!(
        "tracked {} frames at {:.2} fps -> {}",
        run.results.len(),
        run.fps(),
        out.display()
    );
    Ok(())
}

fn sweep(
    seq: &Path,
    lambdas: &str,
    out: &Path,
    plot: Option<&Path>,
    parallel: bool,
    config: &ConfigArgs,
) -> Result<(), Failure> {
    let lambdas = parse_lambdas(lambdas)?;
    let cfg = resolve(config.config.as_deref(), &config.overrides())?;
    let sequence = FrameSequence::open(seq)?;
    let gt = sequence.ground_truth()?.ok_or_else(|| {
        Failure::Usage(format!(
            "{} is required for a sweep",
            sequence.ground_truth_path().display()
        ))
    })?;
    let rows = lambda_sweep(&sequence, &gt, &cfg, &lambdas, parallel);
    write_sweep_csv(out, &rows)?;
    if let Some(plot) = plot {
        write_sweep_svg(plot, &rows)?;
    }
    for row in &rows {
        match (&row.mean_overlap, &row.error) {
            (Some(o), _) => eprintln!("lambda {:>8}: mean overlap {o:.4}", row.lambda),
            (None, Some(e)) => eprintln!("lambda {:>8}: failed: {e}", row.lambda),
            (None, None) => {}
        }
    }
    if rows.iter().all(|r| r.error.is_some()) {
        return Err(Failure::Runtime("every sweep run failed".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Track {
            seq,
            init,
            out,
            config,
        } => track(&seq, init.as_deref(), &out, &config),
        Command::Eval {
            pred,
            gt,
            out,
            truncate,
        } => {
            let report: SequenceReport = evaluate_files(&pred, &gt, truncate)?;
            report.write_json(&out)?;
            eprintln!(
                "{} frames: mean CLE {:.3} px, mean overlap {:.4}",
                report.frames, report.mean_cle, report.mean_overlap
            );
            Ok(())
        }
        Command::Synth {
            kind,
            frames,
            out,
            seed,
        } => {
            if frames < 2 {
                return Err(Failure::Usage("--frames must be at least 2".into()));
            }
            SynthSpec::new(kind, frames, seed).write(&out)?;
            Ok(())
        }
        Command::Sweep {
            seq,
            lambdas,
            out,
            plot,
            parallel,
            config,
        } => sweep(&seq, &lambdas, &out, plot.as_deref(), parallel, &config),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("LLCTRACK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
