//! `arena`: drives the protocol phases over a run directory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use arena_core::store::{MANIFEST, REPORT};
use arena_core::{
    export_leaderboard, simulate, Arena, ArenaError, ErrorClass, Format, ModelId, RunManifest, RunReport, RunStore,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "arena", version, about = "Self-play author/solver arena with Rasch ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Run {
    /// Run manifest (JSON). Optional once the run directory exists.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Run directory holding every artifact.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads for agent calls and bootstrap refits.
    #[arg(long)]
    parallelism: Option<usize>,
}

#[derive(Args)]
struct Ranking {
    #[arg(long)]
    bootstrap_iterations: Option<usize>,
    #[arg(long)]
    bootstrap_seed: Option<u64>,
    /// Tail mass on each side of the interval.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Markdown,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Phase 1: meta-prompts, drafts, amplification.
    Generate(Run),
    /// Phase 2: every solver attempts every problem it did not author.
    Solve(Run),
    /// Phase 3: backbone verification of problems with a failed attempt.
    Verify(Run),
    /// Phase 4: fit, bootstrap intervals, rank ranges, leaderboards.
    Rank {
        #[command(flatten)]
        run: Run,
        #[command(flatten)]
        ranking: Ranking,
    },
    /// Prints the leaderboard of a ranked run.
    Report {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "markdown")]
        format: OutputFormat,
        /// Write to this file instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// All four phases with synthetic agents only.
    Simulate {
        #[command(flatten)]
        run: Run,
        #[command(flatten)]
        ranking: Ranking,
        /// Without a manifest: this many agents, abilities evenly spaced on [-2, 2].
        #[arg(long, default_value_t = 8)]
        agents: usize,
        /// Without a manifest: problems authored per agent.
        #[arg(long, default_value_t = 10)]
        problems: usize,
        /// Without a manifest: spread of authored difficulties.
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-runs verification with another backbone and reports agreement.
    ReplayVerify {
        #[command(flatten)]
        run: Run,
        #[arg(long)]
        backbone: String,
    },
}

fn config(msg: impl Into<String>) -> ArenaError {
    ArenaError::Config(msg.into())
}

/// The manifest from `--manifest` or, failing that, the run directory.
fn load_manifest(manifest: Option<&Path>, out: &Path) -> Result<RunManifest, ArenaError> {
    match manifest {
        Some(path) => RunManifest::load(path),
        None => Ok(RunStore::open(out)?.manifest().clone()),
    }
}

fn apply_run(m: &mut RunManifest, run: &Run) {
    if let Some(p) = run.parallelism {
        m.parallelism = p;
    }
}

fn apply_ranking(m: &mut RunManifest, r: &Ranking) {
    if let Some(b) = r.bootstrap_iterations {
        m.bootstrap_iterations = b;
    }
    if r.bootstrap_seed.is_some() {
        m.bootstrap_seed = r.bootstrap_seed;
    }
    if let Some(a) = r.alpha {
        m.alpha = a;
    }
}

/// Store for `m` in `out`. An existing run is rebound to `m` in memory, so
/// overrides of unhashed settings never rewrite its manifest.
fn store_for(m: RunManifest, out: &Path) -> Result<RunStore, ArenaError> {
    m.validate()?;
    if out.join(MANIFEST).exists() {
        Ok(RunStore::open(out)?.with_manifest(m)?)
    } else {
        Ok(RunStore::create(out, &m)?)
    }
}

fn arena(run: &Run, ranking: Option<&Ranking>) -> Result<Arena, ArenaError> {
    let mut m = load_manifest(run.manifest.as_deref(), &run.out)?;
    apply_run(&mut m, run);
    if let Some(r) = ranking {
        apply_ranking(&mut m, r);
    }
    Arena::new(store_for(m, &run.out)?)
}

fn summarize(report: &RunReport) {
    let c = &report.counts;
    println!(
        "{} problems, {} valid, {} excluded, {} overridden, {} observations",
        c.problems, c.valid_problems, c.excluded, c.overridden, c.observations
    );
    for row in &report.leaderboard {
        let composite = row.composite.map_or_else(|| "-".to_string(), |x| format!("{x:.0}"));
        println!("{:>3}  {:<24} {:>6}", row.rank, row.model, composite);
    }
}

fn execute(cli: Cli) -> Result<(), ArenaError> {
    match cli.command {
        Command::Generate(run) => {
            let n = arena(&run, None)?.generate()?.len();
            println!("{n} problems");
        }
        Command::Solve(run) => {
            let n = arena(&run, None)?.solve()?.len();
            println!("{n} solve records");
        }
        Command::Verify(run) => {
            let n = arena(&run, None)?.verify()?.len();
            println!("{n} verdicts");
        }
        Command::Rank { run, ranking } => summarize(&arena(&run, Some(&ranking))?.rank()?),
        Command::Report {
            manifest,
            out,
            format,
            output,
        } => {
            let store = RunStore::open(&out)?;
            if let Some(path) = manifest {
                let m = RunManifest::load(&path)?;
                if m.run_hash() != store.run_hash() {
                    return Err(ArenaError::Integrity(format!(
                        "manifest {} does not describe the run in {}",
                        path.display(),
                        out.display()
                    )));
                }
            }
            let report: RunReport = store.read_json(REPORT, "report")?;
            let format = match format {
                OutputFormat::Markdown => Format::Markdown,
                OutputFormat::Json => Format::Json,
            };
            let confidence = 1.0 - 2.0 * report.bootstrap.alpha;
            match output {
                Some(path) => export_leaderboard(&report.leaderboard, format, confidence, &path)?,
                None => print!("{}", arena_core::leaderboard::render(&report.leaderboard, format, confidence)),
            }
        }
        Command::Simulate {
            run,
            ranking,
            agents,
            problems,
            spread,
            seed,
        } => {
            let mut m = match &run.manifest {
                Some(path) => RunManifest::load(path)?,
                None => {
                    if agents < 2 {
                        return Err(config("--agents must be at least 2"));
                    }
                    let abilities: Vec<f64> = (0..agents)
                        .map(|i| -2.0 + 4.0 * i as f64 / (agents - 1) as f64)
                        .collect();
                    RunManifest::synthetic(&abilities, problems, spread, seed)
                }
            };
            apply_run(&mut m, &run);
            apply_ranking(&mut m, &ranking);
            summarize(&simulate(&m, &run.out)?);
        }
        Command::ReplayVerify { run, backbone } => {
            let backbone = ModelId::new(backbone)?;
            let report = arena(&run, None)?.replay_verify(&backbone)?;
            let answer = report
                .answer_agreement
                .map_or_else(|| "n/a".to_string(), |a| format!("{:.1}%", 100.0 * a));
            println!(
                "{} problems: exclusion agreement {:.1}%, answer agreement {answer} over {} kept by both",
                report.problems,
                100.0 * report.exclusion_agreement,
                report.kept_by_both
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("ARENA_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::PhaseFailure => 3,
                ErrorClass::DataIntegrity => 4,
            })
        }
    }
}
