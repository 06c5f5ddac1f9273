use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use groundplan::bench::bench;
use groundplan::eval::{evaluate_manifest, load_outcome_fixture, Manifest};
use groundplan::http::{ChatBackend, ChatConfig};
use groundplan::run::{cmd_run, record_transcript, BackendMode, RunError, RunOptions, Session};
use groundplan::transcript::{save_transcript, ScriptedBackend, Timed};
use groundplan_core::exec::{render_comparison, FaultPolicy};
use groundplan_core::grounding::DEFAULT_TAU;
use groundplan_core::plan::DEFAULT_VERB_THRESHOLD;

#[derive(Parser)]
#[command(
    name = "groundplan",
    version,
    about = "Ground a task in an RGB-D scene, plan it and simulate the plan"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on one fixture.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every entry of an evaluation manifest and report success rates.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Repeat one run and report per-stage timing.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        task: Option<String>,
        #[arg(long, default_value_t = 10)]
        repeat: usize,
    },
    /// Success-rate table from transcribed outcome files, one column each.
    Sr {
        #[arg(long, required = true)]
        outcomes: Vec<PathBuf>,
    },
    /// Record a replay transcript from scripted role answers or a live model.
    Record {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        task: Option<String>,
        /// JSON object with `SMK`, `GMK` and `P` answers; live model if absent.
        #[arg(long)]
        responses: Option<PathBuf>,
        #[arg(long)]
        transcript: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Live,
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Abort,
    Continue,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_enum, default_value_t = Backend::Replay)]
    backend: Backend,
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Shorthand for `--backend replay --transcript <path>`.
    #[arg(long, value_name = "TRANSCRIPT", conflicts_with_all = ["backend", "transcript"])]
    replay: Option<PathBuf>,
    /// word2vec text embeddings.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Policy::Abort)]
    fault_policy: Policy,
    /// Normalize similarity by both noun lists instead of the first.
    #[arg(long)]
    symmetric_similarity: bool,
    #[arg(long, default_value_t = DEFAULT_VERB_THRESHOLD)]
    verb_threshold: f64,
    #[arg(long)]
    synonyms: Option<PathBuf>,
    #[arg(long)]
    connectives: Option<PathBuf>,
    #[arg(long)]
    detector_url: Option<String>,
    #[arg(long)]
    segmenter_url: Option<String>,
    /// RGB image sent to the detector and segmenter services.
    #[arg(long)]
    image: Option<PathBuf>,
}

impl Common {
    fn options(&self) -> RunOptions {
        let mut o = RunOptions::new(&self.embeddings);
        o.backend = match self.backend {
            Backend::Live => BackendMode::Live,
            Backend::Replay => BackendMode::Replay,
        };
        o.transcript = self.transcript.clone();
        if let Some(path) = &self.replay {
            o.backend = BackendMode::Replay;
            o.transcript = Some(path.clone());
        }
        o.tau = self.tau;
        o.seed = self.seed;
        o.fault_policy = match self.fault_policy {
            Policy::Abort => FaultPolicy::Abort,
            Policy::Continue => FaultPolicy::Continue,
        };
        o.symmetric_similarity = self.symmetric_similarity;
        o.verb_threshold = self.verb_threshold;
        o.synonyms = self.synonyms.clone();
        o.connectives = self.connectives.clone();
        o.detector_url = self.detector_url.clone();
        o.segmenter_url = self.segmenter_url.clone();
        o.image = self.image.clone();
        o
    }
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            common,
            fixture,
            task,
            out,
        } => {
            let rec = cmd_run(&fixture, task.as_deref(), &common.options(), out.as_deref());
            match rec.error {
                Some(e) => fail(e),
                None => {
                    if let Some(p) = &rec.plan_text {
                        println!("plan: {p}");
                    }
                    if let Some(o) = &rec.outcome {
                        println!("success: {} ({} steps)", o.success, o.steps_executed);
                    }
                    ExitCode::SUCCESS
                }
            }
        }
        Command::Eval {
            common,
            manifest,
            out,
            jobs,
        } => {
            let result = Manifest::load(&manifest)
                .and_then(|m| evaluate_manifest(&m, &common.options(), out.as_deref(), jobs));
            match result {
                Ok(r) => {
                    print!("{}", r.report.render_table());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Bench {
            common,
            fixture,
            task,
            repeat,
        } => {
            match Session::open(&fixture, task.as_deref(), &common.options())
                .and_then(|s| bench(&s, repeat))
            {
                Ok(r) => {
                    print!("{}", r.render());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Sr { outcomes } => {
            let mut loaded = Vec::new();
            for p in &outcomes {
                match load_outcome_fixture(p) {
                    Ok(f) => loaded.push((
                        p.file_stem()
                            .map(|s| s.to_string_lossy().into_owned())
                            .unwrap_or_default(),
                        f.report(),
                    )),
                    Err(e) => return fail(e),
                }
            }
            let columns: Vec<(&str, _)> = loaded.iter().map(|(n, r)| (n.as_str(), r)).collect();
            print!("{}", render_comparison(&columns));
            ExitCode::SUCCESS
        }
        Command::Record {
            fixture,
            task,
            responses,
            transcript,
        } => {
            let recorded = match responses {
                Some(path) => std::fs::read_to_string(&path)
                    .map_err(|source| RunError::Io {
                        path: path.clone(),
                        source,
                    })
                    .and_then(|t| {
                        serde_json::from_str::<ScriptedBackend>(&t)
                            .map_err(|e| RunError::Config(format!("{}: {e}", path.display())))
                    })
                    .and_then(|b| record_transcript(&fixture, task.as_deref(), b)),
                None => ChatConfig::from_env()
                    .map_err(|e| RunError::Config(e.to_string()))
                    .and_then(|c| {
                        record_transcript(&fixture, task.as_deref(), Timed(ChatBackend::new(c)))
                    }),
            };
            match recorded.and_then(|r| {
                save_transcript(&transcript, &r).map_err(|source| RunError::Io {
                    path: transcript.clone(),
                    source,
                })
            }) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(e),
            }
        }
    }
}
