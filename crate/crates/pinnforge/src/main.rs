use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pinnforge::bench::{self, BenchReport};
use pinnforge::config::Config;
use pinnforge::formats::{read_json, read_text, to_pretty, trace_from_jsonl, write_json, write_text};
use pinnforge::pde_agent::{insert_answers, run_pde_agent};
use pinnforge::pipeline::{net_for, replay, run_pipeline, write_bundle, RunContext, RunReport, Status};
use pinnforge::provider::{Backend, HttpEmbedding, HttpProvider, MockProvider, Recorded};
use pinnforge_core::codegen::{generate_module, GenContext, ModuleKind, Source};
use pinnforge_core::feedback::score_trace;
use pinnforge_core::pde::CanonicalPde;
use pinnforge_core::pinn::select_architecture;
use pinnforge_core::semantic::{BaselineSimilarity, SimilarityProvider};

#[derive(Parser)]
#[command(name = "pinnforge", version, about = "Turn PDE task descriptions into trained physics-informed networks")]
struct Cli {
    /// JSON config; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "mock")]
    provider: ProviderKind,
    /// Directory of `*.jsonl` fixture files for the mock provider.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory; results go to stdout when omitted (where possible).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderKind {
    Mock,
    Http,
}

#[derive(Subcommand)]
enum Command {
    /// Run the PDE agent only and print the candidate report.
    Formulate { description: PathBuf },
    /// Pick an architecture for a PDE.
    SelectArch { pde: PathBuf },
    /// Write the six-module program for a PDE and architecture.
    Generate { pde: PathBuf, arch: String },
    /// Full pipeline: formulate, select, generate, train, score, refine.
    Run { description: PathBuf },
    /// Score a loss trace.
    ScoreTrace {
        trace: PathBuf,
        /// Final solution (or residual) MSE.
        #[arg(long)]
        mse: f64,
        #[arg(long)]
        params: usize,
        #[arg(long)]
        max_params: usize,
        /// Final gradient norm; defaults to the last trace record.
        #[arg(long)]
        grad_norm: Option<f64>,
    },
    /// Evaluate translation on a dataset (the bundled corpus if omitted).
    Bench { dataset: Option<PathBuf> },
    /// Re-run a mock-provider report and check it reproduces.
    Replay { report: PathBuf },
    /// Write mock fixtures answering formulation prompts.
    MakeFixtures {
        /// Answer every sample of this dataset with its ground truth.
        #[arg(long, conflicts_with_all = ["description", "pde"])]
        dataset: Option<PathBuf>,
        /// Answer samples of families with this prefix with `--wrong-pde` instead.
        #[arg(long, requires_all = ["dataset", "wrong_pde"])]
        wrong_family: Option<String>,
        #[arg(long)]
        wrong_pde: Option<PathBuf>,
        /// Answer this single description with `--pde`.
        #[arg(long, requires = "pde")]
        description: Option<PathBuf>,
        #[arg(long)]
        pde: Option<PathBuf>,
    },
}

type AnyError = Box<dyn std::error::Error>;

fn load_config(cli: &Cli) -> Result<Config, AnyError> {
    Ok(match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}

fn provider(cli: &Cli) -> Result<Recorded, AnyError> {
    Ok(Recorded::new(match cli.provider {
        ProviderKind::Mock => {
            let dir = cli.fixtures.as_ref().ok_or("the mock provider needs --fixtures <dir>")?;
            Backend::Mock(MockProvider::load_dir(dir)?)
        }
        ProviderKind::Http => Backend::Http(HttpProvider::from_env()?),
    }))
}

fn similarity(cfg: &Config) -> Result<Box<dyn SimilarityProvider>, AnyError> {
    Ok(if cfg.pde_agent.embeddings {
        Box::new(HttpEmbedding::from_env()?)
    } else {
        Box::new(BaselineSimilarity {
            weights: cfg.pde_agent.semantic,
        })
    })
}

/// Writes `name` under `--out`, or prints it.
fn emit(out: Option<&Path>, name: &str, text: &str) -> Result<(), AnyError> {
    match out {
        Some(dir) => {
            let path = dir.join(name);
            write_text(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// PDE files may use infix or prefix expressions.
fn read_pde(path: &Path) -> Result<CanonicalPde, AnyError> {
    let text = read_text(path)?;
    pinnforge::pde_agent::parse_candidate(&text).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn run(cli: Cli) -> Result<ExitCode, AnyError> {
    let cfg = load_config(&cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Formulate { description } => {
            let text = read_text(description)?;
            let p = provider(&cli)?;
            let sim = similarity(&cfg)?;
            let c = &cfg.pde_agent;
            let rep = run_pde_agent(&text, c.k, c.alpha, &p, &c.params, sim.as_ref(), None)?;
            emit(out, "candidates.json", &to_pretty(&rep))?;
        }
        Command::SelectArch { pde } => {
            let pde = read_pde(pde)?;
            let history = match &cfg.pinn_agent.history {
                Some(p) => pinnforge::history::load(p)?,
                None => Vec::new(),
            };
            let sel = select_architecture(&pde, &cfg.registry()?, &history, &cfg.selection(), &[])?;
            emit(out, "architecture.json", &to_pretty(&sel))?;
        }
        Command::Generate { pde, arch } => {
            let pde = read_pde(pde)?;
            cfg.registry()?.capability_of(arch)?;
            let dir = out.ok_or("generate needs --out <dir>")?;
            let inputs = pde.domain.dims as usize + usize::from(pde.is_time_dependent());
            let mut train = cfg.trainer.train;
            train.seed = cli.seed;
            let ctx = GenContext {
                pde: &pde,
                arch,
                net: net_for(arch, inputs, &cfg),
                train,
            };
            let target = cfg.code_agent.target;
            let p = match cfg.code_agent.source {
                pinnforge::config::CodeSource::Provider => Some(provider(&cli)?),
                pinnforge::config::CodeSource::Template => None,
            };
            let mut modules = Vec::new();
            for kind in ModuleKind::ALL {
                let source = match &p {
                    Some(p) => Source::Provider {
                        provider: p,
                        params: cfg.code_agent.params,
                        target,
                        repair: None,
                    },
                    None => Source::Template(target),
                };
                modules.push(generate_module(kind, &ctx, source)?);
            }
            let bundle = pinnforge_core::codegen::assemble(modules, &pde, cfg.code_agent.verify_threshold)?;
            write_bundle(dir, &bundle, &train)?;
            eprintln!("wrote bundle to {}", dir.display());
        }
        Command::Run { description } => {
            let text = read_text(description)?;
            let p = provider(&cli)?;
            let sim = similarity(&cfg)?;
            let rc = RunContext {
                config: &cfg,
                seed: cli.seed,
                provider: &p,
                sim: sim.as_ref(),
                history_limit: None,
                record_history: true,
            };
            let (report, artifacts) = run_pipeline(&text, &rc)?;
            emit(out, "report.json", &to_pretty(&report))?;
            if let (Some(dir), Some(a)) = (out, &artifacts) {
                write_bundle(&dir.join("bundle"), &a.bundle, &a.train)?;
                write_text(&dir.join("trace.jsonl"), &pinnforge::formats::trace_to_jsonl(&a.trace))?;
            }
            eprintln!(
                "status: {:?}, iterations: {}, S = {}",
                report.status,
                report.iterations.len(),
                report.final_score.map_or("n/a".into(), |s| format!("{:.4}", s.s))
            );
            if report.status == Status::Failed {
                eprintln!("failure: {}", report.failure.as_deref().unwrap_or("unknown"));
                return Ok(ExitCode::from(3));
            }
        }
        Command::ScoreTrace {
            trace,
            mse,
            params,
            max_params,
            grad_norm,
        } => {
            let trace = trace_from_jsonl(&read_text(trace)?)?;
            let grad = grad_norm.or(trace.records.last().map(|r| r.grad_norm)).unwrap_or(0.0);
            let q = score_trace(&trace.losses(), grad, *mse, *params, *max_params, &cfg.feedback)?;
            emit(out, "score.json", &to_pretty(&q))?;
        }
        Command::Bench { dataset } => {
            let samples = match dataset {
                Some(p) => bench::load_dataset(p)?,
                None => bench::bundled_dataset(),
            };
            let p = provider(&cli)?;
            let sim = similarity(&cfg)?;
            let report: BenchReport = bench::evaluate(&samples, &cfg.pde_agent, &p, sim.as_ref());
            match out {
                Some(dir) => {
                    write_json(&dir.join("bench_report.json"), &report)?;
                    write_text(&dir.join("bench.csv"), &report.to_csv()?)?;
                    eprintln!("wrote {}", dir.display());
                }
                None => print!("{}", to_pretty(&report)),
            }
            for (level, a) in &report.per_level {
                eprintln!(
                    "level {level}: exact {:.3}  sym {:.3}  sem {:.3}  failed {}",
                    a.exact_rate, a.sym_mean, a.sem_mean, a.failed
                );
            }
        }
        Command::Replay { report } => {
            let rep: RunReport = read_json(report)?;
            let dir = cli.fixtures.as_ref().ok_or("replay needs --fixtures <dir>")?;
            let sim = similarity(&rep.config)?;
            replay(&rep, MockProvider::load_dir(dir)?, sim.as_ref())?;
            eprintln!("replay matches");
        }
        Command::MakeFixtures {
            dataset,
            wrong_family,
            wrong_pde,
            description,
            pde,
        } => {
            let (k, params) = (cfg.pde_agent.k, &cfg.pde_agent.params);
            let mock = match (dataset, description, pde) {
                (Some(d), _, _) => {
                    let samples = bench::load_dataset(d)?;
                    match (wrong_family, wrong_pde) {
                        (Some(prefix), Some(w)) => {
                            let wrong = read_pde(w)?;
                            bench::wrong_family_fixtures(&samples, k, params, prefix, &wrong)
                        }
                        _ => bench::exact_fixtures(&samples, k, params),
                    }
                }
                (None, Some(d), Some(p)) => {
                    let mut mock = MockProvider::new();
                    insert_answers(&mut mock, &read_text(d)?, k, params, &read_pde(p)?);
                    mock
                }
                _ => return Err("make-fixtures needs --dataset, or --description with --pde".into()),
            };
            emit(out, "fixtures.jsonl", &mock.to_jsonl())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

