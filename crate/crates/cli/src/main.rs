//! `craftsim` command line: graph conversion, task generation, runs, probes,
//! reports and replay.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use craftsim::agents::{ParseTolerance, PromptAssets, SamplingConfig};
use craftsim::collective::TopologySpec;
use craftsim::env::{write_task_batch, TargetedSpec, TaskSampler};
use craftsim::kgraph::{convert_wordcraft, scramble_semantics, standin};
use craftsim::llm_client::HttpConfig;
use craftsim::xrun::{
    compute_metrics, load_graph, probe_prediction, probe_semantics, replay_log, report,
    run_experiment, sample_combos_from_rollouts, AgentSpec, BackendFactory, ClientFactory,
    EventLog, ExactMatch, GroupSpec, LlmBackend, RunConfig, RunError, TaskSpec, BUILTIN_STANDIN,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_ASSERTION: u8 = 3;

/// A CI-mode check that did not hold.
#[derive(Debug)]
struct AssertionFailed(String);

impl std::fmt::Display for AssertionFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "assertion failed: {}", self.0)
    }
}

impl std::error::Error for AssertionFailed {}

#[derive(Parser)]
#[command(
    name = "craftsim",
    version,
    about = "Collective innovation on crafting graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert Wordcraft-style recipe JSON to the canonical recipe file.
    Convert {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write the built-in stand-in graph as a recipe file.
    GenStandin {
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Sample a batch of targeted tasks.
    GenTasks {
        #[arg(long, default_value = BUILTIN_STANDIN)]
        graph: String,
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        distractors: u32,
        #[arg(long, default_value_t = 50)]
        count: u32,
        #[arg(long, default_value_t = 6)]
        horizon: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write a scrambled graph and its name map next to the batch.
        #[arg(long)]
        scramble_seed: Option<u64>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run an experiment and write its log and metrics.
    Run(RunArgs),
    /// Diagnostic probes.
    #[command(subcommand)]
    Probe(Probe),
    /// Build CSV tables and SVG charts from run logs.
    Report {
        /// Log files, optionally as `label=path`.
        #[arg(required = true)]
        logs: Vec<String>,
        #[arg(long)]
        allow_mixed: bool,
        #[arg(short, long)]
        output_dir: PathBuf,
    },
    /// Re-execute a log from its decisions and compare.
    Replay {
        log: PathBuf,
        /// Write the regenerated log here.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Exit with code 3 unless the regenerated log is byte-identical.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Subcommand)]
enum Probe {
    /// Run one task batch on the graph and on a renamed copy.
    Semantics {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 0)]
        scramble_seed: u64,
    },
    /// Ask a model to predict the results of valid combinations.
    Prediction {
        #[arg(long, default_value = BUILTIN_STANDIN)]
        graph: String,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    Random,
    Empowered,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum TopologyKind {
    FullyConnected,
    Dynamic,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Http,
    Heuristic,
    Replay,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "http")]
    llm_backend: BackendKind,
    /// Transcript directory read by the replay backend.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    /// Record every exchange into this directory.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    heuristic_seed: u64,
}

impl BackendArgs {
    fn factory(&self, sub: Option<&str>) -> Result<BackendFactory> {
        let join = |p: &Path| sub.map_or_else(|| p.to_path_buf(), |s| p.join(s));
        let backend = match self.llm_backend {
            BackendKind::Http => LlmBackend::Http(HttpConfig::from_env()),
            BackendKind::Heuristic => LlmBackend::Heuristic {
                seed: self.heuristic_seed,
            },
            BackendKind::Replay => LlmBackend::Replay {
                dir: join(
                    self.transcripts
                        .as_deref()
                        .context("--llm-backend replay needs --transcripts")?,
                ),
            },
        };
        Ok(BackendFactory {
            backend,
            record_dir: self.record.as_deref().map(join),
        })
    }
}

#[derive(Args)]
struct RunArgs {
    /// Run config JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    distractors: Option<u32>,
    #[arg(long)]
    tasks_per_trial: Option<u32>,
    /// Open-ended start items, comma separated.
    #[arg(long, value_delimiter = ',')]
    initial: Option<Vec<String>>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long, value_enum)]
    agent: Option<AgentKind>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    group_size: Option<usize>,
    #[arg(long, value_enum)]
    topology: Option<TopologyKind>,
    #[arg(long, default_value_t = 0.2)]
    visit_prob: f64,
    #[arg(long, default_value_t = 50)]
    visit_len: u32,
    #[arg(long)]
    copy: Option<bool>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Exit with code 3 if mean success falls below this.
    #[arg(long)]
    min_success: Option<f64>,
    /// Exit with code 3 if mean final inventory falls below this.
    #[arg(long)]
    min_final_inventory: Option<f64>,
    #[command(flatten)]
    backend: BackendArgs,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig {
                graph: BUILTIN_STANDIN.into(),
                task: TaskSpec::Targeted {
                    depth: 1,
                    distractors: 3,
                    tasks_per_trial: 50,
                    horizon: 6,
                },
                agent: AgentSpec::Random,
                group: GroupSpec::default(),
                trials: 10,
                seed: 0,
                output_dir: None,
            },
        };
        if let Some(g) = &self.graph {
            cfg.graph = g.clone();
        }
        if let Some(initial) = &self.initial {
            cfg.task = TaskSpec::OpenEnded {
                initial: initial.clone(),
                horizon: self.horizon.unwrap_or(200),
            };
        }
        match &mut cfg.task {
            TaskSpec::Targeted {
                depth,
                distractors,
                tasks_per_trial,
                horizon,
            } => {
                *depth = self.depth.unwrap_or(*depth);
                *distractors = self.distractors.unwrap_or(*distractors);
                *tasks_per_trial = self.tasks_per_trial.unwrap_or(*tasks_per_trial);
                *horizon = self.horizon.unwrap_or(*horizon);
            }
            TaskSpec::OpenEnded { horizon, .. } => *horizon = self.horizon.unwrap_or(*horizon),
        }
        if let Some(kind) = self.agent {
            cfg.agent = match kind {
                AgentKind::Random => AgentSpec::Random,
                AgentKind::Empowered => AgentSpec::Empowered { temperature: 0.1 },
                AgentKind::Llm => AgentSpec::Llm {
                    sampling: SamplingConfig::default(),
                    model: HttpConfig::from_env().model,
                    tolerance: ParseTolerance::Lenient,
                    social: true,
                    prompt_hash: Some(PromptAssets::default().hash()),
                },
            };
        }
        match &mut cfg.agent {
            AgentSpec::Empowered { temperature } => {
                *temperature = self.temperature.unwrap_or(*temperature)
            }
            AgentSpec::Llm {
                sampling, model, ..
            } => {
                sampling.temperature = self.temperature.unwrap_or(sampling.temperature);
                if let Some(m) = &self.model {
                    *model = m.clone();
                }
            }
            AgentSpec::Random => {}
        }
        if let Some(n) = self.group_size {
            cfg.group.size = n;
        }
        if let Some(t) = self.topology {
            cfg.group.topology = match t {
                TopologyKind::FullyConnected => TopologySpec::FullyConnected,
                TopologyKind::Dynamic => TopologySpec::dynamic(self.visit_prob, self.visit_len),
            };
        }
        if let Some(c) = self.copy {
            cfg.group.copy_mechanism = c;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = Some(d.display().to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn output_dir(&self, cfg: &RunConfig) -> PathBuf {
        PathBuf::from(cfg.output_dir.as_deref().unwrap_or("runs/latest"))
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = args.config()?;
    let g = cfg.load_graph()?;
    let factory = args.backend.factory(None)?;
    let clients = cfg.agent.is_llm().then_some(&factory as &dyn ClientFactory);
    let out = run_experiment(&cfg, &g, clients)?;
    let dir = args.output_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    out.log.write(dir.join("log.jsonl"))?;
    write_json(&dir.join("metrics.json"), &out.metrics)?;
    write_json(&dir.join("config.json"), &cfg)?;
    log::info!("wrote {}", dir.display());
    println!("{}", serde_json::to_string_pretty(&out.metrics)?);

    if let Some(min) = args.min_success {
        let s = out.metrics.success.as_ref().map_or(0.0, |s| s.mean);
        if s < min {
            return Err(AssertionFailed(format!("success {s:.4} below {min}")).into());
        }
    }
    if let Some(min) = args.min_final_inventory {
        let v = out.metrics.final_inventory.mean;
        if v < min {
            return Err(AssertionFailed(format!("final inventory {v:.2} below {min}")).into());
        }
    }
    Ok(())
}

fn cmd_probe(probe: &Probe) -> Result<()> {
    match probe {
        Probe::Semantics { run, scramble_seed } => {
            let cfg = run.config()?;
            let g = cfg.load_graph()?;
            let original = run.backend.factory(Some("original"))?;
            let scrambled = run.backend.factory(Some("scrambled"))?;
            let (a, b) = if cfg.agent.is_llm() {
                (
                    Some(&original as &dyn ClientFactory),
                    Some(&scrambled as &dyn ClientFactory),
                )
            } else {
                (None, None)
            };
            let probe = probe_semantics(&cfg, &g, *scramble_seed, a, b)?;
            let dir = run.output_dir(&cfg);
            write_json(&dir.join("semantics_original.json"), &probe.original)?;
            write_json(&dir.join("semantics_scrambled.json"), &probe.scrambled)?;
            write_json(&dir.join("scramble_map.json"), &probe.map.0)?;
            let s = |m: &craftsim::xrun::MetricsSummary| {
                m.success.as_ref().map_or(f64::NAN, |s| s.mean)
            };
            println!(
                "success original {:.4} scrambled {:.4}",
                s(&probe.original),
                s(&probe.scrambled)
            );
            Ok(())
        }
        Probe::Prediction {
            graph,
            count,
            seed,
            backend,
            output,
        } => {
            let g = load_graph(graph)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let combos = sample_combos_from_rollouts(&g, *count, 200, 0.1, &mut rng)?;
            let client = backend.factory(None)?.client(0, 0)?;
            let model = HttpConfig::from_env().model;
            let report = probe_prediction(
                &g,
                &combos,
                client.as_ref(),
                &PromptAssets::default(),
                &model,
                &ExactMatch,
                &mut rng,
            )?;
            write_json(output, &report)?;
            println!(
                "{} combos: mean {} {:.4}, random baseline {:.4}, flagged {}",
                report.rows.len(),
                report.scorer,
                report.mean_score,
                report.random_baseline_mean,
                report.flagged
            );
            Ok(())
        }
    }
}

fn cmd_report(logs: &[String], allow_mixed: bool, output_dir: &Path) -> Result<()> {
    let mut loaded = Vec::new();
    for spec in logs {
        let (label, path) = match spec.split_once('=') {
            Some((l, p)) => (l.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let label = p
                    .parent()
                    .and_then(|d| d.file_name())
                    .or_else(|| p.file_stem())
                    .map_or_else(|| spec.clone(), |s| s.to_string_lossy().into_owned());
                (label, p)
            }
        };
        let log = EventLog::read(&path).with_context(|| format!("reading {}", path.display()))?;
        loaded.push((label, log));
    }
    let r = report(&loaded, allow_mixed)?;
    r.write(output_dir)?;
    for name in r.tables.keys().chain(r.charts.keys()) {
        println!("{}", output_dir.join(name).display());
    }
    Ok(())
}

fn cmd_replay(path: &Path, output: Option<&Path>, verify: bool) -> Result<()> {
    let original = EventLog::read(path)?;
    let g = load_graph(&original.header.config.graph)?;
    let replayed = replay_log(&original, &g)?;
    if let Some(out) = output {
        replayed.write(out)?;
    }
    let identical = replayed.to_bytes() == original.to_bytes();
    println!(
        "{}",
        serde_json::to_string_pretty(&compute_metrics(&replayed)?)?
    );
    println!("byte-identical: {identical}");
    if verify && !identical {
        return Err(AssertionFailed("replayed log differs from the original".into()).into());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert { input, output } => {
            let bytes =
                std::fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let (file, warnings) = convert_wordcraft(&bytes).map_err(RunError::from)?;
            for w in &warnings {
                log::warn!("{w}");
            }
            std::fs::write(&output, file.to_json_pretty())?;
            println!(
                "{} items, {} recipes, {} warnings",
                file.items.len(),
                file.recipes.len(),
                warnings.len()
            );
            Ok(())
        }
        Command::GenStandin { output } => {
            std::fs::write(&output, standin::la2_standin().to_file().to_json_pretty())?;
            Ok(())
        }
        Command::GenTasks {
            graph,
            depth,
            distractors,
            count,
            horizon,
            seed,
            scramble_seed,
            output,
        } => {
            let g = load_graph(&graph)?;
            let sampler = TaskSampler::new(&g);
            let spec = TargetedSpec {
                depth,
                distractors,
                horizon,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tasks = (0..count)
                .map(|_| sampler.sample(spec, &mut rng))
                .collect::<Result<Vec<_>, _>>()
                .map_err(RunError::from)?;
            write_task_batch(&output, &g, &tasks).map_err(RunError::from)?;
            if let Some(s) = scramble_seed {
                let (sg, map) = scramble_semantics(&g, s);
                let renamed = tasks
                    .iter()
                    .map(|t| {
                        t.remap(&g, &sg, |n| {
                            map.get(n).expect("every item renamed").to_string()
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(RunError::from)?;
                let stem = output.with_extension("");
                write_task_batch(stem.with_extension("scrambled.json"), &sg, &renamed)
                    .map_err(RunError::from)?;
                std::fs::write(
                    stem.with_extension("graph.scrambled.json"),
                    sg.to_file().to_json_pretty(),
                )?;
                write_json(&stem.with_extension("scramble_map.json"), &map.0)?;
            }
            println!("{} tasks written to {}", tasks.len(), output.display());
            Ok(())
        }
        Command::Run(args) => cmd_run(&args),
        Command::Probe(p) => cmd_probe(&p),
        Command::Report {
            logs,
            allow_mixed,
            output_dir,
        } => cmd_report(&logs, allow_mixed, &output_dir),
        Command::Replay {
            log,
            output,
            verify,
        } => cmd_replay(&log, output.as_deref(), verify),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<AssertionFailed>().is_some() {
        return EXIT_ASSERTION;
    }
    match err.downcast_ref::<RunError>() {
        Some(e) if e.is_config_error() => EXIT_CONFIG,
        Some(_) => EXIT_RUNTIME,
        None if err.downcast_ref::<clap::Error>().is_some() => EXIT_CONFIG,
        None => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
