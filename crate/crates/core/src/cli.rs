//! Command implementations behind the `lord` binary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::embedding::{
    embed_goal, BackendConfig, BackendKind, EmbeddingError, GoalSpec, Modality, ObservationRef, Polarity,
};
use crate::eval::{
    evaluate, format_table, landscape_csv, reward_landscape, speed_diff_quartile_means, summarize, DrivingPolicy,
    EpisodeLog, EvalReport, FixedPolicy, PpoPolicy, RandomPolicy, EVAL_SEEDS,
};
use crate::obs::{compute_ttc, describe_text, render_frame, FrameBuffer, FrameImage, DEFAULT_TTC_THRESHOLD, FEATURES};
use crate::ppo::{checkpoint_load, train, PpoError};
use crate::reward::{cosine_similarity, lord_reward, target_reward};
use crate::run_config::{RunConfig, RunManifest};
use crate::sim::{reset, step, EnvConfig, MetaAction};

#[derive(Debug, Parser)]
#[command(name = "lord", version, about = "Opposite-goal embedding rewards for highway driving")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy from a TOML run configuration.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or a baseline) on one or more settings.
    Evaluate(EvaluateArgs),
    /// Export the reward landscape of a run's logged episodes.
    Analyze(AnalyzeArgs),
    /// Write the frames and text observations of a logged episode.
    Render(RenderArgs),
    /// Score a payload against a goal with an embedding backend.
    EmbedProbe(ProbeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Exact run directory; must not exist yet.
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    /// Parent for generated run directories.
    #[arg(long, default_value = "runs")]
    pub runs_root: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub total_steps: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Random,
    Idle,
    Slower,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Setting names such as lane-4-density-2; repeat or separate with commas.
    #[arg(long, value_delimiter = ',', default_value = "lane-4-density-2")]
    pub setting: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Output directory (default: `eval` next to the checkpoint, or `./eval`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Row label in the report table.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// Logged reward to analyze (default: the training reward).
    #[arg(long)]
    pub reward: Option<String>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub episode: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    Text,
    Image,
    Video,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Self {
        match m {
            ModalityArg::Text => Modality::Text,
            ModalityArg::Image => Modality::Image,
            ModalityArg::Video => Modality::Video,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolarityArg {
    Opposite,
    Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Reference,
    Remote,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, value_enum)]
    pub modality: ModalityArg,
    /// Text file, PNG frame, or (video) a directory of PNG frames.
    #[arg(long)]
    pub payload: PathBuf,
    #[arg(long, value_enum, default_value = "opposite")]
    pub polarity: PolarityArg,
    /// Override the default goal sentence.
    #[arg(long)]
    pub goal: Option<String>,
    #[arg(long, value_enum, default_value = "reference")]
    pub backend: BackendArg,
    /// Remote service URL (otherwise read from LORD_EMBED_ENDPOINT).
    #[arg(long)]
    pub endpoint: Option<String>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => cmd_train(&a).map(|dir| println!("run directory: {}", dir.display())),
        Command::Evaluate(a) => cmd_evaluate(&a).map(|reports| print!("{}", format_table(&reports))),
        Command::Analyze(a) => cmd_analyze(&a).map(|s| print!("{s}")),
        Command::Render(a) => cmd_render(&a).map(|dir| println!("frames written to {}", dir.display())),
        Command::EmbedProbe(a) => cmd_embed_probe(&a).map(|p| print!("{}", p.render())),
    }
}

const EPISODES_DIR: &str = "episodes";

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn is_nonempty_dir(path: &Path) -> bool {
    path.read_dir().map(|mut d| d.next().is_some()).unwrap_or(false)
}

/// Validates everything up front, then creates the run directory, writes the
/// manifest, trains, and logs an episode corpus with the final policy.
pub fn cmd_train(args: &TrainArgs) -> Result<PathBuf> {
    let mut config = RunConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.ppo.seed = seed;
        config.env.seed = seed;
    }
    if let Some(steps) = args.total_steps {
        config.ppo.total_env_steps = steps;
    }
    if let Some(workers) = args.workers {
        config.ppo.num_workers = workers;
    }
    config.validate()?;

    let mut backends = vec![];
    for spec in config.logged_rewards() {
        for m in spec.modalities() {
            if !backends.iter().any(|d: &crate::embedding::BackendDescriptor| d.modality == m) {
                backends.push(config.backend.build(m)?.descriptor().clone());
            }
        }
    }

    let run_id = format!("{}-seed{}", config.run_name(), config.ppo.seed);
    let run_dir = match &args.run_dir {
        Some(d) => d.clone(),
        None => args.runs_root.join(&run_id),
    };
    if is_nonempty_dir(&run_dir) {
        bail!("run directory {} already exists and is not empty", run_dir.display());
    }
    std::fs::create_dir_all(&run_dir).with_context(|| format!("creating {}", run_dir.display()))?;
    let manifest = RunManifest::new(run_id, config.clone(), backends);
    write(&run_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;

    let quiet = args.quiet;
    let out = train(&config.env, &config.reward, &config.ppo, &config.backend, &run_dir, |row| {
        if !quiet {
            eprintln!(
                "step {:>8}  reward/step {:.4}  episode len {}  entropy {:.3}",
                row.step,
                row.mean_reward,
                row.mean_episode_len.map_or("-".into(), |v| format!("{v:.1}")),
                row.stats.entropy
            );
        }
    })?;

    if config.logging.episodes > 0 {
        let env = EnvConfig { duration: config.logging.duration, ..config.env.clone() };
        let seeds: Vec<u64> =
            (0..config.logging.episodes as u64).map(|i| config.logging.first_seed + i).collect();
        let policy = PpoPolicy::new(out.params, "trained");
        let (report, logs) = evaluate(&policy, "training-env", &env, &seeds, &config.logged_rewards(), &config.backend)?;
        let dir = run_dir.join(EPISODES_DIR);
        std::fs::create_dir_all(&dir)?;
        for (i, log) in logs.iter().enumerate() {
            write(&dir.join(format!("episode_{i:04}.json")), serde_json::to_string(log)?)?;
        }
        write(&run_dir.join("corpus_report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(run_dir)
}

fn check_input_dim(input_dim: usize, setting: &str, env: &EnvConfig) -> Result<(), PpoError> {
    let want = env.observed_vehicles * FEATURES;
    if input_dim != want {
        return Err(PpoError::Persistence(format!(
            "checkpoint expects {input_dim} state features but {setting} provides {want} ({} rows x {FEATURES})",
            env.observed_vehicles
        )));
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<Vec<EvalReport>> {
    let configs = args
        .setting
        .iter()
        .map(|s| Ok((s.clone(), EnvConfig::for_setting(s)?)))
        .collect::<Result<Vec<_>>>()?;
    let seeds = if args.seeds.is_empty() { EVAL_SEEDS.to_vec() } else { args.seeds.clone() };
    let policy: Box<dyn DrivingPolicy> = match (&args.checkpoint, args.baseline) {
        (Some(path), _) => {
            let params = checkpoint_load(path)?;
            for (name, env) in &configs {
                check_input_dim(params.input_dim(), name, env)?;
            }
            let label = args.label.clone().unwrap_or_else(|| "ppo".into());
            Box::new(PpoPolicy::new(params, label))
        }
        (None, Some(Baseline::Random)) => Box::new(RandomPolicy),
        (None, Some(Baseline::Idle)) => Box::new(FixedPolicy(MetaAction::Idle)),
        (None, Some(Baseline::Slower)) => Box::new(FixedPolicy(MetaAction::Slower)),
        (None, None) => bail!("either --checkpoint or --baseline is required"),
    };
    let out_dir = match (&args.out, &args.checkpoint) {
        (Some(d), _) => d.clone(),
        (None, Some(c)) => c.parent().unwrap_or(Path::new(".")).join("eval"),
        (None, None) => PathBuf::from("eval"),
    };
    let mut reports = vec![];
    for (name, env) in &configs {
        let (report, _) = evaluate(policy.as_ref(), name, env, &seeds, &[], &BackendConfig::default())?;
        reports.push(report);
    }
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for r in &reports {
        write(&out_dir.join(format!("{}.csv", r.setting)), r.to_csv())?;
        write(&out_dir.join(format!("{}.txt", r.setting)), format_table(std::slice::from_ref(r)))?;
    }
    Ok(reports)
}

pub fn load_episode_logs(run: &Path) -> Result<Vec<EpisodeLog>> {
    let dir = run.join(EPISODES_DIR);
    let mut paths: Vec<PathBuf> = match dir.read_dir() {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect(),
        Err(_) => vec![],
    };
    if paths.is_empty() {
        return Err(EmbeddingError::Input(format!(
            "{} has no episode logs (was logging disabled?)",
            run.display()
        ))
        .into());
    }
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect()
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<String> {
    let logs = load_episode_logs(&args.run)?;
    let reward = match &args.reward {
        Some(r) => r.clone(),
        None => logs[0].reward_names.first().cloned().context("episode logs carry no rewards")?,
    };
    let rows = reward_landscape(&logs, &reward)?;
    let summary = summarize(&rows);
    let quartiles = speed_diff_quartile_means(&rows);
    let stem = reward.replace(|c: char| !c.is_ascii_alphanumeric() && c != '_', "_");
    write(&args.run.join(format!("landscape_{stem}.csv")), landscape_csv(&rows))?;
    let json = serde_json::json!({ "reward": reward, "summary": summary, "speed_diff_quartile_means": quartiles });
    write(&args.run.join(format!("summary_{stem}.json")), serde_json::to_string_pretty(&json)?)?;
    let fmt = |v: Option<f64>| v.map_or("n/a".into(), |x| format!("{x:.6}"));
    Ok(format!(
        "reward: {reward}\nrows: {} ({} collided, {} collision-free)\ncollided mean: {}\ncollision-free mean: {}\ndifference (free - collided): {}\nspeed_diff quartile means: {}\n",
        rows.len(),
        summary.collided_rows,
        summary.free_rows,
        fmt(summary.collided_mean),
        fmt(summary.free_mean),
        fmt(summary.difference),
        quartiles.iter().map(|q| format!("{q:.6}")).collect::<Vec<_>>().join(" ")
    ))
}

/// Replays a logged episode from its seed and actions, writing a PNG frame
/// and the text observation for the initial state and after every step.
pub fn cmd_render(args: &RenderArgs) -> Result<PathBuf> {
    let logs = load_episode_logs(&args.run)?;
    let log = logs.get(args.episode).with_context(|| {
        format!("episode {} out of range ({} logged)", args.episode, logs.len())
    })?;
    let out = args.out.clone().unwrap_or_else(|| args.run.join("frames").join(format!("episode_{:04}", args.episode)));
    std::fs::create_dir_all(&out)?;
    let mut world = reset(&log.config, log.seed)?;
    let dump = |world: &crate::sim::WorldState, k: usize| -> Result<()> {
        render_frame(world).save_png(&out.join(format!("step_{k:03}.png")))?;
        let text = describe_text(&compute_ttc(world), DEFAULT_TTC_THRESHOLD);
        write(&out.join(format!("step_{k:03}.txt")), format!("{}\n", text.0))
    };
    dump(&world, 0)?;
    for (k, record) in log.steps.iter().enumerate() {
        let outcome = step(&mut world, record.action)?;
        if (outcome.ego_x - record.ego_x).abs() > 1e-9 {
            bail!("replay diverged from the log at step {}", k + 1);
        }
        dump(&world, k + 1)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub backend: String,
    pub dim: usize,
    pub goal: GoalSpec,
    pub similarity: f64,
    pub reward: f64,
}

impl ProbeResult {
    pub fn render(&self) -> String {
        let polarity = match self.goal.polarity {
            Polarity::Opposite => "opposite",
            Polarity::Target => "target",
        };
        format!(
            "backend: {} (dim {})\ngoal: \"{}\" ({polarity})\nsimilarity: {:.6}\nreward: {:.6}\n",
            self.backend, self.dim, self.goal.goal_text, self.similarity, self.reward
        )
    }
}

fn load_video(path: &Path) -> Result<crate::obs::VideoClip> {
    let mut buffer = FrameBuffer::new();
    if path.is_dir() {
        let mut frames: Vec<PathBuf> = path
            .read_dir()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "png"))
            .collect();
        frames.sort();
        if frames.is_empty() {
            bail!("{} contains no PNG frames", path.display());
        }
        for f in frames {
            buffer.push(FrameImage::load_png(&f).with_context(|| format!("loading {}", f.display()))?);
        }
    } else {
        buffer.push(FrameImage::load_png(path).with_context(|| format!("loading {}", path.display()))?);
    }
    Ok(buffer.clip().expect("at least one frame"))
}

pub fn cmd_embed_probe(args: &ProbeArgs) -> Result<ProbeResult> {
    let modality = Modality::from(args.modality);
    let polarity = match args.polarity {
        PolarityArg::Opposite => Polarity::Opposite,
        PolarityArg::Target => Polarity::Target,
    };
    let backend_config = BackendConfig {
        kind: match args.backend {
            BackendArg::Reference => BackendKind::Reference,
            BackendArg::Remote => BackendKind::Remote,
        },
        endpoint: args.endpoint.clone(),
        ..BackendConfig::default()
    };
    let mut goal = GoalSpec::default_for(modality, polarity);
    if let Some(text) = &args.goal {
        goal = goal.with_text(text.clone());
    }
    let backend = backend_config.build(modality)?;
    let goal_emb = embed_goal(backend.as_ref(), &goal)?;
    let obs_emb = match modality {
        Modality::Text => {
            let text = std::fs::read_to_string(&args.payload)
                .with_context(|| format!("reading {}", args.payload.display()))?;
            backend.embed_observation(ObservationRef::Text(text.trim_end_matches(['\n', '\r'])))?
        }
        Modality::Image => {
            let frame = FrameImage::load_png(&args.payload)
                .with_context(|| format!("loading {}", args.payload.display()))?;
            backend.embed_observation(ObservationRef::Image(&frame))?
        }
        Modality::Video => backend.embed_observation(ObservationRef::Video(&load_video(&args.payload)?))?,
    };
    let similarity = cosine_similarity(&obs_emb, &goal_emb)?;
    let reward = match polarity {
        Polarity::Opposite => lord_reward(&obs_emb, &goal_emb)?,
        Polarity::Target => target_reward(&obs_emb, &goal_emb)?,
    };
    let d = backend.descriptor();
    Ok(ProbeResult { backend: d.name.clone(), dim: d.dim, goal, similarity, reward })
}
