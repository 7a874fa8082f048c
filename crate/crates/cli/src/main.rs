use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use scenact_core::llm::{BackendConfig, VerbTable};
use scenact_core::pipeline::verb_table;
use scenact_core::{
    compile_activity, load_scene, place_activity, plan_views, run_pipeline, Activity, AnnealSchedule, RunConfig,
    RunResult, ViewConfig,
};

#[derive(Parser)]
#[command(name = "scenact", version, about = "Multi-character activity synthesis for indoor scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and persist the artifacts.
    Run(RunArgs),
    /// Plan labeled views for a scene.
    Views(ViewsArgs),
    /// Place characters for an existing activity.
    Place(PlaceArgs),
    /// Serve a session over HTTP.
    Serve(ServeArgs),
    /// Render one keyframe as a top-down SVG.
    Export(ExportArgs),
}

/// Run configuration with per-field overrides.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Mock backend script.
    #[arg(long, conflicts_with = "endpoint")]
    script: Option<PathBuf>,
    /// OpenAI-compatible chat completions URL.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    view_seed: Option<u64>,
    #[arg(long)]
    placement_seed: Option<u64>,
    #[arg(long)]
    characters: Option<usize>,
    #[arg(long)]
    keyframes: Option<usize>,
    #[arg(long)]
    keyframes_per_query: Option<usize>,
    #[arg(long)]
    verbs: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => {
                let scene = self.scene.clone().context("either --config or --scene is required")?;
                RunConfig::new(scene, self.backend()?.context("either --config, --script or --endpoint is required")?)
            }
        };
        if let Some(s) = &self.scene {
            cfg.scene = s.clone();
        }
        if self.config.is_some() {
            if let Some(b) = self.backend()? {
                cfg.backend = b;
            }
        }
        if let Some(e) = &self.api_key_env {
            cfg.backend.api_key_env = e.clone();
        }
        if let Some(s) = self.view_seed {
            cfg.seeds.views = s;
        }
        if let Some(s) = self.placement_seed {
            cfg.seeds.placement = s;
        }
        if let Some(n) = self.characters {
            cfg.activity.character_count = Some(n);
        }
        if let Some(n) = self.keyframes {
            cfg.activity.keyframe_count = n;
        }
        if let Some(n) = self.keyframes_per_query {
            cfg.keyframes_per_query = n;
        }
        if let Some(v) = &self.verbs {
            cfg.verbs = Some(v.clone());
        }
        if let Some(o) = &self.output_dir {
            cfg.output_dir = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn backend(&self) -> Result<Option<BackendConfig>> {
        Ok(match (&self.script, &self.endpoint) {
            (Some(s), _) => Some(BackendConfig::mock(s)),
            (None, Some(e)) => {
                let model = self.model.clone().context("--endpoint needs --model")?;
                Some(BackendConfig::http(e, model))
            }
            (None, None) => None,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Also write the full run result here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ViewsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    candidates: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlaceArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long)]
    activity: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Anneal schedule as a JSON file or inline JSON; missing fields keep defaults.
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    verbs: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
}

#[derive(Args)]
struct ExportArgs {
    /// A saved run_result.json; without it the configured run is executed first.
    #[arg(long)]
    run: Option<PathBuf>,
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    keyframe: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Config for the offline subcommands. The backend section is read but
/// never validated or connected.
fn partial_config(config: Option<&Path>) -> Result<Option<RunConfig>> {
    config.map(|p| RunConfig::load(p).map_err(Into::into)).transpose()
}

fn views(a: ViewsArgs) -> Result<()> {
    let base = partial_config(a.config.as_deref())?;
    let scene_path = a
        .scene
        .or_else(|| base.as_ref().map(|c| c.scene.clone()))
        .context("either --config or --scene is required")?;
    let mut vc = base.as_ref().map(|c| c.views.clone()).unwrap_or_else(ViewConfig::default);
    if let Some(n) = a.candidates {
        vc.candidates = n;
    }
    let seed = a.seed.or(base.map(|c| c.seeds.views)).unwrap_or_default();
    let scene = load_scene(&scene_path)?;
    let plan = plan_views(&scene, seed, &vc)?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&plan)?)
}

fn parse_schedule(s: &str) -> Result<AnnealSchedule> {
    let text = if s.trim_start().starts_with('{') {
        s.to_string()
    } else {
        fs::read_to_string(s).with_context(|| format!("reading schedule {s}"))?
    };
    let schedule: AnnealSchedule = serde_json::from_str(&text).context("parsing schedule")?;
    schedule.validate()?;
    Ok(schedule)
}

fn place(a: PlaceArgs) -> Result<()> {
    let base = partial_config(a.config.as_deref())?;
    let scene_path = a
        .scene
        .or_else(|| base.as_ref().map(|c| c.scene.clone()))
        .context("either --config or --scene is required")?;
    let scene = load_scene(&scene_path)?;
    let text = fs::read_to_string(&a.activity).with_context(|| format!("reading {}", a.activity.display()))?;
    let activity = Activity::from_json_str(&text).context("parsing activity")?;
    let violations = scenact_core::validate_activity(&activity, &scene);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        bail!("activity is invalid: {}", msg.join("; "));
    }
    let mut schedule = base.as_ref().map(|c| c.anneal).unwrap_or_default();
    if let Some(s) = &a.schedule {
        schedule = parse_schedule(s)?;
    }
    let table = match (&a.verbs, &base) {
        (Some(p), _) => VerbTable::from_json_str(&fs::read_to_string(p)?)?,
        (None, Some(c)) => verb_table(c)?,
        (None, None) => VerbTable::builtin(),
    };
    let seed = a.seed.or(base.as_ref().map(|c| c.seeds.placement)).unwrap_or_default();
    let constraints = compile_activity(&activity, &table);
    let placements = place_activity(&activity, &scene, &constraints, &schedule, seed, None)?;
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&placements)?)
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = a.cfg.build()?;
    let result = run_pipeline(&cfg)?;
    if let Some(p) = &a.out {
        fs::write(p, result.canonical_json()).with_context(|| format!("writing {}", p.display()))?;
    }
    let summary = serde_json::json!({
        "areas": result.areas.len(),
        "views": result.views.views.len(),
        "characters": result.activity.characters.len(),
        "keyframes": result.activity.keyframes.len(),
        "trajectories": result.trajectories.len(),
        "max_group_cost": result.max_group_cost(),
        "output_dir": cfg.output_dir,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let result: RunResult = match &a.run {
        Some(p) => serde_json::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .context("parsing run result")?,
        None => run_pipeline(&a.cfg.build()?)?,
    };
    let svg = scenact_core::svg::export_topdown(&result, a.keyframe)?;
    emit(a.out.as_deref(), &svg)
}

fn serve(a: ServeArgs) -> Result<()> {
    let cfg = a.cfg.build()?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port).parse().context("bad --host/--port")?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(scenact_core::service::serve(cfg, addr)).map_err(|e| anyhow::anyhow!(e))
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Views(a) => views(a),
        Command::Place(a) => place(a),
        Command::Serve(a) => serve(a),
        Command::Export(a) => export(a),
    }
}
