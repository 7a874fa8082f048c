//! End-to-end run: scene → areas → views → area graph → activity →
//! placements → walking trajectories, with every artifact persisted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{diff_keyframes, validate_activity, Activity, ChangeKind, Character, Description, Keyframe, Target};
use crate::areas::{cluster_areas, Area, AreaSceneGraph};
use crate::config::{RunConfig, Seeds};
use crate::geom::Vec2;
use crate::llm::{
    build_activity_prompt, build_graph_prompt, compile_constraints, parse_activity_chunk, parse_graph_response,
    parse_verb_reply, verb_prompt, ChatBackend, FixedDescription, GenerationDirectives, InteractionConstraintSpec,
    PromptBundle, VerbTable,
};
use crate::path::{build_grid, plan_transitions, Trajectory, CHARACTER_RADIUS};
use crate::placement::{optimize_keyframe, AnnealSchedule, CharacterPose, KeyframePlacement};
use crate::scene::{load_scene, Scene};
use crate::views::{plan_views, ViewPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Load,
    Cluster,
    Views,
    GraphInvoke,
    GraphParse,
    ActivityInvoke,
    ActivityParse,
    Validate,
    Constraints,
    Optimize,
    Transitions,
    Persist,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("stage serializes");
        f.write_str(v.as_str().expect("unit variant"))
    }
}

#[derive(Debug, Clone, Error, PartialEq, Serialize, Deserialize)]
#[error("stage {stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, err: impl fmt::Display) -> Self {
        PipelineError {
            stage,
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub label: String,
    pub prompt_hash: String,
    pub prompt: PromptBundle,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub keyframe: usize,
    pub character: String,
    pub text: String,
}

/// A user-controlled character whose description and pose stay constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedUser {
    pub character: String,
    /// The user's description exactly as submitted.
    pub text: String,
    pub description: Description,
    pub pose: CharacterPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seeds: Seeds,
    pub keyframes_per_query: usize,
    pub exchanges: Vec<Exchange>,
    pub traces: Vec<Trace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_user: Option<FixedUser>,
    pub constraints: Vec<BTreeMap<String, Vec<InteractionConstraintSpec>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scene: Scene,
    pub areas: Vec<Area>,
    pub graph: AreaSceneGraph,
    pub views: ViewPlan,
    pub activity: Activity,
    pub placements: Vec<KeyframePlacement>,
    pub trajectories: Vec<Trajectory>,
    pub provenance: Provenance,
    /// Wall-clock seconds per stage; excluded from the canonical form.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub timings: BTreeMap<String, f64>,
}

impl RunResult {
    /// Serialization without timings; identical across seeded reruns.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.timings.clear();
        serde_json::to_string_pretty(&c).expect("run result serializes")
    }

    pub fn placement(&self, keyframe: usize) -> Option<&KeyframePlacement> {
        self.placements.iter().find(|p| p.index == keyframe)
    }

    /// Deepest overlap between any two character capsules in any keyframe.
    pub fn max_capsule_overlap(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for p in &self.placements {
            let poses: Vec<Vec2> = p.poses.values().map(|q| q.pose.floor()).collect();
            for (i, a) in poses.iter().enumerate() {
                for b in &poses[i + 1..] {
                    worst = worst.max(2.0 * CHARACTER_RADIUS - (a - b).norm());
                }
            }
        }
        worst
    }

    pub fn max_group_cost(&self) -> f64 {
        self.placements.iter().map(|p| p.max_group_cost()).fold(0.0, f64::max)
    }
}

/// Writes artifacts as stages finish so a failed run leaves its partial state.
struct Recorder {
    dir: Option<PathBuf>,
    exchange_no: usize,
}

impl Recorder {
    fn new(dir: Option<&Path>) -> Result<Self, PipelineError> {
        if let Some(d) = dir {
            for sub in ["", "prompts", "responses"] {
                std::fs::create_dir_all(d.join(sub)).map_err(|e| PipelineError::new(Stage::Persist, format!("{}: {e}", d.display())))?;
            }
        }
        Ok(Recorder {
            dir: dir.map(Path::to_path_buf),
            exchange_no: 0,
        })
    }

    fn text(&self, name: &str, body: &str) -> Result<(), PipelineError> {
        if let Some(d) = &self.dir {
            let p = d.join(name);
            std::fs::write(&p, body).map_err(|e| PipelineError::new(Stage::Persist, format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), PipelineError> {
        if self.dir.is_none() {
            return Ok(());
        }
        let body = serde_json::to_string_pretty(value).map_err(|e| PipelineError::new(Stage::Persist, e))?;
        self.text(name, &body)
    }

    fn exchange(&mut self, x: &Exchange) -> Result<(), PipelineError> {
        let n = self.exchange_no;
        self.exchange_no += 1;
        self.json(&format!("prompts/{n:02}_{}.json", x.label), &x.prompt)?;
        self.text(&format!("responses/{n:02}_{}.txt", x.label), &x.response)
    }

    fn fail(&self, err: PipelineError) -> PipelineError {
        if let Err(e) = self.json("error.json", &err) {
            tracing::error!(error = %e, "could not persist pipeline error");
        }
        err
    }
}

fn invoke(
    backend: &dyn ChatBackend,
    stage: Stage,
    label: String,
    prompt: PromptBundle,
    rec: &mut Recorder,
    exchanges: &mut Vec<Exchange>,
) -> Result<String, PipelineError> {
    tracing::info!(%label, "querying backend");
    let response = backend.invoke(&prompt).map_err(|e| PipelineError::new(stage, e))?;
    let x = Exchange {
        label,
        prompt_hash: prompt.hash(),
        prompt,
        response: response.clone(),
    };
    rec.exchange(&x)?;
    exchanges.push(x);
    Ok(response)
}

/// Everything up to and including the area graph.
#[derive(Debug, Clone)]
pub struct SceneStage {
    pub scene: Scene,
    pub areas: Vec<Area>,
    pub views: ViewPlan,
    pub graph: AreaSceneGraph,
    pub exchanges: Vec<Exchange>,
    pub timings: BTreeMap<String, f64>,
}

impl SceneStage {
    /// Reuses the scene-side results of an earlier run.
    pub fn from_result(r: &RunResult) -> SceneStage {
        SceneStage {
            scene: r.scene.clone(),
            areas: r.areas.clone(),
            views: r.views.clone(),
            graph: r.graph.clone(),
            exchanges: r
                .provenance
                .exchanges
                .iter()
                .filter(|x| x.label == "graph")
                .cloned()
                .collect(),
            timings: BTreeMap::new(),
        }
    }
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: Stage, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    timings.insert(stage.to_string(), t.elapsed().as_secs_f64());
    out
}

fn scene_stage_inner(cfg: &RunConfig, backend: &dyn ChatBackend, rec: &mut Recorder) -> Result<SceneStage, PipelineError> {
    let mut timings = BTreeMap::new();
    let scene = timed(&mut timings, Stage::Load, || load_scene(&cfg.scene)).map_err(|e| PipelineError::new(Stage::Load, e))?;
    rec.json("scene.json", &scene)?;
    let areas = timed(&mut timings, Stage::Cluster, || cluster_areas(&scene, cfg.d_max));
    rec.json("areas.json", &areas)?;
    let views = timed(&mut timings, Stage::Views, || plan_views(&scene, cfg.seeds.views, &cfg.views))
        .map_err(|e| PipelineError::new(Stage::Views, e))?;
    rec.json("views.json", &views)?;
    let mut exchanges = Vec::new();
    let prompt = build_graph_prompt(&areas, &views.views, &scene, &[]);
    let t = Instant::now();
    let response = invoke(backend, Stage::GraphInvoke, "graph".into(), prompt, rec, &mut exchanges)?;
    timings.insert(Stage::GraphInvoke.to_string(), t.elapsed().as_secs_f64());
    let graph = parse_graph_response(&response, &areas).map_err(|e| PipelineError::new(Stage::GraphParse, e))?;
    rec.json("graph.json", &graph)?;
    Ok(SceneStage {
        scene,
        areas,
        views,
        graph,
        exchanges,
        timings,
    })
}

fn apply_fixed(keyframes: &mut [Keyframe], fixed: &FixedUser) {
    for k in keyframes {
        match k.descriptions.iter_mut().find(|d| d.subject == fixed.character) {
            Some(d) => *d = fixed.description.clone(),
            None => k.descriptions.insert(0, fixed.description.clone()),
        }
    }
}

pub fn verb_table(cfg: &RunConfig) -> Result<VerbTable, PipelineError> {
    match &cfg.verbs {
        None => Ok(VerbTable::builtin()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| PipelineError::new(Stage::Constraints, format!("{}: {e}", p.display())))?;
            VerbTable::from_json_str(&text).map_err(|e| PipelineError::new(Stage::Constraints, e))
        }
    }
}

/// Interaction constraints per keyframe, keyed by character.
pub fn compile_activity(activity: &Activity, table: &VerbTable) -> Vec<BTreeMap<String, Vec<InteractionConstraintSpec>>> {
    activity
        .keyframes
        .iter()
        .map(|k| {
            k.descriptions
                .iter()
                .map(|d| (d.subject.clone(), compile_constraints(d, table)))
                .collect()
        })
        .collect()
}

/// Optimizes every keyframe in order. Characters whose state is unchanged
/// keep their previous pose; `fixed` pins one character everywhere.
pub fn place_activity(
    activity: &Activity,
    scene: &Scene,
    constraints: &[BTreeMap<String, Vec<InteractionConstraintSpec>>],
    schedule: &AnnealSchedule,
    seed: u64,
    fixed: Option<(&str, CharacterPose)>,
) -> Result<Vec<KeyframePlacement>, PipelineError> {
    let mut placements: Vec<KeyframePlacement> = Vec::with_capacity(activity.keyframes.len());
    for (i, k) in activity.keyframes.iter().enumerate() {
        let mut pinned: BTreeMap<String, CharacterPose> = BTreeMap::new();
        if i > 0 {
            let diffs = diff_keyframes(&activity.keyframes[i - 1], k).map_err(|e| PipelineError::new(Stage::Optimize, e))?;
            for d in diffs.iter().filter(|d| d.kind == ChangeKind::Unchanged) {
                pinned.insert(d.character.clone(), placements[i - 1].poses[&d.character].pose);
            }
        }
        if let Some((c, pose)) = fixed {
            pinned.insert(c.to_string(), pose);
        }
        let empty = BTreeMap::new();
        let specs = constraints.get(i).unwrap_or(&empty);
        let p = optimize_keyframe(k, scene, specs, schedule, &pinned, seed)
            .map_err(|e| PipelineError::new(Stage::Optimize, format!("keyframe {}: {e}", k.index)))?;
        placements.push(p);
    }
    Ok(placements)
}

fn activity_stage_inner(
    cfg: &RunConfig,
    backend: &dyn ChatBackend,
    stage: SceneStage,
    fixed: Option<&FixedUser>,
    rec: &mut Recorder,
) -> Result<RunResult, PipelineError> {
    let SceneStage {
        scene,
        areas,
        views,
        graph,
        mut exchanges,
        mut timings,
    } = stage;

    let t_activity = Instant::now();
    let target = cfg.activity.keyframe_count;
    let mut declared: Vec<Character> = Vec::new();
    let mut keyframes: Vec<Keyframe> = Vec::new();
    let mut traces = Vec::new();
    let mut chunk = 0usize;
    while keyframes.len() < target {
        if chunk >= target {
            return Err(PipelineError::new(Stage::ActivityParse, "backend stopped producing keyframes"));
        }
        let directives = GenerationDirectives {
            character_count: cfg.activity.character_count,
            roles: cfg.activity.roles.clone(),
            declared: declared.clone(),
            keyframe_budget: cfg.keyframes_per_query.min(target - keyframes.len()),
            start_index: keyframes.last().map_or(0, |k| k.index + 1),
            history: keyframes.clone(),
            fixed: fixed
                .map(|f| FixedDescription {
                    character: f.character.clone(),
                    text: f.text.clone(),
                })
                .into_iter()
                .collect(),
        };
        let prompt = build_activity_prompt(&graph, &views.views, &directives, &scene, &[]);
        let response = invoke(backend, Stage::ActivityInvoke, format!("activity_{chunk}"), prompt, rec, &mut exchanges)?;
        let parsed = parse_activity_chunk(&response, &scene, &declared, keyframes.last())
            .map_err(|e| PipelineError::new(Stage::ActivityParse, e))?;
        if parsed.keyframes.is_empty() {
            return Err(PipelineError::new(Stage::ActivityParse, format!("response {chunk} has no keyframes")));
        }
        if declared.is_empty() {
            declared = parsed.characters;
        }
        traces.extend(parsed.traces.into_iter().map(|(keyframe, character, text)| Trace {
            keyframe,
            character,
            text,
        }));
        keyframes.extend(parsed.keyframes);
        chunk += 1;
    }
    if let Some(f) = fixed {
        apply_fixed(&mut keyframes, f);
        if !declared.iter().any(|c| c.id == f.character) {
            declared.push(Character {
                id: f.character.clone(),
                role: "user".into(),
            });
        }
    }
    let activity = Activity {
        characters: declared,
        keyframes,
    };
    timings.insert("activity".into(), t_activity.elapsed().as_secs_f64());
    rec.json("activity.json", &activity)?;
    let violations = validate_activity(&activity, &scene);
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(PipelineError::new(Stage::Validate, msg.join("; ")));
    }

    let mut table = verb_table(cfg)?;
    if cfg.resolve_unknown_verbs {
        let unknown: BTreeSet<String> = activity
            .keyframes
            .iter()
            .flat_map(|k| &k.descriptions)
            .filter(|d| matches!(d.interaction.target, Target::Object(_) | Target::Character(_)))
            .filter(|d| table.lookup(&d.interaction.verb).is_none())
            .map(|d| d.interaction.verb.clone())
            .collect();
        for verb in unknown {
            let reply = invoke(backend, Stage::Constraints, format!("verb_{}", verb.replace(' ', "_")), verb_prompt(&verb), rec, &mut exchanges)?;
            match parse_verb_reply(&reply) {
                Ok(rule) => table.insert(&verb, rule),
                Err(e) => tracing::warn!(%verb, error = %e, "verb reply unusable; default applies"),
            }
        }
    }
    let constraints = compile_activity(&activity, &table);

    let t_opt = Instant::now();
    let user = fixed.map(|f| (f.character.as_str(), f.pose));
    let placements = place_activity(&activity, &scene, &constraints, &cfg.anneal, cfg.seeds.placement, user)?;
    timings.insert(Stage::Optimize.to_string(), t_opt.elapsed().as_secs_f64());
    rec.json("placements.json", &placements)?;

    let t_tr = Instant::now();
    let grid = build_grid(&scene, cfg.grid_cell);
    let mut trajectories = Vec::new();
    for w in activity.keyframes.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let diffs = diff_keyframes(a, b).map_err(|e| PipelineError::new(Stage::Transitions, e))?;
        let pos = |idx: usize| -> BTreeMap<String, Vec2> {
            placements
                .iter()
                .find(|p| p.index == idx)
                .map(|p| p.poses.iter().map(|(c, q)| (c.clone(), q.pose.floor())).collect())
                .unwrap_or_default()
        };
        let mut t = plan_transitions(&pos(a.index), &pos(b.index), &diffs, &grid, a.index, b.index)
            .map_err(|e| PipelineError::new(Stage::Transitions, format!("keyframe {} to {}: {e}", a.index, b.index)))?;
        t.sort_by(|x, y| x.character.cmp(&y.character));
        trajectories.extend(t);
    }
    timings.insert(Stage::Transitions.to_string(), t_tr.elapsed().as_secs_f64());
    rec.json("trajectories.json", &trajectories)?;

    let result = RunResult {
        scene,
        areas,
        graph,
        views,
        activity,
        placements,
        trajectories,
        provenance: Provenance {
            seeds: cfg.seeds,
            keyframes_per_query: cfg.keyframes_per_query,
            exchanges,
            traces,
            fixed_user: fixed.cloned(),
            constraints,
        },
        timings,
    };
    rec.text("run_result.json", &result.canonical_json())?;
    rec.json("timings.json", &result.timings)?;
    Ok(result)
}

/// Scene-side stages only, with artifacts written to the output directory.
pub fn run_scene_stage(cfg: &RunConfig, backend: &dyn ChatBackend) -> Result<SceneStage, PipelineError> {
    let mut rec = Recorder::new(cfg.output_dir.as_deref())?;
    scene_stage_inner(cfg, backend, &mut rec).map_err(|e| rec.fail(e))
}

/// Activity-side stages on top of a finished scene stage.
pub fn run_activity_stage(
    cfg: &RunConfig,
    backend: &dyn ChatBackend,
    stage: SceneStage,
    fixed: Option<&FixedUser>,
) -> Result<RunResult, PipelineError> {
    let mut rec = Recorder::new(cfg.output_dir.as_deref())?;
    activity_stage_inner(cfg, backend, stage, fixed, &mut rec).map_err(|e| rec.fail(e))
}

pub fn run_with_backend(cfg: &RunConfig, backend: &dyn ChatBackend) -> Result<RunResult, PipelineError> {
    let mut rec = Recorder::new(cfg.output_dir.as_deref())?;
    let out = scene_stage_inner(cfg, backend, &mut rec).and_then(|s| activity_stage_inner(cfg, backend, s, None, &mut rec));
    out.map_err(|e| rec.fail(e))
}

/// Connects the configured backend after validating the config, then runs every stage.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunResult, PipelineError> {
    cfg.validate().map_err(|e| PipelineError::new(Stage::Load, e))?;
    let backend = cfg.backend.connect().map_err(|e| PipelineError::new(Stage::Load, e))?;
    run_with_backend(cfg, backend.as_ref())
}
