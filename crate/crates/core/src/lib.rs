//! Multi-character activity synthesis for declarative indoor scenes.
//!
//! The pipeline clusters scene objects into areas, plans labeled views,
//! asks a language model for an area graph and a keyframed activity, places
//! characters by simulated annealing and links keyframes with A* walks.

pub mod activity;
pub mod config;
pub mod areas;
pub mod dsu;
pub mod geom;
pub mod llm;
pub mod path;
pub mod pipeline;
pub mod placement;
pub mod scene;
pub mod service;
pub mod svg;
pub mod views;

pub use activity::{
    diff_keyframes, validate_activity, Activity, ActivityError, ChangeKind, Character, Description, Interaction,
    Keyframe, Pose, Rule, StateChange, Target, Violation,
};
pub use areas::{cluster_areas, mst_fallback_edges, Area, AreaEdge, AreaSceneGraph, EdgeProvenance};
pub use geom::{Footprint, Rect, Segment, Vec2, Vec3};
pub use path::{astar, build_grid, plan_transitions, OccupancyGrid, PathError, PlannedPath, Trajectory};
pub use placement::{optimize_keyframe, AnnealSchedule, CharacterPose, FreeSpace, KeyframePlacement, PlacedPose};
pub use scene::{load_scene, Affordance, Scene, SceneError, SceneObject};
pub use views::{plan_views, CameraView, FilterConfig, Mark, ViewConfig, ViewObservation, ViewPlan};
pub use config::{ActivityRequest, ConfigError, RunConfig, Seeds};
pub use pipeline::{compile_activity, place_activity, run_pipeline, run_with_backend, FixedUser, PipelineError, RunResult, Stage};
