//! Layout chain-of-thought prompts.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::activity::{Character, Keyframe};
use crate::areas::{area_descriptions_json, Area, AreaSceneGraph};
use crate::scene::Scene;
use crate::views::ViewObservation;

const SYSTEM_HEADER: &str = "You are a visual assistant interpreting 3D scenes containing multiple objects. \
Inputs provided to you: 1. Scene areas (JSON), each including an \"objects\" list; 2. Multi-view scene images \
with unique object IDs labeled at object centers. \n\nYou must explicitly perform two tasks below, following the exact steps:";

const TASK_ONE: &str = "Task I. Build a Scene Graph: \n\n\
Step 1. List objects grouped by their areas clearly from all provided images.\n\n\
Step 2. Identify visual adjacencies between scene views based on objects appearing in multiple images from Step 1.\n\n\
Step 3. Construct a Scene Graph (JSON), using areas as nodes, with an additional \"adjacent\" attribute, and connect \
nodes (areas) explicitly if their adjacencies are confirmed by shared objects. Clearly state reasons for each \
connection using evidence from previous steps.";

const TASK_ONE_NO_VIEWS: &str = "Task I. Build a Scene Graph: \n\n\
Step 1. List objects grouped by their areas from the scene areas JSON.\n\n\
Step 2. Construct a Scene Graph (JSON), using areas as nodes, with an additional \"adjacent\" attribute, and connect \
nodes (areas) that are spatially adjacent. Clearly state reasons for each connection.";

const TASK_TWO: &str = "Task II. Generate a Virtual Activity: \n\n\
Step 1. Decide the number of characters appropriate for the scene scale, and assign unique IDs and relevant roles \
(family/social/professional) based on scene context.\n\n\
Step 2. Activity creation (sequence of keyframes): Each keyframe is a list of all characters' states at that time. \
A character's state is defined as: (ID, pose, reference, interaction), with \"ID\" being the assigned character ID, \
\"pose\" being \"standing\", \"sitting\", or \"lying\", \"reference\" being the object for \"standing nearby\" or \
\"sitting on\" or \"lying on\", \"interaction\" being a tuple (type, interactee) where \"type\" is the action performed \
(e.g., \"talk to\", \"use\") and \"interactee\" is the character/object involved in interaction.\n\
Ensure continuous transitions between keyframe: Every change in a character's state triggers a new keyframe. When \
changing states, please clearly justify your reasoning. For movements to a new \"reference\" object, explicitly \
describe intermediate steps based on the scene graph and shared object adjacencies observed in the images.";

const SYSTEM_FOOTER: &str = "Provide explicit, structured answers following these guidelines.";

const GRAPH_FORMAT: &str = "Perform Task I. End your answer with the scene graph as a single JSON object.";

const ACTIVITY_FORMAT: &str = "Perform Task II using the scene graph above. Start each keyframe with \
\"keyframe <index>:\" and write every state as a tuple line (ID, pose, reference, (type, interactee)) \
followed by \"Thoughts: ...\". Write \"(ID's state does not change)\" for a character whose state is unchanged.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UserPart {
    Text { text: String },
    /// A labeled view. `reference` is an image URL or an artifact name;
    /// `marks` are the object labels drawn on it.
    Image { reference: String, marks: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub user_parts: Vec<UserPart>,
    pub assistant_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_parts: Vec<UserPart>,
    pub fewshot: Vec<FewShot>,
}

impl PromptBundle {
    pub fn text_only(system: impl Into<String>, user: impl Into<String>) -> PromptBundle {
        PromptBundle {
            system_text: system.into(),
            user_parts: vec![UserPart::Text { text: user.into() }],
            fewshot: Vec::new(),
        }
    }

    /// Hex SHA-256 of the canonical JSON form; keys scripted mock replies.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("prompt serialization is infallible");
        hex::encode(Sha256::digest(canonical))
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.user_parts.iter().filter_map(|p| match p {
            UserPart::Text { text } => Some(text.as_str()),
            UserPart::Image { .. } => None,
        })
    }

    pub fn image_count(&self) -> usize {
        self.user_parts.iter().filter(|p| matches!(p, UserPart::Image { .. })).count()
    }
}

fn system_text(task: &str) -> String {
    format!("{SYSTEM_HEADER}\n\n{task}\n\n{SYSTEM_FOOTER}")
}

fn view_parts(views: &[ViewObservation], scene: &Scene) -> Vec<UserPart> {
    views
        .iter()
        .enumerate()
        .map(|(i, v)| UserPart::Image {
            reference: format!("view_{i}"),
            marks: v
                .surviving_marks
                .iter()
                .map(|id| scene.object(*id).map(|o| o.mark_name()).unwrap_or_else(|| format!("object_{id}")))
                .collect(),
        })
        .collect()
}

/// Task I prompt. Without views the image steps are dropped.
pub fn build_graph_prompt(areas: &[Area], views: &[ViewObservation], scene: &Scene, fewshot: &[FewShot]) -> PromptBundle {
    let task = if views.is_empty() { TASK_ONE_NO_VIEWS } else { TASK_ONE };
    let mut user_parts = vec![UserPart::Text {
        text: area_descriptions_json(areas, scene),
    }];
    user_parts.extend(view_parts(views, scene));
    user_parts.push(UserPart::Text {
        text: GRAPH_FORMAT.to_string(),
    });
    PromptBundle {
        system_text: system_text(task),
        user_parts,
        fewshot: fewshot.to_vec(),
    }
}

/// A user-authored state held constant during regeneration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedDescription {
    pub character: String,
    /// Verbatim user text, e.g. `(character_u, sitting, object_11-sofa, (watch, object_10-tv))`.
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationDirectives {
    pub character_count: Option<usize>,
    pub roles: Vec<String>,
    /// Characters declared by earlier chunks; they must be reused.
    pub declared: Vec<Character>,
    pub keyframe_budget: usize,
    pub start_index: usize,
    pub history: Vec<Keyframe>,
    pub fixed: Vec<FixedDescription>,
}

impl Default for GenerationDirectives {
    fn default() -> Self {
        GenerationDirectives {
            character_count: None,
            roles: Vec::new(),
            declared: Vec::new(),
            keyframe_budget: 2,
            start_index: 0,
            history: Vec::new(),
            fixed: Vec::new(),
        }
    }
}

fn directive_text(d: &GenerationDirectives, scene: &Scene) -> String {
    let mut lines = Vec::new();
    if !d.declared.is_empty() {
        let list: Vec<String> = d.declared.iter().map(|c| format!("{}: {}", c.id, c.role)).collect();
        lines.push(format!(
            "Characters already declared: {}. Keep these IDs and roles and do not declare new characters.",
            list.join("; ")
        ));
    } else {
        if let Some(n) = d.character_count {
            lines.push(format!(
                "Create exactly {n} character{}, numbered from character_0.",
                if n == 1 { "" } else { "s" }
            ));
        }
        if !d.roles.is_empty() {
            lines.push(format!("Assign these roles in order: {}.", d.roles.join(", ")));
        }
        lines.push("Declare characters as \"character_<n>: <Role>\" separated by semicolons.".to_string());
    }
    if !d.history.is_empty() {
        lines.push("Keyframes so far:".to_string());
        for k in &d.history {
            lines.push(format!("keyframe {}:", k.index));
            for desc in &k.descriptions {
                lines.push(desc.to_tuple(scene));
            }
        }
    }
    for f in &d.fixed {
        lines.push(format!(
            "FIXED: {} is controlled by the user and keeps the state {} in every keyframe. Repeat this state \
             unchanged and plan the other characters around it.",
            f.character, f.text
        ));
    }
    let last = d.start_index + d.keyframe_budget.saturating_sub(1);
    lines.push(if d.keyframe_budget == 1 {
        format!("Generate exactly 1 keyframe: keyframe {}.", d.start_index)
    } else {
        format!(
            "Generate exactly {} keyframes: keyframe {} through keyframe {last}.",
            d.keyframe_budget, d.start_index
        )
    });
    lines.join("\n")
}

/// Task II prompt over a completed area graph.
pub fn build_activity_prompt(
    graph: &AreaSceneGraph,
    views: &[ViewObservation],
    directives: &GenerationDirectives,
    scene: &Scene,
    fewshot: &[FewShot],
) -> PromptBundle {
    let mut user_parts = vec![UserPart::Text {
        text: graph.to_prompt_json(scene),
    }];
    user_parts.extend(view_parts(views, scene));
    user_parts.push(UserPart::Text {
        text: format!("{ACTIVITY_FORMAT}\n{}", directive_text(directives, scene)),
    });
    PromptBundle {
        system_text: system_text(TASK_TWO),
        user_parts,
        fewshot: fewshot.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Rect, Vec2, Vec3};
    use crate::scene::{Affordance, SceneObject};
    use crate::views::CameraView;
    use std::collections::BTreeSet;

    fn scene() -> Scene {
        let o = |id: u32, label: &str, x: f64| SceneObject {
            id,
            label: label.into(),
            position: Vec3::new(x, 1.0, 0.4),
            yaw: 0.0,
            half_extents: Vec3::repeat(0.2),
            affordances: [Affordance::WalkObstacle].into_iter().collect(),
            support_height: None,
        };
        Scene {
            objects: vec![o(0, "sink", 1.0), o(1, "stove", 2.0), o(2, "bed", 8.0)],
            walls: vec![],
            floor_bounds: Rect::new(0.0, 0.0, 10.0, 4.0),
        }
    }

    fn areas() -> Vec<Area> {
        vec![
            Area {
                id: 0,
                object_ids: BTreeSet::from([0, 1]),
                centroid: Vec2::new(1.5, 1.0),
            },
            Area {
                id: 1,
                object_ids: BTreeSet::from([2]),
                centroid: Vec2::new(8.0, 1.0),
            },
        ]
    }

    fn view(marks: &[u32]) -> ViewObservation {
        ViewObservation {
            view: CameraView {
                position: Vec3::new(5.0, 2.0, 1.6),
                yaw: 0.0,
                pitch: -0.2,
                fov_h: 1.5,
                image_aspect: 4.0 / 3.0,
            },
            surviving_marks: marks.iter().copied().collect(),
        }
    }

    #[test]
    fn area_json_is_first_user_part() {
        let p = build_graph_prompt(&areas(), &[view(&[0, 1]), view(&[2])], &scene(), &[]);
        assert_eq!(
            p.texts().next().unwrap(),
            r#"{"area_0" : {"objects": ["object_0-sink", "object_1-stove"]}, "area_1" : {"objects": ["object_2-bed"]}}"#
        );
        assert_eq!(p.image_count(), 2);
        assert!(p.system_text.contains("Step 2. Identify visual adjacencies"));
        assert!(p.system_text.contains("\"adjacent\" attribute"));
        match &p.user_parts[2] {
            UserPart::Image { reference, marks } => {
                assert_eq!(reference, "view_1");
                assert_eq!(marks, &["object_2-bed"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_views_degrades() {
        let p = build_graph_prompt(&areas(), &[], &scene(), &[]);
        assert_eq!(p.image_count(), 0);
        assert!(!p.system_text.contains("visual adjacencies"));
        assert!(p.system_text.contains("Scene Graph (JSON)"));
    }

    #[test]
    fn prompts_are_pure() {
        let a = build_graph_prompt(&areas(), &[view(&[0])], &scene(), &[]);
        let b = build_graph_prompt(&areas(), &[view(&[0])], &scene(), &[]);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    fn graph() -> AreaSceneGraph {
        AreaSceneGraph::complete(areas(), &BTreeSet::from([(0, 1)]))
    }

    #[test]
    fn activity_prompt_structure() {
        let d = GenerationDirectives {
            character_count: Some(2),
            keyframe_budget: 3,
            ..Default::default()
        };
        let p = build_activity_prompt(&graph(), &[], &d, &scene(), &[]);
        assert!(p.system_text.contains("Step 1. Decide the number of characters"));
        assert!(p.system_text.contains("(ID, pose, reference, interaction)"));
        assert!(p.system_text.contains("explicitly describe intermediate steps based on the scene graph"));
        let text: Vec<&str> = p.texts().collect();
        assert!(text[0].contains("\"adjacent\": [\"area_1\"]"));
        assert!(text[1].contains("Create exactly 2 characters"));
        assert!(text[1].contains("Generate exactly 3 keyframes: keyframe 0 through keyframe 2."));
    }

    #[test]
    fn fixed_clause_and_single_keyframe() {
        let d = GenerationDirectives {
            keyframe_budget: 1,
            start_index: 4,
            fixed: vec![FixedDescription {
                character: "character_u".into(),
                text: "(character_u, sitting, object_11-sofa, (watch, object_10-tv))".into(),
            }],
            ..Default::default()
        };
        let p = build_activity_prompt(&graph(), &[], &d, &scene(), &[]);
        let t = p.texts().nth(1).unwrap();
        assert!(t.contains("FIXED: character_u"));
        assert!(t.contains("(character_u, sitting, object_11-sofa, (watch, object_10-tv))"));
        assert!(t.contains("Generate exactly 1 keyframe: keyframe 4."));
    }
}
