//! Activity grammar: keyframes of per-character descriptions
//! `(subject, pose, positional reference, (verb, target))`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scene::{Affordance, Scene};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Character {
    pub id: String,
    pub role: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pose {
    Standing,
    Sitting,
    Lying,
}

impl Pose {
    pub fn parse(s: &str) -> Option<Pose> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standing" => Some(Pose::Standing),
            "sitting" => Some(Pose::Sitting),
            "lying" => Some(Pose::Lying),
            _ => None,
        }
    }

    pub fn required_affordance(self) -> Option<Affordance> {
        match self {
            Pose::Standing => None,
            Pose::Sitting => Some(Affordance::Sittable),
            Pose::Lying => Some(Affordance::Lieable),
        }
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pose::Standing => "standing",
            Pose::Sitting => "sitting",
            Pose::Lying => "lying",
        })
    }
}

/// Grammatical object of an interaction. `Prop` covers hand-held items that
/// are not scene objects ("newspaper").
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    None,
    Object(u32),
    Character(String),
    Prop(String),
}

/// Parses `object_<id>` with an optional `-label` / `_label` suffix.
pub fn parse_object_ref(s: &str) -> Option<u32> {
    let rest = s.trim().strip_prefix("object_")?;
    let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    let tail = &rest[digits.len()..];
    if !(tail.is_empty() || tail.starts_with('-') || tail.starts_with('_')) {
        return None;
    }
    digits.parse().ok()
}

impl Target {
    pub fn parse(s: &str) -> Target {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("none") {
            Target::None
        } else if let Some(id) = parse_object_ref(s) {
            Target::Object(id)
        } else if s.starts_with("character_") {
            Target::Character(s.to_string())
        } else {
            Target::Prop(s.to_string())
        }
    }

    fn wire(&self) -> Option<String> {
        match self {
            Target::None => None,
            Target::Object(id) => Some(format!("object_{id}")),
            Target::Character(c) => Some(c.clone()),
            Target::Prop(p) => Some(p.clone()),
        }
    }

    pub fn render(&self, scene: &Scene) -> String {
        match self {
            Target::None => "none".to_string(),
            Target::Object(id) => object_name(scene, *id),
            Target::Character(c) | Target::Prop(c) => c.clone(),
        }
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.wire().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Option<String> = Option::deserialize(d)?;
        Ok(v.map(|s| Target::parse(&s)).unwrap_or(Target::None))
    }
}

fn object_name(scene: &Scene, id: u32) -> String {
    scene
        .object(id)
        .map(|o| o.mark_name())
        .unwrap_or_else(|| format!("object_{id}"))
}

mod object_ref {
    use super::parse_object_ref;
    use serde::{de::Error, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<u32>, s: S) -> Result<S::Ok, S::Error> {
        v.map(|id| format!("object_{id}")).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u32>, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(None),
            Some(s) if s.eq_ignore_ascii_case("none") => Ok(None),
            Some(s) => parse_object_ref(&s)
                .map(Some)
                .ok_or_else(|| D::Error::custom(format!("not an object reference: {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interaction {
    pub verb: String,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Description {
    pub subject: String,
    pub pose: Pose,
    #[serde(with = "object_ref")]
    pub reference: Option<u32>,
    pub interaction: Interaction,
}

impl Description {
    /// Tuple form used in prompts, e.g.
    /// `(character_0, sitting, object_11-sofa, (read, newspaper))`.
    pub fn to_tuple(&self, scene: &Scene) -> String {
        let reference = self
            .reference
            .map(|id| object_name(scene, id))
            .unwrap_or_else(|| "none".to_string());
        format!(
            "({}, {}, {}, ({}, {}))",
            self.subject,
            self.pose,
            reference,
            self.interaction.verb,
            self.interaction.target.render(scene)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub index: usize,
    pub descriptions: Vec<Description>,
}

impl Keyframe {
    pub fn description_of(&self, character: &str) -> Option<&Description> {
        self.descriptions.iter().find(|d| d.subject == character)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Activity {
    pub characters: Vec<Character>,
    pub keyframes: Vec<Keyframe>,
}

impl Activity {
    pub fn keyframe(&self, index: usize) -> Option<&Keyframe> {
        self.keyframes.iter().find(|k| k.index == index)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("activity serialization is infallible")
    }

    pub fn from_json_str(text: &str) -> Result<Activity, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DuplicateCharacter,
    NoKeyframes,
    NonContiguousKeyframes,
    UnknownSubject,
    DuplicateDescription,
    MissingCharacter,
    UnknownObject,
    MissingReference,
    AffordanceMismatch,
    UnknownCharacterTarget,
    SelfInteraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub keyframe: Option<usize>,
    pub character: Option<String>,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.rule)?;
        if let Some(k) = self.keyframe {
            write!(f, " at keyframe {k}")?;
        }
        if let Some(c) = &self.character {
            write!(f, " for {c}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Checks the activity grammar against a scene. Keyframe indices must be
/// contiguous and start at 0 or 1.
pub fn validate_activity(activity: &Activity, scene: &Scene) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |keyframe, character: Option<&str>, rule, detail: String| {
        out.push(Violation {
            keyframe,
            character: character.map(str::to_string),
            rule,
            detail,
        })
    };

    let mut ids = BTreeSet::new();
    for c in &activity.characters {
        if !ids.insert(c.id.as_str()) {
            push(None, Some(&c.id), Rule::DuplicateCharacter, "character declared twice".into());
        }
    }

    if activity.keyframes.is_empty() {
        push(None, None, Rule::NoKeyframes, "activity has no keyframes".into());
    }
    if let Some(first) = activity.keyframes.first() {
        if first.index > 1 {
            push(
                Some(first.index),
                None,
                Rule::NonContiguousKeyframes,
                format!("first keyframe index {} (expected 0 or 1)", first.index),
            );
        }
    }
    for w in activity.keyframes.windows(2) {
        if w[1].index != w[0].index + 1 {
            push(
                Some(w[1].index),
                None,
                Rule::NonContiguousKeyframes,
                format!("keyframe {} follows {}", w[1].index, w[0].index),
            );
        }
    }

    for kf in &activity.keyframes {
        let t = Some(kf.index);
        let mut seen = BTreeSet::new();
        for d in &kf.descriptions {
            let who = Some(d.subject.as_str());
            if !ids.contains(d.subject.as_str()) {
                push(t, who, Rule::UnknownSubject, format!("{} is not a declared character", d.subject));
            }
            if !seen.insert(d.subject.as_str()) {
                push(t, who, Rule::DuplicateDescription, "more than one description".into());
            }
            match (d.pose, d.reference) {
                (Pose::Standing, None) => {}
                (pose, None) => push(t, who, Rule::MissingReference, format!("{pose} needs a positional reference")),
                (pose, Some(id)) => match scene.object(id) {
                    None => push(t, who, Rule::UnknownObject, format!("reference object_{id} not in scene")),
                    Some(obj) => {
                        if let Some(a) = pose.required_affordance() {
                            if !obj.has(a) {
                                push(
                                    t,
                                    who,
                                    Rule::AffordanceMismatch,
                                    format!("{} is not {a}", obj.mark_name()),
                                );
                            }
                        }
                    }
                },
            }
            match &d.interaction.target {
                Target::Object(id) if scene.object(*id).is_none() => {
                    push(t, who, Rule::UnknownObject, format!("interaction target object_{id} not in scene"))
                }
                Target::Character(c) if c == &d.subject => {
                    push(t, who, Rule::SelfInteraction, "interacts with itself".into())
                }
                Target::Character(c) if !ids.contains(c.as_str()) => {
                    push(t, who, Rule::UnknownCharacterTarget, format!("{c} is not a declared character"))
                }
                _ => {}
            }
        }
        for c in &activity.characters {
            if !seen.contains(c.id.as_str()) {
                push(t, Some(&c.id), Rule::MissingCharacter, "no description in keyframe".into());
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Unchanged,
    /// Positional reference changed; needs a walking trajectory.
    Moved,
    Reposed,
    Reinteracted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateChange {
    pub character: String,
    pub kind: ChangeKind,
}

impl StateChange {
    pub fn is_moved(&self) -> bool {
        self.kind == ChangeKind::Moved
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ActivityError {
    #[error("keyframes {prev} and {next} describe different characters: {detail}")]
    MismatchedCharacters {
        prev: usize,
        next: usize,
        detail: String,
    },
}

/// Per-character change between consecutive keyframes, ordered by id.
pub fn diff_keyframes(prev: &Keyframe, next: &Keyframe) -> Result<Vec<StateChange>, ActivityError> {
    let a: BTreeMap<&str, &Description> = prev.descriptions.iter().map(|d| (d.subject.as_str(), d)).collect();
    let b: BTreeMap<&str, &Description> = next.descriptions.iter().map(|d| (d.subject.as_str(), d)).collect();
    if a.keys().ne(b.keys()) || a.len() != prev.descriptions.len() || b.len() != next.descriptions.len() {
        return Err(ActivityError::MismatchedCharacters {
            prev: prev.index,
            next: next.index,
            detail: format!("{:?} vs {:?}", a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>()),
        });
    }
    Ok(a.iter()
        .map(|(id, da)| {
            let db = b[id];
            let kind = if da.reference != db.reference {
                ChangeKind::Moved
            } else if da.pose != db.pose {
                ChangeKind::Reposed
            } else if da.interaction != db.interaction {
                ChangeKind::Reinteracted
            } else {
                ChangeKind::Unchanged
            };
            StateChange {
                character: id.to_string(),
                kind,
            }
        })
        .collect())
}
