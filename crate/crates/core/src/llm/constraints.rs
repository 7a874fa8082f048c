//! Compiles `(verb, target)` interactions into optimizer constraints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{Description, Target};

use super::backend::{ChatBackend, LlmError};
use super::prompt::PromptBundle;

const BUILTIN_VERBS: &str = include_str!("../../config/verbs.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionPair {
    FaceTarget,
    MutualFace,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintTarget {
    Object(u32),
    Character(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionConstraintSpec {
    Positional {
        subject: String,
        target: ConstraintTarget,
        threshold_d: f64,
    },
    Rotational {
        subject: String,
        target: ConstraintTarget,
        direction_pair: DirectionPair,
    },
}

impl InteractionConstraintSpec {
    pub fn subject(&self) -> &str {
        match self {
            Self::Positional { subject, .. } | Self::Rotational { subject, .. } => subject,
        }
    }

    pub fn target(&self) -> &ConstraintTarget {
        match self {
            Self::Positional { target, .. } | Self::Rotational { target, .. } => target,
        }
    }
}

/// `threshold_d: None` means facing only. `facing: None` means distance only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerbRule {
    #[serde(default)]
    pub threshold_d: Option<f64>,
    #[serde(default)]
    pub facing: Option<DirectionPair>,
}

#[derive(Debug, Error)]
pub enum VerbTableError {
    #[error("verb table is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("verb {verb:?} has non-positive threshold {d}")]
    Threshold { verb: String, d: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerbTable {
    pub default: VerbRule,
    pub verbs: BTreeMap<String, VerbRule>,
}

fn normalize(verb: &str) -> String {
    verb.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_lowercase()
}

impl VerbTable {
    pub fn builtin() -> VerbTable {
        VerbTable::from_json_str(BUILTIN_VERBS).expect("shipped verb table is valid")
    }

    pub fn from_json_str(text: &str) -> Result<VerbTable, VerbTableError> {
        let raw: VerbTable = serde_json::from_str(text)?;
        let mut t = VerbTable {
            default: raw.default,
            verbs: BTreeMap::new(),
        };
        for (k, v) in std::iter::once(("<default>".to_string(), raw.default)).chain(raw.verbs) {
            if let Some(d) = v.threshold_d {
                if d.is_nan() || d <= 0.0 {
                    return Err(VerbTableError::Threshold { verb: k, d });
                }
            }
            if k != "<default>" {
                t.verbs.insert(normalize(&k), v);
            }
        }
        Ok(t)
    }

    /// Exact match, then the longest entry that is a whole-word prefix
    /// ("get water" resolves to "get").
    pub fn lookup(&self, verb: &str) -> Option<VerbRule> {
        let v = normalize(verb);
        if let Some(r) = self.verbs.get(&v) {
            return Some(*r);
        }
        self.verbs
            .iter()
            .filter(|(k, _)| v.starts_with(k.as_str()) && v[k.len()..].starts_with(' '))
            .max_by_key(|(k, _)| k.len())
            .map(|(_, r)| *r)
    }

    pub fn rule_for(&self, verb: &str) -> VerbRule {
        self.lookup(verb).unwrap_or(self.default)
    }

    pub fn insert(&mut self, verb: &str, rule: VerbRule) {
        self.verbs.insert(normalize(verb), rule);
    }
}

impl Default for VerbTable {
    fn default() -> Self {
        VerbTable::builtin()
    }
}

pub fn compile_constraints(desc: &Description, table: &VerbTable) -> Vec<InteractionConstraintSpec> {
    let target = match &desc.interaction.target {
        Target::Object(id) => ConstraintTarget::Object(*id),
        Target::Character(c) => ConstraintTarget::Character(c.clone()),
        Target::None | Target::Prop(_) => return Vec::new(),
    };
    let rule = table.rule_for(&desc.interaction.verb);
    let mut out = Vec::new();
    if let Some(d) = rule.threshold_d {
        out.push(InteractionConstraintSpec::Positional {
            subject: desc.subject.clone(),
            target: target.clone(),
            threshold_d: d,
        });
    }
    if let Some(facing) = rule.facing {
        let facing = match target {
            ConstraintTarget::Object(_) => DirectionPair::FaceTarget,
            ConstraintTarget::Character(_) => facing,
        };
        out.push(InteractionConstraintSpec::Rotational {
            subject: desc.subject.clone(),
            target,
            direction_pair: facing,
        });
    }
    out
}

/// Single-verb query asking for `{"D": meters, "facing": "face_target" | "mutual_face" | "none"}`.
pub fn verb_prompt(verb: &str) -> PromptBundle {
    PromptBundle::text_only(
        "You translate an interaction verb between a person and an object or another person into \
         placement constraints. Reply with a single JSON object {\"D\": <meters>, \"facing\": \
         \"face_target\" | \"mutual_face\" | \"none\"}, where D is the largest comfortable distance \
         for performing the interaction.",
        format!("Verb: {verb}"),
    )
}

pub fn parse_verb_reply(reply: &str) -> Result<VerbRule, LlmError> {
    let value = super::parse::last_json_block(reply)
        .map_err(|e| LlmError::Parse(e.to_string()))?
        .0;
    let d = value.get("D").and_then(|v| v.as_f64()).filter(|d| *d > 0.0);
    let facing = match value.get("facing").and_then(|v| v.as_str()) {
        Some("face_target") => Some(DirectionPair::FaceTarget),
        Some("mutual_face") => Some(DirectionPair::MutualFace),
        Some("none") | None => None,
        Some(other) => return Err(LlmError::Parse(format!("verb reply has unknown facing {other:?}"))),
    };
    if d.is_none() && facing.is_none() {
        return Err(LlmError::Parse("verb reply carries neither D nor facing".into()));
    }
    Ok(VerbRule { threshold_d: d, facing })
}

pub fn resolve_unknown_verb(verb: &str, backend: &dyn ChatBackend) -> Result<VerbRule, LlmError> {
    parse_verb_reply(&backend.invoke(&verb_prompt(verb))?)
}

/// Fills in table entries for verbs the table does not know, one query per
/// verb. Failed queries leave the default in place.
pub fn extend_table<'a>(
    table: &mut VerbTable,
    verbs: impl IntoIterator<Item = &'a str>,
    backend: &dyn ChatBackend,
) -> Vec<(String, Result<VerbRule, String>)> {
    let mut log = Vec::new();
    for verb in verbs {
        if table.lookup(verb).is_some() || log.iter().any(|(v, _): &(String, _)| *v == normalize(verb)) {
            continue;
        }
        let res = resolve_unknown_verb(verb, backend);
        if let Ok(rule) = &res {
            table.insert(verb, *rule);
        }
        log.push((normalize(verb), res.map_err(|e| e.to_string())));
    }
    log
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::{Interaction, Pose};
    use crate::llm::backend::MockBackend;

    fn desc(verb: &str, target: Target) -> Description {
        Description {
            subject: "character_0".into(),
            pose: Pose::Standing,
            reference: Some(4),
            interaction: Interaction {
                verb: verb.into(),
                target,
            },
        }
    }

    #[test]
    fn use_computer() {
        let specs = compile_constraints(&desc("use", Target::Object(4)), &VerbTable::builtin());
        assert_eq!(
            specs,
            vec![
                InteractionConstraintSpec::Positional {
                    subject: "character_0".into(),
                    target: ConstraintTarget::Object(4),
                    threshold_d: 0.5
                },
                InteractionConstraintSpec::Rotational {
                    subject: "character_0".into(),
                    target: ConstraintTarget::Object(4),
                    direction_pair: DirectionPair::FaceTarget
                },
            ]
        );
    }

    #[test]
    fn talk_to_is_mutual() {
        let specs = compile_constraints(
            &desc("talk to", Target::Character("character_1".into())),
            &VerbTable::builtin(),
        );
        assert!(matches!(specs[0], InteractionConstraintSpec::Positional { threshold_d, .. } if threshold_d == 2.0));
        assert!(matches!(
            specs[1],
            InteractionConstraintSpec::Rotational {
                direction_pair: DirectionPair::MutualFace,
                ..
            }
        ));
    }

    #[test]
    fn no_target_no_constraints() {
        let t = VerbTable::builtin();
        assert!(compile_constraints(&desc("sleep", Target::None), &t).is_empty());
        assert!(compile_constraints(&desc("read", Target::Prop("newspaper".into())), &t).is_empty());
    }

    #[test]
    fn prefix_and_default() {
        let t = VerbTable::builtin();
        assert_eq!(t.rule_for("get  Water").threshold_d, Some(0.6));
        assert_eq!(t.rule_for("getaway").threshold_d, Some(1.0));
        assert_eq!(t.rule_for("juggle").facing, Some(DirectionPair::FaceTarget));
        assert_eq!(t.rule_for("watch").threshold_d, Some(5.0));
    }

    #[test]
    fn bad_threshold_rejected() {
        let err = VerbTable::from_json_str(r#"{"default":{"threshold_d":1.0},"verbs":{"x":{"threshold_d":0}}}"#);
        assert!(matches!(err, Err(VerbTableError::Threshold { .. })));
    }

    #[test]
    fn unknown_verb_via_backend() {
        let mock = MockBackend::sequence(vec!["Sure.\n```json\n{\"D\": 0.8, \"facing\": \"face_target\"}\n```".into()]);
        let mut t = VerbTable::builtin();
        let log = extend_table(&mut t, ["polish", "use"], &mock);
        assert_eq!(log.len(), 1);
        assert_eq!(t.rule_for("polish").threshold_d, Some(0.8));
    }

    #[test]
    fn count_bound_and_positive_d() {
        let t = VerbTable::builtin();
        for verb in ["talk to", "use", "watch", "get water", "sleep", "wave"] {
            for target in [Target::Object(1), Target::Character("character_1".into()), Target::None] {
                let specs = compile_constraints(&desc(verb, target), &t);
                assert!(specs.len() <= 3);
                for s in specs {
                    if let InteractionConstraintSpec::Positional { threshold_d, .. } = s {
                        assert!(threshold_d > 0.0);
                    }
                }
            }
        }
    }
}
