//! Response parsing: scene graphs and keyframe tuples.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::activity::{
    parse_object_ref, validate_activity, Activity, Character, Description, Interaction, Keyframe, Pose, Target,
    Violation,
};
use crate::areas::{Area, AreaSceneGraph};
use crate::scene::Scene;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("no JSON block found in response")]
    NoJsonBlock,
    #[error("unknown area {name:?} at offset {offset}")]
    UnknownArea { name: String, offset: usize },
    #[error("malformed adjacency at offset {offset}: {detail}")]
    MalformedAdjacency { offset: usize, detail: String },
    #[error("unparseable state tuple at offset {offset}: {text:?}")]
    Tuple { offset: usize, text: String },
    #[error("unknown pose {pose:?} at offset {offset}")]
    Pose { pose: String, offset: usize },
    #[error("unknown object {reference:?} at offset {offset}")]
    UnknownObject { reference: String, offset: usize },
    #[error("{character} carries over a state at offset {offset} but has no earlier state")]
    CarryOver { character: String, offset: usize },
    #[error("response contains no keyframes")]
    NoKeyframes,
    #[error("response declares no characters and no hint was given")]
    NoCharacters,
    #[error("activity JSON at offset {offset} is invalid: {detail}")]
    ActivityJson { offset: usize, detail: String },
    #[error("activity violates the grammar: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

/// Finds the last balanced `{...}` block that parses as JSON, returning it
/// and its byte offset.
pub fn last_json_block(text: &str) -> Result<(Value, usize), ParseError> {
    let bytes = text.as_bytes();
    let mut blocks = Vec::new();
    let mut start = None;
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if in_str {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' if depth > 0 => in_str = true,
            b'{' => {
                if depth == 0 {
                    start = Some(i);
                }
                depth += 1;
            }
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    blocks.push((start.take().expect("block start recorded"), i + 1));
                }
            }
            _ => {}
        }
    }
    blocks
        .into_iter()
        .rev()
        .find_map(|(s, e)| serde_json::from_str::<Value>(&text[s..e]).ok().map(|v| (v, s)))
        .ok_or(ParseError::NoJsonBlock)
}

fn area_index(name: &str) -> Option<usize> {
    name.strip_prefix("area_")?.parse().ok()
}

fn locate(text: &str, from: usize, needle: &str) -> usize {
    text[from..].find(needle).map_or(from, |i| from + i)
}

/// Reads the final JSON block as an area graph; missing connections are
/// completed with fallback edges.
pub fn parse_graph_response(text: &str, areas: &[Area]) -> Result<AreaSceneGraph, ParseError> {
    let (value, offset) = last_json_block(text)?;
    let obj = value.as_object().ok_or(ParseError::MalformedAdjacency {
        offset,
        detail: "scene graph is not a JSON object".into(),
    })?;
    let known: BTreeSet<usize> = areas.iter().map(|a| a.id).collect();
    let resolve = |name: &str| -> Result<usize, ParseError> {
        area_index(name)
            .filter(|i| known.contains(i))
            .ok_or_else(|| ParseError::UnknownArea {
                name: name.to_string(),
                offset: locate(text, offset, &format!("\"{name}\"")),
            })
    };
    let mut edges = BTreeSet::new();
    for (name, node) in obj {
        let a = resolve(name)?;
        let at = locate(text, offset, &format!("\"{name}\""));
        let Some(adj) = node.get("adjacent") else { continue };
        let list = adj.as_array().ok_or_else(|| ParseError::MalformedAdjacency {
            offset: at,
            detail: format!("{name}.adjacent is not a list"),
        })?;
        for item in list {
            let other = item.as_str().ok_or_else(|| ParseError::MalformedAdjacency {
                offset: at,
                detail: format!("{name}.adjacent contains {item}"),
            })?;
            let b = resolve(other)?;
            if a != b {
                edges.insert((a.min(b), a.max(b)));
            }
        }
    }
    Ok(AreaSceneGraph::complete(areas.to_vec(), &edges))
}

static KEYFRAME_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)keyframe\s+(\d+)\s*:").unwrap());
static DECL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(character_[A-Za-z0-9]+)\s*:\s*([A-Za-z][A-Za-z0-9 _-]*?)\s*(?:[;.,\n]|$)").unwrap());
static TUPLE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\(\s*(character_[A-Za-z0-9]+)\s*,\s*([^,()]+?)\s*,\s*([^,()]+?)\s*,\s*\(\s*([^,()]+?)\s*,\s*([^,()]+?)\s*\)\s*\)")
        .unwrap()
});
static CARRY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\(\s*(character_[A-Za-z0-9]+)'s state does not change\s*\)").unwrap());
static THOUGHTS_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"Thoughts:\s*").unwrap());

/// Keyframes parsed from one response, before grammar validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityChunk {
    pub characters: Vec<Character>,
    pub keyframes: Vec<Keyframe>,
    /// `(keyframe, character, reasoning)` for every "Thoughts:" trace.
    pub traces: Vec<(usize, String, String)>,
}

/// Parses a single state tuple such as
/// `(character_0, sitting, object_11-sofa, (read, newspaper))`.
pub fn parse_tuple(text: &str, scene: &Scene) -> Result<Description, ParseError> {
    let caps = TUPLE_RE.captures(text).ok_or_else(|| ParseError::Tuple {
        offset: 0,
        text: text.to_string(),
    })?;
    description_from(&caps, scene, 0)
}

fn description_from(caps: &regex::Captures<'_>, scene: &Scene, base: usize) -> Result<Description, ParseError> {
    let at = |i: usize| base + caps.get(i).map_or(0, |m| m.start());
    let pose = Pose::parse(&caps[2]).ok_or_else(|| ParseError::Pose {
        pose: caps[2].to_string(),
        offset: at(2),
    })?;
    let check = |id: u32, raw: &str, offset: usize| {
        if scene.object(id).is_some() {
            Ok(id)
        } else {
            Err(ParseError::UnknownObject {
                reference: raw.to_string(),
                offset,
            })
        }
    };
    let raw_ref = caps[3].trim();
    let reference = if raw_ref.eq_ignore_ascii_case("none") {
        None
    } else {
        let id = parse_object_ref(raw_ref).ok_or_else(|| ParseError::UnknownObject {
            reference: raw_ref.to_string(),
            offset: at(3),
        })?;
        Some(check(id, raw_ref, at(3))?)
    };
    let target = Target::parse(&caps[5]);
    if let Target::Object(id) = target {
        check(id, caps[5].trim(), at(5))?;
    }
    Ok(Description {
        subject: caps[1].to_string(),
        pose,
        reference,
        interaction: Interaction {
            verb: caps[4].trim().to_string(),
            target,
        },
    })
}

#[derive(Deserialize)]
struct JsonChunk {
    #[serde(default)]
    characters: Vec<Character>,
    keyframes: Vec<Keyframe>,
}

fn trace_text(s: &str) -> String {
    s.trim().trim_end_matches(['}', ')']).trim().to_string()
}

/// Parses one response. `previous` is the last keyframe of earlier chunks and
/// serves carry-over lines at the start of this one.
pub fn parse_activity_chunk(
    text: &str,
    scene: &Scene,
    characters_hint: &[Character],
    previous: Option<&Keyframe>,
) -> Result<ActivityChunk, ParseError> {
    if let Ok((value, offset)) = last_json_block(text) {
        if value.get("keyframes").is_some() {
            let chunk: JsonChunk = serde_json::from_value(value).map_err(|e| ParseError::ActivityJson {
                offset,
                detail: e.to_string(),
            })?;
            let characters = if chunk.characters.is_empty() {
                characters_hint.to_vec()
            } else {
                chunk.characters
            };
            if characters.is_empty() {
                return Err(ParseError::NoCharacters);
            }
            return Ok(ActivityChunk {
                characters,
                keyframes: chunk.keyframes,
                traces: Vec::new(),
            });
        }
    }

    let heads: Vec<regex::Captures<'_>> = KEYFRAME_RE.captures_iter(text).collect();
    if heads.is_empty() {
        return Err(ParseError::NoKeyframes);
    }
    let preamble = &text[..heads[0].get(0).expect("whole match").start()];
    let mut characters: Vec<Character> = Vec::new();
    for c in DECL_RE.captures_iter(preamble) {
        if !characters.iter().any(|x| x.id == c[1]) {
            characters.push(Character {
                id: c[1].to_string(),
                role: c[2].trim().to_string(),
            });
        }
    }
    if characters.is_empty() {
        characters = characters_hint.to_vec();
    }
    if characters.is_empty() {
        return Err(ParseError::NoCharacters);
    }

    let mut keyframes: Vec<Keyframe> = Vec::new();
    let mut traces = Vec::new();
    for (h, head) in heads.iter().enumerate() {
        let whole = head.get(0).expect("whole match");
        let index: usize = head[1].parse().map_err(|_| ParseError::Tuple {
            offset: whole.start(),
            text: whole.as_str().to_string(),
        })?;
        let body_start = whole.end();
        let body_end = heads.get(h + 1).map_or(text.len(), |n| n.get(0).expect("whole match").start());
        let body = &text[body_start..body_end];

        enum Item<'a> {
            State(regex::Captures<'a>),
            Carry(String),
        }
        let mut items: Vec<(usize, usize, Item<'_>)> = Vec::new();
        for c in TUPLE_RE.captures_iter(body) {
            let m = c.get(0).expect("whole match");
            items.push((m.start(), m.end(), Item::State(c)));
        }
        for c in CARRY_RE.captures_iter(body) {
            let m = c.get(0).expect("whole match");
            items.push((m.start(), m.end(), Item::Carry(c[1].to_string())));
        }
        items.sort_by_key(|(s, _, _)| *s);
        for (pos, _) in body.match_indices("(character_") {
            if !items.iter().any(|(s, _, _)| *s == pos) {
                let line_end = body[pos..].find('\n').map_or(body.len(), |e| pos + e);
                return Err(ParseError::Tuple {
                    offset: body_start + pos,
                    text: body[pos..line_end].trim().to_string(),
                });
            }
        }

        let prior = keyframes.last().or(previous);
        let mut descriptions = Vec::new();
        for (k, (start, end, item)) in items.iter().enumerate() {
            let desc = match item {
                Item::State(c) => description_from(c, scene, body_start)?,
                Item::Carry(ch) => prior
                    .and_then(|p| p.description_of(ch))
                    .cloned()
                    .ok_or_else(|| ParseError::CarryOver {
                        character: ch.clone(),
                        offset: body_start + start,
                    })?,
            };
            let tail_end = items.get(k + 1).map_or(body.len(), |(s, _, _)| *s);
            let tail = &body[*end..tail_end];
            if let Some(m) = THOUGHTS_RE.find(tail) {
                traces.push((index, desc.subject.clone(), trace_text(&tail[m.end()..])));
            }
            descriptions.push(desc);
        }
        keyframes.push(Keyframe { index, descriptions });
    }
    Ok(ActivityChunk {
        characters,
        keyframes,
        traces,
    })
}

/// Parses a complete activity and rejects it unless it passes validation.
pub fn parse_activity_response(text: &str, scene: &Scene, characters_hint: &[Character]) -> Result<Activity, ParseError> {
    let chunk = parse_activity_chunk(text, scene, characters_hint, None)?;
    let activity = Activity {
        characters: chunk.characters,
        keyframes: chunk.keyframes,
    };
    let violations = validate_activity(&activity, scene);
    if violations.is_empty() {
        Ok(activity)
    } else {
        Err(ParseError::Invalid(violations))
    }
}

/// The "Thoughts:" traces of a response, keyed by keyframe and character.
pub fn reasoning_traces(text: &str, scene: &Scene) -> BTreeMap<(usize, String), String> {
    let hint = [Character {
        id: "character_0".into(),
        role: String::new(),
    }];
    parse_activity_chunk(text, scene, &hint, None)
        .map(|c| c.traces.into_iter().map(|(k, ch, t)| ((k, ch), t)).collect())
        .unwrap_or_default()
}
