//! Activity groups and the group objective C(G).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::activity::{Description, Keyframe};
use crate::dsu::DisjointSets;
use crate::geom::{unit, Footprint, Vec2};
use crate::llm::constraints::{ConstraintTarget, DirectionPair, InteractionConstraintSpec};
use crate::path::CHARACTER_RADIUS;
use crate::scene::{Affordance, Scene};

use super::cost::{collision_cost, positional_cost, rotational_cost};
use super::free_space::{free_space_for, FreeSpace, PlacementError};
use super::pose::CharacterPose;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    Member(usize),
    Object(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "term", rename_all = "snake_case")]
pub enum Term {
    Positional { member: usize, anchor: Anchor, d: f64 },
    Facing { member: usize, anchor: Anchor },
    /// Keeps a standing member within the ring width of its reference.
    ReferenceDistance { member: usize, width: f64 },
    PairCollision { a: usize, b: usize },
    StaticCollision { member: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMember {
    pub description: Description,
    pub free_space: FreeSpace,
    /// Walk obstacles other than the member's own reference.
    pub obstacles: Vec<Footprint>,
    pub fixed_pose: Option<CharacterPose>,
}

impl GroupMember {
    pub fn character(&self) -> &str {
        &self.description.subject
    }

    pub fn world_body_yaw(&self, pose: &CharacterPose) -> f64 {
        self.free_space.frame_yaw(pose.floor(), pose.sitting_point_index) + pose.body_yaw
    }

    pub fn gaze_yaw(&self, pose: &CharacterPose) -> f64 {
        self.world_body_yaw(pose) + pose.head_yaw
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityGroup {
    pub members: Vec<GroupMember>,
    pub terms: Vec<Term>,
    pub anchors: BTreeMap<u32, Footprint>,
}

impl ActivityGroup {
    /// Stable identity used for per-group seeding.
    pub fn key(&self) -> String {
        self.members.iter().map(|m| m.character()).collect::<Vec<_>>().join(",")
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.members[i].fixed_pose.is_some()
    }

    fn anchor_point(&self, anchor: Anchor, poses: &[CharacterPose], from: Vec2) -> Vec2 {
        match anchor {
            Anchor::Member(j) => poses[j].floor(),
            Anchor::Object(id) => self.anchors[&id].closest_point(from),
        }
    }

    fn anchor_center(&self, anchor: Anchor, poses: &[CharacterPose]) -> Vec2 {
        match anchor {
            Anchor::Member(j) => poses[j].floor(),
            Anchor::Object(id) => self.anchors[&id].center,
        }
    }

    pub fn term_cost(&self, term: &Term, poses: &[CharacterPose]) -> f64 {
        match *term {
            Term::Positional { member, anchor, d } => {
                let p = poses[member].floor();
                positional_cost(p, self.anchor_point(anchor, poses, p), d)
            }
            Term::Facing { member, anchor } => {
                let m = &self.members[member];
                let gaze = unit(m.gaze_yaw(&poses[member]));
                let to = self.anchor_center(anchor, poses) - poses[member].floor();
                rotational_cost(gaze, to).unwrap_or(0.5)
            }
            Term::ReferenceDistance { member, width } => match &self.members[member].free_space {
                FreeSpace::StandingRing { footprint, .. } => {
                    let p = poses[member].floor();
                    positional_cost(p, footprint.closest_point(p), width)
                }
                _ => 0.0,
            },
            Term::PairCollision { a, b } => {
                let depth = 2.0 * CHARACTER_RADIUS - (poses[a].floor() - poses[b].floor()).norm();
                collision_cost(depth)
            }
            Term::StaticCollision { member } => {
                let p = poses[member].floor();
                let depth = self.members[member]
                    .obstacles
                    .iter()
                    .map(|f| CHARACTER_RADIUS - f.distance(p))
                    .fold(0.0, f64::max);
                collision_cost(depth)
            }
        }
    }
}

/// C(G): mean of the term costs, zero for a group without terms.
pub fn group_cost(group: &ActivityGroup, poses: &[CharacterPose]) -> f64 {
    if group.terms.is_empty() {
        return 0.0;
    }
    group.terms.iter().map(|t| group.term_cost(t, poses)).sum::<f64>() / group.terms.len() as f64
}

/// Union-find over character interactions and shared positional references.
/// Groups and members keep keyframe description order.
pub fn build_groups(
    keyframe: &Keyframe,
    specs: &BTreeMap<String, Vec<InteractionConstraintSpec>>,
    scene: &Scene,
    fixed: &BTreeMap<String, CharacterPose>,
) -> Result<Vec<ActivityGroup>, PlacementError> {
    for id in fixed.keys() {
        if keyframe.description_of(id).is_none() {
            return Err(PlacementError::FixedWithoutDescription(id.clone()));
        }
    }
    let descs = &keyframe.descriptions;
    let index: BTreeMap<&str, usize> = descs.iter().enumerate().map(|(i, d)| (d.subject.as_str(), i)).collect();
    let mut dsu = DisjointSets::new(descs.len());
    for (i, d) in descs.iter().enumerate() {
        if let crate::activity::Target::Character(c) = &d.interaction.target {
            if let Some(&j) = index.get(c.as_str()) {
                dsu.union(i, j);
            }
        }
        for (j, e) in descs.iter().enumerate().skip(i + 1) {
            if d.reference.is_some() && d.reference == e.reference {
                dsu.union(i, j);
            }
        }
    }
    let mut groups = Vec::new();
    for comp in dsu.components() {
        let local: BTreeMap<&str, usize> = comp
            .iter()
            .enumerate()
            .map(|(k, &i)| (descs[i].subject.as_str(), k))
            .collect();
        let mut members = Vec::with_capacity(comp.len());
        for &i in &comp {
            let d = &descs[i];
            let free_space = free_space_for(d, scene)?;
            let obstacles = scene
                .objects
                .iter()
                .filter(|o| o.has(Affordance::WalkObstacle) && Some(o.id) != d.reference)
                .map(|o| o.footprint())
                .collect();
            members.push(GroupMember {
                description: d.clone(),
                free_space,
                obstacles,
                fixed_pose: fixed.get(&d.subject).copied(),
            });
        }
        let mut terms = Vec::new();
        let mut anchors = BTreeMap::new();
        let mut resolve = |t: &ConstraintTarget| -> Option<Anchor> {
            match t {
                ConstraintTarget::Object(id) => {
                    let o = scene.object(*id)?;
                    anchors.insert(*id, o.footprint());
                    Some(Anchor::Object(*id))
                }
                ConstraintTarget::Character(c) => local.get(c.as_str()).map(|&k| Anchor::Member(k)),
            }
        };
        for (k, m) in members.iter().enumerate() {
            for spec in specs.get(m.character()).map(Vec::as_slice).unwrap_or(&[]) {
                let Some(anchor) = resolve(spec.target()) else { continue };
                match spec {
                    InteractionConstraintSpec::Positional { threshold_d, .. } => terms.push(Term::Positional {
                        member: k,
                        anchor,
                        d: *threshold_d,
                    }),
                    InteractionConstraintSpec::Rotational { direction_pair, .. } => {
                        terms.push(Term::Facing { member: k, anchor });
                        if let (DirectionPair::MutualFace, Anchor::Member(j)) = (direction_pair, anchor) {
                            terms.push(Term::Facing {
                                member: j,
                                anchor: Anchor::Member(k),
                            });
                        }
                    }
                }
            }
            if let FreeSpace::StandingRing { width, .. } = m.free_space {
                terms.push(Term::ReferenceDistance { member: k, width });
            }
        }
        let mut seen = Vec::with_capacity(terms.len());
        for t in terms.drain(..) {
            if !seen.contains(&t) {
                seen.push(t);
            }
        }
        terms = seen;
        for a in 0..members.len() {
            for b in a + 1..members.len() {
                terms.push(Term::PairCollision { a, b });
            }
        }
        for k in 0..members.len() {
            terms.push(Term::StaticCollision { member: k });
        }
        groups.push(ActivityGroup { members, terms, anchors });
    }
    Ok(groups)
}

/// Characters whose descriptions link them, for reporting.
pub fn group_members(groups: &[ActivityGroup]) -> Vec<BTreeSet<String>> {
    groups
        .iter()
        .map(|g| g.members.iter().map(|m| m.character().to_string()).collect())
        .collect()
}
