//! Simulated annealing with Metropolis-Hastings steps over activity groups.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{Keyframe, Pose};
use crate::geom::wrap_angle;
use crate::llm::constraints::InteractionConstraintSpec;
use crate::scene::Scene;

use super::cost::metropolis_accept;
use super::free_space::{FreeSpace, PlacementError};
use super::groups::{build_groups, group_cost, ActivityGroup};
use super::pose::CharacterPose;

const TRANSLATION_TRIES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProposalSigmas {
    pub translation: f64,
    pub body_yaw: f64,
    pub head_yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub gamma: f64,
    pub iters: usize,
    pub proposal_sigmas: ProposalSigmas,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        let r = 15f64.to_radians();
        AnnealSchedule {
            t0: 1.0,
            gamma: 0.995,
            iters: 1000,
            proposal_sigmas: ProposalSigmas {
                translation: 0.2,
                body_yaw: r,
                head_yaw: r,
            },
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("invalid anneal schedule: {0}")]
pub struct ScheduleError(pub String);

impl AnnealSchedule {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !(self.t0 > 0.0) {
            return Err(ScheduleError(format!("t0 must be positive, got {}", self.t0)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(ScheduleError(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        let s = self.proposal_sigmas;
        for (name, v) in [("translation", s.translation), ("body_yaw", s.body_yaw), ("head_yaw", s.head_yaw)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScheduleError(format!("sigma {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn temperature(&self, k: usize) -> f64 {
        self.t0 * self.gamma.powi(k as i32)
    }
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated positive")
}

/// One proposal: translation, body rotation or head rotation, each with
/// probability 1/3. `occupied` lists sitting-point indices held by others.
pub fn propose_move<R: Rng + ?Sized>(
    pose: &CharacterPose,
    fs: &FreeSpace,
    sigmas: &ProposalSigmas,
    occupied: &[usize],
    rng: &mut R,
) -> CharacterPose {
    let mut next = *pose;
    match rng.random_range(0..3u8) {
        0 => match fs {
            FreeSpace::SittingPoints { points, .. } => {
                let here = pose.position;
                let options: Vec<usize> = (0..points.len())
                    .filter(|&i| Some(i) != pose.sitting_point_index && !occupied.contains(&i))
                    .collect();
                if options.is_empty() {
                    return next;
                }
                let weights: Vec<f64> = options
                    .iter()
                    .map(|&i| (-(points[i].position - here).xy().norm() / sigmas.translation).exp())
                    .collect();
                let Ok(w) = WeightedIndex::new(&weights) else { return next };
                let i = options[w.sample(rng)];
                next.position = points[i].position;
                next.sitting_point_index = Some(i);
            }
            _ => {
                let n = normal(sigmas.translation);
                for _ in 0..TRANSLATION_TRIES {
                    let mut p = pose.floor();
                    p.x += n.sample(rng);
                    p.y += n.sample(rng);
                    if fs.contains_point(p) {
                        next.position.x = p.x;
                        next.position.y = p.y;
                        break;
                    }
                }
            }
        },
        1 => next.body_yaw = wrap_angle(pose.body_yaw + normal(sigmas.body_yaw).sample(rng)),
        _ => {
            if pose.fundamental != Pose::Lying {
                next.head_yaw = (pose.head_yaw + normal(sigmas.head_yaw).sample(rng)).clamp(-FRAC_PI_2, FRAC_PI_2);
            }
        }
    }
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupOutcome {
    pub poses: Vec<CharacterPose>,
    pub cost: f64,
    /// Best-ever cost after initialization and after each iteration.
    pub best_trace: Vec<f64>,
}

fn occupied_by_others(group: &ActivityGroup, poses: &[CharacterPose], me: usize) -> Vec<usize> {
    let reference = group.members[me].free_space.reference();
    poses
        .iter()
        .enumerate()
        .filter(|(j, p)| *j != me && p.fundamental == Pose::Sitting && group.members[*j].free_space.reference() == reference)
        .filter_map(|(_, p)| p.sitting_point_index)
        .collect()
}

/// Anneals one group from a uniform free-space initialization.
pub fn anneal_group(group: &ActivityGroup, schedule: &AnnealSchedule, seed: u64) -> Result<GroupOutcome, PlacementError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = group.members.len();
    let mut poses: Vec<Option<CharacterPose>> = group.members.iter().map(|m| m.fixed_pose).collect();
    for i in 0..n {
        if poses[i].is_some() {
            continue;
        }
        let reference = group.members[i].free_space.reference();
        let occupied: Vec<usize> = poses
            .iter()
            .enumerate()
            .filter_map(|(j, p)| p.map(|p| (j, p)))
            .filter(|(j, p)| p.fundamental == Pose::Sitting && group.members[*j].free_space.reference() == reference)
            .filter_map(|(_, p)| p.sitting_point_index)
            .collect();
        let sample = group.members[i]
            .free_space
            .sample(&occupied, &mut rng)
            .ok_or_else(|| PlacementError::EmptyFreeSpace {
                character: group.members[i].character().to_string(),
            })?;
        poses[i] = Some(sample);
    }
    let mut poses: Vec<CharacterPose> = poses.into_iter().map(|p| p.expect("all members initialized")).collect();
    let movable: Vec<usize> = (0..n).filter(|&i| !group.is_fixed(i)).collect();
    let mut cost = group_cost(group, &poses);
    let mut best = (poses.clone(), cost);
    let mut trace = Vec::with_capacity(schedule.iters + 1);
    trace.push(cost);
    if movable.is_empty() {
        return Ok(GroupOutcome {
            poses,
            cost,
            best_trace: trace,
        });
    }
    for k in 0..schedule.iters {
        let t = schedule.temperature(k);
        let i = movable[rng.random_range(0..movable.len())];
        let occupied = occupied_by_others(group, &poses, i);
        let candidate = propose_move(&poses[i], &group.members[i].free_space, &schedule.proposal_sigmas, &occupied, &mut rng);
        let old = poses[i];
        poses[i] = candidate;
        let new_cost = group_cost(group, &poses);
        if metropolis_accept(cost, new_cost, t, &mut rng) {
            cost = new_cost;
            if cost < best.1 {
                best = (poses.clone(), cost);
            }
        } else {
            poses[i] = old;
        }
        trace.push(best.1);
    }
    Ok(GroupOutcome {
        poses: best.0,
        cost: best.1,
        best_trace: trace,
    })
}

/// Per-group RNG seed mixing the run seed with the group's keyframe and members.
pub fn group_seed(run_seed: u64, keyframe: usize, group_key: &str) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0100_0000_01b3;
    let mut h = FNV_OFFSET;
    for b in run_seed
        .to_le_bytes()
        .iter()
        .chain((keyframe as u64).to_le_bytes().iter())
        .chain(group_key.as_bytes())
    {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    // splitmix64 finalizer
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedPose {
    #[serde(flatten)]
    pub pose: CharacterPose,
    pub world_body_yaw: f64,
    pub gaze_yaw: f64,
    pub final_group_cost: f64,
    pub fixed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub members: Vec<String>,
    pub seed: u64,
    pub cost: f64,
    #[serde(skip)]
    pub best_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframePlacement {
    pub index: usize,
    pub poses: BTreeMap<String, PlacedPose>,
    pub groups: Vec<GroupReport>,
}

impl KeyframePlacement {
    pub fn max_group_cost(&self) -> f64 {
        self.groups.iter().map(|g| g.cost).fold(0.0, f64::max)
    }
}

/// Optimizes every group of a keyframe. Groups run in parallel, each on its
/// own seeded stream, so results do not depend on scheduling.
pub fn optimize_keyframe(
    keyframe: &Keyframe,
    scene: &Scene,
    specs: &BTreeMap<String, Vec<InteractionConstraintSpec>>,
    schedule: &AnnealSchedule,
    fixed: &BTreeMap<String, CharacterPose>,
    run_seed: u64,
) -> Result<KeyframePlacement, PlacementError> {
    let groups = build_groups(keyframe, specs, scene, fixed)?;
    let outcomes: Vec<Result<(u64, GroupOutcome), PlacementError>> = groups
        .par_iter()
        .map(|g| {
            let seed = group_seed(run_seed, keyframe.index, &g.key());
            anneal_group(g, schedule, seed).map(|o| (seed, o))
        })
        .collect();
    let mut poses = BTreeMap::new();
    let mut reports = Vec::with_capacity(groups.len());
    for (g, outcome) in groups.iter().zip(outcomes) {
        let (seed, o) = outcome?;
        for (m, pose) in g.members.iter().zip(&o.poses) {
            poses.insert(
                m.character().to_string(),
                PlacedPose {
                    pose: *pose,
                    world_body_yaw: wrap_angle(m.world_body_yaw(pose)),
                    gaze_yaw: wrap_angle(m.gaze_yaw(pose)),
                    final_group_cost: o.cost,
                    fixed: m.fixed_pose.is_some(),
                },
            );
        }
        reports.push(GroupReport {
            members: g.members.iter().map(|m| m.character().to_string()).collect(),
            seed,
            cost: o.cost,
            best_trace: o.best_trace,
        });
    }
    Ok(KeyframePlacement {
        index: keyframe.index,
        poses,
        groups: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::{Description, Interaction, Target};
    use crate::geom::{unit, Rect, Vec2, Vec3};
    use crate::llm::constraints::{compile_constraints, VerbTable};
    use crate::path::CHARACTER_RADIUS;
    use crate::placement::free_space::{free_space_for, generate_sitting_points};
    use crate::scene::{Affordance, SceneObject};

    fn scene() -> Scene {
        use Affordance::*;
        let o = |id: u32, label: &str, x: f64, y: f64, yaw: f64, half: (f64, f64, f64), aff: &[Affordance]| SceneObject {
            id,
            label: label.into(),
            position: Vec3::new(x, y, half.2),
            yaw,
            half_extents: Vec3::new(half.0, half.1, half.2),
            affordances: aff.iter().copied().collect(),
            support_height: aff.contains(&SupportSurface).then_some(0.45),
        };
        Scene {
            objects: vec![
                o(0, "sofa", 2.0, 1.0, 0.0, (1.0, 0.4, 0.4), &[Sittable, Lieable, SupportSurface, WalkObstacle]),
                o(1, "lamp", 5.0, 1.0, 0.0, (0.2, 0.2, 0.8), &[WalkObstacle]),
                o(2, "plant", 5.0, 3.5, 0.0, (0.2, 0.2, 0.5), &[WalkObstacle]),
                o(3, "stool", 1.0, 4.0, 0.0, (0.1, 0.1, 0.25), &[Sittable]),
            ],
            walls: vec![],
            floor_bounds: Rect::new(0.0, 0.0, 7.0, 6.0),
        }
    }

    fn d(subject: &str, pose: Pose, reference: Option<u32>, verb: &str, target: Target) -> Description {
        Description {
            subject: subject.into(),
            pose,
            reference,
            interaction: Interaction {
                verb: verb.into(),
                target,
            },
        }
    }

    fn specs(kf: &Keyframe) -> BTreeMap<String, Vec<InteractionConstraintSpec>> {
        let t = VerbTable::builtin();
        kf.descriptions.iter().map(|d| (d.subject.clone(), compile_constraints(d, &t))).collect()
    }

    fn run(kf: &Keyframe, fixed: &BTreeMap<String, CharacterPose>, seed: u64) -> KeyframePlacement {
        optimize_keyframe(kf, &scene(), &specs(kf), &AnnealSchedule::default(), fixed, seed).unwrap()
    }

    #[test]
    fn lone_lamp_stander_costs_zero() {
        let kf = Keyframe {
            index: 0,
            descriptions: vec![d("character_0", Pose::Standing, Some(1), "wait", Target::None)],
        };
        let out = run(&kf, &BTreeMap::new(), 5);
        assert_eq!(out.groups[0].cost, 0.0);
    }

    #[test]
    fn talkers_face_each_other() {
        let kf = Keyframe {
            index: 0,
            descriptions: vec![
                d("character_0", Pose::Standing, Some(1), "talk to", Target::Character("character_1".into())),
                d("character_1", Pose::Standing, Some(2), "talk to", Target::Character("character_0".into())),
            ],
        };
        let out = run(&kf, &BTreeMap::new(), 9);
        assert!(out.groups[0].cost < 0.05, "{}", out.groups[0].cost);
        let a = &out.poses["character_0"];
        let b = &out.poses["character_1"];
        let ab = b.pose.floor() - a.pose.floor();
        assert!(ab.norm() <= 2.0 + 1e-9);
        assert!(unit(a.gaze_yaw).angle(&ab) < 15f64.to_radians());
        assert!(unit(b.gaze_yaw).angle(&-ab) < 15f64.to_radians());
    }

    #[test]
    fn best_trace_is_monotone_and_poses_are_members() {
        let kf = Keyframe {
            index: 3,
            descriptions: vec![
                d("character_0", Pose::Standing, Some(1), "talk to", Target::Character("character_1".into())),
                d("character_1", Pose::Standing, Some(2), "talk to", Target::Character("character_0".into())),
                d("character_2", Pose::Lying, Some(0), "sleep", Target::None),
            ],
        };
        let out = run(&kf, &BTreeMap::new(), 1);
        for g in &out.groups {
            assert!(g.best_trace.windows(2).all(|w| w[1] <= w[0]));
        }
        let s = scene();
        for desc in &kf.descriptions {
            let fs = free_space_for(desc, &s).unwrap();
            assert!(fs.contains(&out.poses[&desc.subject].pose));
        }
    }

    #[test]
    fn deterministic_and_order_independent() {
        let a = d("character_0", Pose::Standing, Some(1), "use", Target::Object(1));
        let b = d("character_1", Pose::Sitting, Some(0), "read", Target::Prop("book".into()));
        let kf1 = Keyframe {
            index: 2,
            descriptions: vec![a.clone(), b.clone()],
        };
        let kf2 = Keyframe {
            index: 2,
            descriptions: vec![b, a],
        };
        let r1 = run(&kf1, &BTreeMap::new(), 77);
        assert_eq!(r1, run(&kf1, &BTreeMap::new(), 77));
        assert_eq!(r1.poses, run(&kf2, &BTreeMap::new(), 77).poses);
    }

    #[test]
    fn fixed_user_keeps_pose_and_partner_moves_aside() {
        let s = scene();
        let points = generate_sitting_points(&s.objects[0]);
        let user = CharacterPose {
            position: points[2].position,
            body_yaw: 0.0,
            head_yaw: 0.0,
            fundamental: Pose::Sitting,
            sitting_point_index: Some(2),
        };
        let kf = Keyframe {
            index: 0,
            descriptions: vec![
                d("character_u", Pose::Sitting, Some(0), "watch", Target::Object(1)),
                d("character_0", Pose::Sitting, Some(0), "sleep", Target::None),
            ],
        };
        let fixed = BTreeMap::from([("character_u".to_string(), user)]);
        let out = run(&kf, &fixed, 4);
        assert_eq!(out.poses["character_u"].pose, user);
        let other = &out.poses["character_0"].pose;
        assert_ne!(other.sitting_point_index, Some(2));
        assert!((other.floor() - user.floor()).norm() >= 2.0 * CHARACTER_RADIUS);
    }

    #[test]
    fn lying_head_move_is_noop_and_single_point_translation_is_noop() {
        let s = scene();
        let sched = AnnealSchedule::default();
        let lie = free_space_for(&d("c", Pose::Lying, Some(0), "sleep", Target::None), &s).unwrap();
        let stool = free_space_for(&d("c", Pose::Sitting, Some(3), "sleep", Target::None), &s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lp = lie.pose_at(Vec2::new(2.0, 1.0));
        let sp = stool.sample(&[], &mut rng).unwrap();
        for _ in 0..300 {
            let n = propose_move(&lp, &lie, &sched.proposal_sigmas, &[], &mut rng);
            assert_eq!(n.head_yaw, 0.0);
            assert!(lie.contains(&n));
            let m = propose_move(&sp, &stool, &sched.proposal_sigmas, &[], &mut rng);
            assert_eq!(m.position, sp.position);
            assert!(m.head_yaw.abs() <= FRAC_PI_2);
        }
    }

    #[test]
    fn proposals_are_seed_deterministic() {
        let s = scene();
        let fs = free_space_for(&d("c", Pose::Standing, Some(1), "x", Target::None), &s).unwrap();
        let mut r0 = ChaCha8Rng::seed_from_u64(1);
        let start = fs.sample(&[], &mut r0).unwrap();
        let sig = AnnealSchedule::default().proposal_sigmas;
        let a: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(2);
            (0..20).map(|_| propose_move(&start, &fs, &sig, &[], &mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(2);
            (0..20).map(|_| propose_move(&start, &fs, &sig, &[], &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn schedule_validation() {
        assert!(AnnealSchedule::default().validate().is_ok());
        let bad = AnnealSchedule {
            gamma: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
