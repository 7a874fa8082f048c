//! Admissible placement regions per fundamental pose.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{Description, Pose};
use crate::geom::{rotate, Footprint, Rect, Segment, Vec2, Vec3};
use crate::path::CHARACTER_RADIUS;
use crate::scene::{Affordance, Scene, SceneObject};

use super::pose::CharacterPose;

pub const STANDING_RING_WIDTH: f64 = 0.8;
pub const SITTING_SPACING: f64 = 0.3;
pub const SITTING_INSET: f64 = 0.15;

const SCAN_STEP: f64 = 0.05;
const SAMPLE_TRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SittingPoint {
    pub position: Vec3,
    pub forward: Vec2,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error("{character}: object {object} cannot be used for {pose} (missing {affordance})")]
    Affordance {
        character: String,
        object: u32,
        pose: Pose,
        affordance: Affordance,
    },
    #[error("{character}: object {object} is not in the scene")]
    UnknownObject { character: String, object: u32 },
    #[error("{character}: {pose} needs a positional reference")]
    MissingReference { character: String, pose: Pose },
    #[error("{character}: free space is empty")]
    EmptyFreeSpace { character: String },
    #[error("fixed character {0} has no description in this keyframe")]
    FixedWithoutDescription(String),
}

/// Shared exclusion geometry for standing regions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clearance {
    pub obstacles: Vec<Footprint>,
    pub walls: Vec<Segment>,
    pub bounds: Rect,
}

impl Clearance {
    fn admits(&self, p: Vec2) -> bool {
        self.bounds.contains(p)
            && self.obstacles.iter().all(|f| !f.contains(p))
            && self.walls.iter().all(|w| w.distance_to(p) >= CHARACTER_RADIUS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FreeSpace {
    /// Points outside `footprint` within `width` of it, clear of other
    /// obstacles and walls, with a wall-free line to the footprint center.
    StandingRing {
        reference: u32,
        footprint: Footprint,
        width: f64,
        clearance: Clearance,
    },
    /// Standing with no reference: anywhere clear on the floor.
    OpenFloor { clearance: Clearance },
    SittingPoints { reference: u32, points: Vec<SittingPoint> },
    LyingSurface { reference: u32, surface: Footprint, height: f64 },
}

impl FreeSpace {
    pub fn pose(&self) -> Pose {
        match self {
            FreeSpace::StandingRing { .. } | FreeSpace::OpenFloor { .. } => Pose::Standing,
            FreeSpace::SittingPoints { .. } => Pose::Sitting,
            FreeSpace::LyingSurface { .. } => Pose::Lying,
        }
    }

    pub fn reference(&self) -> Option<u32> {
        match self {
            FreeSpace::StandingRing { reference, .. }
            | FreeSpace::SittingPoints { reference, .. }
            | FreeSpace::LyingSurface { reference, .. } => Some(*reference),
            FreeSpace::OpenFloor { .. } => None,
        }
    }

    /// Floor-point membership for the continuous kinds.
    pub fn contains_point(&self, p: Vec2) -> bool {
        match self {
            FreeSpace::StandingRing {
                footprint,
                width,
                clearance,
                ..
            } => {
                let d = footprint.distance(p);
                d > 0.0
                    && d <= *width
                    && clearance.admits(p)
                    && clearance
                        .walls
                        .iter()
                        .all(|w| !crate::geom::segments_intersect(w, &Segment::new(p, footprint.center)))
            }
            FreeSpace::OpenFloor { clearance } => clearance.admits(p),
            FreeSpace::SittingPoints { points, .. } => points.iter().any(|s| s.position.xy() == p),
            FreeSpace::LyingSurface { surface, .. } => surface.contains(p),
        }
    }

    /// Full pose membership, checking every pose field rather than the floor point alone.
    pub fn contains(&self, pose: &CharacterPose) -> bool {
        if pose.fundamental != self.pose() || !pose.head_in_range() {
            return false;
        }
        match self {
            FreeSpace::SittingPoints { points, .. } => pose
                .sitting_point_index
                .and_then(|i| points.get(i))
                .is_some_and(|s| s.position == pose.position),
            FreeSpace::LyingSurface { height, .. } => {
                pose.position.z == *height && self.contains_point(pose.floor())
            }
            _ => pose.position.z == 0.0 && self.contains_point(pose.floor()),
        }
    }

    /// Yaw of the frame that `body_yaw` is measured against, at floor point `p`.
    pub fn frame_yaw(&self, p: Vec2, sitting_index: Option<usize>) -> f64 {
        match self {
            FreeSpace::StandingRing { footprint, .. } => {
                let d = footprint.center - p;
                d.y.atan2(d.x)
            }
            FreeSpace::OpenFloor { .. } => 0.0,
            FreeSpace::SittingPoints { points, .. } => {
                let f = points[sitting_index.unwrap_or(0)].forward;
                f.y.atan2(f.x)
            }
            FreeSpace::LyingSurface { surface, .. } => surface.yaw,
        }
    }

    fn sample_region(&self) -> Option<Rect> {
        match self {
            FreeSpace::StandingRing {
                footprint,
                width,
                clearance,
                ..
            } => Some(footprint.inflated(*width).bounds().intersection(&clearance.bounds)),
            FreeSpace::OpenFloor { clearance } => Some(clearance.bounds),
            FreeSpace::LyingSurface { surface, .. } => Some(surface.bounds()),
            FreeSpace::SittingPoints { .. } => None,
        }
    }

    /// True if some point lies in the region; grid scan at 5 cm.
    pub fn is_empty(&self) -> bool {
        if let FreeSpace::SittingPoints { points, .. } = self {
            return points.is_empty();
        }
        let r = match self.sample_region() {
            Some(r) if r.width() > 0.0 && r.height() > 0.0 => r,
            _ => return true,
        };
        let nx = (r.width() / SCAN_STEP).ceil() as usize;
        let ny = (r.height() / SCAN_STEP).ceil() as usize;
        for i in 0..=nx {
            for j in 0..=ny {
                let p = Vec2::new(
                    (r.min.x + i as f64 * SCAN_STEP).min(r.max.x),
                    (r.min.y + j as f64 * SCAN_STEP).min(r.max.y),
                );
                if self.contains_point(p) {
                    return false;
                }
            }
        }
        true
    }

    /// Uniform sample of a pose at zero yaw. Sitting picks uniformly among
    /// points not in `occupied`, or among all points if every one is taken.
    pub fn sample<R: Rng + ?Sized>(&self, occupied: &[usize], rng: &mut R) -> Option<CharacterPose> {
        if let FreeSpace::SittingPoints { points, .. } = self {
            let free: Vec<usize> = (0..points.len()).filter(|i| !occupied.contains(i)).collect();
            let pool: Vec<usize> = if free.is_empty() { (0..points.len()).collect() } else { free };
            if pool.is_empty() {
                return None;
            }
            let i = pool[rng.random_range(0..pool.len())];
            return Some(CharacterPose {
                position: points[i].position,
                body_yaw: 0.0,
                head_yaw: 0.0,
                fundamental: Pose::Sitting,
                sitting_point_index: Some(i),
            });
        }
        let r = self.sample_region()?;
        if r.width() <= 0.0 || r.height() <= 0.0 {
            return None;
        }
        for _ in 0..SAMPLE_TRIES {
            let p = Vec2::new(rng.random_range(r.min.x..=r.max.x), rng.random_range(r.min.y..=r.max.y));
            if self.contains_point(p) {
                return Some(self.pose_at(p));
            }
        }
        None
    }

    /// Pose at floor point `p` for the continuous kinds.
    pub fn pose_at(&self, p: Vec2) -> CharacterPose {
        let z = match self {
            FreeSpace::LyingSurface { height, .. } => *height,
            _ => 0.0,
        };
        CharacterPose {
            position: Vec3::new(p.x, p.y, z),
            body_yaw: 0.0,
            head_yaw: 0.0,
            fundamental: self.pose(),
            sitting_point_index: None,
        }
    }
}

/// Seat grid with 0.3 m spacing inset 0.15 m from the edges. Each point faces
/// out of its nearest open edge (front, right or left; the back is the
/// backrest), with the front winning ties. Seats too small for the grid get
/// one center point facing the object front.
pub fn generate_sitting_points(obj: &SceneObject) -> Vec<SittingPoint> {
    let h = Vec2::new(obj.half_extents.x, obj.half_extents.y);
    let z = obj.seat_height();
    let center = Vec2::new(obj.position.x, obj.position.y);
    let usable = 2.0 * h - Vec2::repeat(2.0 * SITTING_INSET);
    if usable.x < 0.0 || usable.y < 0.0 {
        return vec![SittingPoint {
            position: Vec3::new(center.x, center.y, z),
            forward: obj.front(),
        }];
    }
    let count = |u: f64| (u / SITTING_SPACING + 1e-9).floor() as usize + 1;
    let (nx, ny) = (count(usable.x), count(usable.y));
    let offset = |i: usize, n: usize| (i as f64 - (n as f64 - 1.0) / 2.0) * SITTING_SPACING;
    let mut out = Vec::with_capacity(nx * ny);
    for j in (0..ny).rev() {
        for i in 0..nx {
            let l = Vec2::new(offset(i, nx), offset(j, ny));
            let candidates = [
                (h.y - l.y, Vec2::new(0.0, 1.0)),
                (h.x - l.x, Vec2::new(1.0, 0.0)),
                (h.x + l.x, Vec2::new(-1.0, 0.0)),
            ];
            let mut best = candidates[0];
            for c in &candidates[1..] {
                if c.0 < best.0 - 1e-12 {
                    best = *c;
                }
            }
            let w = center + rotate(l, obj.yaw);
            out.push(SittingPoint {
                position: Vec3::new(w.x, w.y, z),
                forward: rotate(best.1, obj.yaw),
            });
        }
    }
    out
}

fn clearance(scene: &Scene, except: Option<u32>) -> Clearance {
    Clearance {
        obstacles: scene
            .objects
            .iter()
            .filter(|o| o.has(Affordance::WalkObstacle) && Some(o.id) != except)
            .map(|o| o.footprint())
            .collect(),
        walls: scene.walls.clone(),
        bounds: scene.floor_bounds,
    }
}

pub fn free_space_for(desc: &Description, scene: &Scene) -> Result<FreeSpace, PlacementError> {
    let character = desc.subject.clone();
    let obj = match desc.reference {
        Some(id) => Some(scene.object(id).ok_or(PlacementError::UnknownObject {
            character: character.clone(),
            object: id,
        })?),
        None => None,
    };
    if let (Some(o), Some(aff)) = (obj, desc.pose.required_affordance()) {
        if !o.has(aff) {
            return Err(PlacementError::Affordance {
                character,
                object: o.id,
                pose: desc.pose,
                affordance: aff,
            });
        }
    }
    let fs = match (desc.pose, obj) {
        (Pose::Standing, Some(o)) => FreeSpace::StandingRing {
            reference: o.id,
            footprint: o.footprint(),
            width: STANDING_RING_WIDTH,
            clearance: clearance(scene, Some(o.id)),
        },
        (Pose::Standing, None) => FreeSpace::OpenFloor {
            clearance: clearance(scene, None),
        },
        (Pose::Sitting, Some(o)) => FreeSpace::SittingPoints {
            reference: o.id,
            points: generate_sitting_points(o),
        },
        (Pose::Lying, Some(o)) => FreeSpace::LyingSurface {
            reference: o.id,
            surface: o.footprint(),
            height: o.support_height.unwrap_or(o.position.z + o.half_extents.z),
        },
        (pose, None) => return Err(PlacementError::MissingReference { character, pose }),
    };
    if fs.is_empty() {
        return Err(PlacementError::EmptyFreeSpace { character });
    }
    Ok(fs)
}
