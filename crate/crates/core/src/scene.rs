//! Declarative scene representation: oriented boxes inside walled floor bounds.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{segments_intersect, Footprint, OrientedBox, Rect, Segment, Vec2, Vec3};

/// Seat height used for sittable objects that carry no support surface.
pub const DEFAULT_SEAT_HEIGHT: f64 = 0.45;

const BOUNDS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Affordance {
    Sittable,
    Lieable,
    WalkObstacle,
    SupportSurface,
}

impl fmt::Display for Affordance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Affordance::Sittable => "sittable",
            Affordance::Lieable => "lieable",
            Affordance::WalkObstacle => "walk_obstacle",
            Affordance::SupportSurface => "support_surface",
        };
        f.write_str(s)
    }
}

/// An object box. Its front is the local +y axis rotated by `yaw`;
/// the local -y edge is treated as the backrest for seating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub label: String,
    pub position: Vec3,
    pub yaw: f64,
    pub half_extents: Vec3,
    pub affordances: BTreeSet<Affordance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_height: Option<f64>,
}

impl SceneObject {
    pub fn has(&self, a: Affordance) -> bool {
        self.affordances.contains(&a)
    }

    /// Name used when talking to the language model, e.g. `object_11-sofa`.
    pub fn mark_name(&self) -> String {
        format!("object_{}-{}", self.id, self.label)
    }

    pub fn footprint(&self) -> Footprint {
        footprint_of(self)
    }

    pub fn oriented_box(&self) -> OrientedBox {
        OrientedBox {
            center: self.position,
            yaw: self.yaw,
            half_extents: self.half_extents,
        }
    }

    pub fn front(&self) -> Vec2 {
        crate::geom::rotate(Vec2::new(0.0, 1.0), self.yaw)
    }

    pub fn seat_height(&self) -> f64 {
        self.support_height.unwrap_or_else(|| {
            (self.position.z + self.half_extents.z).min(DEFAULT_SEAT_HEIGHT)
        })
    }
}

/// Floor projection of an object's oriented box.
pub fn footprint_of(obj: &SceneObject) -> Footprint {
    Footprint {
        center: Vec2::new(obj.position.x, obj.position.y),
        yaw: obj.yaw,
        half_extents: Vec2::new(obj.half_extents.x, obj.half_extents.y),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub walls: Vec<Segment>,
    pub floor_bounds: Rect,
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("failed to read scene file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scene JSON does not match schema: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate object id {id}")]
    DuplicateId { id: u32 },
    #[error("object {id}: invalid {field}: {reason}")]
    Invalid {
        id: u32,
        field: &'static str,
        reason: String,
    },
    #[error("invalid floor_bounds: {0}")]
    Bounds(String),
}

impl Scene {
    pub fn from_json_str(text: &str) -> Result<Scene, SceneError> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization is infallible")
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_ids(&self) -> BTreeSet<u32> {
        self.objects.iter().map(|o| o.id).collect()
    }

    /// True if the floor segment `s` crosses no wall.
    pub fn wall_free(&self, s: &Segment) -> bool {
        !self.walls.iter().any(|w| segments_intersect(w, s))
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let b = &self.floor_bounds;
        if !(b.width() > 0.0 && b.height() > 0.0) {
            return Err(SceneError::Bounds(format!(
                "expected xmin < xmax and ymin < ymax, got {:?}",
                <[f64; 4]>::from(*b)
            )));
        }
        let mut seen = HashSet::new();
        for o in &self.objects {
            if !seen.insert(o.id) {
                return Err(SceneError::DuplicateId { id: o.id });
            }
            let invalid = |field, reason: String| SceneError::Invalid {
                id: o.id,
                field,
                reason,
            };
            if o.half_extents.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
                return Err(invalid(
                    "half_extents",
                    format!("components must be positive, got {:?}", o.half_extents.as_slice()),
                ));
            }
            if o.position.iter().any(|v| !v.is_finite()) || !o.yaw.is_finite() {
                return Err(invalid("position", "non-finite coordinate".into()));
            }
            if o.has(Affordance::Lieable) && !o.has(Affordance::SupportSurface) {
                return Err(invalid(
                    "affordances",
                    "lieable requires support_surface".into(),
                ));
            }
            match (o.has(Affordance::SupportSurface), o.support_height) {
                (true, None) => {
                    return Err(invalid(
                        "support_height",
                        "required when support_surface is present".into(),
                    ))
                }
                (false, Some(_)) => {
                    return Err(invalid(
                        "support_height",
                        "present without support_surface".into(),
                    ))
                }
                _ => {}
            }
            let inside = o.footprint().corners().iter().all(|c| {
                c.x >= b.min.x - BOUNDS_EPS
                    && c.x <= b.max.x + BOUNDS_EPS
                    && c.y >= b.min.y - BOUNDS_EPS
                    && c.y <= b.max.y + BOUNDS_EPS
            });
            if !inside {
                return Err(invalid("position", "footprint leaves floor_bounds".into()));
            }
        }
        Ok(())
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scene::from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cube(id: u32, yaw: f64) -> SceneObject {
        SceneObject {
            id,
            label: "cube".into(),
            position: Vec3::new(0.0, 0.0, 0.5),
            yaw,
            half_extents: Vec3::repeat(0.5),
            affordances: BTreeSet::new(),
            support_height: None,
        }
    }

    #[test]
    fn unit_cube_footprint() {
        let f = footprint_of(&cube(0, 0.0));
        assert_eq!(f.center, Vec2::zeros());
        assert_eq!(f.yaw, 0.0);
        assert_eq!(f.half_extents, Vec2::new(0.5, 0.5));
    }

    #[test]
    fn rotated_cube_keeps_extents() {
        let f = footprint_of(&cube(0, PI / 2.0));
        assert_eq!(f.half_extents, Vec2::new(0.5, 0.5));
        assert_eq!(f.yaw, PI / 2.0);
    }

    #[test]
    fn rotated_box_projection() {
        let mut o = cube(0, PI / 4.0);
        o.half_extents = Vec3::new(1.0, 0.5, 0.4);
        let f = footprint_of(&o);
        assert_eq!(f.yaw, PI / 4.0);
        assert_eq!(f.half_extents, Vec2::new(1.0, 0.5));
        // hand projection: local corner (1, 0.5) rotated by 45°
        let c = f.corners()[2];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c.x - (1.0 * s - 0.5 * s)).abs() < 1e-12);
        assert!((c.y - (1.0 * s + 0.5 * s)).abs() < 1e-12);
    }

    #[test]
    fn empty_scene_with_one_wall() {
        let s = Scene::from_json_str(
            r#"{"objects": [], "walls": [[[0,0],[1,0]]], "floor_bounds": [0,0,4,4]}"#,
        )
        .unwrap();
        assert!(s.objects.is_empty());
        assert_eq!(s.walls.len(), 1);
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = r#"{"objects": [
            {"id": 3, "label": "a", "position": [1,1,0.5], "yaw": 0, "half_extents": [0.5,0.5,0.5], "affordances": []},
            {"id": 3, "label": "b", "position": [2,2,0.5], "yaw": 0, "half_extents": [0.5,0.5,0.5], "affordances": []}
        ], "walls": [], "floor_bounds": [0,0,4,4]}"#;
        match Scene::from_json_str(text) {
            Err(SceneError::DuplicateId { id: 3 }) => {}
            other => panic!("expected duplicate id 3, got {other:?}"),
        }
    }

    #[test]
    fn lieable_without_support_rejected() {
        let text = r#"{"objects": [
            {"id": 1, "label": "bed", "position": [1,1,0.3], "yaw": 0, "half_extents": [0.5,0.5,0.3], "affordances": ["lieable"]}
        ], "walls": [], "floor_bounds": [0,0,4,4]}"#;
        let err = Scene::from_json_str(text).unwrap_err();
        assert!(matches!(err, SceneError::Invalid { id: 1, field: "affordances", .. }));
    }

    #[test]
    fn nonpositive_extent_and_out_of_bounds() {
        let text = r#"{"objects": [
            {"id": 4, "label": "x", "position": [1,1,0.3], "yaw": 0, "half_extents": [0.5,0,0.3], "affordances": []}
        ], "walls": [], "floor_bounds": [0,0,4,4]}"#;
        assert!(matches!(
            Scene::from_json_str(text).unwrap_err(),
            SceneError::Invalid { id: 4, field: "half_extents", .. }
        ));
        let text = r#"{"objects": [
            {"id": 5, "label": "x", "position": [3.9,1,0.3], "yaw": 0, "half_extents": [0.5,0.5,0.3], "affordances": []}
        ], "walls": [], "floor_bounds": [0,0,4,4]}"#;
        assert!(matches!(
            Scene::from_json_str(text).unwrap_err(),
            SceneError::Invalid { id: 5, field: "position", .. }
        ));
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            Scene::from_json_str(r#"{"objects": 3}"#),
            Err(SceneError::Parse(_))
        ));
    }

    proptest! {
        #[test]
        fn footprint_ignores_height(z in -5.0f64..5.0, yaw in -3.0f64..3.0) {
            let a = cube(0, yaw);
            let mut b = a.clone();
            b.position.z = z;
            prop_assert_eq!(footprint_of(&a), footprint_of(&b));
        }

        #[test]
        fn scene_round_trip(
            xs in prop::collection::vec((0.6f64..9.4, 0.6f64..9.4, -3.0f64..3.0, 0.05f64..0.4), 0..6)
        ) {
            let objects = xs.iter().enumerate().map(|(i, &(x, y, yaw, h))| SceneObject {
                id: i as u32,
                label: format!("thing{i}"),
                position: Vec3::new(x, y, h),
                yaw,
                half_extents: Vec3::new(h, h, h),
                affordances: [Affordance::SupportSurface].into_iter().collect(),
                support_height: Some(2.0 * h),
            }).collect();
            let scene = Scene {
                objects,
                walls: vec![Segment::new(Vec2::new(0.0, 5.0), Vec2::new(3.0, 5.0))],
                floor_bounds: Rect::new(0.0, 0.0, 10.0, 10.0),
            };
            let back = Scene::from_json_str(&scene.to_json()).unwrap();
            prop_assert_eq!(back, scene);
        }
    }
}
