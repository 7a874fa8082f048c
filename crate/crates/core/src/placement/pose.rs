use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::activity::Pose;
use crate::geom::Vec3;

/// Character state during placement. `body_yaw` is relative to the
/// free-space frame (toward the reference for standing, the sitting-point
/// forward for sitting, the surface axis for lying); `head_yaw` is relative
/// to the body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacterPose {
    pub position: Vec3,
    pub body_yaw: f64,
    pub head_yaw: f64,
    pub fundamental: Pose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sitting_point_index: Option<usize>,
}

impl CharacterPose {
    pub fn floor(&self) -> crate::geom::Vec2 {
        self.position.xy()
    }

    pub fn head_in_range(&self) -> bool {
        match self.fundamental {
            Pose::Lying => self.head_yaw == 0.0,
            _ => (-FRAC_PI_2..=FRAC_PI_2).contains(&self.head_yaw),
        }
    }
}
