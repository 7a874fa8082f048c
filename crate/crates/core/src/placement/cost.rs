//! Constraint templates and the Metropolis acceptance rule.

use rand::Rng;

use crate::geom::Vec2;

/// Overlap depth scale for the collision term, meters.
pub const COLLISION_DEPTH_SCALE: f64 = 0.05;

/// `max(1 - e^(D - distance), 0)` over floor-plane Euclidean distance.
pub fn positional_cost(a: Vec2, b: Vec2, d: f64) -> f64 {
    (1.0 - (d - (a - b).norm()).exp()).max(0.0)
}

/// `(1 - cos(x, y)) / 2`; `None` when either vector is zero.
pub fn rotational_cost(x: Vec2, y: Vec2) -> Option<f64> {
    let n = x.norm() * y.norm();
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    let cos = (x.dot(&y) / n).clamp(-1.0, 1.0);
    Some((1.0 - cos) / 2.0)
}

/// Maps a capsule overlap depth to `[0, 1)`.
pub fn collision_cost(depth: f64) -> f64 {
    if depth <= 0.0 {
        0.0
    } else {
        1.0 - (-depth / COLLISION_DEPTH_SCALE).exp()
    }
}

pub fn acceptance_probability(c_old: f64, c_new: f64, t: f64) -> f64 {
    ((c_old - c_new) / t).exp().min(1.0)
}

/// Accepts with probability `min(e^((C_old - C_new)/t), 1)`.
pub fn metropolis_accept<R: Rng + ?Sized>(c_old: f64, c_new: f64, t: f64, rng: &mut R) -> bool {
    debug_assert!(t > 0.0);
    if c_new <= c_old {
        return true;
    }
    rng.random::<f64>() < acceptance_probability(c_old, c_new, t)
}
