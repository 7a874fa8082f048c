//! Top-down SVG rendering of one keyframe.

use std::fmt::Write;

use thiserror::Error;

use crate::geom::{unit, Vec2};
use crate::path::{Trajectory, CHARACTER_RADIUS};
use crate::pipeline::RunResult;
use crate::placement::KeyframePlacement;
use crate::scene::Scene;

const MARGIN: f64 = 0.5;
const PX_PER_M: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
#[error("keyframe {index} is not in the activity (available: {available:?})")]
pub struct SvgError {
    pub index: usize,
    pub available: Vec<usize>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Frame {
    min: Vec2,
    max_y: f64,
}

impl Frame {
    fn pt(&self, p: Vec2) -> (f64, f64) {
        ((p.x - self.min.x) * PX_PER_M, (self.max_y - p.y) * PX_PER_M)
    }

    fn pts(&self, ps: impl IntoIterator<Item = Vec2>) -> String {
        ps.into_iter()
            .map(|p| {
                let (x, y) = self.pt(p);
                format!("{x:.1},{y:.1}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Floor, walls, labeled object footprints, characters with body arrows and
/// head ticks, and the walks arriving at this keyframe.
pub fn render_topdown(scene: &Scene, placement: Option<&KeyframePlacement>, trajectories: &[&Trajectory]) -> String {
    let b = scene.floor_bounds;
    let f = Frame {
        min: b.min - Vec2::repeat(MARGIN),
        max_y: b.max.y + MARGIN,
    };
    let w = (b.width() + 2.0 * MARGIN) * PX_PER_M;
    let h = (b.height() + 2.0 * MARGIN) * PX_PER_M;
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#);
    let (x0, y0) = f.pt(Vec2::new(b.min.x, b.max.y));
    let _ = writeln!(
        s,
        r##"<rect class="floor" x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="#f7f4ee" stroke="#999"/>"##,
        b.width() * PX_PER_M,
        b.height() * PX_PER_M
    );
    for wall in &scene.walls {
        let (ax, ay) = f.pt(wall.a);
        let (bx, by) = f.pt(wall.b);
        let _ = writeln!(s, r##"<line class="wall" x1="{ax:.1}" y1="{ay:.1}" x2="{bx:.1}" y2="{by:.1}" stroke="#333" stroke-width="4"/>"##);
    }
    for o in &scene.objects {
        let fp = o.footprint();
        let _ = writeln!(
            s,
            r##"<polygon class="object" data-id="{}" points="{}" fill="#d9d2c5" stroke="#6b6255"/>"##,
            o.id,
            f.pts(fp.corners())
        );
        let (cx, cy) = f.pt(fp.center);
        let _ = writeln!(
            s,
            r#"<text class="label" x="{cx:.1}" y="{cy:.1}" font-size="10" text-anchor="middle">{}</text>"#,
            esc(&o.mark_name())
        );
    }
    for t in trajectories {
        let _ = writeln!(
            s,
            r##"<polyline class="trajectory" data-character="{}" points="{}" fill="none" stroke="#3a7bd5" stroke-dasharray="6 4"/>"##,
            esc(&t.character),
            f.pts(t.waypoints.iter().copied())
        );
    }
    if let Some(p) = placement {
        for (id, q) in &p.poses {
            let c = q.pose.floor();
            let (cx, cy) = f.pt(c);
            let (bx, by) = f.pt(c + unit(q.world_body_yaw) * CHARACTER_RADIUS * 1.6);
            let (hx0, hy0) = f.pt(c + unit(q.gaze_yaw) * CHARACTER_RADIUS);
            let (hx1, hy1) = f.pt(c + unit(q.gaze_yaw) * CHARACTER_RADIUS * 1.4);
            let fill = if q.fixed { "#e0a030" } else { "#c8553d" };
            let _ = writeln!(
                s,
                r##"<g class="character" data-id="{}"><circle cx="{cx:.1}" cy="{cy:.1}" r="{:.1}" fill="{fill}" fill-opacity="0.7"/><line class="body-yaw" x1="{cx:.1}" y1="{cy:.1}" x2="{bx:.1}" y2="{by:.1}" stroke="#222" stroke-width="2"/><line class="head-yaw" x1="{hx0:.1}" y1="{hy0:.1}" x2="{hx1:.1}" y2="{hy1:.1}" stroke="#222" stroke-width="3"/><text x="{cx:.1}" y="{:.1}" font-size="9" text-anchor="middle">{}</text></g>"##,
                esc(id),
                CHARACTER_RADIUS * PX_PER_M,
                cy - CHARACTER_RADIUS * PX_PER_M - 3.0,
                esc(id)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn export_topdown(result: &RunResult, keyframe: usize) -> Result<String, SvgError> {
    if result.activity.keyframe(keyframe).is_none() {
        return Err(SvgError {
            index: keyframe,
            available: result.activity.keyframes.iter().map(|k| k.index).collect(),
        });
    }
    let incoming: Vec<&Trajectory> = result.trajectories.iter().filter(|t| t.to_keyframe == keyframe).collect();
    Ok(render_topdown(&result.scene, result.placement(keyframe), &incoming))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;

    #[test]
    fn empty_scene_is_floor_only() {
        let scene = Scene {
            objects: vec![],
            walls: vec![],
            floor_bounds: Rect::new(0.0, 0.0, 3.0, 2.0),
        };
        let svg = render_topdown(&scene, None, &[]);
        assert_eq!(svg.matches("<rect").count(), 1);
        assert!(!svg.contains("class=\"object\""));
        assert!(!svg.contains("class=\"character\""));
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
}
