//! Candidate camera views, geometric Set-of-Mark labels and view selection
//! (greedy coverage followed by connectivity augmentation).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsu::DisjointSets;
use crate::geom::{Rect, Segment, Vec2, Vec3};
use crate::path::build_grid;
use crate::scene::Scene;

const NEAR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraView {
    pub position: Vec3,
    pub yaw: f64,
    pub pitch: f64,
    pub fov_h: f64,
    pub image_aspect: f64,
}

impl CameraView {
    fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let (sy, cy) = self.yaw.sin_cos();
        let (sp, cp) = self.pitch.sin_cos();
        let forward = Vec3::new(cp * cy, cp * sy, sp);
        let right = Vec3::new(sy, -cy, 0.0);
        let up = right.cross(&forward);
        (forward, right, up)
    }

    /// Camera-frame coordinates `(x right, y up, z forward)`.
    fn to_camera(&self, p: Vec3) -> Vec3 {
        let (f, r, u) = self.basis();
        let d = p - self.position;
        Vec3::new(d.dot(&r), d.dot(&u), d.dot(&f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mark {
    pub object_id: u32,
    pub area_fraction: f64,
    pub distance: f64,
    pub out_of_view_fraction: f64,
    pub occluded_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewObservation {
    pub view: CameraView,
    pub surviving_marks: BTreeSet<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_area_fraction: f64,
    pub max_distance: f64,
    pub max_out_of_view: f64,
    pub max_occluded: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_area_fraction: 0.04,
            max_distance: 10.0,
            max_out_of_view: 0.20,
            max_occluded: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViewConfig {
    pub candidates: usize,
    pub eye_height: f64,
    pub pitch: f64,
    pub fov_h: f64,
    pub image_aspect: f64,
    /// Grid resolution used to find free floor for camera positions.
    pub free_space_cell: f64,
    pub filter: FilterConfig,
}

impl Default for ViewConfig {
    fn default() -> Self {
        Self {
            candidates: 200,
            eye_height: 1.6,
            pitch: -0.2,
            fov_h: FRAC_PI_2,
            image_aspect: 4.0 / 3.0,
            free_space_cell: 0.1,
            filter: FilterConfig::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ViewError {
    #[error("candidate count must be at least 1")]
    NoCandidates,
    #[error("scene has no free floor space for camera placement")]
    NoFreeSpace,
    #[error("objects {0:?} are not observed by any candidate view")]
    Uncoverable(Vec<u32>),
}

fn rect_area(r: &Rect) -> f64 {
    r.area()
}

/// Projects every object in front of the camera into normalized image
/// coordinates (`[-1, 1]²`) and measures the four filter quantities.
pub fn project_marks(scene: &Scene, view: &CameraView) -> Vec<Mark> {
    let tan_h = (view.fov_h / 2.0).tan();
    let tan_v = tan_h / view.image_aspect;
    let image = Rect::new(-1.0, -1.0, 1.0, 1.0);
    let cam2d = Vec2::new(view.position.x, view.position.y);

    let mut marks = Vec::new();
    for obj in &scene.objects {
        let center_cam = view.to_camera(obj.position);
        if center_cam.z <= NEAR {
            continue;
        }
        let bx = obj.oriented_box();
        let corners = bx.corners();
        let projected = corners.iter().map(|c| {
            let q = view.to_camera(*c);
            let z = q.z.max(NEAR);
            Vec2::new(q.x / (z * tan_h), q.y / (z * tan_v))
        });
        let rect = Rect::bounding(projected);
        let full = rect_area(&rect);
        let clipped = rect_area(&rect.intersection(&image));
        let out_of_view = if full > 0.0 {
            (1.0 - clipped / full).clamp(0.0, 1.0)
        } else {
            1.0
        };

        let samples = std::iter::once(obj.position).chain(corners.iter().copied());
        let mut blocked = 0usize;
        for s in samples {
            let floor_ray = Segment::new(cam2d, Vec2::new(s.x, s.y));
            let by_wall = !scene.wall_free(&floor_ray);
            let by_object = !by_wall
                && scene.objects.iter().filter(|o| o.id != obj.id).any(|o| {
                    o.oriented_box()
                        .segment_hit(view.position, s)
                        .is_some_and(|t| t < 1.0 - 1e-9)
                });
            if by_wall || by_object {
                blocked += 1;
            }
        }

        marks.push(Mark {
            object_id: obj.id,
            area_fraction: (clipped / 4.0).clamp(0.0, 1.0),
            distance: (obj.position - view.position).norm(),
            out_of_view_fraction: out_of_view,
            occluded_fraction: blocked as f64 / 9.0,
        });
    }
    marks
}

pub fn filter_marks(marks: &[Mark], cfg: &FilterConfig) -> BTreeSet<u32> {
    marks
        .iter()
        .filter(|m| {
            m.area_fraction >= cfg.min_area_fraction
                && m.distance <= cfg.max_distance
                && m.out_of_view_fraction <= cfg.max_out_of_view
                && m.occluded_fraction <= cfg.max_occluded
        })
        .map(|m| m.object_id)
        .collect()
}

pub fn observe(scene: &Scene, view: CameraView, filter: &FilterConfig) -> ViewObservation {
    ViewObservation {
        view,
        surviving_marks: filter_marks(&project_marks(scene, &view), filter),
    }
}

/// `n` random views in free floor space at eye height, each with its
/// filtered marks. Deterministic for a fixed seed.
pub fn sample_candidate_views(
    scene: &Scene,
    n: usize,
    seed: u64,
    cfg: &ViewConfig,
) -> Result<Vec<ViewObservation>, ViewError> {
    if n == 0 {
        return Err(ViewError::NoCandidates);
    }
    let grid = build_grid(scene, cfg.free_space_cell);
    let free = grid.free_cells();
    if free.is_empty() {
        return Err(ViewError::NoFreeSpace);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let views: Vec<CameraView> = (0..n)
        .map(|_| {
            let (ix, iy) = free[rng.random_range(0..free.len())];
            let c = grid.cell_center(ix, iy);
            let jitter = Vec2::new(
                rng.random_range(-0.5..0.5) * grid.cell,
                rng.random_range(-0.5..0.5) * grid.cell,
            );
            let p = c + jitter;
            CameraView {
                position: Vec3::new(p.x, p.y, cfg.eye_height),
                yaw: rng.random_range(0.0..TAU),
                pitch: cfg.pitch,
                fov_h: cfg.fov_h,
                image_aspect: cfg.image_aspect,
            }
        })
        .collect();
    use rayon::prelude::*;
    Ok(views
        .into_par_iter()
        .map(|v| observe(scene, v, &cfg.filter))
        .collect())
}

/// Greedy set cover: indices of chosen candidates in selection order.
pub fn greedy_cover(
    candidates: &[ViewObservation],
    universe: &BTreeSet<u32>,
) -> Result<Vec<usize>, ViewError> {
    let observed: BTreeSet<u32> = candidates
        .iter()
        .flat_map(|c| c.surviving_marks.iter().copied())
        .collect();
    let missing: Vec<u32> = universe.difference(&observed).copied().collect();
    if !missing.is_empty() {
        return Err(ViewError::Uncoverable(missing));
    }
    let mut uncovered = universe.clone();
    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (i, c) in candidates.iter().enumerate() {
            let gain = c.surviving_marks.intersection(&uncovered).count();
            if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (i, _) = best.expect("coverability checked above");
        for m in &candidates[i].surviving_marks {
            uncovered.remove(m);
        }
        chosen.push(i);
    }
    Ok(chosen)
}

/// Components of the view graph (edge iff shared mark) over `selected`
/// candidate indices. Each component lists candidate indices in input order.
pub fn view_components(selected: &[usize], candidates: &[ViewObservation]) -> Vec<Vec<usize>> {
    let mut d = DisjointSets::new(selected.len());
    let mut owner: BTreeMap<u32, usize> = BTreeMap::new();
    for (k, &ci) in selected.iter().enumerate() {
        for m in &candidates[ci].surviving_marks {
            match owner.get(m) {
                Some(&other) => {
                    d.union(other, k);
                }
                None => {
                    owner.insert(*m, k);
                }
            }
        }
    }
    d.components()
        .into_iter()
        .map(|c| c.into_iter().map(|k| selected[k]).collect())
        .collect()
}

/// Edges `(i, j)` (positions in `selected`, `i < j`) of views sharing a mark.
pub fn view_adjacency(selected: &[usize], candidates: &[ViewObservation]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..selected.len() {
        for j in (i + 1)..selected.len() {
            let a = &candidates[selected[i]].surviving_marks;
            let b = &candidates[selected[j]].surviving_marks;
            if !a.is_disjoint(b) {
                out.push((i, j));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connectivity {
    /// Candidate indices: the input cover followed by added views.
    pub selected: Vec<usize>,
    /// Components left unconnected (candidate indices); empty when connected.
    pub residual_components: Vec<Vec<usize>>,
}

impl Connectivity {
    pub fn is_connected(&self) -> bool {
        self.residual_components.is_empty()
    }
}

/// Adds views until the view graph over the selection is connected.
///
/// Each round prefers the single candidate that merges the most components
/// (ties: most objects shared with the components it joins, then lowest
/// index). When no single candidate bridges two components, the shortest
/// chain of candidates that does is added as one step.
pub fn augment_connectivity(cover: &[usize], candidates: &[ViewObservation]) -> Connectivity {
    let mut selected: Vec<usize> = cover.to_vec();
    loop {
        let comps = view_components(&selected, candidates);
        if comps.len() <= 1 {
            return Connectivity {
                selected,
                residual_components: Vec::new(),
            };
        }
        let comp_marks: Vec<BTreeSet<u32>> = comps
            .iter()
            .map(|c| {
                c.iter()
                    .flat_map(|&i| candidates[i].surviving_marks.iter().copied())
                    .collect()
            })
            .collect();
        let in_sel: BTreeSet<usize> = selected.iter().copied().collect();

        let touched = |ci: usize| -> Vec<usize> {
            (0..comps.len())
                .filter(|&k| !candidates[ci].surviving_marks.is_disjoint(&comp_marks[k]))
                .collect()
        };

        let mut best: Option<(usize, usize, usize)> = None; // (candidate, reduction, shared)
        for ci in 0..candidates.len() {
            if in_sel.contains(&ci) {
                continue;
            }
            let t = touched(ci);
            if t.len() < 2 {
                continue;
            }
            let reduction = t.len() - 1;
            let shared: usize = t
                .iter()
                .map(|&k| candidates[ci].surviving_marks.intersection(&comp_marks[k]).count())
                .sum();
            let better = match best {
                None => true,
                Some((_, r, s)) => reduction > r || (reduction == r && shared > s),
            };
            if better {
                best = Some((ci, reduction, shared));
            }
        }
        if let Some((ci, _, _)) = best {
            selected.push(ci);
            continue;
        }

        match bridging_chain(candidates, &in_sel, &touched) {
            Some(chain) => selected.extend(chain),
            None => {
                return Connectivity {
                    selected,
                    residual_components: comps,
                }
            }
        }
    }
}

/// Multi-source BFS over unselected candidates, seeded from candidates that
/// touch exactly one component, until two searches from different
/// components meet.
fn bridging_chain(
    candidates: &[ViewObservation],
    in_sel: &BTreeSet<usize>,
    touched: &dyn Fn(usize) -> Vec<usize>,
) -> Option<Vec<usize>> {
    let n = candidates.len();
    let mut label: Vec<Option<usize>> = vec![None; n];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut queue = VecDeque::new();
    for ci in 0..n {
        if in_sel.contains(&ci) {
            continue;
        }
        if let Some(&k) = touched(ci).first() {
            label[ci] = Some(k);
            queue.push_back(ci);
        }
    }
    let trace = |mut c: usize, parent: &[Option<usize>]| {
        let mut path = vec![c];
        while let Some(p) = parent[c] {
            path.push(p);
            c = p;
        }
        path
    };
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if v == u
                || in_sel.contains(&v)
                || candidates[u].surviving_marks.is_disjoint(&candidates[v].surviving_marks)
            {
                continue;
            }
            match label[v] {
                None => {
                    label[v] = label[u];
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
                Some(lv) if Some(lv) != label[u] => {
                    let mut chain = trace(u, &parent);
                    chain.reverse();
                    chain.extend(trace(v, &parent));
                    return Some(chain);
                }
                _ => {}
            }
        }
    }
    None
}

/// Full selection result over a candidate pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPlan {
    pub views: Vec<ViewObservation>,
    /// Edges between positions in `views`.
    pub adjacency: Vec<(usize, usize)>,
    /// Residual components as positions in `views`; empty when connected.
    pub residual_components: Vec<Vec<usize>>,
    /// Objects no candidate observed; excluded from the coverage universe.
    pub unobserved: Vec<u32>,
}

pub fn plan_views(scene: &Scene, seed: u64, cfg: &ViewConfig) -> Result<ViewPlan, ViewError> {
    let candidates = sample_candidate_views(scene, cfg.candidates, seed, cfg)?;
    let observed: BTreeSet<u32> = candidates
        .iter()
        .flat_map(|c| c.surviving_marks.iter().copied())
        .collect();
    let all = scene.object_ids();
    let unobserved: Vec<u32> = all.difference(&observed).copied().collect();
    let universe: BTreeSet<u32> = all.intersection(&observed).copied().collect();
    let cover = greedy_cover(&candidates, &universe)?;
    let conn = augment_connectivity(&cover, &candidates);
    let position: BTreeMap<usize, usize> =
        conn.selected.iter().enumerate().map(|(k, &ci)| (ci, k)).collect();
    Ok(ViewPlan {
        views: conn.selected.iter().map(|&i| candidates[i].clone()).collect(),
        adjacency: view_adjacency(&conn.selected, &candidates),
        residual_components: conn
            .residual_components
            .iter()
            .map(|c| c.iter().map(|ci| position[ci]).collect())
            .collect(),
        unobserved,
    })
}
