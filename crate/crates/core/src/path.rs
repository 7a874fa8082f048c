//! Occupancy grid, 8-connected A* and inter-keyframe walking trajectories.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::StateChange;
use crate::geom::{Rect, Vec2};
use crate::scene::{Affordance, Scene};

/// Capsule radius used for inflation and collision.
pub const CHARACTER_RADIUS: f64 = 0.3;
pub const DEFAULT_CELL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub origin: Vec2,
    pub cell: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major, `true` = blocked.
    pub blocked: Vec<bool>,
}

pub type Cell = (usize, usize);

impl OccupancyGrid {
    pub fn new(origin: Vec2, cell: f64, width: usize, height: usize) -> Self {
        Self {
            origin,
            cell,
            width,
            height,
            blocked: vec![false; width * height],
        }
    }

    pub fn is_blocked(&self, (x, y): Cell) -> bool {
        self.blocked[y * self.width + x]
    }

    pub fn set_blocked(&mut self, (x, y): Cell, v: bool) {
        self.blocked[y * self.width + x] = v;
    }

    fn blocked_signed(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return true;
        }
        self.is_blocked((x as usize, y as usize))
    }

    pub fn cell_center(&self, x: usize, y: usize) -> Vec2 {
        self.origin + Vec2::new((x as f64 + 0.5) * self.cell, (y as f64 + 0.5) * self.cell)
    }

    pub fn cell_of(&self, p: Vec2) -> Option<Cell> {
        let g = (p - self.origin) / self.cell;
        if g.x < 0.0 || g.y < 0.0 {
            return None;
        }
        let (x, y) = (g.x.floor() as usize, g.y.floor() as usize);
        // points exactly on the far boundary belong to the last cell
        let x = if x == self.width && g.x == self.width as f64 { x - 1 } else { x };
        let y = if y == self.height && g.y == self.height as f64 { y - 1 } else { y };
        (x < self.width && y < self.height).then_some((x, y))
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for y in 0..self.height {
            for x in 0..self.width {
                if !self.is_blocked((x, y)) {
                    out.push((x, y));
                }
            }
        }
        out
    }

    pub fn is_free_point(&self, p: Vec2) -> bool {
        self.cell_of(p).is_some_and(|c| !self.is_blocked(c))
    }

    /// Nearest free cell center (ties: lowest row-major index).
    pub fn snap(&self, p: Vec2) -> Option<Cell> {
        let mut best: Option<(f64, Cell)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_blocked((x, y)) {
                    continue;
                }
                let d = (self.cell_center(x, y) - p).norm_squared();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, (x, y)));
                }
            }
        }
        best.map(|(_, c)| c)
    }

    /// Conservative grid traversal: false if the segment enters any blocked
    /// or out-of-grid cell, including both side cells at exact corner passes.
    pub fn segment_clear(&self, a: Vec2, b: Vec2) -> bool {
        let ga = (a - self.origin) / self.cell;
        let gb = (b - self.origin) / self.cell;
        let (mut ix, mut iy) = (ga.x.floor() as i64, ga.y.floor() as i64);
        let end = (gb.x.floor() as i64, gb.y.floor() as i64);
        let d = gb - ga;
        let step_x: i64 = if d.x > 0.0 { 1 } else { -1 };
        let step_y: i64 = if d.y > 0.0 { 1 } else { -1 };
        let t_delta_x = if d.x != 0.0 { 1.0 / d.x.abs() } else { f64::INFINITY };
        let t_delta_y = if d.y != 0.0 { 1.0 / d.y.abs() } else { f64::INFINITY };
        let mut t_max_x = if d.x > 0.0 {
            (ix as f64 + 1.0 - ga.x) / d.x
        } else if d.x < 0.0 {
            (ga.x - ix as f64) / -d.x
        } else {
            f64::INFINITY
        };
        let mut t_max_y = if d.y > 0.0 {
            (iy as f64 + 1.0 - ga.y) / d.y
        } else if d.y < 0.0 {
            (ga.y - iy as f64) / -d.y
        } else {
            f64::INFINITY
        };
        let budget = (end.0 - ix).abs() + (end.1 - iy).abs() + 4;
        for _ in 0..=budget {
            if self.blocked_signed(ix, iy) {
                return false;
            }
            if (ix, iy) == end || (t_max_x > 1.0 && t_max_y > 1.0) {
                return true;
            }
            if (t_max_x - t_max_y).abs() < 1e-9 {
                if self.blocked_signed(ix + step_x, iy) || self.blocked_signed(ix, iy + step_y) {
                    return false;
                }
                ix += step_x;
                iy += step_y;
                t_max_x += t_delta_x;
                t_max_y += t_delta_y;
            } else if t_max_x < t_max_y {
                ix += step_x;
                t_max_x += t_delta_x;
            } else {
                iy += step_y;
                t_max_y += t_delta_y;
            }
        }
        !self.blocked_signed(ix, iy)
    }
}

/// Rasterizes walk obstacles (box-inflated by the character radius) and
/// walls (inflated by the same radius) over the floor bounds.
pub fn build_grid(scene: &Scene, cell: f64) -> OccupancyGrid {
    assert!(cell > 0.0, "cell size must be positive");
    let b = scene.floor_bounds;
    let width = ((b.width() / cell) - 1e-9).ceil().max(1.0) as usize;
    let height = ((b.height() / cell) - 1e-9).ceil().max(1.0) as usize;
    let mut grid = OccupancyGrid::new(b.min, cell, width, height);

    let mark = |grid: &mut OccupancyGrid, region: Rect, test: &dyn Fn(Vec2) -> bool| {
        let lo = ((region.min - grid.origin) / cell).map(|v| v.floor().max(0.0) as usize);
        let hi = ((region.max - grid.origin) / cell).map(|v| v.ceil().max(0.0) as usize);
        for y in lo.y..hi.y.min(grid.height) {
            for x in lo.x..hi.x.min(grid.width) {
                if test(grid.cell_center(x, y)) {
                    grid.set_blocked((x, y), true);
                }
            }
        }
    };

    for obj in scene.objects.iter().filter(|o| o.has(Affordance::WalkObstacle)) {
        let inflated = obj.footprint().inflated(CHARACTER_RADIUS);
        mark(&mut grid, inflated.bounds(), &|p| inflated.contains(p));
    }
    for wall in &scene.walls {
        let r = Rect::bounding([wall.a, wall.b]);
        let region = Rect {
            min: r.min.add_scalar(-CHARACTER_RADIUS),
            max: r.max.add_scalar(CHARACTER_RADIUS),
        };
        mark(&mut grid, region, &|p| wall.distance_to(p) <= CHARACTER_RADIUS);
    }
    grid
}

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("start {0:?} is outside the grid or blocked")]
    StartBlocked(Vec2),
    #[error("goal {0:?} is unreachable")]
    Unreachable(Vec2),
    #[error("no free cell to snap {character}'s position to")]
    NoFreeCell { character: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    /// Optimal 8-connected cell path, start to goal inclusive.
    pub cells: Vec<Cell>,
    pub straight_steps: usize,
    pub diagonal_steps: usize,
    /// Shortcut-smoothed waypoints at cell centers.
    pub waypoints: Vec<Vec2>,
}

impl PlannedPath {
    pub fn raw_cost(&self) -> f64 {
        self.straight_steps as f64 + self.diagonal_steps as f64 * SQRT_2
    }
}

pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

#[derive(PartialEq)]
struct Node {
    f: f64,
    g: f64,
    idx: usize,
}

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Neighbour offsets with diagonal flag. Diagonal moves require both
/// orthogonal neighbours to be free (no corner cutting).
pub const MOVES: [(i64, i64, bool); 8] = [
    (1, 0, false),
    (-1, 0, false),
    (0, 1, false),
    (0, -1, false),
    (1, 1, true),
    (1, -1, true),
    (-1, 1, true),
    (-1, -1, true),
];

pub fn neighbours(grid: &OccupancyGrid, (x, y): Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
    MOVES.iter().filter_map(move |&(dx, dy, diag)| {
        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
        if grid.blocked_signed(nx, ny) {
            return None;
        }
        if diag && (grid.blocked_signed(x as i64 + dx, y as i64) || grid.blocked_signed(x as i64, y as i64 + dy)) {
            return None;
        }
        Some(((nx as usize, ny as usize), diag))
    })
}

pub fn astar(grid: &OccupancyGrid, start: Vec2, goal: Vec2) -> Result<PlannedPath, PathError> {
    let s = grid
        .cell_of(start)
        .filter(|c| !grid.is_blocked(*c))
        .ok_or(PathError::StartBlocked(start))?;
    let t = grid
        .cell_of(goal)
        .filter(|c| !grid.is_blocked(*c))
        .ok_or(PathError::Unreachable(goal))?;
    let cells = astar_cells(grid, s, t).ok_or(PathError::Unreachable(goal))?;

    let mut straight = 0;
    let mut diagonal = 0;
    for w in cells.windows(2) {
        if w[0].0 != w[1].0 && w[0].1 != w[1].1 {
            diagonal += 1;
        } else {
            straight += 1;
        }
    }
    let centers: Vec<Vec2> = cells.iter().map(|&(x, y)| grid.cell_center(x, y)).collect();
    Ok(PlannedPath {
        cells,
        straight_steps: straight,
        diagonal_steps: diagonal,
        waypoints: smooth(grid, &centers),
    })
}

fn astar_cells(grid: &OccupancyGrid, s: Cell, t: Cell) -> Option<Vec<Cell>> {
    let w = grid.width;
    let idx = |(x, y): Cell| y * w + x;
    let goal_center = grid.cell_center(t.0, t.1);
    let h = |c: Cell| (grid.cell_center(c.0, c.1) - goal_center).norm() / grid.cell;

    let mut g = vec![f64::INFINITY; grid.blocked.len()];
    let mut parent: Vec<usize> = vec![usize::MAX; grid.blocked.len()];
    let mut closed = vec![false; grid.blocked.len()];
    let mut open = BinaryHeap::new();
    g[idx(s)] = 0.0;
    open.push(Node {
        f: h(s),
        g: 0.0,
        idx: idx(s),
    });
    while let Some(Node { g: gc, idx: ci, .. }) = open.pop() {
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        let c = (ci % w, ci / w);
        if c == t {
            let mut path = vec![c];
            let mut cur = ci;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push((cur % w, cur / w));
            }
            path.reverse();
            return Some(path);
        }
        for (n, diag) in neighbours(grid, c) {
            let ni = idx(n);
            if closed[ni] {
                continue;
            }
            let ng = gc + if diag { SQRT_2 } else { 1.0 };
            if ng < g[ni] {
                g[ni] = ng;
                parent[ni] = ci;
                open.push(Node {
                    f: ng + h(n),
                    g: ng,
                    idx: ni,
                });
            }
        }
    }
    None
}

/// Greedy shortcutting: from each kept waypoint jump to the farthest later
/// waypoint reachable by a clear straight segment.
pub fn smooth(grid: &OccupancyGrid, points: &[Vec2]) -> Vec<Vec2> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut out = vec![points[0]];
    let mut i = 0;
    while i < points.len() - 1 {
        let mut j = points.len() - 1;
        while j > i + 1 && !grid.segment_clear(points[i], points[j]) {
            j -= 1;
        }
        out.push(points[j]);
        i = j;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub character: String,
    pub from_keyframe: usize,
    pub to_keyframe: usize,
    pub waypoints: Vec<Vec2>,
    pub segment_label: String,
}

/// One walking trajectory per moved character between two keyframes.
/// Endpoints are the optimized positions snapped to the nearest free cell.
pub fn plan_transitions(
    prev: &BTreeMap<String, Vec2>,
    next: &BTreeMap<String, Vec2>,
    diffs: &[StateChange],
    grid: &OccupancyGrid,
    from_keyframe: usize,
    to_keyframe: usize,
) -> Result<Vec<Trajectory>, PathError> {
    use rayon::prelude::*;
    let moved: Vec<&StateChange> = diffs.iter().filter(|d| d.is_moved()).collect();
    moved
        .par_iter()
        .map(|d| {
            let c = &d.character;
            let no_cell = || PathError::NoFreeCell { character: c.clone() };
            let a = prev.get(c).copied().and_then(|p| grid.snap(p)).ok_or_else(no_cell)?;
            let b = next.get(c).copied().and_then(|p| grid.snap(p)).ok_or_else(no_cell)?;
            let (pa, pb) = (grid.cell_center(a.0, a.1), grid.cell_center(b.0, b.1));
            let waypoints = if a == b {
                vec![pa]
            } else {
                astar(grid, pa, pb)?.waypoints
            };
            Ok(Trajectory {
                character: c.clone(),
                from_keyframe,
                to_keyframe,
                waypoints,
                segment_label: "walk".to_string(),
            })
        })
        .collect()
}
