//! Scene areas: distance/visibility clustering of objects, the area graph and
//! its minimum-spanning-tree completion.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsu::DisjointSets;
use crate::geom::{Segment, Vec2};
use crate::scene::{Scene, SceneObject};

pub const DEFAULT_D_MAX: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub id: usize,
    pub object_ids: BTreeSet<u32>,
    pub centroid: Vec2,
}

impl Area {
    pub fn name(&self) -> String {
        format!("area_{}", self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeProvenance {
    MllmReasoned,
    MstFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaEdge {
    pub a: usize,
    pub b: usize,
    pub provenance: EdgeProvenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaSceneGraph {
    pub areas: Vec<Area>,
    /// Sorted by `(a, b)` with `a < b`.
    pub edges: Vec<AreaEdge>,
}

impl AreaSceneGraph {
    /// Builds a graph from reasoned edges and completes it with MST edges.
    pub fn complete(areas: Vec<Area>, reasoned: &BTreeSet<(usize, usize)>) -> Self {
        let fallback = mst_fallback_edges(&areas, reasoned);
        let mut edges: BTreeMap<(usize, usize), EdgeProvenance> = reasoned
            .iter()
            .map(|&p| (p, EdgeProvenance::MllmReasoned))
            .collect();
        for p in fallback {
            edges.entry(p).or_insert(EdgeProvenance::MstFallback);
        }
        AreaSceneGraph {
            areas,
            edges: edges
                .into_iter()
                .map(|((a, b), provenance)| AreaEdge { a, b, provenance })
                .collect(),
        }
    }

    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges.iter().map(|e| (e.a, e.b)).collect()
    }

    pub fn neighbours(&self, id: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.a == id {
                    Some(e.b)
                } else if e.b == id {
                    Some(e.a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        component_count(self.areas.len(), &self.edge_set()) <= 1
    }

    pub fn area_of(&self, object_id: u32) -> Option<usize> {
        self.areas
            .iter()
            .find(|a| a.object_ids.contains(&object_id))
            .map(|a| a.id)
    }

    /// The graph in the prompt's area JSON shape with an `"adjacent"` list.
    pub fn to_prompt_json(&self, scene: &Scene) -> String {
        render_area_json(&self.areas, scene, Some(self))
    }
}

pub(crate) fn component_count(n: usize, edges: &BTreeSet<(usize, usize)>) -> usize {
    let mut d = DisjointSets::new(n);
    for &(a, b) in edges {
        d.union(a, b);
    }
    d.components().len()
}

fn center(o: &SceneObject) -> Vec2 {
    Vec2::new(o.position.x, o.position.y)
}

/// True iff the segment between the two footprint centers crosses no wall.
pub fn pairwise_visible(scene: &Scene, a: &SceneObject, b: &SceneObject) -> bool {
    scene.wall_free(&Segment::new(center(a), center(b)))
}

/// Connected components of the "near and mutually visible" object graph.
pub fn cluster_areas(scene: &Scene, d_max: f64) -> Vec<Area> {
    let objs = &scene.objects;
    let mut d = DisjointSets::new(objs.len());
    for i in 0..objs.len() {
        for j in (i + 1)..objs.len() {
            let dist = (center(&objs[i]) - center(&objs[j])).norm();
            if dist <= d_max && pairwise_visible(scene, &objs[i], &objs[j]) {
                d.union(i, j);
            }
        }
    }
    let mut groups: Vec<BTreeSet<u32>> = d
        .components()
        .into_iter()
        .map(|c| c.into_iter().map(|i| objs[i].id).collect())
        .collect();
    groups.sort_by_key(|g| *g.iter().next().expect("components are non-empty"));
    groups
        .into_iter()
        .enumerate()
        .map(|(id, object_ids)| {
            let sum = object_ids
                .iter()
                .map(|oid| center(scene.object(*oid).expect("member exists")))
                .fold(Vec2::zeros(), |acc, c| acc + c);
            let centroid = sum / object_ids.len() as f64;
            Area {
                id,
                object_ids,
                centroid,
            }
        })
        .collect()
}

/// Minimum additional edges (centroid distance weights) connecting every
/// component of `(areas, existing)`. Pairs are `(min, max)`; ties resolve to
/// the lexicographically smaller pair.
pub fn mst_fallback_edges(
    areas: &[Area],
    existing: &BTreeSet<(usize, usize)>,
) -> BTreeSet<(usize, usize)> {
    let index: BTreeMap<usize, usize> = areas.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
    let mut d = DisjointSets::new(areas.len());
    for &(a, b) in existing {
        if let (Some(&ia), Some(&ib)) = (index.get(&a), index.get(&b)) {
            d.union(ia, ib);
        }
    }
    let mut pairs = Vec::new();
    for i in 0..areas.len() {
        for j in (i + 1)..areas.len() {
            let (a, b) = (areas[i].id.min(areas[j].id), areas[i].id.max(areas[j].id));
            let w = (areas[i].centroid - areas[j].centroid).norm();
            pairs.push((w, a, b, i, j));
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    let mut out = BTreeSet::new();
    for (_, a, b, i, j) in pairs {
        if d.union(i, j) {
            out.insert((a, b));
        }
    }
    out
}

fn quoted_list(items: impl IntoIterator<Item = String>) -> String {
    let v: Vec<String> = items
        .into_iter()
        .map(|s| serde_json::to_string(&s).expect("string serialization"))
        .collect();
    format!("[{}]", v.join(", "))
}

fn render_area_json(areas: &[Area], scene: &Scene, graph: Option<&AreaSceneGraph>) -> String {
    let body: Vec<String> = areas
        .iter()
        .map(|a| {
            let objects = quoted_list(a.object_ids.iter().map(|id| {
                scene
                    .object(*id)
                    .map(SceneObject::mark_name)
                    .unwrap_or_else(|| format!("object_{id}"))
            }));
            match graph {
                None => format!("\"{}\" : {{\"objects\": {}}}", a.name(), objects),
                Some(g) => {
                    let adj = quoted_list(g.neighbours(a.id).into_iter().map(|n| format!("area_{n}")));
                    format!(
                        "\"{}\" : {{\"objects\": {}, \"adjacent\": {}}}",
                        a.name(),
                        objects,
                        adj
                    )
                }
            }
        })
        .collect();
    format!("{{{}}}", body.join(", "))
}

/// Area descriptions in the shape the language model receives, e.g.
/// `{"area_0" : {"objects": ["object_0-sink", ...]}, ...}`.
pub fn area_descriptions_json(areas: &[Area], scene: &Scene) -> String {
    render_area_json(areas, scene, None)
}
