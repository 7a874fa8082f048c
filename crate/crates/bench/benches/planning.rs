use std::collections::BTreeSet;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use scenact_bench::{apartment, random_grid};
use scenact_core::views::{augment_connectivity, greedy_cover, sample_candidate_views};
use scenact_core::{astar, build_grid, Vec2, ViewConfig};

fn paths(c: &mut Criterion) {
    let scene = apartment();
    let grid = build_grid(&scene, 0.1);
    c.bench_function("astar_apartment_kitchen_to_bedroom", |b| {
        b.iter(|| astar(&grid, black_box(Vec2::new(1.0, 6.5)), black_box(Vec2::new(10.8, 3.6))).unwrap())
    });
    let grids: Vec<_> = (0..16).map(|s| random_grid(64, 0.3, s)).collect();
    c.bench_function("astar_random_64x64", |b| {
        b.iter(|| {
            for g in &grids {
                let _ = black_box(astar(g, Vec2::new(0.5, 0.5), Vec2::new(63.5, 63.5)));
            }
        })
    });
}

fn views(c: &mut Criterion) {
    let scene = apartment();
    let cfg = ViewConfig::default();
    let candidates = sample_candidate_views(&scene, cfg.candidates, 7, &cfg).unwrap();
    let universe: BTreeSet<u32> = candidates.iter().flat_map(|v| v.surviving_marks.iter().copied()).collect();
    c.bench_function("greedy_cover_200_candidates", |b| b.iter(|| greedy_cover(black_box(&candidates), &universe).unwrap()));
    let cover = greedy_cover(&candidates, &universe).unwrap();
    c.bench_function("augment_connectivity", |b| b.iter(|| augment_connectivity(black_box(&cover), &candidates)));
    c.bench_function("sample_candidate_views_200", |b| b.iter(|| sample_candidate_views(&scene, 200, black_box(7), &cfg).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = paths, views
}
criterion_main!(benches);
