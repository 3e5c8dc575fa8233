//! Render throughput on the built-in city at capture resolution, with and
//! without frustum culling, plus the downstream annotation pass.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use synthdrive_core::groundtruth::{annotate_frame, ClassThresholds};
use synthdrive_core::render::{intrinsics_from_fov, rasterize, RenderSettings};
use synthdrive_core::worldgen::{synthetic_layout, Scenario, ScenarioPreset, World};
use synthdrive_core::DEFAULT_SEED;

fn dense_world(width: u32, height: u32) -> (World, Scenario) {
    let layout = synthetic_layout(DEFAULT_SEED);
    let mut scenario = Scenario::from_preset(ScenarioPreset::pe03());
    scenario.width = width;
    scenario.height = height;
    let world = World::build(&layout, &scenario, DEFAULT_SEED).expect("buildable layout");
    (world, scenario)
}

fn bench_rasterize(c: &mut Criterion) {
    let (world, scenario) = dense_world(640, 480);
    let k = intrinsics_from_fov(scenario.fov_h, 640, 480);
    let camera = world.camera_pose(0);
    assert!(world.entities.len() >= 200);

    let mut group = c.benchmark_group("rasterize_640x480");
    group.sample_size(20);
    let culled = RenderSettings::for_distance(scenario.preset.draw_distance);
    group.bench_function("culled", |b| {
        b.iter(|| black_box(rasterize(&world, &camera, &k, &culled)))
    });
    let mut unculled = culled.clone();
    unculled.culling = false;
    group.bench_function("unculled", |b| {
        b.iter(|| black_box(rasterize(&world, &camera, &k, &unculled)))
    });
    group.finish();
}

fn bench_step(c: &mut Criterion) {
    let (world, scenario) = dense_world(640, 480);
    c.bench_function("world_step", |b| b.iter(|| black_box(world.step(scenario.dt))));
}

fn bench_annotate(c: &mut Criterion) {
    let (world, scenario) = dense_world(320, 240);
    let k = intrinsics_from_fov(scenario.fov_h, 320, 240);
    let camera = world.camera_pose(0);
    let settings = RenderSettings::for_distance(scenario.preset.draw_distance);
    let bufs = rasterize(&world, &camera, &k, &settings);
    let thresholds = ClassThresholds::default();
    let mut group = c.benchmark_group("annotate_320x240");
    group.sample_size(10);
    group.bench_function("frame", |b| {
        b.iter(|| black_box(annotate_frame(&world, &camera, &k, &settings, &bufs, &thresholds)))
    });
    group.finish();
}

criterion_group!(benches, bench_rasterize, bench_step, bench_annotate);
criterion_main!(benches);
