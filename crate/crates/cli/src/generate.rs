//! Dataset generation: drive the scripted world through a frame budget and
//! write every per-frame channel plus ImageSets and a run manifest.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Value};

use synthdrive_core::dataset::{
    record_from_observations, write_frame_outputs, FramePaths, SPLIT_DIR,
};
use synthdrive_core::groundtruth::{annotate_frame, compute_flow, ClassThresholds, FlowField};
use synthdrive_core::mapio::{load_layout, Layout};
use synthdrive_core::render::{
    apply_weather, intrinsics_from_fov, rasterize, Intrinsics, RenderSettings, Weather,
};
use synthdrive_core::worldgen::{synthetic_layout, Scenario, ScenarioPreset, World};
use synthdrive_core::{frame_seed, mix64, DEFAULT_SEED};

use crate::CliError;

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub out: PathBuf,
    pub preset: String,
    /// OSM XML or layout JSON; the built-in grid city when absent.
    pub map: Option<PathBuf>,
    pub frames: u64,
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub fov_h: f64,
    pub weather: Weather,
    pub time_of_day: f64,
    pub fog_beta: f64,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
}

impl Default for GenerateConfig {
    fn default() -> GenerateConfig {
        GenerateConfig {
            out: PathBuf::from("dataset"),
            preset: "pe01".into(),
            map: None,
            frames: 50,
            seed: DEFAULT_SEED,
            width: 640,
            height: 480,
            fov_h: 60.0,
            weather: Weather::Sunny,
            time_of_day: 12.0,
            fog_beta: 0.008,
            jobs: 0,
        }
    }
}

fn validate(cfg: &GenerateConfig) -> Result<ScenarioPreset, CliError> {
    let preset = ScenarioPreset::by_name(&cfg.preset).ok_or_else(|| {
        CliError::Config(format!("unknown preset '{}': expected pe01, pe02, or pe03", cfg.preset))
    })?;
    if cfg.frames == 0 {
        return Err(CliError::Config("frame count must be at least 1".into()));
    }
    if cfg.width < 16 || cfg.height < 16 {
        return Err(CliError::Config("resolution must be at least 16x16".into()));
    }
    if !(cfg.fov_h > 0.0 && cfg.fov_h < 180.0) {
        return Err(CliError::Config(format!(
            "field of view must lie in (0, 180) degrees, got {}",
            cfg.fov_h
        )));
    }
    if !(0.0..24.0).contains(&cfg.time_of_day) {
        return Err(CliError::Config(format!(
            "time of day must lie in [0, 24) hours, got {}",
            cfg.time_of_day
        )));
    }
    if !(cfg.fog_beta >= 0.0 && cfg.fog_beta.is_finite()) {
        return Err(CliError::Config(format!("fog density must be finite and >= 0, got {}", cfg.fog_beta)));
    }
    Ok(preset)
}

fn run_in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Ids and annotation count of every image one frame produced.
struct FrameOutput {
    ids: Vec<String>,
    objects: usize,
}

fn render_frame(
    t: usize,
    worlds: &[World],
    k: &Intrinsics,
    settings: &RenderSettings,
    cfg: &GenerateConfig,
    label: &str,
) -> Result<FrameOutput, CliError> {
    let world = &worlds[t];
    let thresholds = ClassThresholds::default();
    let mut out = FrameOutput { ids: Vec::new(), objects: 0 };
    for cam in 0..world.rig.yaw_offsets.len() {
        let camera = world.camera_pose(cam);
        let mut bufs = rasterize(world, &camera, k, settings);
        let observations = annotate_frame(world, &camera, k, settings, &bufs, &thresholds);
        let flow = if t == 0 {
            FlowField::invalid(k.width, k.height)
        } else {
            let prev = &worlds[t - 1];
            compute_flow(world, prev, &camera, &prev.camera_pose(cam), k, &bufs)
        };
        // Weather only restyles RGB, so annotation and flow read the clean buffers.
        apply_weather(&mut bufs, settings, mix64(frame_seed(cfg.seed, t as u64) ^ cam as u64));

        let id = format!("{label}_{t:06}_cam{cam}");
        let record = record_from_observations(&id, k.width, k.height, &observations);
        write_frame_outputs(&bufs, &flow, &record, &FramePaths::new(&cfg.out, &id))?;
        out.objects += record.objects.len();
        out.ids.push(id);
    }
    Ok(out)
}

/// Generate a full dataset tree under `cfg.out` and return the manifest that
/// was also written to `manifest.json`.
pub fn run_generate(cfg: &GenerateConfig) -> Result<Value, CliError> {
    let preset = validate(cfg)?;
    let label = preset.name.to_ascii_lowercase();

    let layout: Layout = match &cfg.map {
        Some(path) => load_layout(path)?,
        None => synthetic_layout(cfg.seed),
    };

    let mut scenario = Scenario::from_preset(preset);
    scenario.width = cfg.width;
    scenario.height = cfg.height;
    scenario.fov_h = cfg.fov_h;

    let first = World::build(&layout, &scenario, cfg.seed)?;
    let world_summary = first.manifest();
    let k = intrinsics_from_fov(cfg.fov_h, cfg.width, cfg.height);
    let settings = RenderSettings {
        weather: cfg.weather,
        time_of_day: cfg.time_of_day,
        fog_beta: cfg.fog_beta,
        draw_distance: scenario.preset.draw_distance,
        culling: true,
        lod_enabled: false,
        lod_distances: (50.0, 120.0),
    };

    let mut worlds = Vec::with_capacity(cfg.frames as usize);
    worlds.push(first);
    for _ in 1..cfg.frames {
        let next = worlds.last().expect("nonempty").step(scenario.dt);
        worlds.push(next);
    }

    let start = Instant::now();
    let frames: Vec<FrameOutput> = run_in_pool(cfg.jobs, || {
        (0..worlds.len())
            .into_par_iter()
            .map(|t| render_frame(t, &worlds, &k, &settings, cfg, &label))
            .collect::<Result<Vec<_>, CliError>>()
    })??;
    let seconds = start.elapsed().as_secs_f64();

    let mut ids: Vec<String> = frames.iter().flat_map(|f| f.ids.iter().cloned()).collect();
    ids.sort();
    let object_count: usize = frames.iter().map(|f| f.objects).sum();
    let image_count = ids.len();

    let split_dir = cfg.out.join(SPLIT_DIR);
    std::fs::create_dir_all(&split_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", split_dir.display())))?;
    let mut all = String::new();
    for id in &ids {
        all.push_str(id);
        all.push('\n');
    }
    let all_path = split_dir.join("all.txt");
    std::fs::write(&all_path, all)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", all_path.display())))?;

    let fps = if seconds > 0.0 { image_count as f64 / seconds } else { 0.0 };
    let manifest = json!({
        "provenance": label,
        "preset": label,
        "seed": cfg.seed,
        "frame_count": cfg.frames,
        "camera_count": worlds[0].rig.yaw_offsets.len(),
        "image_count": image_count,
        "object_count": object_count,
        "world": world_summary,
        "config": {
            "map": cfg.map.as_ref().map(|p| p.display().to_string()),
            "width": cfg.width,
            "height": cfg.height,
            "fov_h": cfg.fov_h,
            "weather": cfg.weather,
            "time_of_day": cfg.time_of_day,
            "fog_beta": cfg.fog_beta,
            "draw_distance": scenario.preset.draw_distance,
            "dt": scenario.dt,
        },
        // Run metadata, not content: excluded from determinism comparisons.
        "timing": {
            "seconds": seconds,
            "frames_per_second": fps,
            "jobs": cfg.jobs,
        },
    });
    let mpath = cfg.out.join("manifest.json");
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest).expect("serializable"))
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", mpath.display())))?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub width: u32,
    pub height: u32,
    pub frames: u64,
    pub seed: u64,
    pub preset: String,
}

impl Default for BenchConfig {
    fn default() -> BenchConfig {
        BenchConfig {
            width: 640,
            height: 480,
            frames: 30,
            seed: DEFAULT_SEED,
            preset: "pe03".into(),
        }
    }
}

/// Render-throughput report on the built-in city: frames rendered through a
/// stepping world with culling on, LOD off.
pub fn run_bench(cfg: &BenchConfig) -> Result<Value, CliError> {
    let preset = ScenarioPreset::by_name(&cfg.preset).ok_or_else(|| {
        CliError::Config(format!("unknown preset '{}': expected pe01, pe02, or pe03", cfg.preset))
    })?;
    if cfg.frames == 0 {
        return Err(CliError::Config("frame count must be at least 1".into()));
    }
    if cfg.width < 16 || cfg.height < 16 {
        return Err(CliError::Config("resolution must be at least 16x16".into()));
    }

    let label = preset.name.to_ascii_lowercase();
    let layout = synthetic_layout(cfg.seed);
    let mut scenario = Scenario::from_preset(preset);
    scenario.width = cfg.width;
    scenario.height = cfg.height;
    let mut world = World::build(&layout, &scenario, cfg.seed)?;
    let entity_count = world.entities.len();
    let k = intrinsics_from_fov(scenario.fov_h, cfg.width, cfg.height);
    let settings = RenderSettings::for_distance(scenario.preset.draw_distance);

    for _ in 0..2 {
        std::hint::black_box(rasterize(&world, &world.camera_pose(0), &k, &settings));
    }
    let start = Instant::now();
    for _ in 0..cfg.frames {
        let camera = world.camera_pose(0);
        std::hint::black_box(rasterize(&world, &camera, &k, &settings));
        world = world.step(scenario.dt);
    }
    let seconds = start.elapsed().as_secs_f64();
    let fps = if seconds > 0.0 { cfg.frames as f64 / seconds } else { 0.0 };

    Ok(json!({
        "preset": label,
        "width": cfg.width,
        "height": cfg.height,
        "frames": cfg.frames,
        "entity_count": entity_count,
        "culling": true,
        "lod": false,
        "seconds": seconds,
        "frames_per_second": fps,
    }))
}
