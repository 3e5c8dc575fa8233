//! Deterministic software z-buffer rasterizer.
//!
//! Conventions, pinned for bit-exact tests: right-handed z-up world; camera
//! x-right, y-down, z-forward; image origin top-left; pixel centers at
//! integer + 0.5; top-left fill rule. Geometry math runs in f64, the depth
//! buffer stores f32. Exact depth ties go to the lower instance id, which
//! makes the output independent of triangle submission order and lets
//! culling be verified bit-for-bit against the unculled render.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{v3, CameraPose, Vec3};
use crate::mix64;
use crate::seed::salt;
use crate::worldgen::{Entity, World};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("point behind camera (z = {z}, near = {near})")]
    BehindCamera { z: f64, near: f64 },
}

/// Pinhole intrinsics with square pixels and the principal point centered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Near clipping plane, meters.
    pub near: f64,
}

/// Derive intrinsics from a horizontal field of view in degrees.
pub fn intrinsics_from_fov(fov_h_deg: f64, width: u32, height: u32) -> Intrinsics {
    assert!(
        fov_h_deg > 0.0 && fov_h_deg < 180.0,
        "horizontal fov must lie in (0, 180) degrees"
    );
    assert!(width >= 16 && height >= 16, "resolution must be at least 16x16");
    let fx = (width as f64 / 2.0) / (fov_h_deg.to_radians() / 2.0).tan();
    Intrinsics {
        fx,
        fy: fx,
        cx: width as f64 / 2.0,
        cy: height as f64 / 2.0,
        width,
        height,
        near: 0.5,
    }
}

/// Project a camera-space point to pixel coordinates.
pub fn project_point(k: &Intrinsics, p: Vec3) -> Result<(f64, f64), RenderError> {
    if p.z < k.near {
        return Err(RenderError::BehindCamera { z: p.z, near: k.near });
    }
    Ok((k.cx + k.fx * p.x / p.z, k.cy + k.fy * p.y / p.z))
}

/// Invert [`project_point`] at a known depth.
pub fn unproject(k: &Intrinsics, u: f64, v: f64, z: f64) -> Vec3 {
    v3((u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Sunny,
    Cloudy,
    Rainy,
    Foggy,
}

impl std::str::FromStr for Weather {
    type Err = String;
    fn from_str(s: &str) -> Result<Weather, String> {
        match s.to_ascii_lowercase().as_str() {
            "sunny" => Ok(Weather::Sunny),
            "cloudy" => Ok(Weather::Cloudy),
            "rainy" => Ok(Weather::Rainy),
            "foggy" => Ok(Weather::Foggy),
            other => Err(format!("unknown weather '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub weather: Weather,
    /// Hours in [0, 24).
    pub time_of_day: f64,
    /// Exponential fog density, 1/meters.
    pub fog_beta: f64,
    pub draw_distance: f64,
    pub culling: bool,
    pub lod_enabled: bool,
    /// (d1, d2): full detail below d1, coarse boxes beyond d2.
    pub lod_distances: (f64, f64),
}

impl RenderSettings {
    /// Ground-truth defaults: noon sun, culling on, LOD off.
    pub fn for_distance(draw_distance: f64) -> RenderSettings {
        RenderSettings {
            weather: Weather::Sunny,
            time_of_day: 12.0,
            fog_beta: 0.008,
            draw_distance,
            culling: true,
            lod_enabled: false,
            lod_distances: (50.0, 120.0),
        }
    }
}

/// Background color where no geometry lands.
pub const SKY_COLOR: [u8; 3] = [140, 170, 205];
const FOG_GRAY: [u8; 3] = [180, 180, 180];

/// Per-frame output: color plus the three ground-truth channels.
///
/// `instance` is 0 at background pixels, exactly where `depth` is infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBuffers {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB, 3 bytes per pixel.
    pub rgb: Vec<u8>,
    /// Camera-space z in meters; +inf where nothing was hit.
    pub depth: Vec<f32>,
    pub instance: Vec<u32>,
    pub class: Vec<u16>,
}

impl FrameBuffers {
    pub fn new(width: u32, height: u32) -> FrameBuffers {
        let n = width as usize * height as usize;
        let mut rgb = Vec::with_capacity(3 * n);
        for _ in 0..n {
            rgb.extend_from_slice(&SKY_COLOR);
        }
        FrameBuffers {
            width,
            height,
            rgb,
            depth: vec![f32::INFINITY; n],
            instance: vec![0; n],
            class: vec![0; n],
        }
    }

    #[inline]
    pub fn idx(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }
}

/// Unit vector toward the sun. Elevation follows 90 deg * sin(pi*(t-6)/12)
/// over the day, zero outside [6, 18]; azimuth sweeps east (+x) to west
/// (-x) linearly, passing south of zenith.
pub fn sun_direction(time_of_day: f64) -> Vec3 {
    let t = time_of_day.clamp(6.0, 18.0);
    let phase = std::f64::consts::PI * (t - 6.0) / 12.0;
    let elevation = (90.0_f64.to_radians() * phase.sin()).max(0.0);
    let azimuth = phase;
    v3(
        elevation.cos() * azimuth.cos(),
        -elevation.cos() * azimuth.sin(),
        elevation.sin(),
    )
}

/// Flat Lambert with an ambient floor: base * (0.3 + 0.7 * max(0, n.l)).
pub fn shade(_class: crate::worldgen::ClassId, normal: Vec3, sun: Vec3, base: [u8; 3]) -> [u8; 3] {
    let f = 0.3 + 0.7 * normal.dot(sun).max(0.0);
    let scale = |c: u8| ((c as f64 * f).round().clamp(0.0, 255.0)) as u8;
    [scale(base[0]), scale(base[1]), scale(base[2])]
}

/// Detail level by distance: 0 below d1, 1 in [d1, d2), 2 beyond. Level 2
/// swaps vehicle meshes for their bounding boxes.
pub fn select_lod(distance: f64, lod_distances: (f64, f64)) -> u8 {
    debug_assert!(lod_distances.0 < lod_distances.1);
    if distance < lod_distances.0 {
        0
    } else if distance < lod_distances.1 {
        1
    } else {
        2
    }
}

/// Camera transform cached as (sin, cos, position); see `CameraPose`.
struct CamXf {
    s: f64,
    c: f64,
    pos: Vec3,
}

impl CamXf {
    fn new(camera: &CameraPose) -> CamXf {
        let (s, c) = camera.yaw.sin_cos();
        CamXf { s, c, pos: camera.position }
    }

    #[inline]
    fn to_camera(&self, p: Vec3) -> Vec3 {
        let d = p - self.pos;
        v3(
            self.s * d.x - self.c * d.y,
            -d.z,
            self.c * d.x + self.s * d.y,
        )
    }
}

/// Entities whose bounding spheres intersect the view frustum and the
/// draw-distance slab. The far test uses camera-space z, the same quantity
/// the per-fragment test uses, so culling is exactly output-preserving.
pub fn frustum_cull<'a>(
    world: &'a World,
    camera: &CameraPose,
    k: &Intrinsics,
    draw_distance: f64,
) -> Vec<&'a Entity> {
    cull_entities(world.entities.iter(), camera, k, draw_distance)
}

fn cull_entities<'a, I>(
    entities: I,
    camera: &CameraPose,
    k: &Intrinsics,
    draw_distance: f64,
) -> Vec<&'a Entity>
where
    I: IntoIterator<Item = &'a Entity>,
{
    let xf = CamXf::new(camera);
    let tan_x = (k.width as f64 / 2.0) / k.fx;
    let tan_y = (k.height as f64 / 2.0) / k.fy;
    let inv_len_x = 1.0 / (1.0 + tan_x * tan_x).sqrt();
    let inv_len_y = 1.0 / (1.0 + tan_y * tan_y).sqrt();
    entities
        .into_iter()
        .filter(|e| {
            let center = e.pose.transform(e.mesh.bound_center);
            let c = xf.to_camera(center);
            let r = e.mesh.bound_radius;
            if c.z + r < k.near || c.z - r > draw_distance {
                return false;
            }
            // Side planes pass through the camera origin.
            let lx = (c.x + tan_x * c.z) * inv_len_x; // left
            let rx = (tan_x * c.z - c.x) * inv_len_x; // right
            let ty = (c.y + tan_y * c.z) * inv_len_y; // top
            let by = (tan_y * c.z - c.y) * inv_len_y; // bottom
            lx >= -r && rx >= -r && ty >= -r && by >= -r
        })
        .collect()
}

/// Render the whole world.
pub fn rasterize(
    world: &World,
    camera: &CameraPose,
    k: &Intrinsics,
    settings: &RenderSettings,
) -> FrameBuffers {
    rasterize_entities(world.entities.iter(), camera, k, settings)
}

/// Render an explicit entity subset; the solo pass of the occlusion-rate
/// computation uses this with a single entity.
pub fn rasterize_entities<'a, I>(
    entities: I,
    camera: &CameraPose,
    k: &Intrinsics,
    settings: &RenderSettings,
) -> FrameBuffers
where
    I: IntoIterator<Item = &'a Entity>,
{
    let mut bufs = FrameBuffers::new(k.width, k.height);
    let xf = CamXf::new(camera);
    let sun = sun_direction(settings.time_of_day);
    let flat = settings.weather == Weather::Cloudy;

    let subset: Vec<&Entity> = if settings.culling {
        cull_entities(entities, camera, k, settings.draw_distance)
    } else {
        entities.into_iter().collect()
    };

    let mut world_verts: Vec<Vec3> = Vec::new();
    let mut cam_verts: Vec<Vec3> = Vec::new();
    for entity in subset {
        let mesh = if settings.lod_enabled {
            let center = entity.pose.transform(entity.mesh.bound_center);
            let distance = (center - camera.position).norm();
            match (select_lod(distance, settings.lod_distances), &entity.coarse) {
                (2, Some(coarse)) => &**coarse,
                _ => &*entity.mesh,
            }
        } else {
            &*entity.mesh
        };

        let (ps, pc) = entity.pose.yaw.sin_cos();
        let pp = entity.pose.position;
        world_verts.clear();
        cam_verts.clear();
        world_verts.reserve(mesh.vertices.len());
        cam_verts.reserve(mesh.vertices.len());
        for v in &mesh.vertices {
            let w = v3(pc * v.x - ps * v.y + pp.x, ps * v.x + pc * v.y + pp.y, v.z + pp.z);
            world_verts.push(w);
            cam_verts.push(xf.to_camera(w));
        }

        for tri in &mesh.triangles {
            let [ia, ib, ic] = [tri[0] as usize, tri[1] as usize, tri[2] as usize];
            let (a, b, c) = (cam_verts[ia], cam_verts[ib], cam_verts[ic]);

            // Backface: plane offset n.a keeps its sign at every ray hit.
            let n_cam = (b - a).cross(c - a);
            if n_cam.dot(a) >= 0.0 {
                continue;
            }
            if a.z < k.near && b.z < k.near && c.z < k.near {
                continue;
            }

            let color = if flat {
                entity.color
            } else {
                let (wa, wb, wc) = (world_verts[ia], world_verts[ib], world_verts[ic]);
                let n_world = (wb - wa).cross(wc - wa).normalized();
                shade(entity.class, n_world, sun, entity.color)
            };

            let mut poly = [Vec3::default(); 4];
            let count = clip_near(a, b, c, k.near, &mut poly);
            for f in 1..count.saturating_sub(1) {
                fill_triangle(
                    &mut bufs,
                    k,
                    settings.draw_distance,
                    [poly[0], poly[f], poly[f + 1]],
                    entity.id,
                    entity.class.code(),
                    color,
                );
            }
        }
    }
    bufs
}

/// Sutherland-Hodgman against z = near; a clipped triangle yields at most 4
/// vertices. Returns the vertex count written into `out`.
fn clip_near(a: Vec3, b: Vec3, c: Vec3, near: f64, out: &mut [Vec3; 4]) -> usize {
    let input = [a, b, c];
    let mut n = 0;
    for i in 0..3 {
        let cur = input[i];
        let next = input[(i + 1) % 3];
        let cur_in = cur.z >= near;
        let next_in = next.z >= near;
        if cur_in {
            out[n] = cur;
            n += 1;
        }
        if cur_in != next_in {
            let t = (near - cur.z) / (next.z - cur.z);
            out[n] = cur + (next - cur) * t;
            out[n].z = near; // exact, guards the projection precondition
            n += 1;
        }
    }
    n
}

/// Top-left rule: a boundary pixel belongs to the triangle iff it lies on a
/// "top" edge (horizontal, pointing +x) or a "left" edge (pointing up, i.e.
/// decreasing y in image coordinates).
#[inline]
fn is_top_left(dx: f64, dy: f64) -> bool {
    dy < 0.0 || (dy == 0.0 && dx > 0.0)
}

#[allow(clippy::too_many_arguments)]
fn fill_triangle(
    bufs: &mut FrameBuffers,
    k: &Intrinsics,
    draw_distance: f64,
    tri: [Vec3; 3],
    id: u32,
    class_code: u16,
    color: [u8; 3],
) {
    // All vertices are at z >= near here.
    let project = |p: Vec3| (k.cx + k.fx * p.x / p.z, k.cy + k.fy * p.y / p.z, p.z);
    let p0 = project(tri[0]);
    let mut p1 = project(tri[1]);
    let mut p2 = project(tri[2]);

    let area2 = (p1.0 - p0.0) * (p2.1 - p0.1) - (p1.1 - p0.1) * (p2.0 - p0.0);
    if area2 == 0.0 {
        return;
    }
    if area2 < 0.0 {
        std::mem::swap(&mut p1, &mut p2);
    }
    let area2 = area2.abs();

    let min_u = p0.0.min(p1.0).min(p2.0);
    let max_u = p0.0.max(p1.0).max(p2.0);
    let min_v = p0.1.min(p1.1).min(p2.1);
    let max_v = p0.1.max(p1.1).max(p2.1);
    let x0 = ((min_u - 0.5).floor().max(0.0)) as i64;
    let x1 = ((max_u - 0.5).ceil().min(k.width as f64 - 1.0)) as i64;
    let y0 = ((min_v - 0.5).floor().max(0.0)) as i64;
    let y1 = ((max_v - 0.5).ceil().min(k.height as f64 - 1.0)) as i64;
    if x0 > x1 || y0 > y1 || max_u < 0.0 || max_v < 0.0 {
        return;
    }

    // Edge functions opposite each vertex: e[i] / area2 is barycentric i.
    // edges[0]: p1->p2, edges[1]: p2->p0, edges[2]: p0->p1. Each edge is
    // evaluated from lexicographically ordered endpoints so the triangles on
    // both sides of a shared edge compute bit-identical magnitudes; with the
    // top-left rule deciding exact zeros, seams are watertight even when a
    // pixel center lies exactly on the shared line.
    struct Edge {
        dx: f64,
        dy: f64,
        ox: f64,
        oy: f64,
        sign: f64,
        accept_zero: bool,
    }
    let edge = |pa: (f64, f64, f64), pb: (f64, f64, f64)| {
        let accept_zero = is_top_left(pb.0 - pa.0, pb.1 - pa.1);
        let ((ca, cb), sign) = if (pa.0, pa.1) <= (pb.0, pb.1) {
            ((pa, pb), 1.0)
        } else {
            ((pb, pa), -1.0)
        };
        Edge {
            dx: cb.0 - ca.0,
            dy: cb.1 - ca.1,
            ox: ca.0,
            oy: ca.1,
            sign,
            accept_zero,
        }
    };
    let edges = [edge(p1, p2), edge(p2, p0), edge(p0, p1)];
    let inv_z = [1.0 / p0.2, 1.0 / p1.2, 1.0 / p2.2];
    let const_z = if p0.2 == p1.2 && p1.2 == p2.2 { Some(p0.2) } else { None };

    for y in y0..=y1 {
        let sy = y as f64 + 0.5;
        let row = y as usize * k.width as usize;
        for x in x0..=x1 {
            let sx = x as f64 + 0.5;
            let mut e = [0.0f64; 3];
            for (i, ed) in edges.iter().enumerate() {
                e[i] = ed.sign * (ed.dx * (sy - ed.oy) - ed.dy * (sx - ed.ox));
            }
            let inside =
                (0..3).all(|i| e[i] > 0.0 || (e[i] == 0.0 && edges[i].accept_zero));
            if inside {
                let z = match const_z {
                    Some(z) => z,
                    None => area2 / (e[0] * inv_z[0] + e[1] * inv_z[1] + e[2] * inv_z[2]),
                };
                if z <= draw_distance {
                    let zf = z as f32;
                    let idx = row + x as usize;
                    let better = zf < bufs.depth[idx]
                        || (zf == bufs.depth[idx] && id < bufs.instance[idx]);
                    if better {
                        bufs.depth[idx] = zf;
                        bufs.instance[idx] = id;
                        bufs.class[idx] = class_code;
                        bufs.rgb[3 * idx] = color[0];
                        bufs.rgb[3 * idx + 1] = color[1];
                        bufs.rgb[3 * idx + 2] = color[2];
                    }
                }
            }
        }
    }
}

/// Post-process color by weather. Depth, instance, and class buffers are
/// never touched: ground truth is weather-invariant by construction.
/// `frame_seed` drives the rain streak pattern.
pub fn apply_weather(bufs: &mut FrameBuffers, settings: &RenderSettings, frame_seed: u64) {
    match settings.weather {
        Weather::Sunny => {}
        Weather::Cloudy => scale_rgb(bufs, 0.7),
        Weather::Rainy => {
            rain_streaks(bufs, frame_seed);
            scale_rgb(bufs, 0.8);
        }
        Weather::Foggy => {
            let n = bufs.width as usize * bufs.height as usize;
            for i in 0..n {
                let d = bufs.depth[i];
                let d = if d.is_finite() { d as f64 } else { settings.draw_distance };
                let f = 1.0 - (-settings.fog_beta * d).exp();
                for ch in 0..3 {
                    let c = bufs.rgb[3 * i + ch] as f64;
                    bufs.rgb[3 * i + ch] =
                        (c + (FOG_GRAY[ch] as f64 - c) * f).round().clamp(0.0, 255.0) as u8;
                }
            }
        }
    }
}

fn scale_rgb(bufs: &mut FrameBuffers, factor: f64) {
    for c in &mut bufs.rgb {
        *c = ((*c as f64) * factor).round().clamp(0.0, 255.0) as u8;
    }
}

fn rain_streaks(bufs: &mut FrameBuffers, frame_seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(frame_seed ^ salt::RAIN));
    let w = bufs.width;
    let h = bufs.height;
    let count = (w as usize * h as usize) / 1200;
    for _ in 0..count {
        let x = rng.random_range(0..w);
        let y0 = rng.random_range(0..h);
        let len = rng.random_range(8..=24);
        for y in y0..(y0 + len).min(h) {
            let i = bufs.idx(x, y);
            for (ch, tint) in [(0usize, 205u8), (1, 215), (2, 225)] {
                let c = bufs.rgb[3 * i + ch] as u16;
                bufs.rgb[3 * i + ch] = ((c + tint as u16) / 2) as u8;
            }
        }
    }
}
