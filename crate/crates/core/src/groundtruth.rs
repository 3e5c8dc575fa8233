//! Per-object annotations and dense optical flow derived from rendered
//! buffers.
//!
//! Occlusion is measured by rendering twice: the full scene gives the
//! pixels an instance actually won, a solo render of the same instance
//! gives the pixels it would cover unoccluded. Both renders share camera
//! and LOD settings, and both count only in-frame pixels, so truncation
//! cancels out of the ratio and is tracked by its own flag instead.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{CameraPose, Pose};
use crate::render::{
    project_point, rasterize_entities, unproject, FrameBuffers, Intrinsics, RenderSettings,
};
use crate::worldgen::{ClassId, World};

#[derive(Debug, Error)]
pub enum GroundtruthError {
    #[error("empty instance mask")]
    EmptyMask,
    #[error("instance {0} renders no pixels even unoccluded")]
    FullyOutOfView(u32),
}

/// VOC-style box: (xmin, ymin, xmax, ymax), 1-based inclusive pixels.
pub type VocBox = (u32, u32, u32, u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AreaClass {
    Small,
    Medium,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OcclusionClass {
    Slightly,
    Partly,
    Largely,
}

/// Classification thresholds; areas in pixels, rates in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassThresholds {
    pub small_area: u32,
    pub large_area: u32,
    pub occ_low: f64,
    pub occ_high: f64,
    /// Minimum visible pixels for a box annotation.
    pub min_visible_pixels: usize,
    /// Minimum box side length for a box annotation.
    pub min_box_side: u32,
}

impl Default for ClassThresholds {
    fn default() -> ClassThresholds {
        ClassThresholds {
            small_area: 32 * 32,
            large_area: 96 * 96,
            occ_low: 0.1,
            occ_high: 0.35,
            min_visible_pixels: 20,
            min_box_side: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceObservation {
    pub instance: u32,
    pub class: ClassId,
    pub visible_pixels: usize,
    pub solo_pixels: usize,
    /// Tight box over the pixels the instance won in the full render.
    pub bbox_visible: VocBox,
    /// Tight box over the solo render: the unoccluded projection, clipped
    /// to the image.
    pub bbox_full: VocBox,
    pub occlusion_rate: f64,
    pub truncated: bool,
    pub area_class: AreaClass,
    pub occlusion_class: OcclusionClass,
}

/// Pixel count and 0-based row/col extent of one instance's mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskExtent {
    pub count: usize,
    pub col_min: u32,
    pub col_max: u32,
    pub row_min: u32,
    pub row_max: u32,
}

/// Exact per-instance pixel counts and extents from the instance buffer.
pub fn instance_masks(bufs: &FrameBuffers) -> BTreeMap<u32, MaskExtent> {
    let mut out: BTreeMap<u32, MaskExtent> = BTreeMap::new();
    for y in 0..bufs.height {
        for x in 0..bufs.width {
            let id = bufs.instance[bufs.idx(x, y)];
            if id == 0 {
                continue;
            }
            out.entry(id)
                .and_modify(|e| {
                    e.count += 1;
                    e.col_min = e.col_min.min(x);
                    e.col_max = e.col_max.max(x);
                    e.row_min = e.row_min.min(y);
                    e.row_max = e.row_max.max(y);
                })
                .or_insert(MaskExtent {
                    count: 1,
                    col_min: x,
                    col_max: x,
                    row_min: y,
                    row_max: y,
                });
        }
    }
    out
}

/// 1-based inclusive VOC box from a 0-based extent.
pub fn tight_bbox(extent: &MaskExtent) -> Result<VocBox, GroundtruthError> {
    if extent.count == 0 {
        return Err(GroundtruthError::EmptyMask);
    }
    Ok((
        extent.col_min + 1,
        extent.row_min + 1,
        extent.col_max + 1,
        extent.row_max + 1,
    ))
}

/// Fraction of the instance's unoccluded footprint hidden by other
/// geometry: 1 - visible/solo over two renders at identical settings.
pub fn occlusion_rate(
    world: &World,
    camera: &CameraPose,
    k: &Intrinsics,
    settings: &RenderSettings,
    instance: u32,
) -> Result<f64, GroundtruthError> {
    let full = rasterize_entities(world.entities.iter(), camera, k, settings);
    occlusion_rate_with_full(world, camera, k, settings, instance, &full)
}

fn occlusion_rate_with_full(
    world: &World,
    camera: &CameraPose,
    k: &Intrinsics,
    settings: &RenderSettings,
    instance: u32,
    full: &FrameBuffers,
) -> Result<f64, GroundtruthError> {
    let entity = world.entity_by_id(instance).expect("instance not in world");
    let solo = rasterize_entities([entity], camera, k, settings);
    let solo_pixels = solo.instance.iter().filter(|&&i| i == instance).count();
    if solo_pixels == 0 {
        return Err(GroundtruthError::FullyOutOfView(instance));
    }
    let visible = full.instance.iter().filter(|&&i| i == instance).count();
    Ok(1.0 - visible as f64 / solo_pixels as f64)
}

/// True iff the object's projection does not fit the image: some vertex at
/// z >= near lands outside [0, W) x [0, H), or some triangle crosses the
/// near plane.
pub fn truncation_flag(world: &World, camera: &CameraPose, k: &Intrinsics, instance: u32) -> bool {
    let entity = world.entity_by_id(instance).expect("instance not in world");
    let mesh = &entity.mesh;
    let cam: Vec<crate::geom::Vec3> = mesh
        .vertices
        .iter()
        .map(|&v| camera.world_to_camera(entity.pose.transform(v)))
        .collect();
    for p in &cam {
        if p.z < k.near {
            continue;
        }
        let (u, v) = project_point(k, *p).expect("z >= near");
        if u < 0.0 || u >= k.width as f64 || v < 0.0 || v >= k.height as f64 {
            return true;
        }
    }
    for t in &mesh.triangles {
        let zs = [cam[t[0] as usize].z, cam[t[1] as usize].z, cam[t[2] as usize].z];
        let min = zs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if min < k.near && max >= k.near {
            return true;
        }
    }
    false
}

/// Backward optical flow field: for each pixel at t, the displacement from
/// its position at t-1. Invalid where no correspondence exists.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: u32,
    pub height: u32,
    pub u: Vec<f32>,
    pub v: Vec<f32>,
    pub valid: Vec<bool>,
}

impl FlowField {
    /// All-invalid field, used for the first frame of a sequence.
    pub fn invalid(width: u32, height: u32) -> FlowField {
        let n = width as usize * height as usize;
        FlowField {
            width,
            height,
            u: vec![0.0; n],
            v: vec![0.0; n],
            valid: vec![false; n],
        }
    }
}

/// Flow from the rigid motion of each pixel's instance plus camera motion.
///
/// Each hit pixel is unprojected through its depth, carried backwards by
/// pose_prev(i) o pose_t(i)^-1, and projected through the previous camera;
/// flow = current position - previous position. Pixels whose source lies
/// behind the previous camera or off-image, and pixels whose instance has
/// no pose at t-1, are invalid. The static-scene, static-camera case short
/// circuits to exact zero.
pub fn compute_flow(
    world_t: &World,
    world_prev: &World,
    camera_t: &CameraPose,
    camera_prev: &CameraPose,
    k: &Intrinsics,
    bufs_t: &FrameBuffers,
) -> FlowField {
    let mut flow = FlowField::invalid(k.width, k.height);
    let same_camera = camera_t == camera_prev;

    // id -> (pose_t, pose at t-1 if the entity existed then)
    let mut poses: BTreeMap<u32, (Pose, Option<Pose>)> = BTreeMap::new();
    for e in &world_t.entities {
        let prev = world_prev.entity_by_id(e.id).map(|p| p.pose);
        poses.insert(e.id, (e.pose, prev));
    }

    for y in 0..k.height {
        for x in 0..k.width {
            let idx = bufs_t.idx(x, y);
            let id = bufs_t.instance[idx];
            if id == 0 || !bufs_t.depth[idx].is_finite() {
                continue;
            }
            let Some(&(pose_t, Some(pose_prev))) = poses.get(&id) else {
                continue; // no pose at t-1: invalid
            };
            if same_camera && pose_t == pose_prev {
                flow.valid[idx] = true;
                continue; // exact zero, skip the float round trip
            }
            let uc = x as f64 + 0.5;
            let vc = y as f64 + 0.5;
            let p_cam = unproject(k, uc, vc, bufs_t.depth[idx] as f64);
            let p_world = camera_t.camera_to_world(p_cam);
            let p_world_prev = if pose_t == pose_prev {
                p_world
            } else {
                pose_prev.transform(pose_t.inverse_transform(p_world))
            };
            let q = camera_prev.world_to_camera(p_world_prev);
            if q.z < k.near {
                continue;
            }
            let (up, vp) = project_point(k, q).expect("z >= near");
            if up < 0.0 || up >= k.width as f64 || vp < 0.0 || vp >= k.height as f64 {
                continue;
            }
            flow.u[idx] = (uc - up) as f32;
            flow.v[idx] = (vc - vp) as f32;
            flow.valid[idx] = true;
        }
    }
    flow
}

/// Small below 32x32, Large above 96x96, boundaries Medium.
pub fn classify_area(bbox: VocBox, th: &ClassThresholds) -> AreaClass {
    let (xmin, ymin, xmax, ymax) = bbox;
    let area = (xmax - xmin + 1) * (ymax - ymin + 1);
    if area < th.small_area {
        AreaClass::Small
    } else if area > th.large_area {
        AreaClass::Large
    } else {
        AreaClass::Medium
    }
}

/// Slightly below 0.1, Largely above 0.35, boundaries Partly.
pub fn classify_occlusion(rate: f64, th: &ClassThresholds) -> OcclusionClass {
    if rate < th.occ_low {
        OcclusionClass::Slightly
    } else if rate > th.occ_high {
        OcclusionClass::Largely
    } else {
        OcclusionClass::Partly
    }
}

/// One observation per vehicle instance that passes the inclusion filter
/// (enough visible pixels, box at least min_box_side square). Static
/// classes appear only in the segmentation buffers.
pub fn annotate_frame(
    world: &World,
    camera: &CameraPose,
    k: &Intrinsics,
    settings: &RenderSettings,
    bufs: &FrameBuffers,
    th: &ClassThresholds,
) -> Vec<InstanceObservation> {
    let masks = instance_masks(bufs);
    let mut out = Vec::new();
    for (id, extent) in masks {
        let Some(entity) = world.entity_by_id(id) else {
            continue;
        };
        if !entity.class.is_vehicle() {
            continue;
        }
        let bbox_visible = tight_bbox(&extent).expect("mask entries are non-empty");
        let (xmin, ymin, xmax, ymax) = bbox_visible;
        if extent.count < th.min_visible_pixels
            || xmax - xmin + 1 < th.min_box_side
            || ymax - ymin + 1 < th.min_box_side
        {
            continue;
        }

        let solo = rasterize_entities([entity], camera, k, settings);
        let solo_masks = instance_masks(&solo);
        let Some(solo_extent) = solo_masks.get(&id) else {
            continue; // fully out of view cannot happen when visible > 0
        };
        let solo_pixels = solo_extent.count;
        let rate = 1.0 - extent.count as f64 / solo_pixels as f64;

        out.push(InstanceObservation {
            instance: id,
            class: entity.class,
            visible_pixels: extent.count,
            solo_pixels,
            bbox_visible,
            bbox_full: tight_bbox(solo_extent).expect("solo extent non-empty"),
            occlusion_rate: rate,
            truncated: truncation_flag(world, camera, k, id),
            area_class: classify_area(bbox_visible, th),
            occlusion_class: classify_occlusion(rate, th),
        });
    }
    out
}
