//! Population: building heights, lane geometry, traffic placement, and the
//! built-in synthetic grid layout used when no map file is supplied.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{v2, v3, Vec2, Vec3};
use crate::mapio::{FootprintSpec, Layout, RoadSpec};
use crate::mix64;
use crate::seed::salt;

use super::mesh::box_mesh;
use super::{Behavior, ClassId, Mesh, VehicleAgent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    Sparse,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleKind {
    Car,
    Bus,
    Truck,
}

impl VehicleKind {
    /// Length, width, height in meters; +x is forward in the local frame.
    pub fn dims(self) -> Vec3 {
        match self {
            VehicleKind::Car => v3(4.5, 1.8, 1.5),
            VehicleKind::Bus => v3(12.0, 2.5, 3.0),
            VehicleKind::Truck => v3(8.0, 2.5, 3.2),
        }
    }

    pub fn class(self) -> ClassId {
        match self {
            VehicleKind::Car => ClassId::Car,
            VehicleKind::Bus => ClassId::Bus,
            VehicleKind::Truck => ClassId::Truck,
        }
    }

    /// Box-with-cabin silhouette, origin at footprint center on the ground.
    pub fn mesh(self) -> Mesh {
        match self {
            VehicleKind::Car => {
                let body = box_mesh(v3(-2.25, -0.9, 0.0), v3(2.25, 0.9, 0.9));
                let cabin = box_mesh(v3(-1.5, -0.8, 0.9), v3(0.7, 0.8, 1.5));
                Mesh::merge(&[body, cabin])
            }
            VehicleKind::Bus => box_mesh(v3(-6.0, -1.25, 0.0), v3(6.0, 1.25, 3.0)),
            VehicleKind::Truck => {
                let cab = box_mesh(v3(1.6, -1.25, 0.0), v3(4.0, 1.25, 2.6));
                let cargo = box_mesh(v3(-4.0, -1.25, 0.0), v3(1.4, 1.25, 3.2));
                Mesh::merge(&[cab, cargo])
            }
        }
    }

    /// Bounding-box stand-in for the farthest detail level.
    pub fn coarse_mesh(self) -> Mesh {
        let d = self.dims();
        box_mesh(
            v3(-d.x / 2.0, -d.y / 2.0, 0.0),
            v3(d.x / 2.0, d.y / 2.0, d.z),
        )
    }
}

/// Height from tags when `building:levels` parses as a positive integer
/// (3 m per level), otherwise a seeded uniform draw in [6, 30] m.
pub fn building_height(tags: &BTreeMap<String, String>, seed: u64) -> f64 {
    if let Some(n) = tags
        .get("building:levels")
        .and_then(|s| s.trim().parse::<i64>().ok())
    {
        if n >= 1 {
            return 3.0 * n as f64;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.random_range(6.0..=30.0)
}

/// Point and unit tangent at arc length `s` along a polyline; `s` is assumed
/// in [0, length], with float tail residue landing on the final vertex.
pub(crate) fn point_at(centerline: &[Vec2], s: f64) -> (Vec2, Vec2) {
    debug_assert!(centerline.len() >= 2);
    let mut remaining = s.max(0.0);
    for w in centerline.windows(2) {
        let seg = w[1] - w[0];
        let seg_len = seg.norm();
        if remaining < seg_len {
            let t = seg * (1.0 / seg_len);
            return (w[0] + t * remaining, t);
        }
        remaining -= seg_len;
    }
    let last = centerline[centerline.len() - 1];
    let prev = centerline[centerline.len() - 2];
    ((last), (last - prev).normalized())
}

/// Arc-length position on a lane. Lane 0 is the rightmost relative to travel
/// direction; all lanes share the centerline's arc length and circulate
/// one-way, wrapping modulo that length.
pub fn lane_point(road: &RoadSpec, lane_index: u32, s: f64) -> (Vec2, Vec2) {
    assert!(lane_index < road.lane_count, "lane index out of range");
    let len = road.length();
    let s = s.rem_euclid(len);
    let (p, t) = point_at(&road.centerline, s);
    let half = (road.lane_count as f64 - 1.0) / 2.0;
    let lane_w = road.width / road.lane_count as f64;
    let offset = (half - lane_index as f64) * lane_w;
    let right = v2(t.y, -t.x);
    (p + right * offset, t)
}

/// Seed traffic onto every lane of every road.
///
/// Sparse keeps bumper-to-bumper gaps of at least 8 m; dense draws them in
/// [0.5, 2] m. The class mix is car:bus:truck = 3:1:1 and speeds are uniform
/// in [5, 15] m/s. Per-lane seeding keeps lanes independent: adding a road
/// never reshuffles traffic elsewhere. Lanes too short for a single vehicle
/// are skipped. Entity ids are wired later by the world builder.
pub fn place_vehicles(roads: &[RoadSpec], density: Density, seed: u64) -> Vec<VehicleAgent> {
    let mut agents = Vec::new();
    for (ri, road) in roads.iter().enumerate() {
        let len = road.length();
        for lane in 0..road.lane_count {
            let lane_seed = mix64(seed ^ ((ri as u64) << 32) ^ lane as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(lane_seed);
            let mut s: f64 = match density {
                Density::Sparse => rng.random_range(0.0..8.0),
                Density::Dense => rng.random_range(0.0..2.0),
            };
            loop {
                let kind = match rng.random_range(0u32..5) {
                    0..=2 => VehicleKind::Car,
                    3 => VehicleKind::Bus,
                    _ => VehicleKind::Truck,
                };
                let vlen = kind.dims().x;
                if s + vlen > len {
                    break;
                }
                let speed = rng.random_range(5.0..=15.0);
                agents.push(VehicleAgent {
                    entity: 0,
                    kind,
                    road: ri,
                    lane,
                    arc_position: s + vlen / 2.0,
                    speed,
                    behavior: Behavior::FollowLane,
                });
                let gap: f64 = match density {
                    Density::Sparse => rng.random_range(8.0..=30.0),
                    Density::Dense => rng.random_range(0.5..=2.0),
                };
                s += vlen + gap;
            }
        }
    }
    agents
}

const BLOCKS: i64 = 5;
const PITCH: f64 = 80.0;

/// Built-in grid city: (BLOCKS+1)^2 streets with a wider central avenue the
/// ego drives, and seeded buildings filling the blocks. Used whenever no map
/// or layout file is supplied, and by benchmarks and shape tests.
pub fn synthetic_layout(seed: u64) -> Layout {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ salt::LAYOUT));
    let span = BLOCKS as f64 * PITCH;
    let mut roads = Vec::new();
    for k in 0..=BLOCKS {
        let y = k as f64 * PITCH;
        if k == BLOCKS / 2 {
            // Central avenue: wider, extended past the grid so it is the
            // unique longest road and therefore carries the ego.
            roads.push(RoadSpec {
                centerline: vec![v2(-100.0, y), v2(span + 100.0, y)],
                width: 9.0,
                lane_count: 3,
            });
        } else {
            roads.push(RoadSpec {
                centerline: vec![v2(0.0, y), v2(span, y)],
                width: 6.0,
                lane_count: 2,
            });
        }
    }
    for k in 0..=BLOCKS {
        let x = k as f64 * PITCH;
        roads.push(RoadSpec {
            centerline: vec![v2(x, 0.0), v2(x, span)],
            width: 6.0,
            lane_count: 2,
        });
    }

    let mut footprints = Vec::new();
    let mut counter = 0usize;
    for by in 0..BLOCKS {
        for bx in 0..BLOCKS {
            for ly in 0..2 {
                for lx in 0..2 {
                    if !rng.random_bool(0.85) {
                        continue;
                    }
                    let lot_x = bx as f64 * PITCH + 10.0 + lx as f64 * 30.0;
                    let lot_y = by as f64 * PITCH + 10.0 + ly as f64 * 30.0;
                    let w: f64 = rng.random_range(14.0..=24.0);
                    let d: f64 = rng.random_range(14.0..=24.0);
                    let x0 = lot_x + rng.random_range(0.0..=(30.0 - w));
                    let y0 = lot_y + rng.random_range(0.0..=(30.0 - d));
                    let (x1, y1) = (x0 + w, y0 + d);
                    let polygon = if counter % 5 == 0 {
                        // L-shape: rectangle minus its top-right quadrant.
                        let xm = x0 + w * 0.55;
                        let ym = y0 + d * 0.55;
                        vec![
                            v2(x0, y0),
                            v2(x1, y0),
                            v2(x1, ym),
                            v2(xm, ym),
                            v2(xm, y1),
                            v2(x0, y1),
                        ]
                    } else {
                        vec![v2(x0, y0), v2(x1, y0), v2(x1, y1), v2(x0, y1)]
                    };
                    counter += 1;
                    footprints.push(FootprintSpec {
                        polygon,
                        tags: BTreeMap::new(),
                    });
                }
            }
        }
    }

    Layout {
        roads,
        footprints,
        heights: BTreeMap::new(),
        warnings: Vec::new(),
    }
}
