//! Mesh builders: building extrusion, road strips, and box primitives.
//!
//! All builders emit outward-facing triangles (counter-clockwise seen from
//! outside the solid, or from +z for flat ground geometry) so the renderer's
//! backface culling agrees with them.

use crate::geom::{v3, Vec2, Vec3};
use crate::mapio::{FootprintSpec, RoadSpec};

use super::{ClassId, Mesh, WorldError};

/// Axis-aligned box between two corners, 12 triangles.
pub fn box_mesh(min: Vec3, max: Vec3) -> Mesh {
    let (x0, y0, z0) = (min.x, min.y, min.z);
    let (x1, y1, z1) = (max.x, max.y, max.z);
    let vertices = vec![
        v3(x0, y0, z0),
        v3(x1, y0, z0),
        v3(x1, y1, z0),
        v3(x0, y1, z0),
        v3(x0, y0, z1),
        v3(x1, y0, z1),
        v3(x1, y1, z1),
        v3(x0, y1, z1),
    ];
    let triangles = vec![
        [0, 3, 2], [0, 2, 1], // bottom, -z
        [4, 5, 6], [4, 6, 7], // top, +z
        [0, 1, 5], [0, 5, 4], // -y
        [2, 3, 7], [2, 7, 6], // +y
        [3, 0, 4], [3, 4, 7], // -x
        [1, 2, 6], [1, 6, 5], // +x
    ];
    Mesh::new(vertices, triangles)
}

/// Flat ground square centered at (cx, cy), just below the road plane so the
/// two never contest the same depth.
pub fn ground_tile(cx: f64, cy: f64, size: f64) -> Mesh {
    let h = size * 0.5;
    let z = -0.05;
    let vertices = vec![
        v3(cx - h, cy - h, z),
        v3(cx + h, cy - h, z),
        v3(cx + h, cy + h, z),
        v3(cx - h, cy + h, z),
    ];
    Mesh::new(vertices, vec![[0, 1, 2], [0, 2, 3]])
}

fn point_in_tri(p: Vec2, a: Vec2, b: Vec2, c: Vec2) -> bool {
    // CCW triangle; boundary counts as inside (conservatively blocks an ear).
    (b - a).cross(p - a) >= 0.0 && (c - b).cross(p - b) >= 0.0 && (a - c).cross(p - c) >= 0.0
}

/// Ear-clipping triangulation of a simple CCW polygon. Returns index triples
/// into the input; exactly n − 2 of them.
pub fn ear_clip(polygon: &[Vec2]) -> Result<Vec<[usize; 3]>, WorldError> {
    let n = polygon.len();
    if n < 3 {
        return Err(WorldError::TriangulationFailure(format!(
            "polygon has {n} vertices"
        )));
    }
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n - 2);
    while remaining.len() > 3 {
        let m = remaining.len();
        let mut clipped = false;
        for i in 0..m {
            let ip = remaining[(i + m - 1) % m];
            let ic = remaining[i];
            let inx = remaining[(i + 1) % m];
            let (a, b, c) = (polygon[ip], polygon[ic], polygon[inx]);
            if (b - a).cross(c - b) <= 0.0 {
                continue; // reflex or collinear corner, not an ear
            }
            let blocked = remaining.iter().any(|&j| {
                j != ip && j != ic && j != inx && point_in_tri(polygon[j], a, b, c)
            });
            if blocked {
                continue;
            }
            out.push([ip, ic, inx]);
            remaining.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            return Err(WorldError::TriangulationFailure(
                "no ear found; polygon is not simple".into(),
            ));
        }
    }
    out.push([remaining[0], remaining[1], remaining[2]]);
    Ok(out)
}

/// Drop vertices whose neighbors are exactly collinear; they add degenerate
/// roof ears and redundant coplanar wall quads.
fn strip_collinear(polygon: &[Vec2]) -> Vec<Vec2> {
    let n = polygon.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let prev = polygon[(i + n - 1) % n];
        let cur = polygon[i];
        let next = polygon[(i + 1) % n];
        if (cur - prev).cross(next - cur) != 0.0 {
            out.push(cur);
        }
    }
    out
}

/// Extrude a CCW footprint into walls plus an ear-clipped flat roof.
///
/// For an n-gon (after collinear-vertex removal) the mesh holds exactly
/// 2n wall triangles and n − 2 roof triangles; the roof area equals the
/// footprint's shoelace area.
pub fn extrude_footprint(fp: &FootprintSpec, height: f64) -> Result<Mesh, WorldError> {
    assert!(height > 0.0, "extrusion height must be positive");
    let poly = strip_collinear(&fp.polygon);
    let n = poly.len();
    if n < 3 {
        return Err(WorldError::TriangulationFailure(
            "footprint degenerates to fewer than 3 vertices".into(),
        ));
    }
    let roof = ear_clip(&poly)?;

    let mut vertices = Vec::with_capacity(2 * n);
    vertices.extend(poly.iter().map(|p| v3(p.x, p.y, 0.0)));
    vertices.extend(poly.iter().map(|p| v3(p.x, p.y, height)));

    let mut triangles = Vec::with_capacity(3 * n - 2);
    let top = |i: usize| (n + i) as u32;
    for i in 0..n {
        let j = (i + 1) % n;
        // Interior lies left of each CCW edge, so this winding faces outward.
        triangles.push([i as u32, j as u32, top(j)]);
        triangles.push([i as u32, top(j), top(i)]);
    }
    for [a, b, c] in roof {
        triangles.push([top(a), top(b), top(c)]);
    }
    Ok(Mesh::new(vertices, triangles))
}

/// Tessellate a road centerline into a miter-joined strip at z = 0,
/// 2 triangles per segment, facing +z.
pub fn tessellate_road(road: &RoadSpec) -> Mesh {
    let pts = &road.centerline;
    let n = pts.len();
    assert!(n >= 2, "road needs at least 2 centerline points");
    let hw = road.width * 0.5;

    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let dir_in = if i > 0 {
            (pts[i] - pts[i - 1]).normalized()
        } else {
            (pts[1] - pts[0]).normalized()
        };
        let dir_out = if i + 1 < n {
            (pts[i + 1] - pts[i]).normalized()
        } else {
            dir_in
        };
        let sum = dir_in + dir_out;
        let bisector = if sum.norm() < 1e-9 { dir_in } else { sum.normalized() };
        let miter_left = bisector.perp();
        // Clamp sharp joins to a 4x miter so hairpins cannot emit spikes.
        let cos = miter_left.dot(dir_in.perp()).max(0.25);
        let s = hw / cos;
        left.push(pts[i] + miter_left * s);
        right.push(pts[i] - miter_left * s);
    }

    let mut vertices = Vec::with_capacity(2 * n);
    for i in 0..n {
        vertices.push(v3(left[i].x, left[i].y, 0.0));
        vertices.push(v3(right[i].x, right[i].y, 0.0));
    }
    let mut triangles = Vec::with_capacity(2 * (n - 1));
    for i in 0..n - 1 {
        let (l0, r0) = (2 * i as u32, 2 * i as u32 + 1);
        let (l1, r1) = (l0 + 2, r0 + 2);
        triangles.push([l0, r0, r1]);
        triangles.push([l0, r1, l1]);
    }
    Mesh::new(vertices, triangles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropKind {
    Tree,
    Fence,
    Sign,
    Light,
}

/// Roadside prop geometry with its class and flat color.
pub fn prop_mesh(kind: PropKind) -> (Mesh, ClassId, [u8; 3]) {
    match kind {
        PropKind::Tree => {
            let trunk = box_mesh(v3(-0.15, -0.15, 0.0), v3(0.15, 0.15, 2.0));
            let canopy = box_mesh(v3(-0.75, -0.75, 2.0), v3(0.75, 0.75, 4.0));
            (Mesh::merge(&[trunk, canopy]), ClassId::Vegetation, [45, 110, 55])
        }
        PropKind::Fence => (
            box_mesh(v3(-1.0, -0.05, 0.0), v3(1.0, 0.05, 1.2)),
            ClassId::Fence,
            [125, 95, 65],
        ),
        PropKind::Sign => {
            let pole = box_mesh(v3(-0.05, -0.05, 0.0), v3(0.05, 0.05, 2.5));
            let panel = box_mesh(v3(-0.3, -0.05, 1.9), v3(0.3, 0.05, 2.5));
            (Mesh::merge(&[pole, panel]), ClassId::TrafficSign, [200, 35, 35])
        }
        PropKind::Light => {
            let pole = box_mesh(v3(-0.075, -0.075, 0.0), v3(0.075, 0.075, 4.0));
            let head = box_mesh(v3(0.0, -0.075, 3.7), v3(0.5, 0.075, 4.0));
            (Mesh::merge(&[pole, head]), ClassId::TrafficLight, [60, 60, 70])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::v2;
    use crate::mapio::signed_area;
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;

    fn fp(points: &[(f64, f64)]) -> FootprintSpec {
        FootprintSpec {
            polygon: points.iter().map(|&(x, y)| v2(x, y)).collect(),
            tags: BTreeMap::new(),
        }
    }

    fn mesh_area(mesh: &Mesh, pick: impl Fn(usize) -> bool) -> f64 {
        (0..mesh.triangles.len())
            .filter(|&t| pick(t))
            .map(|t| mesh.triangle_area(t))
            .sum()
    }

    #[test]
    fn unit_square_extrusion_has_ten_triangles() {
        let square = fp(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let mesh = extrude_footprint(&square, 2.0).unwrap();
        assert_eq!(mesh.triangles.len(), 10); // 2*4 walls + 2 roof
        assert_eq!(mesh.vertices.len(), 8);
    }

    #[test]
    fn pentagon_extrusion_triangle_count() {
        let penta = fp(&[(0.0, 0.0), (2.0, 0.0), (2.6, 1.8), (1.0, 3.0), (-0.6, 1.8)]);
        let mesh = extrude_footprint(&penta, 5.0).unwrap();
        assert_eq!(mesh.triangles.len(), 2 * 5 + 3);
    }

    #[test]
    fn l_shape_roof_area_matches_shoelace() {
        // 2x2 square missing a 1x1 quadrant: area 3.
        let l = fp(&[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)]);
        assert_relative_eq!(signed_area(&l.polygon), 3.0, epsilon = 1e-12);
        let h = 4.0;
        let mesh = extrude_footprint(&l, h).unwrap();
        assert_eq!(mesh.triangles.len(), 2 * 6 + 4);
        let roof_area = mesh_area(&mesh, |t| {
            mesh.triangles[t]
                .iter()
                .all(|&i| mesh.vertices[i as usize].z == h)
        });
        assert_relative_eq!(roof_area, 3.0, epsilon = 1e-6);
    }

    #[test]
    fn convex_extrusion_faces_outward() {
        let square = fp(&[(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)]);
        let mesh = extrude_footprint(&square, 2.0).unwrap();
        let center = v3(1.0, 1.0, 1.0);
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangles[t];
            let (a, b, c) = (
                mesh.vertices[a as usize],
                mesh.vertices[b as usize],
                mesh.vertices[c as usize],
            );
            let normal = (b - a).cross(c - a);
            let centroid = (a + b + c) * (1.0 / 3.0);
            assert!(
                normal.dot(centroid - center) > 0.0,
                "triangle {t} faces inward"
            );
        }
    }

    #[test]
    fn ear_clip_emits_n_minus_2() {
        for poly in [
            vec![v2(0.0, 0.0), v2(1.0, 0.0), v2(1.0, 1.0)],
            vec![v2(0.0, 0.0), v2(1.0, 0.0), v2(1.0, 1.0), v2(0.0, 1.0)],
            vec![v2(0.0, 0.0), v2(2.0, 0.0), v2(2.0, 1.0), v2(1.0, 1.0), v2(1.0, 2.0), v2(0.0, 2.0)],
        ] {
            let tris = ear_clip(&poly).unwrap();
            assert_eq!(tris.len(), poly.len() - 2);
            let total: f64 = tris
                .iter()
                .map(|&[a, b, c]| 0.5 * (poly[b] - poly[a]).cross(poly[c] - poly[a]))
                .sum();
            assert_relative_eq!(total, signed_area(&poly), epsilon = 1e-12);
        }
    }

    #[test]
    fn straight_road_is_one_rectangle() {
        let road = RoadSpec {
            centerline: vec![v2(0.0, 0.0), v2(50.0, 0.0)],
            width: 6.0,
            lane_count: 2,
        };
        let mesh = tessellate_road(&road);
        assert_eq!(mesh.triangles.len(), 2);
        assert_relative_eq!(mesh_area(&mesh, |_| true), 300.0, epsilon = 1e-9);
        assert!(mesh.vertices.iter().all(|v| v.z == 0.0));
    }

    #[test]
    fn collinear_midpoint_preserves_area() {
        let road = RoadSpec {
            centerline: vec![v2(0.0, 0.0), v2(20.0, 0.0), v2(50.0, 0.0)],
            width: 6.0,
            lane_count: 2,
        };
        let mesh = tessellate_road(&road);
        assert_eq!(mesh.triangles.len(), 4);
        assert_relative_eq!(mesh_area(&mesh, |_| true), 300.0, epsilon = 1e-9);
    }

    #[test]
    fn right_angle_miter_matches_analytic_outline() {
        let w = 4.0;
        let road = RoadSpec {
            centerline: vec![v2(0.0, 0.0), v2(10.0, 0.0), v2(10.0, 10.0)],
            width: w,
            lane_count: 1,
        };
        let mesh = tessellate_road(&road);
        // Outline follows the strip's own boundary vertices, so its shoelace
        // area is the analytic mitered-polygon area.
        let outline = [
            mesh.vertices[0], mesh.vertices[2], mesh.vertices[4],
            mesh.vertices[5], mesh.vertices[3], mesh.vertices[1],
        ];
        let outline_2d: Vec<Vec2> = outline.iter().map(|v| v2(v.x, v.y)).collect();
        let analytic = signed_area(&outline_2d).abs();
        assert_relative_eq!(mesh_area(&mesh, |_| true), analytic, epsilon = 1e-6);
        // Both miter corners sit at hw*sqrt(2) from the bend vertex.
        let bend = v2(10.0, 0.0);
        for p in [mesh.vertices[2], mesh.vertices[3]] {
            let d = (v2(p.x, p.y) - bend).norm();
            assert_relative_eq!(d, w * 0.5 * std::f64::consts::SQRT_2, epsilon = 1e-9);
        }
    }

    #[test]
    fn box_mesh_is_closed_and_outward() {
        let mesh = box_mesh(v3(-1.0, -2.0, 0.0), v3(1.0, 2.0, 3.0));
        assert_eq!(mesh.triangles.len(), 12);
        assert_relative_eq!(
            mesh_area(&mesh, |_| true),
            2.0 * (2.0 * 4.0 + 2.0 * 3.0 + 4.0 * 3.0),
            epsilon = 1e-9
        );
        let center = v3(0.0, 0.0, 1.5);
        for t in 0..mesh.triangles.len() {
            let [a, b, c] = mesh.triangles[t];
            let (a, b, c) = (
                mesh.vertices[a as usize],
                mesh.vertices[b as usize],
                mesh.vertices[c as usize],
            );
            let normal = (b - a).cross(c - a);
            assert!(normal.dot((a + b + c) * (1.0 / 3.0) - center) > 0.0);
        }
    }

    #[test]
    fn merge_offsets_indices() {
        let a = box_mesh(v3(0.0, 0.0, 0.0), v3(1.0, 1.0, 1.0));
        let b = box_mesh(v3(5.0, 0.0, 0.0), v3(6.0, 1.0, 1.0));
        let m = Mesh::merge(&[a.clone(), b]);
        assert_eq!(m.vertices.len(), 16);
        assert_eq!(m.triangles.len(), 24);
        assert!(m.bound_radius > a.bound_radius);
    }

    #[test]
    fn degenerate_triangles_are_dropped() {
        let mesh = Mesh::new(
            vec![v3(0.0, 0.0, 0.0), v3(1.0, 0.0, 0.0), v3(2.0, 0.0, 0.0), v3(0.0, 1.0, 0.0)],
            vec![[0, 1, 2], [0, 1, 3]],
        );
        assert_eq!(mesh.triangles.len(), 1);
    }

    #[test]
    fn clockwise_polygon_has_no_ear() {
        // Orientation guard: every corner of a CW polygon reads as reflex.
        let cw = vec![v2(0.0, 0.0), v2(0.0, 2.0), v2(2.0, 2.0), v2(2.0, 0.0)];
        assert!(ear_clip(&cw).is_err());
    }

    #[test]
    fn props_have_expected_classes() {
        for (kind, class) in [
            (PropKind::Tree, ClassId::Vegetation),
            (PropKind::Fence, ClassId::Fence),
            (PropKind::Sign, ClassId::TrafficSign),
            (PropKind::Light, ClassId::TrafficLight),
        ] {
            let (mesh, got, _) = prop_mesh(kind);
            assert_eq!(got, class);
            assert!(!mesh.triangles.is_empty());
            assert!(mesh.vertices.iter().all(|v| v.z >= 0.0));
        }
    }
}
