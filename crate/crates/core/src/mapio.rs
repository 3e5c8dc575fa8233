//! Map input: OpenStreetMap XML and the native JSON scene-layout format.
//!
//! OSM extracts are reduced to the two element kinds the city builder needs,
//! roads (ways tagged `highway`) and building footprints (closed ways tagged
//! `building`), projected into a local metric frame centered on the extract.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{v2, Vec2};

/// Mean Earth radius in meters, used by the local equirectangular projection.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("malformed XML at line {line}: {message}")]
    MalformedXml { line: u32, message: String },
    #[error("way {way} references unknown node {node}")]
    DanglingNodeRef { way: i64, node: i64 },
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
}

/// Geographic coordinate in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

/// One OSM way: ordered node references plus its tag map.
#[derive(Debug, Clone, PartialEq)]
pub struct Way {
    pub id: i64,
    pub node_refs: Vec<i64>,
    pub tags: BTreeMap<String, String>,
}

impl Way {
    pub fn is_closed(&self) -> bool {
        self.node_refs.len() >= 2 && self.node_refs.first() == self.node_refs.last()
    }
}

/// Parsed OSM document: nodes, ways in input order, and the projection origin
/// (centroid of all node coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct MapDocument {
    pub nodes: BTreeMap<i64, LatLon>,
    pub ways: Vec<Way>,
    pub origin: LatLon,
}

/// Road extracted from the map: centerline polyline in meters plus width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSpec {
    pub centerline: Vec<Vec2>,
    pub width: f64,
    pub lane_count: u32,
}

impl RoadSpec {
    pub fn length(&self) -> f64 {
        self.centerline
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum()
    }
}

/// Building footprint: counter-clockwise simple polygon in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintSpec {
    pub polygon: Vec<Vec2>,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

/// Layout extracted from a map or loaded from the JSON scene-layout file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layout {
    pub roads: Vec<RoadSpec>,
    pub footprints: Vec<FootprintSpec>,
    /// Per-building explicit heights from the JSON format, keyed by footprint
    /// index. Buildings without an entry get a tag- or seed-derived height.
    pub heights: BTreeMap<usize, f64>,
    /// Entities skipped during extraction, with the reason.
    pub warnings: Vec<String>,
}

/// Parse an OSM XML v0.6 document (elements `osm`, `node`, `way`, `nd`, `tag`).
///
/// Relations are ignored. Duplicate consecutive node refs within a way are
/// collapsed silently. The projection origin is the centroid of all nodes.
pub fn parse_osm(xml_text: &str) -> Result<MapDocument, MapError> {
    let doc = roxmltree::Document::parse(xml_text).map_err(|e| MapError::MalformedXml {
        line: e.pos().row,
        message: e.to_string(),
    })?;

    let root = doc.root_element();
    if root.tag_name().name() != "osm" {
        return Err(MapError::MalformedXml {
            line: doc.text_pos_at(root.range().start).row,
            message: format!("expected <osm> root, found <{}>", root.tag_name().name()),
        });
    }

    let bad_attr = |node: roxmltree::Node<'_, '_>, what: &str| MapError::MalformedXml {
        line: doc.text_pos_at(node.range().start).row,
        message: format!("{what} on <{}>", node.tag_name().name()),
    };

    let mut nodes = BTreeMap::new();
    let mut ways = Vec::new();

    for child in root.children().filter(|c| c.is_element()) {
        match child.tag_name().name() {
            "node" => {
                let id: i64 = child
                    .attribute("id")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad_attr(child, "missing or invalid id"))?;
                let lat: f64 = child
                    .attribute("lat")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad_attr(child, "missing or invalid lat"))?;
                let lon: f64 = child
                    .attribute("lon")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad_attr(child, "missing or invalid lon"))?;
                nodes.insert(id, LatLon { lat, lon });
            }
            "way" => {
                let id: i64 = child
                    .attribute("id")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad_attr(child, "missing or invalid id"))?;
                let mut node_refs: Vec<i64> = Vec::new();
                let mut tags = BTreeMap::new();
                for item in child.children().filter(|c| c.is_element()) {
                    match item.tag_name().name() {
                        "nd" => {
                            let r: i64 = item
                                .attribute("ref")
                                .and_then(|s| s.parse().ok())
                                .ok_or_else(|| bad_attr(item, "missing or invalid ref"))?;
                            if node_refs.last() != Some(&r) {
                                node_refs.push(r);
                            }
                        }
                        "tag" => {
                            let k = item
                                .attribute("k")
                                .ok_or_else(|| bad_attr(item, "missing k"))?;
                            let v = item
                                .attribute("v")
                                .ok_or_else(|| bad_attr(item, "missing v"))?;
                            tags.insert(k.to_string(), v.to_string());
                        }
                        _ => {}
                    }
                }
                let way = Way { id, node_refs, tags };
                let min_refs = if way.is_closed() { 4 } else { 2 };
                if way.node_refs.len() < min_refs {
                    return Err(MapError::MalformedXml {
                        line: doc.text_pos_at(child.range().start).row,
                        message: format!(
                            "way {} has {} node refs, needs at least {}",
                            id,
                            way.node_refs.len(),
                            min_refs
                        ),
                    });
                }
                ways.push(way);
            }
            _ => {} // relations and metadata are out of scope
        }
    }

    for way in &ways {
        for r in &way.node_refs {
            if !nodes.contains_key(r) {
                return Err(MapError::DanglingNodeRef { way: way.id, node: *r });
            }
        }
    }

    let origin = if nodes.is_empty() {
        LatLon { lat: 0.0, lon: 0.0 }
    } else {
        let n = nodes.len() as f64;
        LatLon {
            lat: nodes.values().map(|p| p.lat).sum::<f64>() / n,
            lon: nodes.values().map(|p| p.lon).sum::<f64>() / n,
        }
    };

    Ok(MapDocument { nodes, ways, origin })
}

/// Serialize a document back to OSM XML. Re-parsing the output yields an
/// equal document.
pub fn write_osm(doc: &MapDocument) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<osm version=\"0.6\">\n");
    for (id, p) in &doc.nodes {
        let _ = writeln!(out, "  <node id=\"{}\" lat=\"{}\" lon=\"{}\"/>", id, p.lat, p.lon);
    }
    for way in &doc.ways {
        let _ = writeln!(out, "  <way id=\"{}\">", way.id);
        for r in &way.node_refs {
            let _ = writeln!(out, "    <nd ref=\"{}\"/>", r);
        }
        for (k, v) in &way.tags {
            let _ = writeln!(out, "    <tag k=\"{}\" v=\"{}\"/>", xml_escape(k), xml_escape(v));
        }
        out.push_str("  </way>\n");
    }
    out.push_str("</osm>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Project geographic coordinates onto the local tangent plane at `origin`.
///
/// Equirectangular: adequate below city scale and trivially invertible.
/// `x` grows east, `y` grows north.
pub fn project_local(lat: f64, lon: f64, origin: LatLon) -> Vec2 {
    let rad = std::f64::consts::PI / 180.0;
    v2(
        EARTH_RADIUS_M * (lon - origin.lon) * rad * (origin.lat * rad).cos(),
        EARTH_RADIUS_M * (lat - origin.lat) * rad,
    )
}

fn road_width(tags: &BTreeMap<String, String>) -> f64 {
    match tags.get("highway").map(String::as_str) {
        Some("motorway") => 12.0,
        Some("primary") => 9.0,
        Some("residential") => 6.0,
        _ => 6.0,
    }
}

fn lane_count(tags: &BTreeMap<String, String>, width: f64) -> u32 {
    let from_tag = tags
        .get("lanes")
        .and_then(|s| s.parse::<i64>().ok())
        .filter(|&n| n >= 1);
    match from_tag {
        Some(n) => n as u32,
        None => ((width / 3.0).round() as i64).max(1) as u32,
    }
}

/// Shoelace signed area; positive for counter-clockwise polygons.
pub fn signed_area(polygon: &[Vec2]) -> f64 {
    let n = polygon.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        acc += a.cross(b);
    }
    0.5 * acc
}

/// Proper-crossing test for two closed segments, used by the simplicity check.
fn segments_intersect(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool {
    let d1 = (a2 - a1).cross(b1 - a1);
    let d2 = (a2 - a1).cross(b2 - a1);
    let d3 = (b2 - b1).cross(a1 - b1);
    let d4 = (b2 - b1).cross(a2 - b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |p: Vec2, q: Vec2, r: Vec2| {
        (q - p).cross(r - p) == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    (d1 == 0.0 && on(a1, a2, b1))
        || (d2 == 0.0 && on(a1, a2, b2))
        || (d3 == 0.0 && on(b1, b2, a1))
        || (d4 == 0.0 && on(b1, b2, a2))
}

/// True iff no two non-adjacent edges of the polygon touch or cross.
pub fn is_simple_polygon(polygon: &[Vec2]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a1, a2) = (polygon[i], polygon[(i + 1) % n]);
        if a1 == a2 {
            return false;
        }
        for j in (i + 1)..n {
            // Skip the edge itself and the two adjacent edges.
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (b1, b2) = (polygon[j], polygon[(j + 1) % n]);
            if segments_intersect(a1, a2, b1, b2) {
                return false;
            }
        }
    }
    true
}

/// Extract roads and building footprints from a parsed map.
///
/// Ways tagged `highway` become roads; closed ways tagged `building` become
/// CCW-normalized footprints. Degenerate geometry (self-intersecting or
/// zero-area polygons, zero-length roads) is skipped with a warning.
pub fn extract_layout(doc: &MapDocument) -> Layout {
    let mut layout = Layout::default();
    for way in &doc.ways {
        let project = |r: &i64| {
            let p = doc.nodes[r];
            project_local(p.lat, p.lon, doc.origin)
        };
        if way.tags.contains_key("highway") {
            let mut centerline: Vec<Vec2> = Vec::with_capacity(way.node_refs.len());
            for p in way.node_refs.iter().map(|r| project(r)) {
                if centerline.last() != Some(&p) {
                    centerline.push(p);
                }
            }
            if centerline.len() < 2 {
                layout
                    .warnings
                    .push(format!("way {}: degenerate road (zero length)", way.id));
                continue;
            }
            let width = road_width(&way.tags);
            layout.roads.push(RoadSpec {
                centerline,
                width,
                lane_count: lane_count(&way.tags, width),
            });
        } else if way.tags.contains_key("building") && way.is_closed() {
            let mut polygon: Vec<Vec2> = Vec::new();
            for p in way.node_refs[..way.node_refs.len() - 1].iter().map(|r| project(r)) {
                if polygon.last() != Some(&p) {
                    polygon.push(p);
                }
            }
            match normalize_footprint(polygon) {
                Ok(poly) => layout.footprints.push(FootprintSpec {
                    polygon: poly,
                    tags: way.tags.clone(),
                }),
                Err(reason) => layout
                    .warnings
                    .push(format!("way {}: degenerate footprint ({reason})", way.id)),
            }
        }
    }
    layout
}

/// Enforce the footprint invariants: simple polygon, CCW, positive area.
fn normalize_footprint(mut polygon: Vec<Vec2>) -> Result<Vec<Vec2>, String> {
    if polygon.len() < 3 {
        return Err("fewer than 3 distinct vertices".into());
    }
    let area = signed_area(&polygon);
    if area == 0.0 {
        return Err("zero area".into());
    }
    if area < 0.0 {
        polygon.reverse();
    }
    if !is_simple_polygon(&polygon) {
        return Err("self-intersecting".into());
    }
    Ok(polygon)
}

// ---------------------------------------------------------------------------
// Native JSON scene-layout format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct LayoutFileRoad {
    points: Vec<[f64; 2]>,
    #[serde(default = "default_road_width")]
    width: f64,
    #[serde(default)]
    lanes: Option<u32>,
}

fn default_road_width() -> f64 {
    6.0
}

#[derive(Debug, Serialize, Deserialize)]
struct LayoutFileFootprint {
    points: Vec<[f64; 2]>,
    #[serde(default)]
    height: Option<f64>,
}

/// On-disk JSON scene layout: `{"roads": [{"points", "width", "lanes"}],
/// "footprints": [{"points", "height"}]}`.
#[derive(Debug, Default, Serialize, Deserialize)]
struct LayoutFile {
    #[serde(default)]
    roads: Vec<LayoutFileRoad>,
    #[serde(default)]
    footprints: Vec<LayoutFileFootprint>,
}

/// Parse the native JSON scene layout. The same normalization as
/// [`extract_layout`] applies: CW footprints are reversed, degenerate
/// entities are skipped with a warning.
pub fn parse_layout_json(json_text: &str) -> Result<Layout, MapError> {
    let file: LayoutFile =
        serde_json::from_str(json_text).map_err(|e| MapError::InvalidLayout(e.to_string()))?;
    let mut layout = Layout::default();
    for (i, road) in file.roads.iter().enumerate() {
        if road.width <= 0.0 {
            return Err(MapError::InvalidLayout(format!("road {i}: width must be > 0")));
        }
        let mut centerline: Vec<Vec2> = Vec::new();
        for &[x, y] in &road.points {
            let p = v2(x, y);
            if centerline.last() != Some(&p) {
                centerline.push(p);
            }
        }
        if centerline.len() < 2 {
            layout.warnings.push(format!("road {i}: degenerate (zero length)"));
            continue;
        }
        let lanes = match road.lanes {
            Some(n) if n >= 1 => n,
            Some(_) => return Err(MapError::InvalidLayout(format!("road {i}: lanes must be >= 1"))),
            None => ((road.width / 3.0).round() as i64).max(1) as u32,
        };
        layout.roads.push(RoadSpec {
            centerline,
            width: road.width,
            lane_count: lanes,
        });
    }
    for (i, fp) in file.footprints.iter().enumerate() {
        let polygon: Vec<Vec2> = fp.points.iter().map(|&[x, y]| v2(x, y)).collect();
        match normalize_footprint(polygon) {
            Ok(poly) => {
                if let Some(h) = fp.height {
                    if h <= 0.0 {
                        return Err(MapError::InvalidLayout(format!(
                            "footprint {i}: height must be > 0"
                        )));
                    }
                    layout.heights.insert(layout.footprints.len(), h);
                }
                layout.footprints.push(FootprintSpec {
                    polygon: poly,
                    tags: BTreeMap::new(),
                });
            }
            Err(reason) => layout.warnings.push(format!("footprint {i}: {reason}")),
        }
    }
    Ok(layout)
}

/// Load a layout from either input format, keyed on the file extension
/// (`.osm`/`.xml` parse as OSM, anything else as JSON).
pub fn load_layout(path: &Path) -> Result<Layout, MapError> {
    let text = std::fs::read_to_string(path).map_err(|e| MapError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ext.eq_ignore_ascii_case("osm") || ext.eq_ignore_ascii_case("xml") {
        let doc = parse_osm(&text)?;
        Ok(extract_layout(&doc))
    } else {
        parse_layout_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn minimal_osm() -> &'static str {
        r#"<?xml version="1.0"?>
<osm version="0.6">
  <node id="1" lat="40.0" lon="116.0"/>
  <node id="2" lat="40.001" lon="116.0"/>
  <way id="10">
    <nd ref="1"/>
    <nd ref="2"/>
    <tag k="highway" v="residential"/>
  </way>
</osm>"#
    }

    #[test]
    fn parses_minimal_document() {
        let doc = parse_osm(minimal_osm()).unwrap();
        assert_eq!(doc.nodes.len(), 2);
        assert_eq!(doc.ways.len(), 1);
        assert_eq!(doc.ways[0].tags["highway"], "residential");
        assert_relative_eq!(doc.origin.lat, 40.0005, epsilon = 1e-12);
    }

    #[test]
    fn dangling_node_ref_is_reported() {
        let xml = r#"<osm version="0.6">
  <node id="1" lat="0" lon="0"/>
  <node id="2" lat="0.1" lon="0"/>
  <way id="10"><nd ref="1"/><nd ref="99"/></way>
</osm>"#;
        match parse_osm(xml) {
            Err(MapError::DanglingNodeRef { way: 10, node: 99 }) => {}
            other => panic!("expected DanglingNodeRef(99), got {other:?}"),
        }
    }

    #[test]
    fn closed_way_keeps_first_equals_last() {
        let xml = r#"<osm version="0.6">
  <node id="1" lat="0" lon="0"/>
  <node id="2" lat="0" lon="0.001"/>
  <node id="3" lat="0.001" lon="0.001"/>
  <node id="4" lat="0.001" lon="0"/>
  <way id="20">
    <nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/>
    <tag k="building" v="yes"/>
  </way>
</osm>"#;
        let doc = parse_osm(xml).unwrap();
        let way = &doc.ways[0];
        assert!(way.is_closed());
        assert_eq!(way.node_refs.first(), way.node_refs.last());
        assert_eq!(way.node_refs.len(), 5);
    }

    #[test]
    fn malformed_xml_is_rejected() {
        assert!(matches!(
            parse_osm("<osm><node id=\"1\""),
            Err(MapError::MalformedXml { .. })
        ));
    }

    #[test]
    fn origin_projects_to_zero() {
        let origin = LatLon { lat: 40.0, lon: 116.0 };
        let p = project_local(40.0, 116.0, origin);
        assert_eq!(p, v2(0.0, 0.0));
    }

    #[test]
    fn millidegree_north_is_111m() {
        // 6371000 * 0.001 * pi / 180 = 111.1949...
        let origin = LatLon { lat: 40.0, lon: 116.0 };
        let p = project_local(40.001, 116.0, origin);
        assert_relative_eq!(p.y, 111.19, epsilon = 0.01);
        assert_relative_eq!(p.x, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn millidegree_east_at_equator_is_111m() {
        let origin = LatLon { lat: 0.0, lon: 10.0 };
        let p = project_local(0.0, 10.001, origin);
        assert_relative_eq!(p.x, 111.19, epsilon = 0.01);
    }

    #[test]
    fn extract_routes_tags() {
        let xml = r#"<osm version="0.6">
  <node id="1" lat="0" lon="0"/>
  <node id="2" lat="0" lon="0.002"/>
  <node id="3" lat="0.001" lon="0"/>
  <node id="4" lat="0.001" lon="0.001"/>
  <node id="5" lat="0.002" lon="0.001"/>
  <node id="6" lat="0.002" lon="0"/>
  <way id="1"><nd ref="1"/><nd ref="2"/><tag k="highway" v="primary"/></way>
  <way id="2">
    <nd ref="3"/><nd ref="4"/><nd ref="5"/><nd ref="6"/><nd ref="3"/>
    <tag k="building" v="yes"/>
  </way>
</osm>"#;
        let layout = extract_layout(&parse_osm(xml).unwrap());
        assert_eq!(layout.roads.len(), 1);
        assert_eq!(layout.footprints.len(), 1);
        assert_eq!(layout.roads[0].width, 9.0);
        assert_eq!(layout.roads[0].lane_count, 3);
        assert!(layout.warnings.is_empty());
    }

    #[test]
    fn clockwise_footprint_is_reversed() {
        // Points listed clockwise; extraction must flip them to CCW.
        let json = r#"{"footprints": [{"points": [[0,0],[0,4],[4,4],[4,0]], "height": 9.0}]}"#;
        let layout = parse_layout_json(json).unwrap();
        assert_eq!(layout.footprints.len(), 1);
        assert!(signed_area(&layout.footprints[0].polygon) > 0.0);
        assert_eq!(layout.heights[&0], 9.0);
    }

    #[test]
    fn bow_tie_is_skipped_with_warning() {
        let json = r#"{"footprints": [{"points": [[0,0],[2,2],[2,0],[0,2]]}]}"#;
        let layout = parse_layout_json(json).unwrap();
        assert_eq!(layout.footprints.len(), 0);
        assert_eq!(layout.warnings.len(), 1);
    }

    #[test]
    fn duplicate_consecutive_refs_collapse() {
        let xml = r#"<osm version="0.6">
  <node id="1" lat="0" lon="0"/>
  <node id="2" lat="0.001" lon="0"/>
  <way id="1"><nd ref="1"/><nd ref="1"/><nd ref="2"/><tag k="highway" v="x"/></way>
</osm>"#;
        let doc = parse_osm(xml).unwrap();
        assert_eq!(doc.ways[0].node_refs, vec![1, 2]);
    }

    #[test]
    fn serialize_parse_fixpoint() {
        let doc = parse_osm(minimal_osm()).unwrap();
        let round = parse_osm(&write_osm(&doc)).unwrap();
        assert_eq!(doc, round);
        // And once more to pin the fixpoint.
        assert_eq!(round, parse_osm(&write_osm(&round)).unwrap());
    }

    #[test]
    fn extract_is_order_preserving() {
        let xml = r#"<osm version="0.6">
  <node id="1" lat="0" lon="0"/>
  <node id="2" lat="0" lon="0.001"/>
  <node id="3" lat="0.001" lon="0"/>
  <node id="4" lat="0.001" lon="0.001"/>
  <way id="7"><nd ref="1"/><nd ref="2"/><tag k="highway" v="motorway"/></way>
  <way id="8"><nd ref="3"/><nd ref="4"/><tag k="highway" v="residential"/></way>
</osm>"#;
        let layout = extract_layout(&parse_osm(xml).unwrap());
        assert_eq!(layout.roads.len(), 2);
        assert_eq!(layout.roads[0].width, 12.0); // way 7 first
        assert_eq!(layout.roads[1].width, 6.0);
    }
}
