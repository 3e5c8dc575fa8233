//! Dataset persistence and surgery: VOC XML, image and flow files,
//! statistics, filtering, splitting, mixing, sampling.
//!
//! All surgery operations are pure (they return a new index and leave the
//! input untouched) and deterministic under a fixed seed. `save_to` writes
//! annotations and split lists and copies whatever image channels exist at
//! the source, so derived datasets remain usable for evaluation even when
//! only the labels changed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::groundtruth::{
    classify_area, classify_occlusion, AreaClass, ClassThresholds, FlowField, InstanceObservation,
    OcclusionClass, VocBox,
};
use crate::mix64;
use crate::render::FrameBuffers;
use crate::seed::salt;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed annotation xml: {message}")]
    MalformedXml { message: String },
    #[error("box {bbox:?} out of bounds for {width}x{height} image '{id}'")]
    BoxOutOfBounds { id: String, bbox: (i64, i64, i64, i64), width: u32, height: u32 },
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image decode failure at {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("flow file {path}: {message}")]
    FlowFormat { path: PathBuf, message: String },
    #[error("object in image '{image}' lacks occ_rate; occlusion filter needs generated data")]
    MissingOcclusionData { image: String },
    #[error("duplicate mix namespace '{0}'")]
    DuplicateNamespace(String),
    #[error("sample of {requested} from {available} images")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("invalid index: {0}")]
    InvalidIndex(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

/// One annotated object in PASCAL VOC terms. `occ_rate` is our extension
/// element; standard VOC consumers ignore it and our parser treats it as
/// optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocObject {
    pub name: String,
    /// (xmin, ymin, xmax, ymax), 1-based inclusive.
    pub bndbox: VocBox,
    pub truncated: bool,
    pub difficult: bool,
    pub occ_rate: Option<f64>,
}

/// Inclusive box area in pixels.
pub fn box_area(b: VocBox) -> u32 {
    (b.2 - b.0 + 1) * (b.3 - b.1 + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub width: u32,
    pub height: u32,
    pub objects: Vec<VocObject>,
}

/// An on-disk dataset: image records plus named id lists. `images` is kept
/// sorted by id; ids are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetIndex {
    pub root: PathBuf,
    pub provenance: String,
    pub images: Vec<ImageRecord>,
    pub splits: BTreeMap<String, Vec<String>>,
    /// Source root per image when it differs from `root` (set by `mix`).
    pub origins: BTreeMap<String, PathBuf>,
}

pub const IMAGE_DIR: &str = "JPEGImages";
pub const ANNOTATION_DIR: &str = "Annotations";
pub const DEPTH_DIR: &str = "Depth";
pub const INSTANCE_DIR: &str = "Instance";
pub const CLASS_DIR: &str = "Class";
pub const FLOW_DIR: &str = "Flow";
pub const SPLIT_DIR: &str = "ImageSets/Main";

/// Fixed palette for the indexed class PNG, positioned by class code.
/// Index 0 (background) is black.
pub const CLASS_PALETTE: [[u8; 3]; 11] = [
    [0, 0, 0],
    [196, 48, 48],   // car
    [255, 160, 40],  // bus
    [150, 90, 200],  // truck
    [128, 128, 160], // building
    [80, 80, 90],    // road
    [60, 160, 70],   // vegetation
    [170, 130, 90],  // fence
    [230, 220, 60],  // traffic_sign
    [60, 200, 220],  // traffic_light
    [110, 120, 100], // ground
];

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Serialize a record as a VOC annotation document.
pub fn write_voc_xml(record: &ImageRecord) -> String {
    let mut s = String::new();
    s.push_str("<annotation>\n");
    let _ = writeln!(s, "  <folder>{IMAGE_DIR}</folder>");
    let _ = writeln!(s, "  <filename>{}.png</filename>", xml_escape(&record.id));
    s.push_str("  <size>\n");
    let _ = writeln!(s, "    <width>{}</width>", record.width);
    let _ = writeln!(s, "    <height>{}</height>", record.height);
    s.push_str("    <depth>3</depth>\n  </size>\n");
    for o in &record.objects {
        let (xmin, ymin, xmax, ymax) = o.bndbox;
        assert!(
            xmin >= 1 && xmin <= xmax && xmax <= record.width,
            "box x out of bounds"
        );
        assert!(
            ymin >= 1 && ymin <= ymax && ymax <= record.height,
            "box y out of bounds"
        );
        s.push_str("  <object>\n");
        let _ = writeln!(s, "    <name>{}</name>", xml_escape(&o.name));
        s.push_str("    <pose>Unspecified</pose>\n");
        let _ = writeln!(s, "    <truncated>{}</truncated>", o.truncated as u8);
        let _ = writeln!(s, "    <difficult>{}</difficult>", o.difficult as u8);
        s.push_str("    <bndbox>\n");
        let _ = writeln!(s, "      <xmin>{xmin}</xmin>");
        let _ = writeln!(s, "      <ymin>{ymin}</ymin>");
        let _ = writeln!(s, "      <xmax>{xmax}</xmax>");
        let _ = writeln!(s, "      <ymax>{ymax}</ymax>");
        s.push_str("    </bndbox>\n");
        if let Some(r) = o.occ_rate {
            let _ = writeln!(s, "    <occ_rate>{r}</occ_rate>");
        }
        s.push_str("  </object>\n");
    }
    s.push_str("</annotation>\n");
    s
}

fn req_child<'a>(
    node: roxmltree::Node<'a, 'a>,
    name: &str,
) -> Result<roxmltree::Node<'a, 'a>, DatasetError> {
    node.children()
        .find(|c| c.has_tag_name(name))
        .ok_or_else(|| DatasetError::MalformedXml { message: format!("missing <{name}>") })
}

fn text_of(node: roxmltree::Node, name: &str) -> Result<String, DatasetError> {
    Ok(req_child(node, name)?.text().unwrap_or("").trim().to_string())
}

fn int_of<T: std::str::FromStr>(node: roxmltree::Node, name: &str) -> Result<T, DatasetError> {
    let t = text_of(node, name)?;
    t.parse().map_err(|_| DatasetError::MalformedXml {
        message: format!("<{name}> is not a number: '{t}'"),
    })
}

/// Parse a VOC annotation document. Unknown elements are ignored; boxes
/// violating the size element are rejected.
pub fn parse_voc_xml(xml: &str) -> Result<ImageRecord, DatasetError> {
    let doc = roxmltree::Document::parse(xml)
        .map_err(|e| DatasetError::MalformedXml { message: e.to_string() })?;
    let ann = doc.root_element();
    if !ann.has_tag_name("annotation") {
        return Err(DatasetError::MalformedXml { message: "root is not <annotation>".into() });
    }
    let filename = text_of(ann, "filename")?;
    let id = filename.strip_suffix(".png").unwrap_or(&filename).to_string();
    let size = req_child(ann, "size")?;
    let width: u32 = int_of(size, "width")?;
    let height: u32 = int_of(size, "height")?;

    let mut objects = Vec::new();
    for obj in ann.children().filter(|c| c.has_tag_name("object")) {
        let name = text_of(obj, "name")?;
        let truncated: i64 = int_of(obj, "truncated")?;
        let difficult: i64 = int_of(obj, "difficult")?;
        let bnd = req_child(obj, "bndbox")?;
        let xmin: i64 = int_of(bnd, "xmin")?;
        let ymin: i64 = int_of(bnd, "ymin")?;
        let xmax: i64 = int_of(bnd, "xmax")?;
        let ymax: i64 = int_of(bnd, "ymax")?;
        if xmin < 1 || ymin < 1 || xmin > xmax || ymin > ymax || xmax > width as i64 || ymax > height as i64 {
            return Err(DatasetError::BoxOutOfBounds {
                id,
                bbox: (xmin, ymin, xmax, ymax),
                width,
                height,
            });
        }
        let occ_rate = match obj.children().find(|c| c.has_tag_name("occ_rate")) {
            Some(n) => {
                let t = n.text().unwrap_or("").trim().to_string();
                Some(t.parse::<f64>().map_err(|_| DatasetError::MalformedXml {
                    message: format!("<occ_rate> is not a number: '{t}'"),
                })?)
            }
            None => None,
        };
        objects.push(VocObject {
            name,
            bndbox: (xmin as u32, ymin as u32, xmax as u32, ymax as u32),
            truncated: truncated != 0,
            difficult: difficult != 0,
            occ_rate,
        });
    }
    Ok(ImageRecord { id, width, height, objects })
}

/// Build a record from frame annotations; box and flags come straight from
/// each observation, difficult is never set by the generator.
pub fn record_from_observations(
    id: &str,
    width: u32,
    height: u32,
    observations: &[InstanceObservation],
) -> ImageRecord {
    ImageRecord {
        id: id.to_string(),
        width,
        height,
        objects: observations
            .iter()
            .map(|o| VocObject {
                name: o.class.name().to_string(),
                bndbox: o.bbox_visible,
                truncated: o.truncated,
                difficult: false,
                occ_rate: Some(o.occlusion_rate),
            })
            .collect(),
    }
}

// ---- image/flow file writers ----

fn create_parent(path: &Path) -> Result<(), DatasetError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    Ok(())
}

fn png_encoder<'a>(
    file: &'a mut BufWriter<fs::File>,
    width: u32,
    height: u32,
    color: png::ColorType,
    depth: png::BitDepth,
) -> png::Encoder<'a, &'a mut BufWriter<fs::File>> {
    let mut enc = png::Encoder::new(file, width, height);
    enc.set_color(color);
    enc.set_depth(depth);
    enc
}

fn finish_png<W: Write>(
    enc: png::Encoder<W>,
    data: &[u8],
    path: &Path,
) -> Result<(), DatasetError> {
    let mut writer = enc
        .write_header()
        .map_err(|e| DatasetError::Decode { path: path.to_path_buf(), message: e.to_string() })?;
    writer
        .write_image_data(data)
        .map_err(|e| DatasetError::Decode { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(())
}

/// 8-bit RGB PNG of the color buffer.
pub fn write_rgb_png(path: &Path, bufs: &FrameBuffers) -> Result<(), DatasetError> {
    create_parent(path)?;
    let mut file = BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    let enc = png_encoder(&mut file, bufs.width, bufs.height, png::ColorType::Rgb, png::BitDepth::Eight);
    finish_png(enc, &bufs.rgb, path)
}

/// 8-bit indexed PNG of the class buffer with the fixed palette.
pub fn write_class_png(path: &Path, bufs: &FrameBuffers) -> Result<(), DatasetError> {
    create_parent(path)?;
    let data: Vec<u8> = bufs.class.iter().map(|&c| c.min(255) as u8).collect();
    let palette: Vec<u8> = CLASS_PALETTE.iter().flatten().copied().collect();
    let mut file = BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    let mut enc = png_encoder(&mut file, bufs.width, bufs.height, png::ColorType::Indexed, png::BitDepth::Eight);
    enc.set_palette(palette);
    finish_png(enc, &data, path)
}

/// 16-bit grayscale PNG of instance ids.
pub fn write_instance_png(path: &Path, bufs: &FrameBuffers) -> Result<(), DatasetError> {
    create_parent(path)?;
    let mut data = Vec::with_capacity(bufs.instance.len() * 2);
    for &i in &bufs.instance {
        data.extend_from_slice(&(i.min(u16::MAX as u32) as u16).to_be_bytes());
    }
    let mut file = BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    let enc = png_encoder(&mut file, bufs.width, bufs.height, png::ColorType::Grayscale, png::BitDepth::Sixteen);
    finish_png(enc, &data, path)
}

/// Depth in centimeters, floored, saturating at 65535; 0 marks no hit.
pub fn depth_to_cm(depth_m: f32) -> u16 {
    if !depth_m.is_finite() {
        return 0;
    }
    let cm = (depth_m as f64 * 100.0).floor();
    cm.clamp(0.0, 65535.0) as u16
}

/// 16-bit grayscale PNG of depth in centimeters.
pub fn write_depth_png(path: &Path, bufs: &FrameBuffers) -> Result<(), DatasetError> {
    create_parent(path)?;
    let mut data = Vec::with_capacity(bufs.depth.len() * 2);
    for &d in &bufs.depth {
        data.extend_from_slice(&depth_to_cm(d).to_be_bytes());
    }
    let mut file = BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    let enc = png_encoder(&mut file, bufs.width, bufs.height, png::ColorType::Grayscale, png::BitDepth::Sixteen);
    finish_png(enc, &data, path)
}

/// Decode a 16-bit grayscale PNG (depth or instance channel).
pub fn read_gray16_png(path: &Path) -> Result<(u32, u32, Vec<u16>), DatasetError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let mut reader = decoder
        .read_info()
        .map_err(|e| DatasetError::Decode { path: path.to_path_buf(), message: e.to_string() })?;
    let size = reader.output_buffer_size().ok_or_else(|| DatasetError::Decode {
        path: path.to_path_buf(),
        message: "output size overflow".into(),
    })?;
    let mut buf = vec![0u8; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| DatasetError::Decode { path: path.to_path_buf(), message: e.to_string() })?;
    if info.bit_depth != png::BitDepth::Sixteen || info.color_type != png::ColorType::Grayscale {
        return Err(DatasetError::Decode {
            path: path.to_path_buf(),
            message: format!("expected 16-bit grayscale, got {:?}/{:?}", info.color_type, info.bit_depth),
        });
    }
    let n = info.width as usize * info.height as usize;
    let data = (0..n)
        .map(|i| u16::from_be_bytes([buf[2 * i], buf[2 * i + 1]]))
        .collect();
    Ok((info.width, info.height, data))
}

const FLOW_MAGIC: &[u8; 4] = b"PEFL";

/// Binary flow file: magic "PEFL"; W, H as LE u32; row-major LE f32
/// u-plane then v-plane; then H*W validity bytes.
pub fn write_flow_file(path: &Path, flow: &FlowField) -> Result<(), DatasetError> {
    create_parent(path)?;
    let mut w = BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(io_err(path));
    write(FLOW_MAGIC)?;
    write(&flow.width.to_le_bytes())?;
    write(&flow.height.to_le_bytes())?;
    for plane in [&flow.u, &flow.v] {
        for &f in plane.iter() {
            write(&f.to_le_bytes())?;
        }
    }
    let validity: Vec<u8> = flow.valid.iter().map(|&v| v as u8).collect();
    write(&validity)?;
    Ok(())
}

pub fn read_flow_file(path: &Path) -> Result<FlowField, DatasetError> {
    let bad = |message: &str| DatasetError::FlowFormat {
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    let mut r = BufReader::new(fs::File::open(path).map_err(io_err(path))?);
    let mut header = [0u8; 12];
    r.read_exact(&mut header).map_err(io_err(path))?;
    if &header[0..4] != FLOW_MAGIC {
        return Err(bad("bad magic"));
    }
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let n = width as usize * height as usize;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(io_err(path))?;
    if payload.len() != 8 * n + n {
        return Err(bad("truncated payload"));
    }
    let plane = |off: usize| -> Vec<f32> {
        (0..n)
            .map(|i| f32::from_le_bytes(payload[off + 4 * i..off + 4 * i + 4].try_into().unwrap()))
            .collect()
    };
    Ok(FlowField {
        width,
        height,
        u: plane(0),
        v: plane(4 * n),
        valid: payload[8 * n..].iter().map(|&b| b != 0).collect(),
    })
}

/// Output paths for one frame under a dataset root.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePaths {
    pub rgb: PathBuf,
    pub annotation: PathBuf,
    pub depth: PathBuf,
    pub instance: PathBuf,
    pub class: PathBuf,
    pub flow: PathBuf,
}

impl FramePaths {
    pub fn new(root: &Path, id: &str) -> FramePaths {
        FramePaths {
            rgb: root.join(IMAGE_DIR).join(format!("{id}.png")),
            annotation: root.join(ANNOTATION_DIR).join(format!("{id}.xml")),
            depth: root.join(DEPTH_DIR).join(format!("{id}.png")),
            instance: root.join(INSTANCE_DIR).join(format!("{id}.png")),
            class: root.join(CLASS_DIR).join(format!("{id}.png")),
            flow: root.join(FLOW_DIR).join(format!("{id}.pefl")),
        }
    }
}

/// Write every per-frame artifact: color, class, instance, depth, flow,
/// and the VOC annotation.
pub fn write_frame_outputs(
    bufs: &FrameBuffers,
    flow: &FlowField,
    record: &ImageRecord,
    paths: &FramePaths,
) -> Result<(), DatasetError> {
    write_rgb_png(&paths.rgb, bufs)?;
    write_class_png(&paths.class, bufs)?;
    write_instance_png(&paths.instance, bufs)?;
    write_depth_png(&paths.depth, bufs)?;
    write_flow_file(&paths.flow, flow)?;
    create_parent(&paths.annotation)?;
    fs::write(&paths.annotation, write_voc_xml(record)).map_err(io_err(&paths.annotation))?;
    Ok(())
}

// ---- index load/save ----

#[derive(Serialize, Deserialize)]
struct SavedManifest {
    provenance: String,
    image_count: usize,
    object_count: usize,
}

impl DatasetIndex {
    pub fn new(root: PathBuf, provenance: String) -> DatasetIndex {
        DatasetIndex {
            root,
            provenance,
            images: Vec::new(),
            splits: BTreeMap::new(),
            origins: BTreeMap::new(),
        }
    }

    pub fn image_count(&self) -> usize {
        self.images.len()
    }

    pub fn object_count(&self) -> usize {
        self.images.iter().map(|r| r.objects.len()).sum()
    }

    fn source_root(&self, id: &str) -> &Path {
        self.origins.get(id).map(|p| p.as_path()).unwrap_or(&self.root)
    }

    /// Load a dataset from its annotation files and split lists. The file
    /// stem is the authoritative image id.
    pub fn load(root: &Path) -> Result<DatasetIndex, DatasetError> {
        let ann_dir = root.join(ANNOTATION_DIR);
        let mut entries: Vec<PathBuf> = fs::read_dir(&ann_dir)
            .map_err(io_err(&ann_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "xml"))
            .collect();
        entries.sort();

        let mut images = Vec::new();
        let mut seen = BTreeSet::new();
        for path in entries {
            let xml = fs::read_to_string(&path).map_err(io_err(&path))?;
            let mut record = parse_voc_xml(&xml)?;
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| DatasetError::InvalidIndex(format!("bad file name {path:?}")))?;
            record.id = stem.to_string();
            if !seen.insert(record.id.clone()) {
                return Err(DatasetError::InvalidIndex(format!("duplicate image id '{stem}'")));
            }
            images.push(record);
        }

        let mut splits = BTreeMap::new();
        let split_dir = root.join(SPLIT_DIR);
        if split_dir.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(&split_dir)
                .map_err(io_err(&split_dir))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                .collect();
            files.sort();
            for path in files {
                let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string();
                let text = fs::read_to_string(&path).map_err(io_err(&path))?;
                let ids: Vec<String> =
                    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
                for id in &ids {
                    if !seen.contains(id) {
                        return Err(DatasetError::InvalidIndex(format!(
                            "split '{name}' references unknown image '{id}'"
                        )));
                    }
                }
                splits.insert(name, ids);
            }
        }

        let provenance = fs::read_to_string(root.join("manifest.json"))
            .ok()
            .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
            .and_then(|v| {
                v.get("provenance")
                    .or_else(|| v.get("preset"))
                    .and_then(|p| p.as_str().map(String::from))
            })
            .unwrap_or_else(|| "imported".to_string());

        Ok(DatasetIndex {
            root: root.to_path_buf(),
            provenance,
            images,
            splits,
            origins: BTreeMap::new(),
        })
    }

    /// Write annotations, split lists, and a small manifest under `dest`,
    /// copying any image channels that exist at the source. Returns the
    /// re-rooted index.
    pub fn save_to(&self, dest: &Path) -> Result<DatasetIndex, DatasetError> {
        let ann_dir = dest.join(ANNOTATION_DIR);
        fs::create_dir_all(&ann_dir).map_err(io_err(&ann_dir))?;
        for record in &self.images {
            let path = ann_dir.join(format!("{}.xml", record.id));
            fs::write(&path, write_voc_xml(record)).map_err(io_err(&path))?;
            let src_root = self.source_root(&record.id);
            for (sub, ext) in [
                (IMAGE_DIR, "png"),
                (DEPTH_DIR, "png"),
                (INSTANCE_DIR, "png"),
                (CLASS_DIR, "png"),
                (FLOW_DIR, "pefl"),
            ] {
                let src = src_root.join(sub).join(format!("{}.{ext}", record.id));
                if src.is_file() {
                    let dst = dest.join(sub).join(format!("{}.{ext}", record.id));
                    if src != dst {
                        create_parent(&dst)?;
                        fs::copy(&src, &dst).map_err(io_err(&src))?;
                    }
                }
            }
        }

        let split_dir = dest.join(SPLIT_DIR);
        fs::create_dir_all(&split_dir).map_err(io_err(&split_dir))?;
        for (name, ids) in &self.splits {
            let path = split_dir.join(format!("{name}.txt"));
            let mut text = String::new();
            for id in ids {
                text.push_str(id);
                text.push('\n');
            }
            fs::write(&path, text).map_err(io_err(&path))?;
        }

        let manifest = SavedManifest {
            provenance: self.provenance.clone(),
            image_count: self.image_count(),
            object_count: self.object_count(),
        };
        let mpath = dest.join("manifest.json");
        fs::write(&mpath, serde_json::to_string_pretty(&manifest).expect("serializable"))
            .map_err(io_err(&mpath))?;

        let mut out = self.clone();
        out.root = dest.to_path_buf();
        out.origins.clear();
        Ok(out)
    }

    /// Sub-index of the images whose ids are in `keep`; order, splits, and
    /// origins filter along.
    fn retain_images(&self, keep: &BTreeSet<String>) -> DatasetIndex {
        DatasetIndex {
            root: self.root.clone(),
            provenance: self.provenance.clone(),
            images: self.images.iter().filter(|r| keep.contains(&r.id)).cloned().collect(),
            splits: self
                .splits
                .iter()
                .map(|(k, ids)| {
                    (k.clone(), ids.iter().filter(|i| keep.contains(*i)).cloned().collect())
                })
                .collect(),
            origins: self
                .origins
                .iter()
                .filter(|(k, _)| keep.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

// ---- statistics ----

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AreaHistogram {
    pub small: usize,
    pub medium: usize,
    pub large: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OcclusionHistogram {
    pub slightly: usize,
    pub partly: usize,
    pub largely: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub image_count: usize,
    pub object_count: usize,
    pub per_class: BTreeMap<String, usize>,
    /// objects-per-image -> number of images (images with 0 objects included).
    pub instances_per_image: BTreeMap<usize, usize>,
    pub area: AreaHistogram,
    /// None when any object lacks occ_rate (imported data).
    pub occlusion: Option<OcclusionHistogram>,
}

impl DatasetStats {
    pub fn mean_instances(&self) -> f64 {
        if self.image_count == 0 {
            0.0
        } else {
            self.object_count as f64 / self.image_count as f64
        }
    }

    pub fn small_fraction(&self) -> f64 {
        if self.object_count == 0 {
            0.0
        } else {
            self.area.small as f64 / self.object_count as f64
        }
    }

    pub fn largely_fraction(&self) -> Option<f64> {
        let occ = self.occlusion.as_ref()?;
        if self.object_count == 0 {
            return Some(0.0);
        }
        Some(occ.largely as f64 / self.object_count as f64)
    }
}

/// Histograms over classes, per-image instance counts, box areas, and
/// occlusion rates (when present), with the default thresholds.
pub fn compute_stats(index: &DatasetIndex) -> DatasetStats {
    let th = ClassThresholds::default();
    let mut per_class: BTreeMap<String, usize> = BTreeMap::new();
    let mut instances_per_image: BTreeMap<usize, usize> = BTreeMap::new();
    let mut area = AreaHistogram::default();
    let mut occ = OcclusionHistogram::default();
    let mut occ_available = true;
    let mut object_count = 0usize;

    for record in &index.images {
        *instances_per_image.entry(record.objects.len()).or_insert(0) += 1;
        for o in &record.objects {
            object_count += 1;
            *per_class.entry(o.name.clone()).or_insert(0) += 1;
            match classify_area(o.bndbox, &th) {
                AreaClass::Small => area.small += 1,
                AreaClass::Medium => area.medium += 1,
                AreaClass::Large => area.large += 1,
            }
            match o.occ_rate {
                Some(r) => match classify_occlusion(r, &th) {
                    OcclusionClass::Slightly => occ.slightly += 1,
                    OcclusionClass::Partly => occ.partly += 1,
                    OcclusionClass::Largely => occ.largely += 1,
                },
                None => occ_available = false,
            }
        }
    }

    DatasetStats {
        image_count: index.image_count(),
        object_count,
        per_class,
        instances_per_image,
        area,
        occlusion: (occ_available && object_count > 0).then_some(occ),
    }
}

// ---- surgery ----

/// Remove every object with box area below `min_area` pixels, then drop
/// images left without objects.
pub fn filter_min_area(index: &DatasetIndex, min_area: u32) -> DatasetIndex {
    assert!(min_area > 0, "min_area must be positive");
    let mut out = index.clone();
    for record in &mut out.images {
        record.objects.retain(|o| box_area(o.bndbox) >= min_area);
    }
    let keep: BTreeSet<String> =
        out.images.iter().filter(|r| !r.objects.is_empty()).map(|r| r.id.clone()).collect();
    let mut out = out.retain_images(&keep);
    out.origins = index
        .origins
        .iter()
        .filter(|(k, _)| keep.contains(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    out
}

/// Keep only objects that are neither occluded (occ_rate = 0) nor
/// truncated, then drop emptied images. Errors if any object lacks
/// occ_rate.
pub fn filter_fully_visible(index: &DatasetIndex) -> Result<DatasetIndex, DatasetError> {
    for record in &index.images {
        if record.objects.iter().any(|o| o.occ_rate.is_none()) {
            return Err(DatasetError::MissingOcclusionData { image: record.id.clone() });
        }
    }
    let mut out = index.clone();
    for record in &mut out.images {
        record.objects.retain(|o| o.occ_rate == Some(0.0) && !o.truncated);
    }
    let keep: BTreeSet<String> =
        out.images.iter().filter(|r| !r.objects.is_empty()).map(|r| r.id.clone()).collect();
    Ok(out.retain_images(&keep))
}

/// Image-level partition at ratio a:b with round-half-up train sizing and
/// a seed-deterministic shuffle.
pub fn split(index: &DatasetIndex, ratio: (u64, u64), seed: u64) -> (DatasetIndex, DatasetIndex) {
    let (a, b) = ratio;
    assert!(a >= 1 && b >= 1, "ratio parts must be at least 1");
    let n = index.image_count() as u64;
    // floor(n*a/(a+b) + 1/2) in exact integer arithmetic.
    let train_n = ((2 * n * a + (a + b)) / (2 * (a + b))) as usize;

    let mut ids: Vec<&str> = index.images.iter().map(|r| r.id.as_str()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ salt::SPLIT));
    ids.shuffle(&mut rng);
    let train_set: BTreeSet<String> = ids[..train_n].iter().map(|s| s.to_string()).collect();
    let test_set: BTreeSet<String> = ids[train_n..].iter().map(|s| s.to_string()).collect();
    (index.retain_images(&train_set), index.retain_images(&test_set))
}

/// Union of several datasets with ids namespaced `{name}_{id}`.
pub fn mix(parts: &[(&str, &DatasetIndex)]) -> Result<DatasetIndex, DatasetError> {
    let mut seen = BTreeSet::new();
    for (ns, _) in parts {
        if !seen.insert(*ns) {
            return Err(DatasetError::DuplicateNamespace(ns.to_string()));
        }
    }
    let provenance = format!(
        "mix({})",
        parts.iter().map(|(ns, _)| *ns).collect::<Vec<_>>().join(",")
    );
    let mut out = DatasetIndex::new(PathBuf::new(), provenance);
    for (ns, idx) in parts {
        for record in &idx.images {
            let mut r = record.clone();
            r.id = format!("{ns}_{}", record.id);
            out.origins.insert(r.id.clone(), idx.source_root(&record.id).to_path_buf());
            out.images.push(r);
        }
        for (split_name, ids) in &idx.splits {
            let entry = out.splits.entry(split_name.clone()).or_default();
            entry.extend(ids.iter().map(|i| format!("{ns}_{i}")));
        }
    }
    out.images.sort_by(|x, y| x.id.cmp(&y.id));
    Ok(out)
}

/// Seeded choice of n images without replacement, original order kept.
pub fn sample(index: &DatasetIndex, n: usize, seed: u64) -> Result<DatasetIndex, DatasetError> {
    if n > index.image_count() {
        return Err(DatasetError::SampleTooLarge { requested: n, available: index.image_count() });
    }
    let mut ids: Vec<&str> = index.images.iter().map(|r| r.id.as_str()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ salt::SAMPLE));
    ids.shuffle(&mut rng);
    let keep: BTreeSet<String> = ids[..n].iter().map(|s| s.to_string()).collect();
    Ok(index.retain_images(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn obj(name: &str, bbox: VocBox, occ: Option<f64>) -> VocObject {
        VocObject { name: name.into(), bndbox: bbox, truncated: false, difficult: false, occ_rate: occ }
    }

    fn record(id: &str, objects: Vec<VocObject>) -> ImageRecord {
        ImageRecord { id: id.into(), width: 640, height: 480, objects }
    }

    fn fixture_index() -> DatasetIndex {
        let mut idx = DatasetIndex::new(PathBuf::from("/nonexistent"), "fixture".into());
        idx.images = vec![
            record("img_a", vec![
                obj("car", (10, 10, 109, 109), Some(0.0)),      // area 10000
                obj("car", (200, 200, 229, 229), Some(0.5)),    // area 900
            ]),
            record("img_b", vec![
                obj("bus", (1, 1, 60, 60), Some(0.0)),          // area 3600, boundary
            ]),
            record("img_c", vec![
                obj("truck", (5, 5, 34, 34), Some(0.2)),        // area 900
                obj("car", (50, 50, 69, 69), Some(0.0)),        // area 400
            ]),
        ];
        idx
    }

    #[test]
    fn voc_round_trip_single_car() {
        let r = record("frame_000001", vec![obj("car", (10, 20, 110, 220), Some(0.25))]);
        let xml = write_voc_xml(&r);
        assert_eq!(parse_voc_xml(&xml).unwrap(), r);
    }

    #[test]
    fn missing_occ_rate_parses_as_none() {
        let xml = "<annotation><filename>x.png</filename><size><width>100</width>\
                   <height>100</height><depth>3</depth></size><object><name>car</name>\
                   <truncated>0</truncated><difficult>0</difficult><bndbox>\
                   <xmin>1</xmin><ymin>1</ymin><xmax>50</xmax><ymax>50</ymax>\
                   </bndbox></object></annotation>";
        let r = parse_voc_xml(xml).unwrap();
        assert_eq!(r.objects[0].occ_rate, None);
    }

    #[test]
    fn unknown_elements_are_tolerated() {
        let xml = "<annotation><folder>other</folder><filename>x.png</filename>\
                   <segmented>0</segmented><size><width>100</width><height>100</height>\
                   <depth>3</depth></size><object><name>car</name><pose>Left</pose>\
                   <truncated>1</truncated><difficult>0</difficult><custom>7</custom>\
                   <bndbox><xmin>2</xmin><ymin>3</ymin><xmax>4</xmax><ymax>5</ymax>\
                   </bndbox></object></annotation>";
        let r = parse_voc_xml(xml).unwrap();
        assert_eq!(r.objects.len(), 1);
        assert!(r.objects[0].truncated);
        assert_eq!(r.objects[0].bndbox, (2, 3, 4, 5));
    }

    #[test]
    fn box_beyond_size_is_rejected() {
        let xml = "<annotation><filename>x.png</filename><size><width>100</width>\
                   <height>100</height><depth>3</depth></size><object><name>car</name>\
                   <truncated>0</truncated><difficult>0</difficult><bndbox>\
                   <xmin>1</xmin><ymin>1</ymin><xmax>101</xmax><ymax>50</ymax>\
                   </bndbox></object></annotation>";
        assert!(matches!(parse_voc_xml(xml), Err(DatasetError::BoxOutOfBounds { .. })));
    }

    #[test]
    fn malformed_xml_is_an_error() {
        assert!(matches!(parse_voc_xml("<annotation>"), Err(DatasetError::MalformedXml { .. })));
        assert!(matches!(parse_voc_xml("<root></root>"), Err(DatasetError::MalformedXml { .. })));
    }

    proptest! {
        #[test]
        fn voc_round_trip_random_records(
            id in "[a-z0-9_]{1,20}",
            w in 2u32..=4000,
            h in 2u32..=4000,
            raw in proptest::collection::vec(
                (0u32..4000, 0u32..4000, 0u32..4000, 0u32..4000, 0usize..3,
                 proptest::bool::ANY, proptest::bool::ANY,
                 proptest::option::of(0f64..=1.0)),
                0..8,
            ),
        ) {
            let names = ["car", "bus", "truck"];
            let objects: Vec<VocObject> = raw.into_iter().map(|(a, b, c, d, ni, tr, df, occ)| {
                let xmin = a % w + 1;
                let xmax = xmin + c % (w - xmin + 1);
                let ymin = b % h + 1;
                let ymax = ymin + d % (h - ymin + 1);
                VocObject {
                    name: names[ni].into(),
                    bndbox: (xmin, ymin, xmax, ymax),
                    truncated: tr,
                    difficult: df,
                    occ_rate: occ,
                }
            }).collect();
            let r = ImageRecord { id, width: w, height: h, objects };
            prop_assert_eq!(parse_voc_xml(&write_voc_xml(&r)).unwrap(), r);
        }
    }

    #[test]
    fn depth_quantization_examples() {
        assert_eq!(depth_to_cm(1.234), 123);
        assert_eq!(depth_to_cm(700.0), 65535);
        assert_eq!(depth_to_cm(f32::INFINITY), 0);
        assert_eq!(depth_to_cm(0.004), 0);
    }

    #[test]
    fn depth_png_round_trips_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut bufs = FrameBuffers::new(8, 4);
        bufs.depth[0] = 1.234;
        bufs.depth[1] = 700.0;
        bufs.depth[5] = 0.5;
        let path = dir.path().join("d.png");
        write_depth_png(&path, &bufs).unwrap();
        let (w, h, data) = read_gray16_png(&path).unwrap();
        assert_eq!((w, h), (8, 4));
        assert_eq!(data[0], 123);
        assert_eq!(data[1], 65535);
        assert_eq!(data[2], 0); // infinity -> no hit
        assert_eq!(data[5], 50);
    }

    #[test]
    fn instance_png_round_trips_ids() {
        let dir = tempfile::tempdir().unwrap();
        let mut bufs = FrameBuffers::new(4, 4);
        bufs.instance[3] = 7;
        bufs.instance[9] = 40000;
        let path = dir.path().join("i.png");
        write_instance_png(&path, &bufs).unwrap();
        let (_, _, data) = read_gray16_png(&path).unwrap();
        assert_eq!(data[3], 7);
        assert_eq!(data[9], 40000);
        assert_eq!(data[0], 0);
    }

    #[test]
    fn flow_file_round_trips_bit_exact() {
        use rand::Rng;
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let (w, h) = (23u32, 11u32);
        let n = (w * h) as usize;
        let mut flow = FlowField::invalid(w, h);
        for i in 0..n {
            if rng.random_bool(0.8) {
                flow.valid[i] = true;
                flow.u[i] = rng.random_range(-500.0f32..500.0);
                flow.v[i] = rng.random_range(-500.0f32..500.0);
            }
        }
        let path = dir.path().join("f.pefl");
        write_flow_file(&path, &flow).unwrap();
        let back = read_flow_file(&path).unwrap();
        assert_eq!(back.width, w);
        assert_eq!(back.height, h);
        for i in 0..n {
            assert_eq!(back.u[i].to_bits(), flow.u[i].to_bits());
            assert_eq!(back.v[i].to_bits(), flow.v[i].to_bits());
            assert_eq!(back.valid[i], flow.valid[i]);
        }
    }

    #[test]
    fn bad_flow_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pefl");
        fs::write(&path, b"NOPE\x01\x00\x00\x00\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_flow_file(&path), Err(DatasetError::FlowFormat { .. })));
    }

    #[test]
    fn empty_dataset_stats_are_zero() {
        let idx = DatasetIndex::new(PathBuf::new(), "empty".into());
        let s = compute_stats(&idx);
        assert_eq!(s.image_count, 0);
        assert_eq!(s.object_count, 0);
        assert!(s.per_class.is_empty());
        assert_eq!(s.occlusion, None);
    }

    #[test]
    fn two_car_stats_example() {
        let mut idx = DatasetIndex::new(PathBuf::new(), "t".into());
        idx.images = vec![record("i", vec![
            obj("car", (1, 1, 30, 30), Some(0.0)),    // area 900 -> Small
            obj("car", (1, 1, 100, 100), Some(0.0)),  // area 10000 -> Large
        ])];
        let s = compute_stats(&idx);
        assert_eq!(s.area.small, 1);
        assert_eq!(s.area.large, 1);
        assert_eq!(s.area.medium, 0);
        assert_eq!(s.instances_per_image, BTreeMap::from([(2, 1)]));
        assert_eq!(s.per_class["car"], 2);
        assert_eq!(s.area.small + s.area.medium + s.area.large, s.object_count);
    }

    #[test]
    fn min_area_filter_matches_enumeration() {
        let idx = fixture_index();
        let out = filter_min_area(&idx, 3600);
        // Survivors: img_a keeps only the 10000px car; img_b untouched;
        // img_c loses both objects and is dropped.
        assert_eq!(out.image_count(), 2);
        assert_eq!(out.object_count(), 2);
        assert_eq!(out.images[0].id, "img_a");
        assert_eq!(out.images[0].objects.len(), 1);
        assert_eq!(out.images[1].id, "img_b");
        // Original untouched.
        assert_eq!(idx.image_count(), 3);
        assert_eq!(idx.object_count(), 5);
    }

    #[test]
    fn min_area_filter_is_idempotent() {
        let idx = fixture_index();
        let once = filter_min_area(&idx, 3600);
        let twice = filter_min_area(&once, 3600);
        assert_eq!(once, twice);
    }

    #[test]
    fn fully_visible_filter_matches_enumeration() {
        let idx = fixture_index();
        let out = filter_fully_visible(&idx).unwrap();
        // occ=0 objects: img_a's big car, img_b's bus, img_c's small car.
        assert_eq!(out.image_count(), 3);
        assert_eq!(out.object_count(), 3);
        assert!(out.images.iter().all(|r| r.objects.iter().all(|o| o.occ_rate == Some(0.0))));
        let again = filter_fully_visible(&out).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn truncated_objects_are_not_fully_visible() {
        let mut idx = fixture_index();
        idx.images[1].objects[0].truncated = true;
        let out = filter_fully_visible(&idx).unwrap();
        assert!(!out.images.iter().any(|r| r.id == "img_b"));
    }

    #[test]
    fn occlusion_filter_requires_rates() {
        let mut idx = fixture_index();
        idx.images[2].objects[0].occ_rate = None;
        assert!(matches!(
            filter_fully_visible(&idx),
            Err(DatasetError::MissingOcclusionData { ref image }) if image == "img_c"
        ));
    }

    fn n_image_index(n: usize) -> DatasetIndex {
        let mut idx = DatasetIndex::new(PathBuf::new(), "n".into());
        idx.images = (0..n)
            .map(|i| record(&format!("im_{i:04}"), vec![obj("car", (1, 1, 50, 50), Some(0.0))]))
            .collect();
        idx
    }

    #[test]
    fn split_ratios_and_rounding() {
        let (train, test) = split(&n_image_index(100), (3, 1), 9);
        assert_eq!((train.image_count(), test.image_count()), (75, 25));
        let (train, test) = split(&n_image_index(101), (1, 1), 9);
        assert_eq!((train.image_count(), test.image_count()), (51, 50));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let idx = n_image_index(60);
        let (t1, s1) = split(&idx, (3, 1), 7);
        let (t2, s2) = split(&idx, (3, 1), 7);
        assert_eq!(t1, t2);
        assert_eq!(s1, s2);
        let (t3, _) = split(&idx, (3, 1), 8);
        assert_ne!(t1, t3);
    }

    proptest! {
        #[test]
        fn split_partitions_for_all_ratios(n in 0usize..40, a in 1u64..6, b in 1u64..6, seed: u64) {
            let idx = n_image_index(n);
            let (train, test) = split(&idx, (a, b), seed);
            prop_assert_eq!(train.image_count() + test.image_count(), n);
            let t: BTreeSet<_> = train.images.iter().map(|r| &r.id).collect();
            let s: BTreeSet<_> = test.images.iter().map(|r| &r.id).collect();
            prop_assert!(t.is_disjoint(&s));
            let expect = ((2 * n as u64 * a + (a + b)) / (2 * (a + b))) as usize;
            prop_assert_eq!(train.image_count(), expect);
        }

        #[test]
        fn min_area_keeps_exactly_large_enough(min_area in 1u32..20000) {
            let idx = fixture_index();
            let out = filter_min_area(&idx, min_area);
            for r in &out.images {
                prop_assert!(!r.objects.is_empty());
                for o in &r.objects {
                    prop_assert!(box_area(o.bndbox) >= min_area);
                }
            }
            // No qualifying object may be lost.
            let kept: usize = out.object_count();
            let expect = idx.images.iter().flat_map(|r| &r.objects)
                .filter(|o| box_area(o.bndbox) >= min_area).count();
            prop_assert_eq!(kept, expect);
        }
    }

    #[test]
    fn mix_namespaces_and_adds() {
        let a = fixture_index();
        let b = n_image_index(2);
        let mixed = mix(&[("va", &a), ("vb", &b)]).unwrap();
        assert_eq!(mixed.image_count(), 5);
        assert_eq!(mixed.object_count(), a.object_count() + b.object_count());
        assert!(mixed.images.iter().any(|r| r.id == "va_img_a"));
        assert!(mixed.images.iter().any(|r| r.id == "vb_im_0001"));
        let sa = compute_stats(&a);
        let sb = compute_stats(&b);
        let sm = compute_stats(&mixed);
        assert_eq!(sm.object_count, sa.object_count + sb.object_count);
        assert_eq!(sm.area.small, sa.area.small + sb.area.small);
        assert_eq!(sm.per_class["car"], sa.per_class["car"] + sb.per_class["car"]);
    }

    #[test]
    fn duplicate_namespace_is_rejected() {
        let a = fixture_index();
        assert!(matches!(
            mix(&[("x", &a), ("x", &a)]),
            Err(DatasetError::DuplicateNamespace(_))
        ));
    }

    #[test]
    fn sample_bounds_and_determinism() {
        let idx = n_image_index(30);
        let all = sample(&idx, 30, 5).unwrap();
        assert_eq!(all.images, idx.images);
        let none = sample(&idx, 0, 5).unwrap();
        assert_eq!(none.image_count(), 0);
        let s1 = sample(&idx, 10, 5).unwrap();
        let s2 = sample(&idx, 10, 5).unwrap();
        assert_eq!(s1, s2);
        assert!(matches!(
            sample(&idx, 31, 5),
            Err(DatasetError::SampleTooLarge { requested: 31, available: 30 })
        ));
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut idx = fixture_index();
        idx.images[0].objects[0].truncated = true;
        idx.splits.insert("train".into(), vec!["img_a".into(), "img_c".into()]);
        idx.splits.insert("test".into(), vec!["img_b".into()]);
        let saved = idx.save_to(dir.path()).unwrap();
        assert_eq!(saved.root, dir.path());
        let loaded = DatasetIndex::load(dir.path()).unwrap();
        assert_eq!(loaded.images, idx.images);
        assert_eq!(loaded.splits, idx.splits);
        assert_eq!(loaded.provenance, "fixture");
    }

    #[test]
    fn load_rejects_split_with_unknown_id() {
        let dir = tempfile::tempdir().unwrap();
        let idx = fixture_index();
        idx.save_to(dir.path()).unwrap();
        fs::create_dir_all(dir.path().join(SPLIT_DIR)).unwrap();
        fs::write(dir.path().join(SPLIT_DIR).join("bad.txt"), "ghost\n").unwrap();
        assert!(matches!(
            DatasetIndex::load(dir.path()),
            Err(DatasetError::InvalidIndex(_))
        ));
    }

    #[test]
    fn frame_paths_layout() {
        let p = FramePaths::new(Path::new("/data/pe01"), "pe01_000001_cam0");
        assert_eq!(p.rgb, Path::new("/data/pe01/JPEGImages/pe01_000001_cam0.png"));
        assert_eq!(p.annotation, Path::new("/data/pe01/Annotations/pe01_000001_cam0.xml"));
        assert_eq!(p.depth, Path::new("/data/pe01/Depth/pe01_000001_cam0.png"));
        assert_eq!(p.instance, Path::new("/data/pe01/Instance/pe01_000001_cam0.png"));
        assert_eq!(p.class, Path::new("/data/pe01/Class/pe01_000001_cam0.png"));
        assert_eq!(p.flow, Path::new("/data/pe01/Flow/pe01_000001_cam0.pefl"));
    }

    #[test]
    fn frame_outputs_write_complete_set() {
        let dir = tempfile::tempdir().unwrap();
        let bufs = FrameBuffers::new(16, 12);
        let flow = FlowField::invalid(16, 12);
        let rec = ImageRecord { id: "f0".into(), width: 16, height: 12, objects: vec![] };
        let paths = FramePaths::new(dir.path(), "f0");
        write_frame_outputs(&bufs, &flow, &rec, &paths).unwrap();
        for p in [&paths.rgb, &paths.annotation, &paths.depth, &paths.instance, &paths.class, &paths.flow] {
            assert!(p.is_file(), "{p:?} missing");
        }
        let r = parse_voc_xml(&fs::read_to_string(&paths.annotation).unwrap()).unwrap();
        assert_eq!(r.id, "f0");
    }
}
