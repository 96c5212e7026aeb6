//! Adapter from ActionGenome-style frame annotations to scene-graph JSON.
//!
//! Input is a JSON array of frame records, mirroring the per-frame object
//! and person annotations of the dataset:
//!
//! ```json
//! [{
//!   "frame": "50N4E.mp4/000682.png",
//!   "image_size": [480, 270],
//!   "person_bbox": [x1, y1, x2, y2],
//!   "objects": [{
//!     "class": "cup/glass/bottle",
//!     "bbox": [x, y, w, h],
//!     "visible": true,
//!     "attention_relationship": ["looking_at"],
//!     "spatial_relationship": ["in_front_of"],
//!     "contacting_relationship": ["holding"],
//!     "metadata": {"tag": "...", "set": "train"}
//!   }]
//! }]
//! ```
//!
//! Person boxes are corner form (`xyxy`), object boxes `xywh`, as in the
//! dataset. Relationship labels are kept verbatim (lowercased).
//! Attention and contacting labels become `person → object` edges;
//! spatial labels describe where the object sits relative to the person
//! and become `object → person` edges. Everything that does not survive
//! the conversion is written to `conversion.log` next to the output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::scene::scene_graph_to_json;
use super::IoError;
use crate::graph::{build_graph, BBox, Category, Entity, ImageDims, Relation};
use crate::text::normalize_label;

pub const SIDECAR_LOG: &str = "conversion.log";

#[derive(Debug, Deserialize)]
struct FrameRecord {
    frame: String,
    #[serde(default)]
    image_size: Option<[u32; 2]>,
    #[serde(default)]
    person_bbox: Option<[f64; 4]>,
    #[serde(default)]
    objects: Vec<ObjectRecord>,
}

#[derive(Debug, Deserialize)]
struct ObjectRecord {
    class: String,
    #[serde(default)]
    bbox: Option<[f64; 4]>,
    #[serde(default = "visible_default")]
    visible: bool,
    #[serde(default)]
    attention_relationship: Vec<String>,
    #[serde(default)]
    spatial_relationship: Vec<String>,
    #[serde(default)]
    contacting_relationship: Vec<String>,
    #[serde(default)]
    metadata: Option<serde_json::Value>,
}

fn visible_default() -> bool {
    true
}

/// Outcome of a conversion run.
#[derive(Debug, Clone, PartialEq)]
pub struct Conversion {
    pub frames_written: usize,
    pub files: Vec<PathBuf>,
    pub log: Vec<String>,
}

/// Converts every frame in `annotation` into `<out_dir>/<frame>.json` and
/// returns the number of files written.
pub fn convert_action_genome(
    annotation: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
) -> Result<usize, IoError> {
    convert_action_genome_logged(annotation, out_dir).map(|c| c.frames_written)
}

pub fn convert_action_genome_logged(
    annotation: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
) -> Result<Conversion, IoError> {
    let annotation = annotation.as_ref();
    let out_dir = out_dir.as_ref();
    let source = annotation.display().to_string();
    let text = fs::read_to_string(annotation).map_err(|e| IoError::Read {
        path: source.clone(),
        source: e,
    })?;
    let raw: Vec<serde_json::Value> = if text.trim().is_empty() {
        Vec::new()
    } else {
        serde_json::from_str(&text).map_err(|e| IoError::Annotation {
            file: source.clone(),
            record: None,
            message: e.to_string(),
        })?
    };

    fs::create_dir_all(out_dir).map_err(|e| IoError::Write {
        path: out_dir.display().to_string(),
        source: e,
    })?;

    let mut log = Vec::new();
    let mut files = Vec::new();
    for (index, value) in raw.into_iter().enumerate() {
        let bad = |message: String| IoError::Annotation {
            file: source.clone(),
            record: Some(index),
            message,
        };
        let frame: FrameRecord = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        let json = convert_frame(&frame, &mut log).map_err(|e| bad(e.to_string()))?;
        let path = out_dir.join(format!("{}.json", file_stem(&frame.frame)));
        fs::write(&path, json).map_err(|e| IoError::Write {
            path: path.display().to_string(),
            source: e,
        })?;
        files.push(path);
    }

    let log_path = out_dir.join(SIDECAR_LOG);
    let mut body = log.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    fs::write(&log_path, body).map_err(|e| IoError::Write {
        path: log_path.display().to_string(),
        source: e,
    })?;

    Ok(Conversion {
        frames_written: files.len(),
        files,
        log,
    })
}

fn convert_frame(frame: &FrameRecord, log: &mut Vec<String>) -> Result<String, IoError> {
    let dims = frame.image_size.map(|[w, h]| ImageDims::new(w, h));
    let tag = &frame.frame;
    let mut entities = Vec::new();
    let mut relations = Vec::new();

    let mut person = Entity::perceived("person", "person", Category::Person);
    match (frame.person_bbox, dims) {
        (Some([x1, y1, x2, y2]), Some(d)) => {
            let bbox = clip(
                BBox::new(x1.min(x2), y1.min(y2), (x2 - x1).abs(), (y2 - y1).abs()),
                d,
            );
            if bbox.is_none() {
                log.push(format!("{tag}: person bbox outside the image, dropped"));
            }
            person.bbox = bbox;
        }
        (Some(_), None) => log.push(format!("{tag}: person bbox dropped, no image_size")),
        (None, _) => {}
    }
    entities.push(person);

    for (i, obj) in frame.objects.iter().enumerate() {
        if !obj.visible {
            log.push(format!(
                "{tag}: object {i} ({}) not visible, skipped",
                obj.class
            ));
            continue;
        }
        let id = format!("o{}", i + 1);
        let mut alternatives = obj
            .class
            .split('/')
            .map(normalize_label)
            .filter(|s| !s.is_empty());
        let Some(label) = alternatives.next() else {
            log.push(format!("{tag}: object {i} has an empty class, skipped"));
            continue;
        };
        let rest: Vec<String> = alternatives.collect();
        if !rest.is_empty() {
            log.push(format!(
                "{tag}: {id} class {:?} labelled {label:?}, dropped {:?}",
                obj.class, rest
            ));
        }
        let mut entity = Entity::perceived(id.clone(), &label, Category::Object);
        match (obj.bbox, dims) {
            (Some([x, y, w, h]), Some(d)) => {
                entity.bbox = clip(BBox::new(x, y, w, h), d);
                if entity.bbox.is_none() {
                    log.push(format!("{tag}: {id} bbox outside the image, dropped"));
                }
            }
            (Some(_), None) => log.push(format!("{tag}: {id} bbox dropped, no image_size")),
            (None, _) => {}
        }
        if let Some(meta) = &obj.metadata {
            log.push(format!("{tag}: {id} metadata not carried over: {meta}"));
        }
        entities.push(entity);

        let outgoing = obj
            .attention_relationship
            .iter()
            .chain(&obj.contacting_relationship);
        for label in outgoing {
            push_unique(
                &mut relations,
                Relation::perceived("person", &predicate(label), id.clone()),
            );
        }
        for label in &obj.spatial_relationship {
            push_unique(
                &mut relations,
                Relation::perceived(id.clone(), &predicate(label), "person"),
            );
        }
    }

    let graph = build_graph(entities, relations, frame.frame.clone(), dims)?;
    Ok(scene_graph_to_json(&graph))
}

fn predicate(label: &str) -> String {
    label.trim().to_lowercase()
}

fn push_unique(relations: &mut Vec<Relation>, r: Relation) {
    if !r.predicate.is_empty()
        && !relations
            .iter()
            .any(|x| x.head == r.head && x.tail == r.tail && x.predicate == r.predicate)
    {
        relations.push(r);
    }
}

/// Clips a box to the image; `None` when nothing of it remains.
fn clip(b: BBox, d: ImageDims) -> Option<BBox> {
    if ![b.x, b.y, b.width, b.height].iter().all(|v| v.is_finite()) {
        return None;
    }
    let x1 = b.x.clamp(0.0, f64::from(d.width));
    let y1 = b.y.clamp(0.0, f64::from(d.height));
    let x2 = (b.x + b.width).clamp(0.0, f64::from(d.width));
    let y2 = (b.y + b.height).clamp(0.0, f64::from(d.height));
    (x2 > x1 && y2 > y1).then(|| BBox::new(x1, y1, x2 - x1, y2 - y1))
}

fn file_stem(frame: &str) -> String {
    let stem = frame
        .strip_suffix(".png")
        .or_else(|| frame.strip_suffix(".jpg"))
        .unwrap_or(frame);
    stem.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
