//! Annotation and sample file formats.
//!
//! Annotations are UTF-8 JSON with center-form boxes and string categories:
//!
//! ```json
//! { "images": [ { "id": "frame-000",
//!                 "boxes": [ { "cx": 412.5, "cy": 91.25, "w": 11.0, "h": 9.5,
//!                              "category": "person" } ] } ] }
//! ```
//!
//! Unknown fields are rejected, image ids must be unique, and every box must
//! satisfy the center-form invariants; violations name the image id and box
//! index. Numbers round-trip losslessly (shortest-round-trip decimal
//! serialization).

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use shiftlab::boxgeom::{BoxH, LabeledBox};

use crate::error::{io_err, CliError, CliResult};
use crate::util::write_atomic;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub images: Vec<ImageAnnotations>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageAnnotations {
    pub id: String,
    pub boxes: Vec<BoxRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub category: String,
}

/// Stable mapping between category names and the dense indices the core
/// library works with, in order of first appearance.
#[derive(Clone, Debug, Default)]
pub struct CategoryTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl CategoryTable {
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), i);
        i
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

pub fn load_annotations(path: &Path) -> CliResult<AnnotationFile> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let file: AnnotationFile = serde_json::from_str(&text).map_err(|e| CliError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    validate(&file, path)?;
    Ok(file)
}

fn validate(file: &AnnotationFile, path: &Path) -> CliResult<()> {
    let mut seen = HashMap::new();
    for img in &file.images {
        if seen.insert(img.id.clone(), ()).is_some() {
            return Err(CliError::DuplicateImage {
                id: img.id.clone(),
                path: path.display().to_string(),
            });
        }
        for (index, b) in img.boxes.iter().enumerate() {
            BoxH::new(b.cx, b.cy, b.w, b.h).map_err(|e| CliError::BadBox {
                image: img.id.clone(),
                index,
                message: e.to_string(),
            })?;
        }
    }
    Ok(())
}

pub fn save_annotations(file: &AnnotationFile, path: &Path) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(file).expect("annotation serialization");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Convert one image's records into core boxes, interning categories.
pub fn to_labeled(img: &ImageAnnotations, table: &mut CategoryTable) -> Vec<LabeledBox> {
    img.boxes
        .iter()
        .map(|b| {
            let cat = table.intern(&b.category);
            LabeledBox::new(
                BoxH::new(b.cx, b.cy, b.w, b.h).expect("validated on load"),
                cat,
            )
        })
        .collect()
}

/// Convert core boxes back into records under the same table.
pub fn from_labeled(id: &str, boxes: &[LabeledBox], table: &CategoryTable) -> ImageAnnotations {
    ImageAnnotations {
        id: id.to_string(),
        boxes: boxes
            .iter()
            .map(|lb| BoxRecord {
                cx: lb.bbox.cx(),
                cy: lb.bbox.cy(),
                w: lb.bbox.w(),
                h: lb.bbox.h(),
                category: table.name(lb.category).to_string(),
            })
            .collect(),
    }
}

/// External candidate samples for `correct --samples-from FILE`: per image,
/// a list of (pred box, anchor box, per-category logits, target category or
/// null for background). Logits are indexed by the category table built from
/// the reference file followed by any new names in the samples file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesFile {
    pub images: Vec<ImageSamples>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSamples {
    pub id: String,
    pub samples: Vec<SampleRecord>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub pred: PlainBox,
    pub anchor: PlainBox,
    pub logits: Vec<f64>,
    pub target: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlainBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl PlainBox {
    fn to_box(&self) -> Result<BoxH, shiftlab::Error> {
        BoxH::new(self.cx, self.cy, self.w, self.h)
    }
}

pub fn load_samples(path: &Path) -> CliResult<SamplesFile> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn to_samples(
    img: &ImageSamples,
    table: &mut CategoryTable,
) -> CliResult<Vec<shiftlab::cbc::Sample>> {
    img.samples
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let bad = |message: String| CliError::BadSample {
                image: img.id.clone(),
                index,
                message,
            };
            let pred = s.pred.to_box().map_err(|e| bad(format!("pred: {e}")))?;
            let anchor = s.anchor.to_box().map_err(|e| bad(format!("anchor: {e}")))?;
            if let Some(l) = s.logits.iter().find(|l| !l.is_finite()) {
                return Err(bad(format!("non-finite logit {l}")));
            }
            let target = match &s.target {
                Some(name) => {
                    let cat = table.intern(name);
                    if cat >= s.logits.len() {
                        return Err(bad(format!(
                            "target category {name:?} has index {cat} but only {} logits",
                            s.logits.len()
                        )));
                    }
                    Some(cat)
                }
                None => None,
            };
            Ok(shiftlab::cbc::Sample::new(
                pred,
                anchor,
                s.logits.clone(),
                target,
            ))
        })
        .collect()
}
