//! Tag detection on cube faces.
//!
//! The rule detector thresholds every pixel against the palette in HSV space,
//! cleans the mask with a 3x3 close/open, labels 8-connected blobs, fuses blobs
//! whose boxes touch (the two digit halves of one tag) and keeps tag-sized,
//! roughly square groups. Detections produced elsewhere (for example a learned
//! detector) can be imported from YOLO text files or `detections.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::color_scheme::{palette, rgb_to_hsv, HsvColor};
use crate::error::{Error, Result};
use crate::projection::{CubeFace, FaceId};
use crate::segment::{connected_components, Mask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionSource {
    Rule,
    Imported,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub face: FaceId,
    pub bbox: BBox,
    pub confidence: f64,
    pub source: DetectionSource,
    /// Tag number suggested by an external detector, used only as a tie-break.
    pub class_prior: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub hue_tolerance_deg: f64,
    pub min_saturation: f64,
    /// Chromatic matches must be at least this bright; the darkest palette
    /// entry sits at 0.58.
    pub min_value: f64,
    pub grey_max_saturation: f64,
    pub grey_value_center: f64,
    pub grey_value_halfwidth: f64,
    /// Minimum box area at a 1024 px face; scaled by `(face_size / 1024)^2`.
    pub min_area_at_1024: f64,
    pub min_aspect: f64,
    pub max_aspect: f64,
    /// Boxes are grown by this many pixels before the touch test.
    pub merge_margin_px: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            hue_tolerance_deg: 14.0,
            min_saturation: 0.2,
            min_value: 0.3,
            grey_max_saturation: 0.15,
            grey_value_center: 0.64,
            grey_value_halfwidth: 0.18,
            min_area_at_1024: 24.0 * 24.0,
            min_aspect: 0.33,
            max_aspect: 3.0,
            merge_margin_px: 2.0,
        }
    }
}

impl DetectorParams {
    pub fn min_area(&self, face_size: u32) -> f64 {
        let k = face_size as f64 / 1024.0;
        self.min_area_at_1024 * k * k
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.hue_tolerance_deg > 0.0
            && self.hue_tolerance_deg <= 180.0
            && (0.0..=1.0).contains(&self.min_saturation)
            && (0.0..=1.0).contains(&self.min_value)
            && (0.0..=1.0).contains(&self.grey_max_saturation)
            && self.min_area_at_1024 >= 0.0
            && self.min_aspect > 0.0
            && self.min_aspect <= self.max_aspect
            && self.merge_margin_px >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("detector parameters out of range: {self:?}")))
        }
    }

    /// Whether an HSV color belongs to the union palette mask.
    pub fn matches_palette(&self, c: HsvColor) -> bool {
        if c.s <= self.grey_max_saturation
            && (c.v - self.grey_value_center).abs() <= self.grey_value_halfwidth
        {
            return true;
        }
        if c.s < self.min_saturation || c.v < self.min_value {
            return false;
        }
        palette()
            .entries()
            .iter()
            .filter(|e| e.color.s > 0.0)
            .any(|e| hue_distance(c.h, e.color.h) <= self.hue_tolerance_deg)
    }
}

/// Circular hue distance in degrees, in `[0, 180]`.
pub fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

pub fn palette_mask(face: &CubeFace, params: &DetectorParams) -> Mask {
    let img = &face.image;
    Mask::from_fn(img.width() as usize, img.height() as usize, |x, y| {
        params.matches_palette(rgb_to_hsv(img.get(x as u32, y as u32)))
    })
}

pub fn detect_tags(face: &CubeFace, params: &DetectorParams) -> Vec<Detection> {
    let size = face.image.width();
    let (fw, fh) = (face.image.width() as f64, face.image.height() as f64);
    let raw = palette_mask(face, params);
    let cleaned = raw.close3().open3();
    let min_area = params.min_area(size);

    let mut boxes: Vec<BBox> = connected_components(&cleaned)
        .into_iter()
        .filter(|c| c.bbox.area() * 16.0 >= min_area)
        .map(|c| c.bbox)
        .collect();

    // fuse until stable; merged boxes can reach further neighbours
    loop {
        let mut merged = false;
        'outer: for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                let m = params.merge_margin_px;
                if boxes[i].expand(m).touches(&boxes[j].expand(m)) {
                    boxes[i] = boxes[i].union(&boxes[j]);
                    boxes.swap_remove(j);
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut out: Vec<Detection> = boxes
        .into_iter()
        .map(|b| b.clamp_to(fw, fh))
        .filter(|b| {
            let aspect = b.width() / b.height();
            b.is_valid()
                && b.area() >= min_area
                && aspect >= params.min_aspect
                && aspect <= params.max_aspect
        })
        .map(|b| {
            let hits = raw.count_in(
                b.x_min as usize,
                b.y_min as usize,
                b.x_max as usize,
                b.y_max as usize,
            );
            Detection {
                face: face.id,
                bbox: b,
                confidence: (hits as f64 / b.area()).clamp(0.0, 1.0),
                source: DetectionSource::Rule,
                class_prior: None,
            }
        })
        .collect();
    sort_detections(&mut out);
    out
}

/// Confidence descending, ties by `(y_min, x_min)`.
pub fn sort_detections(dets: &mut [Detection]) {
    dets.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.bbox.y_min.total_cmp(&b.bbox.y_min))
            .then(a.bbox.x_min.total_cmp(&b.bbox.x_min))
    });
}

/// One entry of `detections.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image: String,
    pub face: FaceId,
    pub bbox: BBox,
    pub confidence: f64,
    pub source: DetectionSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_prior: Option<u32>,
}

impl DetectionRecord {
    pub fn new(image: &str, d: &Detection) -> Self {
        Self {
            image: image.to_string(),
            face: d.face,
            bbox: d.bbox,
            confidence: d.confidence,
            source: d.source,
            class_prior: d.class_prior,
        }
    }

    pub fn detection(&self) -> Detection {
        Detection {
            face: self.face,
            bbox: self.bbox,
            confidence: self.confidence,
            source: self.source,
            class_prior: self.class_prior,
        }
    }
}

pub fn write_detections_json(records: &[DetectionRecord], path: &Path) -> Result<()> {
    crate::io::write_json(records, path)
}

pub fn read_detections_json(path: &Path) -> Result<Vec<DetectionRecord>> {
    crate::io::read_json(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImportFormat {
    YoloTxt,
    Json,
}

/// Parses YOLO text (`<class> <cx> <cy> <w> <h> [conf]`, normalized) for one
/// square face of `face_size` pixels.
pub fn parse_yolo_detections(
    text: &str,
    face: FaceId,
    face_size: u32,
    path: &Path,
) -> Result<Vec<Detection>> {
    let s = face_size as f64;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 && fields.len() != 6 {
            return Err(err(format!("expected 5 or 6 fields, got {}", fields.len())));
        }
        let class: u32 = fields[0]
            .parse()
            .map_err(|_| err(format!("invalid class id `{}`", fields[0])))?;
        let mut nums = [0.0f64; 5];
        for (k, f) in fields[1..].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| err(format!("invalid number `{f}`")))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(err(format!("value {v} outside [0, 1]")));
            }
            nums[k] = v;
        }
        let conf = if fields.len() == 6 { nums[4] } else { 1.0 };
        let bbox = BBox::from_cxcywh(nums[0] * s, nums[1] * s, nums[2] * s, nums[3] * s);
        if !bbox.is_valid() {
            return Err(err("zero-sized box".into()));
        }
        out.push(Detection {
            face,
            bbox: bbox.clamp_to(s, s),
            confidence: conf,
            source: DetectionSource::Imported,
            class_prior: (class < 20).then_some(class + 1),
        });
    }
    Ok(out)
}

/// Splits a face file stem `<image>_<face>` into its parts.
pub fn split_face_stem(stem: &str) -> Option<(&str, FaceId)> {
    let (image, face) = stem.rsplit_once('_')?;
    Some((image, face.parse().ok()?))
}

/// Imports external detections, keyed by image id.
///
/// `yolo_txt` accepts a single `<image>_<face>.txt` file or a directory of
/// them; `json` reads a `detections.json` array.
pub fn import_detections(
    path: &Path,
    format: ImportFormat,
    face_size: u32,
) -> Result<BTreeMap<String, Vec<Detection>>> {
    let mut out: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    match format {
        ImportFormat::Json => {
            for rec in read_detections_json(path)? {
                let mut d = rec.detection();
                d.source = DetectionSource::Imported;
                out.entry(rec.image).or_default().push(d);
            }
        }
        ImportFormat::YoloTxt => {
            let files: Vec<PathBuf> = if path.is_dir() {
                let mut v: Vec<PathBuf> = fs::read_dir(path)
                    .map_err(|e| Error::io(path, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                    .collect();
                v.sort();
                v
            } else {
                vec![path.to_path_buf()]
            };
            for file in files {
                let stem = file
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let (image, face) = split_face_stem(&stem).ok_or_else(|| Error::Parse {
                    path: file.clone(),
                    line: 0,
                    message: "file name must be <image>_<face>.txt".into(),
                })?;
                let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
                let dets = parse_yolo_detections(&text, face, face_size, &file)?;
                out.entry(image.to_string()).or_default().extend(dets);
            }
        }
    }
    for dets in out.values_mut() {
        sort_detections(dets);
    }
    Ok(out)
}
