//! Stage composition: panorama -> cube faces -> detections -> readings -> tour.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{detect_tags, Detection, DetectorParams};
use crate::error::{Error, Result};
use crate::metrics::{EvalReading, GtBox};
use crate::projection::{equirect_to_cubemap, CubeFaceSet, FaceId};
use crate::raster::RasterImage;
use crate::recognizer::{classify_batch, ReadingRecord, RecognizerParams, TagReading};
use crate::synth::GroundTruthLabel;
use crate::tour::{build_tour, panorama_key, PropertyManifest, TourGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub face_size: u32,
    pub detector: DetectorParams,
    pub recognizer: RecognizerParams,
    pub iou_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            face_size: 1024,
            detector: DetectorParams::default(),
            recognizer: RecognizerParams::default(),
            iou_threshold: 0.5,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.face_size < 16 {
            return Err(Error::InvalidConfig(format!("face size {} is below 16", self.face_size)));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "IoU threshold {} outside (0, 1]",
                self.iou_threshold
            )));
        }
        self.detector.validate()?;
        self.recognizer.validate()
    }
}

/// Detections on all six faces, face by face in [`FaceId::ALL`] order.
pub fn detect_faces(faces: &CubeFaceSet, params: &DetectorParams) -> Vec<Detection> {
    let per_face: Vec<Vec<Detection>> = FaceId::ALL
        .par_iter()
        .map(|&id| detect_tags(faces.get(id), params))
        .collect();
    per_face.into_iter().flatten().collect()
}

#[derive(Debug, Clone)]
pub struct PanoramaResult {
    pub faces: CubeFaceSet,
    pub readings: Vec<TagReading>,
}

pub fn process_panorama(img: &RasterImage, cfg: &PipelineConfig) -> Result<PanoramaResult> {
    let faces = equirect_to_cubemap(img, cfg.face_size)?;
    let detections = detect_faces(&faces, &cfg.detector);
    let readings = classify_batch(&faces, &detections, &cfg.recognizer);
    Ok(PanoramaResult { faces, readings })
}

/// Runs every stage over one property directory and returns the tour plus
/// all reading records, with image ids `<property>/<panorama>`.
pub fn run_property(dir: &Path, manifest: &PropertyManifest, cfg: &PipelineConfig) -> Result<(TourGraph, Vec<ReadingRecord>)> {
    cfg.validate()?;
    let mut sizes = BTreeMap::new();
    let mut records = Vec::new();
    for entry in &manifest.panoramas {
        let img = RasterImage::load_png(&dir.join(&entry.file))?;
        sizes.insert(entry.file.clone(), (img.width(), img.height()));
        let res = process_panorama(&img, cfg)?;
        let image = format!("{}/{}", manifest.property_id, entry.id);
        records.extend(res.readings.iter().map(|r| ReadingRecord::new(&image, r)));
    }
    let panoramas = manifest.records(|f| Ok(sizes[f]))?;
    let tour = build_tour(&manifest.property_id, &panoramas, &group_readings(&records), cfg.face_size)?;
    Ok((tour, records))
}

/// Reading records grouped by panorama id; image ids may carry a
/// `<property>/` prefix.
pub fn group_readings(records: &[ReadingRecord]) -> BTreeMap<String, Vec<ReadingRecord>> {
    let mut m: BTreeMap<String, Vec<ReadingRecord>> = BTreeMap::new();
    for r in records {
        m.entry(panorama_key(&r.image).to_string()).or_default().push(r.clone());
    }
    m
}

/// Evaluation key of one face of one panorama.
pub fn eval_key(image: &str, face: FaceId) -> String {
    format!("{image}#{face}")
}

pub fn eval_readings(records: &[ReadingRecord]) -> Vec<EvalReading> {
    records
        .iter()
        .map(|r| EvalReading {
            image: eval_key(&r.image, r.face),
            bbox: r.bbox,
            det_confidence: r.det_confidence,
            confidence: r.confidence,
            number: r.number,
        })
        .collect()
}

pub fn eval_ground_truth(labels: &[GroundTruthLabel]) -> Vec<GtBox> {
    labels
        .iter()
        .map(|l| GtBox {
            image: eval_key(&l.image, l.face),
            bbox: l.bbox,
            class: l.tag_number,
        })
        .collect()
}

/// Reading records from ground-truth labels, as a perfect reader would emit.
pub fn oracle_readings(labels: &[GroundTruthLabel]) -> Vec<ReadingRecord> {
    labels
        .iter()
        .map(|l| ReadingRecord {
            image: l.image.clone(),
            face: l.face,
            bbox: l.bbox,
            det_confidence: 1.0,
            number: Some(l.tag_number),
            leading: Some((l.tag_number / 10) as u8),
            trailing: Some((l.tag_number % 10) as u8),
            confidence: 1.0,
            failure_reason: None,
        })
        .collect()
}
