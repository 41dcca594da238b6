//! Reads a tag number from a detected crop.
//!
//! The crop is split into two halves along whichever axis separates their
//! colors best. The half holding the black circle is the leading (tens)
//! digit. Each half's mean color, measured over chromatic pixels only, is
//! matched to the nearest palette entry.

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::color_scheme::{palette, rgb_to_hsv, HsvColor, MAX_TAG_NUMBER, MIN_TAG_NUMBER};
use crate::detector::{hue_distance, Detection, DetectionSource};
use crate::error::{Error, Result};
use crate::projection::{CubeFace, CubeFaceSet, FaceId};
use crate::segment::{connected_components, Mask};

const GATE_MIN_SATURATION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecognizerParams {
    /// Pixels darker than this form the circle/glyph mask.
    pub dark_value: f64,
    pub highlight_max_saturation: f64,
    pub highlight_min_value: f64,
    pub min_circularity: f64,
    /// Palette distance at which confidence reaches zero.
    pub d_max: f64,
    pub min_crop_side: u32,
    /// Fraction of each crop side ignored when measuring colors.
    pub inner_margin: f64,
    /// Distance margin under which an imported class prior decides a digit.
    pub prior_tie_margin: f64,
    /// Colored pixels whose hue is farther than this from every chromatic
    /// palette hue are treated as background. 180 disables the gate.
    pub palette_gate_deg: f64,
}

impl Default for RecognizerParams {
    fn default() -> Self {
        Self {
            dark_value: 0.25,
            highlight_max_saturation: 0.15,
            highlight_min_value: 0.85,
            min_circularity: 0.5,
            d_max: 0.6,
            min_crop_side: 16,
            inner_margin: 0.12,
            prior_tie_margin: 0.01,
            palette_gate_deg: 20.0,
        }
    }
}

impl RecognizerParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("recognizer {name} = {v} outside 0..1")))
            }
        };
        unit("dark_value", self.dark_value)?;
        unit("highlight_max_saturation", self.highlight_max_saturation)?;
        unit("highlight_min_value", self.highlight_min_value)?;
        unit("min_circularity", self.min_circularity)?;
        unit("prior_tie_margin", self.prior_tie_margin)?;
        if !(0.0..0.5).contains(&self.inner_margin) {
            return Err(Error::InvalidConfig(format!(
                "recognizer inner_margin = {} outside 0..0.5",
                self.inner_margin
            )));
        }
        if !(0.0..=180.0).contains(&self.palette_gate_deg) {
            return Err(Error::InvalidConfig("recognizer palette_gate_deg outside 0..180".into()));
        }
        if !(self.d_max > 0.0) {
            return Err(Error::InvalidConfig("recognizer d_max must be positive".into()));
        }
        Ok(())
    }

    fn is_chroma(&self, c: HsvColor) -> bool {
        c.v >= self.dark_value
            && !(c.s <= self.highlight_max_saturation && c.v >= self.highlight_min_value)
    }

    fn passes_gate(&self, c: HsvColor) -> bool {
        // weakly saturated pixels may be palette grey
        if c.s < GATE_MIN_SATURATION || self.palette_gate_deg >= 180.0 {
            return true;
        }
        palette()
            .entries()
            .iter()
            .filter(|e| e.color.s > 0.0)
            .any(|e| hue_distance(c.h, e.color.h) <= self.palette_gate_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    TooSmall,
    NoCircle,
    /// A half had no chromatic pixels to measure.
    NoColor,
    InvalidNumber,
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailureReason::TooSmall => "too_small",
            FailureReason::NoCircle => "no_circle",
            FailureReason::NoColor => "no_color",
            FailureReason::InvalidNumber => "invalid_number",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitAxis {
    /// Cut across rows: top and bottom halves.
    Horizontal,
    /// Cut across columns: left and right halves.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfDiagnostics {
    pub mean: HsvColor,
    pub nearest_digit: u8,
    pub distance: f64,
    pub pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub axis: SplitAxis,
    /// Leading half first when the circle was found, otherwise top/left first.
    pub halves: [HalfDiagnostics; 2],
    pub circle_centroid: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagReading {
    pub detection: Detection,
    pub number: Option<u32>,
    pub leading_digit: Option<u8>,
    pub trailing_digit: Option<u8>,
    pub confidence: f64,
    pub failure: Option<FailureReason>,
    pub diagnostics: Option<Diagnostics>,
}

impl TagReading {
    fn failed(detection: &Detection, reason: FailureReason, diagnostics: Option<Diagnostics>) -> Self {
        Self {
            detection: detection.clone(),
            number: None,
            leading_digit: None,
            trailing_digit: None,
            confidence: 0.0,
            failure: Some(reason),
            diagnostics,
        }
    }

    pub fn result(&self) -> Result<u32, FailureReason> {
        match (self.number, self.failure) {
            (Some(n), None) => Ok(n),
            (_, Some(r)) => Err(r),
            (None, None) => Err(FailureReason::InvalidNumber),
        }
    }

    pub fn is_success(&self) -> bool {
        self.result().is_ok()
    }
}

struct PixelHsv {
    width: usize,
    hsv: Vec<HsvColor>,
}

impl PixelHsv {
    fn at(&self, x: usize, y: usize) -> HsvColor {
        self.hsv[y * self.width + x]
    }
}

#[derive(Default, Clone, Copy)]
struct ColorAccumulator {
    n: usize,
    rgb: [f64; 3],
    hue_cos: f64,
    hue_sin: f64,
    s: f64,
    v: f64,
}

impl ColorAccumulator {
    fn add(&mut self, c: HsvColor, rgb: [u8; 3]) {
        self.n += 1;
        for k in 0..3 {
            self.rgb[k] += rgb[k] as f64;
        }
        let h = c.h.to_radians();
        self.hue_cos += h.cos();
        self.hue_sin += h.sin();
        self.s += c.s;
        self.v += c.v;
    }

    fn mean_rgb(&self) -> [f64; 3] {
        let n = self.n.max(1) as f64;
        [self.rgb[0] / n, self.rgb[1] / n, self.rgb[2] / n]
    }

    fn mean_hsv(&self) -> HsvColor {
        let n = self.n.max(1) as f64;
        let h = self.hue_sin.atan2(self.hue_cos).to_degrees().rem_euclid(360.0);
        HsvColor::new(if h >= 360.0 { 0.0 } else { h }, self.s / n, self.v / n)
    }
}

/// Palette distance with hue discounted toward grey.
pub fn palette_distance(measured: HsvColor, reference: HsvColor) -> f64 {
    let dh = {
        let d = (measured.h - reference.h).abs().rem_euclid(360.0);
        d.min(360.0 - d) / 180.0
    };
    let wh = 2.0 * measured.s.min(reference.s).min(1.0);
    let ds = measured.s - reference.s;
    let dv = measured.v - reference.v;
    ((wh * dh).powi(2) + ds * ds + dv * dv).sqrt()
}

/// Palette digits ordered by distance to `c`, nearest first.
pub fn rank_palette(c: HsvColor) -> Vec<(u8, f64)> {
    let mut v: Vec<(u8, f64)> = palette()
        .entries()
        .iter()
        .map(|e| (e.digit, palette_distance(c, e.color)))
        .collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v
}

fn crop_rect(bbox: &BBox, width: u32, height: u32) -> Option<(usize, usize, usize, usize)> {
    let b = bbox.clamp_to(width as f64, height as f64);
    let x0 = b.x_min.floor().max(0.0) as usize;
    let y0 = b.y_min.floor().max(0.0) as usize;
    let x1 = (b.x_max.ceil() as usize).min(width as usize);
    let y1 = (b.y_max.ceil() as usize).min(height as usize);
    (x1 > x0 && y1 > y0).then_some((x0, y0, x1, y1))
}

pub fn classify_tag(face: &CubeFace, det: &Detection, params: &RecognizerParams) -> TagReading {
    let img = &face.image;
    let Some((x0, y0, x1, y1)) = crop_rect(&det.bbox, img.width(), img.height()) else {
        return TagReading::failed(det, FailureReason::TooSmall, None);
    };
    let (w, h) = (x1 - x0, y1 - y0);
    let min_side = params.min_crop_side as usize;
    if w * h < min_side * min_side {
        return TagReading::failed(det, FailureReason::TooSmall, None);
    }

    let mut rgb = Vec::with_capacity(w * h);
    for y in y0..y1 {
        for x in x0..x1 {
            rgb.push(img.get(x as u32, y as u32));
        }
    }
    let crop = PixelHsv {
        width: w,
        hsv: rgb.iter().map(|p| rgb_to_hsv(*p)).collect(),
    };

    let dark = Mask::from_fn(w, h, |x, y| crop.at(x, y).v < params.dark_value);
    let min_circle_area = ((w * h) as f64 * 0.005).max(4.0);
    let circle = connected_components(&dark)
        .into_iter()
        .filter(|c| c.area as f64 >= min_circle_area && c.circularity() >= params.min_circularity)
        .max_by(|a, b| a.area.cmp(&b.area).then(b.centroid.1.total_cmp(&a.centroid.1)));

    // Color sampling region: the crop minus an outer margin and a thin band
    // around each candidate cut.
    let mx = ((w as f64 * params.inner_margin).round() as usize).min(w / 4);
    let my = ((h as f64 * params.inner_margin).round() as usize).min(h / 4);
    let seam_x = ((w as f64 * 0.04).round() as usize).max(1);
    let seam_y = ((h as f64 * 0.04).round() as usize).max(1);
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);

    let mut halves = [[ColorAccumulator::default(); 2]; 2];
    for y in my..h - my {
        for x in mx..w - mx {
            let c = crop.at(x, y);
            if !params.is_chroma(c) || !params.passes_gate(c) {
                continue;
            }
            let px = rgb[y * w + x];
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            if (fy - cy).abs() > seam_y as f64 {
                halves[0][usize::from(fy > cy)].add(c, px);
            }
            if (fx - cx).abs() > seam_x as f64 {
                halves[1][usize::from(fx > cx)].add(c, px);
            }
        }
    }
    let separation = |pair: &[ColorAccumulator; 2]| -> f64 {
        if pair[0].n == 0 || pair[1].n == 0 {
            return -1.0;
        }
        let (a, b) = (pair[0].mean_rgb(), pair[1].mean_rgb());
        (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt()
    };
    let (axis, pair) = if separation(&halves[1]) > separation(&halves[0]) {
        (SplitAxis::Vertical, halves[1])
    } else {
        (SplitAxis::Horizontal, halves[0])
    };

    let circle_centroid = circle.as_ref().map(|c| c.centroid);
    let leading_first = match (circle_centroid, axis) {
        (Some((_, y)), SplitAxis::Horizontal) => y <= cy,
        (Some((x, _)), SplitAxis::Vertical) => x <= cx,
        (None, _) => true,
    };
    let ordered = if leading_first { pair } else { [pair[1], pair[0]] };

    if ordered.iter().any(|a| a.n == 0) {
        return TagReading::failed(det, FailureReason::NoColor, None);
    }
    let means = [ordered[0].mean_hsv(), ordered[1].mean_hsv()];
    let ranks = [rank_palette(means[0]), rank_palette(means[1])];
    let mut digits = [ranks[0][0].0, ranks[1][0].0];
    let mut dists = [ranks[0][0].1, ranks[1][0].1];

    if let Some(prior) = det.class_prior {
        if (MIN_TAG_NUMBER..=MAX_TAG_NUMBER).contains(&prior) && 10 * digits[0] as u32 + digits[1] as u32 != prior {
            let want = [(prior / 10) as u8, (prior % 10) as u8];
            let close = (0..2).all(|k| {
                ranks[k]
                    .iter()
                    .find(|(d, _)| *d == want[k])
                    .is_some_and(|(_, dist)| dist - ranks[k][0].1 <= params.prior_tie_margin)
            });
            if close {
                for k in 0..2 {
                    digits[k] = want[k];
                    dists[k] = ranks[k].iter().find(|(d, _)| *d == want[k]).unwrap().1;
                }
            }
        }
    }

    let diagnostics = Diagnostics {
        axis,
        halves: [0, 1].map(|k| HalfDiagnostics {
            mean: means[k],
            nearest_digit: digits[k],
            distance: dists[k],
            pixels: ordered[k].n,
        }),
        circle_centroid: circle_centroid.map(|(x, y)| (x + x0 as f64, y + y0 as f64)),
    };

    if circle.is_none() {
        return TagReading::failed(det, FailureReason::NoCircle, Some(diagnostics));
    }

    let number = 10 * digits[0] as u32 + digits[1] as u32;
    if !(MIN_TAG_NUMBER..=MAX_TAG_NUMBER).contains(&number) {
        return TagReading {
            leading_digit: Some(digits[0]),
            trailing_digit: Some(digits[1]),
            ..TagReading::failed(det, FailureReason::InvalidNumber, Some(diagnostics))
        };
    }
    let worst = dists[0].max(dists[1]);
    let confidence = (1.0 - (worst / params.d_max).clamp(0.0, 1.0)) * det.confidence;
    TagReading {
        detection: det.clone(),
        number: Some(number),
        leading_digit: Some(digits[0]),
        trailing_digit: Some(digits[1]),
        confidence: confidence.clamp(0.0, det.confidence.max(0.0)),
        failure: None,
        diagnostics: Some(diagnostics),
    }
}

/// Classifies each detection against the face it names, in input order.
pub fn classify_batch(
    faces: &CubeFaceSet,
    detections: &[Detection],
    params: &RecognizerParams,
) -> Vec<TagReading> {
    use rayon::prelude::*;
    detections
        .par_iter()
        .map(|d| classify_tag(faces.get(d.face), d, params))
        .collect()
}

/// One entry of `readings.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingRecord {
    pub image: String,
    pub face: FaceId,
    pub bbox: BBox,
    pub det_confidence: f64,
    pub number: Option<u32>,
    pub leading: Option<u8>,
    pub trailing: Option<u8>,
    pub confidence: f64,
    pub failure_reason: Option<FailureReason>,
}

impl ReadingRecord {
    pub fn new(image: &str, r: &TagReading) -> Self {
        Self {
            image: image.to_string(),
            face: r.detection.face,
            bbox: r.detection.bbox,
            det_confidence: r.detection.confidence,
            number: r.number,
            leading: r.leading_digit,
            trailing: r.trailing_digit,
            confidence: r.confidence,
            failure_reason: r.failure,
        }
    }

    pub fn reading(&self) -> TagReading {
        TagReading {
            detection: Detection {
                face: self.face,
                bbox: self.bbox,
                confidence: self.det_confidence,
                source: DetectionSource::Rule,
                class_prior: None,
            },
            number: self.number,
            leading_digit: self.leading,
            trailing_digit: self.trailing,
            confidence: self.confidence,
            failure: self.failure_reason,
            diagnostics: None,
        }
    }
}
