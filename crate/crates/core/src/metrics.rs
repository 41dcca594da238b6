//! Detection, classification and end-to-end evaluation.
//!
//! Average precision uses all-point interpolation: the area under the
//! monotone precision envelope over recall. Matching is greedy in confidence
//! order; each prediction takes the still-unmatched ground truth box with the
//! highest IoU at or above the threshold, ties going to the lower index.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 20;
pub const INTERPOLATION: &str = "all-point";

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct MatchResult {
    /// `(detection index, ground truth index, IoU)`, in matching order.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_gt: Vec<usize>,
}

/// Indices of `confidences` sorted descending; equal scores keep input order.
pub fn confidence_order(confidences: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..confidences.len()).collect();
    idx.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]).then(a.cmp(&b)));
    idx
}

/// Greedy matching of scored boxes `dets` (box, confidence) against `gts`.
pub fn match_detections(dets: &[(BBox, f64)], gts: &[BBox], iou_thr: f64) -> MatchResult {
    let conf: Vec<f64> = dets.iter().map(|d| d.1).collect();
    let mut taken = vec![false; gts.len()];
    let mut out = MatchResult::default();
    for di in confidence_order(&conf) {
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let v = iou(&dets[di].0, g);
            if v >= iou_thr && best.is_none_or(|(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        match best {
            Some((gi, v)) => {
                taken[gi] = true;
                out.pairs.push((di, gi, v));
            }
            None => out.unmatched_detections.push(di),
        }
    }
    out.unmatched_detections.sort_unstable();
    out.unmatched_gt = (0..gts.len()).filter(|&g| !taken[g]).collect();
    out
}

/// A scored, classed prediction on one image (a face of a panorama).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBox {
    pub image: String,
    pub bbox: BBox,
    pub confidence: f64,
    pub class: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GtBox {
    pub image: String,
    pub bbox: BBox,
    pub class: u32,
}

/// True-positive flags for `dets` of one class, in confidence order, plus the
/// number of ground truth boxes of that class.
fn tp_sequence(dets: &[ScoredBox], gts: &[GtBox], class: u32, iou_thr: f64) -> (Vec<bool>, usize) {
    let mut by_image: BTreeMap<&str, Vec<BBox>> = BTreeMap::new();
    let mut npos = 0;
    for g in gts.iter().filter(|g| g.class == class) {
        by_image.entry(g.image.as_str()).or_default().push(g.bbox);
        npos += 1;
    }
    let mine: Vec<&ScoredBox> = dets.iter().filter(|d| d.class == class).collect();
    let conf: Vec<f64> = mine.iter().map(|d| d.confidence).collect();
    let mut taken: BTreeMap<&str, Vec<bool>> = by_image
        .iter()
        .map(|(k, v)| (*k, vec![false; v.len()]))
        .collect();
    let mut flags = Vec::with_capacity(mine.len());
    for i in confidence_order(&conf) {
        let d = mine[i];
        let mut hit = false;
        if let (Some(boxes), Some(used)) = (by_image.get(d.image.as_str()), taken.get_mut(d.image.as_str())) {
            let mut best: Option<(usize, f64)> = None;
            for (gi, g) in boxes.iter().enumerate() {
                if used[gi] {
                    continue;
                }
                let v = iou(&d.bbox, g);
                if v >= iou_thr && best.is_none_or(|(_, b)| v > b) {
                    best = Some((gi, v));
                }
            }
            if let Some((gi, _)) = best {
                used[gi] = true;
                hit = true;
            }
        }
        flags.push(hit);
    }
    (flags, npos)
}

/// All-point interpolated AP from ordered TP flags.
pub fn ap_from_flags(flags: &[bool], npos: usize) -> f64 {
    if npos == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(flags.len());
    let mut recall = Vec::with_capacity(flags.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &f in flags {
        if f {
            tp += 1;
        } else {
            fp += 1;
        }
        precision.push(tp as f64 / (tp + fp) as f64);
        recall.push(tp as f64 / npos as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_r) * p;
        prev_r = *r;
    }
    ap.clamp(0.0, 1.0)
}

/// AP for one class across all images; `None` when the class has no ground truth.
pub fn average_precision(dets: &[ScoredBox], gts: &[GtBox], class: u32, iou_thr: f64) -> Option<f64> {
    let (flags, npos) = tp_sequence(dets, gts, class, iou_thr);
    (npos > 0).then(|| ap_from_flags(&flags, npos))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Macro,
    Weighted,
}

fn support(gts: &[GtBox]) -> BTreeMap<u32, usize> {
    let mut m = BTreeMap::new();
    for g in gts {
        *m.entry(g.class).or_insert(0) += 1;
    }
    m
}

/// Mean AP over classes with at least one ground truth box; `None` without any.
pub fn map_at(dets: &[ScoredBox], gts: &[GtBox], iou_thr: f64, weighting: Weighting) -> Option<f64> {
    let sup = support(gts);
    if sup.is_empty() {
        return None;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (&class, &n) in &sup {
        let ap = average_precision(dets, gts, class, iou_thr).unwrap_or(0.0);
        let w = match weighting {
            Weighting::Macro => 1.0,
            Weighting::Weighted => n as f64,
        };
        num += w * ap;
        den += w;
    }
    Some(num / den)
}

/// COCO-style thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r <= 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: u32,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassScores>,
    #[serde(rename = "macro")]
    pub macro_avg: Averages,
    pub weighted: Averages,
    pub total: u64,
}

/// Per-class and averaged scores from a square confusion matrix whose rows
/// are true classes and columns predicted classes. Class `i` is reported as
/// `i + 1`. Classes without support are left out of both averages.
pub fn classification_metrics(confusion: &[Vec<u64>]) -> Result<ClassificationReport> {
    let n = confusion.len();
    if n == 0 {
        return Err(Error::EmptyInput("confusion matrix has no classes"));
    }
    if confusion.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidConfig("confusion matrix must be square".into()));
    }
    let total: u64 = confusion.iter().flatten().sum();
    if total == 0 {
        return Err(Error::EmptyInput("confusion matrix has no samples"));
    }
    let trace: u64 = (0..n).map(|i| confusion[i][i]).sum();
    let accuracy = trace as f64 / total as f64;

    let mut per_class = Vec::with_capacity(n);
    let (mut mp, mut mr, mut mf, mut k) = (0.0, 0.0, 0.0, 0usize);
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let tp = confusion[i][i];
        let support: u64 = confusion[i].iter().sum();
        let predicted: u64 = (0..n).map(|r| confusion[r][i]).sum();
        let p = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
        let r = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
        let f = f1(p, r);
        per_class.push(ClassScores {
            class: i as u32 + 1,
            support,
            precision: p,
            recall: r,
            f1: f,
        });
        if support > 0 {
            mp += p;
            mr += r;
            mf += f;
            k += 1;
            let w = support as f64;
            wp += w * p;
            wr += w * r;
            wf += w * f;
        }
    }
    let k = k as f64;
    Ok(ClassificationReport {
        per_class,
        macro_avg: Averages {
            accuracy,
            precision: mp / k,
            recall: mr / k,
            f1: mf / k,
        },
        weighted: Averages {
            accuracy,
            precision: wp / total as f64,
            recall: wr / total as f64,
            f1: wf / total as f64,
        },
        total,
    })
}

/// A read tag as seen by the evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReading {
    /// Matching group: one face of one panorama.
    pub image: String,
    pub bbox: BBox,
    pub det_confidence: f64,
    pub confidence: f64,
    /// `None` when reading failed.
    pub number: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEnd {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Only wrongly read matched tags; spurious detections are not counted.
    pub fp_paper_literal: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Support-weighted class-aware mAP (class = number read).
    pub map: Option<f64>,
    pub map_macro: Option<f64>,
}

fn group_by_image<T>(items: &[T], key: impl Fn(&T) -> &str) -> BTreeMap<String, Vec<usize>> {
    let mut m: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, it) in items.iter().enumerate() {
        m.entry(key(it).to_string()).or_default().push(i);
    }
    m
}

/// Per-image localization matches between readings and ground truth:
/// `(reading index, gt index)` pairs.
fn localize(readings: &[EvalReading], gts: &[GtBox], iou_thr: f64) -> Vec<(usize, usize)> {
    let r_by = group_by_image(readings, |r| &r.image);
    let g_by = group_by_image(gts, |g| &g.image);
    let mut pairs = Vec::new();
    for (image, ridx) in &r_by {
        let Some(gidx) = g_by.get(image) else { continue };
        let dets: Vec<(BBox, f64)> = ridx.iter().map(|&i| (readings[i].bbox, readings[i].det_confidence)).collect();
        let boxes: Vec<BBox> = gidx.iter().map(|&i| gts[i].bbox).collect();
        for (d, g, _) in match_detections(&dets, &boxes, iou_thr).pairs {
            pairs.push((ridx[d], gidx[g]));
        }
    }
    pairs
}

/// Successful readings as class-aware scored boxes.
pub fn scored_readings(readings: &[EvalReading]) -> Vec<ScoredBox> {
    readings
        .iter()
        .filter_map(|r| {
            r.number.map(|n| ScoredBox {
                image: r.image.clone(),
                bbox: r.bbox,
                confidence: r.confidence,
                class: n,
            })
        })
        .collect()
}

pub fn end_to_end_eval(readings: &[EvalReading], gts: &[GtBox], iou_thr: f64) -> EndToEnd {
    let pairs = localize(readings, gts, iou_thr);
    let mut tp = 0;
    let mut wrong = 0;
    for &(r, g) in &pairs {
        if readings[r].number == Some(gts[g].class) {
            tp += 1;
        } else {
            wrong += 1;
        }
    }
    let spurious = readings.len() - pairs.len();
    let fp = wrong + spurious;
    let fn_ = gts.len() - pairs.len();
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let scored = scored_readings(readings);
    EndToEnd {
        tp,
        fp,
        fn_,
        fp_paper_literal: wrong,
        precision,
        recall,
        f1: f1(precision, recall),
        map: map_at(&scored, gts, iou_thr, Weighting::Weighted),
        map_macro: map_at(&scored, gts, iou_thr, Weighting::Macro),
    }
}

/// Fraction of properties whose end-to-end result has no false positive and
/// no false negative. Zero for an empty input.
pub fn property_accuracy<'a>(results: impl IntoIterator<Item = &'a EndToEnd>) -> f64 {
    let (mut ok, mut n) = (0usize, 0usize);
    for r in results {
        n += 1;
        if r.fp == 0 && r.fn_ == 0 {
            ok += 1;
        }
    }
    ratio(ok, n)
}

/// Confusion matrix over localized, successfully read tags (rows: truth).
pub fn confusion_matrix(readings: &[EvalReading], gts: &[GtBox], iou_thr: f64) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; NUM_CLASSES]; NUM_CLASSES];
    for (r, g) in localize(readings, gts, iou_thr) {
        let (Some(pred), truth) = (readings[r].number, gts[g].class) else { continue };
        if (1..=NUM_CLASSES as u32).contains(&pred) && (1..=NUM_CLASSES as u32).contains(&truth) {
            m[truth as usize - 1][pred as usize - 1] += 1;
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDetection {
    pub class: u32,
    pub support: usize,
    pub ap: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Class-agnostic AP at each reported threshold.
    pub ap_at: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub property: String,
    pub end_to_end: EndToEnd,
    pub perfect: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub interpolation: String,
    pub iou_threshold: f64,
    pub thresholds: Vec<f64>,
    pub coco_range: bool,
    pub map_weighting: Weighting,
    pub class_assignment: String,
    pub dataset_hash: Option<String>,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metadata: ReportMetadata,
    pub per_class: Vec<ClassDetection>,
    /// Class-aware mAP (support-weighted) keyed by IoU threshold, `"0.50"`
    /// style, plus `"0.50:0.95"` when the COCO range is requested.
    pub map_at: BTreeMap<String, f64>,
    pub detection: DetectionScores,
    pub classification: Option<ClassificationReport>,
    pub end_to_end: EndToEnd,
    pub property_accuracy: Option<f64>,
    pub per_property: Vec<PropertyResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub iou: f64,
    pub coco_range: bool,
    /// Keep the per-property breakdown in the report.
    pub per_property: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            iou: 0.5,
            coco_range: false,
            per_property: true,
        }
    }
}

pub fn threshold_key(t: f64) -> String {
    format!("{t:.2}")
}

/// Property id of an image key of the form `<property>/<panorama>[#face]`.
pub fn property_of(image: &str) -> &str {
    image.split('/').next().unwrap_or(image)
}

/// Full report. Image keys must identify one face of one panorama, with the
/// property id before the first `/`.
pub fn evaluate(readings: &[EvalReading], gts: &[GtBox], opts: &EvalOptions) -> EvalReport {
    let thr = opts.iou;
    let scored = scored_readings(readings);
    let mut thresholds: Vec<f64> = vec![thr, 0.95];
    if opts.coco_range {
        thresholds.extend(coco_thresholds());
    }
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut map_table = BTreeMap::new();
    for &t in &thresholds {
        if let Some(v) = map_at(&scored, gts, t, Weighting::Weighted) {
            map_table.insert(threshold_key(t), v);
        }
    }
    if opts.coco_range {
        let vals: Vec<f64> = coco_thresholds()
            .into_iter()
            .filter_map(|t| map_at(&scored, gts, t, Weighting::Weighted))
            .collect();
        if !vals.is_empty() {
            map_table.insert("0.50:0.95".into(), vals.iter().sum::<f64>() / vals.len() as f64);
        }
    }

    // per-class detection scores with read classes
    let pairs = localize(readings, gts, thr);
    let sup = support(gts);
    let classes: BTreeSet<u32> = sup.keys().copied().chain(scored.iter().map(|s| s.class)).collect();
    let per_class = classes
        .into_iter()
        .map(|c| {
            let tp = pairs
                .iter()
                .filter(|&&(r, g)| gts[g].class == c && readings[r].number == Some(c))
                .count();
            let predicted = scored.iter().filter(|s| s.class == c).count();
            let support = sup.get(&c).copied().unwrap_or(0);
            let p = ratio(tp, predicted);
            let r = ratio(tp, support);
            ClassDetection {
                class: c,
                support,
                ap: average_precision(&scored, gts, c, thr),
                precision: p,
                recall: r,
                f1: f1(p, r),
            }
        })
        .collect();

    // class-agnostic detection
    let agnostic: Vec<ScoredBox> = readings
        .iter()
        .map(|r| ScoredBox {
            image: r.image.clone(),
            bbox: r.bbox,
            confidence: r.det_confidence,
            class: 0,
        })
        .collect();
    let agnostic_gt: Vec<GtBox> = gts.iter().map(|g| GtBox { class: 0, ..g.clone() }).collect();
    let mut ap_at = BTreeMap::new();
    for &t in &thresholds {
        if let Some(v) = average_precision(&agnostic, &agnostic_gt, 0, t) {
            ap_at.insert(threshold_key(t), v);
        }
    }
    let dp = ratio(pairs.len(), readings.len());
    let dr = ratio(pairs.len(), gts.len());
    let detection = DetectionScores {
        precision: dp,
        recall: dr,
        f1: f1(dp, dr),
        ap_at,
    };

    let classification = classification_metrics(&confusion_matrix(readings, gts, thr)).ok();
    let end_to_end = end_to_end_eval(readings, gts, thr);

    let mut per_property = Vec::new();
    let mut property_acc = None;
    {
        let props: BTreeSet<&str> = readings
            .iter()
            .map(|r| property_of(&r.image))
            .chain(gts.iter().map(|g| property_of(&g.image)))
            .collect();
        for p in props {
            let rs: Vec<EvalReading> = readings.iter().filter(|r| property_of(&r.image) == p).cloned().collect();
            let gs: Vec<GtBox> = gts.iter().filter(|g| property_of(&g.image) == p).cloned().collect();
            let e = end_to_end_eval(&rs, &gs, thr);
            per_property.push(PropertyResult {
                property: p.to_string(),
                perfect: e.fp == 0 && e.fn_ == 0,
                end_to_end: e,
            });
        }
        if !per_property.is_empty() {
            property_acc = Some(property_accuracy(per_property.iter().map(|p| &p.end_to_end)));
        }
        if !opts.per_property {
            per_property.clear();
        }
    }

    EvalReport {
        metadata: ReportMetadata {
            interpolation: INTERPOLATION.into(),
            iou_threshold: thr,
            thresholds,
            coco_range: opts.coco_range,
            map_weighting: Weighting::Weighted,
            class_assignment: "read".into(),
            dataset_hash: None,
            config_hash: None,
        },
        per_class,
        map_at: map_table,
        detection,
        classification,
        end_to_end,
        property_accuracy: property_acc,
        per_property,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1)
    }

    #[test]
    fn iou_examples() {
        let a = b(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &b(20.0, 20.0, 30.0, 30.0)), 0.0);
        assert!((iou(&a, &b(5.0, 5.0, 15.0, 15.0)) - 25.0 / 175.0).abs() < 1e-15);
    }

    #[test]
    fn greedy_matching() {
        let g = [b(0.0, 0.0, 10.0, 10.0)];
        let m = match_detections(&[(b(0.0, 0.0, 10.0, 8.0), 0.9)], &g, 0.5);
        assert_eq!(m.pairs, vec![(0, 0, 0.8)]);
        let m = match_detections(&[(b(0.0, 0.0, 10.0, 10.0), 0.3), (b(1.0, 0.0, 10.0, 10.0), 0.7)], &g, 0.5);
        assert_eq!(m.pairs.len(), 1);
        assert_eq!(m.pairs[0].0, 1);
        assert_eq!(m.unmatched_detections, vec![0]);
        assert!(m.unmatched_gt.is_empty());
    }

    fn sb(image: &str, bb: BBox, c: f64, class: u32) -> ScoredBox {
        ScoredBox {
            image: image.into(),
            bbox: bb,
            confidence: c,
            class,
        }
    }

    fn gt(image: &str, bb: BBox, class: u32) -> GtBox {
        GtBox {
            image: image.into(),
            bbox: bb,
            class,
        }
    }

    #[test]
    fn ap_examples() {
        let box1 = b(0.0, 0.0, 10.0, 10.0);
        let box2 = b(50.0, 50.0, 60.0, 60.0);
        let gts = [gt("a", box1, 3)];
        assert_eq!(average_precision(&[sb("a", box1, 0.9, 3)], &gts, 3, 0.5), Some(1.0));
        assert_eq!(average_precision(&[], &gts, 3, 0.5), Some(0.0));
        assert_eq!(average_precision(&[], &gts, 4, 0.5), None);
        // one TP at 0.9, one FP at 0.8, one missed gt
        let gts = [gt("a", box1, 3), gt("b", box2, 3)];
        let dets = [sb("a", box1, 0.9, 3), sb("a", box2, 0.8, 3)];
        assert_eq!(average_precision(&dets, &gts, 3, 0.5), Some(0.5));
    }

    #[test]
    fn map_weighting() {
        let box1 = b(0.0, 0.0, 10.0, 10.0);
        let gts = [gt("a", box1, 1), gt("b", box1, 1), gt("c", box1, 1), gt("a", box1, 2)];
        let dets = [sb("a", box1, 0.9, 1), sb("b", box1, 0.9, 1), sb("c", box1, 0.9, 1)];
        assert_eq!(map_at(&dets, &gts, 0.5, Weighting::Weighted), Some(0.75));
        assert_eq!(map_at(&dets, &gts, 0.5, Weighting::Macro), Some(0.5));
        assert_eq!(map_at(&dets, &[], 0.5, Weighting::Macro), None);
    }

    #[test]
    fn confusion_examples() {
        let ident: Vec<Vec<u64>> = (0..4).map(|i| (0..4).map(|j| u64::from(i == j) * 3).collect()).collect();
        let r = classification_metrics(&ident).unwrap();
        for a in [r.macro_avg, r.weighted] {
            assert_eq!((a.accuracy, a.precision, a.recall, a.f1), (1.0, 1.0, 1.0, 1.0));
        }
        let r = classification_metrics(&[vec![1, 1], vec![0, 2]]).unwrap();
        assert!((r.macro_avg.precision - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.weighted.recall, r.weighted.accuracy);
        let r = classification_metrics(&[vec![0, 0, 0], vec![0, 3, 1], vec![0, 0, 0]]).unwrap();
        assert_eq!(r.weighted.precision, r.per_class[1].precision);
        assert_eq!(r.weighted.recall, r.per_class[1].recall);
        assert!(matches!(classification_metrics(&[]), Err(Error::EmptyInput(_))));
        assert!(matches!(classification_metrics(&[vec![0]]), Err(Error::EmptyInput(_))));
    }

    fn er(image: &str, bb: BBox, number: Option<u32>) -> EvalReading {
        EvalReading {
            image: image.into(),
            bbox: bb,
            det_confidence: 0.9,
            confidence: 0.9,
            number,
        }
    }

    #[test]
    fn end_to_end_counts() {
        let g1 = b(0.0, 0.0, 10.0, 10.0);
        let g2 = b(20.0, 0.0, 30.0, 10.0);
        let g3 = b(40.0, 0.0, 50.0, 10.0);
        let gts = [gt("p/a", g1, 1), gt("p/a", g2, 2), gt("p/a", g3, 3)];
        let all = [er("p/a", g1, Some(1)), er("p/a", g2, Some(2)), er("p/a", g3, Some(3))];
        let e = end_to_end_eval(&all, &gts, 0.5);
        assert_eq!((e.precision, e.recall, e.f1), (1.0, 1.0, 1.0));
        assert_eq!(e.map, Some(1.0));

        // 2 TP, 1 spurious FP, 1 FN
        let some = [er("p/a", g1, Some(1)), er("p/a", g2, Some(2)), er("p/a", b(80.0, 0.0, 90.0, 10.0), None)];
        let e = end_to_end_eval(&some, &gts, 0.5);
        assert_eq!((e.tp, e.fp, e.fn_, e.fp_paper_literal), (2, 1, 1, 0));
        for v in [e.precision, e.recall, e.f1] {
            assert!((v - 2.0 / 3.0).abs() < 1e-15);
        }

        let misread = [er("p/a", g1, Some(7)), er("p/a", g2, None)];
        let e = end_to_end_eval(&misread, &gts, 0.5);
        assert_eq!((e.tp, e.fp, e.fn_, e.fp_paper_literal), (0, 2, 1, 2));
        assert_eq!(e.f1, 0.0);
    }

    #[test]
    fn property_fraction() {
        let clean = EndToEnd {
            tp: 3,
            fp: 0,
            fn_: 0,
            fp_paper_literal: 0,
            precision: 1.0,
            recall: 1.0,
            f1: 1.0,
            map: Some(1.0),
            map_macro: Some(1.0),
        };
        let missed = EndToEnd { fn_: 1, ..clean.clone() };
        assert_eq!(property_accuracy([&clean, &clean]), 1.0);
        assert_eq!(property_accuracy([&clean, &missed]), 0.5);
    }

    #[test]
    fn report_shape() {
        let g1 = b(0.0, 0.0, 10.0, 10.0);
        let gts = [gt("p1/a#front", g1, 1), gt("p2/a#front", g1, 2)];
        let rs = [er("p1/a#front", g1, Some(1)), er("p2/a#front", g1, Some(5))];
        let r = evaluate(&rs, &gts, &EvalOptions { iou: 0.5, coco_range: true, per_property: true });
        assert_eq!(r.property_accuracy, Some(0.5));
        assert_eq!(r.end_to_end.tp, 1);
        assert!(r.map_at.contains_key("0.50"));
        assert!(r.map_at.contains_key("0.95"));
        assert!(r.map_at.contains_key("0.50:0.95"));
        assert_eq!(r.detection.ap_at["0.50"], 1.0);
        assert_eq!(r.metadata.interpolation, "all-point");
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"fn\":0") || json.contains("\"fn\":"));
    }
}
