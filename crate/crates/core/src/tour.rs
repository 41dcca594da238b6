//! Back-projection of readings and virtual-tour graph assembly.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use petgraph::graph::UnGraph;
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::error::{Error, Result};
use crate::io;
use crate::projection::{direction_to_equirect, face_point_to_equirect, face_uv_to_direction, FaceId};
use crate::recognizer::ReadingRecord;

pub const TOUR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanoramaRecord {
    pub id: String,
    pub file: String,
    pub width: u32,
    pub height: u32,
    pub capture_index: u32,
    pub anchor_tag: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub panorama_id: String,
    pub tag_number: u32,
    /// Equirectangular box; when `wrapped`, `x_min > x_max` and the box runs
    /// across the `px = 0` seam.
    pub bbox: BBox,
    pub wrapped: bool,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub target_panorama_id: Option<String>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TourGraph {
    pub property_id: String,
    pub panoramas: Vec<PanoramaRecord>,
    pub hotspots: Vec<Hotspot>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backprojection {
    pub bbox: BBox,
    pub wrapped: bool,
    pub yaw_deg: f64,
    pub pitch_deg: f64,
}

fn yaw_pitch(px: f64, py: f64, width: u32, height: u32) -> (f64, f64) {
    let mut yaw = (px / width as f64 - 0.5) * 360.0;
    if yaw >= 180.0 {
        yaw -= 360.0;
    }
    if yaw < -180.0 {
        yaw += 360.0;
    }
    let pitch = ((0.5 - py / height as f64) * 180.0).clamp(-90.0, 90.0);
    (yaw, pitch)
}

/// Smallest circular interval `[lo, hi]` (mod `w`) holding every value.
/// Returns `(lo, hi, wrapped)`; when wrapped, `lo > hi`.
pub fn minimal_wrap_interval(xs: &[f64], w: f64) -> (f64, f64, bool) {
    let mut v: Vec<f64> = xs.iter().map(|x| x.rem_euclid(w)).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    // gap after v[i] going right; the last gap wraps around
    let mut best_i = n - 1;
    let mut best_gap = v[0] + w - v[n - 1];
    for i in 0..n - 1 {
        let gap = v[i + 1] - v[i];
        if gap > best_gap {
            best_gap = gap;
            best_i = i;
        }
    }
    if best_i == n - 1 {
        (v[0], v[n - 1], false)
    } else {
        (v[best_i + 1], v[best_i], true)
    }
}

/// Maps a face-space box to the panorama: 4 corners, 4 edge midpoints and
/// the center are projected and enclosed. A box holding a pole of the sphere
/// is widened to the full panorama width; its yaw and pitch then come from
/// the face-box center instead of the enclosing box.
pub fn backproject_bbox(face: FaceId, bbox: &BBox, face_size: u32, width: u32, height: u32) -> Backprojection {
    let (cx, cy) = bbox.center();
    let pts = [
        (bbox.x_min, bbox.y_min),
        (bbox.x_max, bbox.y_min),
        (bbox.x_max, bbox.y_max),
        (bbox.x_min, bbox.y_max),
        (cx, bbox.y_min),
        (bbox.x_max, cy),
        (cx, bbox.y_max),
        (bbox.x_min, cy),
        (cx, cy),
    ];
    // box coordinates are continuous; the point mapping expects pixel indices
    let proj: Vec<_> = pts
        .iter()
        .map(|&(x, y)| face_point_to_equirect(face, x - 0.5, y - 0.5, face_size, width, height))
        .collect();
    let ys = proj.iter().map(|p| p.py);
    let y_min = ys.clone().fold(f64::INFINITY, f64::min);
    let y_max = ys.fold(f64::NEG_INFINITY, f64::max);
    let (w, h) = (width as f64, height as f64);

    let half = face_size as f64 / 2.0;
    let has_pole = matches!(face, FaceId::Top | FaceId::Bottom)
        && bbox.x_min <= half
        && half <= bbox.x_max
        && bbox.y_min <= half
        && half <= bbox.y_max;
    if has_pole {
        let s = face_size as f64;
        let c = direction_to_equirect(face_uv_to_direction(face, cx / s, cy / s), width, height);
        let (yaw_deg, pitch_deg) = yaw_pitch(c.px, c.py, width, height);
        let bbox = if face == FaceId::Top {
            BBox::new(0.0, 0.0, w, y_max)
        } else {
            BBox::new(0.0, y_min, w, h)
        };
        return Backprojection {
            bbox,
            wrapped: false,
            yaw_deg,
            pitch_deg,
        };
    }

    let xs: Vec<f64> = proj.iter().map(|p| p.px).collect();
    let (lo, hi, wrapped) = minimal_wrap_interval(&xs, w);
    let center_x = if wrapped {
        (0.5 * (lo + hi + w)).rem_euclid(w)
    } else {
        0.5 * (lo + hi)
    };
    let (yaw_deg, pitch_deg) = yaw_pitch(center_x, 0.5 * (y_min + y_max), width, height);
    Backprojection {
        bbox: BBox::new(lo, y_min, hi, y_max),
        wrapped,
        yaw_deg,
        pitch_deg,
    }
}

pub fn backproject_reading(r: &ReadingRecord, face_size: u32, width: u32, height: u32) -> Backprojection {
    backproject_bbox(r.face, &r.bbox, face_size, width, height)
}

/// Panorama id of a reading image key such as `prop/pano` or `pano`.
pub fn panorama_key(image: &str) -> &str {
    image.rsplit('/').next().unwrap_or(image)
}

fn validate_panoramas(panoramas: &[PanoramaRecord]) -> Result<()> {
    if panoramas.is_empty() {
        return Err(Error::EmptyInput("property has no panoramas"));
    }
    let mut ids = BTreeSet::new();
    let mut anchors = BTreeSet::new();
    for p in panoramas {
        if !ids.insert(p.id.as_str()) {
            return Err(Error::InvalidProperty(format!("duplicate panorama id {}", p.id)));
        }
        if !(1..=20).contains(&p.anchor_tag) {
            return Err(Error::InvalidProperty(format!(
                "panorama {} has anchor tag {} outside 1..20",
                p.id, p.anchor_tag
            )));
        }
        if !anchors.insert(p.anchor_tag) {
            return Err(Error::InvalidProperty(format!("duplicate anchor tag {}", p.anchor_tag)));
        }
        if p.width == 0 || p.height == 0 {
            return Err(Error::InvalidProperty(format!("panorama {} has zero size", p.id)));
        }
    }
    Ok(())
}

/// Builds the tour. `readings` maps panorama id to that panorama's readings,
/// whose boxes live on cube faces of side `face_size`.
pub fn build_tour(
    property_id: &str,
    panoramas: &[PanoramaRecord],
    readings: &BTreeMap<String, Vec<ReadingRecord>>,
    face_size: u32,
) -> Result<TourGraph> {
    validate_panoramas(panoramas)?;
    let mut panoramas = panoramas.to_vec();
    panoramas.sort_by(|a, b| a.capture_index.cmp(&b.capture_index).then_with(|| a.id.cmp(&b.id)));
    let by_anchor: HashMap<u32, &str> = panoramas.iter().map(|p| (p.anchor_tag, p.id.as_str())).collect();

    let mut warnings = Vec::new();
    for id in readings.keys() {
        if !panoramas.iter().any(|p| &p.id == id) {
            warnings.push(format!("unknown_panorama: readings for {id} ignored"));
        }
    }

    let mut hotspots = Vec::new();
    for p in &panoramas {
        let Some(list) = readings.get(&p.id) else { continue };
        // best reading per number; first one wins ties
        let mut best: BTreeMap<u32, &ReadingRecord> = BTreeMap::new();
        for r in list {
            let Some(k) = r.number else { continue };
            match best.get(&k) {
                Some(prev) => {
                    warnings.push(format!("duplicate_tag({k}): panorama {} read it more than once", p.id));
                    if r.confidence > prev.confidence {
                        best.insert(k, r);
                    }
                }
                None => {
                    best.insert(k, r);
                }
            }
        }
        for (k, r) in best {
            if k == p.anchor_tag {
                warnings.push(format!("self_anchor: panorama {} read its own tag {k}", p.id));
                continue;
            }
            let target = by_anchor.get(&k).map(|s| s.to_string());
            if target.is_none() {
                warnings.push(format!("dangling_tag({k}): panorama {} sees a tag no panorama is anchored at", p.id));
            }
            let bp = backproject_reading(r, face_size, p.width, p.height);
            hotspots.push(Hotspot {
                panorama_id: p.id.clone(),
                tag_number: k,
                bbox: bp.bbox,
                wrapped: bp.wrapped,
                yaw_deg: bp.yaw_deg,
                pitch_deg: bp.pitch_deg,
                target_panorama_id: target,
                confidence: r.confidence,
            });
        }
    }

    let mut graph = TourGraph {
        property_id: property_id.to_string(),
        panoramas,
        hotspots,
        warnings,
    };
    let parts = graph.component_count();
    if parts > 1 {
        graph
            .warnings
            .push(format!("disconnected: tour graph has {parts} components"));
    }
    Ok(graph)
}

impl TourGraph {
    /// Undirected panorama links, each as a sorted id pair.
    pub fn undirected_edges(&self) -> BTreeSet<(String, String)> {
        self.hotspots
            .iter()
            .filter_map(|h| {
                let t = h.target_panorama_id.as_ref()?;
                let (a, b) = if h.panorama_id <= *t {
                    (h.panorama_id.clone(), t.clone())
                } else {
                    (t.clone(), h.panorama_id.clone())
                };
                Some((a, b))
            })
            .collect()
    }

    pub fn component_count(&self) -> usize {
        let mut g = UnGraph::<(), ()>::new_undirected();
        let nodes: HashMap<&str, _> = self.panoramas.iter().map(|p| (p.id.as_str(), g.add_node(()))).collect();
        for h in &self.hotspots {
            if let (Some(&a), Some(&b)) = (
                nodes.get(h.panorama_id.as_str()),
                h.target_panorama_id.as_deref().and_then(|t| nodes.get(t)),
            ) {
                g.add_edge(a, b, ());
            }
        }
        petgraph::algo::connected_components(&g)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// Referential integrity and self-loop checks.
    pub fn validate(&self) -> Result<()> {
        validate_panoramas(&self.panoramas)?;
        let anchors: HashMap<&str, u32> = self.panoramas.iter().map(|p| (p.id.as_str(), p.anchor_tag)).collect();
        for h in &self.hotspots {
            let Some(&own) = anchors.get(h.panorama_id.as_str()) else {
                return Err(Error::InvalidProperty(format!("hotspot on unknown panorama {}", h.panorama_id)));
            };
            if h.tag_number == own {
                return Err(Error::InvalidProperty(format!("self-loop hotspot on {}", h.panorama_id)));
            }
            if let Some(t) = &h.target_panorama_id {
                if !anchors.contains_key(t.as_str()) {
                    return Err(Error::InvalidProperty(format!("hotspot targets unknown panorama {t}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TourFile {
    version: u32,
    #[serde(flatten)]
    graph: TourGraph,
}

pub fn tour_json_bytes(graph: &TourGraph) -> Vec<u8> {
    io::to_json_bytes(&TourFile {
        version: TOUR_VERSION,
        graph: graph.clone(),
    })
}

pub fn export_tour(graph: &TourGraph, out: &Path) -> Result<()> {
    graph.validate()?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(out, tour_json_bytes(graph)).map_err(|e| Error::io(out, e))
}

pub fn load_tour(path: &Path) -> Result<TourGraph> {
    let file: TourFile = io::read_json(path)?;
    if file.version != TOUR_VERSION {
        return Err(Error::InvalidProperty(format!(
            "unsupported tour version {} in {}",
            file.version,
            path.display()
        )));
    }
    file.graph.validate()?;
    Ok(file.graph)
}

/// Panorama list of one property. Anchor tags and capture order are explicit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyManifest {
    pub property_id: String,
    pub panoramas: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub file: String,
    pub anchor_tag: u32,
    #[serde(default)]
    pub capture_index: Option<u32>,
}

impl PropertyManifest {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }

    /// Manifest in file order: the `i`-th PNG (sorted by name) is anchored
    /// at tag `i + 1`.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut files: Vec<String> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n.to_ascii_lowercase().ends_with(".png"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::EmptyInput("no panorama images in directory"));
        }
        if files.len() > 20 {
            return Err(Error::InvalidProperty(format!(
                "{} panoramas but only 20 tag numbers",
                files.len()
            )));
        }
        let property_id = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("property")
            .to_string();
        let panoramas = files
            .into_iter()
            .enumerate()
            .map(|(i, f)| ManifestEntry {
                id: f[..f.len() - 4].to_string(),
                file: f,
                anchor_tag: i as u32 + 1,
                capture_index: Some(i as u32 + 1),
            })
            .collect();
        Ok(Self { property_id, panoramas })
    }

    /// Panorama records with image sizes filled in by `size_of(file)`.
    pub fn records(&self, mut size_of: impl FnMut(&str) -> Result<(u32, u32)>) -> Result<Vec<PanoramaRecord>> {
        self.panoramas
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let (width, height) = size_of(&e.file)?;
                Ok(PanoramaRecord {
                    id: e.id.clone(),
                    file: e.file.clone(),
                    width,
                    height,
                    capture_index: e.capture_index.unwrap_or(i as u32 + 1),
                    anchor_tag: e.anchor_tag,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::equirect_to_direction;
    use crate::projection::EquirectPoint;

    fn pano(id: &str, anchor: u32) -> PanoramaRecord {
        PanoramaRecord {
            id: id.into(),
            file: format!("{id}.png"),
            width: 2048,
            height: 1024,
            capture_index: anchor,
            anchor_tag: anchor,
        }
    }

    fn read(image: &str, face: FaceId, number: u32, conf: f64) -> ReadingRecord {
        ReadingRecord {
            image: image.into(),
            face,
            bbox: BBox::new(240.0, 240.0, 272.0, 272.0),
            det_confidence: 1.0,
            number: Some(number),
            leading: None,
            trailing: None,
            confidence: conf,
            failure_reason: None,
        }
    }

    #[test]
    fn front_and_bottom_centers() {
        let b = backproject_bbox(FaceId::Front, &BBox::new(240.0, 240.0, 272.0, 272.0), 512, 2048, 1024);
        assert!(b.yaw_deg.abs() < 1e-9 && b.pitch_deg.abs() < 1e-9, "{b:?}");
        assert!(!b.wrapped);
        let b = backproject_bbox(FaceId::Bottom, &BBox::new(240.0, 240.0, 272.0, 272.0), 512, 2048, 1024);
        assert!((b.pitch_deg + 90.0).abs() < 1e-9);
        assert_eq!(b.bbox.x_min, 0.0);
        assert_eq!(b.bbox.x_max, 2048.0);
        assert_eq!(b.bbox.y_max, 1024.0);
    }

    #[test]
    fn back_face_box_wraps() {
        let b = backproject_bbox(FaceId::Back, &BBox::new(230.0, 230.0, 282.0, 282.0), 512, 2048, 1024);
        assert!(b.wrapped);
        assert!(b.bbox.x_min > b.bbox.x_max);
        assert!(b.bbox.x_min > 1900.0 && b.bbox.x_max < 150.0, "{:?}", b.bbox);
        assert!((b.yaw_deg.abs() - 180.0).abs() < 1e-6 || b.yaw_deg == -180.0);
    }

    #[test]
    fn yaw_pitch_matches_box_center() {
        let b = backproject_bbox(FaceId::Right, &BBox::new(100.0, 300.0, 164.0, 340.0), 512, 2048, 1024);
        let (cx, cy) = b.bbox.center();
        let d = equirect_to_direction(EquirectPoint { px: cx, py: cy }, 2048, 1024);
        assert!((d.lon().to_degrees() - b.yaw_deg).abs() < 1e-9);
        assert!((d.lat().to_degrees() - b.pitch_deg).abs() < 1e-9);
    }

    #[test]
    fn minimal_tour() {
        let ps = [pano("a", 1), pano("b", 2)];
        let mut rs = BTreeMap::new();
        rs.insert("a".to_string(), vec![read("a", FaceId::Front, 2, 0.9)]);
        rs.insert("b".to_string(), vec![read("b", FaceId::Left, 1, 0.8)]);
        let g = build_tour("p", &ps, &rs, 512).unwrap();
        assert_eq!(g.hotspots.len(), 2);
        assert!(g.warnings.is_empty(), "{:?}", g.warnings);
        assert!(g.is_connected());
        assert_eq!(g.undirected_edges().len(), 1);
    }

    #[test]
    fn dangling_self_and_duplicates() {
        let ps = [pano("a", 1), pano("b", 2)];
        let mut rs = BTreeMap::new();
        rs.insert(
            "a".to_string(),
            vec![
                read("a", FaceId::Front, 7, 0.9),
                read("a", FaceId::Front, 1, 0.9),
                read("a", FaceId::Left, 2, 0.4),
                read("a", FaceId::Right, 2, 0.6),
            ],
        );
        let g = build_tour("p", &ps, &rs, 512).unwrap();
        assert_eq!(g.hotspots.len(), 2);
        let dangling = g.hotspots.iter().find(|h| h.tag_number == 7).unwrap();
        assert!(dangling.target_panorama_id.is_none());
        let two = g.hotspots.iter().find(|h| h.tag_number == 2).unwrap();
        assert_eq!(two.confidence, 0.6);
        for w in ["dangling_tag(7)", "self_anchor", "duplicate_tag(2)"] {
            assert!(g.warnings.iter().any(|x| x.starts_with(w)), "missing {w}: {:?}", g.warnings);
        }
        assert!(g.warnings.iter().all(|w| !w.starts_with("disconnected")));
    }

    #[test]
    fn disconnected_and_invalid() {
        let ps = [pano("a", 1), pano("b", 2)];
        let g = build_tour("p", &ps, &BTreeMap::new(), 512).unwrap();
        assert!(g.warnings.iter().any(|w| w.starts_with("disconnected")));
        assert!(matches!(
            build_tour("p", &[pano("a", 1), pano("b", 1)], &BTreeMap::new(), 512),
            Err(Error::InvalidProperty(_))
        ));
        assert!(build_tour("p", &[], &BTreeMap::new(), 512).is_err());
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ps = [pano("a", 1), pano("b", 2)];
        let mut rs = BTreeMap::new();
        rs.insert("a".to_string(), vec![read("a", FaceId::Back, 2, 0.9)]);
        let g = build_tour("p", &ps, &rs, 512).unwrap();
        let path = dir.path().join("tour.json");
        export_tour(&g, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\n  \"version\": 1,"));
        assert_eq!(load_tour(&path).unwrap(), g);

        let empty = build_tour("p", &ps, &BTreeMap::new(), 512).unwrap();
        let bytes = tour_json_bytes(&empty);
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["hotspots"], serde_json::json!([]));
    }

    #[test]
    fn manifest_from_dir_uses_file_order() {
        let dir = tempfile::tempdir().unwrap();
        for n in ["b.png", "a.png", "notes.txt"] {
            std::fs::write(dir.path().join(n), b"x").unwrap();
        }
        let m = PropertyManifest::from_dir(dir.path()).unwrap();
        let ids: Vec<_> = m.panoramas.iter().map(|e| (e.id.as_str(), e.anchor_tag)).collect();
        assert_eq!(ids, vec![("a", 1), ("b", 2)]);
    }

    #[test]
    fn wrap_interval() {
        assert_eq!(minimal_wrap_interval(&[10.0, 20.0], 100.0), (10.0, 20.0, false));
        assert_eq!(minimal_wrap_interval(&[95.0, 5.0], 100.0), (95.0, 5.0, true));
    }
}
