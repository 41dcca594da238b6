//! Synthetic panoramas: tags lying on a flat floor seen by a spherical camera,
//! with exact per-face labels.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::color_scheme::{hsv_to_rgb, palette, render_tag, HsvColor, TagArt};
use crate::error::{Error, Result};
use crate::io;
use crate::projection::{
    direction_to_equirect, direction_to_face_plane, direction_to_face_uv, equirect_to_cubemap, equirect_to_direction,
    Direction, EquirectPoint, FaceId,
};
use crate::raster::{round_rgb, to_u8, EdgeMode, RasterImage, Rgb};
use crate::tour::{minimal_wrap_interval, ManifestEntry, PropertyManifest};

/// Printed tag side, 6 inches.
pub const DEFAULT_TAG_SIDE_M: f64 = 0.1524;
pub const MIN_TAG_SPACING_M: f64 = 0.3;
const TAG_RASTER_PX: u32 = 256;
const BOUNDARY_POINTS: usize = 64;
const SUPERSAMPLE: usize = 4;
const LABEL_MIN_POINTS: usize = 8;
const LABEL_MIN_AREA: f64 = 256.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Background {
    Solid { rgb: Rgb },
    /// Interpolated in HSV from the top row to the bottom row.
    Gradient { top: HsvColor, bottom: HsvColor },
    /// Smoothed uniform noise around `base`.
    Noise { base: Rgb, amplitude: f64, seed: u64 },
    /// An existing panorama of the same size.
    File { path: PathBuf },
}

impl Default for Background {
    fn default() -> Self {
        Background::Gradient {
            top: HsvColor::new(155.0, 0.25, 0.95),
            bottom: HsvColor::new(155.0, 0.65, 0.40),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Per-channel standard deviation on the 0..1 scale.
    pub gaussian_sigma: f64,
    /// Multiplicative: every channel becomes `c * (1 + delta)`.
    pub brightness_delta: f64,
    pub blur_sigma: f64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.gaussian_sigma >= 0.0 && self.blur_sigma >= 0.0) {
            return Err(Error::InvalidScene("noise sigmas must be nonnegative".into()));
        }
        if !(-0.3..=0.3).contains(&self.brightness_delta) {
            return Err(Error::InvalidScene(format!(
                "brightness delta {} outside -0.3..0.3",
                self.brightness_delta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagPlacement {
    pub number: u32,
    pub floor_x_m: f64,
    pub floor_z_m: f64,
    #[serde(default)]
    pub rotation_deg: f64,
    #[serde(default = "default_side")]
    pub side_m: f64,
}

fn default_side() -> f64 {
    DEFAULT_TAG_SIDE_M
}

impl TagPlacement {
    /// Floor corners `(x, z)` in order: far-left, far-right, near-right, near-left
    /// of the unrotated tag (top row of the tag image is the far edge).
    pub fn corners(&self) -> [(f64, f64); 4] {
        [(-0.5, 0.5), (0.5, 0.5), (0.5, -0.5), (-0.5, -0.5)].map(|(a, b)| self.local_to_floor(a, b))
    }

    /// Tag-local `(a, b)` in `[-0.5, 0.5]^2` (a along the tag's columns,
    /// b towards its top row) to floor coordinates.
    pub fn local_to_floor(&self, a: f64, b: f64) -> (f64, f64) {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let (a, b) = (a * self.side_m, b * self.side_m);
        (self.floor_x_m + c * a - s * b, self.floor_z_m + s * a + c * b)
    }

    pub fn floor_to_local(&self, x: f64, z: f64) -> (f64, f64) {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let (dx, dz) = (x - self.floor_x_m, z - self.floor_z_m);
        ((c * dx + s * dz) / self.side_m, (-s * dx + c * dz) / self.side_m)
    }

    /// `n` points evenly spaced along the boundary, starting at the far-left corner.
    pub fn boundary(&self, n: usize) -> Vec<(f64, f64)> {
        let per_side = n / 4;
        let corners = [(-0.5, 0.5), (0.5, 0.5), (0.5, -0.5), (-0.5, -0.5)];
        let mut pts = Vec::with_capacity(n);
        for k in 0..4 {
            let (a0, b0) = corners[k];
            let (a1, b1) = corners[(k + 1) % 4];
            for i in 0..per_side {
                let t = i as f64 / per_side as f64;
                pts.push(self.local_to_floor(a0 + t * (a1 - a0), b0 + t * (b1 - b0)));
            }
        }
        pts
    }
}

/// A palette-colored rectangle in longitude/latitude, painted before tags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distractor {
    pub rgb: Rgb,
    pub lon_min_deg: f64,
    pub lon_max_deg: f64,
    pub lat_min_deg: f64,
    pub lat_max_deg: f64,
}

impl Distractor {
    fn contains(&self, lon_deg: f64, lat_deg: f64) -> bool {
        (self.lat_min_deg..=self.lat_max_deg).contains(&lat_deg) && {
            let span = (self.lon_max_deg - self.lon_min_deg).rem_euclid(360.0);
            (lon_deg - self.lon_min_deg).rem_euclid(360.0) <= span
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub camera_height_m: f64,
    pub width: u32,
    pub height: u32,
    pub background: Background,
    pub tags: Vec<TagPlacement>,
    pub noise: NoiseSpec,
    pub distractors: Vec<Distractor>,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            camera_height_m: 1.5,
            width: 4096,
            height: 2048,
            background: Background::default(),
            tags: Vec::new(),
            noise: NoiseSpec::default(),
            distractors: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthLabel {
    pub image: String,
    pub face: FaceId,
    pub tag_number: u32,
    pub bbox: BBox,
    pub equirect_bbox: BBox,
    pub wrapped: bool,
    pub visible_area_px: f64,
}

#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub image: RasterImage,
    pub labels: Vec<GroundTruthLabel>,
}

fn tags_overlap(a: &TagPlacement, b: &TagPlacement) -> bool {
    // separating axis test on two convex quads
    let pa = a.corners();
    let pb = b.corners();
    for poly in [&pa, &pb] {
        for k in 0..4 {
            let (x0, z0) = poly[k];
            let (x1, z1) = poly[(k + 1) % 4];
            let axis = (z0 - z1, x1 - x0);
            let proj = |p: &[(f64, f64); 4]| {
                let v: Vec<f64> = p.iter().map(|q| q.0 * axis.0 + q.1 * axis.1).collect();
                (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            };
            let (amin, amax) = proj(&pa);
            let (bmin, bmax) = proj(&pb);
            if amax < bmin || bmax < amin {
                return false;
            }
        }
    }
    true
}

fn point_in_tag(t: &TagPlacement, x: f64, z: f64) -> bool {
    let (a, b) = t.floor_to_local(x, z);
    a.abs() <= 0.5 && b.abs() <= 0.5
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.camera_height_m > 0.0 && self.camera_height_m.is_finite()) {
            return Err(Error::InvalidScene("camera height must be positive".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidScene("panorama size must be positive".into()));
        }
        self.noise.validate()?;
        for t in &self.tags {
            crate::color_scheme::tag_digits(t.number)?;
            if !(t.side_m > 0.0) {
                return Err(Error::InvalidScene(format!("tag {} has nonpositive side", t.number)));
            }
            if t.floor_x_m == 0.0 && t.floor_z_m == 0.0 || point_in_tag(t, 0.0, 0.0) {
                return Err(Error::InvalidScene(format!("tag {} lies under the camera", t.number)));
            }
        }
        for (i, a) in self.tags.iter().enumerate() {
            for b in &self.tags[i + 1..] {
                if tags_overlap(a, b) {
                    return Err(Error::InvalidScene(format!(
                        "tags {} and {} overlap",
                        a.number, b.number
                    )));
                }
                let d = (a.floor_x_m - b.floor_x_m).hypot(a.floor_z_m - b.floor_z_m);
                if d < MIN_TAG_SPACING_M {
                    return Err(Error::InvalidScene(format!(
                        "tags {} and {} are {d:.3} m apart, closer than {MIN_TAG_SPACING_M} m",
                        a.number, b.number
                    )));
                }
            }
        }
        Ok(())
    }
}

fn floor_direction(x: f64, z: f64, h: f64) -> Direction {
    Direction::new(x, -h, z)
}

fn background_image(bg: &Background, width: u32, height: u32) -> Result<RasterImage> {
    match bg {
        Background::Solid { rgb } => RasterImage::new(width, height, *rgb),
        Background::Gradient { top, bottom } => {
            let rows: Vec<Rgb> = (0..height)
                .map(|y| {
                    let t = if height > 1 { y as f64 / (height - 1) as f64 } else { 0.0 };
                    let mut dh = bottom.h - top.h;
                    if dh > 180.0 {
                        dh -= 360.0;
                    } else if dh < -180.0 {
                        dh += 360.0;
                    }
                    hsv_to_rgb(HsvColor::new(
                        (top.h + t * dh).rem_euclid(360.0),
                        top.s + t * (bottom.s - top.s),
                        top.v + t * (bottom.v - top.v),
                    ))
                })
                .collect();
            RasterImage::from_fn(width, height, |_, y| rows[y as usize])
        }
        Background::Noise { base, amplitude, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut img = RasterImage::new(width, height, *base)?;
            for p in img.pixels_mut().iter_mut() {
                let v = *p as f64 / 255.0 + rng.random_range(-1.0..=1.0) * amplitude;
                *p = to_u8(v * 255.0);
            }
            Ok(img.gaussian_blur(2.0, EdgeMode::Wrap))
        }
        Background::File { path } => {
            let img = RasterImage::load_png(path)?;
            if img.width() != width || img.height() != height {
                return Err(Error::InvalidScene(format!(
                    "background {} is {}x{}, scene is {width}x{height}",
                    path.display(),
                    img.width(),
                    img.height()
                )));
            }
            Ok(img)
        }
    }
}

struct PreparedTag<'a> {
    placement: &'a TagPlacement,
    art: TagArt,
    /// Equirect rows and (possibly wrapped) columns that may touch the tag.
    x_lo: f64,
    x_hi: f64,
    wrapped: bool,
    y_lo: f64,
    y_hi: f64,
}

impl PreparedTag<'_> {
    fn covers(&self, px: f64, py: f64) -> bool {
        if py < self.y_lo || py > self.y_hi {
            return false;
        }
        if self.wrapped {
            px >= self.x_lo || px <= self.x_hi
        } else {
            px >= self.x_lo && px <= self.x_hi
        }
    }
}

fn equirect_extent(points: &[(f64, f64)], h: f64, width: u32, height: u32) -> (BBox, bool) {
    let proj: Vec<EquirectPoint> = points
        .iter()
        .map(|&(x, z)| direction_to_equirect(floor_direction(x, z, h), width, height))
        .collect();
    let xs: Vec<f64> = proj.iter().map(|p| p.px).collect();
    let (lo, hi, wrapped) = minimal_wrap_interval(&xs, width as f64);
    let y0 = proj.iter().map(|p| p.py).fold(f64::INFINITY, f64::min);
    let y1 = proj.iter().map(|p| p.py).fold(f64::NEG_INFINITY, f64::max);
    (BBox::new(lo, y0, hi, y1), wrapped)
}

fn clip_polygon(poly: &[(f64, f64)], inside: impl Fn((f64, f64)) -> f64) -> Vec<(f64, f64)> {
    // Sutherland-Hodgman against the half-plane inside(p) >= 0 (inside is affine)
    let mut out = Vec::with_capacity(poly.len() + 4);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let (fp, fq) = (inside(p), inside(q));
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let t = fp / (fp - fq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

fn shoelace(poly: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for i in 0..poly.len() {
        let (x0, y0) = poly[i];
        let (x1, y1) = poly[(i + 1) % poly.len()];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s.abs()
}

/// Face label for one tag: the tag outline is clipped to the half-space in
/// front of the face, projected gnomonically and clipped to the face square.
pub fn face_footprint(t: &TagPlacement, h: f64, face: FaceId, face_size: u32) -> Option<(BBox, f64, usize)> {
    let boundary = t.boundary(BOUNDARY_POINTS);
    let on_face = boundary
        .iter()
        .filter(|&&(x, z)| direction_to_face_uv(floor_direction(x, z, h)).0 == face)
        .count();
    let n = face.normal();
    // floor points are (x, -h, z); depth along the face normal is affine in (x, z)
    let depth = |p: (f64, f64)| p.0 * n[0] - h * n[1] + p.1 * n[2] - 1e-9;
    let front = clip_polygon(&boundary, depth);
    if front.len() < 3 {
        return None;
    }
    let s = face_size as f64;
    let mut poly: Vec<(f64, f64)> = front
        .iter()
        .filter_map(|&(x, z)| direction_to_face_plane(face, floor_direction(x, z, h)))
        .map(|(u, v)| (u * s, v * s))
        .collect();
    for edge in [
        &(|p: (f64, f64)| p.0) as &dyn Fn((f64, f64)) -> f64,
        &|p: (f64, f64)| s - p.0,
        &|p: (f64, f64)| p.1,
        &|p: (f64, f64)| s - p.1,
    ] {
        if poly.len() < 3 {
            return None;
        }
        poly = clip_polygon(&poly, edge);
    }
    if poly.len() < 3 {
        return None;
    }
    let area = shoelace(&poly);
    let bbox = BBox::enclosing(poly.iter().copied())?;
    Some((bbox, area, on_face))
}

/// Labels for every face that shows enough of the tag.
pub fn tag_labels(t: &TagPlacement, h: f64, face_size: u32, width: u32, height: u32) -> Vec<GroundTruthLabel> {
    let (equirect_bbox, wrapped) = equirect_extent(&t.boundary(BOUNDARY_POINTS), h, width, height);
    FaceId::ALL
        .iter()
        .filter_map(|&face| {
            let (bbox, area, on_face) = face_footprint(t, h, face, face_size)?;
            let keep = bbox.is_valid() && (on_face >= LABEL_MIN_POINTS || area >= LABEL_MIN_AREA);
            keep.then(|| GroundTruthLabel {
                image: String::new(),
                face,
                tag_number: t.number,
                bbox,
                equirect_bbox,
                wrapped,
                visible_area_px: area,
            })
        })
        .collect()
}

/// Applies brightness, blur and gaussian noise, in that order.
pub fn apply_noise(img: &RasterImage, noise: &NoiseSpec, seed: u64) -> RasterImage {
    let mut out = img.clone();
    if noise.brightness_delta != 0.0 {
        let k = 1.0 + noise.brightness_delta;
        for p in out.pixels_mut().iter_mut() {
            *p = to_u8(*p as f64 * k);
        }
    }
    if noise.blur_sigma > 0.0 {
        out = out.gaussian_blur(noise.blur_sigma, EdgeMode::Wrap);
    }
    if noise.gaussian_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise.gaussian_sigma * 255.0).expect("finite sigma");
        for p in out.pixels_mut().iter_mut() {
            *p = to_u8(*p as f64 + normal.sample(&mut rng));
        }
    }
    out
}

pub fn render_scene(spec: &SceneSpec, face_size: u32) -> Result<RenderedScene> {
    spec.validate()?;
    if face_size == 0 {
        return Err(Error::InvalidScene("face size must be positive".into()));
    }
    let (w, hgt) = (spec.width, spec.height);
    let h = spec.camera_height_m;
    let bg = background_image(&spec.background, w, hgt)?;

    let prepared: Vec<PreparedTag> = spec
        .tags
        .iter()
        .map(|t| {
            let (ext, wrapped) = equirect_extent(&t.boundary(BOUNDARY_POINTS), h, w, hgt);
            let m = 2.0;
            let (x_lo, x_hi) = (ext.x_min - m, ext.x_max + m);
            Ok(PreparedTag {
                placement: t,
                art: render_tag(t.number, TAG_RASTER_PX)?,
                x_lo: x_lo.rem_euclid(w as f64),
                x_hi: x_hi.rem_euclid(w as f64),
                wrapped: wrapped || x_lo < 0.0 || x_hi >= w as f64,
                y_lo: ext.y_min - m,
                y_hi: ext.y_max + m,
            })
        })
        .collect::<Result<_>>()?;

    let clean = RasterImage::from_fn(w, hgt, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut base = bg.get(x, y);
        if !spec.distractors.is_empty() {
            let d = equirect_to_direction(EquirectPoint { px, py }, w, hgt);
            let (lon, lat) = (d.lon().to_degrees(), d.lat().to_degrees());
            if let Some(dd) = spec.distractors.iter().find(|dd| dd.contains(lon, lat)) {
                base = dd.rgb;
            }
        }
        let near: Vec<&PreparedTag> = prepared.iter().filter(|t| t.covers(px, py)).collect();
        if near.is_empty() {
            return base;
        }
        let mut acc = [0.0; 3];
        let n = SUPERSAMPLE as f64;
        for sy in 0..SUPERSAMPLE {
            for sx in 0..SUPERSAMPLE {
                let p = EquirectPoint {
                    px: x as f64 + (sx as f64 + 0.5) / n,
                    py: y as f64 + (sy as f64 + 0.5) / n,
                };
                let d = equirect_to_direction(p, w, hgt);
                let mut c = base.map(|v| v as f64);
                if d.y < 0.0 {
                    let t = -h / d.y;
                    let (fx, fz) = (t * d.x, t * d.z);
                    for tag in &near {
                        let (a, b) = tag.placement.floor_to_local(fx, fz);
                        if a.abs() <= 0.5 && b.abs() <= 0.5 {
                            let s = TAG_RASTER_PX as f64;
                            c = tag.art.raster.sample_bilinear((a + 0.5) * s, (0.5 - b) * s, EdgeMode::Clamp);
                            break;
                        }
                    }
                }
                for k in 0..3 {
                    acc[k] += c[k];
                }
            }
        }
        round_rgb(acc.map(|v| v / (n * n)))
    })?;

    let image = apply_noise(&clean, &spec.noise, spec.seed);
    let labels = spec
        .tags
        .iter()
        .flat_map(|t| tag_labels(t, h, face_size, w, hgt))
        .collect();
    Ok(RenderedScene { image, labels })
}

fn default_panos() -> [u32; 2] {
    [7, 8]
}

fn default_distance() -> [f64; 2] {
    [0.8, 2.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseRanges {
    pub gaussian_sigma: [f64; 2],
    pub brightness_delta: [f64; 2],
    pub blur_sigma: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub n_properties: u32,
    /// Inclusive range of panoramas per property.
    #[serde(default = "default_panos")]
    pub panos_per_property: [u32; 2],
    /// Minimum number of neighbor tags visible from each panorama.
    pub tags_per_pano: u32,
    pub width: u32,
    pub height: u32,
    pub face_size: u32,
    pub camera_height_m: f64,
    /// Inclusive range of horizontal tag distances from the camera.
    #[serde(default = "default_distance")]
    pub distance_m: [f64; 2],
    pub tag_side_m: f64,
    /// Tags sit at a multiple of 90 degrees plus up to this much jitter.
    pub rotation_jitter_deg: f64,
    pub noise: NoiseRanges,
    /// Chance that a panorama gets one palette-colored wall rectangle.
    pub distractor_probability: f64,
    pub background: Background,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_properties: 2,
            panos_per_property: default_panos(),
            tags_per_pano: 3,
            width: 4096,
            height: 2048,
            face_size: 1024,
            camera_height_m: 1.5,
            distance_m: default_distance(),
            tag_side_m: DEFAULT_TAG_SIDE_M,
            rotation_jitter_deg: 8.0,
            noise: NoiseRanges::default(),
            distractor_probability: 0.0,
            background: Background::default(),
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let [p0, p1] = self.panos_per_property;
        if p0 < 2 || p0 > p1 || p1 > 20 {
            return bad(format!("panos_per_property {p0}..{p1} must satisfy 2 <= min <= max <= 20"));
        }
        if self.tags_per_pano == 0 || self.tags_per_pano >= p0 {
            return bad(format!("tags_per_pano {} must be in 1..{}", self.tags_per_pano, p0));
        }
        let [d0, d1] = self.distance_m;
        if !(d0 > 0.0 && d0 <= d1) {
            return bad("distance range must be positive and ordered".into());
        }
        if self.face_size == 0 || self.width == 0 || self.height == 0 {
            return bad("image sizes must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.distractor_probability) {
            return bad("distractor_probability must be in 0..1".into());
        }
        let n = &self.noise;
        for (name, r) in [("gaussian_sigma", n.gaussian_sigma), ("brightness_delta", n.brightness_delta), ("blur_sigma", n.blur_sigma)] {
            if r[0] > r[1] {
                return bad(format!("noise range {name} is reversed"));
            }
        }
        Ok(())
    }
}

pub fn property_id(index: u32) -> String {
    format!("prop_{index:02}")
}

pub fn panorama_id(anchor: u32) -> String {
    format!("pano_{anchor:02}")
}

/// Ring over `n` panoramas plus chords `i -> i + k` for growing `k` until
/// every node has at least `min_degree` neighbors. Nodes are 0-based.
pub fn ring_with_chords(n: usize, min_degree: usize) -> Vec<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let link = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        if a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    };
    for i in 0..n {
        link(&mut adj, i, (i + 1) % n);
    }
    let mut k = 2;
    while adj.iter().any(|a| a.len() < min_degree) && k <= n / 2 {
        // chords from every node keep the graph regular
        for i in 0..n {
            link(&mut adj, i, (i + k) % n);
        }
        k += 1;
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    adj
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoramaScene {
    pub id: String,
    pub anchor_tag: u32,
    pub neighbors: Vec<u32>,
    pub spec: SceneSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyScene {
    pub property_id: String,
    pub panoramas: Vec<PanoramaScene>,
}

fn rng_for(seed: u64, prop: u32, pano: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((u64::from(prop) << 32) | u64::from(pano));
    rng
}

fn sample_range(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[1] > r[0] {
        rng.random_range(r[0]..=r[1])
    } else {
        r[0]
    }
}

/// Face boxes of a candidate tag; `None` when it is not fully inside one face
/// with margin.
fn single_face_box(t: &TagPlacement, h: f64, face_size: u32) -> Option<(FaceId, BBox)> {
    let pts = t.boundary(BOUNDARY_POINTS);
    let mut face = None;
    for &(x, z) in &pts {
        let (f, u, v) = direction_to_face_uv(floor_direction(x, z, h));
        if face.is_some_and(|g| g != f) || !(0.04..=0.96).contains(&u) || !(0.04..=0.96).contains(&v) {
            return None;
        }
        face = Some(f);
    }
    let face = face?;
    let (bbox, _, _) = face_footprint(t, h, face, face_size)?;
    Some((face, bbox))
}

fn place_tags(cfg: &DatasetConfig, numbers: &[u32], rng: &mut ChaCha8Rng) -> Result<Vec<TagPlacement>> {
    let h = cfg.camera_height_m;
    'restart: for _ in 0..200 {
        let mut placed: Vec<(TagPlacement, FaceId, BBox)> = Vec::new();
        for &number in numbers {
            let mut ok = None;
            for _ in 0..500 {
                let dist = sample_range(rng, cfg.distance_m);
                let az = rng.random_range(0.0..2.0 * PI);
                let quarter = rng.random_range(0..4) as f64 * 90.0;
                let jitter = if cfg.rotation_jitter_deg > 0.0 {
                    rng.random_range(-cfg.rotation_jitter_deg..=cfg.rotation_jitter_deg)
                } else {
                    0.0
                };
                let t = TagPlacement {
                    number,
                    floor_x_m: dist * az.sin(),
                    floor_z_m: dist * az.cos(),
                    rotation_deg: quarter + jitter,
                    side_m: cfg.tag_side_m,
                };
                let Some((face, bbox)) = single_face_box(&t, h, cfg.face_size) else { continue };
                let clear = placed.iter().all(|(o, f, b)| {
                    let d = (o.floor_x_m - t.floor_x_m).hypot(o.floor_z_m - t.floor_z_m);
                    d >= MIN_TAG_SPACING_M && !tags_overlap(o, &t) && (*f != face || !b.expand(6.0).touches(&bbox))
                });
                if clear {
                    ok = Some((t, face, bbox));
                    break;
                }
            }
            match ok {
                Some(p) => placed.push(p),
                None => continue 'restart,
            }
        }
        return Ok(placed.into_iter().map(|p| p.0).collect());
    }
    Err(Error::InvalidConfig(
        "could not place tags; widen distance_m or reduce tags_per_pano".into(),
    ))
}

/// Scene descriptions of one property, deterministic in `(seed, index)`.
pub fn generate_property(cfg: &DatasetConfig, index: u32) -> Result<PropertyScene> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, index, u32::MAX);
    let [p0, p1] = cfg.panos_per_property;
    let n = rng.random_range(p0..=p1) as usize;
    let adj = ring_with_chords(n, cfg.tags_per_pano as usize);
    let panoramas = (0..n)
        .map(|i| {
            let anchor = i as u32 + 1;
            let mut rng = rng_for(cfg.seed, index, anchor);
            let neighbors: Vec<u32> = adj[i].iter().map(|&j| j as u32 + 1).collect();
            let tags = place_tags(cfg, &neighbors, &mut rng)?;
            let noise = NoiseSpec {
                gaussian_sigma: sample_range(&mut rng, cfg.noise.gaussian_sigma),
                brightness_delta: sample_range(&mut rng, cfg.noise.brightness_delta),
                blur_sigma: sample_range(&mut rng, cfg.noise.blur_sigma),
            };
            let mut distractors = Vec::new();
            if cfg.distractor_probability > 0.0 && rng.random_bool(cfg.distractor_probability) {
                let color = palette().entry(rng.random_range(0..10u8)).color;
                let lon = rng.random_range(-180.0..180.0);
                let lat = rng.random_range(5.0..25.0);
                distractors.push(Distractor {
                    rgb: hsv_to_rgb(color),
                    lon_min_deg: lon,
                    lon_max_deg: lon + rng.random_range(4.0..8.0),
                    lat_min_deg: lat,
                    lat_max_deg: lat + rng.random_range(6.0..14.0),
                });
            }
            let spec = SceneSpec {
                camera_height_m: cfg.camera_height_m,
                width: cfg.width,
                height: cfg.height,
                background: cfg.background.clone(),
                tags,
                noise,
                distractors,
                seed: rng.random(),
            };
            Ok(PanoramaScene {
                id: panorama_id(anchor),
                anchor_tag: anchor,
                neighbors,
                spec,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PropertyScene {
        property_id: property_id(index),
        panoramas,
    })
}

#[derive(Debug, Clone)]
pub struct RenderedPanorama {
    pub id: String,
    pub anchor_tag: u32,
    pub image: RasterImage,
    /// Labels with `image` set to `<property>/<panorama>`.
    pub labels: Vec<GroundTruthLabel>,
}

pub fn render_property(scene: &PropertyScene, face_size: u32) -> Result<Vec<RenderedPanorama>> {
    scene
        .panoramas
        .par_iter()
        .map(|p| {
            let r = render_scene(&p.spec, face_size)?;
            let key = format!("{}/{}", scene.property_id, p.id);
            let labels = r
                .labels
                .into_iter()
                .map(|l| GroundTruthLabel { image: key.clone(), ..l })
                .collect();
            Ok(RenderedPanorama {
                id: p.id.clone(),
                anchor_tag: p.anchor_tag,
                image: r.image,
                labels,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthProperty {
    pub property_id: String,
    pub panoramas: Vec<GroundTruthPanorama>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthPanorama {
    pub id: String,
    pub anchor_tag: u32,
    pub neighbors: Vec<u32>,
    pub tags: Vec<TagPlacement>,
}

/// Contents of `gt.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub config_hash: String,
    pub config: DatasetConfig,
    pub face_size: u32,
    pub properties: Vec<GroundTruthProperty>,
    pub labels: Vec<GroundTruthLabel>,
}

impl GroundTruthFile {
    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

/// YOLO label lines for the labels of one face: `class cx cy w h`, class =
/// tag number - 1, coordinates normalized by the face size.
pub fn yolo_lines(labels: &[&GroundTruthLabel], face_size: u32) -> String {
    let s = face_size as f64;
    let mut out = String::new();
    for l in labels {
        let (cx, cy) = l.bbox.center();
        out.push_str(&format!(
            "{} {:.6} {:.6} {:.6} {:.6}\n",
            l.tag_number - 1,
            cx / s,
            cy / s,
            l.bbox.width() / s,
            l.bbox.height() / s
        ));
    }
    out
}

/// Writes the dataset under `out`:
/// `<prop>/<pano>.png`, `<prop>/faces/<pano>_<face>.png`,
/// `<prop>/labels/<pano>_<face>.txt`, `<prop>/manifest.json` and `gt.json`.
pub fn generate_dataset(cfg: &DatasetConfig, out: &Path) -> Result<GroundTruthFile> {
    cfg.validate()?;
    let mut properties = Vec::new();
    let mut labels = Vec::new();
    for index in 0..cfg.n_properties {
        let scene = generate_property(cfg, index)?;
        let dir = out.join(&scene.property_id);
        for sub in ["faces", "labels"] {
            let d = dir.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
        let rendered = render_property(&scene, cfg.face_size)?;
        rendered.par_iter().try_for_each(|r| -> Result<()> {
            r.image.save_png(&dir.join(format!("{}.png", r.id)))?;
            let faces = equirect_to_cubemap(&r.image, cfg.face_size)?;
            for f in faces.iter() {
                let stem = format!("{}_{}", r.id, f.id);
                f.image.save_png(&dir.join("faces").join(format!("{stem}.png")))?;
                let mine: Vec<&GroundTruthLabel> = r.labels.iter().filter(|l| l.face == f.id).collect();
                let p = dir.join("labels").join(format!("{stem}.txt"));
                std::fs::write(&p, yolo_lines(&mine, cfg.face_size)).map_err(|e| Error::io(&p, e))?;
            }
            Ok(())
        })?;
        let manifest = PropertyManifest {
            property_id: scene.property_id.clone(),
            panoramas: scene
                .panoramas
                .iter()
                .map(|p| ManifestEntry {
                    id: p.id.clone(),
                    file: format!("{}.png", p.id),
                    anchor_tag: p.anchor_tag,
                    capture_index: Some(p.anchor_tag),
                })
                .collect(),
        };
        io::write_json(&manifest, &dir.join("manifest.json"))?;
        labels.extend(rendered.into_iter().flat_map(|r| r.labels));
        properties.push(GroundTruthProperty {
            property_id: scene.property_id,
            panoramas: scene
                .panoramas
                .into_iter()
                .map(|p| GroundTruthPanorama {
                    id: p.id,
                    anchor_tag: p.anchor_tag,
                    neighbors: p.neighbors,
                    tags: p.spec.tags,
                })
                .collect(),
        });
    }
    let gt = GroundTruthFile {
        config_hash: io::config_hash(cfg),
        config: cfg.clone(),
        face_size: cfg.face_size,
        properties,
        labels,
    };
    io::write_json(&gt, &out.join("gt.json"))?;
    Ok(gt)
}

/// Ground-truth undirected edges per property, as sorted panorama id pairs.
pub fn ground_truth_edges(p: &GroundTruthProperty) -> BTreeSet<(String, String)> {
    let mut m = BTreeSet::new();
    for pano in &p.panoramas {
        for &k in &pano.neighbors {
            let other = panorama_id(k);
            let pair = if pano.id <= other { (pano.id.clone(), other) } else { (other, pano.id.clone()) };
            m.insert(pair);
        }
    }
    m
}
