//! Equirectangular and cubemap projections, for whole images and single points.
//!
//! Frame: right-handed, +X right, +Y up, +Z forward. Face coordinates `(u, v)`
//! run rightward and downward in the face raster, both in `[0, 1]`:
//!
//! | face   | unnormalized direction      |
//! |--------|-----------------------------|
//! | front  | `(2u-1, 1-2v, 1)`           |
//! | back   | `(1-2u, 1-2v, -1)`          |
//! | left   | `(-1, 1-2v, 2u-1)`          |
//! | right  | `(1, 1-2v, 1-2u)`           |
//! | top    | `(2u-1, 1, 2v-1)`           |
//! | bottom | `(2u-1, -1, 1-2v)`          |
//!
//! With this orientation the bottom row of the front face continues onto the
//! top row of the bottom face without a flip, and the top face's bottom row
//! meets the front face's top row.
//!
//! Equirectangular pixels use plate carrée: `lon = atan2(x, z)`,
//! `lat = asin(y)`, `px = (lon / 2pi + 0.5) W`, `py = (0.5 - lat / pi) H`.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{round_rgb, EdgeMode, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceId {
    Front,
    Back,
    Left,
    Right,
    Top,
    Bottom,
}

impl FaceId {
    pub const ALL: [FaceId; 6] = [
        FaceId::Front,
        FaceId::Back,
        FaceId::Left,
        FaceId::Right,
        FaceId::Top,
        FaceId::Bottom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaceId::Front => "front",
            FaceId::Back => "back",
            FaceId::Left => "left",
            FaceId::Right => "right",
            FaceId::Top => "top",
            FaceId::Bottom => "bottom",
        }
    }

    /// Outward axis of the face.
    pub fn normal(self) -> [f64; 3] {
        match self {
            FaceId::Front => [0.0, 0.0, 1.0],
            FaceId::Back => [0.0, 0.0, -1.0],
            FaceId::Left => [-1.0, 0.0, 0.0],
            FaceId::Right => [1.0, 0.0, 0.0],
            FaceId::Top => [0.0, 1.0, 0.0],
            FaceId::Bottom => [0.0, -1.0, 0.0],
        }
    }
}

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FaceId::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown cube face `{s}`")))
    }
}

/// Unit vector on the viewing sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Direction {
    /// Normalizes `(x, y, z)`; the input must be nonzero.
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        let n = (x * x + y * y + z * z).sqrt();
        debug_assert!(n > 0.0, "zero direction");
        Self {
            x: x / n,
            y: y / n,
            z: z / n,
        }
    }

    pub fn from_lon_lat(lon: f64, lat: f64) -> Self {
        let (sl, cl) = lat.sin_cos();
        let (so, co) = lon.sin_cos();
        Self {
            x: cl * so,
            y: sl,
            z: cl * co,
        }
    }

    /// Longitude in `(-pi, pi]`, zero straight ahead, positive to the right.
    pub fn lon(&self) -> f64 {
        self.x.atan2(self.z)
    }

    pub fn lat(&self) -> f64 {
        self.y.clamp(-1.0, 1.0).asin()
    }

    pub fn dot(&self, o: &Direction) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Rotation about +Y that adds `angle` to the longitude.
    pub fn rotate_yaw(&self, angle: f64) -> Direction {
        let (s, c) = angle.sin_cos();
        Direction {
            x: self.x * c + self.z * s,
            y: self.y,
            z: self.z * c - self.x * s,
        }
    }
}

/// Continuous equirectangular pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquirectPoint {
    pub px: f64,
    pub py: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeFace {
    pub id: FaceId,
    pub image: RasterImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubeFaceSet {
    faces: Vec<CubeFace>,
    face_size: u32,
}

impl CubeFaceSet {
    /// Assembles a set from six square faces of equal size, one per id.
    pub fn new(mut faces: Vec<CubeFace>) -> Result<Self> {
        if faces.len() != 6 {
            return Err(Error::InvalidImage(format!(
                "a cube face set needs 6 faces, got {}",
                faces.len()
            )));
        }
        faces.sort_by_key(|f| f.id);
        for (f, id) in faces.iter().zip(FaceId::ALL) {
            if f.id != id {
                return Err(Error::InvalidImage(format!("face `{id}` missing or duplicated")));
            }
        }
        let size = faces[0].image.width();
        for f in &faces {
            if f.image.width() != size || f.image.height() != size {
                return Err(Error::InvalidImage(format!(
                    "face `{}` is {}x{}, expected {size}x{size}",
                    f.id,
                    f.image.width(),
                    f.image.height()
                )));
            }
        }
        Ok(Self {
            faces,
            face_size: size,
        })
    }

    pub fn face_size(&self) -> u32 {
        self.face_size
    }

    pub fn get(&self, id: FaceId) -> &CubeFace {
        &self.faces[id as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &CubeFace> {
        self.faces.iter()
    }

    pub fn into_faces(self) -> Vec<CubeFace> {
        self.faces
    }
}

/// File name of one face image: `<stem>_<face>.png`.
pub fn face_file_name(stem: &str, face: FaceId) -> String {
    format!("{stem}_{face}.png")
}

/// Writes the six faces as `<stem>_<face>.png` under `dir`.
pub fn save_face_set(faces: &CubeFaceSet, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    faces
        .iter()
        .map(|f| {
            let p = dir.join(face_file_name(stem, f.id));
            f.image.save_png(&p)?;
            Ok(p)
        })
        .collect()
}

pub fn load_face_set(dir: &Path, stem: &str) -> Result<CubeFaceSet> {
    let faces = FaceId::ALL
        .iter()
        .map(|&id| {
            Ok(CubeFace {
                id,
                image: RasterImage::load_png(&dir.join(face_file_name(stem, id)))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CubeFaceSet::new(faces)
}

pub fn face_uv_to_direction(face: FaceId, u: f64, v: f64) -> Direction {
    let a = 2.0 * u - 1.0;
    let b = 1.0 - 2.0 * v;
    let (x, y, z) = match face {
        FaceId::Front => (a, b, 1.0),
        FaceId::Back => (-a, b, -1.0),
        FaceId::Left => (-1.0, b, a),
        FaceId::Right => (1.0, b, -a),
        FaceId::Top => (a, 1.0, -b),
        FaceId::Bottom => (a, -1.0, b),
    };
    Direction::new(x, y, z)
}

/// Picks the face by largest absolute component (ties: x, then y, then z)
/// and solves for `(u, v)`.
pub fn direction_to_face_uv(d: Direction) -> (FaceId, f64, f64) {
    let (ax, ay, az) = (d.x.abs(), d.y.abs(), d.z.abs());
    if ax >= ay && ax >= az {
        if d.x > 0.0 {
            (FaceId::Right, 0.5 * (1.0 - d.z / ax), 0.5 * (1.0 - d.y / ax))
        } else {
            (FaceId::Left, 0.5 * (1.0 + d.z / ax), 0.5 * (1.0 - d.y / ax))
        }
    } else if ay >= az {
        if d.y > 0.0 {
            (FaceId::Top, 0.5 * (1.0 + d.x / ay), 0.5 * (1.0 + d.z / ay))
        } else {
            (FaceId::Bottom, 0.5 * (1.0 + d.x / ay), 0.5 * (1.0 - d.z / ay))
        }
    } else if d.z > 0.0 {
        (FaceId::Front, 0.5 * (1.0 + d.x / az), 0.5 * (1.0 - d.y / az))
    } else {
        (FaceId::Back, 0.5 * (1.0 - d.x / az), 0.5 * (1.0 - d.y / az))
    }
}

/// Gnomonic projection onto the plane of `face`, without checking that the
/// direction actually lands on that face. `None` when the direction points
/// away from the face.
pub fn direction_to_face_plane(face: FaceId, d: Direction) -> Option<(f64, f64)> {
    let n = face.normal();
    let depth = d.x * n[0] + d.y * n[1] + d.z * n[2];
    if depth <= 1e-12 {
        return None;
    }
    let (x, y, z) = (d.x / depth, d.y / depth, d.z / depth);
    let (a, b) = match face {
        FaceId::Front => (x, y),
        FaceId::Back => (-x, y),
        FaceId::Left => (z, y),
        FaceId::Right => (-z, y),
        FaceId::Top => (x, -z),
        FaceId::Bottom => (x, z),
    };
    Some((0.5 * (a + 1.0), 0.5 * (1.0 - b)))
}

fn warn_aspect(width: u32, height: u32) {
    if width != 2 * height {
        log::warn!("equirectangular size {width}x{height} is not 2:1");
    }
}

pub fn direction_to_equirect(d: Direction, width: u32, height: u32) -> EquirectPoint {
    let (w, h) = (width as f64, height as f64);
    let mut px = (d.lon() / (2.0 * PI) + 0.5) * w;
    if px >= w {
        px -= w;
    }
    EquirectPoint {
        px,
        py: (0.5 - d.lat() / PI) * h,
    }
}

/// Inverse plate carrée.
pub fn equirect_to_direction(p: EquirectPoint, width: u32, height: u32) -> Direction {
    let lon = (p.px / width as f64 - 0.5) * 2.0 * PI;
    let lat = (0.5 - p.py / height as f64) * PI;
    Direction::from_lon_lat(lon, lat)
}

/// Maps face pixel coordinates (pixel-index convention, centers at `+0.5`)
/// to equirectangular coordinates.
pub fn face_point_to_equirect(
    face: FaceId,
    x_px: f64,
    y_px: f64,
    face_size: u32,
    width: u32,
    height: u32,
) -> EquirectPoint {
    let s = face_size as f64;
    let d = face_uv_to_direction(face, (x_px + 0.5) / s, (y_px + 0.5) / s);
    direction_to_equirect(d, width, height)
}

pub fn equirect_to_cubemap(eq: &RasterImage, face_size: u32) -> Result<CubeFaceSet> {
    if face_size == 0 {
        return Err(Error::InvalidImage("face size must be positive".into()));
    }
    let (w, h) = (eq.width(), eq.height());
    warn_aspect(w, h);
    let s = face_size as f64;
    let faces = FaceId::ALL
        .into_iter()
        .map(|id| {
            let image = RasterImage::from_fn(face_size, face_size, |i, j| {
                let d = face_uv_to_direction(id, (i as f64 + 0.5) / s, (j as f64 + 0.5) / s);
                let p = direction_to_equirect(d, w, h);
                round_rgb(eq.sample_bilinear(p.px, p.py, EdgeMode::Wrap))
            })?;
            Ok(CubeFace { id, image })
        })
        .collect::<Result<Vec<_>>>()?;
    CubeFaceSet::new(faces)
}

pub fn cubemap_to_equirect(faces: &CubeFaceSet, width: u32, height: u32) -> Result<RasterImage> {
    warn_aspect(width, height);
    let s = faces.face_size() as f64;
    RasterImage::from_fn(width, height, |x, y| {
        let p = EquirectPoint {
            px: x as f64 + 0.5,
            py: y as f64 + 0.5,
        };
        let d = equirect_to_direction(p, width, height);
        let (id, u, v) = direction_to_face_uv(d);
        round_rgb(faces.get(id).image.sample_bilinear(u * s, v * s, EdgeMode::Clamp))
    })
}
