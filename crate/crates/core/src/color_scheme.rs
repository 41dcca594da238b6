//! Digit color palette and bi-colored tag rendering.
//!
//! A tag carries a two-digit number (1..=20, single digits zero-padded). The
//! raster is split into two halves: the leading (tens) digit on top, the
//! trailing (units) digit below. Each half is filled with its digit's palette
//! color and carries a black seven-segment numeral; the leading half also
//! carries a filled black circle that tells the halves apart.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterImage, Rgb};

pub const MIN_TAG_NUMBER: u32 = 1;
pub const MAX_TAG_NUMBER: u32 = 20;
pub const MIN_TAG_SIDE: u32 = 64;

/// Hue in degrees `[0, 360)`, saturation and value as fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvColor {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl HsvColor {
    pub const fn new(h: f64, s: f64, v: f64) -> Self {
        Self { h, s, v }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..360.0).contains(&self.h)
            && (0.0..=1.0).contains(&self.s)
            && (0.0..=1.0).contains(&self.v)
    }
}

/// Hexcone HSV to 8-bit RGB, rounding half up.
pub fn hsv_to_rgb(c: HsvColor) -> Rgb {
    let [r, g, b] = hsv_to_rgb_f64(c);
    let q = |x: f64| (x * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8;
    [q(r), q(g), q(b)]
}

/// Hexcone HSV to RGB fractions in `[0, 1]`.
pub fn hsv_to_rgb_f64(c: HsvColor) -> [f64; 3] {
    let h = c.h.rem_euclid(360.0) / 60.0;
    let chroma = c.v * c.s;
    let x = chroma * (1.0 - ((h % 2.0) - 1.0).abs());
    let m = c.v - chroma;
    let (r, g, b) = match h as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    [r + m, g + m, b + m]
}

/// RGB fractions in `[0, 1]` to HSV. Achromatic colors get hue 0.
pub fn rgb_to_hsv_f64(rgb: [f64; 3]) -> HsvColor {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max <= 0.0 { 0.0 } else { delta / max };
    HsvColor {
        h: if h >= 360.0 { h - 360.0 } else { h },
        s,
        v: max,
    }
}

pub fn rgb_to_hsv(px: Rgb) -> HsvColor {
    rgb_to_hsv_f64([
        px[0] as f64 / 255.0,
        px[1] as f64 / 255.0,
        px[2] as f64 / 255.0,
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaletteEntry {
    pub digit: u8,
    pub name: &'static str,
    pub color: HsvColor,
    /// Published 24-bit reference value, `0xRRGGBB`.
    pub reference_rgb_hex: u32,
}

impl PaletteEntry {
    pub fn rgb(&self) -> Rgb {
        hsv_to_rgb(self.color)
    }

    pub fn reference_rgb(&self) -> Rgb {
        let x = self.reference_rgb_hex;
        [(x >> 16) as u8, (x >> 8) as u8, x as u8]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagPalette {
    entries: [PaletteEntry; 10],
}

impl TagPalette {
    pub fn entries(&self) -> &[PaletteEntry; 10] {
        &self.entries
    }

    pub fn entry(&self, digit: u8) -> &PaletteEntry {
        &self.entries[digit as usize]
    }
}

impl std::ops::Index<usize> for TagPalette {
    type Output = PaletteEntry;

    fn index(&self, i: usize) -> &PaletteEntry {
        &self.entries[i]
    }
}

const fn entry(digit: u8, name: &'static str, h: f64, s: f64, v: f64, hex: u32) -> PaletteEntry {
    PaletteEntry {
        digit,
        name,
        color: HsvColor::new(h, s, v),
        reference_rgb_hex: hex,
    }
}

static PALETTE: TagPalette = TagPalette {
    entries: [
        entry(0, "green", 112.0, 0.59, 0.76, 0x5fc24f),
        entry(1, "red", 3.0, 0.84, 0.84, 0xd62b22),
        entry(2, "violet", 266.0, 0.73, 0.85, 0x7f3bd9),
        entry(3, "brown", 25.0, 0.82, 0.58, 0x944d1b),
        entry(4, "pink", 316.0, 0.59, 0.87, 0xde5bbb),
        entry(5, "grey", 0.0, 0.00, 0.64, 0xa3a3a3),
        entry(6, "yellow", 43.0, 0.72, 0.89, 0xe3b540),
        entry(7, "light_blue", 194.0, 0.62, 0.87, 0x54bede),
        entry(8, "dark_blue", 224.0, 0.97, 0.93, 0x0744ed),
        entry(9, "orange", 25.0, 0.79, 0.94, 0xf08132),
    ],
};

/// The fixed ten-entry digit palette.
pub fn palette() -> &'static TagPalette {
    &PALETTE
}

/// Axis-aligned pixel rectangle, `[x, x + w) x [y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x as f64
            && px < (self.x + self.w) as f64
            && py >= self.y as f64
            && py < (self.y + self.h) as f64
    }
}

/// Which axis separates the two digit halves of a tag raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLayout {
    /// Horizontal cut; leading half on top.
    LeadingTop,
}

#[derive(Debug, Clone)]
pub struct TagArt {
    pub number: u32,
    pub raster: RasterImage,
    pub leading_digit: u8,
    pub trailing_digit: u8,
    pub layout: SplitLayout,
    pub leading_region: Rect,
    pub trailing_region: Rect,
    pub circle_center: (f64, f64),
    pub circle_radius: f64,
}

/// Splits a tag number into (leading, trailing) digits, zero-padding 1..=9.
pub fn tag_digits(number: u32) -> Result<(u8, u8)> {
    if !(MIN_TAG_NUMBER..=MAX_TAG_NUMBER).contains(&number) {
        return Err(Error::InvalidTagNumber(number));
    }
    Ok(((number / 10) as u8, (number % 10) as u8))
}

// Seven-segment layout: a, b, c, d, e, f, g.
const SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, true, true, true, false],
    [false, true, true, false, false, false, false],
    [true, true, false, true, true, false, true],
    [true, true, true, true, false, false, true],
    [false, true, true, false, false, true, true],
    [true, false, true, true, false, true, true],
    [true, false, true, true, true, true, true],
    [true, true, true, false, false, false, false],
    [true, true, true, true, true, true, true],
    [true, true, true, true, false, true, true],
];

// Glyph box, in units of the tag side. Kept clear of the circle and well
// below the circle's area so the circle stays the dominant dark blob.
const GLYPH_W: f64 = 0.12;
const GLYPH_H: f64 = 0.20;
const GLYPH_CENTER_X: f64 = 0.78;
const CIRCLE_DIAMETER: f64 = 0.25;
const CIRCLE_HEIGHT_IN_HALF: f64 = 0.30;

/// Continuous rectangles `(x0, y0, x1, y1)` covering the lit segments of `digit`.
fn glyph_rects(digit: u8, cx: f64, cy: f64, side: f64) -> Vec<(f64, f64, f64, f64)> {
    let gw = GLYPH_W * side;
    let gh = GLYPH_H * side;
    let t = side / 24.0;
    let x0 = cx - gw / 2.0;
    let y0 = cy - gh / 2.0;
    let upper = gh / 2.0 + t / 2.0;
    let seg = [
        (0.0, 0.0, gw, t),
        (gw - t, 0.0, gw, upper),
        (gw - t, gh / 2.0 - t / 2.0, gw, gh),
        (0.0, gh - t, gw, gh),
        (0.0, gh / 2.0 - t / 2.0, t, gh),
        (0.0, 0.0, t, upper),
        (0.0, (gh - t) / 2.0, gw, (gh + t) / 2.0),
    ];
    SEGMENTS[digit as usize]
        .iter()
        .zip(seg)
        .filter(|(on, _)| **on)
        .map(|(_, (a, b, c, d))| (x0 + a, y0 + b, x0 + c, y0 + d))
        .collect()
}

/// Renders the standardized tag raster for `number` at `side_px` pixels.
pub fn render_tag(number: u32, side_px: u32) -> Result<TagArt> {
    let (leading, trailing) = tag_digits(number)?;
    if side_px < MIN_TAG_SIDE {
        return Err(Error::InvalidTagSide(side_px));
    }
    let side = side_px as f64;
    let half = side_px / 2;
    let leading_region = Rect {
        x: 0,
        y: 0,
        w: side_px,
        h: half,
    };
    let trailing_region = Rect {
        x: 0,
        y: half,
        w: side_px,
        h: side_px - half,
    };
    let lead_rgb = palette().entry(leading).rgb();
    let trail_rgb = palette().entry(trailing).rgb();

    let circle_center = (side / 2.0, CIRCLE_HEIGHT_IN_HALF * half as f64);
    let circle_radius = CIRCLE_DIAMETER * side / 2.0;

    let lead_cy = half as f64 / 2.0;
    let trail_cy = half as f64 + (side_px - half) as f64 / 2.0;
    let mut strokes = glyph_rects(leading, GLYPH_CENTER_X * side, lead_cy, side);
    strokes.extend(glyph_rects(trailing, GLYPH_CENTER_X * side, trail_cy, side));

    let raster = RasterImage::from_fn(side_px, side_px, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let dx = px - circle_center.0;
        let dy = py - circle_center.1;
        if dx * dx + dy * dy <= circle_radius * circle_radius {
            return [0, 0, 0];
        }
        if strokes
            .iter()
            .any(|&(x0, y0, x1, y1)| px >= x0 && px < x1 && py >= y0 && py < y1)
        {
            return [0, 0, 0];
        }
        if y < half {
            lead_rgb
        } else {
            trail_rgb
        }
    })?;

    Ok(TagArt {
        number,
        raster,
        leading_digit: leading,
        trailing_digit: trailing,
        layout: SplitLayout::LeadingTop,
        leading_region,
        trailing_region,
        circle_center,
        circle_radius,
    })
}

pub fn tag_file_name(number: u32) -> String {
    format!("tag_{number:02}.png")
}

/// Writes one PNG per tag number into `out_dir`, returning the written paths.
pub fn write_tag_sheet(numbers: &[u32], side_px: u32, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if numbers.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    numbers
        .iter()
        .map(|&n| {
            let art = render_tag(n, side_px)?;
            let path = out_dir.join(tag_file_name(n));
            art.raster.save_png(&path)?;
            Ok(path)
        })
        .collect()
}
