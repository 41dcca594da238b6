//! Minimal 8-bit RGB raster used throughout the pipeline.
//!
//! Pixels are stored row-major, three bytes per pixel, no padding. Sampling
//! follows the pixel-center convention: pixel `(i, j)` covers the continuous
//! square `[i, i+1) x [j, j+1)` and its value lives at `(i + 0.5, j + 0.5)`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type Rgb = [u8; 3];

#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

/// How out-of-range horizontal coordinates are resolved when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeMode {
    Clamp,
    Wrap,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, fill: Rgb) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "degenerate dimensions {width}x{height}"
            )));
        }
        let n = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            pixels.extend_from_slice(&fill);
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_raw(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "degenerate dimensions {width}x{height}"
            )));
        }
        if pixels.len() != width as usize * height as usize * 3 {
            return Err(Error::InvalidImage(format!(
                "buffer of {} bytes does not match {width}x{height}x3",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel, rows in parallel.
    pub fn from_fn<F>(width: u32, height: u32, f: F) -> Result<Self>
    where
        F: Fn(u32, u32) -> Rgb + Sync,
    {
        use rayon::prelude::*;
        let mut img = Self::new(width, height, [0, 0, 0])?;
        let row_len = width as usize * 3;
        img.pixels
            .par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(y, row)| {
                for x in 0..width {
                    let px = f(x, y as u32);
                    let o = x as usize * 3;
                    row[o..o + 3].copy_from_slice(&px);
                }
            });
        Ok(img)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Rgb {
        let o = self.offset(x, y);
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, px: Rgb) {
        let o = self.offset(x, y);
        self.pixels[o..o + 3].copy_from_slice(&px);
    }

    /// Bilinear sample at continuous coordinates `(fx, fy)`.
    ///
    /// Vertical coordinates always clamp; horizontal ones follow `mode`.
    /// Returns unrounded channel values.
    pub fn sample_bilinear(&self, fx: f64, fy: f64, mode: EdgeMode) -> [f64; 3] {
        let x = fx - 0.5;
        let y = fy - 0.5;
        let x0f = x.floor();
        let y0f = y.floor();
        let tx = x - x0f;
        let ty = y - y0f;
        let w = self.width as i64;
        let h = self.height as i64;
        let resolve_x = |xi: i64| -> u32 {
            match mode {
                EdgeMode::Wrap => xi.rem_euclid(w) as u32,
                EdgeMode::Clamp => xi.clamp(0, w - 1) as u32,
            }
        };
        let x0 = resolve_x(x0f as i64);
        let x1 = resolve_x(x0f as i64 + 1);
        let y0 = (y0f as i64).clamp(0, h - 1) as u32;
        let y1 = (y0f as i64 + 1).clamp(0, h - 1) as u32;
        let p00 = self.get(x0, y0);
        let p10 = self.get(x1, y0);
        let p01 = self.get(x0, y1);
        let p11 = self.get(x1, y1);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] as f64 * (1.0 - tx) + p10[c] as f64 * tx;
            let bot = p01[c] as f64 * (1.0 - tx) + p11[c] as f64 * tx;
            out[c] = top * (1.0 - ty) + bot * ty;
        }
        out
    }

    /// Axis-aligned crop; the rectangle is clipped to the image.
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Result<RasterImage> {
        let x1 = (x0 + w).min(self.width);
        let y1 = (y0 + h).min(self.height);
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::InvalidImage("empty crop".into()));
        }
        let mut pixels = Vec::with_capacity(((x1 - x0) * (y1 - y0) * 3) as usize);
        for y in y0..y1 {
            let a = self.offset(x0, y);
            let b = self.offset(x1 - 1, y) + 3;
            pixels.extend_from_slice(&self.pixels[a..b]);
        }
        RasterImage::from_raw(x1 - x0, y1 - y0, pixels)
    }

    /// Rotates the image by 180 degrees.
    pub fn rotate180(&self) -> RasterImage {
        let mut out = self.clone();
        let n = (self.width * self.height) as usize;
        for i in 0..n {
            let j = n - 1 - i;
            out.pixels[i * 3..i * 3 + 3].copy_from_slice(&self.pixels[j * 3..j * 3 + 3]);
        }
        out
    }

    /// Rotates the image by 90 degrees clockwise.
    pub fn rotate90(&self) -> RasterImage {
        let (w, h) = (self.width, self.height);
        let mut out = RasterImage::new(h, w, [0, 0, 0]).expect("nonzero dims");
        for y in 0..h {
            for x in 0..w {
                out.put(h - 1 - y, x, self.get(x, y));
            }
        }
        out
    }

    /// Separable Gaussian blur. Rows wrap when `mode` is `Wrap`, columns clamp.
    pub fn gaussian_blur(&self, sigma: f64, mode: EdgeMode) -> RasterImage {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as i64;
        let mut kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let sum: f64 = kernel.iter().sum();
        kernel.iter_mut().for_each(|k| *k /= sum);

        let (w, h) = (self.width as i64, self.height as i64);
        let mut tmp = vec![0f32; self.pixels.len()];
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0f64; 3];
                for (k, wt) in kernel.iter().enumerate() {
                    let xi = x + k as i64 - radius;
                    let xi = match mode {
                        EdgeMode::Wrap => xi.rem_euclid(w),
                        EdgeMode::Clamp => xi.clamp(0, w - 1),
                    };
                    let o = ((y * w + xi) * 3) as usize;
                    for c in 0..3 {
                        acc[c] += wt * self.pixels[o + c] as f64;
                    }
                }
                let o = ((y * w + x) * 3) as usize;
                for c in 0..3 {
                    tmp[o + c] = acc[c] as f32;
                }
            }
        }
        let mut out = self.clone();
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0f64; 3];
                for (k, wt) in kernel.iter().enumerate() {
                    let yi = (y + k as i64 - radius).clamp(0, h - 1);
                    let o = ((yi * w + x) * 3) as usize;
                    for c in 0..3 {
                        acc[c] += wt * tmp[o + c] as f64;
                    }
                }
                let o = ((y * w + x) * 3) as usize;
                for c in 0..3 {
                    out.pixels[o + c] = to_u8(acc[c]);
                }
            }
        }
        out
    }

    pub fn load_png(path: &Path) -> Result<RasterImage> {
        let img = image::open(path).map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        RasterImage::from_raw(w, h, rgb.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        image::save_buffer_with_format(
            path,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
            image::ImageFormat::Png,
        )
        .map_err(|source| Error::Codec {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Width and height of an image file, read from its header.
pub fn image_dimensions(path: &Path) -> Result<(u32, u32)> {
    image::image_dimensions(path).map_err(|source| Error::Codec {
        path: path.to_path_buf(),
        source,
    })
}

/// Rounds half up and saturates to the 8-bit range.
#[inline]
pub fn to_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

#[inline]
pub fn round_rgb(v: [f64; 3]) -> Rgb {
    [to_u8(v[0]), to_u8(v[1]), to_u8(v[2])]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_dimensions() {
        assert!(RasterImage::new(0, 4, [0, 0, 0]).is_err());
        assert!(RasterImage::from_raw(2, 2, vec![0; 11]).is_err());
    }

    #[test]
    fn bilinear_hits_pixel_centers_exactly() {
        let img = RasterImage::from_fn(4, 3, |x, y| [(x * 10) as u8, (y * 20) as u8, 7]).unwrap();
        for y in 0..3 {
            for x in 0..4 {
                let s = img.sample_bilinear(x as f64 + 0.5, y as f64 + 0.5, EdgeMode::Clamp);
                assert_eq!(round_rgb(s), img.get(x, y));
            }
        }
        // halfway between columns 1 and 2
        let s = img.sample_bilinear(2.0, 0.5, EdgeMode::Clamp);
        assert!((s[0] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn wrap_mode_blends_across_the_seam() {
        let img = RasterImage::from_fn(4, 1, |x, _| if x == 0 { [100, 0, 0] } else if x == 3 { [200, 0, 0] } else { [0, 0, 0] }).unwrap();
        let s = img.sample_bilinear(0.0, 0.5, EdgeMode::Wrap);
        assert!((s[0] - 150.0).abs() < 1e-12);
        let s = img.sample_bilinear(0.0, 0.5, EdgeMode::Clamp);
        assert!((s[0] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn blur_keeps_constant_images() {
        let img = RasterImage::new(9, 5, [12, 130, 250]).unwrap();
        assert_eq!(img.gaussian_blur(1.5, EdgeMode::Wrap), img);
    }

    #[test]
    fn rotations_compose() {
        let img = RasterImage::from_fn(5, 3, |x, y| [x as u8, y as u8, (x * y) as u8]).unwrap();
        assert_eq!(img.rotate90().rotate90(), img.rotate180());
        assert_eq!(img.rotate180().rotate180(), img);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.png");
        let img = RasterImage::from_fn(7, 4, |x, y| [x as u8 * 30, y as u8 * 60, 9]).unwrap();
        img.save_png(&path).unwrap();
        assert_eq!(RasterImage::load_png(&path).unwrap(), img);
    }
}
