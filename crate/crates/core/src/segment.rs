//! Binary masks, 3x3 morphology and 8-connected component labelling.

use crate::bbox::BBox;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Number of set pixels inside the half-open pixel rectangle.
    pub fn count_in(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> usize {
        let mut n = 0;
        for y in y0..y1.min(self.height) {
            let row = &self.bits[y * self.width..(y + 1) * self.width];
            n += row[x0.min(self.width)..x1.min(self.width)]
                .iter()
                .filter(|b| **b)
                .count();
        }
        n
    }

    // Out-of-bounds neighbours are ignored, so objects touching the border
    // are neither grown nor eroded from outside.
    fn filter3(&self, want: bool) -> Mask {
        let (w, h) = (self.width, self.height);
        // separable: horizontal pass then vertical pass
        let mut tmp = vec![false; w * h];
        for y in 0..h {
            let row = &self.bits[y * w..(y + 1) * w];
            for x in 0..w {
                let lo = x.saturating_sub(1);
                let hi = (x + 1).min(w - 1);
                let hit = row[lo..=hi].iter().any(|b| *b == want);
                tmp[y * w + x] = if hit { want } else { !want };
            }
        }
        let mut out = vec![false; w * h];
        for y in 0..h {
            let lo = y.saturating_sub(1);
            let hi = (y + 1).min(h - 1);
            for x in 0..w {
                let hit = (lo..=hi).any(|yy| tmp[yy * w + x] == want);
                out[y * w + x] = if hit { want } else { !want };
            }
        }
        Mask {
            width: w,
            height: h,
            bits: out,
        }
    }

    pub fn dilate3(&self) -> Mask {
        self.filter3(true)
    }

    pub fn erode3(&self) -> Mask {
        self.filter3(false)
    }

    pub fn close3(&self) -> Mask {
        self.dilate3().erode3()
    }

    pub fn open3(&self) -> Mask {
        self.erode3().dilate3()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub area: usize,
    /// Pixel-edge box: `[min_x, max_x + 1) x [min_y, max_y + 1)`.
    pub bbox: BBox,
    pub centroid: (f64, f64),
    /// Number of pixel edges between the component and anything else.
    pub crack_length: usize,
}

impl Component {
    /// `4 pi A / P^2` with the crack length scaled by `pi / 4`, which makes
    /// the perimeter estimate unbiased for digitized discs.
    pub fn circularity(&self) -> f64 {
        let p = self.crack_length as f64 * std::f64::consts::FRAC_PI_4;
        if p <= 0.0 {
            return 0.0;
        }
        4.0 * std::f64::consts::PI * self.area as f64 / (p * p)
    }
}

/// 8-connected components of the set pixels, in raster-scan order of their
/// first pixel.
pub fn connected_components(mask: &Mask) -> Vec<Component> {
    let (w, h) = (mask.width, mask.height);
    let mut label = vec![u32::MAX; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask.bits[start] || label[start] != u32::MAX {
            continue;
        }
        let id = out.len() as u32;
        label[start] = id;
        stack.push(start);
        let (mut area, mut sx, mut sy, mut crack) = (0usize, 0f64, 0f64, 0usize);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            area += 1;
            sx += x as f64 + 0.5;
            sy += y as f64 + 0.5;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
            let set = |xx: isize, yy: isize| {
                xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h && mask.bits[yy as usize * w + xx as usize]
            };
            let (xi, yi) = (x as isize, y as isize);
            for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                if !set(xi + dx, yi + dy) {
                    crack += 1;
                }
            }
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if (dx != 0 || dy != 0) && set(xi + dx, yi + dy) {
                        let j = (yi + dy) as usize * w + (xi + dx) as usize;
                        if label[j] == u32::MAX {
                            label[j] = id;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        out.push(Component {
            area,
            bbox: BBox::new(x0 as f64, y0 as f64, (x1 + 1) as f64, (y1 + 1) as f64),
            centroid: (sx / area as f64, sy / area as f64),
            crack_length: crack,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opening_removes_specks_and_closing_fills_pinholes() {
        let mut m = Mask::from_fn(20, 20, |x, y| (5..15).contains(&x) && (5..15).contains(&y));
        m.set(10, 10, false);
        m.set(2, 2, true);
        let cleaned = m.close3().open3();
        assert!(cleaned.get(10, 10));
        assert!(!cleaned.get(2, 2));
        assert_eq!(cleaned.count(), 100);
    }

    #[test]
    fn eight_connectivity_joins_diagonals() {
        let m = Mask::from_fn(4, 4, |x, y| x == y);
        let cc = connected_components(&m);
        assert_eq!(cc.len(), 1);
        assert_eq!(cc[0].area, 4);
        assert_eq!(cc[0].bbox, BBox::new(0.0, 0.0, 4.0, 4.0));
        assert_eq!(cc[0].crack_length, 16);
    }

    #[test]
    fn separate_blobs_and_stats() {
        let m = Mask::from_fn(10, 4, |x, y| (x < 2 && y < 2) || (x >= 6 && y >= 1));
        let cc = connected_components(&m);
        assert_eq!(cc.len(), 2);
        assert_eq!(cc[0].area, 4);
        assert_eq!(cc[0].centroid, (1.0, 1.0));
        assert_eq!(cc[1].bbox, BBox::new(6.0, 1.0, 10.0, 4.0));
        assert_eq!(m.count_in(0, 0, 2, 2), 4);
    }

    #[test]
    fn circularity_separates_discs_from_bars() {
        let r = 12.0;
        let disc = Mask::from_fn(40, 40, |x, y| {
            let dx = x as f64 + 0.5 - 20.0;
            let dy = y as f64 + 0.5 - 20.0;
            dx * dx + dy * dy <= r * r
        });
        let c = connected_components(&disc)[0].circularity();
        assert!((c - 1.0).abs() < 0.1, "disc circularity {c}");
        let bar = Mask::from_fn(40, 40, |x, y| x < 40 && (10..13).contains(&y));
        assert!(connected_components(&bar)[0].circularity() < 0.5);
    }
}
