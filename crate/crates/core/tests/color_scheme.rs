use std::collections::BTreeSet;

use tagtour_core::color_scheme::*;
use tagtour_core::raster::RasterImage;

#[test]
fn palette_has_each_digit_once() {
    let digits: BTreeSet<u8> = palette().entries().iter().map(|e| e.digit).collect();
    assert_eq!(digits, (0..10).collect());
    for (i, e) in palette().entries().iter().enumerate() {
        assert_eq!(e.digit as usize, i);
        assert!(e.color.is_valid());
        let (a, b) = (e.rgb(), e.reference_rgb());
        for c in 0..3 {
            assert!((a[c] as i32 - b[c] as i32).abs() <= 2, "{}", e.name);
        }
    }
}

#[test]
fn hsv_round_trip_on_the_rgb_cube() {
    for r in (0..=255).step_by(17) {
        for g in (0..=255).step_by(17) {
            for b in (0..=255).step_by(17) {
                let px = [r as u8, g as u8, b as u8];
                assert_eq!(hsv_to_rgb(rgb_to_hsv(px)), px);
            }
        }
    }
}

#[test]
fn tag_geometry() {
    for side in [64, 65, 128, 301] {
        for n in [1, 10, 20] {
            let art = render_tag(n, side).unwrap();
            assert_eq!((art.raster.width(), art.raster.height()), (side, side));
            assert_eq!((art.leading_digit, art.trailing_digit), ((n / 10) as u8, (n % 10) as u8));
            assert_eq!(art.leading_region.h + art.trailing_region.h, side);
            let (cx, cy) = art.circle_center;
            assert!(art.leading_region.contains(cx, cy));
            assert_eq!(art.raster.get(cx as u32, cy as u32), [0, 0, 0]);
        }
    }
    assert!(render_tag(0, 128).is_err());
    assert!(render_tag(21, 128).is_err());
    assert!(render_tag(5, 63).is_err());
}

#[test]
fn halves_carry_their_digit_colors() {
    let art = render_tag(17, 200).unwrap();
    let count = |region: &Rect, rgb: [u8; 3]| {
        let mut n = 0;
        for y in region.y..region.y + region.h {
            for x in region.x..region.x + region.w {
                n += (art.raster.get(x, y) == rgb) as u32;
            }
        }
        n as f64 / (region.w * region.h) as f64
    };
    assert!(count(&art.leading_region, palette().entry(1).rgb()) > 0.6);
    assert!(count(&art.trailing_region, palette().entry(7).rgb()) > 0.6);
    assert_eq!(count(&art.leading_region, palette().entry(7).rgb()), 0.0);
}

#[test]
fn tag_sheet_files() {
    let dir = tempfile::tempdir().unwrap();
    let paths = write_tag_sheet(&[1, 2, 20], 96, dir.path()).unwrap();
    assert_eq!(paths.len(), 3);
    assert!(paths[2].ends_with(tag_file_name(20)));
    let img = RasterImage::load_png(&paths[0]).unwrap();
    assert_eq!(img, render_tag(1, 96).unwrap().raster);
    assert!(write_tag_sheet(&[22], 96, dir.path()).is_err());
}
