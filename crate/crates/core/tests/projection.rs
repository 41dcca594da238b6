use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagtour_core::projection::*;
use tagtour_core::raster::{round_rgb, EdgeMode, RasterImage};

fn psnr_band(a: &RasterImage, b: &RasterImage, max_lat: f64) -> f64 {
    let (w, h) = (a.width(), a.height());
    let (mut se, mut n) = (0.0, 0usize);
    for y in 0..h {
        let lat = 90.0 - (y as f64 + 0.5) / h as f64 * 180.0;
        if lat.abs() > max_lat {
            continue;
        }
        for x in 0..w {
            let (p, q) = (a.get(x, y), b.get(x, y));
            for c in 0..3 {
                se += (p[c] as f64 - q[c] as f64).powi(2);
            }
            n += 3;
        }
    }
    10.0 * (255.0f64.powi(2) / (se / n as f64)).log10()
}

fn noise(w: u32, h: u32, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<u8> = (0..(w * h * 3) as usize).map(|_| rng.random()).collect();
    RasterImage::from_raw(w, h, raw).unwrap()
}

fn close(a: Direction, b: Direction, tol: f64) -> bool {
    (a.x - b.x).abs() <= tol && (a.y - b.y).abs() <= tol && (a.z - b.z).abs() <= tol
}

#[test]
fn constant_fields_survive_both_ways() {
    let grey = RasterImage::new(300, 150, [128, 128, 128]).unwrap();
    let faces = equirect_to_cubemap(&grey, 77).unwrap();
    for f in faces.iter() {
        assert_eq!((f.image.width(), f.image.height()), (77, 77));
        assert!(f.image.pixels().iter().all(|&v| v == 128));
    }
    let back = cubemap_to_equirect(&faces, 301, 149).unwrap();
    assert_eq!((back.width(), back.height()), (301, 149));
    assert!(back.pixels().iter().all(|&v| v == 128));
}

#[test]
fn full_size_input_gives_1024_faces() {
    let img = RasterImage::new(4096, 2048, [10, 20, 30]).unwrap();
    let faces = equirect_to_cubemap(&img, 1024).unwrap();
    assert_eq!(faces.face_size(), 1024);
    assert_eq!(faces.iter().count(), 6);
    for f in faces.iter() {
        assert_eq!(f.image.pixels().len(), 1024 * 1024 * 3);
    }
}

#[test]
fn zero_sized_face_is_rejected() {
    let img = RasterImage::new(8, 4, [0, 0, 0]).unwrap();
    assert!(equirect_to_cubemap(&img, 0).is_err());
}

#[test]
fn front_center_column_matches_longitude_zero() {
    // red channel encodes the column
    let (w, h) = (512u32, 256u32);
    let img = RasterImage::from_fn(w, h, |x, _| [(x / 2) as u8, 0, 0]).unwrap();
    let faces = equirect_to_cubemap(&img, 64).unwrap();
    let front = &faces.get(FaceId::Front).image;
    let expect = img.sample_bilinear(w as f64 / 2.0, h as f64 / 2.0, EdgeMode::Wrap)[0];
    for y in 0..64 {
        let v = (front.get(31, y)[0] as f64 + front.get(32, y)[0] as f64) / 2.0;
        assert!((v - expect).abs() <= 1.0, "row {y}: {v} vs {expect}");
    }
}

#[test]
fn band_limited_round_trip_is_sharp() {
    let (w, h) = (2048, 1024);
    let img = noise(w, h, 3).gaussian_blur(2.0, EdgeMode::Wrap);
    let back = cubemap_to_equirect(&equirect_to_cubemap(&img, h / 2).unwrap(), w, h).unwrap();
    let p = psnr_band(&img, &back, 60.0);
    assert!(p >= 38.0, "PSNR {p}");
}

#[test]
fn natural_like_round_trip_clears_30_db() {
    // smooth shading plus blobs with soft edges
    let (w, h) = (1024, 512);
    let img = RasterImage::from_fn(w, h, |x, y| {
        let (u, v) = (x as f64 / w as f64, y as f64 / h as f64);
        let blob = ((u * 7.0 * PI).sin() * (v * 5.0 * PI).cos()).tanh();
        round_rgb([120.0 + 100.0 * blob, 80.0 + 150.0 * v, 200.0 - 120.0 * (2.0 * PI * u).cos().abs()])
    })
    .unwrap();
    let back = cubemap_to_equirect(&equirect_to_cubemap(&img, h / 2).unwrap(), w, h).unwrap();
    assert!(psnr_band(&img, &back, 60.0) >= 30.0);
}

#[test]
fn horizontal_wrap_is_a_yaw_rotation() {
    let (w, h, fs) = (256u32, 128u32, 48u32);
    let img = noise(w, h, 9).gaussian_blur(1.0, EdgeMode::Wrap);
    for k in [1u32, 37, 64, 200] {
        let rolled = RasterImage::from_fn(w, h, |x, y| img.get((x + w - k) % w, y)).unwrap();
        let faces = equirect_to_cubemap(&rolled, fs).unwrap();
        let theta = 2.0 * PI * k as f64 / w as f64;
        let s = fs as f64;
        for f in faces.iter() {
            for j in (0..fs).step_by(5) {
                for i in (0..fs).step_by(5) {
                    let d = face_uv_to_direction(f.id, (i as f64 + 0.5) / s, (j as f64 + 0.5) / s);
                    // point mapping: rotating by theta shifts px by k columns
                    let p0 = direction_to_equirect(d, w, h);
                    let p1 = direction_to_equirect(d.rotate_yaw(theta), w, h);
                    let shift = (p1.px - p0.px).rem_euclid(w as f64);
                    assert!((shift - k as f64).abs() < 1e-9 || (shift - k as f64 - w as f64).abs() < 1e-9);
                    assert!((p1.py - p0.py).abs() < 1e-9);
                    let src = direction_to_equirect(d.rotate_yaw(-theta), w, h);
                    let want = round_rgb(img.sample_bilinear(src.px, src.py, EdgeMode::Wrap));
                    let got = f.image.get(i, j);
                    for c in 0..3 {
                        assert!((want[c] as i32 - got[c] as i32).abs() <= 1, "k {k} {:?} ({i},{j})", f.id);
                    }
                }
            }
        }
    }
}

#[test]
fn face_point_examples() {
    let p = face_point_to_equirect(FaceId::Front, 511.5, 511.5, 1024, 4096, 2048);
    assert!((p.px - 2048.0).abs() < 1e-9 && (p.py - 1024.0).abs() < 1e-9);
    let p = face_point_to_equirect(FaceId::Bottom, 511.5, 511.5, 1024, 4096, 2048);
    assert!((p.py - 2048.0).abs() < 1e-9);
}

#[test]
fn walking_down_front_continues_onto_bottom() {
    let low_front = face_uv_to_direction(FaceId::Front, 0.3, 0.999_999);
    let top_bottom = face_uv_to_direction(FaceId::Bottom, 0.3, 0.000_001);
    assert!(close(low_front, top_bottom, 1e-5));
}

#[test]
fn one_hundred_thousand_directions_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100_000 {
        let lon = rng.random_range(-PI..PI);
        let lat = rng.random_range(-1.0f64..1.0).asin();
        let d = Direction::from_lon_lat(lon, lat);
        let (f, u, v) = direction_to_face_uv(d);
        assert!(close(face_uv_to_direction(f, u, v), d, 1e-9));
        let p = direction_to_equirect(d, 4096, 2048);
        assert!(close(equirect_to_direction(p, 4096, 2048), d, 1e-9));
    }
}

fn any_face() -> impl Strategy<Value = FaceId> {
    prop::sample::select(FaceId::ALL.to_vec())
}

proptest! {
    #[test]
    fn uv_round_trips_inside_each_face(f in any_face(), u in 0.001f64..0.999, v in 0.001f64..0.999) {
        let d = face_uv_to_direction(f, u, v);
        let (g, u2, v2) = direction_to_face_uv(d);
        prop_assert_eq!(f, g);
        prop_assert!((u - u2).abs() < 1e-9 && (v - v2).abs() < 1e-9);
        let (u3, v3) = direction_to_face_plane(f, d).unwrap();
        prop_assert!((u - u3).abs() < 1e-9 && (v - v3).abs() < 1e-9);
    }

    #[test]
    fn face_points_keep_their_direction(f in any_face(), x in 0.0f64..255.0, y in 0.0f64..255.0) {
        let (w, h, fs) = (2000u32, 1000u32, 256u32);
        let d = face_uv_to_direction(f, (x + 0.5) / fs as f64, (y + 0.5) / fs as f64);
        let p = face_point_to_equirect(f, x, y, fs, w, h);
        prop_assert!(p.px >= 0.0 && p.px < w as f64 && p.py >= 0.0 && p.py <= h as f64);
        prop_assert!(close(equirect_to_direction(p, w, h), d, 1e-9));
    }

    #[test]
    fn yaw_rotation_adds_longitude(lon in -3.0f64..3.0, lat in -1.5f64..1.5, a in -3.0f64..3.0) {
        let d = Direction::from_lon_lat(lon, lat);
        let r = d.rotate_yaw(a);
        let diff = (r.lon() - lon - a).rem_euclid(2.0 * PI);
        prop_assert!(diff < 1e-9 || 2.0 * PI - diff < 1e-9);
        prop_assert!((r.lat() - lat).abs() < 1e-9);
    }
}
