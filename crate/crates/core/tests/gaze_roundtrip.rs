//! A pose change, rendered, then read back from the image with gaze_to_pose.

use pvm_core::saccade::gaze_to_pose;
use pvm_core::simenv::{render, PanoramaScene};
use pvm_core::{CameraIntrinsics, Frame, PoseAngles};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PANO_W: usize = 3072;
const PANO_H: usize = 1536;

/// Every texel stores its own column and row.
fn coordinate_scene() -> PanoramaScene {
    PanoramaScene::from_frame(Frame::from_fn(PANO_W, PANO_H, |x, y| {
        [x as f32 / PANO_W as f32, y as f32 / PANO_H as f32, 0.0]
    }))
}

fn texel(view: &Frame, x: usize, y: usize) -> (i64, i64) {
    let p = view.pixel(x, y);
    ((p[0] as f64 * PANO_W as f64).round() as i64, (p[1] as f64 * PANO_H as f64).round() as i64)
}

/// Mean image position of the pixels showing texel `t` (or the nearest
/// texels when none shows it exactly).
fn locate(view: &Frame, t: (i64, i64)) -> (f64, f64) {
    let mut best = i64::MAX;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for y in 0..view.height() {
        for x in 0..view.width() {
            let (c, r) = texel(view, x, y);
            let d = (c - t.0).pow(2) + (r - t.1).pow(2);
            if d < best {
                best = d;
                (sx, sy, n) = (0.0, 0.0, 0.0);
            }
            if d == best {
                sx += x as f64;
                sy += y as f64;
                n += 1.0;
            }
        }
    }
    (sx / n, sy / n)
}

#[test]
fn rendered_shift_recovers_pose_delta() {
    let scene = coordinate_scene();
    let k = CameraIntrinsics::from_horizontal_fov(641, 481, 75.0);
    let (cx, cy) = (k.cx as usize, k.cy as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let tol = 0.5f64.to_radians();
    for _ in 0..12 {
        let d_pan = rng.random_range(-10.0..=10.0f64).to_radians();
        let d_tilt = rng.random_range(-10.0..=10.0f64).to_radians();
        let start = PoseAngles::ZERO;
        let here = render(&scene, start, &k);
        let there = render(&scene, start.offset(d_pan, d_tilt), &k);
        let (x, y) = locate(&here, texel(&there, cx, cy));
        let got = gaze_to_pose((x, y), &k);
        assert!(
            (got.pan - d_pan).abs() < tol && (got.tilt - d_tilt).abs() < tol,
            "delta ({:.3}°, {:.3}°) read back as ({:.3}°, {:.3}°)",
            d_pan.to_degrees(),
            d_tilt.to_degrees(),
            got.pan.to_degrees(),
            got.tilt.to_degrees()
        );
    }
}
