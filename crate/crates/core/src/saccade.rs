//! Error-driven gaze control.
//!
//! Every step the controller finds the fixed-size window with the largest
//! total prediction error on the level-0 error map. A running average of that
//! maximum serves as threshold: when the current maximum exceeds it, the
//! window center becomes the new equilibrium of a damped spring with
//! Gaussian white-noise forcing that drives the gaze.
//!
//! Gaze lives in panorama pixel coordinates: the angles of the pose that would
//! center a direction, scaled by the focal length and offset by the principal
//! point. At pose zero these coincide with image pixel coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PvmError, Result};
use crate::motion::{facing_pose, pixel_to_world, world_to_pixel, CameraIntrinsics, PoseAngles};

#[derive(Debug, Clone, PartialEq)]
pub struct SaccadeParams {
    /// Window `(w, h)` in pixels.
    pub window: (usize, usize),
    pub stiffness: f64,
    pub damping: f64,
    /// Noise amplitude in pixels per √time.
    pub noise: f64,
    /// Decay of the exponential threshold average.
    pub threshold_decay: f64,
    pub dt: f64,
    /// Lower bound on the trigger threshold. `f64::INFINITY` disables the
    /// controller: the gaze holds still.
    pub threshold_floor: f64,
}

impl Default for SaccadeParams {
    fn default() -> Self {
        Self {
            window: (16, 16),
            stiffness: 4.0,
            damping: 4.5,
            noise: 1.5,
            threshold_decay: 0.99,
            dt: 0.1,
            threshold_floor: 0.0,
        }
    }
}

impl SaccadeParams {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let nonneg = [
            ("stiffness", self.stiffness),
            ("damping", self.damping),
            ("noise", self.noise),
            ("threshold_decay", self.threshold_decay),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.threshold_decay > 1.0 {
            return Err("threshold_decay must be <= 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if self.window.0 == 0 || self.window.1 == 0 {
            return Err("window must be non-empty".into());
        }
        Ok(())
    }

    pub fn enabled(&self) -> bool {
        self.threshold_floor.is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct SaccadeState {
    pub gaze: [f64; 2],
    pub velocity: [f64; 2],
    pub equilibrium: [f64; 2],
    pub threshold_avg: f64,
    pub rng: ChaCha8Rng,
}

impl SaccadeState {
    pub fn new(gaze: [f64; 2], seed: u64) -> Self {
        Self {
            gaze,
            velocity: [0.0; 2],
            equilibrium: gaze,
            threshold_avg: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Oscillator energy `½|v|² + ½k|gaze − eq|²`.
    pub fn energy(&self, stiffness: f64) -> f64 {
        let dx = self.gaze[0] - self.equilibrium[0];
        let dy = self.gaze[1] - self.equilibrium[1];
        0.5 * (self.velocity[0].powi(2) + self.velocity[1].powi(2)) + 0.5 * stiffness * (dx * dx + dy * dy)
    }
}

/// What happened during one controller step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaccadeOutcome {
    /// Top-left corner of the max-error window.
    pub window_pos: (usize, usize),
    pub window_total: f64,
    /// The window beat the threshold and became the equilibrium.
    pub triggered: bool,
}

const FIXED_SCALE: f64 = 4294967296.0; // 2^32

/// Exact integer summed-area table over a non-negative map quantized to
/// 2⁻³² steps, so equal windows compare equal regardless of summation order.
struct SummedArea {
    w: usize,
    sums: Vec<u128>,
}

impl SummedArea {
    fn new(values: &[f64], w: usize, h: usize) -> Self {
        // one row and column of zeros in front
        let stride = w + 1;
        let mut sums = vec![0u128; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u128;
            for x in 0..w {
                row += (values[y * w + x].max(0.0) * FIXED_SCALE).round() as u128;
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { w, sums }
    }

    fn window(&self, x: usize, y: usize, ww: usize, wh: usize) -> u128 {
        let s = self.w + 1;
        self.sums[(y + wh) * s + x + ww] + self.sums[y * s + x] - self.sums[y * s + x + ww] - self.sums[(y + wh) * s + x]
    }
}

/// Position and total of the window with the largest summed error. Ties go
/// to the smallest row, then the smallest column.
pub fn max_error_window(
    errors: &[f64],
    width: usize,
    height: usize,
    window: (usize, usize),
) -> Result<((usize, usize), f64)> {
    assert_eq!(errors.len(), width * height, "error map size mismatch");
    let (ww, wh) = window;
    if ww == 0 || wh == 0 || ww > width || wh > height {
        return Err(PvmError::WindowTooLarge {
            win_w: ww,
            win_h: wh,
            grid_w: width,
            grid_h: height,
        });
    }
    let sat = SummedArea::new(errors, width, height);
    let mut best = (0, 0);
    let mut best_sum = sat.window(0, 0, ww, wh);
    for y in 0..=height - wh {
        for x in 0..=width - ww {
            let s = sat.window(x, y, ww, wh);
            if s > best_sum {
                best_sum = s;
                best = (x, y);
            }
        }
    }
    let total = (best.1..best.1 + wh)
        .map(|y| errors[y * width + best.0..y * width + best.0 + ww].iter().sum::<f64>())
        .sum();
    Ok((best, total))
}

/// One controller update.
///
/// `to_gaze` maps a pixel position on the error map to gaze coordinates
/// (identity when gaze and image coordinates coincide).
pub fn saccade_step(
    state: &mut SaccadeState,
    errors: &[f64],
    width: usize,
    height: usize,
    params: &SaccadeParams,
    to_gaze: impl Fn(f64, f64) -> [f64; 2],
) -> Result<SaccadeOutcome> {
    let (pos, total) = max_error_window(errors, width, height, params.window)?;
    let lambda = params.threshold_decay;
    state.threshold_avg = lambda * state.threshold_avg + (1.0 - lambda) * total;

    if !params.enabled() {
        return Ok(SaccadeOutcome {
            window_pos: pos,
            window_total: total,
            triggered: false,
        });
    }

    let triggered = total > state.threshold_avg.max(params.threshold_floor);
    if triggered {
        let cx = pos.0 as f64 + (params.window.0 as f64 - 1.0) / 2.0;
        let cy = pos.1 as f64 + (params.window.1 as f64 - 1.0) / 2.0;
        state.equilibrium = to_gaze(cx, cy);
    }
    integrate(state, params);
    Ok(SaccadeOutcome {
        window_pos: pos,
        window_total: total,
        triggered,
    })
}

/// Semi-implicit Euler step of the forced, damped spring.
pub fn integrate(state: &mut SaccadeState, params: &SaccadeParams) {
    let dt = params.dt;
    let kick = params.noise * dt.sqrt();
    for axis in 0..2 {
        let eta: f64 = if params.noise > 0.0 {
            StandardNormal.sample(&mut state.rng)
        } else {
            0.0
        };
        let offset = state.gaze[axis] - state.equilibrium[axis];
        state.velocity[axis] +=
            dt * (-params.stiffness * offset - params.damping * state.velocity[axis]) + kick * eta;
        state.gaze[axis] += dt * state.velocity[axis];
    }
}

/// Pose change that brings an image position to the optical axis:
/// `Δθ = −atan((x − cx)/f)`, `Δφ = −atan((y − cy)/f)`. The minus signs follow
/// the rotation convention in [`crate::motion`], where positive pan and tilt
/// look toward negative image `x` and `y`.
pub fn gaze_to_pose(gaze: (f64, f64), k: &CameraIntrinsics) -> PoseAngles {
    PoseAngles::new(
        -((gaze.0 - k.cx) / k.focal_px).atan(),
        -((gaze.1 - k.cy) / k.focal_px).atan(),
    )
}

/// Panorama gaze coordinates of image position `(u, v)` seen at `pose`.
pub fn view_to_gaze(u: f64, v: f64, pose: PoseAngles, k: &CameraIntrinsics) -> [f64; 2] {
    let p = facing_pose(pixel_to_world(u, v, pose, k));
    [k.cx - k.focal_px * p.pan, k.cy - k.focal_px * p.tilt]
}

/// Pose whose optical axis points at panorama gaze coordinates `gaze`.
/// Inverse of [`view_to_gaze`] at the image centre.
pub fn pose_for_gaze(gaze: [f64; 2], k: &CameraIntrinsics) -> PoseAngles {
    PoseAngles::new((k.cx - gaze[0]) / k.focal_px, (k.cy - gaze[1]) / k.focal_px)
}

/// Image position of panorama gaze coordinates at `pose`; `None` when the
/// direction lies behind the camera.
pub fn gaze_to_view(gaze: [f64; 2], pose: PoseAngles, k: &CameraIntrinsics) -> Option<(f64, f64)> {
    let d = pixel_to_world(k.cx, k.cy, pose_for_gaze(gaze, k), k);
    world_to_pixel(d, pose, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute_force(errors: &[f64], w: usize, h: usize, win: (usize, usize)) -> ((usize, usize), f64) {
        let mut best = ((0, 0), f64::NEG_INFINITY);
        for y in 0..=h - win.1 {
            for x in 0..=w - win.0 {
                let mut s = 0.0;
                for yy in y..y + win.1 {
                    for xx in x..x + win.0 {
                        s += errors[yy * w + xx];
                    }
                }
                if s > best.1 {
                    best = ((x, y), s);
                }
            }
        }
        best
    }

    #[test]
    fn uniform_map_picks_origin() {
        let errors = vec![0.1; 40 * 30];
        let (pos, total) = max_error_window(&errors, 40, 30, (8, 8)).unwrap();
        assert_eq!(pos, (0, 0));
        assert!((total - 6.4).abs() < 1e-12);
    }

    #[test]
    fn single_hot_pixel() {
        let (w, h) = (64, 48);
        let mut errors = vec![0.0; w * h];
        errors[20 * w + 30] = 1.0;
        let (pos, total) = max_error_window(&errors, w, h, (8, 8)).unwrap();
        assert_eq!(pos, (23, 13));
        assert_eq!(total, 1.0);
        assert_eq!(brute_force(&errors, w, h, (8, 8)).0, pos);

        // near a corner the top-left-most candidate is clamped to the map
        let mut errors = vec![0.0; w * h];
        errors[2 * w + 3] = 1.0;
        assert_eq!(max_error_window(&errors, w, h, (8, 8)).unwrap().0, (0, 0));
    }

    #[test]
    fn matches_brute_force_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let (w, h) = (rng.random_range(4..40), rng.random_range(4..30));
            let win = (rng.random_range(1..=w), rng.random_range(1..=h));
            let errors: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
            let (pos, total) = max_error_window(&errors, w, h, win).unwrap();
            let (bpos, btotal) = brute_force(&errors, w, h, win);
            assert_eq!(pos, bpos);
            assert!((total - btotal).abs() < 1e-9);
        }
    }

    #[test]
    fn window_too_large() {
        assert!(matches!(
            max_error_window(&[0.0; 12], 4, 3, (5, 1)),
            Err(PvmError::WindowTooLarge { .. })
        ));
    }

    fn quiet() -> SaccadeParams {
        SaccadeParams {
            window: (4, 4),
            noise: 0.0,
            ..SaccadeParams::default()
        }
    }

    #[test]
    fn rest_point_is_stationary() {
        let mut s = SaccadeState::new([5.0, 5.0], 1);
        s.threshold_avg = 10.0;
        let errors = vec![0.01; 16 * 16];
        let before = (s.gaze, s.velocity, s.equilibrium);
        saccade_step(&mut s, &errors, 16, 16, &quiet(), |x, y| [x, y]).unwrap();
        assert_eq!((s.gaze, s.velocity, s.equilibrium), before);
    }

    #[test]
    fn threshold_tracks_constant_maximum() {
        let mut s = SaccadeState::new([0.0, 0.0], 1);
        let errors = vec![0.5; 8 * 8];
        let m = 0.5 * 16.0;
        let mut gap = m;
        for _ in 0..200 {
            saccade_step(&mut s, &errors, 8, 8, &quiet(), |x, y| [x, y]).unwrap();
            let next = (m - s.threshold_avg).abs();
            assert!((next - 0.99 * gap).abs() < 1e-9);
            gap = next;
        }
    }

    #[test]
    fn threshold_sensitivity() {
        let eps = 0.1;
        let m = 4.0;
        for (bump, expect) in [(eps, true), (-eps, false)] {
            let mut s = SaccadeState::new([0.0, 0.0], 1);
            s.threshold_avg = m;
            let mut errors = vec![0.0; 8 * 8];
            errors[0] = m + bump;
            let out = saccade_step(&mut s, &errors, 8, 8, &quiet(), |x, y| [x, y]).unwrap();
            assert_eq!(out.triggered, expect);
        }
    }

    #[test]
    fn infinite_floor_disables_motion() {
        let mut s = SaccadeState::new([3.0, 4.0], 1);
        let params = SaccadeParams {
            threshold_floor: f64::INFINITY,
            ..SaccadeParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let errors: Vec<f64> = (0..32 * 24).map(|_| rng.random::<f64>()).collect();
            let out = saccade_step(&mut s, &errors, 32, 24, &params, |x, y| [x, y]).unwrap();
            assert!(!out.triggered);
        }
        assert_eq!(s.gaze, [3.0, 4.0]);
    }

    #[test]
    fn energy_never_increases_without_noise() {
        let params = quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut s = SaccadeState::new([rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)], 0);
            s.velocity = [rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)];
            s.equilibrium = [0.0, 0.0];
            let mut e = s.energy(params.stiffness);
            for _ in 0..500 {
                integrate(&mut s, &params);
                let next = s.energy(params.stiffness);
                assert!(next <= e + 1e-12);
                e = next;
            }
        }
    }

    #[test]
    fn gaze_to_pose_reference_points() {
        let k = CameraIntrinsics::from_horizontal_fov(128, 96, 75.0);
        assert_eq!(gaze_to_pose((k.cx, k.cy), &k), PoseAngles::new(-0.0, -0.0));
        let d = gaze_to_pose((k.cx + k.focal_px, k.cy), &k);
        assert!((d.pan.abs() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn gaze_coordinates_round_trip() {
        let k = CameraIntrinsics::from_horizontal_fov(32, 24, 75.0);
        let pose = PoseAngles::from_degrees(15.0, -8.0);
        let g = view_to_gaze(5.0, 20.0, pose, &k);
        let (u, v) = gaze_to_view(g, pose, &k).unwrap();
        assert!((u - 5.0).abs() < 1e-9 && (v - 20.0).abs() < 1e-9);
        // at pose zero gaze and image coordinates agree on the axes
        let g0 = view_to_gaze(k.cx, k.cy, PoseAngles::ZERO, &k);
        assert!((g0[0] - k.cx).abs() < 1e-12 && (g0[1] - k.cy).abs() < 1e-12);
    }

    #[test]
    fn pose_for_gaze_points_the_axis_at_the_gaze() {
        let k = CameraIntrinsics::from_horizontal_fov(32, 24, 75.0);
        let pose = PoseAngles::from_degrees(-20.0, 12.0);
        let g = view_to_gaze(k.cx, k.cy, pose, &k);
        let back = pose_for_gaze(g, &k);
        assert!((back.pan - pose.pan).abs() < 1e-12 && (back.tilt - pose.tilt).abs() < 1e-12);
    }
}
