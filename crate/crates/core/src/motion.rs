//! Camera-rotation compensation.
//!
//! Camera coordinates: `x` right, `y` down, `z` along the optical axis. A
//! camera at pan `θ` and tilt `φ` sees a world direction `w` at
//! `R_x(φ)·R_y(θ)·w`, so the change of view between two poses is
//!
//! ```text
//! T(θ₂, φ₂; θ₁, φ₁) = R_x(φ₂) · R_y(θ₂ − θ₁) · R_x(φ₁)⁻¹
//! ```
//!
//! With these rotation matrices a positive pan turns the view toward `−x`
//! (scene content slides right) and a positive tilt turns it toward `−y`
//! (content slides down).
//!
//! Warping never interpolates: source positions are rounded to the nearest
//! pixel, and destinations whose source falls outside the frame copy the
//! nearest edge pixel.

use crate::frame::Frame;
use crate::numerics::Matrix;

/// Pan/tilt pair in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PoseAngles {
    pub pan: f64,
    pub tilt: f64,
}

impl PoseAngles {
    pub const ZERO: PoseAngles = PoseAngles { pan: 0.0, tilt: 0.0 };

    pub fn new(pan: f64, tilt: f64) -> Self {
        Self { pan, tilt }
    }

    pub fn from_degrees(pan: f64, tilt: f64) -> Self {
        Self::new(pan.to_radians(), tilt.to_radians())
    }

    pub fn is_valid(&self) -> bool {
        self.pan.is_finite() && self.tilt.is_finite() && self.tilt.abs() < std::f64::consts::FRAC_PI_2
    }

    pub fn offset(&self, d_pan: f64, d_tilt: f64) -> Self {
        Self::new(self.pan + d_pan, self.tilt + d_tilt)
    }
}

/// Mechanical range of the simulated rig.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigLimits {
    pub pan_max: f64,
    pub tilt_max: f64,
}

impl Default for RigLimits {
    fn default() -> Self {
        Self {
            pan_max: 90f64.to_radians(),
            tilt_max: 45f64.to_radians(),
        }
    }
}

impl RigLimits {
    pub fn contains(&self, p: PoseAngles) -> bool {
        p.pan.abs() <= self.pan_max + 1e-12 && p.tilt.abs() <= self.tilt_max + 1e-12
    }

    pub fn clamp(&self, p: PoseAngles) -> PoseAngles {
        PoseAngles::new(
            p.pan.clamp(-self.pan_max, self.pan_max),
            p.tilt.clamp(-self.tilt_max, self.tilt_max),
        )
    }
}

/// Pinhole intrinsics in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub focal_px: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// Focal length from the horizontal field of view,
    /// `f = (W/2) / tan(fov/2)`, principal point at the frame center.
    pub fn from_horizontal_fov(width: usize, height: usize, fov_deg: f64) -> Self {
        assert!(fov_deg > 0.0 && fov_deg < 180.0, "field of view out of range");
        let focal_px = (width as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan();
        Self {
            focal_px,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
        }
    }

    /// Normalized camera ray `((u − cx)/f, (v − cy)/f, 1)`.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> [f64; 3] {
        [(u - self.cx) / self.focal_px, (v - self.cy) / self.focal_px, 1.0]
    }

    /// Projects a camera-frame direction; `None` when it points behind the
    /// image plane.
    #[inline]
    pub fn project(&self, d: [f64; 3]) -> Option<(f64, f64)> {
        if d[2] <= 0.0 {
            return None;
        }
        Some((
            self.focal_px * d[0] / d[2] + self.cx,
            self.focal_px * d[1] / d[2] + self.cy,
        ))
    }
}

pub fn rot_x(a: f64) -> Matrix {
    let (s, c) = a.sin_cos();
    Matrix::from_vec(3, 3, vec![1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c])
}

pub fn rot_y(a: f64) -> Matrix {
    let (s, c) = a.sin_cos();
    Matrix::from_vec(3, 3, vec![c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c])
}

/// View change from pose `p1` to pose `p2`: camera-1 coordinates in,
/// camera-2 coordinates out.
pub fn camera_transform(p1: PoseAngles, p2: PoseAngles) -> Matrix {
    rot_x(p2.tilt)
        .matmul(&rot_y(p2.pan - p1.pan))
        .matmul(&rot_x(-p1.tilt))
}

/// The same rotation as [`camera_transform`], written out entry by entry as a
/// corner cosine, an off-diagonal sine row and column, and a 2×2 block
/// `Q = cos θ·A + B`. In this layout every angle enters with the opposite
/// sense to the product form, hence the negations on the way in.
pub fn camera_transform_block_form(p1: PoseAngles, p2: PoseAngles) -> Matrix {
    let t = -(p2.pan - p1.pan);
    let (s1, c1) = (-p1.tilt).sin_cos();
    let (s2, c2) = (-p2.tilt).sin_cos();
    let (st, ct) = t.sin_cos();
    let q00 = ct * (s2 * s1) + c2 * c1;
    let q01 = ct * (-s2 * c1) + c2 * s1;
    let q10 = ct * (-s1 * c2) + s2 * c1;
    let q11 = ct * (c1 * c2) + s2 * s1;
    Matrix::from_vec(
        3,
        3,
        vec![
            ct,
            s1 * st,
            -c1 * st,
            -s2 * st,
            q00,
            q01,
            c2 * st,
            q10,
            q11,
        ],
    )
}

/// Camera-to-world rotation, `(R_x(φ)·R_y(θ))ᵀ`.
pub fn camera_to_world(pose: PoseAngles) -> Matrix {
    rot_x(pose.tilt).matmul(&rot_y(pose.pan)).transpose()
}

#[inline]
fn apply(m: &Matrix, v: [f64; 3]) -> [f64; 3] {
    let r = m.matvec(&v);
    [r[0], r[1], r[2]]
}

/// World direction seen through pixel `(u, v)` at `pose`.
pub fn pixel_to_world(u: f64, v: f64, pose: PoseAngles, k: &CameraIntrinsics) -> [f64; 3] {
    apply(&camera_to_world(pose), k.ray(u, v))
}

/// Pixel position of a world direction at `pose`, if it lies in front of the
/// camera (the position may still fall outside the frame).
pub fn world_to_pixel(d: [f64; 3], pose: PoseAngles, k: &CameraIntrinsics) -> Option<(f64, f64)> {
    let cam = apply(&rot_x(pose.tilt).matmul(&rot_y(pose.pan)), d);
    k.project(cam)
}

/// The pose whose optical axis points along world direction `d`.
pub fn facing_pose(d: [f64; 3]) -> PoseAngles {
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let tilt = -(d[1] / norm).clamp(-1.0, 1.0).asin();
    let pan = (-d[0]).atan2(d[2]);
    PoseAngles::new(pan, tilt)
}

/// Per-pixel source indices for a warp.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpMap {
    pub width: usize,
    pub height: usize,
    /// Destination pixel `i` copies source pixel `src[i]` (row-major index).
    pub src: Vec<u32>,
    /// `false` where the source fell outside the frame and was edge-extended.
    pub inside: Vec<bool>,
}

impl WarpMap {
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            src: (0..(width * height) as u32).collect(),
            inside: vec![true; width * height],
        }
    }

    /// Gathers any per-pixel buffer with `stride` values per pixel.
    pub fn apply<T: Copy>(&self, values: &[T], stride: usize) -> Vec<T> {
        assert_eq!(values.len(), self.src.len() * stride, "warp buffer size mismatch");
        let mut out = Vec::with_capacity(values.len());
        for &s in &self.src {
            let i = s as usize * stride;
            out.extend_from_slice(&values[i..i + stride]);
        }
        out
    }
}

/// Destination-driven map that re-renders a view taken at `p1` as seen from
/// `p2`. Each destination ray is carried into the `p1` camera, projected,
/// rounded half away from zero, and clamped to the frame.
pub fn warp_map(p1: PoseAngles, p2: PoseAngles, k: &CameraIntrinsics) -> WarpMap {
    let (w, h) = (k.width, k.height);
    if p1 == p2 {
        return WarpMap::identity(w, h);
    }
    let back = camera_transform(p2, p1);
    let mut src = Vec::with_capacity(w * h);
    let mut inside = Vec::with_capacity(w * h);
    let (max_u, max_v) = ((w - 1) as f64, (h - 1) as f64);
    for v in 0..h {
        for u in 0..w {
            let d = apply(&back, k.ray(u as f64, v as f64));
            let (su, sv, ok) = match k.project(d) {
                Some((x, y)) => {
                    let (x, y) = (x.round(), y.round());
                    let ok = (0.0..=max_u).contains(&x) && (0.0..=max_v).contains(&y);
                    (x, y, ok)
                }
                // Behind the source camera: push to the border in the
                // direction the ray leans.
                None => (k.cx + d[0] * 1e9, k.cy + d[1] * 1e9, false),
            };
            let su = su.clamp(0.0, max_u) as usize;
            let sv = sv.clamp(0.0, max_v) as usize;
            src.push((sv * w + su) as u32);
            inside.push(ok);
        }
    }
    WarpMap {
        width: w,
        height: h,
        src,
        inside,
    }
}

/// Warps `frame`, captured at `p1`, into the viewpoint of `p2`.
pub fn warp_frame(frame: &Frame, p1: PoseAngles, p2: PoseAngles, k: &CameraIntrinsics) -> Frame {
    assert_eq!(
        (frame.width(), frame.height()),
        (k.width, k.height),
        "frame does not match intrinsics"
    );
    frame.gather(&warp_map(p1, p2, k).src)
}

/// Carries a prediction made at `pose_prev` into the current viewpoint so it
/// can be compared against the frame captured at `pose_now`.
pub fn compensate_prediction(
    pending_prediction: &Frame,
    pose_prev: PoseAngles,
    pose_now: PoseAngles,
    k: &CameraIntrinsics,
) -> Frame {
    warp_frame(pending_prediction, pose_prev, pose_now, k)
}
