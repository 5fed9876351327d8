//! Equirectangular panoramas and the pinhole renderer.
//!
//! Column `c` of a `W`-wide panorama covers longitude
//! `[-π + 2πc/W, -π + 2π(c+1)/W)`; row `r` of an `H`-high panorama covers
//! latitude `[-π/2 + πr/H, ...)`, latitude growing downward like image `y`.
//! A camera at pan `θ` looks along longitude `−θ`.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::frame::Frame;
use crate::motion::{camera_to_world, CameraIntrinsics, PoseAngles, RigLimits};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Checkerboard,
    Gradient,
    Blobs,
    Stripes,
    TwoObjects,
}

impl FromStr for SceneKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "checkerboard" => Ok(Self::Checkerboard),
            "gradient" => Ok(Self::Gradient),
            "blobs" => Ok(Self::Blobs),
            "stripes" => Ok(Self::Stripes),
            "two-objects" => Ok(Self::TwoObjects),
            other => Err(format!(
                "unknown scene {other:?} (checkerboard, gradient, blobs, stripes, two-objects)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanoramaScene {
    image: Frame,
    pub limits: RigLimits,
}

impl PanoramaScene {
    pub fn from_frame(image: Frame) -> Self {
        Self {
            image,
            limits: RigLimits::default(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::from_frame(Frame::load_ppm(path)?))
    }

    /// Procedural panorama, `width × width/2` pixels.
    pub fn generate(kind: SceneKind, width: usize, seed: u64) -> Self {
        let height = width / 2;
        let image = match kind {
            SceneKind::Checkerboard => checkerboard(width, height, 10.0),
            SceneKind::Gradient => Frame::from_fn(width, height, |x, y| {
                let u = x as f32 / width as f32;
                let v = y as f32 / height as f32;
                [u, v, 1.0 - 0.5 * (u + v)]
            }),
            SceneKind::Blobs => blobs(width, height, seed),
            SceneKind::Stripes => Frame::from_fn(width, height, |x, _| {
                [(x % 256) as f32 / 255.0, (x / 256) as f32 / 255.0, 0.5]
            }),
            SceneKind::TwoObjects => two_objects(width, height),
        };
        Self::from_frame(image)
    }

    pub fn image(&self) -> &Frame {
        &self.image
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    /// Angular width of one panorama column.
    pub fn column_pitch(&self) -> f64 {
        TAU / self.width() as f64
    }

    /// Nearest-neighbour lookup of a world direction.
    #[inline]
    pub fn sample(&self, d: [f64; 3]) -> [f32; 3] {
        let lon = d[0].atan2(d[2]);
        let lat = d[1].atan2((d[0] * d[0] + d[2] * d[2]).sqrt());
        let (w, h) = (self.width(), self.height());
        let col = (((lon + PI) / TAU * w as f64).floor() as i64).rem_euclid(w as i64) as usize;
        let row = (((lat + PI / 2.0) / PI * h as f64).floor() as i64).clamp(0, h as i64 - 1) as usize;
        self.image.pixel(col, row)
    }
}

/// Pinhole view of `scene` at `pose`. Poses outside the rig limits are
/// clamped (and logged).
pub fn render(scene: &PanoramaScene, pose: PoseAngles, k: &CameraIntrinsics) -> Frame {
    let clamped = scene.limits.clamp(pose);
    if clamped != pose {
        log::warn!("render: pose {pose:?} outside rig limits, clamped to {clamped:?}");
    }
    let to_world = camera_to_world(clamped);
    Frame::from_fn(k.width, k.height, |u, v| {
        let d = to_world.matvec(&k.ray(u as f64, v as f64));
        scene.sample([d[0], d[1], d[2]])
    })
}

fn checkerboard(w: usize, h: usize, square_deg: f64) -> Frame {
    let per_col = 360.0 / w as f64;
    let per_row = 180.0 / h as f64;
    Frame::from_fn(w, h, |x, y| {
        let a = (x as f64 * per_col / square_deg).floor() as i64;
        let b = (y as f64 * per_row / square_deg).floor() as i64;
        if (a + b).rem_euclid(2) == 0 {
            [0.9, 0.9, 0.9]
        } else {
            [0.1, 0.1, 0.1]
        }
    })
}

/// Smooth colour ramp with a few dozen soft Gaussian blobs on top.
fn blobs(w: usize, h: usize, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img: Vec<[f32; 3]> = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as f32 / w as f32, (i / w) as f32 / h as f32);
            let s = (x * std::f32::consts::TAU).sin();
            [0.35 + 0.15 * s, 0.3 + 0.2 * y, 0.45 - 0.15 * s]
        })
        .collect();
    let count = 60;
    for _ in 0..count {
        let cx = rng.random_range(0.0..w as f64);
        let cy = rng.random_range(h as f64 * 0.15..h as f64 * 0.85);
        let sigma = rng.random_range(0.008..0.03) * w as f64;
        let color = [rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()];
        let weight = rng.random_range(0.5f32..1.0);
        let reach = (3.0 * sigma).ceil() as i64;
        for dy in -reach..=reach {
            let y = cy as i64 + dy;
            if y < 0 || y >= h as i64 {
                continue;
            }
            for dx in -reach..=reach {
                let x = (cx as i64 + dx).rem_euclid(w as i64);
                let (fx, fy) = (dx as f64 + cx.floor() - cx, dy as f64 + cy.floor() - cy);
                let a = weight * (-(fx * fx + fy * fy) / (2.0 * sigma * sigma)).exp() as f32;
                let px = &mut img[y as usize * w + x as usize];
                for c in 0..3 {
                    px[c] = px[c] * (1.0 - a) + color[c] * a;
                }
            }
        }
    }
    Frame::from_fn(w, h, |x, y| img[y * w + x])
}

/// Plain dark room with two bright, textured objects at ±12° longitude.
fn two_objects(w: usize, h: usize) -> Frame {
    let deg_x = 360.0 / w as f64;
    let deg_y = 180.0 / h as f64;
    Frame::from_fn(w, h, |x, y| {
        let lon = (x as f64 + 0.5) * deg_x - 180.0;
        let lat = (y as f64 + 0.5) * deg_y - 90.0;
        for (centre, tint) in [(-12.0, [1.0, 0.85, 0.2]), (12.0, [0.2, 0.9, 1.0])] {
            let (dx, dy) = (lon - centre, lat);
            if dx.abs() < 5.0 && dy.abs() < 5.0 {
                let stripe = ((dx + 5.0) / 2.5).floor() as i64 % 2 == 0;
                let k = if stripe { 1.0 } else { 0.55 };
                return [tint[0] * k, tint[1] * k, tint[2] * k];
            }
        }
        [0.12, 0.12, 0.14]
    })
}
