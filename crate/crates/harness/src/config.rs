//! Run configuration: plain `key = value` text, every key also a CLI flag.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use pvm_core::simenv::{SceneKind, TrajectoryConfig};
use pvm_core::{CameraIntrinsics, FoveaSpec, HierarchySpec, SaccadeParams};

use crate::error::{HarnessError, Result};

/// Every recognised key with a one-line description, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("levels", "unit grid per level, e.g. 16x12,8x6,4x3,1x1"),
    ("hidden_size", "hidden neurons per unit"),
    ("tile", "level-0 tile size in pixels, e.g. 2x2"),
    ("fovea_factor", "split factor for fovea units (1 disables the fovea)"),
    ("fovea_region", "level-0 cells split by the fovea: central or x,y,w,h"),
    ("topmost_broadcast", "top unit sends context to every unit (true/false)"),
    ("tau", "integral decay constant"),
    ("learning_rate", "SGD learning rate"),
    ("motion_integration", "warp predictions by the known camera rotation (true/false)"),
    ("saccade_window", "error window size in pixels, e.g. 4x4"),
    ("saccade_stiffness", "gaze spring constant"),
    ("saccade_damping", "gaze damping"),
    ("saccade_noise", "gaze noise amplitude"),
    ("saccade_threshold_decay", "decay of the running threshold average"),
    ("saccade_dt", "gaze integration step"),
    ("saccade_threshold_floor", "minimum window total for a saccade (inf disables)"),
    ("fov_deg", "horizontal field of view in degrees"),
    ("scene", "procedural scene name or path to a P6 panorama"),
    ("scene_width", "width of procedural panoramas"),
    ("train_dir", "directory of training sets"),
    ("test_dir", "directory of test sets"),
    ("train_sets", "sets recorded by gen-data for training"),
    ("test_sets", "sets recorded by gen-data for testing"),
    ("frames_per_set", "frames per recorded set"),
    ("pan_profiles", "number of pan motion profiles"),
    ("tilt_profiles", "number of tilt motion profiles"),
    ("pan_amplitude_deg", "pan range of the trajectories"),
    ("tilt_amplitude_deg", "tilt range of the trajectories"),
    ("min_speed_deg", "slowest trajectory speed, degrees per frame"),
    ("max_speed_deg", "fastest trajectory speed, degrees per frame"),
    ("epochs", "passes over the training sets"),
    ("seed", "master seed (PVM_SEED overrides the file)"),
    ("output_dir", "where metrics, checkpoints and dumps go"),
    ("checkpoint", "checkpoint to resume, evaluate or demo"),
    ("checkpoint_every", "also checkpoint every N training frames (0: epoch ends only)"),
    ("demo_steps", "closed-loop demo length"),
    ("demo_learning", "keep learning during the demo (true/false)"),
    ("dump_every", "write a frame dump every N demo steps (0: never)"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub levels: Vec<(usize, usize)>,
    pub hidden_size: usize,
    pub tile: (usize, usize),
    pub fovea_factor: usize,
    pub fovea_region: Option<(usize, usize, usize, usize)>,
    pub topmost_broadcast: bool,
    pub tau: f64,
    pub learning_rate: f64,
    pub motion_integration: bool,
    pub saccade: SaccadeParams,
    pub fov_deg: f64,
    pub scene: String,
    pub scene_width: usize,
    pub train_dir: PathBuf,
    pub test_dir: PathBuf,
    pub train_sets: usize,
    pub test_sets: usize,
    pub frames_per_set: usize,
    pub pan_profiles: usize,
    pub tilt_profiles: usize,
    pub pan_amplitude_deg: f64,
    pub tilt_amplitude_deg: f64,
    pub min_speed_deg: f64,
    pub max_speed_deg: f64,
    pub epochs: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_every: u64,
    pub demo_steps: usize,
    pub demo_learning: bool,
    pub dump_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let desk = HierarchySpec::desk();
        Self {
            levels: desk.level_dims,
            hidden_size: desk.hidden_size,
            tile: desk.tile,
            fovea_factor: 1,
            fovea_region: None,
            topmost_broadcast: desk.topmost_broadcast,
            tau: 0.9,
            learning_rate: 0.01,
            motion_integration: true,
            // window and noise scaled from a 128 px wide frame to the 32 px desk input
            saccade: SaccadeParams {
                window: (4, 4),
                noise: 0.375,
                ..SaccadeParams::default()
            },
            fov_deg: 75.0,
            scene: "blobs".into(),
            scene_width: 1024,
            train_dir: "data/train".into(),
            test_dir: "data/test".into(),
            train_sets: 10,
            test_sets: 4,
            frames_per_set: 300,
            pan_profiles: 20,
            tilt_profiles: 20,
            pan_amplitude_deg: 60.0,
            tilt_amplitude_deg: 20.0,
            min_speed_deg: 3.0,
            max_speed_deg: 8.0,
            epochs: 3,
            seed: 1,
            output_dir: "runs/default".into(),
            checkpoint: None,
            checkpoint_every: 0,
            demo_steps: 5000,
            demo_learning: false,
            dump_every: 0,
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{key} = {value:?}: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, value, e))
}

fn float(key: &str, value: &str) -> Result<f64> {
    match value {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => num(key, value),
    }
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

fn pair(key: &str, value: &str) -> Result<(usize, usize)> {
    let (a, b) = value.split_once('x').ok_or_else(|| bad(key, value, "expected WxH"))?;
    Ok((num(key, a.trim())?, num(key, b.trim())?))
}

fn fmt_f64(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        format!("{v}")
    }
}

impl RunConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "levels" => {
                self.levels = v.split(',').map(|p| pair(key, p.trim())).collect::<Result<_>>()?;
            }
            "hidden_size" => self.hidden_size = num(key, v)?,
            "tile" => self.tile = pair(key, v)?,
            "fovea_factor" => self.fovea_factor = num(key, v)?,
            "fovea_region" => {
                self.fovea_region = if v == "central" {
                    None
                } else {
                    let parts: Vec<usize> = v.split(',').map(|p| num(key, p.trim())).collect::<Result<_>>()?;
                    match parts[..] {
                        [x, y, w, h] => Some((x, y, w, h)),
                        _ => return Err(bad(key, v, "expected central or x,y,w,h")),
                    }
                }
            }
            "topmost_broadcast" => self.topmost_broadcast = flag(key, v)?,
            "tau" => self.tau = float(key, v)?,
            "learning_rate" => self.learning_rate = float(key, v)?,
            "motion_integration" => self.motion_integration = flag(key, v)?,
            "saccade_window" => self.saccade.window = pair(key, v)?,
            "saccade_stiffness" => self.saccade.stiffness = float(key, v)?,
            "saccade_damping" => self.saccade.damping = float(key, v)?,
            "saccade_noise" => self.saccade.noise = float(key, v)?,
            "saccade_threshold_decay" => self.saccade.threshold_decay = float(key, v)?,
            "saccade_dt" => self.saccade.dt = float(key, v)?,
            "saccade_threshold_floor" => self.saccade.threshold_floor = float(key, v)?,
            "fov_deg" => self.fov_deg = float(key, v)?,
            "scene" => self.scene = v.to_string(),
            "scene_width" => self.scene_width = num(key, v)?,
            "train_dir" => self.train_dir = v.into(),
            "test_dir" => self.test_dir = v.into(),
            "train_sets" => self.train_sets = num(key, v)?,
            "test_sets" => self.test_sets = num(key, v)?,
            "frames_per_set" => self.frames_per_set = num(key, v)?,
            "pan_profiles" => self.pan_profiles = num(key, v)?,
            "tilt_profiles" => self.tilt_profiles = num(key, v)?,
            "pan_amplitude_deg" => self.pan_amplitude_deg = float(key, v)?,
            "tilt_amplitude_deg" => self.tilt_amplitude_deg = float(key, v)?,
            "min_speed_deg" => self.min_speed_deg = float(key, v)?,
            "max_speed_deg" => self.max_speed_deg = float(key, v)?,
            "epochs" => self.epochs = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "output_dir" => self.output_dir = v.into(),
            "checkpoint" => self.checkpoint = if v.is_empty() { None } else { Some(v.into()) },
            "checkpoint_every" => self.checkpoint_every = num(key, v)?,
            "demo_steps" => self.demo_steps = num(key, v)?,
            "demo_learning" => self.demo_learning = flag(key, v)?,
            "dump_every" => self.dump_every = num(key, v)?,
            _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Text form of one key, as accepted by [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        let p = |(a, b): (usize, usize)| format!("{a}x{b}");
        Some(match key {
            "levels" => self.levels.iter().map(|&d| p(d)).collect::<Vec<_>>().join(","),
            "hidden_size" => self.hidden_size.to_string(),
            "tile" => p(self.tile),
            "fovea_factor" => self.fovea_factor.to_string(),
            "fovea_region" => match self.fovea_region {
                None => "central".into(),
                Some((x, y, w, h)) => format!("{x},{y},{w},{h}"),
            },
            "topmost_broadcast" => self.topmost_broadcast.to_string(),
            "tau" => fmt_f64(self.tau),
            "learning_rate" => fmt_f64(self.learning_rate),
            "motion_integration" => self.motion_integration.to_string(),
            "saccade_window" => p(self.saccade.window),
            "saccade_stiffness" => fmt_f64(self.saccade.stiffness),
            "saccade_damping" => fmt_f64(self.saccade.damping),
            "saccade_noise" => fmt_f64(self.saccade.noise),
            "saccade_threshold_decay" => fmt_f64(self.saccade.threshold_decay),
            "saccade_dt" => fmt_f64(self.saccade.dt),
            "saccade_threshold_floor" => fmt_f64(self.saccade.threshold_floor),
            "fov_deg" => fmt_f64(self.fov_deg),
            "scene" => self.scene.clone(),
            "scene_width" => self.scene_width.to_string(),
            "train_dir" => self.train_dir.display().to_string(),
            "test_dir" => self.test_dir.display().to_string(),
            "train_sets" => self.train_sets.to_string(),
            "test_sets" => self.test_sets.to_string(),
            "frames_per_set" => self.frames_per_set.to_string(),
            "pan_profiles" => self.pan_profiles.to_string(),
            "tilt_profiles" => self.tilt_profiles.to_string(),
            "pan_amplitude_deg" => fmt_f64(self.pan_amplitude_deg),
            "tilt_amplitude_deg" => fmt_f64(self.tilt_amplitude_deg),
            "min_speed_deg" => fmt_f64(self.min_speed_deg),
            "max_speed_deg" => fmt_f64(self.max_speed_deg),
            "epochs" => self.epochs.to_string(),
            "seed" => self.seed.to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "checkpoint" => self.checkpoint.as_ref().map(|c| c.display().to_string()).unwrap_or_default(),
            "checkpoint_every" => self.checkpoint_every.to_string(),
            "demo_steps" => self.demo_steps.to_string(),
            "demo_learning" => self.demo_learning.to_string(),
            "dump_every" => self.dump_every.to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| HarnessError::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Canonical text form; feeding it back to [`RunConfig::apply_text`]
    /// reproduces `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, _) in KEYS {
            let _ = writeln!(s, "{k} = {}", self.get(k).unwrap());
        }
        s
    }

    pub fn hierarchy_spec(&self) -> HierarchySpec {
        let fovea = (self.fovea_factor > 1).then(|| {
            let (cols, rows) = self.levels.first().copied().unwrap_or((0, 0));
            match self.fovea_region {
                Some(region) => FoveaSpec {
                    region,
                    factor: self.fovea_factor,
                },
                None => FoveaSpec::central_quarter(cols, rows, self.fovea_factor),
            }
        });
        HierarchySpec {
            level_dims: self.levels.clone(),
            hidden_size: self.hidden_size,
            tile: self.tile,
            fovea,
            topmost_broadcast: self.topmost_broadcast,
        }
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        let (w, h) = self.hierarchy_spec().frame_size();
        CameraIntrinsics::from_horizontal_fov(w, h, self.fov_deg)
    }

    pub fn trajectory_config(&self) -> TrajectoryConfig {
        TrajectoryConfig {
            pan_amplitude: self.pan_amplitude_deg.to_radians(),
            tilt_amplitude: self.tilt_amplitude_deg.to_radians(),
            min_speed: self.min_speed_deg.to_radians(),
            max_speed: self.max_speed_deg.to_radians(),
        }
    }

    /// Checks everything that can be checked without touching the disk.
    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: String| Err(HarnessError::Config(m));
        pvm_core::Topology::build(&self.hierarchy_spec()).map_err(|e| HarnessError::Config(e.to_string()))?;
        if !(0.0..1.0).contains(&self.tau) {
            return cfg_err(format!("tau must lie in [0, 1), got {}", self.tau));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return cfg_err(format!("learning_rate must be finite and non-negative, got {}", self.learning_rate));
        }
        self.saccade.validate().map_err(HarnessError::Config)?;
        let (w, h) = self.hierarchy_spec().frame_size();
        if self.saccade.window.0 > w || self.saccade.window.1 > h {
            return cfg_err(format!("saccade_window {:?} larger than the {w}x{h} input", self.saccade.window));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return cfg_err(format!("fov_deg must lie in (0, 180), got {}", self.fov_deg));
        }
        if self.scene.parse::<SceneKind>().is_err() && !self.scene.ends_with(".ppm") {
            return cfg_err(format!("scene {:?} is neither a known scene nor a .ppm file", self.scene));
        }
        if self.scene_width < 16 || !self.scene_width.is_multiple_of(2) {
            return cfg_err("scene_width must be even and at least 16".into());
        }
        if self.frames_per_set == 0 || self.pan_profiles == 0 || self.tilt_profiles == 0 {
            return cfg_err("frames_per_set and profile counts must be at least 1".into());
        }
        if !(self.min_speed_deg >= 0.0 && self.max_speed_deg >= self.min_speed_deg) {
            return cfg_err("need 0 <= min_speed_deg <= max_speed_deg".into());
        }
        if !(0.0..=90.0).contains(&self.pan_amplitude_deg) || !(0.0..=45.0).contains(&self.tilt_amplitude_deg) {
            return cfg_err("trajectory amplitudes exceed the rig limits (pan 90, tilt 45)".into());
        }
        Ok(())
    }
}
