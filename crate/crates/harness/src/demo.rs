//! Closed-loop saccade demo on a static scene.

use std::path::Path;

use pvm_core::saccade::{pose_for_gaze, saccade_step, view_to_gaze};
use pvm_core::simenv::{render, PanoramaScene};
use pvm_core::{Frame, Hierarchy, PoseAngles, SaccadeState};

use crate::checkpoint::load_checkpoint;
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::metrics::{DemoRow, MetricsWriter, DEMO_HEADER};
use crate::train::{derive_seed, load_scene, streams, Session};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSummary {
    pub steps: usize,
    pub triggers: usize,
    /// Saccades whose target moved by more than half a window.
    pub switches: usize,
    pub gaze_trace: Vec<[f64; 2]>,
    pub final_pose: PoseAngles,
}

impl DemoSummary {
    /// Fixation switches per 1000 steps.
    pub fn switch_rate(&self) -> f64 {
        1000.0 * self.switches as f64 / self.steps.max(1) as f64
    }
}

/// Side-by-side dump: camera view, pending prediction, error map.
fn dump(dir: &Path, step: usize, view: &Frame, prediction: &Frame, errors: &[f64]) -> Result<()> {
    let (w, h) = (view.width(), view.height());
    let top = errors.iter().copied().fold(1e-12, f64::max);
    let out = Frame::from_fn(3 * w, h, |x, y| match x / w {
        0 => view.pixel(x, y),
        1 => prediction.pixel(x - w, y),
        _ => {
            let e = (errors[y * w + x - 2 * w] / top).sqrt() as f32;
            [e, e, e]
        }
    });
    out.save_ppm(dir.join(format!("step_{step:06}.ppm")))?;
    Ok(())
}

/// Runs the loop render → compensate → step → saccade → new pose.
pub fn run_demo(cfg: &RunConfig, h: Hierarchy, scene: &PanoramaScene, out_dir: Option<&Path>) -> Result<DemoSummary> {
    let k = cfg.intrinsics();
    let params = &cfg.saccade;
    let mut session = Session {
        h,
        k,
        motion_integration: cfg.motion_integration,
        rate: cfg.learning_rate,
        pose_prev: None,
    };
    session.begin_video();

    let mut log = match out_dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|e| HarnessError::io(d, e))?;
            Some(MetricsWriter::create(d.join("demo.csv"), DEMO_HEADER)?)
        }
        None => None,
    };

    let mut pose = PoseAngles::ZERO;
    let mut state = SaccadeState::new(view_to_gaze(k.cx, k.cy, pose, &k), derive_seed(cfg.seed, streams::SACCADE));
    let (w, hgt) = (k.width, k.height);
    let half = (params.window.0 as f64 / 2.0, params.window.1 as f64 / 2.0);
    let mut summary = DemoSummary {
        steps: cfg.demo_steps,
        triggers: 0,
        switches: 0,
        gaze_trace: Vec::with_capacity(cfg.demo_steps),
        final_pose: pose,
    };

    for step in 0..cfg.demo_steps {
        let view = render(scene, pose, &k);
        let out = session.feed(&view, pose, cfg.demo_learning)?;

        // the first step scores a prediction made from reset state
        let (mut triggered, mut switched) = (false, false);
        if step > 0 {
            let before = state.equilibrium;
            let o = saccade_step(&mut state, &out.errors.pixels, w, hgt, params, |x, y| view_to_gaze(x, y, pose, &k))?;
            triggered = o.triggered;
            if triggered {
                summary.triggers += 1;
                let (dx, dy) = (state.equilibrium[0] - before[0], state.equilibrium[1] - before[1]);
                switched = dx.abs() > half.0 || dy.abs() > half.1;
                if switched {
                    summary.switches += 1;
                }
            }
        }

        if let Some(d) = out_dir {
            if cfg.dump_every > 0 && step % cfg.dump_every == 0 {
                dump(d, step, &view, &out.prediction, &out.errors.pixels)?;
            }
        }
        if let Some(l) = log.as_mut() {
            l.push_demo(&DemoRow {
                step: step as u64,
                mse_image: out.mse_image,
                mse_all: out.mse_all,
                gaze: state.gaze,
                equilibrium: state.equilibrium,
                pan: pose.pan,
                tilt: pose.tilt,
                triggered,
                switch: switched,
            })?;
        }
        summary.gaze_trace.push(state.gaze);
        pose = scene.limits.clamp(pose_for_gaze(state.gaze, &k));
    }
    if let Some(l) = log.as_mut() {
        l.flush()?;
    }
    summary.final_pose = pose;
    Ok(summary)
}

/// CLI entry: loads the checkpoint and scene named in `cfg`.
pub fn demo(cfg: &RunConfig) -> Result<DemoSummary> {
    cfg.validate()?;
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| HarnessError::Config("demo needs a checkpoint".into()))?;
    let ck = load_checkpoint(path, Some(cfg))?;
    let scene = load_scene(cfg)?;
    run_demo(cfg, ck.hierarchy, &scene, Some(&cfg.output_dir))
}
