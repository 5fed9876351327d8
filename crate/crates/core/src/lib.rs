//! Predictive vision engine.
//!
//! A hierarchy of small recurrent perceptron units learns, frame by frame, to
//! predict its own video input. Around that network sit the pieces needed to
//! run it closed-loop on a pan-tilt camera:
//!
//! - [`numerics`]: dense matrices and the three-layer sigmoid perceptron with
//!   analytic gradients.
//! - [`unit`]: a single predictive unit (signal, derivative, integral, error and
//!   context inputs; hidden state; next-signal prediction; local training).
//! - [`hierarchy`]: the pyramid of unit grids, fovea splitting and the
//!   per-frame update.
//! - [`motion`]: camera-rotation transforms and rounding-based frame warping.
//! - [`saccade`]: the error-driven gaze controller.
//! - [`simenv`]: simulated pan-tilt rig (panorama rendering, trajectories and
//!   the dataset file format).

pub mod error;
pub mod frame;
pub mod hierarchy;
pub mod motion;
pub mod numerics;
pub mod saccade;
pub mod simenv;
pub mod unit;

pub use error::{PvmError, Result};
pub use frame::Frame;
pub use hierarchy::{ErrorMap, FoveaSpec, Hierarchy, HierarchySpec, StepOutput, Topology};
pub use motion::{CameraIntrinsics, PoseAngles, RigLimits};
pub use numerics::{Matrix, Mlp, MlpGradients};
pub use saccade::{SaccadeParams, SaccadeState};
pub use unit::UnitState;
