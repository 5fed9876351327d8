//! Simulated pan/tilt rig: panoramic scenes, motion profiles and recorded
//! frame sets.

mod dataset;
mod scene;
mod trajectory;

pub use dataset::{list_sets, read_dataset, record_dataset, DatasetReader, DatasetRecord, DatasetWriter};
pub use scene::{render, PanoramaScene, SceneKind};
pub use trajectory::{make_trajectories, AxisProfile, Family, Trajectory, TrajectoryConfig};
