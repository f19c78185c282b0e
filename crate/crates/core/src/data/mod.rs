//! File formats, windowing, synthetic scenes, and pose-based sample selection.

mod io;
mod poses;
mod synthetic;
mod windows;

pub use io::{
    load_cloud, load_cloud_auto, load_labels, load_poses, save_cloud, save_labels, save_poses,
    CloudFormat, BINARY_MAGIC,
};
pub use poses::{
    motion_magnitude, select_hard_samples, window_candidates, HardSampleCandidate,
    MotionMagnitude, RigidPose, SelectionThresholds, TranslationMetric,
};
pub use synthetic::{
    cube_surface, generate_scene, integer_times, preset, sphere_surface, BodySpec, Scene,
    SceneSpec, Shape, Trajectory, PRESETS,
};
pub use windows::{make_windows, resample, resample_indices, WindowSample};
