//! Reconstruction and regularization losses between point clouds.

mod chamfer;
mod emd;
mod smoothness;
mod total;

pub use chamfer::{chamfer, chamfer_distance, chamfer_indexed, directed_chamfer, LossValue};
pub use emd::{
    emd, emd_distance, emd_exact, emd_sinkhorn, solve_assignment, EmdConfig, EmdMode,
    EXACT_EMD_MAX_POINTS,
};
pub use smoothness::{smoothness, smoothness_with_graph, KnnGraph, DEFAULT_SMOOTH_K};
pub use total::{
    total_loss, total_loss_prepared, LossBreakdown, LossConfig, PairTerm, PreparedWindow,
};
