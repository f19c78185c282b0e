//! Nearest-neighbor search, label transfer, and field-driven applications.

mod apps;
mod index;
mod labels;

pub use apps::{autolabel, morph_sequence};
pub use index::{brute_force_knn, Neighbor, NeighborIndex, DEFAULT_LEAF_SIZE};
pub use labels::{label_accuracy, transfer_labels, LabeledPointCloud, DEFAULT_LABEL_K};
