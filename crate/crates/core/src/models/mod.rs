//! Tagger, parser and joint-model assembly, losses and checkpoints.

mod checkpoint;
mod jackknife;
mod loss;
mod model;
mod spec;

pub use jackknife::{jackknife_folds, jackknife_tags, Jackknife};
pub use loss::{arc_loss, label_loss, tag_loss};
pub use model::{component_of, BatchLoss, ForwardOut, LossValues, Model, Tasks};
pub use spec::{Framework, ModelSpec};
