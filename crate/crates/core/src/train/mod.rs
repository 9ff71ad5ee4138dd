//! Training loop, evaluation metrics, significance testing and error
//! analysis.

mod analysis;
mod eval;
mod optim;
mod trainer;

pub use analysis::{
    counts, pattern_table, per_pos_delta, pos_delta_tsv, significance, Metric, PatternRow, PatternTable, PosDelta,
    Significance, SIGNIFICANCE_TEST,
};
pub use eval::{check_alignment, evaluate, sentence_counts, Counts, EvalReport};
pub use optim::Adam;
pub use trainer::{
    evaluate_model, interleave, make_batches, predict_all, train, BatchSource, EarlyStopping, EpochRecord, TrainConfig, TrainData,
    TrainOutcome,
};

#[cfg(test)]
mod tests;
