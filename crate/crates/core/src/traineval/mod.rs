//! Dataset splits, the training loop and evaluation metrics.

mod eval;
mod splits;
mod train;

use thiserror::Error;

use crate::net::NetError;

pub use eval::{
    evaluate, predict_videos, r_squared, read_report_csv, rmse, spearman, EvalReport, Metrics, Prediction,
    HIGH_RANGE_START,
};
pub use splits::{combined_protocol, make_split, Protocol, Split, SplitMode};
pub use train::{train, train_from_scratch, TrainOptions, TrainReport};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("split `{0}` is empty")]
    EmptySplit(String),
    #[error("none of the {0} training sequences yields a usable clip")]
    NoUsableSequences(usize),
    #[error("training diverged at iteration {iteration} (loss {loss})")]
    Diverged { iteration: usize, loss: f64 },
    #[error(transparent)]
    Net(#[from] NetError),
}
