//! The five subcommand implementations.

mod agreement;
mod analyze;
mod eval;
mod gen_data;
mod train;

pub use agreement::run as agreement;
pub use analyze::run as analyze;
pub use eval::run as eval;
pub use gen_data::run as gen_data;
pub use train::run as train;

use std::fs;
use std::path::Path;

use anyhow::Context;

use artscore::dataset::{load_jsonl, validate_samples, DatasetDims};
use artscore::training::ModelState;
use artscore::Sample;

use crate::UsageError;

/// Loads a JSONL dataset and validates every sample against the schema.
pub(crate) fn load_dataset(path: &Path) -> anyhow::Result<(Vec<Sample>, DatasetDims)> {
    let samples = load_jsonl(path)?;
    let dims = validate_samples(&samples)?;
    Ok((samples, dims))
}

/// Refuses checkpoint/dataset pairs whose widths disagree, naming the field.
///
/// A comment-free dataset is fine for a comment-trained model (the channel
/// is zero-padded), and comment features on a comment-free model are simply
/// ignored; only contradicting widths are errors.
pub(crate) fn check_model_dims(state: &ModelState, dims: &DatasetDims) -> Result<(), UsageError> {
    if dims.d_img != state.d_img {
        return Err(UsageError(format!(
            "dimension mismatch on d_img: checkpoint expects image features of width {}, dataset has {}",
            state.d_img, dims.d_img
        )));
    }
    if state.d_cmt > 0 && dims.d_cmt != 0 && dims.d_cmt != state.d_cmt {
        return Err(UsageError(format!(
            "dimension mismatch on d_cmt: checkpoint expects comment features of width {}, dataset has {}",
            state.d_cmt, dims.d_cmt
        )));
    }
    Ok(())
}

pub(crate) fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("write {}", path.display()))
}
