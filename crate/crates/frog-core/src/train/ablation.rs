//! Ablation runner: trains and evaluates one model variant through the
//! standard pipeline, changing nothing but the variant tag.

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, RankingMetrics};
use super::{train, TrainConfig, TrainReport};
use crate::data::{Dataset, DatasetSplit};
use crate::error::Result;
use crate::model::{ModelShape, Variant};
use crate::numerics::Real;

/// One ablation outcome: the variant, its training curves, and its test
/// ranking metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub variant: Variant,
    pub train: TrainReport,
    pub test: RankingMetrics,
}

/// Trains `variant` with the shared trainer and evaluates it on the test
/// split. The full variant goes through the identical code path, so its
/// result is bit-for-bit the standard pipeline's.
pub fn run_ablation<T: Real>(
    variant: Variant,
    base_shape: &ModelShape,
    cfg: &TrainConfig,
    ds: &Dataset,
    split: &DatasetSplit,
    eval_seed: u64,
) -> Result<AblationRun> {
    let mut shape = base_shape.clone();
    shape.variant = variant;
    let (model, report) = train::<T>(cfg, &shape, ds, split)?;
    let metrics = evaluate(&model, ds, &split.test, cfg, eval_seed)?;
    Ok(AblationRun { variant, train: report, test: metrics })
}
