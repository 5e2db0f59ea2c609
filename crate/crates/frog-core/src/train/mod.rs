//! Training (Adam + focal loss, validation-based model selection), ranking
//! evaluation, reference baselines, the ablation runner, and the
//! Matching-Net complexity benchmark.

mod ablation;
mod baselines;
mod bench;
mod eval;
mod metrics;

pub use ablation::{run_ablation, AblationRun};
pub use baselines::{evaluate_baseline, train_baseline, BaselineKind, BaselineModel, MLP_TOWER};
pub use bench::{bench_matching, BenchPoint, BenchReport};
pub use eval::{average_metrics, evaluate, metrics_from_ranks, model_ranks, protocol_ranks, QuerySpec, RankSet, RankingMetrics};
pub use metrics::{hit_rate_at_k, ndcg_at_k, rank_candidates};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetSplit, PairInstance};
use crate::error::{Error, Result};
use crate::model::{focal_term, Forward, FrogModel, LossConfig, ModelShape};
use crate::numerics::{real, Adam, Grads, ParamSet, Real, Var};
use crate::rng;

/// Adam moment decay and stabilizer; the conventional defaults.
pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Validation ranking uses HR at this cutoff to pick the best epoch.
pub const SELECTION_K: usize = 10;

/// Optimization and evaluation-protocol settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Seeds batch shuffling, neighbor sampling, parameter init, and the
    /// validation ranking protocol for one run.
    pub seed: u64,
    pub loss: LossConfig,
    /// Sampled non-friend candidates per ranked positive.
    pub eval_negatives: usize,
    /// Metric cutoffs, ascending.
    pub k_list: Vec<usize>,
    /// Cap on validation ranking queries per epoch (0 = use all). The
    /// subsample is drawn once per run, so epoch scores stay comparable.
    pub val_queries: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            max_epochs: 50,
            batch_size: 1024,
            seed: 42,
            loss: LossConfig::default(),
            eval_negatives: 99,
            k_list: vec![5, 10, 20],
            val_queries: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::InvalidConfig { key: key.into(), reason });
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("train.learning_rate", format!("must be positive and finite, got {}", self.learning_rate));
        }
        if self.max_epochs == 0 {
            return bad("train.max_epochs", "must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("train.batch_size", "must be at least 1".into());
        }
        if self.eval_negatives == 0 {
            return bad("train.eval_negatives", "must be at least 1".into());
        }
        if self.k_list.is_empty() {
            return bad("train.k_list", "must list at least one cutoff".into());
        }
        if self.k_list.iter().any(|&k| k == 0) {
            return bad("train.k_list", "cutoffs must be positive".into());
        }
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("train.k_list", format!("cutoffs must be strictly ascending, got {:?}", self.k_list));
        }
        self.loss.validate()?;
        Ok(())
    }
}

/// Per-epoch curves and the selection outcome of one training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean focal loss over each epoch's (shuffled) training batches.
    pub train_loss: Vec<f64>,
    /// Mean focal loss over the validation set after each epoch.
    pub val_loss: Vec<f64>,
    /// Validation HR@10 after each epoch; the selection signal.
    pub val_hr10: Vec<f64>,
    /// Epoch whose parameters were returned (0-based; ties go earliest).
    pub best_epoch: usize,
}

/// Trains a freshly initialized FROG model on `split.train`, selecting the
/// epoch with the highest validation HR@10 (ties resolved to the earliest).
///
/// Hyperparameter ranges are not re-validated here: `TrainConfig::validate`
/// guards the configuration surface, while the loop itself tolerates edge
/// settings like a zero learning rate (which provably leaves parameters
/// untouched).
pub fn train<T: Real>(
    cfg: &TrainConfig,
    shape: &ModelShape,
    ds: &Dataset,
    split: &DatasetSplit,
) -> Result<(FrogModel<T>, TrainReport)> {
    if split.train.is_empty() {
        return Err(Error::EmptyInput { op: "train: empty training split" });
    }
    if split.validation.is_empty() {
        return Err(Error::EmptyInput { op: "train: empty validation split" });
    }
    let model_graph = ds.model_graph();
    let sage_seed = rng::sub_seed(cfg.seed, "neighborhoods");
    let init = FrogModel::<T>::new(shape.clone(), rng::sub_seed(cfg.seed, "init"))?;

    let val_queries = eval::validation_queries(&split.validation, cfg.val_queries, cfg.seed);
    let neg_seed = rng::sub_seed(cfg.seed, "val-negatives");

    let batch_step = |params: &ParamSet<T>, batch: &[usize]| -> Result<(Grads<T>, Vec<Var>, f64)> {
        batch_grads(cfg, shape, params, &model_graph, &ds.users, sage_seed, &split.train, batch)
    };
    let epoch_metrics = |params: &ParamSet<T>| -> Result<(f64, f64)> {
        let val_loss = mean_loss(cfg, shape, params, &model_graph, &ds.users, sage_seed, &split.validation)?;
        let ranks = eval::model_ranks(
            shape,
            params,
            &model_graph,
            &ds.graph,
            &ds.users,
            &ds.interactions,
            sage_seed,
            neg_seed,
            cfg.eval_negatives,
            &val_queries,
        )?;
        let hr = if ranks.ranks.is_empty() { 0.0 } else { metrics::hit_rate_at_k(&ranks.ranks, SELECTION_K)? };
        Ok((val_loss, hr))
    };

    let (best, report) = fit(init.params, cfg, split.train.len(), batch_step, epoch_metrics)?;
    Ok((FrogModel { shape: shape.clone(), params: best }, report))
}

/// One training batch: fresh tape, mean focal loss, reverse sweep.
fn batch_grads<T: Real>(
    cfg: &TrainConfig,
    shape: &ModelShape,
    params: &ParamSet<T>,
    graph: &crate::graph::FriendshipGraph,
    users: &[crate::data::UserRecord],
    sage_seed: u64,
    instances: &[PairInstance],
    batch: &[usize],
) -> Result<(Grads<T>, Vec<Var>, f64)> {
    let mut fwd = Forward::from_parts(shape, params, graph, users, sage_seed);
    let mut terms = Vec::with_capacity(batch.len());
    for &ix in batch {
        let inst = &instances[ix];
        let y_hat = fwd.score(inst.src, inst.dst, &inst.pair_feats)?;
        terms.push(focal_term(&mut fwd.tape, y_hat, inst.label, &cfg.loss));
    }
    let loss = fwd.tape.mean_of(&terms);
    let grads = fwd.tape.backward(loss);
    let loss_val = fwd.tape.value(loss).item().to_f64().unwrap_or(f64::NAN);
    Ok((grads, fwd.param_vars().to_vec(), loss_val))
}

/// Mean focal loss over `instances`, forward only, chunked to bound tape
/// growth.
pub(crate) fn mean_loss<T: Real>(
    cfg: &TrainConfig,
    shape: &ModelShape,
    params: &ParamSet<T>,
    graph: &crate::graph::FriendshipGraph,
    users: &[crate::data::UserRecord],
    sage_seed: u64,
    instances: &[PairInstance],
) -> Result<f64> {
    if instances.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for chunk in instances.chunks(cfg.batch_size.max(1)) {
        let mut fwd = Forward::from_parts(shape, params, graph, users, sage_seed);
        for inst in chunk {
            let y_hat = fwd.score(inst.src, inst.dst, &inst.pair_feats)?;
            let term = focal_term(&mut fwd.tape, y_hat, inst.label, &cfg.loss);
            total += fwd.tape.value(term).item().to_f64().unwrap_or(f64::NAN);
        }
    }
    Ok(total / instances.len() as f64)
}

/// The optimizer loop shared by the FROG trainer and the baselines:
/// seeded epoch shuffles, Adam steps over `batch_step` gradients, and
/// best-validation-epoch selection via `epoch_metrics` (val loss, val HR@10).
pub(crate) fn fit<T: Real>(
    mut params: ParamSet<T>,
    cfg: &TrainConfig,
    n_train: usize,
    mut batch_step: impl FnMut(&ParamSet<T>, &[usize]) -> Result<(Grads<T>, Vec<Var>, f64)>,
    mut epoch_metrics: impl FnMut(&ParamSet<T>) -> Result<(f64, f64)>,
) -> Result<(ParamSet<T>, TrainReport)> {
    if n_train == 0 {
        return Err(Error::EmptyInput { op: "fit: no training instances" });
    }
    if cfg.max_epochs == 0 {
        return Err(Error::InvalidConfig {
            key: "train.max_epochs".into(),
            reason: "must be at least 1".into(),
        });
    }
    let lr = real::<T>(cfg.learning_rate);
    let mut adam = Adam::new(ADAM_BETA1, ADAM_BETA2, ADAM_EPS);
    let mut report = TrainReport::default();
    let mut best: Option<(f64, usize, ParamSet<T>)> = None;

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..n_train).collect();
        let mut shuffle_rng = rng::stream_n(cfg.seed, "train-shuffle", epoch as u64);
        crate::graph::shuffle(&mut order, &mut shuffle_rng);

        let mut weighted = 0.0;
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (grads, vars, loss) = batch_step(&params, batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: bi,
                    detail: diagnose_non_finite(&params, loss),
                });
            }
            params.zero_grads();
            params.accumulate_grads(&grads, &vars);
            adam.step(&mut params, lr)?;
            if let Some(bad) = first_non_finite(&params) {
                return Err(Error::NonFiniteLoss { epoch, batch: bi, detail: bad });
            }
            weighted += loss * batch.len() as f64;
        }
        report.train_loss.push(weighted / n_train as f64);

        let (val_loss, val_hr) = epoch_metrics(&params)?;
        report.val_loss.push(val_loss);
        report.val_hr10.push(val_hr);
        if best.as_ref().map_or(true, |(b, _, _)| val_hr > *b) {
            best = Some((val_hr, epoch, params.clone()));
        }
    }

    let (_, best_epoch, best_params) = best.expect("max_epochs >= 1 ran at least one epoch");
    report.best_epoch = best_epoch;
    Ok((best_params, report))
}

/// Names what went non-finite: the loss itself, a parameter value, or a
/// gradient entry.
fn diagnose_non_finite<T: Real>(params: &ParamSet<T>, loss: f64) -> String {
    if let Some(detail) = first_non_finite(params) {
        return detail;
    }
    format!("batch loss is {loss} with all parameters finite")
}

fn first_non_finite<T: Real>(params: &ParamSet<T>) -> Option<String> {
    for p in params.iter() {
        if !p.value.all_finite() {
            return Some(format!("parameter {} has a non-finite value", p.id));
        }
        if !p.grad.all_finite() {
            return Some(format!("gradient of {} is non-finite", p.id));
        }
    }
    None
}
