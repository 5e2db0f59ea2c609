//! Reference baselines trained with the exact same loss, optimizer, and
//! protocol as the main model: logistic regression over the concatenated
//! pair representation (pair features plus both users' raw modality
//! vectors), and a dot-product MLP, a two-tower scorer whose shared MLP
//! embeds each user's raw features and whose score is the inner product of
//! the two tower outputs.

use serde::{Deserialize, Serialize};

use super::eval::{metrics_from_ranks, protocol_ranks, validation_queries, QuerySpec, RankingMetrics};
use super::{fit, TrainConfig, TrainReport, SELECTION_K};
use crate::data::{pair_features, Dataset, DatasetSplit, PairInstance, UserRecord};
use crate::error::{Error, Result};
use crate::model::focal_term;
use crate::numerics::{init_params, real, BoundParams, ParamSet, Real, Tape, Tensor, Var};
use crate::rng;

/// Hidden and output widths of the dot-product MLP's tower.
pub const MLP_TOWER: (usize, usize) = (64, 32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    LogisticRegression,
    Mlp,
}

impl BaselineKind {
    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::LogisticRegression => "lr",
            BaselineKind::Mlp => "mlp",
        }
    }
}

/// A trained (or freshly initialized) baseline scorer. `input_dim` is the
/// length of the concatenated pair representation for LR and of one tower
/// input (a single user's raw features) for the MLP.
#[derive(Clone, Debug)]
pub struct BaselineModel<T: Real> {
    pub kind: BaselineKind,
    pub input_dim: usize,
    pub params: ParamSet<T>,
}

impl<T: Real> BaselineModel<T> {
    pub fn new(kind: BaselineKind, input_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::EmptyInput { op: "baseline features" });
        }
        let mut params = ParamSet::new();
        let weight = |params: &mut ParamSet<T>, id: &str, rows: usize, cols: usize| -> Result<()> {
            params.insert(id, init_params(rows, cols, rows, rng::sub_seed(seed, id)))
        };
        match kind {
            BaselineKind::LogisticRegression => {
                weight(&mut params, "base.w", input_dim, 1)?;
                params.insert("base.b", Tensor::zeros(1, 1))?;
            }
            BaselineKind::Mlp => {
                let (h1, h2) = MLP_TOWER;
                weight(&mut params, "base.w1", input_dim, h1)?;
                params.insert("base.b1", Tensor::zeros(1, h1))?;
                weight(&mut params, "base.w2", h1, h2)?;
                params.insert("base.b2", Tensor::zeros(1, h2))?;
                params.insert("base.b", Tensor::zeros(1, 1))?;
            }
        }
        Ok(BaselineModel { kind, input_dim, params })
    }

    /// Scores one pair through the same tape code the trainer
    /// differentiates, so training and evaluation can never drift apart.
    pub fn score_pair(&self, u: &UserRecord, v: &UserRecord, pair: &[f64]) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = self.params.bind(&mut tape);
        let input = assemble_input(self.kind, u, v, pair);
        let y = baseline_forward(&mut tape, &bound, self.input_dim, &input)?;
        Ok(tape.value(y).item().to_f64().expect("Real to f64"))
    }
}

/// The per-instance input of a baseline: one concatenated row for LR, the
/// two raw user rows for the two-tower MLP.
#[derive(Clone, Debug)]
enum BaselineInput {
    Row(Vec<f64>),
    Towers(Vec<f64>, Vec<f64>),
}

fn raw_user(u: &UserRecord) -> Vec<f64> {
    let mut x = Vec::with_capacity(u.profile.len() + u.image.len() + u.text.len());
    x.extend_from_slice(&u.profile);
    x.extend_from_slice(&u.image);
    x.extend_from_slice(&u.text);
    x
}

fn assemble_input(kind: BaselineKind, u: &UserRecord, v: &UserRecord, pair: &[f64]) -> BaselineInput {
    match kind {
        BaselineKind::LogisticRegression => {
            let mut x = Vec::new();
            x.extend_from_slice(pair);
            x.extend(raw_user(u));
            x.extend(raw_user(v));
            BaselineInput::Row(x)
        }
        BaselineKind::Mlp => BaselineInput::Towers(raw_user(u), raw_user(v)),
    }
}

fn leaf_row<T: Real>(tape: &mut Tape<T>, x: &[f64]) -> Var {
    tape.leaf(Tensor::row(x.iter().map(|&f| real::<T>(f)).collect()))
}

/// One tower of the dot-product MLP: a ReLU hidden layer and a linear
/// embedding layer. The embedding must be allowed to go negative or the
/// inner product could never push a score below sigmoid(b).
fn tower<T: Real>(tape: &mut Tape<T>, bound: &BoundParams<'_, T>, x: Var) -> Result<Var> {
    let w1 = bound.var("base.w1")?;
    let b1 = bound.var("base.b1")?;
    let w2 = bound.var("base.w2")?;
    let b2 = bound.var("base.b2")?;
    let z1 = tape.matmul(x, w1);
    let z1 = tape.add(z1, b1);
    let h1 = tape.relu(z1);
    let z2 = tape.matmul(h1, w2);
    Ok(tape.add(z2, b2))
}

/// ŷ for one instance: sigmoid(x·w + b) for LR; for the MLP,
/// sigmoid(g(x_u)·g(x_v)ᵀ + b) with a shared tower g, which also makes the
/// score symmetric in the two users.
fn baseline_forward<T: Real>(
    tape: &mut Tape<T>,
    bound: &BoundParams<'_, T>,
    input_dim: usize,
    input: &BaselineInput,
) -> Result<Var> {
    let check = |x: &[f64], what: &str| -> Result<()> {
        if x.len() != input_dim {
            return Err(Error::ShapeMismatch {
                op: format!("baseline {what}"),
                expected: format!("{input_dim} features"),
                got: format!("{}", x.len()),
            });
        }
        Ok(())
    };
    match input {
        BaselineInput::Row(x) => {
            check(x, "input row")?;
            let x = leaf_row(tape, x);
            let w = bound.var("base.w")?;
            let b = bound.var("base.b")?;
            let z = tape.matmul(x, w);
            let z = tape.add(z, b);
            Ok(tape.sigmoid(z))
        }
        BaselineInput::Towers(xu, xv) => {
            check(xu, "tower input u")?;
            check(xv, "tower input v")?;
            let xu = leaf_row(tape, xu);
            let xv = leaf_row(tape, xv);
            let gu = tower(tape, bound, xu)?;
            let gv = tower(tape, bound, xv)?;
            let gvt = tape.transpose(gv);
            let dot = tape.matmul(gu, gvt);
            // 1/sqrt(k) keeps the logit's initial magnitude independent of
            // the embedding width, off the saturated tails of the sigmoid.
            let scale = tape.leaf(Tensor::scalar(real::<T>(1.0 / (MLP_TOWER.1 as f64).sqrt())));
            let dot = tape.mul(dot, scale);
            let b = bound.var("base.b")?;
            let z = tape.add(dot, b);
            Ok(tape.sigmoid(z))
        }
    }
}

fn instance_input(ds: &Dataset, kind: BaselineKind, inst: &PairInstance) -> BaselineInput {
    assemble_input(kind, &ds.users[inst.src as usize], &ds.users[inst.dst as usize], &inst.pair_feats)
}

fn input_dim_for(kind: BaselineKind, input: &BaselineInput) -> usize {
    match (kind, input) {
        (_, BaselineInput::Row(x)) => x.len(),
        (_, BaselineInput::Towers(xu, _)) => xu.len(),
    }
}

/// Trains a baseline with the shared loop: same focal loss, Adam settings,
/// shuffling, and validation-HR@10 model selection as the main trainer.
pub fn train_baseline<T: Real>(
    kind: BaselineKind,
    cfg: &TrainConfig,
    ds: &Dataset,
    split: &DatasetSplit,
) -> Result<(BaselineModel<T>, TrainReport)> {
    if split.train.is_empty() {
        return Err(Error::EmptyInput { op: "train_baseline: empty training split" });
    }
    if split.validation.is_empty() {
        return Err(Error::EmptyInput { op: "train_baseline: empty validation split" });
    }
    let train_in: Vec<BaselineInput> = split.train.iter().map(|i| instance_input(ds, kind, i)).collect();
    let train_y: Vec<u8> = split.train.iter().map(|i| i.label).collect();
    let val_in: Vec<BaselineInput> = split.validation.iter().map(|i| instance_input(ds, kind, i)).collect();
    let val_y: Vec<u8> = split.validation.iter().map(|i| i.label).collect();
    let input_dim = input_dim_for(kind, &train_in[0]);

    let init = BaselineModel::<T>::new(kind, input_dim, rng::sub_seed(cfg.seed, kind.name()))?;
    let model_graph = ds.model_graph();
    let val_queries = validation_queries(&split.validation, cfg.val_queries, cfg.seed);
    let neg_seed = rng::sub_seed(cfg.seed, "val-negatives");

    let batch_step = |params: &ParamSet<T>, batch: &[usize]| {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let mut terms = Vec::with_capacity(batch.len());
        for &ix in batch {
            let y_hat = baseline_forward(&mut tape, &bound, input_dim, &train_in[ix])?;
            terms.push(focal_term(&mut tape, y_hat, train_y[ix], &cfg.loss));
        }
        let loss = tape.mean_of(&terms);
        let grads = tape.backward(loss);
        let loss_val = tape.value(loss).item().to_f64().unwrap_or(f64::NAN);
        Ok((grads, bound.vars().to_vec(), loss_val))
    };
    let epoch_metrics = |params: &ParamSet<T>| {
        let mut total = 0.0;
        for chunk in (0..val_in.len()).collect::<Vec<_>>().chunks(cfg.batch_size.max(1)) {
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            for &ix in chunk {
                let y_hat = baseline_forward(&mut tape, &bound, input_dim, &val_in[ix])?;
                let term = focal_term(&mut tape, y_hat, val_y[ix], &cfg.loss);
                total += tape.value(term).item().to_f64().unwrap_or(f64::NAN);
            }
        }
        let val_loss = total / val_in.len().max(1) as f64;

        let view = BaselineModel { kind, input_dim, params: params.clone() };
        let ranks = protocol_ranks(&ds.graph, &val_queries, cfg.eval_negatives, neg_seed, |u, w| {
            let feats = pair_features(&model_graph, u, w, &ds.interactions);
            view.score_pair(&ds.users[u as usize], &ds.users[w as usize], &feats)
        })?;
        let hr = if ranks.ranks.is_empty() {
            0.0
        } else {
            super::metrics::hit_rate_at_k(&ranks.ranks, SELECTION_K)?
        };
        Ok((val_loss, hr))
    };

    let (best, report) = fit(init.params, cfg, split.train.len(), batch_step, epoch_metrics)?;
    Ok((BaselineModel { kind, input_dim, params: best }, report))
}

/// Ranks the test positives with a trained baseline under the exact
/// protocol used for the main model (same negative sampling seeds).
pub fn evaluate_baseline<T: Real>(
    model: &BaselineModel<T>,
    ds: &Dataset,
    test: &[PairInstance],
    cfg: &TrainConfig,
    seed: u64,
) -> Result<RankingMetrics> {
    let queries: Vec<QuerySpec> = test
        .iter()
        .filter(|i| i.label == 1)
        .map(|i| QuerySpec { src: i.src, dst: i.dst })
        .collect();
    if queries.is_empty() {
        return Err(Error::EmptyInput { op: "evaluate_baseline: no test positives" });
    }
    let model_graph = ds.model_graph();
    let ranks = protocol_ranks(
        &ds.graph,
        &queries,
        cfg.eval_negatives,
        rng::sub_seed(seed, "eval-negatives"),
        |u, w| {
            let feats = pair_features(&model_graph, u, w, &ds.interactions);
            model.score_pair(&ds.users[u as usize], &ds.users[w as usize], &feats)
        },
    )?;
    metrics_from_ranks(&ranks, &cfg.k_list)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: u32, profile: Vec<f64>) -> UserRecord {
        UserRecord { id, profile, image: vec![0.25, -0.5], text: vec![1.0] }
    }

    #[test]
    fn zero_weight_lr_scores_exactly_half() {
        let u = rec(0, vec![1.0, 2.0]);
        let v = rec(1, vec![-3.0, 0.5]);
        let pair = [0.7, 0.1];
        let mut model =
            BaselineModel::<f64>::new(BaselineKind::LogisticRegression, pair.len() + 10, 1).unwrap();
        model.params.get_mut("base.w").unwrap().value = Tensor::zeros(12, 1);
        assert_eq!(model.score_pair(&u, &v, &pair).unwrap(), 0.5);
    }

    #[test]
    fn dot_product_mlp_is_symmetric_in_the_pair() {
        let u = rec(0, vec![1.0, -2.0, 0.3]);
        let v = rec(1, vec![0.4, 0.9, -1.1]);
        let model = BaselineModel::<f64>::new(BaselineKind::Mlp, 6, 3).unwrap();
        let a = model.score_pair(&u, &v, &[9.0]).unwrap();
        let b = model.score_pair(&v, &u, &[9.0]).unwrap();
        assert_eq!(a, b, "shared towers plus a dot product must be symmetric");
    }

    #[test]
    fn scores_stay_in_the_open_unit_interval() {
        let u = rec(0, vec![1.5, -0.2, 2.0]);
        let v = rec(1, vec![-1.0, 0.0, 0.8]);
        for kind in [BaselineKind::LogisticRegression, BaselineKind::Mlp] {
            let dim = match kind {
                BaselineKind::LogisticRegression => 14,
                BaselineKind::Mlp => 6,
            };
            let model = BaselineModel::<f64>::new(kind, dim, 3).unwrap();
            let y = model.score_pair(&u, &v, &[0.5, -2.0]).unwrap();
            assert!(y > 0.0 && y < 1.0, "{} produced {y}", kind.name());
        }
        let model = BaselineModel::<f64>::new(BaselineKind::Mlp, 4, 3).unwrap();
        assert!(model.score_pair(&u, &v, &[0.5]).is_err(), "dimension mismatch must error");
    }

    #[test]
    fn both_baselines_reduce_training_loss() {
        let (ds, split, _) = crate::train::tests::small_corpus();
        let cfg = TrainConfig {
            max_epochs: 5,
            batch_size: 64,
            seed: 5,
            eval_negatives: 15,
            val_queries: 20,
            ..Default::default()
        };
        for kind in [BaselineKind::LogisticRegression, BaselineKind::Mlp] {
            let (_, report) = train_baseline::<f64>(kind, &cfg, &ds, &split).unwrap();
            let first = report.train_loss[0];
            let last = *report.train_loss.last().unwrap();
            assert!(last < first, "{}: loss did not decrease ({first} -> {last})", kind.name());
        }
    }

    #[test]
    fn baseline_evaluation_runs_the_standard_protocol() {
        let (ds, split, _) = crate::train::tests::small_corpus();
        let cfg = TrainConfig {
            max_epochs: 2,
            batch_size: 64,
            seed: 5,
            eval_negatives: 15,
            val_queries: 20,
            ..Default::default()
        };
        let (model, _) = train_baseline::<f64>(BaselineKind::LogisticRegression, &cfg, &ds, &split).unwrap();
        let a = evaluate_baseline(&model, &ds, &split.test, &cfg, 7).unwrap();
        let b = evaluate_baseline(&model, &ds, &split.test, &cfg, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.hr[&5] <= a.hr[&10] && a.hr[&10] <= a.hr[&20]);
    }
}
