//! The ranking evaluation protocol: every test positive (u, v) is ranked
//! against `eval_negatives` freshly sampled non-friends of u, and HR@k /
//! NDCG@k aggregate the resulting ranks.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{hit_rate_at_k, ndcg_at_k, rank_candidates};
use crate::data::{pair_features, Dataset, InteractionLog, PairInstance, UserRecord};
use crate::error::{Error, Result};
use crate::graph::{sample_negatives_excluding, FriendshipGraph};
use crate::model::{Forward, FrogModel, ModelShape};
use crate::numerics::{ParamSet, Real};
use crate::rng;
use crate::train::TrainConfig;

/// One ranking query: rank `dst` among sampled non-friends of `src`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuerySpec {
    pub src: u32,
    pub dst: u32,
}

/// Ranks produced by a batch of queries, with protocol bookkeeping.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RankSet {
    /// 1-based rank per completed query, in query order.
    pub ranks: Vec<usize>,
    /// Queries dropped because no eligible negative existed.
    pub skipped: usize,
    /// Completed queries that got fewer negatives than requested.
    pub shortfalls: usize,
}

/// Aggregated ranking quality for one evaluation pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub hr: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
    pub queries: usize,
    pub skipped: usize,
    pub shortfalls: usize,
}

/// Negatives for query `qi`: non-friends of `src` under `elig_graph`,
/// excluding the positive itself. Seeded per query index, so the candidate
/// lists are independent of evaluation order and thread count.
fn query_negatives(
    elig_graph: &FriendshipGraph,
    q: &QuerySpec,
    count: usize,
    neg_seed: u64,
    qi: u64,
) -> crate::graph::NegativeSample {
    sample_negatives_excluding(elig_graph, q.src, &[q.dst], count, rng::sub_seed_n(neg_seed, "query", qi))
}

/// Runs the candidate protocol with an arbitrary scorer, serially.
///
/// The generic seam the tests exploit: a constant scorer recovers the
/// analytic HR@k baseline, a label-peeking oracle pins HR@k = 1, and the
/// model scorer must match [`model_ranks`] exactly.
pub fn protocol_ranks<S>(
    elig_graph: &FriendshipGraph,
    queries: &[QuerySpec],
    count: usize,
    neg_seed: u64,
    mut score: S,
) -> Result<RankSet>
where
    S: FnMut(u32, u32) -> Result<f64>,
{
    let mut out = RankSet::default();
    for (qi, q) in queries.iter().enumerate() {
        let negs = query_negatives(elig_graph, q, count, neg_seed, qi as u64);
        if negs.ids.is_empty() {
            out.skipped += 1;
            continue;
        }
        if negs.shortfall {
            out.shortfalls += 1;
        }
        out.ranks.push(rank_candidates(&mut score, q.src, q.dst, &negs.ids)?);
    }
    Ok(out)
}

/// Ranks queries with a FROG model, fanned out across queries with frozen
/// parameters. Each worker scores one query on a private tape; results are
/// identical to the serial protocol because negatives and neighbor samples
/// are keyed by query index and run seed, never by thread.
#[allow(clippy::too_many_arguments)]
pub fn model_ranks<T: Real>(
    shape: &ModelShape,
    params: &ParamSet<T>,
    score_graph: &FriendshipGraph,
    elig_graph: &FriendshipGraph,
    users: &[UserRecord],
    log: &InteractionLog,
    sage_seed: u64,
    neg_seed: u64,
    count: usize,
    queries: &[QuerySpec],
) -> Result<RankSet> {
    let per_query: Result<Vec<Option<(usize, bool)>>> = queries
        .par_iter()
        .enumerate()
        .map(|(qi, q)| {
            let negs = query_negatives(elig_graph, q, count, neg_seed, qi as u64);
            if negs.ids.is_empty() {
                return Ok(None);
            }
            let mut fwd = Forward::from_parts(shape, params, score_graph, users, sage_seed);
            let mut score = |u: u32, w: u32| -> Result<f64> {
                let feats = pair_features(score_graph, u, w, log);
                let y = fwd.score(u, w, &feats)?;
                Ok(fwd.tape.value(y).item().to_f64().expect("Real to f64"))
            };
            let rank = rank_candidates(&mut score, q.src, q.dst, &negs.ids)?;
            Ok(Some((rank, negs.shortfall)))
        })
        .collect();

    let mut out = RankSet::default();
    for entry in per_query? {
        match entry {
            None => out.skipped += 1,
            Some((rank, shortfall)) => {
                out.ranks.push(rank);
                out.shortfalls += usize::from(shortfall);
            }
        }
    }
    Ok(out)
}

/// HR@k and NDCG@k over a rank set for every cutoff in `k_list`.
pub fn metrics_from_ranks(rank_set: &RankSet, k_list: &[usize]) -> Result<RankingMetrics> {
    if rank_set.ranks.is_empty() {
        return Err(Error::EmptyInput { op: "metrics_from_ranks: every query was skipped" });
    }
    let mut hr = BTreeMap::new();
    let mut ndcg = BTreeMap::new();
    for &k in k_list {
        hr.insert(k, hit_rate_at_k(&rank_set.ranks, k)?);
        ndcg.insert(k, ndcg_at_k(&rank_set.ranks, k)?);
    }
    Ok(RankingMetrics {
        hr,
        ndcg,
        queries: rank_set.ranks.len() + rank_set.skipped,
        skipped: rank_set.skipped,
        shortfalls: rank_set.shortfalls,
    })
}

/// Evaluates a trained model on the test positives: fresh negatives per
/// query (seeded by `seed`), rank aggregation over `cfg.k_list`.
///
/// Structure and pair features come from the pre-test-day graph; negative
/// eligibility consults the full graph so genuine future friends are never
/// presented as negatives.
pub fn evaluate<T: Real>(
    model: &FrogModel<T>,
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
        return Err(Error::EmptyInput { op: "evaluate: no test positives" });
    }
    let model_graph = ds.model_graph();
    let rank_set = model_ranks(
        &model.shape,
        &model.params,
        &model_graph,
        &ds.graph,
        &ds.users,
        &ds.interactions,
        rng::sub_seed(seed, "eval-neighborhoods"),
        rng::sub_seed(seed, "eval-negatives"),
        cfg.eval_negatives,
        &queries,
    )?;
    metrics_from_ranks(&rank_set, &cfg.k_list)
}

/// Arithmetic mean of several evaluation passes (one per seed). Counts are
/// summed; metric cutoffs must agree.
pub fn average_metrics(runs: &[RankingMetrics]) -> Result<RankingMetrics> {
    let first = runs.first().ok_or(Error::EmptyInput { op: "average_metrics" })?;
    let mut out = RankingMetrics {
        hr: first.hr.keys().map(|&k| (k, 0.0)).collect(),
        ndcg: first.ndcg.keys().map(|&k| (k, 0.0)).collect(),
        queries: 0,
        skipped: 0,
        shortfalls: 0,
    };
    for run in runs {
        if run.hr.len() != out.hr.len() || run.hr.keys().any(|k| !out.hr.contains_key(k)) {
            return Err(Error::InvalidConfig {
                key: "k_list".into(),
                reason: "averaged runs disagree on metric cutoffs".into(),
            });
        }
        for (k, v) in &run.hr {
            *out.hr.get_mut(k).expect("checked above") += v;
        }
        for (k, v) in &run.ndcg {
            *out.ndcg.get_mut(k).expect("same cutoffs") += v;
        }
        out.queries += run.queries;
        out.skipped += run.skipped;
        out.shortfalls += run.shortfalls;
    }
    let n = runs.len() as f64;
    out.hr.values_mut().for_each(|v| *v /= n);
    out.ndcg.values_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// Validation positives as ranking queries, optionally capped to a fixed
/// seeded subsample (drawn once per run so epochs stay comparable).
pub(crate) fn validation_queries(validation: &[PairInstance], cap: usize, seed: u64) -> Vec<QuerySpec> {
    let positives: Vec<QuerySpec> = validation
        .iter()
        .filter(|i| i.label == 1)
        .map(|i| QuerySpec { src: i.src, dst: i.dst })
        .collect();
    if cap == 0 || positives.len() <= cap {
        return positives;
    }
    let mut order: Vec<usize> = (0..positives.len()).collect();
    let mut rng = rng::stream(seed, "val-query-sample");
    crate::graph::shuffle(&mut order, &mut rng);
    let mut chosen: Vec<usize> = order.into_iter().take(cap).collect();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| positives[i]).collect()
}
