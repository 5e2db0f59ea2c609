//! Emb-Net: per-modality encoders producing 1×d modality embeddings.
//!
//! Tabular and precomputed-vector modalities go through a three-layer
//! projection (ReLU, ReLU, linear). The social-graph modality goes through
//! a two-layer GraphSAGE-style aggregator over sampled neighborhoods and is
//! then projected like any other modality.
//!
//! Everything here builds tape graphs, so gradients flow end to end through
//! both paths. Neighbor samples are keyed by (run seed, layer, node id),
//! never by the node's role in a pair: scoring (u,v) and (v,u) sees the
//! same neighborhoods, which keeps tied-parameter scores exactly symmetric
//! and makes per-node caching sound.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::UserRecord;
use crate::error::{Error, Result};
use crate::graph::{sample_without_replacement, FriendshipGraph};
use crate::numerics::{BoundParams, ParamSet, Real, Tape, Tensor, Var};
use crate::rng;

/// Neighbor aggregation for the SAGE path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Mean,
    /// Element-wise max; ties resolve to the earlier neighbor.
    Max,
}

/// Three-layer projection dims: input → hidden1 → hidden2 → output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjDims {
    pub input: usize,
    pub hidden1: usize,
    pub hidden2: usize,
    pub output: usize,
}

/// Two-layer SAGE dims: base features → hidden → output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SageDims {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SageSpec {
    pub dims: SageDims,
    /// `[direct neighbors of u, neighbors per sampled neighbor]`.
    pub sample_sizes: [usize; 2],
    pub aggregator: Aggregator,
}

/// Registers the six projection parameters under `prefix` (w1/b1/w2/b2/w3/b3).
///
/// Weight seeds derive from (seed, parameter name), so a parameter keeps its
/// initial value no matter which other parameters exist in the set.
pub fn init_proj_params<T: Real>(
    params: &mut ParamSet<T>,
    prefix: &str,
    dims: &ProjDims,
    seed: u64,
) -> Result<()> {
    let layer_dims = [
        (dims.input, dims.hidden1),
        (dims.hidden1, dims.hidden2),
        (dims.hidden2, dims.output),
    ];
    for (i, (rows, cols)) in layer_dims.into_iter().enumerate() {
        let w = format!("{prefix}.w{}", i + 1);
        params.insert(&w, crate::numerics::init_params(rows, cols, rows, rng::sub_seed(seed, &w)))?;
        params.insert(&format!("{prefix}.b{}", i + 1), Tensor::zeros(1, cols))?;
    }
    Ok(())
}

/// Registers SAGE parameters: `{prefix}.l{1,2}.self` and `.nbr`, bias-free.
pub fn init_sage_params<T: Real>(
    params: &mut ParamSet<T>,
    prefix: &str,
    dims: &SageDims,
    seed: u64,
) -> Result<()> {
    let layer_dims = [(dims.input, dims.hidden), (dims.hidden, dims.output)];
    for (i, (rows, cols)) in layer_dims.into_iter().enumerate() {
        for kind in ["self", "nbr"] {
            let name = format!("{prefix}.l{}.{kind}", i + 1);
            params.insert(&name, crate::numerics::init_params(rows, cols, rows, rng::sub_seed(seed, &name)))?;
        }
    }
    Ok(())
}

fn affine_layer<T: Real>(
    tape: &mut Tape<T>,
    bound: &BoundParams<'_, T>,
    x: Var,
    w_name: &str,
    b_name: &str,
) -> Result<Var> {
    let w = bound.var(w_name)?;
    let b = bound.var(b_name)?;
    let (rows, _) = tape.value(w).shape();
    let got = tape.value(x).shape();
    if got.0 != 1 || got.1 != rows {
        return Err(Error::ShapeMismatch {
            op: format!("affine {w_name}"),
            expected: format!("1x{rows}"),
            got: format!("{}x{}", got.0, got.1),
        });
    }
    let xw = tape.matmul(x, w);
    Ok(tape.add(xw, b))
}

/// Three affine layers, ReLU after the first two, linear output.
pub fn project_modality<T: Real>(
    tape: &mut Tape<T>,
    bound: &BoundParams<'_, T>,
    prefix: &str,
    raw: Var,
) -> Result<Var> {
    let mut x = raw;
    for i in 1..=3 {
        x = affine_layer(tape, bound, x, &format!("{prefix}.w{i}"), &format!("{prefix}.b{i}"))?;
        if i < 3 {
            x = tape.relu(x);
        }
    }
    Ok(x)
}

/// Per-forward cache of SAGE intermediates. Sound because neighbor samples
/// depend only on (seed, layer, node), never on which pair is being scored.
#[derive(Default)]
pub struct SageCache {
    base: HashMap<u32, Var>,
    h1: HashMap<u32, Var>,
    out: HashMap<u32, Var>,
}

impl SageCache {
    pub fn new() -> Self {
        Self::default()
    }
}

fn sampled_neighbors(graph: &FriendshipGraph, node: u32, layer: u64, size: usize, seed: u64) -> Vec<u32> {
    let mut rng = rng::stream_n(seed, "sage-sample", (layer << 32) ^ u64::from(node));
    sample_without_replacement(graph.neighbors(node), size, &mut rng)
}

struct SageCtx<'a, T: Real> {
    bound: &'a BoundParams<'a, T>,
    graph: &'a FriendshipGraph,
    users: &'a [UserRecord],
    spec: &'a SageSpec,
    seed: u64,
    prefix: &'a str,
}

impl<'a, T: Real> SageCtx<'a, T> {
    fn base_leaf(&self, tape: &mut Tape<T>, cache: &mut SageCache, node: u32) -> Result<Var> {
        if let Some(&v) = cache.base.get(&node) {
            return Ok(v);
        }
        let feats = &self.users[node as usize].profile;
        if feats.len() != self.spec.dims.input {
            return Err(Error::MissingModality("graph base features".into(), node));
        }
        let leaf = tape.leaf(Tensor::row(feats.iter().map(|&x| crate::numerics::real::<T>(x)).collect()));
        cache.base.insert(node, leaf);
        Ok(leaf)
    }

    fn aggregate(&self, tape: &mut Tape<T>, reps: &[Var], width: usize) -> Var {
        if reps.is_empty() {
            // Isolated node: zero neighbor aggregate.
            return tape.leaf(Tensor::zeros(1, width));
        }
        match self.spec.aggregator {
            Aggregator::Mean => tape.mean_of(reps),
            Aggregator::Max => reps[1..].iter().fold(reps[0], |acc, &r| tape.max2(acc, r)),
        }
    }

    fn sage_layer(&self, tape: &mut Tape<T>, this: Var, agg: Var, layer: usize) -> Result<Var> {
        let w_self = self.bound.var(&format!("{}.l{layer}.self", self.prefix))?;
        let w_nbr = self.bound.var(&format!("{}.l{layer}.nbr", self.prefix))?;
        let a = tape.matmul(this, w_self);
        let b = tape.matmul(agg, w_nbr);
        let sum = tape.add(a, b);
        Ok(tape.relu(sum))
    }

    /// Layer-1 representation of any node, cached.
    fn h1(&self, tape: &mut Tape<T>, cache: &mut SageCache, node: u32) -> Result<Var> {
        if let Some(&v) = cache.h1.get(&node) {
            return Ok(v);
        }
        let x = self.base_leaf(tape, cache, node)?;
        let nbrs = sampled_neighbors(self.graph, node, 1, self.spec.sample_sizes[1], self.seed);
        let reps = nbrs
            .iter()
            .map(|&w| self.base_leaf(tape, cache, w))
            .collect::<Result<Vec<_>>>()?;
        let agg = self.aggregate(tape, &reps, self.spec.dims.input);
        let h = self.sage_layer(tape, x, agg, 1)?;
        cache.h1.insert(node, h);
        Ok(h)
    }
}

/// Two-layer GraphSAGE embedding of `u` (1×output, pre-projection).
///
/// Layer ℓ computes ReLU(h·W_self + AGG(sampled neighbor h's)·W_nbr);
/// base features are the profile vector. Deterministic given `seed`.
#[allow(clippy::too_many_arguments)]
pub fn encode_graph<T: Real>(
    tape: &mut Tape<T>,
    bound: &BoundParams<'_, T>,
    graph: &FriendshipGraph,
    users: &[UserRecord],
    u: u32,
    spec: &SageSpec,
    seed: u64,
    cache: &mut SageCache,
) -> Result<Var> {
    if !graph.contains(u) || users.len() != graph.n() {
        return Err(Error::UnknownUser { id: u });
    }
    if let Some(&v) = cache.out.get(&u) {
        return Ok(v);
    }
    let ctx = SageCtx { bound, graph, users, spec, seed, prefix: "sage" };
    let h1_self = ctx.h1(tape, cache, u)?;
    let nbrs = sampled_neighbors(graph, u, 2, spec.sample_sizes[0], seed);
    let reps = nbrs
        .iter()
        .map(|&w| ctx.h1(tape, cache, w))
        .collect::<Result<Vec<_>>>()?;
    let agg = ctx.aggregate(tape, &reps, spec.dims.hidden);
    let out = ctx.sage_layer(tape, h1_self, agg, 2)?;
    cache.out.insert(u, out);
    Ok(out)
}

/// Which user-level modalities feed the model, in canonical order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UserModality {
    Profile,
    Image,
    Text,
    Graph,
}

impl UserModality {
    pub const ALL: [UserModality; 4] =
        [UserModality::Profile, UserModality::Image, UserModality::Text, UserModality::Graph];

    pub fn name(self) -> &'static str {
        match self {
            UserModality::Profile => "profile",
            UserModality::Image => "image",
            UserModality::Text => "text",
            UserModality::Graph => "graph",
        }
    }
}

/// Encoder-side configuration: enabled modalities, projection dims, SAGE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d: usize,
    pub proj_hidden: (usize, usize),
    pub modalities: Vec<UserModality>,
    pub raw_profile: usize,
    pub raw_image: usize,
    pub raw_text: usize,
    pub sage: SageSpec,
}

impl EncoderConfig {
    pub fn raw_dim(&self, m: UserModality) -> usize {
        match m {
            UserModality::Profile => self.raw_profile,
            UserModality::Image => self.raw_image,
            UserModality::Text => self.raw_text,
            UserModality::Graph => self.sage.dims.output,
        }
    }

    pub fn proj_prefix(m: UserModality) -> String {
        format!("proj.{}", m.name())
    }
}

/// Registers all encoder parameters (projections for enabled modalities,
/// SAGE weights when the graph modality is on).
pub fn init_encoder_params<T: Real>(params: &mut ParamSet<T>, cfg: &EncoderConfig, seed: u64) -> Result<()> {
    for &m in &cfg.modalities {
        let dims = ProjDims {
            input: cfg.raw_dim(m),
            hidden1: cfg.proj_hidden.0,
            hidden2: cfg.proj_hidden.1,
            output: cfg.d,
        };
        init_proj_params(params, &EncoderConfig::proj_prefix(m), &dims, seed)?;
    }
    if cfg.modalities.contains(&UserModality::Graph) {
        init_sage_params(params, "sage", &cfg.sage.dims, seed)?;
    }
    Ok(())
}

/// Embeds one user: one 1×d vector per enabled user-level modality, in
/// canonical order. The pair-interaction modality is projected at pair
/// level by the model, not here.
#[allow(clippy::too_many_arguments)]
pub fn embed_user<T: Real>(
    tape: &mut Tape<T>,
    bound: &BoundParams<'_, T>,
    cfg: &EncoderConfig,
    graph: &FriendshipGraph,
    users: &[UserRecord],
    u: u32,
    seed: u64,
    cache: &mut SageCache,
) -> Result<Vec<Var>> {
    let record = users.get(u as usize).ok_or(Error::UnknownUser { id: u })?;
    let mut out = Vec::with_capacity(cfg.modalities.len());
    for &m in &cfg.modalities {
        let raw = match m {
            UserModality::Profile => Some(&record.profile),
            UserModality::Image => Some(&record.image),
            UserModality::Text => Some(&record.text),
            UserModality::Graph => None,
        };
        let input = match raw {
            Some(vec) => {
                if vec.len() != cfg.raw_dim(m) {
                    return Err(Error::MissingModality(m.name().into(), u));
                }
                tape.leaf(Tensor::row(vec.iter().map(|&x| crate::numerics::real::<T>(x)).collect()))
            }
            None => encode_graph(tape, bound, graph, users, u, &cfg.sage, seed, cache)?,
        };
        out.push(project_modality(tape, bound, &EncoderConfig::proj_prefix(m), input)?);
    }
    Ok(out)
}
