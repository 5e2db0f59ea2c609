//! The FROG scoring core.
//!
//! A pair (u, v) flows through five stages: per-modality embeddings
//! (Emb-Net, see [`crate::encoders`]), pairwise co-attention matching
//! producing one similarity vector per modality (Matching-Net), a local
//! per-pair preference MLP (Local-Net), a global preference built from a
//! decision plane shared across all samples (Global-Net), and a sigmoid
//! head fusing both (Joint-Net).
//!
//! All builders are tape functions: the same code path produces values for
//! scoring and gradients for training, in either precision.

mod checkpoint;
mod loss;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use loss::{focal_loss_value, focal_term, LossConfig};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, UserRecord};
use crate::encoders::{
    embed_user, init_encoder_params, init_proj_params, project_modality, EncoderConfig, ProjDims,
    SageCache, UserModality,
};
use crate::error::{Error, Result};
use crate::graph::FriendshipGraph;
use crate::numerics::{real, BoundParams, ParamSet, Real, Tape, Tensor, Var};

/// Multiplier applied to the fresh Glorot draw for the global decision
/// plane A; see the comment at its init site.
pub const GLOBAL_A_INIT_SCALE: f64 = 0.1;

/// Model variants: the full pipeline and the three ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Complete pipeline.
    Full,
    /// Matching-Net replaced by an elementwise product of the two modality
    /// embeddings; no co-attention.
    NoMatching,
    /// Local-Net removed; the head sees only the global preference.
    NoLocal,
    /// Global-Net removed; the head sees only the local preference.
    NoGlobal,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoMatching, Variant::NoLocal, Variant::NoGlobal];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoMatching => "no-matching",
            Variant::NoLocal => "no-local",
            Variant::NoGlobal => "no-global",
        }
    }

    pub fn parse(s: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig {
                key: "variant".into(),
                reason: format!("unknown variant {s:?}; expected one of full, no-matching, no-local, no-global"),
            })
    }
}

/// Complete architecture description; everything a checkpoint needs to
/// rebuild the parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub encoder: EncoderConfig,
    /// Local-Net output width.
    pub h: usize,
    /// Joint-Net hidden width.
    pub m: usize,
    /// Whether the pair-interaction modality is enabled.
    pub use_pair: bool,
    /// Raw pair-feature dimensionality.
    pub raw_pair: usize,
    pub variant: Variant,
}

impl ModelShape {
    /// Total modality count t: enabled user-level modalities plus the
    /// pair-interaction modality when enabled.
    pub fn t(&self) -> usize {
        self.encoder.modalities.len() + usize::from(self.use_pair)
    }

    pub fn d(&self) -> usize {
        self.encoder.d
    }

    /// Modality names in canonical order; parameter ids derive from these.
    pub fn modality_names(&self) -> Vec<&'static str> {
        let mut names: Vec<&'static str> = self.encoder.modalities.iter().map(|m| m.name()).collect();
        if self.use_pair {
            names.push("pair");
        }
        names
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::InvalidConfig { key: key.into(), reason });
        if self.encoder.d == 0 || self.h == 0 || self.m == 0 {
            return bad("model.dims", "d, h, m must all be positive".into());
        }
        if self.t() == 0 {
            return bad("model.modalities", "at least one modality must be enabled".into());
        }
        if self.use_pair && self.raw_pair == 0 {
            return bad("model.pair", "pair modality enabled but pair-feature dim is 0".into());
        }
        if self.encoder.proj_hidden.0 == 0 || self.encoder.proj_hidden.1 == 0 {
            return bad("model.proj_hidden", "projection hidden dims must be positive".into());
        }
        if self.encoder.modalities.contains(&UserModality::Graph) {
            let s = &self.encoder.sage;
            if s.dims.input == 0 || s.dims.hidden == 0 || s.dims.output == 0 {
                return bad("model.sage", "sage dims must be positive".into());
            }
            if s.dims.input != self.encoder.raw_profile {
                return bad(
                    "model.sage",
                    format!(
                        "sage input dim {} must equal profile dim {} (base features)",
                        s.dims.input, self.encoder.raw_profile
                    ),
                );
            }
            if s.sample_sizes.iter().any(|&k| k == 0) {
                return bad("model.sage", "sample sizes must be positive".into());
            }
        }
        for &m in &self.encoder.modalities {
            if self.encoder.raw_dim(m) == 0 {
                return bad("model.modalities", format!("raw dim for {} is 0", m.name()));
            }
        }
        Ok(())
    }

    /// Joint-Net input width under this variant.
    fn joint_input(&self) -> usize {
        match self.variant {
            Variant::NoLocal => self.d(),
            Variant::NoGlobal => self.h,
            _ => self.h + self.d(),
        }
    }
}

/// Parameters plus shape: a complete, scoreable model.
#[derive(Clone, Debug)]
pub struct FrogModel<T: Real> {
    pub shape: ModelShape,
    pub params: ParamSet<T>,
}

impl<T: Real> FrogModel<T> {
    /// Builds a model with freshly initialized parameters.
    ///
    /// Every parameter's init stream is seeded by (seed, parameter name),
    /// so a parameter shared between two variants starts identical in both.
    pub fn new(shape: ModelShape, seed: u64) -> Result<Self> {
        shape.validate()?;
        let mut params = ParamSet::new();
        let d = shape.d();

        init_encoder_params(&mut params, &shape.encoder, seed)?;
        if shape.use_pair {
            let dims = ProjDims {
                input: shape.raw_pair,
                hidden1: shape.encoder.proj_hidden.0,
                hidden2: shape.encoder.proj_hidden.1,
                output: d,
            };
            init_proj_params(&mut params, "proj.pair", &dims, seed)?;
        }

        if shape.variant != Variant::NoMatching {
            for name in shape.modality_names() {
                for (role, kind, rows, cols) in [
                    ("src", "p", d, 1),
                    ("src", "q", d, d),
                    ("dst", "p", d, 1),
                    ("dst", "q", d, d),
                ] {
                    let id = format!("match.{name}.{kind}_{role}");
                    params.insert(&id, crate::numerics::init_params(rows, cols, d, crate::rng::sub_seed(seed, &id)))?;
                }
            }
        }

        if shape.variant != Variant::NoLocal {
            let td = shape.t() * d;
            for (id, rows, cols) in [
                ("local.w1", td, 2 * shape.h),
                ("local.w2", 2 * shape.h, shape.h),
            ] {
                params.insert(id, crate::numerics::init_params(rows, cols, rows, crate::rng::sub_seed(seed, id)))?;
            }
            params.insert("local.b1", Tensor::zeros(1, 2 * shape.h))?;
            params.insert("local.b2", Tensor::zeros(1, shape.h))?;
        }

        if shape.variant != Variant::NoGlobal {
            // A enters its branch twice (project onto A, then scale A), so the
            // branch output grows with ‖A‖² and at full init scale it is the
            // loudest and noisiest input the joint head sees. Start A small,
            // residual-style: the local branch leads early training and the
            // optimizer grows A only as the global branch earns weight. Kept
            // nonzero because at A = 0 the branch's gradient vanishes too.
            let a = crate::numerics::init_params::<T>(1, d, d, crate::rng::sub_seed(seed, "global.a"));
            params.insert("global.a", a.map(|x| x * real::<T>(GLOBAL_A_INIT_SCALE)))?;
        }

        let ji = shape.joint_input();
        params.insert("joint.w1", crate::numerics::init_params(ji, shape.m, ji, crate::rng::sub_seed(seed, "joint.w1")))?;
        params.insert("joint.b2", Tensor::zeros(1, shape.m))?;
        params.insert("joint.w2", crate::numerics::init_params(shape.m, 1, shape.m, crate::rng::sub_seed(seed, "joint.w2")))?;
        params.insert("joint.b1", Tensor::zeros(1, 1))?;

        Ok(FrogModel { shape, params })
    }

    pub fn cast<U: Real>(&self) -> FrogModel<U> {
        FrogModel { shape: self.shape.clone(), params: self.params.cast() }
    }

    /// Copies src-role Matching-Net parameters onto the dst roles, making
    /// scores of (u,v) and (v,u) exactly equal when pair features are
    /// symmetric. Used by symmetry tests.
    pub fn tie_roles(&mut self) -> Result<()> {
        if self.shape.variant == Variant::NoMatching {
            return Ok(());
        }
        for name in self.shape.modality_names() {
            for kind in ["p", "q"] {
                let src = self.params.get(&format!("match.{name}.{kind}_src"))?.value.clone();
                self.params.get_mut(&format!("match.{name}.{kind}_dst"))?.value = src;
            }
        }
        Ok(())
    }

    /// One-shot convenience score; builds a fresh tape per call. Training
    /// and evaluation batch through [`Forward`] instead.
    pub fn score_pair(
        &self,
        graph: &FriendshipGraph,
        users: &[UserRecord],
        u: u32,
        v: u32,
        pair_feats: &[f64],
        seed: u64,
    ) -> Result<T> {
        let mut fwd = Forward::new(self, graph, users, seed);
        let y_hat = fwd.score(u, v, pair_feats)?;
        Ok(fwd.tape.value(y_hat).item())
    }
}

/// Attention values C = P·M·Q, computed outer-product first: (P·M) is d×d, then ·Q.
pub fn attention_values<T: Real>(tape: &mut Tape<T>, m: Var, p: Var, q: Var) -> Result<Var> {
    let d = check_row(tape, m, "attention_values M")?;
    check_shape(tape, p, (d, 1), "attention_values P")?;
    check_shape(tape, q, (d, d), "attention_values Q")?;
    let pm = tape.matmul(p, m);
    Ok(tape.matmul(pm, q))
}

/// Affinity matrix G = tanh(C_uᵀ·C_v), entrywise tanh.
pub fn affinity<T: Real>(tape: &mut Tape<T>, c_u: Var, c_v: Var) -> Result<Var> {
    let (r, c) = tape.value(c_u).shape();
    if r != c {
        return Err(Error::ShapeMismatch {
            op: "affinity C_u".into(),
            expected: "square".into(),
            got: format!("{r}x{c}"),
        });
    }
    check_shape(tape, c_v, (r, c), "affinity C_v")?;
    let cut = tape.transpose(c_u);
    let prod = tape.matmul(cut, c_v);
    Ok(tape.tanh(prod))
}

/// Relevance vectors: R_forward = softmax(row-means of G)ᵀ, R_backward =
/// softmax(column-means of G); both 1×d probability vectors.
pub fn relevance_vectors<T: Real>(tape: &mut Tape<T>, g: Var) -> (Var, Var) {
    let rm = tape.row_means(g); // d×1
    let sm = tape.softmax(rm);
    let r_fwd = tape.transpose(sm); // 1×d
    let cm = tape.col_means(g); // 1×d
    let r_bwd = tape.softmax(cm);
    (r_fwd, r_bwd)
}

/// Matching-Net parameter handles for one modality.
struct MatchVars {
    p_src: Var,
    q_src: Var,
    p_dst: Var,
    q_dst: Var,
}

fn match_vars<T: Real>(bound: &BoundParams<'_, T>, modality: &str) -> Result<MatchVars> {
    Ok(MatchVars {
        p_src: bound.var(&format!("match.{modality}.p_src"))?,
        q_src: bound.var(&format!("match.{modality}.q_src"))?,
        p_dst: bound.var(&format!("match.{modality}.p_dst"))?,
        q_dst: bound.var(&format!("match.{modality}.q_dst"))?,
    })
}

/// Matched embedding E = M_u ∘ R_{u→v} + M_v ∘ R_{v→u}, with the relevance vectors
/// produced by the C/G pipeline (src-role params on u, dst-role on v).
pub fn pair_similarity<T: Real>(
    tape: &mut Tape<T>,
    bound: &BoundParams<'_, T>,
    modality: &str,
    m_u: Var,
    m_v: Var,
) -> Result<Var> {
    let mv = match_vars(bound, modality)?;
    let c_u = attention_values(tape, m_u, mv.p_src, mv.q_src)?;
    let c_v = attention_values(tape, m_v, mv.p_dst, mv.q_dst)?;
    let g = affinity(tape, c_u, c_v)?;
    let (r_fwd, r_bwd) = relevance_vectors(tape, g);
    let a = tape.mul(m_u, r_fwd);
    let b = tape.mul(m_v, r_bwd);
    Ok(tape.add(a, b))
}

/// Local preference: concat(E^1..E^t) through a td → 2h → h MLP, ReLU
/// hidden, linear output.
pub fn local_preference<T: Real>(tape: &mut Tape<T>, bound: &BoundParams<'_, T>, e_set: &[Var]) -> Result<Var> {
    if e_set.is_empty() {
        return Err(Error::EmptyInput { op: "local_preference" });
    }
    let z = tape.concat_rows(e_set);
    let w1 = bound.var("local.w1")?;
    let (rows, _) = tape.value(w1).shape();
    let got = tape.value(z).cols();
    if got != rows {
        return Err(Error::ShapeMismatch {
            op: "local_preference".into(),
            expected: format!("concat width {rows}"),
            got: format!("{got}"),
        });
    }
    let b1 = bound.var("local.b1")?;
    let w2 = bound.var("local.w2")?;
    let b2 = bound.var("local.b2")?;
    let zw = tape.matmul(z, w1);
    let pre = tape.add(zw, b1);
    let hidden = tape.relu(pre);
    let hw = tape.matmul(hidden, w2);
    Ok(tape.add(hw, b2))
}

/// Global preference: s = Σ_i E^i·Aᵀ (scalar), D_global = s·A; collinear
/// with A by construction.
pub fn global_preference<T: Real>(tape: &mut Tape<T>, bound: &BoundParams<'_, T>, e_set: &[Var]) -> Result<Var> {
    if e_set.is_empty() {
        return Err(Error::EmptyInput { op: "global_preference" });
    }
    let a = bound.var("global.a")?;
    let at = tape.transpose(a);
    let mut s: Option<Var> = None;
    for &e in e_set {
        let dot = tape.matmul(e, at);
        s = Some(match s {
            Some(acc) => tape.add(acc, dot),
            None => dot,
        });
    }
    let s = s.expect("non-empty checked above");
    Ok(tape.matmul(s, a))
}

/// Prediction head ŷ = sigmoid(ReLU(z·W₁ + b₂)·W₂ + b₁) over z = concat(parts).
pub fn joint_predict<T: Real>(tape: &mut Tape<T>, bound: &BoundParams<'_, T>, parts: &[Var]) -> Result<Var> {
    if parts.is_empty() {
        return Err(Error::EmptyInput { op: "joint_predict" });
    }
    let z = tape.concat_rows(parts);
    let w1 = bound.var("joint.w1")?;
    let (rows, _) = tape.value(w1).shape();
    let got = tape.value(z).cols();
    if got != rows {
        return Err(Error::ShapeMismatch {
            op: "joint_predict".into(),
            expected: format!("input width {rows}"),
            got: format!("{got}"),
        });
    }
    let b2 = bound.var("joint.b2")?;
    let w2 = bound.var("joint.w2")?;
    let b1 = bound.var("joint.b1")?;
    let zw = tape.matmul(z, w1);
    let pre = tape.add(zw, b2);
    let hidden = tape.relu(pre);
    let hw = tape.matmul(hidden, w2);
    let logit = tape.add(hw, b1);
    Ok(tape.sigmoid(logit))
}

/// Embedding caches shared across the scores of one forward context.
/// Entries hold tape vars, so a cache is only valid for the tape it was
/// built on.
pub struct ScoreCaches {
    sage: SageCache,
    embed: HashMap<u32, Vec<Var>>,
}

impl ScoreCaches {
    pub fn new() -> Self {
        ScoreCaches { sage: SageCache::new(), embed: HashMap::new() }
    }
}

impl Default for ScoreCaches {
    fn default() -> Self {
        ScoreCaches::new()
    }
}

fn cached_embeddings<T: Real>(
    tape: &mut Tape<T>,
    bound: &BoundParams<'_, T>,
    encoder: &EncoderConfig,
    graph: &FriendshipGraph,
    users: &[UserRecord],
    u: u32,
    seed: u64,
    caches: &mut ScoreCaches,
) -> Result<Vec<Var>> {
    if let Some(set) = caches.embed.get(&u) {
        return Ok(set.clone());
    }
    let set = embed_user(tape, bound, encoder, graph, users, u, seed, &mut caches.sage)?;
    caches.embed.insert(u, set.clone());
    Ok(set)
}

/// Scores one pair on a caller-owned tape; returns the ŷ var (1×1).
///
/// This is the whole pipeline: per-modality embeddings, matching, local
/// and global preferences, joint head. Reusing `caches` across calls is
/// sound as long as parameters and neighbor samples stay frozen, which
/// holds within one tape.
pub fn score_on_tape<T: Real>(
    tape: &mut Tape<T>,
    bound: &BoundParams<'_, T>,
    shape: &ModelShape,
    graph: &FriendshipGraph,
    users: &[UserRecord],
    seed: u64,
    caches: &mut ScoreCaches,
    u: u32,
    v: u32,
    pair_feats: &[f64],
) -> Result<Var> {
    assert_ne!(u, v, "score of a self-pair");
    let m_u = cached_embeddings(tape, bound, &shape.encoder, graph, users, u, seed, caches)?;
    let m_v = cached_embeddings(tape, bound, &shape.encoder, graph, users, v, seed, caches)?;

    let similarity = |tape: &mut Tape<T>, name: &str, a: Var, b: Var| -> Result<Var> {
        if shape.variant == Variant::NoMatching {
            Ok(tape.mul(a, b))
        } else {
            pair_similarity(tape, bound, name, a, b)
        }
    };

    let mut e_set = Vec::with_capacity(shape.t());
    let names = shape.modality_names();
    for (i, &name) in names.iter().enumerate().take(m_u.len()) {
        e_set.push(similarity(tape, name, m_u[i], m_v[i])?);
    }
    if shape.use_pair {
        if pair_feats.len() != shape.raw_pair {
            return Err(Error::ShapeMismatch {
                op: "score pair features".into(),
                expected: format!("{}", shape.raw_pair),
                got: format!("{}", pair_feats.len()),
            });
        }
        let raw = tape.leaf(Tensor::row(pair_feats.iter().map(|&x| real::<T>(x)).collect()));
        let m_p = project_modality(tape, bound, "proj.pair", raw)?;
        // One pair-level embedding serves both roles.
        e_set.push(similarity(tape, "pair", m_p, m_p)?);
    }

    let mut parts = Vec::with_capacity(2);
    if shape.variant != Variant::NoLocal {
        parts.push(local_preference(tape, bound, &e_set)?);
    }
    if shape.variant != Variant::NoGlobal {
        parts.push(global_preference(tape, bound, &e_set)?);
    }
    joint_predict(tape, bound, &parts)
}

/// A batched forward context: one tape, shared embedding and SAGE caches.
///
/// Caching is sound within one context because neighbor samples and
/// parameters are frozen for its lifetime; training opens a fresh context
/// (hence fresh leaves) per batch.
pub struct Forward<'a, T: Real> {
    pub tape: Tape<T>,
    bound: BoundParams<'a, T>,
    shape: &'a ModelShape,
    graph: &'a FriendshipGraph,
    users: &'a [UserRecord],
    seed: u64,
    caches: ScoreCaches,
}

impl<'a, T: Real> Forward<'a, T> {
    pub fn new(model: &'a FrogModel<T>, graph: &'a FriendshipGraph, users: &'a [UserRecord], seed: u64) -> Self {
        Forward::from_parts(&model.shape, &model.params, graph, users, seed)
    }

    /// Same as [`Forward::new`] but over a free-standing parameter set, so
    /// training can rebind the set it is mutating between batches.
    pub fn from_parts(
        shape: &'a ModelShape,
        params: &'a ParamSet<T>,
        graph: &'a FriendshipGraph,
        users: &'a [UserRecord],
        seed: u64,
    ) -> Self {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        Forward { tape, bound, shape, graph, users, seed, caches: ScoreCaches::new() }
    }

    /// Parameter leaves in set order, for gradient accumulation.
    pub fn param_vars(&self) -> &[Var] {
        self.bound.vars()
    }

    /// Scores one pair; returns the ŷ var (1×1) on this context's tape.
    pub fn score(&mut self, u: u32, v: u32, pair_feats: &[f64]) -> Result<Var> {
        score_on_tape(
            &mut self.tape,
            &self.bound,
            self.shape,
            self.graph,
            self.users,
            self.seed,
            &mut self.caches,
            u,
            v,
            pair_feats,
        )
    }
}

/// Infers raw dims and a default-shaped model description from a dataset.
pub fn shape_for_dataset(ds: &Dataset, d: usize, h: usize, m: usize, variant: Variant) -> ModelShape {
    let first = &ds.users[0];
    let raw_pair = ds.instances.first().map_or(crate::data::PAIR_FEATURE_DIM, |i| i.pair_feats.len());
    ModelShape {
        encoder: EncoderConfig {
            d,
            proj_hidden: (2 * d, 2 * d),
            modalities: UserModality::ALL.to_vec(),
            raw_profile: first.profile.len(),
            raw_image: first.image.len(),
            raw_text: first.text.len(),
            sage: crate::encoders::SageSpec {
                dims: crate::encoders::SageDims { input: first.profile.len(), hidden: d, output: d },
                sample_sizes: [10, 5],
                aggregator: crate::encoders::Aggregator::Mean,
            },
        },
        h,
        m,
        use_pair: true,
        raw_pair,
        variant,
    }
}

fn check_row<T: Real>(tape: &Tape<T>, v: Var, op: &str) -> Result<usize> {
    let (r, c) = tape.value(v).shape();
    if r != 1 {
        return Err(Error::ShapeMismatch {
            op: op.into(),
            expected: "1xd row vector".into(),
            got: format!("{r}x{c}"),
        });
    }
    Ok(c)
}

fn check_shape<T: Real>(tape: &Tape<T>, v: Var, want: (usize, usize), op: &str) -> Result<()> {
    let got = tape.value(v).shape();
    if got != want {
        return Err(Error::ShapeMismatch {
            op: op.into(),
            expected: format!("{}x{}", want.0, want.1),
            got: format!("{}x{}", got.0, got.1),
        });
    }
    Ok(())
}
