//! Deterministic synthetic social-network generator.
//!
//! Latent structure: each user gets a primary and a secondary community
//! (facet). Communities drive everything observable:
//!   - modality vectors are noisy sums of per-community signature patterns,
//!     each pattern concentrated on a window of dimensions;
//!   - friend requests prefer candidates sharing a community (strength β),
//!     candidates from a complementary community (each community has
//!     designated partner communities whose members attract it, the way
//!     complementary roles attract in real networks), and candidates with
//!     common neighbors (triadic closure);
//!   - co-interaction counts are drawn with the same community bias.
//!
//! Complementary pairs matter for model comparisons: two users from
//! partner communities light up disjoint signature windows, so an
//! elementwise-product interaction sees almost nothing there, while a
//! pairwise relevance mechanism can still route both sides' evidence.
//!
//! Every draw comes from named, seeded streams, so identical (config, seed)
//! pairs generate identical datasets down to the byte.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pair_features, Dataset, InteractionLog, PairInstance, UserRecord, TEST_DAY};
use crate::error::{Error, Result};
use crate::graph::FriendshipGraph;
use crate::rng;

/// Secondary-community weight in modality vectors.
const MODALITY_SECONDARY: f64 = 0.6;
/// Secondary-community weight in the edge-preference score.
const EDGE_SECONDARY: f64 = 0.35;
/// Complementary-community (partner) weight in the edge-preference score.
/// Kept close to the same-community weight so that at moderate homophily a
/// substantial minority of friendships are partner pairs, whose feature
/// windows are disjoint by construction.
const EDGE_PARTNER: f64 = 0.85;
/// Co-interactions added per co-play event: 1..=COPLAY_MAX.
const COPLAY_MAX: u32 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// User count.
    pub n: usize,
    /// Latent community count.
    pub communities: usize,
    pub profile_dim: usize,
    pub image_dim: usize,
    pub text_dim: usize,
    /// Homophily strength β ≥ 0: community-match weight in edge preference.
    pub homophily: f64,
    /// Observation window; the model contract fixes this at 8.
    pub days: u16,
    /// Friend-request events per user per day (rate, not a hard quota).
    pub positives_per_user_day: f64,
    /// Candidates scored per friend-request event.
    pub candidate_pool: usize,
    /// Day-0 seed edges per user, laid down before the observed window.
    pub backbone_per_user: f64,
    /// Probability that an event draws candidates from friends-of-friends
    /// instead of uniformly (triadic closure).
    pub closure_prob: f64,
    /// Weight of ln(1 + common neighbors) in the edge-preference score.
    pub cn_weight: f64,
    /// Co-play events per user over the feature window.
    pub coplay_per_user: f64,
    /// Additive uniform noise amplitude on modality vectors.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 5000,
            communities: 10,
            profile_dim: 8,
            image_dim: 16,
            text_dim: 16,
            homophily: 3.0,
            days: 8,
            positives_per_user_day: 0.22,
            candidate_pool: 30,
            backbone_per_user: 1.0,
            closure_prob: 0.35,
            cn_weight: 1.0,
            coplay_per_user: 0.4,
            noise: 0.25,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::InvalidConfig { key: format!("data.synth.{key}"), reason });
        if self.n < 10 {
            return bad("n", format!("need at least 10 users, got {}", self.n));
        }
        if self.communities < 1 {
            return bad("communities", "need at least 1 community".into());
        }
        for (key, dim) in [
            ("profile_dim", self.profile_dim),
            ("image_dim", self.image_dim),
            ("text_dim", self.text_dim),
        ] {
            if dim == 0 {
                return bad(key, "modality dimension must be positive".into());
            }
        }
        if self.days != TEST_DAY {
            return bad("days", format!("the temporal protocol requires {TEST_DAY} days, got {}", self.days));
        }
        if self.homophily < 0.0 || !self.homophily.is_finite() {
            return bad("homophily", format!("must be finite and >= 0, got {}", self.homophily));
        }
        if self.positives_per_user_day <= 0.0 {
            return bad("positives_per_user_day", "must be positive".into());
        }
        if self.candidate_pool < 2 {
            return bad("candidate_pool", "need at least 2 candidates".into());
        }
        if !(0.0..=1.0).contains(&self.closure_prob) {
            return bad("closure_prob", "must lie in [0, 1]".into());
        }
        if self.noise < 0.0 || self.cn_weight < 0.0 || self.backbone_per_user < 0.0 || self.coplay_per_user < 0.0 {
            return bad("noise", "rates and weights must be >= 0".into());
        }
        Ok(())
    }
}

/// Per-user latent facets: primary and secondary community.
struct Facets {
    communities: usize,
    primary: Vec<usize>,
    secondary: Vec<usize>,
}

impl Facets {
    /// Designated partner of community `k`: the community half a turn away.
    fn partner(&self, k: usize) -> usize {
        (k + self.communities / 2) % self.communities
    }

    /// Whether primary communities `k` and `l` attract each other as
    /// complements (symmetric; for odd counts the partner map is a cycle,
    /// so each community has two complements).
    fn complementary(&self, k: usize, l: usize) -> bool {
        k != l && (self.partner(k) == l || self.partner(l) == k)
    }

    /// Edge-preference overlap: strongest community relation, weighted by
    /// role (shared primary > complementary primaries > shared secondary).
    fn overlap(&self, u: usize, v: usize) -> f64 {
        let (pu, su) = (self.primary[u], self.secondary[u]);
        let (pv, sv) = (self.primary[v], self.secondary[v]);
        let mut best: f64 = 0.0;
        if pu == pv {
            best = 1.0;
        }
        if self.complementary(pu, pv) {
            best = best.max(EDGE_PARTNER);
        }
        if pu == sv || su == pv {
            best = best.max(EDGE_SECONDARY);
        }
        if su == sv {
            best = best.max(EDGE_SECONDARY * EDGE_SECONDARY);
        }
        best
    }
}

/// Community signature patterns: one vector per (community, modality),
/// concentrated on a window so different communities light up different
/// dimensions.
fn signatures(communities: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let width = ((1.5 * dim as f64 / communities as f64).round() as usize).max(2).min(dim);
    (0..communities)
        .map(|k| {
            let start = k * dim / communities;
            let mut sig = vec![0.0; dim];
            for w in 0..width {
                sig[(start + w) % dim] = 0.5 + rng.gen::<f64>();
            }
            sig
        })
        .collect()
}

fn softmax_pick(scores: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = scores.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Distinct 2-hop neighbors of `u` (friends of friends that are not already
/// friends), sorted.
fn friends_of_friends(graph: &FriendshipGraph, u: u32) -> Vec<u32> {
    let mut out = Vec::new();
    for &w in graph.neighbors(u) {
        for &x in graph.neighbors(w) {
            if x != u && !graph.has_edge(u, x) {
                out.push(x);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

struct EdgeSampler<'a> {
    cfg: &'a SynthConfig,
    facets: &'a Facets,
}

impl<'a> EdgeSampler<'a> {
    /// Scores candidate v for source u against the current graph state.
    fn score(&self, graph: &FriendshipGraph, u: u32, v: u32) -> f64 {
        let o = self.facets.overlap(u as usize, v as usize);
        let cn = graph.common_neighbors(u, v) as f64;
        self.cfg.homophily * o + self.cfg.cn_weight * (1.0 + cn).ln()
    }

    /// Uniform eligible candidates (never u, never an existing friend).
    fn uniform_pool(&self, graph: &FriendshipGraph, u: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
        let n = graph.n() as u32;
        let mut pool = Vec::with_capacity(self.cfg.candidate_pool);
        let mut attempts = 0;
        while pool.len() < self.cfg.candidate_pool && attempts < self.cfg.candidate_pool * 10 {
            attempts += 1;
            let v = rng.gen_range(0..n);
            if v != u && !graph.has_edge(u, v) && !pool.contains(&v) {
                pool.push(v);
            }
        }
        pool
    }

    /// Picks a friend-request target for u, or None when no candidate exists.
    fn pick(&self, graph: &FriendshipGraph, u: u32, closure: bool, rng: &mut ChaCha8Rng) -> Option<u32> {
        let pool = if closure {
            let fof = friends_of_friends(graph, u);
            if fof.is_empty() {
                self.uniform_pool(graph, u, rng)
            } else {
                crate::graph::sample_without_replacement(&fof, self.cfg.candidate_pool, rng)
            }
        } else {
            self.uniform_pool(graph, u, rng)
        };
        if pool.is_empty() {
            return None;
        }
        let scores: Vec<f64> = pool.iter().map(|&v| self.score(graph, u, v)).collect();
        Some(pool[softmax_pick(&scores, rng)])
    }
}

/// Generates a complete dataset. Deterministic in (config, seed).
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<Dataset> {
    cfg.validate()?;
    let n = cfg.n;

    // Latent facets.
    let mut rng_facets = rng::stream(seed, "synth-facets");
    let facets = Facets {
        communities: cfg.communities,
        primary: (0..n).map(|_| rng_facets.gen_range(0..cfg.communities)).collect(),
        secondary: (0..n).map(|_| rng_facets.gen_range(0..cfg.communities)).collect(),
    };

    // Modality vectors: weighted community signatures plus noise.
    let mut rng_sig = rng::stream(seed, "synth-signatures");
    let sig_profile = signatures(cfg.communities, cfg.profile_dim, &mut rng_sig);
    let sig_image = signatures(cfg.communities, cfg.image_dim, &mut rng_sig);
    let sig_text = signatures(cfg.communities, cfg.text_dim, &mut rng_sig);

    let mut rng_vec = rng::stream(seed, "synth-vectors");
    let mut users = Vec::with_capacity(n);
    for u in 0..n {
        let make = |sigs: &[Vec<f64>], dim: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut x = vec![0.0; dim];
            for (j, xj) in x.iter_mut().enumerate() {
                *xj = sigs[facets.primary[u]][j]
                    + MODALITY_SECONDARY * sigs[facets.secondary[u]][j]
                    + cfg.noise * (rng.gen::<f64>() * 2.0 - 1.0);
            }
            x
        };
        users.push(UserRecord {
            id: u as u32,
            profile: make(&sig_profile, cfg.profile_dim, &mut rng_vec),
            image: make(&sig_image, cfg.image_dim, &mut rng_vec),
            text: make(&sig_text, cfg.text_dim, &mut rng_vec),
        });
    }

    // Co-interaction log over the feature window, biased by community.
    let mut log = InteractionLog::new();
    let mut rng_coplay = rng::stream(seed, "synth-coplay");
    let coplay_events = (cfg.coplay_per_user * n as f64 * f64::from(TEST_DAY - 1)).round() as usize;
    for _ in 0..coplay_events {
        let u = rng_coplay.gen_range(0..n as u32);
        let pool: Vec<u32> = (0..8)
            .map(|_| rng_coplay.gen_range(0..n as u32))
            .filter(|&v| v != u)
            .collect();
        if pool.is_empty() {
            continue;
        }
        let scores: Vec<f64> = pool
            .iter()
            .map(|&v| cfg.homophily * facets.overlap(u as usize, v as usize))
            .collect();
        let v = pool[softmax_pick(&scores, &mut rng_coplay)];
        log.add(u, v, rng_coplay.gen_range(1..=COPLAY_MAX));
    }

    let mut graph = FriendshipGraph::new(n);
    let sampler = EdgeSampler { cfg, facets: &facets };

    // Day-0 backbone: community-biased seed edges, no instances.
    let mut rng_backbone = rng::stream(seed, "synth-backbone");
    let backbone_edges = (cfg.backbone_per_user * n as f64).round() as usize;
    for _ in 0..backbone_edges {
        let u = rng_backbone.gen_range(0..n as u32);
        if let Some(v) = sampler.pick(&graph, u, false, &mut rng_backbone) {
            graph.add_edge(u, v, 0);
        }
    }

    // Observed window: friend-request instances drawn day by day.
    let mut rng_events = rng::stream(seed, "synth-events");
    let mut instances = Vec::new();
    let events_per_day = (cfg.positives_per_user_day * n as f64).round() as usize;
    for day in 1..=cfg.days {
        for _ in 0..events_per_day {
            let u = rng_events.gen_range(0..n as u32);
            let closure = rng_events.gen::<f64>() < cfg.closure_prob;
            let Some(v) = sampler.pick(&graph, u, closure, &mut rng_events) else {
                continue;
            };
            // Features reflect the pre-request state of the graph.
            let feats = pair_features(&graph, u, v, &log);
            if graph.add_edge(u, v, day) {
                instances.push(PairInstance { src: u, dst: v, label: 1, day, pair_feats: feats });
            }
        }
    }

    Ok(Dataset {
        graph,
        users,
        instances,
        interactions: log,
        external_ids: (0..n as u64).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> SynthConfig {
        SynthConfig { n: 400, positives_per_user_day: 0.3, ..SynthConfig::default() }
    }

    #[test]
    fn rejects_degenerate_configs() {
        let cfg = SynthConfig { n: 5, ..SynthConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SynthConfig { image_dim: 0, ..SynthConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = SynthConfig { days: 5, ..SynthConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = small_cfg();
        let a = generate_synthetic(&cfg, 7).unwrap();
        let b = generate_synthetic(&cfg, 7).unwrap();
        assert_eq!(a.users, b.users);
        assert_eq!(a.instances, b.instances);
        assert_eq!(a.graph.edges_sorted(), b.graph.edges_sorted());
        let c = generate_synthetic(&cfg, 8).unwrap();
        assert_ne!(a.instances, c.instances);
    }

    #[test]
    fn structure_is_sound() {
        let cfg = small_cfg();
        let ds = generate_synthetic(&cfg, 3).unwrap();
        assert_eq!(ds.users.len(), cfg.n);
        for inst in &ds.instances {
            assert_ne!(inst.src, inst.dst);
            assert_eq!(inst.label, 1);
            assert!((1..=8).contains(&inst.day));
            assert!(ds.graph.has_edge(inst.src, inst.dst));
            assert_eq!(inst.pair_feats.len(), super::super::PAIR_FEATURE_DIM);
        }
        // instances exist on the test day
        assert!(ds.instances.iter().any(|i| i.day == TEST_DAY));
        // modality vectors all finite
        for u in &ds.users {
            assert!(u.profile.iter().chain(&u.image).chain(&u.text).all(|x| x.is_finite()));
        }
    }

    /// Regenerates the latent facet assignment the generator used.
    fn regen_facets(cfg: &SynthConfig, seed: u64) -> Facets {
        let mut rng_facets = rng::stream(seed, "synth-facets");
        Facets {
            communities: cfg.communities,
            primary: (0..cfg.n).map(|_| rng_facets.gen_range(0..cfg.communities)).collect(),
            secondary: (0..cfg.n).map(|_| rng_facets.gen_range(0..cfg.communities)).collect(),
        }
    }

    fn shares_a_facet(f: &Facets, u: usize, v: usize) -> bool {
        f.primary[u] == f.primary[v]
            || f.primary[u] == f.secondary[v]
            || f.secondary[u] == f.primary[v]
            || f.secondary[u] == f.secondary[v]
    }

    #[test]
    fn zero_homophily_gives_uniform_community_mixing() {
        let cfg = SynthConfig { homophily: 0.0, cn_weight: 0.0, closure_prob: 0.0, ..small_cfg() };
        let seed = 11;
        let ds = generate_synthetic(&cfg, seed).unwrap();
        let facets = regen_facets(&cfg, seed);
        let edges = ds.graph.edges_sorted();
        let same = edges.iter().filter(|&&(u, v, _)| facets.primary[u as usize] == facets.primary[v as usize]).count();
        let frac = same as f64 / edges.len() as f64;
        let p = 1.0 / cfg.communities as f64;
        let sigma = (p * (1.0 - p) / edges.len() as f64).sqrt();
        assert!(
            (frac - p).abs() <= 3.0 * sigma,
            "fraction {frac} vs expected {p} (3σ = {})",
            3.0 * sigma
        );
    }

    #[test]
    fn strong_homophily_concentrates_edges() {
        let cfg = SynthConfig { homophily: 5.0, ..small_cfg() };
        let seed = 13;
        let ds = generate_synthetic(&cfg, seed).unwrap();
        let facets = regen_facets(&cfg, seed);
        let edges = ds.graph.edges_sorted();
        let assortative = edges
            .iter()
            .filter(|&&(u, v, _)| {
                let (u, v) = (u as usize, v as usize);
                shares_a_facet(&facets, u, v)
                    || facets.complementary(facets.primary[u], facets.primary[v])
            })
            .count();
        let frac = assortative as f64 / edges.len() as f64;
        assert!(frac > 0.8, "assortative edge fraction {frac} <= 0.8");
        let same_primary = edges
            .iter()
            .filter(|&&(u, v, _)| facets.primary[u as usize] == facets.primary[v as usize])
            .count() as f64
            / edges.len() as f64;
        let uniform = 1.0 / cfg.communities as f64;
        assert!(
            same_primary > 3.0 * uniform,
            "same-primary fraction {same_primary} not well above uniform {uniform}"
        );
    }

    /// Complementary attraction must contribute a visible minority of
    /// edges at the default homophily: pairs from partner communities
    /// that share no facet at all.
    #[test]
    fn partner_communities_attract() {
        let cfg = small_cfg();
        let seed = 17;
        let ds = generate_synthetic(&cfg, seed).unwrap();
        let facets = regen_facets(&cfg, seed);
        let edges = ds.graph.edges_sorted();
        let partner_only = edges
            .iter()
            .filter(|&&(u, v, _)| {
                let (u, v) = (u as usize, v as usize);
                !shares_a_facet(&facets, u, v) && facets.complementary(facets.primary[u], facets.primary[v])
            })
            .count();
        let frac = partner_only as f64 / edges.len() as f64;
        assert!(
            (0.03..=0.3).contains(&frac),
            "partner-only edge fraction {frac} outside the expected band"
        );
    }
}

#[cfg(test)]
mod probe {
    use super::*;
    use crate::rng;

    #[test]
    #[ignore]
    fn edge_mix_at_default_scale() {
        let cfg = SynthConfig::default();
        let seed = 777;
        let ds = generate_synthetic(&cfg, seed).unwrap();
        let mut rng_facets = rng::stream(seed, "synth-facets");
        use rand::Rng;
        let primary: Vec<usize> = (0..cfg.n).map(|_| rng_facets.gen_range(0..cfg.communities)).collect();
        let secondary: Vec<usize> = (0..cfg.n).map(|_| rng_facets.gen_range(0..cfg.communities)).collect();
        let f = Facets { communities: cfg.communities, primary, secondary };
        let edges = ds.graph.edges_sorted();
        let (mut same_p, mut shared, mut partner_only, mut other) = (0, 0, 0, 0);
        for &(u, v, _) in &edges {
            let (u, v) = (u as usize, v as usize);
            let sh = f.primary[u] == f.primary[v]
                || f.primary[u] == f.secondary[v]
                || f.secondary[u] == f.primary[v]
                || f.secondary[u] == f.secondary[v];
            if f.primary[u] == f.primary[v] { same_p += 1; }
            if sh { shared += 1; }
            else if f.complementary(f.primary[u], f.primary[v]) { partner_only += 1; }
            else { other += 1; }
        }
        let n = edges.len() as f64;
        eprintln!(
            "edges {} same_primary {:.3} shared_any {:.3} partner_only {:.3} other {:.3}",
            edges.len(), same_p as f64 / n, shared as f64 / n, partner_only as f64 / n, other as f64 / n
        );
    }
}
