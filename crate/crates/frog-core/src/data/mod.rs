//! Dataset types, pair-feature computation, and the temporal train /
//! validation / test split.

mod io;
mod synth;

pub use io::{load_dataset, write_dataset, LoadReport, EDGES_FILE, INSTANCES_FILE, USERS_FILE};
pub use synth::{generate_synthetic, SynthConfig};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::{sample_negatives_excluding, FriendshipGraph};
use crate::rng;

/// Days 1..=TRAIN_DAYS feed train/validation; TEST_DAY is held out.
pub const TRAIN_DAYS: u16 = 7;
pub const TEST_DAY: u16 = 8;

/// Training negatives attached per positive instance.
pub const TRAIN_NEG_RATIO: usize = 3;

/// Length of the pair-feature vector: common-friend count, co-interaction
/// count.
pub const PAIR_FEATURE_DIM: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct UserRecord {
    pub id: u32,
    pub profile: Vec<f64>,
    pub image: Vec<f64>,
    pub text: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairInstance {
    pub src: u32,
    pub dst: u32,
    pub label: u8,
    pub day: u16,
    pub pair_feats: Vec<f64>,
}

/// Co-interaction counts per unordered user pair (e.g. games played
/// together). Not part of the on-disk dataset: absent logs degrade to zero
/// counts.
#[derive(Clone, Debug, Default)]
pub struct InteractionLog {
    counts: HashMap<(u32, u32), u32>,
}

impl InteractionLog {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(u: u32, v: u32) -> (u32, u32) {
        if u < v {
            (u, v)
        } else {
            (v, u)
        }
    }

    pub fn add(&mut self, u: u32, v: u32, amount: u32) {
        *self.counts.entry(Self::key(u, v)).or_insert(0) += amount;
    }

    pub fn count(&self, u: u32, v: u32) -> u32 {
        self.counts.get(&Self::key(u, v)).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// A loaded or generated dataset. `graph` holds all edges including the test
/// day; model-visible structure must go through [`Dataset::model_graph`].
#[derive(Clone, Debug)]
pub struct Dataset {
    pub graph: FriendshipGraph,
    pub users: Vec<UserRecord>,
    pub instances: Vec<PairInstance>,
    pub interactions: InteractionLog,
    /// Original file ids by dense index (identity for generated data).
    pub external_ids: Vec<u64>,
}

impl Dataset {
    /// Graph restricted to pre-test days: the structure the model is allowed
    /// to see during training and evaluation.
    pub fn model_graph(&self) -> FriendshipGraph {
        self.graph.up_to_day(TRAIN_DAYS)
    }

    pub fn n(&self) -> usize {
        self.users.len()
    }
}

/// Pair features for (u, v): [common friends, co-interactions]. Both
/// components are symmetric in the arguments.
pub fn pair_features(
    graph: &FriendshipGraph,
    u: u32,
    v: u32,
    log: &InteractionLog,
) -> Vec<f64> {
    assert_ne!(u, v, "pair_features: identical users");
    vec![graph.common_neighbors(u, v) as f64, log.count(u, v) as f64]
}

#[derive(Clone, Debug, Default)]
pub struct DatasetSplit {
    pub train: Vec<PairInstance>,
    pub validation: Vec<PairInstance>,
    pub test: Vec<PairInstance>,
}

impl DatasetSplit {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Splits instances by day: positives from days 1..=7 are divided 80/20 per
/// source user into train/validation (seeded), day-8 records become the test
/// set, and three fresh negatives are sampled per train/validation positive
/// against `graph` (which must be the pre-test-day graph). Input negatives
/// on days 1..=7 are dropped: training negativity is defined by sampling,
/// not by the file.
pub fn split_temporal(
    instances: &[PairInstance],
    graph: &FriendshipGraph,
    log: &InteractionLog,
    seed: u64,
) -> Result<DatasetSplit> {
    let mut by_user: HashMap<u32, Vec<&PairInstance>> = HashMap::new();
    let mut test = Vec::new();
    let mut max_day = 0;
    for (i, inst) in instances.iter().enumerate() {
        max_day = max_day.max(inst.day);
        match inst.day {
            d if (1..=TRAIN_DAYS).contains(&d) => {
                if inst.label == 1 {
                    by_user.entry(inst.src).or_default().push(inst);
                }
            }
            TEST_DAY => test.push(inst.clone()),
            d => {
                return Err(Error::InvalidConfig {
                    key: "instances".into(),
                    reason: format!("instance {i} has day {d}, expected 1..={TEST_DAY}"),
                })
            }
        }
    }
    if max_day < TEST_DAY {
        return Err(Error::InvalidConfig {
            key: "instances".into(),
            reason: format!("day stamps reach only {max_day}, need the full 1..={TEST_DAY} window"),
        });
    }

    let mut users: Vec<u32> = by_user.keys().copied().collect();
    users.sort_unstable();

    let mut split = DatasetSplit { test, ..Default::default() };
    for user in users {
        let mut positives = by_user.remove(&user).expect("key enumerated above");
        let mut rng = rng::stream_n(seed, "split-user", u64::from(user));
        // Seeded permutation, then an 80/20 cut (rounded half up).
        crate::graph::shuffle(&mut positives, &mut rng);
        let n_val = ((positives.len() as f64) * 0.2 + 0.5).floor() as usize;
        let n_val = n_val.min(positives.len());
        for (i, inst) in positives.iter().enumerate() {
            let target = if i < n_val { &mut split.validation } else { &mut split.train };
            target.push((*inst).clone());
            let neg_seed = rng::sub_seed_n(seed, "split-neg", (u64::from(user) << 20) ^ i as u64);
            let negs = sample_negatives_excluding(graph, user, &[inst.dst], TRAIN_NEG_RATIO, neg_seed);
            for w in negs.ids {
                target.push(PairInstance {
                    src: user,
                    dst: w,
                    label: 0,
                    day: inst.day,
                    pair_feats: pair_features(graph, user, w, log),
                });
            }
        }
    }
    // Deterministic ordering independent of HashMap internals: train and
    // validation were built in sorted-user order already.
    Ok(split)
}
