//! Run configuration: one TOML file merged with dotted-key overrides.
//!
//! Every subcommand reads the same [`RunConfig`] tree. Values come from
//! three layers, later layers winning: built-in defaults, the `--config`
//! file, then repeatable `--set key=value` overrides (`--seed` and `--out`
//! are sugar for `--set seed=...` / `--set out=...`). Unknown keys are
//! rejected at parse time, naming the offending key.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SynthConfig, PAIR_FEATURE_DIM};
use crate::encoders::{Aggregator, EncoderConfig, SageDims, SageSpec, UserModality};
use crate::error::{Error, Result};
use crate::model::{ModelShape, Variant};
use crate::rng;
use crate::train::TrainConfig;

/// Dotted-key spellings accepted as shorthand for a canonical field.
const KEY_ALIASES: &[(&str, &str)] = &[("train.lr", "train.learning_rate")];

/// Top-level configuration tree for a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every random stream derives from it by name.
    pub seed: u64,
    /// Output directory for artifacts (datasets, checkpoints, reports).
    pub out: PathBuf,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out: PathBuf::from("frog-out"),
            data: DataConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        if self.out.as_os_str().is_empty() {
            return Err(Error::InvalidConfig { key: "out".into(), reason: "must be a non-empty path".into() });
        }
        Ok(())
    }
}

/// Where the dataset comes from: three files, or the synthetic generator.
///
/// Setting any of `users`/`edges`/`instances` requires all three; with none
/// set, subcommands generate from `synth` under a `"synth"` sub-seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub users: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub instances: Option<PathBuf>,
    pub synth: SynthConfig,
}

impl DataConfig {
    pub fn is_external(&self) -> bool {
        self.users.is_some() || self.edges.is_some() || self.instances.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_external() {
            for (key, path) in
                [("data.users", &self.users), ("data.edges", &self.edges), ("data.instances", &self.instances)]
            {
                if path.is_none() {
                    return Err(Error::InvalidConfig {
                        key: key.into(),
                        reason: "dataset paths must be given all together (users, edges, instances)".into(),
                    });
                }
            }
        }
        self.synth.validate()
    }
}

/// Model architecture knobs. The modality count t is derived: enabled
/// user-level modalities plus one when `use_pair` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Per-modality embedding width.
    pub d: usize,
    /// Local-Net output width.
    pub h: usize,
    /// Joint-Net hidden width.
    pub m: usize,
    pub variant: Variant,
    pub modalities: Vec<UserModality>,
    /// Enables the pair-interaction modality channel.
    pub use_pair: bool,
    /// Projection MLP hidden widths; defaults to (2d, 2d) when unset.
    pub proj_hidden: Option<(usize, usize)>,
    /// SAGE hidden width; defaults to d when unset.
    pub sage_hidden: Option<usize>,
    /// SAGE output width; defaults to d when unset.
    pub sage_output: Option<usize>,
    /// Neighbor fan-out per SAGE layer: [direct, per-neighbor].
    pub sample_sizes: [usize; 2],
    pub aggregator: Aggregator,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 32,
            h: 32,
            m: 32,
            variant: Variant::Full,
            modalities: UserModality::ALL.to_vec(),
            use_pair: true,
            proj_hidden: None,
            sage_hidden: None,
            sage_output: None,
            sample_sizes: [10, 5],
            aggregator: Aggregator::Mean,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, usize); 3] = [("model.d", self.d), ("model.h", self.h), ("model.m", self.m)];
        for (key, value) in positive {
            if value == 0 {
                return Err(Error::InvalidConfig { key: key.into(), reason: "must be positive".into() });
            }
        }
        if self.modalities.is_empty() && !self.use_pair {
            return Err(Error::InvalidConfig {
                key: "model.modalities".into(),
                reason: "at least one modality must be enabled (or use_pair set)".into(),
            });
        }
        for (i, m) in self.modalities.iter().enumerate() {
            if self.modalities[..i].contains(m) {
                return Err(Error::InvalidConfig {
                    key: "model.modalities".into(),
                    reason: format!("duplicate modality {:?}", m.name()),
                });
            }
        }
        if let Some((a, b)) = self.proj_hidden {
            if a == 0 || b == 0 {
                return Err(Error::InvalidConfig {
                    key: "model.proj_hidden".into(),
                    reason: "hidden widths must be positive".into(),
                });
            }
        }
        for (key, value) in [("model.sage_hidden", self.sage_hidden), ("model.sage_output", self.sage_output)] {
            if value == Some(0) {
                return Err(Error::InvalidConfig { key: key.into(), reason: "must be positive".into() });
            }
        }
        if self.sample_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig {
                key: "model.sample_sizes".into(),
                reason: "neighbor sample sizes must be positive".into(),
            });
        }
        Ok(())
    }

    /// Resolves the config against a dataset's raw feature widths.
    pub fn to_shape(&self, ds: &Dataset) -> Result<ModelShape> {
        let first = ds.users.first().ok_or(Error::EmptyInput { op: "to_shape" })?;
        let raw_pair = ds.instances.first().map_or(PAIR_FEATURE_DIM, |i| i.pair_feats.len());
        let shape = ModelShape {
            encoder: EncoderConfig {
                d: self.d,
                proj_hidden: self.proj_hidden.unwrap_or((2 * self.d, 2 * self.d)),
                modalities: self.modalities.clone(),
                raw_profile: first.profile.len(),
                raw_image: first.image.len(),
                raw_text: first.text.len(),
                sage: SageSpec {
                    dims: SageDims {
                        input: first.profile.len(),
                        hidden: self.sage_hidden.unwrap_or(self.d),
                        output: self.sage_output.unwrap_or(self.d),
                    },
                    sample_sizes: self.sample_sizes,
                    aggregator: self.aggregator,
                },
            },
            h: self.h,
            m: self.m,
            use_pair: self.use_pair,
            raw_pair,
            variant: self.variant,
        };
        shape.validate()?;
        Ok(shape)
    }
}

/// Evaluation-side knobs beyond what [`TrainConfig`] already carries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Seed repetitions: `ablate` trains this many models per variant and
    /// averages their test metrics; `eval` re-ranks a checkpoint under
    /// this many negative-sampling seeds.
    pub repeats: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { repeats: 5 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidConfig { key: "eval.repeats".into(), reason: "must be at least 1".into() });
        }
        Ok(())
    }
}

/// Parses a config file (optional) plus dotted-key overrides into a
/// validated [`RunConfig`]. Overrides win over file values; defaults fill
/// the rest. `base` supplies the defaults layer.
pub fn parse_config(file: Option<&Path>, overrides: &[String], base: &RunConfig) -> Result<RunConfig> {
    let mut tree = match file {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            text.parse::<toml::Value>().map_err(|e| Error::InvalidConfig {
                key: path.display().to_string(),
                reason: e.to_string(),
            })?
        }
        None => toml::Value::Table(toml::map::Map::new()),
    };
    for entry in overrides {
        apply_override(&mut tree, entry)?;
    }
    // An explicit train.seed (file or override) is honored; otherwise the
    // train seed is derived from the master seed after merging.
    let explicit_train_seed = tree.get("train").and_then(|t| t.get("seed")).is_some();

    let merged = merge_over_defaults(base, &tree)?;
    // The toml error text already names the offending key path.
    let mut cfg: RunConfig = merged.try_into().map_err(invalid_config)?;
    if !explicit_train_seed {
        cfg.train.seed = rng::sub_seed(cfg.seed, "train");
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Layers `tree` over the serialized defaults, table-by-table. Leaf values
/// in `tree` replace defaults wholesale (arrays are not element-merged).
fn merge_over_defaults(base: &RunConfig, tree: &toml::Value) -> Result<toml::Value> {
    let mut merged = toml::Value::try_from(base).map_err(invalid_config)?;
    merge_value(&mut merged, tree);
    Ok(merged)
}

fn invalid_config(e: impl std::fmt::Display) -> Error {
    let text = e.to_string();
    // toml appends "\nin `key.path`"; lift that path out as the key.
    if let Some((reason, tail)) = text.split_once("\nin `") {
        if let Some(key) = tail.trim_end().strip_suffix('`') {
            return Error::InvalidConfig { key: key.to_string(), reason: reason.trim().to_string() };
        }
    }
    Error::InvalidConfig { key: "config".into(), reason: text }
}

fn merge_value(into: &mut toml::Value, from: &toml::Value) {
    match (into, from) {
        (toml::Value::Table(into), toml::Value::Table(from)) => {
            for (key, value) in from {
                match into.get_mut(key) {
                    Some(slot) => merge_value(slot, value),
                    None => {
                        into.insert(key.clone(), value.clone());
                    }
                }
            }
        }
        (into, from) => *into = from.clone(),
    }
}

/// Applies one `key=value` override to the TOML tree, creating intermediate
/// tables as needed. The value is parsed as TOML; anything that does not
/// parse (bare words, paths) is taken as a string.
fn apply_override(tree: &mut toml::Value, entry: &str) -> Result<()> {
    let (raw_key, raw_value) = entry.split_once('=').ok_or_else(|| Error::InvalidConfig {
        key: entry.into(),
        reason: "override must look like key=value".into(),
    })?;
    let raw_key = raw_key.trim();
    if raw_key.is_empty() {
        return Err(Error::InvalidConfig { key: entry.into(), reason: "empty key".into() });
    }
    let canonical = KEY_ALIASES
        .iter()
        .find(|(alias, _)| *alias == raw_key)
        .map_or(raw_key, |(_, target)| *target);
    let value = parse_override_value(raw_value.trim());

    let mut node = tree;
    let segments: Vec<&str> = canonical.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            return Err(Error::InvalidConfig { key: canonical.into(), reason: "empty key segment".into() });
        }
        let table = node.as_table_mut().ok_or_else(|| Error::InvalidConfig {
            key: canonical.into(),
            reason: format!("`{}` is not a table", segments[..i].join(".")),
        })?;
        if i + 1 == segments.len() {
            table.insert((*segment).to_string(), value);
            return Ok(());
        }
        node = table
            .entry((*segment).to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    unreachable!("split('.') yields at least one segment");
}

fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("x = {raw}");
    match wrapped.parse::<toml::Value>() {
        Ok(toml::Value::Table(mut t)) => t.remove("x").expect("wrapped key present"),
        _ => toml::Value::String(raw.to_string()),
    }
}
