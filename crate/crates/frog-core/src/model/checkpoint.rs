//! Versioned model checkpoints: JSON container with the shape and every
//! parameter tensor by id. Values are stored as f64; an f64 model
//! round-trips bit for bit (shortest round-trip float formatting plus exact
//! parsing), and an f32 model round-trips exactly because every f32 is
//! representable as f64.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FrogModel, ModelShape};
use crate::error::{Error, Result};
use crate::numerics::{Real, ParamSet, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamEntry {
    id: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    /// Precision the model was trained in ("f32"/"f64"); informational.
    precision: String,
    shape: ModelShape,
    params: Vec<ParamEntry>,
}

pub fn save_checkpoint<T: Real>(model: &FrogModel<T>, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        precision: T::NAME.to_string(),
        shape: model.shape.clone(),
        params: model
            .params
            .iter()
            .map(|p| ParamEntry {
                id: p.id.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                data: p.value.to_f64_vec(),
            })
            .collect(),
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let writer = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer(writer, &file)?;
    Ok(())
}

/// Loads a checkpoint into precision `T`, validating version and that the
/// parameter set matches the stored shape exactly.
pub fn load_checkpoint<T: Real>(path: &Path) -> Result<FrogModel<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let file: CheckpointFile = serde_json::from_reader(reader)?;
    if file.format_version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: format version {} unsupported (expected {CHECKPOINT_VERSION})",
            path.display(),
            file.format_version
        )));
    }
    file.shape.validate().map_err(|e| Error::Checkpoint(format!("{}: bad shape: {e}", path.display())))?;

    // Rebuild from the shape to know exactly which parameters must exist.
    let reference = FrogModel::<T>::new(file.shape.clone(), 0)
        .map_err(|e| Error::Checkpoint(format!("{}: shape does not build: {e}", path.display())))?;

    let mut params = ParamSet::new();
    for entry in &file.params {
        if entry.data.len() != entry.rows * entry.cols {
            return Err(Error::Checkpoint(format!(
                "{}: parameter {} claims {}x{} but holds {} values",
                path.display(),
                entry.id,
                entry.rows,
                entry.cols,
                entry.data.len()
            )));
        }
        if !entry.data.iter().all(|x| x.is_finite()) {
            return Err(Error::Checkpoint(format!("{}: non-finite value in {}", path.display(), entry.id)));
        }
        let tensor = Tensor::<T>::from_f64(entry.rows, entry.cols, &entry.data);
        params
            .insert(entry.id.clone(), tensor)
            .map_err(|_| Error::Checkpoint(format!("{}: duplicate parameter {}", path.display(), entry.id)))?;
    }

    for expected in reference.params.iter() {
        let got = params.get(&expected.id).map_err(|_| {
            Error::Checkpoint(format!("{}: missing parameter {}", path.display(), expected.id))
        })?;
        if got.value.shape() != expected.value.shape() {
            return Err(Error::Checkpoint(format!(
                "{}: parameter {} has shape {:?}, shape requires {:?}",
                path.display(),
                expected.id,
                got.value.shape(),
                expected.value.shape()
            )));
        }
    }
    if params.len() != reference.params.len() {
        return Err(Error::Checkpoint(format!(
            "{}: {} parameters stored, shape requires {}",
            path.display(),
            params.len(),
            reference.params.len()
        )));
    }

    Ok(FrogModel { shape: file.shape, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{shape_for_dataset, Variant};

    fn small_model(seed: u64) -> FrogModel<f64> {
        let cfg = crate::data::SynthConfig {
            n: 40,
            profile_dim: 3,
            image_dim: 2,
            text_dim: 2,
            ..Default::default()
        };
        let ds = crate::data::generate_synthetic(&cfg, 1).unwrap();
        let shape = shape_for_dataset(&ds, 6, 5, 4, Variant::Full);
        FrogModel::new(shape, seed).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact_in_f64() {
        let model = small_model(11);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&model, &path).unwrap();
        let loaded: FrogModel<f64> = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.shape, model.shape);
        for (a, b) in model.params.iter().zip(loaded.params.iter()) {
            assert_eq!(a.id, b.id);
            let bits_a: Vec<u64> = a.value.as_slice().iter().map(|x| x.to_bits()).collect();
            let bits_b: Vec<u64> = b.value.as_slice().iter().map(|x| x.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "parameter {} drifted", a.id);
        }
    }

    #[test]
    fn f32_round_trip_is_exact_too() {
        let model = small_model(13).cast::<f32>();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model32.json");
        save_checkpoint(&model, &path).unwrap();
        let loaded: FrogModel<f32> = load_checkpoint(&path).unwrap();
        for (a, b) in model.params.iter().zip(loaded.params.iter()) {
            assert_eq!(
                a.value.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                b.value.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                "parameter {} drifted",
                a.id
            );
        }
    }

    #[test]
    fn version_and_missing_params_are_rejected() {
        let model = small_model(17);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&model, &path).unwrap();

        // Corrupt the version.
        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replace("\"format_version\":1", "\"format_version\":99")).unwrap();
        let err = load_checkpoint::<f64>(&path).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{err}");

        // Drop a parameter.
        save_checkpoint(&model, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut file: serde_json::Value = serde_json::from_str(&text).unwrap();
        let arr = file["params"].as_array_mut().unwrap();
        arr.pop();
        fs::write(&path, serde_json::to_string(&file).unwrap()).unwrap();
        let err = load_checkpoint::<f64>(&path).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{err}");
    }
}
