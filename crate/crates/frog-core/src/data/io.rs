//! Dataset file ingestion and serialization.
//!
//! Three files describe a dataset:
//!   - `users.jsonl`: one JSON object per line with fields `id`, `profile`,
//!     `image`, `text` (arrays of reals);
//!   - `edges.csv`: headerless rows `src,dst,day`;
//!   - `instances.csv`: headerless rows `src,dst,label,day` followed by
//!     pair-feature columns.
//!
//! All files are UTF-8 with LF line endings. User ids in the files are
//! external ids: arbitrary u64 values. Loading re-indexes them densely to
//! 0..n-1 in file order and keeps the originals in `Dataset::external_ids`;
//! writing maps back, so a load/write cycle preserves external ids.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write → load cycle reproduces every value bit for bit.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FriendshipGraph;

use super::{Dataset, InteractionLog, PairInstance, UserRecord};

pub const USERS_FILE: &str = "users.jsonl";
pub const EDGES_FILE: &str = "edges.csv";
pub const INSTANCES_FILE: &str = "instances.csv";

/// What a load saw: counts plus how many duplicate rows were merged.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub users: usize,
    pub edges: usize,
    /// Undirected edge rows merged into an existing edge.
    pub duplicate_edges: usize,
    pub instances: usize,
}

#[derive(Serialize, Deserialize)]
struct UserLine {
    id: u64,
    profile: Vec<f64>,
    image: Vec<f64>,
    text: Vec<f64>,
}

fn data_err(file: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::DataFormat { file: file.to_path_buf(), line, reason: reason.into() }
}

fn parse_field<T: std::str::FromStr>(field: &str, name: &str, file: &Path, line: usize) -> Result<T> {
    field
        .trim()
        .parse::<T>()
        .map_err(|_| data_err(file, line, format!("invalid {name}: {field:?}")))
}

/// Lines of a text file, 1-based, blank lines skipped.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push((idx + 1, line));
        }
    }
    Ok(out)
}

fn check_finite(values: &[f64], what: &str, file: &Path, line: usize) -> Result<()> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(data_err(file, line, format!("non-finite value in {what}")));
    }
    Ok(())
}

fn load_users(path: &Path) -> Result<(Vec<UserRecord>, Vec<u64>, HashMap<u64, u32>)> {
    let mut users = Vec::new();
    let mut external = Vec::new();
    let mut index: HashMap<u64, u32> = HashMap::new();
    let mut dims: Option<(usize, usize, usize)> = None;
    for (line_no, line) in read_lines(path)? {
        let parsed: UserLine = serde_json::from_str(&line)
            .map_err(|e| data_err(path, line_no, format!("invalid user record: {e}")))?;
        if index.contains_key(&parsed.id) {
            return Err(data_err(path, line_no, format!("duplicate user id {}", parsed.id)));
        }
        let d = (parsed.profile.len(), parsed.image.len(), parsed.text.len());
        match dims {
            None => dims = Some(d),
            Some(expect) if expect != d => {
                return Err(data_err(
                    path,
                    line_no,
                    format!("modality dims {d:?} differ from first record {expect:?}"),
                ))
            }
            Some(_) => {}
        }
        check_finite(&parsed.profile, "profile", path, line_no)?;
        check_finite(&parsed.image, "image", path, line_no)?;
        check_finite(&parsed.text, "text", path, line_no)?;
        let dense = users.len() as u32;
        index.insert(parsed.id, dense);
        external.push(parsed.id);
        users.push(UserRecord { id: dense, profile: parsed.profile, image: parsed.image, text: parsed.text });
    }
    if users.is_empty() {
        return Err(data_err(path, 0, "no user records"));
    }
    Ok((users, external, index))
}

fn resolve_id(index: &HashMap<u64, u32>, raw: u64, file: &Path, line: usize) -> Result<u32> {
    index.get(&raw).copied().ok_or_else(|| data_err(file, line, format!("unknown user id {raw}")))
}

fn load_edges(path: &Path, index: &HashMap<u64, u32>, n: usize) -> Result<(FriendshipGraph, usize)> {
    let mut graph = FriendshipGraph::new(n);
    let mut duplicates = 0;
    for (line_no, line) in read_lines(path)? {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(data_err(path, line_no, format!("expected src,dst,day, got {} fields", parts.len())));
        }
        let src = resolve_id(index, parse_field(parts[0], "src", path, line_no)?, path, line_no)?;
        let dst = resolve_id(index, parse_field(parts[1], "dst", path, line_no)?, path, line_no)?;
        let day: u16 = parse_field(parts[2], "day", path, line_no)?;
        if src == dst {
            return Err(data_err(path, line_no, format!("self-loop on user id {}", parts[0].trim())));
        }
        if !graph.add_edge(src, dst, day) {
            duplicates += 1;
        }
    }
    Ok((graph, duplicates))
}

fn load_instances(path: &Path, index: &HashMap<u64, u32>) -> Result<Vec<PairInstance>> {
    let mut instances = Vec::new();
    let mut feat_dim: Option<usize> = None;
    for (line_no, line) in read_lines(path)? {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() < 4 {
            return Err(data_err(path, line_no, format!("expected src,dst,label,day,…, got {} fields", parts.len())));
        }
        let src = resolve_id(index, parse_field(parts[0], "src", path, line_no)?, path, line_no)?;
        let dst = resolve_id(index, parse_field(parts[1], "dst", path, line_no)?, path, line_no)?;
        let label: u8 = parse_field(parts[2], "label", path, line_no)?;
        if label > 1 {
            return Err(data_err(path, line_no, format!("label must be 0 or 1, got {label}")));
        }
        if src == dst {
            return Err(data_err(path, line_no, "instance with src == dst"));
        }
        let day: u16 = parse_field(parts[3], "day", path, line_no)?;
        let mut pair_feats = Vec::with_capacity(parts.len() - 4);
        for field in &parts[4..] {
            pair_feats.push(parse_field::<f64>(field, "pair feature", path, line_no)?);
        }
        check_finite(&pair_feats, "pair features", path, line_no)?;
        match feat_dim {
            None => feat_dim = Some(pair_feats.len()),
            Some(expect) if expect != pair_feats.len() => {
                return Err(data_err(
                    path,
                    line_no,
                    format!("pair-feature count {} differs from first row {expect}", pair_feats.len()),
                ))
            }
            Some(_) => {}
        }
        instances.push(PairInstance { src, dst, label, day, pair_feats });
    }
    Ok(instances)
}

/// Loads a dataset from its three files, densely re-indexing user ids.
///
/// The interaction log is not part of the on-disk format; co-interaction
/// counts ride along inside the instance feature columns, so the loaded
/// log is empty.
pub fn load_dataset(user_file: &Path, edge_file: &Path, instance_file: &Path) -> Result<(Dataset, LoadReport)> {
    let (users, external_ids, index) = load_users(user_file)?;
    let (graph, duplicate_edges) = load_edges(edge_file, &index, users.len())?;
    let instances = load_instances(instance_file, &index)?;
    let report = LoadReport {
        users: users.len(),
        edges: graph.edge_count(),
        duplicate_edges,
        instances: instances.len(),
    };
    let dataset = Dataset { graph, users, instances, interactions: InteractionLog::new(), external_ids };
    Ok((dataset, report))
}

/// Writes `users.jsonl`, `edges.csv`, and `instances.csv` under `dir`,
/// creating it if needed. Uses external ids throughout.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let ext = |dense: u32| ds.external_ids[dense as usize];

    let mut users = BufWriter::new(fs::File::create(dir.join(USERS_FILE))?);
    for u in &ds.users {
        let line = UserLine {
            id: ext(u.id),
            profile: u.profile.clone(),
            image: u.image.clone(),
            text: u.text.clone(),
        };
        serde_json::to_writer(&mut users, &line)?;
        users.write_all(b"\n")?;
    }
    users.flush()?;

    let mut edges = BufWriter::new(fs::File::create(dir.join(EDGES_FILE))?);
    for (u, v, day) in ds.graph.edges_sorted() {
        writeln!(edges, "{},{},{}", ext(u), ext(v), day)?;
    }
    edges.flush()?;

    let mut instances = BufWriter::new(fs::File::create(dir.join(INSTANCES_FILE))?);
    for inst in &ds.instances {
        write!(instances, "{},{},{},{}", ext(inst.src), ext(inst.dst), inst.label, inst.day)?;
        for f in &inst.pair_feats {
            write!(instances, ",{f}")?;
        }
        instances.write_all(b"\n")?;
    }
    instances.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SynthConfig};

    fn tiny_dataset() -> Dataset {
        let cfg = SynthConfig { n: 60, ..SynthConfig::default() };
        generate_synthetic(&cfg, 42).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let ds = tiny_dataset();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(&ds, dir.path()).unwrap();
        let (loaded, report) = load_dataset(
            &dir.path().join(USERS_FILE),
            &dir.path().join(EDGES_FILE),
            &dir.path().join(INSTANCES_FILE),
        )
        .unwrap();
        assert_eq!(loaded.users, ds.users);
        assert_eq!(loaded.instances, ds.instances);
        assert_eq!(loaded.graph.edges_sorted(), ds.graph.edges_sorted());
        assert_eq!(loaded.external_ids, ds.external_ids);
        assert_eq!(report.duplicate_edges, 0);
        assert_eq!(report.users, ds.users.len());

        // A second write of the loaded dataset is byte-identical.
        let dir2 = tempfile::tempdir().unwrap();
        write_dataset(&loaded, dir2.path()).unwrap();
        for name in [USERS_FILE, EDGES_FILE, INSTANCES_FILE] {
            let a = fs::read(dir.path().join(name)).unwrap();
            let b = fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs after round trip");
        }
    }

    #[test]
    fn external_ids_are_remapped_densely() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(USERS_FILE),
            concat!(
                "{\"id\":900,\"profile\":[1.0],\"image\":[0.5],\"text\":[0.25]}\n",
                "{\"id\":7,\"profile\":[2.0],\"image\":[1.5],\"text\":[0.75]}\n",
            ),
        )
        .unwrap();
        fs::write(dir.path().join(EDGES_FILE), "900,7,1\n").unwrap();
        fs::write(dir.path().join(INSTANCES_FILE), "7,900,1,8,0,0\n").unwrap();
        let (ds, _) = load_dataset(
            &dir.path().join(USERS_FILE),
            &dir.path().join(EDGES_FILE),
            &dir.path().join(INSTANCES_FILE),
        )
        .unwrap();
        assert_eq!(ds.external_ids, vec![900, 7]);
        assert_eq!(ds.users[0].id, 0);
        assert!(ds.graph.has_edge(0, 1));
        assert_eq!(ds.instances[0].src, 1);
        assert_eq!(ds.instances[0].dst, 0);
    }

    #[test]
    fn unknown_user_in_instance_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(USERS_FILE), "{\"id\":1,\"profile\":[0.0],\"image\":[0.0],\"text\":[0.0]}\n").unwrap();
        fs::write(dir.path().join(EDGES_FILE), "").unwrap();
        fs::write(dir.path().join(INSTANCES_FILE), "1,2,1,8\n").unwrap();
        let err = load_dataset(
            &dir.path().join(USERS_FILE),
            &dir.path().join(EDGES_FILE),
            &dir.path().join(INSTANCES_FILE),
        )
        .unwrap_err();
        match err {
            Error::DataFormat { file, line, reason } => {
                assert!(file.ends_with(INSTANCES_FILE));
                assert_eq!(line, 1);
                assert!(reason.contains("unknown user id 2"), "{reason}");
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn duplicate_edges_are_merged_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join(USERS_FILE),
            concat!(
                "{\"id\":0,\"profile\":[0.0],\"image\":[0.0],\"text\":[0.0]}\n",
                "{\"id\":1,\"profile\":[0.0],\"image\":[0.0],\"text\":[0.0]}\n",
            ),
        )
        .unwrap();
        fs::write(dir.path().join(EDGES_FILE), "0,1,1\n1,0,2\n0,1,1\n").unwrap();
        fs::write(dir.path().join(INSTANCES_FILE), "").unwrap();
        let (ds, report) = load_dataset(
            &dir.path().join(USERS_FILE),
            &dir.path().join(EDGES_FILE),
            &dir.path().join(INSTANCES_FILE),
        )
        .unwrap();
        assert_eq!(ds.graph.edge_count(), 1);
        assert_eq!(report.duplicate_edges, 2);
        assert_eq!(ds.graph.edge_day(0, 1), Some(1));
    }

    #[test]
    fn malformed_rows_are_rejected_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(USERS_FILE), "{\"id\":0,\"profile\":[0.0],\"image\":[0.0],\"text\":[0.0]}\n").unwrap();
        // wrong field count
        fs::write(dir.path().join(EDGES_FILE), "0,0\n").unwrap();
        fs::write(dir.path().join(INSTANCES_FILE), "").unwrap();
        let err = load_dataset(
            &dir.path().join(USERS_FILE),
            &dir.path().join(EDGES_FILE),
            &dir.path().join(INSTANCES_FILE),
        )
        .unwrap_err();
        match err {
            Error::DataFormat { line, .. } => assert_eq!(line, 1),
            other => panic!("wrong error: {other}"),
        }

        // inconsistent modality dims across user records
        fs::write(
            dir.path().join(USERS_FILE),
            concat!(
                "{\"id\":0,\"profile\":[0.0],\"image\":[0.0],\"text\":[0.0]}\n",
                "{\"id\":1,\"profile\":[0.0,1.0],\"image\":[0.0],\"text\":[0.0]}\n",
            ),
        )
        .unwrap();
        fs::write(dir.path().join(EDGES_FILE), "").unwrap();
        let err = load_dataset(
            &dir.path().join(USERS_FILE),
            &dir.path().join(EDGES_FILE),
            &dir.path().join(INSTANCES_FILE),
        )
        .unwrap_err();
        match err {
            Error::DataFormat { line, reason, .. } => {
                assert_eq!(line, 2);
                assert!(reason.contains("differ"), "{reason}");
            }
            other => panic!("wrong error: {other}"),
        }
    }
}
