//! File formats: dataset CSV with a TOML metadata sidecar, score CSVs, and
//! TOML round-trips for configs, plans, geometries, and model checkpoints.
//!
//! Datasets serialize as `row,group,true_group,y,role:g1..,role:c1..,role:o1..`
//! with one column per feature, named by the role's short letter and its
//! ordinal within that role. Floats use the shortest exact decimal form, so a
//! write/read cycle is lossless.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::data::{Dataset, DatasetMeta, FeatureRole, GroupLabel};
use crate::error::{Error, Result};
use crate::metrics::ScoreVector;

/// Sidecar path convention: `runs/data.csv` maps to `runs/data.meta.toml`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.toml")
}

fn role_headers(roles: &[FeatureRole]) -> Vec<String> {
    let mut counts = [0usize; 3];
    roles
        .iter()
        .map(|r| {
            let idx = match r {
                FeatureRole::Proxy => 0,
                FeatureRole::Incriminating => 1,
                FeatureRole::Occlusion => 2,
            };
            counts[idx] += 1;
            format!("role:{}{}", r.short(), counts[idx])
        })
        .collect()
}

/// Writes the dataset CSV and its metadata sidecar.
pub fn write_dataset(ds: &Dataset, csv_path: &Path) -> Result<()> {
    if let Some(parent) = csv_path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::new();
    out.push_str("row,group,true_group,y");
    for h in role_headers(&ds.roles) {
        out.push(',');
        out.push_str(&h);
    }
    out.push('\n');
    for i in 0..ds.n_rows() {
        out.push_str(&format!("{i},{},{},{}", ds.group[i], ds.true_group[i], ds.y[i] as u8));
        for v in ds.row(i) {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    fs::write(csv_path, out)?;
    save_toml(&ds.meta, &sidecar_path(csv_path))?;
    Ok(())
}

/// Reads a dataset CSV; the metadata sidecar is picked up when present.
pub fn read_dataset(csv_path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(csv_path)?;
    let headers = reader.headers()?.clone();
    let fixed = ["row", "group", "true_group", "y"];
    if headers.len() < fixed.len() + 1 {
        return Err(Error::Parse("dataset csv needs at least one feature column".into()));
    }
    for (i, name) in fixed.iter().enumerate() {
        if &headers[i] != *name {
            return Err(Error::Parse(format!(
                "expected column {i} to be {name:?}, found {:?}",
                &headers[i]
            )));
        }
    }
    let mut roles = Vec::new();
    for h in headers.iter().skip(fixed.len()) {
        let tail = h
            .strip_prefix("role:")
            .ok_or_else(|| Error::Parse(format!("feature column {h:?} lacks role: prefix")))?;
        let role = match tail.chars().next() {
            Some('g') => FeatureRole::Proxy,
            Some('c') => FeatureRole::Incriminating,
            Some('o') => FeatureRole::Occlusion,
            _ => return Err(Error::Parse(format!("unknown role in column {h:?}"))),
        };
        roles.push(role);
    }
    let n_cols = roles.len();
    let mut features = Vec::new();
    let mut group = Vec::new();
    let mut true_group = Vec::new();
    let mut y = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() != fixed.len() + n_cols {
            return Err(Error::Parse(format!(
                "row has {} fields, expected {}",
                record.len(),
                fixed.len() + n_cols
            )));
        }
        group.push(GroupLabel::parse(&record[1])?);
        true_group.push(GroupLabel::parse(&record[2])?);
        y.push(match &record[3] {
            "0" => false,
            "1" => true,
            other => return Err(Error::Parse(format!("label must be 0 or 1, got {other:?}"))),
        });
        for field in record.iter().skip(fixed.len()) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("bad float {field:?} in dataset csv")))?;
            features.push(v);
        }
    }
    let meta_path = sidecar_path(csv_path);
    let meta: DatasetMeta = if meta_path.exists() {
        load_toml(&meta_path)?
    } else {
        DatasetMeta { seed: 0, scenario: "imported".to_string(), sim: None, scatter: None }
    };
    Dataset::new(features, n_cols, group, true_group, y, roles, meta)
}

/// Writes `row,score` lines.
pub fn write_scores(scores: &ScoreVector, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = String::from("row,score\n");
    for (i, s) in scores.iter().enumerate() {
        out.push_str(&format!("{i},{s}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a `row,score` CSV back into a score vector.
pub fn read_scores(path: &Path) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut scores = Vec::new();
    for record in reader.records() {
        let record = record?;
        let v: f64 = record
            .get(1)
            .ok_or_else(|| Error::Parse("score csv needs two columns".into()))?
            .parse()
            .map_err(|_| Error::Parse("bad float in score csv".into()))?;
        scores.push(v);
    }
    Ok(scores)
}

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn save_toml<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let text = toml::to_string_pretty(value)
        .map_err(|e| Error::Parse(format!("serialize {}: {e}", path.display())))?;
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{simulate, SimConfig};

    #[test]
    fn dataset_round_trip_is_lossless() {
        let ds = simulate(&SimConfig { n_per_group: 20, seed: 5, ..SimConfig::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn missing_sidecar_degrades_to_no_provenance() {
        let ds = simulate(&SimConfig { n_per_group: 5, seed: 5, ..SimConfig::default() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        write_dataset(&ds, &path).unwrap();
        std::fs::remove_file(sidecar_path(&path)).unwrap();
        let back = read_dataset(&path).unwrap();
        assert!(back.meta.sim.is_none());
        assert_eq!(back.features(), ds.features());
    }

    #[test]
    fn scores_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let scores = ScoreVector::new(vec![0.25, 1.5, 0.125], 3).unwrap();
        write_scores(&scores, &path).unwrap();
        assert_eq!(read_scores(&path).unwrap(), vec![0.25, 1.5, 0.125]);
    }

    #[test]
    fn malformed_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "row,group,wrong,y,role:g1\n0,a,a,0,1.0\n").unwrap();
        assert!(read_dataset(&path).is_err());
    }
}
