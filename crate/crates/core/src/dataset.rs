//! Trace datasets and the `dataset.json` format.

use crate::error::{Error, Result};
use crate::hardlik::Trace;
use crate::matrix::BoolMatrix;
use crate::poset::PartialOrder;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const DATASET_SCHEMA: &str = "pograd-dataset-1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub items: Vec<String>,
    traces: Vec<Trace>,
    splits: Vec<Split>,
    pub ground_truth: Option<PartialOrder>,
    /// Incomparable-pair coverage of the training traces, when known.
    pub train_ip_cov: Option<f64>,
}

impl Dataset {
    pub fn new(items: Vec<String>) -> Self {
        Self { items, traces: Vec::new(), splits: Vec::new(), ground_truth: None, train_ip_cov: None }
    }

    /// Items named `"0"`, `"1"`, ...
    pub fn with_numbered_items(n: usize) -> Self {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn from_traces(n_items: usize, train: Vec<Trace>) -> Result<Self> {
        let mut ds = Self::with_numbered_items(n_items);
        for t in train {
            ds.push(t, Split::Train)?;
        }
        Ok(ds)
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn push(&mut self, trace: Trace, split: Split) -> Result<()> {
        let idx = self.traces.len();
        trace.validate(self.n_items()).map_err(|e| Error::InvalidDataset { trace: Some(idx), message: e.to_string() })?;
        self.traces.push(trace);
        self.splits.push(split);
        Ok(())
    }

    pub fn set_ground_truth(&mut self, po: PartialOrder) -> Result<()> {
        if po.n_items() != self.n_items() {
            return Err(Error::InvalidDataset { trace: None, message: "ground truth size differs from item count".into() });
        }
        self.ground_truth = Some(po);
        Ok(())
    }

    pub fn traces(&self) -> &[Trace] {
        &self.traces
    }

    pub fn split_of(&self, i: usize) -> Split {
        self.splits[i]
    }

    pub fn traces_in(&self, split: Split) -> Vec<Trace> {
        self.traces.iter().zip(&self.splits).filter(|(_, &s)| s == split).map(|(t, _)| t.clone()).collect()
    }

    pub fn train(&self) -> Vec<Trace> {
        self.traces_in(Split::Train)
    }

    pub fn test(&self) -> Vec<Trace> {
        self.traces_in(Split::Test)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            schema: DATASET_SCHEMA.to_string(),
            items: self.items.clone(),
            traces: self
                .traces
                .iter()
                .zip(&self.splits)
                .map(|(t, &split)| TraceRecord { choice_set: t.choice_set().to_vec(), order: t.order().to_vec(), split })
                .collect(),
            ground_truth_closure: self
                .ground_truth
                .as_ref()
                .map(|po| po.matrix().to_rows().into_iter().map(|r| r.into_iter().map(u8::from).collect()).collect()),
            train_ip_cov: self.train_ip_cov,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        if file.schema != DATASET_SCHEMA {
            return Err(Error::InvalidDataset { trace: None, message: format!("unsupported schema {:?}", file.schema) });
        }
        let mut names = file.items.clone();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDataset { trace: None, message: "duplicate item names".into() });
        }
        let mut ds = Dataset::new(file.items);
        for (i, rec) in file.traces.into_iter().enumerate() {
            let t = Trace::with_choice_set(rec.choice_set, rec.order)
                .map_err(|e| Error::InvalidDataset { trace: Some(i), message: e.to_string() })?;
            ds.push(t, rec.split)?;
        }
        if let Some(rows) = file.ground_truth_closure {
            let n = ds.n_items();
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidDataset { trace: None, message: format!("ground truth must be {n}x{n}") });
            }
            if rows.iter().flatten().any(|&v| v > 1) {
                return Err(Error::InvalidDataset { trace: None, message: "ground truth entries must be 0 or 1".into() });
            }
            let m = BoolMatrix::from_rows(&rows.iter().map(|r| r.iter().map(|&v| v == 1).collect()).collect::<Vec<_>>());
            let po =
                PartialOrder::from_closure(m).map_err(|e| Error::InvalidDataset { trace: None, message: format!("ground truth: {e}") })?;
            ds.ground_truth = Some(po);
        }
        ds.train_ip_cov = file.train_ip_cov;
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }
}

#[derive(Serialize, Deserialize)]
struct TraceRecord {
    choice_set: Vec<usize>,
    order: Vec<usize>,
    split: Split,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    schema: String,
    items: Vec<String>,
    traces: Vec<TraceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ground_truth_closure: Option<Vec<Vec<u8>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_ip_cov: Option<f64>,
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"schema":"pograd-dataset-1","items":["a","b"],"traces":[{"choice_set":[0,1],"order":[1,0],"split":"train"}]}"#;

    #[test]
    fn minimal_file_round_trips() {
        let ds = Dataset::from_json(MINIMAL).unwrap();
        assert_eq!(ds.n_items(), 2);
        assert_eq!(ds.ground_truth, None);
        let canonical = ds.to_json().unwrap();
        let again = Dataset::from_json(&canonical).unwrap().to_json().unwrap();
        assert_eq!(canonical, again);
    }

    #[test]
    fn duplicate_index_names_the_trace() {
        let bad = MINIMAL.replace("\"order\":[1,0]", "\"order\":[1,1]");
        match Dataset::from_json(&bad) {
            Err(Error::InvalidDataset { trace: Some(0), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_and_bad_truth_are_rejected() {
        let bad = MINIMAL.replace("[0,1],\"order\":[1,0]", "[0,5],\"order\":[5,0]");
        assert!(matches!(Dataset::from_json(&bad), Err(Error::InvalidDataset { trace: Some(0), .. })));
        let cyclic = MINIMAL.replace("}]}", "}],\"ground_truth_closure\":[[0,1],[1,0]]}");
        assert!(matches!(Dataset::from_json(&cyclic), Err(Error::InvalidDataset { trace: None, .. })));
        let ragged = MINIMAL.replace("}]}", "}],\"ground_truth_closure\":[[0,1]]}");
        assert!(Dataset::from_json(&ragged).is_err());
        let wrong = MINIMAL.replace("pograd-dataset-1", "other");
        assert!(Dataset::from_json(&wrong).is_err());
    }

    #[test]
    fn save_and_load_with_truth_and_splits() {
        let dir = tempfile::tempdir().unwrap();
        let mut ds = Dataset::with_numbered_items(3);
        ds.push(Trace::new(vec![0, 1, 2]).unwrap(), Split::Train).unwrap();
        ds.push(Trace::with_choice_set(vec![0, 2], vec![2, 0]).unwrap(), Split::Test).unwrap();
        ds.set_ground_truth(PartialOrder::from_edges(3, &[(0, 1)]).unwrap()).unwrap();
        ds.train_ip_cov = Some(0.5);
        let path = dir.path().join("dataset.json");
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.train().len(), 1);
        assert_eq!(back.test()[0].order(), &[2, 0]);
    }
}
