//! Retained posterior or variational draws and their on-disk form.
//!
//! Draws are stored one JSON object per line so evaluation can stream them;
//! run metadata goes to a separate summary document.

use crate::dataset::write_atomic;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::ModelParams;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

pub const FIT_SUMMARY_SCHEMA: &str = "pograd-fit-1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    HardMcmc,
    RelaxedHmc,
    FullrankVi,
    Majority,
    Softdag,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::HardMcmc => "hard_mcmc",
            Method::RelaxedHmc => "relaxed_hmc",
            Method::FullrankVi => "fullrank_vi",
            Method::Majority => "majority",
            Method::Softdag => "softdag",
        }
    }

    /// Whether the method produces posterior draws.
    pub fn is_bayesian(self) -> bool {
        matches!(self, Method::HardMcmc | Method::RelaxedHmc | Method::FullrankVi)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard_mcmc" => Ok(Method::HardMcmc),
            "relaxed_hmc" => Ok(Method::RelaxedHmc),
            "fullrank_vi" => Ok(Method::FullrankVi),
            "majority" => Ok(Method::Majority),
            "softdag" => Ok(Method::Softdag),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub params: ModelParams,
    pub log_posterior: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawMeta {
    pub method: Method,
    pub seed: u64,
    pub runtime_seconds: f64,
    /// Per-iteration acceptance probabilities (samplers) or ELBO estimates (VI).
    pub trail: Vec<f64>,
    pub acceptance_rate: Option<f64>,
    pub divergences: usize,
    /// Soft-min temperature of the fitted model.
    pub tau: f64,
}

impl DrawMeta {
    pub fn new(method: Method, seed: u64, tau: f64) -> Self {
        Self { method, seed, runtime_seconds: 0.0, trail: Vec::new(), acceptance_rate: None, divergences: 0, tau }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DrawSet {
    draws: Vec<Draw>,
    pub meta: DrawMeta,
}

impl DrawSet {
    pub fn new(draws: Vec<Draw>, meta: DrawMeta) -> Result<Self> {
        let first = draws.first().ok_or_else(|| Error::InvalidArgument("a draw set needs at least one draw".into()))?;
        let shape = (first.params.n_items(), first.params.dim());
        if let Some(i) = draws.iter().position(|d| (d.params.n_items(), d.params.dim()) != shape) {
            return Err(Error::DimensionMismatch(format!("draw {i} differs in shape from draw 0")));
        }
        Ok(Self { draws, meta })
    }

    pub fn draws(&self) -> &[Draw] {
        &self.draws
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn n_items(&self) -> usize {
        self.draws[0].params.n_items()
    }

    pub fn dim(&self) -> usize {
        self.draws[0].params.dim()
    }

    /// Concatenates chains in chain order.
    pub fn merge(mut sets: Vec<DrawSet>) -> Result<DrawSet> {
        if sets.is_empty() {
            return Err(Error::InvalidArgument("nothing to merge".into()));
        }
        let mut meta = sets[0].meta.clone();
        meta.runtime_seconds = sets.iter().map(|s| s.meta.runtime_seconds).fold(0.0, f64::max);
        meta.divergences = sets.iter().map(|s| s.meta.divergences).sum();
        let rates: Vec<f64> = sets.iter().filter_map(|s| s.meta.acceptance_rate).collect();
        meta.acceptance_rate = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
        meta.trail = sets.iter().flat_map(|s| s.meta.trail.iter().copied()).collect();
        let draws = sets.iter_mut().flat_map(|s| std::mem::take(&mut s.draws)).collect();
        DrawSet::new(draws, meta)
    }

    /// One JSON record per draw.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.draws {
            let rec = DrawRecord {
                n_items: d.params.n_items(),
                dim: d.params.dim(),
                z: d.params.z.as_slice().to_vec(),
                rho: d.params.rho,
                beta: d.params.beta,
                gamma: d.params.gamma,
                log_posterior: finite_or_none(d.log_posterior),
            };
            out.push_str(&serde_json::to_string(&rec).expect("draw records serialise"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, draws_path: &Path, summary_path: &Path) -> Result<()> {
        write_atomic(draws_path, self.to_jsonl().as_bytes())?;
        let summary = FitSummary { schema: FIT_SUMMARY_SCHEMA.to_string(), n_draws: self.len(), meta: self.meta.clone() };
        write_atomic(summary_path, serde_json::to_string_pretty(&summary)?.as_bytes())
    }

    pub fn read(draws_path: &Path, summary_path: &Path) -> Result<DrawSet> {
        let summary: FitSummary = serde_json::from_str(&std::fs::read_to_string(summary_path)?)?;
        if summary.schema != FIT_SUMMARY_SCHEMA {
            return Err(Error::InvalidArgument(format!("unsupported fit summary schema {:?}", summary.schema)));
        }
        let file = std::fs::File::open(draws_path)?;
        let mut draws = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DrawRecord = serde_json::from_str(&line)?;
            if rec.z.len() != rec.n_items * rec.dim {
                return Err(Error::DimensionMismatch(format!("draw {} has {} coordinates", draws.len(), rec.z.len())));
            }
            draws.push(Draw {
                params: ModelParams { z: Matrix::from_vec(rec.n_items, rec.dim, rec.z), rho: rec.rho, beta: rec.beta, gamma: rec.gamma },
                log_posterior: rec.log_posterior.unwrap_or(f64::NEG_INFINITY),
            });
        }
        DrawSet::new(draws, summary.meta)
    }
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Serialize, Deserialize)]
struct DrawRecord {
    n_items: usize,
    dim: usize,
    z: Vec<f64>,
    rho: f64,
    beta: f64,
    gamma: f64,
    log_posterior: Option<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct FitSummary {
    pub schema: String,
    pub n_draws: usize,
    #[serde(flatten)]
    pub meta: DrawMeta,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set() -> DrawSet {
        let draws = (0..3)
            .map(|i| Draw {
                params: ModelParams {
                    z: Matrix::from_vec(2, 2, vec![0.1 * i as f64, -1.0 / 3.0, 2.5e-17, 7.0]),
                    rho: 0.37,
                    beta: 1.0 / 7.0,
                    gamma: 2.0,
                },
                log_posterior: -12.345678901234567,
            })
            .collect();
        let mut meta = DrawMeta::new(Method::RelaxedHmc, 7, 0.3);
        meta.trail = vec![0.5, 0.9];
        DrawSet::new(draws, meta).unwrap()
    }

    #[test]
    fn files_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let set = sample_set();
        let (dp, sp) = (dir.path().join("draws.jsonl"), dir.path().join("fit_summary.json"));
        set.write(&dp, &sp).unwrap();
        let back = DrawSet::read(&dp, &sp).unwrap();
        assert_eq!(back, set);
        assert!(std::fs::read_to_string(&sp).unwrap().contains(FIT_SUMMARY_SCHEMA));
    }

    #[test]
    fn empty_and_ragged_sets_are_rejected() {
        assert!(DrawSet::new(vec![], DrawMeta::new(Method::HardMcmc, 0, 0.3)).is_err());
        let mut set = sample_set();
        let mut odd = set.draws[0].clone();
        odd.params.z = Matrix::zeros(3, 2);
        set.draws.push(odd);
        assert!(DrawSet::new(set.draws.clone(), set.meta.clone()).is_err());
    }

    #[test]
    fn method_names_parse() {
        for m in [Method::HardMcmc, Method::RelaxedHmc, Method::FullrankVi, Method::Majority, Method::Softdag] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("nuts".parse::<Method>().is_err());
    }
}
