//! Command implementations and their file formats.

use crate::config::RunConfig;
use crate::error::CliError;
use pograd::baselines::majority::majority_fit;
use pograd::baselines::softdag::{softdag_fit, softdag_grid_search, softdag_step_nll};
use pograd::dataset::write_atomic;
use pograd::decode::{closure_prf, closure_probabilities, decode_closure, mae_to_reference, ClosureProbabilities};
use pograd::draws::Method;
use pograd::metrics::{ip_cov, waic, Evaluator, MetricsReport, PointwiseLogLik};
use pograd::samplers::advi::advi_fit;
use pograd::samplers::hmc::hmc_sample;
use pograd::samplers::mh::hard_mh_sample;
use pograd::synth::generate_dataset;
use pograd::{BoolMatrix, Dataset, DrawSet, Matrix, PartialOrder};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const POINT_FIT_SCHEMA: &str = "pograd-point-1";
pub const METRICS_SCHEMA: &str = "pograd-metrics-1";
pub const COMPARE_SCHEMA: &str = "pograd-compare-1";

pub const DATASET_FILE: &str = "dataset.json";
pub const DRAWS_FILE: &str = "draws.jsonl";
pub const FIT_SUMMARY_FILE: &str = "fit_summary.json";
pub const POINT_FIT_FILE: &str = "point_fit.json";
pub const CLOSURE_PROBS_FILE: &str = "closure_probabilities.csv";
pub const CLOSURE_FILE: &str = "closure.csv";
pub const HASSE_FILE: &str = "hasse_edges.csv";
pub const METRICS_JSON_FILE: &str = "metrics.json";
pub const METRICS_CSV_FILE: &str = "metrics.csv";
pub const COMPARE_FILE: &str = "compare.json";

/// Output of a point-estimate baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointFit {
    pub schema: String,
    pub method: Method,
    pub seed: u64,
    pub runtime_seconds: f64,
    pub n_items: usize,
    /// 0/1 transitive closure.
    pub closure: Vec<Vec<u8>>,
    /// Soft reachability and choice sharpness (SoftDAG only).
    pub reachability: Option<Vec<Vec<f64>>>,
    pub beta: Option<f64>,
    pub val_step_nll: Option<f64>,
    pub lambda_l1: Option<f64>,
    pub lambda_h: Option<f64>,
}

impl PointFit {
    fn new(method: Method, seed: u64, order: &PartialOrder) -> Self {
        let closure = order.matrix().to_rows().iter().map(|r| r.iter().map(|&b| u8::from(b)).collect()).collect();
        Self {
            schema: POINT_FIT_SCHEMA.to_string(),
            method,
            seed,
            runtime_seconds: 0.0,
            n_items: order.n_items(),
            closure,
            reachability: None,
            beta: None,
            val_step_nll: None,
            lambda_l1: None,
            lambda_h: None,
        }
    }

    pub fn order(&self) -> Result<PartialOrder, CliError> {
        if self.closure.len() != self.n_items || self.closure.iter().any(|r| r.len() != self.n_items || r.iter().any(|&v| v > 1)) {
            return Err(CliError::Data("point fit closure is not an n_items square 0/1 matrix".into()));
        }
        let rows: Vec<Vec<bool>> = self.closure.iter().map(|r| r.iter().map(|&v| v == 1).collect()).collect();
        PartialOrder::from_closure(BoolMatrix::from_rows(&rows)).map_err(|e| CliError::Data(format!("point fit closure: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct MetricsDoc {
    schema: String,
    #[serde(flatten)]
    report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema: String,
    pub n_items: usize,
    pub mae: f64,
    /// Pearson correlation over off-diagonal entries; `None` when either side is constant.
    pub correlation: Option<f64>,
}

/// A fit directory holds either posterior draws or a point estimate.
pub enum Fit {
    Draws(DrawSet),
    Point(PointFit),
}

impl Fit {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let point = dir.join(POINT_FIT_FILE);
        if point.exists() {
            let fit: PointFit = serde_json::from_str(&std::fs::read_to_string(&point)?)?;
            if fit.schema != POINT_FIT_SCHEMA {
                return Err(CliError::Data(format!("unsupported point fit schema {:?}", fit.schema)));
            }
            return Ok(Fit::Point(fit));
        }
        let (draws, summary) = (dir.join(DRAWS_FILE), dir.join(FIT_SUMMARY_FILE));
        if !draws.exists() || !summary.exists() {
            return Err(CliError::Data(format!(
                "{} holds neither {POINT_FIT_FILE} nor {DRAWS_FILE} with {FIT_SUMMARY_FILE}",
                dir.display()
            )));
        }
        Ok(Fit::Draws(DrawSet::read(&draws, &summary)?))
    }

    pub fn method(&self) -> Method {
        match self {
            Fit::Draws(d) => d.meta.method,
            Fit::Point(p) => p.method,
        }
    }

    pub fn n_items(&self) -> usize {
        match self {
            Fit::Draws(d) => d.n_items(),
            Fit::Point(p) => p.n_items,
        }
    }

    pub fn closure_probabilities(&self) -> Result<ClosureProbabilities, CliError> {
        match self {
            Fit::Draws(d) => Ok(closure_probabilities(d)?),
            Fit::Point(p) => Ok(ClosureProbabilities::from_order(&p.order()?)),
        }
    }

    /// Posterior fits are thresholded at `zeta`; point fits are already decoded.
    pub fn decoded(&self, zeta: f64) -> Result<PartialOrder, CliError> {
        match self {
            Fit::Draws(_) => Ok(decode_closure(&self.closure_probabilities()?, zeta)),
            Fit::Point(p) => p.order(),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    Dataset::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Synthesises a dataset into `out/dataset.json`.
pub fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<PathBuf, CliError> {
    ensure_dir(out)?;
    let synth = generate_dataset(&cfg.synth)?;
    let path = out.join(DATASET_FILE);
    synth.dataset.save(&path)?;
    eprintln!(
        "generated {} items, {} train and {} test traces, train coverage {:.3}",
        synth.dataset.n_items(),
        synth.dataset.train().len(),
        synth.dataset.test().len(),
        synth.dataset.train_ip_cov.unwrap_or(f64::NAN)
    );
    Ok(path)
}

/// Fits `cfg.method` to the training traces of `data`.
pub fn cmd_fit(cfg: &RunConfig, data: &Path, out: &Path) -> Result<(), CliError> {
    let ds = load_dataset(data)?;
    let train = ds.train();
    if train.is_empty() {
        return Err(CliError::Data("dataset has no training traces".into()));
    }
    let n = ds.n_items();
    ensure_dir(out)?;
    eprintln!("fitting {} to {} traces over {n} items", cfg.method, train.len());
    let start = Instant::now();
    match cfg.method {
        Method::HardMcmc | Method::RelaxedHmc | Method::FullrankVi => {
            let draws = match cfg.method {
                Method::HardMcmc => hard_mh_sample(&train, n, &cfg.prior, &cfg.mh)?,
                Method::RelaxedHmc => hmc_sample(&train, n, &cfg.prior, &cfg.hmc)?,
                _ => advi_fit(&train, n, &cfg.prior, &cfg.advi)?,
            };
            draws.write(&out.join(DRAWS_FILE), &out.join(FIT_SUMMARY_FILE))?;
            eprintln!("wrote {} draws in {:.1}s", draws.len(), draws.meta.runtime_seconds);
        }
        Method::Majority => {
            let order = majority_fit(&train, n, cfg.majority_theta)?;
            let mut fit = PointFit::new(Method::Majority, cfg.seed, &order);
            fit.runtime_seconds = start.elapsed().as_secs_f64();
            write_point(&fit, out)?;
        }
        Method::Softdag => {
            let sd = if cfg.softdag_grid.is_empty() {
                softdag_fit(&train, n, &cfg.softdag, cfg.softdag_validation_fraction)?
            } else {
                softdag_grid_search(&train, n, &cfg.softdag, &cfg.softdag_grid, cfg.softdag_validation_fraction)?
            };
            let mut fit = PointFit::new(Method::Softdag, cfg.seed, &sd.order);
            fit.reachability = Some(sd.reachability.to_rows());
            fit.beta = Some(sd.beta);
            fit.val_step_nll = Some(sd.val_step_nll);
            fit.lambda_l1 = Some(sd.lambda_l1);
            fit.lambda_h = Some(sd.lambda_h);
            fit.runtime_seconds = start.elapsed().as_secs_f64();
            write_point(&fit, out)?;
        }
    }
    Ok(())
}

fn write_point(fit: &PointFit, out: &Path) -> Result<(), CliError> {
    write_atomic(&out.join(POINT_FIT_FILE), serde_json::to_string_pretty(fit)?.as_bytes())?;
    Ok(())
}

/// Writes closure probabilities, the decoded closure and its cover edges.
pub fn cmd_decode(cfg: &RunConfig, fit_dir: &Path, out: &Path) -> Result<PartialOrder, CliError> {
    let fit = Fit::load(fit_dir)?;
    let probs = fit.closure_probabilities()?;
    let order = fit.decoded(cfg.zeta)?;
    ensure_dir(out)?;
    let n = probs.n_items();
    let mut csv = String::from("from,to,probability\n");
    for i in 0..n {
        for j in 0..n {
            if i != j {
                writeln!(csv, "{i},{j},{}", probs.get(i, j)).expect("writing to a String");
            }
        }
    }
    write_atomic(&out.join(CLOSURE_PROBS_FILE), csv.as_bytes())?;
    write_atomic(&out.join(CLOSURE_FILE), edge_csv(&order.matrix().edges()).as_bytes())?;
    write_atomic(&out.join(HASSE_FILE), edge_csv(&order.cover_edges()).as_bytes())?;
    eprintln!("decoded {} closure edges, {} cover edges", order.matrix().edge_count(), order.cover_edges().len());
    Ok(order)
}

fn edge_csv(edges: &[(usize, usize)]) -> String {
    let mut s = String::from("from,to\n");
    for (a, b) in edges {
        writeln!(s, "{a},{b}").expect("writing to a String");
    }
    s
}

/// Scores a fit against a dataset and appends the row to `out/metrics.csv`.
pub fn cmd_eval(cfg: &RunConfig, data: &Path, fit_dir: &Path, reference: Option<&Path>, out: &Path) -> Result<MetricsReport, CliError> {
    let ds = load_dataset(data)?;
    let fit = Fit::load(fit_dir)?;
    if fit.n_items() != ds.n_items() {
        return Err(CliError::Data(format!("fit has {} items, dataset has {}", fit.n_items(), ds.n_items())));
    }
    let (train, test) = (ds.train(), ds.test());
    let mut report = MetricsReport { method: fit.method().to_string(), ..MetricsReport::default() };
    if let Some(truth) = &ds.ground_truth {
        report.set_prf(closure_prf(&fit.decoded(cfg.zeta)?, truth)?);
        report.ip_cov = Some(ip_cov(&train, truth));
    }
    if let Some(r) = reference {
        let r = Fit::load(r)?;
        report.mae_to_reference = Some(mae_to_reference(&fit.closure_probabilities()?, &r.closure_probabilities()?)?);
    }
    match &fit {
        Fit::Draws(draws) => {
            let ev = match draws.meta.method {
                Method::HardMcmc => Evaluator::Hard,
                _ => Evaluator::Relaxed { tau: draws.meta.tau },
            };
            if !test.is_empty() {
                let pw = PointwiseLogLik::compute(draws, &test, ev)?;
                report.trace_nll = Some(pw.trace_nll());
                report.step_nll = Some(pw.step_nll());
                report.infeasible_traces = pw.infeasible_traces;
            }
            if !train.is_empty() {
                let w = waic(draws, &train, ev)?;
                report.waic = Some(w.waic);
                report.lppd = Some(w.lppd);
                report.p_waic = Some(w.p_waic);
            }
            report.runtime_seconds = draws.meta.runtime_seconds;
        }
        Fit::Point(p) => {
            if let (Some(reach), Some(beta)) = (&p.reachability, p.beta) {
                if !test.is_empty() {
                    report.step_nll = Some(softdag_step_nll(&Matrix::from_rows(reach), beta, &test));
                }
            }
            report.runtime_seconds = p.runtime_seconds;
        }
    }
    ensure_dir(out)?;
    let doc = MetricsDoc { schema: METRICS_SCHEMA.to_string(), report: report.clone() };
    write_atomic(&out.join(METRICS_JSON_FILE), serde_json::to_string_pretty(&doc)?.as_bytes())?;
    append_csv_row(&out.join(METRICS_CSV_FILE), &report)?;
    Ok(report)
}

fn append_csv_row(path: &Path, report: &MetricsReport) -> Result<(), CliError> {
    let header = MetricsReport::csv_header();
    let existing = match std::fs::read_to_string(path) {
        Ok(s) => Some(s),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let needs_header = match existing.as_deref().map(str::lines).and_then(|mut l| l.next()) {
        None => true,
        Some(h) if h == header => false,
        Some(_) => return Err(CliError::Data(format!("{} has a different header", path.display()))),
    };
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if needs_header {
        writeln!(f, "{header}")?;
    }
    writeln!(f, "{}", report.csv_row())?;
    Ok(())
}

/// MAE and correlation between the closure probabilities of two fits.
pub fn cmd_compare(a: &Path, b: &Path, out: Option<&Path>) -> Result<Comparison, CliError> {
    let (pa, pb) = (Fit::load(a)?.closure_probabilities()?, Fit::load(b)?.closure_probabilities()?);
    let mae = mae_to_reference(&pa, &pb)?;
    let n = pa.n_items();
    let pairs: Vec<(f64, f64)> =
        (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| (pa.get(i, j), pb.get(i, j))).collect();
    let cmp = Comparison { schema: COMPARE_SCHEMA.to_string(), n_items: n, mae, correlation: pearson(&pairs) };
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_atomic(&dir.join(COMPARE_FILE), serde_json::to_string_pretty(&cmp)?.as_bytes())?;
    }
    Ok(cmp)
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.is_empty() {
        return None;
    }
    let (mx, my) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        assert_eq!(pearson(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]), Some(1.0));
        assert_eq!(pearson(&[(0.0, 1.0), (1.0, 0.0)]), Some(-1.0));
        assert_eq!(pearson(&[(0.5, 1.0), (0.5, 0.0)]), None);
        assert_eq!(pearson(&[]), None);
    }

    #[test]
    fn point_fit_round_trips_its_order() {
        let po = PartialOrder::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let fit = PointFit::new(Method::Majority, 1, &po);
        let back: PointFit = serde_json::from_str(&serde_json::to_string(&fit).unwrap()).unwrap();
        assert_eq!(back.order().unwrap(), po);
    }

    #[test]
    fn malformed_point_closure_is_a_data_error() {
        let po = PartialOrder::antichain(2);
        let mut fit = PointFit::new(Method::Majority, 1, &po);
        fit.closure[0][1] = 2;
        assert!(matches!(fit.order(), Err(CliError::Data(_))));
        fit.closure = vec![vec![0, 1], vec![1, 0]];
        assert!(matches!(fit.order(), Err(CliError::Data(_))));
    }
}
