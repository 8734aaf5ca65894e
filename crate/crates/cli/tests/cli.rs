use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

fn pograd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pograd")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = pograd(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p
}

const SMALL: &str = r#"{
  "synth": {"n_items": 5},
  "hmc": {"warmup_iters": 150, "sampling_iters": 150},
  "mh": {"n_iters": 20000, "tune_iters": 2000, "max_draws": 500},
  "advi": {"iters": 1500, "n_output_draws": 200},
  "softdag": {"steps": 100, "restarts": 1},
  "softdag_grid": []
}"#;

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn end_to_end_relaxed_hmc() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = write_config(root, SMALL);
    let (data_dir, fit_dir, dec_dir, eval_dir) = (root.join("data"), root.join("fit"), root.join("decode"), root.join("eval"));
    let start = Instant::now();
    ok(&["generate", "--config", s(&cfg), "--seed", "3", "--out", s(&data_dir)]);
    let data = data_dir.join("dataset.json");
    ok(&["fit", "--config", s(&cfg), "--seed", "3", "--method", "relaxed_hmc", "--data", s(&data), "--out", s(&fit_dir)]);
    ok(&["decode", "--config", s(&cfg), "--fit", s(&fit_dir), "--out", s(&dec_dir)]);
    let out = ok(&["eval", "--config", s(&cfg), "--data", s(&data), "--fit", s(&fit_dir), "--out", s(&eval_dir)]);
    assert!(start.elapsed().as_secs_f64() < 60.0);

    assert_eq!(json(&data).get("schema").unwrap(), "pograd-dataset-1");
    assert_eq!(json(&fit_dir.join("fit_summary.json")).get("schema").unwrap(), "pograd-fit-1");
    for f in ["closure_probabilities.csv", "closure.csv", "hasse_edges.csv"] {
        assert!(dec_dir.join(f).exists(), "{f} missing");
    }
    let probs = std::fs::read_to_string(dec_dir.join("closure_probabilities.csv")).unwrap();
    assert_eq!(probs.lines().count(), 1 + 5 * 4);

    let m = json(&eval_dir.join("metrics.json"));
    assert_eq!(m.get("schema").unwrap(), "pograd-metrics-1");
    for k in ["precision", "recall", "f1", "trace_nll", "step_nll", "waic", "ip_cov"] {
        let v = m.get(k).and_then(|v| v.as_f64()).unwrap_or_else(|| panic!("{k} missing"));
        assert!(v.is_finite(), "{k} = {v}");
    }
    assert!(m.get("mae_to_reference").unwrap().is_null());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("method,precision"));

    ok(&["eval", "--config", s(&cfg), "--data", s(&data), "--fit", s(&fit_dir), "--reference", s(&fit_dir), "--out", s(&eval_dir)]);
    let csv = std::fs::read_to_string(eval_dir.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == lines[0].split(',').count()));
    assert_eq!(json(&eval_dir.join("metrics.json")).get("mae_to_reference").unwrap().as_f64(), Some(0.0));
}

#[test]
fn fit_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = write_config(root, SMALL);
    ok(&["generate", "--config", s(&cfg), "--seed", "5", "--out", s(root)]);
    let data = root.join("dataset.json");
    for method in ["relaxed_hmc", "hard_mcmc", "fullrank_vi"] {
        let read = |name: &str, seed: &str| {
            let dir = root.join(format!("{method}-{name}"));
            ok(&["fit", "--config", s(&cfg), "--seed", seed, "--method", method, "--data", s(&data), "--out", s(&dir)]);
            std::fs::read(dir.join("draws.jsonl")).unwrap()
        };
        let (a, b, c) = (read("a", "1"), read("b", "1"), read("c", "2"));
        assert_eq!(a, b, "{method} differs across identical runs");
        assert_ne!(a, c, "{method} ignores the seed");
    }
}

#[test]
fn perfect_point_fit_scores_f1_one() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = write_config(root, SMALL);
    ok(&["generate", "--config", s(&cfg), "--seed", "8", "--out", s(root)]);
    let data = root.join("dataset.json");
    let truth = json(&data).get("ground_truth_closure").unwrap().clone();
    let fit_dir = root.join("truth");
    std::fs::create_dir(&fit_dir).unwrap();
    let point = serde_json::json!({
        "schema": "pograd-point-1", "method": "majority", "seed": 0, "runtime_seconds": 0.0, "n_items": 5,
        "closure": truth, "reachability": null, "beta": null, "val_step_nll": null, "lambda_l1": null, "lambda_h": null
    });
    std::fs::write(fit_dir.join("point_fit.json"), point.to_string()).unwrap();
    ok(&["eval", "--data", s(&data), "--fit", s(&fit_dir), "--out", s(root)]);
    let m = json(&root.join("metrics.json"));
    assert_eq!(m.get("f1").unwrap().as_f64(), Some(1.0));
    assert_eq!(m.get("precision").unwrap().as_f64(), Some(1.0));
    assert_eq!(m.get("recall").unwrap().as_f64(), Some(1.0));
}

#[test]
fn baselines_and_compare() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = write_config(root, SMALL);
    ok(&["generate", "--config", s(&cfg), "--seed", "2", "--out", s(root)]);
    let data = root.join("dataset.json");
    for method in ["majority", "softdag"] {
        let dir = root.join(method);
        ok(&["fit", "--config", s(&cfg), "--method", method, "--data", s(&data), "--out", s(&dir)]);
        assert_eq!(json(&dir.join("point_fit.json")).get("schema").unwrap(), "pograd-point-1");
        ok(&["decode", "--fit", s(&dir), "--out", s(&dir)]);
        ok(&["eval", "--data", s(&data), "--fit", s(&dir), "--out", s(&dir)]);
        let f1 = json(&dir.join("metrics.json")).get("f1").unwrap().as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f1));
    }
    assert!(json(&root.join("softdag/metrics.json")).get("step_nll").unwrap().as_f64().unwrap().is_finite());
    let out = ok(&["compare", "--a", s(&root.join("majority")), "--b", s(&root.join("majority")), "--out", s(root)]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("5,0,"));
    let cmp = json(&root.join("compare.json"));
    assert_eq!(cmp.get("schema").unwrap(), "pograd-compare-1");
    assert_eq!(cmp.get("mae").unwrap().as_f64(), Some(0.0));
}

#[test]
fn exit_codes_classify_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let bad_cfg = write_config(root, r#"{"zeta": 2.0}"#);
    assert_eq!(pograd(&["generate", "--config", s(&bad_cfg), "--out", s(root)]).status.code(), Some(2));
    assert_eq!(pograd(&["generate", "--config", s(&root.join("missing.json")), "--out", s(root)]).status.code(), Some(2));
    assert_eq!(pograd(&["fit", "--method", "bogus", "--data", "x", "--out", s(root)]).status.code(), Some(2));
    assert_eq!(pograd(&["fit", "--data", s(&root.join("missing.json")), "--out", s(root)]).status.code(), Some(3));

    let bad_data = root.join("bad.json");
    std::fs::write(
        &bad_data,
        r#"{"schema":"pograd-dataset-1","items":["a","b"],"traces":[{"choice_set":[0,1],"order":[0,0],"split":"train"}]}"#,
    )
    .unwrap();
    let out = pograd(&["fit", "--data", s(&bad_data), "--out", s(root)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trace"));
    assert_eq!(pograd(&["decode", "--fit", s(root), "--out", s(root)]).status.code(), Some(3));
}

#[test]
fn conflicting_traces_fail_hard_sampler_with_numerical_code() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = write_config(root, r#"{"prior": {"d": 1}, "mh": {"n_iters": 1000, "tune_iters": 100}}"#);
    let data = root.join("conflict.json");
    std::fs::write(
        &data,
        r#"{"schema":"pograd-dataset-1","items":["a","b"],"traces":[
            {"choice_set":[0,1],"order":[0,1],"split":"train"},
            {"choice_set":[0,1],"order":[1,0],"split":"train"}]}"#,
    )
    .unwrap();
    let out = pograd(&["fit", "--config", s(&cfg), "--method", "hard_mcmc", "--data", s(&data), "--out", s(root)]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}
