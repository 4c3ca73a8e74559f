use std::collections::BTreeSet;
use std::path::Path;

use voltext::evaluation::{classify_days, reality_check};
use voltext::explain::QuadratureSpec;
use voltext::nlpml::CnnConfig;
use voltext::pipeline::{
    load_forecasts, run_pipeline, write_synthetic_dataset, ExplainConfig, Manifest, PipelineConfig, PipelineError,
    RunOptions, StageStatus,
};
use voltext::synth::SynthSpec;
use voltext::volatility::{HarModel, RollingProtocol};

fn small_config(dir: &Path) -> PipelineConfig {
    let spec = SynthSpec { n_days: 280, seed: 11, ..SynthSpec::default() };
    write_synthetic_dataset(dir, &spec, &["AAA".into(), "BBB".into()]).unwrap();
    let mut cfg = PipelineConfig::load(&dir.join("config.toml")).unwrap();
    cfg.protocol = RollingProtocol { train_len: 200, oos_len: 40 };
    cfg.har = vec![HarModel::Ar1, HarModel::Har, HarModel::Char];
    cfg.embedding.dim = 8;
    cfg.embedding.min_count = 1;
    cfg.embedding.epochs = 1;
    let cnn = CnnConfig { widths: vec![2, 3], filters: 2, max_len: 40, epochs: 2, ..CnnConfig::default() };
    cfg.cnn = vec![cnn.clone(), CnnConfig { filters: 3, ..cnn }];
    cfg.evaluation.rc.n_boot = 99;
    cfg.explain = Some(ExplainConfig { tokens: vec!["selloff".into()], quadrature: QuadratureSpec::default() });
    cfg
}

fn statuses(summary: &voltext::pipeline::RunSummary) -> Vec<(String, StageStatus)> {
    summary.stages.clone()
}

#[test]
fn empty_ticker_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.tickers.clear();
    let err = run_pipeline(&cfg, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::Config(_)), "{err}");
}

#[test]
fn missing_price_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.tickers.push("CCC".into());
    let err = run_pipeline(&cfg, &RunOptions::default()).unwrap_err();
    assert!(matches!(&err, PipelineError::Config(m) if m.contains("CCC")), "{err}");
}

#[test]
fn resume_skips_and_deleted_intermediate_reruns_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let first = run_pipeline(&cfg, &RunOptions::default()).unwrap();
    assert!(first.stages.iter().all(|s| s.1 == StageStatus::Ran));
    let names: BTreeSet<&str> = first.stages.iter().map(|s| s.0.as_str()).collect();
    for n in ["rv/AAA", "corpus", "embed", "tokens/BBB", "har/AAA", "nlpml/AAA/nlpml_f2_w2-3", "eval", "explain", "report"] {
        assert!(names.contains(n), "missing stage {n}: {names:?}");
    }

    // every file in the run directory is attributed to a stage
    let manifest = Manifest::load(&first.dir).unwrap();
    let recorded: BTreeSet<String> = manifest.stages.values().flat_map(|s| s.outputs.keys().cloned()).collect();
    for entry in walk(&first.dir) {
        let rel = entry.strip_prefix(&first.dir).unwrap().to_string_lossy().into_owned();
        if rel != "manifest.json" && rel != "config.toml" {
            assert!(recorded.contains(&rel), "{rel} not in manifest");
        }
    }

    let opts = RunOptions { resume: Some(first.dir.clone()) };
    let again = run_pipeline(&cfg, &opts).unwrap();
    assert!(again.stages.iter().all(|s| s.1 == StageStatus::Skipped), "{:?}", statuses(&again));

    std::fs::remove_file(first.dir.join("tokens/AAA.json")).unwrap();
    let third = run_pipeline(&cfg, &opts).unwrap();
    let ran: BTreeSet<&str> = third.ran().into_iter().collect();
    let expected: BTreeSet<&str> =
        ["tokens/AAA", "nlpml/AAA/nlpml_f2_w2-3", "nlpml/AAA/nlpml_f3_w2-3", "eval", "explain", "report"].into();
    assert_eq!(ran, expected);
}

#[test]
fn strict_runs_are_bit_identical_and_report_matches_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = run_pipeline(&cfg, &RunOptions::default()).unwrap();
    let b = run_pipeline(&cfg, &RunOptions::default()).unwrap();
    assert_ne!(a.dir, b.dir);
    let ma = Manifest::load(&a.dir).unwrap();
    let mb = Manifest::load(&b.dir).unwrap();
    for (name, rec) in &ma.stages {
        assert_eq!(rec.outputs, mb.stages[name].outputs, "stage {name} differs between runs");
    }

    // reality-check percentages recomputed from the evaluation module
    let mut rows = csv::Reader::from_path(a.dir.join("report/tables.csv")).unwrap();
    let header = rows.headers().unwrap().clone();
    let col = |n: &str| header.iter().position(|h| h == n).unwrap();
    let table: Vec<csv::StringRecord> = rows.records().map(|r| r.unwrap()).collect();
    let cfg = cfg.seeded();
    let mut checked = 0;
    for c in &cfg.cnn {
        let id = c.model_id();
        for panel in ["all", "normal", "jump"] {
            let mut rejections = 0;
            let mut total = 0;
            for t in &cfg.tickers {
                let (har, cnn) = load_forecasts(&a.dir, &cfg, t).unwrap();
                let cand = cnn.iter().find(|s| s.model_id == id).unwrap();
                let split = classify_days(&cand.actual);
                let idx: Vec<usize> = match panel {
                    "all" => (0..cand.len()).collect(),
                    "normal" => split.normal.clone(),
                    _ => split.jump.clone(),
                };
                if idx.len() < 2 {
                    continue;
                }
                let res = reality_check(cand, &har, "mse".parse().unwrap(), Some(&idx), &cfg.evaluation.rc).unwrap();
                total += 1;
                rejections += (res.p_value < 0.05) as usize;
            }
            if total == 0 {
                continue;
            }
            let expect = 100.0 * rejections as f64 / total as f64;
            let got: f64 = table
                .iter()
                .find(|r| {
                    &r[col("loss")] == "mse"
                        && &r[col("panel")] == panel
                        && &r[col("row")] == "rc_pct@0.05"
                        && r[col("model")] == id
                })
                .unwrap()[col("value")]
                .parse()
                .unwrap();
            assert_eq!(got, expect, "{id} {panel}");
            checked += 1;
        }
    }
    assert!(checked >= 4);

    // one column per configured CNN
    let models: BTreeSet<&str> = table.iter().map(|r| r.get(col("model")).unwrap()).collect();
    let ids: BTreeSet<String> = cfg.cnn.iter().map(|c| c.model_id()).collect();
    assert_eq!(models.len(), ids.len());
    assert!(ids.iter().all(|i| models.contains(i.as_str())));
    let summary = std::fs::read_to_string(a.dir.join("report/summary.md")).unwrap();
    let header_line = summary.lines().find(|l| l.starts_with("| |")).unwrap();
    assert_eq!(header_line.matches('|').count(), ids.len() + 2);
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
