use cjs_core::data::{save_dataset, DomainDataset};
use cjs_core::distance::source_subspaces;
use cjs_core::eval::mean_std;
use cjs_core::pipeline::{evaluate_datasets, run_once, run_pipeline, sweep, sweep_csv, DataSource, EvaluationReport, PipelineConfig, SweepParam};
use cjs_core::synth::{synth_generate, SynthParams};
use cjs_core::Error;

fn small() -> (DomainDataset, DomainDataset) {
    synth_generate(&SynthParams { samples_per_class: 60, seed: 4, ..Default::default() }).unwrap()
}

fn config(runs: usize) -> PipelineConfig {
    PipelineConfig { runs, seed: 3, ..Default::default() }
}

fn without_timing(mut r: EvaluationReport) -> EvaluationReport {
    r.wall_time_s = 0.0;
    r
}

#[test]
fn repeated_runs_are_identical() {
    let (s, t) = small();
    let a = evaluate_datasets(&s, &t, &config(4)).unwrap();
    let b = evaluate_datasets(&s, &t, &config(4)).unwrap();
    assert_eq!(without_timing(a), without_timing(b));
}

#[test]
fn statistics_match_runs() {
    let (s, t) = small();
    let report = evaluate_datasets(&s, &t, &config(5)).unwrap();
    let (m, sd) = mean_std(&report.per_run_accuracy);
    assert!((report.mean.unwrap() - m).abs() < 1e-12);
    assert!((report.std.unwrap() - sd).abs() < 1e-12);
    let confusion = report.confusion.unwrap();
    for (c, row) in confusion.iter().enumerate() {
        assert_eq!(row.iter().sum::<usize>(), t.class_members(c).len());
    }
    assert_eq!(report.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![3, 4, 5, 6, 7]);
}

#[test]
fn single_run_has_zero_std() {
    let (s, t) = small();
    let report = evaluate_datasets(&s, &t, &config(1)).unwrap();
    assert_eq!(report.std, Some(0.0));
    assert_eq!(report.per_run_accuracy.len(), 1);
}

#[test]
fn relabeling_classes_keeps_accuracy() {
    let (s, t) = small();
    let perm = [3usize, 0, 2, 1];
    let relabel = |d: &DomainDataset| d.with_labels(Some(d.labels().unwrap().iter().map(|&l| perm[l]).collect())).unwrap();
    let a = evaluate_datasets(&s, &t, &config(3)).unwrap();
    let b = evaluate_datasets(&relabel(&s), &relabel(&t), &config(3)).unwrap();
    for (x, y) in a.per_run_accuracy.iter().zip(&b.per_run_accuracy) {
        assert!((x - y).abs() < 1e-12, "{x} vs {y}");
    }
}

#[test]
fn feature_scaling_keeps_anchor_labels() {
    let (s, t) = small();
    let cfg = config(1);
    let sources = source_subspaces(&s, 4, cfg.rank_tol).unwrap();
    let base = run_once(&s, &t, &sources, &cfg, 9).unwrap();
    for factor in [0.25, 3.0, 1000.0] {
        let s2 = s.with_features(s.features().scaled(factor).unwrap()).unwrap();
        let t2 = t.with_features(t.features().scaled(factor).unwrap()).unwrap();
        let sources2 = source_subspaces(&s2, 4, cfg.rank_tol).unwrap();
        let scaled = run_once(&s2, &t2, &sources2, &cfg, 9).unwrap();
        let members = |o: &cjs_core::pipeline::RunOutcome| o.anchors.iter().map(|a| a.member_indices.clone()).collect::<Vec<_>>();
        assert_eq!(members(&base), members(&scaled), "factor {factor}");
        assert_eq!(base.anchor_classes(), scaled.anchor_classes(), "factor {factor}");
    }
}

#[test]
fn unlabeled_target_reports_predictions_only() {
    let (s, t) = small();
    let t = t.with_labels(None).unwrap();
    let report = evaluate_datasets(&s, &t, &PipelineConfig { baseline: true, ..config(2) }).unwrap();
    assert!(!report.scored);
    assert!(report.mean.is_none() && report.per_run_accuracy.is_empty() && report.source_only_accuracy.is_none());
    assert_eq!(report.predictions.len(), t.len());
    assert!(!report.warnings.is_empty());
}

#[test]
fn files_and_multiple_sources() {
    let (s, t) = small();
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let half: Vec<usize> = (0..s.len()).filter(|i| i % 2 == 0).collect();
    let rest: Vec<usize> = (0..s.len()).filter(|i| i % 2 == 1).collect();
    let part = |idx: &[usize]| {
        let labels = idx.iter().map(|&i| s.labels().unwrap()[i]).collect();
        DomainDataset::new(s.features().select(idx), Some(labels), "part").unwrap()
    };
    save_dataset(&part(&half), &p("s1.csv"), Some(&p("s1_labels.csv"))).unwrap();
    save_dataset(&part(&rest), &p("s2.csv"), Some(&p("s2_labels.csv"))).unwrap();
    save_dataset(&t, &p("t.csv"), Some(&p("t_labels.csv"))).unwrap();

    let cfg = PipelineConfig {
        sources: vec![
            DataSource { features: p("s1.csv"), labels: Some(p("s1_labels.csv")) },
            DataSource { features: p("s2.csv"), labels: Some(p("s2_labels.csv")) },
        ],
        targets: vec![DataSource { features: p("t.csv"), labels: Some(p("t_labels.csv")) }],
        output: Some(p("report.json")),
        ..config(2)
    };
    let report = run_pipeline(&cfg).unwrap();
    assert_eq!(report.source_domain, "s1+s2");
    assert_eq!(report.source_samples, s.len());
    let written: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("report.json")).unwrap()).unwrap();
    assert_eq!(written["schema_version"], 1);
    assert_eq!(written["per_run_accuracy"].as_array().unwrap().len(), 2);
}

#[test]
fn config_text_roundtrip_and_rejections() {
    let cfg = PipelineConfig::from_toml_str("gamma = 15\nsigma = 0.5\n[[sources]]\nfeatures = \"a.csv\"\n").unwrap();
    assert_eq!(cfg.gamma, 15);
    assert_eq!(cfg.sources.len(), 1);
    assert_eq!(PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    assert!(matches!(PipelineConfig::from_toml_str("gama = 3"), Err(Error::InvalidConfig(_))));
    assert!(PipelineConfig { rho: -1.0, ..Default::default() }.validate().is_err());
    assert!(PipelineConfig { runs: 0, ..Default::default() }.validate().is_err());
    assert!(matches!(PipelineConfig::default().load_data(), Err(Error::InvalidConfig(_))));
}

#[test]
fn sweep_rows_follow_values() {
    let (s, t) = small();
    let rows = sweep(&s, &t, &config(1), SweepParam::AnchorSize, &[3, 4]).unwrap();
    assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![3, 4]);
    let csv = sweep_csv(SweepParam::AnchorSize, &rows);
    assert!(csv.starts_with("param,value,mean,std\nN,3,"));
    assert_eq!(csv.lines().count(), 3);
}
