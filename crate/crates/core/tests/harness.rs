use std::process::Command;

use fbs_hurst::harness::config::ExperimentConfig;
use fbs_hurst::harness::experiment::{run_experiment_with_faults, ReplicateOutcome};
use fbs_hurst::harness::io::{decode_field, encode_field, header_len, write_logscale, ReportJson};
use fbs_hurst::harness::{load_field, logscale_export, run_experiment, save_field, EstimatorKind};
use fbs_hurst::synthesis::FbsSynthesizer;
use fbs_hurst::wavelet::{make_daubechies, octave_box, OctaveVector};
use fbs_hurst::{build_system, fit, Error, Field, FormatError, HurstVector, Weight};
use proptest::prelude::*;

fn small_config(replicates: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(vec![0.4, 0.7], vec![128, 128], replicates, seed)
        .with_octaves(Some(vec![2, 2]), Some(vec![3, 3]))
}

#[test]
fn identical_runs_are_identical() {
    let cfg = small_config(1, 77);
    let a = run_experiment(&cfg, Some(1)).unwrap();
    let b = run_experiment(&cfg, Some(1)).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.records.len(), 1);
    // a single replicate cannot be summarized but its estimates are kept
    assert!(a.summary.rows.is_empty());
}

#[test]
fn worker_count_does_not_change_results() {
    let cfg = small_config(9, 5);
    let serial = run_experiment(&cfg, Some(1)).unwrap();
    let parallel = run_experiment(&cfg, Some(4)).unwrap();
    assert_eq!(serial.records, parallel.records);
    assert_eq!(serial.summary, parallel.summary);
    let idx: Vec<usize> = serial.records.iter().map(|r| r.replicate).collect();
    assert_eq!(idx, (0..9).collect::<Vec<_>>());
}

#[test]
fn replicates_follow_pair_seeding() {
    let cfg = small_config(4, 1234);
    let res = run_experiment(&cfg, None).unwrap();
    let resolved = cfg.resolve().unwrap();
    let synth = FbsSynthesizer::for_sheet(resolved.hurst.clone(), &cfg.dims).unwrap();
    let f = make_daubechies(3).unwrap();
    let (a, b) = synth.sample_pair(1234 ^ 1);
    for (field, rec) in [a, b].iter().zip(&res.records[2..4]) {
        let system = build_system(field, &f, &resolved.octaves).unwrap();
        let ols = fit(&system, &Weight::Identity).unwrap();
        match &rec.outcome {
            ReplicateOutcome::Ok(h) => assert_eq!(h[0], ols.hurst),
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn injected_failures_are_counted_not_summarized() {
    let cfg = small_config(40, 3);
    let clean = run_experiment(&cfg, None).unwrap();
    let faulty = run_experiment_with_faults(&cfg, None, &|r| r == 7 || r == 20).unwrap();
    assert_eq!(faulty.failures, 2);
    assert_eq!(faulty.summary.failures, 2);
    assert!(matches!(faulty.records[7].outcome, ReplicateOutcome::Failed(_)));
    // the statistics are those of the 38 clean replicates
    let kept: Vec<Vec<f64>> = clean
        .estimates(EstimatorKind::TwoStep)
        .into_iter()
        .enumerate()
        .filter(|(r, _)| *r != 7 && *r != 20)
        .map(|(_, h)| h)
        .collect();
    let stats = fbs_hurst::harness::summarize(&kept, &cfg.hurst).unwrap();
    assert_eq!(faulty.summary.get("two_step", 0), Some(&stats[0]));
    assert_eq!(faulty.summary.rows[0].replicates, 38);

    let mut csv = Vec::new();
    faulty.summary.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.contains("# failures: 2"));
    assert!(text.lines().any(|l| l.starts_with("estimator,axis,truth,mean,std,rmse,replicates,failures")));
    let mut raw = Vec::new();
    faulty.write_raw_csv(2, &mut raw).unwrap();
    let raw = String::from_utf8(raw).unwrap();
    assert_eq!(raw.lines().count(), 1 + 2 * 40);
    assert!(raw.contains("7,ols,failed: injected fault,"));
}

#[test]
fn too_many_failures_abort() {
    let cfg = small_config(40, 3);
    // 2 of 40 is exactly 5%, 3 is over
    assert!(run_experiment_with_faults(&cfg, None, &|r| r < 2).is_ok());
    let e = run_experiment_with_faults(&cfg, None, &|r| r < 3);
    assert!(matches!(e, Err(Error::TooManyFailures { failed: 3, total: 40 })));
}

#[test]
fn estimator_subset() {
    let cfg = small_config(4, 3).with_estimators(vec![EstimatorKind::Ols]);
    let res = run_experiment(&cfg, None).unwrap();
    assert_eq!(res.summary.rows.len(), 2);
    assert!(res.summary.get("two_step", 0).is_none());
    assert!(res.estimates(EstimatorKind::TwoStep).is_empty());
}

fn arb_field() -> impl Strategy<Value = Field> {
    prop::collection::vec(2usize..6, 1..4).prop_flat_map(|dims| {
        let n: usize = dims.iter().product();
        let d = dims.len();
        (
            Just(dims),
            prop::collection::vec(prop::num::f64::ANY, n),
            prop::option::of(prop::collection::vec(0.01f64..0.99, d)),
        )
            .prop_map(|(dims, data, h)| Field::new(dims, data).unwrap().with_hurst_truth(h))
    })
}

fn bits(f: &Field) -> Vec<u64> {
    f.data().iter().map(|v| v.to_bits()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn file_roundtrip_is_bit_exact(field in arb_field()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fbs");
        save_field(&field, &path).unwrap();
        let back = load_field(&path).unwrap();
        prop_assert_eq!(back.dims(), field.dims());
        prop_assert_eq!(bits(&back), bits(&field));
        prop_assert_eq!(back.hurst_truth(), field.hurst_truth());
        let bytes = std::fs::read(&path).unwrap();
        prop_assert_eq!(bytes.len(), header_len(field.ndim()) + 8 * field.data().len());
    }
}

#[test]
fn format_errors() {
    let field = Field::from_fn(vec![4, 3], |i| i[0] as f64 - i[1] as f64).unwrap();
    let bytes = encode_field(&field).unwrap();
    let mut bad = bytes.clone();
    bad[..4].copy_from_slice(b"FBS2");
    assert!(matches!(decode_field(&bad), Err(Error::Format(FormatError::BadMagic(m))) if &m == b"FBS2"));
    assert!(matches!(
        decode_field(&bytes[..bytes.len() - 8]),
        Err(Error::Format(FormatError::Truncated { .. }))
    ));
    let mut overflow = bytes[..header_len(2)].to_vec();
    overflow[5..13].copy_from_slice(&(1u64 << 62).to_le_bytes());
    overflow[13..21].copy_from_slice(&(1u64 << 62).to_le_bytes());
    assert!(matches!(decode_field(&overflow), Err(Error::Format(FormatError::DimensionOverflow))));
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_field(&dir.path().join("missing")), Err(Error::Io(_))));
}

#[test]
fn logscale_export_columns() {
    let f = make_daubechies(3).unwrap();
    let synth = FbsSynthesizer::for_sheet(HurstVector::new(vec![0.6, 0.5]).unwrap(), &[256, 256]).unwrap();
    let field = synth.sample_pair(2).0;
    let octaves = octave_box(&OctaveVector::new(vec![3, 3]).unwrap(), &OctaveVector::new(vec![4, 4]).unwrap()).unwrap();
    let system = build_system(&field, &f, &octaves).unwrap();
    let report = fit(&system, &Weight::Identity).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ls.csv");
    logscale_export(&system, &report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "j_1,j_2,log2_S,fitted,residual,n_J");
    let alpha = report.alpha();
    let mut residual_sum = 0.0;
    for (l, line) in lines[1..].iter().enumerate() {
        let cells: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let fitted = cells[0] * alpha[0] + cells[1] * alpha[1] + alpha[2];
        assert!((cells[3] - fitted).abs() < 1e-10);
        assert!((cells[2] - system.logvars()[l]).abs() < 1e-12);
        assert!((cells[4] - (cells[2] - cells[3])).abs() < 1e-10);
        assert_eq!(cells[5] as usize, system.counts()[l]);
        residual_sum += cells[4];
    }
    assert!(residual_sum.abs() < 1e-8);

    let json = serde_json::to_value(ReportJson::new(&system, &report)).unwrap();
    assert_eq!(json["method"], "ols");
    assert_eq!(json["hurst"].as_array().unwrap().len(), 2);
    let mut buf = Vec::new();
    write_logscale(&system, &report, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), text);
}

#[test]
fn config_file_roundtrip() {
    let cfg = ExperimentConfig::preset_3d();
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, text).unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), cfg);
}

// command-line interface

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fbs-hurst"))
}

#[test]
fn cli_synth_estimate_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("f.fbs");
    let st = cli()
        .args(["synth", "--hurst", "0.3,0.8", "--dims", "256,256", "--seed", "4", "--out"])
        .arg(&field)
        .status()
        .unwrap();
    assert!(st.success());
    let loaded = load_field(&field).unwrap();
    assert_eq!(loaded.dims(), &[256, 256]);
    assert_eq!(loaded.hurst_truth(), Some(&[0.3, 0.8][..]));

    let report = dir.path().join("r.json");
    let ls = dir.path().join("ls.csv");
    let st = cli()
        .arg("estimate")
        .arg(&field)
        .arg("--out")
        .arg(&report)
        .arg("--logscale")
        .arg(&ls)
        .status()
        .unwrap();
    assert!(st.success());
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["method"], "two_step");
    let h: Vec<f64> = json["hurst"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!((h[0] - 0.3).abs() < 0.15 && (h[1] - 0.8).abs() < 0.15, "{h:?}");
    // 256: octaves 3..4 per axis
    assert_eq!(std::fs::read_to_string(&ls).unwrap().lines().count(), 5);
}

#[test]
fn cli_mc_and_gmatrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(
        &cfg,
        r#"{"dimension": 2, "hurst": [0.5, 0.7], "dims": [128, 128], "replicates": 4,
            "seed": 9, "octave_low": [2, 2], "octave_high": [3, 3]}"#,
    )
    .unwrap();
    let summary = dir.path().join("s.csv");
    let raw = dir.path().join("raw.csv");
    let st = cli()
        .args(["mc", "--threads", "2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&summary)
        .arg("--raw")
        .arg(&raw)
        .status()
        .unwrap();
    assert!(st.success());
    let s = std::fs::read_to_string(&summary).unwrap();
    assert_eq!(s.lines().filter(|l| !l.starts_with('#')).count(), 5);
    assert_eq!(std::fs::read_to_string(&raw).unwrap().lines().count(), 9);

    let out = cli()
        .args(["gmatrix", "--hurst", "0.5,0.5", "--dims", "512,512"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.lines().all(|l| l.split(',').count() == 9));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // unknown key: configuration error
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"dimension": 1, "hurst": [0.5], "dims": [512], "replicates": 2, "sed": 1}"#).unwrap();
    let st = cli().args(["mc", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(2));
    // not a field file: input error
    let junk = dir.path().join("junk.fbs");
    std::fs::write(&junk, b"not a field").unwrap();
    assert_eq!(cli().arg("estimate").arg(&junk).status().unwrap().code(), Some(2));
    // bad arguments
    assert_eq!(cli().args(["synth", "--hurst", "1.5", "--dims", "64", "--out"]).arg(dir.path().join("x")).status().unwrap().code(), Some(2));
    assert_eq!(cli().arg("frobnicate").status().unwrap().code(), Some(2));
    // constant field: zero coefficient variance, numerical failure
    let flat = dir.path().join("flat.fbs");
    save_field(&Field::zeros(vec![256, 256]).unwrap(), &flat).unwrap();
    let code = cli().arg("estimate").arg(&flat).status().unwrap().code();
    assert_eq!(code, Some(3));
}
