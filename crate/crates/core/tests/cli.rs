use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hoseq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoseq")).args(args).env_remove("HOSEQ_SEED").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = "train.max_epochs = 3\ntrain.patience = 2\nmodel.hidden_dim = 4\nfeat.seq_len = 3\n";

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&hoseq(&[])), 2);
    assert_eq!(code(&hoseq(&["frobnicate"])), 2);
    assert_eq!(code(&hoseq(&["gen", "mountains", "1", "/tmp/never.csv"])), 2);
    assert_eq!(code(&hoseq(&["--help"])), 0);
}

#[test]
fn gen_is_deterministic_and_ingest_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let (a, b, c) = (d.path().join("a.csv"), d.path().join("b.csv"), d.path().join("c.csv"));
    assert_eq!(code(&hoseq(&["gen", "canyon", "3", s(&a)])), 0);
    assert_eq!(code(&hoseq(&["gen", "canyon", "3", s(&b)])), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let o = hoseq(&["ingest", s(&a), s(&c)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    assert!(d.path().join("c.violations.csv").exists());

    let l = d.path().join("labels.csv");
    assert_eq!(code(&hoseq(&["label", s(&a), s(&l)])), 0);
    assert!(fs::read_to_string(&l).unwrap().lines().count() > 1);
}

#[test]
fn bad_config_fails_before_any_output() {
    let d = tempfile::tempdir().unwrap();
    let trace = d.path().join("t.csv");
    assert_eq!(code(&hoseq(&["gen", "canyon", "1", s(&trace)])), 0);
    let cfg = d.path().join("bad.cfg");
    fs::write(&cfg, "train.lr = -1\n").unwrap();
    let out = d.path().join("run");
    assert_eq!(code(&hoseq(&["--config", s(&cfg), "pipeline", s(&trace), s(&out)])), 2);
    assert!(!out.exists());
    assert_eq!(code(&hoseq(&["--config", s(&d.path().join("missing.cfg")), "pipeline", s(&trace), s(&out)])), 2);
    assert!(!out.exists());
}

#[test]
fn runtime_failure_rolls_back() {
    let d = tempfile::tempdir().unwrap();
    let trace = d.path().join("t.csv");
    assert_eq!(code(&hoseq(&["gen", "canyon", "1", s(&trace)])), 0);
    let text = fs::read_to_string(&trace).unwrap();
    let short: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
    fs::write(&trace, short).unwrap();
    let out = d.path().join("run");
    let o = hoseq(&["pipeline", s(&trace), s(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn pipeline_reports_every_model_and_mode() {
    let d = tempfile::tempdir().unwrap();
    let trace = d.path().join("t.csv");
    assert_eq!(code(&hoseq(&["gen", "corridor", "2", s(&trace)])), 0);
    let cfg = d.path().join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let out = d.path().join("run");
    let o = hoseq(&[
        "--config", s(&cfg), "--jobs", "2", "pipeline", s(&trace), s(&out), "--models", "gru,lstm,transformer", "--modes", "rsrp,all",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for kind in ["gru", "lstm", "transformer"] {
        for mode in ["rsrp", "all"] {
            assert!(rows.iter().any(|r| r.starts_with(&format!("{kind},{mode},"))), "{kind} {mode}");
            assert!(out.join(format!("{kind}_{mode}")).join("decisions.csv").exists());
        }
    }

    let rep = d.path().join("rep");
    assert_eq!(code(&hoseq(&["report", s(&out.join("summary.csv")), s(&rep)])), 0);
    assert!(rep.join("report.txt").exists());
}

#[test]
fn single_point_grid_picks_that_point() {
    let d = tempfile::tempdir().unwrap();
    let trace = d.path().join("t.csv");
    assert_eq!(code(&hoseq(&["gen", "corridor", "4", s(&trace)])), 0);
    let cfg = d.path().join("g.cfg");
    fs::write(&cfg, format!("{SMALL}grid.seq_lens = 4\ngrid.hidden_dims = 6\ngrid.lrs = 0.005\n")).unwrap();
    let out = d.path().join("grid");
    let o = hoseq(&["--config", s(&cfg), "--seed", "5", "gridsearch", s(&trace), s(&out), "--models", "lstm"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("sweep.csv")).unwrap().lines().count(), 2);
    let best = fs::read_to_string(out.join("best.cfg")).unwrap();
    for want in ["feat.seq_len = 4", "model.hidden_dim = 6", "train.lr = 0.005", "model.kind = lstm", "seed = 5"] {
        assert!(best.contains(want), "{want} missing from\n{best}");
    }
}
