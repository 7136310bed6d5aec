use faultchain_cli::RunReport;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SQUARE: &str = r#"{"base_mva":100,"slack_bus":0,
 "buses":[{"id":0,"load_mw":0,"gen_mw":90,"gen_max_mw":150},
          {"id":1,"load_mw":30,"gen_mw":0,"gen_max_mw":0},
          {"id":2,"load_mw":40,"gen_mw":0,"gen_max_mw":0},
          {"id":3,"load_mw":20,"gen_mw":0,"gen_max_mw":0}],
 "branches":[{"id":0,"from":0,"to":1,"x_pu":0.1,"rating_mw":1000,"kind":"line"},
             {"id":1,"from":1,"to":2,"x_pu":0.1,"rating_mw":1000,"kind":"line"},
             {"id":2,"from":2,"to":3,"x_pu":0.1,"rating_mw":1000,"kind":"line"},
             {"id":3,"from":3,"to":0,"x_pu":0.1,"rating_mw":1000,"kind":"line"}]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_faultchain"))
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn square(dir: &Path) -> PathBuf {
    let p = dir.join("square.json");
    fs::write(&p, SQUARE).unwrap();
    p
}

fn ring(dir: &Path) -> PathBuf {
    let p = dir.join("ring.json");
    fs::write(&p, faultchain::case_io::to_native_json(&faultchain::synthetic::toy_ring()).unwrap()).unwrap();
    p
}

fn run(args: &[&str]) -> String {
    ok(bin().args(args).output().unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(dir: &Path) -> RunReport {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn enumerate_square_gives_twelve_chains_and_a_top_table() {
    let tmp = tempfile::tempdir().unwrap();
    let case = square(tmp.path());
    let out = tmp.path().join("enum");
    run(&["enumerate", "--case", s(&case), "--horizon", "2", "--top", "5", "--out", s(&out)]);
    assert_eq!(fs::read_to_string(out.join("catalog.jsonl")).unwrap().lines().count(), 12);
    let top = fs::read_to_string(out.join("top_s.csv")).unwrap();
    assert_eq!(top.lines().count(), 6);
    assert!(top.starts_with("rank,tll_mw,actions\n"));
}

#[test]
fn identical_runs_write_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let case = ring(tmp.path());
    let common = ["--case", s(&case), "--horizon", "2", "--iterations", "20", "--explore", "4", "--batch", "4", "--seed", "3"];
    for cmd in ["train", "baseline", "enumerate"] {
        let (a, b) = (tmp.path().join(format!("{cmd}_a")), tmp.path().join(format!("{cmd}_b")));
        run(&[&[cmd][..], &common, &["--out", s(&a)]].concat());
        run(&[&[cmd][..], &common, &["--out", s(&b)]].concat());
        let mut compared = 0;
        for f in ["catalog.jsonl", "top_s.csv", "episodes.jsonl", "chains.jsonl", "regret.csv"] {
            if a.join(f).exists() {
                assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{cmd}: {f}");
                compared += 1;
            }
        }
        assert!(compared >= 2, "{cmd} wrote too few artifacts");
    }
}

#[test]
fn baseline_and_train_share_the_report_schema_and_report_merges_them() {
    let tmp = tempfile::tempdir().unwrap();
    let case = ring(tmp.path());
    let (g, p) = (tmp.path().join("grqn"), tmp.path().join("pfw"));
    let common = ["--case", s(&case), "--horizon", "2", "--iterations", "15", "--explore", "4", "--batch", "4"];
    run(&[&["train"][..], &common, &["--kappa", "1", "--out", s(&g)]].concat());
    run(&[&["baseline"][..], &common, &["--which", "pfw_rl", "--out", s(&p)]].concat());
    for dir in [&g, &p] {
        let r = report(dir);
        let chains = fs::read_to_string(dir.join("chains.jsonl")).unwrap();
        let total: f64 = chains
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["tll_mw"].as_f64().unwrap())
            .sum();
        assert!((total - r.accumulated_tll_mw).abs() < 1e-6);
        assert_eq!(chains.lines().count(), r.discovered);
        assert_eq!(fs::read_to_string(dir.join("regret.csv")).unwrap().lines().count(), r.discovered + 1);
    }
    assert_eq!(report(&g).algorithm, "grqn_k1");
    assert!(g.join("checkpoint.json").exists() && p.join("qtable.json").exists());

    let out = tmp.path().join("report");
    run(&["report", s(&g), s(&p), "--out", s(&out)]);
    assert_eq!(fs::read_to_string(out.join("comparison.csv")).unwrap().lines().count(), 3);
    let svg = fs::read_to_string(out.join("regret.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("regret (MW)"));
}

#[test]
fn repeats_use_consecutive_seeds_and_te_pretrains_when_no_table_is_given() {
    let tmp = tempfile::tempdir().unwrap();
    let case = ring(tmp.path());
    let out = tmp.path().join("te");
    run(&[
        "baseline", "--case", s(&case), "--horizon", "2", "--iterations", "10", "--which", "pfw_rl_te",
        "--pretrain-factor", "0.9", "--pretrain-iterations", "30", "--mc-repeats", "3", "--seed", "7", "--out", s(&out),
    ]);
    assert!(out.join("pretrained.json").exists() && out.join("summary.json").exists());
    let seeds: Vec<u64> = (0..3).map(|r| report(&out.join(format!("rep_{r:03}"))).seed).collect();
    assert_eq!(seeds, vec![7, 8, 9]);

    let again = tmp.path().join("te2");
    run(&[
        "baseline", "--case", s(&case), "--horizon", "2", "--iterations", "10", "--which", "pfw_rl_te",
        "--pretrained", s(&out.join("pretrained.json")), "--seed", "7", "--out", s(&again),
    ]);
    assert_eq!(
        fs::read(again.join("chains.jsonl")).unwrap(),
        fs::read(out.join("rep_000/chains.jsonl")).unwrap()
    );
}

#[test]
fn config_file_is_overridden_by_flags_and_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let case = ring(tmp.path());
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, format!("case = {}\nhorizon = 2\niterations = 9\nseed = 4\n", case.display())).unwrap();
    let out = tmp.path().join("b");
    run(&["baseline", "--config", s(&cfg), "--iterations", "6", "--out", s(&out)]);
    let r = report(&out);
    assert_eq!((r.config.iterations, r.config.seed, r.config.horizon), (6, 4, 2));
    assert_eq!(r.episodes_run, 6);
}

#[test]
fn errors_exit_nonzero_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let case = ring(tmp.path());
    for args in [
        vec!["train", "--case", "/no/such/case.m"],
        vec!["baseline", "--case", s(&case), "--gamma", "2"],
        vec!["enumerate", "--case", s(&case), "--format", "csv"],
        vec!["report", s(tmp.path())],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?}");
        let err = String::from_utf8(out.stderr).unwrap();
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        assert!(err.starts_with("error: "));
    }
}

#[test]
fn budget_mode_reports_consistent_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let case = ring(tmp.path());
    let out = tmp.path().join("budget");
    run(&[
        "train", "--case", s(&case), "--horizon", "3", "--iterations", "1000000", "--explore", "4", "--batch", "4",
        "--budget-seconds", "1", "--out", s(&out),
    ]);
    let r = report(&out);
    assert!(r.budget_hit || r.exhausted);
    assert_eq!(r.regret_s, Some(r.episodes_run));
    let regret = r.regret_mw.unwrap();
    assert!((r.reference_mw.unwrap() - r.accumulated_tll_mw - regret).abs() < 1e-6);
}
