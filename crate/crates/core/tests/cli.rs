use std::path::Path;
use std::process::{Command, Output};

use ctmqc::diagnostics::{read_observables, OBSERVABLE_COLUMNS, QM_COLUMNS, TRAJ_COLUMNS};

fn ctmqc(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ctmqc"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("CTMQC_THREADS", t),
        None => cmd.env_remove("CTMQC_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

const SMALL: [&str; 6] = ["--set", "n_traj=24", "--set", "t_final_fs=45", "--set", "dt_as=20"];

fn small_run(out: &Path, extra: &[&str], threads: Option<&str>) -> Output {
    let mut args = vec!["run", "--model", "tully1", "--out", out.to_str().unwrap(), "--seed", "3"];
    args.extend_from_slice(&SMALL);
    args.extend_from_slice(extra);
    ctmqc(&args, threads)
}

#[test]
fn repeated_runs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&small_run(&a, &["--dump-qm"], Some("1")));
    ok(&small_run(&b, &["--dump-qm"], Some("3")));
    for f in ["observables.csv", "qm.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn observables_have_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    ok(&small_run(dir.path(), &[], None));
    let text = std::fs::read_to_string(dir.path().join("observables.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), OBSERVABLE_COLUMNS.join(","));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    let n_steps = meta["n_steps"].as_u64().unwrap() as usize;
    let expected = (45.0f64 * 1000.0 / 20.0).round() as usize;
    assert_eq!(n_steps, expected);
    assert_eq!(text.lines().count(), n_steps + 2);
    let rec = read_observables(&dir.path().join("observables.csv")).unwrap();
    assert_eq!(rec[0].t_fs, 0.0);
    assert!((rec.last().unwrap().t_fs - 45.0).abs() < 1e-9);
}

#[test]
fn ehrenfest_metadata_has_no_variant() {
    let dir = tempfile::tempdir().unwrap();
    ok(&small_run(dir.path(), &["--set", "method=ehrenfest"], None));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["qm_variant"], "n/a");
    assert_eq!(meta["method"], "ehrenfest");
    assert_eq!(meta["seed"], 3);
}

#[test]
fn dumps_and_model_curves() {
    let dir = tempfile::tempdir().unwrap();
    ok(&small_run(dir.path(), &["--dump-qm", "--dump-traj", "--dump-model-curves"], None));
    let traj = std::fs::read_to_string(dir.path().join("traj.csv")).unwrap();
    let qm = std::fs::read_to_string(dir.path().join("qm.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), TRAJ_COLUMNS);
    assert_eq!(qm.lines().next().unwrap(), QM_COLUMNS);
    assert_eq!(traj.lines().count(), qm.lines().count());
    let curves: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("model_curves.json")).unwrap()).unwrap();
    for m in ["tully1", "tully2", "tully3", "tully4"] {
        let e0 = curves["models"][m]["e0"].as_array().unwrap();
        let e1 = curves["models"][m]["e1"].as_array().unwrap();
        assert_eq!(e0.len(), curves["models"][m]["r_bohr"].as_array().unwrap().len());
        assert!(e0.iter().zip(e1).all(|(a, b)| a.as_f64().unwrap() <= b.as_f64().unwrap()));
    }
}

#[test]
fn multiple_seeds_get_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["run", "--model", "tully2", "--out", dir.path().to_str().unwrap(), "--seeds", "1,2"];
    args.extend_from_slice(&SMALL);
    ok(&ctmqc(&args, None));
    let a = std::fs::read(dir.path().join("seed_1/observables.csv")).unwrap();
    let b = std::fs::read(dir.path().join("seed_2/observables.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn compare_against_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&small_run(&run, &[], None));
    let report = dir.path().join("cmp.json");
    ok(&ctmqc(
        &[
            "compare",
            "--runs",
            run.to_str().unwrap(),
            "--exact",
            run.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ],
        None,
    ));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let text = v.to_string();
    for key in ["max_pop0", "max_coherence", "final_pop0", "final_coherence"] {
        for entry in v["entries"].as_array().unwrap() {
            assert_eq!(entry["vs_reference"][key].as_f64().unwrap(), 0.0, "{key}: {text}");
        }
    }
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"model": "tully1", "n_traj": 0}"#).unwrap();
    let out = ctmqc(&["run", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], None);
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());

    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"model": "tully1", "bogus": 1}"#).unwrap();
    assert!(!ctmqc(&["run", "--config", unknown.to_str().unwrap()], None).status.success());

    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert!(!ctmqc(&["compare", "--runs", empty.to_str().unwrap()], None).status.success());

    assert!(!ctmqc(&["run", "--model", "tully9"], None).status.success());
    assert!(!ctmqc(&["run", "--model", "tully1", "--set", "dt_as=-1"], None).status.success());
}

#[test]
fn config_file_round_trips_through_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    ok(&small_run(&run, &["--set", "qm_variant=cutoff"], None));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("meta.json")).unwrap()).unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, meta["config"].to_string()).unwrap();
    let again = dir.path().join("again");
    ok(&ctmqc(
        &["run", "--config", cfg_path.to_str().unwrap(), "--out", again.to_str().unwrap(), "--seed", "3"],
        None,
    ));
    assert_eq!(
        std::fs::read(run.join("observables.csv")).unwrap(),
        std::fs::read(again.join("observables.csv")).unwrap()
    );
}
