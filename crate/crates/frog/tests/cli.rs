//! End-to-end tests of the `frog` binary: exit codes, artifact layout,
//! report schema, and cross-run determinism.

use std::path::Path;
use std::process::{Command, Output};

fn frog() -> Command {
    Command::new(env!("CARGO_BIN_EXE_frog"))
}

fn run(args: &[&str], out_dir: &Path) -> Output {
    frog()
        .args(args)
        .env("FROG_OUT_DIR", out_dir)
        .output()
        .expect("spawn frog")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn config_errors_exit_2_and_name_the_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "methd = \"frog\"\n").unwrap();
    let out = run(
        &["unlearn", "--config", bad.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("methd"), "{}", stderr_of(&out));

    let out = run(&["unlearn", "--method", "bogus"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("bogus"));

    // clap usage errors share the config exit code
    let out = run(&["no-such-command"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    // Valid config pointing at a dataset directory that cannot be loaded.
    let missing = tmp.path().join("nope");
    std::fs::create_dir_all(&missing).unwrap();
    let out = run(
        &["unlearn", "--dataset", missing.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", stderr_of(&out));
}

#[test]
fn synth_then_unlearn_produces_full_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = run(
        &["synth", "--out-dir", data.to_str().unwrap()],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    for f in ["edges.tsv", "features.csv", "sensitive.csv", "manifest.json"] {
        assert!(data.join(f).exists(), "missing {f}");
    }

    let run_dir = tmp.path().join("run");
    let out = run(
        &[
            "unlearn",
            "--dataset",
            data.to_str().unwrap(),
            "--method",
            "frog",
            "--seeds",
            "0",
            "--epochs",
            "80",
            "--out-dir",
            run_dir.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    for f in [
        "config.toml",
        "config.sha256",
        "forget_0.tsv",
        "structure_0.json",
        "trace_0.csv",
        "report.csv",
        "report.json",
        "checkpoints/original_0.json",
        "checkpoints/unlearned_0.json",
    ] {
        assert!(run_dir.join(f).exists(), "missing {f}");
    }

    let csv = std::fs::read_to_string(run_dir.join("report.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "dataset,method,seed,forget_pct,auroc_test,knowledge_gap,mi_ratio,\
         delta_dp,delta_eo,delta_sp,rho_before,rho_after,wall_seconds"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 13);
    assert_eq!(row[1], "frog");
    // every numeric column parses and is finite
    for col in &row[3..] {
        let v: f64 = col.parse().unwrap();
        assert!(v.is_finite());
    }

    // evaluate recomputes identical metrics from the stored artifacts
    let before = strip_wall(&csv);
    let out = run(
        &["evaluate", "--run-dir", run_dir.to_str().unwrap()],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let after = strip_wall(&std::fs::read_to_string(run_dir.join("report.csv")).unwrap());
    assert_eq!(before, after);
}

fn strip_wall(csv: &str) -> String {
    csv.lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split(',').collect();
            cols.pop();
            cols.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn identical_seed_and_config_runs_are_byte_identical_modulo_wall_clock() {
    let tmp = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["r1", "r2"] {
        let dir = tmp.path().join(name);
        let out = run(
            &[
                "unlearn",
                "--method",
                "frog-joint",
                "--seeds",
                "0,1",
                "--epochs",
                "80",
                "--out-dir",
                dir.to_str().unwrap(),
            ],
            tmp.path(),
        );
        assert!(out.status.success(), "{}", stderr_of(&out));
        reports.push(dir);
    }
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(
        strip_wall(&String::from_utf8(read(&reports[0], "report.csv")).unwrap()),
        strip_wall(&String::from_utf8(read(&reports[1], "report.csv")).unwrap())
    );
    // config.toml echoes the differing --out-dir, so it is excluded here.
    for f in [
        "trace_0.csv",
        "trace_1.csv",
        "forget_0.tsv",
        "structure_0.json",
        "checkpoints/unlearned_0.json",
        "checkpoints/unlearned_1.json",
    ] {
        assert_eq!(read(&reports[0], f), read(&reports[1], f), "{f} differs");
    }
}

#[test]
fn worstcase_selection_feeds_back_as_a_forget_file() {
    let tmp = tempfile::tempdir().unwrap();
    let wc = tmp.path().join("wc");
    let out = run(
        &[
            "worstcase",
            "--seeds",
            "0",
            "--epochs",
            "80",
            "--k",
            "3",
            "--out-dir",
            wc.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let forget = wc.join("forget_0.tsv");
    let listed = std::fs::read_to_string(&forget).unwrap();
    assert_eq!(listed.lines().count(), 4); // header + 3 edges

    let run_dir = tmp.path().join("run");
    let out = run(
        &[
            "unlearn",
            "--method",
            "gnndelete",
            "--seeds",
            "0",
            "--epochs",
            "80",
            "--forget-mode",
            "file",
            "--forget-file",
            forget.to_str().unwrap(),
            "--out-dir",
            run_dir.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    // the run's recorded forget set is exactly the selected one
    assert_eq!(
        std::fs::read_to_string(run_dir.join("forget_0.tsv")).unwrap(),
        listed
    );
}

#[test]
fn verify_subcommands_pass_and_write_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        &["verify", "--theorem", "5.1", "--instances", "100"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(tmp.path().join("verify/verify_5_1.json").exists());

    let out = run(
        &["verify", "--theorem", "3.1", "--trials", "16"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(tmp.path().join("verify/verify_3_1.json").exists());

    let out = run(&["verify", "--theorem", "9.9"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}
