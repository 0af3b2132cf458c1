//! End-to-end checks of the command line binary: exit codes, artifact
//! layout, overwrite protection, eval consistency, config precedence,
//! dataset export, and table assembly.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_quangcn"));
    // Keep runs hermetic: the environment must not redirect the data root.
    cmd.env_remove("QUANGCN_DATA_ROOT");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should launch")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code (signal?)")
}

/// Shorthand for a fast training invocation on the built-in corpus.
fn quick_train(extra: &[&str], out_dir: &Path) -> Output {
    let out_s = out_dir.to_str().unwrap().to_string();
    let mut args = vec![
        "train".to_string(),
        "--name".into(),
        "SYNTH".into(),
        "--epochs".into(),
        "2".into(),
        "--seeds".into(),
        "0,1".into(),
        "--noise".into(),
        "none".into(),
        "--out".into(),
        out_s,
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    bin().args(&args).output().expect("binary should launch")
}

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["--version"][..], &["train", "--help"][..]] {
        let out = run(args);
        assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
    }
    assert!(stdout(&run(&["--help"])).contains("train"));
}

#[test]
fn usage_errors_exit_one() {
    let cases: &[&[&str]] = &[
        &["frobnicate"],
        &["train"],                                  // missing required --out
        &["train", "--out", "/tmp/x", "--lr", "fast"],
        &["train", "--out", "/tmp/x", "--noise", "garbage"],
        &["train", "--out", "/tmp/x", "--seeds", "1,1"],
        &["train", "--out", "/tmp/x", "--model", "perceptron"],
        &["table", "bogus-kind", "/tmp"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(code(&out), 1, "{args:?} should be a usage error: {}", stderr(&out));
        assert!(!stderr(&out).is_empty(), "{args:?} should explain itself");
    }
}

#[test]
fn missing_dataset_fails_before_writing_anything() {
    let tmp = tempdir().unwrap();
    let out_dir = tmp.path().join("run");
    let out = bin()
        .args(["train", "--name", "NO_SUCH_SET", "--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(
        !out_dir.exists(),
        "a failed dataset lookup must not leave a partial run directory"
    );
}

#[test]
fn train_writes_artifacts_and_refuses_silent_overwrite() {
    let tmp = tempdir().unwrap();
    let dir = tmp.path().join("run");
    let first = quick_train(&["--model", "mlp"], &dir);
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    for file in ["result.txt", "seeds.csv", "meta.txt", "checkpoint_seed0.bin", "checkpoint_seed1.bin"] {
        assert!(dir.join(file).exists(), "missing {file}");
    }
    let result = std::fs::read_to_string(dir.join("result.txt")).unwrap();
    assert!(result.starts_with("format = 1"));
    assert!(result.contains("[config]") && result.contains("[seeds]") && result.contains("[aggregate]"));
    assert!(result.contains("model = mlp"));

    let again = quick_train(&["--model", "mlp"], &dir);
    assert_eq!(code(&again), 1, "rerun without --force must refuse");
    let same = std::fs::read_to_string(dir.join("result.txt")).unwrap();
    assert_eq!(result, same, "refused rerun must not touch the artifacts");

    let forced = quick_train(&["--model", "mlp", "--force"], &dir);
    assert_eq!(code(&forced), 0, "{}", stderr(&forced));
    let replayed = std::fs::read_to_string(dir.join("result.txt")).unwrap();
    assert_eq!(result, replayed, "identical config must reproduce identical results");
}

#[test]
fn eval_reproduces_training_scores() {
    let tmp = tempdir().unwrap();
    let dir = tmp.path().join("run");
    let train = quick_train(&["--model", "quanmlp", "--qubits", "3", "--layers", "1"], &dir);
    assert_eq!(code(&train), 0, "{}", stderr(&train));

    let eval = bin().arg("eval").arg(&dir).output().unwrap();
    assert_eq!(code(&eval), 0, "{}", stderr(&eval));
    let report = stdout(&eval);
    assert!(!report.contains("DRIFT"), "clean re-scoring drifted:\n{report}");
    assert!(report.contains("noise none"));

    // Zero gate error and zero readout flip must reproduce the clean
    // accuracy exactly, trajectory count notwithstanding.
    let null_noise = bin()
        .arg("eval")
        .arg(&dir)
        .args(["--noise", "0,0,0,1"])
        .output()
        .unwrap();
    assert_eq!(code(&null_noise), 0, "{}", stderr(&null_noise));
    for line in stdout(&null_noise).lines().filter(|l| l.starts_with("seed ")) {
        let clean = field_after(line, "clean ");
        let noisy = field_after(line, "noisy ");
        assert_eq!(clean, noisy, "null noise must score exactly clean: {line}");
    }
}

/// With gate errors at zero the readout flip is applied analytically, so the
/// trajectory count and stream seed cannot matter.
#[test]
fn readout_only_noise_ignores_trajectory_count() {
    let tmp = tempdir().unwrap();
    let dir = tmp.path().join("run");
    let train = quick_train(
        &["--model", "quanmlp", "--qubits", "3", "--layers", "1", "--skip", "false"],
        &dir,
    );
    assert_eq!(code(&train), 0, "{}", stderr(&train));

    let a = bin().arg("eval").arg(&dir).args(["--noise", "0,0,0.5,1"]).output().unwrap();
    let b = bin().arg("eval").arg(&dir).args(["--noise", "0,0,0.5,4096"]).output().unwrap();
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    let report_a = stdout(&a);
    let report_b = stdout(&b);
    assert_eq!(
        report_a.replace(",4096", ",1"),
        report_b.replace(",4096", ",1"),
        "gate-noiseless eval must not depend on trajectories"
    );
    assert!(report_a.contains("noisy "));
}

fn field_after<'a>(line: &'a str, tag: &str) -> &'a str {
    let at = line.find(tag).unwrap_or_else(|| panic!("no {tag:?} in {line:?}"));
    let rest = &line[at + tag.len()..];
    rest.split_whitespace().next().unwrap()
}

#[test]
fn flags_override_config_file_keys() {
    let tmp = tempdir().unwrap();
    let cfg_path = tmp.path().join("exp.cfg");
    std::fs::write(
        &cfg_path,
        "# experiment settings\nmodel = mlp\nepochs = 9\nlr = 0.05\nseeds = 0\nnoise = none\n",
    )
    .unwrap();
    let dir = tmp.path().join("run");
    let out = bin()
        .args(["train", "--name", "SYNTH", "--config"])
        .arg(&cfg_path)
        .args(["--epochs", "2", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let result = std::fs::read_to_string(dir.join("result.txt")).unwrap();
    assert!(result.contains("epochs = 2"), "flag must beat the file key");
    assert!(result.contains("lr = 0.05"), "file key must beat the default");
    assert!(result.contains("model = mlp"));
}

#[test]
fn exported_tu_files_load_back_identically() {
    let tmp = tempdir().unwrap();
    let export_root = tmp.path().join("exported");
    let built_in = bin()
        .args(["inspect-dataset", "--name", "SYNTH", "--export"])
        .arg(&export_root)
        .output()
        .unwrap();
    assert_eq!(code(&built_in), 0, "{}", stderr(&built_in));
    assert!(export_root.join("SYNTH").join("SYNTH_A.txt").exists());

    let reloaded = bin()
        .args(["inspect-dataset", "--name", "SYNTH", "--dataset"])
        .arg(&export_root)
        .output()
        .unwrap();
    assert_eq!(code(&reloaded), 0, "{}", stderr(&reloaded));

    // Identical description apart from the source line.
    let skip_source = |s: &str| {
        s.lines()
            .filter(|l| !l.contains("exported") && !l.contains("corpus") && !l.contains("TU files"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(
        skip_source(&stdout(&built_in)),
        skip_source(&stdout(&reloaded)),
        "reloaded dataset must describe identically"
    );
    assert!(stdout(&reloaded).contains("graphs: 188"));
}

#[test]
fn tables_assemble_finished_runs() {
    let tmp = tempdir().unwrap();
    let root = tmp.path().join("results");

    // A models table needs one finished run per family.
    for model in ["mlp", "sgc", "gcn", "quanmlp", "quansgc", "quangcn"] {
        let dir = root.join(model);
        let mut extra = vec!["--model", model];
        if model.starts_with("quan") {
            extra.extend_from_slice(&["--qubits", "3", "--layers", "1"]);
        }
        let out = quick_train(&extra, &dir);
        assert_eq!(code(&out), 0, "{model}: {}", stderr(&out));
    }

    let csv_dir = tmp.path().join("csv");
    let table = bin()
        .args(["table", "models"])
        .arg(&root)
        .arg("--csv-dir")
        .arg(&csv_dir)
        .output()
        .unwrap();
    assert_eq!(code(&table), 0, "{}", stderr(&table));
    let text = stdout(&table);
    for model in ["mlp", "sgc", "gcn", "quanmlp", "quansgc", "quangcn"] {
        assert!(text.contains(model), "table should list {model}:\n{text}");
    }
    let csv = std::fs::read_to_string(csv_dir.join("models.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7, "header plus six rows");

    // The same root lacks the mitigation variants, which is a missing-runs
    // runtime failure, not a usage error.
    let mitigation = bin().args(["table", "mitigation"]).arg(&root).output().unwrap();
    assert_eq!(code(&mitigation), 2, "{}", stderr(&mitigation));
    assert!(stderr(&mitigation).contains("skip"), "should name what is missing");
}
