use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_assembloid"));
    c.env_remove("ASSEMBLOID_OUT");
    c
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn summary(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 1, "stdout should be one JSON line: {text}");
    serde_json::from_str(&text).unwrap()
}

fn gen(dir: &Path, count: usize) {
    run(bin().args(["gen", "--count", &count.to_string(), "--points-per-part", "32", "--seed", "4", "--out"]).arg(dir));
}

#[test]
fn gen_assemble_evaluate_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, 2);
    let out = tmp.path().join("res");
    let s = summary(&run(bin()
        .args(["assemble", "--iterations", "10", "--snapshot-every", "5", "--level", "moderate", "--seed", "1"])
        .args(["--align-mode", "icp", "--denoise-mode", "literal", "--collisions", "--push-trigger", "above", "--workers", "1"])
        .arg("--dataset")
        .arg(&data)
        .arg("--out")
        .arg(&out)));
    assert_eq!(s["succeeded"], 2);
    assert!(out.join("runs/scene_0000/trial_0/snapshots/iter_0010.ply").is_file());
    let cfg: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["assembly"]["align_mode"], "icp");
    assert_eq!(cfg["assembly"]["collision"]["enabled"], true);
    assert_eq!(cfg["level"], "moderate");

    let e = summary(&run(bin()
        .args(["evaluate", "--rotation-metric", "euler", "--pred"])
        .arg(out.join("predictions/trial_0"))
        .arg("--gt")
        .arg(&data)
        .arg("--out")
        .arg(tmp.path().join("eval"))));
    assert_eq!(e["scenes"].as_array().unwrap().len(), 2);
    assert_eq!(e["scenes"][0]["metrics"]["rotation_metric"], "euler");

    let p = summary(&run(bin().arg("plot").arg(&out)));
    assert_eq!(p["files"].as_array().unwrap().len(), 15);
}

#[test]
fn assemble_reruns_write_identical_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, 1);
    let mut reports = Vec::new();
    for k in 0..2 {
        let out = tmp.path().join(format!("r{k}"));
        run(bin().args(["assemble", "--iterations", "5", "--seed", "9", "--dataset"]).arg(&data).arg("--out").arg(&out));
        reports.push(std::fs::read(out.join("runs/scene_0000/trial_0/report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn output_root_variable_relocates_relative_paths() {
    let tmp = tempfile::tempdir().unwrap();
    run(bin()
        .args(["gen", "--count", "1", "--points-per-part", "8", "--out", "rel"])
        .env("ASSEMBLOID_OUT", tmp.path())
        .current_dir(tmp.path()));
    assert!(tmp.path().join("rel/index.json").is_file());
}

#[test]
fn baseline_command_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, 1);
    let cfg = tmp.path().join("b.json");
    std::fs::write(&cfg, r#"{"schedule": {"steps": 50, "sigma_max": 0.99}, "simple": {"iterations": 10}}"#).unwrap();
    let s = summary(&run(bin().arg("baseline").arg("--config").arg(&cfg).arg("--dataset").arg(&data).arg("--out").arg(tmp.path().join("b"))));
    assert_eq!(s["command"], "baseline");
    assert_eq!(s["succeeded"], 1);
}

#[test]
fn bad_configs_fail_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"trails": 3}"#).unwrap();
    let out = bin().args(["assemble", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("trails"), "{err}");
    assert!(out.stdout.is_empty());

    let out = bin().args(["assemble", "--level", "extreme"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn partial_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, 2);
    std::fs::write(data.join("scene_0001/scene.json"), "{").unwrap();
    let out = bin()
        .args(["assemble", "--iterations", "3", "--dataset"])
        .arg(&data)
        .arg("--out")
        .arg(tmp.path().join("r"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&out);
    assert_eq!(s["failed"][0]["scene"], "scene_0001");
}

#[test]
fn train_denoiser_command() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen(&data, 2);
    let ck = tmp.path().join("model.bin");
    let s = summary(&run(bin().args(["train-denoiser", "--epochs", "2", "--dataset"]).arg(&data).arg("--out").arg(&ck)));
    assert_eq!(s["epochs"], 2);
    assert!(ck.is_file());
}
