use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stlgru(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stlgru"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small synthetic dataset in `dir`: 8 nodes, 600 steps.
fn small_dataset(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("synth.toml");
    fs::write(&cfg, "[synthetic]\nnodes = 8\nsteps = 600\n").unwrap();
    let o = stlgru(&["synth", "--config", s(&cfg), "--out", s(dir)]);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("synthetic.stsf")
}

const FAST: &[&str] = &["--epochs", "2", "--hidden-dim", "8", "--embed-dim", "4", "--horizon", "3,6"];

fn train(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train", "--data", s(data), "--out", s(out)];
    args.extend_from_slice(FAST);
    args.extend_from_slice(extra);
    stlgru(&args)
}

#[test]
fn gradcheck_passes() {
    let o = stlgru(&["gradcheck", "--seed", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("max relative error"));
    assert!(text.contains("psi"));
}

#[test]
fn unknown_flag_is_usage_error() {
    let o = stlgru(&["train", "--not-a-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_value_is_usage_error() {
    let o = stlgru(&["inspect", "--tau", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = stlgru(&["inspect", "--hidden-init", "gaussian(-1)"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn train_without_data_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = stlgru(&["train", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--data"));
}

#[test]
fn missing_data_file_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.stsf");
    let o = stlgru(&["train", "--data", s(&missing), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    assert!(dir.path().join("graph.csv").exists());

    let o = train(&data, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let history = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(history.starts_with("# config: {"));
    assert_eq!(history.lines().count(), 2 + 2);

    let ck = dir.path().join("checkpoint.json");
    let o = stlgru(&["eval", "--data", s(&data), "--checkpoint", s(&ck), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().skip(1).collect();
    assert_eq!(rows[0], "horizon,mae,rmse,mape,n_evaluated,masked_count");
    // Horizons not given on the command line: defaults that fit T' = 6.
    assert!(rows[1].starts_with("3,"));
    assert!(rows[2].starts_with("6,"));
    assert!(rows[3].starts_with("avg,"));
    assert_eq!(rows.len(), 4);

    let o = stlgru(&[
        "eval", "--data", s(&data), "--checkpoint", s(&ck), "--out", s(dir.path()), "--horizon", "12",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("horizon 12"));
}

#[test]
fn eval_on_mismatched_nodes_names_both() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let o = train(&data, dir.path(), &[]);
    assert!(o.status.success(), "{}", stderr(&o));

    let other = dir.path().join("other");
    let o = stlgru(&["synth", "--out", s(&other)]);
    assert!(o.status.success());
    let o = stlgru(&[
        "eval",
        "--data",
        s(&other.join("synthetic.stsf")),
        "--checkpoint",
        s(&dir.path().join("checkpoint.json")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("N = 8") && err.contains("N = 20"), "{err}");
}

#[test]
fn identical_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let data = small_dataset(dir.path());
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = train(&data, &out, &["--seed", "11"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let ck = out.join("checkpoint.json");
        let o = stlgru(&["eval", "--data", s(&data), "--checkpoint", s(&ck), "--out", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
        // The echoed config names the output directory; compare the rest.
        let body: String = metrics.lines().skip(1).collect::<Vec<_>>().join("\n");
        outputs.push((fs::read(ck).unwrap(), body));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "horizons = [2, 4]\n[model]\nhidden_dim = 16\ntau = 0.7\n[train]\nepochs = 3\nlearning_rate = 0.01\n",
    )
    .unwrap();
    let o = stlgru(&["inspect", "--config", s(&cfg), "--hidden-dim", "12"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    let line = err.lines().find(|l| l.starts_with("config: ")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&line["config: ".len()..]).unwrap();
    assert_eq!(v["model"]["hidden_dim"], 12);
    assert_eq!(v["model"]["tau"], 0.7);
    assert_eq!(v["model"]["horizon"], 4);
    assert_eq!(v["train"]["epochs"], 3);
    assert_eq!(v["train"]["learning_rate"], 0.01);
    assert_eq!(v["train"]["batch_size"], 16);
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "typo = 1\n").unwrap();
    let o = stlgru(&["inspect", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
}
