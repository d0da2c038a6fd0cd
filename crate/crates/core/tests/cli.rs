use std::fs;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rough-pme"))
}

#[test]
fn lists_and_describes() {
    let out = bin().arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "oracle"));
    assert_eq!(text.lines().count(), 13);

    let out = bin().args(["describe", "cocycle"]).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("experiment = \"cocycle\""));

    let out = bin().args(["describe", "unknown"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    };

    let ok = write(
        "ok.toml",
        "experiment = \"fbm-covariance\"\n[params]\nsamples = 300\nhursts = [0.5]\n",
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .arg("run")
        .arg(&ok)
        .arg("--out")
        .arg(&out_dir)
        .args(["--seed", "5", "--threads", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 5"));

    // An impossible tolerance turns into an assertion failure.
    let strict = write(
        "strict.toml",
        "experiment = \"fbm-covariance\"\n[params]\nsamples = 300\nhursts = [0.5]\n[tolerances]\nstandard_errors = 1e-9\n",
    );
    assert_eq!(bin().arg("run").arg(&strict).output().unwrap().status.code(), Some(1));

    let bad = write("bad.toml", "experiment = \"oracle\"\n[grid]\nnonsense = 1\n");
    assert_eq!(bin().arg("run").arg(&bad).output().unwrap().status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(bin().arg("run").arg(&missing).output().unwrap().status.code(), Some(2));

    // A Newton budget of one iteration with no halvings cannot solve the step.
    let solver = write(
        "solver.toml",
        "experiment = \"oracle\"\n[solver]\nnewton_max = 1\nmax_halvings = 0\nnewton_tol = 1e-15\n",
    );
    let out = bin().arg("run").arg(&solver).output().unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
