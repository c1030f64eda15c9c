use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn marble(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marble"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("MARBLE_WORKERS")
        .output()
        .expect("spawn marble")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn negative_lambda_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = marble(&["bessel", "--lambda", "-1"], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("lambda"));
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(&cfg, "lambda=3\nbogus=1\n").unwrap();
    let o = marble(&["bessel", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn config_file_values_are_echoed_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    fs::write(&cfg, "# ladder\nlambda = 8\nreplicas = 50\nlevels = 16,64\n").unwrap();
    let o = marble(&["sweep", "--config", cfg.to_str().unwrap(), "--replicas", "40"], dir.path());
    assert!(matches!(code(&o), 0 | 1), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let header: Vec<&str> = csv.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(header.contains(&"# lambda=8"));
    assert!(header.contains(&"# replicas=40"));
    assert!(header.contains(&"# seed=1"), "defaults are echoed too: {header:?}");
    let rows = csv.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1 + 2 * 40);
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["bessel", "--replicas", "500", "--seed", "11"];
    let first = marble(&args, dir.path());
    assert!(matches!(code(&first), 0 | 1));
    let csv = fs::read(dir.path().join("bessel.csv")).unwrap();
    let json = fs::read(dir.path().join("bessel.json")).unwrap();

    let again = Command::new(env!("CARGO_BIN_EXE_marble"))
        .args(args)
        .args(["--workers", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&again), code(&first));
    assert_eq!(fs::read(dir.path().join("bessel.csv")).unwrap(), csv);
    assert_eq!(fs::read(dir.path().join("bessel.json")).unwrap(), json);
}

#[test]
fn marble_render_writes_stable_ppm() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "marble", "--lambda", "3", "--n", "64", "--t", "0.05", "--render", "--svg", "--width", "40", "--height", "30",
    ];
    let o = marble(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ppm = fs::read(dir.path().join("marble.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n# "));
    let text = String::from_utf8_lossy(&ppm[..ppm.len().min(2000)]).into_owned();
    assert!(text.contains("\n40 30\n255\n"));
    let pixels = ppm.len() - (text.find("\n40 30\n255\n").unwrap() + "\n40 30\n255\n".len());
    assert_eq!(pixels, 40 * 30 * 3);
    assert!(fs::read_to_string(dir.path().join("marble.svg")).unwrap().contains("<svg"));
    for f in ["marble_events.csv", "marble_front.csv", "marble.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let o = marble(&args, dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(dir.path().join("marble.ppm")).unwrap(), ppm);
}

#[test]
fn marble_rejects_coarse_step() {
    let dir = tempfile::tempdir().unwrap();
    // λ/δ² with δ = 1e-3 is 3e6; dt = 1e-4 breaks the thinning bound
    let o = marble(&["marble", "--lambda", "3", "--n", "1e9", "--dt", "1e-4"], dir.path());
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn vein_and_branching_pass_at_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = marble(&["vein", "--lambda", "0", "--replicas", "3000"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("vein.json")).unwrap()).unwrap();
    assert_eq!(v["report"]["pass"], true);
    assert_eq!(v["provenance"]["command"], "vein");

    let o = marble(&["branching", "--replicas", "4000"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("branching.csv").exists());
}
