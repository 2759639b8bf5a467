use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "k = 4\nm = 3\nbeta = 0.05\nR = 5\ntol = 1e-6\nL = 14\nh = 0.25\nks = 12\nsamples = 100\n";

fn ringbump(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ringbump"))
        .env("RUST_LOG", "warn")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

fn failure(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("out/failure.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn ground_state_writes_profiles_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ringbump(dir.path(), "", &["ground-state", "--sech-check"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    for f in ["u0_profile.csv", "v0_profile.csv", "sech.csv", "ground_state.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    assert!(!dir.path().join("out/failure.json").exists());
    let csv = std::fs::read_to_string(dir.path().join("out/sech.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "r,numeric,exact,error");
    let row: Vec<f64> = lines.nth(10).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(row.len(), 4);
    assert!(row[3] < 1e-6);
}

#[test]
fn invalid_assumption_names_the_clause() {
    let dir = tempfile::tempdir().unwrap();
    let out = ringbump(dir.path(), "m = 0.4\n", &["corrector"]);
    assert_eq!(out.status.code(), Some(2));
    let f = failure(dir.path());
    assert_eq!(f["subcommand"], "corrector");
    assert_eq!(f["violated"][0], "configuration valid");
    assert!(f["error"].as_str().unwrap().contains("m > 1/2"));
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = ringbump(dir.path(), "gamma = 3\n", &["bounds"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(failure(dir.path())["error"].as_str().unwrap().contains("unknown key `gamma`"));
}

#[test]
fn small_corrector_run_converges_and_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let out = ringbump(dir.path(), SMALL, &["corrector", "--dump"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/corrector.json")).unwrap()).unwrap();
    assert_eq!(summary["result"]["converged"], true);
    assert!(summary["result"]["contraction_factor"].as_f64().unwrap() < 1.0);
    let dump = std::fs::File::open(dir.path().join("out/u.dump")).unwrap();
    let u = ringbump::Field::read_dump(std::io::BufReader::new(dump)).unwrap();
    assert!(u.max_abs() > 0.0);
}

#[test]
fn diverging_corrector_writes_failure_record() {
    let dir = tempfile::tempdir().unwrap();
    // The middle of this S_k sits too close to the origin for the iteration.
    let cfg = SMALL.replace("R = 5\n", "");
    let out = ringbump(dir.path(), &cfg, &["corrector"]);
    assert_eq!(out.status.code(), Some(2));
    let f = failure(dir.path());
    assert_eq!(f["violated"][0], "corrector converges");
    assert!(f["error"].as_str().unwrap().contains("steps"));
}

#[test]
fn bounds_records_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = ringbump(dir.path(), SMALL, &["--seed", "11", "bounds"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/bounds.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 11);
}
