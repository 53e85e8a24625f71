use std::path::Path;
use std::process::{Command, Output};

fn ais(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ais")).args(args).output().expect("binary runs")
}

fn summary(dir: &Path) -> serde_json::Value {
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    // wall-clock time is the one field allowed to differ between runs
    v.as_object_mut().unwrap().remove("runtime_s");
    v
}

/// Same width on every row; time strictly increasing, or just non-decreasing
/// for logs where several entries can share a tick.
fn check_csv(path: &Path, strict: bool) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut rows = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let width = rows.headers().unwrap().len();
    assert!(width > 1, "{}", path.display());
    let mut last = f64::NEG_INFINITY;
    for r in rows.records() {
        let r = r.unwrap();
        assert_eq!(r.len(), width, "{}", path.display());
        let t: f64 = r[0].parse().unwrap();
        assert!(t > last || !strict && t == last, "{}: {t} after {last}", path.display());
        last = t;
    }
}

#[test]
fn size_prints_the_table() {
    let o = ais(&["size"]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    for needle in ["34.6", "185.0", "211.3", "61.3", "200.0", "100.0"] {
        assert!(s.contains(needle), "{needle} missing from\n{s}");
    }
    let o = ais(&["size", "--v-r-mps", "0", "--v-theta-mps", "0"]);
    assert!(!o.status.success());
}

#[test]
fn mission_writes_artifacts_and_repeats() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = ais(&["mission", "--seed", "3", "--duration-s", "60", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["telemetry_uav1.csv", "telemetry_uav2.csv", "telemetry_uav3.csv", "events.csv", "task_log.csv"] {
        check_csv(&a.join(f), f.starts_with("telemetry"));
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(summary(&a), summary(&b));
    assert_eq!(summary(&a)["seed"], 3);
}

#[test]
fn zero_duration_leaves_empty_telemetry() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ais(&["mission", "--duration-s", "0", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = std::fs::read_to_string(tmp.path().join("telemetry_uav1.csv")).unwrap();
    assert_eq!(t.lines().count(), 1);
    assert_eq!(summary(tmp.path())["ticks"], 0);
}

#[test]
fn malformed_scenario_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.json");
    std::fs::write(&p, "{\n  \"world\": {\"target\": {\"speed_mps\": \"fast\"}}\n}").unwrap();
    let o = ais(&["mission", "--scenario", p.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("world.target.speed_mps") && err.contains("line 2"), "{err}");
    assert!(!tmp.path().join("summary.json").exists());
}

#[test]
fn scenarios_write_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = ais(&["scenario", "avoid", "--offset-m", "0.5", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    check_csv(&tmp.path().join("avoid_trace.csv"), true);
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("avoid.json")).unwrap()).unwrap();
    assert!(r["min_distance_m"].as_f64().unwrap() >= 3.0);

    let o = ais(&["scenario", "grab", "--seed", "4", "--noiseless", "--out", out]);
    assert!(o.status.success());
    check_csv(&tmp.path().join("grab_trace.csv"), true);
    let g: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("grab.json")).unwrap()).unwrap();
    assert_eq!(g["success"], true);

    let o = ais(&["scenario", "track", "--duration-s", "30", "--out", out]);
    assert!(o.status.success());
    check_csv(&tmp.path().join("track_trace.csv"), true);

    let o = ais(&["scenario", "fence", "--out", out]);
    assert!(o.status.success());
    let f: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("fence.json")).unwrap()).unwrap();
    assert_eq!(f["breaches"], 0);
}

#[test]
fn shipped_scenario_is_the_nominal_one() {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/nominal.json");
    let c = ais_core::mission::ScenarioConfig::load(&p).unwrap();
    assert_eq!(c, ais_core::mission::ScenarioConfig::nominal());
}
