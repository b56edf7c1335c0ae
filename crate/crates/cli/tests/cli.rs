use std::path::Path;
use std::process::{Command, Output};

fn cim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cim")).current_dir(dir).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn simulate_sidecar_and_cim_direction() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json(&cim(dir.path(), &["simulate", "--system", "linear", "--n", "180", "--seed", "1", "--csv", "s.csv"]));
    assert_eq!(cfg["n"], 180);
    assert_eq!(cfg["seed"], 1);
    let r = json(&cim(dir.path(), &["cim", "--input", "s.csv", "--source", "x", "--target", "y", "--max-lag", "4"]));
    assert_eq!(r["lag"], 1);
    assert_eq!(r["source"], "x");
    let d = r["dimension"].as_f64().unwrap();
    assert!((r["cim"].as_f64().unwrap() - 1.0 / d).abs() < 1e-15);
}

#[test]
fn topo_writes_barcode_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    // 4-cycle on weights 1..4, then the chords 5 and 6 fill it
    let rows = [
        ["0", "1", "5", "4"],
        ["1", "0", "2", "6"],
        ["5", "2", "0", "3"],
        ["4", "6", "3", "0"],
    ];
    let text: String = rows.iter().map(|r| r.join(",") + "\n").collect();
    std::fs::write(dir.path().join("a.csv"), text).unwrap();
    let out = cim(dir.path(), &["topo", "--input", "a.csv", "--barcode", "b.csv", "--trajectory", "t.csv", "--out", "topo.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("topo.json")).unwrap()).unwrap();
    // beta0 = 4,3,2,1,1,1,1 and beta1 = 0,0,0,0,1,0,0
    assert_eq!(v["integrated_betti"]["0"], 13);
    assert_eq!(v["integrated_betti"]["1"], 1);
    let bars = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert!(bars.lines().any(|l| l == "1,4,5"));
    assert!(bars.lines().any(|l| l == "0,0,-1"));
    let traj = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(traj.lines().next(), Some("rank,beta0,beta1"));
    assert_eq!(traj.lines().last(), Some("6,1,0"));
}

#[test]
fn bad_input_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.csv"), "x,y\n1,2\n1,3\n1,4\n").unwrap();
    let out = cim(dir.path(), &["cim", "--input", "c.csv", "--source", "y", "--target", "x", "--max-lag", "1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = cim(dir.path(), &["connmap", "--input", "missing.csv", "--window", "0,10", "--adjacency", "a", "--lags", "l"]);
    assert!(!out.status.success());
}
