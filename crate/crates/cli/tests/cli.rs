use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn peerfx(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_peerfx")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = peerfx(args);
    assert_eq!(code, 0, "{args:?} failed: {err}");
    serde_json::from_str(&out).unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

const TOY: &str = "unit_id,attribute,group_id,outcome\ns1,a,A,1\ns2,a,B,2\ns3,b,A,3\ns4,b,B,4\n";

/// Twelve pairs with every (attribute, peer set) cell holding at least two units.
const PAIRS: &str = "unit_id,attribute,group_id,outcome
u1,x,g1,1.0
u2,x,g1,2.0
u3,x,g2,1.5
u4,x,g2,2.5
u5,x,g3,3.0
u6,y,g3,4.0
u7,x,g4,3.5
u8,y,g4,5.0
u9,y,g5,6.0
u10,y,g5,7.0
u11,y,g6,6.5
u12,y,g6,8.0
";

#[test]
fn estimate_toy_matches_sample_means() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "toy.csv", TOY);
    let doc = json(&["estimate", "--data", data.to_str().unwrap()]);
    let cells = doc["result"]["cells"].as_array().unwrap();
    let yhat = |a: u64, r: u64| cells.iter().find(|c| c["attribute"] == a && c["r"] == r).unwrap()["yhat"].clone();
    assert_eq!(f(&yhat(1, 2)), 1.5);
    assert_eq!(f(&yhat(2, 1)), 3.5);
    assert!(yhat(1, 1).is_null());
    assert_eq!(doc["result"]["inference"]["conditional_on_observed_composition"], true);
    assert_eq!(doc["attribute_labels"][1]["label"], "b");
    assert_eq!(doc["space"]["peer_sets"][1], "2");
    assert_eq!(doc["version"], concat!("peerfx ", env!("CARGO_PKG_VERSION")));
    assert_eq!(doc["config"]["design"], "rp");
}

#[test]
fn unconditional_estimation_uses_random_partitioning() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "pairs.csv", PAIRS);
    let data = data.to_str().unwrap();
    let cond = json(&["estimate", "--data", data]);
    let raw = json(&["estimate", "--data", data, "--unconditional"]);
    assert_eq!(raw["result"]["inference"]["kernel"]["kind"], "rp");
    assert_eq!(cond["result"]["inference"]["kernel"]["kind"], "cr");
    // inverse-probability weighting differs from the cell mean under random partitioning
    let y = |d: &Value| f(&d["result"]["cells"][0]["yhat"]);
    assert_ne!(y(&cond), y(&raw));
    assert!(raw["result"]["joint"]["unavailable"].is_string());
    assert!(cond["result"]["joint"]["blocks"].is_array());
}

#[test]
fn plot_data_and_target() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "pairs.csv", PAIRS);
    let doc = json(&["estimate", "--data", data.to_str().unwrap(), "--emit-plot-data", "--target-attr", "1", "--contrasts", "1-2"]);
    let rows = doc["result"]["plot_data"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        assert!(f(&r["ci_lower"]) <= f(&r["mean"]) && f(&r["mean"]) <= f(&r["ci_upper"]));
    }
    assert_eq!(doc["result"]["subgroup_contrasts"].as_array().unwrap().len(), 2);
    assert_eq!(doc["result"]["target"]["selected"].as_array().unwrap().len(), 4);
}

#[test]
fn probs_for_two_by_two() {
    let doc = json(&["probs", "--counts", "2,2", "--k", "1"]);
    assert_eq!(doc["result"]["pi_exact"][0][0], "1/3");
    assert!((f(&doc["result"]["pi"][0][0]) - 1.0 / 3.0).abs() < 1e-16);
    let cr = json(&["probs", "--counts", "2,2", "--k", "1", "--design", "cr", "--l", "0,2,0"]);
    assert_eq!(cr["result"]["pi_exact"][0][1], "1");
    for pair in cr["result"]["pairs"].as_array().unwrap() {
        if !pair["c"].is_null() {
            assert_eq!(f(&pair["c"]), 0.0);
        }
    }
}

#[test]
fn exhaustive_test_on_four_units() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "toy.csv", TOY);
    let doc = json(&["test", "--data", data.to_str().unwrap()]);
    for row in doc["result"]["tests"].as_array().unwrap() {
        assert_eq!(row["exhaustive"], true);
        assert_eq!(row["draws"], 3);
        let p = f(&row["p_value"]);
        assert!([1.0 / 3.0, 2.0 / 3.0, 1.0].iter().any(|q| (p - q).abs() < 1e-15), "{p}");
    }
    let sub = json(&["test", "--data", data.to_str().unwrap(), "--null", "2"]);
    assert_eq!(sub["result"]["tests"].as_array().unwrap().len(), 2);
}

#[test]
fn optimize_and_fiducial() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "pairs.csv", PAIRS);
    let data = data.to_str().unwrap();
    let opt = json(&["optimize", "--data", data, "--new-counts", "x=4,y=4"]);
    let l: Vec<u64> = serde_json::from_value(opt["result"]["l"].clone()).unwrap();
    assert_eq!(l.len(), 3);
    assert_eq!(2 * l[0] + l[1], 4);
    let fid = json(&["fiducial", "--data", data, "--new-counts", "4,4", "--draws", "2000", "--seed", "7"]);
    let rows = fid["result"]["rows"].as_array().unwrap();
    let total: f64 = rows.iter().map(|r| f(&r["probability"])).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let probs: Vec<f64> = rows.iter().map(|r| f(&r["probability"])).collect();
    assert!(probs.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn fiducial_with_zero_variance_is_a_point_mass() {
    let dir = tempfile::tempdir().unwrap();
    let body = "unit_id,attribute,group_id,outcome
a1,x,g1,1
a2,x,g1,1
a3,x,g2,1
a4,x,g2,1
a5,x,g3,2
b5,y,g3,5
a6,x,g4,2
b6,y,g4,5
b1,y,g5,3
b2,y,g5,3
b3,y,g6,3
b4,y,g6,3
";
    let data = write(dir.path(), "flat.csv", body);
    let doc = json(&["fiducial", "--data", data.to_str().unwrap(), "--new-counts", "2,2", "--draws", "500"]);
    let rows = doc["result"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(f(&rows[0]["probability"]), 1.0);
    let opt = json(&["optimize", "--data", data.to_str().unwrap(), "--new-counts", "2,2"]);
    assert_eq!(rows[0]["l"], opt["result"]["l"]);
}

#[test]
fn assign_respects_composition() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "units.csv", "unit_id,attribute\nu1,1\nu2,1\nu3,1\nu4,2\nu5,2\nu6,2\n");
    let (code, out, _) = peerfx(&["assign", "--data", data.to_str().unwrap(), "--k", "1", "--design", "cr", "--l", "0,3,0", "--seed", "2"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "unit_id,group_id");
    assert_eq!(lines.len(), 7);
    let doc = json(&["assign", "--data", data.to_str().unwrap(), "--k", "1", "--design", "cr", "--l", "0,3,0", "--format", "json"]);
    assert_eq!(doc["result"]["composition"], serde_json::json!([0, 3, 0]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let toy = write(dir.path(), "toy.csv", TOY);
    let toy = toy.to_str().unwrap();
    let mixed = write(dir.path(), "mixed.csv", "unit_id,attribute,group_id,outcome\na,1,g1,1\nb,1,g1,1\nc,2,g1,1\nd,2,g2,1\n");
    let missing = write(dir.path(), "missing.csv", "unit_id,attribute,group_id,outcome\na,1,g1,1\nb,2,g1,\n");
    // validation
    assert_eq!(peerfx(&["estimate", "--data", mixed.to_str().unwrap()]).0, 1);
    assert_eq!(peerfx(&["estimate", "--data", missing.to_str().unwrap()]).0, 1);
    assert_eq!(peerfx(&["estimate", "--data", toy, "--contrasts", "1-1"]).0, 1);
    assert_eq!(peerfx(&["estimate", "--data", toy, "--alpha", "1.5"]).0, 1);
    assert_eq!(peerfx(&["estimate", "--data", toy, "--design", "cr", "--l", "1,0,1"]).0, 1);
    assert_eq!(peerfx(&["probs", "--counts", "2,1", "--k", "1"]).0, 1);
    assert_eq!(peerfx(&["oracle-check", "--suite", "nope"]).0, 1);
    assert_eq!(peerfx(&["frobnicate"]).0, 1);
    // computation: no unit of attribute 1 had a peer of attribute 1
    let (code, _, err) = peerfx(&["optimize", "--data", toy, "--new-counts", "2,2"]);
    assert_eq!(code, 2);
    assert!(err.contains("attribute 1, peer set 1"), "{err}");
    // oracle
    let doc = json(&["oracle-check", "--suite", "kernel"]);
    assert_eq!(doc["result"]["passed"], true);
}
