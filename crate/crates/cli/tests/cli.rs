use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn relsz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relsz"))
        .args(args)
        .env_remove("RELSZ_SEED")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("report is JSON")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn sampled_lfc_reports_every_pattern() {
    let out = relsz(&["lfc", "--k", "3", "--N", "51", "--random-p", "0.5", "--seed", "1", "--mode", "sampled", "--samples", "64"]);
    let v = json(&out);
    assert_eq!(v["report"]["values"].as_array().unwrap().len(), 64);
    assert_eq!(v["report"]["pattern_count"], 64);
    assert!(v["report"].get("per_pattern").is_none());
    assert_eq!(v["config"]["command"], "lfc");
    assert_eq!(v["config"]["seed"], 1);
}

#[test]
fn verbose_lfc_lists_patterns() {
    let v = json(&relsz(&["lfc", "--N", "13", "--samples", "4", "--verbose"]));
    assert_eq!(v["report"]["per_pattern"].as_array().unwrap().len(), 4);
}

#[test]
fn seed_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_relsz"))
        .args(["ap-density", "--N", "17"])
        .env("RELSZ_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(json(&out)["config"]["seed"], 9);
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.json");
    fs::write(&bad, "{\"J\": [1, 2").unwrap();
    let out = relsz(&["reg-decompose", "--input", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_file_exits_2() {
    let out = relsz(&["count", "--g", "/nonexistent/g.json", "--gtilde", "/nonexistent/t.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn full_enumeration_beyond_the_cap_exits_3() {
    let out = relsz(&["lfc", "--N", "13", "--mode", "full", "--pattern-cap-log2", "4"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn measure_files_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let m = path(dir.path(), "m.json");
    fs::write(&m, r#"{"N": 7, "set": [0, 1, 3]}"#).unwrap();
    let v = json(&relsz(&["gowers", "--set", &m, "--r", "2"]));
    assert_eq!(v["report"]["N"], 7);
    assert_eq!(v["report"]["set_size"], 3);
    let out = relsz(&["gowers", "--set", &m, "--N", "8"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corner_graphs_of_a_corner_free_set() {
    let v = json(&relsz(&["corner-graphs", "--N", "11", "--seed", "3"]));
    let r = &v["report"];
    assert_eq!(r["corner_free"], true);
    assert_eq!(r["unique_triangles"], true);
    assert_eq!(r["triangles"].as_u64().unwrap() as usize, r["a"].as_array().unwrap().len());
}

#[test]
fn reduce_then_decompose_count_and_remove() {
    let dir = tempfile::tempdir().unwrap();
    let (nu, g, gt) = (path(dir.path(), "nu.json"), path(dir.path(), "g.json"), path(dir.path(), "gt.json"));
    let v = json(&relsz(&["reduce", "--kind", "corner", "--N", "7", "--keep", "0.5", "--seed", "4", "--nu-out", &nu, "--g-out", &g]));
    let check = &v["report"]["check"];
    assert_eq!(check["points"], 343);
    assert!(check["psi_identity"] == true && check["product_identity"] == true && check["uniform"] == true);

    let v = json(&relsz(&["reg-decompose", "--input", &g, "--epsilon", "0.5", "--gtilde-out", &gt]));
    assert_eq!(v["report"]["edges"].as_array().unwrap().len(), 3);

    let v = json(&relsz(&["count", "--g", &g, "--gtilde", &gt, "--nu", &nu]));
    let r = &v["report"];
    let sum: f64 = r["telescoping"].as_array().unwrap().iter().map(|t| t.as_f64().unwrap()).sum();
    let diff = r["density_g"].as_f64().unwrap() - r["density_gtilde"].as_f64().unwrap();
    assert!((sum - diff).abs() < 1e-12);

    let v = json(&relsz(&["removal", "--nu", &nu, "--g", &g, "--epsilon", "0.5", "--delta", "0.1"]));
    assert_eq!(v["report"]["result"]["h_free"], true);
}

#[test]
fn count_rejects_a_mismatched_system() {
    let dir = tempfile::tempdir().unwrap();
    let (g7, g5) = (path(dir.path(), "g7.json"), path(dir.path(), "g5.json"));
    json(&relsz(&["reduce", "--kind", "ap", "--N", "7", "--g-out", &g7]));
    json(&relsz(&["reduce", "--kind", "ap", "--N", "5", "--g-out", &g5]));
    let out = relsz(&["count", "--g", &g7, "--gtilde", &g5]);
    assert_eq!(out.status.code(), Some(2));
}

fn sweep(dir: &Path, config: &str) -> (Output, String) {
    let cfg = path(dir, "sweep.json");
    let csv = path(dir, "sweep.csv");
    fs::write(&cfg, config).unwrap();
    let out = relsz(&["sweep", "--config", &cfg, "--out", &csv]);
    let text = fs::read_to_string(&csv).unwrap_or_default();
    (out, text)
}

#[test]
fn sweep_writes_one_row_per_cell_in_grid_order() {
    let dir = tempfile::tempdir().unwrap();
    let (out, text) = sweep(dir.path(), r#"{"N": [13, 17, 19], "seeds": [1, 2, 3, 4, 5], "quantities": ["lfc", "gowers"], "samples": 4}"#);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header.first().map(String::as_str), Some("N"));
    assert_eq!(header.last().map(String::as_str), Some("error"));
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 15);
    let cells: Vec<(String, String)> = rows.iter().map(|r| (r[0].to_string(), r[2].to_string())).collect();
    assert_eq!(cells[0], ("13".into(), "1".into()));
    assert_eq!(cells[4], ("13".into(), "5".into()));
    assert_eq!(cells[14], ("19".into(), "5".into()));
    assert!(rows.iter().all(|r| r[12].is_empty() && !r[5].is_empty() && r[8].is_empty()));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(path(dir.path(), "sweep.csv.json")).unwrap()).unwrap();
    assert_eq!(manifest["grid"]["seeds"].as_array().unwrap().len(), 5);
}

#[test]
fn empty_grid_gives_the_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let (out, text) = sweep(dir.path(), r#"{"N": [], "seeds": [1], "quantities": ["lfc"]}"#);
    assert!(out.status.success());
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn single_cell_with_counting() {
    let dir = tempfile::tempdir().unwrap();
    let (out, text) = sweep(dir.path(), r#"{"N": [31], "seeds": [1], "quantities": ["counting"]}"#);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 1);
    let gap: f64 = rows[0][10].parse().unwrap();
    assert!(gap >= 0.0);
}

#[test]
fn failing_cells_fill_the_error_column() {
    let dir = tempfile::tempdir().unwrap();
    // p = 0 never yields a nonempty set
    let (out, text) = sweep(dir.path(), r#"{"N": [11], "p": [0.0, 0.5], "seeds": [1], "quantities": ["gowers"]}"#);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert!(!rows[0][12].is_empty());
    assert!(rows[1][12].is_empty());
}

#[test]
fn unknown_quantities_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = sweep(dir.path(), r#"{"N": [11], "seeds": [1], "quantities": ["entropy"]}"#);
    assert_eq!(out.status.code(), Some(2));
}
