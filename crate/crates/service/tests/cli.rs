use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn gridpulse(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gridpulse"))
        .args(args)
        .env_remove("GRIDPULSE_DATA")
        .output()
        .unwrap();
    (
        out.status.success(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn generate(dir: &Path) -> Value {
    let out = dir.to_str().unwrap();
    let (ok, stdout, err) = gridpulse(&[
        "generate", "--seed", "5", "--substations", "8", "--days", "1", "--out", out, "--minutes", "5", "--attrs",
        "VPm,F", "--dense",
    ]);
    assert!(ok, "{err}");
    json(&stdout)
}

#[test]
fn generate_inspect_analyze_and_link() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().to_str().unwrap();
    let summary = generate(dir.path());
    assert_eq!(summary["substations"], 8);
    assert_eq!(summary["files_written"], 2);

    let (ok, stdout, err) = gridpulse(&["inspect", "--data", data, "--stats", "--attr", "VPm"]);
    assert!(ok, "{err}");
    let v = json(&stdout);
    let stats = &v["days"][0]["files"][0]["stats"];
    assert_eq!(stats["present_cells"], summary["pmus"].as_u64().unwrap() * 5 * 60 * 30);

    let events: Value = json(&std::fs::read_to_string(dir.path().join("events.json")).unwrap());
    let ev = &events[0];
    let id = ev["id"].as_str().unwrap();
    let (ok, stdout, err) = gridpulse(&["analyze", "--data", data, "--event", id, "--threshold", "100"]);
    assert!(ok, "{err}");
    let lines: Vec<Value> = stdout.lines().map(json).collect();
    assert!(!lines.is_empty());
    for l in &lines {
        assert_eq!(l["flags"].as_array().unwrap().len(), 1);
        assert_eq!(l["flags"][0]["pmu"], ev["epicenter_pmus"][0]);
        assert!(l["frame"]["spectra"].is_array());
    }

    let at = ev["t_start"].as_str().unwrap();
    let epi = ev["epicenter_pmus"][0].to_string();
    let (ok, stdout, err) = gridpulse(&["dendrogram", "--data", data, "--epicenter", &epi, "--at", at, "--k", "auto"]);
    assert!(ok, "{err}");
    assert_eq!(json(&stdout)["model"]["root"]["pmus"][0], ev["epicenter_pmus"][0]);

    let reports = dir.path().join("reports");
    let (ok, stdout, err) = gridpulse(&["link-reports", reports.to_str().unwrap()]);
    assert!(ok, "{err}");
    let linked = json(&stdout);
    let found = linked["events"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["id"] == ev["id"])
        .expect("report linked to its event");
    assert_eq!(found["epicenter_pmus"], ev["epicenter_pmus"]);
}

#[test]
fn ingest_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().to_str().unwrap();
    generate(dir.path());
    let topo: Value = json(&std::fs::read_to_string(dir.path().join("topology.json")).unwrap());
    let ids: Vec<u64> = topo["pmus"].as_array().unwrap().iter().map(|p| p["id"].as_u64().unwrap()).collect();

    // 20 s of a 1.5 Hz tone on the second PMU, 0.5 Hz elsewhere
    let mut csv = String::from("tick");
    for id in &ids {
        csv.push_str(&format!(",PMU{id}"));
    }
    csv.push('\n');
    for tick in 0..600u32 {
        let t = f64::from(tick) / 30.0;
        csv.push_str(&tick.to_string());
        for (i, _) in ids.iter().enumerate() {
            let v = if i == 1 {
                1.0 + 0.05 * (2.0 * std::f64::consts::PI * 1.5 * t).sin()
            } else {
                1.0 + 0.01 * (2.0 * std::f64::consts::PI * 0.5 * t).sin()
            };
            if tick == 7 && i == 0 {
                csv.push_str(",null");
            } else {
                csv.push_str(&format!(",{v}"));
            }
        }
        csv.push('\n');
    }
    let path = dir.path().join("in.csv");
    std::fs::write(&path, csv).unwrap();
    let (ok, stdout, err) = gridpulse(&[
        "ingest", "--data", data, "--attr", "VAm", "--date", "2019-01-02", path.to_str().unwrap(),
    ]);
    assert!(ok, "{err}");
    assert_eq!(json(&stdout)["null_cells"], 1);

    let (ok, stdout, err) = gridpulse(&[
        "analyze", "--data", data, "--from", "2019-01-02T00:00:00", "--to", "2019-01-02T00:00:20", "--attr", "VAm",
    ]);
    assert!(ok, "{err}");
    let lines: Vec<Value> = stdout.lines().map(json).collect();
    assert_eq!(lines.len(), 2);
    for l in lines {
        assert_eq!(l["frame"]["dominant"]["frequency_hz"], 1.5);
        assert_eq!(l["frame"]["dominant"]["peak_pmu"], ids[1]);
    }

    // unknown PMU columns are rejected against the topology
    std::fs::write(&path, "tick,999999\n0,1\n").unwrap();
    let (ok, _, err) = gridpulse(&["ingest", "--data", data, "--attr", "VAm", "--date", "2019-01-03", path.to_str().unwrap()]);
    assert!(!ok);
    assert!(err.contains("999999"), "{err}");
}

#[test]
fn config_file_and_missing_data_dir() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path());
    let cfg = dir.path().join("gp.toml");
    std::fs::write(&cfg, format!("data = {:?}\ndefault_window_s = 5\n", dir.path())).unwrap();
    let events: Value = json(&std::fs::read_to_string(dir.path().join("events.json")).unwrap());
    let id = events[0]["id"].as_str().unwrap();
    let (ok, stdout, err) = gridpulse(&["--config", cfg.to_str().unwrap(), "analyze", "--event", id]);
    assert!(ok, "{err}");
    let first = json(stdout.lines().next().unwrap());
    assert_eq!(first["frame"]["bin_hz"], 0.2);

    let (ok, _, err) = gridpulse(&["analyze", "--event", id]);
    assert!(!ok);
    assert!(err.contains("GRIDPULSE_DATA"), "{err}");
}
