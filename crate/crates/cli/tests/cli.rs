use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn neurocore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurocore"))
        .args(args)
        .env_remove("NEUROCORE_SEED")
        .env_remove("NEUROCORE_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_subcommand_exits_2() {
    let o = neurocore(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn bad_flag_value_exits_2() {
    let o = neurocore(&["--backend", "analog", "gonogo"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn errt_report() {
    let o = neurocore(&["errt"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rs = text.lines().find(|l| l.starts_with("RS")).unwrap();
    assert!(rs.ends_with("0.000%"), "{rs}");
    assert!(text.lines().any(|l| l.starts_with("FS")));
}

#[test]
fn validate_shipped_schedule() {
    let o = neurocore(&["validate-schedule"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("0 violations"));
}

#[test]
fn validate_user_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sched");
    fs::write(&bad, "block: mixed\nword: none\nop: add %r0 $v $c\n").unwrap();
    let o = neurocore(&["validate-schedule", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("violation: "));

    let broken = dir.path().join("broken.sched");
    fs::write(&broken, "block: b\nop: jump %r0\n").unwrap();
    let o = neurocore(&["validate-schedule", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn config_error_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[simulation]\nseed = 3\nduration_ms = \"long\"\n").unwrap();
    let o = neurocore(&["gonogo", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("run.toml:3"), "{err}");
}

fn small_config(dir: &Path) -> String {
    let text = neurocore_default().replace("size = 100", "size = 30");
    let path = dir.join("small.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn neurocore_default() -> String {
    fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../core/config/default_bg.toml"
    ))
    .unwrap()
}

fn gonogo(dir: &Path, cfg: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "gonogo",
        "--config",
        cfg,
        "--duration-ms",
        "300",
        "--out",
        dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    neurocore(&args)
}

#[test]
fn gonogo_outputs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let runs: Vec<_> = [("a", "1"), ("b", "1"), ("c", "4")]
        .iter()
        .map(|(name, threads)| {
            let dir = tmp.path().join(name);
            let o = gonogo(&dir, &cfg, &["--threads", threads, "--seed", "9"]);
            assert!(o.status.success(), "{}", stderr(&o));
            dir.join("gonogo")
        })
        .collect();
    for file in [
        "baseline.csv",
        "high.csv",
        "low.csv",
        "summary.json",
        "high.svg",
    ] {
        let first = fs::read(runs[0].join(file)).unwrap();
        assert!(!first.is_empty());
        for other in &runs[1..] {
            assert_eq!(first, fs::read(other.join(file)).unwrap(), "{file}");
        }
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(runs[0].join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["metadata"]["seed"], 9);
    assert_eq!(summary["metadata"]["backend"], "fixed");
    for c in ["baseline", "high", "low"] {
        assert!(summary["conditions"][c]["GPi/SNr"]["mean_rate_hz"].is_number());
        assert!(summary["conditions"][c]["STR_D1"]["spike_count"].is_u64());
    }
}

#[test]
fn env_overrides_seed_and_out() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_neurocore"))
        .args(["gonogo", "--config", &cfg, "--duration-ms", "250"])
        .env("NEUROCORE_SEED", "17")
        .env("NEUROCORE_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("gonogo/summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 17"));
    // nothing else appears next to the requested directory
    let entries: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(entries.len(), 2, "{entries:?}");
}

#[test]
fn regimes_writes_traces_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = neurocore(&["regimes", "--out", tmp.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.contains("PASS")).count(), 12);
    for r in ["RS", "FS", "IB", "CH", "LTS", "TC"] {
        let csv = fs::read_to_string(tmp.path().join(format!("regimes/{r}.csv"))).unwrap();
        assert!(csv.starts_with("step,time_ms,v_float,v_fixed\n"));
    }
    assert!(tmp.path().join("regimes/report.txt").is_file());
}
