use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn hdnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdnn"))
        .args(args)
        .env("HDNN_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(
        o.status.success(),
        "stdout: {}\nstderr: {}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn assert_schema(schema: &str, doc: &Value) {
    let schema = json(&root().join("schemas").join(schema));
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{errors:?}");
}

fn model(name: &str) -> String {
    path(&root().join("models").join(format!("{name}.json"))).to_string()
}

fn platform(name: &str) -> String {
    path(&root().join("platforms").join(format!("{name}.json"))).to_string()
}

/// explore, compile with the explored design, then simulate the result.
fn round_trip(m: &str, p: &str) {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let (m, p) = (model(m), platform(p));
    ok(hdnn(&["explore", "--model", &m, "--platform", &p, "--out", out]));
    let design = dir.path().join("design.json");
    let d = path(&design);
    ok(hdnn(&[
        "compile",
        "--model",
        &m,
        "--platform",
        &p,
        "--design",
        d,
        "--out",
        out,
    ]));
    let sim = ok(hdnn(&[
        "simulate",
        "--model",
        &m,
        "--platform",
        &p,
        "--design",
        d,
        "--out",
        out,
        "--seed",
        "7",
    ]));
    assert_eq!(sim.lines().last(), Some("PASS: output matches oracle"));
    for (schema, file) in [
        ("explore.schema.json", "explore.json"),
        ("design.schema.json", "design.json"),
        ("compile.schema.json", "compile.json"),
        ("memory_map.schema.json", "memory_map.json"),
        ("summary.schema.json", "summary.json"),
        ("oracle.schema.json", "oracle.json"),
    ] {
        assert_schema(schema, &json(&dir.path().join(file)));
    }
}

#[test]
fn toy_round_trip() {
    round_trip("toy", "pynq");
}

#[test]
fn tiny_round_trip() {
    round_trip("tiny", "vu9p");
}

#[test]
fn vgg16_round_trip() {
    round_trip("vgg16", "vu9p");
}

#[test]
fn vgg16_explore_picks_large_tiles() {
    let dir = tempfile::tempdir().unwrap();
    ok(hdnn(&[
        "explore",
        "--model",
        &model("vgg16"),
        "--platform",
        &platform("vu9p"),
        "--out",
        path(dir.path()),
    ]));
    let report = json(&dir.path().join("explore.json"));
    assert_eq!(report["best"]["pt"], 6);
}

#[test]
fn verdict_line_is_stable_across_seeds() {
    let lines: Vec<String> = ["1", "2"]
        .iter()
        .map(|seed| {
            let dir = tempfile::tempdir().unwrap();
            let out = ok(hdnn(&[
                "simulate",
                "--model",
                &model("toy"),
                "--platform",
                &platform("pynq"),
                "--out",
                path(dir.path()),
                "--seed",
                seed,
            ]));
            out.lines().last().unwrap().to_string()
        })
        .collect();
    assert_eq!(lines[0], lines[1]);
    assert_eq!(lines[0], "PASS: output matches oracle");
}

#[test]
fn missing_platform_is_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = hdnn(&[
        "estimate",
        "--model",
        &model("toy"),
        "--platform",
        "/nonexistent/platform.json",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["code"], "E_PLATFORM");
    assert_schema("error.schema.json", &err);
}

#[test]
fn bad_model_and_schedule_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"name":"x","layers":[{"kind":"conv","K":1,"C":1,"R":3,"S":3,"H":4,"W":4,"stride":2}]}"#,
    )
    .unwrap();
    let o = hdnn(&[
        "estimate",
        "--model",
        path(&bad),
        "--platform",
        &platform("pynq"),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(serde_json::from_slice::<Value>(&o.stderr).unwrap()["code"], "E_MODEL");

    let sched = dir.path().join("sched.json");
    std::fs::write(&sched, r#"{"layers":[{"mode":"wino","dataflow":"is"}]}"#).unwrap();
    let o = hdnn(&[
        "estimate",
        "--model",
        &model("toy"),
        "--platform",
        &platform("pynq"),
        "--schedule",
        path(&sched),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        serde_json::from_slice::<Value>(&o.stderr).unwrap()["code"],
        "E_SCHEDULE"
    );
}

#[test]
fn schedule_override_changes_timing_not_data() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("sched.json");
    let layers: Vec<Value> = ["spat", "wino", "wino", "spat"]
        .iter()
        .zip(["ws", "is", "ws", "is"])
        .map(|(m, d)| serde_json::json!({"mode": m, "dataflow": d}))
        .collect();
    std::fs::write(&sched, serde_json::json!({ "layers": layers }).to_string()).unwrap();
    assert_schema("schedule.schema.json", &json(&sched));
    let out = ok(hdnn(&[
        "simulate",
        "--model",
        &model("toy"),
        "--platform",
        &platform("pynq"),
        "--schedule",
        path(&sched),
        "--out",
        path(dir.path()),
    ]));
    assert!(out.ends_with("PASS: output matches oracle\n"));
    let design = json(&dir.path().join("oracle.json"));
    assert_eq!(design["pass"], true);
}

#[test]
fn check_accepts_own_report_and_flags_edits() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let args = [
        "estimate",
        "--model",
        &model("vgg16"),
        "--platform",
        &platform("vu9p"),
        "--out",
        out,
    ];
    ok(hdnn(&args));
    let golden = dir.path().join("golden.json");
    std::fs::copy(dir.path().join("estimate.json"), &golden).unwrap();
    assert_schema("estimate.schema.json", &json(&golden));
    let mut with_check = args.to_vec();
    with_check.extend(["--check", path(&golden)]);
    assert!(ok(hdnn(&with_check)).contains("CHECK PASS"));

    let mut edited = json(&golden);
    edited["design"]["layers"][0]["g_k"] = Value::from(99);
    std::fs::write(&golden, edited.to_string()).unwrap();
    let o = hdnn(&with_check);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["code"], "E_CHECK");
    assert!(err["message"].as_str().unwrap().contains("g_k"));
}

#[test]
fn serialized_simulation_is_slower_and_trace_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let base = [
        "simulate",
        "--model",
        &model("toy"),
        "--platform",
        &platform("pynq"),
        "--out",
        out,
        "--timing-only",
    ];
    ok(hdnn(&base));
    let overlapped = json(&dir.path().join("summary.json"))["total_cycles"].as_u64().unwrap();
    let mut serial = base.to_vec();
    serial.extend(["--no-double-buffer", "--trace"]);
    ok(hdnn(&serial));
    let summary = json(&dir.path().join("summary.json"));
    let busy: u64 = summary["per_module_busy"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(summary["total_cycles"].as_u64().unwrap(), busy);
    assert!(overlapped < busy);
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.lines().all(|l| l.split(',').count() == 4));
}

#[test]
fn simulate_runs_a_program_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    let (m, p) = (model("tiny"), platform("pynq"));
    ok(hdnn(&["compile", "--model", &m, "--platform", &p, "--out", out]));
    let program = dir.path().join("program.bin");
    let design = dir.path().join("design.json");
    let sim = ok(hdnn(&[
        "simulate",
        "--model",
        &m,
        "--platform",
        &p,
        "--design",
        path(&design),
        "--program",
        path(&program),
        "--out",
        out,
    ]));
    assert!(sim.contains("PASS"));

    std::fs::write(&program, b"nope").unwrap();
    let o = hdnn(&[
        "simulate",
        "--model",
        &m,
        "--platform",
        &p,
        "--design",
        path(&design),
        "--program",
        path(&program),
        "--out",
        out,
    ]);
    assert_eq!(serde_json::from_slice::<Value>(&o.stderr).unwrap()["code"], "E_PROGRAM");
}
