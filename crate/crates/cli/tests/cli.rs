use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specholo"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(task: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg(task)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn run_inline(task: &str, config: &str) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    fs::write(&cfg, config).unwrap();
    let out = run(task, &cfg, &dir.path().join("out"), &["--quiet"]);
    (out, dir)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn families_lists_builtins() {
    let o = bin().arg("families").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("waveguide_T") && s.contains("waveguide_H"));
    assert!(s.contains("re_z, im_z, c"));
}

#[test]
fn trace_example_prints_permutations() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("trace", &example("ep_pair_trace.json"), dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("big circle: (13)"));
    assert!(s.contains("figure 8: (12)"));
    let r = report(dir.path());
    assert_eq!(r["permutations"]["reversed figure 8"], "(12)");
    assert_eq!(r["status"], "ok");
    let csv = fs::read_to_string(dir.path().join("trace_big_circle.csv")).unwrap();
    assert!(csv.starts_with("sample_index,t,re_z,im_z,c,re_lambda_1,im_lambda_1"));
}

#[test]
fn verify_example_reproduces_the_group() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("verify", &example("ep_pair_verify.json"), dir.path(), &["--seed", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(dir.path());
    assert_eq!(r["details"]["group_order"], 6);
    assert_eq!(r["details"]["abelian"], false);
    assert_eq!(r["details"]["witness"].as_array().unwrap().len(), 2);
    assert!(r["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    assert!(stdout(&o).contains("non-abelian"));
}

#[test]
fn other_verify_examples_pass() {
    for (name, order) in [("single_ep2_verify.json", 2), ("hermitian_verify.json", 1)] {
        let dir = tempfile::tempdir().unwrap();
        let o = run("verify", &example(name), dir.path(), &["--quiet"]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(report(dir.path())["details"]["group_order"], order);
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn classify_examples_report_cycle_types() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("classify", &example("ep3_classify.json"), dir.path(), &["--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("classification.json")).unwrap()).unwrap();
    assert_eq!(rows[0]["cycle_type"], serde_json::json!([2, 1]));
    assert_eq!(rows[1]["cycle_type"], serde_json::json!([3]));

    let dir = tempfile::tempdir().unwrap();
    let o = run("classify", &example("ep2_classify.json"), dir.path(), &["--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn scan_example_finds_the_junctions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("scan", &example("junction_scan.json"), dir.path(), &["--quiet", "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cands: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("candidates.json")).unwrap()).unwrap();
    let near = |im: f64, c: f64| {
        cands
            .as_array()
            .unwrap()
            .iter()
            .filter(|x| x["refined"] == true)
            .map(|x| {
                let l = x["location"].as_array().unwrap();
                (l[1].as_f64().unwrap() - im).hypot(l[2].as_f64().unwrap() - c)
            })
            .fold(f64::INFINITY, f64::min)
    };
    assert!(near(0.0, -1.0) <= 1e-3);
    assert!(near(-4.0, -1.0) <= 1e-2);
    let field = fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert!(field.starts_with("im_z,c,re_disc,im_disc,abs_disc\n"));
    assert_eq!(field.lines().count(), 1 + 201 * 201);
}

#[test]
fn scan_of_an_empty_window_succeeds() {
    let (o, dir) = run_inline(
        "scan",
        r#"{"family": "waveguide_T", "scan": {"plane": {"free_axes": ["re_z", "im_z"], "fixed": {"c": 1.0},
            "window": [[5.0, 6.0], [5.0, 6.0]], "resolution": [16, 16]}}}"#,
    );
    assert_eq!(o.status.code(), Some(0));
    let cands = fs::read_to_string(dir.path().join("out/candidates.json")).unwrap();
    assert_eq!(cands.trim(), "[]");
}

#[test]
fn simulate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("simulate", &example("simulate_eigenmodes.json"), dir.path(), &["--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let modes: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("modes.json")).unwrap()).unwrap();
    let mut got: Vec<f64> = modes
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["measured"][0].as_f64().unwrap())
        .collect();
    got.sort_by(f64::total_cmp);
    for (g, want) in got.iter().zip([-3f64.sqrt(), 0.0, 3f64.sqrt()]) {
        assert!((g - want).abs() < 1e-6);
    }
    assert!(dir.path().join("propagation_mode_1.csv").exists());

    let dir = tempfile::tempdir().unwrap();
    let o = run("simulate", &example("simulate_merging_path.json"), dir.path(), &["--quiet"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(dir.path())["permutations"]["measured"], "(132)");
    // the last row of each continued sheet is the first row of another
    let loci = fs::read_to_string(dir.path().join("loci.csv")).unwrap();
    let rows: Vec<Vec<f64>> = loci
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(5).map(|x| x.parse().unwrap()).collect())
        .collect();
    let (first, last) = (&rows[0], rows.last().unwrap());
    // (132): sheet 1 ends on label 3, 2 on 1, 3 on 2
    for (k, target) in [(0, 2), (1, 0), (2, 1)] {
        let d = (last[2 * k] - first[2 * target]).hypot(last[2 * k + 1] - first[2 * target + 1]);
        assert!(d < 1e-6, "sheet {k}");
    }
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = run("verify", &example("ep_pair_verify.json"), d.path(), &["--quiet", "--seed", "11"]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (ra, rb) = (report(a.path()), report(b.path()));
    assert_eq!(ra["inputs_digest"], rb["inputs_digest"]);
    assert_eq!(ra["permutations"], rb["permutations"]);
    assert_eq!(ra["checks"], rb["checks"]);
    for name in ra["outputs"].as_array().unwrap() {
        let name = name.as_str().unwrap();
        if name.ends_with(".csv") {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
        }
    }
    // nothing but the declared outputs is left behind
    let mut listed: Vec<String> = ra["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_string()).collect();
    let mut present: Vec<String> = fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    listed.sort();
    present.sort();
    assert_eq!(listed, present);

    let c = tempfile::tempdir().unwrap();
    run("verify", &example("ep_pair_verify.json"), c.path(), &["--quiet", "--seed", "12"]);
    assert_ne!(report(c.path())["inputs_digest"], ra["inputs_digest"]);
}

#[test]
fn wrong_expectation_exits_one() {
    let (o, dir) = run_inline(
        "trace",
        r#"{"family": "waveguide_T", "trace": {"loops": [{"name": "ep3",
            "path": {"type": "circle", "plane": {"axes": ["re_z", "im_z"], "fixed": {"c": 1.0}}, "center": [0, 0], "radius": 0.3},
            "expect": "(12)"}]}}"#,
    );
    assert_eq!(o.status.code(), Some(1));
    let r = report(&dir.path().join("out"));
    assert_eq!(r["status"], "mismatch");
    assert_eq!(r["checks"][0]["expected"], "(12)");
    assert!(String::from_utf8_lossy(&o.stderr).contains("mismatch"));
}

#[test]
fn configuration_errors_exit_two() {
    let cases = [
        ("scan", "not json"),
        ("scan", r#"{"family": "no_such_family"}"#),
        ("scan", r#"{"family": "waveguide_T"}"#),
        (
            "scan",
            r#"{"family": "waveguide_T", "scan": {"plane": {"free_axes": ["re_z", "w"], "fixed": {"c": 1.0},
                "window": [[-1, 1], [-1, 1]], "resolution": [16, 16]}}}"#,
        ),
        ("trace", r#"{"family": "waveguide_T", "trace": {"loops": []}, "extra": 1}"#),
        ("trace", r#"{"family": "waveguide_T", "let": {"a": "=undefined_name"}}"#),
        (
            "verify",
            r#"{"family": "waveguide_T", "verify": {"generators": [
                {"name": "a", "path": {"type": "circle", "plane": {"axes": ["re_z", "im_z"], "fixed": {"c": 1.0}}, "center": [0, 0], "radius": 0.3}},
                {"name": "b", "path": {"type": "circle", "plane": {"axes": ["re_z", "im_z"], "fixed": {"c": 1.0}}, "center": [0, 0], "radius": 0.4}}]}}"#,
        ),
    ];
    for (task, cfg) in cases {
        let (o, dir) = run_inline(task, cfg);
        assert_eq!(o.status.code(), Some(2), "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(report(&dir.path().join("out"))["status"], "config_error");
    }
    let o = bin().arg("trace").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["trace", "--config", "/nonexistent/job.json", "--out"]).arg(tempfile::tempdir().unwrap().path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_three() {
    // strong gain with a coarse step
    let (o, dir) = run_inline(
        "simulate",
        r#"{"family": "waveguide_T", "simulate": {"mode": "propagate", "point": {"re_z": 0, "im_z": 3, "c": 1},
            "initial": [[1, 0], [0, 0], [0, 0]], "x_max": 1.0, "dx": 0.2}}"#,
    );
    assert_eq!(o.status.code(), Some(3));
    let r = report(&dir.path().join("out"));
    assert_eq!(r["status"], "numerical_failure");
    assert!(r["error"].as_str().unwrap().contains("reduce dx"));

    // a probe that would enclose another known candidate
    let (o, _dir) = run_inline(
        "classify",
        r#"{"family": "waveguide_T", "classify": {"candidate": [0, 0, -0.9], "others": [[0, 0.0049, -0.9]],
            "probes": [{"name": "p", "plane": {"axes": ["re_z", "im_z"], "fixed": {"c": -0.9}}, "radius": 0.004}]}}"#,
    );
    assert_eq!(o.status.code(), Some(3));

    // a loop through the EP3
    let (o, _dir) = run_inline(
        "trace",
        r#"{"family": "waveguide_T", "trace": {"loops": [{"name": "through",
            "path": {"type": "polyline", "points": [[-1, 0, 1], [0, 0, 1], [1, 0, 1], [-1, 0, 1]]}}]}}"#,
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("through"));
}
