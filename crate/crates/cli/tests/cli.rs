use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tagtour"));
    c.env("TAGTOUR_THREADS", "2");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CONFIG: &str = r#"{
  "n_properties": 1,
  "panos_per_property": [4, 4],
  "tags_per_pano": 2,
  "width": 2048,
  "height": 1024,
  "face_size": 512,
  "distance_m": [0.8, 1.4],
  "seed": 3
}"#;

/// One small synthetic dataset shared by the tests, plus a pipeline run over it.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn data(&self) -> PathBuf {
        self.root.join("data")
    }
    fn prop(&self) -> PathBuf {
        self.data().join("prop_00")
    }
    fn pipeline_out(&self) -> PathBuf {
        self.root.join("pipe")
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let cfg = root.join("synth.json");
        std::fs::write(&cfg, CONFIG).unwrap();
        let f = Fixture { _dir: dir, root };
        ok(&["synth", "--config", s(&cfg), "--out", s(&f.data())]);
        let manifest = f.prop().join("manifest.json");
        ok(&[
            "pipeline",
            "--in",
            s(&f.prop()),
            "--manifest",
            s(&manifest),
            "--face-size",
            "512",
            "--out",
            s(&f.pipeline_out()),
        ]);
        f
    })
}

#[test]
fn synth_writes_the_dataset_layout() {
    let f = fixture();
    assert!(f.data().join("gt.json").exists());
    for k in 1..=4 {
        assert!(f.prop().join(format!("pano_{k:02}.png")).exists());
        for face in ["front", "back", "left", "right", "top", "bottom"] {
            assert!(f.prop().join("faces").join(format!("pano_{k:02}_{face}.png")).exists());
            assert!(f.prop().join("labels").join(format!("pano_{k:02}_{face}.txt")).exists());
        }
    }
}

#[test]
fn staged_commands_match_the_pipeline() {
    let f = fixture();
    let work = tempfile::tempdir().unwrap();
    let faces = work.path().join("faces");
    for k in 1..=4 {
        let pano = f.prop().join(format!("pano_{k:02}.png"));
        ok(&["to-cubemap", s(&pano), "--face-size", "512", "--out", s(&faces)]);
    }
    let dets = work.path().join("detections.json");
    let readings = work.path().join("readings.json");
    let tour = work.path().join("tour.json");
    ok(&["detect", "--faces", s(&faces), "--property", "prop_00", "--face-size", "512", "--out", s(&dets)]);
    ok(&["recognize", "--faces", s(&faces), "--detections", s(&dets), "--face-size", "512", "--out", s(&readings)]);
    ok(&[
        "build-tour",
        "--readings",
        s(&readings),
        "--manifest",
        s(&f.prop().join("manifest.json")),
        "--panos",
        s(&f.prop()),
        "--face-size",
        "512",
        "--out",
        s(&tour),
    ]);
    let read = |p: PathBuf| std::fs::read(p).unwrap();
    assert_eq!(read(tour), read(f.pipeline_out().join("tour.json")));
    assert_eq!(read(readings), read(f.pipeline_out().join("readings.json")));
}

#[test]
fn pipeline_is_idempotent_and_tour_is_connected() {
    let f = fixture();
    let again = tempfile::tempdir().unwrap();
    ok(&["pipeline", "--in", s(&f.prop()), "--face-size", "512", "--out", s(again.path())]);
    for name in ["tour.json", "readings.json"] {
        assert_eq!(
            std::fs::read(again.path().join(name)).unwrap(),
            std::fs::read(f.pipeline_out().join(name)).unwrap(),
            "{name}"
        );
    }
    let tour: serde_json::Value =
        serde_json::from_slice(&std::fs::read(f.pipeline_out().join("tour.json")).unwrap()).unwrap();
    assert_eq!(tour["version"], 1);
    assert_eq!(tour["panoramas"].as_array().unwrap().len(), 4);
    assert!(tour["hotspots"].as_array().unwrap().len() >= 8);
    assert_eq!(tour["warnings"], serde_json::json!([]));
}

#[test]
fn eval_scores_the_pipeline() {
    let f = fixture();
    let out = tempfile::tempdir().unwrap();
    let report = out.path().join("report.json");
    let o = ok(&[
        "eval",
        "--gt",
        s(&f.data().join("gt.json")),
        "--pred",
        s(&f.pipeline_out().join("readings.json")),
        "--coco-range",
        "--per-property",
        "--out",
        s(&report),
    ]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("end-to-end"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let e = &v["end_to_end"];
    assert_eq!(e["fp"], 0);
    assert_eq!(e["fn"], 0);
    assert_eq!(e["f1"], 1.0);
    assert_eq!(v["property_accuracy"], 1.0);
    assert!(v["map_at"].get("0.50:0.95").is_some());
    assert_eq!(v["per_property"].as_array().unwrap().len(), 1);
    assert!(v["metadata"]["dataset_hash"].is_string());
}

#[test]
fn cubemap_round_trip_through_the_cli() {
    let f = fixture();
    let work = tempfile::tempdir().unwrap();
    let pano = f.prop().join("pano_02.png");
    ok(&["to-cubemap", s(&pano), "--face-size", "256", "--out", s(work.path())]);
    let faces: Vec<_> = std::fs::read_dir(work.path()).unwrap().collect();
    assert_eq!(faces.len(), 6);
    let back = work.path().join("back.png");
    ok(&[
        "to-equirect",
        "--faces",
        s(work.path()),
        "--stem",
        "pano_02",
        "--width",
        "512",
        "--height",
        "256",
        "--out",
        s(&back),
    ]);
    assert!(back.exists());
}

#[test]
fn imported_yolo_labels_become_detections() {
    let f = fixture();
    let work = tempfile::tempdir().unwrap();
    let dets = work.path().join("d.json");
    ok(&[
        "detect",
        "--faces",
        s(&f.prop().join("faces")),
        "--import",
        s(&f.prop().join("labels")),
        "--face-size",
        "512",
        "--out",
        s(&dets),
    ]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&dets).unwrap()).unwrap();
    let n_labels: usize = std::fs::read_dir(f.prop().join("labels"))
        .unwrap()
        .map(|e| std::fs::read_to_string(e.unwrap().path()).unwrap().lines().count())
        .sum();
    assert_eq!(v.as_array().unwrap().len(), n_labels);
}

#[test]
fn gen_tags_writes_requested_numbers() {
    let work = tempfile::tempdir().unwrap();
    ok(&["gen-tags", "--numbers", "1-3,20", "--side", "64", "--out", s(work.path())]);
    let mut names: Vec<String> = std::fs::read_dir(work.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["tag_01.png", "tag_02.png", "tag_03.png", "tag_20.png"]);
    assert_eq!(run(&["gen-tags", "--numbers", "5-2", "--out", s(work.path())]).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["detect", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    let missing = run(&["to-cubemap", "/definitely/not/here.png", "--out", "/tmp/x"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));
    let work = tempfile::tempdir().unwrap();
    let bad = work.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(run(&["synth", "--config", s(&bad), "--out", s(work.path())]).status.code(), Some(1));
    assert_eq!(
        run(&["pipeline", "--in", s(work.path()), "--face-size", "8", "--out", s(work.path())]).status.code(),
        Some(1)
    );
}
