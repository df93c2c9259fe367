use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use egoloc::geometry::{egod, CameraIntrinsics, CameraPose, DepthImage, Vec3};
use egoloc::synthworld::{generate_world, render_depth, Template, WorldParams};
use serde_json::Value;

fn egoloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egoloc")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = egoloc(args);
    assert!(
        out.status.success(),
        "egoloc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small train/test datasets and a database shared by the tests.
struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn train(&self) -> PathBuf {
        self.root.join("train")
    }
    fn test(&self) -> PathBuf {
        self.root.join("test")
    }
    fn db(&self) -> PathBuf {
        self.root.join("db.egdb")
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let (train, test, db) = (root.join("train"), root.join("test"), root.join("db.egdb"));
        ok(&["synth", "--out", s(&train), "--worlds", "3", "--frames", "45", "--seed", "11"]);
        ok(&["synth", "--out", s(&test), "--worlds", "1", "--frames", "40", "--seed", "12", "--template", "corner-turn"]);
        ok(&["train", "--data", s(&train), "--out", s(&db), "--K", "6"]);
        Fixture { _dir: dir, root }
    })
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas").join(name);
    jsonschema::validator_for(&read_json(&path)).expect("schema compiles")
}

fn assert_valid(schema_name: &str, doc: &Value) {
    let v = schema(schema_name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema_name}: {errors:?}");
}

/// Relative path -> bytes for every file under `root` except manifests.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(&p, root, out);
            } else if !p.to_string_lossy().ends_with("manifest.json") {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn synth_writes_one_depth_file_per_frame() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    ok(&["synth", "--out", s(&out), "--template", "open", "--worlds", "1", "--sequences", "1", "--frames", "50"]);
    let seq = out.join("seq_0000");
    let egods = std::fs::read_dir(&seq).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "egod")).count();
    assert_eq!(egods, 50);
    let poses = read_json(&seq.join("poses.json"));
    assert_eq!(poses["poses"].as_array().unwrap().len(), 50);
    assert_valid("poses.schema.json", &poses);
    assert_valid("dataset.schema.json", &read_json(&out.join("dataset.json")));
    let manifest = read_json(&out.join("manifest.json"));
    assert_valid("manifest.schema.json", &manifest);
    assert_eq!(manifest["config"]["frames"], 50);
}

#[test]
fn synth_is_byte_identical_under_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for p in [&a, &b] {
        ok(&["synth", "--out", s(p), "--worlds", "2", "--frames", "12", "--seed", "5", "--depth-noise-sigma", "0.02"]);
    }
    ok(&["synth", "--out", s(&c), "--worlds", "2", "--frames", "12", "--seed", "6", "--depth-noise-sigma", "0.02"]);
    let (ta, tb, tc) = (tree(&a), tree(&b), tree(&c));
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
    assert_ne!(ta, tc);
}

#[test]
fn y_junction_world_has_two_corridors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("y");
    ok(&["synth", "--out", s(&out), "--template", "y-junction", "--worlds", "1", "--sequences", "1", "--frames", "5"]);
    let world = read_json(&out.join("world_0000.json"));
    assert_eq!(world["template"], "y-junction");
    let routes = world["routes"].as_array().unwrap();
    assert_eq!(routes.len(), 2);
    let end_x = |r: &Value| r["goals"].as_array().unwrap().last().unwrap()[0].as_f64().unwrap();
    assert!(end_x(&routes[0]) * end_x(&routes[1]) < 0.0, "branches diverge to either side");
}

#[test]
fn config_file_sits_between_defaults_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "[synth]\nframes = 7\nworlds = 1\nsequences_per_world = 1\n[synth.motion]\ndt = 0.25\n").unwrap();
    let a = dir.path().join("a");
    ok(&["--config", s(&cfg), "synth", "--out", s(&a)]);
    let m = read_json(&a.join("manifest.json"));
    assert_eq!(m["config"]["frames"], 7);
    assert_eq!(m["config"]["motion"]["dt"], 0.25);
    assert_eq!(read_json(&a.join("dataset.json"))["dt"], 0.25);
    let b = dir.path().join("b");
    ok(&["synth", "--config", s(&cfg), "--out", s(&b), "--frames", "9"]);
    assert_eq!(read_json(&b.join("manifest.json"))["config"]["frames"], 9);

    std::fs::write(&cfg, "[synth]\nframez = 7\n").unwrap();
    let out = egoloc(&["--config", s(&cfg), "synth", "--out", s(&dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_minimal_sequence_gives_one_entry() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    let db = dir.path().join("one.egdb");
    ok(&["synth", "--out", s(&data), "--worlds", "1", "--sequences", "1", "--frames", "31", "--template", "open"]);
    ok(&["train", "--data", s(&data), "--out", s(&db), "--K", "6"]);
    let loaded = egoloc::database::egdb::load(&db, Default::default()).unwrap();
    assert_eq!(loaded.len(), 1);
    let manifest = read_json(&dir.path().join("one.egdb.manifest.json"));
    assert_valid("manifest.schema.json", &manifest);
    assert_eq!(manifest["summary"]["entries"], 1);

    let depth = data.join("seq_0000/depth_00000.egod");
    let poses = data.join("seq_0000/poses.json");
    let pred = dir.path().join("p");
    ok(&["predict", "--db", s(&db), "--depth", s(&depth), "--poses", s(&poses), "--frame", "0", "--out", s(&pred)]);
    let p = read_json(&pred.join("prediction.json"));
    assert_eq!(p["candidates"].as_array().unwrap().len(), 1);
    assert_eq!(p["truncated"], true);
}

#[test]
fn train_header_records_k_and_is_deterministic() {
    let f = fixture();
    let bytes = std::fs::read(f.db()).unwrap();
    assert_eq!(&bytes[..4], b"EGDB");
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    assert_eq!(u32_at(4), 1);
    // magic, version, two counts and five f64 grid values precede F and K
    assert_eq!(u32_at(56), 30);
    assert_eq!(u32_at(60), 6);

    let dir = tempfile::tempdir().unwrap();
    let again = dir.path().join("again.egdb");
    ok(&["train", "--data", s(&f.train()), "--out", s(&again), "--K", "6"]);
    assert_eq!(std::fs::read(&again).unwrap(), bytes);

    let dct = dir.path().join("dct.egdb");
    ok(&["train", "--data", s(&f.train()), "--out", s(&dct), "--K", "4", "--basis", "dct"]);
    let d = std::fs::read(&dct).unwrap();
    assert_eq!(u32::from_le_bytes(d[60..64].try_into().unwrap()), 4);
}

fn predict_training_frame(out: &Path, k: &str) -> Value {
    let f = fixture();
    let seq = f.train().join("seq_0002");
    let depth = seq.join("depth_00007.egod");
    let poses = seq.join("poses.json");
    ok(&["predict", "--db", s(&f.db()), "--depth", s(&depth), "--poses", s(&poses), "--frame", "7", "--k", k, "--out", s(out)]);
    read_json(&out.join("prediction.json"))
}

#[test]
fn predict_self_retrieval_and_candidate_count() {
    let dir = tempfile::tempdir().unwrap();
    let p = predict_training_frame(&dir.path().join("p"), "30");
    let cands = p["candidates"].as_array().unwrap();
    assert_eq!(cands.len(), 30);
    assert_eq!(cands[0]["sourceEntry"]["sceneId"], 2);
    assert_eq!(cands[0]["sourceEntry"]["frameId"], 7);
    assert_eq!(cands[0]["knnRank"], 0);
    for c in cands {
        assert!(c["finalCost"].as_f64().unwrap() <= c["initCost"].as_f64().unwrap());
        assert_eq!(c["points"].as_array().unwrap().len(), 30);
        assert_eq!(c["beta"].as_array().unwrap().len(), 6);
    }
}

#[test]
fn predict_outputs_match_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p");
    let p = predict_training_frame(&out, "10");
    assert_valid("prediction.schema.json", &p);
    assert_valid("detections.schema.json", &read_json(&out.join("detections.json")));
    let manifest = read_json(&out.join("manifest.json"));
    assert_valid("manifest.schema.json", &manifest);
    assert_eq!(manifest["config"]["prediction"]["k"], 10);

    let pgm = std::fs::read(out.join("psi.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5"));
    let csv = std::fs::read_to_string(out.join("psi.csv")).unwrap();
    assert!(csv.lines().count() > 1);

    let mut broken = p.clone();
    broken["candidates"][0]["initCost"] = Value::String("x".into());
    assert!(!schema("prediction.schema.json").is_valid(&broken));
}

#[test]
fn predict_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    predict_training_frame(&a, "20");
    predict_training_frame(&b, "20");
    assert_eq!(tree(&a), tree(&b));
}

#[test]
fn exit_codes_follow_error_category() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let depth = f.train().join("seq_0000/depth_00000.egod");

    let missing = egoloc(&["predict", "--db", s(&dir.path().join("nope.egdb")), "--depth", s(&depth), "--out", s(&dir.path().join("x"))]);
    assert_eq!(missing.status.code(), Some(2));

    // a fronto-parallel wall: no plane agrees with the gravity prior
    let intr = CameraIntrinsics::default_sim();
    let wall = DepthImage::from_raw(intr, vec![4.0; intr.width * intr.height]).unwrap();
    let wall_path = dir.path().join("wall.egod");
    egod::save(&wall_path, &wall).unwrap();
    let out = egoloc(&["predict", "--db", s(&f.db()), "--depth", s(&wall_path), "--out", s(&dir.path().join("w"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    // walks look down by 3 deg or more, so these edges leave the middle bin
    // empty; a level query falls into it
    let cfg = dir.path().join("edges.toml");
    std::fs::write(&cfg, "[train]\npitch_edges = [-0.3, 0.03]\n").unwrap();
    let db = dir.path().join("edges.egdb");
    ok(&["--config", s(&cfg), "train", "--data", s(&f.train()), "--out", s(&db)]);
    let world = generate_world(Template::Open, &WorldParams::default(), 3).unwrap();
    let pose = CameraPose::from_yaw_pitch(Vec3::new(0.0, 1.6, 0.0), 0.0, 0.0);
    let query = render_depth(&world, &pose, &intr, 0.0, 0).unwrap();
    let qpath = dir.path().join("q.egod");
    egod::save(&qpath, &query).unwrap();
    let out = egoloc(&["predict", "--db", s(&db), "--depth", s(&qpath), "--gravity", "0,1,0", "--out", s(&dir.path().join("e"))]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

fn run_eval(out: &Path) {
    let f = fixture();
    ok(&[
        "eval", "--db", s(&f.db()), "--test-data", s(&f.test()), "--train-data", s(&f.train()),
        "--oracle", "--k-values", "5,10", "--test-frames", "12", "--out", s(out),
    ]);
}

#[test]
fn eval_tables_oracle_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_eval(&a);
    let csv = std::fs::read_to_string(a.join("precision.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0].split(',').count(), 1 + 3 * 2);
    let names: Vec<&str> = lines[1..].iter().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names, ["straight", "pure-2d", "ground-plane-2d", "egospace-noopt", "egospace-opt", "oracle"]);
    let oracle: Vec<&str> = lines[6].split(',').skip(1).collect();
    assert!(oracle.iter().all(|v| *v == "1.0000"), "{oracle:?}");

    let report = read_json(&a.join("report.json"));
    assert_valid("report.schema.json", &report);
    assert_valid("manifest.schema.json", &read_json(&a.join("manifest.json")));
    assert_eq!(report["frames_evaluated"].as_u64().unwrap() + report["frames_skipped"].as_u64().unwrap(), 12);
    let det = std::fs::read_to_string(a.join("detection.csv")).unwrap();
    assert!(det.starts_with("scene,template,frames,detections,true_positives,rate"));
    assert!(det.lines().count() > 1);

    run_eval(&b);
    assert_eq!(tree(&a), tree(&b));
}

#[test]
fn eval_without_train_data_rejects_depth_baselines() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = egoloc(&["eval", "--db", s(&f.db()), "--test-data", s(&f.test()), "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(2));
    ok(&[
        "eval", "--db", s(&f.db()), "--test-data", s(&f.test()), "--methods", "straight,egospace-noopt",
        "--test-frames", "4", "--no-detection", "--out", s(&dir.path().join("y")),
    ]);
}

#[test]
fn bases_curve_csv() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bases.csv");
    ok(&["bases", "--data", s(&f.train()), "--k-min", "1", "--k-max", "8", "--out", s(&out)]);
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<f64>> = csv.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(csv.lines().next(), Some("K,pca,dct"));
    assert_eq!(rows.len(), 8);
    for r in &rows {
        assert!(r[1] <= r[2] + 1e-9, "pca above dct at K={}", r[0]);
    }
    assert_valid("manifest.schema.json", &read_json(&dir.path().join("bases.csv.manifest.json")));
}
