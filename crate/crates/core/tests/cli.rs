//! Drives the `roadscene` binary over a mock workspace.

use std::path::Path;
use std::process::{Command, Output};

use roadscene::annotation::{validate_sft_record, TEMPLATE_GRAMMAR};
use roadscene::cli::{load_vocab, write_mock_workspace, PipelineConfig, QUARANTINE_FILE, REFERENCES_FILE};
use roadscene::eval::{load_outputs, published_rows};
use roadscene::ingest::{frame_files, write_manifest, VideoClip};
use roadscene::student::{load_checkpoint, ToyModel, FEATURE_DIM};

fn roadscene(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadscene"))
        .current_dir(dir)
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status, stdout(&o), String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

fn workspace(n: usize) -> (tempfile::TempDir, PipelineConfig) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_mock_workspace(dir.path(), n, 5).unwrap();
    (dir, cfg)
}

#[test]
fn sample_writes_one_directory_per_clip_and_skips_on_rerun() {
    let (dir, cfg) = workspace(10);
    let out = ok(roadscene(dir.path(), &["sample"]));
    assert!(out.contains("10 clips, 10 sampled"), "{out}");
    let dirs = std::fs::read_dir(&cfg.frames_dir).unwrap().count();
    assert_eq!(dirs, 10);
    let before = std::fs::read(cfg.frames_dir.join("clip_000/frame_0000.png")).unwrap();
    let out = ok(roadscene(dir.path(), &["sample"]));
    assert!(out.contains("0 sampled, 10 already present"), "{out}");
    assert_eq!(std::fs::read(cfg.frames_dir.join("clip_000/frame_0000.png")).unwrap(), before);
}

#[test]
fn three_second_clip_at_half_second_gives_seven_frames() {
    let (dir, cfg) = workspace(1);
    let clip = VideoClip {
        clip_id: "three".into(),
        source_path: "videos/three.mp4".into(),
        duration_s: 3.0,
        region_tag: "urban".into(),
        captured_at: Some("2024-05-01T08:00:00Z".into()),
    };
    write_manifest(&cfg.manifest, &[clip]).unwrap();
    let out = ok(roadscene(dir.path(), &["sample", "--interval", "0.5"]));
    assert!(out.contains("7 frames"), "{out}");
    assert_eq!(frame_files(&cfg.frames_dir, "three").unwrap().len(), 7);
}

#[test]
fn bad_manifest_row_fails_unless_keep_going() {
    let (dir, cfg) = workspace(3);
    let mut text = std::fs::read_to_string(&cfg.manifest).unwrap();
    text.push_str("{\"clip_id\":\"short\",\"source_path\":\"x.mp4\",\"duration_s\":0.5,\"region_tag\":\"t\"}\n");
    std::fs::write(&cfg.manifest, text).unwrap();
    let o = roadscene(dir.path(), &["sample"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 4"));
    ok(roadscene(dir.path(), &["sample", "--keep-going"]));
}

#[test]
fn annotate_quarantines_injected_defect_and_uses_cache() {
    let (dir, cfg) = workspace(10);
    let toml = std::fs::read_to_string(dir.path().join("roadscene.toml")).unwrap().replacen(
        "mock_defects = []",
        "mock_defects = [{ clip_id = \"clip_004\", stage = \"scene\", defect = \"missing:weather\" }]",
        1,
    );
    std::fs::write(dir.path().join("roadscene.toml"), toml).unwrap();
    ok(roadscene(dir.path(), &["sample"]));

    let o = roadscene(dir.path(), &["annotate"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("9 annotated, 1 quarantined, 19 provider calls"), "{}", stdout(&o));
    let q = std::fs::read_to_string(cfg.annotations_dir.join(QUARANTINE_FILE)).unwrap();
    assert_eq!(q.lines().count(), 1);
    let rec: serde_json::Value = serde_json::from_str(q.trim()).unwrap();
    assert_eq!(rec["clip_id"], "clip_004");
    assert_eq!(rec["stage"], "scene");
    assert_eq!(rec["error_kind"], "missing_dimension");
    assert!(cfg.annotations_dir.join("annotations.jsonl.provenance.json").exists());

    let out = ok(roadscene(dir.path(), &["annotate", "--keep-going"]));
    assert!(out.contains("1 quarantined, 0 provider calls"), "{out}");
}

#[test]
fn warm_cache_rerun_makes_no_calls_and_identical_files() {
    let (dir, cfg) = workspace(4);
    ok(roadscene(dir.path(), &["sample"]));
    ok(roadscene(dir.path(), &["annotate"]));
    let first = std::fs::read(cfg.annotations_dir.join("annotations.jsonl")).unwrap();
    let out = ok(roadscene(dir.path(), &["annotate"]));
    assert!(out.contains("0 provider calls"), "{out}");
    assert_eq!(std::fs::read(cfg.annotations_dir.join("annotations.jsonl")).unwrap(), first);

    let other = dir.path().join("other-cache");
    let out = ok(roadscene(dir.path(), &["annotate", "--cache-dir", other.to_str().unwrap()]));
    assert!(out.contains("8 provider calls"), "{out}");
}

#[test]
fn real_provider_without_key_is_a_config_error() {
    let (dir, _) = workspace(2);
    let path = dir.path().join("roadscene.toml");
    let toml = std::fs::read_to_string(&path).unwrap().replacen(
        "[scene_provider]\nname = \"mock\"\nendpoint_url = \"\"",
        "[scene_provider]\nname = \"openai\"\nendpoint_url = \"http://127.0.0.1:9/v1/chat/completions\"",
        1,
    );
    std::fs::write(&path, toml).unwrap();
    ok(roadscene(dir.path(), &["sample"]));
    let o = roadscene(dir.path(), &["annotate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("OPENAI_API_KEY"));
}

#[test]
fn dataset_records_validate_and_rebuild_identically() {
    let (dir, cfg) = workspace(10);
    ok(roadscene(dir.path(), &["sample"]));
    ok(roadscene(dir.path(), &["annotate"]));
    let out = ok(roadscene(dir.path(), &["build-dataset"]));
    assert!(out.contains("10 records"), "{out}");
    let bytes = std::fs::read(&cfg.dataset_path).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    let base = cfg.dataset_path.parent().unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        validate_sft_record(&v).unwrap();
        for img in v["images"].as_array().unwrap() {
            let p = Path::new(img.as_str().unwrap());
            assert!(p.is_relative());
            assert!(base.join(p).is_file());
        }
    }
    ok(roadscene(dir.path(), &["build-dataset"]));
    assert_eq!(std::fs::read(&cfg.dataset_path).unwrap(), bytes);

    let template = ok(roadscene(dir.path(), &["build-dataset", "--target", "template"]));
    assert!(template.contains("10 records"));
    let first: serde_json::Value =
        serde_json::from_str(std::fs::read_to_string(&cfg.dataset_path).unwrap().lines().next().unwrap()).unwrap();
    let target = first["messages"][2]["content"].as_str().unwrap();
    assert!(regex::Regex::new(TEMPLATE_GRAMMAR.trim_end()).unwrap().is_match(target));
}

#[test]
fn missing_frames_name_the_clip() {
    let (dir, cfg) = workspace(3);
    ok(roadscene(dir.path(), &["sample"]));
    ok(roadscene(dir.path(), &["annotate"]));
    std::fs::remove_file(cfg.frames_dir.join("clip_001/frame_0002.png")).unwrap();
    let o = roadscene(dir.path(), &["build-dataset"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("clip_001"));
    let out = ok(roadscene(dir.path(), &["build-dataset", "--keep-going"]));
    assert!(out.contains("2 records"), "{out}");
}

fn trajectory(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn toy_train_trajectory_checkpoint_and_determinism() {
    let (dir, cfg) = workspace(20);
    ok(roadscene(dir.path(), &["sample"]));
    ok(roadscene(dir.path(), &["annotate"]));
    ok(roadscene(dir.path(), &["toy-train", "--epochs", "5"]));
    let t = trajectory(&cfg.student_dir.join("trajectory.tsv"));
    assert_eq!(t.len(), 6);
    assert!(t.windows(2).all(|w| w[1] < w[0]), "{t:?}");
    let ck = cfg.student_dir.join("checkpoint.json");
    let first = std::fs::read(&ck).unwrap();
    let outputs = load_outputs(&cfg.student_dir.join("student_outputs.jsonl")).unwrap();
    assert_eq!(outputs.len(), 20);

    ok(roadscene(dir.path(), &["toy-train", "--epochs", "5"]));
    assert_eq!(std::fs::read(&ck).unwrap(), first);

    ok(roadscene(dir.path(), &["toy-train", "--epochs", "5", "--seed", "99"]));
    assert_ne!(std::fs::read(&ck).unwrap(), first);

    ok(roadscene(dir.path(), &["toy-train", "--epochs", "2", "--lr", "0"]));
    let (model, prov) = load_checkpoint(&ck).unwrap();
    let vocab = load_vocab(&cfg.student_dir.join("vocab.json")).unwrap();
    use roadscene::annotation::Tokenizer;
    let init = ToyModel::random(vocab.vocab_size(), FEATURE_DIM, 0, Some(1), cfg.student.init_scale, cfg.seed);
    assert_eq!(model, init);
    assert_eq!(prov.unwrap().seed, cfg.seed);
    let t = trajectory(&cfg.student_dir.join("trajectory.tsv"));
    assert!(t.iter().all(|&l| l == t[0]));
}

#[test]
fn evaluate_identity_mismatch_and_report_files() {
    let (dir, cfg) = workspace(5);
    ok(roadscene(dir.path(), &["sample"]));
    ok(roadscene(dir.path(), &["annotate"]));
    let refs = cfg.annotations_dir.join(REFERENCES_FILE);
    let r = refs.to_str().unwrap();
    let out = ok(roadscene(dir.path(), &["evaluate", "--candidates", r, "--references", r, "--out", "report"]));
    let row = out.lines().nth(2).unwrap();
    assert!(row.starts_with("run") && row.contains("1.0000"), "{out}");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report/report.json")).unwrap()).unwrap();
    assert_eq!(json["scores"]["bundle"]["bleu4"], 1.0);
    assert_eq!(json["scores"]["total"], 5);
    assert!(json["provenance"]["tool_version"].as_str().unwrap().starts_with("roadscene/"));
    assert!(dir.path().join("report/report.txt.provenance.json").exists());

    let mut fewer = load_outputs(&refs).unwrap();
    fewer.remove("clip_002");
    let cand = dir.path().join("fewer.jsonl");
    roadscene::eval::write_outputs(&cand, &fewer, None).unwrap();
    let o = roadscene(dir.path(), &["evaluate", "--candidates", cand.to_str().unwrap(), "--references", r]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("clip_002"));
}

#[test]
fn verify_stock_rows_pass_and_perturbed_row_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(roadscene(dir.path(), &["verify", "--out", "verify.txt"]));
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{out}");
    assert!(out.contains("30.28") && out.contains("36.30"));
    assert!(dir.path().join("verify.txt.provenance.json").exists());

    let mut rows = published_rows();
    rows[3].meteor -= 0.01;
    let text: String = rows.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    std::fs::write(dir.path().join("rows.jsonl"), text).unwrap();
    let o = roadscene(dir.path(), &["verify", "--rows", "rows.jsonl"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let fails: Vec<&str> = out.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(fails.len(), 1, "{out}");
    assert!(fails[0].contains("3B mlp+llm"));
}

#[test]
fn api_key_flag_does_not_exist() {
    let dir = tempfile::tempdir().unwrap();
    let o = roadscene(dir.path(), &["annotate", "--api-key", "sk-test"]);
    assert_eq!(o.status.code(), Some(2));
}
