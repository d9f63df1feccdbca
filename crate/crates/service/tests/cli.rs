mod support;

use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::{json, Value};

use support::{ARTICLES, QUESTIONS};

fn emonews(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_emonews")).args(args).env("RUST_LOG", "warn").output().unwrap();
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into(), String::from_utf8_lossy(&out.stderr).into())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn ingest_index_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw.jsonl");
    let mut lines: Vec<String> = ARTICLES
        .iter()
        .map(|(id, title, body)| json!({"id": id, "title": title, "text": body, "language": "EN"}).to_string())
        .collect();
    lines.push(json!({"id": "x1", "title": "Ausland", "text": "", "language": "de"}).to_string());
    lines.push("{broken".into());
    fs::write(&raw, lines.join("\n")).unwrap();

    let corpus = dir.path().join("corpus.jsonl");
    let (ok, stdout, stderr) = emonews(&["ingest", "--input", p(&raw), "--out", p(&corpus)]);
    assert!(ok, "{stderr}");
    let summary: Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(summary["accepted"], 5);
    assert_eq!(summary["rejected"], 2);

    let index = dir.path().join("titles.idx");
    let (ok, stdout, stderr) = emonews(&["index", "--corpus", p(&corpus), "--out", p(&index)]);
    assert!(ok, "{stderr}");
    assert!(stdout.contains("indexed 5 articles"));

    let script = dir.path().join("script.json");
    let turns = json!([QUESTIONS[0], {"speech": QUESTIONS[1]}, QUESTIONS[2]]);
    fs::write(&script, json!({"dialogues": [{"id": "d1", "turns": turns}, {"id": "d2", "turns": [QUESTIONS[3]]}]}).to_string())
        .unwrap();
    let out = dir.path().join("sim");
    let (ok, stdout, stderr) = emonews(&[
        "simulate", "--script", p(&script), "--mode", "both", "--corpus", p(&corpus), "--index", p(&index), "--out", p(&out),
    ]);
    assert!(ok, "{stderr}");
    assert!(stdout.contains("emotional: 2 dialogues, 4 turns, 0 failed turns"), "{stdout}");

    for mode in ["baseline", "emotional"] {
        let text = fs::read_to_string(out.join(format!("{mode}.jsonl"))).unwrap();
        let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0]["turns"][1]["input_kind"], "audio");
        let audio_ref = records[0]["turns"][0]["audio_ref"].as_str().unwrap();
        assert!(out.join(audio_ref).is_file());
        if mode == "baseline" {
            assert!(records.iter().flat_map(|r| r["turns"].as_array().unwrap()).all(|t| t["emotion"] == "neutral"));
        }
    }
}

#[test]
fn evaluate_writes_report_table_and_boxplot() {
    let dir = tempfile::tempdir().unwrap();
    let write_side = |name: &str, scores: &[i64]| {
        let responses: Vec<String> = scores
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                json!({"session_id": format!("{name}{i}"), "items": {
                    "rag": v, "task1": v, "task2": 3, "emotion_appropriateness": v,
                    "engage1": v, "engage2": v, "engage3": (v % 5) + 1
                }})
                .to_string()
            })
            .collect();
        let sessions: Vec<String> = (0..scores.len())
            .map(|i| json!({"session_id": format!("{name}{i}"), "mode": name, "n_turn": 3 + i}).to_string())
            .collect();
        let (r, s) = (dir.path().join(format!("{name}_responses.jsonl")), dir.path().join(format!("{name}_sessions.jsonl")));
        fs::write(&r, responses.join("\n")).unwrap();
        fs::write(&s, sessions.join("\n")).unwrap();
        format!("{},{}", p(&r), p(&s))
    };
    let a = write_side("baseline", &[1, 2, 2, 1, 3]);
    let b = write_side("emotional", &[4, 5, 4, 3, 5]);
    let out = dir.path().join("out/report.json");
    let (ok, stdout, stderr) = emonews(&["evaluate", "--system-a", &a, "--system-b", &b, "--out", p(&out)]);
    assert!(ok, "{stderr}");
    for label in ["RAG Evaluation", "Task Achievement 1", "Task achievement 2", "Speech Emotion Appropriateness", "Engagement", "N Turn"] {
        assert!(stdout.contains(label), "{label}");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 6);
    assert!(dir.path().join("out/report.txt").is_file());
    let boxplot: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.boxplot.json")).unwrap()).unwrap();
    assert_eq!(boxplot["metrics"].as_array().unwrap().len(), 6);

    let (ok, _, stderr) = emonews(&["evaluate", "--system-a", "nope", "--system-b", &b, "--out", p(&out)]);
    assert!(!ok);
    assert!(stderr.contains("error:"));
}

#[test]
fn serve_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, json!({"mode": "emotional", "corpus_path": p(&dir.path().join("missing.jsonl")), "data_dir": p(dir.path())}).to_string())
        .unwrap();
    let (ok, _, stderr) = emonews(&["serve", "--config", p(&config)]);
    assert!(!ok);
    assert!(stderr.contains("corpus_path"), "{stderr}");
}
