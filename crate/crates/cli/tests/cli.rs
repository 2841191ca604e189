use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn sparsemix(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsemix"))
        .current_dir(dir)
        .env_remove("SPARSEMIX_SEED")
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("spawn sparsemix")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = sparsemix(dir, args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Toy corpus plus a simulated set at overlaps 0.2 and 1.0.
fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["toy-corpus", "--out", "corpus"]);
    ok(
        dir.path(),
        &[
            "simulate",
            "--manifest",
            "corpus/manifest.jsonl",
            "--out",
            "mix",
            "--overlap",
            "0.2",
            "--overlap",
            "1.0",
            "--per-target",
            "2",
            "--seed",
            "7",
        ],
    );
    dir
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["toy-corpus", "--out", "corpus"]);
    let args = [
        "simulate",
        "--manifest",
        "corpus/manifest.jsonl",
        "--out",
        "mix",
        "--overlap",
        "1.0",
        "--per-target",
        "1",
        "--seed",
        "7",
    ];
    ok(d, &args);
    let records = jsonl(&d.join("mix/records.jsonl"));
    assert_eq!(records.len(), 1);
    let first = snapshot(&d.join("mix"));
    assert!(first.contains_key(Path::new("run_config.json")));
    ok(d, &args);
    assert_eq!(snapshot(&d.join("mix")), first);

    let rc: Value = serde_json::from_slice(&first[Path::new("run_config.json")]).unwrap();
    assert!(rc["version"].as_str().unwrap().starts_with("sparsemix "));
    assert_eq!(rc["config"]["seed"], 7);
}

#[test]
fn seed_precedence_env_then_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["toy-corpus", "--out", "corpus", "--speakers", "2"]);
    fs::write(d.join("cfg.json"), r#"{"seed": 3}"#).unwrap();
    let run = |env: Option<&str>, flag: Option<&str>, out: &str| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_sparsemix"));
        c.current_dir(d)
            .env_remove("SPARSEMIX_SEED")
            .env("RUST_LOG", "warn");
        if let Some(e) = env {
            c.env("SPARSEMIX_SEED", e);
        }
        c.args([
            "--config",
            "cfg.json",
            "simulate",
            "--manifest",
            "corpus/manifest.jsonl",
            "--out",
            out,
            "--overlap",
            "0.5",
            "--per-target",
            "1",
        ]);
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        assert!(c.status().unwrap().success());
        let rc: Value =
            serde_json::from_str(&fs::read_to_string(d.join(out).join("run_config.json")).unwrap())
                .unwrap();
        rc["config"]["seed"].as_u64().unwrap()
    };
    assert_eq!(run(None, None, "a"), 3);
    assert_eq!(run(Some("4"), None, "b"), 4);
    assert_eq!(run(Some("4"), Some("5"), "c"), 5);
}

#[test]
fn infeasible_overlap_exits_two_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["toy-corpus", "--out", "corpus"]);
    let out = sparsemix(
        d,
        &[
            "simulate",
            "--manifest",
            "corpus/manifest.jsonl",
            "--out",
            "mix",
            "--overlap",
            "0.0",
            "--per-target",
            "1",
            "--min-gap-s",
            "2.0",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let skipped = jsonl(&d.join("mix/skipped.jsonl"));
    assert_eq!(skipped.len(), 1);
    assert!(skipped[0]["reason"].as_str().unwrap().contains("no-speech"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-speech"));
}

#[test]
fn separate_evaluate_report_pipeline() {
    let ws = workspace();
    let d = ws.path();

    // Segmented + oracle resolver: tracks and flag-free assignments.
    ok(
        d,
        &[
            "separate",
            "--mixtures",
            "mix",
            "--out",
            "seg",
            "--mode",
            "segmented",
            "--resolver",
            "oracle",
            "--sigma",
            "0.1",
        ],
    );
    let ids: Vec<String> = jsonl(&d.join("mix/records.jsonl"))
        .iter()
        .map(|r| r["mixture_id"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(ids.len(), 4);
    for id in &ids {
        for t in 0..2 {
            assert!(d.join(format!("seg/tracks/{id}_track{t}.wav")).exists());
        }
        let a: Value = serde_json::from_str(
            &fs::read_to_string(d.join(format!("seg/assignments/{id}.json"))).unwrap(),
        )
        .unwrap();
        assert!(a["assignment"]["flagged_segments"]
            .as_array()
            .unwrap()
            .is_empty());
    }
    assert!(d.join("seg/run_config.json").exists());

    // Separated tracks beat the mixture; no hypotheses means null WER.
    ok(
        d,
        &[
            "evaluate",
            "--mixtures",
            "mix",
            "--tracks",
            "seg",
            "--out",
            "ev_seg",
        ],
    );
    let res = jsonl(&d.join("ev_seg/results.jsonl"));
    assert_eq!(res.len(), 4);
    for r in &res {
        assert!(r["wer"].is_null());
        assert_eq!(r["condition"], "segmented_oracle");
        assert!(r["si_sdr_improvement_db"].as_f64().unwrap() > 0.0, "{r}");
    }

    // Stems as tracks score at the cap.
    ok(
        d,
        &[
            "separate",
            "--mixtures",
            "mix",
            "--out",
            "clean",
            "--mode",
            "clean",
        ],
    );
    ok(
        d,
        &[
            "evaluate",
            "--mixtures",
            "mix",
            "--tracks",
            "clean",
            "--out",
            "ev_clean",
        ],
    );
    for r in jsonl(&d.join("ev_clean/results.jsonl")) {
        for t in r["per_track"].as_array().unwrap() {
            assert_eq!(t["si_sdr_db"].as_f64().unwrap(), 100.0);
            assert_eq!(t["stem"], t["track"]);
        }
    }

    // Hypotheses: the exact transcripts give zero errors.
    let records = jsonl(&d.join("mix/records.jsonl"));
    let mut hyp = String::new();
    for r in &records {
        for (t, who) in ["speaker_a", "speaker_b"].iter().enumerate() {
            let words: Vec<&str> = r[who]["transcript"]
                .as_array()
                .unwrap()
                .iter()
                .map(|w| w.as_str().unwrap())
                .collect();
            hyp.push_str(&format!(
                "{}_track{t}\t{}\n",
                r["mixture_id"].as_str().unwrap(),
                words.join(" ")
            ));
        }
    }
    fs::write(d.join("hyp.txt"), &hyp).unwrap();
    ok(
        d,
        &[
            "evaluate",
            "--mixtures",
            "mix",
            "--tracks",
            "clean",
            "--hypotheses",
            "hyp.txt",
            "--out",
            "ev_hyp",
        ],
    );
    let mut words = 0;
    for r in jsonl(&d.join("ev_hyp/results.jsonl")) {
        let w = &r["wer"];
        assert_eq!(
            w["substitutions"].as_u64().unwrap()
                + w["deletions"].as_u64().unwrap()
                + w["insertions"].as_u64().unwrap(),
            0
        );
        words += w["reference_words"].as_u64().unwrap();
    }
    assert!(words > 0);

    // Unknown hypothesis ids are rejected with the ids listed.
    fs::write(d.join("bad.txt"), "nosuch_track0\tthe\n").unwrap();
    let out = sparsemix(
        d,
        &[
            "evaluate",
            "--mixtures",
            "mix",
            "--tracks",
            "clean",
            "--hypotheses",
            "bad.txt",
            "--out",
            "ev_bad",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nosuch_track0"));

    // Two result files merge with conserved totals.
    ok(
        d,
        &[
            "report",
            "--results",
            "ev_hyp/results.jsonl",
            "ev_seg/results.jsonl",
            "--gender-split",
            "--out",
            "rep",
        ],
    );
    let rep: Value =
        serde_json::from_str(&fs::read_to_string(d.join("rep/report.json")).unwrap()).unwrap();
    assert_eq!(rep["totals"]["records"], 8);
    let rows = rep["rows"].as_array().unwrap();
    let all_rows = rows.iter().filter(|r| r["gender_pairing"] == "all");
    let n: u64 = all_rows.clone().map(|r| r["n"].as_u64().unwrap()).sum();
    let pooled_words: u64 = all_rows
        .map(|r| r["reference_words"].as_u64().unwrap())
        .sum();
    assert_eq!(n, 8);
    assert_eq!(pooled_words, words);
    let pairings: std::collections::BTreeSet<&str> = rows
        .iter()
        .map(|r| r["gender_pairing"].as_str().unwrap())
        .collect();
    assert!(
        pairings.contains("all") && pairings.len() >= 2,
        "{pairings:?}"
    );
    let csv = fs::read_to_string(d.join("rep/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), rows.len() + 1);

    let out = ok(
        d,
        &["report", "--results", "ev_seg/results.jsonl", "--stdout"],
    );
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("overlap_bin,"));
}

#[test]
fn full_and_segmented_agree_on_full_overlap() {
    let ws = workspace();
    let d = ws.path();
    ok(
        d,
        &[
            "separate",
            "--mixtures",
            "mix",
            "--out",
            "full",
            "--mode",
            "full",
            "--seed",
            "11",
        ],
    );
    ok(
        d,
        &[
            "separate",
            "--mixtures",
            "mix",
            "--out",
            "seg",
            "--mode",
            "segmented",
            "--resolver",
            "affinity",
            "--seed",
            "11",
        ],
    );
    let mut checked = 0;
    for r in jsonl(&d.join("mix/records.jsonl")) {
        let id = r["mixture_id"].as_str().unwrap();
        let a: Value = serde_json::from_str(
            &fs::read_to_string(d.join(format!("seg/assignments/{id}.json"))).unwrap(),
        )
        .unwrap();
        let segs = a["segments"].as_array().unwrap();
        if segs.len() != 1 || segs[0]["kind"] != "multi" {
            continue;
        }
        for t in 0..2 {
            let name = format!("tracks/{id}_track{t}.wav");
            assert_eq!(
                fs::read(d.join("full").join(&name)).unwrap(),
                fs::read(d.join("seg").join(&name)).unwrap(),
                "{name}"
            );
        }
        checked += 1;
    }
    assert!(checked >= 1, "no all-multi mixture in the set");
}

#[test]
fn oracle_embed_files_match_generated_embeddings() {
    let ws = workspace();
    let d = ws.path();
    ok(
        d,
        &[
            "oracle-embed",
            "--mixtures",
            "mix",
            "--out",
            "emb",
            "--sigma",
            "0.2",
        ],
    );
    assert!(d.join("emb/mix00000.emb").exists() && d.join("emb/mix00000.spkid.emb").exists());
    ok(
        d,
        &[
            "separate",
            "--mixtures",
            "mix",
            "--out",
            "a",
            "--resolver",
            "speaker-id",
            "--embeddings",
            "emb",
        ],
    );
    ok(
        d,
        &[
            "separate",
            "--mixtures",
            "mix",
            "--out",
            "b",
            "--resolver",
            "speaker-id",
            "--sigma",
            "0.2",
        ],
    );
    let (a, b) = (snapshot(&d.join("a/tracks")), snapshot(&d.join("b/tracks")));
    assert_eq!(a.len(), 8);
    assert_eq!(a, b);
}

#[test]
fn speaker_id_without_files_is_an_error() {
    let ws = workspace();
    let d = ws.path();
    ok(
        d,
        &[
            "oracle-embed",
            "--mixtures",
            "mix",
            "--out",
            "emb",
            "--no-speaker-id",
        ],
    );
    let out = sparsemix(
        d,
        &[
            "separate",
            "--mixtures",
            "mix",
            "--out",
            "s",
            "--resolver",
            "speaker-id",
            "--embeddings",
            "emb",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("missing input") && err.contains("speaker-Id"),
        "{err}"
    );
    assert!(err.lines().all(|l| l.starts_with("level=")), "{err}");
}

#[test]
fn report_on_empty_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.jsonl"), "").unwrap();
    let out = sparsemix(d, &["report", "--results", "empty.jsonl", "--out", "rep"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no results"));
    assert!(out.stdout.is_empty());
}
