//! Exit codes and end-to-end flows of the `craftsim` binary.

use std::path::Path;
use std::process::{Command, Output};

fn craftsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_craftsim"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn run_report_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = craftsim(
        d,
        &[
            "run",
            "--agent",
            "empowered",
            "--trials",
            "2",
            "--tasks-per-trial",
            "5",
            "--output-dir",
            "emp",
        ],
    );
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    assert!(d.join("emp/log.jsonl").exists());
    assert!(d.join("emp/metrics.json").exists());

    let run = craftsim(
        d,
        &[
            "run",
            "--trials",
            "2",
            "--tasks-per-trial",
            "5",
            "--output-dir",
            "rnd",
        ],
    );
    assert_eq!(code(&run), 0);
    let rep = craftsim(
        d,
        &["report", "emp/log.jsonl", "rnd/log.jsonl", "-o", "rep"],
    );
    assert_eq!(code(&rep), 0, "{}", String::from_utf8_lossy(&rep.stderr));
    let success = std::fs::read_to_string(d.join("rep/success.csv")).unwrap();
    assert!(success.contains("\nemp,empowered,1,3,10,"));

    let replay = craftsim(d, &["replay", "emp/log.jsonl", "--verify"]);
    assert_eq!(code(&replay), 0);
    assert!(String::from_utf8_lossy(&replay.stdout).contains("byte-identical: true"));
}

#[test]
fn recorded_transcripts_replay_to_the_same_log() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let common = [
        "run",
        "--agent",
        "llm",
        "--trials",
        "1",
        "--tasks-per-trial",
        "3",
        "--group-size",
        "2",
    ];
    let mut rec = common.to_vec();
    rec.extend([
        "--llm-backend",
        "heuristic",
        "--record",
        "tr",
        "--output-dir",
        "a",
    ]);
    assert_eq!(code(&craftsim(d, &rec)), 0);
    let mut rep = common.to_vec();
    rep.extend([
        "--llm-backend",
        "replay",
        "--transcripts",
        "tr",
        "--output-dir",
        "b",
    ]);
    let out = craftsim(d, &rep);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        std::fs::read(d.join("a/log.jsonl")).unwrap(),
        std::fs::read(d.join("b/log.jsonl")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&craftsim(d, &["run", "--config", "missing.json"])), 1);
    std::fs::write(
        d.join("bad.json"),
        r#"{"items":["a","a"],"base_items":[],"recipes":[]}"#,
    )
    .unwrap();
    assert_eq!(code(&craftsim(d, &["run", "--graph", "bad.json"])), 1);
    let mixed = craftsim(
        d,
        &[
            "run",
            "--trials",
            "1",
            "--tasks-per-trial",
            "2",
            "--output-dir",
            "x",
        ],
    );
    assert_eq!(code(&mixed), 0);
    let other = craftsim(
        d,
        &[
            "run",
            "--trials",
            "1",
            "--tasks-per-trial",
            "3",
            "--output-dir",
            "y",
        ],
    );
    assert_eq!(code(&other), 0);
    assert_eq!(
        code(&craftsim(
            d,
            &["report", "x/log.jsonl", "y/log.jsonl", "-o", "r"]
        )),
        1
    );
    assert_eq!(
        code(&craftsim(
            d,
            &[
                "report",
                "x/log.jsonl",
                "y/log.jsonl",
                "--allow-mixed",
                "-o",
                "r"
            ]
        )),
        0
    );
    std::fs::write(d.join("empty.jsonl"), "").unwrap();
    assert_eq!(code(&craftsim(d, &["replay", "empty.jsonl"])), 2);
    let strict = craftsim(
        d,
        &[
            "run",
            "--trials",
            "1",
            "--tasks-per-trial",
            "5",
            "--min-success",
            "1.01",
            "--output-dir",
            "z",
        ],
    );
    assert_eq!(code(&strict), 3);
}

#[test]
fn convert_and_generate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("wc.json"),
        r#"{"entities": {"fire": {"recipes": []}, "water": {"recipes": []},
            "steam": {"recipes": [["fire", "water"]]}, "mud": {"recipes": []}}}"#,
    )
    .unwrap();
    let conv = craftsim(d, &["convert", "wc.json", "-o", "recipes.json"]);
    let text = std::fs::read_to_string(d.join("recipes.json")).unwrap_or_default();
    assert_eq!(code(&conv), 0, "{}", String::from_utf8_lossy(&conv.stderr));
    assert!(text.contains("steam"));

    let gen = craftsim(
        d,
        &[
            "gen-tasks",
            "--depth",
            "2",
            "--distractors",
            "3",
            "--count",
            "4",
            "--scramble-seed",
            "1",
            "-o",
            "tasks.json",
        ],
    );
    assert_eq!(code(&gen), 0);
    assert!(d.join("tasks.scrambled.json").exists());
    assert!(d.join("tasks.scramble_map.json").exists());

    let probe = craftsim(
        d,
        &[
            "probe",
            "semantics",
            "--trials",
            "1",
            "--tasks-per-trial",
            "5",
            "--output-dir",
            "sem",
        ],
    );
    assert_eq!(code(&probe), 0);
    let out = String::from_utf8_lossy(&probe.stdout);
    let nums: Vec<&str> = out.split_whitespace().filter(|w| w.contains('.')).collect();
    assert_eq!(nums[0], nums[1]);
}
