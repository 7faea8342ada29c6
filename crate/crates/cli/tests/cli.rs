use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use headsum_core::harness::ExperimentConfig;

fn headsum(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_headsum"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Writes three synthetic splits and a small config; returns the config path.
fn workspace(dir: &Path, epochs: usize) -> PathBuf {
    fs::create_dir(dir.join("d")).unwrap();
    for (split, kind, n, seed) in [
        ("train", "cue", "12", "1"),
        ("validation", "headline", "4", "2"),
        ("test", "headline", "6", "3"),
    ] {
        let out = headsum(
            dir,
            &[
                "synth",
                "--kind",
                kind,
                "--documents",
                n,
                "--seed",
                seed,
                "--out",
                &format!("d/{split}.jsonl"),
            ],
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let config = dir.join("c.toml");
    fs::write(
        &config,
        format!(
            r#"out_dir = "out"
[corpus]
train = "d/train.jsonl"
validation = "d/validation.jsonl"
test = "d/test.jsonl"
[corpus.filter]
min_sentences = 1
min_tokens = 1
[model]
max_positions = 64
[train]
epochs = {epochs}
"#
        ),
    )
    .unwrap();
    config
}

#[test]
fn example_config_states_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let text = fs::read_to_string(path).unwrap();
    assert_eq!(
        ExperimentConfig::from_toml(&text).unwrap(),
        ExperimentConfig::default()
    );
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        cfg.validate().unwrap();
    }
}

#[test]
fn lead_only_run_skips_training() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path(), 1);
    let out = headsum(
        dir.path(),
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--systems",
            "lead-2",
        ],
    );
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.contains("lead-2"));
    assert!(!text.contains("sel-only"));
    assert!(!dir.path().join("out/model.ckpt").exists());
    assert!(dir.path().join("out/report.json").exists());
}

#[test]
fn stages_chain_through_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path(), 2);
    let c = config.to_str().unwrap();
    for stage in ["oracle", "train", "score", "eval", "sweep-alpha", "analyze"] {
        let out = headsum(dir.path(), &[stage, "--config", c, "--seed", "4"]);
        assert_eq!(
            code(&out),
            0,
            "{stage}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in [
        "vocab.txt",
        "labels/train.jsonl",
        "model.ckpt",
        "train_log.tsv",
        "scores/sa.jsonl",
        "report.txt",
        "alpha_sweep.tsv",
        "analysis.json",
    ] {
        assert!(dir.path().join("out").join(file).exists(), "{file}");
    }
    let sweep = headsum(
        dir.path(),
        &["sweep-alpha", "--config", c, "--alpha-grid", "0.5"],
    );
    let lines: Vec<String> = stdout(&sweep).lines().map(String::from).collect();
    // endpoints are always evaluated
    assert_eq!(lines.len(), 4, "{lines:?}");
}

#[test]
fn out_override_redirects_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path(), 1);
    let out = headsum(
        dir.path(),
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--systems",
            "oracle,lead-3",
            "--tau",
            "2",
            "--out",
            "elsewhere",
        ],
    );
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("elsewhere/report.txt").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path(), 1);
    let c = config.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--config", "missing.toml"],
        vec!["run", "--config", c, "--systems", "bogus"],
        vec!["run", "--config", c, "--alpha-grid", "0,1.5"],
        vec!["run", "--config", c, "--tau", "0"],
        vec!["run"],
        vec!["frobnicate"],
    ];
    for args in cases {
        assert_eq!(code(&headsum(dir.path(), &args)), 1, "{args:?}");
    }
    fs::write(dir.path().join("bad.toml"), "colour = 3\n").unwrap();
    assert_eq!(
        code(&headsum(dir.path(), &["run", "--config", "bad.toml"])),
        1
    );
    let missing = fs::read_to_string(&config)
        .unwrap()
        .replace("d/test.jsonl", "d/none.jsonl");
    fs::write(dir.path().join("m.toml"), missing).unwrap();
    assert_eq!(
        code(&headsum(dir.path(), &["eval", "--config", "m.toml"])),
        1
    );
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path(), 1);
    fs::write(dir.path().join("d/test.jsonl"), "{not json\n").unwrap();
    let out = headsum(
        dir.path(),
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--systems",
            "lead-2",
        ],
    );
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path(), 2);
    let text = fs::read_to_string(&config).unwrap() + "learning_rate = 1e300\n";
    fs::write(&config, text).unwrap();
    let out = headsum(dir.path(), &["train", "--config", config.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = headsum(dir.path(), &["--help"]);
    assert_eq!(code(&out), 0);
    for sub in [
        "split",
        "oracle",
        "train",
        "score",
        "eval",
        "sweep-alpha",
        "analyze",
    ] {
        assert!(stdout(&out).contains(sub), "{sub}");
    }
}

#[test]
fn split_partitions_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = headsum(
        dir.path(),
        &["synth", "--documents", "30", "--out", "all.jsonl"],
    );
    assert_eq!(code(&out), 0);
    fs::write(
        dir.path().join("s.toml"),
        r#"[corpus]
train = "p/train.jsonl"
validation = "p/validation.jsonl"
test = "p/test.jsonl"
[split]
input = "all.jsonl"
validation_fraction = 0.2
test_fraction = 0.2
"#,
    )
    .unwrap();
    let out = headsum(dir.path(), &["split", "--config", "s.toml", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let lines = |f: &str| {
        fs::read_to_string(dir.path().join("p").join(f))
            .unwrap()
            .lines()
            .count()
    };
    assert_eq!(
        lines("train.jsonl") + lines("validation.jsonl") + lines("test.jsonl"),
        30
    );
    assert_eq!(lines("test.jsonl"), 6);
}
