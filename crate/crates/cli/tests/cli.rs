use std::fs;
use std::io::Write;
use std::process::{Command, Output, Stdio};

fn rankrobust(args: &[&str], cwd: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankrobust"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RANKROBUST_DATASET")
        .env_remove("RANKROBUST_NORM_CONFIG")
        .env_remove("RANKROBUST_SYNTH_OUT")
        .output()
        .unwrap()
}

const SUBCOMMANDS: [&str; 9] = [
    "normalize",
    "pairs",
    "score",
    "histogram",
    "trend",
    "taxonomy",
    "ensemble",
    "correlate",
    "synth",
];

#[test]
fn help_exits_zero_without_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    for sub in SUBCOMMANDS {
        let out = rankrobust(&[sub, "--help"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(
            String::from_utf8_lossy(&out.stdout).contains("Usage"),
            "{sub}"
        );
    }
    assert_eq!(rankrobust(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["histogram", "--bogus"],
        vec!["frobnicate"],
        vec![],
        vec!["histogram", "--in", "x.tsv", "--bin", "0.3"],
        vec!["score", "--pairs", "missing.tsv", "--dataset", "nowhere"],
        vec!["synth", "--noise", "wobble", "--out", "o"],
        vec!["pairs", "--sim", "s.tsv"],
        vec!["trend", "--in", "only-one.json"],
    ] {
        let out = rankrobust(&args, dir.path());
        assert_eq!(
            out.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn default_config_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let out = rankrobust(&["normalize", "--print-default-config"], dir.path());
    assert!(out.status.success());
    let path = dir.path().join("norm.cfg");
    fs::write(&path, &out.stdout).unwrap();
    let again = rankrobust(
        &[
            "normalize",
            "--print-default-config",
            "--config",
            path.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn query_keys_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_rankrobust"))
        .args(["normalize", "--queries", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"AA battery\nbattery AA\nthe\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let keys: Vec<&str> = text
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap())
        .collect();
    assert_eq!(keys[0], keys[1]);
    assert_eq!(keys[2], "");
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = rankrobust(
            &[
                "synth",
                "--seed",
                "7",
                "--queries",
                "100",
                "--weeks",
                "5",
                "--out",
                out,
            ],
            dir.path(),
        );
        assert!(o.status.success());
    }
    for f in ["log.tsv", "truth.tsv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn histogram_csv_rates_sum_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let o = rankrobust(args, dir.path());
        assert!(
            o.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        o
    };
    run(&[
        "synth",
        "--seed",
        "3",
        "--queries",
        "80",
        "--weeks",
        "1",
        "--noise",
        "jitter",
        "--out",
        "s",
    ]);
    run(&["normalize", "--log", "s/log.tsv", "--out", "ds"]);
    run(&["pairs", "--dataset", "ds", "--out", "p.tsv"]);
    run(&[
        "score",
        "--pairs",
        "p.tsv",
        "--dataset",
        "ds",
        "--out",
        "r.tsv",
    ]);
    let out = run(&["histogram", "--in", "r.tsv", "--bin", "0.1"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let rates: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 10);
    assert!((rates.iter().sum::<f64>() - 1.0).abs() < 1e-9);

    let json = run(&["histogram", "--in", "r.tsv", "--format", "json"]);
    assert!(String::from_utf8(json.stdout)
        .unwrap()
        .contains("\"week\": \"2023-04-15\""));
}
