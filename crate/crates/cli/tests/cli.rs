//! End-to-end tests of the command-line interface: exit codes, phase
//! composition, determinism of output directories, and the case-study span
//! table through the real binary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_thunderlens")
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(binary())
        .args(args)
        .current_dir(cwd)
        .env_remove("THUNDERLENS_RPC_URL")
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().unwrap_or(-1)
}

fn golden_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures/bzx_hack.json")
        .canonicalize()
        .expect("golden fixture present")
}

/// Byte-level snapshot of a directory (file name -> contents).
fn dir_snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut snapshot = BTreeMap::new();
    for entry in std::fs::read_dir(dir).expect("dir readable") {
        let entry = entry.unwrap();
        if entry.path().is_file() {
            snapshot.insert(
                entry.file_name().to_string_lossy().to_string(),
                std::fs::read(entry.path()).unwrap(),
            );
        }
    }
    snapshot
}

#[test]
fn synth_is_deterministic_and_honors_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["synth", "-n", "40", "--seed", "7", "-o", "a"], dir.path());
    assert_eq!(exit_code(&a), 0, "{a:?}");
    let b = run(&["synth", "-n", "40", "--seed", "7", "-o", "b"], dir.path());
    assert_eq!(exit_code(&b), 0);
    assert_eq!(
        dir_snapshot(&dir.path().join("a")),
        dir_snapshot(&dir.path().join("b")),
        "same seed must give identical directories"
    );

    let zero = run(&["synth", "-n", "0", "-o", "zero"], dir.path());
    assert_eq!(exit_code(&zero), 0);
    let names: Vec<String> = dir_snapshot(&dir.path().join("zero")).into_keys().collect();
    assert_eq!(names, ["ground_truth.jsonl", "synth_registry.json"]);
    let truth = std::fs::read_to_string(dir.path().join("zero/ground_truth.jsonl")).unwrap();
    assert!(truth.is_empty());
}

#[test]
fn identify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let synth = run(
        &["synth", "-n", "20", "--seed", "3", "-o", "corpus"],
        dir.path(),
    );
    assert_eq!(exit_code(&synth), 0);

    let ok = run(
        &[
            "identify",
            "--fixtures",
            "corpus",
            "--registry",
            "corpus/synth_registry.json",
            "-o",
            "out",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&ok), 0, "{ok:?}");
    assert!(dir.path().join("out/flashloans.jsonl").exists());

    let missing = run(
        &["identify", "--fixtures", "nope", "-o", "out2"],
        dir.path(),
    );
    assert_eq!(exit_code(&missing), 1);

    std::fs::write(dir.path().join("bad.json"), "{not json").unwrap();
    let bad_registry = run(
        &[
            "identify",
            "--fixtures",
            "corpus",
            "--registry",
            "bad.json",
            "-o",
            "out3",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&bad_registry), 2);
}

#[test]
fn classify_requires_phase_one_or_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    run(
        &["synth", "-n", "10", "--seed", "5", "-o", "corpus"],
        dir.path(),
    );

    let without = run(
        &["classify", "--fixtures", "corpus", "-o", "fresh"],
        dir.path(),
    );
    assert_eq!(exit_code(&without), 1, "{without:?}");

    let piped = run(
        &[
            "classify",
            "--pipeline",
            "--fixtures",
            "corpus",
            "--registry",
            "corpus/synth_registry.json",
            "-o",
            "piped",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&piped), 0, "{piped:?}");
    for file in ["flashloans.jsonl", "primitives.jsonl", "advanced.jsonl"] {
        assert!(dir.path().join("piped").join(file).exists());
    }

    // phase composition: identify then classify equals one pipeline run
    let identify = run(
        &[
            "identify",
            "--fixtures",
            "corpus",
            "--registry",
            "corpus/synth_registry.json",
            "-o",
            "staged",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&identify), 0);
    let staged = run(
        &[
            "classify",
            "--fixtures",
            "corpus",
            "--registry",
            "corpus/synth_registry.json",
            "-o",
            "staged",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&staged), 0, "{staged:?}");
    assert_eq!(
        dir_snapshot(&dir.path().join("piped")),
        dir_snapshot(&dir.path().join("staged")),
        "staged phases must equal the single pipeline run"
    );
}

#[test]
fn end_to_end_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    run(
        &["synth", "-n", "30", "--seed", "9", "-o", "corpus"],
        dir.path(),
    );
    for out in ["one", "two"] {
        let classify = run(
            &[
                "classify",
                "--pipeline",
                "--fixtures",
                "corpus",
                "--registry",
                "corpus/synth_registry.json",
                "-o",
                out,
            ],
            dir.path(),
        );
        assert_eq!(exit_code(&classify), 0);
        let report = run(
            &[
                "report",
                "--registry",
                "corpus/synth_registry.json",
                "-o",
                out,
            ],
            dir.path(),
        );
        assert_eq!(exit_code(&report), 0, "{report:?}");
    }
    assert_eq!(
        dir_snapshot(&dir.path().join("one")),
        dir_snapshot(&dir.path().join("two")),
        "end-to-end output directories differ between identical runs"
    );
}

#[test]
fn report_produces_case_study_span_table() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = golden_fixture();
    let classify = run(
        &[
            "classify",
            "--pipeline",
            "--fixtures",
            fixture.to_str().unwrap(),
            "-o",
            "out",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&classify), 0, "{classify:?}");

    let tx = "0xb5c8bd9430b6cc87a0e2fe110ece6bf527fa4f170a4bc8cd032f768fc5219838";
    let report = run(&["report", "-o", "out", "--tx", tx], dir.path());
    assert_eq!(exit_code(&report), 0, "{report:?}");
    let stdout = String::from_utf8_lossy(&report.stdout);
    let expected = [
        "Flash Loan in dYdX\t2\t188",
        "Collateral Borrowing in Compound\t21\t46",
        "Margin Trading in bZx\t47\t174",
        "First Swapping in Uniswap\t158\t161",
        "Second Swapping in Uniswap\t176\t180",
    ];
    for line in expected {
        assert!(stdout.contains(line), "missing {line:?} in:\n{stdout}");
    }
    assert!(dir
        .path()
        .join(format!("out/span_{}.csv", tx.trim_start_matches("0x")))
        .exists());

    let unknown = run(
        &[
            "report",
            "-o",
            "out",
            "--tx",
            "0x1111111111111111111111111111111111111111111111111111111111111111",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&unknown), 1);
}

#[test]
fn report_without_classification_fails() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&["report", "-o", "empty"], dir.path());
    assert_eq!(exit_code(&report), 1);
}

#[test]
fn empty_corpus_flows_through_with_zero_reports() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("corpus")).unwrap();
    let classify = run(
        &[
            "classify",
            "--pipeline",
            "--fixtures",
            "corpus",
            "-o",
            "out",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&classify), 0, "{classify:?}");
    let report = run(&["report", "-o", "out"], dir.path());
    assert_eq!(exit_code(&report), 0, "{report:?}");
    let distribution =
        std::fs::read_to_string(dir.path().join("out/report_distribution.json")).unwrap();
    assert!(distribution.contains("\"txCount\": 0"));
}

#[test]
fn fetch_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let no_endpoint = run(
        &[
            "fetch",
            "0x1111111111111111111111111111111111111111111111111111111111111111",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&no_endpoint), 2);

    let unreachable = run(
        &[
            "fetch",
            "--rpc-url",
            "http://127.0.0.1:9",
            "-o",
            "cache",
            "0x1111111111111111111111111111111111111111111111111111111111111111",
        ],
        dir.path(),
    );
    assert_eq!(exit_code(&unreachable), 1, "{unreachable:?}");
}
