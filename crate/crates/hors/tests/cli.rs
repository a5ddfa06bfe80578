//! End-to-end tests of the `hors` binary: exit-status contract, stream
//! separation (results on stdout, diagnostics on stderr), and frozen
//! golden outputs for the machine-readable formats.

use std::path::PathBuf;
use std::process::{Command, Output};

fn hors(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hors"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary launches")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by exit, not a signal")
}

fn stdout(o: &Output) -> &str {
    std::str::from_utf8(&o.stdout).expect("stdout is UTF-8")
}

fn stderr(o: &Output) -> &str {
    std::str::from_utf8(&o.stderr).expect("stderr is UTF-8")
}

/// A scratch file under the target-adjacent temp dir, unique per test.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hors-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn golden_outputs() {
    let cases: &[(&[&str], &[u8])] = &[
        (
            &["solve", "schemes/y.scheme"],
            include_bytes!("golden/solve_y.txt"),
        ),
        (
            &["solve", "schemes/y.scheme", "--format", "dot"],
            include_bytes!("golden/solve_y.dot"),
        ),
        (
            &["solve", "schemes/eq23.scheme"],
            include_bytes!("golden/solve_eq23.txt"),
        ),
        (
            &["flatten", "schemes/eq23.scheme"],
            include_bytes!("golden/flatten_eq23.txt"),
        ),
        (
            &["flatten", "schemes/stream.scheme"],
            include_bytes!("golden/flatten_stream.txt"),
        ),
        (
            &["unfold", "schemes/y.scheme", "--depth", "4"],
            include_bytes!("golden/unfold_y_d4.txt"),
        ),
        (
            &[
                "unfold",
                "schemes/eq23.scheme",
                "--nonterminal",
                "p2",
                "--depth",
                "3",
            ],
            include_bytes!("golden/unfold_eq23_p2_d3.txt"),
        ),
        (
            &["interpret", "schemes/y.scheme"],
            include_bytes!("golden/interpret_y.txt"),
        ),
        (
            &["interpret", "schemes/eq23.scheme"],
            include_bytes!("golden/interpret_eq23.txt"),
        ),
        (
            &[
                "interpret",
                "schemes/stream.scheme",
                "--ops",
                "schemes/tower2.ops",
            ],
            include_bytes!("golden/interpret_stream.txt"),
        ),
    ];
    for (args, want) in cases {
        let got = hors(args);
        assert_eq!(code(&got), 0, "{args:?}: {}", stderr(&got));
        assert_eq!(
            stdout(&got).as_bytes(),
            *want,
            "{args:?} drifted from its golden output"
        );
        assert!(stderr(&got).is_empty(), "{args:?} wrote diagnostics");
    }
}

#[test]
fn check_reports_guardedness() {
    let ok = hors(&["check", "schemes/y.scheme"]);
    assert_eq!(code(&ok), 0);
    assert_eq!(stdout(&ok), "guarded\n");

    let bad = hors(&["check", "schemes/unguarded.scheme"]);
    assert_eq!(code(&bad), 2);
    assert_eq!(stdout(&bad), "unguarded: p\n");
    assert!(stderr(&bad).is_empty());
}

#[test]
fn check_inline_collapses_bare_aliases() {
    let bare = hors(&["check", "schemes/alias.scheme"]);
    assert_eq!(code(&bare), 2);
    assert_eq!(stdout(&bare), "unguarded: q\n");

    let inlined = hors(&["check", "schemes/alias.scheme", "--inline"]);
    assert_eq!(code(&inlined), 0);
    assert_eq!(stdout(&inlined), "guarded\n");
}

#[test]
fn alphaeq_distinguishes_depth_from_full_comparison() {
    let same = hors(&["alphaeq", "schemes/y.scheme", "schemes/y.scheme"]);
    assert_eq!(code(&same), 0);
    assert_eq!(stdout(&same), "equal\n");

    // The trees differ, but only below depth 1.
    let differ = hors(&["alphaeq", "schemes/y.scheme", "schemes/eta.scheme"]);
    assert_eq!(code(&differ), 2);
    assert_eq!(stdout(&differ), "not equal\n");

    let shallow = hors(&[
        "alphaeq",
        "schemes/y.scheme",
        "schemes/eta.scheme",
        "--depth",
        "1",
    ]);
    assert_eq!(code(&shallow), 0);
    assert_eq!(stdout(&shallow), "equal\n");
}

#[test]
fn solve_verify_roundtrip() {
    let sol = scratch("y-solution.scheme");
    let solved = hors(&["solve", "schemes/y.scheme", "--out", sol.to_str().unwrap()]);
    assert_eq!(code(&solved), 0);
    assert!(stdout(&solved).is_empty(), "--out must silence stdout");

    let ok = hors(&[
        "verify",
        "schemes/y.scheme",
        "--solution",
        sol.to_str().unwrap(),
    ]);
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert_eq!(stdout(&ok), "ok\n");
}

#[test]
fn verify_rejects_a_wrong_solution() {
    let wrong = scratch("wrong-solution.scheme");
    std::fs::write(&wrong, "Y = \\f. Y @ f\n").unwrap();
    let got = hors(&[
        "verify",
        "schemes/y.scheme",
        "--solution",
        wrong.to_str().unwrap(),
    ]);
    assert_eq!(code(&got), 2);
    assert_eq!(stdout(&got), "failed: Y\n");
}

#[test]
fn interpret_golden_flag() {
    let hit = hors(&[
        "interpret",
        "schemes/y.scheme",
        "--golden",
        "tests/golden/interpret_y.txt",
    ]);
    assert_eq!(code(&hit), 0, "{}", stderr(&hit));

    let miss = hors(&[
        "interpret",
        "schemes/y.scheme",
        "--golden",
        "tests/golden/interpret_eq23.txt",
    ]);
    assert_eq!(code(&miss), 2);
    assert!(stderr(&miss).contains("golden mismatch"));
    // The tables still go to stdout so the mismatch can be inspected.
    assert!(stdout(&miss).starts_with("model tower 2\n"));
}

#[test]
fn interpret_model_selection() {
    let small = hors(&["interpret", "schemes/y.scheme", "--model", "tower:1"]);
    assert_eq!(code(&small), 0);
    assert!(stdout(&small).starts_with("model tower 1\n"));

    let clash = hors(&[
        "interpret",
        "schemes/stream.scheme",
        "--ops",
        "schemes/tower2.ops",
        "--model",
        "tower:1",
    ]);
    assert_eq!(code(&clash), 1);
    assert!(stderr(&clash).contains("disagrees"));

    let missing_ops = hors(&["interpret", "schemes/stream.scheme"]);
    assert_eq!(code(&missing_ops), 1);
    assert!(stderr(&missing_ops).contains("cons"));
}

#[test]
fn unfold_defaults() {
    let explicit = hors(&["unfold", "schemes/y.scheme", "--depth", "8"]);
    let implied = hors(&["unfold", "schemes/y.scheme"]);
    assert_eq!(code(&explicit), 0);
    assert_eq!(code(&implied), 0);
    assert_eq!(stdout(&explicit), stdout(&implied), "default depth is 8");

    let ambiguous = hors(&["unfold", "schemes/eq23.scheme"]);
    assert_eq!(code(&ambiguous), 1);
    assert!(stderr(&ambiguous).contains("2 nonterminals"));
}

#[test]
fn errors_use_stderr_and_status_one() {
    let missing = hors(&["check", "schemes/no-such-file.scheme"]);
    assert_eq!(code(&missing), 1);
    assert!(stdout(&missing).is_empty());
    assert!(stderr(&missing).contains("no-such-file.scheme"));

    let bad = scratch("bad-syntax.scheme");
    std::fs::write(&bad, "p = (\n").unwrap();
    let parse = hors(&["check", bad.to_str().unwrap()]);
    assert_eq!(code(&parse), 1);
    assert!(stdout(&parse).is_empty());
    assert!(stderr(&parse).starts_with("error: "));

    let unknown = hors(&["frobnicate"]);
    assert_eq!(code(&unknown), 1);
    assert!(!stderr(&unknown).is_empty());
}

#[test]
fn help_is_a_positive_answer() {
    let got = hors(&["--help"]);
    assert_eq!(code(&got), 0);
    assert!(stdout(&got).contains("Usage"));
    assert!(stderr(&got).is_empty());
}
