use std::fs;
use std::path::PathBuf;

use exspace_cli::corpus::{check_all, collect, report};
use exspace_cli::{main_with, Flags, EXIT_USAGE};

fn corpus_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "corpus"]
        .iter()
        .collect()
}

fn exspace(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("exspace").chain(args.iter().copied());
    let code = main_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn whole_corpus_passes() {
    let dir = corpus_dir();
    let n = collect(&dir).unwrap().len();
    let (code, out, _) = exspace(&["corpus", &dir.display().to_string()]);
    assert_eq!(code, 0, "{out}");
    assert!(out.ends_with(&format!("passed {n} / failed 0\n")), "{out}");
}

#[test]
fn corpus_report_is_idempotent() {
    let files = collect(&corpus_dir()).unwrap();
    let flags = Flags::default();
    assert_eq!(
        report(&check_all(&files, &flags)),
        report(&check_all(&files, &flags))
    );
}

#[test]
fn unannotated_diagnostic_fails_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("stray.mcu"),
        "__device__ int d() { return 1; }\nint main() { return d(); }\n",
    )
    .unwrap();
    let (code, out, _) = exspace(&["corpus", &dir.path().display().to_string()]);
    assert_eq!(code, 1);
    assert!(out.contains("FAIL"), "{out}");
    assert!(
        out.contains("unexpected:") && out.contains("[E1001]"),
        "{out}"
    );
    assert!(out.ends_with("passed 0 / failed 1\n"), "{out}");
}

#[test]
fn missing_diagnostic_fails_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("quiet.mcu"),
        "int main() { return 0; }  //~ warning W1101\n",
    )
    .unwrap();
    let (code, out, _) = exspace(&["corpus", &dir.path().display().to_string()]);
    assert_eq!(code, 1);
    assert!(out.contains("missing: line 1: warning[W1101]"), "{out}");
}

#[test]
fn run_expectations_are_compared() {
    let dir = tempfile::tempdir().unwrap();
    let src =
        "//! expect-exit: 3\n//! expect-stdout: \"hi\"\nint main() { printf(\"ho\"); return 3; }\n";
    fs::write(dir.path().join("out.mcu"), src).unwrap();
    let (code, out, _) = exspace(&["corpus", &dir.path().display().to_string()]);
    assert_eq!(code, 1);
    assert!(out.contains("got exit 3 stdout \"ho\""), "{out}");
    fs::write(dir.path().join("out.mcu"), src.replace("\"ho\"", "\"hi\"")).unwrap();
    assert_eq!(exspace(&["corpus", &dir.path().display().to_string()]).0, 0);
}

#[test]
fn empty_directory_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = exspace(&["corpus", &dir.path().display().to_string()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("no .mcu files"), "{err}");
}

#[test]
fn bad_header_is_a_setup_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.mcu"),
        "//! mode: loose\nint main() { return 0; }\n",
    )
    .unwrap();
    let (code, out, _) = exspace(&["corpus", &dir.path().display().to_string()]);
    assert_eq!(code, 1);
    assert!(out.contains("setup:"), "{out}");
}
