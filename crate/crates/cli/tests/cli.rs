use std::path::PathBuf;

use exspace_cli::{corpus, main_with, EXIT_USAGE};
use exspace_core::diag::{format_machine, parse_machine};

fn corpus_file(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "corpus", name]
        .iter()
        .collect();
    p.display().to_string()
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
fn help_and_version_exit_zero() {
    assert_eq!(exspace(&["--help"]).0, 0);
    assert_eq!(exspace(&["--version"]).0, 0);
}

#[test]
fn usage_problems_exit_two() {
    assert_eq!(exspace(&["check", "--bogus", "x.mcu"]).0, EXIT_USAGE);
    assert_eq!(
        exspace(&["check", "--mode", "loose", "x.mcu"]).0,
        EXIT_USAGE
    );
    assert_eq!(exspace(&["frobnicate"]).0, EXIT_USAGE);
    let (code, _, err) = exspace(&["check", "/definitely/not/here.mcu"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("cannot read"), "{err}");
}

#[test]
fn warnings_alone_exit_zero() {
    let f = corpus_file("problem_t.mcu");
    let (code, out, _) = exspace(&["check", &f]);
    assert_eq!(code, 0);
    assert_eq!(
        out,
        format!("{f}:12:10: warning[W1101]: calling a host function from a host device function is not allowed\n")
    );
}

#[test]
fn errors_exit_one() {
    let f = corpus_file("arch_dependent_call_sound.mcu");
    let (code, out, _) = exspace(&["check", "--mode", "sound", &f]);
    assert_eq!(code, 1);
    assert!(out.contains("error[E1201]"), "{out}");
    let (code, out, _) = exspace(&["check", "--mode", "fidelity", &f]);
    assert_eq!((code, out.as_str()), (0, ""));
}

#[test]
fn human_format_points_at_the_call() {
    let f = corpus_file("problem_t.mcu");
    let (_, out, _) = exspace(&["check", "--emit", "human", &f]);
    assert!(out.contains("warning[W1101]"), "{out}");
    assert!(out.contains("return T{}.call();"), "{out}");
    assert!(out.contains('^'), "{out}");
}

#[test]
fn run_prints_program_output() {
    let (code, out, err) = exspace(&["run", &corpus_file("dot_kernel.mcu")]);
    assert_eq!(
        (code, out.as_str(), err.as_str()),
        (0, "........................", "")
    );
}

#[test]
fn run_refuses_programs_with_errors_unless_forced() {
    let f = corpus_file("problem_t_dev_fidelity.mcu");
    let (code, out, _) = exspace(&["run", "--mode", "sound", &f]);
    assert_eq!(code, 1);
    assert!(out.contains("error["), "{out}");
    let (code, out, err) = exspace(&["run", "--mode", "sound", "--force", &f]);
    assert_eq!(code, 101);
    assert_eq!(out, "");
    assert!(err.contains("note[N2002]"), "{err}");
}

#[test]
fn cuda_version_changes_the_trap_code() {
    let f = corpus_file("release_assert_trap.mcu");
    assert_eq!(exspace(&["run", &f]).0, 207);
    assert_eq!(exspace(&["run", "--cuda-version", "9", &f]).0, 4);
}

#[test]
fn machine_lines_roundtrip_over_the_corpus() {
    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "corpus"]
        .iter()
        .collect();
    let mut seen = 0;
    for f in corpus::collect(&dir).unwrap() {
        let f = f.display().to_string();
        for mode in ["classic", "fidelity", "sound", "proposal1", "proposal2"] {
            let (_, out, _) = exspace(&["check", "--mode", mode, &f]);
            for line in out.lines() {
                let d = parse_machine(line).unwrap_or_else(|| panic!("unparsable: {line}"));
                assert_eq!(format_machine(&d), line);
                seen += 1;
            }
        }
    }
    assert!(seen > 20, "only {seen} diagnostics");
}
