//! The expected-diagnostics harness behind `exspace corpus`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use exspace_core::interp;
use exspace_core::spacecheck::check_unit;
use exspace_core::{diag, Diagnostic, SourceUnit};

use crate::expect::{self, Expectation};
use crate::Flags;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunCheck {
    pub expected_exit: Option<i32>,
    pub expected_stdout: Option<String>,
    /// Exit code and stdout, or why the program could not run.
    pub actual: Result<(i32, String), String>,
}

impl RunCheck {
    pub fn passed(&self) -> bool {
        match &self.actual {
            Ok((code, out)) => {
                self.expected_exit.is_none_or(|e| e == *code)
                    && self.expected_stdout.as_ref().is_none_or(|e| e == out)
            }
            Err(_) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusResult {
    pub file: PathBuf,
    pub matched: usize,
    pub unmatched_expectations: Vec<Expectation>,
    pub unexpected_diagnostics: Vec<Diagnostic>,
    pub run_check: Option<RunCheck>,
    /// Set when the file's annotations or flags could not be read.
    pub setup_error: Option<String>,
}

impl CorpusResult {
    pub fn passed(&self) -> bool {
        self.setup_error.is_none()
            && self.unmatched_expectations.is_empty()
            && self.unexpected_diagnostics.is_empty()
            && self.run_check.as_ref().is_none_or(RunCheck::passed)
    }

    fn failed_setup(file: &Path, msg: String) -> Self {
        CorpusResult {
            file: file.to_path_buf(),
            matched: 0,
            unmatched_expectations: Vec::new(),
            unexpected_diagnostics: Vec::new(),
            run_check: None,
            setup_error: Some(msg),
        }
    }
}

/// Checks one corpus file against its annotations.
pub fn check_file(path: &Path, defaults: &Flags) -> CorpusResult {
    let unit = match SourceUnit::read(path) {
        Ok(u) => u,
        Err(e) => return CorpusResult::failed_setup(path, format!("cannot read: {e}")),
    };
    check_source(path, &unit, defaults)
}

pub fn check_source(path: &Path, unit: &SourceUnit, defaults: &Flags) -> CorpusResult {
    let ann = match expect::parse(&unit.text) {
        Ok(a) => a,
        Err(e) => return CorpusResult::failed_setup(path, e),
    };
    let mut flags = match defaults.overlay(&ann.header.flags) {
        Ok(f) => f,
        Err(e) => return CorpusResult::failed_setup(path, e),
    };
    if let Some(m) = ann.header.mode {
        flags.mode = m;
    }
    let profile = match flags.compile_profile() {
        Ok(p) => p,
        Err(e) => return CorpusResult::failed_setup(path, e),
    };
    let diags = check_unit(unit, &profile, flags.mode);
    let (missing, extra) = expect::reconcile(&ann.expectations, &diags);
    let run_check = ann.header.wants_run().then(|| {
        let actual = if diag::has_errors(&diags) && !ann.header.force {
            Err("program has errors; add `//! force` to run it anyway".to_string())
        } else {
            interp::run(unit, &profile, flags.mode)
                .map(|r| (r.exit_code, r.stdout_lossy()))
                .map_err(|e| e.to_string())
        };
        RunCheck {
            expected_exit: ann.header.expect_exit,
            expected_stdout: ann.header.expect_stdout.clone(),
            actual,
        }
    });
    CorpusResult {
        file: path.to_path_buf(),
        matched: ann.expectations.len() - missing.len(),
        unmatched_expectations: missing,
        unexpected_diagnostics: extra,
        run_check,
        setup_error: None,
    }
}

/// `.mcu` files under `dir`, recursively, in path order.
pub fn collect(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|e| e == "mcu") {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn check_all(files: &[PathBuf], defaults: &Flags) -> Vec<CorpusResult> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        files.par_iter().map(|f| check_file(f, defaults)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        files.iter().map(|f| check_file(f, defaults)).collect()
    }
}

/// One block of text per file and the closing summary line.
pub fn report(results: &[CorpusResult]) -> String {
    let mut s = String::new();
    let mut passed = 0;
    for r in results {
        if r.passed() {
            passed += 1;
            let _ = writeln!(s, "PASS {} ({} matched)", r.file.display(), r.matched);
            continue;
        }
        let _ = writeln!(s, "FAIL {}", r.file.display());
        if let Some(e) = &r.setup_error {
            let _ = writeln!(s, "  setup: {e}");
        }
        for e in &r.unmatched_expectations {
            let _ = writeln!(s, "  missing: {e}");
        }
        for d in &r.unexpected_diagnostics {
            let _ = writeln!(s, "  unexpected: {}", diag::format_machine(d));
        }
        if let Some(rc) = r.run_check.as_ref().filter(|rc| !rc.passed()) {
            match &rc.actual {
                Ok((code, out)) => {
                    let _ = writeln!(
                        s,
                        "  run: expected exit {:?} stdout {:?}, got exit {code} stdout {out:?}",
                        rc.expected_exit, rc.expected_stdout
                    );
                }
                Err(e) => {
                    let _ = writeln!(s, "  run: {e}");
                }
            }
        }
    }
    let _ = writeln!(s, "passed {passed} / failed {}", results.len() - passed);
    s
}

pub fn command(flags: &Flags, dir: &Path, out: &mut dyn Write) -> Result<i32, String> {
    let files = collect(dir).map_err(|e| format!("cannot read {}: {e}", dir.display()))?;
    if files.is_empty() {
        // Reported by the caller with the usage exit status.
        return Err(format!("no .mcu files in {}", dir.display()));
    }
    let results = check_all(&files, flags);
    write!(out, "{}", report(&results)).map_err(|e| e.to_string())?;
    Ok(i32::from(results.iter().any(|r| !r.passed())))
}
