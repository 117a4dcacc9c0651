//! Static execution-space checker and deterministic interpreter for MiniCU,
//! a small CUDA-flavored language.
//!
//! The pipeline is [`frontend`] (preprocess and parse once per compile pass),
//! then [`spacecheck::check_passes`] for diagnostics, or [`interp::run`] to
//! execute the program.

pub mod diag;
pub mod interp;
mod par;
pub mod profile;
pub mod sema;
pub mod spacecheck;
pub mod syntax;

use std::io;
use std::path::Path;

pub use diag::{Code, Diagnostic, Severity, SrcLoc};
pub use par::Exec;
pub use profile::{CompileProfile, Compiler, CudaVersion};
pub use spacecheck::Mode;

use syntax::ast::Ast;
use syntax::{parse_with, preprocess, ParseOptions, PpPass};

/// One source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub text: String,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        SourceUnit {
            path: path.into(),
            text: text.into(),
        }
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(SourceUnit::new(path.display().to_string(), text))
    }
}

/// The program as seen by one compile pass.
#[derive(Debug, Clone)]
pub struct PassAst {
    pub pass: PpPass,
    pub ast: Ast,
}

/// Preprocesses and parses `unit` once per pass of `profile`.
pub fn frontend(
    unit: &SourceUnit,
    profile: &CompileProfile,
) -> Result<Vec<PassAst>, Vec<Diagnostic>> {
    let opts = ParseOptions::for_profile(profile);
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for pass in PpPass::for_profile(profile) {
        let parsed = preprocess(&unit.text, &unit.path, &pass)
            .and_then(|text| parse_with(&text, &unit.path, opts));
        match parsed {
            Ok(ast) => out.push(PassAst { pass, ast }),
            Err(d) => errors.push(d),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        diag::normalize(&mut errors);
        Err(errors)
    }
}

/// Checks many units, in parallel when `exec` asks for it and the
/// `parallel` feature is enabled. Results are in input order.
pub fn check_batch(
    units: &[SourceUnit],
    profile: &CompileProfile,
    mode: Mode,
    exec: Exec,
) -> Vec<Vec<Diagnostic>> {
    par::map(exec, units, |u| spacecheck::check_unit(u, profile, mode))
}
