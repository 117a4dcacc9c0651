//! Front end: line-oriented preprocessing over a fixed macro set, tokenizing,
//! parsing into [`ast::Ast`], and a canonical printer.

pub mod ast;
mod lexer;
mod parser;
mod preprocess;
mod printer;

use std::collections::BTreeSet;

use crate::profile::{CompileProfile, Compiler};

pub use parser::{parse, parse_with, CudaKeywords, ParseOptions};
pub use preprocess::preprocess;
pub use printer::print;
pub(crate) use printer::{template_header as print_template_header, type_expr as print_type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PassKind {
    HostPass,
    DevicePass,
}

/// The only macros the preprocessor knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BuiltinMacro {
    Cudacc,
    CudaArch,
    RelaxedConstexpr,
}

impl BuiltinMacro {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "__CUDACC__" => Some(BuiltinMacro::Cudacc),
            "__CUDA_ARCH__" => Some(BuiltinMacro::CudaArch),
            "__CUDACC_RELAXED_CONSTEXPR__" => Some(BuiltinMacro::RelaxedConstexpr),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BuiltinMacro::Cudacc => "__CUDACC__",
            BuiltinMacro::CudaArch => "__CUDA_ARCH__",
            BuiltinMacro::RelaxedConstexpr => "__CUDACC_RELAXED_CONSTEXPR__",
        }
    }
}

/// One compilation pass and the macros defined while it runs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PpPass {
    pub kind: PassKind,
    pub defined: BTreeSet<BuiltinMacro>,
}

impl PpPass {
    /// nvcc runs a device pass and a host pass; a plain compiler only the host pass.
    pub fn for_profile(profile: &CompileProfile) -> Vec<PpPass> {
        match profile.compiler {
            Compiler::Plain => vec![PpPass {
                kind: PassKind::HostPass,
                defined: BTreeSet::new(),
            }],
            Compiler::Nvcc => {
                let mut base = BTreeSet::from([BuiltinMacro::Cudacc]);
                if profile.relaxed_constexpr {
                    base.insert(BuiltinMacro::RelaxedConstexpr);
                }
                let mut device = base.clone();
                device.insert(BuiltinMacro::CudaArch);
                vec![
                    PpPass {
                        kind: PassKind::HostPass,
                        defined: base,
                    },
                    PpPass {
                        kind: PassKind::DevicePass,
                        defined: device,
                    },
                ]
            }
        }
    }

    pub fn is_defined(&self, m: BuiltinMacro) -> bool {
        self.defined.contains(&m)
    }
}

impl ParseOptions {
    pub fn for_profile(profile: &CompileProfile) -> Self {
        let cuda_keywords = match (profile.compiler, profile.erase_specifiers) {
            (Compiler::Nvcc, _) => CudaKeywords::Accept,
            (Compiler::Plain, true) => CudaKeywords::Erase,
            (Compiler::Plain, false) => CudaKeywords::Reject,
        };
        ParseOptions { cuda_keywords }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::CompileProfile;

    #[test]
    fn pass_macro_sets() {
        let passes = PpPass::for_profile(&CompileProfile::nvcc());
        assert_eq!(passes.len(), 2);
        for p in &passes {
            assert!(p.is_defined(BuiltinMacro::Cudacc));
            assert_eq!(
                p.is_defined(BuiltinMacro::CudaArch),
                p.kind == PassKind::DevicePass
            );
            assert!(!p.is_defined(BuiltinMacro::RelaxedConstexpr));
        }
        let relaxed = CompileProfile::nvcc().with_relaxed_constexpr(true);
        assert!(PpPass::for_profile(&relaxed)
            .iter()
            .all(|p| p.is_defined(BuiltinMacro::RelaxedConstexpr)));
        let plain = PpPass::for_profile(&CompileProfile::plain(true));
        assert_eq!(plain.len(), 1);
        assert!(plain[0].defined.is_empty());
        assert_eq!(plain[0].kind, PassKind::HostPass);
    }
}
