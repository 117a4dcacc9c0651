use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compiler {
    Nvcc,
    /// A host-only compiler without any CUDA support.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CudaVersion {
    V9,
    V10,
    V11,
    V12,
}

impl CudaVersion {
    /// Sticky error code reported by `cudaDeviceSynchronize` after a device trap.
    pub fn trap_error_code(self) -> i64 {
        match self {
            CudaVersion::V9 => 4,
            CudaVersion::V10 | CudaVersion::V11 | CudaVersion::V12 => 207,
        }
    }
}

impl FromStr for CudaVersion {
    type Err = ProfileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "9" => Ok(CudaVersion::V9),
            "10" => Ok(CudaVersion::V10),
            "11" => Ok(CudaVersion::V11),
            "12" => Ok(CudaVersion::V12),
            other => Err(ProfileError::UnknownVersion(other.to_string())),
        }
    }
}

impl fmt::Display for CudaVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            CudaVersion::V9 => 9,
            CudaVersion::V10 => 10,
            CudaVersion::V11 => 11,
            CudaVersion::V12 => 12,
        };
        write!(f, "{n}")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("--relaxed-constexpr requires --profile=nvcc")]
    RelaxedWithoutNvcc,
    #[error("--erase-specifiers requires --profile=plain")]
    EraseWithoutPlain,
    #[error("unknown CUDA version `{0}` (expected 9, 10, 11 or 12)")]
    UnknownVersion(String),
}

/// How a unit is compiled: which compiler, which toolkit, which flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompileProfile {
    pub compiler: Compiler,
    pub cuda_version: CudaVersion,
    pub relaxed_constexpr: bool,
    pub erase_specifiers: bool,
    /// `hdc<T>` yields `HstDev` for builtin arithmetic types.
    pub fundamentals_hstdev: bool,
}

impl Default for CompileProfile {
    fn default() -> Self {
        CompileProfile {
            compiler: Compiler::Nvcc,
            cuda_version: CudaVersion::V12,
            relaxed_constexpr: false,
            erase_specifiers: false,
            fundamentals_hstdev: false,
        }
    }
}

impl CompileProfile {
    pub fn nvcc() -> Self {
        Self::default()
    }

    pub fn plain(erase_specifiers: bool) -> Self {
        CompileProfile {
            compiler: Compiler::Plain,
            erase_specifiers,
            ..Self::default()
        }
    }

    pub fn with_version(mut self, v: CudaVersion) -> Self {
        self.cuda_version = v;
        self
    }

    pub fn with_relaxed_constexpr(mut self, on: bool) -> Self {
        self.relaxed_constexpr = on;
        self
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.relaxed_constexpr && self.compiler != Compiler::Nvcc {
            return Err(ProfileError::RelaxedWithoutNvcc);
        }
        if self.erase_specifiers && self.compiler != Compiler::Plain {
            return Err(ProfileError::EraseWithoutPlain);
        }
        Ok(())
    }
}
