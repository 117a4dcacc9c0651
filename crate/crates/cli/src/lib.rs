//! The `exspace` command line: `check`, `run` and `corpus`.
//!
//! [`main_with`] is the whole program minus process exit, so tests can drive
//! it in-process.

pub mod corpus;
pub mod expect;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exspace_core::diag::{self, format_human, format_machine};
use exspace_core::interp::{self, RunError};
use exspace_core::{
    check_batch, CompileProfile, Compiler, CudaVersion, Diagnostic, Exec, Mode, SourceUnit,
};

/// Exit status for usage and I/O failures.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "exspace",
    version,
    about = "Execution-space checker and interpreter for MiniCU"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report execution-space diagnostics.
    Check {
        #[command(flatten)]
        flags: Flags,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Check, then interpret the program.
    Run {
        #[command(flatten)]
        flags: Flags,
        /// Run even when the check reports errors.
        #[arg(long)]
        force: bool,
        path: PathBuf,
    },
    /// Check every `.mcu` file in a directory against its annotations.
    Corpus {
        #[command(flatten)]
        flags: Flags,
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProfileArg {
    Nvcc,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Emit {
    Human,
    #[default]
    Machine,
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    #[arg(long, default_value = "classic")]
    pub mode: Mode,
    #[arg(long, value_enum, default_value = "nvcc")]
    pub profile: ProfileArg,
    #[arg(long, default_value = "12")]
    pub cuda_version: CudaVersion,
    #[arg(long)]
    pub relaxed_constexpr: bool,
    #[arg(long)]
    pub erase_specifiers: bool,
    /// Treat `int` and `bool` as usable on both sides in `hdc<T>`.
    #[arg(long)]
    pub hdc_fundamentals_hstdev: bool,
    #[arg(long, value_enum, default_value = "machine")]
    pub emit: Emit,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            mode: Mode::Classic,
            profile: ProfileArg::Nvcc,
            cuda_version: CudaVersion::V12,
            relaxed_constexpr: false,
            erase_specifiers: false,
            hdc_fundamentals_hstdev: false,
            emit: Emit::Machine,
        }
    }
}

impl Flags {
    pub fn compile_profile(&self) -> Result<CompileProfile, String> {
        let p = CompileProfile {
            compiler: match self.profile {
                ProfileArg::Nvcc => Compiler::Nvcc,
                ProfileArg::Plain => Compiler::Plain,
            },
            cuda_version: self.cuda_version,
            relaxed_constexpr: self.relaxed_constexpr,
            erase_specifiers: self.erase_specifiers,
            fundamentals_hstdev: self.hdc_fundamentals_hstdev,
        };
        p.validate().map_err(|e| e.to_string())?;
        Ok(p)
    }

    /// Applies extra flags on top of these, as written in a corpus header.
    pub fn overlay(&self, extra: &[String]) -> Result<Flags, String> {
        #[derive(Parser)]
        #[command(no_binary_name = true)]
        struct Overlay {
            #[arg(long)]
            mode: Option<Mode>,
            #[arg(long, value_enum)]
            profile: Option<ProfileArg>,
            #[arg(long)]
            cuda_version: Option<CudaVersion>,
            #[arg(long)]
            relaxed_constexpr: bool,
            #[arg(long)]
            erase_specifiers: bool,
            #[arg(long)]
            hdc_fundamentals_hstdev: bool,
        }
        let o = Overlay::try_parse_from(extra).map_err(|e| e.to_string())?;
        let mut f = self.clone();
        f.mode = o.mode.unwrap_or(f.mode);
        f.profile = o.profile.unwrap_or(f.profile);
        f.cuda_version = o.cuda_version.unwrap_or(f.cuda_version);
        f.relaxed_constexpr |= o.relaxed_constexpr;
        f.erase_specifiers |= o.erase_specifiers;
        f.hdc_fundamentals_hstdev |= o.hdc_fundamentals_hstdev;
        Ok(f)
    }
}

fn color_enabled() -> bool {
    std::env::var("EXSPACE_COLOR").is_ok_and(|v| v == "1")
}

/// Formats visible diagnostics, one per line (human style spans several).
pub fn render(diags: &[Diagnostic], emit: Emit, source: Option<&str>) -> String {
    let color = color_enabled();
    let mut out = String::new();
    for d in diags.iter().filter(|d| !d.suppressed) {
        match emit {
            Emit::Machine => out.push_str(&format_machine(d)),
            Emit::Human => out.push_str(&format_human(d, source, color)),
        }
        out.push('\n');
    }
    out
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit status.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Check { flags, paths } => check(&flags, &paths, out),
        Command::Run { flags, force, path } => run(&flags, force, &path, out, err),
        Command::Corpus { flags, dir } => corpus::command(&flags, &dir, out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            let _ = writeln!(err, "exspace: {msg}");
            EXIT_USAGE
        }
    }
}

fn read_unit(path: &std::path::Path) -> Result<SourceUnit, String> {
    SourceUnit::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn check(flags: &Flags, paths: &[PathBuf], out: &mut dyn Write) -> Result<i32, String> {
    let profile = flags.compile_profile()?;
    let units = paths
        .iter()
        .map(|p| read_unit(p))
        .collect::<Result<Vec<_>, _>>()?;
    let results = check_batch(&units, &profile, flags.mode, Exec::Parallel);
    let mut failed = false;
    for (u, diags) in units.iter().zip(&results) {
        failed |= diag::has_errors(diags);
        write!(out, "{}", render(diags, flags.emit, Some(&u.text))).map_err(|e| e.to_string())?;
    }
    Ok(i32::from(failed))
}

fn run(
    flags: &Flags,
    force: bool,
    path: &std::path::Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, String> {
    let profile = flags.compile_profile()?;
    let unit = read_unit(path)?;
    let diags = exspace_core::spacecheck::check_unit(&unit, &profile, flags.mode);
    let io = |e: std::io::Error| e.to_string();
    if diag::has_errors(&diags) && !force {
        write!(out, "{}", render(&diags, flags.emit, Some(&unit.text))).map_err(io)?;
        return Ok(1);
    }
    // Program output owns stdout; anything else the checker found goes to stderr.
    write!(err, "{}", render(&diags, flags.emit, Some(&unit.text))).map_err(io)?;
    match interp::run(&unit, &profile, flags.mode) {
        Ok(r) => {
            out.write_all(&r.stdout).map_err(io)?;
            write!(err, "{}", render(&r.notes, flags.emit, Some(&unit.text))).map_err(io)?;
            Ok(r.exit_code)
        }
        Err(RunError::Frontend(ds)) => {
            write!(out, "{}", render(&ds, flags.emit, Some(&unit.text))).map_err(io)?;
            Ok(1)
        }
        Err(RunError::Static(d)) => {
            write!(out, "{}", render(&[d], flags.emit, Some(&unit.text))).map_err(io)?;
            Ok(1)
        }
        Err(e) => Err(e.to_string()),
    }
}
