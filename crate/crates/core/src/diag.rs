//! Diagnostics: the stable code registry, severities and source locations.

use std::fmt;

/// A 1-based position inside a source file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SrcLoc {
    pub file: String,
    pub line: u32,
    pub col: u32,
}

impl SrcLoc {
    pub fn new(file: impl Into<String>, line: u32, col: u32) -> Self {
        SrcLoc {
            file: file.into(),
            line: line.max(1),
            col: col.max(1),
        }
    }
}

impl fmt::Display for SrcLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Error,
    Warning,
    Note,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Note => "note",
        }
    }

    pub fn parse(s: &str) -> Option<Severity> {
        match s {
            "error" => Some(Severity::Error),
            "warning" => Some(Severity::Warning),
            "note" => Some(Severity::Note),
            _ => None,
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! codes {
    ($( $(#[$doc:meta])* $name:ident = $text:literal, $sev:ident; )*) => {
        /// Stable diagnostic codes. The textual form never changes once released.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum Code {
            $( $(#[$doc])* $name, )*
        }

        impl Code {
            pub const ALL: &'static [Code] = &[$(Code::$name),*];

            pub fn as_str(self) -> &'static str {
                match self { $(Code::$name => $text,)* }
            }

            pub fn default_severity(self) -> Severity {
                match self { $(Code::$name => Severity::$sev,)* }
            }

            pub fn parse(s: &str) -> Option<Code> {
                match s { $($text => Some(Code::$name),)* _ => None }
            }
        }
    };
}

codes! {
    /// Parse error.
    E0001 = "E0001", Error;
    /// Preprocessor error, including a triggered `#error`.
    E0002 = "E0002", Error;
    /// Undefined name.
    E0101 = "E0101", Error;
    /// Duplicate definition.
    E0102 = "E0102", Error;
    /// A struct's `hdc` member is not an HDC constant.
    E0103 = "E0103", Error;
    /// Host function calls a device-only function.
    E1001 = "E1001", Error;
    /// Device function calls a host-only function.
    E1002 = "E1002", Error;
    /// Kernel launch from device code.
    E1003 = "E1003", Error;
    /// Direct call of a kernel, or launch of a non-kernel.
    E1004 = "E1004", Error;
    /// Host device function calls a host-only function.
    W1101 = "W1101", Warning;
    /// Host device function calls a device-only function.
    W1102 = "W1102", Warning;
    /// W1101 on a side reachable at run time.
    E1101 = "E1101", Error;
    /// W1102 on a side reachable at run time.
    E1102 = "E1102", Error;
    /// Declarations or instantiations differ between the host and device passes.
    E1201 = "E1201", Error;
    /// No viable overload.
    E1301 = "E1301", Error;
    /// Ambiguous call.
    E1302 = "E1302", Error;
    /// Conditional specifiers leave no execution space.
    E1401 = "E1401", Error;
    /// Stray call under propagated execution spaces.
    E1501 = "E1501", Error;
    /// Host device function calls a one-sided function under propagated spaces.
    W1502 = "W1502", Warning;
    /// Kernel launch skipped because the device carries a sticky error.
    N2001 = "N2001", Note;
    /// Execution halted on a stray call instead of running undefined code.
    N2002 = "N2002", Note;
}

impl Code {
    /// Codes produced by the execution-space rules (as opposed to front-end codes).
    pub fn is_space_related(self) -> bool {
        matches!(
            self,
            Code::E1001
                | Code::E1002
                | Code::E1003
                | Code::E1004
                | Code::W1101
                | Code::W1102
                | Code::E1101
                | Code::E1102
                | Code::E1501
                | Code::W1502
        )
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Diagnostic {
    pub code: Code,
    pub severity: Severity,
    pub loc: SrcLoc,
    pub message: String,
    pub suppressed: bool,
}

impl Diagnostic {
    pub fn new(code: Code, loc: SrcLoc, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            severity: code.default_severity(),
            loc,
            message: message.into(),
            suppressed: false,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }

    /// Ordering key: file, line, column, code, then message for full determinism.
    fn sort_key(&self) -> (&str, u32, u32, Code, &str) {
        (
            &self.loc.file,
            self.loc.line,
            self.loc.col,
            self.code,
            &self.message,
        )
    }
}

impl PartialOrd for Diagnostic {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Diagnostic {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sort_key()
            .cmp(&other.sort_key())
            .then(self.suppressed.cmp(&other.suppressed))
            .then(self.severity.cmp(&other.severity))
    }
}

/// Sorts and removes exact duplicates.
pub fn normalize(diags: &mut Vec<Diagnostic>) {
    diags.sort();
    diags.dedup();
}

pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.is_error() && !d.suppressed)
}

/// `<path>:<line>:<col>: <severity>[<CODE>]: <message>`
pub fn format_machine(d: &Diagnostic) -> String {
    format!(
        "{}:{}:{}: {}[{}]: {}",
        d.loc.file, d.loc.line, d.loc.col, d.severity, d.code, d.message
    )
}

/// Parses one line of the machine format back into its parts.
pub fn parse_machine(line: &str) -> Option<Diagnostic> {
    // The path may itself contain ':', so anchor on the severity bracket.
    let sev_start = [" error[", " warning[", " note["]
        .iter()
        .filter_map(|p| line.find(p).map(|i| (i, *p)))
        .min_by_key(|(i, _)| *i)?;
    let (idx, pat) = sev_start;
    let head = line[..idx].strip_suffix(':')?;
    let severity = Severity::parse(&pat[1..pat.len() - 1])?;
    let rest = &line[idx + pat.len()..];
    let close = rest.find("]: ")?;
    let code = Code::parse(&rest[..close])?;
    let message = rest[close + 3..].to_string();
    let mut parts = head.rsplitn(3, ':');
    let col = parts.next()?.parse().ok()?;
    let ln = parts.next()?.parse().ok()?;
    let file = parts.next()?.to_string();
    Some(Diagnostic {
        code,
        severity,
        loc: SrcLoc {
            file,
            line: ln,
            col,
        },
        message,
        suppressed: false,
    })
}

/// Human style: header line, location arrow, source excerpt and caret.
pub fn format_human(d: &Diagnostic, source: Option<&str>, color: bool) -> String {
    let (on, off) = if color {
        let c = match d.severity {
            Severity::Error => "\x1b[1;31m",
            Severity::Warning => "\x1b[1;33m",
            Severity::Note => "\x1b[1;36m",
        };
        (c, "\x1b[0m")
    } else {
        ("", "")
    };
    let mut out = format!(
        "{on}{}[{}]{off}: {}\n  --> {}",
        d.severity, d.code, d.message, d.loc
    );
    let excerpt = source.and_then(|s| s.lines().nth(d.loc.line as usize - 1));
    if let Some(text) = excerpt {
        let gutter = d.loc.line.to_string();
        let pad = " ".repeat(gutter.len());
        let caret_pad: String = text
            .chars()
            .take(d.loc.col as usize - 1)
            .map(|c| if c == '\t' { '\t' } else { ' ' })
            .collect();
        out.push_str(&format!(
            "\n{pad} |\n{gutter} | {text}\n{pad} | {caret_pad}{on}^{off}"
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn machine_roundtrip_over_registry() {
        for &code in Code::ALL {
            let d = Diagnostic::new(code, SrcLoc::new("dir:odd/x.mcu", 12, 10), "a: b [c]");
            let line = format_machine(&d);
            assert_eq!(parse_machine(&line), Some(d), "{line}");
        }
    }

    #[test]
    fn machine_line_for_warning() {
        let d = Diagnostic::new(
            Code::W1101,
            SrcLoc::new("problem_t.mcu", 12, 10),
            "calling a host function from a host device function is not allowed",
        );
        assert_eq!(
            format_machine(&d),
            "problem_t.mcu:12:10: warning[W1101]: calling a host function from a host device function is not allowed"
        );
    }

    #[test]
    fn human_has_caret_under_column() {
        let d = Diagnostic::new(Code::E1002, SrcLoc::new("a.mcu", 2, 3), "msg");
        let s = format_human(&d, Some("x\n  foo();\n"), false);
        assert!(s.ends_with("  |   ^"), "{s}");
    }

    #[test]
    fn ordering_is_file_line_col_code() {
        let mut v = vec![
            Diagnostic::new(Code::W1101, SrcLoc::new("b", 1, 1), ""),
            Diagnostic::new(Code::E1001, SrcLoc::new("a", 2, 1), ""),
            Diagnostic::new(Code::E0101, SrcLoc::new("a", 2, 1), ""),
            Diagnostic::new(Code::E0101, SrcLoc::new("a", 2, 1), ""),
        ];
        normalize(&mut v);
        let codes: Vec<_> = v.iter().map(|d| d.code).collect();
        assert_eq!(codes, [Code::E0101, Code::E1001, Code::W1101]);
    }
}
