//! Annotations inside corpus files.
//!
//! ```text
//! //! mode: sound
//! //! flags: --relaxed-constexpr
//! //! expect-exit: 3
//! //! expect-stdout: "...."
//! //! force
//! H{}.call();  //~ error E1002 "host function"
//! //~@12 warning W1101
//! ```

use std::sync::OnceLock;

use exspace_core::{Code, Diagnostic, Mode, Severity};
use regex::Regex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expectation {
    pub line: u32,
    pub severity: Severity,
    pub code: Code,
    pub message_substring: Option<String>,
}

impl Expectation {
    pub fn matches(&self, d: &Diagnostic) -> bool {
        d.loc.line == self.line
            && d.severity == self.severity
            && d.code == self.code
            && self
                .message_substring
                .as_ref()
                .is_none_or(|s| d.message.contains(s.as_str()))
    }
}

impl std::fmt::Display for Expectation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}[{}]", self.line, self.severity, self.code)?;
        if let Some(s) = &self.message_substring {
            write!(f, " containing {s:?}")?;
        }
        Ok(())
    }
}

/// Header directives of a corpus file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Header {
    pub mode: Option<Mode>,
    pub flags: Vec<String>,
    pub expect_exit: Option<i32>,
    pub expect_stdout: Option<String>,
    pub force: bool,
}

impl Header {
    pub fn wants_run(&self) -> bool {
        self.expect_exit.is_some() || self.expect_stdout.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    pub header: Header,
    pub expectations: Vec<Expectation>,
}

fn expectation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r#"//~(?:@(\d+))?\s+(error|warning|note)\s+([EWN]\d{4})(?:\s+"((?:[^"\\]|\\.)*)")?"#,
        )
        .unwrap()
    })
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*//!\s*([a-z-]+)\s*(?::\s*(.*?))?\s*$").unwrap())
}

/// Undoes `\n`, `\t`, `\"` and `\\` escapes.
pub fn unescape(s: &str) -> String {
    let mut out = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

pub fn parse(text: &str) -> Result<Annotations, String> {
    let mut a = Annotations::default();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx as u32 + 1;
        if let Some(c) = header_re().captures(line) {
            let value = c.get(2).map_or("", |m| m.as_str());
            let h = &mut a.header;
            match &c[1] {
                "mode" => h.mode = Some(value.parse().map_err(|e| format!("line {lineno}: {e}"))?),
                "flags" => h.flags.extend(value.split_whitespace().map(String::from)),
                "expect-exit" => {
                    h.expect_exit = Some(
                        value
                            .parse()
                            .map_err(|_| format!("line {lineno}: bad exit code `{value}`"))?,
                    )
                }
                "expect-stdout" => {
                    let inner = value
                        .strip_prefix('"')
                        .and_then(|v| v.strip_suffix('"'))
                        .ok_or_else(|| {
                            format!("line {lineno}: expect-stdout needs a quoted string")
                        })?;
                    h.expect_stdout = Some(unescape(inner));
                }
                "force" => h.force = true,
                other => return Err(format!("line {lineno}: unknown directive `{other}`")),
            }
            continue;
        }
        for c in expectation_re().captures_iter(line) {
            let target = match c.get(1) {
                Some(m) => m
                    .as_str()
                    .parse()
                    .map_err(|_| format!("line {lineno}: bad line number"))?,
                None => lineno,
            };
            a.expectations.push(Expectation {
                line: target,
                severity: Severity::parse(&c[2]).unwrap(),
                code: Code::parse(&c[3])
                    .ok_or_else(|| format!("line {lineno}: unknown code {}", &c[3]))?,
                message_substring: c.get(4).map(|m| unescape(m.as_str())),
            });
        }
    }
    Ok(a)
}

/// Pairs expectations with diagnostics one to one. Returns the unmatched
/// expectations and the unexpected diagnostics.
pub fn reconcile(
    expected: &[Expectation],
    actual: &[Diagnostic],
) -> (Vec<Expectation>, Vec<Diagnostic>) {
    let mut used = vec![false; actual.len()];
    let mut missing = Vec::new();
    for e in expected {
        match (0..actual.len()).find(|&i| !used[i] && e.matches(&actual[i])) {
            Some(i) => used[i] = true,
            None => missing.push(e.clone()),
        }
    }
    let extra = actual
        .iter()
        .zip(&used)
        .filter(|(_, u)| !**u)
        .map(|(d, _)| d.clone())
        .collect();
    (missing, extra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use exspace_core::SrcLoc;

    #[test]
    fn parses_headers_and_annotations() {
        let text = "//! mode: sound\n//! flags: --relaxed-constexpr --cuda-version=9\n\
                    //! expect-exit: 3\n//! expect-stdout: \"a\\nb\"\n//! force\n\
                    f(); //~ error E1001 \"device function\"\n//~@1 warning W1101\n";
        let a = parse(text).unwrap();
        assert_eq!(a.header.mode, Some(Mode::Sound));
        assert_eq!(a.header.flags, ["--relaxed-constexpr", "--cuda-version=9"]);
        assert_eq!(a.header.expect_exit, Some(3));
        assert_eq!(a.header.expect_stdout.as_deref(), Some("a\nb"));
        assert!(a.header.force);
        assert_eq!(a.expectations.len(), 2);
        assert_eq!(a.expectations[0].line, 6);
        assert_eq!(
            a.expectations[0].message_substring.as_deref(),
            Some("device function")
        );
        assert_eq!(a.expectations[1].line, 1);
        assert_eq!(a.expectations[1].severity, Severity::Warning);
    }

    #[test]
    fn unknown_directive_is_rejected() {
        assert!(parse("//! colour: red\n").is_err());
    }

    #[test]
    fn reconcile_is_one_to_one() {
        let e = Expectation {
            line: 2,
            severity: Severity::Error,
            code: Code::E1001,
            message_substring: None,
        };
        let d = Diagnostic::new(Code::E1001, SrcLoc::new("f", 2, 5), "x");
        let (missing, extra) = reconcile(&[e.clone(), e.clone()], std::slice::from_ref(&d));
        assert_eq!(missing.len(), 1);
        assert!(extra.is_empty());
        let (missing, extra) = reconcile(&[], &[d]);
        assert!(missing.is_empty());
        assert_eq!(extra.len(), 1);
    }
}
