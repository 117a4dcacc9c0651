use super::{BuiltinMacro, PpPass};
use crate::diag::{Code, Diagnostic, SrcLoc};

struct Frame {
    parent_active: bool,
    taking: bool,
    seen_else: bool,
    opened_at: u32,
}

impl Frame {
    fn active(&self) -> bool {
        self.parent_active && self.taking
    }
}

/// Joins backslash continuations. Each logical line is followed by as many
/// empty lines as it swallowed, so later line numbers are unchanged.
fn join_continuations(text: &str) -> Vec<(u32, String)> {
    let mut out = Vec::new();
    let mut pending: Option<(u32, String, u32)> = None;
    for (idx, raw) in text.split('\n').enumerate() {
        let lineno = idx as u32 + 1;
        let (start, mut acc, swallowed) = match pending.take() {
            Some((s, acc, n)) => (s, acc, n + 1),
            None => (lineno, String::new(), 0),
        };
        if let Some(stripped) = raw.strip_suffix('\\') {
            acc.push_str(stripped);
            pending = Some((start, acc, swallowed));
        } else {
            acc.push_str(raw);
            out.push((start, acc));
            for k in 0..swallowed {
                out.push((start + 1 + k, String::new()));
            }
        }
    }
    if let Some((start, acc, swallowed)) = pending {
        out.push((start, acc));
        for k in 0..swallowed {
            out.push((start + 1 + k, String::new()));
        }
    }
    out
}

fn error_message(rest: &str) -> String {
    let mut parts = Vec::new();
    let mut chars = rest.trim().chars().peekable();
    let mut saw_literal = false;
    let mut bare = String::new();
    while let Some(c) = chars.next() {
        if c == '"' {
            saw_literal = true;
            let mut lit = String::new();
            while let Some(c) = chars.next() {
                match c {
                    '"' => break,
                    '\\' => {
                        if let Some(n) = chars.next() {
                            lit.push(n);
                        }
                    }
                    c => lit.push(c),
                }
            }
            parts.push(lit);
        } else {
            bare.push(c);
        }
    }
    if saw_literal {
        parts.join(" ")
    } else {
        bare.trim().to_string()
    }
}

/// Removes inactive conditional branches for one pass.
///
/// Only `#ifdef`, `#ifndef`, `#else`, `#endif` over the built-in macros and
/// `#error` are interpreted. `#pragma` lines pass through and `#include`
/// lines are dropped. Line numbering of the output matches the input.
/// Drops a trailing `//` or `/*` comment from a directive argument.
fn strip_comment(s: &str) -> &str {
    let end = [s.find("//"), s.find("/*")].into_iter().flatten().min();
    end.map_or(s, |i| &s[..i])
}

pub fn preprocess(text: &str, file: &str, pass: &PpPass) -> Result<String, Diagnostic> {
    let err = |line: u32, col: u32, msg: String| {
        Diagnostic::new(Code::E0002, SrcLoc::new(file, line, col), msg)
    };
    let mut stack: Vec<Frame> = Vec::new();
    let mut out: Vec<String> = Vec::new();
    for (lineno, line) in join_continuations(text) {
        let active = stack.last().is_none_or(Frame::active);
        let trimmed = line.trim_start();
        let Some(directive) = trimmed.strip_prefix('#') else {
            out.push(if active { line } else { String::new() });
            continue;
        };
        let col = (line.len() - trimmed.len()) as u32 + 1;
        let directive = directive.trim_start();
        let name_len = directive
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(directive.len());
        let (name, rest) = directive.split_at(name_len);
        match name {
            "ifdef" | "ifndef" => {
                let mac = strip_comment(rest).trim();
                let Some(m) = BuiltinMacro::from_name(mac) else {
                    return Err(err(
                        lineno,
                        col,
                        format!("unknown macro `{mac}` in #{name}; only __CUDACC__, __CUDA_ARCH__ and __CUDACC_RELAXED_CONSTEXPR__ are known"),
                    ));
                };
                let defined = pass.is_defined(m);
                stack.push(Frame {
                    parent_active: active,
                    taking: if name == "ifdef" { defined } else { !defined },
                    seen_else: false,
                    opened_at: lineno,
                });
                out.push(String::new());
            }
            "else" => {
                let Some(top) = stack.last_mut() else {
                    return Err(err(lineno, col, "#else without #ifdef".into()));
                };
                if top.seen_else {
                    return Err(err(lineno, col, "duplicate #else".into()));
                }
                top.seen_else = true;
                top.taking = !top.taking;
                out.push(String::new());
            }
            "endif" => {
                if stack.pop().is_none() {
                    return Err(err(lineno, col, "#endif without #ifdef".into()));
                }
                out.push(String::new());
            }
            "error" => {
                if active {
                    return Err(err(lineno, col, format!("#error {}", error_message(rest))));
                }
                out.push(String::new());
            }
            "pragma" => out.push(if active { line } else { String::new() }),
            "include" => out.push(String::new()),
            other => {
                return Err(err(
                    lineno,
                    col,
                    format!("unsupported preprocessor directive `#{other}`"),
                ))
            }
        }
    }
    if let Some(open) = stack.last() {
        return Err(err(
            open.opened_at,
            1,
            "unterminated conditional directive".into(),
        ));
    }
    Ok(out.join("\n"))
}
