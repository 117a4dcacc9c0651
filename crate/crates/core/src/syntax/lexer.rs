use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    /// `#pragma <name>`; the name is kept verbatim.
    Pragma(String),
    Punct(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Str(_) => f.write_str("string literal"),
            Tok::Pragma(p) => write!(f, "`#pragma {p}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of file"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug)]
pub struct LexError {
    pub line: u32,
    pub col: u32,
    pub message: String,
}

// Longest first.
const PUNCTS: &[&str] = &[
    "<<<", ">>>", "::", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "{", "}", "(",
    ")", "[", "]", "<", ">", ";", ",", ".", ":", "=", "!", "&", "+", "-", "*", "/", "%",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut line_start = true;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
                line_start = true;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (l0, c0) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(LexError {
                        line: l0,
                        col: c0,
                        message: "unterminated block comment".into(),
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        let (tl, tc) = (line, col);
        let was_line_start = line_start;
        line_start = false;
        if c == '#' {
            if !was_line_start {
                return Err(LexError {
                    line: tl,
                    col: tc,
                    message: "`#` must begin a line".into(),
                });
            }
            bump!();
            let mut word = String::new();
            while i < chars.len() && chars[i] != '\n' {
                word.push(chars[i]);
                bump!();
            }
            let word = word.trim();
            let Some(rest) = word.strip_prefix("pragma") else {
                return Err(LexError {
                    line: tl,
                    col: tc,
                    message: format!("unexpected directive `#{word}` after preprocessing"),
                });
            };
            toks.push(Token {
                tok: Tok::Pragma(rest.trim().to_string()),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                bump!();
            }
            toks.push(Token {
                tok: Tok::Ident(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                bump!();
            }
            let n = s.parse::<i64>().map_err(|_| LexError {
                line: tl,
                col: tc,
                message: format!("integer literal `{s}` out of range"),
            })?;
            toks.push(Token {
                tok: Tok::Int(n),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '"' {
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() || chars[i] == '\n' {
                    return Err(LexError {
                        line: tl,
                        col: tc,
                        message: "unterminated string literal".into(),
                    });
                }
                let ch = chars[i];
                bump!();
                match ch {
                    '"' => break,
                    '\\' => {
                        let esc = chars.get(i).copied().unwrap_or('\\');
                        bump!();
                        s.push(match esc {
                            'n' => '\n',
                            't' => '\t',
                            '0' => '\0',
                            other => other,
                        });
                    }
                    other => s.push(other),
                }
            }
            toks.push(Token {
                tok: Tok::Str(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        // `hdc<T>==x` closes the template argument list before `==`; a literal
        // `>=` followed by `=` is never valid anyway.
        let found = if rest.starts_with(">==") {
            Some(&">")
        } else {
            PUNCTS.iter().find(|p| rest.starts_with(**p))
        };
        match found {
            Some(p) => {
                for _ in 0..p.len() {
                    bump!();
                }
                toks.push(Token {
                    tok: Tok::Punct(p),
                    line: tl,
                    col: tc,
                });
            }
            None => {
                return Err(LexError {
                    line: tl,
                    col: tc,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    toks.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn chevrons_and_positions() {
        let toks = tokenize("  k<<< 4, 3 >>>( 2 ); // x\n").unwrap();
        assert_eq!(toks[0].col, 3);
        assert_eq!(toks[1].tok, Tok::Punct("<<<"));
        assert_eq!(toks[5].tok, Tok::Punct(">>>"));
    }

    #[test]
    fn template_close_before_equality() {
        let k = kinds("hdc<T>==x");
        assert_eq!(k[3], Tok::Punct(">"));
        assert_eq!(k[4], Tok::Punct("=="));
        assert_eq!(kinds("a >= b")[1], Tok::Punct(">="));
    }

    #[test]
    fn nested_template_close_is_two_tokens() {
        assert_eq!(
            kinds("a<b<c>>"),
            vec![
                Tok::Ident("a".into()),
                Tok::Punct("<"),
                Tok::Ident("b".into()),
                Tok::Punct("<"),
                Tok::Ident("c".into()),
                Tok::Punct(">"),
                Tok::Punct(">"),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn pragma_and_strings() {
        let t = kinds("#pragma nv_exec_check_disable\nprintf(\"%d\\n\", 1);");
        assert_eq!(t[0], Tok::Pragma("nv_exec_check_disable".into()));
        assert_eq!(t[3], Tok::Str("%d\n".into()));
    }

    #[test]
    fn comments_skipped() {
        assert_eq!(
            kinds("/* a */ x // b"),
            vec![Tok::Ident("x".into()), Tok::Eof]
        );
    }
}
