use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    /// Floating literal; its value is irrelevant to the analysis.
    Float(String),
    Str(String),
    Char(i64),
    Punct(&'static str),
    /// A whole preprocessor line, without the leading `#`.
    Directive(String),
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "`{s}`"),
            TokenKind::Int(v) => write!(f, "`{v}`"),
            TokenKind::Float(v) => write!(f, "`{v}`"),
            TokenKind::Str(_) => f.write_str("string literal"),
            TokenKind::Char(_) => f.write_str("character literal"),
            TokenKind::Punct(p) => write!(f, "`{p}`"),
            TokenKind::Directive(_) => f.write_str("preprocessor directive"),
            TokenKind::Eof => f.write_str("end of file"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

const PUNCTS: &[&str] = &[
    "...", "<<=", ">>=", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "(", ")", "{", "}", "[", "]", ";", ",", ".", "+",
    "-", "*", "/", "%", "&", "|", "^", "!", "~", "<", ">", "=", "?", ":",
];

pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut line_start = 0;
    let mut at_line_start = true;

    while i < bytes.len() {
        let c = bytes[i];
        let col = i - line_start + 1;
        if c == b'\n' {
            i += 1;
            line += 1;
            line_start = i;
            at_line_start = true;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let Some(len) = src[i + 2..].find("*/") else {
                return Err(LexError {
                    line,
                    col,
                    message: "unterminated comment".into(),
                });
            };
            for &b in &bytes[i..i + 2 + len + 2] {
                if b == b'\n' {
                    line += 1;
                }
            }
            let end = i + 2 + len + 2;
            if let Some(nl) = src[i..end].rfind('\n') {
                line_start = i + nl + 1;
            }
            i = end;
            continue;
        }
        if c == b'#' && at_line_start {
            let start = i;
            let mut text = String::new();
            i += 1;
            // Directives may continue over escaped newlines.
            while i < bytes.len() && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && bytes.get(i + 1) == Some(&b'\n') {
                    i += 2;
                    line += 1;
                    line_start = i;
                    text.push(' ');
                    continue;
                }
                text.push(bytes[i] as char);
                i += 1;
            }
            toks.push(Token {
                kind: TokenKind::Directive(text.trim().to_string()),
                line,
                col,
                start,
                end: i,
            });
            continue;
        }
        at_line_start = false;
        let start = i;
        if c == b'_' || c.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i] == b'_' || bytes[i].is_ascii_alphanumeric()) {
                i += 1;
            }
            toks.push(Token {
                kind: TokenKind::Ident(src[start..i].to_string()),
                line,
                col,
                start,
                end: i,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let hex = src[i..].starts_with("0x") || src[i..].starts_with("0X");
            let mut float = false;
            while i < bytes.len() {
                let b = bytes[i];
                let exp = !hex && (b == b'e' || b == b'E') || hex && (b == b'p' || b == b'P');
                if exp && matches!(bytes.get(i + 1), Some(b'+' | b'-')) {
                    float = true;
                    i += 2;
                } else if b == b'.' {
                    float = true;
                    i += 1;
                } else if b.is_ascii_alphanumeric() || b == b'_' {
                    float |= exp;
                    i += 1;
                } else {
                    break;
                }
            }
            let text = &src[start..i];
            if float {
                toks.push(Token {
                    kind: TokenKind::Float(text.to_string()),
                    line,
                    col,
                    start,
                    end: i,
                });
                continue;
            }
            let value = parse_c_int(text).ok_or_else(|| LexError {
                line,
                col,
                message: format!("invalid integer literal `{text}`"),
            })?;
            toks.push(Token {
                kind: TokenKind::Int(value),
                line,
                col,
                start,
                end: i,
            });
            continue;
        }
        if c == b'"' {
            i += 1;
            let mut s = String::new();
            loop {
                match bytes.get(i) {
                    None | Some(b'\n') => {
                        return Err(LexError {
                            line,
                            col,
                            message: "unterminated string literal".into(),
                        })
                    }
                    Some(b'"') => {
                        i += 1;
                        break;
                    }
                    Some(b'\\') => {
                        s.push('\\');
                        if let Some(&n) = bytes.get(i + 1) {
                            s.push(n as char);
                        }
                        i += 2;
                    }
                    Some(&b) => {
                        s.push(b as char);
                        i += 1;
                    }
                }
            }
            toks.push(Token {
                kind: TokenKind::Str(s),
                line,
                col,
                start,
                end: i,
            });
            continue;
        }
        if c == b'\'' {
            let (value, len) = match (bytes.get(i + 1), bytes.get(i + 2), bytes.get(i + 3)) {
                (Some(b'\\'), Some(&e), Some(b'\'')) => {
                    let v = match e {
                        b'n' => 10,
                        b't' => 9,
                        b'r' => 13,
                        b'0' => 0,
                        other => other as i64,
                    };
                    (v, 4)
                }
                (Some(&ch), Some(b'\''), _) if ch != b'\\' => (ch as i64, 3),
                _ => {
                    return Err(LexError {
                        line,
                        col,
                        message: "malformed character literal".into(),
                    })
                }
            };
            i += len;
            toks.push(Token {
                kind: TokenKind::Char(value),
                line,
                col,
                start,
                end: i,
            });
            continue;
        }
        let Some(p) = PUNCTS.iter().find(|p| src[i..].starts_with(**p)) else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(LexError {
                line,
                col,
                message: format!("unexpected character `{ch}`"),
            });
        };
        i += p.len();
        toks.push(Token {
            kind: TokenKind::Punct(p),
            line,
            col,
            start,
            end: i,
        });
    }
    toks.push(Token {
        kind: TokenKind::Eof,
        line,
        col: i - line_start + 1,
        start: i,
        end: i,
    });
    Ok(toks)
}

/// C integer literal: decimal, `0x` hex or leading-zero octal, with an
/// optional `u`/`l` suffix.
pub fn parse_c_int(text: &str) -> Option<i64> {
    let body = text.trim_end_matches(['u', 'U', 'l', 'L']);
    let value = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()?
    } else if body.len() > 1 && body.starts_with('0') {
        u64::from_str_radix(&body[1..], 8).ok()?
    } else {
        body.parse::<u64>().ok()?
    };
    Some(value as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        lex(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn basic_tokens() {
        assert_eq!(
            kinds("int fd = open(\"/dev/x\", 0x2);"),
            vec![
                TokenKind::Ident("int".into()),
                TokenKind::Ident("fd".into()),
                TokenKind::Punct("="),
                TokenKind::Ident("open".into()),
                TokenKind::Punct("("),
                TokenKind::Str("/dev/x".into()),
                TokenKind::Punct(","),
                TokenKind::Int(2),
                TokenKind::Punct(")"),
                TokenKind::Punct(";"),
                TokenKind::Eof,
            ]
        );
    }

    #[test]
    fn comments_and_directives_track_lines() {
        let toks = lex("#define A 1\n/* a\n b */ x // c\n  y").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Directive("define A 1".into()));
        assert_eq!((toks[1].line, toks[1].col), (3, 7));
        assert_eq!((toks[2].line, toks[2].col), (4, 3));
    }

    #[test]
    fn literals() {
        assert_eq!(parse_c_int("0x40046b05u"), Some(0x40046b05));
        assert_eq!(parse_c_int("010"), Some(8));
        assert_eq!(
            kinds("'a' '\\n'")[..2],
            [TokenKind::Char(97), TokenKind::Char(10)]
        );
        assert_eq!(kinds("a <<= b ... c")[1], TokenKind::Punct("<<="));
        assert!(lex("\"open").is_err());
        assert!(lex("a @ b").is_err());
    }
}
