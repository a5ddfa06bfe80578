//! Shared tokenizer for term text, scheme files and model ops files.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Nat(usize),
    /// The bottom literal `_|_`.
    Bottom,
    Backslash,
    Dot,
    LParen,
    RParen,
    Comma,
    At,
    LBrace,
    RBrace,
    Eq,
    Slash,
    Semi,
    Caret,
    Hash,
    Arrow,
    Newline,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Nat(n) => write!(f, "`{n}`"),
            Tok::Bottom => write!(f, "`_|_`"),
            Tok::Backslash => write!(f, "`\\`"),
            Tok::Dot => write!(f, "`.`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::At => write!(f, "`@`"),
            Tok::LBrace => write!(f, "`{{`"),
            Tok::RBrace => write!(f, "`}}`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Caret => write!(f, "`^`"),
            Tok::Hash => write!(f, "`#`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Newline => write!(f, "end of line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub kind: Tok,
    pub line: usize,
    pub col: usize,
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    s != "_" && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

/// Tokenizes `text`. Newlines become tokens so line-oriented formats can
/// find rule boundaries; other whitespace is skipped.
pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, (usize, usize, String)> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let (l, co) = (line, col);
        let mut push = |kind: Tok| toks.push(Token { kind, line: l, col: co });
        match c {
            '\n' => {
                push(Tok::Newline);
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
                continue;
            }
            _ => {}
        }
        if text[i..].starts_with("_|_") {
            push(Tok::Bottom);
            i += 3;
            col += 3;
            continue;
        }
        if text[i..].starts_with("->") {
            push(Tok::Arrow);
            i += 2;
            col += 2;
            continue;
        }
        let single = match c {
            '\\' => Some(Tok::Backslash),
            '.' => Some(Tok::Dot),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '@' => Some(Tok::At),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '=' => Some(Tok::Eq),
            '/' => Some(Tok::Slash),
            ';' => Some(Tok::Semi),
            '^' => Some(Tok::Caret),
            '#' => Some(Tok::Hash),
            _ => None,
        };
        if let Some(kind) = single {
            push(kind);
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                i += 1;
            }
            let n: usize = text[start..i]
                .parse()
                .map_err(|_| (line, col, "number too large".to_string()))?;
            col += i - start;
            push(Tok::Nat(n));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            i += 1;
            while i < bytes.len() {
                if text[i..].starts_with("_|_") {
                    break;
                }
                let ch = bytes[i] as char;
                if ch.is_ascii_alphanumeric() || ch == '_' || ch == '\'' {
                    i += 1;
                } else {
                    break;
                }
            }
            col += i - start;
            push(Tok::Ident(text[start..i].to_string()));
            continue;
        }
        return Err((line, col, format!("unexpected character `{c}`")));
    }
    Ok(toks)
}
