use std::fmt;

use crate::error::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Colon,
    Eq,
    Arrow,
    Newline,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Num(x) => write!(f, "number {x}"),
            Tok::Str(_) => f.write_str("string"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Newline => f.write_str("end of line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

/// Splits source text into tokens. `#` starts a comment running to end of
/// line. Lexing continues past bad characters so every error is reported.
pub fn tokenize(src: &str) -> (Vec<Token>, Vec<SyntaxError>) {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut errs = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut push = |tok: Tok| toks.push(Token { tok, line: tl, col: tc });
        match c {
            '\n' => {
                push(Tok::Newline);
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                    col += 1;
                }
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '{' => push(Tok::LBrace),
            '}' => push(Tok::RBrace),
            '(' => push(Tok::LParen),
            ')' => push(Tok::RParen),
            ',' => push(Tok::Comma),
            ':' => push(Tok::Colon),
            '=' => push(Tok::Eq),
            '-' if chars.get(i + 1) == Some(&'>') => {
                push(Tok::Arrow);
                i += 2;
                col += 2;
                continue;
            }
            '"' => {
                let mut s = String::new();
                let mut j = i + 1;
                let mut closed = false;
                while j < chars.len() {
                    match chars[j] {
                        '"' => {
                            closed = true;
                            break;
                        }
                        '\n' => break,
                        '\\' if j + 1 < chars.len() && matches!(chars[j + 1], '"' | '\\') => {
                            s.push(chars[j + 1]);
                            j += 2;
                        }
                        ch => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                if closed {
                    push(Tok::Str(s));
                    col += j + 1 - i;
                    i = j + 1;
                } else {
                    errs.push(SyntaxError::new(tl, tc, "unterminated string"));
                    col += j - i;
                    i = j;
                }
                continue;
            }
            c if c.is_ascii_digit() || ((c == '-' || c == '+' || c == '.') && next_starts_number(&chars, i)) => {
                let start = i;
                let mut j = i + 1;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && matches!(chars[j], 'e' | 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && matches!(chars[k], '+' | '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text: String = chars[start..j].iter().collect();
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => push(Tok::Num(v)),
                    Ok(_) => errs.push(SyntaxError::new(tl, tc, format!("number `{text}` is not finite"))),
                    Err(_) => errs.push(SyntaxError::new(tl, tc, format!("malformed number `{text}`"))),
                }
                col += j - i;
                i = j;
                continue;
            }
            c if ident_start(c) => {
                let start = i;
                let mut j = i + 1;
                while j < chars.len() && ident_continue(chars[j]) {
                    j += 1;
                }
                push(Tok::Ident(chars[start..j].iter().collect()));
                col += j - i;
                i = j;
                continue;
            }
            other => errs.push(SyntaxError::new(
                tl,
                tc,
                format!("unexpected character `{}`", other.escape_debug()),
            )),
        }
        i += 1;
        col += 1;
    }
    (toks, errs)
}

fn next_starts_number(chars: &[char], i: usize) -> bool {
    match chars[i] {
        '.' => chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()),
        _ => match chars.get(i + 1) {
            Some(c) if c.is_ascii_digit() => true,
            Some('.') => chars.get(i + 2).is_some_and(|c| c.is_ascii_digit()),
            _ => false,
        },
    }
}
