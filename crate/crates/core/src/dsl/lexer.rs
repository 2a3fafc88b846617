use super::ast::Span;
use super::DslError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

const PUNCTS: &[&str] = &[
    "&&", "||", "==", "!=", "<=", ">=", "++", "--", "+=", "-=", "*=", "(", ")", "{", "}", "[", "]",
    ";", ",", "=", "<", ">", "+", "-", "*", "/", "%", "!", "@",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, DslError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);

    macro_rules! bump {
        ($n:expr) => {{
            for _ in 0..$n {
                if bytes[i] == b'\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }

    'outer: while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            bump!(1);
            continue;
        }
        if src[i..].starts_with("//") {
            while i < bytes.len() && bytes[i] != b'\n' {
                bump!(1);
            }
            continue;
        }
        if src[i..].starts_with("/*") {
            let span = Span { line, col };
            bump!(2);
            while i < bytes.len() {
                if src[i..].starts_with("*/") {
                    bump!(2);
                    continue 'outer;
                }
                bump!(1);
            }
            return Err(DslError::syntax(span, "unterminated comment"));
        }
        let span = Span { line, col };
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                bump!(1);
            }
            out.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                span,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                bump!(1);
            }
            let n = src[start..i]
                .parse::<i64>()
                .map_err(|_| DslError::syntax(span, "integer literal out of range"))?;
            out.push(Token {
                tok: Tok::Int(n),
                span,
            });
            continue;
        }
        for p in PUNCTS {
            if src[i..].starts_with(p) {
                bump!(p.len());
                out.push(Token {
                    tok: Tok::Punct(p),
                    span,
                });
                continue 'outer;
            }
        }
        let ch = src[i..].chars().next().unwrap_or('?');
        return Err(DslError::syntax(span, format!("unexpected character `{ch}`")));
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(out)
}
