use super::{ParseDiagnostic, SourceSpan};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Hole(String),
    Counter(String),
    Number(f64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Colon,
    Arrow,
    Slashes,
    Plus,
    Minus,
    Star,
    Bang,
    AndAnd,
    OrOr,
    Le,
    Lt,
    Ge,
    Gt,
    EqEq,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Hole(s) => format!("`?{s}`"),
            Tok::Counter(s) => format!("`#{s}`"),
            Tok::Number(n) => format!("`{n}`"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Slashes => "`//`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Bang => "`!`".into(),
            Tok::AndAnd => "`&&`".into(),
            Tok::OrOr => "`||`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Splits source text into tokens.
///
/// `#` directly followed by a letter or `_` is a counter reference such as
/// `#CLOSEDOOR`; any other `#` starts a comment that runs to the end of the line.
pub(crate) fn lex(file: &str, text: &str) -> Result<Vec<Token>, Vec<ParseDiagnostic>> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let span = |line, column, length: usize| SourceSpan {
        file: file.to_string(),
        line,
        column,
        length: length.max(1),
    };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = (i, col);
        let peek = chars.get(i + 1).copied();
        let simple = |tok: Tok, n: usize, tokens: &mut Vec<Token>| {
            tokens.push(Token {
                tok,
                span: span(line, start.1, n),
            });
            n
        };
        let consumed = match c {
            '#' if peek.is_some_and(is_ident_start) => {
                let mut j = i + 1;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                let name: String = chars[i + 1..j].iter().collect();
                simple(Tok::Counter(name), j - i, &mut tokens)
            }
            '#' => {
                let mut j = i;
                while j < chars.len() && chars[j] != '\n' {
                    j += 1;
                }
                j - i
            }
            '?' => {
                let mut j = i + 1;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                if j == i + 1 {
                    errors.push(ParseDiagnostic::error(
                        "expected a hole name after `?`",
                        span(line, col, 1),
                    ));
                    1
                } else {
                    let name: String = chars[i + 1..j].iter().collect();
                    simple(Tok::Hole(name), j - i, &mut tokens)
                }
            }
            '{' => simple(Tok::LBrace, 1, &mut tokens),
            '}' => simple(Tok::RBrace, 1, &mut tokens),
            '(' => simple(Tok::LParen, 1, &mut tokens),
            ')' => simple(Tok::RParen, 1, &mut tokens),
            ';' => simple(Tok::Semi, 1, &mut tokens),
            ':' => simple(Tok::Colon, 1, &mut tokens),
            '+' => simple(Tok::Plus, 1, &mut tokens),
            '*' => simple(Tok::Star, 1, &mut tokens),
            '-' if peek == Some('>') => simple(Tok::Arrow, 2, &mut tokens),
            '-' => simple(Tok::Minus, 1, &mut tokens),
            '/' if peek == Some('/') => simple(Tok::Slashes, 2, &mut tokens),
            '&' if peek == Some('&') => simple(Tok::AndAnd, 2, &mut tokens),
            '|' if peek == Some('|') => simple(Tok::OrOr, 2, &mut tokens),
            '!' => simple(Tok::Bang, 1, &mut tokens),
            '<' if peek == Some('=') => simple(Tok::Le, 2, &mut tokens),
            '<' => simple(Tok::Lt, 1, &mut tokens),
            '>' if peek == Some('=') => simple(Tok::Ge, 2, &mut tokens),
            '>' => simple(Tok::Gt, 1, &mut tokens),
            '=' if peek == Some('=') => simple(Tok::EqEq, 2, &mut tokens),
            '=' => simple(Tok::EqEq, 1, &mut tokens),
            c if c.is_ascii_digit() || (c == '.' && peek.is_some_and(|p| p.is_ascii_digit())) => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        j = k;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let text: String = chars[i..j].iter().collect();
                match text.parse::<f64>() {
                    Ok(v) => simple(Tok::Number(v), j - i, &mut tokens),
                    Err(_) => {
                        errors.push(ParseDiagnostic::error(
                            format!("malformed number `{text}`"),
                            span(line, col, j - i),
                        ));
                        j - i
                    }
                }
            }
            c if is_ident_start(c) => {
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                let name: String = chars[i..j].iter().collect();
                simple(Tok::Ident(name), j - i, &mut tokens)
            }
            other => {
                errors.push(ParseDiagnostic::error(
                    format!("unexpected character `{other}`"),
                    span(line, col, 1),
                ));
                1
            }
        };
        i += consumed;
        col += consumed;
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: span(line, col, 1),
    });
    if errors.is_empty() {
        Ok(tokens)
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        lex("t", s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn counters_versus_comments() {
        assert_eq!(
            toks("#C * ?3 # trailing comment\n#also_counter"),
            vec![
                Tok::Counter("C".into()),
                Tok::Star,
                Tok::Hole("3".into()),
                Tok::Counter("also_counter".into()),
                Tok::Eof
            ]
        );
        assert_eq!(toks("## banner\n# note"), vec![Tok::Eof]);
    }

    #[test]
    fn operators_and_numbers() {
        assert_eq!(
            toks("A -> B : x // -1.5e-2"),
            vec![
                Tok::Ident("A".into()),
                Tok::Arrow,
                Tok::Ident("B".into()),
                Tok::Colon,
                Tok::Ident("x".into()),
                Tok::Slashes,
                Tok::Minus,
                Tok::Number(0.015),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn spans_are_one_based() {
        let t = lex("f", "srm\n  x").unwrap();
        assert_eq!(
            (t[0].span.line, t[0].span.column, t[0].span.length),
            (1, 1, 3)
        );
        assert_eq!((t[1].span.line, t[1].span.column), (2, 3));
    }

    #[test]
    fn stray_character_is_reported() {
        let err = lex("f", "srm $").unwrap_err();
        assert_eq!(err[0].span.column, 5);
    }
}
