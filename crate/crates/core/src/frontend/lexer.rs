// SPDX-License-Identifier: Apache-2.0

//! Tokenizer for mini-ArkTS source text.

use super::FrontendError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num(n) => format!("number `{n}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    /// A line break separates this token from the previous one.
    pub newline_before: bool,
}

// Longest first so that maximal munch works with a linear scan.
const PUNCTS: &[&str] = &[
    "===", "!==", "...", "**=", "&&=", "||=", "??=", "=>", "==", "!=", "<=", ">=", "&&", "||", "??", "?.", "++", "--",
    "+=", "-=", "*=", "/=", "%=", "**", "(", ")", "{", "}", "[", "]", ",", ";", ":", ".", "=", "<", ">", "+", "-", "*",
    "/", "%", "!", "?", "@", "|", "&", "^", "~",
];

pub fn tokenize(src: &str, file: &str) -> Result<Vec<Token>, FrontendError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    let mut newline_before = true;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            newline_before = true;
            bump!();
            continue;
        }
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
            let (sl, sc) = (line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(FrontendError::Syntax {
                        file: file.to_string(),
                        line: sl,
                        col: sc,
                        expected: vec!["`*/`".into()],
                        found: "end of input".into(),
                    });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                if chars[i] == '\n' {
                    newline_before = true;
                }
                bump!();
            }
            continue;
        }

        let (tl, tc) = (line, col);
        let tok = if c.is_alphabetic() || c == '_' || c == '$' {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                s.push(chars[i]);
                bump!();
            }
            Tok::Ident(s)
        } else if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                // `1.toString()` is not valid anyway; stop on `..`
                if chars[i] == '.' && !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                    break;
                }
                if chars[i] != '_' {
                    s.push(chars[i]);
                }
                bump!();
            }
            Tok::Num(s.parse::<f64>().unwrap_or(0.0))
        } else if c == '\'' || c == '"' || c == '`' {
            let quote = c;
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() || (chars[i] == '\n' && quote != '`') {
                    return Err(FrontendError::Syntax {
                        file: file.to_string(),
                        line: tl,
                        col: tc,
                        expected: vec![format!("closing `{quote}`")],
                        found: "end of line".into(),
                    });
                }
                let ch = chars[i];
                if ch == quote {
                    bump!();
                    break;
                }
                if ch == '\\' && i + 1 < chars.len() {
                    bump!();
                    let esc = chars[i];
                    s.push(match esc {
                        'n' => '\n',
                        't' => '\t',
                        other => other,
                    });
                    bump!();
                    continue;
                }
                s.push(ch);
                bump!();
            }
            Tok::Str(s)
        } else {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    for _ in 0..p.chars().count() {
                        bump!();
                    }
                    Tok::Punct(p)
                }
                None => {
                    return Err(FrontendError::Syntax {
                        file: file.to_string(),
                        line: tl,
                        col: tc,
                        expected: vec!["a token".into()],
                        found: format!("character {c:?}"),
                    })
                }
            }
        };
        out.push(Token { tok, line: tl, col: tc, newline_before });
        newline_before = false;
    }
    out.push(Token { tok: Tok::Eof, line, col, newline_before: true });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s, "t").unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn punctuation_uses_longest_match() {
        assert_eq!(
            toks("a => b === c"),
            vec![
                Tok::Ident("a".into()),
                Tok::Punct("=>"),
                Tok::Ident("b".into()),
                Tok::Punct("==="),
                Tok::Ident("c".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("// hi\n  /* x\n */ foo('s')", "t").unwrap();
        assert_eq!(t[0].tok, Tok::Ident("foo".into()));
        assert_eq!((t[0].line, t[0].col), (3, 5));
        assert!(t[0].newline_before);
        assert_eq!(t[2].tok, Tok::Str("s".into()));
    }

    #[test]
    fn unterminated_string_reports_position() {
        match tokenize("let x = 'abc\n", "f.mats") {
            Err(FrontendError::Syntax { line, col, .. }) => assert_eq!((line, col), (1, 9)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
