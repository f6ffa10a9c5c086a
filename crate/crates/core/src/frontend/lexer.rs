use std::sync::Arc;

use super::{FrontendError, SourceSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    If,
    Else,
    Return,
    Static,
    Inline,
    Extern,
    Const,
    Volatile,
    Int,
    Unsigned,
    Signed,
    Long,
    Short,
    Char,
    Void,
    Typedef,
    Sizeof,
    Struct,
    For,
    While,
    Do,
    Switch,
    Goto,
    Break,
    Continue,
}

impl Keyword {
    fn from_ident(s: &str) -> Option<Keyword> {
        Some(match s {
            "if" => Keyword::If,
            "else" => Keyword::Else,
            "return" => Keyword::Return,
            "static" => Keyword::Static,
            "inline" => Keyword::Inline,
            "extern" => Keyword::Extern,
            "const" => Keyword::Const,
            "volatile" => Keyword::Volatile,
            "int" => Keyword::Int,
            "unsigned" => Keyword::Unsigned,
            "signed" => Keyword::Signed,
            "long" => Keyword::Long,
            "short" => Keyword::Short,
            "char" => Keyword::Char,
            "void" => Keyword::Void,
            "typedef" => Keyword::Typedef,
            "sizeof" => Keyword::Sizeof,
            "struct" => Keyword::Struct,
            "for" => Keyword::For,
            "while" => Keyword::While,
            "do" => Keyword::Do,
            "switch" => Keyword::Switch,
            "goto" => Keyword::Goto,
            "break" => Keyword::Break,
            "continue" => Keyword::Continue,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::If => "if",
            Keyword::Else => "else",
            Keyword::Return => "return",
            Keyword::Static => "static",
            Keyword::Inline => "inline",
            Keyword::Extern => "extern",
            Keyword::Const => "const",
            Keyword::Volatile => "volatile",
            Keyword::Int => "int",
            Keyword::Unsigned => "unsigned",
            Keyword::Signed => "signed",
            Keyword::Long => "long",
            Keyword::Short => "short",
            Keyword::Char => "char",
            Keyword::Void => "void",
            Keyword::Typedef => "typedef",
            Keyword::Sizeof => "sizeof",
            Keyword::Struct => "struct",
            Keyword::For => "for",
            Keyword::While => "while",
            Keyword::Do => "do",
            Keyword::Switch => "switch",
            Keyword::Goto => "goto",
            Keyword::Break => "break",
            Keyword::Continue => "continue",
        }
    }

    /// Keywords that can start a type specifier.
    pub fn is_type_start(self) -> bool {
        matches!(
            self,
            Keyword::Static
                | Keyword::Inline
                | Keyword::Extern
                | Keyword::Const
                | Keyword::Volatile
                | Keyword::Int
                | Keyword::Unsigned
                | Keyword::Signed
                | Keyword::Long
                | Keyword::Short
                | Keyword::Char
                | Keyword::Void
                | Keyword::Struct
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    IntLit {
        value: u64,
        /// Written in hex or octal; affects the C literal type.
        non_decimal: bool,
        unsigned: bool,
        longs: u8,
    },
    Keyword(Keyword),
    /// Operators and punctuation, stored by spelling.
    Punct(&'static str),
    /// String or character literal; outside the subset but tokenized so the
    /// parser can skip the construct.
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: SourceSpan,
}

impl Token {
    pub fn is_punct(&self, p: &str) -> bool {
        matches!(&self.kind, TokenKind::Punct(q) if *q == p)
    }

    pub fn is_keyword(&self, k: Keyword) -> bool {
        self.kind == TokenKind::Keyword(k)
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::IntLit { value, .. } => format!("integer literal {value}"),
            TokenKind::Keyword(k) => format!("`{}`", k.as_str()),
            TokenKind::Punct(p) => format!("`{p}`"),
            TokenKind::Text(t) => format!("literal {t}"),
        }
    }
}

/// A comment with its location, kept for range annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comment {
    pub text: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexed {
    pub tokens: Vec<Token>,
    pub comments: Vec<Comment>,
}

// Longest spellings first so that maximal munch works by prefix test.
const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "|=", "^=", "(", ")", "{", "}", "[", "]", ";", ",", ".", "+",
    "-", "*", "/", "%", "<", ">", "=", "!", "~", "&", "|", "^", "?", ":",
];

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
    file: Arc<str>,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn span_from(&self, start: (usize, u32, u32)) -> SourceSpan {
        let (offset, line, col) = start;
        let len = self.src[offset..self.pos].chars().count() as u32;
        SourceSpan::new(self.file.clone(), line, col, len, offset)
    }

    fn mark(&self) -> (usize, u32, u32) {
        (self.pos, self.line, self.col)
    }

    /// True when only whitespace precedes the cursor on its line.
    fn at_line_start(&self) -> bool {
        self.src[..self.pos]
            .rsplit('\n')
            .next()
            .is_some_and(|prefix| prefix.chars().all(|c| c == ' ' || c == '\t'))
    }
}

/// Splits source text into tokens, collecting comments and skipping
/// preprocessor lines.
pub fn tokenize(file: &str, source: &str) -> Result<Lexed, FrontendError> {
    let mut cur = Cursor {
        src: source,
        pos: 0,
        line: 1,
        col: 1,
        file: Arc::from(file),
    };
    let mut out = Lexed::default();
    while let Some(c) = cur.peek() {
        let start = cur.mark();
        if c.is_whitespace() {
            cur.bump();
        } else if c == '#' && cur.at_line_start() {
            // Preprocessor line, including backslash continuations.
            while let Some(c) = cur.peek() {
                if c == '\\' && cur.peek_at(1) == Some('\n') {
                    cur.bump();
                    cur.bump();
                    continue;
                }
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
        } else if c == '/' && cur.peek_at(1) == Some('/') {
            while cur.peek().is_some_and(|c| c != '\n') {
                cur.bump();
            }
            let span = cur.span_from(start);
            out.comments.push(Comment {
                text: source[start.0 + 2..cur.pos].to_string(),
                span,
            });
        } else if c == '/' && cur.peek_at(1) == Some('*') {
            cur.bump();
            cur.bump();
            loop {
                match cur.peek() {
                    None => {
                        return Err(FrontendError::Parse {
                            span: cur.span_from(start),
                            expected: "`*/`".into(),
                            found: "end of input".into(),
                        })
                    }
                    Some('*') if cur.peek_at(1) == Some('/') => {
                        cur.bump();
                        cur.bump();
                        break;
                    }
                    Some(_) => {
                        cur.bump();
                    }
                }
            }
            let span = cur.span_from(start);
            out.comments.push(Comment {
                text: source[start.0 + 2..cur.pos - 2].to_string(),
                span,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            while cur.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                cur.bump();
            }
            let text = &source[start.0..cur.pos];
            let kind = match Keyword::from_ident(text) {
                Some(k) => TokenKind::Keyword(k),
                None => TokenKind::Ident(text.to_string()),
            };
            out.tokens.push(Token {
                kind,
                span: cur.span_from(start),
            });
        } else if c.is_ascii_digit() {
            out.tokens.push(lex_number(&mut cur, start)?);
        } else if c == '"' || c == '\'' {
            cur.bump();
            loop {
                match cur.bump() {
                    None | Some('\n') => {
                        return Err(FrontendError::Parse {
                            span: cur.span_from(start),
                            expected: format!("closing {c}"),
                            found: "end of line".into(),
                        })
                    }
                    Some('\\') => {
                        cur.bump();
                    }
                    Some(d) if d == c => break,
                    Some(_) => {}
                }
            }
            out.tokens.push(Token {
                kind: TokenKind::Text(source[start.0..cur.pos].to_string()),
                span: cur.span_from(start),
            });
        } else if let Some(p) = PUNCTS.iter().find(|p| source[cur.pos..].starts_with(**p)) {
            for _ in 0..p.len() {
                cur.bump();
            }
            out.tokens.push(Token {
                kind: TokenKind::Punct(p),
                span: cur.span_from(start),
            });
        } else {
            cur.bump();
            return Err(FrontendError::Lex {
                span: cur.span_from(start),
                ch: c,
            });
        }
    }
    Ok(out)
}

fn lex_number(cur: &mut Cursor<'_>, start: (usize, u32, u32)) -> Result<Token, FrontendError> {
    let src = cur.src;
    let (radix, digits_start) = if src[cur.pos..].starts_with("0x") || src[cur.pos..].starts_with("0X") {
        cur.bump();
        cur.bump();
        (16, cur.pos)
    } else if src[cur.pos..].starts_with('0')
        && src[cur.pos + 1..].starts_with(|c: char| c.is_ascii_digit())
    {
        cur.bump();
        (8, cur.pos)
    } else {
        (10, cur.pos)
    };
    while cur.peek().is_some_and(|c| c.is_digit(radix)) {
        cur.bump();
    }
    let digits = &src[digits_start..cur.pos];
    let (mut unsigned, mut longs) = (false, 0u8);
    while let Some(c) = cur.peek() {
        match c {
            'u' | 'U' if !unsigned => unsigned = true,
            'l' | 'L' if longs < 2 => longs += 1,
            _ => break,
        }
        cur.bump();
    }
    if cur.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
        let bad = cur.peek().unwrap_or('?');
        cur.bump();
        return Err(FrontendError::Lex {
            span: cur.span_from(start),
            ch: bad,
        });
    }
    let span = cur.span_from(start);
    let value = if digits.is_empty() {
        if radix == 16 {
            return Err(FrontendError::Parse {
                span,
                expected: "hex digits".into(),
                found: "`0x`".into(),
            });
        }
        0
    } else {
        u64::from_str_radix(digits, radix).map_err(|_| FrontendError::LiteralOverflow {
            span: span.clone(),
            text: src[start.0..cur.pos].to_string(),
        })?
    };
    Ok(Token {
        kind: TokenKind::IntLit {
            value,
            non_decimal: radix != 10,
            unsigned,
            longs,
        },
        span,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize("t.c", src).unwrap().tokens.into_iter().map(|t| t.kind).collect()
    }

    fn int(value: u64) -> TokenKind {
        TokenKind::IntLit {
            value,
            non_decimal: false,
            unsigned: false,
            longs: 0,
        }
    }

    #[test]
    fn hex_literal_value() {
        assert_eq!(
            kinds("0x80000000"),
            vec![TokenKind::IntLit {
                value: 2147483648,
                non_decimal: true,
                unsigned: false,
                longs: 0
            }]
        );
    }

    #[test]
    fn empty_input() {
        assert!(kinds("").is_empty());
    }

    #[test]
    fn shift_expression_tokens() {
        let id = |s: &str| TokenKind::Ident(s.into());
        assert_eq!(
            kinds("w1[j+5] << 30"),
            vec![
                id("w1"),
                TokenKind::Punct("["),
                id("j"),
                TokenKind::Punct("+"),
                int(5),
                TokenKind::Punct("]"),
                TokenKind::Punct("<<"),
                int(30),
            ]
        );
    }

    #[test]
    fn suffixes_and_octal() {
        assert_eq!(
            kinds("10UL 017"),
            vec![
                TokenKind::IntLit {
                    value: 10,
                    non_decimal: false,
                    unsigned: true,
                    longs: 1
                },
                TokenKind::IntLit {
                    value: 15,
                    non_decimal: true,
                    unsigned: false,
                    longs: 0
                },
            ]
        );
    }

    #[test]
    fn comments_and_preprocessor_keep_line_numbers() {
        let src = "#define SEQ_LT(a,b) \\\n  ((int)((a)-(b)) < 0)\n/* a\n b */ x // tail\ny";
        let lexed = tokenize("t.c", src).unwrap();
        let lines: Vec<u32> = lexed.tokens.iter().map(|t| t.span.line).collect();
        assert_eq!(lines, vec![4, 5]);
        assert_eq!(lexed.comments.len(), 2);
        assert_eq!(lexed.comments[0].text, " a\n b ");
        assert_eq!(lexed.comments[1].text, " tail");
        assert_eq!(lexed.tokens[0].span.column, 7);
    }

    #[test]
    fn illegal_character_is_an_error() {
        let err = tokenize("t.c", "int x = 1 @ 2;").unwrap_err();
        match err {
            FrontendError::Lex { span, ch } => {
                assert_eq!(ch, '@');
                assert_eq!((span.line, span.column), (1, 11));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oversized_literal_is_an_error() {
        assert!(matches!(
            tokenize("t.c", "0x10000000000000000"),
            Err(FrontendError::LiteralOverflow { .. })
        ));
        assert!(tokenize("t.c", "0xFFFFFFFFFFFFFFFF").is_ok());
    }

    #[test]
    fn maximal_munch() {
        assert_eq!(
            kinds("a<<=b->c"),
            vec![
                TokenKind::Ident("a".into()),
                TokenKind::Punct("<<="),
                TokenKind::Ident("b".into()),
                TokenKind::Punct("->"),
                TokenKind::Ident("c".into()),
            ]
        );
    }
}
