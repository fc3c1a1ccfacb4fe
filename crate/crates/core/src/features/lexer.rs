//! Error-tolerant Python lexer.
//!
//! Produces the lexical tokens that drive `token_count`, `nloc`,
//! `n_identifiers`, BLEU tokenisation and random-cut boundaries. Layout tokens
//! (NEWLINE, INDENT, DEDENT) are not emitted; comments are, so callers can
//! decide whether to keep them. Malformed input never fails: unknown
//! characters become [`TokenKind::Error`] tokens and unterminated strings run
//! to the end of their line (or of the input, for triple-quoted strings).

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Name,
    Number,
    String,
    Op,
    Comment,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first byte.
    pub start: usize,
    /// Byte offset one past the last byte.
    pub end: usize,
    /// 1-based line of the first byte.
    pub line: usize,
    /// 1-based line of the last byte.
    pub end_line: usize,
}

impl Token {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }
}

/// Hard keywords of Python 3.
pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

const OPS3: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
const OPS2: &[&str] = &[
    "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "@=", ":=",
];
const OPS1: &str = "+-*/%@&|^~<>()[]{},:;.=";

const STRING_PREFIXES: &[&str] = &["r", "u", "f", "b", "br", "rb", "fr", "rf"];

struct Cursor<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, offset: usize) -> Option<u8> {
        self.bytes.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }
}

fn is_name_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_name_continue(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

/// Tokenize `source`, comments included.
pub fn tokenize(source: &str) -> Vec<Token> {
    let mut cur = Cursor {
        src: source,
        bytes: source.as_bytes(),
        pos: 0,
        line: 1,
    };
    let mut tokens = Vec::new();

    while let Some(c) = cur.peek() {
        let start = cur.pos;
        let line = cur.line;
        let kind = match c {
            ' ' | '\t' | '\x0c' | '\r' | '\n' => {
                cur.bump();
                continue;
            }
            '\\' => {
                // Explicit line continuation produces no token.
                cur.bump();
                match cur.peek() {
                    Some('\n') => {
                        cur.bump();
                        continue;
                    }
                    Some('\r') if cur.peek_at(1) == Some(b'\n') => {
                        cur.bump();
                        cur.bump();
                        continue;
                    }
                    _ => TokenKind::Error,
                }
            }
            '#' => {
                while let Some(ch) = cur.peek() {
                    if ch == '\n' || ch == '\r' {
                        break;
                    }
                    cur.bump();
                }
                TokenKind::Comment
            }
            '\'' | '"' => {
                lex_string_body(&mut cur);
                TokenKind::String
            }
            '0'..='9' => {
                lex_number(&mut cur);
                TokenKind::Number
            }
            '.' if matches!(cur.peek_at(1), Some(b'0'..=b'9')) => {
                lex_number(&mut cur);
                TokenKind::Number
            }
            c if is_name_start(c) => {
                while let Some(ch) = cur.peek() {
                    if !is_name_continue(ch) {
                        break;
                    }
                    cur.bump();
                }
                let word = &source[start..cur.pos];
                let is_prefix = STRING_PREFIXES.contains(&word.to_ascii_lowercase().as_str());
                if is_prefix && matches!(cur.peek(), Some('\'') | Some('"')) {
                    lex_string_body(&mut cur);
                    TokenKind::String
                } else {
                    TokenKind::Name
                }
            }
            _ => lex_operator(&mut cur),
        };
        let end_line = if cur.pos > start && source.as_bytes()[cur.pos - 1] == b'\n' {
            cur.line - 1
        } else {
            cur.line
        };
        tokens.push(Token {
            kind,
            start,
            end: cur.pos,
            line,
            end_line,
        });
    }
    tokens
}

/// Tokens with comments removed.
pub fn code_tokens(source: &str) -> Vec<Token> {
    tokenize(source)
        .into_iter()
        .filter(|t| t.kind != TokenKind::Comment)
        .collect()
}

/// Token texts with comments removed, as used by the n-gram metrics.
pub fn code_token_texts(source: &str) -> Vec<&str> {
    code_tokens(source)
        .into_iter()
        .map(|t| t.text(source))
        .collect()
}

fn lex_string_body(cur: &mut Cursor<'_>) {
    let quote = cur.bump().expect("caller saw a quote");
    let q = quote as u8;
    let triple = cur.peek_at(0) == Some(q) && cur.peek_at(1) == Some(q);
    if triple {
        cur.bump();
        cur.bump();
        loop {
            match cur.peek() {
                None => return,
                Some('\\') => {
                    cur.bump();
                    cur.bump();
                }
                Some(ch) if ch == quote
                    && cur.peek_at(1) == Some(q)
                    && cur.peek_at(2) == Some(q) =>
                {
                    cur.bump();
                    cur.bump();
                    cur.bump();
                    return;
                }
                Some(_) => {
                    cur.bump();
                }
            }
        }
    }
    loop {
        match cur.peek() {
            None | Some('\n') => return,
            Some('\\') => {
                cur.bump();
                cur.bump();
            }
            Some(ch) if ch == quote => {
                cur.bump();
                return;
            }
            Some(_) => {
                cur.bump();
            }
        }
    }
}

fn eat_digits(cur: &mut Cursor<'_>) {
    while let Some(b'0'..=b'9' | b'_') = cur.peek_at(0) {
        cur.bump();
    }
}

fn lex_number(cur: &mut Cursor<'_>) {
    let radix_prefix = cur.peek_at(0) == Some(b'0')
        && matches!(cur.peek_at(1), Some(b'x' | b'X' | b'o' | b'O' | b'b' | b'B'));
    if radix_prefix {
        cur.bump();
        cur.bump();
        while let Some(b) = cur.peek_at(0) {
            if b.is_ascii_hexdigit() || b == b'_' {
                cur.bump();
            } else {
                break;
            }
        }
        return;
    }
    eat_digits(cur);
    if cur.peek_at(0) == Some(b'.') {
        cur.bump();
        eat_digits(cur);
    }
    if matches!(cur.peek_at(0), Some(b'e' | b'E')) {
        let exp_digits = match cur.peek_at(1) {
            Some(b'0'..=b'9') => true,
            Some(b'+' | b'-') => matches!(cur.peek_at(2), Some(b'0'..=b'9')),
            _ => false,
        };
        if exp_digits {
            cur.bump();
            if matches!(cur.peek_at(0), Some(b'+' | b'-')) {
                cur.bump();
            }
            eat_digits(cur);
        }
    }
    if matches!(cur.peek_at(0), Some(b'j' | b'J')) {
        cur.bump();
    }
}

fn lex_operator(cur: &mut Cursor<'_>) -> TokenKind {
    let rest = &cur.src[cur.pos..];
    for group in [OPS3, OPS2] {
        if let Some(op) = group.iter().find(|op| rest.starts_with(**op)) {
            for _ in 0..op.len() {
                cur.bump();
            }
            return TokenKind::Op;
        }
    }
    let c = cur.bump().expect("caller saw a char");
    if OPS1.contains(c) {
        TokenKind::Op
    } else {
        TokenKind::Error
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<&str> {
        tokenize(src).iter().map(|t| t.text(src)).collect()
    }

    #[test]
    fn simple_function() {
        assert_eq!(
            texts("def f(a, b=1):\n    return a ** b  # pow\n"),
            vec!["def", "f", "(", "a", ",", "b", "=", "1", ")", ":", "return", "a", "**", "b", "# pow"]
        );
    }

    #[test]
    fn strings_with_prefixes_and_triples() {
        let src = "x = rb'a\\'b' + f\"{y}\" + '''multi\nline''' + u'z'";
        let toks = tokenize(src);
        let strings: Vec<_> = toks
            .iter()
            .filter(|t| t.kind == TokenKind::String)
            .map(|t| t.text(src))
            .collect();
        assert_eq!(strings, vec!["rb'a\\'b'", "f\"{y}\"", "'''multi\nline'''", "u'z'"]);
        let triple = toks.iter().find(|t| t.text(src).starts_with("'''")).unwrap();
        assert_eq!((triple.line, triple.end_line), (1, 2));
    }

    #[test]
    fn numbers() {
        assert_eq!(texts("0x1F 1_000 3.14 1e-5 .5 2j 1."), vec!["0x1F", "1_000", "3.14", "1e-5", ".5", "2j", "1."]);
    }

    #[test]
    fn operators_longest_match() {
        assert_eq!(texts("a **= b // c -> ... := !="), vec!["a", "**=", "b", "//", "c", "->", "...", ":=", "!="]);
    }

    #[test]
    fn continuation_and_errors() {
        let src = "x = 1 + \\\n    2 $";
        let toks = tokenize(src);
        assert_eq!(toks.len(), 6);
        assert_eq!(toks.last().unwrap().kind, TokenKind::Error);
        assert_eq!(toks[4].line, 2);
    }

    #[test]
    fn unterminated_string_stops_at_newline() {
        let src = "x = 'abc\ny = 2";
        let t = texts(src);
        assert_eq!(t, vec!["x", "=", "'abc", "y", "=", "2"]);
    }

    #[test]
    fn keywords() {
        assert!(is_keyword("lambda"));
        assert!(!is_keyword("self"));
        assert!(!is_keyword("match"));
    }
}
