use super::ast::FPart;
use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Name(String),
    Str(String),
    FStr(Vec<FPart>),
    Int(i64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Assign,
    EqEq,
    NotEq,
    Colon,
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
    pub lexeme: String,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    depth: usize,
    indents: Vec<usize>,
    out: Vec<Token>,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        chars: src.chars().collect(),
        pos: 0,
        line: 1,
        col: 1,
        depth: 0,
        indents: vec![0],
        out: Vec::new(),
    };
    lx.run()?;
    Ok(lx.out)
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn err(&self, line: usize, column: usize, lexeme: impl Into<String>, msg: impl Into<String>) -> ParseError {
        ParseError {
            line,
            column,
            lexeme: lexeme.into(),
            message: msg.into(),
        }
    }

    fn push(&mut self, tok: Tok, line: usize, column: usize, lexeme: impl Into<String>) {
        self.out.push(Token {
            tok,
            line,
            column,
            lexeme: lexeme.into(),
        });
    }

    fn run(&mut self) -> Result<(), ParseError> {
        let mut at_line_start = true;
        loop {
            if at_line_start && self.depth == 0 {
                if self.peek().is_none() {
                    break;
                }
                if !self.line_indent()? {
                    continue;
                }
                at_line_start = false;
            }
            let Some(c) = self.peek() else { break };
            let (line, col) = (self.line, self.col);
            match c {
                ' ' | '\t' | '\r' => {
                    self.bump();
                }
                '#' => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                '\n' => {
                    self.bump();
                    if self.depth == 0 {
                        self.push(Tok::Newline, line, col, "\\n");
                        at_line_start = true;
                    }
                }
                '(' | '[' => {
                    self.bump();
                    self.depth += 1;
                    let tok = if c == '(' { Tok::LParen } else { Tok::LBracket };
                    self.push(tok, line, col, c.to_string());
                }
                ')' | ']' => {
                    self.bump();
                    if self.depth == 0 {
                        return Err(self.err(line, col, c.to_string(), "unbalanced closing bracket"));
                    }
                    self.depth -= 1;
                    let tok = if c == ')' { Tok::RParen } else { Tok::RBracket };
                    self.push(tok, line, col, c.to_string());
                }
                ',' => {
                    self.bump();
                    self.push(Tok::Comma, line, col, ",");
                }
                ':' => {
                    self.bump();
                    self.push(Tok::Colon, line, col, ":");
                }
                '=' => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        self.push(Tok::EqEq, line, col, "==");
                    } else {
                        self.push(Tok::Assign, line, col, "=");
                    }
                }
                '!' => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        self.push(Tok::NotEq, line, col, "!=");
                    } else {
                        return Err(self.err(line, col, "!", "unsupported operator"));
                    }
                }
                '\'' | '"' => {
                    let s = self.string(false)?;
                    let lexeme = s.1;
                    match s.0 {
                        StrLit::Plain(text) => self.push(Tok::Str(text), line, col, lexeme),
                        StrLit::Fmt(_) => unreachable!(),
                    }
                }
                c if (c == 'f' || c == 'F') && matches!(self.peek_at(1), Some('\'' | '"')) => {
                    self.bump();
                    let s = self.string(true)?;
                    let lexeme = format!("f{}", s.1);
                    match s.0 {
                        StrLit::Fmt(parts) => self.push(Tok::FStr(parts), line, col, lexeme),
                        StrLit::Plain(_) => unreachable!(),
                    }
                }
                c if c.is_ascii_digit() => {
                    let mut text = String::new();
                    while let Some(d) = self.peek().filter(|d| d.is_ascii_alphanumeric() || *d == '_' || *d == '.') {
                        text.push(d);
                        self.bump();
                    }
                    if !text.bytes().all(|b| b.is_ascii_digit()) {
                        return Err(self.err(line, col, text, "only plain integer literals are supported"));
                    }
                    let value = text
                        .parse::<i64>()
                        .map_err(|_| self.err(line, col, text.clone(), "integer literal out of range"))?;
                    self.push(Tok::Int(value), line, col, text);
                }
                c if is_ident_start(c) => {
                    let mut text = String::new();
                    while let Some(d) = self.peek().filter(|d| is_ident_char(*d)) {
                        text.push(d);
                        self.bump();
                    }
                    self.push(Tok::Name(text.clone()), line, col, text);
                }
                '.' => return Err(self.err(line, col, ".", "attribute access is not supported")),
                '+' | '-' | '*' | '/' | '%' | '<' | '>' | '&' | '|' | '^' | '~' | '@' => {
                    return Err(self.err(line, col, c.to_string(), "operators are not supported"));
                }
                ';' => return Err(self.err(line, col, ";", "statements must be on separate lines")),
                '\\' => return Err(self.err(line, col, "\\", "line continuations are not supported")),
                other => {
                    return Err(self.err(line, col, other.to_string(), "unexpected character"));
                }
            }
        }
        if self.depth != 0 {
            return Err(self.err(self.line, self.col, "<eof>", "unclosed bracket at end of program"));
        }
        let (line, col) = (self.line, self.col);
        if !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline)) {
            self.push(Tok::Newline, line, col, "\\n");
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, line, col, "<dedent>");
        }
        self.push(Tok::Eof, line, col, "<eof>");
        Ok(())
    }

    /// Handles indentation at the start of a logical line. Returns false
    /// when the line was blank or a comment and has been consumed.
    fn line_indent(&mut self) -> Result<bool, ParseError> {
        let mut width = 0;
        let line = self.line;
        while let Some(c) = self.peek() {
            match c {
                ' ' => width += 1,
                '\t' => {
                    return Err(self.err(line, self.col, "\\t", "tabs are not allowed in indentation"))
                }
                _ => break,
            }
            self.bump();
        }
        // Blank and comment-only lines never change the indentation level.
        match self.peek() {
            None => return Ok(false),
            Some('\n' | '\r' | '#') => {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
                return Ok(false);
            }
            _ => {}
        }
        let current = *self.indents.last().unwrap();
        if width > current {
            self.indents.push(width);
            self.push(Tok::Indent, line, 1, " ".repeat(width));
        } else {
            while width < *self.indents.last().unwrap() {
                self.indents.pop();
                self.push(Tok::Dedent, line, 1, "<dedent>");
            }
            if width != *self.indents.last().unwrap() {
                return Err(self.err(line, width + 1, " ".repeat(width), "inconsistent dedent"));
            }
        }
        Ok(true)
    }

    fn string(&mut self, fmt: bool) -> Result<(StrLit, String), ParseError> {
        let (line, col) = (self.line, self.col);
        let quote = self.bump().unwrap();
        if self.peek() == Some(quote) && self.peek_at(1) == Some(quote) {
            return Err(self.err(line, col, format!("{quote}{quote}{quote}"), "triple-quoted strings are not supported"));
        }
        let mut lexeme = String::from(quote);
        let mut text = String::new();
        let mut parts = Vec::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.err(line, col, lexeme, "unterminated string literal"));
            };
            lexeme.push(c);
            match c {
                c if c == quote => break,
                '\n' => return Err(self.err(line, col, lexeme, "unterminated string literal")),
                '\\' => {
                    let Some(e) = self.bump() else {
                        return Err(self.err(line, col, lexeme, "unterminated string literal"));
                    };
                    lexeme.push(e);
                    match e {
                        'n' => text.push('\n'),
                        't' => text.push('\t'),
                        '\\' => text.push('\\'),
                        '\'' => text.push('\''),
                        '"' => text.push('"'),
                        '\n' => {}
                        other => {
                            text.push('\\');
                            text.push(other);
                        }
                    }
                }
                '{' if fmt => {
                    if self.peek() == Some('{') {
                        self.bump();
                        lexeme.push('{');
                        text.push('{');
                        continue;
                    }
                    let mut name = String::new();
                    while let Some(d) = self.peek().filter(|d| *d != '}' && *d != quote && *d != '\n') {
                        name.push(d);
                        self.bump();
                    }
                    lexeme.push_str(&name);
                    if self.peek() != Some('}') {
                        return Err(self.err(line, col, lexeme, "unclosed `{` in f-string"));
                    }
                    self.bump();
                    lexeme.push('}');
                    let bare = name.trim();
                    let valid = bare.chars().next().is_some_and(is_ident_start)
                        && bare.chars().all(is_ident_char);
                    if !valid {
                        return Err(self.err(
                            line,
                            col,
                            format!("{{{name}}}"),
                            "f-string interpolation supports bare variable names only",
                        ));
                    }
                    if !text.is_empty() {
                        parts.push(FPart::Text(std::mem::take(&mut text)));
                    }
                    parts.push(FPart::Var(bare.to_string()));
                }
                '}' if fmt => {
                    if self.peek() == Some('}') {
                        self.bump();
                        lexeme.push('}');
                        text.push('}');
                    } else {
                        return Err(self.err(line, col, lexeme, "single `}` is not allowed in f-string"));
                    }
                }
                other => text.push(other),
            }
        }
        if fmt {
            if !text.is_empty() {
                parts.push(FPart::Text(text));
            }
            Ok((StrLit::Fmt(parts), lexeme))
        } else {
            Ok((StrLit::Plain(text), lexeme))
        }
    }
}

enum StrLit {
    Plain(String),
    Fmt(Vec<FPart>),
}
