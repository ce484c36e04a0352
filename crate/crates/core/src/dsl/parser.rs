use super::ast::{CmpOp, Comparison, Expr, Program, Statement, StatementKind};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

const RESERVED: &[&str] = &[
    "False", "True", "and", "as", "assert", "if", "async", "await", "break", "class", "continue", "def",
    "del", "elif", "else", "except", "finally", "for", "from", "global", "import", "in", "is",
    "lambda", "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut statements = Vec::new();
    loop {
        match p.peek() {
            Tok::Eof => break,
            Tok::Newline => {
                p.pos += 1;
            }
            Tok::Indent => return Err(p.error_here("unexpected indent")),
            _ => statements.push(p.statement(false)?),
        }
    }
    if statements.is_empty() {
        return Err(ParseError {
            line: 1,
            column: 1,
            lexeme: String::new(),
            message: "program is empty".into(),
        });
    }
    Ok(Program {
        statements,
        source_text: text.to_string(),
    })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = &self.tokens[self.pos];
        ParseError {
            line: t.line,
            column: t.column,
            lexeme: t.lexeme.clone(),
            message: message.into(),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        if *self.peek() == want {
            Ok(self.next())
        } else {
            Err(self.error_here(format!("expected {what}")))
        }
    }

    fn check_name(&self, name: &str) -> Result<(), ParseError> {
        if RESERVED.contains(&name) {
            return Err(self.error_here(format!("`{name}` is not supported")));
        }
        Ok(())
    }

    fn statement(&mut self, in_block: bool) -> Result<Statement, ParseError> {
        let line = self.tokens[self.pos].line;
        if let Tok::Name(n) = self.peek() {
            if n == "if" {
                if in_block {
                    return Err(self.error_here("nested if blocks are not supported"));
                }
                return self.if_statement(line);
            }
        }
        let kind = self.simple_statement()?;
        self.end_of_line()?;
        Ok(Statement { line, kind })
    }

    fn end_of_line(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Newline => {
                self.next();
                Ok(())
            }
            Tok::Eof | Tok::Dedent => Ok(()),
            _ => Err(self.error_here("expected end of line")),
        }
    }

    fn simple_statement(&mut self) -> Result<StatementKind, ParseError> {
        if let (Tok::Name(name), Tok::Assign) = (self.peek().clone(), self.peek_at(1)) {
            self.check_name(&name)?;
            if name == "None" {
                return Err(self.error_here("cannot assign to None"));
            }
            self.pos += 2;
            let value = self.expr()?;
            return Ok(StatementKind::Assign(name, value));
        }
        let e = self.expr()?;
        if *self.peek() == Tok::Assign {
            return Err(self.error_here("only plain names can be assigned to"));
        }
        Ok(StatementKind::Expr(e))
    }

    fn if_statement(&mut self, line: usize) -> Result<Statement, ParseError> {
        self.next();
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::EqEq => CmpOp::Eq,
            Tok::NotEq => CmpOp::Ne,
            _ => return Err(self.error_here("expected `==` or `!=` in if condition")),
        };
        self.next();
        let rhs = self.expr()?;
        self.expect(Tok::Colon, "`:` after if condition")?;
        let mut then_block = Vec::new();
        if *self.peek() == Tok::Newline {
            self.next();
            self.expect(Tok::Indent, "an indented block")?;
            loop {
                match self.peek() {
                    Tok::Dedent => {
                        self.next();
                        break;
                    }
                    Tok::Eof => break,
                    Tok::Newline => {
                        self.next();
                    }
                    Tok::Indent => return Err(self.error_here("unexpected indent")),
                    _ => then_block.push(self.statement(true)?),
                }
            }
        } else {
            let inner_line = self.tokens[self.pos].line;
            if matches!(self.peek(), Tok::Name(n) if n == "if") {
                return Err(self.error_here("nested if blocks are not supported"));
            }
            let kind = self.simple_statement()?;
            self.end_of_line()?;
            then_block.push(Statement {
                line: inner_line,
                kind,
            });
        }
        if matches!(self.peek(), Tok::Name(n) if n == "else" || n == "elif") {
            return Err(self.error_here("else/elif branches are not supported"));
        }
        if then_block.is_empty() {
            return Err(self.error_here("if block is empty"));
        }
        Ok(Statement {
            line,
            kind: StatementKind::If {
                condition: Comparison { lhs, op, rhs },
                then_block,
            },
        })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.next();
                Ok(Expr::Str(s))
            }
            Tok::FStr(parts) => {
                self.next();
                Ok(Expr::FString(parts))
            }
            Tok::Int(i) => {
                self.next();
                Ok(Expr::Int(i))
            }
            Tok::LBracket => {
                self.next();
                let mut items = Vec::new();
                while *self.peek() != Tok::RBracket {
                    items.push(self.expr()?);
                    match self.peek() {
                        Tok::Comma => {
                            self.next();
                        }
                        Tok::RBracket => {}
                        _ => return Err(self.error_here("expected `,` or `]` in list")),
                    }
                }
                self.next();
                Ok(Expr::List(items))
            }
            Tok::Name(name) => {
                if name == "None" {
                    self.next();
                    return Ok(Expr::None);
                }
                self.check_name(&name)?;
                self.next();
                if *self.peek() == Tok::LParen {
                    self.call(name)
                } else {
                    Ok(Expr::Var(name))
                }
            }
            _ => Err(self.error_here("expected an expression")),
        }
    }

    fn call(&mut self, callee: String) -> Result<Expr, ParseError> {
        self.next();
        let mut positional = Vec::new();
        let mut keyword: Vec<(String, Expr)> = Vec::new();
        while *self.peek() != Tok::RParen {
            if let (Tok::Name(k), Tok::Assign) = (self.peek().clone(), self.peek_at(1)) {
                if keyword.iter().any(|(n, _)| *n == k) {
                    return Err(self.error_here(format!("keyword argument `{k}` repeated")));
                }
                self.pos += 2;
                let v = self.expr()?;
                keyword.push((k, v));
            } else {
                if !keyword.is_empty() {
                    return Err(self.error_here("positional argument follows keyword argument"));
                }
                positional.push(self.expr()?);
            }
            match self.peek() {
                Tok::Comma => {
                    self.next();
                }
                Tok::RParen => {}
                _ => return Err(self.error_here("expected `,` or `)` in call")),
            }
        }
        self.next();
        Ok(Expr::Call {
            callee,
            positional,
            keyword,
        })
    }
}
