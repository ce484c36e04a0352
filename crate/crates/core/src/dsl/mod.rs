//! The small tool-calling language the agent writes inside fenced blocks.
//!
//! The grammar is a closed allowlist: assignments, calls with positional
//! then keyword arguments, string/int/list/None literals, f-strings over
//! bare names, and a single level of `if` with `==` or `!=`. Everything else
//! is a [`ParseError`] that gets shown to the agent.

mod ast;
mod exec;
mod lexer;
mod parser;
mod value;

use std::fmt;

pub use ast::{CmpOp, Comparison, Expr, FPart, Program, Statement, StatementKind};
pub use exec::{
    execute_program, CallArgs, CallRecord, Finish, StepResult, ToolCallError, ToolHost, ToolReturn,
    MAX_CALLS_PER_PROGRAM,
};
pub use parser::parse_program;
pub use value::{render_value, Environment, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub lexeme: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "parse error at line {}, column {} near `{}`: {}",
            self.line, self.column, self.lexeme, self.message
        )
    }
}

impl std::error::Error for ParseError {}

/// All fenced blocks in order, with a language tag line stripped.
/// An unterminated fence ends the scan.
pub fn fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        let Some(close) = after.find("```") else { break };
        let mut body = &after[..close];
        if let Some(nl) = body.find('\n') {
            let tag = body[..nl].trim();
            if tag.is_empty() || tag.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                body = &body[nl + 1..];
            }
        }
        blocks.push(body.trim_end_matches(['\n', '\r', ' ']).to_string());
        rest = &after[close + 3..];
    }
    blocks
}

/// The first fenced block, if any.
pub fn extract_code_block(model_text: &str) -> Option<String> {
    fenced_blocks(model_text).into_iter().next()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_first_block() {
        assert_eq!(
            extract_code_block("```\nx = think(\"plan\")\n```").as_deref(),
            Some("x = think(\"plan\")")
        );
        assert_eq!(extract_code_block("no code here, Final Answer: (3)"), None);
        assert_eq!(extract_code_block("```python\na = 1\n```").as_deref(), Some("a = 1"));
        assert_eq!(extract_code_block("```\nunterminated"), None);
        assert_eq!(
            fenced_blocks("```\na\n```\nresult\n```\nb\n```"),
            vec!["a".to_string(), "b".to_string()]
        );
    }

    #[test]
    fn parse_error_display() {
        let e = parse_program("import os").unwrap_err();
        assert_eq!(
            e.to_string(),
            "parse error at line 1, column 1 near `import`: `import` is not supported"
        );
    }
}
