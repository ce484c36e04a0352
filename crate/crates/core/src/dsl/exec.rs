use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use super::ast::{CmpOp, Expr, FPart, Program, Statement, StatementKind};
use super::value::{render_value, Environment, Value};
use crate::domain::FinalAnswer;

/// Evaluated calls allowed per program.
pub const MAX_CALLS_PER_PROGRAM: usize = 20;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallArgs {
    pub positional: Vec<Value>,
    pub keyword: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolReturn {
    pub value: Value,
    /// Set by tools that end the episode.
    pub finish: Option<FinalAnswer>,
    pub notes: Vec<String>,
}

impl ToolReturn {
    pub fn value(value: Value) -> Self {
        Self {
            value,
            finish: None,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToolCallError {
    #[error("unknown tool '{0}'")]
    Unknown(String),
    #[error("tool '{0}' is not available in this strategy")]
    NotActive(String),
    #[error("{0}")]
    Failed(String),
}

/// What a program can call. The executor never sees anything else.
pub trait ToolHost {
    fn invoke(&self, name: &str, args: CallArgs) -> Result<ToolReturn, ToolCallError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallRecord {
    pub tool: String,
    pub output: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finish {
    pub answer: FinalAnswer,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct StepResult {
    pub rendered: String,
    #[serde(skip)]
    pub values: BTreeMap<String, Value>,
    pub terminal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finish: Option<Finish>,
    pub calls: Vec<CallRecord>,
}

impl StepResult {
    pub fn from_error(message: impl Into<String>) -> Self {
        let message = message.into();
        Self {
            rendered: format!("error: {message}"),
            error: Some(message),
            ..Self::default()
        }
    }
}

struct Exec<'a> {
    env: &'a mut Environment,
    host: &'a dyn ToolHost,
    delta: BTreeMap<String, Value>,
    calls: Vec<CallRecord>,
    finish: Option<Finish>,
}

/// Runs a parsed program. Failures become error text in the result; the
/// bindings made before a failure are kept.
pub fn execute_program(program: &Program, env: &mut Environment, host: &dyn ToolHost) -> StepResult {
    let mut ex = Exec {
        env,
        host,
        delta: BTreeMap::new(),
        calls: Vec::new(),
        finish: None,
    };
    let mut last = Value::None;
    let mut error = None;
    for stmt in &program.statements {
        match ex.statement(stmt) {
            Ok(v) => last = v,
            Err(msg) => {
                error = Some(msg);
                break;
            }
        }
        if ex.finish.is_some() {
            break;
        }
    }
    let rendered = match &error {
        Some(msg) => format!("error: {msg}"),
        None => render_value(&last),
    };
    StepResult {
        rendered,
        values: ex.delta,
        terminal: ex.finish.is_some(),
        error,
        finish: ex.finish,
        calls: ex.calls,
    }
}

impl Exec<'_> {
    fn statement(&mut self, stmt: &Statement) -> Result<Value, String> {
        match &stmt.kind {
            StatementKind::Assign(name, e) => {
                let v = self.expr(e)?;
                self.env.set(name.clone(), v.clone());
                self.delta.insert(name.clone(), v.clone());
                Ok(v)
            }
            StatementKind::Expr(e) => self.expr(e),
            StatementKind::If {
                condition,
                then_block,
            } => {
                let lhs = self.expr(&condition.lhs)?;
                let rhs = self.expr(&condition.rhs)?;
                let taken = match condition.op {
                    CmpOp::Eq => lhs == rhs,
                    CmpOp::Ne => lhs != rhs,
                };
                let mut last = Value::None;
                if taken {
                    for s in then_block {
                        last = self.statement(s)?;
                        if self.finish.is_some() {
                            break;
                        }
                    }
                }
                Ok(last)
            }
        }
    }

    fn expr(&mut self, e: &Expr) -> Result<Value, String> {
        match e {
            Expr::Str(s) => Ok(Value::Str(s.clone())),
            Expr::Int(i) => Ok(Value::Int(*i)),
            Expr::None => Ok(Value::None),
            Expr::List(items) => items
                .iter()
                .map(|i| self.expr(i))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::List),
            Expr::Var(name) => self.lookup(name).cloned(),
            Expr::FString(parts) => {
                let mut out = String::new();
                for p in parts {
                    match p {
                        FPart::Text(t) => out.push_str(t),
                        FPart::Var(name) => out.push_str(&render_value(self.lookup(name)?)),
                    }
                }
                Ok(Value::Str(out))
            }
            Expr::Call {
                callee,
                positional,
                keyword,
            } => {
                let mut args = CallArgs::default();
                for p in positional {
                    args.positional.push(self.expr(p)?);
                }
                for (k, v) in keyword {
                    args.keyword.push((k.clone(), self.expr(v)?));
                }
                if self.calls.len() >= MAX_CALLS_PER_PROGRAM {
                    return Err(format!(
                        "tool call limit of {MAX_CALLS_PER_PROGRAM} per program exceeded"
                    ));
                }
                match self.host.invoke(callee, args) {
                    Ok(ret) => {
                        self.calls.push(CallRecord {
                            tool: callee.clone(),
                            output: render_value(&ret.value),
                            error: None,
                            notes: ret.notes,
                        });
                        if let Some(answer) = ret.finish {
                            self.finish = Some(Finish {
                                answer,
                                raw: render_value(&ret.value),
                            });
                        }
                        Ok(ret.value)
                    }
                    Err(err) => {
                        let msg = err.to_string();
                        self.calls.push(CallRecord {
                            tool: callee.clone(),
                            output: String::new(),
                            error: Some(msg.clone()),
                            notes: Vec::new(),
                        });
                        Err(msg)
                    }
                }
            }
        }
    }

    fn lookup(&self, name: &str) -> Result<&Value, String> {
        self.env
            .get(name)
            .ok_or_else(|| format!("name '{name}' is not defined"))
    }
}
