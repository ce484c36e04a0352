use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Program {
    pub statements: Vec<Statement>,
    pub source_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Statement {
    pub line: usize,
    pub kind: StatementKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Assign(String, Expr),
    Expr(Expr),
    If {
        condition: Comparison,
        then_block: Vec<Statement>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CmpOp {
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Str(String),
    Int(i64),
    None,
    List(Vec<Expr>),
    Var(String),
    Call {
        callee: String,
        positional: Vec<Expr>,
        keyword: Vec<(String, Expr)>,
    },
    FString(Vec<FPart>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FPart {
    Text(String),
    Var(String),
}

impl Program {
    /// Number of call expressions anywhere in the program.
    pub fn call_count(&self) -> usize {
        fn expr(e: &Expr) -> usize {
            match e {
                Expr::Call {
                    positional,
                    keyword,
                    ..
                } => {
                    1 + positional.iter().map(expr).sum::<usize>()
                        + keyword.iter().map(|(_, e)| expr(e)).sum::<usize>()
                }
                Expr::List(items) => items.iter().map(expr).sum(),
                _ => 0,
            }
        }
        fn stmt(s: &Statement) -> usize {
            match &s.kind {
                StatementKind::Assign(_, e) | StatementKind::Expr(e) => expr(e),
                StatementKind::If {
                    condition,
                    then_block,
                } => {
                    expr(&condition.lhs)
                        + expr(&condition.rhs)
                        + then_block.iter().map(stmt).sum::<usize>()
                }
            }
        }
        self.statements.iter().map(stmt).sum()
    }
}
