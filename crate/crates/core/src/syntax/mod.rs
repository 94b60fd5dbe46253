//! Surface syntax: spans, tree, lexer, parser and printer.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod span;

pub use ast::{Arm, BinOp, Expr, ExprKind, Lit, Param, Pattern, Prim, UnOp};
pub use lexer::Tok;
pub use parser::{parse, parse_named, parse_type, PResult, ParseError, Parser};
pub use pretty::pretty;
pub use span::SourceSpan;
