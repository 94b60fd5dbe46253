use std::collections::BTreeSet;
use std::fmt;

use num_rational::BigRational;
use serde::{Serialize, Serializer};

use super::span::SourceSpan;
use crate::types::SimpleType;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lit {
    Unit,
    Bool(bool),
    Num(BigRational),
}

impl Serialize for Lit {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(1))?;
        match self {
            Lit::Unit => m.serialize_entry("unit", &())?,
            Lit::Bool(b) => m.serialize_entry("bool", b)?,
            Lit::Num(r) => m.serialize_entry("num", &r.to_string())?,
        }
        m.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Ne => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum UnOp {
    Neg,
    Not,
}

/// Built-in operators with a fixed call syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Prim {
    Bernoulli,
    Beta,
    Normal,
    Uniform,
    Dirichlet,
    Multinomial,
    LapMech,
    GaussMech,
    ExpMech,
    GetParams,
    GetMean,
    GaussSigma,
    Hellinger,
    StatDist,
    Length,
    AtLeast,
    Sqrt,
    Exp,
    Ln,
    Abs,
}

impl Prim {
    pub const ALL: [Prim; 20] = [
        Prim::Bernoulli,
        Prim::Beta,
        Prim::Normal,
        Prim::Uniform,
        Prim::Dirichlet,
        Prim::Multinomial,
        Prim::LapMech,
        Prim::GaussMech,
        Prim::ExpMech,
        Prim::GetParams,
        Prim::GetMean,
        Prim::GaussSigma,
        Prim::Hellinger,
        Prim::StatDist,
        Prim::Length,
        Prim::AtLeast,
        Prim::Sqrt,
        Prim::Exp,
        Prim::Ln,
        Prim::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Prim::Bernoulli => "bernoulli",
            Prim::Beta => "beta",
            Prim::Normal => "normal",
            Prim::Uniform => "uniform",
            Prim::Dirichlet => "dirichlet",
            Prim::Multinomial => "multinomial",
            Prim::LapMech => "lapMech",
            Prim::GaussMech => "gaussMech",
            Prim::ExpMech => "expMech",
            Prim::GetParams => "getParams",
            Prim::GetMean => "getMean",
            Prim::GaussSigma => "gaussSigma",
            Prim::Hellinger => "hellinger",
            Prim::StatDist => "statdist",
            Prim::Length => "length",
            Prim::AtLeast => "atLeast",
            Prim::Sqrt => "sqrt",
            Prim::Exp => "exp",
            Prim::Ln => "ln",
            Prim::Abs => "abs",
        }
    }

    pub fn from_name(s: &str) -> Option<Prim> {
        Prim::ALL.iter().copied().find(|p| p.name() == s)
    }

    /// Inclusive argument-count range.
    pub fn arity(self) -> (usize, usize) {
        match self {
            Prim::Uniform => (0, 0),
            Prim::Bernoulli | Prim::GetParams | Prim::GetMean | Prim::Length | Prim::Sqrt | Prim::Exp | Prim::Ln | Prim::Abs => (1, 1),
            Prim::Beta | Prim::Normal | Prim::LapMech | Prim::GaussMech | Prim::GaussSigma | Prim::Hellinger | Prim::StatDist | Prim::AtLeast => (2, 2),
            Prim::Dirichlet => (2, 8),
            Prim::Multinomial => (1, 7),
            Prim::ExpMech => (3, 4),
        }
    }

    /// Constructors of symbolic distributions.
    pub fn is_family(self) -> bool {
        matches!(self, Prim::Bernoulli | Prim::Beta | Prim::Normal | Prim::Uniform | Prim::Dirichlet | Prim::Multinomial)
    }

    pub fn is_mechanism(self) -> bool {
        matches!(self, Prim::LapMech | Prim::GaussMech | Prim::ExpMech)
    }
}

impl fmt::Display for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Pattern {
    Wild,
    Var(String),
    Lit(Lit),
    Nil,
    Cons(Box<Pattern>, Box<Pattern>),
    Tuple(Vec<Pattern>),
}

impl Pattern {
    pub fn var(name: &str) -> Self {
        Pattern::Var(name.to_string())
    }

    pub fn binders(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Var(x) => out.push(x.clone()),
            Pattern::Cons(h, t) => {
                h.binders(out);
                t.binders(out);
            }
            Pattern::Tuple(ps) => ps.iter().for_each(|p| p.binders(out)),
            Pattern::Wild | Pattern::Lit(_) | Pattern::Nil => {}
        }
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Pattern::Var(x) => Some(x),
            _ => None,
        }
    }
}

/// A binder with an optional simple-type annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Param {
    pub pat: Pattern,
    pub ty: Option<SimpleType>,
}

impl Param {
    pub fn var(name: &str) -> Self {
        Param { pat: Pattern::var(name), ty: None }
    }

    pub fn typed(name: &str, ty: SimpleType) -> Self {
        Param { pat: Pattern::var(name), ty: Some(ty) }
    }

    pub fn name(&self) -> Option<&str> {
        self.pat.as_var()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Arm {
    pub pat: Pattern,
    pub body: Expr,
}

#[derive(Debug, Clone, Serialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

/// Structural equality; spans are ignored.
impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExprKind {
    Var(String),
    Lit(Lit),
    App(Box<Expr>, Box<Expr>),
    Lam(Param, Box<Expr>),
    Let(Param, Box<Expr>, Box<Expr>),
    /// `let rec name p1 .. pn = body in rest`
    LetRec {
        name: String,
        params: Vec<Param>,
        body: Box<Expr>,
        rest: Box<Expr>,
    },
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Match(Box<Expr>, Vec<Arm>),
    Tuple(Vec<Expr>),
    Nil,
    Cons(Box<Expr>, Box<Expr>),
    BinOp(BinOp, Box<Expr>, Box<Expr>),
    UnOp(UnOp, Box<Expr>),
    Prim(Prim, Vec<Expr>),
    Return(Box<Expr>),
    MLet(Param, Box<Expr>, Box<Expr>),
    /// `observe x => pred in prior`
    Observe {
        binder: Param,
        pred: Box<Expr>,
        prior: Box<Expr>,
    },
    Infer(Box<Expr>),
    Ran(Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: SourceSpan) -> Self {
        Expr { kind, span }
    }

    /// Node without source location.
    pub fn syn(kind: ExprKind) -> Self {
        Expr { kind, span: SourceSpan::synthetic() }
    }

    pub fn var(x: &str) -> Self {
        Expr::syn(ExprKind::Var(x.to_string()))
    }

    pub fn num(r: BigRational) -> Self {
        Expr::syn(ExprKind::Lit(Lit::Num(r)))
    }

    pub fn boolean(b: bool) -> Self {
        Expr::syn(ExprKind::Lit(Lit::Bool(b)))
    }

    pub fn app(f: Expr, a: Expr) -> Self {
        Expr::syn(ExprKind::App(Box::new(f), Box::new(a)))
    }

    /// `f a1 .. an`
    pub fn apps(f: Expr, args: impl IntoIterator<Item = Expr>) -> Self {
        args.into_iter().fold(f, Expr::app)
    }

    /// Head and arguments of a spine of applications.
    pub fn spine(&self) -> (&Expr, Vec<&Expr>) {
        let mut args = Vec::new();
        let mut cur = self;
        while let ExprKind::App(f, a) = &cur.kind {
            args.push(&**a);
            cur = f;
        }
        args.reverse();
        (cur, args)
    }

    pub fn children(&self) -> Vec<&Expr> {
        use ExprKind::*;
        match &self.kind {
            Var(_) | Lit(_) | Nil => vec![],
            App(a, b) | Let(_, a, b) | Cons(a, b) | BinOp(_, a, b) | MLet(_, a, b) => vec![a, b],
            Lam(_, a) | UnOp(_, a) | Return(a) | Infer(a) | Ran(a) => vec![a],
            LetRec { body, rest, .. } => vec![body, rest],
            If(a, b, c) => vec![a, b, c],
            Match(s, arms) => std::iter::once(&**s).chain(arms.iter().map(|a| &a.body)).collect(),
            Tuple(es) | Prim(_, es) => es.iter().collect(),
            Observe { pred, prior, .. } => vec![pred, prior],
        }
    }

    /// Free variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        free_vars_into(self, &mut Vec::new(), &mut out);
        out
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    /// Every child span lies inside its parent's span.
    pub fn spans_monotone(&self) -> bool {
        self.children().iter().all(|c| self.span.contains(&c.span) && c.spans_monotone())
    }
}

fn with_bound<F: FnOnce(&mut Vec<String>)>(bound: &mut Vec<String>, names: Vec<String>, f: F) {
    let n = names.len();
    bound.extend(names);
    f(bound);
    bound.truncate(bound.len() - n);
}

fn pat_names(p: &Pattern) -> Vec<String> {
    let mut v = Vec::new();
    p.binders(&mut v);
    v
}

fn free_vars_into(e: &Expr, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
    use ExprKind::*;
    match &e.kind {
        Var(x) => {
            if !bound.contains(x) {
                out.insert(x.clone());
            }
        }
        Lam(p, b) => with_bound(bound, pat_names(&p.pat), |bd| free_vars_into(b, bd, out)),
        Let(p, a, b) | MLet(p, a, b) => {
            free_vars_into(a, bound, out);
            with_bound(bound, pat_names(&p.pat), |bd| free_vars_into(b, bd, out));
        }
        LetRec { name, params, body, rest } => {
            let mut names = vec![name.clone()];
            params.iter().for_each(|p| p.pat.binders(&mut names));
            with_bound(bound, names, |bd| free_vars_into(body, bd, out));
            with_bound(bound, vec![name.clone()], |bd| free_vars_into(rest, bd, out));
        }
        Match(s, arms) => {
            free_vars_into(s, bound, out);
            for a in arms {
                with_bound(bound, pat_names(&a.pat), |bd| free_vars_into(&a.body, bd, out));
            }
        }
        Observe { binder, pred, prior } => {
            free_vars_into(prior, bound, out);
            with_bound(bound, pat_names(&binder.pat), |bd| free_vars_into(pred, bd, out));
        }
        _ => {
            for c in e.children() {
                free_vars_into(c, bound, out);
            }
        }
    }
}

/// Words that cannot be used as variable names.
pub const KEYWORDS: &[&str] = &[
    "let", "rec", "in", "fun", "match", "with", "if", "then", "else", "mlet", "return", "observe", "infer", "ran", "true", "false", "not",
];

pub fn is_reserved(name: &str) -> bool {
    KEYWORDS.contains(&name) || Prim::from_name(name).is_some()
}
