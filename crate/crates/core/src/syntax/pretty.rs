use num_rational::BigRational;
use num_traits::Signed;

use super::ast::{Expr, ExprKind, Lit, Param, Pattern, UnOp};
use crate::scalar::{is_terminating_decimal, rational_to_decimal};

/// Canonical source text for an expression. Re-parses to the same tree.
pub fn pretty(e: &Expr) -> String {
    let mut p = Printer { out: String::new(), indent: 0 };
    p.expr(e, 0);
    p.out
}

pub fn pretty_lit(l: &Lit) -> String {
    match l {
        Lit::Unit => "()".into(),
        Lit::Bool(b) => b.to_string(),
        Lit::Num(r) => pretty_num(r),
    }
}

fn pretty_num(r: &BigRational) -> String {
    let body = if is_terminating_decimal(r) {
        rational_to_decimal(&r.abs(), usize::MAX)
    } else {
        format!("({} / {})", r.numer().abs(), r.denom())
    };
    if r.is_negative() {
        format!("(-{})", body)
    } else {
        body
    }
}

pub fn pretty_pattern(p: &Pattern) -> String {
    match p {
        Pattern::Wild => "_".into(),
        Pattern::Var(x) => x.clone(),
        Pattern::Lit(Lit::Num(r)) if r.is_negative() => format!("-{}", rational_to_decimal(&r.abs(), usize::MAX)),
        Pattern::Lit(l) => pretty_lit(l),
        Pattern::Nil => "[]".into(),
        Pattern::Cons(h, t) => {
            let hs = match **h {
                Pattern::Cons(..) => format!("({})", pretty_pattern(h)),
                _ => pretty_pattern(h),
            };
            format!("{} :: {}", hs, pretty_pattern(t))
        }
        Pattern::Tuple(ps) => format!("({})", ps.iter().map(pretty_pattern).collect::<Vec<_>>().join(", ")),
    }
}

pub fn pretty_param(p: &Param) -> String {
    match (&p.pat, &p.ty) {
        (pat, Some(t)) => format!("({} : {})", pretty_pattern(pat), t),
        (pat @ Pattern::Cons(..), None) => format!("({})", pretty_pattern(pat)),
        (pat, None) => pretty_pattern(pat),
    }
}

fn is_open(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Let(..) | ExprKind::LetRec { .. } | ExprKind::Lam(..) | ExprKind::Match(..) | ExprKind::If(..) | ExprKind::MLet(..) | ExprKind::Observe { .. }
    )
}

fn level(e: &Expr) -> u8 {
    match &e.kind {
        _ if is_open(e) => 0,
        ExprKind::BinOp(op, ..) => op.precedence(),
        ExprKind::Cons(..) => 4,
        ExprKind::UnOp(..) | ExprKind::Return(_) | ExprKind::Infer(_) | ExprKind::Ran(_) => 7,
        ExprKind::App(..) => 8,
        _ => 9,
    }
}

/// `e1 :: e2 :: ... :: []` as a list literal.
fn list_items(e: &Expr) -> Option<Vec<&Expr>> {
    let mut items = Vec::new();
    let mut cur = e;
    loop {
        match &cur.kind {
            ExprKind::Nil => return Some(items),
            ExprKind::Cons(h, t) => {
                items.push(&**h);
                cur = t;
            }
            _ => return None,
        }
    }
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn w(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn nl(&mut self) {
        self.out.push('\n');
        for _ in 0..self.indent {
            self.out.push(' ');
        }
    }

    fn expr(&mut self, e: &Expr, ctx: u8) {
        if level(e) < ctx {
            self.w("(");
            let saved = self.indent;
            self.indent += 1;
            self.expr(e, 0);
            self.indent = saved;
            self.w(")");
            return;
        }
        match &e.kind {
            ExprKind::Var(x) => self.w(x),
            ExprKind::Lit(l) => self.w(&pretty_lit(l)),
            ExprKind::Nil => self.w("[]"),
            ExprKind::Tuple(es) => {
                self.w("(");
                self.comma_list(es.iter());
                self.w(")");
            }
            ExprKind::Prim(p, args) => {
                self.w(p.name());
                self.w("(");
                self.comma_list(args.iter());
                self.w(")");
            }
            ExprKind::Cons(h, t) => {
                if let Some(items) = list_items(e) {
                    self.w("[");
                    for (i, it) in items.iter().enumerate() {
                        if i > 0 {
                            self.w("; ");
                        }
                        self.expr(it, 0);
                    }
                    self.w("]");
                } else {
                    self.expr(h, 5);
                    self.w(" :: ");
                    self.expr(t, 4);
                }
            }
            ExprKind::BinOp(op, a, b) => {
                let p = op.precedence();
                let (la, lb) = if op.is_comparison() { (p + 1, p + 1) } else { (p, p + 1) };
                self.expr(a, la);
                self.w(" ");
                self.w(op.symbol());
                self.w(" ");
                self.expr(b, lb);
            }
            ExprKind::UnOp(op, a) => {
                self.w(match op {
                    UnOp::Neg => "-",
                    UnOp::Not => "not ",
                });
                self.expr(a, 7);
            }
            ExprKind::Return(a) => self.prefix("return ", a),
            ExprKind::Infer(a) => self.prefix("infer ", a),
            ExprKind::Ran(a) => self.prefix("ran ", a),
            ExprKind::App(f, a) => {
                self.expr(f, 8);
                self.w(" ");
                self.expr(a, 9);
            }
            ExprKind::Lam(..) => {
                self.w("fun");
                let mut cur = e;
                while let ExprKind::Lam(p, b) = &cur.kind {
                    self.w(" ");
                    self.w(&pretty_param(p));
                    cur = b;
                }
                self.w(" -> ");
                self.expr(cur, 0);
            }
            ExprKind::Let(p, bound, rest) => {
                self.w("let ");
                let mut body = &**bound;
                if p.ty.is_none() && p.pat.as_var().is_some() && matches!(bound.kind, ExprKind::Lam(..)) {
                    self.w(&pretty_pattern(&p.pat));
                    while let ExprKind::Lam(q, b) = &body.kind {
                        self.w(" ");
                        self.w(&pretty_param(q));
                        body = b;
                    }
                } else {
                    self.w(&pretty_param(p));
                }
                self.w(" =");
                self.block(body);
                self.w(" in");
                self.nl();
                self.expr(rest, 0);
            }
            ExprKind::LetRec { name, params, body, rest } => {
                self.w("let rec ");
                self.w(name);
                for p in params {
                    self.w(" ");
                    self.w(&pretty_param(p));
                }
                self.w(" =");
                self.block(body);
                self.w(" in");
                self.nl();
                self.expr(rest, 0);
            }
            ExprKind::MLet(p, head, body) => {
                self.w("mlet ");
                self.w(&pretty_param(p));
                self.w(" = ");
                self.expr(head, 0);
                self.w(" in");
                self.nl();
                self.expr(body, 0);
            }
            ExprKind::If(c, a, b) => {
                self.w("if ");
                self.expr(c, 0);
                self.w(" then ");
                self.expr(a, 0);
                self.w(" else ");
                self.expr(b, 0);
            }
            ExprKind::Match(s, arms) => {
                self.w("match ");
                self.expr(s, 0);
                self.w(" with");
                let saved = self.indent;
                self.indent += 2;
                for (i, arm) in arms.iter().enumerate() {
                    self.nl();
                    self.w("| ");
                    self.w(&pretty_pattern(&arm.pat));
                    self.w(" -> ");
                    let last = i + 1 == arms.len();
                    self.expr(&arm.body, if last { 0 } else { 1 });
                }
                self.indent = saved;
            }
            ExprKind::Observe { binder, pred, prior } => {
                self.w("observe ");
                self.w(&pretty_param(binder));
                self.w(" => ");
                self.expr(pred, 0);
                self.w(" in ");
                self.expr(prior, 0);
            }
        }
    }

    fn prefix(&mut self, kw: &str, a: &Expr) {
        self.w(kw);
        self.expr(a, 7);
    }

    fn comma_list<'a>(&mut self, es: impl Iterator<Item = &'a Expr>) {
        for (i, x) in es.enumerate() {
            if i > 0 {
                self.w(", ");
            }
            self.expr(x, 0);
        }
    }

    fn block(&mut self, e: &Expr) {
        let saved = self.indent;
        self.indent += 2;
        if is_open(e) {
            self.nl();
        } else {
            self.w(" ");
        }
        self.expr(e, 0);
        self.indent = saved;
    }
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    fn round_trip(src: &str) {
        let e = parse(src).unwrap();
        let printed = pretty(&e);
        let again = parse(&printed).unwrap_or_else(|err| panic!("{}\n---\n{}", err, printed));
        assert_eq!(e, again, "{}", printed);
    }

    #[test]
    fn return_true() {
        assert_eq!(pretty(&parse("return true").unwrap()), "return true");
        assert_eq!(pretty(&parse("0.5").unwrap()), "0.5");
    }

    #[test]
    fn assorted_round_trips() {
        for src in [
            "mlet x = ran bernoulli(0.5) in return (not x)",
            "fun (r : real) s -> r + s * 2 - (3 - 1)",
            "match l with | [] -> 0 | x :: xs -> (match xs with | [] -> x | _ -> -x) | _ -> 1",
            "let f x y = x :: y in f 1 [2; 3]",
            "observe (fun r s -> return (r < s)) (ran dirichlet(1, 1, 1))",
            "-(f x) + (-2) * 1e-3",
            "if a = b then (1, 2) else (3, -4)",
            "let (a, b) = getParams d in lapMech(eps, a)",
            "return (a :: b) :: c",
            "(a :: b) = (c :: d)",
        ] {
            round_trip(src);
        }
    }

    #[test]
    fn non_terminating_literal_is_parenthesized() {
        let e = Expr::num(crate::scalar::ratio(1, 3));
        assert_eq!(pretty(&e), "(1 / 3)");
    }
}
