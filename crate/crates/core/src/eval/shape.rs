//! Syntactic recognizers for conjugate likelihoods and conjugate folds.

use crate::syntax::{BinOp, Expr, ExprKind, Param, Pattern, Prim};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LikelihoodFamily<'e> {
    Bernoulli,
    /// Known variance expression.
    Normal { kv: &'e Expr },
    /// Number of probability arguments (categories minus one).
    Multinomial { arity: usize },
}

/// `observe x => mlet z = ran FAM(x..) in return (d = z) in ...` with `d` free of `x` and `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodShape<'e> {
    pub family: LikelihoodFamily<'e>,
    pub datum: &'e Expr,
}

fn binder_vars(p: &Param) -> Option<Vec<&str>> {
    match &p.pat {
        Pattern::Var(x) => Some(vec![x.as_str()]),
        Pattern::Tuple(ps) => ps.iter().map(|q| q.as_var()).collect(),
        _ => None,
    }
}

fn is_var(e: &Expr, name: &str) -> bool {
    matches!(&e.kind, ExprKind::Var(x) if x == name)
}

/// Recognizes a conjugate likelihood predicate for `observe binder => pred`.
pub fn recognize_likelihood<'e>(binder: &'e Param, pred: &'e Expr) -> Option<LikelihoodShape<'e>> {
    let rs = binder_vars(binder)?;
    let ExprKind::MLet(zp, head, body) = &pred.kind else { return None };
    let z = zp.pat.as_var()?;
    let ExprKind::Ran(dist) = &head.kind else { return None };
    let ExprKind::Prim(prim, args) = &dist.kind else { return None };
    let ExprKind::Return(ret) = &body.kind else { return None };
    let ExprKind::BinOp(BinOp::Eq, l, r) = &ret.kind else { return None };
    let datum: &Expr = if is_var(r, z) {
        l
    } else if is_var(l, z) {
        r
    } else {
        return None;
    };
    let fv = datum.free_vars();
    if fv.contains(z) || rs.iter().any(|x| fv.contains(*x)) {
        return None;
    }
    let family = match prim {
        Prim::Bernoulli if rs.len() == 1 && args.len() == 1 && is_var(&args[0], rs[0]) => LikelihoodFamily::Bernoulli,
        Prim::Normal if rs.len() == 1 && args.len() == 2 && is_var(&args[0], rs[0]) => {
            let kfv = args[1].free_vars();
            if kfv.contains(z) || kfv.contains(rs[0]) {
                return None;
            }
            LikelihoodFamily::Normal { kv: &args[1] }
        }
        Prim::Multinomial if args.len() == rs.len() && args.iter().zip(&rs).all(|(a, r)| is_var(a, r)) => {
            LikelihoodFamily::Multinomial { arity: rs.len() }
        }
        _ => return None,
    };
    Some(LikelihoodShape { family, datum })
}

/// `let rec F x1 .. xk l p = match l with [] -> p | d :: ds -> observe LIK(d) (F x1 .. xk ds p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateFold<'e> {
    pub name: &'e str,
    /// Leading parameters passed through unchanged.
    pub extra_params: Vec<&'e str>,
    /// Names of the data-list and prior parameters.
    pub list_param: &'e str,
    pub prior_param: &'e str,
    pub family: LikelihoodFamily<'e>,
}

/// Recognizes a conjugate fold definition from the pieces of a `let rec`.
pub fn recognize_conjugate_fold<'e>(name: &'e str, params: &'e [Param], body: &'e Expr) -> Option<ConjugateFold<'e>> {
    let [extra @ .., lp, pp] = params else { return None };
    let (l, p) = (lp.pat.as_var()?, pp.pat.as_var()?);
    let extra: Vec<&str> = extra.iter().map(|q| q.pat.as_var()).collect::<Option<_>>()?;
    let ExprKind::Match(scrut, arms) = &body.kind else { return None };
    if !is_var(scrut, l) || arms.len() != 2 {
        return None;
    }
    let (nil, cons) = match (&arms[0].pat, &arms[1].pat) {
        (Pattern::Nil, Pattern::Cons(..)) => (&arms[0], &arms[1]),
        (Pattern::Cons(..), Pattern::Nil) => (&arms[1], &arms[0]),
        _ => return None,
    };
    if !is_var(&nil.body, p) {
        return None;
    }
    let Pattern::Cons(h, t) = &cons.pat else { return None };
    let (d, ds) = (h.as_var()?, t.as_var()?);
    let ExprKind::Observe { binder, pred, prior } = &cons.body.kind else { return None };
    let shape = recognize_likelihood(binder, pred)?;
    if !is_var(shape.datum, d) {
        return None;
    }
    if let LikelihoodFamily::Normal { kv } = shape.family {
        let fv = kv.free_vars();
        if fv.contains(l) || fv.contains(d) || fv.contains(ds) || fv.contains(name) {
            return None;
        }
    }
    let (f, args) = prior.spine();
    let k = extra.len();
    if !is_var(f, name) || args.len() != k + 2 || !is_var(args[k], ds) || !is_var(args[k + 1], p) {
        return None;
    }
    if extra.iter().zip(&args).any(|(x, a)| !is_var(a, x)) {
        return None;
    }
    Some(ConjugateFold { name, extra_params: extra, list_param: l, prior_param: p, family: shape.family })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn observe_parts(src: &str) -> Expr {
        parse(src).unwrap()
    }

    #[test]
    fn bernoulli_likelihood() {
        let e = observe_parts("observe (fun r -> mlet z = ran bernoulli(r) in return (d = z)) prior");
        let ExprKind::Observe { binder, pred, .. } = &e.kind else { panic!() };
        let s = recognize_likelihood(binder, pred).unwrap();
        assert_eq!(s.family, LikelihoodFamily::Bernoulli);
        assert!(is_var(s.datum, "d"));
    }

    #[test]
    fn rejects_datum_mentioning_binder() {
        let e = observe_parts("observe (fun r -> mlet z = ran bernoulli(r) in return (r = z)) prior");
        let ExprKind::Observe { binder, pred, .. } = &e.kind else { panic!() };
        assert!(recognize_likelihood(binder, pred).is_none());
    }

    #[test]
    fn multinomial_tuple_binder() {
        let e = observe_parts("observe (fun r s -> mlet z = ran multinomial(r, s) in return (d = z)) prior");
        let ExprKind::Observe { binder, pred, .. } = &e.kind else { panic!() };
        assert_eq!(recognize_likelihood(binder, pred).unwrap().family, LikelihoodFamily::Multinomial { arity: 2 });
    }

    #[test]
    fn fold_definition() {
        let e = parse(
            "let rec learnMean dbn prior = match dbn with
               | [] -> prior
               | d :: dbs -> observe (fun (r : real) -> mlet z = ran normal(r, kv) in return (d = z)) (learnMean dbs prior)
             in learnMean",
        )
        .unwrap();
        let ExprKind::LetRec { name, params, body, .. } = &e.kind else { panic!() };
        let f = recognize_conjugate_fold(name, params, body).unwrap();
        assert_eq!((f.list_param, f.prior_param), ("dbn", "prior"));
        assert!(matches!(f.family, LikelihoodFamily::Normal { .. }));
    }

    #[test]
    fn fold_with_pass_through_parameter() {
        let src = "let rec learnMean kv dbn prior = match dbn with
               | [] -> prior
               | d :: dbs -> observe (fun r -> mlet z = ran normal(r, kv) in return (d = z)) (learnMean kv dbs prior)
             in learnMean";
        let e = parse(src).unwrap();
        let ExprKind::LetRec { name, params, body, .. } = &e.kind else { panic!() };
        let f = recognize_conjugate_fold(name, params, body).unwrap();
        assert_eq!(f.extra_params, vec!["kv"]);
        let swapped = parse(&src.replace("(learnMean kv dbs prior)", "(learnMean prior dbs prior)")).unwrap();
        let ExprKind::LetRec { name, params, body, .. } = &swapped.kind else { panic!() };
        assert!(recognize_conjugate_fold(name, params, body).is_none());
    }
}
