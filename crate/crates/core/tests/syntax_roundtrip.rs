use privinfer::syntax::{parse, pretty, Arm, BinOp, Expr, ExprKind, Lit, Param, Pattern, Prim, UnOp};
use privinfer::types::SimpleType;
use proptest::prelude::*;

fn num(n: i64, scale: u32) -> Lit {
    Lit::Num(privinfer::scalar::ratio(n, 10i64.pow(scale)))
}

fn name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["x", "y", "acc", "f", "db", "r2"]).prop_map(String::from)
}

fn lit() -> impl Strategy<Value = Lit> {
    prop_oneof![
        Just(Lit::Unit),
        any::<bool>().prop_map(Lit::Bool),
        (-500i64..500, 0u32..4).prop_map(|(n, s)| num(n, s)),
    ]
}

fn simple_type() -> impl Strategy<Value = SimpleType> {
    let leaf = prop_oneof![
        Just(SimpleType::Bool),
        Just(SimpleType::Real),
        Just(SimpleType::PosReal),
        Just(SimpleType::UnitInterval),
        (1u32..5).prop_map(SimpleType::Enum),
        (2usize..4).prop_map(SimpleType::unit_cube),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(SimpleType::list),
            inner.clone().prop_map(SimpleType::dist),
            inner.clone().prop_map(SimpleType::monad),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| SimpleType::arrow(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| SimpleType::Tuple(vec![a, b])),
        ]
    })
}

fn pattern() -> impl Strategy<Value = Pattern> {
    let leaf = prop_oneof![
        Just(Pattern::Wild),
        name().prop_map(Pattern::Var),
        lit().prop_map(Pattern::Lit),
        Just(Pattern::Nil),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(h, t)| Pattern::Cons(Box::new(h), Box::new(t))),
            prop::collection::vec(inner, 2..4).prop_map(Pattern::Tuple),
        ]
    })
}

fn param() -> impl Strategy<Value = Param> {
    prop_oneof![
        name().prop_map(|x| Param::var(&x)),
        Just(Param { pat: Pattern::Wild, ty: None }),
        (name(), simple_type()).prop_map(|(x, t)| Param::typed(&x, t)),
        prop::collection::vec(name(), 2..4).prop_map(|xs| Param { pat: Pattern::Tuple(xs.into_iter().map(Pattern::Var).collect()), ty: None }),
    ]
}

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        name().prop_map(|x| Expr::syn(ExprKind::Var(x))),
        lit().prop_map(|l| Expr::syn(ExprKind::Lit(l))),
        Just(Expr::syn(ExprKind::Nil)),
    ];
    leaf.prop_recursive(4, 40, 4, |e| {
        let ops = prop::sample::select(vec![
            BinOp::Add,
            BinOp::Sub,
            BinOp::Mul,
            BinOp::Div,
            BinOp::Eq,
            BinOp::Ne,
            BinOp::Lt,
            BinOp::Le,
            BinOp::Gt,
            BinOp::Ge,
            BinOp::And,
            BinOp::Or,
        ]);
        let prim = prop::sample::select(Prim::ALL.to_vec());
        prop_oneof![
            (e.clone(), e.clone()).prop_map(|(f, a)| Expr::syn(ExprKind::App(b(f), b(a)))),
            (param(), e.clone()).prop_map(|(p, x)| Expr::syn(ExprKind::Lam(p, b(x)))),
            (param(), e.clone(), e.clone()).prop_map(|(p, x, y)| Expr::syn(ExprKind::Let(p, b(x), b(y)))),
            (name(), prop::collection::vec(param(), 1..3), e.clone(), e.clone())
                .prop_map(|(n, ps, x, y)| Expr::syn(ExprKind::LetRec { name: n, params: ps, body: b(x), rest: b(y) })),
            (e.clone(), e.clone(), e.clone()).prop_map(|(c, x, y)| Expr::syn(ExprKind::If(b(c), b(x), b(y)))),
            (e.clone(), prop::collection::vec((pattern(), e.clone()), 1..4))
                .prop_map(|(s, arms)| Expr::syn(ExprKind::Match(b(s), arms.into_iter().map(|(pat, body)| Arm { pat, body }).collect()))),
            prop::collection::vec(e.clone(), 2..4).prop_map(|xs| Expr::syn(ExprKind::Tuple(xs))),
            (e.clone(), e.clone()).prop_map(|(h, t)| Expr::syn(ExprKind::Cons(b(h), b(t)))),
            (ops, e.clone(), e.clone()).prop_map(|(op, x, y)| Expr::syn(ExprKind::BinOp(op, b(x), b(y)))),
            e.clone()
                .prop_filter("negated literal folds", |x| !matches!(x.kind, ExprKind::Lit(Lit::Num(_))))
                .prop_map(|x| Expr::syn(ExprKind::UnOp(UnOp::Neg, b(x)))),
            e.clone().prop_map(|x| Expr::syn(ExprKind::UnOp(UnOp::Not, b(x)))),
            (prim, prop::collection::vec(e.clone(), 0..9)).prop_map(|(p, mut xs)| {
                let (lo, hi) = p.arity();
                while xs.len() < lo {
                    xs.push(Expr::var("x"));
                }
                xs.truncate(hi);
                Expr::syn(ExprKind::Prim(p, xs))
            }),
            e.clone().prop_map(|x| Expr::syn(ExprKind::Return(b(x)))),
            (param(), e.clone(), e.clone()).prop_map(|(p, x, y)| Expr::syn(ExprKind::MLet(p, b(x), b(y)))),
            (param(), e.clone(), e.clone()).prop_map(|(p, x, y)| Expr::syn(ExprKind::Observe { binder: p, pred: b(x), prior: b(y) })),
            e.clone().prop_map(|x| Expr::syn(ExprKind::Infer(b(x)))),
            e.prop_map(|x| Expr::syn(ExprKind::Ran(b(x)))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn random_trees_round_trip(e in expr()) {
        let text = pretty(&e);
        let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{}\n{}", err, text)))?;
        prop_assert_eq!(&back, &e, "{}", text);
        prop_assert!(back.spans_monotone(), "{}", text);
    }

    #[test]
    fn printing_is_idempotent(e in expr()) {
        let once = pretty(&e);
        let twice = pretty(&parse(&once).unwrap());
        prop_assert_eq!(once, twice);
    }
}
