use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::dist::{Cell, Dist, Grid, GridPoint, SymDist, SymDistError};
use crate::scalar::Scalar;
use crate::syntax::{Expr, Param};

/// A program real. Values drawn from a discretized distribution remember their cell.
#[derive(Debug, Clone)]
pub struct Real<P: Scalar> {
    pub val: P,
    pub cell: Option<Arc<Cell<P>>>,
}

impl<P: Scalar> Real<P> {
    pub fn plain(val: P) -> Self {
        Real { val, cell: None }
    }

    pub fn in_cell(c: Cell<P>) -> Self {
        Real { val: c.rep.clone(), cell: Some(Arc::new(c)) }
    }

    /// Program-level `=`: a plain real equals a cell-tagged one when it lies in the cell;
    /// two cell-tagged reals are equal when either representative lies in the other's cell.
    pub fn same(&self, other: &Real<P>) -> bool {
        match (&self.cell, &other.cell) {
            (None, None) => self.val.total_cmp(&other.val) == Ordering::Equal,
            (Some(c), None) => c.contains(&other.val),
            (None, Some(c)) => c.contains(&self.val),
            (Some(a), Some(b)) => a == b || a.contains(&b.rep) || b.contains(&a.rep),
        }
    }
}

impl<P: Scalar> PartialEq for Real<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P: Scalar> Eq for Real<P> {}

impl<P: Scalar> PartialOrd for Real<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P: Scalar> Ord for Real<P> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.val.total_cmp(&other.val).then_with(|| self.cell.cmp(&other.cell))
    }
}

/// Curried closure. `params` are the parameters still to be supplied.
pub struct Closure<'a, P: Scalar> {
    pub params: &'a [Param],
    pub body: &'a Expr,
    pub env: Env<'a, P>,
    /// Set on the outermost closure of a `let rec`: the name to rebind on the first application.
    pub rec_name: Option<&'a str>,
}

/// A monadic value: an explicit pmf, possibly backed by a symbolic description.
pub struct DistVal<'a, P: Scalar> {
    dist: OnceLock<Result<Dist<Value<'a, P>, P>, SymDistError>>,
    source: Option<(SymDist<P>, Option<Grid>)>,
}

impl<'a, P: Scalar> DistVal<'a, P> {
    pub fn explicit(d: Dist<Value<'a, P>, P>) -> Self {
        let cell = OnceLock::new();
        let _ = cell.set(Ok(d));
        DistVal { dist: cell, source: None }
    }

    /// The discretization of `s` on `grid`, built on first use. `grid` is `None` for the
    /// finite families.
    pub fn symbolic(s: SymDist<P>, grid: Option<Grid>) -> Self {
        DistVal { dist: OnceLock::new(), source: Some((s, grid)) }
    }

    pub fn source(&self) -> Option<&SymDist<P>> {
        self.source.as_ref().map(|(s, _)| s)
    }

    pub fn source_grid(&self) -> Option<&Grid> {
        self.source.as_ref().and_then(|(_, g)| g.as_ref())
    }

    pub fn is_materialized(&self) -> bool {
        self.dist.get().is_some()
    }

    pub fn dist(&self) -> Result<&Dist<Value<'a, P>, P>, SymDistError> {
        self.dist
            .get_or_init(|| {
                let (s, g) = self.source.as_ref().expect("a DistVal always has a pmf or a source");
                let g = g.clone().unwrap_or(Grid::Unit { n: 2 });
                Ok(crate::dist::discretize(s, &g)?.map(Value::from_grid_point))
            })
            .as_ref()
            .map_err(|e| e.clone())
    }
}

impl<'a, P: Scalar> fmt::Debug for DistVal<'a, P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Some((s, _)) => write!(f, "DistVal({})", s),
            None => write!(f, "DistVal({} points)", self.dist().map_or(0, |d| d.len())),
        }
    }
}

#[derive(Clone)]
pub enum Value<'a, P: Scalar> {
    Unit,
    Bool(bool),
    Num(Real<P>),
    List(Arc<Vec<Value<'a, P>>>),
    Tuple(Arc<Vec<Value<'a, P>>>),
    Closure(Arc<Closure<'a, P>>),
    Dist(Arc<DistVal<'a, P>>),
    Sym(Arc<SymDist<P>>),
}

impl<'a, P: Scalar> Value<'a, P> {
    pub fn num(x: P) -> Self {
        Value::Num(Real::plain(x))
    }

    pub fn list(vs: Vec<Value<'a, P>>) -> Self {
        Value::List(Arc::new(vs))
    }

    pub fn tuple(vs: Vec<Value<'a, P>>) -> Self {
        Value::Tuple(Arc::new(vs))
    }

    pub fn sym(s: SymDist<P>) -> Self {
        Value::Sym(Arc::new(s))
    }

    pub fn dist(d: Dist<Value<'a, P>, P>) -> Self {
        Value::Dist(Arc::new(DistVal::explicit(d)))
    }

    pub fn from_grid_point(g: &GridPoint<P>) -> Self {
        match g {
            GridPoint::Bool(b) => Value::Bool(*b),
            GridPoint::Index(i) => Value::num(P::from_u32(*i).unwrap()),
            GridPoint::Real(c) => Value::Num(Real::in_cell(c.clone())),
            GridPoint::Vector(cs) if cs.len() == 1 => Value::Num(Real::in_cell(cs[0].clone())),
            GridPoint::Vector(cs) => Value::tuple(cs.iter().map(|c| Value::Num(Real::in_cell(c.clone()))).collect()),
        }
    }

    /// Inverse of [`Value::from_grid_point`] on the values it produces.
    pub fn to_grid_point(&self) -> Option<GridPoint<P>> {
        match self {
            Value::Bool(b) => Some(GridPoint::Bool(*b)),
            Value::Num(Real { cell: Some(c), .. }) => Some(GridPoint::Real((**c).clone())),
            Value::Num(Real { val, cell: None }) => {
                let i = val.to_u32()?;
                (P::from_u32(i)? == *val).then_some(GridPoint::Index(i))
            }
            Value::Tuple(vs) => vs
                .iter()
                .map(|v| match v {
                    Value::Num(Real { cell: Some(c), .. }) => Some((**c).clone()),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
                .map(GridPoint::Vector),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_num(&self) -> Option<&P> {
        match self {
            Value::Num(r) => Some(&r.val),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value<'a, P>]> {
        match self {
            Value::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_sym(&self) -> Option<&SymDist<P>> {
        match self {
            Value::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_dist(&self) -> Option<&DistVal<'a, P>> {
        match self {
            Value::Dist(d) => Some(d),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Unit => "unit",
            Value::Bool(_) => "bool",
            Value::Num(_) => "number",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Closure(_) => "function",
            Value::Dist(_) => "distribution",
            Value::Sym(_) => "symbolic distribution",
        }
    }

    /// Program-level equality (cell containment for reals).
    pub fn same(&self, other: &Value<'a, P>) -> Option<bool> {
        Some(match (self, other) {
            (Value::Unit, Value::Unit) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => a.same(b),
            (Value::List(a), Value::List(b)) | (Value::Tuple(a), Value::Tuple(b)) => {
                if a.len() != b.len() {
                    return Some(false);
                }
                for (x, y) in a.iter().zip(b.iter()) {
                    if !x.same(y)? {
                        return Some(false);
                    }
                }
                true
            }
            (Value::Sym(a), Value::Sym(b)) => a == b,
            _ => return None,
        })
    }

    /// Forgets the lifetime-carrying parts; closures and monadic values have no owned form.
    pub fn to_owned_data<'b>(&self) -> Option<Value<'b, P>> {
        Some(match self {
            Value::Unit => Value::Unit,
            Value::Bool(b) => Value::Bool(*b),
            Value::Num(r) => Value::Num(r.clone()),
            Value::List(vs) => Value::list(vs.iter().map(|v| v.to_owned_data()).collect::<Option<_>>()?),
            Value::Tuple(vs) => Value::tuple(vs.iter().map(|v| v.to_owned_data()).collect::<Option<_>>()?),
            Value::Sym(s) => Value::Sym(s.clone()),
            Value::Closure(_) | Value::Dist(_) => return None,
        })
    }

    /// JSON rendering. Distributions use the `support`/`mass` form; reals drawn from a grid
    /// carry their cell as `{"rep", "lo", "hi"}`.
    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::{json, Value as J};
        let num = |x: &P| serde_json::Number::from_f64(x.to_f64_lossy()).map_or_else(|| J::String(x.to_decimal_string()), J::Number);
        match self {
            Value::Unit => J::Null,
            Value::Bool(b) => J::Bool(*b),
            Value::Num(Real { val, cell: None }) => num(val),
            Value::Num(Real { cell: Some(c), .. }) => json!({"rep": num(&c.rep), "lo": num(&c.lo), "hi": num(&c.hi)}),
            Value::List(vs) => J::Array(vs.iter().map(|v| v.to_json()).collect()),
            Value::Tuple(vs) => json!({"tuple": vs.iter().map(|v| v.to_json()).collect::<Vec<_>>()}),
            Value::Closure(_) => J::String("<fun>".into()),
            Value::Sym(s) => J::String(s.to_string()),
            Value::Dist(d) => match d.dist() {
                Ok(d) => serde_json::to_value(crate::dist::dist_to_json(d, |v| v.to_json())).unwrap_or(J::Null),
                Err(e) => json!({"error": e.to_string()}),
            },
        }
    }

    fn tag(&self) -> u8 {
        match self {
            Value::Unit => 0,
            Value::Bool(_) => 1,
            Value::Num(_) => 2,
            Value::List(_) => 3,
            Value::Tuple(_) => 4,
            Value::Sym(_) => 5,
            Value::Dist(_) => 6,
            Value::Closure(_) => 7,
        }
    }
}

impl<'a, P: Scalar> PartialEq for Value<'a, P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<'a, P: Scalar> Eq for Value<'a, P> {}

impl<'a, P: Scalar> PartialOrd for Value<'a, P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Structural order, used for distribution supports. Closures compare by identity.
impl<'a, P: Scalar> Ord for Value<'a, P> {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Unit, Value::Unit) => Ordering::Equal,
            (Value::Bool(a), Value::Bool(b)) => a.cmp(b),
            (Value::Num(a), Value::Num(b)) => a.cmp(b),
            (Value::List(a), Value::List(b)) | (Value::Tuple(a), Value::Tuple(b)) => a.iter().cmp(b.iter()),
            (Value::Sym(a), Value::Sym(b)) => a.cmp(b),
            (Value::Dist(a), Value::Dist(b)) => {
                if Arc::ptr_eq(a, b) {
                    return Ordering::Equal;
                }
                let (x, y) = match (a.dist(), b.dist()) {
                    (Ok(x), Ok(y)) => (x.pairs(), y.pairs()),
                    _ => return (Arc::as_ptr(a) as usize).cmp(&(Arc::as_ptr(b) as usize)),
                };
                for ((v1, p1), (v2, p2)) in x.iter().zip(y) {
                    let o = v1.cmp(v2).then_with(|| p1.total_cmp(p2));
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                x.len().cmp(&y.len())
            }
            (Value::Closure(a), Value::Closure(b)) => (Arc::as_ptr(a) as usize).cmp(&(Arc::as_ptr(b) as usize)),
            _ => self.tag().cmp(&other.tag()),
        }
    }
}

impl<'a, P: Scalar> fmt::Debug for Value<'a, P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl<'a, P: Scalar> fmt::Display for Value<'a, P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Bool(b) => write!(f, "{}", b),
            Value::Num(Real { val, cell: None }) => write!(f, "{}", val.to_decimal_string()),
            Value::Num(Real { cell: Some(c), .. }) => {
                write!(f, "{}@[{}, {})", c.rep.to_decimal_string(), c.lo.to_decimal_string(), c.hi.to_decimal_string())
            }
            Value::List(vs) => {
                write!(f, "[")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{}", v)?;
                }
                write!(f, "]")
            }
            Value::Tuple(vs) => {
                write!(f, "(")?;
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}", v)?;
                }
                write!(f, ")")
            }
            Value::Closure(_) => write!(f, "<fun>"),
            Value::Sym(s) => write!(f, "{}", s),
            Value::Dist(d) => {
                if let Some(s) = d.source() {
                    if !d.is_materialized() {
                        return write!(f, "ran {}", s);
                    }
                }
                let d = match d.dist() {
                    Ok(d) => d,
                    Err(e) => return write!(f, "<{}>", e),
                };
                write!(f, "{{")?;
                for (i, (v, p)) in d.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    if i == 8 {
                        return write!(f, "... {} points}}", d.len());
                    }
                    write!(f, "{} -> {}", v, p.to_decimal_string())?;
                }
                write!(f, "}}")
            }
        }
    }
}

struct EnvNode<'a, P: Scalar> {
    name: Cow<'a, str>,
    value: Value<'a, P>,
    next: Env<'a, P>,
}

/// Persistent variable environment.
pub struct Env<'a, P: Scalar>(Option<Arc<EnvNode<'a, P>>>);

impl<'a, P: Scalar> Clone for Env<'a, P> {
    fn clone(&self) -> Self {
        Env(self.0.clone())
    }
}

impl<'a, P: Scalar> Default for Env<'a, P> {
    fn default() -> Self {
        Env(None)
    }
}

impl<'a, P: Scalar> Env<'a, P> {
    pub fn bind(&self, name: impl Into<Cow<'a, str>>, value: Value<'a, P>) -> Self {
        Env(Some(Arc::new(EnvNode { name: name.into(), value, next: self.clone() })))
    }

    pub fn lookup(&self, name: &str) -> Option<&Value<'a, P>> {
        let mut cur = &self.0;
        while let Some(node) = cur {
            if node.name == name {
                return Some(&node.value);
            }
            cur = &node.next.0;
        }
        None
    }
}

/// Assignment of values to the free variables of a program.
pub type Valuation<'a, P> = BTreeMap<String, Value<'a, P>>;
