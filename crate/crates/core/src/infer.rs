//! Exact inference back-end for `infer`: conjugate updates on symbolic priors, a gated
//! grid-fitting fallback, and parameter extraction.

use std::cmp::Ordering;

use crate::dist::{discretize, fdiv, Cell, Dist, FDivKind, Grid, GridPoint, SymDist, SymDistError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InferError {
    #[error("no family matches the posterior: {0}")]
    NoFamilyMatch(String),
    #[error("{0} has no closed-form mean")]
    NoMean(String),
    #[error(transparent)]
    Dist(#[from] SymDistError),
}

/// Families `alg_inf` can fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Bernoulli,
    Beta,
    Normal,
    Dirichlet,
    Multinomial,
}

/// Likelihood of a single observation given the latent parameter.
#[derive(Debug, Clone, PartialEq)]
pub enum Likelihood<P> {
    /// `z ~ bernoulli(r)`
    Bernoulli,
    /// `z ~ normal(r, kv)` with known variance `kv`.
    Normal { kv: P },
    /// `z ~ multinomial(r1, .., r_{k-1})`
    Multinomial,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Datum<P> {
    Bool(bool),
    Real(P),
    Index(u32),
}

/// Posterior after one observation, when `prior` is conjugate to `lik`.
pub fn conjugate_update<P: Scalar>(prior: &SymDist<P>, lik: &Likelihood<P>, d: &Datum<P>) -> Option<SymDist<P>> {
    match (prior.canonical(), lik, d) {
        (SymDist::Beta(a, b), Likelihood::Bernoulli, Datum::Bool(t)) => {
            Some(if *t { SymDist::Beta(a + P::one(), b) } else { SymDist::Beta(a, b + P::one()) })
        }
        (SymDist::Dirichlet(mut alpha), Likelihood::Multinomial, Datum::Index(i)) => {
            let slot = alpha.get_mut(*i as usize)?;
            *slot = slot.clone() + P::one();
            Some(SymDist::Dirichlet(alpha))
        }
        (SymDist::Normal(hm, hv), Likelihood::Normal { kv }, Datum::Real(x)) => {
            let uk = P::one() / (P::one() / hv.clone() + P::one() / kv.clone());
            let m = uk.clone() * (hm / hv + x.clone() / kv.clone());
            Some(SymDist::Normal(m, uk))
        }
        _ => None,
    }
}

/// Folds `conjugate_update` over the data, last element first (the order `observe` applies them).
pub fn conjugate_posterior<P: Scalar>(prior: &SymDist<P>, lik: &Likelihood<P>, data: &[Datum<P>]) -> Option<SymDist<P>> {
    data.iter().rev().try_fold(prior.clone(), |acc, d| conjugate_update(&acc, lik, d))
}

/// Posterior variance `(1/hV + n/kv)^{-1}` of the normal-normal model after `n` observations.
pub fn normal_posterior_variance(hv: f64, kv: f64, n: usize) -> f64 {
    1.0 / (1.0 / hv + n as f64 / kv)
}

/// Parameters in declaration order. `Uniform` reports as `Beta(1,1)`.
pub fn get_params<P: Scalar>(s: &SymDist<P>) -> Vec<P> {
    s.canonical().params()
}

pub fn get_mean<P: Scalar>(s: &SymDist<P>) -> Result<P, InferError> {
    match s {
        SymDist::Beta(..) | SymDist::Uniform | SymDist::Normal(..) | SymDist::Bernoulli(_) => Ok(s.mean().unwrap()),
        other => Err(InferError::NoMean(other.family().to_string())),
    }
}

/// Residual gate for the grid path, in statistical distance.
pub const FIT_TOLERANCE: f64 = 1e-3;

/// Maps a grid posterior back to a symbolic distribution.
///
/// Booleans and finite indices are read off exactly. Cell-valued posteriors are fitted
/// (moment start, least-squares refinement) and rejected when the fitted family, discretized
/// on the same cells, is further than [`FIT_TOLERANCE`] in statistical distance.
pub fn alg_inf<P: Scalar>(mu: &Dist<GridPoint<P>, P>, hint: Option<Family>) -> Result<SymDist<P>, InferError> {
    let first = mu.support().next().ok_or_else(|| InferError::NoFamilyMatch("empty distribution".into()))?;
    match first {
        GridPoint::Bool(_) => {
            check_hint(hint, &[Family::Bernoulli])?;
            Ok(SymDist::Bernoulli(mu.mass(&GridPoint::Bool(true))))
        }
        GridPoint::Index(_) => {
            check_hint(hint, &[Family::Multinomial])?;
            let k = mu.support().filter_map(|g| if let GridPoint::Index(i) = g { Some(*i) } else { None }).max().unwrap_or(0) as usize + 1;
            let k = k.max(2);
            Ok(SymDist::Multinomial((0..k as u32 - 1).map(|i| mu.mass(&GridPoint::Index(i))).collect()))
        }
        GridPoint::Real(_) => {
            let cells: Vec<(Cell<f64>, f64)> = mu
                .iter()
                .map(|(g, p)| match g {
                    GridPoint::Real(c) => Ok((cell_f64(c), p.to_f64_lossy())),
                    _ => Err(InferError::NoFamilyMatch("mixed support".into())),
                })
                .collect::<Result<_, _>>()?;
            let in_unit = cells.iter().all(|(c, _)| c.lo >= -1e-12 && c.hi <= 1.0 + 1e-12);
            let fam = match hint {
                Some(f @ (Family::Beta | Family::Normal)) => f,
                Some(f) => return Err(InferError::NoFamilyMatch(format!("{:?} cannot describe a real-valued posterior", f))),
                None if in_unit => Family::Beta,
                None => Family::Normal,
            };
            let fitted = if fam == Family::Beta { fit_beta(&cells)? } else { fit_normal(&cells)? };
            Ok(fitted.convert())
        }
        GridPoint::Vector(v) => {
            check_hint(hint, &[Family::Dirichlet])?;
            let dim = v.len();
            let pts: Vec<(Vec<f64>, f64)> = mu
                .iter()
                .map(|(g, p)| match g {
                    GridPoint::Vector(cs) if cs.len() == dim => Ok((cs.iter().map(|c| c.rep.to_f64_lossy()).collect(), p.to_f64_lossy())),
                    _ => Err(InferError::NoFamilyMatch("mixed support".into())),
                })
                .collect::<Result<_, _>>()?;
            let n = simplex_resolution(mu);
            Ok(fit_dirichlet(&pts, n)?.convert())
        }
    }
}

fn check_hint(hint: Option<Family>, ok: &[Family]) -> Result<(), InferError> {
    match hint {
        Some(h) if !ok.contains(&h) => Err(InferError::NoFamilyMatch(format!("{:?} does not match the support", h))),
        _ => Ok(()),
    }
}

fn cell_f64<P: Scalar>(c: &Cell<P>) -> Cell<f64> {
    Cell { rep: c.rep.to_f64_lossy(), lo: c.lo.to_f64_lossy(), hi: c.hi.to_f64_lossy() }
}

trait ConvertSym {
    fn convert<Q: Scalar>(&self) -> SymDist<Q>;
}

impl ConvertSym for SymDist<f64> {
    fn convert<Q: Scalar>(&self) -> SymDist<Q> {
        let c = |x: &f64| Q::from_f64_lossy(*x);
        match self {
            SymDist::Bernoulli(p) => SymDist::Bernoulli(c(p)),
            SymDist::Beta(a, b) => SymDist::Beta(c(a), c(b)),
            SymDist::Normal(a, b) => SymDist::Normal(c(a), c(b)),
            SymDist::Uniform => SymDist::Uniform,
            SymDist::Dirichlet(v) => SymDist::Dirichlet(v.iter().map(c).collect()),
            SymDist::Multinomial(v) => SymDist::Multinomial(v.iter().map(c).collect()),
        }
    }
}

fn moments(cells: &[(Cell<f64>, f64)]) -> (f64, f64) {
    let m: f64 = cells.iter().map(|(c, p)| c.rep * p).sum();
    let v: f64 = cells.iter().map(|(c, p)| (c.rep - m).powi(2) * p).sum();
    (m, v)
}

/// Statistical distance between the target cells and `cand` discretized on the same cells.
fn residual_on_cells(cells: &[(Cell<f64>, f64)], log_density: impl Fn(f64) -> f64) -> f64 {
    let lw: Vec<f64> = cells.iter().map(|(c, _)| log_density(c.rep)).collect();
    let max = lw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return f64::INFINITY;
    }
    let w: Vec<f64> = lw.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    0.5 * cells.iter().zip(&w).map(|((_, p), q)| (p - q / total).abs()).sum::<f64>()
}

fn fit_beta(cells: &[(Cell<f64>, f64)]) -> Result<SymDist<f64>, InferError> {
    let (m, v) = moments(cells);
    // Sheppard-corrected variance of the binned pmf
    let h = cells.first().map(|(c, _)| c.hi - c.lo).unwrap_or(0.0);
    let v = (v - h * h / 12.0).max(1e-300);
    let common = m * (1.0 - m) / v - 1.0;
    if !(common > 0.0) || !(m > 0.0 && m < 1.0) {
        return Err(InferError::NoFamilyMatch(format!("moments (mean {}, variance {}) admit no beta", m, v)));
    }
    let start = [(m * common).ln(), ((1.0 - m) * common).ln()];
    let obj = |x: &[f64]| {
        let (a, b) = (x[0].exp(), x[1].exp());
        residual_on_cells(cells, |t| (a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln())
    };
    let (best, res) = nelder_mead(&obj, &start, 0.05, 400);
    gate(res, SymDist::Beta(best[0].exp(), best[1].exp()))
}

fn fit_normal(cells: &[(Cell<f64>, f64)]) -> Result<SymDist<f64>, InferError> {
    let (m, v) = moments(cells);
    let h = cells.first().map(|(c, _)| c.hi - c.lo).unwrap_or(0.0);
    let v = (v - h * h / 12.0).max(1e-300);
    let obj = |x: &[f64]| {
        let (mm, vv) = (x[0], x[1].exp());
        residual_on_cells(cells, |t| -(t - mm).powi(2) / (2.0 * vv))
    };
    let (best, res) = nelder_mead(&obj, &[m, v.ln()], 0.05 * v.sqrt().max(1e-6), 400);
    gate(res, SymDist::Normal(best[0], best[1].exp()))
}

fn simplex_resolution<P: Scalar>(mu: &Dist<GridPoint<P>, P>) -> usize {
    mu.support()
        .find_map(|g| match g {
            GridPoint::Vector(cs) => cs.first().map(|c| {
                let w = (c.hi.clone() - c.lo.clone()).to_f64_lossy();
                (1.0 / w).round() as usize
            }),
            _ => None,
        })
        .unwrap_or(2)
}

fn fit_dirichlet(pts: &[(Vec<f64>, f64)], n: usize) -> Result<SymDist<f64>, InferError> {
    let dim = pts.first().map(|p| p.0.len()).unwrap_or(0);
    if dim != 2 && dim != 1 {
        return Err(InferError::NoFamilyMatch(format!("dirichlet over {} coordinates", dim + 1)));
    }
    let k = dim + 1;
    let mut mean = vec![0.0; k];
    let mut m2 = 0.0;
    for (x, p) in pts {
        let last = 1.0 - x.iter().sum::<f64>();
        for (i, xi) in x.iter().chain(std::iter::once(&last)).enumerate() {
            mean[i] += p * xi;
        }
        m2 += p * x[0] * x[0];
    }
    let var0 = m2 - mean[0] * mean[0];
    let s = mean[0] * (1.0 - mean[0]) / var0 - 1.0;
    if !(s > 0.0) {
        return Err(InferError::NoFamilyMatch("moments admit no dirichlet".into()));
    }
    let start: Vec<f64> = mean.iter().map(|m| (m * s).max(1e-6).ln()).collect();
    let grid = if k == 2 { Grid::Unit { n } } else { Grid::Simplex { n } };
    let target: Dist<Vec<i64>, f64> = Dist::normalized(pts.iter().map(|(x, p)| (key(x, n), *p))).map_err(|e| InferError::NoFamilyMatch(e.to_string()))?;
    let obj = |x: &[f64]| {
        let alpha: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        match discretize(&SymDist::Dirichlet(alpha), &grid) {
            Ok(d) => {
                let d: Dist<Vec<i64>, f64> = d.map(|g| match g {
                    GridPoint::Vector(cs) => key(&cs.iter().map(|c| c.rep).collect::<Vec<_>>(), n),
                    _ => vec![],
                });
                fdiv(FDivKind::SD, &target, &d)
            }
            Err(_) => f64::INFINITY,
        }
    };
    let (best, res) = nelder_mead(&obj, &start, 0.05, 200);
    gate(res, SymDist::Dirichlet(best.iter().map(|v| v.exp()).collect()))
}

fn key(x: &[f64], n: usize) -> Vec<i64> {
    x.iter().map(|v| (v * n as f64 * 6.0).round() as i64).collect()
}

fn gate(res: f64, s: SymDist<f64>) -> Result<SymDist<f64>, InferError> {
    if res <= FIT_TOLERANCE {
        Ok(s)
    } else {
        Err(InferError::NoFamilyMatch(format!("best fit {} leaves residual {:.3e} > {:e}", s, res, FIT_TOLERANCE)))
    }
}

/// Minimal Nelder-Mead simplex search.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, start: &[f64], step: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), f(start)));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += step;
        let fx = f(&x);
        simplex.push((x, fx));
    }
    let cmp = |a: &(Vec<f64>, f64), b: &(Vec<f64>, f64)| a.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal);
    for _ in 0..iters {
        simplex.sort_by(cmp);
        if (simplex[n].1 - simplex[0].1).abs() < 1e-14 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n].0[j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let xc = along(0.5);
            let fc = f(&xc);
            if fc < simplex[n].1 {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = (0..n).map(|j| best[j] + 0.5 * (p.0[j] - best[j])).collect();
                    *p = (x.clone(), f(&x));
                }
            }
        }
    }
    simplex.sort_by(cmp);
    simplex.swap_remove(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;
    use num_rational::BigRational;

    #[test]
    fn beta_bernoulli_update() {
        let post = conjugate_posterior(&SymDist::Beta(1.0, 1.0), &Likelihood::Bernoulli, &[Datum::Bool(true)]).unwrap();
        assert_eq!(post, SymDist::Beta(2.0, 1.0));
        let post = conjugate_posterior(&SymDist::Uniform, &Likelihood::Bernoulli, &[Datum::Bool(false), Datum::Bool(false)]).unwrap();
        assert_eq!(post, SymDist::Beta(1.0, 3.0));
    }

    #[test]
    fn dirichlet_counts() {
        let data = [Datum::Index(0), Datum::Index(2), Datum::Index(0)];
        let post = conjugate_posterior(&SymDist::Dirichlet(vec![1.0, 1.0, 1.0]), &Likelihood::Multinomial, &data).unwrap();
        assert_eq!(post, SymDist::Dirichlet(vec![3.0, 1.0, 2.0]));
    }

    #[test]
    fn normal_update_is_exact() {
        type Q = BigRational;
        let one = Q::from_integer(1.into());
        let lik = Likelihood::Normal { kv: one.clone() };
        let post = conjugate_posterior(&SymDist::Normal(Q::from_integer(0.into()), one.clone()), &lik, &[Datum::Real(one)]).unwrap();
        assert_eq!(post, SymDist::Normal(ratio(1, 2), ratio(1, 2)));
    }

    #[test]
    fn normal_update_order_free() {
        let lik = Likelihood::Normal { kv: 2.0 };
        let data: Vec<Datum<f64>> = [0.5, -1.0, 3.0].iter().map(|x| Datum::Real(*x)).collect();
        let rev: Vec<Datum<f64>> = data.iter().rev().cloned().collect();
        let a = conjugate_posterior(&SymDist::Normal(0.0, 4.0), &lik, &data).unwrap();
        let b = conjugate_posterior(&SymDist::Normal(0.0, 4.0), &lik, &rev).unwrap();
        let (pa, pb) = (a.params(), b.params());
        assert!((pa[0] - pb[0]).abs() < 1e-12 && (pa[1] - pb[1]).abs() < 1e-12);
        assert!((pa[1] - normal_posterior_variance(4.0, 2.0, 3)).abs() < 1e-12);
    }

    #[test]
    fn params_and_means() {
        assert_eq!(get_params(&SymDist::Beta(3.0, 2.0)), vec![3.0, 2.0]);
        assert_eq!(get_mean(&SymDist::Normal(1.5, 0.7)).unwrap(), 1.5);
        assert_eq!(get_mean(&SymDist::Beta(ratio(2, 1), ratio(1, 1))).unwrap(), ratio(2, 3));
        assert!(get_mean(&SymDist::Dirichlet(vec![1.0, 1.0, 1.0])).is_err());
    }

    #[test]
    fn grid_fit_recovers_beta() {
        let d = discretize(&SymDist::Beta(2.0f64, 5.0), &Grid::Unit { n: 1000 }).unwrap();
        match alg_inf(&d, None).unwrap() {
            SymDist::Beta(a, b) => assert!((a - 2.0).abs() < 1e-2 && (b - 5.0).abs() < 1e-2, "{} {}", a, b),
            other => panic!("{}", other),
        }
    }

    #[test]
    fn grid_fit_recovers_normal() {
        let d = discretize(&SymDist::Normal(1.0f64, 0.25), &Grid::normal_lattice(1.0, 0.25, 400)).unwrap();
        match alg_inf(&d, Some(Family::Normal)).unwrap() {
            SymDist::Normal(m, v) => assert!((m - 1.0).abs() < 1e-3 && (v - 0.25).abs() < 1e-3, "{} {}", m, v),
            other => panic!("{}", other),
        }
    }

    #[test]
    fn grid_fit_recovers_dirichlet() {
        let d = discretize(&SymDist::Dirichlet(vec![3.0f64, 1.0, 2.0]), &Grid::Simplex { n: 60 }).unwrap();
        match alg_inf(&d, None).unwrap() {
            SymDist::Dirichlet(a) => {
                for (x, y) in a.iter().zip([3.0, 1.0, 2.0]) {
                    assert!((x - y).abs() < 0.1, "{:?}", a);
                }
            }
            other => panic!("{}", other),
        }
    }

    #[test]
    fn bimodal_is_rejected() {
        let pts = (0..100).map(|i| {
            let c = Cell { rep: (i as f64 + 0.5) / 100.0, lo: i as f64 / 100.0, hi: (i + 1) as f64 / 100.0 };
            let w = if i < 10 || i >= 90 { 1.0 } else { 0.01 };
            (GridPoint::Real(c), w)
        });
        let d = Dist::normalized(pts).unwrap();
        assert!(matches!(alg_inf(&d, None), Err(InferError::NoFamilyMatch(_))));
    }

    #[test]
    fn finite_supports_are_exact() {
        let d = Dist::from_pairs(vec![(GridPoint::<f64>::Bool(true), 0.3), (GridPoint::Bool(false), 0.7)]).unwrap();
        assert_eq!(alg_inf(&d, None).unwrap(), SymDist::Bernoulli(0.3));
    }
}
