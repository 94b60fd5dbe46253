//! Laplace, Gaussian and exponential mechanisms as output distributions.

use std::fmt;

use crate::dist::{normal_cdf, Cell, Dist, Grid};
use crate::scalar::{neumaier_sum, Scalar};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MechError {
    #[error("{0} must be positive, got {1}")]
    NonPositive(&'static str, String),
    #[error("the exponential mechanism needs at least one candidate output")]
    EmptyOutputs,
    #[error("score {0} is not finite")]
    NonFiniteScore(String),
    #[error("no mass left after discretization")]
    Degenerate,
}

/// A window of the lattice `{k / cells_per_unit}`: cells `[k/c, (k+1)/c)` for `k_lo <= k < k_hi`.
///
/// Windows built for different centres share cell boundaries, so outputs of two runs
/// are directly comparable cell by cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub k_lo: i64,
    pub k_hi: i64,
    pub cells_per_unit: u32,
}

impl Window {
    /// Smallest lattice window covering `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64, cells_per_unit: u32) -> Window {
        let c = cells_per_unit as f64;
        let k_lo = (lo * c).floor() as i64;
        let mut k_hi = (hi * c).ceil() as i64;
        if k_hi <= k_lo {
            k_hi = k_lo + 1;
        }
        Window { k_lo, k_hi, cells_per_unit }
    }

    /// Window for the Laplace mechanism: `x +- 12/eps`.
    pub fn laplace(x: f64, eps: f64, cells_per_unit: u32) -> Window {
        let r = 12.0 / eps;
        Window::covering(x - r, x + r, cells_per_unit)
    }

    /// Window for the Gaussian mechanism: `x +- 8 sigma`.
    pub fn gauss(x: f64, sigma: f64, cells_per_unit: u32) -> Window {
        Window::covering(x - 8.0 * sigma, x + 8.0 * sigma, cells_per_unit)
    }

    pub fn len(&self) -> usize {
        (self.k_hi - self.k_lo) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.k_hi <= self.k_lo
    }

    pub fn width(&self) -> f64 {
        1.0 / self.cells_per_unit as f64
    }

    pub fn lo(&self) -> f64 {
        self.k_lo as f64 / self.cells_per_unit as f64
    }

    pub fn hi(&self) -> f64 {
        self.k_hi as f64 / self.cells_per_unit as f64
    }

    pub fn to_grid(&self) -> Grid {
        Grid::Real { lo: self.lo(), hi: self.hi(), n: self.len() }
    }

    /// Cell `k` with exact lattice bounds.
    pub fn cell<P: Scalar>(&self, k: i64) -> Cell<P> {
        let c = P::from_u32(self.cells_per_unit).unwrap();
        let two = P::one() + P::one();
        let lo = P::from_i64(k).unwrap() / c.clone();
        let hi = P::from_i64(k + 1).unwrap() / c.clone();
        let rep = P::from_i64(2 * k + 1).unwrap() / (two * c);
        Cell { rep, lo, hi }
    }

    /// Offsets `(a - x, b - x)` of every cell relative to `x`. Exact lattice arithmetic
    /// when `x` itself lies on the lattice, so translated inputs give bit-identical offsets.
    fn offsets(&self, x: f64) -> Vec<(f64, f64)> {
        let c = self.cells_per_unit as f64;
        let kx = x * c;
        let aligned = kx.fract() == 0.0 && kx.abs() < 9.0e15;
        (self.k_lo..self.k_hi)
            .map(|k| {
                if aligned {
                    let j = k - kx as i64;
                    (j as f64 / c, (j + 1) as f64 / c)
                } else {
                    (k as f64 / c - x, (k + 1) as f64 / c - x)
                }
            })
            .collect()
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}) in {} cells of width 1/{}", self.lo(), self.hi(), self.len(), self.cells_per_unit)
    }
}

/// Builds the cell distribution from per-cell masses plus the two folded tails.
fn cells_to_dist<P: Scalar>(w: &Window, mut masses: Vec<f64>, left_tail: f64, right_tail: f64) -> Result<Dist<Cell<P>, P>, MechError> {
    if let Some(first) = masses.first_mut() {
        *first += left_tail;
    }
    if let Some(last) = masses.last_mut() {
        *last += right_tail;
    }
    let total = neumaier_sum(masses.iter().copied());
    if !(total > 0.0) {
        return Err(MechError::Degenerate);
    }
    let pairs = (w.k_lo..w.k_hi).zip(masses).filter(|(_, m)| *m > 0.0).map(|(k, m)| (w.cell::<P>(k), P::from_f64_lossy(m / total)));
    Dist::normalized(pairs).map_err(|_| MechError::Degenerate)
}

/// Laplace mechanism `x + Lap(1/eps)` binned on `w`. Per-cell masses come from CDF
/// differences; the mass outside the window is folded into the end cells.
pub fn laplace_mech<P: Scalar>(eps: &P, x: &P, w: &Window) -> Result<Dist<Cell<P>, P>, MechError> {
    let e = eps.to_f64_lossy();
    if !(e > 0.0) || !e.is_finite() {
        return Err(MechError::NonPositive("epsilon", eps.to_string()));
    }
    let xf = x.to_f64_lossy();
    if w.lo() > xf - 12.0 / e || w.hi() < xf + 12.0 / e {
        log::warn!("laplace window {} does not cover x +- 12/eps; tails folded into end cells", w);
    }
    let offs = w.offsets(xf);
    let masses = offs
        .iter()
        .map(|&(a, b)| {
            if b <= 0.0 {
                0.5 * ((e * b).exp() - (e * a).exp())
            } else if a >= 0.0 {
                0.5 * ((-e * a).exp() - (-e * b).exp())
            } else {
                1.0 - 0.5 * (e * a).exp() - 0.5 * (-e * b).exp()
            }
        })
        .collect();
    let (a0, b1) = (offs[0].0, offs[offs.len() - 1].1);
    let left = if a0 <= 0.0 { 0.5 * (e * a0).exp() } else { 1.0 - 0.5 * (-e * a0).exp() };
    let right = if b1 >= 0.0 { 0.5 * (-e * b1).exp() } else { 1.0 - 0.5 * (e * b1).exp() };
    cells_to_dist(w, masses, left, right)
}

/// Gaussian mechanism `x + N(0, sigma^2)` binned on `w`, tails folded as for Laplace.
pub fn gauss_mech<P: Scalar>(sigma: &P, x: &P, w: &Window) -> Result<Dist<Cell<P>, P>, MechError> {
    let s = sigma.to_f64_lossy();
    if !(s > 0.0) || !s.is_finite() {
        return Err(MechError::NonPositive("sigma", sigma.to_string()));
    }
    let xf = x.to_f64_lossy();
    if w.lo() > xf - 8.0 * s || w.hi() < xf + 8.0 * s {
        log::warn!("gaussian window {} does not cover x +- 8 sigma; tails folded into end cells", w);
    }
    // upper-tail form on the right half keeps precision far from the centre
    let mass = |a: f64, b: f64| {
        if a >= 0.0 {
            normal_cdf(-a / s) - normal_cdf(-b / s)
        } else {
            normal_cdf(b / s) - normal_cdf(a / s)
        }
    };
    let offs = w.offsets(xf);
    let masses = offs.iter().map(|&(a, b)| mass(a, b).max(0.0)).collect();
    let (a0, b1) = (offs[0].0, offs[offs.len() - 1].1);
    cells_to_dist(w, masses, normal_cdf(a0 / s), normal_cdf(-b1 / s))
}

/// `sqrt(2 ln(1.25/delta)) / eps`.
pub fn gauss_sigma(eps: f64, delta: f64) -> Result<f64, MechError> {
    if !(eps > 0.0) {
        return Err(MechError::NonPositive("epsilon", eps.to_string()));
    }
    if !(delta > 0.0) {
        return Err(MechError::NonPositive("delta", delta.to_string()));
    }
    Ok((2.0 * (1.25 / delta).ln()).sqrt() / eps)
}

/// Exponential mechanism over scored candidates: mass of `r` proportional to `exp(score(r) eps / 2)`.
pub fn exp_mech<V: Ord + Clone, P: Scalar>(eps: &P, scored: Vec<(V, P)>) -> Result<Dist<V, P>, MechError> {
    if scored.is_empty() {
        return Err(MechError::EmptyOutputs);
    }
    let e = eps.to_f64_lossy();
    let mut fs = Vec::with_capacity(scored.len());
    for (_, s) in &scored {
        let f = s.to_f64_lossy();
        if !f.is_finite() {
            return Err(MechError::NonFiniteScore(s.to_string()));
        }
        fs.push(f);
    }
    let max = fs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pairs = scored.into_iter().zip(fs).map(|((v, _), f)| (v, P::from_f64_lossy(((f - max) * e / 2.0).exp())));
    Dist::normalized(pairs).map_err(|_| MechError::Degenerate)
}

/// Convenience form taking the score as a function of the database and the candidate.
pub fn exp_mech_fn<D, V: Ord + Clone, P: Scalar, F: Fn(&D, &V) -> P>(eps: &P, score: F, db: &D, outputs: &[V]) -> Result<Dist<V, P>, MechError> {
    exp_mech(eps, outputs.iter().map(|r| (r.clone(), score(db, r))).collect())
}

/// Upper bound on how far the binned mechanism's eps-distance can sit above the continuous
/// one for a single invocation: `(e^{Lh} - 1) + e^eps (1 - e^{-Lh}) + tail`, where `L` is the
/// log-density Lipschitz constant on the window and `h` the cell width.
pub fn binning_slack(lipschitz: f64, h: f64, eps: f64, tail: f64) -> f64 {
    let lh = lipschitz * h;
    lh.exp_m1() + eps.exp() * (-(-lh).exp_m1()) + tail
}

/// Slack of one Laplace invocation on a window of width `w.width()` and radius `12/eps`.
pub fn laplace_slack(eps: f64, claim_eps: f64, w: &Window) -> f64 {
    binning_slack(eps, w.width(), claim_eps, (-12.0f64).exp())
}

/// Slack of one Gaussian invocation; the log-density is `8/sigma`-Lipschitz on `x +- 8 sigma`.
pub fn gauss_slack(sigma: f64, claim_eps: f64, w: &Window) -> f64 {
    binning_slack(8.0 / sigma, w.width(), claim_eps, 2.0 * normal_cdf(-8.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{fdiv, FDivKind};

    #[test]
    fn laplace_mode_and_symmetry() {
        let w = Window::laplace(0.0, 1.0, 10);
        let d = laplace_mech(&1.0f64, &0.0, &w).unwrap();
        let mode = d.mode().unwrap();
        assert!(mode.lo <= 0.0 && 0.0 < mode.hi || (mode.hi - 0.0).abs() < 1e-12);
        let total: f64 = d.masses_f64().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let pairs = d.pairs();
        let n = pairs.len();
        for i in 0..n {
            let (c, m) = &pairs[i];
            let (c2, m2) = &pairs[n - 1 - i];
            assert!((c.rep + c2.rep).abs() < 1e-12);
            assert!((m - m2).abs() < 1e-15, "{} {}", m, m2);
        }
    }

    #[test]
    fn laplace_adjacent_within_eps() {
        for cpu in [10, 20] {
            let w0 = Window::laplace(0.0, 1.0, cpu);
            let w1 = Window::laplace(1.0, 1.0, cpu);
            let union = Window { k_lo: w0.k_lo, k_hi: w1.k_hi, cells_per_unit: cpu };
            let a = laplace_mech(&1.0f64, &0.0, &union).unwrap();
            let b = laplace_mech(&1.0f64, &1.0, &union).unwrap();
            let d = fdiv(FDivKind::EpsD(1.0), &a, &b).max(fdiv(FDivKind::EpsD(1.0), &b, &a));
            assert!(d < 1e-12, "{}", d);
        }
    }

    #[test]
    fn translation_is_cell_shift() {
        let cpu = 8;
        let a = laplace_mech(&0.5f64, &0.0, &Window::laplace(0.0, 0.5, cpu)).unwrap();
        let b = laplace_mech(&0.5f64, &3.0, &Window::laplace(3.0, 0.5, cpu)).unwrap();
        assert_eq!(a.len(), b.len());
        for ((c1, m1), (c2, m2)) in a.pairs().iter().zip(b.pairs()) {
            assert!((c2.rep - c1.rep - 3.0).abs() < 1e-12);
            assert_eq!(m1, m2);
        }
    }

    #[test]
    fn gauss_sigma_formula() {
        let s = gauss_sigma(1.0, 0.05).unwrap();
        assert!((s - (2.0f64 * 25.0f64.ln()).sqrt()).abs() < 1e-15);
        assert!((s - 2.5373).abs() < 1e-4);
        assert!(gauss_sigma(0.0, 0.1).is_err());
    }

    #[test]
    fn gauss_is_symmetric() {
        let d = gauss_mech(&1.5f64, &2.0, &Window::gauss(2.0, 1.5, 10)).unwrap();
        let p = d.pairs();
        let n = p.len();
        for i in 0..n {
            assert!((p[i].0.rep - 2.0 + p[n - 1 - i].0.rep - 2.0).abs() < 1e-12);
            assert!((p[i].1 - p[n - 1 - i].1).abs() < 1e-15);
        }
    }

    #[test]
    fn exp_mech_ratio() {
        for eps in [0.1f64, 1.0, 2.0] {
            let d = exp_mech(&eps, vec![(true, 1.0), (false, 0.0)]).unwrap();
            let ratio = d.mass(&true) / d.mass(&false);
            assert!((ratio - (eps / 2.0).exp()).abs() < 1e-12);
        }
        let u = exp_mech(&1.0f64, vec![(1u8, 3.0), (2, 3.0), (3, 3.0)]).unwrap();
        assert!(u.masses_f64().iter().all(|m| (m - 1.0 / 3.0).abs() < 1e-15));
        assert_eq!(exp_mech::<u8, f64>(&1.0, vec![]), Err(MechError::EmptyOutputs));
        assert!(exp_mech(&1.0f64, vec![(1u8, f64::INFINITY)]).is_err());
    }

    #[test]
    fn slack_is_linear_in_width() {
        let w1 = Window::laplace(0.0, 1.0, 10);
        let w2 = Window::laplace(0.0, 1.0, 20);
        let (s1, s2) = (laplace_slack(1.0, 1.0, &w1), laplace_slack(1.0, 1.0, &w2));
        let r = s1 / s2;
        assert!((r - 2.0).abs() < 0.4, "{}", r);
    }
}
