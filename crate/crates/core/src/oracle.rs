//! Brute-force minimization over simplex grids and parameter grids.

use serde::Serialize;

use crate::divergence::{divergence, DivergenceKind};
use crate::error::{Error, Result};
use crate::estimate::{likelihood_of, Estimator, EstimatorKind};
use crate::family::{FamilySpec, LinearFamilySpec};
use crate::measures::{Alpha, Distribution, SampleData};

/// Points `c / d` for every composition `c` of `d` into `m` nonnegative parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimplexGrid {
    pub m: usize,
    pub resolution: usize,
    pub interior_only: bool,
}

impl SimplexGrid {
    pub fn new(m: usize, resolution: usize) -> Result<Self> {
        if m < 2 || resolution == 0 {
            return Err(Error::Input("simplex grid needs m >= 2 and d >= 1".into()));
        }
        Ok(Self { m, resolution, interior_only: false })
    }

    pub fn interior(mut self) -> Self {
        self.interior_only = true;
        self
    }

    /// Integer compositions in lexicographic order.
    pub fn compositions(&self) -> Vec<Vec<usize>> {
        fn rec(m: usize, left: usize, min: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == m - 1 {
                if left >= min {
                    cur.push(left);
                    out.push(cur.clone());
                    cur.pop();
                }
                return;
            }
            for c in min..=left {
                cur.push(c);
                rec(m, left - c, min, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        let min = usize::from(self.interior_only);
        rec(self.m, self.resolution, min, &mut Vec::with_capacity(self.m), &mut out);
        out
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        let d = self.resolution as f64;
        self.compositions().into_iter().map(move |c| c.into_iter().map(|v| v as f64 / d).collect())
    }

    /// `C(d + m - 1, m - 1)` (without the interior restriction).
    pub fn full_count(&self) -> u128 {
        binomial((self.resolution + self.m - 1) as u128, (self.m - 1) as u128)
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardOracle {
    pub p_best: Vec<f64>,
    pub value: f64,
    pub feasible_points: usize,
}

/// Exhaustive `argmin_P D(P, Q)` over grid points within `0.5/d` of the
/// constraint set; the first lowest point wins.
pub fn grid_forward_min(
    kind: DivergenceKind,
    alpha: Alpha,
    q: &Distribution,
    constraint: Option<&LinearFamilySpec>,
    grid: &SimplexGrid,
) -> Result<ForwardOracle> {
    if grid.m != q.len() {
        return Err(Error::Dimension("grid and reference differ in length".into()));
    }
    let band = 0.5 / grid.resolution as f64;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut feasible = 0;
    for p in grid.points() {
        if let Some(l) = constraint {
            if l.constraint_residual(&p).iter().any(|r| r.abs() > band) {
                continue;
            }
        }
        feasible += 1;
        let Ok(pd) = Distribution::new(p.clone()) else {
            continue;
        };
        let Ok(v) = divergence(kind, &pd, q, alpha) else {
            continue;
        };
        if !v.is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((p, v));
        }
    }
    let (p_best, value) = best.ok_or(Error::EmptyFeasibleGrid)?;
    Ok(ForwardOracle { p_best, value, feasible_points: feasible })
}

/// Axis-aligned box of parameters with a common step.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub step: f64,
}

impl ThetaGrid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, step: f64) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Dimension("grid bounds differ in length".into()));
        }
        if step.is_nan() || step <= 0.0 || lo.iter().zip(&hi).any(|(l, h)| h.is_nan() || l.is_nan() || h < l) {
            return Err(Error::Input("grid needs step > 0 and lo <= hi".into()));
        }
        Ok(Self { lo, hi, step })
    }

    /// Symmetric box `[-r, r]^k`.
    pub fn cube(k: usize, r: f64, step: f64) -> Result<Self> {
        Self::new(vec![-r; k], vec![r; k], step)
    }

    fn counts(&self) -> Vec<usize> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| ((h - l) / self.step + 1e-9).floor() as usize + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `idx` in lexicographic order (first coordinate slowest).
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let counts = self.counts();
        let mut rem = idx;
        let mut out = vec![0.0; counts.len()];
        for i in (0..counts.len()).rev() {
            out[i] = self.lo[i] + (rem % counts[i]) as f64 * self.step;
            rem /= counts[i];
        }
        out
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

/// Estimator whose likelihood is the matched counterpart of `kind`.
pub fn matched_estimator(kind: DivergenceKind, alpha: Alpha) -> Estimator {
    let est = match kind {
        DivergenceKind::Kl => EstimatorKind::Mle,
        DivergenceKind::Renyi => EstimatorKind::Hellinger,
        DivergenceKind::DensityPower => EstimatorKind::Basu,
        DivergenceKind::RelAlphaEntropy => EstimatorKind::Jones,
    };
    Estimator::new(est, alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReverseOracle {
    pub theta_best: Vec<f64>,
    pub value: f64,
    pub index: usize,
    /// Grid index maximizing the matched likelihood.
    pub likelihood_index: usize,
    pub admissible_points: usize,
}

impl ReverseOracle {
    pub fn consistent(&self) -> bool {
        self.index == self.likelihood_index
    }
}

/// Exhaustive `argmin_theta D(P^, P_theta)` over admissible grid points,
/// alongside the argmax of the matched likelihood.
pub fn grid_reverse_min(
    kind: DivergenceKind,
    alpha: Alpha,
    sample: &SampleData,
    spec: &FamilySpec,
    grid: &ThetaGrid,
) -> Result<ReverseOracle> {
    if grid.lo.len() != spec.k() {
        return Err(Error::Dimension("grid dimension differs from family".into()));
    }
    let p_hat = sample.empirical();
    let est = matched_estimator(kind, alpha);
    let mut best: Option<(usize, f64)> = None;
    let mut best_lik: Option<(usize, f64)> = None;
    let mut admissible = 0;
    for (idx, theta) in grid.points().enumerate() {
        let Ok(member) = spec.eval_member(&theta) else {
            continue;
        };
        let Ok(v) = divergence(kind, p_hat, &member.dist, alpha) else {
            continue;
        };
        if !v.is_finite() {
            continue;
        }
        admissible += 1;
        if best.is_none_or(|(_, bv)| v < bv) {
            best = Some((idx, v));
        }
        let l = likelihood_of(est, p_hat.probs(), member.dist.probs());
        if best_lik.is_none_or(|(_, bl)| l > bl) {
            best_lik = Some((idx, l));
        }
    }
    let (index, value) = best.ok_or(Error::NoAdmissibleTheta)?;
    let (likelihood_index, _) = best_lik.ok_or(Error::NoAdmissibleTheta)?;
    Ok(ReverseOracle { theta_best: grid.point(index), value, index, likelihood_index, admissible_points: admissible })
}
