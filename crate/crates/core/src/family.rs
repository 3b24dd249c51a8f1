//! Parametric families on a finite alphabet and the linear family.
//!
//! With reference measure `Q`, statistics `f` (k rows over the alphabet) and
//! `t(x) = theta^T f(x)`:
//!
//! | kind | member |
//! |------|--------|
//! | `Exponential` | `Q(x) exp(t(x)) / Z` |
//! | `AlphaPowerLaw` | `[Q^(a-1) + (1-a) t]^(1/(a-1)) / Z` |
//! | `AlphaExponential` | `[Q^(1-a) + (1-a) t]^(1/(1-a)) / Z` |
//! | `NonNormalizedAlphaPowerLaw` | `[Q^(a-1) + (1-a)(Z + t)]^(1/(a-1))` |
//!
//! For the last kind `Z` sits inside the bracket and is found by a
//! one-dimensional root search ([`FamilySpec::normalizer_root`]).

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measures::{alpha_norm, escort, Alpha, Distribution};

/// Relative singular value threshold for the rank checks.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Exponential,
    AlphaPowerLaw,
    NonNormalizedAlphaPowerLaw,
    AlphaExponential,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 4] = [
        FamilyKind::Exponential,
        FamilyKind::AlphaPowerLaw,
        FamilyKind::NonNormalizedAlphaPowerLaw,
        FamilyKind::AlphaExponential,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyKind::Exponential => "exponential",
            FamilyKind::AlphaPowerLaw => "alpha_power_law",
            FamilyKind::NonNormalizedAlphaPowerLaw => "non_normalized_alpha_power_law",
            FamilyKind::AlphaExponential => "alpha_exponential",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown family kind `{s}`")))
    }
}

/// Numerical rank with tolerance `RANK_TOL * sigma_max`.
pub(crate) fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// Evaluated family member.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub dist: Distribution,
    /// Normalizing constant; for the non-normalized kind, the root `Z(theta)`.
    pub z: f64,
    /// Bracket values `u(x)` (for the exponential kind, `log Q + t`).
    pub bracket: Vec<f64>,
}

/// Parameter vector together with its admissibility for a given family.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPoint {
    pub theta: Vec<f64>,
    pub domain_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    kind: FamilyKind,
    q: Distribution,
    f: DMatrix<f64>,
    alpha: Alpha,
}

impl FamilySpec {
    /// `f` is `k x m`: one row per statistic.
    pub fn new(kind: FamilyKind, q: Distribution, f: DMatrix<f64>, alpha: Alpha) -> Result<Self> {
        if !q.is_strict() {
            return Err(Error::InvalidFamily("reference measure must be strictly positive".into()));
        }
        let m = q.len();
        if f.ncols() != m {
            return Err(Error::Dimension(format!("statistics have {} columns, alphabet has {m} symbols", f.ncols())));
        }
        let k = f.nrows();
        if k == 0 {
            return Err(Error::InvalidFamily("need at least one statistic".into()));
        }
        if kind != FamilyKind::Exponential && alpha.is_one() {
            return Err(Error::InvalidFamily(format!("{kind} requires alpha != 1")));
        }
        if rank(&f) != k {
            return Err(Error::InvalidFamily("statistic rows are linearly dependent".into()));
        }
        let spec = Self { kind, q, f, alpha };
        let aug = spec.identifiability_matrix();
        if rank(&aug) != k + 1 {
            return Err(Error::InvalidFamily(format!(
                "{kind}: statistics together with the reference direction are linearly dependent"
            )));
        }
        Ok(spec)
    }

    /// Rows of `f` stacked under the direction the parametrization cannot
    /// move along (constants, or the reference bracket).
    fn identifiability_matrix(&self) -> DMatrix<f64> {
        let m = self.m();
        let k = self.k();
        let a = self.alpha.value();
        let first: Vec<f64> = match self.kind {
            FamilyKind::Exponential | FamilyKind::NonNormalizedAlphaPowerLaw => vec![1.0; m],
            FamilyKind::AlphaPowerLaw => self.q.probs().iter().map(|q| q.powf(a - 1.0)).collect(),
            FamilyKind::AlphaExponential => self.q.probs().iter().map(|q| q.powf(1.0 - a)).collect(),
        };
        DMatrix::from_fn(k + 1, m, |i, j| if i == 0 { first[j] } else { self.f[(i - 1, j)] })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn q(&self) -> &Distribution {
        &self.q
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.f.nrows()
    }

    pub fn m(&self) -> usize {
        self.f.ncols()
    }

    /// Statistic row `i` as a slice-like vector.
    pub fn stat(&self, i: usize) -> Vec<f64> {
        self.f.row(i).iter().cloned().collect()
    }

    /// `f(x)` as a k-vector.
    pub fn f_at(&self, x: usize) -> Vec<f64> {
        self.f.column(x).iter().cloned().collect()
    }

    /// `t(x) = theta^T f(x)` for every symbol.
    pub fn tilt(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.k() {
            return Err(Error::Dimension(format!(
                "theta has {} entries, family has {} statistics",
                theta.len(),
                self.k()
            )));
        }
        let th = DVector::from_column_slice(theta);
        Ok((self.f.transpose() * th).iter().cloned().collect())
    }

    /// `E_P[f]` as a k-vector.
    pub fn mean_stat(&self, p: &[f64]) -> Vec<f64> {
        (0..self.k()).map(|i| self.f.row(i).iter().zip(p).map(|(f, w)| f * w).sum()).collect()
    }

    /// Same family with the reference measure replaced.
    pub fn rebased(&self, q: Distribution) -> Result<Self> {
        Self::new(self.kind, q, self.f.clone(), self.alpha)
    }

    pub fn theta_point(&self, theta: &[f64]) -> ThetaPoint {
        ThetaPoint { theta: theta.to_vec(), domain_ok: self.eval_member(theta).is_ok() }
    }

    /// Bracket before `Z` enters: `Q^(a-1) + (1-a) t` (or `Q^(1-a) + ...`).
    fn base_bracket(&self, t: &[f64]) -> Vec<f64> {
        let a = self.alpha.value();
        let q = self.q.probs();
        match self.kind {
            FamilyKind::Exponential => q.iter().zip(t).map(|(q, t)| q.ln() + t).collect(),
            FamilyKind::AlphaPowerLaw | FamilyKind::NonNormalizedAlphaPowerLaw => {
                q.iter().zip(t).map(|(q, t)| q.powf(a - 1.0) + (1.0 - a) * t).collect()
            }
            FamilyKind::AlphaExponential => q.iter().zip(t).map(|(q, t)| q.powf(1.0 - a) + (1.0 - a) * t).collect(),
        }
    }

    pub fn eval_member(&self, theta: &[f64]) -> Result<Member> {
        let t = self.tilt(theta)?;
        let a = self.alpha.value();
        let u = self.base_bracket(&t);
        let (probs, z, bracket) = match self.kind {
            FamilyKind::Exponential => {
                let log_z = crate::divergence::log_sum_exp(u.iter().cloned());
                let p: Vec<f64> = u.iter().map(|l| (l - log_z).exp()).collect();
                (p, log_z.exp(), u)
            }
            FamilyKind::AlphaPowerLaw | FamilyKind::AlphaExponential => {
                check_positive(&u)?;
                let power = if self.kind == FamilyKind::AlphaPowerLaw { 1.0 / (a - 1.0) } else { 1.0 / (1.0 - a) };
                let logs: Vec<f64> = u.iter().map(|v| power * v.ln()).collect();
                let log_z = crate::divergence::log_sum_exp(logs.iter().cloned());
                let p: Vec<f64> = logs.iter().map(|l| (l - log_z).exp()).collect();
                (p, log_z.exp(), u)
            }
            FamilyKind::NonNormalizedAlphaPowerLaw => {
                let z = normalizer_root_from_base(&u, a)?;
                let br: Vec<f64> = u.iter().map(|c| c + (1.0 - a) * z).collect();
                check_positive(&br)?;
                let p: Vec<f64> = br.iter().map(|v| v.powf(1.0 / (a - 1.0))).collect();
                (p, z, br)
            }
        };
        if probs.iter().any(|&p| !positive_finite(p)) {
            let symbols = probs.iter().enumerate().filter(|(_, p)| !positive_finite(**p)).map(|(i, _)| i).collect();
            return Err(Error::DomainViolation { symbols });
        }
        let dist = Distribution::new(probs)?;
        Ok(Member { dist, z, bracket })
    }

    /// `Z(theta)` of the non-normalized alpha-power-law family.
    pub fn normalizer_root(&self, theta: &[f64]) -> Result<f64> {
        if self.kind != FamilyKind::NonNormalizedAlphaPowerLaw {
            return Err(Error::InvalidFamily(format!(
                "normalizer_root applies to the non-normalized family, not {}",
                self.kind
            )));
        }
        let t = self.tilt(theta)?;
        normalizer_root_from_base(&self.base_bracket(&t), self.alpha.value())
    }

    /// Least-squares fit of a strictly positive `p` to the family's
    /// log-linear or power-linear form.
    pub fn fit_member(&self, p: &Distribution) -> Result<MemberFit> {
        if p.len() != self.m() {
            return Err(Error::Dimension("distribution length differs from family".into()));
        }
        if !p.has_full_support() {
            return Err(Error::Domain("membership fit needs a strictly positive P".into()));
        }
        let a = self.alpha.value();
        let m = self.m();
        let k = self.k();
        let q = self.q.probs();
        let pr = p.probs();
        let (y, first): (Vec<f64>, Vec<f64>) = match self.kind {
            FamilyKind::Exponential => (pr.iter().zip(q).map(|(p, q)| p.ln() - q.ln()).collect(), vec![1.0; m]),
            FamilyKind::AlphaPowerLaw => {
                (pr.iter().map(|p| p.powf(a - 1.0)).collect(), q.iter().map(|q| q.powf(a - 1.0)).collect())
            }
            FamilyKind::AlphaExponential => {
                (pr.iter().map(|p| p.powf(1.0 - a)).collect(), q.iter().map(|q| q.powf(1.0 - a)).collect())
            }
            FamilyKind::NonNormalizedAlphaPowerLaw => {
                (pr.iter().zip(q).map(|(p, q)| p.powf(a - 1.0) - q.powf(a - 1.0)).collect(), vec![1.0; m])
            }
        };
        let design = DMatrix::from_fn(m, k + 1, |x, j| if j == 0 { first[x] } else { self.f[(j - 1, x)] });
        let yv = DVector::from_vec(y);
        let beta = design
            .clone()
            .svd(true, true)
            .solve(&yv, RANK_TOL)
            .map_err(|e| Error::Domain(format!("least squares failed: {e}")))?;
        let residual = (&yv - &design * &beta).norm();
        let b0 = beta[0];
        let rest: Vec<f64> = beta.iter().skip(1).cloned().collect();
        let (theta, z) = match self.kind {
            FamilyKind::Exponential => (rest, (-b0).exp()),
            FamilyKind::AlphaPowerLaw => {
                (rest.iter().map(|b| b / ((1.0 - a) * b0)).collect(), b0.powf(1.0 / (1.0 - a)))
            }
            FamilyKind::AlphaExponential => {
                (rest.iter().map(|b| b / ((1.0 - a) * b0)).collect(), b0.powf(1.0 / (a - 1.0)))
            }
            FamilyKind::NonNormalizedAlphaPowerLaw => (rest.iter().map(|b| b / (1.0 - a)).collect(), b0 / (1.0 - a)),
        };
        Ok(MemberFit { theta, z, residual })
    }

    /// Residual of the best fit; zero (to rounding) exactly for members.
    pub fn membership_residual(&self, p: &Distribution) -> Result<f64> {
        Ok(self.fit_member(p)?.residual)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemberFit {
    pub theta: Vec<f64>,
    pub z: f64,
    pub residual: f64,
}

fn positive_finite(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn check_positive(u: &[f64]) -> Result<()> {
    let bad: Vec<usize> = u.iter().enumerate().filter(|(_, v)| !positive_finite(**v)).map(|(i, _)| i).collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::DomainViolation { symbols: bad })
    }
}

/// Solves `sum_x [c(x) + (1-a) Z]^(1/(a-1)) = 1` for `Z`.
///
/// The mass is strictly decreasing in `Z` on the set where every bracket is
/// positive. Writing `Z = Zb + s * tau` with `Zb` the domain boundary and
/// `s` pointing into the domain reduces the search to `tau > 0`.
fn normalizer_root_from_base(c: &[f64], a: f64) -> Result<f64> {
    let s = 1.0 - a;
    let power = 1.0 / (a - 1.0);
    // boundary of {Z : c(x) + s Z > 0 for all x}
    let zb = if s > 0.0 {
        c.iter().map(|ci| -ci / s).fold(f64::NEG_INFINITY, f64::max)
    } else {
        c.iter().map(|ci| -ci / s).fold(f64::INFINITY, f64::min)
    };
    let dir = if s > 0.0 { 1.0 } else { -1.0 };
    let z_of = |tau: f64| zb + dir * tau;
    let mass = |z: f64| -> f64 {
        c.iter()
            .map(|ci| {
                let u = ci + s * z;
                if u > 0.0 {
                    u.powf(power)
                } else {
                    0.0
                }
            })
            .sum()
    };
    // d mass / d tau, using d mass / dZ = -sum u^((2-a)/(a-1))
    let dmass = |z: f64| -> f64 {
        let dz: f64 = -c
            .iter()
            .map(|ci| {
                let u = ci + s * z;
                if u > 0.0 {
                    u.powf((2.0 - a) / (a - 1.0))
                } else {
                    0.0
                }
            })
            .sum::<f64>();
        dz * dir
    };
    // g(tau) = mass - 1; decreasing in tau for a < 1, increasing for a > 1
    let g = |tau: f64| mass(z_of(tau)) - 1.0;
    let increasing = s < 0.0;
    if increasing && g(0.0) >= 0.0 {
        return Err(Error::NormalizerNotFound { lo: zb, hi: zb });
    }
    let mut tau = if dir * (0.0 - zb) > 0.0 { dir * (0.0 - zb) } else { 1.0 };
    if g(tau).abs() <= 4.0 * f64::EPSILON {
        return Ok(z_of(tau));
    }
    let (mut lo, mut hi);
    let below = |v: f64| if increasing { v < 0.0 } else { v > 0.0 };
    if below(g(tau)) {
        lo = tau;
        hi = tau * 2.0;
        let mut steps = 0;
        while below(g(hi)) {
            lo = hi;
            hi *= 2.0;
            steps += 1;
            if steps > 1100 || !hi.is_finite() {
                return Err(Error::NormalizerNotFound { lo: z_of(0.0), hi: z_of(hi) });
            }
        }
    } else {
        hi = tau;
        lo = tau / 2.0;
        let mut steps = 0;
        while !below(g(lo)) {
            hi = lo;
            lo /= 2.0;
            steps += 1;
            if steps > 1100 || lo == 0.0 {
                if increasing {
                    return Err(Error::NormalizerNotFound { lo: z_of(0.0), hi: z_of(hi) });
                }
                lo = 0.0;
                break;
            }
        }
    }
    // safeguarded Newton on [lo, hi], g(lo) "below", g(hi) "above"
    tau = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gv = g(tau);
        if gv == 0.0 {
            break;
        }
        if below(gv) {
            lo = tau;
        } else {
            hi = tau;
        }
        let d = dmass(z_of(tau));
        let mut next = if d != 0.0 && d.is_finite() { tau - gv / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - tau).abs() <= 1e-17 * (1.0 + tau.abs()) || hi - lo <= 1e-16 * (1.0 + hi.abs()) {
            tau = next;
            break;
        }
        tau = next;
    }
    let z = z_of(tau);
    if (mass(z) - 1.0).abs() > 1e-12 {
        return Err(Error::NormalizerNotFound { lo: z_of(lo), hi: z_of(hi) });
    }
    Ok(z)
}

/// `theta'_i = -a theta_i / ||Q||^(1-a)` with `||Q|| = (sum Q^a)^(1/a)`.
pub fn lemma1_parameter_map(theta: &[f64], q: &Distribution, alpha: Alpha) -> Vec<f64> {
    let a = alpha.value();
    let norm = alpha_norm(q, alpha);
    let scale = -a / norm.powf(1.0 - a);
    theta.iter().map(|t| t * scale).collect()
}

/// Image of an alpha-exponential member under the escort map.
#[derive(Debug, Clone)]
pub struct EscortImage {
    /// `escort(P_theta, a)`.
    pub escort: Distribution,
    pub theta_prime: Vec<f64>,
    /// `M^(1/a)(Q^(a), f)`: the power-law family containing the escort.
    pub image_family: FamilySpec,
}

/// Maps `P_theta` in the alpha-exponential family `(Q, f, a)` to its escort,
/// which lies in the `1/a` power-law family with reference `Q^(a)`.
pub fn lemma1_family_map(spec: &FamilySpec, theta: &[f64]) -> Result<EscortImage> {
    if spec.kind() != FamilyKind::AlphaExponential {
        return Err(Error::InvalidFamily(format!(
            "escort correspondence starts from the alpha-exponential family, not {}",
            spec.kind()
        )));
    }
    let alpha = spec.alpha();
    let member = spec.eval_member(theta)?;
    let image_family = escort_image_family(spec)?;
    Ok(EscortImage {
        escort: escort(&member.dist, alpha)?,
        theta_prime: lemma1_parameter_map(theta, spec.q(), alpha),
        image_family,
    })
}

/// `M^(1/a)(Q^(a), f)` for an alpha-exponential family `(Q, f, a)`.
pub fn escort_image_family(spec: &FamilySpec) -> Result<FamilySpec> {
    let alpha = spec.alpha();
    FamilySpec::new(FamilyKind::AlphaPowerLaw, escort(spec.q(), alpha)?, spec.f().clone(), alpha.recip())
}

/// Inverse direction: parameter of the alpha-exponential member whose escort
/// has parameter `theta_prime`.
pub fn lemma1_parameter_inverse(theta_prime: &[f64], q: &Distribution, alpha: Alpha) -> Vec<f64> {
    let a = alpha.value();
    let norm = alpha_norm(q, alpha);
    let scale = -norm.powf(1.0 - a) / a;
    theta_prime.iter().map(|t| t * scale).collect()
}

/// `L = {P : sum_x P(x) f_i(x) = a_i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFamilySpec {
    f: DMatrix<f64>,
    a: Vec<f64>,
}

impl LinearFamilySpec {
    /// Rejects empty families (checked by a phase-one linear program).
    pub fn new(f: DMatrix<f64>, a: Vec<f64>) -> Result<Self> {
        if f.nrows() != a.len() {
            return Err(Error::Dimension(format!("{} constraint rows but {} targets", f.nrows(), a.len())));
        }
        if f.nrows() == 0 || f.ncols() < 2 {
            return Err(Error::Dimension("linear family needs k >= 1 and m >= 2".into()));
        }
        let spec = Self { f, a };
        if spec.support().is_none() {
            return Err(Error::Infeasible);
        }
        Ok(spec)
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn k(&self) -> usize {
        self.f.nrows()
    }

    pub fn m(&self) -> usize {
        self.f.ncols()
    }

    /// `f P - a`.
    pub fn constraint_residual(&self, p: &[f64]) -> Vec<f64> {
        (0..self.k()).map(|i| self.f.row(i).iter().zip(p).map(|(f, w)| f * w).sum::<f64>() - self.a[i]).collect()
    }

    pub fn contains(&self, p: &Distribution, tol: f64) -> bool {
        self.constraint_residual(p.probs()).iter().all(|r| r.abs() <= tol)
    }

    /// Union of supports of members, or `None` when the family is empty.
    pub fn support(&self) -> Option<Vec<bool>> {
        crate::lp::linear_family_support(&self.f, &self.a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bern(kind: FamilyKind, q: &[f64], alpha: f64) -> FamilySpec {
        FamilySpec::new(
            kind,
            Distribution::new(q.to_vec()).unwrap(),
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            Alpha::new(alpha).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bernoulli_exponential() {
        let s = bern(FamilyKind::Exponential, &[0.5, 0.5], 1.0);
        assert_eq!(s.eval_member(&[0.0]).unwrap().dist.probs(), &[0.5, 0.5]);
        let p = s.eval_member(&[3f64.ln()]).unwrap().dist;
        assert_abs_diff_eq!(p.probs()[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(p.probs()[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn theta_zero_is_reference_for_every_kind() {
        let q = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let f = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 3.0]);
        for kind in FamilyKind::ALL {
            for a in [0.5, 2.0, 3.0] {
                let s = FamilySpec::new(kind, q.clone(), f.clone(), Alpha::new(a).unwrap()).unwrap();
                let m = s.eval_member(&[0.0]).unwrap();
                assert!(m.dist.max_abs_diff(&q) <= 1e-15, "{kind} a={a}");
            }
        }
    }

    #[test]
    fn normalizer_examples() {
        let s = bern(FamilyKind::NonNormalizedAlphaPowerLaw, &[0.5, 0.5], 2.0);
        assert_eq!(s.normalizer_root(&[0.0]).unwrap(), 0.0);
        let m = s.eval_member(&[0.1]).unwrap();
        assert_abs_diff_eq!(m.z, -0.05, epsilon = 1e-14);
        // f = (0, 1): the symbol with f = 0 gets Q - Z = 0.55
        assert_abs_diff_eq!(m.dist.probs()[0], 0.55, epsilon = 1e-14);
        assert_abs_diff_eq!(m.dist.probs()[1], 0.45, epsilon = 1e-14);
        let err = s.eval_member(&[2.0]).unwrap_err();
        assert!(matches!(err, Error::NormalizerNotFound { .. } | Error::DomainViolation { .. }));
    }

    #[test]
    fn normalizer_alpha_below_one_always_exists() {
        let q = Distribution::new(vec![0.1, 0.6, 0.3]).unwrap();
        let f = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]);
        let s = FamilySpec::new(FamilyKind::NonNormalizedAlphaPowerLaw, q, f, Alpha::new(0.5).unwrap()).unwrap();
        for th in [-20.0, -3.0, -0.1, 0.0, 0.4, 5.0, 50.0] {
            let m = s.eval_member(&[th]).unwrap();
            let sum: f64 = m.dist.probs().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalizer_matches_linear_closed_form_at_alpha_two() {
        // at a = 2: P = Q - Z - t, so Z = -mean(t) over symbols... sum(Q - Z - t) = 1
        let q = Distribution::new(vec![0.3, 0.3, 0.4]).unwrap();
        let f = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0]);
        let s =
            FamilySpec::new(FamilyKind::NonNormalizedAlphaPowerLaw, q.clone(), f, Alpha::new(2.0).unwrap()).unwrap();
        for th in [-0.1, 0.05, 0.1] {
            let z = s.normalizer_root(&[th]).unwrap();
            let t = [0.0, th, 2.0 * th];
            let closed = -t.iter().sum::<f64>() / 3.0;
            assert_abs_diff_eq!(z, closed, epsilon = 1e-14);
            let m = s.eval_member(&[th]).unwrap();
            for (x, tx) in t.iter().enumerate() {
                assert_abs_diff_eq!(m.dist.probs()[x], q.probs()[x] - closed - tx, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn power_law_domain_violation_lists_symbols() {
        let s = bern(FamilyKind::AlphaPowerLaw, &[0.5, 0.5], 2.0);
        // bracket = Q - theta f = (0.5, 0.5 - theta)
        match s.eval_member(&[1.0]) {
            Err(Error::DomainViolation { symbols }) => assert_eq!(symbols, vec![1]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parameter_map_examples() {
        let a2 = Alpha::new(2.0).unwrap();
        let q = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(lemma1_parameter_map(&[0.0], &q, a2), vec![0.0]);
        assert_abs_diff_eq!(lemma1_parameter_map(&[1.0], &q, a2)[0], -2.0 * 0.5f64.sqrt(), epsilon = 1e-15);
        let q = Distribution::new(vec![0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(lemma1_parameter_map(&[0.3], &q, a2)[0], -0.474342, epsilon = 1e-6);
    }

    #[test]
    fn escort_image_matches_power_law_evaluation() {
        let s = bern(FamilyKind::AlphaExponential, &[0.5, 0.5], 2.0);
        let img = lemma1_family_map(&s, &[0.0]).unwrap();
        assert_eq!(img.theta_prime, vec![0.0]);
        assert!(img.escort.max_abs_diff(&escort(s.q(), s.alpha()).unwrap()) <= 1e-15);
        let img = lemma1_family_map(&s, &[0.2]).unwrap();
        let direct = img.image_family.eval_member(&img.theta_prime).unwrap();
        assert!(img.escort.max_abs_diff(&direct.dist) <= 1e-10);
        let back = escort(&img.escort, s.alpha().recip()).unwrap();
        assert!(back.max_abs_diff(&s.eval_member(&[0.2]).unwrap().dist) <= 1e-10);
        let theta = lemma1_parameter_inverse(&img.theta_prime, s.q(), s.alpha());
        assert_abs_diff_eq!(theta[0], 0.2, epsilon = 1e-14);
    }

    #[test]
    fn membership_residuals() {
        let q = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let f = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 3.0]);
        for kind in FamilyKind::ALL {
            let s = FamilySpec::new(kind, q.clone(), f.clone(), Alpha::new(0.5).unwrap()).unwrap();
            let m = s.eval_member(&[0.3]).unwrap();
            let fit = s.fit_member(&m.dist).unwrap();
            assert!(fit.residual <= 1e-10, "{kind}: {}", fit.residual);
            assert_abs_diff_eq!(fit.theta[0], 0.3, epsilon = 1e-9);
            assert!(s.membership_residual(&q).unwrap() <= 1e-10);
            let mut shifted = m.dist.probs().to_vec();
            shifted[0] += 0.05;
            shifted[1] -= 0.05;
            let off = Distribution::new(shifted).unwrap();
            assert!(s.membership_residual(&off).unwrap() > 1e-4, "{kind}");
        }
    }

    #[test]
    fn non_normalized_fit_recovers_z() {
        let q = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let f = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 3.0]);
        let s = FamilySpec::new(FamilyKind::NonNormalizedAlphaPowerLaw, q, f, Alpha::new(0.5).unwrap()).unwrap();
        let m = s.eval_member(&[-0.4]).unwrap();
        let fit = s.fit_member(&m.dist).unwrap();
        assert_abs_diff_eq!(fit.z, m.z, epsilon = 1e-9);
    }

    #[test]
    fn rebasing_translates_parameters() {
        let q = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let f = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 3.0]);
        for (kind, a) in [
            (FamilyKind::NonNormalizedAlphaPowerLaw, 0.5),
            (FamilyKind::NonNormalizedAlphaPowerLaw, 2.0),
            (FamilyKind::Exponential, 1.0),
        ] {
            let s = FamilySpec::new(kind, q.clone(), f.clone(), Alpha::new(a).unwrap()).unwrap();
            let theta0 = 0.05;
            let rebased = s.rebased(s.eval_member(&[theta0]).unwrap().dist).unwrap();
            for i in -5..=5 {
                let th = i as f64 * 0.01;
                let (Ok(p), Ok(r)) = (s.eval_member(&[th]), rebased.eval_member(&[th - theta0])) else {
                    continue;
                };
                assert!(p.dist.max_abs_diff(&r.dist) <= 1e-9, "{kind} th={th}");
            }
        }
    }

    #[test]
    fn spec_validation() {
        let q = Distribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let dep = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 2.0, 0.0, 2.0, 4.0]);
        assert!(FamilySpec::new(FamilyKind::Exponential, q.clone(), dep, Alpha::new(1.0).unwrap()).is_err());
        let constant = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        assert!(FamilySpec::new(FamilyKind::Exponential, q.clone(), constant, Alpha::new(1.0).unwrap()).is_err());
        let f = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0]);
        assert!(FamilySpec::new(FamilyKind::AlphaPowerLaw, q.clone(), f.clone(), Alpha::new(1.0).unwrap()).is_err());
        // Q^(a-1) proportional to f
        let qa = DMatrix::from_row_slice(1, 3, &[0.2, 0.3, 0.5]);
        assert!(FamilySpec::new(FamilyKind::AlphaPowerLaw, q.clone(), qa, Alpha::new(2.0).unwrap()).is_err());
        let zero_q = Distribution::new(vec![0.0, 0.5, 0.5]).unwrap();
        assert!(FamilySpec::new(FamilyKind::Exponential, zero_q, f, Alpha::new(1.0).unwrap()).is_err());
    }

    #[test]
    fn linear_family_feasibility() {
        let f = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0]);
        let l = LinearFamilySpec::new(f.clone(), vec![1.2]).unwrap();
        assert_eq!(l.support().unwrap(), vec![true, true, true]);
        let edge = LinearFamilySpec::new(f.clone(), vec![2.0]).unwrap();
        assert_eq!(edge.support().unwrap(), vec![false, false, true]);
        assert_eq!(LinearFamilySpec::new(f, vec![2.5]), Err(Error::Infeasible));
    }
}
