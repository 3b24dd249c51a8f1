//! Projection equations, forward `B_a`-projection onto linear families, and
//! the `Phi` map of the power-law family.
//!
//! The forward projection of `Q` onto `L = {P : f P = a}` is computed from
//! the convex dual
//!
//! ```text
//! H(theta, Z) = (1/a) sum_x [u(x)]_+^(a/(a-1)) + Z + theta^T a_target
//! u(x)        = Q(x)^(a-1) + (1-a)(Z + theta^T f(x))
//! ```
//!
//! whose minimizer gives `P*(x) = [u(x)]_+^(1/(a-1))`. For `a < 1` the sum
//! runs over the support of `L` and acts as its own barrier; for `a > 1` the
//! clamp `[.]_+` encodes the complementary slackness of the positivity
//! constraints.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::divergence::density_power_b;
use crate::error::{Error, Result};
use crate::estimate::{self, Route, SolveReport};
use crate::family::{FamilyKind, FamilySpec, LinearFamilySpec};
use crate::measures::{escort_weights, power_sum, Alpha, Distribution, SampleData};
use crate::solver::{inf_norm, NewtonOptions};

/// Membership residual below which a reverse projection counts as attained.
pub const ATTAINED_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    /// `E_theta[f] = f_bar` on the exponential family.
    IProj,
    /// `E_theta[f] = f_bar` on the non-normalized power-law family.
    BProj,
    /// `E_theta[f_i] = E_theta[Q^(a-1)] f_bar_i / mean(Q^(a-1))` on `M^(a)`.
    IAlphaProj,
    /// Escort-mean equation on the alpha-exponential family.
    DAlphaProj,
}

impl ProjectionKind {
    pub const ALL: [ProjectionKind; 4] =
        [ProjectionKind::IProj, ProjectionKind::BProj, ProjectionKind::IAlphaProj, ProjectionKind::DAlphaProj];

    pub fn matched_family(self) -> FamilyKind {
        match self {
            ProjectionKind::IProj => FamilyKind::Exponential,
            ProjectionKind::BProj => FamilyKind::NonNormalizedAlphaPowerLaw,
            ProjectionKind::IAlphaProj => FamilyKind::AlphaPowerLaw,
            ProjectionKind::DAlphaProj => FamilyKind::AlphaExponential,
        }
    }

    pub fn for_family(kind: FamilyKind) -> Self {
        match kind {
            FamilyKind::Exponential => ProjectionKind::IProj,
            FamilyKind::NonNormalizedAlphaPowerLaw => ProjectionKind::BProj,
            FamilyKind::AlphaPowerLaw => ProjectionKind::IAlphaProj,
            FamilyKind::AlphaExponential => ProjectionKind::DAlphaProj,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProjectionKind::IProj => "i",
            ProjectionKind::BProj => "b",
            ProjectionKind::IAlphaProj => "i_alpha",
            ProjectionKind::DAlphaProj => "d_alpha",
        }
    }
}

impl fmt::Display for ProjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProjectionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown projection equation `{s}`")))
    }
}

fn weighted_mean(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Projection-equation residual for an arbitrary empirical measure `p_hat`.
pub fn projection_residual_with(
    kind: ProjectionKind,
    spec: &FamilySpec,
    theta: &[f64],
    p_hat: &[f64],
) -> Result<Vec<f64>> {
    if p_hat.len() != spec.m() {
        return Err(Error::Dimension("empirical measure length differs from family".into()));
    }
    let member = spec.eval_member(theta)?;
    let p = member.dist.probs();
    let a = spec.alpha().value();
    let e_f = spec.mean_stat(p);
    let f_bar = spec.mean_stat(p_hat);
    Ok(match kind {
        ProjectionKind::IProj | ProjectionKind::BProj => e_f.iter().zip(&f_bar).map(|(e, b)| e - b).collect(),
        ProjectionKind::IAlphaProj => {
            let qa: Vec<f64> = spec.q().probs().iter().map(|q| q.powf(a - 1.0)).collect();
            let ratio = weighted_mean(p, &qa) / weighted_mean(p_hat, &qa);
            e_f.iter().zip(&f_bar).map(|(e, b)| e - ratio * b).collect()
        }
        ProjectionKind::DAlphaProj => d_alpha_forms_with(spec, theta, p_hat)?.escort_form,
    })
}

pub fn projection_residual(
    kind: ProjectionKind,
    spec: &FamilySpec,
    theta: &[f64],
    sample: &SampleData,
) -> Result<Vec<f64>> {
    projection_residual_with(kind, spec, theta, sample.empirical().probs())
}

/// The two algebraic forms of the escort-mean projection equation.
#[derive(Debug, Clone, PartialEq)]
pub struct DAlphaForms {
    /// `sum P^a f_i - (sum P^a Q^(1-a) / sum P^^a Q^(1-a)) sum P^^a f_i`.
    pub sum_form: Vec<f64>,
    /// Same equation in escort expectations.
    pub escort_form: Vec<f64>,
    /// `sum P^a`; `sum_form = power_sum * escort_form`.
    pub power_sum: f64,
}

pub fn d_alpha_forms_with(spec: &FamilySpec, theta: &[f64], p_hat: &[f64]) -> Result<DAlphaForms> {
    let member = spec.eval_member(theta)?;
    let p = member.dist.probs();
    let a = spec.alpha().value();
    let q1a: Vec<f64> = spec.q().probs().iter().map(|q| q.powf(1.0 - a)).collect();
    let pa: Vec<f64> = p.iter().map(|v| v.powf(a)).collect();
    let ha: Vec<f64> = p_hat.iter().map(|v| if *v > 0.0 { v.powf(a) } else { 0.0 }).collect();
    let k = spec.k();
    let sum_form = (0..k)
        .map(|i| {
            let fi = spec.stat(i);
            weighted_mean(&pa, &fi) - weighted_mean(&pa, &q1a) / weighted_mean(&ha, &q1a) * weighted_mean(&ha, &fi)
        })
        .collect();
    let pe = escort_weights(p, a);
    let he = escort_weights(p_hat, a);
    let escort_form = (0..k)
        .map(|i| {
            let fi = spec.stat(i);
            weighted_mean(&pe, &fi) - weighted_mean(&pe, &q1a) / weighted_mean(&he, &q1a) * weighted_mean(&he, &fi)
        })
        .collect();
    Ok(DAlphaForms { sum_form, escort_form, power_sum: pa.iter().sum() })
}

pub fn solve_projection_equation(
    kind: ProjectionKind,
    spec: &FamilySpec,
    sample: &SampleData,
    init: &[f64],
) -> Result<SolveReport> {
    solve_projection_equation_with(kind, spec, sample, init, NewtonOptions::default())
}

pub fn solve_projection_equation_with(
    kind: ProjectionKind,
    spec: &FamilySpec,
    sample: &SampleData,
    init: &[f64],
    opts: NewtonOptions,
) -> Result<SolveReport> {
    if sample.alphabet().len() != spec.m() {
        return Err(Error::Dimension("sample alphabet differs from family".into()));
    }
    estimate::solve_root(
        spec,
        |p_hat: &[f64], th: &[f64]| projection_residual_with(kind, spec, th, p_hat),
        |_: &[f64], _: &[f64]| 1.0,
        sample.empirical().probs(),
        init,
        Route::ProjectionEq,
        opts,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardMethod {
    DualNewton,
    ProjectedGradient,
}

/// Lagrange multipliers of `min B_a(P, Q)` subject to `f P = a`, `sum P = 1`,
/// `P >= 0` (`lambda`, `nu`, `mu` respectively).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktMultipliers {
    pub lambda: Vec<f64>,
    pub nu: f64,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardProjectionResult {
    pub p_star: Distribution,
    pub theta: Vec<f64>,
    pub z: f64,
    pub support_mask: Vec<bool>,
    pub kkt: Option<KktMultipliers>,
    pub objective: f64,
    pub method: ForwardMethod,
    pub iterations: usize,
}

impl ForwardProjectionResult {
    /// `max_x mu(x) P*(x)`.
    pub fn slackness(&self) -> f64 {
        self.kkt
            .as_ref()
            .map_or(0.0, |k| k.mu.iter().zip(self.p_star.probs()).map(|(m, p)| (m * p).abs()).fold(0.0, f64::max))
    }
}

/// Value, gradient and Hessian of a convex dual objective.
type DualEval = (f64, Vec<f64>, DMatrix<f64>);

/// Newton with Levenberg safeguarding on a convex function; `None` from
/// `h` marks points outside its domain.
fn convex_newton<H>(h: &H, init: Vec<f64>, tol: f64) -> (Vec<f64>, f64, usize)
where
    H: Fn(&[f64]) -> Option<DualEval>,
{
    let n = init.len();
    let mut x = init;
    let Some((mut val, mut grad, mut hess)) = h(&x) else {
        return (x, f64::INFINITY, 0);
    };
    let mut iterations = 0;
    while inf_norm(&grad) > tol && iterations < 500 {
        iterations += 1;
        let g = DVector::from_column_slice(&grad);
        let scale = hess.diagonal().amax().max(1e-300);
        let mut tau = 1e-14 * scale;
        let d = loop {
            let reg = &hess + DMatrix::identity(n, n) * tau;
            if let Some(ch) = reg.cholesky() {
                break -ch.solve(&g);
            }
            tau = (tau * 10.0).max(1e-300);
            if tau > 1e12 * scale {
                break -g.clone();
            }
        };
        let slope = d.dot(&g);
        let gnorm = inf_norm(&grad);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
            if let Some((cv, cg, ch)) = h(&cand) {
                let armijo = cv <= val + 1e-4 * t * slope;
                let flat = cv <= val + 1e-13 * val.abs().max(1.0) && inf_norm(&cg) < 0.9 * gnorm;
                if cv.is_finite() && (armijo || flat) {
                    accepted = Some((cand, cv, cg, ch));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, vn, gn, hn)) = accepted else {
            break;
        };
        x = xn;
        val = vn;
        grad = gn;
        hess = hn;
    }
    let r = inf_norm(&grad);
    (x, r, iterations)
}

/// Dual of the `B_a` projection of a base vector `c` (`Q^(a-1)` in general,
/// any real vector at `a = 2`) over the symbols in `active`.
struct PowerDual<'a> {
    c: &'a [f64],
    f: &'a DMatrix<f64>,
    target: &'a [f64],
    alpha: f64,
    active: &'a [bool],
}

impl PowerDual<'_> {
    fn bracket(&self, v: &[f64]) -> Vec<f64> {
        let k = self.f.nrows();
        let (theta, z) = (&v[..k], v[k]);
        (0..self.f.ncols())
            .map(|x| {
                let t: f64 = (0..k).map(|i| theta[i] * self.f[(i, x)]).sum();
                self.c[x] + (1.0 - self.alpha) * (z + t)
            })
            .collect()
    }

    fn probs(&self, u: &[f64]) -> Vec<f64> {
        let a = self.alpha;
        u.iter().zip(self.active).map(|(&u, &on)| if on && u > 0.0 { u.powf(1.0 / (a - 1.0)) } else { 0.0 }).collect()
    }

    fn eval(&self, v: &[f64]) -> Option<DualEval> {
        let a = self.alpha;
        let k = self.f.nrows();
        let u = self.bracket(v);
        if a < 1.0 && u.iter().zip(self.active).any(|(&u, &on)| on && (u.is_nan() || u <= 0.0)) {
            return None;
        }
        let mut val = v[k] + (0..k).map(|i| v[i] * self.target[i]).sum::<f64>();
        let mut grad = vec![0.0; k + 1];
        grad[..k].copy_from_slice(&self.target[..k]);
        grad[k] = 1.0;
        let mut hess = DMatrix::zeros(k + 1, k + 1);
        for (x, &ux) in u.iter().enumerate() {
            if !self.active[x] || ux.is_nan() || ux <= 0.0 {
                continue;
            }
            let lu = ux.ln();
            let p = (lu / (a - 1.0)).exp();
            val += (lu * a / (a - 1.0)).exp() / a;
            let w = (lu * (2.0 - a) / (a - 1.0)).exp();
            let g: Vec<f64> = (0..=k).map(|i| if i < k { self.f[(i, x)] } else { 1.0 }).collect();
            for i in 0..=k {
                grad[i] -= p * g[i];
                for j in 0..=k {
                    hess[(i, j)] += w * g[i] * g[j];
                }
            }
        }
        if !val.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return None;
        }
        Some((val, grad, hess))
    }
}

/// Dual of the forward KL projection: `log sum_S Q exp(theta^T f) - theta^T a`.
fn kl_dual(q: &[f64], f: &DMatrix<f64>, target: &[f64], active: &[bool], theta: &[f64]) -> Option<DualEval> {
    let k = f.nrows();
    let logs: Vec<f64> =
        (0..q.len())
            .map(|x| {
                if active[x] {
                    q[x].ln() + (0..k).map(|i| theta[i] * f[(i, x)]).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
    let lz = crate::divergence::log_sum_exp(logs.iter().cloned());
    let p: Vec<f64> = logs.iter().map(|l| (l - lz).exp()).collect();
    let mean: Vec<f64> = (0..k).map(|i| (0..q.len()).map(|x| p[x] * f[(i, x)]).sum()).collect();
    let val = lz - theta.iter().zip(target).map(|(t, a)| t * a).sum::<f64>();
    let grad: Vec<f64> = mean.iter().zip(target).map(|(m, a)| m - a).collect();
    let hess =
        DMatrix::from_fn(k, k, |i, j| (0..q.len()).map(|x| p[x] * (f[(i, x)] - mean[i]) * (f[(j, x)] - mean[j])).sum());
    Some((val, grad, hess))
}

fn dual_tol(l: &LinearFamilySpec) -> f64 {
    1e-13 * l.f().amax().max(1.0)
}

/// Euclidean projection of an arbitrary real vector onto `L` intersected with
/// the simplex (the `a = 2` case of the dual).
fn euclidean_projection(v: &[f64], l: &LinearFamilySpec) -> Option<Vec<f64>> {
    let active = vec![true; v.len()];
    let dual = PowerDual { c: v, f: l.f(), target: l.a(), alpha: 2.0, active: &active };
    let (x, r, _) = convex_newton(&|w: &[f64]| dual.eval(w), vec![0.0; l.k() + 1], dual_tol(l));
    (r <= 1e-11 * l.f().amax().max(1.0)).then(|| dual.probs(&dual.bracket(&x)))
}

/// Forward `B_a`-projection of `q` onto `l`. At `a = 1` this is the forward
/// KL projection.
pub fn forward_b_projection(q: &Distribution, l: &LinearFamilySpec, alpha: Alpha) -> Result<ForwardProjectionResult> {
    if !q.is_strict() {
        return Err(Error::Domain("reference measure must be strictly positive".into()));
    }
    if q.len() != l.m() {
        return Err(Error::Dimension("reference and linear family differ in length".into()));
    }
    let support = l.support().ok_or(Error::Infeasible)?;
    let a = alpha.value();
    let k = l.k();
    if alpha.is_one() {
        let (theta, r, iterations) =
            convex_newton(&|t: &[f64]| kl_dual(q.probs(), l.f(), l.a(), &support, t), vec![0.0; k], dual_tol(l));
        let (p, z) = exp_tilt(q.probs(), l.f(), &support, &theta);
        return finish_forward(q, l, alpha, p, theta, z, r, iterations, None);
    }
    // a > 1 lets the clamp find the support; a < 1 needs it up front
    let active = if a > 1.0 { vec![true; l.m()] } else { support.clone() };
    let c: Vec<f64> = q.probs().iter().map(|v| v.powf(a - 1.0)).collect();
    let dual = PowerDual { c: &c, f: l.f(), target: l.a(), alpha: a, active: &active };
    let (v, r, iterations) = convex_newton(&|w: &[f64]| dual.eval(w), vec![0.0; k + 1], dual_tol(l));
    let u = dual.bracket(&v);
    let p = dual.probs(&u);
    let kkt = (a > 1.0).then(|| KktMultipliers {
        lambda: v[..k].iter().map(|t| a * t).collect(),
        nu: a * v[k],
        mu: u.iter().map(|&ux| a / (a - 1.0) * (-ux).max(0.0)).collect(),
    });
    match finish_forward(q, l, alpha, p, v[..k].to_vec(), v[k], r, iterations, kkt) {
        Ok(res) => Ok(res),
        Err(Error::NoConvergence { .. }) => projected_gradient(q, l, alpha, &support),
        Err(e) => Err(e),
    }
}

fn exp_tilt(q: &[f64], f: &DMatrix<f64>, active: &[bool], theta: &[f64]) -> (Vec<f64>, f64) {
    let k = f.nrows();
    let logs: Vec<f64> =
        (0..q.len())
            .map(|x| {
                if active[x] {
                    q[x].ln() + (0..k).map(|i| theta[i] * f[(i, x)]).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
    let lz = crate::divergence::log_sum_exp(logs.iter().cloned());
    (logs.iter().map(|l| (l - lz).exp()).collect(), lz.exp())
}

#[allow(clippy::too_many_arguments)]
fn finish_forward(
    q: &Distribution,
    l: &LinearFamilySpec,
    alpha: Alpha,
    p: Vec<f64>,
    theta: Vec<f64>,
    z: f64,
    dual_residual: f64,
    iterations: usize,
    kkt: Option<KktMultipliers>,
) -> Result<ForwardProjectionResult> {
    let sum: f64 = p.iter().sum();
    let constraint = inf_norm(&l.constraint_residual(&p));
    let tol = 1e-11 * l.f().amax().max(1.0);
    if !(dual_residual <= tol && constraint <= tol && (sum - 1.0).abs() <= 1e-11) {
        return Err(Error::NoConvergence { iterations, residual: dual_residual.max(constraint), best_theta: theta });
    }
    let p_star = Distribution::new(p)?;
    let objective = density_power_b(&p_star, q, alpha)?;
    Ok(ForwardProjectionResult {
        support_mask: p_star.probs().iter().map(|&v| v > 0.0).collect(),
        p_star,
        theta,
        z,
        kkt,
        objective,
        method: ForwardMethod::DualNewton,
        iterations,
    })
}

/// Primal fallback: projected gradient on `L` with Euclidean projections,
/// then a least-squares fit of `(theta, Z)` on the support.
pub(crate) fn projected_gradient(
    q: &Distribution,
    l: &LinearFamilySpec,
    alpha: Alpha,
    support: &[bool],
) -> Result<ForwardProjectionResult> {
    let a = alpha.value();
    let qa: Vec<f64> = q.probs().iter().map(|v| v.powf(a - 1.0)).collect();
    let objective = |p: &[f64]| -> f64 {
        p.iter()
            .zip(q.probs())
            .map(|(&p, &q)| {
                let pa = if p > 0.0 { p.powf(a) } else { 0.0 };
                (a * p * q.powf(a - 1.0) - pa + (1.0 - a) * q.powf(a)) / (1.0 - a)
            })
            .sum()
    };
    let mut p = euclidean_projection(q.probs(), l).ok_or(Error::Infeasible)?;
    let mut val = objective(&p);
    let mut step = 1.0;
    let mut iterations = 0;
    for _ in 0..20_000 {
        iterations += 1;
        let grad: Vec<f64> = p
            .iter()
            .zip(&qa)
            .zip(support)
            .map(|((&p, &qa), &on)| {
                if !on {
                    return 0.0;
                }
                let pa = p.max(1e-12).powf(a - 1.0);
                a / (1.0 - a) * (qa - pa)
            })
            .collect();
        let mut moved = false;
        for _ in 0..40 {
            let v: Vec<f64> = p.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            if let Some(cand) = euclidean_projection(&v, l) {
                let cv = objective(&cand);
                if cv < val {
                    let change = cand.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    p = cand;
                    val = cv;
                    step *= 2.0;
                    moved = change > 1e-15;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let p_star = Distribution::new(p)?;
    let fit = fit_forward_form(q, l, alpha, &p_star);
    let k = l.k();
    let u = forward_bracket(q, l, alpha, &fit.theta, fit.z);
    let kkt = (a > 1.0).then(|| KktMultipliers {
        lambda: fit.theta.iter().map(|t| a * t).collect(),
        nu: a * fit.z,
        mu: u
            .iter()
            .zip(p_star.probs())
            .map(|(&ux, &px)| if px > 0.0 { 0.0 } else { a / (a - 1.0) * (-ux).max(0.0) })
            .collect(),
    });
    debug_assert_eq!(fit.theta.len(), k);
    Ok(ForwardProjectionResult {
        support_mask: p_star.probs().iter().map(|&v| v > 0.0).collect(),
        objective: density_power_b(&p_star, q, alpha)?,
        p_star,
        theta: fit.theta,
        z: fit.z,
        kkt,
        method: ForwardMethod::ProjectedGradient,
        iterations,
    })
}

fn forward_bracket(q: &Distribution, l: &LinearFamilySpec, alpha: Alpha, theta: &[f64], z: f64) -> Vec<f64> {
    let a = alpha.value();
    (0..l.m())
        .map(|x| {
            let t: f64 = (0..l.k()).map(|i| theta[i] * l.f()[(i, x)]).sum();
            q.probs()[x].powf(a - 1.0) + (1.0 - a) * (z + t)
        })
        .collect()
}

/// Least-squares fit of `P^(a-1) - Q^(a-1) = (1-a)(Z + theta^T f)` on the
/// support of `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormFit {
    pub theta: Vec<f64>,
    pub z: f64,
    /// Fit residual on the support plus positive brackets off the support.
    pub residual: f64,
}

pub fn fit_forward_form(q: &Distribution, l: &LinearFamilySpec, alpha: Alpha, p: &Distribution) -> FormFit {
    let a = alpha.value();
    let k = l.k();
    let rows: Vec<usize> = (0..l.m()).filter(|&x| p.probs()[x] > 0.0).collect();
    let design = DMatrix::from_fn(rows.len(), k + 1, |r, j| {
        let x = rows[r];
        let g = if j < k { l.f()[(j, x)] } else { 1.0 };
        if alpha.is_one() {
            g
        } else {
            (1.0 - a) * g
        }
    });
    let y = DVector::from_iterator(
        rows.len(),
        rows.iter().map(|&x| {
            let (px, qx) = (p.probs()[x], q.probs()[x]);
            if alpha.is_one() {
                px.ln() - qx.ln()
            } else {
                px.powf(a - 1.0) - qx.powf(a - 1.0)
            }
        }),
    );
    let beta = design.clone().svd(true, true).solve(&y, 1e-12).unwrap_or_else(|_| DVector::zeros(k + 1));
    let mut residual = (&y - &design * &beta).norm();
    let theta: Vec<f64> = beta.iter().take(k).cloned().collect();
    let z = beta[k];
    if a > 1.0 {
        let u = forward_bracket(q, l, alpha, &theta, z);
        residual += (0..l.m()).filter(|&x| p.probs()[x] == 0.0).map(|x| u[x].max(0.0)).sum::<f64>();
    }
    FormFit { theta, z, residual }
}

/// `B_a(P, Q) - B_a(P, P*) - B_a(P*, Q)`.
pub fn pythagorean_gap(alpha: Alpha, p: &Distribution, p_star: &Distribution, q: &Distribution) -> Result<f64> {
    Ok(density_power_b(p, q, alpha)? - density_power_b(p, p_star, alpha)? - density_power_b(p_star, q, alpha)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReverseProjection {
    pub forward: ForwardProjectionResult,
    /// Parameter of the reverse projection when it lies in the family.
    pub theta: Option<Vec<f64>>,
    pub z: Option<f64>,
    pub membership_residual: f64,
    /// False when the forward solution lies only in the closure of the family.
    pub attained: bool,
    pub report: Option<SolveReport>,
}

/// Reverse `B_a`-projection of the empirical measure onto a non-normalized
/// power-law family, via the forward projection of `Q` onto `{P : f P = f_bar}`.
pub fn reverse_b_projection(sample: &SampleData, spec: &FamilySpec) -> Result<ReverseProjection> {
    if spec.kind() != FamilyKind::NonNormalizedAlphaPowerLaw {
        return Err(Error::InvalidFamily(format!(
            "reverse projection via a linear family needs the non-normalized family, not {}",
            spec.kind()
        )));
    }
    if sample.alphabet().len() != spec.m() {
        return Err(Error::Dimension("sample alphabet differs from family".into()));
    }
    let f_bar = spec.mean_stat(sample.empirical().probs());
    let l_hat = LinearFamilySpec::new(spec.f().clone(), f_bar)?;
    let forward = forward_b_projection(spec.q(), &l_hat, spec.alpha())?;
    let (theta, z, membership_residual) = if forward.p_star.has_full_support() {
        let fit = spec.fit_member(&forward.p_star)?;
        (fit.theta, fit.z, fit.residual)
    } else {
        (forward.theta.clone(), forward.z, f64::INFINITY)
    };
    let attained = membership_residual <= ATTAINED_TOL;
    let report = attained
        .then(|| -> Result<SolveReport> {
            let residual = inf_norm(&projection_residual(ProjectionKind::BProj, spec, &theta, sample)?);
            Ok(SolveReport {
                theta_star: theta.clone(),
                p_star: forward.p_star.probs().to_vec(),
                residual_norm: residual,
                iterations: forward.iterations,
                trace: Vec::new(),
                route: Route::ProjectionEq,
                first_order_residual: None,
            })
        })
        .transpose()?;
    Ok(ReverseProjection {
        theta: attained.then(|| theta.clone()),
        z: attained.then_some(z),
        membership_residual,
        attained,
        report,
        forward,
    })
}

/// `Phi(theta)` of the power-law family in both algebraic forms.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiValue {
    /// `E[f_i] (mean Q^(a-1) + (1-a) theta^T f_bar) / E[u]`.
    pub quotient_form: Vec<f64>,
    /// `E[f_i] mean(P^(a-1)) / sum P^a`.
    pub norm_form: Vec<f64>,
}

fn check_power_law(spec: &FamilySpec) -> Result<()> {
    if spec.kind() != FamilyKind::AlphaPowerLaw {
        return Err(Error::InvalidFamily(format!("Phi is defined on the power-law family, not {}", spec.kind())));
    }
    Ok(())
}

pub fn phi_map_with(spec: &FamilySpec, theta: &[f64], p_hat: &[f64]) -> Result<PhiValue> {
    check_power_law(spec)?;
    let a = spec.alpha().value();
    let member = spec.eval_member(theta)?;
    let p = member.dist.probs();
    let e_f = spec.mean_stat(p);
    let qa: Vec<f64> = spec.q().probs().iter().map(|q| q.powf(a - 1.0)).collect();
    let f_bar = spec.mean_stat(p_hat);
    let num = weighted_mean(p_hat, &qa) + (1.0 - a) * theta.iter().zip(&f_bar).map(|(t, f)| t * f).sum::<f64>();
    let den = weighted_mean(p, &member.bracket);
    let pa1: Vec<f64> = p.iter().map(|v| v.powf(a - 1.0)).collect();
    let ratio = weighted_mean(p_hat, &pa1) / power_sum(p, a);
    Ok(PhiValue {
        quotient_form: e_f.iter().map(|e| e * num / den).collect(),
        norm_form: e_f.iter().map(|e| e * ratio).collect(),
    })
}

pub fn phi_map(spec: &FamilySpec, theta: &[f64], sample: &SampleData) -> Result<PhiValue> {
    phi_map_with(spec, theta, sample.empirical().probs())
}

/// Exact Jacobian `d phi_i / d theta_j`, from the scores of the family.
pub fn phi_jacobian_with(spec: &FamilySpec, theta: &[f64], p_hat: &[f64]) -> Result<DMatrix<f64>> {
    check_power_law(spec)?;
    let a = spec.alpha().value();
    let (member, s) = estimate::scores(spec, theta)?;
    let p = member.dist.probs();
    let k = spec.k();
    let m = spec.m();
    let e_f = spec.mean_stat(p);
    let pa1: Vec<f64> = p.iter().map(|v| v.powf(a - 1.0)).collect();
    let mean_pa1 = weighted_mean(p_hat, &pa1);
    let norm = power_sum(p, a);
    let ratio = mean_pa1 / norm;
    let mut out = DMatrix::zeros(k, k);
    for j in 0..k {
        let d_mean: f64 = (0..m).map(|x| p_hat[x] * (a - 1.0) * pa1[x] * s[x][j]).sum();
        let d_norm: f64 = (0..m).map(|x| a * p[x].powf(a) * s[x][j]).sum();
        let d_ratio = ratio * (d_mean / mean_pa1 - d_norm / norm);
        for i in 0..k {
            let d_ef: f64 = (0..m).map(|x| p[x] * spec.f()[(i, x)] * s[x][j]).sum();
            out[(i, j)] = d_ef * ratio + e_f[i] * d_ratio;
        }
    }
    Ok(out)
}

pub fn phi_jacobian(spec: &FamilySpec, theta: &[f64], sample: &SampleData) -> Result<DMatrix<f64>> {
    phi_jacobian_with(spec, theta, sample.empirical().probs())
}

/// `-Z^(1-a) mean(P^(a-1)) Cov_escort(P^(1-a) f_i, P^(1-a) f_j)`. Equals the
/// exact Jacobian where `Phi(theta) = f_bar`.
pub fn phi_jacobian_escort_form(spec: &FamilySpec, theta: &[f64], p_hat: &[f64]) -> Result<DMatrix<f64>> {
    check_power_law(spec)?;
    let a = spec.alpha().value();
    let member = spec.eval_member(theta)?;
    let p = member.dist.probs();
    let k = spec.k();
    let m = spec.m();
    let esc = escort_weights(p, a);
    let g: Vec<Vec<f64>> = (0..k).map(|i| (0..m).map(|x| p[x].powf(1.0 - a) * spec.f()[(i, x)]).collect()).collect();
    let means: Vec<f64> = g.iter().map(|gi| weighted_mean(&esc, gi)).collect();
    let pa1: Vec<f64> = p.iter().map(|v| v.powf(a - 1.0)).collect();
    let factor = -member.z.powf(1.0 - a) * weighted_mean(p_hat, &pa1);
    Ok(DMatrix::from_fn(k, k, |i, j| {
        factor * (0..m).map(|x| esc[x] * (g[i][x] - means[i]) * (g[j][x] - means[j])).sum::<f64>()
    }))
}
