//! Score functions, generalized likelihoods, estimating equations and their
//! solvers.
//!
//! Each [`EstimatorKind`] pairs a likelihood with the estimating equation
//! obtained from its first-order condition:
//!
//! | kind | estimating equation |
//! |------|---------------------|
//! | `Mle` | `sum P^ s = 0` |
//! | `Hellinger` | `sum P^^a P^(1-a) s = 0` |
//! | `Basu` | `sum P^ P^(a-1) s = sum P^a s` |
//! | `Jones` | the Basu equation with both sides normalized |
//!
//! At `a = 1` every kind dispatches to `Mle`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{FamilyKind, FamilySpec, Member};
use crate::measures::{power_sum, Alpha, Distribution, SampleData};
use crate::solver::{self, BfgsOptions, NewtonOptions, Outcome, TraceStep};

/// Members with a smaller probability count as boundary solutions.
pub const BOUNDARY_TOL: f64 = 1e-8;
/// Likelihood maxima must satisfy the matching estimating equation to this level.
pub const FIRST_ORDER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mle,
    Hellinger,
    Basu,
    Jones,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] =
        [EstimatorKind::Mle, EstimatorKind::Hellinger, EstimatorKind::Basu, EstimatorKind::Jones];

    /// Family on which this estimator coincides with a reverse projection.
    pub fn matched_family(self) -> FamilyKind {
        match self {
            EstimatorKind::Mle => FamilyKind::Exponential,
            EstimatorKind::Hellinger => FamilyKind::AlphaExponential,
            EstimatorKind::Basu => FamilyKind::NonNormalizedAlphaPowerLaw,
            EstimatorKind::Jones => FamilyKind::AlphaPowerLaw,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Mle => "mle",
            EstimatorKind::Hellinger => "hellinger",
            EstimatorKind::Basu => "basu",
            EstimatorKind::Jones => "jones",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown estimator `{s}`")))
    }
}

/// Estimator kind together with its exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimator {
    pub kind: EstimatorKind,
    pub alpha: Alpha,
}

impl Estimator {
    pub fn new(kind: EstimatorKind, alpha: Alpha) -> Self {
        Self { kind, alpha }
    }

    pub fn mle() -> Self {
        Self { kind: EstimatorKind::Mle, alpha: Alpha::new(1.0).expect("1 is a valid alpha") }
    }

    /// Kind after the `a = 1` dispatch.
    pub fn effective_kind(self) -> EstimatorKind {
        if self.alpha.is_one() {
            EstimatorKind::Mle
        } else {
            self.kind
        }
    }

    pub fn is_matched(self, family: FamilyKind) -> bool {
        self.effective_kind().matched_family() == family
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    EstimatingEq,
    ProjectionEq,
    LikelihoodMax,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub theta_star: Vec<f64>,
    pub p_star: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub trace: Vec<TraceStep>,
    pub route: Route,
    /// Estimating-equation residual at the likelihood maximum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_order_residual: Option<f64>,
}

/// Scores `s(x; theta)` for every symbol (outer index: symbol).
pub fn scores(spec: &FamilySpec, theta: &[f64]) -> Result<(Member, Vec<Vec<f64>>)> {
    let member = spec.eval_member(theta)?;
    let p = member.dist.probs();
    let u = &member.bracket;
    let k = spec.k();
    let m = spec.m();
    let fx: Vec<Vec<f64>> = (0..m).map(|x| spec.f_at(x)).collect();
    let out = match spec.kind() {
        FamilyKind::Exponential => {
            let ef = spec.mean_stat(p);
            fx.iter().map(|f| f.iter().zip(&ef).map(|(a, b)| a - b).collect()).collect()
        }
        FamilyKind::AlphaPowerLaw | FamilyKind::AlphaExponential => {
            let sign = if spec.kind() == FamilyKind::AlphaPowerLaw { -1.0 } else { 1.0 };
            let mut mean = vec![0.0; k];
            for x in 0..m {
                for i in 0..k {
                    mean[i] += p[x] * fx[x][i] / u[x];
                }
            }
            (0..m).map(|x| (0..k).map(|i| sign * (fx[x][i] / u[x] - mean[i])).collect()).collect()
        }
        FamilyKind::NonNormalizedAlphaPowerLaw => {
            let tilde = weighted_stat_mean(spec, &member);
            (0..m).map(|x| (0..k).map(|i| -(fx[x][i] - tilde[i]) / u[x]).collect()).collect()
        }
    };
    Ok((member, out))
}

/// `sum w f / sum w` with `w = P / u`: minus the gradient of `Z(theta)`.
fn weighted_stat_mean(spec: &FamilySpec, member: &Member) -> Vec<f64> {
    let p = member.dist.probs();
    let w: Vec<f64> = p.iter().zip(&member.bracket).map(|(p, u)| p / u).collect();
    let total: f64 = w.iter().sum();
    spec.mean_stat(&w).into_iter().map(|v| v / total).collect()
}

/// Gradient of the internal normalizer of the non-normalized family.
pub fn normalizer_gradient(spec: &FamilySpec, theta: &[f64]) -> Result<Vec<f64>> {
    if spec.kind() != FamilyKind::NonNormalizedAlphaPowerLaw {
        return Err(Error::InvalidFamily("normalizer gradient applies to the non-normalized family".into()));
    }
    let member = spec.eval_member(theta)?;
    Ok(weighted_stat_mean(spec, &member).into_iter().map(|v| -v).collect())
}

/// Score at a single symbol.
pub fn score(spec: &FamilySpec, theta: &[f64], x: usize) -> Result<Vec<f64>> {
    if x >= spec.m() {
        return Err(Error::Dimension(format!("symbol {x} outside alphabet")));
    }
    Ok(scores(spec, theta)?.1.swap_remove(x))
}

fn check_sample(spec: &FamilySpec, sample: &SampleData) -> Result<()> {
    if sample.alphabet().len() != spec.m() {
        return Err(Error::Dimension(format!(
            "sample alphabet has {} symbols, family has {}",
            sample.alphabet().len(),
            spec.m()
        )));
    }
    Ok(())
}

/// Likelihood from the empirical measure and the model distribution.
pub fn likelihood_of(est: Estimator, p_hat: &[f64], p: &[f64]) -> f64 {
    let a = est.alpha.value();
    match est.effective_kind() {
        EstimatorKind::Mle => p_hat.iter().zip(p).filter(|(h, _)| **h > 0.0).map(|(h, p)| h * p.ln()).sum(),
        EstimatorKind::Hellinger => {
            let s: f64 = p_hat.iter().zip(p).filter(|(h, _)| **h > 0.0).map(|(h, p)| h.powf(a) * p.powf(1.0 - a)).sum();
            s.ln() / (1.0 - a)
        }
        EstimatorKind::Basu => {
            let data: f64 = p_hat
                .iter()
                .zip(p)
                .filter(|(h, _)| **h > 0.0)
                .map(|(h, p)| h * (a * p.powf(a - 1.0) - 1.0) / (a - 1.0))
                .sum();
            data - power_sum(p, a)
        }
        EstimatorKind::Jones => {
            let data: f64 = p_hat.iter().zip(p).filter(|(h, _)| **h > 0.0).map(|(h, p)| h * p.powf(a - 1.0)).sum();
            a / (a - 1.0) * data.ln() - power_sum(p, a).ln()
        }
    }
}

pub fn likelihood(est: Estimator, spec: &FamilySpec, theta: &[f64], sample: &SampleData) -> Result<f64> {
    check_sample(spec, sample)?;
    let member = spec.eval_member(theta)?;
    Ok(likelihood_of(est, sample.empirical().probs(), member.dist.probs()))
}

/// Estimating-equation residual from precomputed scores.
pub fn residual_of(est: Estimator, p_hat: &[f64], p: &[f64], s: &[Vec<f64>]) -> Vec<f64> {
    let a = est.alpha.value();
    let k = s.first().map_or(0, Vec::len);
    let weighted = |w: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut out = vec![0.0; k];
        for (x, sx) in s.iter().enumerate() {
            let wx = w(x);
            if wx != 0.0 {
                for i in 0..k {
                    out[i] += wx * sx[i];
                }
            }
        }
        out
    };
    let data_pow = |x: usize| {
        if p_hat[x] > 0.0 {
            p_hat[x] * p[x].powf(a - 1.0)
        } else {
            0.0
        }
    };
    match est.effective_kind() {
        EstimatorKind::Mle => weighted(&|x| p_hat[x]),
        EstimatorKind::Hellinger => weighted(&|x| {
            if p_hat[x] > 0.0 {
                p_hat[x].powf(a) * p[x].powf(1.0 - a)
            } else {
                0.0
            }
        }),
        EstimatorKind::Basu => {
            let lhs = weighted(&data_pow);
            let rhs = weighted(&|x| p[x].powf(a));
            lhs.iter().zip(&rhs).map(|(l, r)| l - r).collect()
        }
        EstimatorKind::Jones => {
            let lhs = weighted(&data_pow);
            let rhs = weighted(&|x| p[x].powf(a));
            let ld: f64 = (0..p.len()).map(data_pow).sum();
            let rd = power_sum(p, a);
            lhs.iter().zip(&rhs).map(|(l, r)| l / ld - r / rd).collect()
        }
    }
}

pub fn estimating_residual(est: Estimator, spec: &FamilySpec, theta: &[f64], sample: &SampleData) -> Result<Vec<f64>> {
    check_sample(spec, sample)?;
    let (member, s) = scores(spec, theta)?;
    Ok(residual_of(est, sample.empirical().probs(), member.dist.probs(), &s))
}

/// Spreads of the multi-start grids around the initial point, tried in order.
const MULTISTART_SPREADS: [f64; 4] = [0.5, 0.25, 1.0, 2.0];

/// Shared Newton route for estimating and projection equations.
/// `residual(p_hat, theta)` must vanish at `theta` when `p_hat = P_theta`;
/// convergence is judged on `|residual| / scale(p_hat, theta)`.
///
/// Tries damped Newton from `init`, then continuation along
/// `(1 - t) P_init + t p_hat` from `t = 0` (where `init` is a root) to
/// `t = 1`, then a multi-start grid.
pub(crate) fn solve_root<F, S>(
    spec: &FamilySpec,
    residual: F,
    scale: S,
    p_hat: &[f64],
    init: &[f64],
    route: Route,
    opts: NewtonOptions,
) -> Result<SolveReport>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
    S: Fn(&[f64], &[f64]) -> f64,
{
    if init.len() != spec.k() {
        return Err(Error::Dimension(format!("initial theta has {} entries, family has {}", init.len(), spec.k())));
    }
    let target = |th: &[f64]| residual(p_hat, th);
    let target_scale = |th: &[f64]| scale(p_hat, th);
    if let Ok(o) = solver::damped_newton_scaled(&target, &target_scale, init, opts) {
        if o.converged {
            return finish(spec, o, route);
        }
    }
    if let Some(o) = continuation(spec, &residual, &scale, p_hat, init, opts) {
        if let Ok(report) = finish(spec, o, route) {
            return Ok(report);
        }
    }
    let outcome = solver::newton_multistart_scaled(&target, &target_scale, init, &MULTISTART_SPREADS, opts)?;
    finish(spec, outcome, route)
}

/// Smallest continuation step before giving up.
const MIN_CONTINUATION_STEP: f64 = 1e-4;

fn continuation<F, S>(
    spec: &FamilySpec,
    residual: &F,
    scale: &S,
    p_hat: &[f64],
    init: &[f64],
    opts: NewtonOptions,
) -> Option<Outcome>
where
    F: Fn(&[f64], &[f64]) -> Result<Vec<f64>>,
    S: Fn(&[f64], &[f64]) -> f64,
{
    let start = spec.eval_member(init).ok()?.dist.probs().to_vec();
    let (mut t, mut h) = (0.0, 0.25);
    let mut theta = init.to_vec();
    let mut iterations = 0;
    let mut last = None;
    while t < 1.0 {
        let next = if t + h > 1.0 - 1e-12 { 1.0 } else { t + h };
        let mix: Vec<f64> = start.iter().zip(p_hat).map(|(a, b)| (1.0 - next) * a + next * b).collect();
        let step =
            solver::damped_newton_scaled(&|th: &[f64]| residual(&mix, th), &|th: &[f64]| scale(&mix, th), &theta, opts);
        match step {
            Ok(o) if o.converged => {
                iterations += o.iterations;
                theta.clone_from(&o.x);
                t = next;
                h = (2.0 * h).min(0.5);
                last = Some(o);
            }
            _ => {
                h /= 2.0;
                if h < MIN_CONTINUATION_STEP {
                    return None;
                }
            }
        }
    }
    last.map(|o| Outcome { iterations, ..o })
}

fn finish(spec: &FamilySpec, outcome: Outcome, route: Route) -> Result<SolveReport> {
    let fail =
        |o: &Outcome| Error::NoConvergence { iterations: o.iterations, residual: o.residual, best_theta: o.x.clone() };
    if !outcome.converged {
        return Err(fail(&outcome));
    }
    let member = spec.eval_member(&outcome.x)?;
    if member.dist.probs().iter().any(|&p| p < BOUNDARY_TOL) {
        return Err(fail(&outcome));
    }
    Ok(SolveReport {
        theta_star: outcome.x,
        p_star: member.dist.probs().to_vec(),
        residual_norm: outcome.residual,
        iterations: outcome.iterations,
        trace: outcome.trace,
        route,
        first_order_residual: None,
    })
}

pub fn solve_estimating_equation(
    est: Estimator,
    spec: &FamilySpec,
    sample: &SampleData,
    init: &[f64],
) -> Result<SolveReport> {
    solve_estimating_equation_with(est, spec, sample, init, NewtonOptions::default())
}

pub fn solve_estimating_equation_with(
    est: Estimator,
    spec: &FamilySpec,
    sample: &SampleData,
    init: &[f64],
    opts: NewtonOptions,
) -> Result<SolveReport> {
    check_sample(spec, sample)?;
    let p_hat = sample.empirical().probs();
    solve_root(
        spec,
        |p_hat: &[f64], th: &[f64]| {
            let (member, s) = scores(spec, th)?;
            Ok(residual_of(est, p_hat, member.dist.probs(), &s))
        },
        |p_hat: &[f64], th: &[f64]| match scores(spec, th) {
            Ok((member, s)) => residual_scale(est, p_hat, member.dist.probs(), &s).min(1.0),
            Err(_) => 1.0,
        },
        p_hat,
        init,
        Route::EstimatingEq,
        opts,
    )
}

/// Size of the terms summed in the estimating residual: data-side plus
/// model-side weights against the largest score entry. Both shrink together
/// along the spurious roots at infinity of the power-law families and of
/// the alpha-weighted estimators; dividing by it removes those roots.
fn residual_scale(est: Estimator, p_hat: &[f64], p: &[f64], s: &[Vec<f64>]) -> f64 {
    let a = est.alpha.value();
    let data_pow = |x: usize| {
        if p_hat[x] > 0.0 {
            p_hat[x] * p[x].powf(a - 1.0)
        } else {
            0.0
        }
    };
    let weight: Box<dyn Fn(usize) -> f64> = match est.effective_kind() {
        EstimatorKind::Mle => Box::new(|x| p_hat[x] + p[x]),
        EstimatorKind::Hellinger => {
            Box::new(|x| if p_hat[x] > 0.0 { p_hat[x].powf(a) * p[x].powf(1.0 - a) } else { 0.0 } + p[x])
        }
        EstimatorKind::Basu => Box::new(|x| data_pow(x) + p[x].powf(a)),
        EstimatorKind::Jones => {
            let ld: f64 = (0..p.len()).map(data_pow).sum();
            let rd = power_sum(p, a);
            Box::new(move |x| data_pow(x) / ld + p[x].powf(a) / rd)
        }
    };
    let size: f64 = s.iter().enumerate().map(|(x, sx)| 0.5 * weight(x) * solver::inf_norm(sx)).sum();
    size.max(f64::MIN_POSITIVE)
}

pub fn maximize_likelihood(
    est: Estimator,
    spec: &FamilySpec,
    sample: &SampleData,
    init: &[f64],
) -> Result<SolveReport> {
    check_sample(spec, sample)?;
    if init.len() != spec.k() {
        return Err(Error::Dimension("initial theta has the wrong length".into()));
    }
    let g = |th: &[f64]| likelihood(est, spec, th, sample);
    let outcome = solver::bfgs_maximize(&g, init, BfgsOptions::default())?;
    let fail = |o: &Outcome, residual: f64| Error::NoConvergence {
        iterations: o.iterations,
        residual,
        best_theta: o.x.clone(),
    };
    let member = spec.eval_member(&outcome.x)?;
    if member.dist.probs().iter().any(|&p| p < BOUNDARY_TOL) {
        return Err(fail(&outcome, outcome.residual));
    }
    let first_order = solver::inf_norm(&estimating_residual(est, spec, &outcome.x, sample)?);
    if first_order > FIRST_ORDER_TOL {
        return Err(fail(&outcome, first_order));
    }
    Ok(SolveReport {
        theta_star: outcome.x,
        p_star: member.dist.probs().to_vec(),
        residual_norm: outcome.residual,
        iterations: outcome.iterations,
        trace: outcome.trace,
        route: Route::LikelihoodMax,
        first_order_residual: Some(first_order),
    })
}

/// Divergence minimized by the reverse projection matched to `est`.
pub fn matched_divergence(est: Estimator, p_hat: &Distribution, p: &Distribution) -> Result<f64> {
    use crate::divergence::{divergence, DivergenceKind};
    let kind = match est.effective_kind() {
        EstimatorKind::Mle => DivergenceKind::Kl,
        EstimatorKind::Hellinger => DivergenceKind::Renyi,
        EstimatorKind::Basu => DivergenceKind::DensityPower,
        EstimatorKind::Jones => DivergenceKind::RelAlphaEntropy,
    };
    divergence(kind, p_hat, p, est.alpha)
}
