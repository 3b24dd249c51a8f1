//! Generic root finding and maximization on small parameter vectors.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, max_halvings: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub theta: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub trace: Vec<TraceStep>,
    pub converged: bool,
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Central-difference Jacobian with `h = 1e-6 (1 + |x_j|)`. A stencil point
/// outside the domain halves the step (3 times), then falls back to a
/// one-sided difference.
pub fn fd_jacobian<F>(f: &F, x: &[f64], fx: &[f64]) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let rows = fx.len();
    let mut jac = DMatrix::zeros(rows, n);
    for j in 0..n {
        let mut h = 1e-6 * (1.0 + x[j].abs());
        let mut column = None;
        for _ in 0..4 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            match (f(&xp), f(&xm)) {
                (Ok(fp), Ok(fm)) => {
                    column = Some(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
                    break;
                }
                (Ok(fp), Err(_)) => {
                    column = Some(fp.iter().zip(fx).map(|(a, b)| (a - b) / h).collect());
                }
                (Err(_), Ok(fm)) => {
                    column = Some(fx.iter().zip(&fm).map(|(a, b)| (a - b) / h).collect());
                }
                (Err(e), Err(_)) => {
                    if h < 1e-9 {
                        return Err(e);
                    }
                }
            }
            h /= 2.0;
        }
        let col = column.ok_or_else(|| Error::Domain("Jacobian stencil left the domain".into()))?;
        for (i, v) in col.into_iter().enumerate() {
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

/// Minimum-norm least-squares solution of `J d = -r`.
fn newton_step(jac: &DMatrix<f64>, r: &[f64]) -> Option<Vec<f64>> {
    let rhs = -DVector::from_column_slice(r);
    let svd = jac.clone().svd(true, true);
    let max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let d = svd.solve(&rhs, 1e-14 * max.max(f64::MIN_POSITIVE)).ok()?;
    if d.iter().all(|v| v.is_finite()) {
        Some(d.iter().cloned().collect())
    } else {
        None
    }
}

/// Damped Newton on `F(x) = 0` with Armijo backtracking on `||F||^2`.
pub fn damped_newton<F>(f: &F, init: &[f64], opts: NewtonOptions) -> Result<Outcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    damped_newton_scaled(f, &|_: &[f64]| 1.0, init, opts)
}

/// Damped Newton whose convergence test and reported residual use
/// `||F(x)|| / scale(x)`; steps and backtracking use `F` itself.
pub fn damped_newton_scaled<F, S>(f: &F, scale: &S, init: &[f64], opts: NewtonOptions) -> Result<Outcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    S: Fn(&[f64]) -> f64,
{
    let scaled = |x: &[f64], r: &[f64]| inf_norm(r) / scale(x);
    let mut x = init.to_vec();
    let mut r = f(&x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("residual is not finite at the start".into()));
    }
    let mut residual = scaled(&x, &r);
    let mut trace = vec![TraceStep { theta: x.clone(), residual }];
    let mut iterations = 0;
    while residual > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let jac = fd_jacobian(f, &x, &r)?;
        let Some(d) = newton_step(&jac, &r) else {
            break;
        };
        let base = sq_norm(&r);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            if let Ok(rc) = f(&cand) {
                if rc.iter().all(|v| v.is_finite()) && sq_norm(&rc) <= (1.0 - 1e-4 * t) * base {
                    accepted = Some((cand, rc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, rn)) = accepted else {
            break;
        };
        x = xn;
        r = rn;
        residual = scaled(&x, &r);
        trace.push(TraceStep { theta: x.clone(), residual });
    }
    Ok(Outcome { converged: residual <= opts.tol, x, residual, iterations, trace })
}

/// Damped Newton from `init`; if that fails, from every point of
/// `init + {-1, 0, 1}^k * spread` for each spread in turn, stopping after the
/// first spread that yields a converged run. Picks the smallest residual,
/// ties (< 1e-12) by smallest `||x||`.
pub fn newton_multistart<F>(f: &F, init: &[f64], spreads: &[f64], opts: NewtonOptions) -> Result<Outcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    newton_multistart_scaled(f, &|_: &[f64]| 1.0, init, spreads, opts)
}

/// [`newton_multistart`] built on [`damped_newton_scaled`].
pub fn newton_multistart_scaled<F, S>(
    f: &F,
    scale: &S,
    init: &[f64],
    spreads: &[f64],
    opts: NewtonOptions,
) -> Result<Outcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    S: Fn(&[f64]) -> f64,
{
    let first = damped_newton_scaled(f, scale, init, opts);
    if let Ok(o) = &first {
        if o.converged {
            return first;
        }
    }
    let k = init.len();
    let mut best: Option<Outcome> = first.ok();
    let total = 3usize.pow(k as u32);
    for &spread in spreads {
        for code in 0..total {
            let mut c = code;
            let start: Vec<f64> = init
                .iter()
                .map(|x0| {
                    let digit = (c % 3) as f64 - 1.0;
                    c /= 3;
                    x0 + digit * spread
                })
                .collect();
            let Ok(o) = damped_newton_scaled(f, scale, &start, opts) else {
                continue;
            };
            best = Some(match best {
                Some(b) if !better(&o, &b) => b,
                _ => o,
            });
        }
        if best.as_ref().is_some_and(|b| b.converged) {
            break;
        }
    }
    best.ok_or_else(|| Error::Domain("no admissible starting point".into()))
}

fn better(a: &Outcome, b: &Outcome) -> bool {
    if (a.residual - b.residual).abs() < 1e-12 {
        sq_norm(&a.x) < sq_norm(&b.x)
    } else {
        a.residual < b.residual
    }
}

/// Five-point gradient with one Richardson extrapolation (`h` and `h/2`);
/// the step shrinks while a stencil point is inadmissible.
pub fn fd_gradient<G>(g: &G, x: &[f64]) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    let mut out = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let at = |s: f64| {
            let mut p = x.to_vec();
            p[j] += s;
            g(&p)
        };
        let five =
            |h: f64| -> Result<f64> { Ok((-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h)) };
        let mut h = 2e-4 * (1.0 + x[j].abs());
        let mut value = None;
        let mut last_err = None;
        for _ in 0..12 {
            match (five(h), five(h / 2.0)) {
                (Ok(coarse), Ok(fine)) => {
                    value = Some((16.0 * fine - coarse) / 15.0);
                    break;
                }
                (Err(e), _) | (_, Err(e)) => last_err = Some(e),
            }
            h /= 4.0;
        }
        match value {
            Some(v) => out.push(v),
            None => return Err(last_err.unwrap_or_else(|| Error::Domain("gradient stencil".into()))),
        }
    }
    Ok(out)
}

const POLISH_STEPS: usize = 5;

/// Newton step on the numerical gradient with a differenced Hessian, taken
/// only where the Hessian is negative definite and kept when the gradient shrinks.
fn newton_polish<G>(g: &G, x: &DVector<f64>, grad: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    let n = x.len();
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let h = 1e-4 * (1.0 + x[j].abs());
        let mut plus = x.clone();
        plus[j] += h;
        let mut minus = x.clone();
        minus[j] -= h;
        let gp = fd_gradient(g, plus.as_slice()).ok()?;
        let gm = fd_gradient(g, minus.as_slice()).ok()?;
        for i in 0..n {
            hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    let neg = -0.5 * (&hess + hess.transpose());
    let xn = x + neg.cholesky()?.solve(grad);
    let gn = DVector::from_vec(fd_gradient(g, xn.as_slice()).ok()?);
    (gn.amax() < grad.amax()).then_some((xn, gn))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-10, max_iter: 500 }
    }
}

/// Step along `d` for a function that is flat to rounding: accepted when the
/// value does not drop beyond rounding and the gradient shrinks.
fn flat_step<G>(
    g: &G,
    x: &DVector<f64>,
    fx: f64,
    d: &DVector<f64>,
    gnorm: f64,
) -> Option<(DVector<f64>, f64, DVector<f64>)>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    let noise = 1e3 * f64::EPSILON * fx.abs().max(1.0);
    let mut t = 1.0;
    for _ in 0..30 {
        let cand = x + t * d;
        if let Ok(fc) = g(cand.as_slice()) {
            if fc.is_finite() && fc >= fx - noise {
                if let Ok(gc) = fd_gradient(g, cand.as_slice()) {
                    let gc = DVector::from_vec(gc);
                    if gc.amax() < 0.9 * gnorm {
                        return Some((cand, fc, gc));
                    }
                }
            }
        }
        t *= 0.5;
    }
    None
}

/// BFGS ascent on `g`; inadmissible points count as `-inf`.
pub fn bfgs_maximize<G>(g: &G, init: &[f64], opts: BfgsOptions) -> Result<Outcome>
where
    G: Fn(&[f64]) -> Result<f64>,
{
    let n = init.len();
    let mut x = DVector::from_column_slice(init);
    let mut fx = g(x.as_slice())?;
    let mut grad = DVector::from_vec(fd_gradient(g, x.as_slice())?);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut trace = vec![TraceStep { theta: init.to_vec(), residual: grad.amax() }];
    let mut iterations = 0;
    while grad.amax() > opts.grad_tol && iterations < opts.max_iter {
        iterations += 1;
        let mut d = &hinv * &grad;
        if d.dot(&grad) <= 0.0 {
            hinv = DMatrix::identity(n, n);
            d = grad.clone();
        }
        let slope = d.dot(&grad);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = &x + t * &d;
            if let Ok(fc) = g(cand.as_slice()) {
                if fc.is_finite() && fc >= fx + 1e-4 * t * slope {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            t *= 0.5;
        }
        let accepted = match accepted {
            Some((xn, fnew)) => {
                let gn = DVector::from_vec(fd_gradient(g, xn.as_slice())?);
                Some((xn, fnew, gn))
            }
            None => flat_step(g, &x, fx, &d, grad.amax()),
        };
        let Some((xn, fnew, gn)) = accepted else {
            break;
        };
        let s = &xn - &x;
        // ascent on g is descent on -g: y = grad(-g)_new - grad(-g)_old
        let y = -(&gn - &grad);
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - rho * &s * y.transpose();
            let right = &eye - rho * &y * s.transpose();
            hinv = &left * &hinv * &right + rho * &s * s.transpose();
        }
        let stalled = (fnew - fx).abs() <= 1e-16 * fx.abs().max(1.0) && s.amax() <= 1e-15;
        x = xn;
        fx = fnew;
        grad = gn;
        trace.push(TraceStep { theta: x.iter().cloned().collect(), residual: grad.amax() });
        if stalled {
            break;
        }
    }
    if grad.amax() > opts.grad_tol {
        for _ in 0..POLISH_STEPS {
            let Some((xn, gn)) = newton_polish(g, &x, &grad) else {
                break;
            };
            iterations += 1;
            x = xn;
            grad = gn;
            trace.push(TraceStep { theta: x.iter().cloned().collect(), residual: grad.amax() });
            if grad.amax() <= opts.grad_tol {
                break;
            }
        }
    }
    let residual = grad.amax();
    Ok(Outcome { converged: residual <= opts.grad_tol, x: x.iter().cloned().collect(), residual, iterations, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn newton_solves_a_square_system() {
        let f = |x: &[f64]| Ok(vec![x[0] * x[0] - 2.0, x[1] - x[0]]);
        let o = damped_newton(&f, &[1.0, 0.0], NewtonOptions::default()).unwrap();
        assert!(o.converged);
        assert!((o.x[0] - 2f64.sqrt()).abs() < 1e-10);
        assert!(o.trace.windows(2).all(|w| w[1].residual <= w[0].residual));
    }

    #[test]
    fn newton_respects_the_domain() {
        // log x = -1 from far right; undamped steps would go negative
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                Err(Error::Domain("x <= 0".into()))
            } else {
                Ok(vec![x[0].ln() + 1.0])
            }
        };
        let o = damped_newton(&f, &[20.0], NewtonOptions::default()).unwrap();
        assert!(o.converged);
        assert!((o.x[0] - (-1f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn multistart_rescues_bad_init() {
        // root only reachable from positive side
        let f = |x: &[f64]| {
            if x[0] < -0.5 {
                Err(Error::Domain("left".into()))
            } else {
                Ok(vec![(x[0] - 1.0).powi(3) + (x[0] - 1.0)])
            }
        };
        let o = newton_multistart(&f, &[0.0], &[1.0], NewtonOptions::default()).unwrap();
        assert!(o.converged);
    }

    #[test]
    fn bfgs_on_a_concave_quadratic() {
        let g = |x: &[f64]| Ok(-(x[0] - 1.0).powi(2) - 3.0 * (x[1] + 2.0).powi(2) - x[0] * x[1]);
        let o = bfgs_maximize(&g, &[0.0, 0.0], BfgsOptions::default()).unwrap();
        // grad: -2(x0-1) - x1 = 0, -6(x1+2) - x0 = 0
        let x1 = (-12.0 - 1.0) / (6.0 - 0.5);
        let x0 = 1.0 - x1 / 2.0;
        assert!((o.x[0] - x0).abs() < 1e-8 && (o.x[1] - x1).abs() < 1e-8);
    }

    #[test]
    fn five_point_gradient_accuracy() {
        let g = |x: &[f64]| Ok((x[0] * 1.3).sin() * x[1].exp());
        let gr = fd_gradient(&g, &[0.4, -0.2]).unwrap();
        assert!((gr[0] - 1.3 * (0.52f64).cos() * (-0.2f64).exp()).abs() < 1e-11);
        assert!((gr[1] - (0.52f64).sin() * (-0.2f64).exp()).abs() < 1e-11);
    }
}
