//! Kullback-Leibler, Renyi, density power and relative alpha-entropy
//! divergences on a finite alphabet.
//!
//! All four accept boundary distributions with the convention
//! `0 * log 0 = 0`. A density power divergence whose first argument is not
//! absolutely continuous with respect to the second is `+inf` when
//! `alpha < 1`; that value is returned, not raised.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::measures::{Alpha, Distribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    Kl,
    Renyi,
    DensityPower,
    RelAlphaEntropy,
}

impl DivergenceKind {
    pub const ALL: [DivergenceKind; 4] =
        [DivergenceKind::Kl, DivergenceKind::Renyi, DivergenceKind::DensityPower, DivergenceKind::RelAlphaEntropy];
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DivergenceKind::Kl => "kl",
            DivergenceKind::Renyi => "renyi",
            DivergenceKind::DensityPower => "dpd",
            DivergenceKind::RelAlphaEntropy => "rae",
        })
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kl" => Ok(DivergenceKind::Kl),
            "renyi" => Ok(DivergenceKind::Renyi),
            "dpd" => Ok(DivergenceKind::DensityPower),
            "rae" => Ok(DivergenceKind::RelAlphaEntropy),
            other => Err(Error::Input(format!("unknown divergence kind `{other}`"))),
        }
    }
}

fn check_dims(p: &Distribution, q: &Distribution) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("P has {} entries, Q has {}", p.len(), q.len())));
    }
    Ok(())
}

/// `log sum_x exp(t_x)` over finite terms; `-inf` for an empty sum.
pub(crate) fn log_sum_exp(terms: impl IntoIterator<Item = f64>) -> f64 {
    let terms: Vec<f64> = terms.into_iter().collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `I(P, Q) = sum_x P(x) log(P(x) / Q(x))`.
pub fn kl(p: &Distribution, q: &Distribution) -> Result<f64> {
    check_dims(p, q)?;
    let mut acc = 0.0;
    for (x, (&pi, &qi)) in p.probs().iter().zip(q.probs()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::Domain(format!("Q vanishes at symbol {x} where P does not")));
        }
        acc += pi * (pi / qi).ln();
    }
    Ok(acc)
}

/// `D_a(P, Q) = log(sum_x P^a Q^(1-a)) / (a - 1)`.
pub fn renyi_d(p: &Distribution, q: &Distribution, alpha: Alpha) -> Result<f64> {
    check_dims(p, q)?;
    if alpha.is_one() {
        return kl(p, q);
    }
    let a = alpha.value();
    let mut terms = Vec::with_capacity(p.len());
    for (x, (&pi, &qi)) in p.probs().iter().zip(q.probs()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            if a > 1.0 {
                return Err(Error::Domain(format!("Q vanishes at symbol {x} where P does not (alpha > 1)")));
            }
            continue;
        }
        terms.push(a * pi.ln() + (1.0 - a) * qi.ln());
    }
    let ls = log_sum_exp(terms);
    if ls == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(ls / (a - 1.0))
}

/// Density power divergence
/// `B_a(P, Q) = a/(1-a) sum P Q^(a-1) - 1/(1-a) sum P^a + sum Q^a`.
pub fn density_power_b(p: &Distribution, q: &Distribution, alpha: Alpha) -> Result<f64> {
    check_dims(p, q)?;
    if alpha.is_one() {
        return kl(p, q);
    }
    Ok(density_power_raw(p.probs(), q.probs(), alpha.value()))
}

/// Unchecked density power divergence on raw vectors; `+inf` when `a < 1`
/// and `Q` vanishes where `P` does not.
pub(crate) fn density_power_raw(p: &[f64], q: &[f64], a: f64) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let cross = if pi == 0.0 {
            0.0
        } else if qi == 0.0 {
            if a < 1.0 {
                return f64::INFINITY;
            }
            0.0
        } else {
            a * pi * qi.powf(a - 1.0)
        };
        let pa = if pi > 0.0 { pi.powf(a) } else { 0.0 };
        let qa = if qi > 0.0 { qi.powf(a) } else { 0.0 };
        acc += (cross - pa + (1.0 - a) * qa) / (1.0 - a);
    }
    acc
}

/// Relative alpha-entropy
/// `a/(1-a) log sum P Q^(a-1) - 1/(1-a) log sum P^a + log sum Q^a`.
pub fn rel_alpha_entropy_i(p: &Distribution, q: &Distribution, alpha: Alpha) -> Result<f64> {
    check_dims(p, q)?;
    if alpha.is_one() {
        return kl(p, q);
    }
    let a = alpha.value();
    let mut cross = Vec::with_capacity(p.len());
    for (x, (&pi, &qi)) in p.probs().iter().zip(q.probs()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            if a < 1.0 {
                return Err(Error::Domain(format!("Q vanishes at symbol {x} where P does not (alpha < 1)")));
            }
            continue;
        }
        cross.push(pi.ln() + (a - 1.0) * qi.ln());
    }
    let log_cross = log_sum_exp(cross);
    if log_cross == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    let log_p = log_sum_exp(p.probs().iter().filter(|&&v| v > 0.0).map(|&v| a * v.ln()));
    let log_q = log_sum_exp(q.probs().iter().filter(|&&v| v > 0.0).map(|&v| a * v.ln()));
    Ok(a / (1.0 - a) * log_cross - log_p / (1.0 - a) + log_q)
}

/// Dispatches on `kind`; `alpha == 1` routes every kind to [`kl`].
pub fn divergence(kind: DivergenceKind, p: &Distribution, q: &Distribution, alpha: Alpha) -> Result<f64> {
    match kind {
        DivergenceKind::Kl => kl(p, q),
        DivergenceKind::Renyi => renyi_d(p, q, alpha),
        DivergenceKind::DensityPower => density_power_b(p, q, alpha),
        DivergenceKind::RelAlphaEntropy => rel_alpha_entropy_i(p, q, alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }
    fn a(x: f64) -> Alpha {
        Alpha::new(x).unwrap()
    }

    #[test]
    fn kl_examples() {
        let p = d(&[0.3, 0.7]);
        assert_eq!(kl(&p, &p).unwrap(), 0.0);
        let half = d(&[0.5, 0.5]);
        let skew = d(&[0.25, 0.75]);
        let expect = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert_abs_diff_eq!(kl(&half, &skew).unwrap(), expect, epsilon = 1e-15);
        assert_abs_diff_eq!(kl(&half, &skew).unwrap(), 0.143841, epsilon = 1e-6);
        assert_abs_diff_eq!(kl(&skew, &half).unwrap(), 0.130812, epsilon = 1e-6);
    }

    #[test]
    fn kl_zero_conventions() {
        let p = d(&[0.0, 1.0]);
        let q = d(&[0.5, 0.5]);
        assert_abs_diff_eq!(kl(&p, &q).unwrap(), 2f64.ln(), epsilon = 1e-15);
        assert!(kl(&q, &p).is_err());
    }

    #[test]
    fn renyi_examples() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[0.25, 0.75]);
        assert_abs_diff_eq!(renyi_d(&p, &p, a(2.0)).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(renyi_d(&p, &q, a(2.0)).unwrap(), (4.0f64 / 3.0).ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(renyi_d(&p, &q, a(2.0)).unwrap(), 0.287682, epsilon = 1e-6);
        let expect = -2.0 * (0.125f64.sqrt() + 0.375f64.sqrt()).ln();
        assert_abs_diff_eq!(renyi_d(&p, &q, a(0.5)).unwrap(), expect, epsilon = 1e-14);
        assert_abs_diff_eq!(renyi_d(&p, &q, a(0.5)).unwrap(), 0.069336, epsilon = 1e-6);
    }

    #[test]
    fn density_power_examples() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[0.25, 0.75]);
        assert_abs_diff_eq!(density_power_b(&p, &p, a(2.0)).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(density_power_b(&p, &q, a(2.0)).unwrap(), 0.125, epsilon = 1e-15);
        let p = d(&[0.9, 0.1]);
        let q = d(&[0.1, 0.9]);
        assert_abs_diff_eq!(density_power_b(&p, &q, a(2.0)).unwrap(), 1.28, epsilon = 1e-14);
    }

    #[test]
    fn density_power_infinite_convention() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[0.0, 1.0]);
        assert_eq!(density_power_b(&p, &q, a(0.5)).unwrap(), f64::INFINITY);
        assert!(density_power_b(&p, &q, a(2.0)).unwrap().is_finite());
    }

    #[test]
    fn rel_alpha_entropy_examples() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[0.25, 0.75]);
        assert_abs_diff_eq!(rel_alpha_entropy_i(&p, &p, a(2.0)).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rel_alpha_entropy_i(&p, &q, a(2.0)).unwrap(), 1.25f64.ln(), epsilon = 1e-14);
        assert_abs_diff_eq!(rel_alpha_entropy_i(&q, &p, a(2.0)).unwrap(), 0.223144, epsilon = 1e-6);
    }

    #[test]
    fn dispatch_and_limits() {
        let p = d(&[0.5, 0.5]);
        let q = d(&[0.25, 0.75]);
        let k = kl(&p, &q).unwrap();
        assert_eq!(divergence(DivergenceKind::Renyi, &p, &q, a(1.0)).unwrap(), k);
        let b = divergence(DivergenceKind::DensityPower, &p, &q, a(1.0001)).unwrap();
        assert!((b - k).abs() <= 1e-3);
        let i = divergence(DivergenceKind::RelAlphaEntropy, &p, &q, a(0.9999)).unwrap();
        assert!((i - k).abs() <= 1e-3);
    }

    #[test]
    fn renyi_survives_underflow() {
        let p = d(&[1e-300, 1.0 - 1e-300]);
        let q = d(&[1.0 - 1e-300, 1e-300]);
        let v = renyi_d(&p, &q, a(3.0)).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn kind_parsing() {
        for k in DivergenceKind::ALL {
            assert_eq!(k.to_string().parse::<DivergenceKind>().unwrap(), k);
        }
        assert!("hellinger".parse::<DivergenceKind>().is_err());
    }

    mod props {
        use super::super::*;
        use crate::measures::normalize;
        use proptest::prelude::*;

        fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
            (2usize..6).prop_flat_map(|m| {
                (proptest::collection::vec(0.05f64..1.0, m), proptest::collection::vec(0.05f64..1.0, m))
            })
        }

        proptest! {
            #[test]
            fn b2_is_squared_euclidean((w, v) in pair()) {
                let p = normalize(&w).unwrap();
                let q = normalize(&v).unwrap();
                let direct: f64 = p.probs().iter().zip(q.probs()).map(|(x, y)| (x - y).powi(2)).sum();
                let b = density_power_b(&p, &q, Alpha::new(2.0).unwrap()).unwrap();
                prop_assert!((b - direct).abs() <= 1e-12);
            }

            #[test]
            fn nonnegative_and_zero_on_diagonal((w, v) in pair(), ai in 0usize..6) {
                let alpha = Alpha::new([0.3, 0.5, 0.8, 1.2, 2.0, 3.0][ai]).unwrap();
                let p = normalize(&w).unwrap();
                let q = normalize(&v).unwrap();
                for kind in DivergenceKind::ALL {
                    prop_assert!(divergence(kind, &p, &q, alpha).unwrap() >= -1e-12);
                    prop_assert!(divergence(kind, &p, &p, alpha).unwrap().abs() <= 1e-12);
                }
            }
        }
    }
}
