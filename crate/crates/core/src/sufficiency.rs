//! Sufficient statistics of the generalized likelihoods and checks of the
//! factorization `L(theta) = g(theta, T) + h(sample)`.
//!
//! | family | likelihood | statistic |
//! |--------|------------|-----------|
//! | exponential | log-likelihood | `f_bar` |
//! | non-normalized power law | Basu | `f_bar` |
//! | power law | Jones | `f_bar / mean(Q^(a-1))` |
//! | alpha-exponential | Hellinger | escort mean of `f` over escort mean of `Q^(1-a)` |

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{likelihood, Estimator, EstimatorKind};
use crate::family::{FamilyKind, FamilySpec};
use crate::measures::{escort_weights, power_sum, Alphabet, SampleData};

/// Two statistics closer than this count as equal.
pub const EQUAL_T_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficientStatistic {
    pub model: String,
    pub value: Vec<f64>,
    pub components: String,
}

/// Generalized likelihood attached to each family.
pub fn likelihood_for(model: FamilyKind, spec: &FamilySpec) -> Estimator {
    let kind = match model {
        FamilyKind::Exponential => EstimatorKind::Mle,
        FamilyKind::NonNormalizedAlphaPowerLaw => EstimatorKind::Basu,
        FamilyKind::AlphaPowerLaw => EstimatorKind::Jones,
        FamilyKind::AlphaExponential => EstimatorKind::Hellinger,
    };
    Estimator::new(kind, spec.alpha())
}

/// Statistic from an empirical measure.
pub fn statistic_of(model: FamilyKind, spec: &FamilySpec, p_hat: &[f64]) -> Result<SufficientStatistic> {
    if p_hat.len() != spec.m() {
        return Err(Error::Dimension("empirical measure length differs from family".into()));
    }
    let a = spec.alpha().value();
    let q = spec.q().probs();
    let (value, components) = match model {
        FamilyKind::Exponential | FamilyKind::NonNormalizedAlphaPowerLaw => (spec.mean_stat(p_hat), "f_bar"),
        FamilyKind::AlphaPowerLaw => {
            let mean_qa: f64 = p_hat.iter().zip(q).map(|(h, q)| h * q.powf(a - 1.0)).sum();
            (spec.mean_stat(p_hat).into_iter().map(|v| v / mean_qa).collect(), "f_bar / mean(Q^(a-1))")
        }
        FamilyKind::AlphaExponential => {
            let esc = escort_weights(p_hat, a);
            let mean_q: f64 = esc.iter().zip(q).map(|(e, q)| e * q.powf(1.0 - a)).sum();
            (
                spec.mean_stat(&esc).into_iter().map(|v| v / mean_q).collect(),
                "escort mean of f / escort mean of Q^(1-a)",
            )
        }
    };
    Ok(SufficientStatistic { model: model.to_string(), value, components: components.to_string() })
}

pub fn sufficient_statistic(model: FamilyKind, spec: &FamilySpec, sample: &SampleData) -> Result<SufficientStatistic> {
    if sample.n() == 0 {
        return Err(Error::EmptySample);
    }
    statistic_of(model, spec, sample.empirical().probs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub t_a: Vec<f64>,
    pub t_b: Vec<f64>,
    pub equal_t: bool,
    /// Grid points where both likelihoods are defined.
    pub points: usize,
    /// Mean of `L(theta; a) - L(theta; b)` over the grid.
    pub difference_mean: f64,
    /// Largest deviation of that difference from its mean.
    pub max_deviation: f64,
    pub argmax_a: usize,
    pub argmax_b: usize,
    pub argmax_equal: bool,
}

pub fn factorization_check(
    model: FamilyKind,
    spec: &FamilySpec,
    sample_a: &SampleData,
    sample_b: &SampleData,
    theta_grid: &[Vec<f64>],
) -> Result<FactorizationReport> {
    if sample_a.alphabet() != sample_b.alphabet() {
        return Err(Error::Input("samples use different alphabets".into()));
    }
    let t_a = sufficient_statistic(model, spec, sample_a)?.value;
    let t_b = sufficient_statistic(model, spec, sample_b)?.value;
    let equal_t = t_a.iter().zip(&t_b).all(|(x, y)| (x - y).abs() <= EQUAL_T_TOL);
    let est = likelihood_for(model, spec);
    let mut diffs = Vec::new();
    let mut best_a = (usize::MAX, f64::NEG_INFINITY);
    let mut best_b = (usize::MAX, f64::NEG_INFINITY);
    for (idx, theta) in theta_grid.iter().enumerate() {
        let (Ok(la), Ok(lb)) = (likelihood(est, spec, theta, sample_a), likelihood(est, spec, theta, sample_b)) else {
            continue;
        };
        if la > best_a.1 {
            best_a = (idx, la);
        }
        if lb > best_b.1 {
            best_b = (idx, lb);
        }
        diffs.push(la - lb);
    }
    if diffs.is_empty() {
        return Err(Error::NoAdmissibleTheta);
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let max_deviation = diffs.iter().map(|d| (d - mean).abs()).fold(0.0, f64::max);
    Ok(FactorizationReport {
        t_a,
        t_b,
        equal_t,
        points: diffs.len(),
        difference_mean: mean,
        max_deviation,
        argmax_a: best_a.0,
        argmax_b: best_b.0,
        argmax_equal: best_a.0 == best_b.0,
    })
}

/// `(g, h)` with `L2 = g + h` on the non-normalized family;
/// `h = a/(a-1) mean(Q^(a-1))` and `g` uses the sample only through `f_bar`.
pub fn basu_decomposition(spec: &FamilySpec, theta: &[f64], sample: &SampleData) -> Result<(f64, f64)> {
    if spec.kind() != FamilyKind::NonNormalizedAlphaPowerLaw {
        return Err(Error::InvalidFamily("decomposition applies to the non-normalized family".into()));
    }
    let a = spec.alpha().value();
    let p_hat = sample.empirical().probs();
    let mean_qa: f64 = p_hat.iter().zip(spec.q().probs()).map(|(h, q)| h * q.powf(a - 1.0)).sum();
    let h = a / (a - 1.0) * mean_qa;
    let member = spec.eval_member(theta)?;
    let f_bar = spec.mean_stat(p_hat);
    let tf: f64 = theta.iter().zip(&f_bar).map(|(t, f)| t * f).sum();
    let g = -(a * member.z + a * tf + 1.0 / (a - 1.0) + power_sum(member.dist.probs(), a));
    Ok((g, h))
}

/// Count vectors of total `1..=n_max` over `m` symbols, in lexicographic order.
fn count_vectors(m: usize, n_max: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(m, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for n in 1..=n_max {
        rec(m, n, &mut Vec::with_capacity(m), &mut out);
    }
    out
}

fn proportional(a: &[usize], b: &[usize]) -> bool {
    let (na, nb): (usize, usize) = (a.iter().sum(), b.iter().sum());
    a.iter().zip(b).all(|(x, y)| x * nb == y * na)
}

/// First pair (in enumeration order) of samples with different empirical
/// measures but equal statistic, searching all samples of size at most `n_max`
/// (only those hitting every symbol when `full_support`).
pub fn find_equal_statistic_pair(
    model: FamilyKind,
    spec: &FamilySpec,
    n_max: usize,
    full_support: bool,
) -> Result<Option<(SampleData, SampleData)>> {
    let mut vectors = count_vectors(spec.m(), n_max);
    if full_support {
        vectors.retain(|c| !c.contains(&0));
    }
    let stats = vectors
        .iter()
        .map(|c| {
            let n: usize = c.iter().sum();
            let p: Vec<f64> = c.iter().map(|&v| v as f64 / n as f64).collect();
            statistic_of(model, spec, &p).map(|s| s.value)
        })
        .collect::<Result<Vec<_>>>()?;
    let alphabet = Alphabet::numeric(spec.m())?;
    for i in 0..vectors.len() {
        for j in i + 1..vectors.len() {
            if proportional(&vectors[i], &vectors[j]) {
                continue;
            }
            if stats[i].iter().zip(&stats[j]).all(|(x, y)| (x - y).abs() <= EQUAL_T_TOL) {
                return Ok(Some((
                    SampleData::from_counts(alphabet.clone(), &vectors[i])?,
                    SampleData::from_counts(alphabet, &vectors[j])?,
                )));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{empirical, Alpha, Distribution};
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn spec(kind: FamilyKind, q: &[f64], f: &[f64], a: f64) -> FamilySpec {
        FamilySpec::new(
            kind,
            Distribution::new(q.to_vec()).unwrap(),
            DMatrix::from_row_slice(1, f.len(), f),
            Alpha::new(a).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn bernoulli_mean() {
        let s = spec(FamilyKind::Exponential, &[0.5, 0.5], &[0.0, 1.0], 1.0);
        let ab = Alphabet::numeric(2).unwrap();
        let sm = empirical(&["0", "1", "1", "0", "1"], &ab).unwrap();
        let t = sufficient_statistic(FamilyKind::Exponential, &s, &sm).unwrap();
        assert_abs_diff_eq!(t.value[0], 0.6, epsilon = 1e-15);
        let t2 = sufficient_statistic(FamilyKind::NonNormalizedAlphaPowerLaw, &s, &sm).unwrap();
        assert_eq!(t.value, t2.value);
    }

    #[test]
    fn uniform_reference_scales_mean() {
        let s = spec(FamilyKind::AlphaPowerLaw, &[0.25; 4], &[0.0, 1.0, 2.0, 3.0], 2.0);
        let sm = SampleData::from_counts(Alphabet::numeric(4).unwrap(), &[1, 2, 0, 3]).unwrap();
        let t = sufficient_statistic(FamilyKind::AlphaPowerLaw, &s, &sm).unwrap();
        let f_bar = (2.0 + 9.0) / 6.0;
        assert_abs_diff_eq!(t.value[0], f_bar / 0.25, epsilon = 1e-14);
    }

    #[test]
    fn escort_statistic_at_one_is_mean() {
        let s = spec(FamilyKind::Exponential, &[0.2, 0.3, 0.5], &[0.0, 1.0, 2.0], 1.0);
        let sm = SampleData::from_counts(Alphabet::numeric(3).unwrap(), &[1, 2, 3]).unwrap();
        let t = sufficient_statistic(FamilyKind::AlphaExponential, &s, &sm).unwrap();
        assert_abs_diff_eq!(t.value[0], 8.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn permuted_samples_give_zero_difference() {
        let s = spec(FamilyKind::AlphaPowerLaw, &[0.2, 0.3, 0.5], &[0.0, 1.0, 2.0], 2.0);
        let ab = Alphabet::numeric(3).unwrap();
        let a = empirical(&["0", "2", "1", "2"], &ab).unwrap();
        let b = empirical(&["2", "1", "2", "0"], &ab).unwrap();
        let grid: Vec<Vec<f64>> = (-10..=10).map(|i| vec![i as f64 * 0.01]).collect();
        let r = factorization_check(FamilyKind::AlphaPowerLaw, &s, &a, &b, &grid).unwrap();
        assert!(r.equal_t);
        assert_eq!(r.max_deviation, 0.0);
        assert_eq!(r.difference_mean, 0.0);
    }

    #[test]
    fn equal_mean_bernoulli_samples() {
        let s = spec(FamilyKind::Exponential, &[0.5, 0.5], &[0.0, 1.0], 1.0);
        let ab = Alphabet::numeric(2).unwrap();
        let a = empirical(&["0", "1", "1", "0", "1"], &ab).unwrap();
        let b = empirical(&["1", "1", "1", "0", "0"], &ab).unwrap();
        let grid: Vec<Vec<f64>> = (-50..=50).map(|i| vec![i as f64 * 0.02]).collect();
        let r = factorization_check(FamilyKind::Exponential, &s, &a, &b, &grid).unwrap();
        assert!(r.equal_t && r.argmax_equal);
        assert!(r.max_deviation <= 1e-12);
    }

    #[test]
    fn basu_decomposition_sums_to_likelihood() {
        let s = spec(FamilyKind::NonNormalizedAlphaPowerLaw, &[0.2, 0.3, 0.5], &[0.0, 1.0, 2.0], 2.0);
        let sm = SampleData::from_counts(Alphabet::numeric(3).unwrap(), &[2, 1, 4]).unwrap();
        for th in [-0.05, 0.0, 0.03] {
            let (g, h) = basu_decomposition(&s, &[th], &sm).unwrap();
            let l = likelihood(likelihood_for(FamilyKind::NonNormalizedAlphaPowerLaw, &s), &s, &[th], &sm).unwrap();
            assert_abs_diff_eq!(g + h, l, epsilon = 1e-12);
        }
    }

    #[test]
    fn search_finds_non_trivial_pairs() {
        let s = spec(FamilyKind::AlphaExponential, &[0.2, 0.3, 0.5], &[0.0, 1.0, 2.0], 2.0);
        let (a, b) = find_equal_statistic_pair(FamilyKind::Exponential, &s, 6, false).unwrap().unwrap();
        assert_ne!(a.empirical(), b.empirical());
        let ta = sufficient_statistic(FamilyKind::Exponential, &s, &a).unwrap();
        let tb = sufficient_statistic(FamilyKind::Exponential, &s, &b).unwrap();
        assert_abs_diff_eq!(ta.value[0], tb.value[0], epsilon = 1e-12);
    }

    #[test]
    fn count_vector_enumeration() {
        // C(n + 2, 2) vectors of each total n on 3 symbols
        let v = count_vectors(3, 4);
        assert_eq!(v.len(), 3 + 6 + 10 + 15);
        assert!(v.iter().all(|c| c.len() == 3));
    }
}
