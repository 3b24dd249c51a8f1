//! Probability measures on a finite alphabet.
//!
//! Every vector in the crate is indexed by the declaration order of an
//! [`Alphabet`]. A [`Distribution`] is validated once at construction and is
//! immutable afterwards.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Sum tolerance accepted without touching the entries.
pub const SUM_TOL: f64 = 1e-12;
/// Larger drift is repaired by one renormalization, up to this bound.
pub const REPAIR_TOL: f64 = 1e-9;
/// Negative entries down to this value are clamped to zero.
pub const NEG_CLAMP: f64 = -1e-14;

/// Ordered set of distinct symbol labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.len() < 2 {
            return Err(Error::Input(format!("alphabet needs at least 2 symbols, got {}", symbols.len())));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate alphabet label `{s}`")));
            }
        }
        Ok(Self { symbols, index })
    }

    /// Alphabet `{"0", "1", ..., "m-1"}`.
    pub fn numeric(m: usize) -> Result<Self> {
        Self::new((0..m).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.symbols[i]
    }
}

/// Positive real exponent of the power divergences.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::InvalidAlpha(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Exactly one; callers dispatch to the Kullback-Leibler route.
    pub fn is_one(self) -> bool {
        self.0 == 1.0
    }

    pub fn recip(self) -> Self {
        Self(1.0 / self.0)
    }
}

/// Probability vector over an alphabet.
///
/// `strict` records whether every entry is positive. Solvers for the
/// parametric families require strict distributions; the forward
/// projection onto linear families and empirical measures may sit on the
/// boundary of the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
    strict: bool,
}

impl Distribution {
    /// Validates a probability vector, repairing float drift up to 1e-9.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let mut probs = clamp_negatives(probs)?;
        if probs.len() < 2 {
            return Err(Error::Dimension(format!("distribution needs at least 2 entries, got {}", probs.len())));
        }
        let sum: f64 = probs.iter().sum();
        if !sum.is_finite() {
            return Err(Error::NotNormalized { sum });
        }
        let drift = (sum - 1.0).abs();
        if drift > REPAIR_TOL {
            return Err(Error::NotNormalized { sum });
        }
        if drift > SUM_TOL {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        let strict = probs.iter().all(|&p| p > 0.0);
        Ok(Self { probs, strict })
    }

    /// Like [`Distribution::new`] but rejects zero entries.
    pub fn strictly_positive(probs: Vec<f64>) -> Result<Self> {
        let d = Self::new(probs)?;
        if !d.strict {
            return Err(Error::Domain("distribution must be strictly positive".into()));
        }
        Ok(d)
    }

    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::Dimension("uniform needs m >= 2".into()));
        }
        Self::new(vec![1.0 / m as f64; m])
    }

    /// Empirical measures keep `strict = false` regardless of their entries.
    pub(crate) fn empirical_from_counts(counts: &[usize]) -> Self {
        let n: usize = counts.iter().sum();
        let probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Self { probs, strict: false }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn has_full_support(&self) -> bool {
        self.probs.iter().all(|&p| p > 0.0)
    }

    /// `E_P[v]`.
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl AsRef<[f64]> for Distribution {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

fn clamp_negatives(mut w: Vec<f64>) -> Result<Vec<f64>> {
    for (index, v) in w.iter_mut().enumerate() {
        if v.is_nan() {
            return Err(Error::Domain(format!("NaN weight at index {index}")));
        }
        if *v < 0.0 {
            if *v < NEG_CLAMP {
                return Err(Error::NegativeWeight { index, value: *v });
            }
            *v = 0.0;
        }
    }
    Ok(w)
}

/// `weights / sum(weights)`.
pub fn normalize(weights: &[f64]) -> Result<Distribution> {
    let w = clamp_negatives(weights.to_vec())?;
    let sum: f64 = w.iter().sum();
    if sum.is_nan() || sum <= 0.0 {
        return Err(Error::AllZero);
    }
    if !sum.is_finite() {
        return Err(Error::Domain("weights sum to infinity".into()));
    }
    Distribution::new(w.into_iter().map(|x| x / sum).collect())
}

/// Escort (alpha-scaled) measure `P(x)^a / sum_y P(y)^a`.
///
/// Zero entries are rejected for `alpha < 1`; use [`escort_weights`] on
/// empirical measures where zeros are expected.
pub fn escort(p: &Distribution, alpha: Alpha) -> Result<Distribution> {
    if alpha.is_one() {
        return Ok(p.clone());
    }
    if alpha.value() < 1.0 && !p.has_full_support() {
        return Err(Error::Domain("escort with alpha < 1 requires a strictly positive measure".into()));
    }
    let w = escort_weights(p.probs(), alpha.value());
    let strict = w.iter().all(|&x| x > 0.0);
    Ok(Distribution { probs: w, strict })
}

/// Escort weights in the log domain; zeros stay zero.
pub fn escort_weights(p: &[f64], alpha: f64) -> Vec<f64> {
    let logs: Vec<f64> = p.iter().map(|&x| if x > 0.0 { alpha * x.ln() } else { f64::NEG_INFINITY }).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// `(sum_x P(x)^a)^(1/a)`.
pub fn alpha_norm(p: &Distribution, alpha: Alpha) -> f64 {
    power_sum(p.probs(), alpha.value()).powf(1.0 / alpha.value())
}

/// `sum_x v(x)^a`, treating `0^a` as 0.
pub(crate) fn power_sum(v: &[f64], a: f64) -> f64 {
    v.iter().filter(|&&x| x > 0.0).map(|&x| x.powf(a)).sum()
}

/// Observed sample over an alphabet together with its empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleData {
    alphabet: Alphabet,
    observations: Vec<usize>,
    counts: Vec<usize>,
    empirical: Distribution,
}

impl SampleData {
    pub fn from_indices(alphabet: Alphabet, observations: Vec<usize>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut counts = vec![0usize; alphabet.len()];
        for (position, &i) in observations.iter().enumerate() {
            if i >= alphabet.len() {
                return Err(Error::UnknownLabel { label: i.to_string(), position });
            }
            counts[i] += 1;
        }
        let empirical = Distribution::empirical_from_counts(&counts);
        Ok(Self { alphabet, observations, counts, empirical })
    }

    /// Sample listing symbol `i` exactly `counts[i]` times, in symbol order.
    pub fn from_counts(alphabet: Alphabet, counts: &[usize]) -> Result<Self> {
        if counts.len() != alphabet.len() {
            return Err(Error::Dimension(format!("{} counts for an alphabet of {}", counts.len(), alphabet.len())));
        }
        let obs = counts.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c)).collect();
        Self::from_indices(alphabet, obs)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn observations(&self) -> &[usize] {
        &self.observations
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn empirical(&self) -> &Distribution {
        &self.empirical
    }

    pub fn labels(&self) -> Vec<&str> {
        self.observations.iter().map(|&i| self.alphabet.label(i)).collect()
    }
}

/// Tallies labelled observations against `alphabet`.
pub fn empirical<S: AsRef<str>>(observations: &[S], alphabet: &Alphabet) -> Result<SampleData> {
    let idx = observations
        .iter()
        .enumerate()
        .map(|(position, s)| {
            alphabet.index_of(s.as_ref()).ok_or_else(|| Error::UnknownLabel { label: s.as_ref().to_string(), position })
        })
        .collect::<Result<Vec<_>>>()?;
    SampleData::from_indices(alphabet.clone(), idx)
}
