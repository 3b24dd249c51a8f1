//! Seeded i.i.d. sampling from family members with optional replacement
//! contamination at a fixed symbol.

use nalgebra::DMatrix;
use rand::distributions::{Bernoulli, Distribution as _, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::family::LinearFamilySpec;
use crate::lp;
use crate::measures::{Alphabet, Distribution, SampleData};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contamination {
    pub rate: f64,
    pub outlier: usize,
}

/// Draws `n` symbols from `p`; each draw is replaced by `outlier` with
/// probability `rate`. Deterministic for a given seed.
pub fn generate_sample(
    p: &Distribution,
    alphabet: &Alphabet,
    n: usize,
    contamination: Option<Contamination>,
    seed: u64,
) -> Result<SampleData> {
    if n == 0 {
        return Err(Error::Input("sample size must be at least 1".into()));
    }
    if p.len() != alphabet.len() {
        return Err(Error::Dimension("distribution and alphabet differ in length".into()));
    }
    let flip = match contamination {
        Some(c) => {
            if !(0.0..1.0).contains(&c.rate) {
                return Err(Error::Input(format!("contamination rate {} outside [0, 1)", c.rate)));
            }
            if c.outlier >= alphabet.len() {
                return Err(Error::Input(format!("outlier symbol {} outside alphabet", c.outlier)));
            }
            Some((Bernoulli::new(c.rate).map_err(|e| Error::Input(e.to_string()))?, c.outlier))
        }
        None => None,
    };
    let draw = WeightedIndex::new(p.probs()).map_err(|e| Error::Input(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let obs = (0..n)
        .map(|_| {
            let x = draw.sample(&mut rng);
            match &flip {
                Some((b, outlier)) if b.sample(&mut rng) => *outlier,
                _ => x,
            }
        })
        .collect();
    SampleData::from_indices(alphabet.clone(), obs)
}

/// Random members of `{P : f P = a}`: convex combinations, with random
/// weights, of vertices that maximize random linear objectives.
pub fn random_linear_members(l: &LinearFamilySpec, count: usize, seed: u64) -> Result<Vec<Distribution>> {
    let (k, m) = (l.k(), l.m());
    let mat = DMatrix::from_fn(k + 1, m, |i, j| if i < k { l.f()[(i, j)] } else { 1.0 });
    let mut rhs = l.a().to_vec();
    rhs.push(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut p = vec![0.0; m];
            let mut total = 0.0;
            for _ in 0..m {
                let c: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let (_, v) = lp::maximize(&c, &mat, &rhs).ok_or(Error::Infeasible)?;
                let w = -(1.0 - rng.gen::<f64>()).ln();
                total += w;
                for (pi, vi) in p.iter_mut().zip(&v) {
                    *pi += w * vi.max(0.0);
                }
            }
            p.iter_mut().for_each(|v| *v /= total);
            crate::measures::normalize(&p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_members_satisfy_constraints() {
        let l = LinearFamilySpec::new(DMatrix::from_row_slice(1, 4, &[0.0, 1.0, 2.0, 3.0]), vec![1.1]).unwrap();
        for p in random_linear_members(&l, 20, 5).unwrap() {
            assert!(l.constraint_residual(p.probs()).iter().all(|r| r.abs() < 1e-12));
        }
    }

    #[test]
    fn large_sample_tracks_distribution() {
        let p = Distribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let ab = Alphabet::numeric(4).unwrap();
        let s = generate_sample(&p, &ab, 10_000, None, 7).unwrap();
        assert!(s.empirical().max_abs_diff(&p) <= 0.05);
    }

    #[test]
    fn same_seed_same_sample() {
        let p = Distribution::new(vec![0.5, 0.5]).unwrap();
        let ab = Alphabet::numeric(2).unwrap();
        let c = Some(Contamination { rate: 0.1, outlier: 1 });
        assert_eq!(generate_sample(&p, &ab, 50, c, 3).unwrap(), generate_sample(&p, &ab, 50, c, 3).unwrap());
    }

    #[test]
    fn rejects_empty_and_bad_rate() {
        let p = Distribution::new(vec![0.5, 0.5]).unwrap();
        let ab = Alphabet::numeric(2).unwrap();
        assert!(generate_sample(&p, &ab, 0, None, 1).unwrap_err().is_input_error());
        let c = Some(Contamination { rate: 1.0, outlier: 0 });
        assert!(generate_sample(&p, &ab, 5, c, 1).unwrap_err().is_input_error());
    }
}
