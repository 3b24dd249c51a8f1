//! Property tests for the invariants of measures, divergences, families,
//! estimators, projections and sufficiency.

use mindiv::divergence::{density_power_b, divergence, kl, DivergenceKind};
use mindiv::estimate::{
    estimating_residual, likelihood, maximize_likelihood, scores, solve_estimating_equation, Estimator, EstimatorKind,
};
use mindiv::family::{FamilyKind, FamilySpec, LinearFamilySpec};
use mindiv::measures::{alpha_norm, escort, normalize, Alpha, Alphabet, Distribution, SampleData};
use mindiv::projection::{forward_b_projection, pythagorean_gap};
use mindiv::sufficiency::sufficient_statistic;
use nalgebra::DMatrix;
use proptest::prelude::*;

const ALPHAS: [f64; 6] = [0.3, 0.5, 0.8, 1.2, 2.0, 3.0];

fn a(v: f64) -> Alpha {
    Alpha::new(v).unwrap()
}

fn positive_dist(m: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.05f64..1.0, m).prop_map(|w| normalize(&w).unwrap())
}

fn pair(m: usize) -> impl Strategy<Value = (Distribution, Distribution)> {
    (positive_dist(m), positive_dist(m))
}

fn sized_pair() -> impl Strategy<Value = (Distribution, Distribution)> {
    prop::sample::select(vec![2usize, 3, 5]).prop_flat_map(pair)
}

/// Family on three symbols with one centred unit statistic and an
/// admissible parameter.
fn small_family(kind: FamilyKind) -> impl Strategy<Value = (FamilySpec, Vec<f64>)> {
    (positive_dist(3), prop::sample::select(vec![0.5f64, 2.0, 3.0]), -0.1f64..0.1, 0.0f64..std::f64::consts::TAU)
        .prop_map(move |(q, al, t, phi)| {
            let al = if kind == FamilyKind::Exponential { 1.0 } else { al };
            let e1 = [1.0, -1.0, 0.0].map(|v: f64| v / 2f64.sqrt());
            let e2 = [1.0, 1.0, -2.0].map(|v: f64| v / 6f64.sqrt());
            let row: Vec<f64> = (0..3).map(|x| phi.cos() * e1[x] + phi.sin() * e2[x]).collect();
            let spec = FamilySpec::new(kind, q, DMatrix::from_row_slice(1, 3, &row), a(al)).unwrap();
            (spec, vec![t])
        })
        .prop_filter("admissible parameter", |(spec, theta)| spec.eval_member(theta).is_ok())
}

fn any_family() -> impl Strategy<Value = (FamilySpec, Vec<f64>)> {
    prop::sample::select(FamilyKind::ALL.to_vec()).prop_flat_map(small_family)
}

fn counts(m: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..20, m)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn escort_at_one_is_identity(p in positive_dist(4)) {
        let e = escort(&p, a(1.0)).unwrap();
        prop_assert_eq!(e.probs(), p.probs());
    }

    #[test]
    fn escort_round_trip(p in positive_dist(4), al in prop::sample::select(vec![0.5f64, 2.0, 3.0])) {
        let back = escort(&escort(&p, a(al)).unwrap(), a(al).recip()).unwrap();
        prop_assert!(back.max_abs_diff(&p) <= 1e-10);
    }

    #[test]
    fn alpha_norm_at_one_is_one(p in positive_dist(5)) {
        prop_assert!((alpha_norm(&p, a(1.0)) - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn normalize_is_idempotent(w in prop::collection::vec(0.0f64..5.0, 2..6).prop_filter("mass", |w| w.iter().sum::<f64>() > 0.1)) {
        let once = normalize(&w).unwrap();
        let twice = normalize(once.probs()).unwrap();
        prop_assert!(once.max_abs_diff(&twice) <= 1e-15);
    }

    #[test]
    fn divergences_are_nonnegative((p, q) in sized_pair(), al in prop::sample::select(ALPHAS.to_vec())) {
        for kind in DivergenceKind::ALL {
            prop_assert!(divergence(kind, &p, &q, a(al)).unwrap() >= -1e-12);
            prop_assert!(divergence(kind, &p, &p, a(al)).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn density_power_two_is_squared_distance((p, q) in pair(4)) {
        let direct: f64 = p.probs().iter().zip(q.probs()).map(|(x, y)| (x - y).powi(2)).sum();
        prop_assert!((density_power_b(&p, &q, a(2.0)).unwrap() - direct).abs() <= 1e-12);
    }

    #[test]
    fn divergences_approach_kl_linearly((p, q) in pair(3)) {
        let base = kl(&p, &q).unwrap();
        for kind in DivergenceKind::ALL {
            let gap = |h: f64| {
                let up = (divergence(kind, &p, &q, a(1.0 + h)).unwrap() - base).abs();
                let down = (divergence(kind, &p, &q, a(1.0 - h)).unwrap() - base).abs();
                up.max(down)
            };
            let (g2, g4) = (gap(1e-2), gap(1e-4));
            prop_assert!(g4 <= 1e-4 * 10.0 * (1.0 + g2 / 1e-2), "{kind:?}: {g2} {g4}");
        }
    }

    #[test]
    fn zero_parameter_gives_reference((spec, _) in any_family()) {
        let p0 = spec.eval_member(&[0.0]).unwrap().dist;
        prop_assert!(p0.max_abs_diff(spec.q()) <= 1e-12);
    }

    #[test]
    fn members_sum_to_one((spec, theta) in any_family()) {
        let p = spec.eval_member(&theta).unwrap().dist;
        prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(spec.membership_residual(&p).unwrap() <= 1e-8);
    }

    #[test]
    fn non_normalized_two_has_closed_form((spec, theta) in small_family(FamilyKind::NonNormalizedAlphaPowerLaw)) {
        prop_assume!(spec.alpha().value() == 2.0);
        // P = Q - Z - t with Z = -mean(t)
        let t: Vec<f64> = spec.stat(0).iter().map(|v| theta[0] * v).collect();
        let z = -t.iter().sum::<f64>() / t.len() as f64;
        let closed: Vec<f64> = spec.q().probs().iter().zip(&t).map(|(q, tx)| q - z - tx).collect();
        let member = spec.eval_member(&theta).unwrap();
        prop_assert!((spec.normalizer_root(&theta).unwrap() - z).abs() <= 1e-12);
        let gap = member.dist.probs().iter().zip(&closed).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-12, "gap {gap}");
    }

    #[test]
    fn power_law_two_has_closed_form((spec, theta) in small_family(FamilyKind::AlphaPowerLaw)) {
        prop_assume!(spec.alpha().value() == 2.0);
        let raw: Vec<f64> = spec.q().probs().iter().zip(spec.stat(0)).map(|(q, v)| q - theta[0] * v).collect();
        let closed = normalize(&raw).unwrap();
        prop_assert!(spec.eval_member(&theta).unwrap().dist.max_abs_diff(&closed) <= 1e-12);
    }

    #[test]
    fn scores_have_zero_model_mean((spec, theta) in any_family()) {
        let (member, s) = scores(&spec, &theta).unwrap();
        let mean: f64 = member.dist.probs().iter().zip(&s).map(|(p, sx)| p * sx[0]).sum();
        prop_assert!(mean.abs() <= 1e-10);
    }

    #[test]
    fn unit_alpha_matches_mle((spec, theta) in small_family(FamilyKind::Exponential), c in counts(3)) {
        let sample = SampleData::from_counts(Alphabet::numeric(3).unwrap(), &c).unwrap();
        let r0 = estimating_residual(Estimator::mle(), &spec, &theta, &sample).unwrap();
        let l0 = likelihood(Estimator::mle(), &spec, &theta, &sample).unwrap();
        for kind in EstimatorKind::ALL {
            let est = Estimator::new(kind, a(1.0));
            prop_assert_eq!(&estimating_residual(est, &spec, &theta, &sample).unwrap(), &r0);
            prop_assert_eq!(likelihood(est, &spec, &theta, &sample).unwrap(), l0);
        }
    }

    #[test]
    fn exact_draw_frequencies_solve_every_matched_equation((spec, theta) in any_family()) {
        let p = spec.eval_member(&theta).unwrap().dist;
        let kind = EstimatorKind::ALL.into_iter().find(|k| k.matched_family() == spec.kind()).unwrap();
        let est = Estimator::new(kind, spec.alpha());
        let (member, s) = scores(&spec, &theta).unwrap();
        let r = mindiv::estimate::residual_of(est, p.probs(), member.dist.probs(), &s);
        prop_assert!(r[0].abs() <= 1e-10);
    }

    #[test]
    fn routes_agree_on_matched_pairs((spec, _) in any_family(), c in counts(3)) {
        let sample = SampleData::from_counts(Alphabet::numeric(3).unwrap(), &c).unwrap();
        let kind = EstimatorKind::ALL.into_iter().find(|k| k.matched_family() == spec.kind()).unwrap();
        let est = Estimator::new(kind, spec.alpha());
        let eq = solve_estimating_equation(est, &spec, &sample, &[0.0]);
        let lik = maximize_likelihood(est, &spec, &sample, &[0.0]);
        if let (Ok(eq), Ok(lik)) = (eq, lik) {
            prop_assert!((eq.theta_star[0] - lik.theta_star[0]).abs() <= 1e-6);
        }
    }

    #[test]
    fn forward_projection_is_feasible_and_pythagorean(
        q in positive_dist(4),
        target in positive_dist(4),
        row in prop::collection::vec(-1.0f64..1.0, 4),
        al in prop::sample::select(ALPHAS.to_vec()),
    ) {
        let f = DMatrix::from_row_slice(1, 4, &row);
        let level: f64 = target.probs().iter().zip(&row).map(|(p, v)| p * v).sum();
        let Ok(l) = LinearFamilySpec::new(f, vec![level]) else { return Ok(()); };
        let res = forward_b_projection(&q, &l, a(al)).unwrap();
        prop_assert!(l.constraint_residual(res.p_star.probs()).iter().all(|r| r.abs() <= 1e-10));
        prop_assert!(pythagorean_gap(a(al), &target, &res.p_star, &q).unwrap() >= -1e-10);
        if al < 1.0 {
            prop_assert!(res.p_star.probs().iter().all(|&p| p >= 1e-9));
        }
    }

    #[test]
    fn first_two_statistics_coincide((spec, _) in small_family(FamilyKind::Exponential), c in counts(3)) {
        let sample = SampleData::from_counts(Alphabet::numeric(3).unwrap(), &c).unwrap();
        let t1 = sufficient_statistic(FamilyKind::Exponential, &spec, &sample).unwrap();
        let t2 = sufficient_statistic(FamilyKind::NonNormalizedAlphaPowerLaw, &spec, &sample).unwrap();
        prop_assert_eq!(t1.value, t2.value);
    }
}
