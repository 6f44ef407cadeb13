//! Randomized invariants of distances, scores, the estimator and the test bounds.

use approx::assert_abs_diff_eq;
use ellest_core::losses::{aggregate_loss, loss};
use ellest_core::measures::{
    hellinger_sq, kl_divergence, lj_distance, probe_grid, sample_from, tv_distance, wasserstein1, Method,
};
use ellest_core::models::kl_bound;
use ellest_core::robust_tests::{
    bernstein_bound, hellinger_test_bound, hoeffding_bound, run_test_iid, variational_bound,
};
use ellest_core::testfam::ScoreFactory;
use ellest_core::{ell_estimate, Decision, LossSpec, Measure, Model, ModelConfig, Sample};
use proptest::prelude::*;

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

/// Mass vectors of a common length, each mass at least `floor` before normalizing.
fn masses(count: usize, floor: f64) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..7).prop_flat_map(move |k| prop::collection::vec(prop::collection::vec(floor..1.0, k), count))
        .prop_map(|vs| vs.into_iter().map(normalize).collect())
}

fn atoms(m: &[f64]) -> Measure {
    Measure::atoms((0..m.len()).map(|i| i as f64 * 0.2).collect(), m.to_vec()).unwrap()
}

/// Cell densities on `[0, 1]`, normalized to mass one.
fn cells(m: &[f64]) -> Measure {
    let d = m.len() as f64;
    Measure::cells(0.0, 1.0, m.iter().map(|v| v * d).collect()).unwrap()
}

fn continuous() -> impl Strategy<Value = Measure> {
    prop_oneof![
        (-2.0f64..2.0, 0.5f64..2.0).prop_map(|(m, s)| Measure::gaussian(m, s).unwrap()),
        (-2.0f64..2.0, 0.5f64..2.0).prop_map(|(m, s)| Measure::cauchy(m, s).unwrap()),
        (-1.0f64..1.0, 0.3f64..2.0).prop_map(|(a, w)| Measure::uniform(a, a + w).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_are_symmetric_and_bounded(ms in masses(2, 0.0)) {
        let (p, q) = (atoms(&ms[0]), atoms(&ms[1]));
        let tv = tv_distance(&p, &q, Method::Auto).unwrap();
        prop_assert!((0.0..=1.0).contains(&tv));
        assert_abs_diff_eq!(tv, tv_distance(&q, &p, Method::Auto).unwrap(), epsilon = 1e-15);
        assert_abs_diff_eq!(hellinger_sq(&p, &q).unwrap(), hellinger_sq(&q, &p).unwrap(), epsilon = 1e-15);
        assert_abs_diff_eq!(wasserstein1(&p, &q).unwrap(), wasserstein1(&q, &p).unwrap(), epsilon = 1e-15);
        for j in [1.5, 2.0, 3.0] {
            assert_abs_diff_eq!(lj_distance(&p, &q, j).unwrap(), lj_distance(&q, &p, j).unwrap(), epsilon = 1e-15);
        }
    }

    #[test]
    fn continuous_distances_are_symmetric(p in continuous(), q in continuous()) {
        let a = tv_distance(&p, &q, Method::Auto).unwrap();
        let b = tv_distance(&q, &p, Method::Auto).unwrap();
        prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        let h = hellinger_sq(&p, &q).unwrap();
        prop_assert!((h - hellinger_sq(&q, &p).unwrap()).abs() <= 1e-8);
        prop_assert!(a <= 2f64.sqrt() * h.max(0.0).sqrt() + 1e-8);
    }

    #[test]
    fn triangle_inequalities(ms in masses(3, 0.0)) {
        let (a, b, c) = (atoms(&ms[0]), atoms(&ms[1]), atoms(&ms[2]));
        let tri = |d: &dyn Fn(&Measure, &Measure) -> f64| d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-9;
        prop_assert!(tri(&|x, y| tv_distance(x, y, Method::Auto).unwrap()));
        prop_assert!(tri(&|x, y| wasserstein1(x, y).unwrap()));
        prop_assert!(tri(&|x, y| hellinger_sq(x, y).unwrap().max(0.0).sqrt()));
        for j in [1.5, 2.0, 3.0] {
            prop_assert!(tri(&|x, y| lj_distance(x, y, j).unwrap()));
        }
    }

    #[test]
    fn hellinger_kl_chain(ms in masses(2, 0.01)) {
        let (p, q) = (atoms(&ms[0]), atoms(&ms[1]));
        let tv = tv_distance(&p, &q, Method::Auto).unwrap();
        let h = hellinger_sq(&p, &q).unwrap();
        prop_assert!(tv <= 2f64.sqrt() * h.sqrt() + 1e-12);
        prop_assert!(2.0 * h <= kl_divergence(&p, &q).unwrap() + 1e-12);
    }

    #[test]
    fn losses_vanish_on_the_diagonal(ms in masses(2, 0.01), n in 1usize..20) {
        let (p, q) = (atoms(&ms[0]), atoms(&ms[1]));
        let a = kl_bound(&Model::from_measures(vec![p.clone(), q.clone()]).unwrap()).unwrap();
        for spec in [LossSpec::tv(), LossSpec::hellinger(), LossSpec::kl(a), LossSpec::wasserstein(), LossSpec::lj(2.0, None)] {
            prop_assert_eq!(loss(&spec, &p, &p).unwrap(), 0.0);
            let l = loss(&spec, &p, &q).unwrap();
            prop_assert!(l >= 0.0);
            let agg = aggregate_loss(&spec, &vec![p.clone(); n], &q).unwrap();
            prop_assert!((agg - n as f64 * l).abs() <= 1e-12 * n as f64 * (1.0 + l));
        }
    }

    #[test]
    fn scores_are_antisymmetric_with_bounded_oscillation(ms in masses(2, 0.01)) {
        let (p, q) = (atoms(&ms[0]), atoms(&ms[1]));
        let (pc, qc) = (cells(&ms[0]), cells(&ms[1]));
        let d = ms[0].len() as f64;
        let a = kl_bound(&Model::from_measures(vec![p.clone(), q.clone()]).unwrap()).unwrap();
        let cases = [
            (LossSpec::tv(), &p, &q),
            (LossSpec::hellinger(), &p, &q),
            (LossSpec::kl(a), &p, &q),
            (LossSpec::wasserstein(), &p, &q),
            (LossSpec::tv(), &pc, &qc),
            (LossSpec::lj(2.0, Some(d.sqrt())), &pc, &qc),
            (LossSpec::lj(3.0, Some(d.cbrt())), &pc, &qc),
            (LossSpec::linf(ms[0].len()), &pc, &qc),
        ];
        for (spec, p, q) in cases {
            let f = ScoreFactory::for_loss(&spec).unwrap();
            let (s, t) = (f.score(p, q).unwrap(), f.score(q, p).unwrap());
            let grid = probe_grid(p, q).unwrap();
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &x in &grid {
                let v = s.eval1(x);
                prop_assert!((v + t.eval1(x)).abs() <= 1e-12, "{:?} at {x}", spec.kind);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            prop_assert!(hi - lo <= 1.0 + 1e-12, "{:?}: oscillation {}", spec.kind, hi - lo);
        }
    }

    #[test]
    fn estimator_structure(
        seed in 0u64..10_000,
        n in 5usize..60,
        center in -0.5f64..0.5,
        eps in 0.01f64..3.0,
        extra in 0.0f64..3.0,
    ) {
        let model = ModelConfig::GaussianLocationGrid { dim: 1, lo: -1.0, hi: 1.0, step: 0.25 }.build().unwrap();
        let x = sample_from(&Measure::gaussian(center, 1.0).unwrap(), n, seed).unwrap();
        let rep = ell_estimate(&x, &model, &LossSpec::tv(), eps).unwrap();
        let m = model.len();
        for i in 0..m {
            prop_assert_eq!(rep.pairwise.values[i][i], 0.0);
            prop_assert!(rep.sup_stat[i] >= 0.0);
            for j in 0..m {
                prop_assert_eq!(rep.pairwise.values[i][j], -rep.pairwise.values[j][i]);
            }
        }
        prop_assert!(rep.minimizer_set.contains(&rep.chosen));
        let wider = rep.minimizer_set_for(eps + extra);
        prop_assert!(rep.minimizer_set.iter().all(|i| wider.contains(i)));

        let perm: Vec<usize> = (0..m).map(|i| (i * 5 + seed as usize) % m).collect();
        let pm = ell_estimate(&x, &model.permuted(&perm), &LossSpec::tv(), eps).unwrap();
        for (a, &b) in perm.iter().enumerate() {
            prop_assert!((pm.sup_stat[a] - rep.sup_stat[b]).abs() <= 1e-9);
        }
        let xp: Sample = x.permuted(&(0..n).map(|i| (i * 7 + 3) % n).collect::<Vec<_>>());
        if n % 7 != 0 {
            let rx = ell_estimate(&xp, &model, &LossSpec::tv(), eps).unwrap();
            for (a, b) in rx.sup_stat.iter().zip(&rep.sup_stat) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn test_decisions_swap(seed in 0u64..10_000, n in 1usize..40, mp in -1.0f64..1.0, mq in -1.0f64..1.0) {
        let (p, q) = (Measure::gaussian(mp, 1.0).unwrap(), Measure::gaussian(mq, 1.0).unwrap());
        let x = sample_from(&Measure::gaussian(0.0, 1.0).unwrap(), n, seed).unwrap();
        for spec in [LossSpec::tv(), LossSpec::hellinger()] {
            let a = run_test_iid(&x, &p, &q, &spec).unwrap();
            let b = run_test_iid(&x, &q, &p, &spec).unwrap();
            prop_assert_eq!(a.statistic, -b.statistic);
            prop_assert_eq!(a.decision, b.decision.swapped());
            if a.statistic == 0.0 {
                prop_assert_eq!(a.decision, Decision::Tie);
            }
        }
    }

    #[test]
    fn bounds_are_probabilities_and_monotone(
        a1 in 0.05f64..1.0,
        ratio in 1.0f64..4.0,
        a2 in 0.1f64..3.0,
        gamma in 0.0f64..0.95,
        dg in 0.0f64..0.05,
        l in 0.01f64..1.0,
        dl in 0.0f64..0.5,
        n in 1usize..500,
        dn in 0usize..500,
    ) {
        let a0 = a1 * ratio;
        let nf = n as f64;
        let h = |g: f64, l: f64, n: usize| hoeffding_bound(a1, g, n as f64 * l, n).unwrap();
        let b = |g: f64, l: f64, n: usize| bernstein_bound(a0, a1, a2, g, n as f64 * l).unwrap();
        for f in [&h as &dyn Fn(f64, f64, usize) -> f64, &b] {
            let v = f(gamma, l, n);
            prop_assert!(v > 0.0 && v <= 1.0);
            prop_assert!(f(gamma, l, n + dn) <= v);
            prop_assert!(f(gamma, l + dl, n) <= v);
            prop_assert!(f(gamma + dg, l, n) >= v);
        }
        prop_assert_eq!(h(1.0, l, n), 1.0);
        let v = variational_bound(gamma / 2.0, 1.0, l, n).unwrap();
        prop_assert!(v > 0.0 && v <= 1.0);
        prop_assert!(variational_bound(gamma / 2.0, 1.0, l, n + dn).unwrap() <= v);
        let hb = hellinger_test_bound(l * gamma * 0.1, l, n).unwrap();
        if let Some(x) = hb.bound {
            prop_assert!(x > 0.0 && x <= 1.0);
            let more = hellinger_test_bound(l * gamma * 0.1, l, n + dn).unwrap().bound.unwrap();
            prop_assert!(more <= x);
        }
        let _ = nf;
    }

    #[test]
    fn generated_candidates_are_probabilities(
        cells_n in 2usize..5,
        lo in -1.0f64..0.0,
        step in 0.2f64..0.6,
    ) {
        let configs = [
            ModelConfig::HistogramNet { cells: cells_n, values: vec![0.0, 0.5, 1.0, 1.5, 2.0], lo: 0.0, hi: 1.0, normalize: true, max_candidates: 10_000 },
            ModelConfig::TranslationGrid { base: ellest_core::models::Base::Cauchy { scale: 1.0 }, lo, hi: lo + 1.0, step },
            ModelConfig::TranslationGrid { base: ellest_core::models::Base::Power { alpha: 0.5 }, lo, hi: lo + 1.0, step },
        ];
        for cfg in configs {
            let model = cfg.build().unwrap();
            prop_assert!(!model.is_empty());
            for i in 0..model.len() {
                let m = model.measure(i).unwrap();
                prop_assert!((m.total_mass() - 1.0).abs() <= 1e-9, "{}", m.tag);
            }
        }
    }
}
