use super::bounds::*;
use super::*;
use crate::losses::LossSpec;
use crate::measures::{empirical_measure, lj_distance, sample_from, wasserstein1};
use crate::models::{Base, ModelConfig};

fn two_point(a: f64, b: f64) -> Measure {
    Measure::atoms(vec![0.0, 1.0], vec![a, b]).unwrap()
}

#[test]
fn tv_two_point_matrix() {
    let model = Model::from_measures(vec![two_point(0.9, 0.1), two_point(0.1, 0.9)]).unwrap();
    let x = Sample::from_1d(vec![0.0, 0.0, 0.0]).unwrap();
    let rep = ell_estimate(&x, &model, &LossSpec::tv(), 1.0).unwrap();
    assert!((rep.pairwise.values[0][1] + 1.5).abs() < 1e-15);
    assert_eq!(rep.pairwise.values[1][0], 1.5);
    assert_eq!(rep.pairwise.values[0][0], 0.0);
    assert_eq!(rep.sup_stat, vec![0.0, 1.5]);
    assert_eq!(rep.chosen, 0);
    assert_eq!(rep.minimizer_set, vec![0]);
    assert_eq!(rep.minimizer_set_for(2.0), vec![0, 1]);
}

#[test]
fn single_candidate() {
    let model = Model::from_measures(vec![Measure::gaussian(0.0, 1.0).unwrap()]).unwrap();
    let x = Sample::from_1d(vec![0.3, -1.0]).unwrap();
    let rep = ell_estimate(&x, &model, &LossSpec::tv(), 1.0).unwrap();
    assert_eq!((rep.chosen, rep.sup_stat[0]), (0, 0.0));
    assert!(ell_estimate(&x, &model, &LossSpec::tv(), 0.0).is_err());
}

#[test]
fn wasserstein_empirical_identity() {
    let truth = Measure::power(0.5, 0.0).unwrap();
    let x = sample_from(&truth, 25, 3).unwrap();
    let emp = empirical_measure(&x).unwrap();
    let others = [
        Measure::uniform(0.0, 1.0).unwrap(),
        Measure::uniform(0.2, 0.7).unwrap(),
        Measure::atoms(vec![0.1, 0.5, 0.9], vec![0.3, 0.3, 0.4]).unwrap(),
        truth.clone(),
    ];
    let mut ms = vec![emp.clone()];
    ms.extend(others.iter().cloned());
    let model = Model::from_measures(ms).unwrap();
    let rep = ell_estimate(&x, &model, &LossSpec::wasserstein(), 1e-9).unwrap();
    for (k, q) in others.iter().enumerate() {
        let want = -(25.0 / 2.0) * wasserstein1(&emp, q).unwrap();
        assert!((rep.pairwise.values[0][k + 1] - want).abs() < 1e-9, "{k}");
    }
    assert_eq!(rep.sup_stat[0], 0.0);
    assert!(rep.minimizer_set.contains(&0));
}

#[test]
fn histogram_counts() {
    let x = Sample::from_1d(vec![0.1, 0.2, 0.3, 0.7]).unwrap();
    let h = histogram_estimator(&x, 2, 0.0, 1.0).unwrap();
    match h.family {
        crate::measures::Family::Cells { ref values, .. } => assert_eq!(values, &vec![1.5, 0.5]),
        ref f => panic!("{f:?}"),
    }
    assert!(histogram_estimator(&Sample::from_1d(vec![]).unwrap_or_else(|_| x.clone()), 0, 0.0, 1.0).is_err());
}

fn histogram_model(hist: &Measure, others: &[Vec<f64>]) -> Model {
    let mut ms = vec![hist.clone()];
    ms.extend(others.iter().map(|v| Measure::cells(0.0, 1.0, v.clone()).unwrap()));
    Model::from_measures(ms).unwrap()
}

#[test]
fn lj_histogram_identity() {
    let truth = Measure::piecewise(vec![0.0, 0.5, 1.0], vec![1.4, 0.6]).unwrap();
    let x = sample_from(&truth, 40, 17).unwrap();
    let d = 4usize;
    let hist = histogram_estimator(&x, d, 0.0, 1.0).unwrap();
    let others = vec![vec![1.0; 4], vec![1.6, 1.2, 0.8, 0.4], vec![2.0, 0.0, 2.0, 0.0], vec![0.5, 1.5, 0.5, 1.5]];
    let model = histogram_model(&hist, &others);
    let nu: Vec<f64> = hist.cell_probs().unwrap();
    for j in [1.5, 2.0, 3.0] {
        let r = libm::pow(d as f64, 1.0 / j);
        let rep = ell_estimate(&x, &model, &LossSpec::lj(j, Some(r)), 1.0).unwrap();
        for (k, q) in others.iter().enumerate() {
            let qm = Measure::cells(0.0, 1.0, q.clone()).unwrap();
            let norm = lj_distance(&hist, &qm, j).unwrap();
            let qi: Vec<f64> = q.iter().map(|v| v / d as f64).collect();
            let s: f64 = nu.iter().zip(&qi).map(|(a, b)| libm::pow((a - b).abs(), j)).sum();
            let want = -(40.0 * libm::pow(d as f64, j - 1.0)) * s / (4.0 * libm::pow(r, j - 1.0) * libm::pow(norm, j - 1.0));
            assert!((rep.pairwise.values[0][k + 1] - want).abs() < 1e-9 * (1.0 + want.abs()), "j={j} k={k}");
        }
        assert_eq!(rep.sup_stat[0], 0.0);
    }
}

#[test]
fn linf_histogram_identity() {
    let truth = Measure::uniform(0.0, 1.0).unwrap();
    let x = sample_from(&truth, 30, 5).unwrap();
    let hist = histogram_estimator(&x, 3, 0.0, 1.0).unwrap();
    let others = vec![vec![1.0; 3], vec![1.5, 1.0, 0.5], vec![0.0, 1.5, 1.5]];
    let model = histogram_model(&hist, &others);
    let rep = ell_estimate(&x, &model, &LossSpec::linf(3), 1.0).unwrap();
    let nu = hist.cell_probs().unwrap();
    for (k, q) in others.iter().enumerate() {
        let gaps: Vec<f64> = nu.iter().zip(q).map(|(a, b)| (a - b / 3.0).abs()).collect();
        let m = gaps.iter().cloned().fold(0.0, f64::max);
        assert!((rep.pairwise.values[0][k + 1] + 15.0 * m).abs() < 1e-12);
    }
    assert_eq!(rep.sup_stat[0], 0.0);
}

#[test]
fn median_examples() {
    assert_eq!(median_tv_estimator(&Sample::from_1d(vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap(), 2.5);
    assert_eq!(median_tv_estimator(&Sample::from_1d(vec![5.0, 1.0, 3.0]).unwrap()).unwrap(), 4.0);
    assert!(median_tv_estimator(&Sample::from_1d(vec![1.0]).unwrap()).is_err());
}

#[test]
fn median_in_half_minimizer_set() {
    let model = ModelConfig::TranslationGrid { base: Base::Gaussian { scale: 1.0 }, lo: -1.0, hi: 1.0, step: 0.05 }
        .build()
        .unwrap();
    for seed in 0..5 {
        let x = sample_from(&Measure::gaussian(0.1, 1.0).unwrap(), 51, seed).unwrap();
        let med = median_tv_estimator(&x).unwrap();
        let rep = ell_estimate(&x, &model, &LossSpec::tv(), 0.5).unwrap();
        let nearest = ((med + 1.0) / 0.05).round().clamp(0.0, 40.0) as usize;
        assert!(rep.minimizer_set.contains(&nearest), "seed {seed}: {:?} vs {nearest}", rep.minimizer_set);
    }
}

#[test]
fn permutation_invariance_and_monotonicity() {
    let model = ModelConfig::TranslationGrid { base: Base::Cauchy { scale: 1.0 }, lo: -1.0, hi: 1.0, step: 0.25 }
        .build()
        .unwrap();
    let x = sample_from(&Measure::cauchy(0.2, 1.0).unwrap(), 40, 9).unwrap();
    let rep = ell_estimate(&x, &model, &LossSpec::tv(), 1.0).unwrap();
    let perm: Vec<usize> = (0..model.len()).rev().collect();
    let pm = model.permuted(&perm);
    let rp = ell_estimate(&x, &pm, &LossSpec::tv(), 1.0).unwrap();
    for (a, &b) in perm.iter().enumerate() {
        assert!((rp.sup_stat[a] - rep.sup_stat[b]).abs() < 1e-9);
    }
    let xperm = x.permuted(&(0..x.n()).rev().collect::<Vec<_>>());
    let rx = ell_estimate(&xperm, &model, &LossSpec::tv(), 1.0).unwrap();
    for (a, b) in rx.sup_stat.iter().zip(&rep.sup_stat) {
        assert!((a - b).abs() < 1e-9);
    }
    for i in 0..model.len() {
        for j in 0..model.len() {
            assert_eq!(rep.pairwise.values[i][j], -rep.pairwise.values[j][i]);
        }
    }
    let small = rep.minimizer_set_for(0.1);
    let big = rep.minimizer_set_for(3.0);
    assert!(small.iter().all(|i| big.contains(i)));
    assert!(small.contains(&rep.chosen));
}

#[test]
fn regression_tuples_estimate() {
    let n = 30;
    let model = ModelConfig::RegressionTuples {
        thetas: crate::models::ThetaNet::Polynomial { dim: 2, grid: vec![-1.0, 0.0, 1.0, 2.0] },
        base: Base::Cauchy { scale: 1.0 },
        n,
    }
    .build()
    .unwrap();
    let noise = sample_from(&Measure::cauchy(0.0, 0.2).unwrap(), n, 4).unwrap();
    let xs: Vec<f64> = noise.as_flat().iter().enumerate().map(|(i, e)| 1.0 + (i + 1) as f64 / n as f64 + e).collect();
    let x = Sample::from_1d(xs).unwrap();
    let rep = ell_estimate(&x, &model, &LossSpec::tv(), 1.0).unwrap();
    // candidate (c0, c1) = (1, 1) has index 2*4 + 2
    assert!(rep.minimizer_set.contains(&10), "{:?}", rep.sup_stat);
    let short = Sample::from_1d(vec![0.0; 5]).unwrap();
    assert!(ell_estimate(&short, &model, &LossSpec::tv(), 1.0).is_err());
}

#[test]
fn bound_examples() {
    let v = vc_bound_tv(2.0, 100, 1.0, 1.0, 0.0).unwrap();
    let want = 40.0 * (0.1f64).sqrt() + 2.0 * (0.02f64).sqrt() + 0.02;
    assert!((v - want).abs() < 1e-12);
    assert!((v - 12.952).abs() < 1e-3);
    assert_eq!(c_j(2.0).unwrap(), 4.0);
    assert_eq!(c_j(1.3).unwrap(), 4.0);
    assert!(c_j(3.0).unwrap() > 4.0);
    assert_eq!(birge_approx(0.0, 7).unwrap(), 0.0);
    let zero = thm1_bound(&Thm1Args { a0: 1.5, a1: 0.5, epsilon: 0.0, xi: 0.0, n: 10, approx_loss: 0.0, min_loss: 0.0, vbar: 0.0 }).unwrap();
    assert_eq!(zero, 0.0);
    assert!(thm1_bound(&Thm1Args { a0: 0.5, a1: 1.5, epsilon: 1.0, xi: 1.0, n: 10, approx_loss: 0.0, min_loss: 0.0, vbar: 0.0 }).is_err());
}

#[test]
fn thm1_specializations() {
    let (n, xi, eps, approx) = (50usize, 1.3, 0.7, 0.02);
    let nf = n as f64;
    let w = thm1_bound(&Thm1Args {
        a0: 1.5,
        a1: 0.5,
        epsilon: eps,
        xi,
        n,
        approx_loss: nf * approx,
        min_loss: nf * approx,
        vbar: default_vbar_wasserstein(),
    })
    .unwrap();
    assert!((w / nf - wasserstein_bound(n, xi, eps, approx).unwrap()).abs() < 1e-12);
    let r = 1.7;
    let l2 = thm1_bound(&Thm1Args {
        a0: 0.75 / r,
        a1: 0.25 / r,
        epsilon: eps,
        xi,
        n,
        approx_loss: nf * approx,
        min_loss: nf * approx,
        vbar: default_vbar_l2(),
    })
    .unwrap();
    assert!((l2 / nf - l2_linear_bound(r, n, xi, eps, approx).unwrap()).abs() < 1e-12);
}

#[test]
fn thm2_and_fast_bounds() {
    let t = thm2_bound(&Thm2Args { a0: 1.5, a1: 0.5, a2: 1.0, epsilon: 1.0, xi: 2.0, approx_loss: 1.0, min_loss: 0.5, d_bar: 3.0 })
        .unwrap();
    assert!((t - (13.0 - 0.5 + 6.0 + 9.0 * 32.0 + 4.0)).abs() < 1e-12);
    let f = fast_bound_tv(1.0, 2.0, 1000, 1.0, 0.0).unwrap();
    let want = 144.0 / 1000.0 * (4.5e5 * 2.0 * (2.0 * core::f64::consts::E * 500.0f64).ln() + 3.0);
    assert!((f - want).abs() < 1e-9 * want);
    let reg = regression_bound(3, 400, 0.5, 0.0).unwrap();
    assert!((reg - (277.0 * 0.1 + 2.0 * (1.0f64 / 400.0).sqrt())).abs() < 1e-12);
    let li = linf_bound(4, 100, 0.0, 0.0, 0.0).unwrap();
    assert!((li - 8.0 * (2.0 * 8f64.ln() / 100.0).sqrt()).abs() < 1e-12);
}

#[test]
fn monotone_d_optimizer() {
    let (d, b) = optimize_monotone_d(10.0, 1000, 1.0).unwrap();
    for k in 1..=1000 {
        assert!(monotone_l1_bound(k, 1000, 1.0, birge_approx(10.0, k).unwrap()).unwrap() >= b);
    }
    assert!(d >= 1);
    // flat densities need one piece
    assert_eq!(optimize_monotone_d(0.0, 1000, 1.0).unwrap().0, 1);
}

fn direct_entry(x: &Sample, model: &Model, loss: &LossSpec, i: usize, j: usize) -> f64 {
    let f = crate::testfam::ScoreFactory::new(loss, model).unwrap();
    let s = f.pair(model, i, j).unwrap();
    x.points().map(|p| s.eval(p)).sum()
}

#[test]
fn counting_path_matches_direct_scores() {
    let bases = [
        Base::Gaussian { scale: 1.0 },
        Base::Cauchy { scale: 0.5 },
        Base::Uniform { width: 1.0 },
        Base::Power { alpha: 0.5 },
        Base::Power { alpha: 1.0 },
    ];
    for (k, base) in bases.iter().enumerate() {
        let model = ModelConfig::TranslationGrid { base: *base, lo: -0.6, hi: 0.6, step: 0.1 }.build().unwrap();
        let truth = base.at(0.05).unwrap();
        let mut xs = sample_from(&truth, 60, k as u64).unwrap().as_flat().to_vec();
        // points on region endpoints
        xs.extend([0.1, 0.0, 1.1, -0.6, 0.35]);
        let x = Sample::from_1d(xs).unwrap();
        let loss = LossSpec::tv();
        let cache = PairCache::build(&model, &loss).unwrap();
        let plain = PairwiseEngine::new(&x, &model, &loss).unwrap();
        let cached = PairwiseEngine::with_cache(&x, &model, &loss, &cache).unwrap();
        for i in 0..model.len() {
            for j in 0..model.len() {
                let want = direct_entry(&x, &model, &loss, i, j);
                let a = plain.entry(i, j).unwrap().0;
                let b = cached.entry(i, j).unwrap().0;
                assert!((a - want).abs() < 1e-9 && (b - want).abs() < 1e-9, "{} ({i},{j}): {a} {b} {want}", base.name());
                assert_eq!(b, -cached.entry(j, i).unwrap().0);
            }
        }
    }
}

#[test]
fn cache_matches_plain_engine_for_other_losses() {
    let model = ModelConfig::TranslationGrid { base: Base::Cauchy { scale: 1.0 }, lo: -0.5, hi: 0.5, step: 0.25 }
        .build()
        .unwrap();
    let x = sample_from(&Measure::cauchy(0.0, 1.0).unwrap(), 25, 1).unwrap();
    for loss in [LossSpec::hellinger(), LossSpec::kl(5.0)] {
        let cache = PairCache::build(&model, &loss).unwrap();
        let a = PairwiseEngine::new(&x, &model, &loss).unwrap();
        let b = PairwiseEngine::with_cache(&x, &model, &loss, &cache).unwrap();
        for (i, j) in upper_pairs(model.len()) {
            assert_eq!(a.entry(i, j).unwrap(), b.entry(i, j).unwrap());
        }
    }
}
