use super::*;
use crate::quad::{integrate, Domain, ABS_TOL};
use alloc::vec;

fn approx(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

#[test]
fn gaussian_tv_two_units_apart() {
    // P[|Z| <= 1]
    let expected = 0.682_689_492_137_085_9;
    let p = Measure::gaussian(0.0, 1.0).unwrap();
    let q = Measure::gaussian(2.0, 1.0).unwrap();
    approx(tv_distance(&p, &q, Method::ClosedForm).unwrap(), expected, 1e-12);
    approx(tv_distance(&p, &q, Method::Quadrature).unwrap(), expected, 1e-7);
    let pd = Measure::gaussian_nd(vec![0.0, 0.0]).unwrap();
    let qd = Measure::gaussian_nd(vec![1.2, 1.6]).unwrap();
    approx(tv_distance(&pd, &qd, Method::Auto).unwrap(), expected, 1e-12);
    assert!(tv_distance(&pd, &qd, Method::Quadrature).is_err());
}

#[test]
fn cauchy_tv_two_units_apart() {
    let p = Measure::cauchy(0.0, 1.0).unwrap();
    let q = Measure::cauchy(2.0, 1.0).unwrap();
    approx(tv_distance(&p, &q, Method::ClosedForm).unwrap(), 0.5, 1e-15);
    approx(tv_distance(&p, &q, Method::Quadrature).unwrap(), 0.5, 1e-7);
}

#[test]
fn tv_of_identical_measures_is_zero() {
    for m in [
        Measure::gaussian(0.3, 2.0).unwrap(),
        Measure::power(0.4, 1.0).unwrap(),
        Measure::atoms(vec![0.0, 1.0], vec![0.3, 0.7]).unwrap(),
        Measure::cells(0.0, 1.0, vec![1.5, 0.5]).unwrap(),
    ] {
        assert_eq!(tv_distance(&m, &m, Method::Quadrature).unwrap(), 0.0);
        assert_eq!(tv_distance(&m, &m, Method::Auto).unwrap(), 0.0);
    }
}

#[test]
fn power_translation_tv() {
    let p = Measure::power(0.5, 0.0).unwrap();
    let q = Measure::power(0.5, 0.25).unwrap();
    approx(tv_distance(&p, &q, Method::ClosedForm).unwrap(), 0.5, 1e-15);
    approx(tv_distance(&p, &q, Method::Quadrature).unwrap(), 0.5, 1e-7);
}

#[test]
fn closed_form_rejects_unknown_pairs() {
    let p = Measure::gaussian(0.0, 1.0).unwrap();
    let q = Measure::cauchy(0.0, 1.0).unwrap();
    assert!(matches!(tv_distance(&p, &q, Method::ClosedForm), Err(Error::Unsupported(_))));
    assert!(tv_distance(&p, &q, Method::Auto).is_ok());
}

#[test]
fn tv_rejects_signed_and_defective_inputs() {
    let s = Measure::cells(0.0, 1.0, vec![2.5, -0.5]).unwrap();
    let p = Measure::cells(0.0, 1.0, vec![1.0, 1.0]).unwrap();
    assert!(matches!(tv_distance(&s, &p, Method::Auto), Err(Error::SignedMeasure(_))));
    let half = Measure::cells(0.0, 1.0, vec![0.5, 0.5]).unwrap();
    assert!(matches!(tv_distance(&half, &p, Method::Auto), Err(Error::NotProbability(_))));
}

#[test]
fn hellinger_gaussian_matches_affinity_quadrature() {
    let p = Measure::gaussian(0.0, 1.0).unwrap();
    let q = Measure::gaussian(libm::sqrt(8.0), 1.0).unwrap();
    let h = hellinger_sq(&p, &q).unwrap();
    approx(h, 1.0 - libm::exp(-1.0), 1e-12);
    let aff = integrate(
        |x| libm::sqrt(p.density1(x) * q.density1(x)),
        &Domain::new(f64::NEG_INFINITY, f64::INFINITY),
        ABS_TOL,
    )
    .unwrap();
    approx(h, 1.0 - aff, 1e-8);
}

#[test]
fn hellinger_identity_and_singular() {
    let p = Measure::uniform(0.0, 1.0).unwrap();
    approx(hellinger_sq(&p, &p).unwrap(), 0.0, 1e-15);
    let q = Measure::uniform(2.0, 3.0).unwrap();
    assert_eq!(hellinger_sq(&p, &q).unwrap(), 1.0);
    let c = Measure::cauchy(0.0, 1.0).unwrap();
    approx(hellinger_sq(&c, &c).unwrap(), 0.0, 1e-8);
}

#[test]
fn kl_examples() {
    let p = Measure::atoms(vec![0.0, 1.0], vec![0.1, 0.9]).unwrap();
    let q = Measure::atoms(vec![0.0, 1.0], vec![0.9, 0.1]).unwrap();
    let oracle = 0.1 * libm::log(0.1 / 0.9) + 0.9 * libm::log(0.9 / 0.1);
    approx(kl_divergence(&p, &q).unwrap(), oracle, 1e-14);
    approx(oracle, 0.8 * libm::log(9.0), 1e-14);
    assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
    let u = Measure::uniform(0.0, 1.0).unwrap();
    let v = Measure::uniform(0.5, 1.5).unwrap();
    assert_eq!(kl_divergence(&u, &v).unwrap(), f64::INFINITY);
    let g = Measure::gaussian(0.0, 1.0).unwrap();
    assert_eq!(kl_divergence(&g, &u).unwrap(), f64::INFINITY);
    assert!(kl_divergence(&u, &g).unwrap().is_finite());
}

#[test]
fn kl_quadrature_matches_gaussian_closed_form() {
    let p = Measure::gaussian(0.0, 1.0).unwrap();
    let q = Measure::gaussian(1.5, 1.0).unwrap();
    let mix_p = Measure::mixture(vec![1.0], vec![p.clone()]).unwrap();
    let mix_q = Measure::mixture(vec![1.0], vec![q.clone()]).unwrap();
    approx(kl_divergence(&mix_p, &mix_q).unwrap(), 1.125, 1e-7);
    approx(kl_divergence(&p, &q).unwrap(), 1.125, 1e-14);
}

#[test]
fn wasserstein_examples() {
    let a = Measure::dirac(0.2).unwrap();
    let b = Measure::dirac(0.9).unwrap();
    approx(wasserstein1(&a, &b).unwrap(), 0.7, 1e-15);
    let u = Measure::uniform(0.0, 1.0).unwrap();
    approx(wasserstein1(&u, &u).unwrap(), 0.0, 1e-15);
    let h = Measure::dirac(0.5).unwrap();
    approx(wasserstein1(&u, &h).unwrap(), 0.25, 1e-15);
    let off = Measure::uniform(0.5, 1.5).unwrap();
    assert!(wasserstein1(&u, &off).is_err());
}

#[test]
fn wasserstein_grid_fallback_is_close() {
    // CDFs t^α on [0,1]; W = ∫ |t^a - t^b| = |1/(a+1) - 1/(b+1)|
    let p = Measure::power(0.5, 0.0).unwrap();
    let q = Measure::power(0.8, 0.0).unwrap();
    let exact = 1.0 / 1.5 - 1.0 / 1.8;
    approx(wasserstein1(&p, &q).unwrap(), exact, 1e-6);
}

#[test]
fn lj_partition_examples() {
    let p = Measure::cells(0.0, 1.0, vec![1.6, 0.4]).unwrap();
    let q = Measure::cells(0.0, 1.0, vec![0.4, 1.6]).unwrap();
    approx(lj_distance(&p, &q, 2.0).unwrap(), 1.2, 1e-15);
    approx(lj_distance(&p, &q, f64::INFINITY).unwrap(), 1.2, 1e-15);
    assert_eq!(lj_distance(&p, &p, 3.0).unwrap(), 0.0);
    let other = Measure::cells(0.0, 2.0, vec![1.0, 1.0]).unwrap();
    assert!(matches!(lj_distance(&p, &other, 2.0), Err(Error::IncompatibleReference(_))));
}

#[test]
fn lj_lebesgue_quadrature_and_piecewise_agree() {
    let p = Measure::piecewise(vec![0.0, 0.5, 1.0], vec![1.6, 0.4]).unwrap();
    let q = Measure::uniform(0.0, 1.0).unwrap();
    // |p - q| = 0.6 everywhere on [0, 1]
    approx(lj_distance(&p, &q, 3.0).unwrap(), 0.6, 1e-14);
    let g = Measure::gaussian(0.0, 1.0).unwrap();
    let h = Measure::gaussian(1.0, 1.0).unwrap();
    let l2 = lj_distance(&g, &h, 2.0).unwrap();
    // ‖φ - φ(.-1)‖² = 2(1 - e^{-1/4}) / (2√π)
    approx(l2 * l2, (1.0 - libm::exp(-0.25)) / libm::sqrt(core::f64::consts::PI), 1e-8);
    let sup = lj_distance(&g, &h, f64::INFINITY).unwrap();
    // maximizer of φ(x) - φ(x-1) found numerically on a fine grid
    let mut best = 0.0f64;
    for k in 0..200_001 {
        let x = -3.0 + 6.0 * k as f64 / 200_000.0;
        best = best.max((g.density1(x) - h.density1(x)).abs());
    }
    approx(sup, best, 1e-5);
}

#[test]
fn empirical_cdf_examples() {
    let f = empirical_cdf(&Sample::from_1d(vec![0.5]).unwrap()).unwrap();
    assert_eq!(f.eval(0.49), 0.0);
    assert_eq!(f.eval(0.5), 1.0);
    let f = empirical_cdf(&Sample::from_1d(vec![0.2, 0.8]).unwrap()).unwrap();
    assert_eq!(f.eval(0.5), 0.5);
    let f = empirical_cdf(&Sample::from_1d(vec![0.2, 0.2, 0.8]).unwrap()).unwrap();
    approx(f.eval(0.2), 2.0 / 3.0, 1e-15);
    let m = empirical_measure(&Sample::from_1d(vec![0.2, 0.2, 0.8]).unwrap()).unwrap();
    approx(m.cdf(0.2).unwrap(), 2.0 / 3.0, 1e-15);
    assert!(Sample::from_1d(vec![]).is_err());
}

#[test]
fn sampling_is_deterministic() {
    let u = Measure::uniform(0.0, 1.0).unwrap();
    assert_eq!(sample_from(&u, 3, 7).unwrap(), sample_from(&u, 3, 7).unwrap());
    assert_ne!(sample_from(&u, 3, 7).unwrap(), sample_from(&u, 3, 8).unwrap());
    let d = Measure::dirac(2.5).unwrap();
    assert_eq!(sample_from(&d, 5, 1).unwrap().as_flat(), &[2.5; 5]);
    let g = Measure::gaussian(0.0, 1.0).unwrap();
    let far = Measure::dirac(1e3).unwrap();
    let mix = Measure::contaminated(&g, 0.0, &far).unwrap();
    assert_eq!(sample_from(&mix, 50, 11).unwrap(), sample_from(&g, 50, 11).unwrap());
}

fn ks_stat(m: &Measure, n: usize, seed: u64) -> f64 {
    let s = sample_from(m, n, seed).unwrap();
    let mut xs = s.as_flat().to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = m.cdf(x).unwrap();
        let below = f - m.atom_mass(x);
        d = d.max((f - (i + 1) as f64 / n as f64).abs()).max((below - i as f64 / n as f64).abs());
    }
    d
}

#[test]
fn samplers_pass_kolmogorov_smirnov() {
    let n = 20_000;
    // 99.9% critical value of the KS statistic
    let crit = 1.95 / libm::sqrt(n as f64);
    let g = Measure::gaussian(1.0, 2.0).unwrap();
    let c = Measure::cauchy(-1.0, 0.5).unwrap();
    for (k, m) in [
        g.clone(),
        c.clone(),
        Measure::uniform(-1.0, 3.0).unwrap(),
        Measure::power(0.3, 2.0).unwrap(),
        Measure::piecewise(vec![0.0, 0.2, 1.0], vec![2.5, 0.625]).unwrap(),
        Measure::cells(0.0, 2.0, vec![1.5, 0.0, 1.0, 1.5]).unwrap(),
        Measure::mixture(vec![0.3, 0.7], vec![g, c]).unwrap(),
    ]
    .iter()
    .enumerate()
    {
        let d = ks_stat(m, n, 100 + k as u64);
        assert!(d < crit, "{}: KS {d} >= {crit}", m.tag);
    }
}

#[test]
fn cell_indexing_is_half_open() {
    let m = Measure::cells(0.0, 1.0, vec![1.0; 4]).unwrap();
    assert_eq!(m.cell_index(0.0), Some(0));
    assert_eq!(m.cell_index(0.25), Some(1));
    assert_eq!(m.cell_index(0.75), Some(3));
    assert_eq!(m.cell_index(1.0), Some(3));
    assert_eq!(m.cell_index(1.0001), None);
    approx(m.cdf(0.3).unwrap(), 0.3, 1e-15);
}

#[test]
fn set_probabilities_closed_and_generic_agree() {
    let pairs = [
        (Measure::gaussian(0.0, 1.0).unwrap(), Measure::gaussian(0.7, 1.0).unwrap()),
        (Measure::cauchy(0.0, 1.0).unwrap(), Measure::cauchy(-1.3, 1.0).unwrap()),
        (Measure::power(0.5, 0.0).unwrap(), Measure::power(0.5, 0.3).unwrap()),
        (Measure::power(0.5, 0.4).unwrap(), Measure::power(0.5, 0.0).unwrap()),
    ];
    for (p, q) in &pairs {
        let closed = set_probabilities(p, q).unwrap();
        let mp = Measure::mixture(vec![1.0], vec![p.clone()]).unwrap();
        let mq = Measure::mixture(vec![1.0], vec![q.clone()]).unwrap();
        let generic = set_probabilities(&mp, &mq).unwrap();
        for (a, b) in [
            (closed.p_pgt, generic.p_pgt),
            (closed.p_plt, generic.p_plt),
            (closed.q_pgt, generic.q_pgt),
            (closed.q_plt, generic.q_plt),
        ] {
            approx(a, b, 1e-9);
        }
        // TV = P(p>q) - Q(p>q)
        approx(closed.p_pgt - closed.q_pgt, tv_distance(p, q, Method::Auto).unwrap(), 1e-12);
    }
}

#[test]
fn uniform_set_probabilities_have_ties() {
    let p = Measure::uniform(0.0, 1.0).unwrap();
    let q = Measure::uniform(0.25, 1.25).unwrap();
    let s = set_probabilities(&p, &q).unwrap();
    approx(s.p_pgt, 0.25, 1e-15);
    assert_eq!(s.p_plt, 0.0);
    assert_eq!(s.q_pgt, 0.0);
    approx(s.q_plt, 0.25, 1e-15);
    let mp = Measure::mixture(vec![1.0], vec![p]).unwrap();
    let mq = Measure::mixture(vec![1.0], vec![q]).unwrap();
    let g = set_probabilities(&mp, &mq).unwrap();
    approx(g.p_pgt, 0.25, 1e-15);
    approx(g.q_plt, 0.25, 1e-15);
}
