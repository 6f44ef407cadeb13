//! Distances between measures.
//!
//! Every 1-d measure splits into an absolutely continuous part and atoms.
//! TV, Hellinger and KL are computed on that decomposition, so they need no
//! common reference measure. Piecewise-constant parts are integrated exactly
//! on the common refinement of their breakpoints; everything else goes
//! through [`crate::quad`].

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_2_PI, SQRT_2};

use super::cdf::{w1_affine, AffineCdf};
use super::{merge_atoms, piece_index, sort_dedup, Family, Measure, Reference};
use crate::error::{Error, Result};
use crate::quad::{self, Domain};
use crate::special::{cauchy_cdf, norm_cdf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Method {
    #[default]
    Auto,
    Quadrature,
    ClosedForm,
}

/// Location pairs with a closed-form TV distance. `delta` is the location
/// of Q minus that of P.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum TranslationPair {
    Gaussian { delta: f64, sd: f64 },
    GaussianNd { dist: f64 },
    Cauchy { delta: f64, scale: f64 },
    Uniform { delta: f64, width: f64 },
    Power { delta: f64, alpha: f64 },
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
}

pub(crate) fn translation_pair(p: &Measure, q: &Measure) -> Option<TranslationPair> {
    use Family::*;
    match (&p.family, &q.family) {
        (Gaussian { mean: m1, sd: s1 }, Gaussian { mean: m2, sd: s2 }) if s1 == s2 => {
            Some(TranslationPair::Gaussian { delta: m2 - m1, sd: *s1 })
        }
        (GaussianNd { mean: m1 }, GaussianNd { mean: m2 }) if m1.len() == m2.len() => {
            let d2: f64 = m1.iter().zip(m2).map(|(a, b)| (a - b) * (a - b)).sum();
            Some(TranslationPair::GaussianNd { dist: libm::sqrt(d2) })
        }
        (Cauchy { loc: l1, scale: s1 }, Cauchy { loc: l2, scale: s2 }) if s1 == s2 => {
            Some(TranslationPair::Cauchy { delta: l2 - l1, scale: *s1 })
        }
        (Uniform { lo: a1, hi: b1 }, Uniform { lo: a2, hi: b2 }) if close(b1 - a1, b2 - a2) => {
            Some(TranslationPair::Uniform { delta: a2 - a1, width: b1 - a1 })
        }
        (Power { alpha: a1, shift: s1 }, Power { alpha: a2, shift: s2 }) if a1 == a2 => {
            if *a1 == 1.0 {
                Some(TranslationPair::Uniform { delta: s2 - s1, width: 1.0 })
            } else {
                Some(TranslationPair::Power { delta: s2 - s1, alpha: *a1 })
            }
        }
        _ => None,
    }
}

/// Open intervals on which `½ sign(q - p)` is a nonzero constant, as
/// `(lo, hi, value)`, for 1-d translation pairs. Outside the intervals and
/// away from their endpoints the pair ties.
pub(crate) fn tv_sign_regions(p: &Measure, q: &Measure) -> Option<Vec<(f64, f64, f64)>> {
    use Family::*;
    let inf = f64::INFINITY;
    // half-lines split at the midpoint of two symmetric unimodal translates
    let split = |m1: f64, m2: f64| {
        let mid = 0.5 * (m1 + m2);
        if m2 > m1 {
            alloc::vec![(-inf, mid, -0.5), (mid, inf, 0.5)]
        } else if m2 < m1 {
            alloc::vec![(-inf, mid, 0.5), (mid, inf, -0.5)]
        } else {
            Vec::new()
        }
    };
    // equal-width boxes: each translate wins on the part the other misses
    let boxes = |a1: f64, b1: f64, a2: f64, b2: f64| {
        if a2 > a1 {
            alloc::vec![(a1, a2.min(b1), -0.5), (a2.max(b1), b2, 0.5)]
        } else if a2 < a1 {
            alloc::vec![(a2, a1.min(b2), 0.5), (a1.max(b2), b1, -0.5)]
        } else {
            Vec::new()
        }
    };
    match (&p.family, &q.family) {
        (Gaussian { mean: m1, sd: s1 }, Gaussian { mean: m2, sd: s2 }) if s1 == s2 => Some(split(*m1, *m2)),
        (Cauchy { loc: l1, scale: s1 }, Cauchy { loc: l2, scale: s2 }) if s1 == s2 => Some(split(*l1, *l2)),
        (Uniform { lo: a1, hi: b1 }, Uniform { lo: a2, hi: b2 }) if close(b1 - a1, b2 - a2) => {
            Some(boxes(*a1, *b1, *a2, *b2))
        }
        (Power { alpha: x1, shift: s1 }, Power { alpha: x2, shift: s2 }) if x1 == x2 && *x1 < 1.0 => {
            // decreasing densities: the right translate wins wherever it lives
            let (s1, s2) = (*s1, *s2);
            Some(if s2 > s1 {
                alloc::vec![(s1, s2.min(s1 + 1.0), -0.5), (s2, s2 + 1.0, 0.5)]
            } else if s2 < s1 {
                alloc::vec![(s2, s1.min(s2 + 1.0), 0.5), (s1, s1 + 1.0, -0.5)]
            } else {
                Vec::new()
            })
        }
        (Power { alpha: x1, shift: s1 }, Power { alpha: x2, shift: s2 }) if x1 == x2 && *x1 == 1.0 => {
            Some(boxes(*s1, s1 + 1.0, *s2, s2 + 1.0))
        }
        _ => None,
    }
}

impl TranslationPair {
    fn tv(&self) -> f64 {
        match *self {
            TranslationPair::Gaussian { delta, sd } => libm::erf(delta.abs() / (2.0 * SQRT_2 * sd)),
            TranslationPair::GaussianNd { dist } => libm::erf(dist / (2.0 * SQRT_2)),
            TranslationPair::Cauchy { delta, scale } => FRAC_2_PI * libm::atan(delta.abs() / (2.0 * scale)),
            TranslationPair::Uniform { delta, width } => (delta.abs() / width).min(1.0),
            TranslationPair::Power { delta, alpha } => libm::pow(delta.abs().min(1.0), alpha),
        }
    }

    fn set_probs(&self) -> SetProbs {
        // symmetric unimodal pairs: {p > q} is the half-space on P's side
        let sym = |near: f64, tied: bool| {
            if tied {
                SetProbs::default()
            } else {
                SetProbs { p_pgt: near, p_plt: 1.0 - near, q_pgt: 1.0 - near, q_plt: near }
            }
        };
        match *self {
            TranslationPair::Gaussian { delta, sd } => sym(norm_cdf(delta.abs() / (2.0 * sd)), delta == 0.0),
            TranslationPair::GaussianNd { dist } => sym(norm_cdf(dist / 2.0), dist == 0.0),
            TranslationPair::Cauchy { delta, scale } => sym(cauchy_cdf(delta.abs() / (2.0 * scale)), delta == 0.0),
            TranslationPair::Uniform { delta, width } => {
                let r = (delta.abs() / width).min(1.0);
                SetProbs { p_pgt: r, p_plt: 0.0, q_pgt: 0.0, q_plt: r }
            }
            TranslationPair::Power { delta, alpha } => {
                let r = libm::pow(delta.abs().min(1.0), alpha);
                if delta > 0.0 {
                    SetProbs { p_pgt: r, p_plt: 1.0 - r, q_pgt: 0.0, q_plt: 1.0 }
                } else if delta < 0.0 {
                    SetProbs { p_pgt: 1.0, p_plt: 0.0, q_pgt: 1.0 - r, q_plt: r }
                } else {
                    SetProbs::default()
                }
            }
        }
    }
}

fn same_dim(p: &Measure, q: &Measure) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::IncompatibleReference(format!(
            "dimensions differ: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    Ok(())
}

/// `½ ∫ |p - q| dμ`.
pub fn tv_distance(p: &Measure, q: &Measure, method: Method) -> Result<f64> {
    p.require_probability()?;
    q.require_probability()?;
    same_dim(p, q)?;
    if p.family == q.family {
        return Ok(0.0);
    }
    let pair = translation_pair(p, q);
    match (method, pair) {
        (Method::ClosedForm, None) => Err(Error::unsupported(format!(
            "no closed-form TV for ({}, {})",
            p.family.name(),
            q.family.name()
        ))),
        (Method::ClosedForm, Some(t)) | (Method::Auto, Some(t)) => Ok(t.tv()),
        _ => {
            if p.dim() > 1 {
                return Err(Error::unsupported("quadrature in dimension > 1"));
            }
            Ok(generic_tv(p, q)?.clamp(0.0, 1.0))
        }
    }
}

type Pc = (Vec<f64>, Vec<f64>);

/// Piecewise-constant ac density, with an empty one for purely atomic measures.
fn pc_or_empty(m: &Measure) -> Option<Pc> {
    if m.ac_mass() == 0.0 && m.ac_hull().is_none() {
        Some((Vec::new(), Vec::new()))
    } else {
        m.piecewise_constant()
    }
}

/// Segments `(length, p value, q value)` of the common refinement.
fn refine(p: &Pc, q: &Pc) -> Vec<(f64, f64, f64)> {
    let mut knots = p.0.clone();
    knots.extend_from_slice(&q.0);
    let knots = sort_dedup(knots);
    let val = |pc: &Pc, x: f64| piece_index(&pc.0, x).map_or(0.0, |k| pc.1[k]);
    knots
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            (w[1] - w[0], val(p, mid), val(q, mid))
        })
        .collect()
}

fn ac_domain(p: &Measure, q: &Measure) -> Option<Domain> {
    let (a, b) = match (p.ac_hull(), q.ac_hull()) {
        (None, None) => return None,
        (Some(h), None) | (None, Some(h)) => h,
        (Some((a1, b1)), Some((a2, b2))) => (a1.min(a2), b1.max(b2)),
    };
    let mut d = Domain::new(a, b);
    d.breaks = p.ac_breaks();
    d.breaks.extend(q.ac_breaks());
    d.singular = p.singularities();
    d.singular.extend(q.singularities());
    d.scale = p.scale().max(q.scale());
    Some(d)
}

/// Atoms of both measures on the union of their points.
fn joint_atoms(p: &Measure, q: &Measure) -> Vec<(f64, f64, f64)> {
    let pts = merge_atoms(
        p.atoms_list().into_iter().chain(q.atoms_list()).map(|(x, _)| (x, 1.0)).collect(),
    );
    pts.into_iter().map(|(x, _)| (x, p.atom_mass(x), q.atom_mass(x))).collect()
}

fn generic_tv(p: &Measure, q: &Measure) -> Result<f64> {
    let atoms: f64 = joint_atoms(p, q).iter().map(|(_, a, b)| (a - b).abs()).sum();
    let ac = match (pc_or_empty(p), pc_or_empty(q)) {
        (Some(a), Some(b)) => refine(&a, &b).iter().map(|(l, x, y)| l * (x - y).abs()).sum(),
        _ => match ac_domain(p, q) {
            None => 0.0,
            Some(dom) => quad::integrate(|x| (p.ac_density(x) - q.ac_density(x)).abs(), &dom, quad::ABS_TOL)?,
        },
    };
    Ok(0.5 * (ac + atoms))
}

/// `1 - ∫ √(pq) dμ`.
pub fn hellinger_sq(p: &Measure, q: &Measure) -> Result<f64> {
    p.require_probability()?;
    q.require_probability()?;
    same_dim(p, q)?;
    if p.family == q.family {
        return Ok(0.0);
    }
    use Family::*;
    let closed = match (&p.family, &q.family) {
        (Gaussian { mean: m1, sd: s1 }, Gaussian { mean: m2, sd: s2 }) => {
            let v = s1 * s1 + s2 * s2;
            let d = m1 - m2;
            Some(1.0 - libm::sqrt(2.0 * s1 * s2 / v) * libm::exp(-d * d / (4.0 * v)))
        }
        (GaussianNd { mean: m1 }, GaussianNd { mean: m2 }) => {
            let d2: f64 = m1.iter().zip(m2).map(|(a, b)| (a - b) * (a - b)).sum();
            Some(-libm::expm1(-d2 / 8.0))
        }
        _ => None,
    };
    if let Some(h) = closed {
        return Ok(h.clamp(0.0, 1.0));
    }
    if p.dim() > 1 {
        return Err(Error::unsupported("Hellinger quadrature in dimension > 1"));
    }
    let atoms: f64 = joint_atoms(p, q).iter().map(|(_, a, b)| libm::sqrt(a * b)).sum();
    let ac = match (pc_or_empty(p), pc_or_empty(q)) {
        (Some(a), Some(b)) => refine(&a, &b).iter().map(|(l, x, y)| l * libm::sqrt(x * y)).sum(),
        _ => match ac_domain(p, q) {
            None => 0.0,
            Some(dom) => quad::integrate(
                |x| libm::exp(0.5 * (p.ac_log_density(x) + q.ac_log_density(x))),
                &dom,
                quad::ABS_TOL,
            )?,
        },
    };
    Ok((1.0 - ac - atoms).clamp(0.0, 1.0))
}

/// `∫ p log(p/q) dμ` with `0 log(0/q) = 0` and `a log(a/0) = +∞`.
pub fn kl_divergence(p: &Measure, q: &Measure) -> Result<f64> {
    p.require_probability()?;
    q.require_probability()?;
    same_dim(p, q)?;
    if p.family == q.family {
        return Ok(0.0);
    }
    use Family::*;
    let closed = match (&p.family, &q.family) {
        (Gaussian { mean: m1, sd: s1 }, Gaussian { mean: m2, sd: s2 }) => {
            let d = m1 - m2;
            Some(libm::log(s2 / s1) + (s1 * s1 + d * d) / (2.0 * s2 * s2) - 0.5)
        }
        (GaussianNd { mean: m1 }, GaussianNd { mean: m2 }) => {
            Some(0.5 * m1.iter().zip(m2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        }
        (Cauchy { loc: l1, scale: s1 }, Cauchy { loc: l2, scale: s2 }) => {
            let d = l1 - l2;
            Some(libm::log(((s1 + s2) * (s1 + s2) + d * d) / (4.0 * s1 * s2)))
        }
        _ => None,
    };
    if let Some(k) = closed {
        return Ok(k.max(0.0));
    }
    if p.dim() > 1 {
        return Err(Error::unsupported("KL quadrature in dimension > 1"));
    }
    let mut total = 0.0;
    for (_, a, b) in joint_atoms(p, q) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += a * libm::log(a / b);
        }
    }
    if p.ac_mass() > 0.0 {
        match (pc_or_empty(p), pc_or_empty(q)) {
            (Some(a), Some(b)) => {
                for (l, x, y) in refine(&a, &b) {
                    if x > 0.0 && l > 0.0 {
                        if y <= 0.0 {
                            return Ok(f64::INFINITY);
                        }
                        total += l * x * libm::log(x / y);
                    }
                }
            }
            _ => {
                let dom = ac_domain(p, q).expect("p has an ac part");
                // support mismatch shows up on whole pieces of the cut
                let cuts = dom.cut_points();
                for w in cuts.windows(2) {
                    for x in probe_points(w[0], w[1], dom.scale) {
                        if p.ac_density(x) > 0.0 && q.ac_density(x) <= 0.0 {
                            return Ok(f64::INFINITY);
                        }
                    }
                }
                total += quad::integrate(
                    |x| {
                        let lp = p.ac_log_density(x);
                        let lq = q.ac_log_density(x);
                        if lp == f64::NEG_INFINITY || lq == f64::NEG_INFINITY {
                            0.0
                        } else {
                            libm::exp(lp) * (lp - lq)
                        }
                    },
                    &dom,
                    quad::ABS_TOL,
                )?;
            }
        }
    }
    Ok(total.max(0.0))
}

/// A few interior points of `[a, b]`, finite even for infinite ends.
fn probe_points(a: f64, b: f64, scale: f64) -> [f64; 3] {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => [a + 0.25 * (b - a), 0.5 * (a + b), a + 0.75 * (b - a)],
        (true, false) => [a + 0.1 * scale, a + scale, a + 10.0 * scale],
        (false, true) => [b - 0.1 * scale, b - scale, b - 10.0 * scale],
        (false, false) => [-scale, 0.0, scale],
    }
}

/// `∫_0^1 |F_P - F_Q|` for probabilities on `[0, 1]`.
pub fn wasserstein1(p: &Measure, q: &Measure) -> Result<f64> {
    let a = AffineCdf::on_unit(p)?;
    let b = AffineCdf::on_unit(q)?;
    Ok(w1_affine(&a, &b))
}

/// Points of a discrete reference with the weights of both measures, and
/// both densities. Weights must agree wherever both measures have a point.
fn discrete_union(p: &Measure, q: &Measure) -> Result<Vec<(f64, f64, f64)>> {
    let (Family::Atoms { points: xp, masses: mp, weights: wp }, Family::Atoms { points: xq, masses: mq, weights: wq }) =
        (&p.family, &q.family)
    else {
        return Err(Error::IncompatibleReference("expected two discrete measures".into()));
    };
    let mut out = Vec::with_capacity(xp.len() + xq.len());
    let (mut i, mut j) = (0, 0);
    while i < xp.len() || j < xq.len() {
        if j >= xq.len() || (i < xp.len() && xp[i] < xq[j]) {
            out.push((wp[i], mp[i] / wp[i], 0.0));
            i += 1;
        } else if i >= xp.len() || xq[j] < xp[i] {
            out.push((wq[j], 0.0, mq[j] / wq[j]));
            j += 1;
        } else {
            if !close(wp[i], wq[j]) {
                return Err(Error::IncompatibleReference(format!(
                    "reference weights disagree at point {}",
                    xp[i]
                )));
            }
            out.push((wp[i], mp[i] / wp[i], mq[j] / wq[j]));
            i += 1;
            j += 1;
        }
    }
    Ok(out)
}

/// Grid size for the essential sup of non-piecewise densities.
pub const SUP_GRID: usize = 4096;

/// `‖p - q‖_{μ,j}`; `j = ∞` gives the μ-essential sup.
pub fn lj_distance(p: &Measure, q: &Measure, j: f64) -> Result<f64> {
    if !(j > 1.0) {
        return Err(Error::invalid(format!("j must exceed 1, got {j}")));
    }
    let (rp, rq) = (p.reference(), q.reference());
    let infinite = j.is_infinite();
    let finish = |terms: &mut dyn Iterator<Item = (f64, f64)>| -> f64 {
        // (reference mass, |difference|)
        if infinite {
            terms.filter(|(w, _)| *w > 0.0).map(|(_, d)| d).fold(0.0, f64::max)
        } else {
            libm::pow(terms.map(|(w, d)| w * libm::pow(d, j)).sum::<f64>(), 1.0 / j)
        }
    };
    match (&rp, &rq) {
        (Reference::Partition { .. }, Reference::Partition { .. }) if rp == rq => {
            let (Family::Cells { values: a, .. }, Family::Cells { values: b, .. }) = (&p.family, &q.family) else {
                let pa = p.cell_probs().expect("partitioned");
                let pb = q.cell_probs().expect("partitioned");
                let d = pa.len() as f64;
                return Ok(finish(&mut pa.iter().zip(&pb).map(|(x, y)| (1.0 / d, (d * (x - y)).abs()))));
            };
            let d = a.len() as f64;
            Ok(finish(&mut a.iter().zip(b).map(|(x, y)| (1.0 / d, (x - y).abs()))))
        }
        (Reference::Discrete { .. }, Reference::Discrete { .. }) => {
            let u = discrete_union(p, q)?;
            Ok(finish(&mut u.iter().map(|(w, x, y)| (*w, (x - y).abs()))))
        }
        (Reference::Lebesgue, Reference::Lebesgue) => {
            if let (Some(a), Some(b)) = (p.piecewise_constant(), q.piecewise_constant()) {
                return Ok(finish(&mut refine(&a, &b).into_iter().map(|(l, x, y)| (l, (x - y).abs()))));
            }
            let dom = ac_domain(p, q).expect("Lebesgue measures have an ac part");
            if infinite {
                let g = sup_grid(&dom);
                Ok(g.iter().map(|&x| (p.density1(x) - q.density1(x)).abs()).fold(0.0, f64::max))
            } else {
                let v = quad::integrate(|x| libm::pow((p.density1(x) - q.density1(x)).abs(), j), &dom, quad::ABS_TOL)?;
                Ok(libm::pow(v, 1.0 / j))
            }
        }
        _ => Err(Error::IncompatibleReference(format!(
            "L_j needs a common reference measure, got {} and {}",
            p.family.name(),
            q.family.name()
        ))),
    }
}

/// Breakpoints plus an equispaced grid of [`SUP_GRID`] cells over the hull;
/// infinite ends are truncated at ten length scales beyond the breakpoints.
pub(crate) fn sup_grid(dom: &Domain) -> Vec<f64> {
    let cuts = dom.cut_points();
    let finite: Vec<f64> = cuts.iter().copied().filter(|x| x.is_finite()).collect();
    let (fmin, fmax) = match (finite.first(), finite.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => (0.0, 0.0),
    };
    let lo = if dom.lo.is_finite() { dom.lo } else { fmin - 10.0 * dom.scale };
    let hi = if dom.hi.is_finite() { dom.hi } else { fmax + 10.0 * dom.scale };
    let mut g: Vec<f64> = (0..=SUP_GRID).map(|k| lo + (hi - lo) * k as f64 / SUP_GRID as f64).collect();
    for &c in &finite {
        g.push(c);
        // one-sided limits at jumps
        let eps = 1e-12 * (1.0 + c.abs());
        g.push(c - eps);
        g.push(c + eps);
    }
    sort_dedup(g)
}

/// Probabilities of the sets `{p > q}` and `{p < q}` under P and Q.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SetProbs {
    /// `P(p > q)`
    pub p_pgt: f64,
    /// `P(p < q)`
    pub p_plt: f64,
    /// `Q(p > q)`
    pub q_pgt: f64,
    /// `Q(p < q)`
    pub q_plt: f64,
}

impl SetProbs {
    pub fn swapped(&self) -> SetProbs {
        SetProbs { p_pgt: self.q_plt, p_plt: self.q_pgt, q_pgt: self.p_plt, q_plt: self.p_pgt }
    }
}

const CROSSING_SCAN: usize = 64;

/// Set probabilities for densities on a common reference measure. Closed
/// forms for translation pairs; exact sums for discrete, partitioned and
/// piecewise-constant densities; otherwise the crossings of `log p - log q`
/// are located by scanning and bisection and the sets are measured through
/// the CDFs.
pub fn set_probabilities(p: &Measure, q: &Measure) -> Result<SetProbs> {
    if let Some(t) = translation_pair(p, q) {
        return Ok(t.set_probs());
    }
    let (rp, rq) = (p.reference(), q.reference());
    let mut s = SetProbs::default();
    let mut add = |pd: f64, qd: f64, pm: f64, qm: f64| {
        if pd > qd {
            s.p_pgt += pm;
            s.q_pgt += qm;
        } else if pd < qd {
            s.p_plt += pm;
            s.q_plt += qm;
        }
    };
    match (&rp, &rq) {
        (Reference::Partition { .. }, Reference::Partition { .. }) if rp == rq => {
            let (a, b) = (p.cell_probs().unwrap(), q.cell_probs().unwrap());
            for (x, y) in a.iter().zip(&b) {
                add(*x, *y, *x, *y);
            }
        }
        (Reference::Discrete { .. }, Reference::Discrete { .. }) => {
            for (w, x, y) in discrete_union(p, q)? {
                add(x, y, w * x, w * y);
            }
        }
        (Reference::Lebesgue, Reference::Lebesgue) => {
            if let (Some(a), Some(b)) = (p.piecewise_constant(), q.piecewise_constant()) {
                for (l, x, y) in refine(&a, &b) {
                    add(x, y, l * x, l * y);
                }
            } else {
                let dom = ac_domain(p, q).expect("Lebesgue measures have an ac part");
                let cuts = crossing_cuts(p, q, &dom);
                for w in cuts.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    let mid = match (a.is_finite(), b.is_finite()) {
                        (true, true) => 0.5 * (a + b),
                        (true, false) => a + dom.scale,
                        (false, true) => b - dom.scale,
                        (false, false) => 0.0,
                    };
                    let (lp, lq) = (p.log_density1(mid), q.log_density1(mid));
                    let pm = p.cdf(b)? - p.cdf(a)?;
                    let qm = q.cdf(b)? - q.cdf(a)?;
                    if lp == lq {
                        continue;
                    }
                    add(lp, lq, pm, qm);
                }
            }
        }
        _ => {
            return Err(Error::IncompatibleReference(format!(
                "set probabilities need a common reference, got {} and {}",
                p.family.name(),
                q.family.name()
            )))
        }
    }
    Ok(s)
}

fn log_gap_sign(p: &Measure, q: &Measure, x: f64) -> f64 {
    let (a, b) = (p.log_density1(x), q.log_density1(x));
    if a == b || (a.is_nan() && b.is_nan()) {
        0.0
    } else if a > b {
        1.0
    } else {
        -1.0
    }
}

fn crossing_cuts(p: &Measure, q: &Measure, dom: &Domain) -> Vec<f64> {
    let mut cuts = dom.cut_points();
    let base = cuts.clone();
    let s = dom.scale;
    for w in base.windows(2) {
        let (a, b) = (w[0], w[1]);
        let map = |u: f64| -> f64 {
            match (a.is_finite(), b.is_finite()) {
                (true, true) => a + (b - a) * u,
                (true, false) => a + s * libm::tan(u * core::f64::consts::FRAC_PI_2),
                (false, true) => b - s * libm::tan((1.0 - u) * core::f64::consts::FRAC_PI_2),
                (false, false) => unreachable!(),
            }
        };
        let mut prev_u = 0.5 / CROSSING_SCAN as f64;
        let mut prev = log_gap_sign(p, q, map(prev_u));
        for k in 1..CROSSING_SCAN {
            let u = (k as f64 + 0.5) / CROSSING_SCAN as f64;
            let cur = log_gap_sign(p, q, map(u));
            if cur != prev && cur != 0.0 && prev != 0.0 {
                let (mut lo, mut hi) = (map(prev_u), map(u));
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if log_gap_sign(p, q, mid) == prev {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                cuts.push(0.5 * (lo + hi));
            }
            if cur != 0.0 {
                prev = cur;
                prev_u = u;
            }
        }
    }
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    cuts
}

/// `∫ g(p(x), q(x)) dμ(x)` for two densities on a common reference measure,
/// with `g(0, 0) = 0`. Exact for discrete, partitioned and piecewise-constant
/// densities; quadrature otherwise.
pub fn pair_integral<G: Fn(f64, f64) -> f64>(p: &Measure, q: &Measure, g: G) -> Result<f64> {
    let (rp, rq) = (p.reference(), q.reference());
    match (&rp, &rq) {
        (Reference::Partition { cells, .. }, Reference::Partition { .. }) if rp == rq => {
            let (Family::Cells { values: a, .. }, Family::Cells { values: b, .. }) = (&p.family, &q.family) else {
                let (a, b) = (p.cell_probs().unwrap(), q.cell_probs().unwrap());
                let d = *cells as f64;
                return Ok(a.iter().zip(&b).map(|(x, y)| g(d * x, d * y)).sum::<f64>() / d);
            };
            Ok(a.iter().zip(b).map(|(x, y)| g(*x, *y)).sum::<f64>() / *cells as f64)
        }
        (Reference::Discrete { .. }, Reference::Discrete { .. }) => {
            Ok(discrete_union(p, q)?.iter().map(|(w, x, y)| w * g(*x, *y)).sum())
        }
        (Reference::Lebesgue, Reference::Lebesgue) => {
            if let (Some(a), Some(b)) = (p.piecewise_constant(), q.piecewise_constant()) {
                return Ok(refine(&a, &b).iter().map(|(l, x, y)| l * g(*x, *y)).sum());
            }
            let dom = ac_domain(p, q).expect("Lebesgue measures have an ac part");
            quad::integrate(|x| g(p.density1(x), q.density1(x)), &dom, quad::ABS_TOL)
        }
        _ => Err(Error::IncompatibleReference(format!(
            "integral over a common reference needs matching references, got {} and {}",
            p.family.name(),
            q.family.name()
        ))),
    }
}

/// Points where a pair of densities is inspected for sup-type checks: every
/// atom or cell for discrete and partitioned references, atoms, breakpoints
/// and a dense grid otherwise.
pub fn probe_grid(p: &Measure, q: &Measure) -> Result<Vec<f64>> {
    let (rp, rq) = (p.reference(), q.reference());
    match (&rp, &rq) {
        (Reference::Partition { cells, lo, hi }, Reference::Partition { .. }) if rp == rq => Ok((0..*cells)
            .map(|k| 0.5 * (super::cell_edge(*lo, *hi, *cells, k) + super::cell_edge(*lo, *hi, *cells, k + 1)))
            .collect()),
        (Reference::Discrete { points: a, .. }, Reference::Discrete { points: b, .. }) => {
            let mut v = a.clone();
            v.extend_from_slice(b);
            Ok(sort_dedup(v))
        }
        _ if p.dim() == 1 && q.dim() == 1 => {
            // atoms of both plus a dense grid over the ac parts
            let mut v: Vec<f64> = p.atoms_list().into_iter().chain(q.atoms_list()).map(|(x, _)| x).collect();
            if let Some(dom) = ac_domain(p, q) {
                v.extend(sup_grid(&dom));
            }
            Ok(sort_dedup(v))
        }
        _ => Err(Error::IncompatibleReference(format!(
            "no common probe grid for {} and {}",
            p.family.name(),
            q.family.name()
        ))),
    }
}

/// `∫ f dM` for a 1-d measure: exact over atoms, quadrature on the ac part
/// with the measure's breakpoints plus `extra_breaks` as panel boundaries.
pub fn expectation<F: Fn(f64) -> f64>(m: &Measure, f: F, extra_breaks: &[f64]) -> Result<f64> {
    if m.dim() != 1 {
        return Err(Error::unsupported("expectations of non-scalar measures"));
    }
    let atoms: f64 = m.atoms_list().iter().map(|(x, w)| w * f(*x)).sum();
    let ac = match ac_domain(m, m) {
        None => 0.0,
        Some(mut dom) => {
            dom.breaks.extend(extra_breaks.iter().copied().filter(|x| x.is_finite()));
            quad::integrate(|x| m.ac_density(x) * f(x), &dom, quad::ABS_TOL)?
        }
    };
    Ok(atoms + ac)
}
