//! Adaptive composite Simpson quadrature over piecewise-smooth integrands.
//!
//! The domain is cut at known breakpoints; infinite tails are mapped through
//! `x = b ± s·tan θ`, and pieces whose left end carries an integrable power
//! singularity `(x-a)^{α-1}` are mapped through `x = a + (b-a)u^m` with
//! `m = ceil(2/α) + 1`. Non-finite integrand values count as zero.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

pub const ABS_TOL: f64 = 1e-8;
pub const MAX_PANELS: usize = 1 << 20;
const INITIAL_PANELS: usize = 8;
const MAX_DEPTH: u32 = 60;
/// Relative width of the analytic sliver next to a shifted singularity.
const TAIL_REL: f64 = 1.0 / 4_294_967_296.0;

/// Integration domain: hull `[lo, hi]` (either end may be infinite), interior
/// breakpoints, and left-end power singularities `(point, α)`.
#[derive(Clone, Debug)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    pub breaks: Vec<f64>,
    pub singular: Vec<(f64, f64)>,
    /// Length scale used by the tail substitution.
    pub scale: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Self {
        Domain { lo, hi, breaks: Vec::new(), singular: Vec::new(), scale: 1.0 }
    }

    /// Sorted, deduplicated cut points strictly inside the hull, with the hull ends.
    pub fn cut_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .breaks
            .iter()
            .copied()
            .filter(|&b| b.is_finite() && b > self.lo && b < self.hi)
            .collect();
        pts.push(self.lo);
        pts.push(self.hi);
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        if self.lo.is_infinite() && self.hi.is_infinite() && pts.len() == 2 {
            pts.insert(1, 0.0);
        }
        pts
    }

    fn singular_alpha(&self, a: f64) -> Option<f64> {
        self.singular
            .iter()
            .filter(|(p, _)| *p == a)
            .map(|(_, al)| *al)
            .fold(None, |acc, al| Some(acc.map_or(al, |m: f64| m.min(al))))
            .filter(|&al| al < 1.0)
    }
}

struct Budget {
    panels: usize,
}

/// `∫ f` over the domain to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, dom: &Domain, tol: f64) -> Result<f64> {
    if !(dom.lo < dom.hi) {
        return Ok(0.0);
    }
    let pts = dom.cut_points();
    let pieces = pts.len() - 1;
    let piece_tol = tol / pieces as f64;
    let mut budget = Budget { panels: 0 };
    let mut total = 0.0;
    let s = if dom.scale > 0.0 && dom.scale.is_finite() { dom.scale } else { 1.0 };
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let v = match (a.is_finite(), b.is_finite()) {
            (true, true) => match dom.singular_alpha(a) {
                Some(alpha) => {
                    let m = libm::ceil(2.0 / alpha) + 1.0;
                    let len = b - a;
                    // Offsets below the resolution of `a` cannot be represented, so the
                    // sliver [a, a+η] is integrated as C(x-a)^{α-1}, fitted at a+η.
                    let eta = (a.abs() * TAIL_REL).min(len * 1e-3);
                    let (u0, tail) = if eta > 0.0 {
                        let eta = (a + eta) - a;
                        (libm::pow(eta / len, 1.0 / m), finite_or_zero(f(a + eta)) * eta / alpha)
                    } else {
                        (0.0, 0.0)
                    };
                    let g = |u: f64| {
                        if u <= 0.0 {
                            return 0.0;
                        }
                        let x = a + len * libm::pow(u, m);
                        f(x) * m * len * libm::pow(u, m - 1.0)
                    };
                    simpson(&g, u0, 1.0, piece_tol, &mut budget)? + tail
                }
                None => simpson(&f, a, b, piece_tol, &mut budget)?,
            },
            (true, false) => {
                let g = |th: f64| {
                    let c = libm::cos(th);
                    if c <= 0.0 {
                        return 0.0;
                    }
                    f(a + s * libm::tan(th)) * s / (c * c)
                };
                simpson(&g, 0.0, FRAC_PI_2, piece_tol, &mut budget)?
            }
            (false, true) => {
                let g = |th: f64| {
                    let c = libm::cos(th);
                    if c <= 0.0 {
                        return 0.0;
                    }
                    f(b - s * libm::tan(th)) * s / (c * c)
                };
                simpson(&g, 0.0, FRAC_PI_2, piece_tol, &mut budget)?
            }
            (false, false) => unreachable!("cut points always split a doubly infinite hull"),
        };
        total += v;
    }
    Ok(total)
}

#[inline]
fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

struct Panel {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, budget: &mut Budget) -> Result<f64> {
    let h = (b - a) / INITIAL_PANELS as f64;
    let mut stack: Vec<Panel> = Vec::with_capacity(64);
    for k in 0..INITIAL_PANELS {
        let x0 = a + h * k as f64;
        let x1 = if k + 1 == INITIAL_PANELS { b } else { a + h * (k + 1) as f64 };
        let xm = 0.5 * (x0 + x1);
        let (fa, fm, fb) = (finite_or_zero(f(x0)), finite_or_zero(f(xm)), finite_or_zero(f(x1)));
        stack.push(Panel {
            a: x0,
            b: x1,
            fa,
            fm,
            fb,
            whole: (x1 - x0) / 6.0 * (fa + 4.0 * fm + fb),
            tol: tol / INITIAL_PANELS as f64,
            depth: 0,
        });
    }
    budget.panels += INITIAL_PANELS;
    let mut sum = 0.0;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = finite_or_zero(f(lm));
        let frm = finite_or_zero(f(rm));
        let left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
        let right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
        let delta = left + right - p.whole;
        let tiny = (p.b - p.a).abs() <= 1e-15 * (1.0 + p.a.abs().max(p.b.abs()));
        if delta.abs() <= 15.0 * p.tol || p.depth >= MAX_DEPTH || tiny {
            sum += left + right + delta / 15.0;
            continue;
        }
        budget.panels += 1;
        if budget.panels > MAX_PANELS {
            return Err(Error::NonConvergence(alloc::format!(
                "more than {MAX_PANELS} panels on [{a}, {b}]"
            )));
        }
        let half = 0.5 * p.tol;
        stack.push(Panel { a: p.a, b: m, fa: p.fa, fm: flm, fb: p.fm, whole: left, tol: half, depth: p.depth + 1 });
        stack.push(Panel { a: m, b: p.b, fa: p.fm, fm: frm, fb: p.fb, whole: right, tol: half, depth: p.depth + 1 });
    }
    Ok(sum)
}
