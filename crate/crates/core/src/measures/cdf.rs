//! Piecewise-affine CDFs on `[0, 1]`, the exact backbone of the Wasserstein
//! loss and its score functions.

use alloc::vec::Vec;

use super::{sort_dedup, Measure};
use crate::error::{Error, Result};

/// Number of grid cells used when a CDF is not piecewise affine.
pub const FALLBACK_GRID: usize = 4096;

/// Right-continuous CDF, affine on each `[knots[k], knots[k+1])` with value
/// `left[k]` at the left knot and left-limit `right[k]` at the right knot.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineCdf {
    pub knots: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    /// False when the measure's CDF was linearly interpolated on a grid.
    pub exact: bool,
}

impl AffineCdf {
    pub fn on_unit(m: &Measure) -> Result<Self> {
        if m.dim() != 1 {
            return Err(Error::unsupported("Wasserstein quantities need 1-d measures"));
        }
        m.require_probability()?;
        let (lo, hi) = m.support_hull();
        if lo < -1e-12 || hi > 1.0 + 1e-12 {
            return Err(Error::invalid(alloc::format!(
                "support of {} is [{lo}, {hi}], outside [0, 1]",
                m.tag
            )));
        }
        let exact = m.ac_mass() == 0.0 || m.piecewise_constant().is_some();
        let mut knots = Vec::new();
        knots.push(0.0);
        knots.push(1.0);
        knots.extend(m.ac_breaks().into_iter().filter(|&x| x > 0.0 && x < 1.0));
        knots.extend(m.atoms_list().into_iter().map(|(x, _)| x).filter(|&x| x > 0.0 && x < 1.0));
        if !exact {
            knots.extend((1..FALLBACK_GRID).map(|k| k as f64 / FALLBACK_GRID as f64));
        }
        let knots = sort_dedup(knots);
        let mut left = Vec::with_capacity(knots.len() - 1);
        let mut right = Vec::with_capacity(knots.len() - 1);
        for w in knots.windows(2) {
            left.push(m.cdf(w[0])?);
            right.push(m.cdf(w[1])? - m.atom_mass(w[1]));
        }
        Ok(AffineCdf { knots, left, right, exact })
    }

    fn segment(&self, t: f64) -> usize {
        let k = self.knots.partition_point(|&x| x <= t);
        (k.max(1) - 1).min(self.left.len() - 1)
    }

    /// Values at `a` and the left-limit at `b` for `[a, b)` inside one segment.
    fn on(&self, a: f64, b: f64) -> (f64, f64) {
        let k = self.segment(a);
        let (x0, x1) = (self.knots[k], self.knots[k + 1]);
        let slope = (self.right[k] - self.left[k]) / (x1 - x0);
        let va = if a == x0 { self.left[k] } else { self.left[k] + slope * (a - x0) };
        let vb = if b == x1 { self.right[k] } else { self.left[k] + slope * (b - x0) };
        (va, vb)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        self.on(t, t).0
    }
}

/// One piece of the common refinement of two CDFs on which `F_Q - F_P` has
/// constant sign.
#[derive(Clone, Copy, Debug)]
pub(crate) struct DiffPiece {
    pub a: f64,
    pub b: f64,
    pub fp: (f64, f64),
    pub fq: (f64, f64),
}

impl DiffPiece {
    pub fn sign(&self) -> f64 {
        let d = (self.fq.0 - self.fp.0) + (self.fq.1 - self.fp.1);
        crate::special::sign(d)
    }

    pub fn abs_integral(&self) -> f64 {
        let d0 = self.fq.0 - self.fp.0;
        let d1 = self.fq.1 - self.fp.1;
        0.5 * (self.b - self.a) * (d0.abs() + d1.abs())
    }
}

pub(crate) fn diff_pieces(p: &AffineCdf, q: &AffineCdf) -> Vec<DiffPiece> {
    let mut knots = p.knots.clone();
    knots.extend_from_slice(&q.knots);
    let knots = sort_dedup(knots);
    let mut out = Vec::with_capacity(knots.len());
    for w in knots.windows(2) {
        let (a, b) = (w[0], w[1]);
        let fp = p.on(a, b);
        let fq = q.on(a, b);
        let d0 = fq.0 - fp.0;
        let d1 = fq.1 - fp.1;
        if d0 * d1 < 0.0 {
            let r = d0 / (d0 - d1);
            let z = a + (b - a) * r;
            if z > a && z < b {
                let mid = |f: (f64, f64)| f.0 + (f.1 - f.0) * r;
                let (pz, qz) = (mid(fp), mid(fq));
                out.push(DiffPiece { a, b: z, fp: (fp.0, pz), fq: (fq.0, qz) });
                out.push(DiffPiece { a: z, b, fp: (pz, fp.1), fq: (qz, fq.1) });
                continue;
            }
        }
        out.push(DiffPiece { a, b, fp, fq });
    }
    out
}

/// `∫_0^1 |F_P - F_Q|`.
pub(crate) fn w1_affine(p: &AffineCdf, q: &AffineCdf) -> f64 {
    diff_pieces(p, q).iter().map(DiffPiece::abs_integral).sum()
}

/// Sign function `s = sgn(F_Q - F_P)` with its tail integrals, enough to
/// evaluate `f(x) = ∫_0^x s` and the Wasserstein score in `O(log r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WassersteinWitness {
    knots: Vec<f64>,
    signs: Vec<f64>,
    /// `tail[k] = ∫_{knots[k]}^1 s`.
    tail: Vec<f64>,
    /// `∫_0^1 s · (F_P + F_Q)/2`.
    pub mean_part: f64,
}

impl WassersteinWitness {
    pub fn new(p: &AffineCdf, q: &AffineCdf) -> Self {
        let pieces = diff_pieces(p, q);
        let mut knots = Vec::with_capacity(pieces.len() + 1);
        let mut signs = Vec::with_capacity(pieces.len());
        let mut mean_part = 0.0;
        for pc in &pieces {
            knots.push(pc.a);
            let s = pc.sign();
            signs.push(s);
            let fbar = 0.25 * (pc.fp.0 + pc.fq.0 + pc.fp.1 + pc.fq.1);
            mean_part += s * (pc.b - pc.a) * fbar;
        }
        knots.push(1.0);
        let mut tail = alloc::vec![0.0; knots.len()];
        for k in (0..signs.len()).rev() {
            tail[k] = tail[k + 1] + signs[k] * (knots[k + 1] - knots[k]);
        }
        WassersteinWitness { knots, signs, tail, mean_part }
    }

    /// `∫_x^1 s(t) dt` with `x` clamped to `[0, 1]`.
    pub fn tail_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.tail[0];
        }
        if x >= 1.0 {
            return 0.0;
        }
        let k = (self.knots.partition_point(|&z| z <= x).max(1) - 1).min(self.signs.len() - 1);
        self.tail[k + 1] + self.signs[k] * (self.knots[k + 1] - x)
    }

    /// Witness `f(x) = ∫_0^x s`.
    pub fn witness(&self, x: f64) -> f64 {
        self.tail[0] - self.tail_at(x)
    }

    /// Score `∫_0^1 s(t)[1_{x<=t} - (F_P + F_Q)(t)/2] dt`.
    pub fn score(&self, x: f64) -> f64 {
        self.tail_at(x) - self.mean_part
    }
}
