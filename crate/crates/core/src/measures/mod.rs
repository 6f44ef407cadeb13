//! Measures with evaluable densities, CDFs and samplers, plus distances.
//!
//! A [`Measure`] is a closed family of shapes rather than an arbitrary
//! closure: this keeps closed-form distances available, makes measures
//! serializable, and lets every density be evaluated without allocation.
//! User-supplied 1-d densities enter as [`Family::Piecewise`].

mod cdf;
mod distance;
mod sample;

pub use cdf::{AffineCdf, WassersteinWitness};
pub(crate) use distance::tv_sign_regions;
pub use distance::{
    expectation, hellinger_sq, kl_divergence, lj_distance, pair_integral, probe_grid, set_probabilities,
    tv_distance, wasserstein1, Method, SetProbs,
};
pub use sample::{empirical_cdf, empirical_measure, open_unit, sample_from, sample_with, EmpiricalCdf, Sample};

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::special;

/// Dominating measure μ against which densities are expressed.
#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    Lebesgue,
    LebesgueNd(usize),
    /// Normalized Lebesgue measure on `[lo, hi]`, cut into `cells` equal cells of mass `1/cells`.
    Partition { cells: usize, lo: f64, hi: f64 },
    Discrete { points: Vec<f64>, weights: Vec<f64> },
    /// Lebesgue plus counting measure on atoms; arises for contaminated truths.
    Mixed,
}

/// Shape of a measure. Densities are relative to [`Measure::reference`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "kebab-case"))]
pub enum Family {
    Gaussian { mean: f64, sd: f64 },
    /// `N(mean, I_d)`.
    GaussianNd { mean: Vec<f64> },
    Cauchy { loc: f64, scale: f64 },
    Uniform { lo: f64, hi: f64 },
    /// Density `α(x - shift)^{α-1}` on `(shift, shift + 1]`.
    Power { alpha: f64, shift: f64 },
    /// Lebesgue density `values[k]` on `[breaks[k], breaks[k+1])`; may be signed.
    Piecewise { breaks: Vec<f64>, values: Vec<f64> },
    /// Density `values[k]` w.r.t. the normalized Lebesgue measure on `[lo, hi]`
    /// cut into `values.len()` equal cells; may be signed.
    Cells { lo: f64, hi: f64, values: Vec<f64> },
    /// Masses at points; the reference gives point `k` weight `weights[k]`
    /// (empty weights mean counting measure).
    Atoms {
        points: Vec<f64>,
        masses: Vec<f64>,
        #[cfg_attr(feature = "serde", serde(default))]
        weights: Vec<f64>,
    },
    Mixture { weights: Vec<f64>, parts: Vec<Measure> },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Measure {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub family: Family,
    #[cfg_attr(feature = "serde", serde(default))]
    pub tag: String,
}

/// Family name with its location (and scale when it is not 1).
fn default_tag(f: &Family) -> String {
    match f {
        Family::Gaussian { mean, sd } if *sd == 1.0 => format!("gaussian({mean})"),
        Family::Gaussian { mean, sd } => format!("gaussian({mean},{sd})"),
        Family::Cauchy { loc, scale } if *scale == 1.0 => format!("cauchy({loc})"),
        Family::Cauchy { loc, scale } => format!("cauchy({loc},{scale})"),
        Family::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
        Family::Power { alpha, shift } => format!("power({alpha})@{shift}"),
        other => other.name().to_string(),
    }
}

fn bad(msg: String) -> Error {
    Error::InvalidArgument(msg)
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian { .. } => "gaussian",
            Family::GaussianNd { .. } => "gaussian-nd",
            Family::Cauchy { .. } => "cauchy",
            Family::Uniform { .. } => "uniform",
            Family::Power { .. } => "power",
            Family::Piecewise { .. } => "piecewise",
            Family::Cells { .. } => "cells",
            Family::Atoms { .. } => "atoms",
            Family::Mixture { .. } => "mixture",
        }
    }
}

impl Measure {
    /// Validates and normalizes (sorts atoms, fills unit reference weights).
    pub fn new(family: Family, tag: impl Into<String>) -> Result<Self> {
        let family = normalize(family)?;
        let mut tag: String = tag.into();
        if tag.is_empty() {
            tag = default_tag(&family);
        }
        let m = Measure { family, tag };
        m.validate()?;
        Ok(m)
    }

    /// Re-validates a deserialized measure.
    pub fn normalized(self) -> Result<Self> {
        Measure::new(self.family, self.tag)
    }

    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        Measure::new(Family::Gaussian { mean, sd }, "")
    }

    pub fn gaussian_nd(mean: Vec<f64>) -> Result<Self> {
        Measure::new(Family::GaussianNd { mean }, "")
    }

    pub fn cauchy(loc: f64, scale: f64) -> Result<Self> {
        Measure::new(Family::Cauchy { loc, scale }, "")
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Measure::new(Family::Uniform { lo, hi }, "")
    }

    pub fn power(alpha: f64, shift: f64) -> Result<Self> {
        Measure::new(Family::Power { alpha, shift }, "")
    }

    pub fn piecewise(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Measure::new(Family::Piecewise { breaks, values }, "")
    }

    pub fn cells(lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        Measure::new(Family::Cells { lo, hi, values }, "")
    }

    /// Masses on points with counting reference measure.
    pub fn atoms(points: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        Measure::new(Family::Atoms { points, masses, weights: Vec::new() }, "")
    }

    pub fn atoms_weighted(points: Vec<f64>, masses: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Measure::new(Family::Atoms { points, masses, weights }, "")
    }

    pub fn dirac(c: f64) -> Result<Self> {
        Measure::new(Family::Atoms { points: vec![c], masses: vec![1.0], weights: Vec::new() }, format!("dirac({c})"))
    }

    pub fn mixture(weights: Vec<f64>, parts: Vec<Measure>) -> Result<Self> {
        Measure::new(Family::Mixture { weights, parts }, "")
    }

    /// `(1-α)·base + α·contaminant`.
    pub fn contaminated(base: &Measure, alpha: f64, contaminant: &Measure) -> Result<Self> {
        Measure::mixture(vec![1.0 - alpha, alpha], vec![base.clone(), contaminant.clone()])
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fin = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(bad(format!("{what} must be finite, got {v}")))
            }
        };
        match &self.family {
            Family::Gaussian { mean, sd } => {
                fin(*mean, "gaussian.mean")?;
                if !(*sd > 0.0 && sd.is_finite()) {
                    return Err(bad(format!("gaussian.sd must be positive, got {sd}")));
                }
            }
            Family::GaussianNd { mean } => {
                if mean.is_empty() {
                    return Err(bad("gaussian-nd.mean must be nonempty".into()));
                }
                for &m in mean {
                    fin(m, "gaussian-nd.mean")?;
                }
            }
            Family::Cauchy { loc, scale } => {
                fin(*loc, "cauchy.loc")?;
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(bad(format!("cauchy.scale must be positive, got {scale}")));
                }
            }
            Family::Uniform { lo, hi } => {
                fin(*lo, "uniform.lo")?;
                fin(*hi, "uniform.hi")?;
                if !(lo < hi) {
                    return Err(bad(format!("uniform needs lo < hi, got [{lo}, {hi}]")));
                }
            }
            Family::Power { alpha, shift } => {
                fin(*shift, "power.shift")?;
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(bad(format!("power.alpha must lie in (0, 1], got {alpha}")));
                }
            }
            Family::Piecewise { breaks, values } => {
                if breaks.len() < 2 || values.len() + 1 != breaks.len() {
                    return Err(bad("piecewise needs k+1 breaks for k >= 1 values".into()));
                }
                for w in breaks.windows(2) {
                    fin(w[0], "piecewise.breaks")?;
                    fin(w[1], "piecewise.breaks")?;
                    if !(w[0] < w[1]) {
                        return Err(bad("piecewise.breaks must be strictly increasing".into()));
                    }
                }
                for &v in values {
                    fin(v, "piecewise.values")?;
                }
            }
            Family::Cells { lo, hi, values } => {
                fin(*lo, "cells.lo")?;
                fin(*hi, "cells.hi")?;
                if !(lo < hi) {
                    return Err(bad(format!("cells needs lo < hi, got [{lo}, {hi}]")));
                }
                if values.len() < 2 {
                    return Err(bad(format!("a uniform partition needs at least 2 cells, got {}", values.len())));
                }
                for &v in values {
                    fin(v, "cells.values")?;
                }
            }
            Family::Atoms { points, masses, weights } => {
                if points.is_empty() || points.len() != masses.len() || points.len() != weights.len() {
                    return Err(bad("atoms need equally many points, masses and weights (>= 1)".into()));
                }
                for w in points.windows(2) {
                    if !(w[0] < w[1]) {
                        return Err(bad("atom points must be distinct".into()));
                    }
                }
                for (&x, (&m, &w)) in points.iter().zip(masses.iter().zip(weights)) {
                    fin(x, "atoms.points")?;
                    fin(m, "atoms.masses")?;
                    if !(w > 0.0 && w.is_finite()) {
                        return Err(bad(format!("atom reference weights must be positive, got {w}")));
                    }
                }
            }
            Family::Mixture { weights, parts } => {
                if parts.is_empty() || parts.len() != weights.len() {
                    return Err(bad("mixture needs matching nonempty weights and parts".into()));
                }
                let s: f64 = weights.iter().sum();
                if weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) || (s - 1.0).abs() > 1e-12 {
                    return Err(bad(format!("mixture weights must be in [0,1] and sum to 1, got sum {s}")));
                }
                let d = parts[0].dim();
                for p in parts {
                    p.validate()?;
                    if p.dim() != d {
                        return Err(bad("mixture parts must share a dimension".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match &self.family {
            Family::GaussianNd { mean } => mean.len(),
            Family::Mixture { parts, .. } => parts[0].dim(),
            _ => 1,
        }
    }

    pub fn reference(&self) -> Reference {
        match &self.family {
            Family::GaussianNd { mean } => Reference::LebesgueNd(mean.len()),
            Family::Cells { lo, hi, values } => Reference::Partition { cells: values.len(), lo: *lo, hi: *hi },
            Family::Atoms { points, weights, .. } => Reference::Discrete { points: points.clone(), weights: weights.clone() },
            Family::Mixture { parts, .. } => {
                let r = parts[0].reference();
                if parts.iter().all(|p| p.reference() == r) {
                    r
                } else if parts.iter().all(|p| matches!(p.reference(), Reference::Lebesgue)) {
                    Reference::Lebesgue
                } else {
                    Reference::Mixed
                }
            }
            _ => Reference::Lebesgue,
        }
    }

    /// True when some density value or mass is negative.
    pub fn is_signed(&self) -> bool {
        match &self.family {
            Family::Piecewise { values, .. } | Family::Cells { values, .. } => values.iter().any(|&v| v < 0.0),
            Family::Atoms { masses, .. } => masses.iter().any(|&m| m < 0.0),
            Family::Mixture { parts, .. } => parts.iter().any(|p| p.is_signed()),
            _ => false,
        }
    }

    /// Total (signed) mass, exact for every family.
    pub fn total_mass(&self) -> f64 {
        match &self.family {
            Family::Piecewise { breaks, values } => {
                values.iter().zip(breaks.windows(2)).map(|(v, w)| v * (w[1] - w[0])).sum()
            }
            Family::Cells { values, .. } => values.iter().sum::<f64>() / values.len() as f64,
            Family::Atoms { masses, .. } => masses.iter().sum(),
            Family::Mixture { weights, parts } => weights.iter().zip(parts).map(|(w, p)| w * p.total_mass()).sum(),
            _ => 1.0,
        }
    }

    pub fn is_probability(&self) -> bool {
        !self.is_signed() && (self.total_mass() - 1.0).abs() <= 1e-9
    }

    pub(crate) fn require_probability(&self) -> Result<()> {
        if self.is_signed() {
            return Err(Error::SignedMeasure(self.tag.clone()));
        }
        if (self.total_mass() - 1.0).abs() > 1e-9 {
            return Err(Error::NotProbability(format!("{} has mass {}", self.tag, self.total_mass())));
        }
        Ok(())
    }

    /// Density with respect to [`Measure::reference`].
    pub fn density(&self, x: &[f64]) -> f64 {
        match &self.family {
            Family::GaussianNd { .. } => libm::exp(self.log_density(x)),
            Family::Mixture { .. } if self.dim() > 1 => libm::exp(self.log_density(x)),
            _ => self.density1(x[0]),
        }
    }

    /// Natural log of the density (`-∞` where it vanishes, NaN where negative).
    pub fn log_density(&self, x: &[f64]) -> f64 {
        match &self.family {
            Family::GaussianNd { mean } => {
                let d = mean.len() as f64;
                let r2: f64 = mean.iter().zip(x).map(|(m, xi)| (xi - m) * (xi - m)).sum();
                -0.5 * r2 - 0.5 * d * libm::log(2.0 * PI)
            }
            Family::Mixture { weights, parts } if self.dim() > 1 => {
                let mut acc = 0.0;
                for (w, p) in weights.iter().zip(parts) {
                    if *w > 0.0 {
                        acc += w * libm::exp(p.log_density(x));
                    }
                }
                libm::log(acc)
            }
            _ => self.log_density1(x[0]),
        }
    }

    /// 1-d density with respect to the reference.
    pub fn density1(&self, x: f64) -> f64 {
        match &self.family {
            Family::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                special::norm_pdf(z) / sd
            }
            Family::Cauchy { loc, scale } => {
                let z = (x - loc) / scale;
                1.0 / (PI * scale * (1.0 + z * z))
            }
            Family::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Family::Power { alpha, shift } => {
                let u = x - shift;
                if u > 0.0 && u <= 1.0 {
                    alpha * libm::pow(u, alpha - 1.0)
                } else {
                    0.0
                }
            }
            Family::Piecewise { breaks, values } => match piece_index(breaks, x) {
                Some(k) => values[k],
                None => 0.0,
            },
            Family::Cells { lo, hi, values } => match cell_of(*lo, *hi, values.len(), x) {
                Some(k) => values[k],
                None => 0.0,
            },
            Family::Atoms { points, masses, weights } => match find_point(points, x) {
                Some(k) => masses[k] / weights[k],
                None => 0.0,
            },
            Family::Mixture { weights, parts } => {
                if matches!(self.reference(), Reference::Mixed) {
                    let a = self.atom_mass(x);
                    if a != 0.0 {
                        a
                    } else {
                        self.ac_density(x)
                    }
                } else {
                    weights.iter().zip(parts).map(|(w, p)| if *w > 0.0 { w * p.density1(x) } else { 0.0 }).sum()
                }
            }
            Family::GaussianNd { .. } => self.density(&[x]),
        }
    }

    pub fn log_density1(&self, x: f64) -> f64 {
        match &self.family {
            Family::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - libm::log(*sd) - 0.5 * libm::log(2.0 * PI)
            }
            Family::Cauchy { loc, scale } => {
                let z = (x - loc) / scale;
                -libm::log(PI * scale) - libm::log1p(z * z)
            }
            Family::Power { alpha, shift } => {
                let u = x - shift;
                if u > 0.0 && u <= 1.0 {
                    libm::log(*alpha) + (alpha - 1.0) * libm::log(u)
                } else {
                    f64::NEG_INFINITY
                }
            }
            _ => {
                let d = self.density1(x);
                if d < 0.0 {
                    f64::NAN
                } else {
                    libm::log(d)
                }
            }
        }
    }

    /// Lebesgue density of the absolutely continuous part (1-d).
    pub fn ac_density(&self, x: f64) -> f64 {
        match &self.family {
            Family::Cells { lo, hi, values } => match cell_of(*lo, *hi, values.len(), x) {
                Some(k) => values[k] / (hi - lo),
                None => 0.0,
            },
            Family::Atoms { .. } => 0.0,
            Family::Mixture { weights, parts } => {
                weights.iter().zip(parts).map(|(w, p)| if *w > 0.0 { w * p.ac_density(x) } else { 0.0 }).sum()
            }
            _ => self.density1(x),
        }
    }

    pub fn ac_log_density(&self, x: f64) -> f64 {
        match &self.family {
            Family::Gaussian { .. } | Family::Cauchy { .. } | Family::Power { .. } => self.log_density1(x),
            _ => {
                let d = self.ac_density(x);
                if d < 0.0 {
                    f64::NAN
                } else {
                    libm::log(d)
                }
            }
        }
    }

    /// Mass of the absolutely continuous part.
    pub fn ac_mass(&self) -> f64 {
        match &self.family {
            Family::Atoms { .. } => 0.0,
            Family::Mixture { weights, parts } => weights.iter().zip(parts).map(|(w, p)| w * p.ac_mass()).sum(),
            _ => self.total_mass(),
        }
    }

    /// Atoms `(point, mass)` sorted by point, zero masses dropped.
    pub fn atoms_list(&self) -> Vec<(f64, f64)> {
        match &self.family {
            Family::Atoms { points, masses, .. } => {
                points.iter().copied().zip(masses.iter().copied()).filter(|(_, m)| *m != 0.0).collect()
            }
            Family::Mixture { weights, parts } => {
                let mut all: Vec<(f64, f64)> = Vec::new();
                for (w, p) in weights.iter().zip(parts) {
                    if *w > 0.0 {
                        all.extend(p.atoms_list().into_iter().map(|(x, m)| (x, w * m)));
                    }
                }
                merge_atoms(all)
            }
            _ => Vec::new(),
        }
    }

    /// Mass of the atom at `x` (zero if none).
    pub fn atom_mass(&self, x: f64) -> f64 {
        match &self.family {
            Family::Atoms { points, masses, .. } => find_point(points, x).map_or(0.0, |k| masses[k]),
            Family::Mixture { weights, parts } => {
                weights.iter().zip(parts).map(|(w, p)| if *w > 0.0 { w * p.atom_mass(x) } else { 0.0 }).sum()
            }
            _ => 0.0,
        }
    }

    /// Finite points where the ac density may jump or kink.
    pub fn ac_breaks(&self) -> Vec<f64> {
        match &self.family {
            Family::Gaussian { mean, .. } => vec![*mean],
            Family::Cauchy { loc, .. } => vec![*loc],
            Family::Uniform { lo, hi } => vec![*lo, *hi],
            Family::Power { shift, .. } => vec![*shift, shift + 1.0],
            Family::Piecewise { breaks, .. } => breaks.clone(),
            Family::Cells { lo, hi, values } => {
                let d = values.len();
                (0..=d).map(|k| cell_edge(*lo, *hi, d, k)).collect()
            }
            Family::Mixture { weights, parts } => {
                let mut b = Vec::new();
                for (w, p) in weights.iter().zip(parts) {
                    if *w > 0.0 {
                        b.extend(p.ac_breaks());
                    }
                }
                sort_dedup(b)
            }
            Family::Atoms { .. } | Family::GaussianNd { .. } => Vec::new(),
        }
    }

    /// Left-end power singularities `(point, α)` of the ac density.
    pub fn singularities(&self) -> Vec<(f64, f64)> {
        match &self.family {
            Family::Power { alpha, shift } if *alpha < 1.0 => vec![(*shift, *alpha)],
            Family::Mixture { weights, parts } => weights
                .iter()
                .zip(parts)
                .filter(|(w, _)| **w > 0.0)
                .flat_map(|(_, p)| p.singularities())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Closed hull of the ac part's support (may be infinite); `None` without ac part.
    pub fn ac_hull(&self) -> Option<(f64, f64)> {
        match &self.family {
            Family::Gaussian { .. } | Family::Cauchy { .. } => Some((f64::NEG_INFINITY, f64::INFINITY)),
            Family::Uniform { lo, hi } => Some((*lo, *hi)),
            Family::Power { shift, .. } => Some((*shift, shift + 1.0)),
            Family::Piecewise { breaks, .. } => Some((breaks[0], breaks[breaks.len() - 1])),
            Family::Cells { lo, hi, .. } => Some((*lo, *hi)),
            Family::Atoms { .. } | Family::GaussianNd { .. } => None,
            Family::Mixture { weights, parts } => {
                let mut h: Option<(f64, f64)> = None;
                for (w, p) in weights.iter().zip(parts) {
                    if *w > 0.0 {
                        if let Some((a, b)) = p.ac_hull() {
                            h = Some(h.map_or((a, b), |(x, y)| (x.min(a), y.max(b))));
                        }
                    }
                }
                h
            }
        }
    }

    /// Hull of the whole support, atoms included.
    pub fn support_hull(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if let Some((a, b)) = self.ac_hull() {
            lo = a;
            hi = b;
        }
        for (x, _) in self.atoms_list() {
            lo = lo.min(x);
            hi = hi.max(x);
        }
        (lo, hi)
    }

    /// Characteristic length used to map infinite tails.
    pub fn scale(&self) -> f64 {
        match &self.family {
            Family::Gaussian { sd, .. } => *sd,
            Family::Cauchy { scale, .. } => *scale,
            Family::Mixture { weights, parts } => weights
                .iter()
                .zip(parts)
                .filter(|(w, _)| **w > 0.0)
                .map(|(_, p)| p.scale())
                .fold(0.0, f64::max),
            _ => 1.0,
        }
    }

    /// Piecewise-constant Lebesgue density of the ac part, when it is one.
    pub fn piecewise_constant(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.family {
            Family::Uniform { lo, hi } => Some((vec![*lo, *hi], vec![1.0 / (hi - lo)])),
            Family::Power { alpha, shift } if *alpha == 1.0 => Some((vec![*shift, shift + 1.0], vec![1.0])),
            Family::Piecewise { breaks, values } => Some((breaks.clone(), values.clone())),
            Family::Cells { lo, hi, values } => {
                let d = values.len();
                let scale = 1.0 / (hi - lo);
                Some(((0..=d).map(|k| cell_edge(*lo, *hi, d, k)).collect(), values.iter().map(|v| v * scale).collect()))
            }
            Family::Mixture { weights, parts } => {
                let mut reps = Vec::new();
                for (w, p) in weights.iter().zip(parts) {
                    if *w > 0.0 && p.ac_mass() != 0.0 {
                        reps.push((*w, p.piecewise_constant()?));
                    }
                }
                let mut knots: Vec<f64> = reps.iter().flat_map(|(_, (b, _))| b.iter().copied()).collect();
                knots = sort_dedup(knots);
                if knots.len() < 2 {
                    return None;
                }
                let vals = knots
                    .windows(2)
                    .map(|s| {
                        let mid = 0.5 * (s[0] + s[1]);
                        reps.iter().map(|(w, (b, v))| w * piece_index(b, mid).map_or(0.0, |k| v[k])).sum()
                    })
                    .collect();
                Some((knots, vals))
            }
            _ => None,
        }
    }

    /// Cell probabilities `P(I_k)` for partitioned measures.
    pub fn cell_probs(&self) -> Option<Vec<f64>> {
        match &self.family {
            Family::Cells { values, .. } => {
                let d = values.len() as f64;
                Some(values.iter().map(|v| v / d).collect())
            }
            Family::Mixture { weights, parts } if matches!(self.reference(), Reference::Partition { .. }) => {
                let mut acc: Option<Vec<f64>> = None;
                for (w, p) in weights.iter().zip(parts) {
                    let c = p.cell_probs()?;
                    acc = Some(match acc {
                        None => c.iter().map(|v| w * v).collect(),
                        Some(a) => a.iter().zip(&c).map(|(x, v)| x + w * v).collect(),
                    });
                }
                acc
            }
            _ => None,
        }
    }

    /// Cell index of `x` under a partition reference.
    pub fn cell_index(&self, x: f64) -> Option<usize> {
        match self.reference() {
            Reference::Partition { cells, lo, hi } => cell_of(lo, hi, cells, x),
            _ => None,
        }
    }

    /// CDF of a 1-d measure (right-continuous).
    pub fn cdf(&self, t: f64) -> Result<f64> {
        Ok(match &self.family {
            Family::Gaussian { mean, sd } => special::norm_cdf((t - mean) / sd),
            Family::Cauchy { loc, scale } => special::cauchy_cdf((t - loc) / scale),
            Family::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            Family::Power { alpha, shift } => {
                let u = t - shift;
                if u <= 0.0 {
                    0.0
                } else if u >= 1.0 {
                    1.0
                } else {
                    libm::pow(u, *alpha)
                }
            }
            Family::Piecewise { breaks, values } => {
                let mut acc = 0.0;
                for (k, v) in values.iter().enumerate() {
                    let (a, b) = (breaks[k], breaks[k + 1]);
                    if t >= b {
                        acc += v * (b - a);
                    } else {
                        if t > a {
                            acc += v * (t - a);
                        }
                        break;
                    }
                }
                acc
            }
            Family::Cells { lo, hi, values } => {
                let d = values.len();
                let mut acc = 0.0;
                for (k, v) in values.iter().enumerate() {
                    let (a, b) = (cell_edge(*lo, *hi, d, k), cell_edge(*lo, *hi, d, k + 1));
                    if t >= b {
                        acc += v / d as f64;
                    } else {
                        if t > a {
                            acc += v / d as f64 * (t - a) / (b - a);
                        }
                        break;
                    }
                }
                acc
            }
            Family::Atoms { points, masses, .. } => {
                let k = points.partition_point(|&p| p <= t);
                masses[..k].iter().sum()
            }
            Family::Mixture { weights, parts } => {
                let mut acc = 0.0;
                for (w, p) in weights.iter().zip(parts) {
                    if *w > 0.0 {
                        acc += w * p.cdf(t)?;
                    }
                }
                acc
            }
            Family::GaussianNd { .. } => return Err(Error::unsupported("cdf of a multivariate measure")),
        })
    }

    /// Generalized inverse `inf{t : F(t) >= u}` for `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if self.is_signed() {
            return Err(Error::SignedMeasure(format!("no sampler for signed measure {}", self.tag)));
        }
        Ok(match &self.family {
            Family::Gaussian { mean, sd } => mean + sd * special::norm_quantile(u),
            Family::Cauchy { loc, scale } => loc + scale * special::cauchy_quantile(u),
            Family::Uniform { lo, hi } => lo + (hi - lo) * u,
            Family::Power { alpha, shift } => shift + libm::pow(u, 1.0 / alpha),
            Family::Piecewise { .. } | Family::Cells { .. } => {
                let (b, v) = self.piecewise_constant().expect("piecewise family");
                let mut acc = 0.0;
                let mut last = b[0];
                for k in 0..v.len() {
                    let m = v[k] * (b[k + 1] - b[k]);
                    if m > 0.0 {
                        last = b[k + 1];
                        if acc + m >= u {
                            return Ok(b[k] + (u - acc) / v[k]);
                        }
                    }
                    acc += m;
                }
                last
            }
            Family::Atoms { points, masses, .. } => {
                let mut acc = 0.0;
                for (x, m) in points.iter().zip(masses) {
                    acc += m;
                    if acc >= u && *m > 0.0 {
                        return Ok(*x);
                    }
                }
                *points.iter().zip(masses).rev().find(|(_, m)| **m > 0.0).map(|(x, _)| x).unwrap_or(&points[0])
            }
            Family::Mixture { weights, parts } => {
                let (k, v) = pick_component(weights, u);
                parts[k].quantile(v)?
            }
            Family::GaussianNd { .. } => return Err(Error::unsupported("quantile of a multivariate measure")),
        })
    }

    /// Draws one point into `out`. The first uniform alone selects the
    /// mixture component and is then rescaled for that component, so a
    /// mixture with a unit weight reproduces its component's stream.
    pub fn draw<R: rand_core::RngCore + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) -> Result<()> {
        let u0 = sample::open_unit(rng);
        self.draw_with(u0, rng, out)
    }

    fn draw_with<R: rand_core::RngCore + ?Sized>(&self, u0: f64, rng: &mut R, out: &mut Vec<f64>) -> Result<()> {
        match &self.family {
            Family::GaussianNd { mean } => {
                out.push(mean[0] + special::norm_quantile(u0));
                for m in &mean[1..] {
                    out.push(m + special::norm_quantile(sample::open_unit(rng)));
                }
            }
            Family::Mixture { weights, parts } => {
                let (k, v) = pick_component(weights, u0);
                parts[k].draw_with(v, rng, out)?;
            }
            _ => out.push(self.quantile(u0)?),
        }
        Ok(())
    }

    /// Location translate of a 1-d measure.
    pub fn translated(&self, by: f64) -> Result<Measure> {
        let family = match &self.family {
            Family::Gaussian { mean, sd } => Family::Gaussian { mean: mean + by, sd: *sd },
            Family::Cauchy { loc, scale } => Family::Cauchy { loc: loc + by, scale: *scale },
            Family::Uniform { lo, hi } => Family::Uniform { lo: lo + by, hi: hi + by },
            Family::Power { alpha, shift } => Family::Power { alpha: *alpha, shift: shift + by },
            Family::Piecewise { breaks, values } => {
                Family::Piecewise { breaks: breaks.iter().map(|b| b + by).collect(), values: values.clone() }
            }
            Family::Atoms { points, masses, weights } => Family::Atoms {
                points: points.iter().map(|p| p + by).collect(),
                masses: masses.clone(),
                weights: weights.clone(),
            },
            Family::Mixture { weights, parts } => Family::Mixture {
                weights: weights.clone(),
                parts: parts.iter().map(|p| p.translated(by)).collect::<Result<_>>()?,
            },
            Family::Cells { .. } | Family::GaussianNd { .. } => {
                return Err(Error::unsupported("translation of partitioned or multivariate measures"))
            }
        };
        Measure::new(family, format!("{}+{}", self.tag, by))
    }
}

fn normalize(family: Family) -> Result<Family> {
    Ok(match family {
        Family::Atoms { points, masses, weights } => {
            if points.len() != masses.len() || (!weights.is_empty() && weights.len() != points.len()) {
                return Err(bad("atoms need equally many points, masses and weights".into()));
            }
            let weights = if weights.is_empty() { vec![1.0; points.len()] } else { weights };
            let mut idx: Vec<usize> = (0..points.len()).collect();
            idx.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
            Family::Atoms {
                points: idx.iter().map(|&i| points[i]).collect(),
                masses: idx.iter().map(|&i| masses[i]).collect(),
                weights: idx.iter().map(|&i| weights[i]).collect(),
            }
        }
        Family::Mixture { weights, parts } => Family::Mixture {
            weights,
            parts: parts.into_iter().map(|p| p.normalized()).collect::<Result<_>>()?,
        },
        f => f,
    })
}

fn pick_component(weights: &[f64], u: f64) -> (usize, f64) {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = k;
        if u < acc + w {
            let v = ((u - acc) / w).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
            return (k, v);
        }
        acc += w;
    }
    (last, 1.0 - f64::EPSILON / 2.0)
}

pub(crate) fn cell_edge(lo: f64, hi: f64, d: usize, k: usize) -> f64 {
    if k == d {
        hi
    } else {
        lo + (hi - lo) * k as f64 / d as f64
    }
}

/// Cell `[edge_k, edge_{k+1})`, the last one closed.
pub(crate) fn cell_of(lo: f64, hi: f64, d: usize, x: f64) -> Option<usize> {
    if !(x >= lo && x <= hi) {
        return None;
    }
    let mut k = (((x - lo) / (hi - lo)) * d as f64) as usize;
    if k >= d {
        k = d - 1;
    }
    // guard against rounding in the division
    while k > 0 && x < cell_edge(lo, hi, d, k) {
        k -= 1;
    }
    while k + 1 < d && x >= cell_edge(lo, hi, d, k + 1) {
        k += 1;
    }
    Some(k)
}

/// Piece `[b_k, b_{k+1})`, the last one closed.
pub(crate) fn piece_index(breaks: &[f64], x: f64) -> Option<usize> {
    let n = breaks.len();
    if n < 2 || !(x >= breaks[0] && x <= breaks[n - 1]) {
        return None;
    }
    let k = breaks.partition_point(|&b| b <= x);
    Some((k.max(1) - 1).min(n - 2))
}

pub(crate) fn find_point(points: &[f64], x: f64) -> Option<usize> {
    points.binary_search_by(|p| p.total_cmp(&x)).ok()
}

pub(crate) fn merge_atoms(mut all: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(all.len());
    for (x, m) in all {
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 += m,
            _ => out.push((x, m)),
        }
    }
    out.retain(|(_, m)| *m != 0.0);
    out
}

pub(crate) fn sort_dedup(mut v: Vec<f64>) -> Vec<f64> {
    v.retain(|x| x.is_finite());
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup();
    v
}

#[cfg(test)]
mod tests;
