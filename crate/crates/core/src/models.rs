//! Finite candidate models and builders for the standard families.
//!
//! Dense families are realized as finite nets; the net resolution is kept in
//! [`ModelMeta::resolution`] so that reports can state the grid slack.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::measures::{probe_grid, Measure, Reference};

/// A model element: one marginal shared by all observations, or one marginal
/// per observation.
#[derive(Clone, Debug, PartialEq)]
pub enum Candidate {
    Iid(Arc<Measure>),
    Tuple(Vec<Arc<Measure>>),
}

impl Candidate {
    /// Marginal for observation `i`.
    pub fn marginal(&self, i: usize) -> &Arc<Measure> {
        match self {
            Candidate::Iid(m) => m,
            Candidate::Tuple(v) => &v[i],
        }
    }

    pub fn as_iid(&self) -> Option<&Arc<Measure>> {
        match self {
            Candidate::Iid(m) => Some(m),
            Candidate::Tuple(_) => None,
        }
    }

    pub fn tuple_len(&self) -> Option<usize> {
        match self {
            Candidate::Iid(_) => None,
            Candidate::Tuple(v) => Some(v.len()),
        }
    }
}

/// Coefficient representation of an `L_2` linear model.
#[derive(Clone, Debug, PartialEq)]
pub struct L2Gram {
    /// Gram matrix of the basis in `L_2(μ)`.
    pub gram: Vec<Vec<f64>>,
    /// Candidate coefficient vectors.
    pub coefficients: Vec<Vec<f64>>,
    /// `sup_x φ(x)^T G^{-1} φ(x)`, the square of the ratio bound.
    pub ratio_sq: f64,
}

impl L2Gram {
    pub fn inner(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (&self.coefficients[i], &self.coefficients[j]);
        let mut s = 0.0;
        for (r, row) in self.gram.iter().enumerate() {
            for (c, g) in row.iter().enumerate() {
                s += a[r] * g * b[c];
            }
        }
        s
    }

    pub fn norm_sq(&self, i: usize) -> f64 {
        self.inner(i, i)
    }

    /// `‖p_i - p_j‖_2`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        libm::sqrt((self.norm_sq(i) + self.norm_sq(j) - 2.0 * self.inner(i, j)).max(0.0))
    }

    pub fn ratio(&self) -> f64 {
        libm::sqrt(self.ratio_sq)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelMeta {
    pub family: String,
    /// VC dimension of the Yatracos-type class, when known.
    pub vc_dimension: Option<f64>,
    /// Ratio bound `R` with `‖p-q‖_∞ <= R‖p-q‖_{μ,2}` for linear models.
    pub ratio_r: Option<f64>,
    /// `max |log(p/q)|` over model pairs; `None` when not computed, `∞` when unbounded.
    pub kl_a: Option<f64>,
    /// Number of cells of the uniform partition carrying the candidates.
    pub partition: Option<usize>,
    /// Net resolution (grid step or value spacing).
    pub resolution: Option<f64>,
    pub l2: Option<L2Gram>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    candidates: Vec<Candidate>,
    pub meta: ModelMeta,
}

impl Model {
    pub fn new(candidates: Vec<Candidate>, meta: ModelMeta) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Empty("a model needs at least one candidate".into()));
        }
        let len = candidates[0].tuple_len();
        if candidates.iter().any(|c| c.tuple_len() != len) {
            return Err(Error::invalid("candidates must be all i.i.d. or all tuples of one length"));
        }
        let dim = candidates[0].marginal(0).dim();
        for c in &candidates {
            let ok = match c {
                Candidate::Iid(m) => m.dim() == dim,
                Candidate::Tuple(v) => !v.is_empty() && v.iter().all(|m| m.dim() == dim),
            };
            if !ok {
                return Err(Error::invalid("all candidate marginals must share one dimension"));
            }
        }
        Ok(Model { candidates, meta })
    }

    /// i.i.d. model from measures.
    pub fn from_measures(ms: Vec<Measure>) -> Result<Self> {
        let meta = ModelMeta { family: "custom".into(), ..Default::default() };
        Model::new(ms.into_iter().map(|m| Candidate::Iid(Arc::new(m))).collect(), meta)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn candidate(&self, i: usize) -> &Candidate {
        &self.candidates[i]
    }

    /// Marginal of candidate `i` (i.i.d. models only).
    pub fn measure(&self, i: usize) -> Option<&Measure> {
        self.candidates[i].as_iid().map(|m| m.as_ref())
    }

    pub fn is_iid(&self) -> bool {
        self.candidates[0].tuple_len().is_none()
    }

    pub fn tuple_len(&self) -> Option<usize> {
        self.candidates[0].tuple_len()
    }

    pub fn dim(&self) -> usize {
        self.candidates[0].marginal(0).dim()
    }

    pub fn labels(&self) -> Vec<String> {
        self.candidates
            .iter()
            .map(|c| match c {
                Candidate::Iid(m) => m.tag.clone(),
                Candidate::Tuple(v) => format!("tuple[{}]", v[0].tag),
            })
            .collect()
    }

    /// Appends a candidate, returning its index.
    pub fn push(&mut self, c: Candidate) -> Result<usize> {
        if c.tuple_len() != self.tuple_len() || c.marginal(0).dim() != self.dim() {
            return Err(Error::invalid("candidate shape does not match the model"));
        }
        self.candidates.push(c);
        self.meta.l2 = None;
        Ok(self.candidates.len() - 1)
    }

    /// Model with candidates reordered: new candidate `k` is old `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Model {
        let mut meta = self.meta.clone();
        if let Some(l2) = meta.l2.as_mut() {
            l2.coefficients = perm.iter().map(|&i| l2.coefficients[i].clone()).collect();
        }
        Model { candidates: perm.iter().map(|&i| self.candidates[i].clone()).collect(), meta }
    }

    /// Ratio bound `R` for the `L_j` family: explicit value, else `D^{1/j}` on
    /// partitions, else `w_min^{-1/j}` on discrete spaces, else the `L_2` bound.
    pub fn resolve_ratio(&self, j: f64, explicit: Option<f64>) -> Result<f64> {
        if let Some(r) = explicit {
            return Ok(r);
        }
        if let Some(d) = self.meta.partition {
            return Ok(libm::pow(d as f64, 1.0 / j));
        }
        if let Reference::Discrete { weights, .. } = self.candidates[0].marginal(0).reference() {
            let wmin = weights.iter().copied().fold(f64::INFINITY, f64::min);
            return Ok(libm::pow(wmin, -1.0 / j));
        }
        match self.meta.ratio_r {
            Some(r) if j == 2.0 => Ok(r),
            _ => Err(Error::invalid(format!("the L_j ratio bound R must be supplied for this model (j = {j})"))),
        }
    }
}

/// Base shape of a location family.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "shape", rename_all = "kebab-case"))]
pub enum Base {
    Gaussian {
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        scale: f64,
    },
    Cauchy {
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        scale: f64,
    },
    /// Uniform on `[θ, θ + width]`.
    Uniform {
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        width: f64,
    },
    /// Density `α(x-θ)^{α-1}` on `(θ, θ+1]`.
    Power { alpha: f64 },
}

#[cfg(feature = "serde")]
fn one() -> f64 {
    1.0
}

#[cfg(feature = "serde")]
fn zero() -> f64 {
    0.0
}

#[cfg(feature = "serde")]
fn yes() -> bool {
    true
}

#[cfg(feature = "serde")]
fn default_cap() -> usize {
    DEFAULT_MAX_CANDIDATES
}

impl Base {
    pub fn at(&self, theta: f64) -> Result<Measure> {
        match *self {
            Base::Gaussian { scale } => Measure::gaussian(theta, scale),
            Base::Cauchy { scale } => Measure::cauchy(theta, scale),
            Base::Uniform { width } => Measure::uniform(theta, theta + width),
            Base::Power { alpha } => Measure::power(alpha, theta),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Base::Gaussian { .. } => "gaussian",
            Base::Cauchy { .. } => "cauchy",
            Base::Uniform { .. } => "uniform",
            Base::Power { .. } => "power",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "basis", rename_all = "kebab-case"))]
pub enum Basis {
    /// `1_I / √|I|` over `cells` equal cells of `[lo, hi]` (Lebesgue reference).
    Indicator {
        cells: usize,
        #[cfg_attr(feature = "serde", serde(default = "zero"))]
        lo: f64,
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        hi: f64,
    },
    /// Functions constant on the pieces of `breaks`, one value per piece.
    User { breaks: Vec<f64>, functions: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "net", rename_all = "kebab-case"))]
pub enum CoefficientNet {
    /// Every coefficient ranges over `values` independently.
    Grid { values: Vec<f64> },
    List { vectors: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "form", rename_all = "kebab-case"))]
pub enum ThetaNet {
    List { thetas: Vec<Vec<f64>> },
    /// `θ_i = Σ_k c_k (i/n)^k` for `k < dim`, each `c_k` on `grid`.
    Polynomial { dim: usize, grid: Vec<f64> },
}

pub const DEFAULT_MAX_CANDIDATES: usize = 200_000;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "kebab-case"))]
pub enum ModelConfig {
    /// `N(m, I_d)` with every coordinate of `m` on the grid `lo, lo+step, ..., hi`.
    GaussianLocationGrid { dim: usize, lo: f64, hi: f64, step: f64 },
    TranslationGrid { base: Base, lo: f64, hi: f64, step: f64 },
    /// Histograms on `cells` equal cells of `[lo, hi]` with cell densities
    /// (w.r.t. the normalized reference) drawn from `values`.
    HistogramNet {
        cells: usize,
        values: Vec<f64>,
        #[cfg_attr(feature = "serde", serde(default = "zero"))]
        lo: f64,
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        hi: f64,
        /// Keep only probability densities.
        #[cfg_attr(feature = "serde", serde(default = "yes"))]
        normalize: bool,
        #[cfg_attr(feature = "serde", serde(default = "default_cap"))]
        max_candidates: usize,
    },
    /// Non-increasing densities with at most `max_pieces` pieces, endpoints on
    /// `breaks` and unnormalized levels on `levels`.
    MonotoneNet {
        max_pieces: usize,
        breaks: Vec<f64>,
        levels: Vec<f64>,
        #[cfg_attr(feature = "serde", serde(default = "default_cap"))]
        max_candidates: usize,
    },
    L2Linear {
        basis: Basis,
        coefficients: CoefficientNet,
        #[cfg_attr(feature = "serde", serde(default))]
        probabilities_only: bool,
        #[cfg_attr(feature = "serde", serde(default = "default_cap"))]
        max_candidates: usize,
    },
    /// Candidates are mass vectors on `points` (default `0, 1, ..., size-1`).
    Discrete {
        size: usize,
        candidates: Vec<Vec<f64>>,
        #[cfg_attr(feature = "serde", serde(default))]
        points: Option<Vec<f64>>,
        #[cfg_attr(feature = "serde", serde(default))]
        weights: Option<Vec<f64>>,
    },
    /// `P_θ = (q(· - θ_1), ..., q(· - θ_n))`.
    RegressionTuples { thetas: ThetaNet, base: Base, n: usize },
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model> {
        build(self)
    }
}

fn grid(lo: f64, hi: f64, step: f64, what: &str) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && step > 0.0 && step.is_finite() && lo <= hi) {
        return Err(Error::invalid(format!("{what}: need finite lo <= hi and step > 0")));
    }
    let k = libm::floor((hi - lo) / step + 1e-9) as usize;
    Ok((0..=k).map(|i| lo + step * i as f64).collect())
}

fn iid(ms: Vec<Measure>) -> Vec<Candidate> {
    ms.into_iter().map(|m| Candidate::Iid(Arc::new(m))).collect()
}

/// Calls `f` on every vector of `dim` entries from `values` (odometer order).
fn for_each_product(values: &[f64], dim: usize, mut f: impl FnMut(&[f64]) -> Result<()>) -> Result<()> {
    let mut idx = vec![0usize; dim];
    let mut cur: Vec<f64> = vec![values[0]; dim];
    loop {
        f(&cur)?;
        let mut k = dim;
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < values.len() {
                cur[k] = values[idx[k]];
                break;
            }
            idx[k] = 0;
            cur[k] = values[0];
        }
    }
}

fn product_size(base: usize, dim: usize, cap: usize) -> Result<()> {
    let mut total: usize = 1;
    for _ in 0..dim {
        total = total.saturating_mul(base);
    }
    if total > cap {
        return Err(Error::invalid(format!("net would enumerate {total} vectors, above the cap of {cap}")));
    }
    Ok(())
}

pub fn build(cfg: &ModelConfig) -> Result<Model> {
    match cfg {
        ModelConfig::GaussianLocationGrid { dim, lo, hi, step } => {
            if *dim == 0 {
                return Err(Error::invalid("gaussian-location-grid.dim must be at least 1"));
            }
            let g = grid(*lo, *hi, *step, "gaussian-location-grid")?;
            product_size(g.len(), *dim, DEFAULT_MAX_CANDIDATES)?;
            let mut ms = Vec::new();
            if *dim == 1 {
                for &m in &g {
                    ms.push(Measure::gaussian(m, 1.0)?);
                }
            } else {
                for_each_product(&g, *dim, |v| {
                    ms.push(Measure::gaussian_nd(v.to_vec())?.with_tag(format!("gaussian{v:?}")));
                    Ok(())
                })?;
            }
            let meta = ModelMeta {
                family: "gaussian-location-grid".into(),
                vc_dimension: Some(*dim as f64 + 1.0),
                resolution: Some(*step),
                kl_a: Some(f64::INFINITY),
                ..Default::default()
            };
            Model::new(iid(ms), meta)
        }
        ModelConfig::TranslationGrid { base, lo, hi, step } => {
            if let Base::Power { alpha } = base {
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::invalid(format!("translation-grid.base.alpha must lie in (0, 1], got {alpha}")));
                }
            }
            let g = grid(*lo, *hi, *step, "translation-grid")?;
            let ms = g.iter().map(|&t| base.at(t)).collect::<Result<Vec<_>>>()?;
            let kl_a = match base {
                Base::Gaussian { .. } | Base::Cauchy { .. } if g.len() == 1 => Some(0.0),
                Base::Gaussian { .. } => Some(f64::INFINITY),
                Base::Cauchy { scale } => {
                    // sup_x |log(q/p)| for Cauchy translations equals log of the
                    // ratio of the extreme values of 1 + ((x-θ)/s)^2
                    let d = (g[g.len() - 1] - g[0]) / scale;
                    Some(libm::log(1.0 + d * d / 2.0 + libm::fabs(d) * libm::sqrt(1.0 + d * d / 4.0)))
                }
                _ if g.len() == 1 => Some(0.0),
                _ => Some(f64::INFINITY),
            };
            let meta = ModelMeta {
                family: format!("translation-grid/{}", base.name()),
                resolution: Some(*step),
                kl_a,
                ..Default::default()
            };
            Model::new(iid(ms), meta)
        }
        ModelConfig::HistogramNet { cells, values, lo, hi, normalize, max_candidates } => {
            if *cells < 2 {
                return Err(Error::invalid("histogram-net.cells must be at least 2"));
            }
            if values.is_empty() {
                return Err(Error::invalid("histogram-net.values must be nonempty"));
            }
            let mut vals = values.clone();
            vals.sort_by(|a, b| a.total_cmp(b));
            vals.dedup();
            if *normalize && vals.iter().any(|&v| v < 0.0) {
                return Err(Error::invalid("histogram-net.values must be nonnegative for probability nets"));
            }
            product_size(vals.len(), *cells, max_candidates.saturating_mul(64))?;
            let d = *cells as f64;
            let mut ms = Vec::new();
            for_each_product(&vals, *cells, |v| {
                if *normalize && (v.iter().sum::<f64>() - d).abs() > 1e-9 {
                    return Ok(());
                }
                if ms.len() >= *max_candidates {
                    return Err(Error::invalid(format!("histogram-net exceeds {max_candidates} candidates")));
                }
                ms.push(Measure::cells(*lo, *hi, v.to_vec())?.with_tag(format!("hist{v:?}")));
                Ok(())
            })?;
            if ms.is_empty() {
                return Err(Error::invalid("histogram-net: no value vector sums to the cell count"));
            }
            let meta = ModelMeta {
                family: "histogram-net".into(),
                partition: Some(*cells),
                resolution: Some(min_spacing(&vals)),
                kl_a: None,
                ..Default::default()
            };
            let mut model = Model::new(iid(ms), meta)?;
            model.meta.kl_a = Some(kl_bound(&model)?);
            Ok(model)
        }
        ModelConfig::MonotoneNet { max_pieces, breaks, levels, max_candidates } => {
            build_monotone(*max_pieces, breaks, levels, *max_candidates)
        }
        ModelConfig::L2Linear { basis, coefficients, probabilities_only, max_candidates } => {
            build_l2(basis, coefficients, *probabilities_only, *max_candidates)
        }
        ModelConfig::Discrete { size, candidates, points, weights } => {
            if *size == 0 || candidates.is_empty() {
                return Err(Error::invalid("discrete model needs a positive size and at least one candidate"));
            }
            let pts = points.clone().unwrap_or_else(|| (0..*size).map(|k| k as f64).collect());
            if pts.len() != *size {
                return Err(Error::invalid("discrete.points must have `size` entries"));
            }
            let w = weights.clone().unwrap_or_default();
            let mut ms = Vec::new();
            for (k, c) in candidates.iter().enumerate() {
                if c.len() != *size {
                    return Err(Error::invalid(format!("discrete.candidates[{k}] must have {size} entries")));
                }
                ms.push(Measure::atoms_weighted(pts.clone(), c.clone(), w.clone())?.with_tag(format!("discrete#{k}")));
            }
            let meta = ModelMeta { family: "discrete".into(), ..Default::default() };
            let mut model = Model::new(iid(ms), meta)?;
            model.meta.kl_a = Some(kl_bound(&model)?);
            Ok(model)
        }
        ModelConfig::RegressionTuples { thetas, base, n } => {
            if *n == 0 {
                return Err(Error::invalid("regression-tuples.n must be positive"));
            }
            let (list, dim) = match thetas {
                ThetaNet::List { thetas } => (thetas.clone(), None),
                ThetaNet::Polynomial { dim, grid } => {
                    if *dim == 0 || grid.is_empty() {
                        return Err(Error::invalid("regression-tuples polynomial net needs dim >= 1 and a grid"));
                    }
                    product_size(grid.len(), *dim, DEFAULT_MAX_CANDIDATES)?;
                    let mut out = Vec::new();
                    for_each_product(grid, *dim, |c| {
                        out.push(
                            (0..*n)
                                .map(|i| {
                                    let x = (i + 1) as f64 / *n as f64;
                                    c.iter().rev().fold(0.0, |acc, ck| acc * x + ck)
                                })
                                .collect(),
                        );
                        Ok(())
                    })?;
                    (out, Some(*dim))
                }
            };
            if list.is_empty() {
                return Err(Error::invalid("regression-tuples needs at least one θ"));
            }
            let mut cands = Vec::new();
            for (k, th) in list.iter().enumerate() {
                if th.len() != *n {
                    return Err(Error::invalid(format!("regression-tuples θ #{k} has length {} != n = {n}", th.len())));
                }
                cands.push(Candidate::Tuple(th.iter().map(|&t| base.at(t).map(Arc::new)).collect::<Result<_>>()?));
            }
            let meta = ModelMeta {
                family: format!("regression-tuples/{}", base.name()),
                vc_dimension: dim.map(|d| d as f64 + 1.0),
                ..Default::default()
            };
            Model::new(cands, meta)
        }
    }
}

fn min_spacing(v: &[f64]) -> f64 {
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn build_monotone(max_pieces: usize, breaks: &[f64], levels: &[f64], cap: usize) -> Result<Model> {
    if max_pieces == 0 {
        return Err(Error::invalid("monotone-net.max_pieces must be at least 1"));
    }
    let mut b = breaks.to_vec();
    b.sort_by(|x, y| x.total_cmp(y));
    b.dedup();
    if b.len() < 2 || b.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("monotone-net.breaks needs at least two finite points"));
    }
    let mut lv: Vec<f64> = levels.iter().copied().filter(|&l| l > 0.0).collect();
    lv.sort_by(|x, y| y.total_cmp(x));
    lv.dedup();
    if lv.is_empty() {
        return Err(Error::invalid("monotone-net.levels needs a positive level"));
    }
    let mut seen: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let mut ms = Vec::new();
    for k in 1..=max_pieces.min(b.len() - 1) {
        let mut ends = Vec::with_capacity(k + 1);
        choose(&b, k + 1, 0, &mut ends, &mut |ends| {
            let mut lev = Vec::with_capacity(k);
            nonincreasing(&lv, k, 0, &mut lev, &mut |lev| {
                let mass: f64 = lev.iter().zip(ends.windows(2)).map(|(l, w)| l * (w[1] - w[0])).sum();
                // canonical form: merge equal adjacent levels
                let mut cb = vec![ends[0]];
                let mut cv: Vec<f64> = Vec::new();
                for (i, &l) in lev.iter().enumerate() {
                    if cv.last() == Some(&(l / mass)) {
                        *cb.last_mut().unwrap() = ends[i + 1];
                    } else {
                        cv.push(l / mass);
                        cb.push(ends[i + 1]);
                    }
                }
                if seen.iter().any(|(sb, sv)| *sb == cb && *sv == cv) {
                    return Ok(());
                }
                if ms.len() >= cap {
                    return Err(Error::invalid(format!("monotone-net exceeds {cap} candidates")));
                }
                ms.push(Measure::piecewise(cb.clone(), cv.clone())?.with_tag(format!("mono{}", ms.len())));
                seen.push((cb, cv));
                Ok(())
            })
        })?;
    }
    let meta = ModelMeta {
        family: "monotone-net".into(),
        vc_dimension: Some(2.0 * max_pieces as f64),
        resolution: Some(min_spacing(&b)),
        ..Default::default()
    };
    Model::new(iid(ms), meta)
}

/// Increasing `r`-subsets of `items`.
fn choose(
    items: &[f64],
    r: usize,
    start: usize,
    cur: &mut Vec<f64>,
    f: &mut dyn FnMut(&[f64]) -> Result<()>,
) -> Result<()> {
    if cur.len() == r {
        return f(cur);
    }
    for i in start..items.len() {
        if items.len() - i < r - cur.len() {
            break;
        }
        cur.push(items[i]);
        choose(items, r, i + 1, cur, f)?;
        cur.pop();
    }
    Ok(())
}

/// Non-increasing sequences of length `k` over `levels` (sorted decreasingly).
fn nonincreasing(
    levels: &[f64],
    k: usize,
    start: usize,
    cur: &mut Vec<f64>,
    f: &mut dyn FnMut(&[f64]) -> Result<()>,
) -> Result<()> {
    if cur.len() == k {
        return f(cur);
    }
    for i in start..levels.len() {
        cur.push(levels[i]);
        nonincreasing(levels, k, i, cur, f)?;
        cur.pop();
    }
    Ok(())
}

/// Basis functions as values on common pieces, with the piece breaks.
fn basis_table(basis: &Basis) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    match basis {
        Basis::Indicator { cells, lo, hi } => {
            if *cells < 1 || !(lo < hi) {
                return Err(Error::invalid("indicator basis needs cells >= 1 and lo < hi"));
            }
            let breaks: Vec<f64> =
                (0..=*cells).map(|k| crate::measures::cell_edge(*lo, *hi, *cells, k)).collect();
            let h = libm::sqrt((hi - lo) / *cells as f64);
            let fns = (0..*cells)
                .map(|i| (0..*cells).map(|k| if k == i { 1.0 / h } else { 0.0 }).collect())
                .collect();
            Ok((breaks, fns))
        }
        Basis::User { breaks, functions } => {
            if breaks.len() < 2 || functions.is_empty() {
                return Err(Error::invalid("user basis needs breaks and at least one function"));
            }
            if breaks.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::invalid("user basis breaks must be strictly increasing"));
            }
            for (k, f) in functions.iter().enumerate() {
                if f.len() + 1 != breaks.len() {
                    return Err(Error::invalid(format!("user basis function #{k} needs one value per piece")));
                }
            }
            Ok((breaks.clone(), functions.clone()))
        }
    }
}

/// Solves `G x = b` by Gaussian elimination with partial pivoting.
fn solve(g: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut a: Vec<Vec<f64>> = g.iter().zip(b).map(|(row, bi)| {
        let mut r = row.clone();
        r.push(*bi);
        r
    }).collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[piv][c].abs() < 1e-14 {
            return Err(Error::invalid("basis Gram matrix is singular"));
        }
        a.swap(c, piv);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    Ok((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

fn build_l2(basis: &Basis, net: &CoefficientNet, probs_only: bool, cap: usize) -> Result<Model> {
    let (breaks, fns) = basis_table(basis)?;
    let m = fns.len();
    let lens: Vec<f64> = breaks.windows(2).map(|w| w[1] - w[0]).collect();
    let gram: Vec<Vec<f64>> = (0..m)
        .map(|a| (0..m).map(|b| lens.iter().enumerate().map(|(k, l)| l * fns[a][k] * fns[b][k]).sum()).collect())
        .collect();
    if gram.iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::invalid("basis Gram matrix has non-finite entries"));
    }
    let mut ratio_sq: f64 = 0.0;
    for k in 0..lens.len() {
        let phi: Vec<f64> = fns.iter().map(|f| f[k]).collect();
        let x = solve(&gram, &phi)?;
        ratio_sq = ratio_sq.max(phi.iter().zip(&x).map(|(a, b)| a * b).sum());
    }
    let mut coefs: Vec<Vec<f64>> = Vec::new();
    match net {
        CoefficientNet::Grid { values } => {
            if values.is_empty() {
                return Err(Error::invalid("coefficient grid must be nonempty"));
            }
            product_size(values.len(), m, cap.saturating_mul(64))?;
            for_each_product(values, m, |c| {
                coefs.push(c.to_vec());
                Ok(())
            })?;
        }
        CoefficientNet::List { vectors } => {
            for (k, v) in vectors.iter().enumerate() {
                if v.len() != m {
                    return Err(Error::invalid(format!("coefficient vector #{k} needs {m} entries")));
                }
            }
            coefs = vectors.clone();
        }
    }
    let mut ms = Vec::new();
    let mut kept = Vec::new();
    for c in coefs {
        let vals: Vec<f64> = (0..lens.len()).map(|k| (0..m).map(|a| c[a] * fns[a][k]).sum()).collect();
        let meas = Measure::piecewise(breaks.clone(), vals)?.with_tag(format!("l2{c:?}"));
        if probs_only && !((meas.total_mass() - 1.0).abs() <= 1e-9 && !meas.is_signed()) {
            continue;
        }
        if ms.len() >= cap {
            return Err(Error::invalid(format!("l2-linear exceeds {cap} candidates")));
        }
        ms.push(meas);
        kept.push(c);
    }
    if ms.is_empty() {
        return Err(Error::invalid("l2-linear: no candidate left after filtering"));
    }
    let l2 = L2Gram { gram, coefficients: kept, ratio_sq };
    let meta = ModelMeta {
        family: "l2-linear".into(),
        ratio_r: Some(l2.ratio()),
        l2: Some(l2),
        ..Default::default()
    };
    Model::new(iid(ms), meta)
}

/// Gram data of an `L_2` linear model.
pub fn l2_inner_products(model: &Model) -> Result<&L2Gram> {
    model.meta.l2.as_ref().ok_or_else(|| Error::invalid("model carries no L_2 coefficient representation"))
}

/// `max |log(p/q)|` over all pairs of an i.i.d. model, evaluated on the
/// pair probe grids (exact for discrete, partitioned and piecewise models).
pub fn kl_bound(model: &Model) -> Result<f64> {
    let mut a: f64 = 0.0;
    let n = model.len();
    for i in 0..n {
        let p = model.measure(i).ok_or_else(|| Error::unsupported("KL bound of a tuple model"))?;
        for j in (i + 1)..n {
            let q = model.measure(j).unwrap();
            for x in probe_grid(p, q)? {
                let (lp, lq) = (p.log_density1(x), q.log_density1(x));
                if lp == f64::NEG_INFINITY && lq == f64::NEG_INFINITY {
                    continue;
                }
                let g = (lp - lq).abs();
                if g.is_nan() {
                    return Err(Error::SignedMeasure("KL bound on signed candidates".to_string()));
                }
                a = a.max(g);
            }
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{tv_distance, Family, Method};
    use crate::quad::{integrate, Domain};

    #[test]
    fn gaussian_grid_counts_and_vc() {
        let m = ModelConfig::GaussianLocationGrid { dim: 1, lo: -2.0, hi: 2.0, step: 0.5 }.build().unwrap();
        assert_eq!(m.len(), 9);
        assert_eq!(m.meta.vc_dimension, Some(2.0));
        let m3 = ModelConfig::GaussianLocationGrid { dim: 2, lo: 0.0, hi: 1.0, step: 0.5 }.build().unwrap();
        assert_eq!(m3.len(), 9);
        assert_eq!(m3.dim(), 2);
        assert_eq!(m3.meta.vc_dimension, Some(3.0));
    }

    #[test]
    fn histogram_net_pairs() {
        let cfg = ModelConfig::HistogramNet {
            cells: 2,
            values: vec![0.2, 0.6, 1.0, 1.4, 1.8],
            lo: 0.0,
            hi: 1.0,
            normalize: true,
            max_candidates: 100,
        };
        let m = cfg.build().unwrap();
        assert_eq!(m.len(), 5);
        for i in 0..m.len() {
            let (_, vals) = m.measure(i).unwrap().piecewise_constant().unwrap();
            assert!((vals[0] + vals[1] - 2.0).abs() < 1e-12);
            assert!((m.measure(i).unwrap().total_mass() - 1.0).abs() < 1e-9);
        }
        assert!((m.resolve_ratio(2.0, None).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        // cell values 0.2 vs 1.8 give a = log 9
        assert!((m.meta.kl_a.unwrap() - 9f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn power_grid_tv_matches_quadrature() {
        let m = ModelConfig::TranslationGrid { base: Base::Power { alpha: 0.5 }, lo: 0.0, hi: 1.5, step: 0.25 }
            .build()
            .unwrap();
        for i in 0..m.len() {
            for j in 0..m.len() {
                let (p, q) = (m.measure(i).unwrap(), m.measure(j).unwrap());
                let d = (i as f64 - j as f64).abs() * 0.25;
                let closed = tv_distance(p, q, Method::ClosedForm).unwrap();
                let quad = tv_distance(p, q, Method::Quadrature).unwrap();
                assert!((closed - d.sqrt().min(1.0)).abs() < 1e-12);
                assert!((closed - quad).abs() < 1e-6, "{i} {j}: {closed} vs {quad}");
            }
        }
    }

    #[test]
    fn power_alpha_out_of_range() {
        let e = ModelConfig::TranslationGrid { base: Base::Power { alpha: 1.5 }, lo: 0.0, hi: 1.0, step: 0.5 }.build();
        assert!(e.unwrap_err().to_string().contains("alpha"));
    }

    #[test]
    fn cauchy_kl_bound_matches_probe_max() {
        let m = ModelConfig::TranslationGrid { base: Base::Cauchy { scale: 1.0 }, lo: 0.0, hi: 2.0, step: 1.0 }
            .build()
            .unwrap();
        let a = m.meta.kl_a.unwrap();
        let (p, q) = (m.measure(0).unwrap(), m.measure(2).unwrap());
        let mut best: f64 = 0.0;
        for k in 0..200_001 {
            let x = -50.0 + k as f64 * 5e-4;
            best = best.max((p.log_density1(x) - q.log_density1(x)).abs());
        }
        assert!(best <= a + 1e-12 && a - best < 1e-6, "{a} vs {best}");
    }

    #[test]
    fn monotone_net_invariants() {
        let m = ModelConfig::MonotoneNet {
            max_pieces: 2,
            breaks: vec![0.0, 0.5, 1.0, 2.0],
            levels: vec![1.0, 2.0, 3.0],
            max_candidates: 10_000,
        }
        .build()
        .unwrap();
        assert!(m.len() > 3);
        assert_eq!(m.meta.vc_dimension, Some(4.0));
        for i in 0..m.len() {
            let meas = m.measure(i).unwrap();
            let (b, v) = meas.piecewise_constant().unwrap();
            assert!(v.windows(2).all(|w| w[0] >= w[1]));
            assert!(v.iter().all(|&x| x > 0.0));
            assert!(b.len() - 1 <= 2);
            assert!((meas.total_mass() - 1.0).abs() < 1e-9);
        }
        // no duplicates after merging equal levels
        for i in 0..m.len() {
            for j in (i + 1)..m.len() {
                assert_ne!(m.measure(i).unwrap().family, m.measure(j).unwrap().family);
            }
        }
    }

    #[test]
    fn indicator_basis_is_orthonormal() {
        let m = ModelConfig::L2Linear {
            basis: Basis::Indicator { cells: 4, lo: 0.0, hi: 1.0 },
            coefficients: CoefficientNet::List { vectors: vec![vec![0.5; 4], vec![0.5, 0.5, 0.5, 0.5], vec![1.0, 0.0, 0.0, 0.0]] },
            probabilities_only: false,
            max_candidates: 10,
        }
        .build()
        .unwrap();
        let g = l2_inner_products(&m).unwrap();
        for (r, row) in g.gram.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert!((v - if r == c { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!((g.ratio() - 2.0).abs() < 1e-12);
        assert_eq!(g.distance(0, 1), 0.0);
        assert_eq!(m.meta.ratio_r, Some(g.ratio()));
    }

    #[test]
    fn l2_coefficient_norm_matches_quadrature() {
        let breaks = vec![0.0, 0.3, 0.7, 1.0];
        let fns = vec![vec![1.0, 1.0, 1.0], vec![2.0, -1.0, 0.5]];
        let mut state = 12345u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        let vectors: Vec<Vec<f64>> = (0..6).map(|_| vec![rnd(), rnd()]).collect();
        let m = ModelConfig::L2Linear {
            basis: Basis::User { breaks: breaks.clone(), functions: fns },
            coefficients: CoefficientNet::List { vectors },
            probabilities_only: false,
            max_candidates: 10,
        }
        .build()
        .unwrap();
        let g = l2_inner_products(&m).unwrap();
        let dom = Domain { breaks, ..Domain::new(0.0, 1.0) };
        for i in 0..m.len() {
            for j in 0..m.len() {
                let (p, q) = (m.measure(i).unwrap(), m.measure(j).unwrap());
                let sq = integrate(|x| (p.density1(x) - q.density1(x)).powi(2), &dom, 1e-12).unwrap();
                assert!((sq.sqrt() - g.distance(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn regression_tuples_shape() {
        let m = ModelConfig::RegressionTuples {
            thetas: ThetaNet::Polynomial { dim: 2, grid: vec![-1.0, 0.0, 1.0] },
            base: Base::Cauchy { scale: 1.0 },
            n: 5,
        }
        .build()
        .unwrap();
        assert_eq!(m.len(), 9);
        assert_eq!(m.tuple_len(), Some(5));
        // c = (1, 1): θ_i = 1 + i/n
        let c = m.candidate(8);
        for i in 0..5 {
            match &c.marginal(i).family {
                Family::Cauchy { loc, .. } => assert!((loc - (1.0 + (i + 1) as f64 / 5.0)).abs() < 1e-12),
                f => panic!("{f:?}"),
            }
        }
        let bad = ModelConfig::RegressionTuples {
            thetas: ThetaNet::List { thetas: vec![vec![0.0; 3]] },
            base: Base::Cauchy { scale: 1.0 },
            n: 4,
        };
        assert!(bad.build().is_err());
    }

    #[test]
    fn discrete_model_and_ratio() {
        let m = ModelConfig::Discrete {
            size: 3,
            candidates: vec![vec![0.2, 0.3, 0.5], vec![0.5, 0.3, 0.2]],
            points: None,
            weights: None,
        }
        .build()
        .unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.meta.kl_a.unwrap() - 2.5f64.ln()).abs() < 1e-12);
        assert_eq!(m.resolve_ratio(2.0, None).unwrap(), 1.0);
        assert_eq!(m.resolve_ratio(2.0, Some(3.0)).unwrap(), 3.0);
    }
}
