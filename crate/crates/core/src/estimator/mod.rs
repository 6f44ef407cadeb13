//! The ℓ-estimator: pairwise statistics `T(X,P,Q) = Σ_k t_(P_k,Q_k)(X_k)`,
//! sup-statistics `T(X,P) = max_Q T(X,P,Q)` and the ε-minimizer set.

pub mod bounds;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::losses::{LossKind, LossSpec};
use crate::measures::{tv_sign_regions, Measure, Sample};
use crate::models::{Candidate, Model};
use crate::testfam::{PairValues, ScoreFactory, ScoreFunction};

pub const DEFAULT_EPSILON: f64 = 1.0;

/// Scores of every unordered pair of an i.i.d. model. They depend on the
/// model and the loss only, so one cache serves many samples.
pub struct PairCache {
    m: usize,
    pairs: Vec<CachedPair>,
}

struct CachedPair {
    score: ScoreFunction,
    /// Sign regions of the TV data part, when known in closed form.
    regions: Option<Vec<(f64, f64, f64)>>,
}

impl PairCache {
    pub fn build(model: &Model, loss: &LossSpec) -> Result<Self> {
        if !model.is_iid() {
            return Err(Error::unsupported("pair caches are for i.i.d. models"));
        }
        let factory = ScoreFactory::new(loss, model)?;
        let tv = matches!(loss.kind, LossKind::Tv) && model.dim() == 1;
        let mut pairs = Vec::with_capacity(model.len() * model.len().saturating_sub(1) / 2);
        for (i, j) in upper_pairs(model.len()) {
            let score = factory.pair(model, i, j)?;
            let regions = if tv { tv_sign_regions(score.p(), score.q()) } else { None };
            pairs.push(CachedPair { score, regions });
        }
        Ok(PairCache { m: model.len(), pairs })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    fn get(&self, i: usize, j: usize) -> &CachedPair {
        debug_assert!(i < j && j < self.m);
        &self.pairs[i * (2 * self.m - i - 1) / 2 + (j - i - 1)]
    }

    fn all_regions(&self) -> bool {
        self.pairs.iter().all(|p| p.regions.is_some())
    }
}

/// Evaluates single entries of the pairwise matrix. Density tables are built
/// once per candidate, so an entry costs `O(n)` after its score is built.
/// Under TV on 1-d translation families the sample is sorted instead and an
/// entry costs `O(log n)`.
pub struct PairwiseEngine<'a> {
    sample: &'a Sample,
    model: &'a Model,
    factory: ScoreFactory,
    cache: Option<&'a PairCache>,
    /// `(density, log density)` per candidate and observation (i.i.d. models).
    tables: Option<Vec<(Vec<f64>, Vec<f64>)>>,
    sorted: Option<Vec<f64>>,
}

impl<'a> PairwiseEngine<'a> {
    pub fn new(sample: &'a Sample, model: &'a Model, loss: &LossSpec) -> Result<Self> {
        Self::build(sample, model, loss, None)
    }

    /// Engine reusing the scores of `cache`, which must come from `model` and `loss`.
    pub fn with_cache(sample: &'a Sample, model: &'a Model, loss: &LossSpec, cache: &'a PairCache) -> Result<Self> {
        if cache.len() != model.len() {
            return Err(Error::invalid("pair cache was built for another model"));
        }
        Self::build(sample, model, loss, Some(cache))
    }

    fn build(sample: &'a Sample, model: &'a Model, loss: &LossSpec, cache: Option<&'a PairCache>) -> Result<Self> {
        if sample.n() == 0 {
            return Err(Error::Empty("sample".into()));
        }
        if sample.dim() != model.dim() {
            return Err(Error::invalid(format!(
                "sample dimension {} does not match model dimension {}",
                sample.dim(),
                model.dim()
            )));
        }
        if let Some(len) = model.tuple_len() {
            if len != sample.n() {
                return Err(Error::invalid(format!("candidate tuples have length {len} but n = {}", sample.n())));
            }
        }
        let factory = ScoreFactory::new(loss, model)?;
        let tv_1d = model.is_iid() && model.dim() == 1 && matches!(loss.kind, LossKind::Tv);
        let counting = tv_1d
            && match cache {
                Some(c) => c.all_regions(),
                None => {
                    let first = model.measure(0).expect("i.i.d. model");
                    (1..model.len()).all(|k| tv_sign_regions(first, model.measure(k).expect("i.i.d. model")).is_some())
                }
            };
        let sorted = tv_1d.then(|| {
            let mut xs = sample.as_flat().to_vec();
            xs.sort_by(f64::total_cmp);
            xs
        });
        let tables = if model.is_iid() && needs_tables(loss) && !counting {
            Some(
                (0..model.len())
                    .map(|i| {
                        let m = model.measure(i).expect("i.i.d. model");
                        sample.points().map(|x| density_pair(m, x)).unzip()
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok(PairwiseEngine { sample, model, factory, cache, tables, sorted })
    }

    pub fn model(&self) -> &Model {
        self.model
    }

    pub fn factory(&self) -> &ScoreFactory {
        &self.factory
    }

    /// Score of the i.i.d. pair `(i, j)`.
    pub fn score(&self, i: usize, j: usize) -> Result<ScoreFunction> {
        match self.cache {
            Some(c) if i < j => Ok(c.get(i, j).score.clone()),
            Some(c) if j < i => Ok(c.get(j, i).score.negated().with_pair(i, j)),
            _ => self.factory.pair(self.model, i, j),
        }
    }

    /// `(T(X, P_i, P_j), constant part summed over observations)`.
    pub fn entry(&self, i: usize, j: usize) -> Result<(f64, f64)> {
        if i == j {
            return Ok((0.0, 0.0));
        }
        let wrap = |e: Error| match e {
            Error::Pair { .. } => e,
            e => Error::Pair { i, j, source: Box::new(e) },
        };
        match (self.model.candidate(i), self.model.candidate(j)) {
            (Candidate::Iid(_), Candidate::Iid(_)) => {
                if let Some(c) = self.cache {
                    if i > j {
                        let (v, k) = self.iid_entry(i, j, Some(c.get(j, i)), true)?;
                        return Ok((-v, -k));
                    }
                    return self.iid_entry(i, j, Some(c.get(i, j)), false);
                }
                self.iid_entry(i, j, None, false)
            }
            (Candidate::Tuple(p), Candidate::Tuple(q)) => {
                let (mut total, mut c) = (0.0, 0.0);
                for (k, x) in self.sample.points().enumerate() {
                    let s = self.factory.score(&p[k], &q[k]).map_err(wrap)?;
                    total += s.eval(x);
                    c += s.constant_part;
                }
                Ok((total, c))
            }
            _ => Err(Error::invalid("mixed i.i.d. and tuple candidates")),
        }
    }

    /// Entry of an i.i.d. pair; with `swapped` the cached score belongs to `(j, i)`.
    fn iid_entry(&self, i: usize, j: usize, cached: Option<&CachedPair>, swapped: bool) -> Result<(f64, f64)> {
        let (a, b) = if swapped { (j, i) } else { (i, j) };
        let owned;
        let (s, regions) = match cached {
            Some(cp) => (&cp.score, cp.regions.as_deref()),
            None => {
                let s = self.score(a, b)?;
                let r = if self.sorted.is_some() { tv_sign_regions(s.p(), s.q()) } else { None };
                owned = (s, r);
                (&owned.0, owned.1.as_deref())
            }
        };
        let mut total = 0.0;
        match (&self.sorted, regions, &self.tables) {
            (Some(xs), Some(r), _) if s.needs_densities() => total = region_sum(xs, s, r),
            (_, _, Some(t)) if s.needs_densities() => {
                let (ta, tb) = (&t[a], &t[b]);
                for (k, x) in self.sample.points().enumerate() {
                    let v = PairValues { p: ta.0[k], q: tb.0[k], lp: ta.1[k], lq: tb.1[k] };
                    total += s.data_part(x, v);
                }
            }
            _ => {
                for x in self.sample.points() {
                    total += s.eval(x) - s.constant_part;
                }
            }
        }
        let c = s.constant_part * self.sample.n() as f64;
        Ok((c + total, c))
    }
}

/// Sum of the TV data part over a sorted 1-d sample by counting the points
/// inside each sign region. Points within a relative `1e-9` of a region
/// endpoint are scored directly, which keeps the result identical to direct
/// evaluation where rounding decides ties.
fn region_sum(xs: &[f64], s: &ScoreFunction, regions: &[(f64, f64, f64)]) -> f64 {
    debug_assert!(regions.len() <= 2);
    let pad = |e: f64| 1e-9 * (1.0 + e.abs());
    let mut total = 0.0;
    // translation pairs have at most two regions, hence four endpoint windows
    let mut near = [(0.0, 0.0); 4];
    let mut k = 0;
    for &(lo, hi, v) in regions {
        let (a, b) = (lo + if lo.is_finite() { pad(lo) } else { 0.0 }, hi - if hi.is_finite() { pad(hi) } else { 0.0 });
        if a < b {
            let ia = xs.partition_point(|&x| x <= a);
            let ib = xs.partition_point(|&x| x < b);
            if ib > ia {
                total += v * (ib - ia) as f64;
            }
        }
        for e in [lo, hi] {
            if e.is_finite() {
                near[k] = (e - pad(e), e + pad(e));
                k += 1;
            }
        }
    }
    let near = &mut near[..k];
    near.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    // merge overlapping windows so that no point is scored twice
    let mut i = 0;
    while i < near.len() {
        let (a, mut b) = near[i];
        let mut j = i + 1;
        while j < near.len() && near[j].0 <= b {
            b = b.max(near[j].1);
            j += 1;
        }
        let (ia, ib) = (xs.partition_point(|&x| x < a), xs.partition_point(|&x| x <= b));
        for &x in &xs[ia..ib] {
            let x = [x];
            total += s.data_part(&x, PairValues::at(s.p(), s.q(), &x));
        }
        i = j;
    }
    total
}

fn needs_tables(loss: &LossSpec) -> bool {
    matches!(loss.kind, LossKind::Tv | LossKind::Hellinger2 | LossKind::Kl { .. } | LossKind::Lj { .. })
}

fn density_pair(m: &Measure, x: &[f64]) -> (f64, f64) {
    if x.len() == 1 {
        (m.density1(x[0]), m.log_density1(x[0]))
    } else {
        let l = m.log_density(x);
        (libm::exp(l), l)
    }
}

/// Antisymmetric matrix of pairwise statistics with per-pair constant parts.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairwiseMatrix {
    pub values: Vec<Vec<f64>>,
    /// Data-free part of each entry (summed over observations).
    pub constant_parts: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    /// Assembles the matrix from upper-triangle entries `(i, j, value, constant)`.
    pub fn from_upper(m: usize, entries: impl IntoIterator<Item = (usize, usize, f64, f64)>) -> Self {
        let mut values = vec![vec![0.0; m]; m];
        let mut constant_parts = vec![vec![0.0; m]; m];
        for (i, j, v, c) in entries {
            values[i][j] = v;
            values[j][i] = -v;
            constant_parts[i][j] = c;
            constant_parts[j][i] = -c;
        }
        PairwiseMatrix { values, constant_parts }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Upper-triangle pairs `(i, j)`, `i < j`, in row-major order.
pub fn upper_pairs(m: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..m).flat_map(move |i| ((i + 1)..m).map(move |j| (i, j)))
}

/// Computes every unordered pair once (sequentially).
pub fn pairwise_statistic(sample: &Sample, model: &Model, loss: &LossSpec) -> Result<PairwiseMatrix> {
    let engine = PairwiseEngine::new(sample, model, loss)?;
    let mut entries = Vec::new();
    for (i, j) in upper_pairs(model.len()) {
        let (v, c) = engine.entry(i, j)?;
        entries.push((i, j, v, c));
    }
    Ok(PairwiseMatrix::from_upper(model.len(), entries))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub pairwise: PairwiseMatrix,
    /// `T(X, P_i) = max_j T(X, P_i, P_j)`.
    pub sup_stat: Vec<f64>,
    pub epsilon: f64,
    pub minimizer_set: Vec<usize>,
    /// Lowest index attaining the minimal sup-statistic.
    pub chosen: usize,
    pub labels: Vec<String>,
}

impl EstimateReport {
    pub fn from_matrix(pairwise: PairwiseMatrix, epsilon: f64, labels: Vec<String>) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if pairwise.is_empty() {
            return Err(Error::Empty("model".into()));
        }
        let sup_stat: Vec<f64> = pairwise.values.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).collect();
        let (chosen, best) = sup_stat
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
        let minimizer_set = minimizers(&sup_stat, best, epsilon);
        Ok(EstimateReport { pairwise, sup_stat, epsilon, minimizer_set, chosen, labels })
    }

    /// The ε-minimizer set for another ε.
    pub fn minimizer_set_for(&self, epsilon: f64) -> Vec<usize> {
        minimizers(&self.sup_stat, self.sup_stat[self.chosen], epsilon)
    }

    pub fn chosen_label(&self) -> &str {
        self.labels.get(self.chosen).map_or("", |s| s.as_str())
    }
}

fn minimizers(sup: &[f64], best: f64, epsilon: f64) -> Vec<usize> {
    sup.iter().enumerate().filter(|(_, &v)| v <= best + epsilon).map(|(i, _)| i).collect()
}

pub fn ell_estimate(sample: &Sample, model: &Model, loss: &LossSpec, epsilon: f64) -> Result<EstimateReport> {
    if !(epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let m = pairwise_statistic(sample, model, loss)?;
    EstimateReport::from_matrix(m, epsilon, model.labels())
}

/// Histogram `D Σ_I ν̂_n(I) 1_I` on `cells` equal cells of `[lo, hi]`, as
/// cell densities with respect to the normalized reference.
pub fn histogram_estimator(sample: &Sample, cells: usize, lo: f64, hi: f64) -> Result<Measure> {
    if sample.n() == 0 {
        return Err(Error::Empty("sample".into()));
    }
    if sample.dim() != 1 {
        return Err(Error::unsupported("histograms of multivariate samples"));
    }
    if cells == 0 || !(lo < hi) {
        return Err(Error::invalid("histogram needs cells >= 1 and lo < hi"));
    }
    let mut counts = vec![0.0; cells];
    for &x in sample.as_flat() {
        if let Some(k) = crate::measures::cell_of(lo, hi, cells, x) {
            counts[k] += 1.0;
        }
    }
    let scale = cells as f64 / sample.n() as f64;
    Ok(Measure::cells(lo, hi, counts.iter().map(|c| c * scale).collect())?.with_tag("histogram"))
}

/// Midpoint of `X_(⌈n/2⌉)` and `X_(⌈n/2⌉+1)`.
pub fn median_tv_estimator(sample: &Sample) -> Result<f64> {
    if sample.dim() != 1 {
        return Err(Error::unsupported("median of a multivariate sample"));
    }
    let n = sample.n();
    if n < 2 {
        return Err(Error::invalid(format!("the median estimator needs n >= 2, got {n}")));
    }
    let mut xs = sample.as_flat().to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let m = n.div_ceil(2);
    Ok(0.5 * (xs[m - 1] + xs[m]))
}

#[cfg(test)]
mod tests;
