//! Score families `t_(P,Q)` for every loss, their constants, and exact
//! checkers of the two structural assumptions on finite spaces.
//!
//! Every score splits as `t(x) = constant_part + data_part(x)`. The constant
//! part (set probabilities, affinities, norms) is computed once per pair.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, SQRT_2};

use crate::error::{Error, Result};
use crate::losses::{self, LossKind, LossSpec};
use crate::measures::{
    expectation, lj_distance, pair_integral, probe_grid, set_probabilities, AffineCdf, Family, Measure, Reference,
    WassersteinWitness,
};
use crate::models::Model;
use crate::special::sign;

/// Constants of the two assumptions: `E_S[t] <= a0 ℓ(S,P) - a1 ℓ(S,Q)`,
/// `Var_S[t] <= a2 (ℓ(S,P) + ℓ(S,Q))`, and `b` bounding the witness oscillation.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FamilyConstants {
    pub a0: f64,
    pub a1: f64,
    pub a2: Option<f64>,
    pub b: f64,
}

impl FamilyConstants {
    /// Constants of a variational family with oscillation bound `b`.
    pub fn variational(b: f64) -> Self {
        FamilyConstants { a0: 1.5 / b, a1: 0.5 / b, a2: None, b }
    }

    pub fn tv() -> Self {
        Self::variational(1.0)
    }

    pub fn hellinger() -> Self {
        FamilyConstants { a0: (SQRT_2 + 1.0) / 2.0, a1: (SQRT_2 - 1.0) / 2.0, a2: Some(1.5), b: 1.0 }
    }

    pub fn kl(a: f64) -> Self {
        let h = 0.5 / a;
        FamilyConstants { a0: h, a1: h, a2: Some(1.0 / (a * a.min(2.0))), b: 1.0 }
    }

    pub fn lj(j: f64, r: f64) -> Self {
        Self::variational(2.0 * libm::pow(r, j - 1.0))
    }

    pub fn linf(cells: usize) -> Self {
        Self::variational(cells as f64)
    }

    pub fn with_a2(mut self, a2: f64) -> Self {
        self.a2 = Some(a2);
        self
    }
}

/// Densities of the pair at one point, in whichever form the score needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairValues {
    pub p: f64,
    pub q: f64,
    pub lp: f64,
    pub lq: f64,
}

impl PairValues {
    pub fn at(p: &Measure, q: &Measure, x: &[f64]) -> Self {
        if x.len() == 1 {
            let x = x[0];
            PairValues { p: p.density1(x), q: q.density1(x), lp: p.log_density1(x), lq: q.log_density1(x) }
        } else {
            let (lp, lq) = (p.log_density(x), q.log_density(x));
            PairValues { p: libm::exp(lp), q: libm::exp(lq), lp, lq }
        }
    }
}

type Witness = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// How the observation enters the score.
#[derive(Clone)]
pub enum DataPart {
    Zero,
    /// `½ 1_{q>p} - ½ 1_{p>q}`.
    Tv,
    /// `c (√(q/r) - √(p/r))`, `r = (p+q)/2`.
    Hellinger { c: f64 },
    /// `c log(q/p)`.
    LogRatio { c: f64 },
    /// `-c sign(p-q) |p-q|^{j-1}`.
    Power { c: f64, j: f64 },
    /// `-s 1_{x ∈ I*}` on a uniform partition or a discrete space.
    Cell { s: f64, locator: CellLocator, cell: usize },
    /// `-(witness(x) / b)`.
    Witness { f: Witness, inv_b: f64 },
}

impl core::fmt::Debug for DataPart {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DataPart::Zero => write!(f, "Zero"),
            DataPart::Tv => write!(f, "Tv"),
            DataPart::Hellinger { c } => write!(f, "Hellinger {{ c: {c} }}"),
            DataPart::LogRatio { c } => write!(f, "LogRatio {{ c: {c} }}"),
            DataPart::Power { c, j } => write!(f, "Power {{ c: {c}, j: {j} }}"),
            DataPart::Cell { s, cell, .. } => write!(f, "Cell {{ s: {s}, cell: {cell} }}"),
            DataPart::Witness { inv_b, .. } => write!(f, "Witness {{ inv_b: {inv_b} }}"),
        }
    }
}

/// Maps a point to its cell index.
#[derive(Clone, Debug, PartialEq)]
pub enum CellLocator {
    Partition { lo: f64, hi: f64, cells: usize },
    Points(Vec<f64>),
}

impl CellLocator {
    pub fn locate(&self, x: f64) -> Option<usize> {
        match self {
            CellLocator::Partition { lo, hi, cells } => crate::measures::cell_of(*lo, *hi, *cells, x),
            CellLocator::Points(p) => crate::measures::find_point(p, x),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ScoreFunction {
    pub pair: (usize, usize),
    /// The data-free term of `t`.
    pub constant_part: f64,
    pub constants: FamilyConstants,
    pub data: DataPart,
    p: Arc<Measure>,
    q: Arc<Measure>,
}

impl ScoreFunction {
    fn new(p: &Measure, q: &Measure, constant_part: f64, constants: FamilyConstants, data: DataPart) -> Self {
        ScoreFunction {
            pair: (0, 0),
            constant_part,
            constants,
            data,
            p: Arc::new(p.clone()),
            q: Arc::new(q.clone()),
        }
    }

    pub fn with_pair(mut self, i: usize, j: usize) -> Self {
        self.pair = (i, j);
        self
    }

    pub fn p(&self) -> &Measure {
        &self.p
    }

    pub fn q(&self) -> &Measure {
        &self.q
    }

    /// True when the data part needs the pair densities at `x`.
    pub fn needs_densities(&self) -> bool {
        matches!(self.data, DataPart::Tv | DataPart::Hellinger { .. } | DataPart::LogRatio { .. } | DataPart::Power { .. })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = if self.needs_densities() {
            PairValues::at(&self.p, &self.q, x)
        } else {
            PairValues { p: 0.0, q: 0.0, lp: 0.0, lq: 0.0 }
        };
        self.eval_with(x, v)
    }

    pub fn eval1(&self, x: f64) -> f64 {
        self.eval(&[x])
    }

    /// Score at `x` given precomputed pair densities.
    pub fn eval_with(&self, x: &[f64], v: PairValues) -> f64 {
        self.constant_part + self.data_part(x, v)
    }

    pub fn data_part(&self, x: &[f64], v: PairValues) -> f64 {
        match &self.data {
            DataPart::Zero => 0.0,
            DataPart::Tv => tv_sign(v.lq - v.lp),
            DataPart::Hellinger { c } => c * hellinger_gap(v.lp, v.lq),
            DataPart::LogRatio { c } => {
                if v.lp == f64::NEG_INFINITY && v.lq == f64::NEG_INFINITY {
                    0.0
                } else {
                    c * (v.lq - v.lp)
                }
            }
            DataPart::Power { c, j } => {
                let d = v.p - v.q;
                -c * sign(d) * libm::pow(d.abs(), j - 1.0)
            }
            DataPart::Cell { s, locator, cell } => {
                if locator.locate(x[0]) == Some(*cell) {
                    -s
                } else {
                    0.0
                }
            }
            DataPart::Witness { f, inv_b } => -inv_b * f(x[0]),
        }
    }

    /// `t_(Q,P) = -t_(P,Q)`.
    pub fn negated(&self) -> ScoreFunction {
        let data = match &self.data {
            DataPart::Zero => DataPart::Zero,
            DataPart::Tv => DataPart::Tv,
            DataPart::Hellinger { c } => DataPart::Hellinger { c: *c },
            DataPart::LogRatio { c } => DataPart::LogRatio { c: *c },
            DataPart::Power { c, j } => DataPart::Power { c: *c, j: *j },
            DataPart::Cell { s, locator, cell } => DataPart::Cell { s: -s, locator: locator.clone(), cell: *cell },
            DataPart::Witness { f, inv_b } => {
                let f = f.clone();
                DataPart::Witness { f: Arc::new(move |x| -f(x)), inv_b: *inv_b }
            }
        };
        ScoreFunction {
            pair: (self.pair.1, self.pair.0),
            constant_part: -self.constant_part,
            constants: self.constants,
            data,
            p: self.q.clone(),
            q: self.p.clone(),
        }
    }
}

/// `√(q/r) - √(p/r)` from log densities, 0 where both vanish.
fn hellinger_gap(lp: f64, lq: f64) -> f64 {
    if lp == f64::NEG_INFINITY && lq == f64::NEG_INFINITY {
        return 0.0;
    }
    let d = lq - lp;
    let p_over_r = 2.0 / (1.0 + libm::exp(d));
    let q_over_r = 2.0 / (1.0 + libm::exp(-d));
    libm::sqrt(q_over_r) - libm::sqrt(p_over_r)
}

const PROBE_RTOL: f64 = 1e-9;

/// `(1/b)(∫ f d(P+Q)/2 - f)` for a witness `f` of the pair.
pub fn variational_score(
    p: &Measure,
    q: &Measure,
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    b: f64,
) -> Result<ScoreFunction> {
    variational_score_with_breaks(p, q, f, b, &[])
}

/// As [`variational_score`], with the jumps of `f` given as quadrature breakpoints.
pub fn variational_score_with_breaks(
    p: &Measure,
    q: &Measure,
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    b: f64,
    breaks: &[f64],
) -> Result<ScoreFunction> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::invalid(format!("oscillation bound b must be positive, got {b}")));
    }
    let grid = probe_grid(p, q)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in &grid {
        let v = f(x);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi - lo > b * (1.0 + PROBE_RTOL) + 1e-12 {
        return Err(Error::AssumptionViolated(format!(
            "witness oscillation {} exceeds b = {b} on the probe grid",
            hi - lo
        )));
    }
    let mean = 0.5 * (expectation(p, &f, breaks)? + expectation(q, &f, breaks)?);
    let data = DataPart::Witness { f: Arc::new(f), inv_b: 1.0 / b };
    Ok(ScoreFunction::new(p, q, mean / b, FamilyConstants::variational(b), data))
}

/// Witness `1_{p>q} - 1_{q>p}` of the TV family (up to the factor ½ of `b`).
pub fn tv_witness(p: &Measure, q: &Measure) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    let (p, q) = (p.clone(), q.clone());
    move |x| {
        -tv_sign(q.log_density1(x) - p.log_density1(x))
    }
}

/// Log-density gaps below this count as ties, so that translates whose
/// densities differ only by rounding (e.g. `1/(hi-lo)`) are not split.
pub(crate) const TV_TIE: f64 = 1e-14;

/// `½ sign(q - p)` from `log q - log p`; NaN (both densities zero) is a tie.
pub(crate) fn tv_sign(gap: f64) -> f64 {
    if gap > TV_TIE {
        0.5
    } else if gap < -TV_TIE {
        -0.5
    } else {
        0.0
    }
}

pub fn tv_score(p: &Measure, q: &Measure) -> Result<ScoreFunction> {
    if p == q {
        return Ok(ScoreFunction::new(p, q, 0.0, FamilyConstants::tv(), DataPart::Zero));
    }
    let s = set_probabilities(p, q)?;
    Ok(ScoreFunction::new(p, q, 0.5 * (s.p_pgt - s.q_plt), FamilyConstants::tv(), DataPart::Tv))
}

pub fn wasserstein_score(p: &Measure, q: &Measure) -> Result<ScoreFunction> {
    let w = WassersteinWitness::new(&AffineCdf::on_unit(p)?, &AffineCdf::on_unit(q)?);
    let constant = w.witness(1.0) - w.mean_part;
    let f = move |x: f64| w.witness(x);
    Ok(ScoreFunction::new(
        p,
        q,
        constant,
        FamilyConstants::variational(1.0),
        DataPart::Witness { f: Arc::new(f), inv_b: 1.0 },
    ))
}

pub(crate) fn sup_abs_diff(p: &Measure, q: &Measure) -> Result<f64> {
    Ok(probe_grid(p, q)?.iter().map(|&x| (p.density1(x) - q.density1(x)).abs()).fold(0.0, f64::max))
}

pub fn lj_score(p: &Measure, q: &Measure, j: f64, r: f64) -> Result<ScoreFunction> {
    lj_score_checked(p, q, j, r, true)
}

fn lj_score_checked(p: &Measure, q: &Measure, j: f64, r: f64, check: bool) -> Result<ScoreFunction> {
    if !(j > 1.0 && j.is_finite() && r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("L_j score needs 1 < j < ∞ and R > 0, got j = {j}, R = {r}")));
    }
    let k = FamilyConstants::lj(j, r);
    let norm = lj_distance(p, q, j)?;
    if norm == 0.0 {
        return Ok(ScoreFunction::new(p, q, 0.0, k, DataPart::Zero));
    }
    if check {
        let sup = sup_abs_diff(p, q)?;
        if sup > r * norm * (1.0 + PROBE_RTOL) {
            return Err(Error::AssumptionViolated(format!(
                "‖p-q‖_∞ = {sup} exceeds R‖p-q‖_j = {} (R = {r})",
                r * norm
            )));
        }
    }
    let np = libm::pow(norm, j - 1.0);
    let c = pair_integral(p, q, |a, b| {
        let d = a - b;
        sign(d) * libm::pow(d.abs(), j - 1.0) * 0.5 * (a + b)
    })? / np;
    let inv_b = 1.0 / k.b;
    Ok(ScoreFunction::new(p, q, c * inv_b, k, DataPart::Power { c: inv_b / np, j }))
}

/// Cell probabilities and a locator for a uniform partition of `cells` cells.
fn partition_view(m: &Measure, cells: usize) -> Result<(Vec<f64>, CellLocator)> {
    losses::require_partition(m, cells)?;
    match m.reference() {
        Reference::Partition { cells, lo, hi } => {
            Ok((m.cell_probs().expect("partitioned measure"), CellLocator::Partition { lo, hi, cells }))
        }
        Reference::Discrete { points, .. } => {
            let probs = points.iter().map(|&x| m.atom_mass(x)).collect();
            Ok((probs, CellLocator::Points(points)))
        }
        _ => unreachable!("require_partition accepted a non-partition reference"),
    }
}

pub fn linf_score(p: &Measure, q: &Measure, cells: usize) -> Result<ScoreFunction> {
    let (a, loc_p) = partition_view(p, cells)?;
    let (b, loc_q) = partition_view(q, cells)?;
    if loc_p != loc_q {
        return Err(Error::IncompatibleReference("L_∞ scores need the same partition".into()));
    }
    let k = FamilyConstants::linf(cells);
    let mut best = 0;
    for i in 1..cells {
        if (a[i] - b[i]).abs() > (a[best] - b[best]).abs() {
            best = i;
        }
    }
    let s = sign(a[best] - b[best]);
    if s == 0.0 {
        return Ok(ScoreFunction::new(p, q, 0.0, k, DataPart::Zero));
    }
    let data = DataPart::Cell { s, locator: loc_p, cell: best };
    Ok(ScoreFunction::new(p, q, s * 0.5 * (a[best] + b[best]), k, data))
}

pub fn hellinger_score(p: &Measure, q: &Measure) -> Result<ScoreFunction> {
    let k = FamilyConstants::hellinger();
    if p == q {
        return Ok(ScoreFunction::new(p, q, 0.0, k, DataPart::Zero));
    }
    if p.dim() > 1 {
        return Err(Error::unsupported("Hellinger scores in dimension > 1"));
    }
    let c = 1.0 / (2.0 * SQRT_2);
    // ρ(R,Q) - ρ(R,P) = ∫ √r (√q - √p) dμ
    let gap = pair_integral(p, q, |a, b| libm::sqrt(0.5 * (a + b)) * (libm::sqrt(b) - libm::sqrt(a)))?;
    Ok(ScoreFunction::new(p, q, c * gap, k, DataPart::Hellinger { c }))
}

pub fn kl_score(p: &Measure, q: &Measure, a: f64) -> Result<ScoreFunction> {
    kl_score_checked(p, q, a, true)
}

fn kl_score_checked(p: &Measure, q: &Measure, a: f64, check: bool) -> Result<ScoreFunction> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("KL bound a must be positive and finite, got {a}")));
    }
    let k = FamilyConstants::kl(a);
    if p == q {
        return Ok(ScoreFunction::new(p, q, 0.0, k, DataPart::Zero));
    }
    if check {
        let worst = max_log_ratio(p, q)?;
        if worst > a * (1.0 + PROBE_RTOL) {
            return Err(Error::AssumptionViolated(format!("|log(p/q)| reaches {worst} > a = {a}")));
        }
    }
    Ok(ScoreFunction::new(p, q, 0.0, k, DataPart::LogRatio { c: 0.5 / a }))
}

fn max_log_ratio(p: &Measure, q: &Measure) -> Result<f64> {
    let pts: Vec<Vec<f64>> = if p.dim() == 1 {
        probe_grid(p, q)?.into_iter().map(|x| alloc::vec![x]).collect()
    } else {
        return Ok(match (&p.family, &q.family) {
            (Family::GaussianNd { .. }, Family::GaussianNd { .. }) => f64::INFINITY,
            _ => return Err(Error::unsupported("KL bound check in dimension > 1")),
        });
    };
    let mut worst: f64 = 0.0;
    for x in pts {
        let (lp, lq) = (p.log_density(&x), q.log_density(&x));
        if lp == f64::NEG_INFINITY && lq == f64::NEG_INFINITY {
            continue;
        }
        worst = worst.max((lp - lq).abs());
    }
    Ok(worst)
}

/// Builds the scores of one loss on one model.
#[derive(Clone, Debug)]
pub struct ScoreFactory {
    pub loss: LossSpec,
    /// Resolved ratio bound for `L_j`.
    pub r: Option<f64>,
    /// Enforce the family's boundedness preconditions.
    pub check: bool,
    /// `a2` for TV once the variance condition constant is known.
    pub tv_a2: Option<f64>,
}

impl ScoreFactory {
    pub fn new(loss: &LossSpec, model: &Model) -> Result<Self> {
        loss.validate()?;
        let r = match loss.kind {
            LossKind::Lj { j, r } => Some(model.resolve_ratio(j, r)?),
            _ => None,
        };
        Ok(ScoreFactory { loss: *loss, r, check: true, tv_a2: None })
    }

    /// Factory for measures outside any model (`L_j` needs an explicit `R`).
    pub fn for_loss(loss: &LossSpec) -> Result<Self> {
        loss.validate()?;
        let r = match loss.kind {
            LossKind::Lj { r: None, .. } => {
                return Err(Error::invalid("L_j scores need the ratio bound R"));
            }
            LossKind::Lj { r, .. } => r,
            _ => None,
        };
        Ok(ScoreFactory { loss: *loss, r, check: true, tv_a2: None })
    }

    pub fn unchecked(mut self) -> Self {
        self.check = false;
        self
    }

    pub fn constants(&self) -> FamilyConstants {
        match self.loss.kind {
            LossKind::Tv => FamilyConstants { a2: self.tv_a2, ..FamilyConstants::tv() },
            LossKind::Hellinger2 => FamilyConstants::hellinger(),
            LossKind::Kl { a } => FamilyConstants::kl(a),
            LossKind::Wasserstein1 => FamilyConstants::variational(1.0),
            LossKind::Lj { j, .. } => FamilyConstants::lj(j, self.r.unwrap_or(1.0)),
            LossKind::Linf { cells } => FamilyConstants::linf(cells),
        }
    }

    pub fn score(&self, p: &Measure, q: &Measure) -> Result<ScoreFunction> {
        let mut s = match self.loss.kind {
            LossKind::Tv => tv_score(p, q),
            LossKind::Hellinger2 => hellinger_score(p, q),
            LossKind::Kl { a } => kl_score_checked(p, q, a, self.check),
            LossKind::Wasserstein1 => wasserstein_score(p, q),
            LossKind::Lj { j, .. } => lj_score_checked(p, q, j, self.r.expect("resolved R"), self.check),
            LossKind::Linf { cells } => linf_score(p, q, cells),
        }?;
        s.constants = self.constants();
        Ok(s)
    }

    pub fn pair(&self, model: &Model, i: usize, j: usize) -> Result<ScoreFunction> {
        let (p, q) = match (model.measure(i), model.measure(j)) {
            (Some(p), Some(q)) => (p, q),
            _ => return Err(Error::unsupported("pair scores of tuple candidates are built per coordinate")),
        };
        self.score(p, q)
            .map(|s| s.with_pair(i, j))
            .map_err(|e| Error::Pair { i, j, source: Box::new(e) })
    }
}

/// One failed inequality of an assumption check.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    /// Probe index, or `usize::MAX` for pair-only checks.
    pub s: usize,
    pub p: usize,
    pub q: usize,
    pub what: String,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub triples: usize,
    /// Triples skipped because `ℓ(S,P) = ∞`.
    pub skipped: usize,
    /// Smallest `rhs - lhs` over checked triples.
    pub worst_slack: f64,
    pub worst_triple: Option<(usize, usize, usize)>,
    pub max_oscillation: f64,
    pub max_antisymmetry_error: f64,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    fn empty() -> Self {
        AssumptionReport {
            triples: 0,
            skipped: 0,
            worst_slack: f64::INFINITY,
            worst_triple: None,
            max_oscillation: 0.0,
            max_antisymmetry_error: 0.0,
            violations: Vec::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(v) => Err(Error::AssumptionViolated(format!(
                "{} fails for (S #{}, P #{}, Q #{}): {} > {}",
                v.what, v.s, v.p, v.q, v.lhs, v.rhs
            ))),
        }
    }
}

const CHECK_TOL: f64 = 1e-12;

/// Points carrying all the mass of `s`, with their masses, when scores are
/// constant on them (atoms, or cell midpoints of a partition).
fn exact_support(s: &Measure, score: &ScoreFunction) -> Result<Vec<(f64, f64)>> {
    if s.dim() != 1 {
        return Err(Error::unsupported("exact checks need 1-d probes"));
    }
    if s.ac_mass() == 0.0 {
        return Ok(s.atoms_list());
    }
    if let (Reference::Partition { cells, lo, hi }, false) =
        (s.reference(), matches!(score.data, DataPart::Witness { .. }))
    {
        if score.p.reference() == s.reference() && score.q.reference() == s.reference() {
            let probs = s.cell_probs().expect("partitioned measure");
            return Ok((0..cells)
                .map(|k| {
                    let mid = 0.5 * (crate::measures::cell_edge(lo, hi, cells, k)
                        + crate::measures::cell_edge(lo, hi, cells, k + 1));
                    (mid, probs[k])
                })
                .collect());
        }
    }
    Err(Error::unsupported("exact checks need discrete probes, or partitioned probes on the model's partition"))
}

fn moments(s: &Measure, score: &ScoreFunction) -> Result<(f64, f64)> {
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (x, w) in exact_support(s, score)? {
        let t = score.eval1(x);
        m1 += w * t;
        m2 += w * t * t;
    }
    Ok((m1, (m2 - m1 * m1).max(0.0)))
}

/// Points where oscillation and antisymmetry are inspected for a pair.
fn pair_points(p: &Measure, q: &Measure) -> Result<Vec<f64>> {
    probe_grid(p, q)
}

fn iid_measures(model: &Model) -> Result<Vec<&Measure>> {
    (0..model.len())
        .map(|i| model.measure(i).ok_or_else(|| Error::unsupported("assumption checks on tuple models")))
        .collect()
}

fn check_assumption(
    loss: &LossSpec,
    model: &Model,
    probes: &[Measure],
    second: bool,
    a2_override: Option<f64>,
) -> Result<AssumptionReport> {
    let ms = iid_measures(model)?;
    let mut factory = ScoreFactory::new(loss, model)?.unchecked();
    if second && matches!(loss.kind, LossKind::Tv) {
        factory.tv_a2 = Some(1.0 + check_cond3bis(model)?.a2_prime);
    }
    let mut rep = AssumptionReport::empty();
    for i in 0..ms.len() {
        for j in 0..ms.len() {
            if i == j {
                continue;
            }
            let t = factory.score(ms[i], ms[j])?;
            let back = factory.score(ms[j], ms[i])?;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for x in pair_points(ms[i], ms[j])? {
                let v = t.eval1(x);
                lo = lo.min(v);
                hi = hi.max(v);
                rep.max_antisymmetry_error = rep.max_antisymmetry_error.max((v + back.eval1(x)).abs());
            }
            rep.max_oscillation = rep.max_oscillation.max(hi - lo);
            if hi - lo > 1.0 + CHECK_TOL {
                rep.violations.push(Violation {
                    s: usize::MAX,
                    p: i,
                    q: j,
                    what: "oscillation".into(),
                    lhs: hi - lo,
                    rhs: 1.0,
                });
            }
            let k = t.constants;
            let a2 = match a2_override.or(k.a2) {
                Some(a2) => a2,
                None if second => return Err(Error::unsupported(format!("no a2 constant for {}", loss.name()))),
                None => 0.0,
            };
            for (si, s) in probes.iter().enumerate() {
                let lsp = losses::loss(loss, s, ms[i])?;
                let lsq = losses::loss(loss, s, ms[j])?;
                if !lsp.is_finite() {
                    rep.skipped += 1;
                    continue;
                }
                rep.triples += 1;
                let (mean, var) = moments(s, &t)?;
                let (lhs, rhs, what) = if second {
                    (var, a2 * (lsp + lsq), "variance bound")
                } else {
                    (mean, k.a0 * lsp - k.a1 * lsq, "mean bound")
                };
                let slack = rhs - lhs;
                if slack < rep.worst_slack {
                    rep.worst_slack = slack;
                    rep.worst_triple = Some((si, i, j));
                }
                if lhs > rhs + CHECK_TOL {
                    rep.violations.push(Violation { s: si, p: i, q: j, what: what.into(), lhs, rhs });
                }
            }
        }
    }
    Ok(rep)
}

/// Checks `E_S[t_(P,Q)] <= a0 ℓ(S,P) - a1 ℓ(S,Q)`, antisymmetry and
/// oscillation for every probe `S` and ordered pair of distinct candidates.
pub fn check_assumption1_exact(loss: &LossSpec, model: &Model, probes: &[Measure]) -> Result<AssumptionReport> {
    check_assumption(loss, model, probes, false, None)
}

/// Checks `Var_S[t_(P,Q)] <= a2 (ℓ(S,P) + ℓ(S,Q))`. TV uses `a2 = 1 + a2'`
/// from [`check_cond3bis`].
pub fn check_assumption2_exact(loss: &LossSpec, model: &Model, probes: &[Measure]) -> Result<AssumptionReport> {
    check_assumption(loss, model, probes, true, None)
}

/// As [`check_assumption2_exact`] with a caller-chosen `a2`.
pub fn check_assumption2_with(
    loss: &LossSpec,
    model: &Model,
    probes: &[Measure],
    a2: f64,
) -> Result<AssumptionReport> {
    check_assumption(loss, model, probes, true, Some(a2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cond3bis {
    /// Smallest `a2'` with `P(p<=q) ∧ Q(p>q) <= a2' ‖P-Q‖` on all model pairs.
    pub a2_prime: f64,
    pub a2: f64,
    pub pass: bool,
}

pub fn check_cond3bis(model: &Model) -> Result<Cond3bis> {
    let ms = iid_measures(model)?;
    let mut worst: f64 = 0.0;
    for i in 0..ms.len() {
        for j in (i + 1)..ms.len() {
            let s = set_probabilities(ms[i], ms[j])?;
            let tv = crate::measures::tv_distance(ms[i], ms[j], crate::measures::Method::Auto)?;
            // both orders: (P,Q) uses P(p<=q) ∧ Q(p>q), (Q,P) uses Q(q<=p) ∧ P(q>p)
            let forward = (1.0 - s.p_pgt).min(s.q_pgt);
            let backward = (1.0 - s.q_plt).min(s.p_plt);
            let num = forward.max(backward);
            if num <= 1e-15 {
                continue;
            }
            worst = worst.max(if tv > 0.0 { num / tv } else { f64::INFINITY });
        }
    }
    Ok(Cond3bis { a2_prime: worst, a2: 1.0 + worst, pass: worst.is_finite() })
}

/// `c1 = (a1/2) / [2(1 + log 4) + 4 a1/a2 + 16 a2 log 2 / a1]`.
pub fn c1_constant(a1: f64, a2: f64) -> Result<f64> {
    if !(a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite()) {
        return Err(Error::invalid(format!("c1 needs positive finite a1, a2; got {a1}, {a2}")));
    }
    let den = 2.0 * (1.0 + 2.0 * LN_2) + 4.0 * a1 / a2 + 16.0 * a2 * LN_2 / a1;
    Ok(0.5 * a1 / den)
}
