//! Seeded Monte Carlo experiments.
//!
//! Replication `r` of a scenario with seed `s` draws from ChaCha8 seeded with
//! `s` on stream `r`, so records are identical for any thread count.

use std::sync::Arc;
use std::time::Instant;

use ellest_core::estimator::{bounds, PairCache};
use ellest_core::losses::{self, LossKind};
use ellest_core::measures::{empirical_measure, sample_with, Family, Measure, Sample};
use ellest_core::models::{Base, ModelConfig};
use ellest_core::robust_tests::{self, Decision};
use ellest_core::testfam::{check_cond3bis, ScoreFactory};
use ellest_core::{Candidate, Error, LossSpec, Model, Result};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::par;

/// Version of every CSV column set and JSON field name written by the harness.
pub const FORMAT_VERSION: u32 = 1;

/// RNG of replication `rep`.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alphas {
    Common(f64),
    PerObservation(Vec<f64>),
}

/// Distribution of the observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Truth {
    Iid {
        measure: Measure,
    },
    /// `X_i ~ (1 - α_i) base + α_i contaminant`; the contaminant defaults to
    /// a point mass far outside the effective support of `base`.
    Contaminated {
        base: Measure,
        alphas: Alphas,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        contaminant: Option<Measure>,
    },
    Tuples {
        measures: Vec<Measure>,
    },
    /// `X_i ~ base(· - θ_i)` with `θ_i = Σ_k c_k (i/n)^k`, `i = 1..n`.
    Regression {
        base: Base,
        coefficients: Vec<f64>,
    },
}

/// Per-observation truth, collapsed when all marginals agree.
#[derive(Clone, Debug)]
pub enum Marginals {
    Common(Measure),
    PerObservation(Vec<Measure>),
}

impl Marginals {
    pub fn draw(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Sample> {
        match self {
            Marginals::Common(m) => sample_with(m, n, rng),
            Marginals::PerObservation(ms) => {
                let mut data = Vec::with_capacity(n * ms[0].dim());
                for m in ms {
                    m.draw(rng, &mut data)?;
                }
                Sample::new(ms[0].dim(), data)
            }
        }
    }

    /// `n⁻¹ Σ_i ℓ(P*_i, Q_i)`.
    pub fn mean_loss(&self, loss: &LossSpec, c: &Candidate) -> Result<f64> {
        match (self, c) {
            (Marginals::Common(m), Candidate::Iid(q)) => losses::loss(loss, m, q),
            (Marginals::PerObservation(ms), Candidate::Iid(q)) => {
                // contaminated truths usually repeat a handful of marginals
                let mut seen: Vec<(&Measure, f64)> = Vec::new();
                let mut total = 0.0;
                for m in ms {
                    let v = match seen.iter().find(|(s, _)| *s == m) {
                        Some(&(_, v)) => v,
                        None => {
                            let v = losses::loss(loss, m, q)?;
                            if seen.len() < 64 {
                                seen.push((m, v));
                            }
                            v
                        }
                    };
                    total += v;
                }
                Ok(total / ms.len() as f64)
            }
            (Marginals::PerObservation(ms), Candidate::Tuple(qs)) => {
                let qs: Vec<&Measure> = qs.iter().map(|q| q.as_ref()).collect();
                Ok(losses::aggregate_loss_tuple(loss, ms, &qs)? / ms.len() as f64)
            }
            (Marginals::Common(m), Candidate::Tuple(qs)) => {
                let mut total = 0.0;
                for q in qs {
                    total += losses::loss(loss, m, q)?;
                }
                Ok(total / qs.len() as f64)
            }
        }
    }
}

fn default_contaminant(base: &Measure) -> Result<Measure> {
    match &base.family {
        Family::GaussianNd { mean } => Measure::gaussian_nd(mean.iter().map(|m| m + 1e3).collect()),
        _ if base.dim() == 1 => {
            let (_, hi) = base.support_hull();
            let top = if hi.is_finite() { hi } else { base.quantile(1.0 - 1e-12)? };
            Ok(Measure::dirac(top + 1e3 * base.scale().max(1.0))?.with_tag("far-point"))
        }
        _ => Err(Error::invalid("no default contaminant for this base measure")),
    }
}

impl Truth {
    pub fn marginals(&self, n: usize) -> Result<Marginals> {
        match self {
            Truth::Iid { measure } => {
                measure.validate()?;
                Ok(Marginals::Common(measure.clone()))
            }
            Truth::Contaminated { base, alphas, contaminant } => {
                base.validate()?;
                let r = match contaminant {
                    Some(r) => {
                        r.validate()?;
                        r.clone()
                    }
                    None => default_contaminant(base)?,
                };
                let check = |a: f64| {
                    if (0.0..=1.0).contains(&a) {
                        Ok(a)
                    } else {
                        Err(Error::invalid(format!("contamination level {a} is outside [0, 1]")))
                    }
                };
                let mix = |a: f64| -> Result<Measure> {
                    if a == 0.0 {
                        Ok(base.clone())
                    } else {
                        Measure::contaminated(base, check(a)?, &r)
                    }
                };
                match alphas {
                    Alphas::Common(a) => Ok(Marginals::Common(mix(check(*a)?)?)),
                    Alphas::PerObservation(v) => {
                        if v.len() != n {
                            return Err(Error::invalid(format!("{} contamination levels for n = {n}", v.len())));
                        }
                        Ok(Marginals::PerObservation(v.iter().map(|&a| mix(a)).collect::<Result<_>>()?))
                    }
                }
            }
            Truth::Tuples { measures } => {
                if measures.len() != n {
                    return Err(Error::invalid(format!("{} truth marginals for n = {n}", measures.len())));
                }
                for m in measures {
                    m.validate()?;
                }
                Ok(Marginals::PerObservation(measures.clone()))
            }
            Truth::Regression { base, coefficients } => {
                let ms = (1..=n)
                    .map(|i| {
                        let t = i as f64 / n as f64;
                        let theta = coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c);
                        base.at(theta)
                    })
                    .collect::<Result<_>>()?;
                Ok(Marginals::PerObservation(ms))
            }
        }
    }

    /// Location of the uncontaminated truth, when it has one.
    pub fn location(&self) -> Option<Vec<f64>> {
        match self {
            Truth::Iid { measure } => location(measure),
            Truth::Contaminated { base, .. } => location(base),
            _ => None,
        }
    }
}

/// Location parameter of translation families.
pub fn location(m: &Measure) -> Option<Vec<f64>> {
    match &m.family {
        Family::Gaussian { mean, .. } => Some(vec![*mean]),
        Family::GaussianNd { mean } => Some(mean.clone()),
        Family::Cauchy { loc, .. } => Some(vec![*loc]),
        Family::Uniform { lo, .. } => Some(vec![*lo]),
        Family::Power { shift, .. } => Some(vec![*shift]),
        _ => None,
    }
}

fn location_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Candidate family: explicit measures or a model builder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Measures { measures: Vec<Measure> },
    Config(ModelConfig),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        match self {
            ModelSpec::Measures { measures } => {
                for m in measures {
                    m.validate()?;
                }
                Model::from_measures(measures.clone())
            }
            ModelSpec::Config(c) => c.build(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub truth: Truth,
    pub model: ModelSpec,
    pub loss: LossSpec,
    pub n: usize,
    pub epsilon: f64,
    pub replications: usize,
    pub seed: u64,
    /// Add the empirical measure of each sample to the model.
    #[serde(default)]
    pub include_empirical: bool,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.replications == 0 {
            return Err(Error::invalid("n and replications must be positive"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        self.loss.validate()
    }

    /// First 16 hex digits of the SHA-256 of the scenario's JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("scenarios serialize");
        hex::encode(Sha256::digest(bytes))[..16].to_string()
    }

    pub fn with_n(&self, n: usize) -> Scenario {
        Scenario { n, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub replication: usize,
    pub chosen: usize,
    pub label: String,
    /// `T(X, P̂)`.
    pub sup_stat: f64,
    pub minimizer_count: usize,
    /// `n⁻¹ Σ_i ℓ(P*_i, P̂_i)`.
    pub loss: f64,
    pub location_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub q10: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q90: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Stats {
            count: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            min: v[0],
            q10: quantile(&v, 0.1),
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            q90: quantile(&v, 0.9),
            max: v[v.len() - 1],
        })
    }
}

/// Linearly interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, frac) = (h.floor() as usize, h - h.floor());
    if lo + 1 < sorted.len() {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    } else {
        sorted[lo]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub loss: Stats,
    pub location_error: Option<Stats>,
    /// `min_k n⁻¹ Σ_i ℓ(P*_i, P_k)` over the fixed model.
    pub min_model_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub format_version: u32,
    pub digest: String,
    pub scenario: Scenario,
    pub rows: Vec<Replication>,
    pub summary: Summary,
    /// Wall-clock time per replication; kept out of the deterministic files.
    #[serde(skip)]
    pub runtimes_ms: Vec<f64>,
}

impl ExperimentRecord {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }
}

struct RepOutcome {
    chosen: usize,
    sup: f64,
    set_len: usize,
    /// Loss of the empirical candidate when it was chosen.
    empirical_loss: Option<f64>,
}

pub fn run_estimation(s: &Scenario) -> Result<ExperimentRecord> {
    s.validate()?;
    let model = s.model.build()?;
    let marg = s.truth.marginals(s.n)?;
    let cache = if model.is_iid() { Some(PairCache::build(&model, &s.loss)?) } else { None };
    let m = model.len();

    let outcomes: Vec<(RepOutcome, f64)> = (0..s.replications)
        .into_par_iter()
        .map(|r| -> Result<(RepOutcome, f64)> {
            let t0 = Instant::now();
            let mut rng = replication_rng(s.seed, r);
            let x = marg.draw(s.n, &mut rng)?;
            let out = if s.include_empirical {
                let emp = empirical_measure(&x)?;
                let mut with_emp = model.clone();
                with_emp.push(Candidate::Iid(Arc::new(emp.clone())))?;
                let sup = par::sup_statistics(&x, &with_emp, &s.loss, None)?;
                let (chosen, set) = par::select(&sup, s.epsilon);
                let empirical_loss = if chosen == m {
                    Some(marg.mean_loss(&s.loss, &Candidate::Iid(Arc::new(emp)))?)
                } else {
                    None
                };
                RepOutcome { chosen, sup: sup[chosen], set_len: set.len(), empirical_loss }
            } else {
                let sup = par::sup_statistics(&x, &model, &s.loss, cache.as_ref())?;
                let (chosen, set) = par::select(&sup, s.epsilon);
                RepOutcome { chosen, sup: sup[chosen], set_len: set.len(), empirical_loss: None }
            };
            Ok((out, t0.elapsed().as_secs_f64() * 1e3))
        })
        .collect::<Result<_>>()?;

    // losses of model candidates do not depend on the sample
    let cand_losses: Vec<f64> =
        (0..m).into_par_iter().map(|k| marg.mean_loss(&s.loss, model.candidate(k))).collect::<Result<_>>()?;
    let min_model_loss = cand_losses.iter().copied().fold(f64::INFINITY, f64::min);

    let labels = model.labels();
    let truth_loc = s.truth.location();
    let mut rows = Vec::with_capacity(outcomes.len());
    let mut runtimes_ms = Vec::with_capacity(outcomes.len());
    for (r, (o, ms)) in outcomes.into_iter().enumerate() {
        let (loss, label, loc) = match o.empirical_loss {
            Some(l) => (l, "empirical".to_string(), None),
            None => {
                let c = model.candidate(o.chosen);
                let loc = match (c, &truth_loc) {
                    (Candidate::Iid(q), Some(t)) => location(q).map(|l| location_error(&l, t)),
                    _ => None,
                };
                (cand_losses[o.chosen], labels[o.chosen].clone(), loc)
            }
        };
        rows.push(Replication {
            replication: r,
            chosen: o.chosen,
            label,
            sup_stat: o.sup,
            minimizer_count: o.set_len,
            loss,
            location_error: loc,
        });
        runtimes_ms.push(ms);
    }
    let losses: Vec<f64> = rows.iter().map(|r| r.loss).collect();
    let locs: Vec<f64> = rows.iter().filter_map(|r| r.location_error).collect();
    let summary = Summary {
        loss: Stats::of(&losses).expect("at least one replication"),
        location_error: Stats::of(&locs),
        min_model_loss,
    };
    Ok(ExperimentRecord { format_version: FORMAT_VERSION, digest: s.digest(), scenario: s.clone(), rows, summary, runtimes_ms })
}

/// Deviation bound whose exceedance frequency is tabulated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bound", rename_all = "kebab-case")]
pub enum DeviationBound {
    /// `(2/√n)(1 + √(2ξ) + ε/√n)` plus five times the approximation term.
    Wasserstein,
    /// VC bound for TV; the dimension defaults to the model's.
    TvVc {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vc_dimension: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub xi: f64,
    pub bound: f64,
    pub frequency: f64,
    /// `1 - e^{-ξ}`.
    pub target: f64,
    /// `target - 3 √(target (1 - target) / reps)`.
    pub tolerance: f64,
    pub pass: bool,
}

pub fn deviation_frequency(s: &Scenario, xis: &[f64], bound: &DeviationBound) -> Result<(ExperimentRecord, Vec<DeviationRow>)> {
    let rec = run_estimation(s)?;
    let rows = deviation_table(&rec, xis, bound)?;
    Ok((rec, rows))
}

pub fn deviation_table(rec: &ExperimentRecord, xis: &[f64], bound: &DeviationBound) -> Result<Vec<DeviationRow>> {
    let s = &rec.scenario;
    let approx = rec.summary.min_model_loss;
    let v = match bound {
        DeviationBound::TvVc { vc_dimension: Some(v) } => Some(*v),
        DeviationBound::TvVc { vc_dimension: None } => Some(
            s.model
                .build()?
                .meta
                .vc_dimension
                .ok_or_else(|| Error::invalid("the model has no VC dimension; set vc_dimension"))?,
        ),
        DeviationBound::Wasserstein => None,
    };
    let reps = rec.rows.len() as f64;
    xis.iter()
        .map(|&xi| {
            let b = match v {
                Some(v) => bounds::vc_bound_tv(v, s.n, xi, s.epsilon, approx)?,
                None => bounds::wasserstein_bound(s.n, xi, s.epsilon, approx)?,
            };
            let hits = rec.rows.iter().filter(|r| r.loss <= b).count() as f64;
            let frequency = hits / reps;
            let target = 1.0 - (-xi).exp();
            let tolerance = target - 3.0 * (target * (1.0 - target) / reps).sqrt();
            Ok(DeviationRow { xi, bound: b, frequency, target, tolerance, pass: frequency >= tolerance })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub median_loss: f64,
    pub mean_loss: f64,
    pub replications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub points: Vec<CurvePoint>,
    /// Least-squares slope of `log median loss` against `log n`.
    pub slope: f64,
}

pub fn rate_curve(s: &Scenario, ns: &[usize]) -> Result<(Vec<ExperimentRecord>, RateCurve)> {
    if ns.len() < 2 {
        return Err(Error::invalid("a rate curve needs at least two sample sizes"));
    }
    let mut records = Vec::with_capacity(ns.len());
    let mut points = Vec::with_capacity(ns.len());
    for &n in ns {
        let rec = run_estimation(&s.with_n(n))?;
        points.push(CurvePoint {
            n,
            median_loss: rec.summary.loss.median,
            mean_loss: rec.summary.loss.mean,
            replications: rec.rows.len(),
        });
        records.push(rec);
    }
    let slope = loglog_slope(&points)?;
    Ok((records, RateCurve { points, slope }))
}

pub fn loglog_slope(points: &[CurvePoint]) -> Result<f64> {
    if points.iter().any(|p| !(p.median_loss > 0.0)) {
        return Err(Error::NonConvergence("a median loss is zero; the log-log fit is undefined".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.median_loss.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Which candidate the bounds declare closer to the truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Closer {
    P,
    Q,
    /// `a1/a0 <= ℓ(P*,P)/ℓ(P*,Q) <= a0/a1`: decisions are recorded, not scored.
    Undetermined,
    /// `P = Q`: every decision is a tie.
    Identical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestErrorReport {
    pub format_version: u32,
    pub loss: LossSpec,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub loss_star_p: f64,
    pub loss_star_q: f64,
    pub closer: Closer,
    /// `γ` for the closer candidate (1 when undetermined).
    pub gamma: f64,
    pub choose_p: usize,
    pub choose_q: usize,
    pub ties: usize,
    /// Wrong decisions, ties included; `None` when the truth does not single out a candidate.
    pub empirical_error: Option<f64>,
    /// Binomial standard error of `bound_hoeffding`.
    pub sigma: f64,
    pub bound_hoeffding: f64,
    pub bound_bernstein: Option<f64>,
    pub bound_hellinger: Option<f64>,
    pub bound_lj: Option<f64>,
    /// `empirical_error <= bound + 3σ` for every reported bound.
    pub pass: Option<bool>,
    #[serde(skip)]
    pub statistics: Vec<f64>,
}

/// Error frequency of `Φ_(P,Q)` under i.i.d. draws from `truth`.
pub fn test_error_mc(
    truth: &Measure,
    p: &Measure,
    q: &Measure,
    loss: &LossSpec,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<TestErrorReport> {
    if n == 0 || reps == 0 {
        return Err(Error::invalid("n and replications must be positive"));
    }
    let mut loss = *loss;
    if let LossKind::Lj { j, r: None } = loss.kind {
        let norm = ellest_core::measures::lj_distance(p, q, j)?;
        let r = if norm > 0.0 { sup_gap(p, q)? / norm } else { 1.0 };
        loss = LossKind::Lj { j, r: Some(r) }.into();
    }
    let pair = Model::from_measures(vec![p.clone(), q.clone()])?;
    let mut factory = ScoreFactory::new(&loss, &pair)?;
    if matches!(loss.kind, LossKind::Tv) {
        factory.tv_a2 = Some(check_cond3bis(&pair)?.a2);
    }
    let k = factory.constants();
    let score = factory.score(p, q)?;

    let stats: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = replication_rng(seed, r);
            let x = sample_with(truth, n, &mut rng)?;
            Ok(x.points().map(|pt| score.eval(pt)).sum())
        })
        .collect::<Result<_>>()?;
    let mut tally = [0usize; 3];
    for &t in &stats {
        tally[match Decision::from_statistic(t) {
            Decision::ChooseP => 0,
            Decision::ChooseQ => 1,
            Decision::Tie => 2,
        }] += 1;
    }

    let lp = losses::loss(&loss, truth, p)?;
    let lq = losses::loss(&loss, truth, q)?;
    let nf = n as f64;
    let gp = robust_tests::gamma(k.a0, k.a1, lp, lq);
    let gq = robust_tests::gamma(k.a0, k.a1, lq, lp);
    let (closer, gamma, wrong, near, far) = if p == q {
        (Closer::Identical, 1.0, None, lp, lq)
    } else if gp < 1.0 {
        (Closer::P, gp, Some(tally[1] + tally[2]), lp, lq)
    } else if gq < 1.0 {
        (Closer::Q, gq, Some(tally[0] + tally[2]), lq, lp)
    } else {
        (Closer::Undetermined, 1.0, None, lp, lq)
    };
    let scored = matches!(closer, Closer::P | Closer::Q);
    let g = if scored { gamma } else { 1.0 };
    let bound_hoeffding = robust_tests::hoeffding_bound(k.a1, g, nf * far, n)?;
    let bound_bernstein = match k.a2 {
        Some(a2) if scored => Some(robust_tests::bernstein_bound(k.a0, k.a1, a2, g, nf * far)?),
        _ => None,
    };
    let bound_hellinger = match loss.kind {
        LossKind::Hellinger2 if scored => robust_tests::hellinger_test_bound(near, far, n)?.bound.or(Some(1.0)),
        _ => None,
    };
    let bound_lj = match loss.kind {
        LossKind::Lj { j, r: Some(r) } if scored => {
            let lg = if far > 0.0 { 3.0 * near / far } else { f64::INFINITY };
            Some(robust_tests::lj_test_bound(j, r, lg, far, n)?)
        }
        _ => None,
    };
    let empirical_error = wrong.map(|w| w as f64 / reps as f64);
    let sigma = (bound_hoeffding * (1.0 - bound_hoeffding) / reps as f64).sqrt();
    let pass = empirical_error.map(|e| {
        [Some(bound_hoeffding), bound_bernstein, bound_hellinger, bound_lj]
            .into_iter()
            .flatten()
            .all(|b| e <= b + 3.0 * (b * (1.0 - b) / reps as f64).sqrt())
    });
    Ok(TestErrorReport {
        format_version: FORMAT_VERSION,
        loss,
        n,
        replications: reps,
        seed,
        loss_star_p: lp,
        loss_star_q: lq,
        closer,
        gamma,
        choose_p: tally[0],
        choose_q: tally[1],
        ties: tally[2],
        empirical_error,
        sigma,
        bound_hoeffding,
        bound_bernstein,
        bound_hellinger,
        bound_lj,
        pass,
        statistics: stats,
    })
}

fn sup_gap(p: &Measure, q: &Measure) -> Result<f64> {
    let grid = ellest_core::measures::probe_grid(p, q)?;
    Ok(grid.iter().map(|&x| (p.density1(x) - q.density1(x)).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_translation(n: usize, reps: usize) -> Scenario {
        Scenario {
            truth: Truth::Iid { measure: Measure::uniform(0.0, 1.0).unwrap() },
            model: ModelSpec::Config(ModelConfig::TranslationGrid {
                base: Base::Uniform { width: 1.0 },
                lo: -0.1,
                hi: 0.1,
                step: 0.01,
            }),
            loss: LossSpec::tv(),
            n,
            epsilon: 1.0,
            replications: reps,
            seed: 7,
            include_empirical: false,
        }
    }

    #[test]
    fn records_are_deterministic_and_bounded_below() {
        let s = uniform_translation(50, 20);
        let a = run_estimation(&s).unwrap();
        let b = run_estimation(&s).unwrap();
        assert_eq!((&a.rows, &a.summary), (&b.rows, &b.summary));
        assert_eq!(a.rows.len(), 20);
        assert!(a.rows.iter().all(|r| r.loss >= a.summary.min_model_loss));
        assert_eq!(a.summary.min_model_loss, 0.0);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        assert_eq!(pool.install(|| run_estimation(&s)).unwrap().rows, a.rows);
        assert_eq!(s.digest().len(), 16);
        assert_ne!(s.digest(), s.with_n(51).digest());
    }

    #[test]
    fn single_candidate_always_chosen() {
        let mut s = uniform_translation(30, 10);
        s.model = ModelSpec::Measures { measures: vec![Measure::uniform(0.0, 1.0).unwrap()] };
        let rec = run_estimation(&s).unwrap();
        assert!(rec.rows.iter().all(|r| r.chosen == 0 && r.loss == 0.0));
    }

    #[test]
    fn empirical_measure_wins_under_wasserstein() {
        let s = Scenario {
            truth: Truth::Iid { measure: Measure::uniform(0.0, 1.0).unwrap() },
            model: ModelSpec::Measures { measures: vec![Measure::uniform(0.0, 1.0).unwrap(), Measure::power(0.5, 0.0).unwrap()] },
            loss: LossSpec::wasserstein(),
            n: 20,
            epsilon: 1e-9,
            replications: 10,
            seed: 1,
            include_empirical: true,
        };
        let rec = run_estimation(&s).unwrap();
        for r in &rec.rows {
            assert_eq!(r.sup_stat, 0.0);
        }
    }

    #[test]
    fn contaminated_draws_and_locations() {
        let truth = Truth::Contaminated {
            base: Measure::gaussian(0.0, 1.0).unwrap(),
            alphas: Alphas::Common(0.5),
            contaminant: None,
        };
        let marg = truth.marginals(10).unwrap();
        let x = marg.draw(200, &mut replication_rng(1, 0)).unwrap();
        let far = x.as_flat().iter().filter(|&&v| v > 100.0).count();
        assert!(far > 60 && far < 140, "{far}");
        assert_eq!(truth.location(), Some(vec![0.0]));
        let bad = Truth::Contaminated { base: Measure::gaussian(0.0, 1.0).unwrap(), alphas: Alphas::Common(1.5), contaminant: None };
        assert!(bad.marginals(3).is_err());
        let per = Truth::Contaminated {
            base: Measure::gaussian(0.0, 1.0).unwrap(),
            alphas: Alphas::PerObservation(vec![0.0, 0.1]),
            contaminant: None,
        };
        assert!(per.marginals(3).is_err());
        assert!(matches!(per.marginals(2).unwrap(), Marginals::PerObservation(_)));
    }

    #[test]
    fn regression_truth_matches_polynomial_net() {
        let t = Truth::Regression { base: Base::Cauchy { scale: 1.0 }, coefficients: vec![1.0, 2.0] };
        match t.marginals(4).unwrap() {
            Marginals::PerObservation(ms) => assert_eq!(location(&ms[1]), Some(vec![2.0])),
            _ => panic!(),
        }
    }

    #[test]
    fn quantiles_and_slope() {
        let v = [4.0, 1.0, 3.0, 2.0];
        let s = Stats::of(&v).unwrap();
        assert_eq!((s.median, s.min, s.max, s.mean), (2.5, 1.0, 4.0, 2.5));
        let pts: Vec<CurvePoint> = [100usize, 400, 1600]
            .iter()
            .map(|&n| CurvePoint { n, median_loss: 3.0 / n as f64, mean_loss: 0.0, replications: 1 })
            .collect();
        assert!((loglog_slope(&pts).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn test_error_identical_and_undetermined() {
        let p = Measure::gaussian(0.0, 1.0).unwrap();
        let r = test_error_mc(&p, &p, &p, &LossSpec::tv(), 10, 5, 1).unwrap();
        assert_eq!((r.closer, r.ties, r.empirical_error), (Closer::Identical, 5, None));
        let q = Measure::gaussian(1.0, 1.0).unwrap();
        let mid = Measure::gaussian(0.5, 1.0).unwrap();
        let u = test_error_mc(&mid, &p, &q, &LossSpec::tv(), 10, 5, 1).unwrap();
        assert_eq!((u.closer, u.bound_hoeffding, u.empirical_error), (Closer::Undetermined, 1.0, None));
        let ok = test_error_mc(&p, &p, &q, &LossSpec::tv(), 50, 200, 2).unwrap();
        assert_eq!(ok.closer, Closer::P);
        assert_eq!(ok.gamma, 0.0);
        assert_eq!(ok.pass, Some(true));
    }
}
