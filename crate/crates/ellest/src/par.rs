//! Parallel pairwise statistics. Entries are computed independently and
//! collected in pair order, so results do not depend on the thread count.

use ellest_core::estimator::{upper_pairs, PairCache, PairwiseEngine};
use ellest_core::{EstimateReport, LossSpec, Model, PairwiseMatrix, Result, Sample};
use rayon::prelude::*;

/// Full antisymmetric matrix, computed over the upper triangle in parallel.
pub fn pairwise_statistic(
    sample: &Sample,
    model: &Model,
    loss: &LossSpec,
    cache: Option<&PairCache>,
) -> Result<PairwiseMatrix> {
    let engine = engine(sample, model, loss, cache)?;
    let pairs: Vec<(usize, usize)> = upper_pairs(model.len()).collect();
    let entries = pairs
        .par_iter()
        .map(|&(i, j)| engine.entry(i, j).map(|(v, c)| (i, j, v, c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PairwiseMatrix::from_upper(model.len(), entries))
}

pub fn ell_estimate(
    sample: &Sample,
    model: &Model,
    loss: &LossSpec,
    epsilon: f64,
    cache: Option<&PairCache>,
) -> Result<EstimateReport> {
    let m = pairwise_statistic(sample, model, loss, cache)?;
    EstimateReport::from_matrix(m, epsilon, model.labels())
}

/// Sup-statistics `max_j T(X, P_i, P_j)` without materializing the matrix.
/// Rows are split across threads; each row is computed in a fixed order.
pub fn sup_statistics(sample: &Sample, model: &Model, loss: &LossSpec, cache: Option<&PairCache>) -> Result<Vec<f64>> {
    let engine = engine(sample, model, loss, cache)?;
    (0..model.len())
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for j in 0..model.len() {
                if j != i {
                    best = best.max(engine.entry(i, j)?.0);
                }
            }
            Ok(best)
        })
        .collect()
}

fn engine<'a>(
    sample: &'a Sample,
    model: &'a Model,
    loss: &LossSpec,
    cache: Option<&'a PairCache>,
) -> Result<PairwiseEngine<'a>> {
    match cache {
        Some(c) => PairwiseEngine::with_cache(sample, model, loss, c),
        None => PairwiseEngine::new(sample, model, loss),
    }
}

/// Lowest index of the minimal sup-statistic and the ε-minimizer set.
pub fn select(sup: &[f64], epsilon: f64) -> (usize, Vec<usize>) {
    let (chosen, best) =
        sup.iter().copied().enumerate().fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) });
    let set = sup.iter().enumerate().filter(|(_, &v)| v <= best + epsilon).map(|(i, _)| i).collect();
    (chosen, set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ellest_core::measures::{sample_from, Measure};
    use ellest_core::models::{Base, ModelConfig};

    #[test]
    fn parallel_matches_sequential() {
        let model = ModelConfig::TranslationGrid { base: Base::Gaussian { scale: 1.0 }, lo: -1.0, hi: 1.0, step: 0.25 }
            .build()
            .unwrap();
        let x = sample_from(&Measure::gaussian(0.2, 1.0).unwrap(), 40, 1).unwrap();
        for loss in [LossSpec::tv(), LossSpec::hellinger()] {
            let seq = ellest_core::pairwise_statistic(&x, &model, &loss).unwrap();
            let par = pairwise_statistic(&x, &model, &loss, None).unwrap();
            assert_eq!(seq, par);
            let cache = PairCache::build(&model, &loss).unwrap();
            let sup = sup_statistics(&x, &model, &loss, Some(&cache)).unwrap();
            let rep = EstimateReport::from_matrix(seq, 0.5, model.labels()).unwrap();
            assert_eq!(sup, rep.sup_stat);
            let (chosen, set) = select(&sup, 0.5);
            assert_eq!((chosen, set), (rep.chosen, rep.minimizer_set));
        }
    }
}
