//! Loss catalogue and dispatch to the distance computations.

use alloc::format;

use crate::error::{Error, Result};
use crate::measures::{self, Measure, Method, Reference};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case"))]
pub enum LossKind {
    Tv,
    Hellinger2,
    /// KL divergence on a model whose log-likelihood ratios are bounded by `a`.
    Kl { a: f64 },
    Wasserstein1,
    /// `‖p - q‖_{μ,j}`; `r` bounds `‖p-q‖_∞ / ‖p-q‖_{μ,j}` on the model and
    /// defaults to `D^{1/j}` on partitioned models.
    Lj {
        j: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        r: Option<f64>,
    },
    /// `‖p - q‖_∞` over a uniform partition of `cells` cells.
    Linf { cells: usize },
}

/// A loss together with its parameters. The reference measure is the one
/// carried by the measures the loss is applied to.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossSpec {
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub kind: LossKind,
}

impl From<LossKind> for LossSpec {
    fn from(kind: LossKind) -> Self {
        LossSpec { kind }
    }
}

impl LossSpec {
    pub fn tv() -> Self {
        LossKind::Tv.into()
    }

    pub fn hellinger() -> Self {
        LossKind::Hellinger2.into()
    }

    pub fn kl(a: f64) -> Self {
        LossKind::Kl { a }.into()
    }

    pub fn wasserstein() -> Self {
        LossKind::Wasserstein1.into()
    }

    pub fn lj(j: f64, r: Option<f64>) -> Self {
        LossKind::Lj { j, r }.into()
    }

    pub fn linf(cells: usize) -> Self {
        LossKind::Linf { cells }.into()
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LossKind::Tv => "tv",
            LossKind::Hellinger2 => "hellinger2",
            LossKind::Kl { .. } => "kl",
            LossKind::Wasserstein1 => "wasserstein1",
            LossKind::Lj { .. } => "lj",
            LossKind::Linf { .. } => "linf",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            LossKind::Kl { a } if !(a > 0.0 && a.is_finite()) => {
                Err(Error::invalid(format!("KL bound a must be positive and finite, got {a}")))
            }
            LossKind::Lj { j, r } => {
                if !(j > 1.0 && j.is_finite()) {
                    return Err(Error::invalid(format!("L_j needs 1 < j < ∞, got {j}")));
                }
                match r {
                    Some(r) if !(r > 0.0 && r.is_finite()) => {
                        Err(Error::invalid(format!("L_j ratio bound R must be positive, got {r}")))
                    }
                    _ => Ok(()),
                }
            }
            LossKind::Linf { cells } if cells < 2 => {
                Err(Error::invalid(format!("L_∞ needs a partition of at least 2 cells, got {cells}")))
            }
            _ => Ok(()),
        }
    }
}

/// Checks that `m` lives on a uniform partition of `cells` cells: either a
/// partitioned measure or a discrete one with equal weights `1/cells`.
pub(crate) fn require_partition(m: &Measure, cells: usize) -> Result<()> {
    match m.reference() {
        Reference::Partition { cells: d, .. } if d == cells => Ok(()),
        Reference::Discrete { points, weights }
            if points.len() == cells && weights.iter().all(|w| (w * cells as f64 - 1.0).abs() <= 1e-12) =>
        {
            Ok(())
        }
        _ => Err(Error::IncompatibleReference(format!(
            "{} is not on a uniform partition of {cells} cells",
            m.tag
        ))),
    }
}

/// `ℓ(S, Q)`.
pub fn loss(spec: &LossSpec, s: &Measure, q: &Measure) -> Result<f64> {
    spec.validate()?;
    match spec.kind {
        LossKind::Tv => measures::tv_distance(s, q, Method::Auto),
        LossKind::Hellinger2 => measures::hellinger_sq(s, q),
        LossKind::Kl { .. } => measures::kl_divergence(s, q),
        LossKind::Wasserstein1 => measures::wasserstein1(s, q),
        LossKind::Lj { j, .. } => measures::lj_distance(s, q, j),
        LossKind::Linf { cells } => {
            require_partition(s, cells)?;
            require_partition(q, cells)?;
            measures::lj_distance(s, q, f64::INFINITY)
        }
    }
}

/// `Σ_i ℓ(P_i, Q)` over the marginals of a product measure.
pub fn aggregate_loss(spec: &LossSpec, truth: &[Measure], q: &Measure) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Empty("aggregate loss over zero marginals".into()));
    }
    let mut total = 0.0;
    for p in truth {
        total += loss(spec, p, q)?;
    }
    Ok(total)
}

/// Loss against per-coordinate candidates `Σ_i ℓ(P_i, Q_i)`.
pub fn aggregate_loss_tuple(spec: &LossSpec, truth: &[Measure], q: &[&Measure]) -> Result<f64> {
    if truth.is_empty() || truth.len() != q.len() {
        return Err(Error::invalid("truth and candidate tuples must have the same positive length"));
    }
    let mut total = 0.0;
    for (p, qi) in truth.iter().zip(q) {
        total += loss(spec, p, qi)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn dispatch_examples() {
        let p = Measure::gaussian(0.0, 1.0).unwrap();
        let q = Measure::gaussian(2.0, 1.0).unwrap();
        let v = loss(&LossSpec::tv(), &p, &q).unwrap();
        assert!((v - 0.682_689_492_137_085_9).abs() < 1e-12);
        assert_eq!(loss(&LossSpec::hellinger(), &p, &p).unwrap(), 0.0);
        let a = Measure::cells(0.0, 1.0, vec![1.6, 0.4]).unwrap();
        let b = Measure::cells(0.0, 1.0, vec![0.4, 1.6]).unwrap();
        assert!((loss(&LossSpec::lj(2.0, None), &a, &b).unwrap() - 1.2).abs() < 1e-15);
        assert!((loss(&LossSpec::linf(2), &a, &b).unwrap() - 1.2).abs() < 1e-15);
        assert!(loss(&LossSpec::linf(3), &a, &b).is_err());
    }

    #[test]
    fn aggregate_of_identical_marginals() {
        let p = Measure::atoms(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let q = Measure::atoms(vec![0.0, 1.0], vec![0.3, 0.7]).unwrap();
        let spec = LossSpec::tv();
        let one = loss(&spec, &p, &q).unwrap();
        assert!((one - 0.2).abs() < 1e-15);
        let three = aggregate_loss(&spec, &[p.clone(), p.clone(), p.clone()], &q).unwrap();
        assert_eq!(three, one + one + one);
        let mixed = aggregate_loss(&spec, &[p.clone(), q.clone()], &q).unwrap();
        assert_eq!(mixed, one);
    }

    #[test]
    fn contaminated_marginals_are_bounded_by_alphas() {
        let base = Measure::gaussian(0.0, 1.0).unwrap();
        let far = Measure::dirac(50.0).unwrap();
        let alphas = [0.0, 0.01, 0.05, 0.2];
        let truth: alloc::vec::Vec<Measure> =
            alphas.iter().map(|&a| Measure::contaminated(&base, a, &far).unwrap()).collect();
        let total = aggregate_loss(&LossSpec::tv(), &truth, &base).unwrap();
        let bound: f64 = alphas.iter().sum();
        // the contaminant is singular to the base, so ‖R - P‖ = 1 and the bound is
        // attained up to quadrature tolerance
        assert!(total <= bound + 1e-7);
        assert!((total - bound).abs() < 1e-7);
    }
}
