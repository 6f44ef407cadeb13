use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::Measure;
use crate::error::{Error, Result};

/// Observations `X_1, ..., X_n`, each a point of dimension `dim`, stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    dim: usize,
    data: Vec<f64>,
}

impl Sample {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::Empty("a sample needs at least one point of positive dimension".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("sample points must be finite"));
        }
        Ok(Sample { dim, data })
    }

    pub fn from_1d(points: Vec<f64>) -> Result<Self> {
        Sample::new(1, points)
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Reorders points by `perm` (point `i` of the result is point `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Sample {
        let mut data = Vec::with_capacity(self.data.len());
        for &i in perm {
            data.extend_from_slice(self.point(i));
        }
        Sample { dim: self.dim, data }
    }
}

/// Right-continuous empirical distribution function.
#[derive(Clone, Debug)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= t) as f64 / self.sorted.len() as f64
    }
}

pub fn empirical_cdf(sample: &Sample) -> Result<EmpiricalCdf> {
    if sample.dim() != 1 {
        return Err(Error::unsupported("empirical cdf of a multivariate sample"));
    }
    let mut sorted = sample.as_flat().to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(EmpiricalCdf { sorted })
}

/// `n^{-1} Σ δ_{X_i}` as an atomic measure (repeated points merged).
pub fn empirical_measure(sample: &Sample) -> Result<Measure> {
    if sample.dim() != 1 {
        return Err(Error::unsupported("empirical measure of a multivariate sample"));
    }
    let w = 1.0 / sample.n() as f64;
    let merged = super::merge_atoms(sample.as_flat().iter().map(|&x| (x, w)).collect());
    let (points, masses) = merged.into_iter().unzip();
    Ok(Measure::atoms(points, masses)?.with_tag("empirical"))
}

/// Uniform draw in the open interval (0, 1) with 52 random bits.
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

pub fn sample_with<R: RngCore + ?Sized>(m: &Measure, n: usize, rng: &mut R) -> Result<Sample> {
    if n == 0 {
        return Err(Error::Empty("sample size must be positive".into()));
    }
    let mut data = Vec::with_capacity(n * m.dim());
    for _ in 0..n {
        m.draw(rng, &mut data)?;
    }
    Sample::new(m.dim(), data)
}

/// `n` i.i.d. draws from `m`, deterministic in `seed`.
pub fn sample_from(m: &Measure, n: usize, seed: u64) -> Result<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(m, n, &mut rng)
}
