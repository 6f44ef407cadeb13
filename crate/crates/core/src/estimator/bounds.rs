//! Closed-form deviation bounds. Losses on the left-hand sides are the
//! aggregate `Σ_i ℓ(P_i*, ·)` for the two theorems and per-observation
//! averages for the specialized corollaries.

use alloc::format;
use core::f64::consts::E;

use crate::error::{Error, Result};

fn need(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("bound argument out of range: {what}")))
    }
}

fn nonneg(x: f64) -> bool {
    x >= 0.0 && x.is_finite()
}

fn pos(x: f64) -> bool {
    x > 0.0 && x.is_finite()
}

/// Inputs of the slow-rate bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thm1Args {
    pub a0: f64,
    pub a1: f64,
    pub epsilon: f64,
    pub xi: f64,
    pub n: usize,
    /// `ℓ(P*, P̄)`, aggregate.
    pub approx_loss: f64,
    /// `ℓ(P*, M)`, aggregate.
    pub min_loss: f64,
    /// Surrogate for `v(P̄)`.
    pub vbar: f64,
}

/// `(2a0/a1) ℓ̄ - ℓ_min + (√n/a1)[2v̄ + √(2ξ) + ε/√n]`.
pub fn thm1_bound(a: &Thm1Args) -> Result<f64> {
    need(pos(a.a0) && pos(a.a1) && a.a1 <= a.a0, "0 < a1 <= a0")?;
    need(nonneg(a.epsilon) && nonneg(a.xi) && a.n >= 1, "epsilon, xi >= 0 and n >= 1")?;
    need(nonneg(a.approx_loss) && nonneg(a.min_loss) && nonneg(a.vbar), "losses and vbar >= 0")?;
    let rn = libm::sqrt(a.n as f64);
    Ok(2.0 * a.a0 / a.a1 * a.approx_loss - a.min_loss
        + rn / a.a1 * (2.0 * a.vbar + libm::sqrt(2.0 * a.xi) + a.epsilon / rn))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thm2Args {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub epsilon: f64,
    pub xi: f64,
    pub approx_loss: f64,
    pub min_loss: f64,
    /// Surrogate for `D(P̄)`.
    pub d_bar: f64,
}

/// `[(4a0/a1)+1] ℓ̄ - ℓ_min + 2D̄ + [(4a2/a1)+1] 8ξ/a1 + 2ε/a1`.
pub fn thm2_bound(a: &Thm2Args) -> Result<f64> {
    need(pos(a.a0) && pos(a.a1) && pos(a.a2) && a.a1 <= a.a0, "a0, a1, a2 > 0 with a1 <= a0")?;
    need(nonneg(a.epsilon) && nonneg(a.xi), "epsilon, xi >= 0")?;
    need(nonneg(a.approx_loss) && nonneg(a.min_loss) && nonneg(a.d_bar), "losses and D >= 0")?;
    Ok((4.0 * a.a0 / a.a1 + 1.0) * a.approx_loss - a.min_loss
        + 2.0 * a.d_bar
        + (4.0 * a.a2 / a.a1 + 1.0) * 8.0 * a.xi / a.a1
        + 2.0 * a.epsilon / a.a1)
}

/// Default `v̄` for the Wasserstein and `L_2` linear specializations, and the
/// `10√(5V)` surrogate for VC classes under TV.
pub fn default_vbar_wasserstein() -> f64 {
    0.5
}

pub fn default_vbar_l2() -> f64 {
    0.5
}

pub fn default_vbar_tv_vc(v: f64) -> f64 {
    10.0 * libm::sqrt(5.0 * v)
}

/// Averaged Wasserstein bound `5·approx + (2/√n)(1 + √(2ξ) + ε/√n)`.
pub fn wasserstein_bound(n: usize, xi: f64, epsilon: f64, approx: f64) -> Result<f64> {
    need(n >= 1 && nonneg(xi) && nonneg(epsilon) && nonneg(approx), "n >= 1, xi, epsilon, approx >= 0")?;
    let rn = libm::sqrt(n as f64);
    Ok(5.0 * approx + 2.0 / rn * (1.0 + libm::sqrt(2.0 * xi) + epsilon / rn))
}

/// Averaged `L_2` linear-model bound `5·approx + (4R/√n)(1 + √(2ξ) + ε/√n)`.
pub fn l2_linear_bound(r: f64, n: usize, xi: f64, epsilon: f64, approx: f64) -> Result<f64> {
    need(pos(r) && n >= 1 && nonneg(xi) && nonneg(epsilon) && nonneg(approx), "R > 0, n >= 1")?;
    let rn = libm::sqrt(n as f64);
    Ok(5.0 * approx + 4.0 * r / rn * (1.0 + libm::sqrt(2.0 * xi) + epsilon / rn))
}

/// `5·approx + 40√(5V/n) + 2√(2ξ/n) + 2ε/n`.
pub fn vc_bound_tv(v: f64, n: usize, xi: f64, epsilon: f64, approx: f64) -> Result<f64> {
    need(v >= 1.0 && v.is_finite() && n >= 1, "V >= 1 and n >= 1")?;
    need(nonneg(xi) && nonneg(epsilon) && nonneg(approx), "xi, epsilon, approx >= 0")?;
    let nf = n as f64;
    Ok(5.0 * approx + 40.0 * libm::sqrt(5.0 * v / nf) + 2.0 * libm::sqrt(2.0 * xi / nf) + 2.0 * epsilon / nf)
}

/// Numerical constant of the fast TV rate.
pub const FAST_TV_C: f64 = 4.5e5;

/// `14·approx + (144 a2/n)[c a2² V log(2en/(V∧n)) + 2 + ξ]`.
pub fn fast_bound_tv(a2: f64, v: f64, n: usize, xi: f64, approx: f64) -> Result<f64> {
    need(pos(a2) && v >= 1.0 && v.is_finite() && n >= 1, "a2 > 0, V >= 1, n >= 1")?;
    need(nonneg(xi) && nonneg(approx), "xi, approx >= 0")?;
    let nf = n as f64;
    let lg = libm::log(2.0 * E * nf / v.min(nf));
    Ok(14.0 * approx + 144.0 * a2 / nf * (FAST_TV_C * a2 * a2 * v * lg + 2.0 + xi))
}

/// Regression with unimodal errors on a `d`-dimensional parameter space:
/// `5·approx + 277√((d+1)/n) + 2√(2ξ/n)`.
pub fn regression_bound(d: usize, n: usize, xi: f64, approx: f64) -> Result<f64> {
    need(d >= 1 && n >= 1 && nonneg(xi) && nonneg(approx), "d >= 1, n >= 1")?;
    let nf = n as f64;
    Ok(5.0 * approx + 277.0 * libm::sqrt((d as f64 + 1.0) / nf) + 2.0 * libm::sqrt(2.0 * xi / nf))
}

/// `5·approx + 2D[√(2 log(2D)/n) + √(2ξ/n) + ε/n]`.
pub fn linf_bound(d: usize, n: usize, xi: f64, epsilon: f64, approx: f64) -> Result<f64> {
    need(d >= 2 && n >= 2, "D >= 2 and n >= 2")?;
    need(nonneg(xi) && nonneg(epsilon) && nonneg(approx), "xi, epsilon, approx >= 0")?;
    let (df, nf) = (d as f64, n as f64);
    Ok(5.0 * approx
        + 2.0 * df * (libm::sqrt(2.0 * libm::log(2.0 * df) / nf) + libm::sqrt(2.0 * xi / nf) + epsilon / nf))
}

/// `C_j` of the `L_j` histogram bound.
pub fn c_j(j: f64) -> Result<f64> {
    need(j > 1.0 && j.is_finite(), "1 < j < ∞")?;
    if j <= 2.0 {
        return Ok(4.0);
    }
    let se = libm::sqrt(E);
    let first = libm::pow(2.0, 1.0 - 1.0 / j) * libm::sqrt(j * se / (se - 1.0)) + libm::sqrt(j / (E - se));
    let second = j * se / (libm::pow(2.0, 1.0 / j) * (se - 1.0));
    Ok(8.0 * first.max(second))
}

/// `5·approx + C_j √((D/n)‖p̄_D‖_{μ,j/2}) + (4D^{1-1/j}/√n)(√(2ξ) + ε/√n)`.
pub fn lj_histogram_bound(j: f64, d: usize, n: usize, xi: f64, epsilon: f64, approx: f64, pbar_norm: f64) -> Result<f64> {
    need(d >= 2 && n >= d, "D in {2, ..., n}")?;
    need(nonneg(xi) && nonneg(epsilon) && nonneg(approx) && nonneg(pbar_norm), "nonnegative inputs")?;
    let (df, nf) = (d as f64, n as f64);
    let rn = libm::sqrt(nf);
    Ok(5.0 * approx
        + c_j(j)? * libm::sqrt(df / nf * pbar_norm)
        + 4.0 * libm::pow(df, 1.0 - 1.0 / j) / rn * (libm::sqrt(2.0 * xi) + epsilon / rn))
}

/// Approximation of a monotone density with support length `L` and
/// variation `H` by a `d`-piece histogram: `exp[log(HL+1)/d] - 1`.
pub fn birge_approx(hl: f64, d: usize) -> Result<f64> {
    need(nonneg(hl) && d >= 1, "HL >= 0 and d >= 1")?;
    Ok(libm::expm1(libm::log1p(hl) / d as f64))
}

/// Averaged TV bound for monotone densities at a fixed `d`:
/// `5·approx_d + 41√(10d/n) + 2√(2ξ/n)`.
pub fn monotone_tv_bound(d: usize, n: usize, xi: f64, approx_d: f64) -> Result<f64> {
    need(d >= 1 && n >= 1 && nonneg(xi) && nonneg(approx_d), "d, n >= 1")?;
    let nf = n as f64;
    Ok(5.0 * approx_d + 41.0 * libm::sqrt(10.0 * d as f64 / nf) + 2.0 * libm::sqrt(2.0 * xi / nf))
}

/// i.i.d. `L_1` form: `5[approx_d + 16.4√(10d/n)] + 4√(2ξ/n)`.
pub fn monotone_l1_bound(d: usize, n: usize, xi: f64, approx_d: f64) -> Result<f64> {
    need(d >= 1 && n >= 1 && nonneg(xi) && nonneg(approx_d), "d, n >= 1")?;
    let nf = n as f64;
    Ok(5.0 * (approx_d + 16.4 * libm::sqrt(10.0 * d as f64 / nf)) + 4.0 * libm::sqrt(2.0 * xi / nf))
}

/// Integer `d` in `1..=n` minimizing the `L_1` monotone bound with the
/// Birgé approximation term, with the bound value.
pub fn optimize_monotone_d(hl: f64, n: usize, xi: f64) -> Result<(usize, f64)> {
    need(nonneg(hl) && n >= 1, "HL >= 0 and n >= 1")?;
    let mut best = (1, f64::INFINITY);
    for d in 1..=n {
        let b = monotone_l1_bound(d, n, xi, birge_approx(hl, d)?)?;
        if b < best.1 {
            best = (d, b);
        }
    }
    Ok(best)
}
