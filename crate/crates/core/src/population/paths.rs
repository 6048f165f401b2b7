//! Fractional moments of `G(0,x;z)` along a ray and the free energy per step.
//!
//! A sample of `G(0, x_n)` is built from the far end of the path. The vertex
//! `x_n` sees `K` independent pool draws; each interior path vertex sees its
//! path successor plus `K - 1` pool draws; the root sees `x_1` plus `K - 1`
//! draws. Then `G(0,x_n) = G(0,0) Π_{j=1..n} Γ_j`. On-path values are always
//! propagated afresh, only off-path subtrees come from the pool.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GreenPool;
use crate::error::{Error, Result};
use crate::green::{inv, ComplexEnergy};
use crate::rng::{stream_id2, tag, KeyedStream, POTENTIAL_WORDS};
use crate::stats::{weighted_line_fit, Accumulator, MomentEstimate};

const PATH_CHUNK: usize = 1024;

/// Reduced chi-square above which a free-energy fit is flagged.
pub const FIT_RESIDUAL_LIMIT: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathMoment {
    pub s: f64,
    pub length: usize,
    pub estimate: MomentEstimate,
    pub max_share: f64,
}

impl PathMoment {
    pub fn heavy_tail(&self) -> bool {
        self.max_share > super::estimators::HEAVY_TAIL_SHARE
    }
}

/// `log |G(0,x_n;z)|` for one path; `None` if the product is not finite.
fn sample_log_abs<R: rand::RngCore>(pool: &GreenPool, rng: &mut R, n: usize) -> Option<f64> {
    let k = pool.branching();
    let z = pool.zeta().as_complex();
    let dist = pool.distribution();
    let mut log_abs = 0.0;
    let mut forward = Complex64::new(0.0, 0.0);
    for j in (0..=n).rev() {
        let v = dist.draw(rng);
        let off_path = if j == n { k } else { k - 1 };
        let mut s = if j == n { Complex64::new(0.0, 0.0) } else { forward };
        for _ in 0..off_path {
            s += pool.draw(rng);
        }
        forward = inv(Complex64::new(v, 0.0) - z - s);
        log_abs += forward.norm().ln();
    }
    log_abs.is_finite().then_some(log_abs)
}

/// `E|G(0,x_n;z)|^s` along a ray of length `n >= 1`.
pub fn fractional_path_moment(
    pool: &GreenPool,
    s: f64,
    n: usize,
    n_samples: usize,
    stream: u64,
) -> Result<PathMoment> {
    pool.require_stationary()?;
    if n == 0 {
        return Err(Error::invalid("path length must be at least 1"));
    }
    if !(s >= 0.0 && s <= 2.0) {
        return Err(Error::invalid(format!("path moment exponent must lie in [0, 2], got {s}")));
    }
    if n_samples < 2 {
        return Err(Error::invalid("need at least two path samples"));
    }
    let k = pool.branching() as u64;
    let words = POTENTIAL_WORDS * (n as u64 + 1) + k + (n as u64) * (k - 1);
    let keyed = KeyedStream::new(pool.seed(), stream_id2(tag::PATH_SAMPLES, stream, n as u64));
    let chunks = n_samples.div_ceil(PATH_CHUNK);
    let partials: Vec<std::result::Result<Accumulator, usize>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * PATH_CHUNK;
            let end = (start + PATH_CHUNK).min(n_samples);
            let mut acc = Accumulator::default();
            // each sample consumes exactly `words` outputs
            let mut rng = keyed.at(start as u64, words);
            for i in start..end {
                match sample_log_abs(pool, &mut rng, n) {
                    Some(l) => acc.push((s * l).exp()),
                    None => return Err(i),
                }
            }
            Ok(acc)
        })
        .collect();
    let mut acc = Accumulator::default();
    for p in &partials {
        match p {
            Ok(a) => acc.merge(a),
            Err(i) => {
                return Err(Error::NonFinite {
                    location: format!("path sample {i} (length {n})"),
                    detail: format!("non-finite Green product at z = {:?}", pool.zeta()),
                })
            }
        }
    }
    let estimate = acc.estimate();
    let total = acc.mean() * acc.len() as f64;
    Ok(PathMoment {
        s,
        length: n,
        estimate,
        max_share: if total > 0.0 { acc.max() / total } else { 0.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthMoment {
    pub n: usize,
    pub log_moment: f64,
    pub std_error: f64,
    pub max_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyEstimate {
    pub s: f64,
    pub zeta: ComplexEnergy,
    /// Fitted decay rate per step, the estimate of the free energy.
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
    pub per_length: Vec<LengthMoment>,
    pub fit_residual: f64,
    pub low_confidence: bool,
}

/// Fits `log E|G(0,x_n)|^s` against `n` over `lengths`.
pub fn free_energy(
    pool: &GreenPool,
    s: f64,
    lengths: &[usize],
    n_samples: usize,
    stream: u64,
) -> Result<FreeEnergyEstimate> {
    if lengths.len() < 4 || lengths.iter().copied().max().unwrap_or(0) < 20 {
        return Err(Error::invalid(
            "free-energy fit needs at least four path lengths reaching 20 or more",
        ));
    }
    let mut per_length = Vec::with_capacity(lengths.len());
    for &n in lengths {
        let m = fractional_path_moment(pool, s, n, n_samples, stream)?;
        per_length.push(LengthMoment {
            n,
            log_moment: m.estimate.mean.ln(),
            std_error: m.estimate.std_error / m.estimate.mean,
            max_share: m.max_share,
        });
    }
    let x: Vec<f64> = per_length.iter().map(|l| l.n as f64).collect();
    let y: Vec<f64> = per_length.iter().map(|l| l.log_moment).collect();
    let sig: Vec<f64> = per_length.iter().map(|l| l.std_error).collect();
    let fit = weighted_line_fit(&x, &y, &sig).ok_or_else(|| Error::invalid("degenerate path-length grid"))?;
    let low_confidence = fit.residual > FIT_RESIDUAL_LIMIT;
    Ok(FreeEnergyEstimate {
        s,
        zeta: pool.zeta(),
        slope: fit.slope,
        slope_std_error: fit.slope_std_error,
        intercept: fit.intercept,
        per_length,
        fit_residual: fit.residual,
        low_confidence,
    })
}
