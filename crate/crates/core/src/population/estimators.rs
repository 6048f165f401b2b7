use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::stats::{weighted_line_fit, Accumulator, MomentEstimate};

/// Share of the mean above which a single sample marks an estimate as heavy-tailed.
pub const HEAVY_TAIL_SHARE: f64 = 0.1;

/// `P(Im G <= x)` on a sample set.
pub fn cdf_im(samples: &[Complex64], x: f64) -> MomentEstimate {
    MomentEstimate::binomial(samples.iter().filter(|g| g.im <= x).count(), samples.len())
}

/// `P(|G| <= y)` on a sample set.
pub fn cdf_abs(samples: &[Complex64], y: f64) -> MomentEstimate {
    MomentEstimate::binomial(samples.iter().filter(|g| g.norm() <= y).count(), samples.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseMoment {
    pub p: f64,
    pub estimate: MomentEstimate,
    /// Largest single-sample contribution as a fraction of the summed total.
    pub max_share: f64,
    pub heavy_tail: bool,
}

/// `E[(Im G)^(-p)]`.
pub fn inverse_moment(samples: &[Complex64], p: f64) -> InverseMoment {
    if p == 0.0 {
        return InverseMoment {
            p,
            estimate: MomentEstimate::exact(1.0, samples.len()),
            max_share: 1.0 / samples.len() as f64,
            heavy_tail: false,
        };
    }
    let mut acc = Accumulator::default();
    for g in samples {
        acc.push(g.im.powf(-p));
    }
    let total = acc.mean() * acc.len() as f64;
    let max_share = acc.max() / total;
    InverseMoment {
        p,
        estimate: acc.estimate(),
        max_share,
        heavy_tail: max_share > HEAVY_TAIL_SHARE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailStatus {
    Fitted,
    /// The distribution has no resolvable lower tail (e.g. a point mass).
    Degenerate,
    InsufficientCounts,
}

/// Power-law fit `log F(x) = gamma log x + c` over the smallest resolvable decade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawTail {
    pub x: Vec<f64>,
    pub cdf: Vec<MomentEstimate>,
    pub gamma: f64,
    pub gamma_std_error: f64,
    pub status: TailStatus,
}

pub const TAIL_GRID_POINTS: usize = 5;
pub const TAIL_MIN_COUNT: usize = 10;

/// The decade starts at the `TAIL_MIN_COUNT`-th smallest `Im G`, so every grid point
/// carries at least that many counts.
pub fn power_law_tail(samples: &[Complex64]) -> PowerLawTail {
    let empty = |status| PowerLawTail {
        x: Vec::new(),
        cdf: Vec::new(),
        gamma: f64::NAN,
        gamma_std_error: f64::NAN,
        status,
    };
    if samples.len() < TAIL_MIN_COUNT {
        return empty(TailStatus::InsufficientCounts);
    }
    let mut im: Vec<f64> = samples.iter().map(|g| g.im).collect();
    im.sort_by(f64::total_cmp);
    let x_lo = im[TAIL_MIN_COUNT - 1];
    if !(x_lo > 0.0) {
        return empty(TailStatus::InsufficientCounts);
    }
    let n = im.len();
    let count_le = |x: f64| im.partition_point(|v| *v <= x);
    let xs: Vec<f64> = (0..TAIL_GRID_POINTS)
        .map(|i| x_lo * 10f64.powf(i as f64 / (TAIL_GRID_POINTS - 1) as f64))
        .collect();
    let counts: Vec<usize> = xs.iter().map(|x| count_le(*x)).collect();
    let cdf: Vec<MomentEstimate> = counts.iter().map(|c| MomentEstimate::binomial(*c, n)).collect();
    if counts.first() == counts.last() || counts[counts.len() - 1] == n {
        let mut t = empty(TailStatus::Degenerate);
        t.x = xs;
        t.cdf = cdf;
        return t;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = cdf.iter().map(|e| e.mean.ln()).collect();
    let sy: Vec<f64> = cdf
        .iter()
        .map(|e| ((1.0 - e.mean) / (n as f64 * e.mean)).sqrt())
        .collect();
    match weighted_line_fit(&lx, &ly, &sy) {
        Some(fit) => PowerLawTail {
            x: xs,
            cdf,
            gamma: fit.slope,
            gamma_std_error: fit.slope_std_error,
            status: TailStatus::Fitted,
        },
        None => {
            let mut t = empty(TailStatus::Degenerate);
            t.x = xs;
            t.cdf = cdf;
            t
        }
    }
}

/// Upper estimate of `E[(Im G)^(-p)]` from the fitted lower tail:
/// `p ∫ F(x) x^(-p-1) dx` with `F(x) = F(x0) (x/x0)^gamma` below `x0` and the
/// empirical law above. Requires `gamma > p`.
pub fn inverse_moment_via_tail(samples: &[Complex64], p: f64, tail: &PowerLawTail) -> Option<f64> {
    if tail.status != TailStatus::Fitted || !(tail.gamma > p) || samples.is_empty() {
        return None;
    }
    let x0 = *tail.x.last()?;
    let f0 = tail.cdf.last()?.mean;
    let below = p * f0 * x0.powf(-p) / (tail.gamma - p);
    let above = samples.iter().map(|g| g.im.max(x0).powf(-p)).sum::<f64>() / samples.len() as f64;
    Some(below + above)
}
