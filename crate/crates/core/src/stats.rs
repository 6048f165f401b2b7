//! Sample means with standard errors and straight-line fits.

use serde::{Deserialize, Serialize};

/// Mean of a sample together with `sample-std / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl MomentEstimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(values: I) -> Self {
        let mut acc = Accumulator::default();
        for v in values {
            acc.push(v);
        }
        acc.estimate()
    }

    /// Empirical frequency of `hits` among `n` with binomial standard error.
    pub fn binomial(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        let std_error = if n > 1 {
            (p * (1.0 - p) / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean: p,
            std_error,
            n_samples: n,
        }
    }

    /// An exactly known value.
    pub fn exact(mean: f64, n_samples: usize) -> Self {
        Self {
            mean,
            std_error: 0.0,
            n_samples,
        }
    }
}

/// Streaming mean/variance (Welford) that merges in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    n: usize,
    mean: f64,
    m2: f64,
    max: f64,
}

impl Accumulator {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
        if x > self.max || self.n == 1 {
            self.max = x;
        }
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        self.max = self.max.max(other.max);
        self.n = n;
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n > 1 {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        } else {
            0.0
        }
    }

    pub fn estimate(&self) -> MomentEstimate {
        MomentEstimate {
            mean: self.mean,
            std_error: (self.variance() / self.n.max(1) as f64).sqrt(),
            n_samples: self.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    pub intercept_std_error: f64,
    /// Reduced chi-square for weighted fits, residual variance for unweighted ones.
    pub residual: f64,
    pub r_squared: f64,
}

impl LineFit {
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Weighted least squares of `y` against `x` with per-point standard deviations.
///
/// Sigmas are floored at the rounding level of `y`; when every sigma vanishes the fit
/// falls back to ordinary least squares. Standard errors are inflated by
/// `sqrt(chi2_red)` when the scatter exceeds the stated errors.
pub fn weighted_line_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Option<LineFit> {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), sigma.len());
    if x.len() < 2 {
        return None;
    }
    if sigma.iter().all(|s| *s == 0.0) {
        return line_fit(x, y);
    }
    // errors below rounding level of y are not resolvable
    let rounding = 64.0 * f64::EPSILON * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (sigma
        .iter()
        .cloned()
        .filter(|s| *s > 0.0)
        .fold(f64::INFINITY, f64::min)
        * 1e-6)
        .max(rounding);
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / s.max(floor).powi(2)).collect();
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = sw * sxx - sx * sx;
    if det <= 0.0 {
        return None;
    }
    let slope = (sw * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2: f64 = w
        .iter()
        .zip(x)
        .zip(y)
        .map(|((w, x), y)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let chi2_red = chi2 / dof;
    let inflate = chi2_red.max(1.0).sqrt();
    Some(LineFit {
        slope,
        intercept,
        slope_std_error: (sw / det).sqrt() * inflate,
        intercept_std_error: (sxx / det).sqrt() * inflate,
        residual: chi2_red,
        r_squared: r_squared(x, y, slope, intercept),
    })
}

/// Ordinary least squares.
pub fn line_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let s2 = if x.len() > 2 { rss / (n - 2.0) } else { 0.0 };
    Some(LineFit {
        slope,
        intercept,
        slope_std_error: (s2 / sxx).sqrt(),
        intercept_std_error: (s2 * (1.0 / n + mx * mx / sxx)).sqrt(),
        residual: s2,
        r_squared: r_squared(x, y, slope, intercept),
    })
}

fn r_squared(x: &[f64], y: &[f64], slope: f64, intercept: f64) -> f64 {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let tss: f64 = y.iter().map(|y| (y - my).powi(2)).sum();
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    if tss > 0.0 {
        1.0 - rss / tss
    } else if rss == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Two-sided Student-t quantile used for 95% intervals of small fits.
pub fn student_t_975(dof: usize) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    StudentsT::new(0.0, 1.0, dof.max(1) as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(1.96)
}
