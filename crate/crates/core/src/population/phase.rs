//! Spectral-phase proxy from the path free energy.
//!
//! Along a ray `E|G(0,x)|^s ~ e^{φ(s) |x|}` while the number of vertices at
//! distance `n` grows like `K^n`. The sign of `φ(1) + log K` therefore decides
//! whether `Σ_x E|G(0,x)|` converges (localised, `pp-like`) or not (`ac-like`).
//! Moments at `s >= 1` may diverge, so `φ(s) + s log K` is measured on a grid
//! below one and extrapolated linearly to `s = 1`.

use serde::{Deserialize, Serialize};

use super::{cdf_im, free_energy, GreenPool, DEFAULT_BURN_IN, DEFAULT_POOL_SIZE};
use crate::disorder::PotentialDistribution;
use crate::error::{Error, Result};
use crate::green::ComplexEnergy;
use crate::stats::{weighted_line_fit, MomentEstimate};

pub const S_PROBE_GRID: [f64; 4] = [0.7, 0.8, 0.9, 0.95];

/// Margins below this magnitude leave the phase undetermined.
pub const PHASE_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    PpLike,
    AcLike,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOptions {
    pub eta: f64,
    pub s_grid: Vec<f64>,
    pub lengths: Vec<usize>,
    pub path_samples: usize,
    pub pool_size: usize,
    pub burn_in: usize,
    /// Threshold `x` of the corroborating `P(Im G <= x)`.
    pub cdf_probe: f64,
    pub root_samples: usize,
    pub seed: u64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            s_grid: S_PROBE_GRID.to_vec(),
            lengths: vec![5, 10, 15, 20, 25],
            path_samples: 100_000,
            pool_size: DEFAULT_POOL_SIZE,
            burn_in: DEFAULT_BURN_IN,
            cdf_probe: 1e-2,
            root_samples: DEFAULT_POOL_SIZE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SProbe {
    pub s: f64,
    pub free_energy: f64,
    pub std_error: f64,
    /// `φ(s) + s log K`.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVerdict {
    pub energy: f64,
    pub eta: f64,
    pub phase: Phase,
    /// Extrapolated `φ(1) + log K`.
    pub estimate: f64,
    pub std_error: f64,
    pub margin: f64,
    pub probes: Vec<SProbe>,
    pub cdf_at_probe: MomentEstimate,
}

pub fn phase_classify(
    dist: &PotentialDistribution,
    branching: usize,
    energy: f64,
    opts: &PhaseOptions,
) -> Result<PhaseVerdict> {
    if opts.s_grid.len() < 2 || opts.s_grid.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
        return Err(Error::invalid("phase probes need at least two exponents in (0, 1)"));
    }
    let zeta = ComplexEnergy::new(energy, opts.eta)?;
    let pool = GreenPool::equilibrated(
        dist.clone(),
        branching,
        zeta,
        opts.pool_size,
        opts.burn_in,
        opts.seed,
    )?;
    let log_k = (branching as f64).ln();
    let mut probes = Vec::with_capacity(opts.s_grid.len());
    for (i, &s) in opts.s_grid.iter().enumerate() {
        let fe = free_energy(&pool, s, &opts.lengths, opts.path_samples, i as u64)?;
        probes.push(SProbe {
            s,
            free_energy: fe.slope,
            std_error: fe.slope_std_error,
            excess: fe.slope + s * log_k,
        });
    }
    // fit in (s - 1) so the intercept is the value at s = 1
    let x: Vec<f64> = probes.iter().map(|p| p.s - 1.0).collect();
    let y: Vec<f64> = probes.iter().map(|p| p.excess).collect();
    let sig: Vec<f64> = probes.iter().map(|p| p.std_error).collect();
    let fit = weighted_line_fit(&x, &y, &sig).ok_or_else(|| Error::invalid("degenerate s grid"))?;
    let estimate = fit.intercept;
    let std_error = fit.intercept_std_error;
    let margin = if std_error > 0.0 {
        estimate / std_error
    } else if estimate == 0.0 {
        0.0
    } else {
        estimate.signum() * f64::INFINITY
    };
    let phase = if margin >= PHASE_MARGIN {
        Phase::AcLike
    } else if margin <= -PHASE_MARGIN {
        Phase::PpLike
    } else {
        Phase::Undetermined
    };
    let samples = pool.root_samples(opts.root_samples, u64::MAX)?;
    Ok(PhaseVerdict {
        energy,
        eta: opts.eta,
        phase,
        estimate,
        std_error,
        margin,
        probes,
        cdf_at_probe: cdf_im(&samples, opts.cdf_probe),
    })
}
