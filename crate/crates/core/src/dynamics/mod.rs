//! Wave-packet evolution on truncated trees and resolvent-averaged position laws.

mod chebyshev;
mod hat;
pub mod oracle;
mod profile;
pub mod quadrature;

pub use chebyshev::{bessel_j_sequence, propagator_coefficients, TreeOperator};
pub use hat::{hat_distribution, EnergyWindow, HatBoundary, HatOptions, HatProfile, PoolBank};
pub use profile::{
    front_tail, hat_moments, lingering, moments, ProfileTag, ShellProfile, BOUNDARY_MASS_LIMIT,
    BOUNDARY_SHELLS,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disorder::PotentialField;
use crate::error::{Error, Result};
use crate::green::shell_norms;
use crate::stats::{line_fit, student_t_975, Accumulator};
use crate::tree::TreeGeometry;

pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WavePacket {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
    /// `| ‖ψ‖ - ‖ψ_0‖ |`.
    pub norm_drift: f64,
}

impl WavePacket {
    /// `δ_0` at time zero.
    pub fn root(geometry: &TreeGeometry) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); geometry.vertex_count()];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Self { amplitudes, time: 0.0, norm_drift: 0.0 }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// `e^{-itH} ψ_0` at each time of a non-decreasing grid, stepping incrementally.
pub fn propagate(
    field: &PotentialField,
    geometry: &TreeGeometry,
    psi0: &WavePacket,
    t_grid: &[f64],
    tol: f64,
) -> Result<Vec<WavePacket>> {
    if !(tol > 1e-14 && tol < 1e-6) {
        return Err(Error::invalid(format!("propagation tolerance must lie in (1e-14, 1e-6), got {tol}")));
    }
    if psi0.amplitudes.len() != geometry.vertex_count() {
        return Err(Error::invalid("initial state does not match the tree"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("time grid must be finite and non-decreasing"));
    }
    let op = TreeOperator::new(field, geometry)?;
    let norm0 = psi0.norm();
    let mut out = Vec::with_capacity(t_grid.len());
    let mut psi = psi0.amplitudes.clone();
    let mut now = psi0.time;
    for &t in t_grid {
        if t != now {
            psi = op.evolve(&psi, t - now, tol);
            now = t;
        }
        let packet = WavePacket { amplitudes: psi.clone(), time: t, norm_drift: 0.0 };
        let drift = (packet.norm() - norm0).abs();
        if !drift.is_finite() {
            return Err(Error::NonFinite {
                location: format!("propagation to t = {t}"),
                detail: "norm is not finite".into(),
            });
        }
        out.push(WavePacket { norm_drift: drift, ..packet });
    }
    Ok(out)
}

/// `profile[n] = Σ_{|x|=n} |ψ(x)|^2`.
pub fn shell_profile(psi: &WavePacket, geometry: &TreeGeometry) -> ShellProfile {
    ShellProfile::new(shell_norms(&psi.amplitudes, geometry), ProfileTag::Time(psi.time))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub beta: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSeries {
    pub v: f64,
    /// Ensemble mean of `Pr(d > vt)` per time.
    pub mean: Vec<f64>,
    /// Largest single-run value per time.
    pub max: Vec<f64>,
}

/// Fit of `M(1,t)` against `t` over uncontaminated times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallisticFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_times: usize,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub times: Vec<f64>,
    /// Ensemble-mean profile per time.
    pub profiles: Vec<ShellProfile>,
    pub moments: Vec<MomentSeries>,
    pub tails: Vec<TailSeries>,
    /// A time is contaminated if any run is.
    pub contaminated: Vec<bool>,
    pub max_norm_drift: f64,
    /// `M(1,t)` per run and time.
    pub first_moment_runs: Vec<Vec<f64>>,
    pub ballistic_fit: Option<BallisticFit>,
}

/// Aggregates per-run profiles (`runs[r][i]` at `times[i]`).
pub fn transport_report(
    times: &[f64],
    runs: &[Vec<ShellProfile>],
    betas: &[f64],
    v_grid: &[f64],
    max_norm_drift: f64,
) -> Result<TransportReport> {
    if runs.is_empty() || runs.iter().any(|r| r.len() != times.len()) {
        return Err(Error::invalid("every run needs one profile per time"));
    }
    let depth = runs[0][0].depth();
    let n_runs = runs.len() as f64;
    let profiles: Vec<ShellProfile> = (0..times.len())
        .map(|i| {
            let mut mass = vec![0.0; depth + 1];
            for r in runs {
                for (m, x) in mass.iter_mut().zip(&r[i].mass) {
                    *m += x;
                }
            }
            mass.iter_mut().for_each(|m| *m /= n_runs);
            ShellProfile::new(mass, ProfileTag::Time(times[i]))
        })
        .collect();
    let contaminated: Vec<bool> = (0..times.len()).map(|i| runs.iter().any(|r| r[i].contaminated())).collect();
    let moment_series = betas
        .iter()
        .map(|&beta| MomentSeries { beta, values: profiles.iter().map(|p| moments(p, beta)).collect() })
        .collect();
    let mut tails = Vec::with_capacity(v_grid.len());
    for &v in v_grid {
        let mut mean = Vec::with_capacity(times.len());
        let mut max = Vec::with_capacity(times.len());
        for (i, &t) in times.iter().enumerate() {
            if t > 0.0 {
                mean.push(front_tail(&profiles[i], v, t)?);
                let mut worst = 0.0f64;
                for r in runs {
                    worst = worst.max(front_tail(&r[i], v, t)?);
                }
                max.push(worst);
            } else {
                mean.push(f64::NAN);
                max.push(f64::NAN);
            }
        }
        tails.push(TailSeries { v, mean, max });
    }
    let first_moment_runs: Vec<Vec<f64>> =
        runs.iter().map(|r| r.iter().map(|p| moments(p, 1.0)).collect()).collect();
    let ballistic_fit = ballistic_fit(times, &first_moment_runs, &contaminated);
    Ok(TransportReport {
        times: times.to_vec(),
        profiles,
        moments: moment_series,
        tails,
        contaminated,
        max_norm_drift,
        first_moment_runs,
        ballistic_fit,
    })
}

/// Per-run least-squares slopes; the interval is a Student-t interval over runs,
/// or the single-run regression interval when there is one run.
fn ballistic_fit(times: &[f64], m1: &[Vec<f64>], contaminated: &[bool]) -> Option<BallisticFit> {
    let keep: Vec<usize> = (0..times.len()).filter(|&i| !contaminated[i]).collect();
    if keep.len() < 2 {
        return None;
    }
    let x: Vec<f64> = keep.iter().map(|&i| times[i]).collect();
    let fits: Vec<_> = m1
        .iter()
        .map(|run| line_fit(&x, &keep.iter().map(|&i| run[i]).collect::<Vec<_>>()))
        .collect::<Option<Vec<_>>>()?;
    let (slope, intercept, half) = if fits.len() == 1 {
        let f = &fits[0];
        if keep.len() < 3 {
            return None;
        }
        (f.slope, f.intercept, student_t_975(keep.len() - 2) * f.slope_std_error)
    } else {
        let mut acc = Accumulator::default();
        let mut icpt = Accumulator::default();
        for f in &fits {
            acc.push(f.slope);
            icpt.push(f.intercept);
        }
        let se = (acc.variance() / fits.len() as f64).sqrt();
        (acc.mean(), icpt.mean(), student_t_975(fits.len() - 1) * se)
    };
    Some(BallisticFit {
        slope,
        intercept,
        ci_low: slope - half,
        ci_high: slope + half,
        n_times: keep.len(),
        n_runs: fits.len(),
    })
}

/// Propagates `δ_0` on every field and aggregates.
pub fn run_transport(
    fields: &[PotentialField],
    geometry: &TreeGeometry,
    t_grid: &[f64],
    betas: &[f64],
    v_grid: &[f64],
    tol: f64,
) -> Result<TransportReport> {
    let psi0 = WavePacket::root(geometry);
    let mut runs = Vec::with_capacity(fields.len());
    let mut drift = 0.0f64;
    for field in fields {
        let packets = propagate(field, geometry, &psi0, t_grid, tol)?;
        drift = packets.iter().fold(drift, |d, p| d.max(p.norm_drift));
        runs.push(packets.iter().map(|p| shell_profile(p, geometry)).collect());
    }
    transport_report(t_grid, &runs, betas, v_grid, drift)
}
