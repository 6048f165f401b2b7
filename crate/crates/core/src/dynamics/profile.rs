use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass within this many shells of the truncation depth marks a profile as contaminated.
pub const BOUNDARY_SHELLS: usize = 2;
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileTag {
    Time(f64),
    Eta(f64),
}

/// Radial distribution: probability mass per shell `0..=D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellProfile {
    pub mass: Vec<f64>,
    pub tag: ProfileTag,
}

impl ShellProfile {
    pub fn new(mass: Vec<f64>, tag: ProfileTag) -> Self {
        Self { mass, tag }
    }

    pub fn depth(&self) -> usize {
        self.mass.len().saturating_sub(1)
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass in shells `>= D - 2`.
    pub fn boundary_mass(&self) -> f64 {
        let first = self.depth().saturating_sub(BOUNDARY_SHELLS);
        self.mass[first..].iter().sum()
    }

    pub fn contaminated(&self) -> bool {
        self.boundary_mass() > BOUNDARY_MASS_LIMIT
    }
}

/// `Σ_n n^β profile[n]`, with `0^0 = 1`.
pub fn moments(profile: &ShellProfile, beta: f64) -> f64 {
    profile
        .mass
        .iter()
        .enumerate()
        .map(|(n, m)| if beta == 0.0 { *m } else { (n as f64).powf(beta) * m })
        .sum()
}

/// Same weighting as [`moments`], for resolvent-averaged profiles.
pub fn hat_moments(profile: &ShellProfile, beta: f64) -> f64 {
    moments(profile, beta)
}

/// `Σ_{n > vt} profile[n]`.
pub fn front_tail(profile: &ShellProfile, v: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !(v >= 0.0) {
        return Err(Error::invalid(format!("front tail needs t > 0 and v >= 0, got t = {t}, v = {v}")));
    }
    let edge = v * t;
    Ok(profile
        .mass
        .iter()
        .enumerate()
        .filter(|(n, _)| *n as f64 > edge)
        .map(|(_, m)| m)
        .sum())
}

/// `Σ_{n < R} profile[n]`.
pub fn lingering(profile: &ShellProfile, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("lingering radius must be non-negative, got {r}")));
    }
    Ok(profile
        .mass
        .iter()
        .enumerate()
        .filter(|(n, _)| (*n as f64) < r)
        .map(|(_, m)| m)
        .sum())
}
