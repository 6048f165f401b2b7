//! Experiment configuration, read from TOML.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundId;
use crate::disorder::PotentialDistribution;
use crate::error::{Error, Result};
use crate::tree::TreeGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    GreenValidate,
    PoolRun,
    PhaseMap,
    DynamicsRun,
    HatpRun,
    BoundsCheck,
    Theorem1Scan,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::GreenValidate,
        Mode::PoolRun,
        Mode::PhaseMap,
        Mode::DynamicsRun,
        Mode::HatpRun,
        Mode::BoundsCheck,
        Mode::Theorem1Scan,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::GreenValidate => "green-validate",
            Mode::PoolRun => "pool-run",
            Mode::PhaseMap => "phase-map",
            Mode::DynamicsRun => "dynamics-run",
            Mode::HatpRun => "hatp-run",
            Mode::BoundsCheck => "bounds-check",
            Mode::Theorem1Scan => "theorem1-scan",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config("mode", format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryChoice {
    Zero,
    Pool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub branching: usize,
    pub depth: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { branching: 2, depth: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub energies: Vec<f64>,
    pub etas: Vec<f64>,
    /// `[E1, E2]`.
    pub window: [f64; 2],
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self { energies: vec![0.0], etas: vec![1e-2], window: [-1.0, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub grid: Vec<f64>,
    pub tolerance: f64,
    pub betas: Vec<f64>,
    pub velocities: Vec<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            grid: vec![1.0, 2.0, 3.0, 4.0],
            tolerance: 1e-12,
            betas: vec![0.0, 1.0, 2.0],
            velocities: vec![9.0, 10.0, 12.0, 16.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub size: usize,
    pub burn_in: usize,
    /// Extra sweeps after burn-in, used for the stationarity comparison.
    pub sweeps: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        Self { size: 100_000, burn_in: 100, sweeps: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    /// Disorder realisations.
    pub fields: usize,
    pub root: usize,
    pub paths: usize,
    pub lengths: Vec<usize>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { fields: 4, root: 100_000, paths: 100_000, lengths: vec![5, 10, 15, 20, 25] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HatConfig {
    pub quad_nodes: usize,
    pub max_nodes: usize,
    pub rel_tol: f64,
    pub boundary: BoundaryChoice,
    pub b_grid: Vec<f64>,
    /// Pool used for a pool-sampled boundary.
    pub boundary_pool_size: usize,
    pub boundary_burn_in: usize,
}

impl Default for HatConfig {
    fn default() -> Self {
        Self {
            quad_nodes: 64,
            max_nodes: 4096,
            rel_tol: 1e-4,
            boundary: BoundaryChoice::Zero,
            b_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            boundary_pool_size: 10_000,
            boundary_burn_in: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    pub eta: f64,
    pub s_grid: Vec<f64>,
    pub cdf_probe: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self { eta: 1e-3, s_grid: crate::population::S_PROBE_GRID.to_vec(), cdf_probe: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub checks: Vec<BoundId>,
    /// Replace every check input by its adversarial perturbation.
    pub negative_control: bool,
    pub sigma: f64,
    pub inequality_sigma: f64,
    pub lemma_x: Vec<f64>,
    pub free_energy_s: Vec<f64>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            checks: vec![BoundId::BallisticTail, BoundId::Wegner],
            negative_control: false,
            sigma: 3.0,
            inequality_sigma: 4.0,
            lemma_x: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            free_energy_s: vec![0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Largest accepted relative error against the dense solver.
    pub oracle_rel: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { oracle_rel: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub geometry: GeometryConfig,
    pub distribution: PotentialDistribution,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub pool: PoolConfig,
    #[serde(default)]
    pub samples: SampleConfig,
    #[serde(default)]
    pub hat: HatConfig,
    #[serde(default)]
    pub phase: PhaseConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

fn check(ok: bool, field: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let span = e.span().map(|s| format!(" at byte {}", s.start)).unwrap_or_default();
            Error::config("config", format!("{}{span}", e.message()))
        })?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::bounds::digest_json(self)
    }

    pub fn geometry(&self) -> Result<TreeGeometry> {
        TreeGeometry::new(self.geometry.branching, self.geometry.depth)
            .map_err(|e| Error::config("geometry", e.to_string()))
    }

    /// Range checks for every numeric field.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        check(g.branching >= 2, "geometry.branching", "must be at least 2")?;
        check(g.depth <= 40, "geometry.depth", "must be at most 40")?;
        self.geometry()?;
        self.distribution
            .validate()
            .map_err(|e| Error::config("distribution", e.to_string()))?;
        let s = &self.spectral;
        check(!s.energies.is_empty() && all_finite(&s.energies), "spectral.energies", "need finite energies")?;
        check(
            !s.etas.is_empty() && s.etas.iter().all(|e| *e > 0.0 && e.is_finite()),
            "spectral.etas",
            "need positive finite eta values",
        )?;
        check(
            all_finite(&s.window) && s.window[0] < s.window[1],
            "spectral.window",
            "need finite [E1, E2] with E1 < E2",
        )?;
        let t = &self.time;
        check(
            all_finite(&t.grid) && t.grid.iter().all(|x| *x >= 0.0) && t.grid.windows(2).all(|w| w[0] <= w[1]),
            "time.grid",
            "need a non-negative, non-decreasing time grid",
        )?;
        check(t.tolerance > 1e-14 && t.tolerance < 1e-6, "time.tolerance", "must lie in (1e-14, 1e-6)")?;
        check(all_finite(&t.betas) && t.betas.iter().all(|b| *b >= 0.0), "time.betas", "need non-negative exponents")?;
        check(
            all_finite(&t.velocities) && t.velocities.iter().all(|v| *v >= 0.0),
            "time.velocities",
            "need non-negative velocities",
        )?;
        let p = &self.pool;
        check(p.size >= 2, "pool.size", "must be at least 2")?;
        check(p.burn_in >= 1, "pool.burn_in", "must be at least 1")?;
        let sm = &self.samples;
        check(sm.fields >= 1, "samples.fields", "must be at least 1")?;
        check(sm.root >= 2, "samples.root", "must be at least 2")?;
        check(sm.paths >= 2, "samples.paths", "must be at least 2")?;
        check(sm.lengths.iter().all(|n| *n >= 1), "samples.lengths", "lengths must be at least 1")?;
        let h = &self.hat;
        check(h.quad_nodes >= 32, "hat.quad_nodes", "must be at least 32")?;
        check(h.max_nodes >= h.quad_nodes, "hat.max_nodes", "must not be below hat.quad_nodes")?;
        check(h.rel_tol > 0.0 && h.rel_tol < 1.0, "hat.rel_tol", "must lie in (0, 1)")?;
        check(h.b_grid.iter().all(|b| *b > 0.0 && b.is_finite()), "hat.b_grid", "need positive b values")?;
        check(h.boundary_pool_size >= 2, "hat.boundary_pool_size", "must be at least 2")?;
        check(h.boundary_burn_in >= 1, "hat.boundary_burn_in", "must be at least 1")?;
        let ph = &self.phase;
        check(ph.eta > 0.0 && ph.eta.is_finite(), "phase.eta", "must be positive")?;
        check(
            ph.s_grid.len() >= 2 && ph.s_grid.iter().all(|s| *s > 0.0 && *s < 1.0),
            "phase.s_grid",
            "need at least two exponents in (0, 1)",
        )?;
        check(ph.cdf_probe > 0.0, "phase.cdf_probe", "must be positive")?;
        let b = &self.bounds;
        check(b.sigma > 0.0 && b.inequality_sigma > 0.0, "bounds.sigma", "confidence multiples must be positive")?;
        check(b.lemma_x.iter().all(|x| *x > 0.0 && x.is_finite()), "bounds.lemma_x", "need positive grid values")?;
        check(
            b.free_energy_s.iter().all(|s| (0.0..=2.0).contains(s)),
            "bounds.free_energy_s",
            "exponents must lie in [0, 2]",
        )?;
        check(
            self.tolerances.oracle_rel > 0.0,
            "tolerances.oracle_rel",
            "must be positive",
        )?;
        Ok(())
    }
}
