//! Resolvent-averaged position law `K(x) = (η/π) ∫_window |G(x,0;E+iη)|^2 dE`.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::quadrature::{composite_rule, PANEL_ORDER};
use super::{ProfileTag, ShellProfile};
use crate::disorder::{PotentialDistribution, PotentialField};
use crate::error::{Error, Result};
use crate::green::{Boundary, ColumnWorkspace, ComplexEnergy};
use crate::population::GreenPool;
use crate::rng::derive_seed;
use crate::tree::TreeGeometry;

/// Indicator window `|f|^2 = 1` on `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyWindow {
    pub lower: f64,
    pub upper: f64,
}

impl EnergyWindow {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::invalid(format!("energy window needs E1 < E2, got [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HatOptions {
    /// Starting node count, rounded up to whole panels.
    pub quad_nodes: usize,
    pub max_nodes: usize,
    /// Largest accepted relative change of a shell under node doubling.
    pub rel_tol: f64,
}

impl Default for HatOptions {
    fn default() -> Self {
        Self { quad_nodes: 64, max_nodes: 4096, rel_tol: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HatProfile {
    pub profile: ShellProfile,
    pub nodes: usize,
    pub converged: bool,
    pub max_rel_change: f64,
}

/// Memo of equilibrated pools keyed by spectral parameter.
#[derive(Debug)]
pub struct PoolBank {
    dist: PotentialDistribution,
    branching: usize,
    pool_size: usize,
    burn_in: usize,
    seed: u64,
    cache: Mutex<BTreeMap<(u64, u64), Arc<GreenPool>>>,
}

impl PoolBank {
    pub fn new(dist: PotentialDistribution, branching: usize, pool_size: usize, burn_in: usize, seed: u64) -> Self {
        Self { dist, branching, pool_size, burn_in, seed, cache: Mutex::new(BTreeMap::new()) }
    }

    pub fn get(&self, z: ComplexEnergy) -> Result<Arc<GreenPool>> {
        let key = (z.energy().to_bits(), z.eta().to_bits());
        if let Some(p) = self.cache.lock().expect("pool cache poisoned").get(&key) {
            return Ok(p.clone());
        }
        // one seed for every energy keeps the pools, and hence the integrand, smooth in E
        let pool = Arc::new(GreenPool::equilibrated(
            self.dist.clone(),
            self.branching,
            z,
            self.pool_size,
            self.burn_in,
            self.seed,
        )?);
        self.cache.lock().expect("pool cache poisoned").insert(key, pool.clone());
        Ok(pool)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum HatBoundary<'a> {
    Zero,
    Pool(&'a PoolBank),
}

fn integrate(
    ws: &mut ColumnWorkspace,
    field: &PotentialField,
    geometry: &TreeGeometry,
    window: &EnergyWindow,
    eta: f64,
    panels: usize,
    boundary: HatBoundary<'_>,
) -> Result<Vec<f64>> {
    let mut mass = vec![0.0; geometry.depth() + 1];
    let scale = eta / std::f64::consts::PI;
    for (e, w) in composite_rule(window.lower, window.upper, panels) {
        let z = ComplexEnergy::new(e, eta)?;
        let weights = match boundary {
            HatBoundary::Zero => ws.shell_weights(field, geometry, z, Boundary::Zero)?,
            HatBoundary::Pool(bank) => {
                let pool = bank.get(z)?;
                let seed = derive_seed(field.seed, 1);
                ws.shell_weights(field, geometry, z, Boundary::Pool { pool: &pool, seed })?
            }
        };
        for (m, g) in mass.iter_mut().zip(&weights) {
            *m += scale * w * g;
        }
    }
    Ok(mass)
}

/// Shell profile of `K(x)` by composite Gauss–Legendre quadrature, doubling the node
/// count until no shell moves by more than `rel_tol` or `max_nodes` is reached.
pub fn hat_distribution(
    field: &PotentialField,
    geometry: &TreeGeometry,
    window: &EnergyWindow,
    eta: f64,
    opts: &HatOptions,
    boundary: HatBoundary<'_>,
) -> Result<HatProfile> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::invalid(format!("eta must lie in (0, 1], got {eta}")));
    }
    if opts.quad_nodes < 32 {
        return Err(Error::invalid(format!("need at least 32 quadrature nodes, got {}", opts.quad_nodes)));
    }
    let mut ws = ColumnWorkspace::new(geometry);
    let mut panels = opts.quad_nodes.div_ceil(PANEL_ORDER);
    let mut prev = integrate(&mut ws, field, geometry, window, eta, panels, boundary)?;
    loop {
        let finer = integrate(&mut ws, field, geometry, window, eta, 2 * panels, boundary)?;
        panels *= 2;
        let total: f64 = finer.iter().sum();
        let floor = 1e-12 * total.max(f64::MIN_POSITIVE);
        let change = finer
            .iter()
            .zip(&prev)
            .filter(|(a, _)| a.abs() > floor)
            .map(|(a, b)| ((a - b) / a).abs())
            .fold(0.0, f64::max);
        let converged = change <= opts.rel_tol;
        if converged || 2 * panels * PANEL_ORDER > opts.max_nodes {
            return Ok(HatProfile {
                profile: ShellProfile::new(finer, ProfileTag::Eta(eta)),
                nodes: panels * PANEL_ORDER,
                converged,
                max_rel_change: change,
            });
        }
        prev = finer;
    }
}

#[cfg(test)]
mod tests {
    use super::super::oracle::{dense_hat_profile, dense_window_mass};
    use super::*;
    use crate::disorder::sample_field;

    fn setup(seed: u64) -> (TreeGeometry, PotentialField) {
        let g = TreeGeometry::new(2, 5).unwrap();
        let f = sample_field(&PotentialDistribution::uniform(1.0).unwrap(), &g, seed).unwrap();
        (g, f)
    }

    #[test]
    fn matches_dense_profile() {
        for seed in 0..3 {
            let (g, f) = setup(seed);
            let window = EnergyWindow::new(-1.0, 0.5).unwrap();
            let hat = hat_distribution(&f, &g, &window, 0.1, &HatOptions::default(), HatBoundary::Zero).unwrap();
            assert!(hat.converged);
            let dense = dense_hat_profile(&f, &g, &window, 0.1).unwrap();
            for (a, b) in hat.profile.mass.iter().zip(&dense.mass) {
                assert!((a - b).abs() <= 1e-4 * b.abs() + 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn full_window_mass() {
        let (g, f) = setup(7);
        let eta = 0.05;
        let window = EnergyWindow::new(-6.0, 6.0).unwrap();
        let hat = hat_distribution(&f, &g, &window, eta, &HatOptions::default(), HatBoundary::Zero).unwrap();
        let dense = dense_window_mass(&f, &g, &window, eta).unwrap();
        assert!((hat.profile.total() - dense).abs() < 1e-3);
        assert!(dense > 0.99);
    }

    #[test]
    fn strong_damping_stays_near_root() {
        let (g, f) = setup(1);
        let window = EnergyWindow::new(-1.0, 1.0).unwrap();
        let hat = hat_distribution(&f, &g, &window, 1.0, &HatOptions::default(), HatBoundary::Zero).unwrap();
        assert!(hat.profile.mass[0] > hat.profile.mass[g.depth()]);
    }

    #[test]
    fn window_outside_spectrum_is_empty() {
        let (g, f) = setup(2);
        let window = EnergyWindow::new(10.0, 12.0).unwrap();
        let hat = hat_distribution(&f, &g, &window, 1e-2, &HatOptions::default(), HatBoundary::Zero).unwrap();
        assert!(hat.profile.total() < 1e-3);
    }

    #[test]
    fn pool_boundary_runs_and_is_deterministic() {
        let (g, f) = setup(3);
        let bank = PoolBank::new(PotentialDistribution::uniform(1.0).unwrap(), 2, 2000, 20, 9);
        let window = EnergyWindow::new(-0.5, 0.5).unwrap();
        let opts = HatOptions { quad_nodes: 32, max_nodes: 64, rel_tol: 1e-4 };
        let a = hat_distribution(&f, &g, &window, 0.2, &opts, HatBoundary::Pool(&bank)).unwrap();
        let b = hat_distribution(&f, &g, &window, 0.2, &opts, HatBoundary::Pool(&bank)).unwrap();
        assert_eq!(a, b);
        assert!(a.profile.mass.iter().all(|m| *m > 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        let (g, f) = setup(0);
        let w = EnergyWindow::new(-1.0, 1.0).unwrap();
        assert!(EnergyWindow::new(1.0, 1.0).is_err());
        assert!(hat_distribution(&f, &g, &w, 0.0, &HatOptions::default(), HatBoundary::Zero).is_err());
        assert!(hat_distribution(&f, &g, &w, 2.0, &HatOptions::default(), HatBoundary::Zero).is_err());
        let few = HatOptions { quad_nodes: 8, ..HatOptions::default() };
        assert!(hat_distribution(&f, &g, &w, 0.1, &few, HatBoundary::Zero).is_err());
    }
}
