//! Population dynamics for the forward Green function of the infinite tree.
//!
//! A [`GreenPool`] holds a large sample whose empirical law approximates the
//! distributional fixed point of `Γ = 1/(V - z - Σ_{i=1}^{K} Γ_i)` with i.i.d. `Γ_i`.
//! One sweep rebuilds a full pool from fresh potentials and uniformly drawn
//! entries of the previous one.

mod estimators;
mod paths;
mod phase;
pub mod snapshot;

pub use estimators::{
    cdf_abs, cdf_im, inverse_moment, inverse_moment_via_tail, power_law_tail, InverseMoment,
    PowerLawTail, TailStatus, HEAVY_TAIL_SHARE, TAIL_GRID_POINTS, TAIL_MIN_COUNT,
};
pub use paths::{
    fractional_path_moment, free_energy, FreeEnergyEstimate, LengthMoment, PathMoment,
    FIT_RESIDUAL_LIMIT,
};
pub use phase::{phase_classify, Phase, PhaseOptions, PhaseVerdict, SProbe, PHASE_MARGIN, S_PROBE_GRID};

use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::PotentialDistribution;
use crate::error::{Error, Result};
use crate::green::{pool_combination, ComplexEnergy};
use crate::rng::{stream_id, stream_id2, tag, KeyedStream, POTENTIAL_WORDS};
use crate::stats::Accumulator;

pub const DEFAULT_POOL_SIZE: usize = 1_000_000;
pub const DEFAULT_BURN_IN: usize = 100;

const SWEEP_CHUNK: usize = 4096;

/// Summary of `Im Γ` after one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub sweep: usize,
    pub mean_im: f64,
    pub var_im: f64,
    pub min_im: f64,
    pub n: usize,
}

impl SweepStats {
    pub fn std_error(&self) -> f64 {
        (self.var_im / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub mean_drift: f64,
    pub mean_tolerance: f64,
    pub var_drift: f64,
    pub var_tolerance: f64,
    pub stationary: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreenPool {
    entries: Vec<Complex64>,
    zeta: ComplexEnergy,
    dist: PotentialDistribution,
    branching: usize,
    sweeps_done: usize,
    seed: u64,
    min_burn_in: usize,
}

impl GreenPool {
    /// Pool with every entry at the disorder-free fixed point.
    pub fn new(
        dist: PotentialDistribution,
        branching: usize,
        zeta: ComplexEnergy,
        size: usize,
        seed: u64,
    ) -> Result<Self> {
        dist.validate()?;
        if branching < 2 {
            return Err(Error::invalid("branching number must be at least 2"));
        }
        if size < 2 {
            return Err(Error::invalid("pool needs at least two entries"));
        }
        let start = zeta.free_forward_green(branching);
        Ok(Self {
            entries: vec![start; size],
            zeta,
            dist,
            branching,
            sweeps_done: 0,
            seed,
            min_burn_in: DEFAULT_BURN_IN,
        })
    }

    /// Builds a pool and runs `burn_in` sweeps, which also becomes the stationarity minimum.
    pub fn equilibrated(
        dist: PotentialDistribution,
        branching: usize,
        zeta: ComplexEnergy,
        size: usize,
        burn_in: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut pool = Self::new(dist, branching, zeta, size, seed)?.with_min_burn_in(burn_in);
        pool.evolve(burn_in)?;
        Ok(pool)
    }

    pub(crate) fn from_parts(
        entries: Vec<Complex64>,
        zeta: ComplexEnergy,
        dist: PotentialDistribution,
        branching: usize,
        sweeps_done: usize,
        seed: u64,
    ) -> Self {
        Self {
            entries,
            zeta,
            dist,
            branching,
            sweeps_done,
            seed,
            min_burn_in: DEFAULT_BURN_IN,
        }
    }

    pub fn with_min_burn_in(mut self, sweeps: usize) -> Self {
        self.min_burn_in = sweeps;
        self
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn zeta(&self) -> ComplexEnergy {
        self.zeta
    }

    pub fn distribution(&self) -> &PotentialDistribution {
        &self.dist
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps_done
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_stationary(&self) -> bool {
        self.sweeps_done >= self.min_burn_in
    }

    pub(crate) fn require_stationary(&self) -> Result<()> {
        if self.is_stationary() {
            Ok(())
        } else {
            Err(Error::NotStationary(format!(
                "{} sweeps done, {} required",
                self.sweeps_done, self.min_burn_in
            )))
        }
    }

    pub fn im_stats(&self) -> SweepStats {
        let mut acc = Accumulator::default();
        let mut min_im = f64::INFINITY;
        for g in &self.entries {
            acc.push(g.im);
            min_im = min_im.min(g.im);
        }
        SweepStats {
            sweep: self.sweeps_done,
            mean_im: acc.mean(),
            var_im: acc.variance(),
            min_im,
            n: acc.len(),
        }
    }

    /// Runs `sweeps` full sweeps. The result depends only on `(seed, sweeps_done)`.
    pub fn evolve(&mut self, sweeps: usize) -> Result<Vec<SweepStats>> {
        if sweeps == 0 {
            return Err(Error::invalid("evolve needs at least one sweep"));
        }
        let mut next = vec![Complex64::new(0.0, 0.0); self.entries.len()];
        let mut trace = Vec::with_capacity(sweeps);
        let k = self.branching;
        let words = POTENTIAL_WORDS + k as u64;
        let z = self.zeta.as_complex();
        for _ in 0..sweeps {
            let stream = KeyedStream::new(self.seed, stream_id(tag::POOL_SWEEP, self.sweeps_done as u64));
            let old = &self.entries;
            let dist = &self.dist;
            let partials: Vec<(Accumulator, f64, Option<(usize, Complex64, f64)>)> = next
                .par_chunks_mut(SWEEP_CHUNK)
                .enumerate()
                .map(|(c, out)| {
                    let base = c * SWEEP_CHUNK;
                    let mut rng = stream.at(base as u64, words);
                    let mut acc = Accumulator::default();
                    let mut min_im = f64::INFINITY;
                    let mut bad = None;
                    for (i, slot) in out.iter_mut().enumerate() {
                        let v = dist.draw(&mut rng);
                        let (g, _) = pool_combination(&mut rng, v, z, old, k);
                        if bad.is_none() && !(g.im > 0.0 && g.re.is_finite() && g.im.is_finite()) {
                            bad = Some((base + i, g, v));
                        }
                        *slot = g;
                        acc.push(g.im);
                        min_im = min_im.min(g.im);
                    }
                    (acc, min_im, bad)
                })
                .collect();
            let mut acc = Accumulator::default();
            let mut min_im = f64::INFINITY;
            for (a, m, bad) in &partials {
                if let Some((index, g, v)) = bad {
                    return Err(Error::NonFinite {
                        location: format!("pool sweep {}, entry {index}", self.sweeps_done),
                        detail: format!("drew V = {v}, produced Γ = {g}"),
                    });
                }
                acc.merge(a);
                min_im = min_im.min(*m);
            }
            std::mem::swap(&mut self.entries, &mut next);
            self.sweeps_done += 1;
            trace.push(SweepStats {
                sweep: self.sweeps_done,
                mean_im: acc.mean(),
                var_im: acc.variance(),
                min_im,
                n: acc.len(),
            });
        }
        Ok(trace)
    }

    /// Runs `2 * half` sweeps and compares `Im Γ` statistics at the end of each half.
    pub fn stationarity(&mut self, half: usize) -> Result<StationarityReport> {
        let first = *self.evolve(half)?.last().expect("non-empty trace");
        let second = *self.evolve(half)?.last().expect("non-empty trace");
        Ok(compare_sweeps(&first, &second))
    }

    /// `n` independent draws of `G(0,0;z) = 1/(V - z - Σ_{i=1}^{K} Γ_i)`.
    pub fn root_samples(&self, n: usize, stream: u64) -> Result<Vec<Complex64>> {
        Ok(self.root_samples_detailed(n, stream)?.into_iter().map(|(g, _)| g).collect())
    }

    /// Root samples together with `Σ Im Γ_i` over the attached draws.
    pub fn root_samples_detailed(&self, n: usize, stream: u64) -> Result<Vec<(Complex64, f64)>> {
        self.require_stationary()?;
        let k = self.branching;
        let words = POTENTIAL_WORDS + k as u64;
        let z = self.zeta.as_complex();
        let keyed = KeyedStream::new(self.seed, stream_id2(tag::ROOT_SAMPLES, stream, self.sweeps_done as u64));
        let mut out = vec![(Complex64::new(0.0, 0.0), 0.0); n];
        out.par_chunks_mut(SWEEP_CHUNK).enumerate().for_each(|(c, chunk)| {
            let mut rng = keyed.at((c * SWEEP_CHUNK) as u64, words);
            for slot in chunk.iter_mut() {
                let v = self.dist.draw(&mut rng);
                let (g, s) = pool_combination(&mut rng, v, z, &self.entries, k);
                *slot = (g, s.im);
            }
        });
        if let Some((i, (g, _))) = out
            .iter()
            .enumerate()
            .find(|(_, (g, _))| !(g.im > 0.0 && g.re.is_finite() && g.im.is_finite()))
        {
            return Err(Error::NonFinite {
                location: format!("root sample {i}"),
                detail: format!("G = {g}"),
            });
        }
        Ok(out)
    }

    /// Uniformly chosen pool entries.
    pub(crate) fn draw<R: RngCore>(&self, rng: &mut R) -> Complex64 {
        self.entries[crate::rng::next_index(rng, self.entries.len())]
    }
}

/// Consuming form of [`GreenPool::evolve`].
pub fn evolve_pool(mut pool: GreenPool, sweeps: usize) -> Result<GreenPool> {
    pool.evolve(sweeps)?;
    Ok(pool)
}

/// Drift test between two sweep summaries: stationary when both the mean and the
/// variance of `Im Γ` move by less than two combined standard errors.
pub fn compare_sweeps(a: &SweepStats, b: &SweepStats) -> StationarityReport {
    let mean_drift = (a.mean_im - b.mean_im).abs();
    let mean_tolerance = 2.0 * (a.std_error().powi(2) + b.std_error().powi(2)).sqrt();
    // normal-theory standard error of a sample variance
    let var_se = |s: &SweepStats| s.var_im * (2.0 / (s.n as f64 - 1.0)).sqrt();
    let var_drift = (a.var_im - b.var_im).abs();
    let var_tolerance = 2.0 * (var_se(a).powi(2) + var_se(b).powi(2)).sqrt();
    StationarityReport {
        mean_drift,
        mean_tolerance,
        var_drift,
        var_tolerance,
        stationary: mean_drift <= mean_tolerance && var_drift <= var_tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free(eta: f64, energy: f64, size: usize) -> GreenPool {
        GreenPool::new(
            PotentialDistribution::uniform(0.0).unwrap(),
            2,
            ComplexEnergy::new(energy, eta).unwrap(),
            size,
            1,
        )
        .unwrap()
    }

    #[test]
    fn free_pool_stays_at_fixed_point() {
        let mut pool = free(2.0, 0.0, 1000);
        pool.evolve(100).unwrap();
        let expected = (3f64.sqrt() - 1.0) / 2.0;
        for g in pool.entries() {
            assert!((g - Complex64::new(0.0, expected)).norm() < 1e-6);
        }
    }

    #[test]
    fn free_pool_collapses_from_a_perturbed_start() {
        let mut pool = free(2.0, 0.0, 1000);
        for (i, g) in pool.entries.iter_mut().enumerate() {
            *g = Complex64::new(0.1 * (i % 7) as f64, 0.05 + 0.01 * (i % 13) as f64);
        }
        pool.evolve(100).unwrap();
        for g in pool.entries() {
            assert!((g.im - 0.3660).abs() < 1e-4 && g.re.abs() < 1e-6);
        }
    }

    #[test]
    fn herglotz_every_sweep() {
        let mut pool = GreenPool::new(
            PotentialDistribution::gaussian(2.0).unwrap(),
            3,
            ComplexEnergy::new(0.5, 0.01).unwrap(),
            20_000,
            4,
        )
        .unwrap();
        for s in pool.evolve(30).unwrap() {
            assert!(s.min_im > 0.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let mk = || {
            GreenPool::equilibrated(
                PotentialDistribution::uniform(1.0).unwrap(),
                2,
                ComplexEnergy::new(0.0, 0.01).unwrap(),
                10_000,
                20,
                77,
            )
            .unwrap()
        };
        let a = mk();
        let b = mk();
        assert_eq!(a.entries(), b.entries());
        let ra = a.root_samples(1000, 3).unwrap();
        let rb = b.root_samples(1000, 3).unwrap();
        assert_eq!(ra, rb);
        assert_ne!(ra, a.root_samples(1000, 4).unwrap());
    }

    #[test]
    fn root_samples_require_burn_in() {
        let pool = free(1.0, 0.0, 100);
        assert!(matches!(pool.root_samples(10, 0), Err(Error::NotStationary(_))));
        assert!(pool.with_min_burn_in(0).root_samples(10, 0).is_ok());
    }

    #[test]
    fn free_root_at_band_centre() {
        let mut pool = free(1e-3, 0.0, 1000);
        pool.evolve(100).unwrap();
        let samples = pool.root_samples(100, 0).unwrap();
        for g in samples {
            assert!((g.im - 0.5f64.sqrt()).abs() < 0.01);
        }
    }

    #[test]
    fn root_inequality_per_sample() {
        let pool = GreenPool::equilibrated(
            PotentialDistribution::uniform(1.0).unwrap(),
            2,
            ComplexEnergy::new(0.2, 0.02).unwrap(),
            20_000,
            30,
            5,
        )
        .unwrap();
        for (g, s) in pool.root_samples_detailed(20_000, 0).unwrap() {
            assert!(g.im >= g.norm_sqr() * s * (1.0 - 1e-12));
        }
    }

    #[test]
    fn stationarity_of_a_burnt_in_pool() {
        let mut pool = GreenPool::equilibrated(
            PotentialDistribution::uniform(1.0).unwrap(),
            2,
            ComplexEnergy::new(0.0, 0.05).unwrap(),
            100_000,
            100,
            9,
        )
        .unwrap();
        let report = pool.stationarity(10).unwrap();
        assert!(report.stationary, "{report:?}");
    }
}
