//! Single-site potential distributions and seeded potential fields.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::rng::{open_unit_f64, stream_id, tag, unit_f64, KeyedStream, POTENTIAL_WORDS};
use crate::tree::TreeGeometry;

const FIELD_CHUNK: usize = 1 << 14;

/// Law of the i.i.d. on-site potential.
///
/// A uniform law of width zero is accepted and stands for the disorder-free
/// operator (`V == 0`); its density is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialDistribution {
    /// Uniform on `[-W/2, W/2]`.
    Uniform { width: f64 },
    /// Centred normal law.
    Gaussian { sigma: f64 },
    /// Piecewise-constant density on the bins `edges[i]..edges[i + 1]`.
    #[serde(rename = "bounded-user")]
    Table { edges: Vec<f64>, density: Vec<f64> },
}

impl PotentialDistribution {
    pub fn uniform(width: f64) -> Result<Self> {
        let d = PotentialDistribution::Uniform { width };
        d.validate()?;
        Ok(d)
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        let d = PotentialDistribution::Gaussian { sigma };
        d.validate()?;
        Ok(d)
    }

    /// Table density, normalised to unit mass.
    pub fn table(edges: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        let mut d = PotentialDistribution::Table { edges, density };
        d.validate()?;
        if let PotentialDistribution::Table { edges, density } = &mut d {
            let mass: f64 = bins(edges).zip(density.iter()).map(|((a, b), p)| (b - a) * p).sum();
            density.iter_mut().for_each(|p| *p /= mass);
        }
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialDistribution::Uniform { width } => {
                if !(width.is_finite() && *width >= 0.0) {
                    return Err(Error::invalid(format!("uniform width must be >= 0, got {width}")));
                }
            }
            PotentialDistribution::Gaussian { sigma } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return Err(Error::invalid(format!("gaussian sigma must be > 0, got {sigma}")));
                }
            }
            PotentialDistribution::Table { edges, density } => {
                if edges.len() < 2 || edges.len() != density.len() + 1 {
                    return Err(Error::invalid(
                        "density table needs n+1 edges for n bins (n >= 1)",
                    ));
                }
                if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::invalid("table edges must be finite and strictly increasing"));
                }
                if density.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(Error::invalid("table densities must be finite and non-negative"));
                }
                let mass: f64 = bins(edges).zip(density.iter()).map(|((a, b), p)| (b - a) * p).sum();
                if mass <= 0.0 {
                    return Err(Error::invalid("table density has zero mass"));
                }
            }
        }
        Ok(())
    }

    /// Draw from two uniform words; every draw consumes exactly [`POTENTIAL_WORDS`] words.
    #[inline]
    pub fn draw_from_words(&self, w0: u64, w1: u64) -> f64 {
        match self {
            PotentialDistribution::Uniform { width } => (unit_f64(w0) - 0.5) * width,
            PotentialDistribution::Gaussian { sigma } => {
                // Box-Muller, cosine branch only
                let r = (-2.0 * open_unit_f64(w0).ln()).sqrt();
                sigma * r * (std::f64::consts::TAU * unit_f64(w1)).cos()
            }
            PotentialDistribution::Table { edges, density } => {
                let u = unit_f64(w0);
                let mut acc = 0.0;
                for (i, ((a, b), p)) in bins(edges).zip(density.iter()).enumerate() {
                    let m = (b - a) * p;
                    if u < acc + m || i == density.len() - 1 {
                        if m <= 0.0 {
                            return a;
                        }
                        return (a + (u - acc) / p).min(b);
                    }
                    acc += m;
                }
                unreachable!("validated table has at least one bin")
            }
        }
    }

    #[inline]
    pub fn draw<R: RngCore>(&self, rng: &mut R) -> f64 {
        let w0 = rng.next_u64();
        let w1 = rng.next_u64();
        self.draw_from_words(w0, w1)
    }

    /// `‖ρ‖_∞`; infinite for the degenerate zero-width law.
    pub fn density_sup(&self) -> f64 {
        match self {
            PotentialDistribution::Uniform { width } => {
                if *width == 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / width
                }
            }
            PotentialDistribution::Gaussian { sigma } => {
                1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            PotentialDistribution::Table { density, .. } => {
                density.iter().cloned().fold(0.0, f64::max)
            }
        }
    }

    /// `E|V|^r`. Reported as infinite when the integral diverges.
    pub fn abs_moment(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::invalid(format!("moment order must be >= 0, got {r}")));
        }
        if r == 0.0 {
            return Ok(1.0);
        }
        let m = match self {
            PotentialDistribution::Uniform { width } => (width / 2.0).powf(r) / (r + 1.0),
            PotentialDistribution::Gaussian { sigma } => {
                sigma.powf(r) * 2f64.powf(r / 2.0) * gamma((r + 1.0) / 2.0)
                    / std::f64::consts::PI.sqrt()
            }
            PotentialDistribution::Table { edges, density } => bins(edges)
                .zip(density.iter())
                .map(|((a, b), p)| p * abs_power_integral(a, b, r))
                .sum(),
        };
        Ok(if m.is_finite() { m } else { f64::INFINITY })
    }

    /// `P(|V| >= a)` for `a >= 0`.
    pub fn tail_prob(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 1.0;
        }
        match self {
            PotentialDistribution::Uniform { width } => {
                if *width == 0.0 {
                    0.0
                } else {
                    (1.0 - 2.0 * a / width).max(0.0)
                }
            }
            PotentialDistribution::Gaussian { sigma } => erfc(a / (sigma * std::f64::consts::SQRT_2)),
            PotentialDistribution::Table { .. } => 1.0 - self.cdf(a) + self.cdf(-a),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            PotentialDistribution::Uniform { width } => {
                if *width == 0.0 {
                    if x >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    (x / width + 0.5).clamp(0.0, 1.0)
                }
            }
            PotentialDistribution::Gaussian { sigma } => {
                0.5 * erfc(-x / (sigma * std::f64::consts::SQRT_2))
            }
            PotentialDistribution::Table { edges, density } => bins(edges)
                .zip(density.iter())
                .map(|((a, b), p)| p * (x.min(b) - a).max(0.0))
                .sum::<f64>()
                .min(1.0),
        }
    }
}

fn bins(edges: &[f64]) -> impl Iterator<Item = (f64, f64)> + '_ {
    edges.windows(2).map(|w| (w[0], w[1]))
}

/// `∫_a^b |v|^r dv` for `a < b`.
fn abs_power_integral(a: f64, b: f64, r: f64) -> f64 {
    let prim = |v: f64| v.abs().powf(r + 1.0) / (r + 1.0);
    if a >= 0.0 {
        prim(b) - prim(a)
    } else if b <= 0.0 {
        prim(a) - prim(b)
    } else {
        prim(a) + prim(b)
    }
}

/// Potential values over the vertices of a tree, in shell-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    pub values: Vec<f64>,
    pub seed: u64,
    /// `None` for hand-built fields.
    pub distribution: Option<PotentialDistribution>,
}

impl PotentialField {
    /// Field with prescribed values, used by tests and oracles.
    pub fn from_values(values: Vec<f64>, geometry: &TreeGeometry) -> Result<Self> {
        if values.len() != geometry.vertex_count() {
            return Err(Error::invalid(format!(
                "field has {} values but the tree has {} vertices",
                values.len(),
                geometry.vertex_count()
            )));
        }
        Ok(Self {
            values,
            seed: 0,
            distribution: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(min V, max V)`.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// I.i.d. field, one draw per vertex. Bit-identical for equal inputs and independent of
/// the number of worker threads.
pub fn sample_field(
    dist: &PotentialDistribution,
    geometry: &TreeGeometry,
    seed: u64,
) -> Result<PotentialField> {
    dist.validate()?;
    let stream = KeyedStream::new(seed, stream_id(tag::FIELD, 0));
    let mut values = vec![0.0; geometry.vertex_count()];
    values
        .par_chunks_mut(FIELD_CHUNK)
        .enumerate()
        .for_each(|(chunk, out)| {
            let mut rng = stream.at((chunk * FIELD_CHUNK) as u64, POTENTIAL_WORDS);
            for v in out.iter_mut() {
                *v = dist.draw(&mut rng);
            }
        });
    Ok(PotentialField {
        values,
        seed,
        distribution: Some(dist.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geometry_with(n_min: usize) -> TreeGeometry {
        let mut d = 0;
        loop {
            let g = TreeGeometry::new(2, d).unwrap();
            if g.vertex_count() >= n_min {
                return g;
            }
            d += 1;
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(PotentialDistribution::uniform(-1.0).is_err());
        assert!(PotentialDistribution::gaussian(0.0).is_err());
        assert!(PotentialDistribution::table(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(PotentialDistribution::table(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn uniform_support_and_determinism() {
        let g = TreeGeometry::new(2, 12).unwrap();
        let d = PotentialDistribution::uniform(1.0).unwrap();
        let a = sample_field(&d, &g, 7).unwrap();
        let b = sample_field(&d, &g, 7).unwrap();
        assert_eq!(a.values, b.values);
        assert!(a.values.iter().all(|v| (-0.5..=0.5).contains(v)));
        let c = sample_field(&d, &g, 8).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn closed_forms() {
        let u1 = PotentialDistribution::uniform(1.0).unwrap();
        assert_eq!(u1.density_sup(), 1.0);
        let g1 = PotentialDistribution::gaussian(1.0).unwrap();
        assert_relative_eq!(g1.density_sup(), 0.398_942_280_401_432_7, epsilon = 1e-15);
        let u2 = PotentialDistribution::uniform(2.0).unwrap();
        assert_relative_eq!(u2.abs_moment(2.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        // E|X|^2 = sigma^2 and E|X| = sigma sqrt(2/pi) for a normal law.
        assert_relative_eq!(g1.abs_moment(2.0).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            g1.abs_moment(1.0).unwrap(),
            (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
        assert!(g1.abs_moment(13.0).unwrap().is_finite());
        assert!(u1.abs_moment(-1.0).is_err());
        assert_eq!(u1.tail_prob(0.5), 0.0);
        assert_relative_eq!(u2.tail_prob(0.5), 0.5);
    }

    #[test]
    fn table_matches_uniform() {
        let t = PotentialDistribution::table(vec![-1.0, 0.0, 1.0], vec![3.0, 3.0]).unwrap();
        let u = PotentialDistribution::uniform(2.0).unwrap();
        assert_relative_eq!(t.density_sup(), 0.5);
        for r in [0.5, 1.0, 2.0, 13.0] {
            assert_relative_eq!(t.abs_moment(r).unwrap(), u.abs_moment(r).unwrap(), epsilon = 1e-14);
        }
        for x in [-0.7, 0.0, 0.3] {
            assert_relative_eq!(t.cdf(x), u.cdf(x), epsilon = 1e-14);
            assert_relative_eq!(t.tail_prob(x.abs()), u.tail_prob(x.abs()), epsilon = 1e-14);
        }
    }

    #[test]
    fn uniform_sample_moments() {
        let g = geometry_with(1_000_000);
        let d = PotentialDistribution::uniform(2.0).unwrap();
        let f = sample_field(&d, &g, 2024).unwrap();
        let n = f.len() as f64;
        let mean = f.values.iter().sum::<f64>() / n;
        let var = f.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sigma_mean = (1.0f64 / 3.0 / n).sqrt();
        assert!(mean.abs() < 4.0 * sigma_mean, "mean {mean}");
        assert!((var - 1.0 / 3.0).abs() < 0.05 / 3.0, "var {var}");
    }

    fn ks_distance(dist: &PotentialDistribution, values: &[f64]) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        v.iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = dist.cdf(x);
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn empirical_cdf_matches() {
        let g = geometry_with(1_000_000);
        for dist in [
            PotentialDistribution::uniform(3.0).unwrap(),
            PotentialDistribution::gaussian(1.5).unwrap(),
            PotentialDistribution::table(vec![-1.0, 0.0, 2.0], vec![1.0, 0.25]).unwrap(),
        ] {
            let f = sample_field(&dist, &g, 99).unwrap();
            let ks = ks_distance(&dist, &f.values);
            assert!(ks < 0.002, "{dist:?}: KS {ks}");
        }
    }

    #[test]
    fn lag_correlations_are_small() {
        let g = geometry_with(1_000_000);
        let d = PotentialDistribution::gaussian(1.0).unwrap();
        let f = sample_field(&d, &g, 5).unwrap();
        let n = f.len();
        let mean = f.values.iter().sum::<f64>() / n as f64;
        let var = f.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        for lag in [1usize, 2, 3, 7, 16384] {
            let c = (0..n - lag)
                .map(|i| (f.values[i] - mean) * (f.values[i + lag] - mean))
                .sum::<f64>()
                / ((n - lag) as f64 * var);
            assert!(c.abs() < 4.0 / (n as f64).sqrt(), "lag {lag}: {c}");
        }
    }

    #[test]
    fn chunking_does_not_matter() {
        // a field must equal the same draws taken sequentially from slot 0
        let g = TreeGeometry::new(2, 15).unwrap();
        let d = PotentialDistribution::gaussian(1.0).unwrap();
        let f = sample_field(&d, &g, 3).unwrap();
        let mut rng = KeyedStream::new(3, stream_id(tag::FIELD, 0)).at(0, POTENTIAL_WORDS);
        for v in &f.values {
            assert_eq!(*v, d.draw(&mut rng));
        }
    }
}
