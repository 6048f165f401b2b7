//! Resolvent of the truncated tree operator `H = -A + V`.
//!
//! The upward sweep computes, for every vertex `x`, the diagonal Green function
//! of the subtree hanging below `x` once its parent is removed,
//!
//! ```text
//! gamma[x] = 1 / (V(x) - z - sum_{c child of x} gamma[c]),
//! ```
//!
//! deepest shell first. At the root this is `G(0,0;z)` itself. The downward
//! pass then uses the path factorisation `G(0,x) = G(0,parent(x)) gamma[x]`.
//! Both passes are flat loops over contiguous shell blocks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::PotentialField;
use crate::error::{Error, Result};
use crate::population::GreenPool;
use crate::rng::{next_index, stream_id, tag, KeyedStream};
use crate::tree::TreeGeometry;

/// Matrices above this size are refused by [`dense_oracle`].
pub const DENSE_LIMIT: usize = 5000;

const PAR_BLOCK: usize = 1 << 14;

/// Spectral parameter `z = E + i eta` with `eta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(f64, f64)", into = "(f64, f64)")]
pub struct ComplexEnergy {
    re: f64,
    im: f64,
}

impl ComplexEnergy {
    pub fn new(energy: f64, eta: f64) -> Result<Self> {
        if !(energy.is_finite() && eta.is_finite() && eta > 0.0) {
            return Err(Error::invalid(format!(
                "spectral parameter needs finite E and eta > 0, got E={energy}, eta={eta}"
            )));
        }
        Ok(Self { re: energy, im: eta })
    }

    #[inline]
    pub fn energy(&self) -> f64 {
        self.re
    }

    #[inline]
    pub fn eta(&self) -> f64 {
        self.im
    }

    #[inline]
    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Upper-half-plane root of `K g^2 + z g + 1 = 0`: the forward Green function
    /// of the disorder-free tree.
    pub fn free_forward_green(&self, branching: usize) -> Complex64 {
        let k = branching as f64;
        let z = self.as_complex();
        let disc = (z * z - 4.0 * k).sqrt();
        let a = (-z + disc) / (2.0 * k);
        let b = (-z - disc) / (2.0 * k);
        if a.im > 0.0 {
            a
        } else {
            b
        }
    }
}

impl TryFrom<(f64, f64)> for ComplexEnergy {
    type Error = Error;

    fn try_from((re, im): (f64, f64)) -> Result<Self> {
        ComplexEnergy::new(re, im)
    }
}

impl From<ComplexEnergy> for (f64, f64) {
    fn from(z: ComplexEnergy) -> Self {
        (z.re, z.im)
    }
}

/// How the deepest shell is closed off.
#[derive(Debug, Clone, Copy)]
pub enum Boundary<'a> {
    /// Dirichlet truncation: the exact finite-volume operator.
    Zero,
    /// Each leaf is attached to `K` forward Green functions drawn from a pool.
    Pool { pool: &'a GreenPool, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    Zero,
    PoolSampled,
}

impl Boundary<'_> {
    pub fn mode(&self) -> BoundaryMode {
        match self {
            Boundary::Zero => BoundaryMode::Zero,
            Boundary::Pool { .. } => BoundaryMode::PoolSampled,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardGreenField {
    pub gamma: Vec<Complex64>,
    pub boundary_mode: BoundaryMode,
}

#[derive(Debug, Clone)]
pub struct GreenColumn {
    /// `G(0,x;z)` for every vertex `x`.
    pub g0x: Vec<Complex64>,
    pub g00: Complex64,
}

impl GreenColumn {
    /// `sum_{|x| = n} |G(0,x;z)|^2` for every shell.
    pub fn shell_weights(&self, geometry: &TreeGeometry) -> Vec<f64> {
        shell_norms(&self.g0x, geometry)
    }
}

#[inline]
pub(crate) fn inv(z: Complex64) -> Complex64 {
    let d = z.re * z.re + z.im * z.im;
    Complex64::new(z.re / d, -z.im / d)
}

fn check_inputs(field: &PotentialField, geometry: &TreeGeometry, z: ComplexEnergy) -> Result<()> {
    if field.len() != geometry.vertex_count() {
        return Err(Error::invalid(format!(
            "field length {} does not match vertex count {}",
            field.len(),
            geometry.vertex_count()
        )));
    }
    if !(z.eta() > 0.0) {
        return Err(Error::invalid("eta must be positive"));
    }
    Ok(())
}

fn check_boundary(boundary: &Boundary<'_>, geometry: &TreeGeometry, z: ComplexEnergy) -> Result<()> {
    if let Boundary::Pool { pool, .. } = boundary {
        if pool.branching() != geometry.branching() {
            return Err(Error::invalid("pool branching differs from the tree's"));
        }
        if pool.zeta() != z {
            return Err(Error::invalid(format!(
                "pool was built at {:?}, sweep requested at {:?}",
                pool.zeta(),
                z
            )));
        }
    }
    Ok(())
}

/// Upward sweep into a caller-provided buffer of length `vertex_count`.
pub fn forward_sweep_into(
    gamma: &mut [Complex64],
    field: &PotentialField,
    geometry: &TreeGeometry,
    z: ComplexEnergy,
    boundary: Boundary<'_>,
) -> Result<()> {
    check_inputs(field, geometry, z)?;
    check_boundary(&boundary, geometry, z)?;
    assert_eq!(gamma.len(), geometry.vertex_count());
    let zc = z.as_complex();
    let k = geometry.branching();
    let v = &field.values;

    // leaves
    let leaves = geometry.shell_range(geometry.depth());
    let first_leaf = leaves.start;
    match boundary {
        Boundary::Zero => {
            gamma[leaves.clone()]
                .par_chunks_mut(PAR_BLOCK)
                .enumerate()
                .for_each(|(c, out)| {
                    let base = first_leaf + c * PAR_BLOCK;
                    for (i, g) in out.iter_mut().enumerate() {
                        *g = inv(Complex64::new(v[base + i], 0.0) - zc);
                    }
                });
        }
        Boundary::Pool { pool, seed } => {
            let entries = pool.entries();
            let stream = KeyedStream::new(seed, stream_id(tag::BOUNDARY, 0));
            gamma[leaves.clone()]
                .par_chunks_mut(PAR_BLOCK)
                .enumerate()
                .for_each(|(c, out)| {
                    let base = first_leaf + c * PAR_BLOCK;
                    let mut rng = stream.at(base as u64, k as u64);
                    for (i, g) in out.iter_mut().enumerate() {
                        let mut s = Complex64::new(0.0, 0.0);
                        for _ in 0..k {
                            s += entries[next_index(&mut rng, entries.len())];
                        }
                        *g = inv(Complex64::new(v[base + i], 0.0) - zc - s);
                    }
                });
        }
    }

    // interior shells, deepest first
    for n in (0..geometry.depth()).rev() {
        let range = geometry.shell_range(n);
        let (head, tail) = gamma.split_at_mut(range.end);
        let shell = &mut head[range.start..];
        let below = &*tail;
        let child_base = range.end;
        shell
            .par_chunks_mut(PAR_BLOCK)
            .enumerate()
            .for_each(|(c, out)| {
                let first = range.start + c * PAR_BLOCK;
                for (i, g) in out.iter_mut().enumerate() {
                    let x = first + i;
                    let c0 = x * k + 1 - child_base;
                    let s: Complex64 = below[c0..c0 + k].iter().sum();
                    *g = inv(Complex64::new(v[x], 0.0) - zc - s);
                }
            });
    }

    if let Some((x, g)) = gamma.iter().enumerate().find(|(_, g)| !(g.re.is_finite() && g.im.is_finite())) {
        return Err(Error::NonFinite {
            location: format!("forward sweep, vertex {x}"),
            detail: format!("gamma = {g}, V = {}, z = {zc}", v[x]),
        });
    }
    Ok(())
}

pub fn forward_sweep(
    field: &PotentialField,
    geometry: &TreeGeometry,
    z: ComplexEnergy,
    boundary: Boundary<'_>,
) -> Result<ForwardGreenField> {
    let mut gamma = vec![Complex64::new(0.0, 0.0); geometry.vertex_count()];
    forward_sweep_into(&mut gamma, field, geometry, z, boundary)?;
    Ok(ForwardGreenField {
        gamma,
        boundary_mode: boundary.mode(),
    })
}

/// Turns a forward field into the column `G(0,.)` in place.
///
/// Indices increase away from the root, so each parent is already converted
/// when its children are visited.
pub(crate) fn column_in_place(values: &mut [Complex64], geometry: &TreeGeometry) {
    let k = geometry.branching();
    for x in 1..values.len() {
        let p = (x - 1) / k;
        values[x] = values[p] * values[x];
    }
}

pub(crate) fn shell_norms(column: &[Complex64], geometry: &TreeGeometry) -> Vec<f64> {
    (0..=geometry.depth())
        .map(|n| column[geometry.shell_range(n)].iter().map(|g| g.norm_sqr()).sum())
        .collect()
}

pub fn resolvent_column(
    field: &PotentialField,
    geometry: &TreeGeometry,
    z: ComplexEnergy,
    boundary: Boundary<'_>,
) -> Result<GreenColumn> {
    let ForwardGreenField { mut gamma, .. } = forward_sweep(field, geometry, z, boundary)?;
    column_in_place(&mut gamma, geometry);
    let g00 = gamma[0];
    Ok(GreenColumn { g0x: gamma, g00 })
}

/// Reusable buffer for repeated columns on one tree.
#[derive(Debug, Clone)]
pub struct ColumnWorkspace {
    buffer: Vec<Complex64>,
}

impl ColumnWorkspace {
    pub fn new(geometry: &TreeGeometry) -> Self {
        Self {
            buffer: vec![Complex64::new(0.0, 0.0); geometry.vertex_count()],
        }
    }

    /// Shell weights `sum_{|x|=n} |G(0,x;z)|^2` without allocating.
    pub fn shell_weights(
        &mut self,
        field: &PotentialField,
        geometry: &TreeGeometry,
        z: ComplexEnergy,
        boundary: Boundary<'_>,
    ) -> Result<Vec<f64>> {
        forward_sweep_into(&mut self.buffer, field, geometry, z, boundary)?;
        column_in_place(&mut self.buffer, geometry);
        Ok(shell_norms(&self.buffer, geometry))
    }
}

/// Explicit matrix of `H = -A + V` on the truncated tree.
pub fn dense_hamiltonian(field: &PotentialField, geometry: &TreeGeometry) -> Result<DMatrix<f64>> {
    let n = geometry.vertex_count();
    if n > DENSE_LIMIT {
        return Err(Error::SizeGuard { size: n, limit: DENSE_LIMIT });
    }
    if field.len() != n {
        return Err(Error::invalid("field length does not match the tree"));
    }
    let mut h = DMatrix::<f64>::zeros(n, n);
    for x in 0..n {
        h[(x, x)] = field.values[x];
        for c in geometry.children_unchecked(x) {
            h[(x, c)] = -1.0;
            h[(c, x)] = -1.0;
        }
    }
    Ok(h)
}

/// Column of `(H - z)^{-1}` through the root by LU elimination on the explicit matrix.
pub fn dense_oracle(field: &PotentialField, geometry: &TreeGeometry, z: ComplexEnergy) -> Result<GreenColumn> {
    let h = dense_hamiltonian(field, geometry)?;
    let n = h.nrows();
    let zc = z.as_complex();
    let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
        let d = if i == j { zc } else { Complex64::new(0.0, 0.0) };
        Complex64::new(h[(i, j)], 0.0) - d
    });
    let mut rhs = nalgebra::DVector::<Complex64>::zeros(n);
    rhs[0] = Complex64::new(1.0, 0.0);
    let u = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonFinite {
            location: "dense oracle".into(),
            detail: "singular matrix".into(),
        })?;
    let g0x: Vec<Complex64> = u.iter().cloned().collect();
    Ok(GreenColumn { g00: g0x[0], g0x })
}

/// Householder reduction `H = Q T Q^T` of the explicit matrix, for oracle columns at many `z`.
///
/// Each column is `Q (T - z)^{-1} Q^T e_0`. The tridiagonal solve needs no pivoting: every
/// pivot has imaginary part at most `-Im z`.
#[derive(Debug, Clone)]
pub struct DenseTridiagonal {
    q: DMatrix<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl DenseTridiagonal {
    pub fn new(field: &PotentialField, geometry: &TreeGeometry) -> Result<Self> {
        let (q, diag, off) = nalgebra::linalg::SymmetricTridiagonal::new(dense_hamiltonian(field, geometry)?).unpack();
        Ok(Self { q, diag: diag.iter().copied().collect(), off: off.iter().copied().collect() })
    }

    pub fn column(&self, z: ComplexEnergy) -> GreenColumn {
        let zc = z.as_complex();
        let n = self.diag.len();
        // forward elimination on (T - z) y = Q^T e_0
        let mut piv = Vec::with_capacity(n);
        let mut y: Vec<Complex64> = Vec::with_capacity(n);
        for i in 0..n {
            let mut d = Complex64::new(self.diag[i], 0.0) - zc;
            let mut r = Complex64::new(self.q[(0, i)], 0.0);
            if i > 0 {
                let l = self.off[i - 1] / piv[i - 1];
                d -= l * self.off[i - 1];
                r -= l * y[i - 1];
            }
            piv.push(d);
            y.push(r);
        }
        for i in (0..n).rev() {
            let carry = if i + 1 < n { self.off[i] * y[i + 1] } else { Complex64::new(0.0, 0.0) };
            y[i] = (y[i] - carry) / piv[i];
        }
        let g0x: Vec<Complex64> = (0..n)
            .map(|x| (0..n).map(|k| self.q[(x, k)] * y[k]).sum())
            .collect();
        GreenColumn { g00: g0x[0], g0x }
    }
}

/// Largest relative deviation `max_x |a_x - b_x| / max_x |b_x|` between two columns.
pub fn max_relative_error(a: &GreenColumn, b: &GreenColumn) -> f64 {
    let scale = b.g0x.iter().map(|g| g.norm()).fold(0.0, f64::max);
    a.g0x
        .iter()
        .zip(&b.g0x)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / scale
}

/// Draw `n` forward Green functions `1/(V - z - sum of draws)` with `draws` pool entries each.
pub(crate) fn pool_combination<R: RngCore>(
    rng: &mut R,
    v: f64,
    z: Complex64,
    entries: &[Complex64],
    draws: usize,
) -> (Complex64, Complex64) {
    let mut s = Complex64::new(0.0, 0.0);
    for _ in 0..draws {
        s += entries[next_index(rng, entries.len())];
    }
    (inv(Complex64::new(v, 0.0) - z - s), s)
}
