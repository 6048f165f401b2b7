//! Dense spectral references for small trees.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{EnergyWindow, ProfileTag, ShellProfile};
use crate::disorder::PotentialField;
use crate::error::Result;
use crate::green::dense_hamiltonian;
use crate::tree::TreeGeometry;

fn eigen(field: &PotentialField, geometry: &TreeGeometry) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    Ok(SymmetricEigen::new(dense_hamiltonian(field, geometry)?))
}

/// `e^{-itH} δ_0` by eigendecomposition.
pub fn dense_propagate(field: &PotentialField, geometry: &TreeGeometry, t: f64) -> Result<Vec<Complex64>> {
    let eig = eigen(field, geometry)?;
    let u = &eig.eigenvectors;
    let n = u.nrows();
    let phases: Vec<Complex64> = (0..n)
        .map(|l| Complex64::from_polar(u[(0, l)], -eig.eigenvalues[l] * t))
        .collect();
    Ok((0..n)
        .map(|x| (0..n).map(|l| phases[l] * u[(x, l)]).sum())
        .collect())
}

/// `(η/π) ∫_window Σ_x |G(x,0;E+iη)|^2 dE`, summed over eigenvalues in closed form.
pub fn dense_window_mass(
    field: &PotentialField,
    geometry: &TreeGeometry,
    window: &EnergyWindow,
    eta: f64,
) -> Result<f64> {
    let eig = eigen(field, geometry)?;
    let u = &eig.eigenvectors;
    Ok((0..u.ncols())
        .map(|l| {
            let lam = eig.eigenvalues[l];
            let w = ((window.upper - lam) / eta).atan() - ((window.lower - lam) / eta).atan();
            u[(0, l)].powi(2) * w / std::f64::consts::PI
        })
        .sum())
}

/// Per-shell `(η/π) ∫_window |G(x,0;E+iη)|^2 dE` with the energy integral done exactly
/// for every eigenvalue pair.
pub fn dense_hat_profile(
    field: &PotentialField,
    geometry: &TreeGeometry,
    window: &EnergyWindow,
    eta: f64,
) -> Result<ShellProfile> {
    let eig = eigen(field, geometry)?;
    let u = &eig.eigenvectors;
    let n = u.nrows();
    let (e1, e2) = (window.lower, window.upper);
    // I(λ,μ) = (η/π) ∫ dE / ((λ - E - iη)(μ - E + iη))
    let log_ratio = |a: Complex64| ((a - e2) / (a - e1)).ln();
    let mut pair = DMatrix::<Complex64>::zeros(n, n);
    for l in 0..n {
        let a = Complex64::new(eig.eigenvalues[l], -eta);
        for m in 0..n {
            let b = Complex64::new(eig.eigenvalues[m], eta);
            pair[(l, m)] = (log_ratio(b) - log_ratio(a)) / (b - a) * (eta / std::f64::consts::PI);
        }
    }
    let mut mass = vec![0.0; geometry.depth() + 1];
    for x in 0..n {
        let c: Vec<f64> = (0..n).map(|l| u[(x, l)] * u[(0, l)]).collect();
        let mut k = Complex64::new(0.0, 0.0);
        for l in 0..n {
            for m in 0..n {
                k += pair[(l, m)] * (c[l] * c[m]);
            }
        }
        mass[geometry.shell_of(x)?] += k.re;
    }
    Ok(ShellProfile::new(mass, ProfileTag::Eta(eta)))
}
