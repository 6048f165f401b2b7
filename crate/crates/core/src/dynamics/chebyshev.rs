//! Chebyshev expansion of `e^{-itH}` with a matrix-free tree matvec.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::disorder::PotentialField;
use crate::error::{Error, Result};
use crate::tree::TreeGeometry;

const MATVEC_CHUNK: usize = 1 << 14;

/// Bessel functions `J_0(x), ..., J_m(x)` for `x >= 0` by Miller's backward recurrence,
/// normalised with `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_sequence(x: f64, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = {
        let s = m.max(x.ceil() as usize) + 30 + (6.0 * x.max(1.0).sqrt()) as usize;
        s + (s % 2)
    };
    let mut next = 0.0; // J_{k+1}
    let mut cur = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next; // J_{k-1}
        next = cur;
        cur = prev;
        let j = k - 1;
        if j <= m {
            out[j] = cur;
        }
        if j % 2 == 0 && j > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// `e^{-iHt}` coefficients of `T_k((H - center)/half_width)`, truncated where
/// `|J_k| < tol` past the turning point `k > half_width * t`.
pub fn propagator_coefficients(half_width: f64, center: f64, t: f64, tol: f64) -> Vec<Complex64> {
    let x = half_width * t.abs();
    let mut m = (x.ceil() as usize + 16).max(16);
    let j = loop {
        let j = bessel_j_sequence(x, m);
        if j[m].abs() < tol * 1e-3 {
            break j;
        }
        m *= 2;
    };
    let cut = (x.floor() as usize..=m)
        .find(|&k| j[k..].iter().all(|v| v.abs() < tol))
        .unwrap_or(m);
    let phase = Complex64::from_polar(1.0, -center * t);
    let minus_i_pow = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    (0..=cut)
        .map(|k| {
            let w = if k == 0 { 1.0 } else { 2.0 };
            // J_k(-x) = (-1)^k J_k(x)
            let jk = j[k] * if k % 2 == 1 { sign } else { 1.0 };
            phase * minus_i_pow[k % 4] * (w * jk)
        })
        .collect()
}

/// Matrix-free `H = -A + V` on the truncated tree.
#[derive(Debug, Clone)]
pub struct TreeOperator<'a> {
    pub field: &'a PotentialField,
    pub geometry: &'a TreeGeometry,
    center: f64,
    half_width: f64,
}

impl<'a> TreeOperator<'a> {
    pub fn new(field: &'a PotentialField, geometry: &'a TreeGeometry) -> Result<Self> {
        if field.len() != geometry.vertex_count() {
            return Err(Error::invalid("field length does not match the tree"));
        }
        let (lo, hi) = field.range();
        // ‖A‖ is bounded by the maximal degree K + 1
        let hop = geometry.branching() as f64 + 1.0;
        let lo = lo - hop;
        let hi = hi + hop;
        Ok(Self {
            field,
            geometry,
            center: 0.5 * (lo + hi),
            half_width: 0.5 * (hi - lo) * 1.01,
        })
    }

    /// `[a, b]` enclosing the spectrum.
    pub fn spectral_enclosure(&self) -> (f64, f64) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    /// `out = alpha ((H - center)/half_width) input + beta prev`.
    fn scaled_apply(&self, input: &[Complex64], prev: &[Complex64], out: &mut [Complex64], alpha: f64, beta: f64) {
        let k = self.geometry.branching();
        let n = input.len();
        let v = &self.field.values;
        let scale = alpha / self.half_width;
        let c = self.center;
        out.par_chunks_mut(MATVEC_CHUNK).enumerate().for_each(|(ci, chunk)| {
            let base = ci * MATVEC_CHUNK;
            for (i, o) in chunk.iter_mut().enumerate() {
                let x = base + i;
                let mut s = input[x] * (v[x] - c);
                if x > 0 {
                    s -= input[(x - 1) / k];
                }
                let c0 = x * k + 1;
                if c0 < n {
                    for y in &input[c0..c0 + k] {
                        s -= y;
                    }
                }
                *o = s * scale + prev[x] * beta;
            }
        });
    }

    /// `H psi`.
    pub fn apply(&self, input: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); input.len()];
        let zero = vec![Complex64::new(0.0, 0.0); input.len()];
        self.scaled_apply(input, &zero, &mut out, self.half_width, 0.0);
        for (o, x) in out.iter_mut().zip(input) {
            *o += x * self.center;
        }
        out
    }

    /// `e^{-iHt} psi` by a Chebyshev sum truncated at `tol`.
    pub fn evolve(&self, psi: &[Complex64], t: f64, tol: f64) -> Vec<Complex64> {
        let coeffs = propagator_coefficients(self.half_width, self.center, t, tol);
        let n = psi.len();
        let mut acc: Vec<Complex64> = psi.iter().map(|x| x * coeffs[0]).collect();
        if coeffs.len() == 1 {
            return acc;
        }
        let mut t_prev = psi.to_vec();
        let mut t_cur = vec![Complex64::new(0.0, 0.0); n];
        let zero = vec![Complex64::new(0.0, 0.0); n];
        self.scaled_apply(&t_prev, &zero, &mut t_cur, 1.0, 0.0);
        let mut t_next = zero;
        for (k, ck) in coeffs.iter().enumerate().skip(1) {
            if k > 1 {
                self.scaled_apply(&t_cur, &t_prev, &mut t_next, 2.0, -1.0);
                std::mem::swap(&mut t_prev, &mut t_cur);
                std::mem::swap(&mut t_cur, &mut t_next);
            }
            let ck = *ck;
            acc.par_chunks_mut(MATVEC_CHUNK)
                .zip(t_cur.par_chunks(MATVEC_CHUNK))
                .for_each(|(a, b)| {
                    for (a, b) in a.iter_mut().zip(b) {
                        *a += b * ck;
                    }
                });
        }
        acc
    }
}
