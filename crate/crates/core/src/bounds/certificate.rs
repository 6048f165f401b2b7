use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed certificate `Pr(d > vt) <= exp(-mu t (v - v_hat))` for a hopping kernel
/// with exponential weight `g(α) = sup_x Σ_y |A(x,y)| e^{α d(x,y)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallisticCertificate {
    pub branching: usize,
    /// `min_{α>0} g(α)/α`.
    pub v_hat: f64,
    /// The minimising `α`.
    pub mu: f64,
    /// `g(mu)`.
    pub g_at_mu: f64,
}

impl BallisticCertificate {
    /// `exp(-mu t (v - v_hat))`.
    pub fn tail_bound(&self, v: f64, t: f64) -> f64 {
        (-self.mu * t * (v - self.v_hat)).exp()
    }
}

/// `g(α)` for the tree adjacency: every vertex has at most `K + 1` neighbours at distance one.
pub fn tree_weight_function(branching: usize, alpha: f64) -> f64 {
    (branching as f64 + 1.0) * alpha.exp()
}

pub fn ballistic_certificate(branching: usize) -> Result<BallisticCertificate> {
    if branching < 2 {
        return Err(Error::invalid("branching number must be at least 2"));
    }
    let g = |a: f64| tree_weight_function(branching, a);
    // stationarity of g(α)/α: α g'(α) = g(α); g' by central differences
    let dg = |a: f64| {
        let h = 1e-6 * a.max(1.0);
        (g(a + h) - g(a - h)) / (2.0 * h)
    };
    let f = |a: f64| a * dg(a) / g(a) - 1.0;
    let (mut lo, mut hi) = (1e-3, 50.0);
    if !(f(lo) < 0.0 && f(hi) > 0.0) {
        return Err(Error::invalid("no interior minimiser of g(α)/α"));
    }
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let cert = BallisticCertificate { branching, v_hat: g(mu) / mu, mu, g_at_mu: g(mu) };
    let closed = (branching as f64 + 1.0) * std::f64::consts::E;
    if (cert.v_hat - closed).abs() > 1e-8 * closed || (cert.mu - 1.0).abs() > 1e-8 {
        return Err(Error::NonFinite {
            location: "ballistic certificate".into(),
            detail: format!("numeric minimiser {cert:?} disagrees with the closed form"),
        });
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let c2 = ballistic_certificate(2).unwrap();
        assert!((c2.v_hat - 8.154_845_485_377_136).abs() < 1e-8);
        assert!((c2.mu - 1.0).abs() < 1e-8);
        let c3 = ballistic_certificate(3).unwrap();
        assert!((c3.v_hat - 4.0 * std::f64::consts::E).abs() < 1e-8);
        assert!((c3.v_hat - 10.873).abs() < 1e-3);
        assert!(ballistic_certificate(1).is_err());
        assert!((c2.tail_bound(c2.v_hat, 3.0) - 1.0).abs() < 1e-12);
    }
}
