use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::certificate::BallisticCertificate;
use super::report::{sigma_margin, BoundId, BoundReport, Confidence, Verdict};
use crate::disorder::{PotentialDistribution, PotentialField};
use crate::dynamics::{hat_distribution, lingering, EnergyWindow, HatBoundary, HatOptions, TransportReport};
use crate::error::{Error, Result};
use crate::green::ComplexEnergy;
use crate::population::{
    cdf_abs, cdf_im, fractional_path_moment, FreeEnergyEstimate, GreenPool, PowerLawTail, TailStatus,
    HEAVY_TAIL_SHARE,
};
use crate::stats::{weighted_line_fit, Accumulator, MomentEstimate};
use crate::tree::TreeGeometry;

/// Absolute slack for tails that are exact up to the propagation tolerance.
const TAIL_SLACK: f64 = 1e-10;

pub fn check_ballistic_tail(report: &TransportReport, cert: &BallisticCertificate) -> BoundReport {
    #[derive(Serialize)]
    struct Inputs<'a> {
        times: &'a [f64],
        tails: &'a [crate::dynamics::TailSeries],
        certificate: &'a BallisticCertificate,
    }
    let mut out = BoundReport::new(
        BoundId::BallisticTail,
        &Inputs { times: &report.times, tails: &report.tails, certificate: cert },
    );
    out.threshold("v_hat", cert.v_hat).threshold("mu", cert.mu);
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut contaminated = 0usize;
    let mut worst_ratio = 0.0f64;
    let mut worst_gap = f64::INFINITY;
    for series in report.tails.iter().filter(|s| s.v > cert.v_hat) {
        for (i, &t) in report.times.iter().enumerate() {
            if !(t > 0.0) {
                continue;
            }
            let tail = series.max[i];
            let bound = cert.tail_bound(series.v, t);
            checked += 1;
            if report.contaminated[i] {
                contaminated += 1;
            }
            if tail > bound + TAIL_SLACK {
                violations += 1;
            }
            worst_ratio = worst_ratio.max(tail / bound);
            worst_gap = worst_gap.min(bound - tail);
        }
    }
    out.estimate("points_checked", checked as f64)
        .estimate("violations", violations as f64)
        .estimate("worst_tail_over_bound", worst_ratio)
        .estimate("worst_gap", worst_gap);
    if contaminated > 0 {
        out.note(format!(
            "{contaminated} checked points carry boundary mass; the bound holds for the truncated operator as well"
        ));
    }
    if checked == 0 {
        out.note("no grid velocity exceeds v_hat");
        return out.finish(f64::NAN, Verdict::Inconclusive);
    }
    // deterministic comparison: the margin is the smallest bound-minus-tail gap
    let verdict = if violations == 0 { Verdict::Pass } else { Verdict::Fail };
    out.finish(worst_gap, verdict)
}

/// `K^n E|G(0,x_n)|^2` along a ray at one spectral parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondMomentSeries {
    pub zeta: ComplexEnergy,
    pub branching: usize,
    pub lengths: Vec<usize>,
    pub log_scaled: Vec<f64>,
    pub log_std_error: Vec<f64>,
    pub max_share: Vec<f64>,
}

pub fn second_moment_series(pool: &GreenPool, lengths: &[usize], n_samples: usize) -> Result<SecondMomentSeries> {
    let log_k = (pool.branching() as f64).ln();
    let mut log_scaled = Vec::with_capacity(lengths.len());
    let mut log_std_error = Vec::with_capacity(lengths.len());
    let mut max_share = Vec::with_capacity(lengths.len());
    for &n in lengths {
        let m = fractional_path_moment(pool, 2.0, n, n_samples, 0)?;
        log_scaled.push(n as f64 * log_k + m.estimate.mean.ln());
        log_std_error.push(m.estimate.std_error / m.estimate.mean);
        max_share.push(m.max_share);
    }
    Ok(SecondMomentSeries {
        zeta: pool.zeta(),
        branching: pool.branching(),
        lengths: lengths.to_vec(),
        log_scaled,
        log_std_error,
        max_share,
    })
}

pub fn check_second_moment_decay(series: &[SecondMomentSeries], conf: &Confidence) -> BoundReport {
    let mut out = BoundReport::new(BoundId::SecondMomentDecay, &series);
    out.threshold("slope_max_sigma", conf.sigma);
    if series.is_empty() {
        return out.finish(f64::NAN, Verdict::Inconclusive);
    }
    let mut margin = f64::INFINITY;
    let mut heavy = false;
    let mut c_plus = f64::NEG_INFINITY;
    for s in series {
        let x: Vec<f64> = s.lengths.iter().map(|n| *n as f64).collect();
        let Some(fit) = weighted_line_fit(&x, &s.log_scaled, &s.log_std_error) else {
            out.note(format!("degenerate length grid at E = {}", s.zeta.energy()));
            return out.finish(f64::NAN, Verdict::Inconclusive);
        };
        let e = s.zeta.energy();
        out.estimate(format!("slope[E={e}]"), fit.slope)
            .estimate(format!("slope_se[E={e}]"), fit.slope_std_error);
        margin = margin.min(sigma_margin(0.0, fit.slope, fit.slope_std_error));
        heavy |= s.max_share.iter().any(|m| *m > HEAVY_TAIL_SHARE);
        c_plus = s.log_scaled.iter().fold(c_plus, |a, b| a.max(b.exp()));
    }
    out.estimate("C_plus", c_plus);
    if heavy {
        out.note("a single path sample dominates a moment; heavy-tail guard");
        return out.finish(margin, Verdict::Inconclusive);
    }
    let verdict = if margin >= -conf.sigma { Verdict::Pass } else { Verdict::Fail };
    out.finish(margin, verdict)
}

pub fn check_free_energy_apriori(fe: &FreeEnergyEstimate, branching: usize, conf: &Confidence) -> BoundReport {
    let mut out = BoundReport::new(BoundId::FreeEnergyApriori, &(fe, branching));
    let limit = -fe.s * (branching as f64).ln();
    let excess = fe.slope - limit;
    out.estimate("phi", fe.slope)
        .estimate("phi_se", fe.slope_std_error)
        .estimate("phi_plus_s_logK", excess)
        .estimate("fit_residual", fe.fit_residual)
        .threshold("limit", limit)
        .threshold("allowed_excess", conf.sigma * fe.slope_std_error);
    let margin = sigma_margin(limit, fe.slope, fe.slope_std_error);
    if fe.low_confidence {
        out.note("free-energy fit residual above limit");
        return out.finish(margin, Verdict::Inconclusive);
    }
    let verdict = if excess <= conf.sigma * fe.slope_std_error { Verdict::Pass } else { Verdict::Fail };
    out.finish(margin, verdict)
}

/// `E[Im G(0,0;E+iη)]/π` against the reference constant `c_ref`.
pub fn check_wegner(samples: &[Complex64], zeta: ComplexEnergy, c_ref: f64, conf: &Confidence) -> BoundReport {
    let est = MomentEstimate::from_samples(samples.iter().map(|g| g.im / std::f64::consts::PI));
    let mut out = BoundReport::new(BoundId::Wegner, &(zeta, c_ref, est));
    out.estimate("smoothed_dos", est.mean)
        .estimate("smoothed_dos_se", est.std_error)
        .threshold("c_ref", c_ref);
    let margin = sigma_margin(c_ref, est.mean, est.std_error);
    let verdict = if margin >= -conf.sigma { Verdict::Pass } else { Verdict::Fail };
    out.finish(margin, verdict)
}

/// One grid point of an inequality `lhs <= rhs` between estimated quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma6Point {
    pub x: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma6Points {
    pub item1: Vec<Lemma6Point>,
    pub item2: Vec<Lemma6Point>,
    /// Grid values outside `|z| <= 1/(4x)`, skipped for the first item.
    pub skipped: Vec<f64>,
}

/// Estimates both sides of the two distribution-function inequalities on a sample set
/// of `G(0,0;z)`.
pub fn lemma6_points(
    samples: &[Complex64],
    dist: &PotentialDistribution,
    zeta: ComplexEnergy,
    branching: usize,
    x_grid: &[f64],
) -> Result<Lemma6Points> {
    if samples.len() < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    if x_grid.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::invalid("lemma grid must be positive and finite"));
    }
    let k = branching as f64;
    let rho = dist.density_sup();
    let n = samples.len();
    let above = |y: f64| MomentEstimate::binomial(samples.iter().filter(|g| g.norm() >= y).count(), n);
    let mut item1 = Vec::new();
    let mut item2 = Vec::new();
    let mut skipped = Vec::new();
    for &x in x_grid {
        if zeta.as_complex().norm() <= 1.0 / (4.0 * x) {
            let h = cdf_abs(samples, x);
            let tail = above(1.0 / (2.0 * k * x));
            item1.push(Lemma6Point {
                x,
                lhs: h.mean,
                lhs_se: h.std_error,
                rhs: dist.tail_prob(1.0 / (4.0 * x)) + k * tail.mean,
                rhs_se: k * tail.std_error,
            });
        } else {
            skipped.push(x);
        }
        let big = MomentEstimate::binomial(samples.iter().filter(|g| g.norm() > 1.0 / x).count(), n);
        let f = cdf_im(samples, x);
        let rhs = 2.0 * rho * x * f.mean.powf(k);
        // delta method on F^K
        let rhs_se = 2.0 * rho * x * k * f.mean.powf(k - 1.0) * f.std_error;
        item2.push(Lemma6Point { x, lhs: big.mean, lhs_se: big.std_error, rhs, rhs_se });
    }
    Ok(Lemma6Points { item1, item2, skipped })
}

fn inequality_report(id: BoundId, points: &[Lemma6Point], skipped: &[f64], conf: &Confidence) -> BoundReport {
    let mut out = BoundReport::new(id, &(points, skipped));
    out.threshold("slack_sigma", conf.inequality_sigma);
    if !skipped.is_empty() {
        out.note(format!("grid points outside the admissible range: {skipped:?}"));
    }
    if points.is_empty() {
        return out.finish(f64::NAN, Verdict::Inconclusive);
    }
    let mut margin = f64::INFINITY;
    for p in points {
        let se = (p.lhs_se.powi(2) + p.rhs_se.powi(2)).sqrt();
        out.estimate(format!("lhs[x={}]", p.x), p.lhs)
            .estimate(format!("rhs[x={}]", p.x), p.rhs);
        margin = margin.min(sigma_margin(p.rhs, p.lhs, se));
    }
    let verdict = if margin >= -conf.inequality_sigma { Verdict::Pass } else { Verdict::Fail };
    out.finish(margin, verdict)
}

/// Both items, each with its own verdict.
pub fn check_lemma6(points: &Lemma6Points, conf: &Confidence) -> (BoundReport, BoundReport) {
    (
        inequality_report(BoundId::Lemma6Item1, &points.item1, &points.skipped, conf),
        inequality_report(BoundId::Lemma6Item2, &points.item2, &[], conf),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Point {
    pub eta: f64,
    pub b: f64,
    pub radius: f64,
    /// `radius <= D - 2`.
    pub safe: bool,
    pub lingering: MomentEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Data {
    pub depth: usize,
    pub window: EnergyWindow,
    pub points: Vec<Theorem1Point>,
    /// Hat profiles whose quadrature did not reach the tolerance.
    pub unconverged: usize,
    pub fields: usize,
}

/// Lingering probabilities `Pr(|x| < b/η)` over a disorder ensemble.
pub fn theorem1_scan(
    fields: &[PotentialField],
    geometry: &TreeGeometry,
    window: &EnergyWindow,
    b_grid: &[f64],
    eta_grid: &[f64],
    opts: &HatOptions,
    boundary: HatBoundary<'_>,
) -> Result<Theorem1Data> {
    if fields.is_empty() {
        return Err(Error::invalid("empty field ensemble"));
    }
    if b_grid.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::invalid("b grid must be positive"));
    }
    let mut acc = vec![vec![Accumulator::default(); b_grid.len()]; eta_grid.len()];
    let mut unconverged = 0;
    for field in fields {
        for (i, &eta) in eta_grid.iter().enumerate() {
            let hat = hat_distribution(field, geometry, window, eta, opts, boundary)?;
            if !hat.converged {
                unconverged += 1;
            }
            for (j, &b) in b_grid.iter().enumerate() {
                acc[i][j].push(lingering(&hat.profile, b / eta)?);
            }
        }
    }
    let limit = geometry.depth().saturating_sub(crate::dynamics::BOUNDARY_SHELLS) as f64;
    let mut points = Vec::new();
    for (i, &eta) in eta_grid.iter().enumerate() {
        for (j, &b) in b_grid.iter().enumerate() {
            let radius = b / eta;
            points.push(Theorem1Point { eta, b, radius, safe: radius <= limit, lingering: acc[i][j].estimate() });
        }
    }
    Ok(Theorem1Data { depth: geometry.depth(), window: *window, points, unconverged, fields: fields.len() })
}

pub const THEOREM1_MIN_R2: f64 = 0.9;

pub fn check_theorem1(data: &Theorem1Data, conf: &Confidence) -> BoundReport {
    let mut out = BoundReport::new(BoundId::Theorem1Lingering, data);
    out.threshold("r_squared_min", THEOREM1_MIN_R2).threshold("trend_sigma", conf.sigma);
    let dropped = data.points.iter().filter(|p| !p.safe).count();
    if dropped > 0 {
        out.note(format!("{dropped} (b, eta) points reach the truncation and were dropped"));
    }
    if data.unconverged > 0 {
        out.note(format!("{} hat profiles stopped at the quadrature cap", data.unconverged));
    }
    let mut etas: Vec<f64> = data.points.iter().map(|p| p.eta).collect();
    etas.sort_by(|a, b| b.total_cmp(a));
    etas.dedup();
    // (eta, slope, slope_se, r2), eta decreasing
    let mut fits = Vec::new();
    for &eta in &etas {
        let pts: Vec<&Theorem1Point> = data.points.iter().filter(|p| p.eta == eta && p.safe).collect();
        if pts.len() < 3 {
            out.note(format!("eta = {eta}: fewer than three safe b values"));
            continue;
        }
        let x: Vec<f64> = pts.iter().map(|p| p.b).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.lingering.mean).collect();
        let s: Vec<f64> = pts.iter().map(|p| p.lingering.std_error).collect();
        if let Some(fit) = weighted_line_fit(&x, &y, &s) {
            out.estimate(format!("slope[eta={eta}]"), fit.slope)
                .estimate(format!("slope_se[eta={eta}]"), fit.slope_std_error)
                .estimate(format!("r_squared[eta={eta}]"), fit.r_squared);
            fits.push((eta, fit.slope, fit.slope_std_error, fit.r_squared));
        }
    }
    if fits.len() < 2 {
        return out.finish(f64::NAN, Verdict::Inconclusive);
    }
    let linear = fits.iter().all(|f| f.3 > THEOREM1_MIN_R2);
    let mut margin = f64::INFINITY;
    for w in fits.windows(2) {
        let (a, b) = (w[0], w[1]);
        let se = (a.2.powi(2) + b.2.powi(2)).sqrt();
        margin = margin.min(sigma_margin(a.1, b.1, se));
    }
    let c_hat = fits.iter().map(|f| f.1).fold(f64::NEG_INFINITY, f64::max);
    out.estimate("C_f", c_hat);
    let verdict = if linear && margin >= -conf.sigma { Verdict::Pass } else { Verdict::Fail };
    if !linear {
        out.note("lingering is not linear in b at some eta");
    }
    out.finish(margin, verdict)
}

pub const F_POWER_FLOOR: f64 = 1.0;

pub fn check_f_power_law(tail: &PowerLawTail, conf: &Confidence) -> BoundReport {
    let mut out = BoundReport::new(BoundId::FPowerLaw, tail);
    out.threshold("gamma_floor", F_POWER_FLOOR);
    match tail.status {
        TailStatus::Fitted => {}
        TailStatus::Degenerate => {
            out.note("no resolvable lower tail");
            return out.finish(f64::NAN, Verdict::Inconclusive);
        }
        TailStatus::InsufficientCounts => {
            out.note("too few small samples");
            return out.finish(f64::NAN, Verdict::Inconclusive);
        }
    }
    out.estimate("gamma", tail.gamma).estimate("gamma_se", tail.gamma_std_error);
    let margin = sigma_margin(tail.gamma, F_POWER_FLOOR, tail.gamma_std_error);
    let verdict = if margin >= -conf.sigma { Verdict::Pass } else { Verdict::Fail };
    out.finish(margin, verdict)
}

#[cfg(test)]
mod tests {
    use super::super::certificate::ballistic_certificate;
    use super::*;
    use crate::disorder::sample_field;
    use crate::dynamics::run_transport;
    use crate::population::{free_energy, power_law_tail};

    #[test]
    fn free_ballistic_tail_passes() {
        let g = TreeGeometry::new(2, 14).unwrap();
        let f = PotentialField::from_values(vec![0.0; g.vertex_count()], &g).unwrap();
        let cert = ballistic_certificate(2).unwrap();
        let r = run_transport(&[f], &g, &[1.0, 2.0], &[1.0], &[8.0, 9.0, 12.0], 1e-12).unwrap();
        let rep = check_ballistic_tail(&r, &cert);
        assert_eq!(rep.verdict, Verdict::Pass);
        assert_eq!(rep.estimates["points_checked"], 4.0);
    }

    #[test]
    fn free_second_moment_is_flat_or_decaying() {
        let pool = GreenPool::equilibrated(
            PotentialDistribution::uniform(0.0).unwrap(),
            2,
            ComplexEnergy::new(0.0, 1e-2).unwrap(),
            100,
            100,
            0,
        )
        .unwrap();
        let s = second_moment_series(&pool, &[2, 5, 10, 15], 100).unwrap();
        let rep = check_second_moment_decay(&[s], &Confidence::default());
        assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
        assert!(rep.estimates["slope[E=0]"] <= 0.0);
    }

    #[test]
    fn free_energy_closed_form_passes() {
        let pool = GreenPool::equilibrated(
            PotentialDistribution::uniform(0.0).unwrap(),
            2,
            ComplexEnergy::new(0.0, 2.0).unwrap(),
            100,
            100,
            0,
        )
        .unwrap();
        for s in [2.0, 0.0] {
            let fe = free_energy(&pool, s, &[5, 10, 15, 20], 10, 0).unwrap();
            let rep = check_free_energy_apriori(&fe, 2, &Confidence::default());
            assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
        }
    }

    #[test]
    fn wegner_and_power_law() {
        let pool = GreenPool::equilibrated(
            PotentialDistribution::uniform(1.0).unwrap(),
            2,
            ComplexEnergy::new(0.0, 1e-2).unwrap(),
            20_000,
            60,
            1,
        )
        .unwrap();
        let samples = pool.root_samples(20_000, 0).unwrap();
        let conf = Confidence::default();
        let rep = check_wegner(&samples, pool.zeta(), 1.0, &conf);
        assert_eq!(rep.verdict, Verdict::Pass);
        let dos = rep.estimates["smoothed_dos"];
        assert_eq!(check_wegner(&samples, pool.zeta(), dos / 2.0, &conf).verdict, Verdict::Fail);
        let free = vec![Complex64::new(0.0, 0.5f64.sqrt()); 1000];
        assert_eq!(check_f_power_law(&power_law_tail(&free), &conf).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn distribution_bound_grid_filter() {
        let pool = GreenPool::equilibrated(
            PotentialDistribution::uniform(1.0).unwrap(),
            2,
            ComplexEnergy::new(0.0, 0.1).unwrap(),
            20_000,
            60,
            2,
        )
        .unwrap();
        let samples = pool.root_samples(20_000, 0).unwrap();
        let pts = lemma6_points(&samples, pool.distribution(), pool.zeta(), 2, &[0.5, 3.0]).unwrap();
        assert_eq!(pts.skipped, vec![3.0]);
        assert_eq!(pts.item1.len(), 1);
        // P(|V| >= 0.5) vanishes for a width-one uniform law
        assert_eq!(pool.distribution().tail_prob(0.5), 0.0);
        let (a, b) = check_lemma6(&pts, &Confidence::default());
        assert_eq!(a.verdict, Verdict::Pass, "{a:?}");
        assert_eq!(b.verdict, Verdict::Pass, "{b:?}");
    }

    #[test]
    fn small_lingering_scan_runs() {
        let g = TreeGeometry::new(2, 8).unwrap();
        let d = PotentialDistribution::uniform(0.5).unwrap();
        let fields: Vec<_> = (0..3).map(|s| sample_field(&d, &g, s).unwrap()).collect();
        let w = EnergyWindow::new(-1.0, 1.0).unwrap();
        let opts = HatOptions { quad_nodes: 32, max_nodes: 256, rel_tol: 1e-4 };
        let data = theorem1_scan(&fields, &g, &w, &[0.1, 0.2, 0.3, 0.4, 0.5, 2.0], &[0.5, 0.25], &opts, HatBoundary::Zero)
            .unwrap();
        assert!(data.points.iter().any(|p| !p.safe));
        let rep = check_theorem1(&data, &Confidence::default());
        assert!(rep.notes.iter().any(|n| n.contains("dropped")));
        assert!(rep.estimates.contains_key("slope[eta=0.5]"));
    }
}
