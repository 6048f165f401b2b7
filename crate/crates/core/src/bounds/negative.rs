//! Adversarial perturbations of check inputs. Each check must fail on its perturbed input.

use super::certificate::BallisticCertificate;
use super::checks::{Lemma6Points, SecondMomentSeries, Theorem1Data};
use super::report::Confidence;
use crate::dynamics::TransportReport;
use crate::population::{FreeEnergyEstimate, PowerLawTail, TailStatus};

/// Every tail above `v_hat` becomes `max(tail, bound) * e^t`.
pub fn ballistic_tail(report: &TransportReport, cert: &BallisticCertificate) -> TransportReport {
    let mut out = report.clone();
    for series in out.tails.iter_mut().filter(|s| s.v > cert.v_hat) {
        for (i, &t) in report.times.iter().enumerate() {
            if t > 0.0 {
                let lift = cert.tail_bound(series.v, t) * t.exp();
                series.max[i] = series.max[i].max(lift);
                series.mean[i] = series.mean[i].max(lift);
            }
        }
    }
    out
}

/// Adds a growth of `0.2` per step to `log(K^n E|G|^2)`.
pub fn second_moment(series: &[SecondMomentSeries]) -> Vec<SecondMomentSeries> {
    series
        .iter()
        .map(|s| {
            let mut s = s.clone();
            for (y, n) in s.log_scaled.iter_mut().zip(&s.lengths) {
                *y += 0.2 * *n as f64;
            }
            s
        })
        .collect()
}

/// Moves the free energy one unit above `-s log K`.
pub fn free_energy(fe: &FreeEnergyEstimate, branching: usize) -> FreeEnergyEstimate {
    let mut out = fe.clone();
    out.slope = -fe.s * (branching as f64).ln() + 1.0 + 10.0 * fe.slope_std_error;
    out.low_confidence = false;
    out
}

/// Reference constant for the Wegner check set to half the measured density.
pub fn wegner_reference(smoothed_dos: f64) -> f64 {
    0.5 * smoothed_dos
}

/// Pushes every right-hand side below the left-hand side by more than the slack.
pub fn lemma6(points: &Lemma6Points, conf: &Confidence) -> Lemma6Points {
    let mut out = points.clone();
    for p in out.item1.iter_mut().chain(out.item2.iter_mut()) {
        let se = (p.lhs_se.powi(2) + p.rhs_se.powi(2)).sqrt();
        p.rhs = p.lhs - 2.0 * conf.inequality_sigma * se - 1e-3;
    }
    out
}

/// Makes the lingering slope grow as `eta` decreases: the `k`-th largest `eta`
/// gets `2^k` times the lingering plus `k b`.
pub fn theorem1(data: &Theorem1Data) -> Theorem1Data {
    let mut etas: Vec<f64> = data.points.iter().map(|p| p.eta).collect();
    etas.sort_by(|a, b| b.total_cmp(a));
    etas.dedup();
    let mut out = data.clone();
    for p in out.points.iter_mut() {
        let k = etas.iter().position(|e| *e == p.eta).unwrap_or(0) as i32;
        p.lingering.mean = p.lingering.mean * 2f64.powi(k) + k as f64 * p.b;
    }
    out
}

/// A lower tail that flattens out, `gamma = 0.2`.
pub fn f_power_law(tail: &PowerLawTail) -> PowerLawTail {
    let mut out = tail.clone();
    out.gamma = 0.2;
    out.gamma_std_error = 0.01;
    out.status = TailStatus::Fitted;
    out
}

#[cfg(test)]
mod tests {
    use super::super::checks::*;
    use super::super::{ballistic_certificate, Verdict};
    use super::*;
    use crate::disorder::{PotentialDistribution, PotentialField};
    use crate::dynamics::run_transport;
    use crate::green::ComplexEnergy;
    use crate::population::{free_energy as fe_estimate, power_law_tail, GreenPool};
    use crate::stats::MomentEstimate;
    use crate::tree::TreeGeometry;

    #[test]
    fn every_check_fails_on_its_control() {
        let conf = Confidence::default();
        let g = TreeGeometry::new(2, 12).unwrap();
        let f = PotentialField::from_values(vec![0.0; g.vertex_count()], &g).unwrap();
        let cert = ballistic_certificate(2).unwrap();
        let r = run_transport(&[f], &g, &[1.0, 2.0], &[1.0], &[9.0], 1e-12).unwrap();
        assert_eq!(check_ballistic_tail(&ballistic_tail(&r, &cert), &cert).verdict, Verdict::Fail);

        let pool = GreenPool::equilibrated(
            PotentialDistribution::uniform(1.0).unwrap(),
            2,
            ComplexEnergy::new(0.0, 0.1).unwrap(),
            20_000,
            60,
            4,
        )
        .unwrap();
        let s = second_moment_series(&pool, &[2, 4, 6, 8], 5_000).unwrap();
        assert_eq!(check_second_moment_decay(&second_moment(&[s]), &conf).verdict, Verdict::Fail);

        let fe = fe_estimate(&pool, 1.0, &[5, 10, 15, 20], 5_000, 0).unwrap();
        assert_eq!(check_free_energy_apriori(&free_energy(&fe, 2), 2, &conf).verdict, Verdict::Fail);

        let samples = pool.root_samples(20_000, 0).unwrap();
        let dos = check_wegner(&samples, pool.zeta(), 1.0, &conf).estimates["smoothed_dos"];
        assert_eq!(check_wegner(&samples, pool.zeta(), wegner_reference(dos), &conf).verdict, Verdict::Fail);

        let pts = lemma6_points(&samples, pool.distribution(), pool.zeta(), 2, &[0.1, 0.5, 1.0]).unwrap();
        let (a, b) = check_lemma6(&lemma6(&pts, &conf), &conf);
        assert_eq!(a.verdict, Verdict::Fail);
        assert_eq!(b.verdict, Verdict::Fail);

        assert_eq!(check_f_power_law(&f_power_law(&power_law_tail(&samples)), &conf).verdict, Verdict::Fail);

        let mut points = Vec::new();
        for eta in [0.1, 0.05] {
            for b in [0.1, 0.2, 0.3, 0.4] {
                points.push(Theorem1Point {
                    eta,
                    b,
                    radius: b / eta,
                    safe: true,
                    lingering: MomentEstimate { mean: 0.3 * b, std_error: 1e-3, n_samples: 50 },
                });
            }
        }
        let data = Theorem1Data {
            depth: 20,
            window: crate::dynamics::EnergyWindow::new(-1.0, 1.0).unwrap(),
            points,
            unconverged: 0,
            fields: 50,
        };
        assert_eq!(check_theorem1(&data, &conf).verdict, Verdict::Pass);
        assert_eq!(check_theorem1(&theorem1(&data), &conf).verdict, Verdict::Fail);
    }
}
