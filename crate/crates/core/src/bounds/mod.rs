//! Checks of transport inequalities against Monte-Carlo and dynamics output.
//!
//! Every check consumes a frozen input record and returns a [`BoundReport`] whose
//! verdict is a deterministic function of the recorded estimates and the
//! configured confidence levels.

mod certificate;
mod checks;
pub mod negative;
mod report;

pub use certificate::{ballistic_certificate, tree_weight_function, BallisticCertificate};
pub use checks::{
    check_ballistic_tail, check_f_power_law, check_free_energy_apriori, check_lemma6,
    check_second_moment_decay, check_theorem1, check_wegner, lemma6_points, second_moment_series,
    theorem1_scan, Lemma6Point, Lemma6Points, SecondMomentSeries, Theorem1Data, Theorem1Point,
    F_POWER_FLOOR, THEOREM1_MIN_R2,
};
pub use report::{digest as digest_json, render_table, BoundId, BoundReport, Confidence, Verdict};
