use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundId {
    #[serde(rename = "ballistic_tail")]
    BallisticTail,
    #[serde(rename = "second_moment_decay")]
    SecondMomentDecay,
    #[serde(rename = "free_energy_apriori")]
    FreeEnergyApriori,
    #[serde(rename = "wegner")]
    Wegner,
    #[serde(rename = "lemma6_1")]
    Lemma6Item1,
    #[serde(rename = "lemma6_2")]
    Lemma6Item2,
    #[serde(rename = "theorem1_lingering")]
    Theorem1Lingering,
    #[serde(rename = "F_power_law")]
    FPowerLaw,
}

impl BoundId {
    pub fn name(&self) -> &'static str {
        match self {
            BoundId::BallisticTail => "ballistic_tail",
            BoundId::SecondMomentDecay => "second_moment_decay",
            BoundId::FreeEnergyApriori => "free_energy_apriori",
            BoundId::Wegner => "wegner",
            BoundId::Lemma6Item1 => "lemma6_1",
            BoundId::Lemma6Item2 => "lemma6_2",
            BoundId::Theorem1Lingering => "theorem1_lingering",
            BoundId::FPowerLaw => "F_power_law",
        }
    }

    /// Plain statement of the inequality under test.
    pub fn statement(&self) -> &'static str {
        match self {
            BoundId::BallisticTail => "Pr(d > vt) <= exp(-mu t (v - v_hat)) for every v > v_hat",
            BoundId::SecondMomentDecay => "E|G(0,x;z)|^2 <= C K^-|x| for z in an ac window",
            BoundId::FreeEnergyApriori => "phi(s;z) <= -s log K for s in [0, 2]",
            BoundId::Wegner => "E[Im G(0,0;E+i eta)]/pi <= C_ref, reference constant C_ref = sup rho",
            BoundId::Lemma6Item1 => "H(x) <= P(|V| >= 1/(4x)) + K P(|G| >= 1/(2Kx)) when |z| <= 1/(4x)",
            BoundId::Lemma6Item2 => "1 - H(1/x) <= 2 sup(rho) x F(x)^K",
            BoundId::Theorem1Lingering => "E[Pr(|x| < b/eta)] <= C(f) b + o(eta), slope stable as eta decreases",
            BoundId::FPowerLaw => "F(x) = P(Im G <= x) <= C x^gamma near 0; gamma >= 1 enforced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Standard-error multiples used by the verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    /// Two-sided statistical margin.
    pub sigma: f64,
    /// One-sided slack for inequalities between two Monte-Carlo quantities.
    pub inequality_sigma: f64,
}

impl Default for Confidence {
    fn default() -> Self {
        Self { sigma: 3.0, inequality_sigma: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_id: BoundId,
    /// SHA-256 of the canonical JSON of the checked inputs.
    pub inputs_digest: String,
    pub estimates: BTreeMap<String, f64>,
    pub thresholds: BTreeMap<String, f64>,
    /// Worst margin in standard errors; negative values point towards violation.
    pub margin: f64,
    pub verdict: Verdict,
    pub reference: String,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub(crate) fn new<T: Serialize>(bound_id: BoundId, inputs: &T) -> Self {
        Self {
            bound_id,
            inputs_digest: digest(inputs),
            estimates: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            margin: f64::NAN,
            verdict: Verdict::Inconclusive,
            reference: bound_id.statement().to_string(),
            notes: Vec::new(),
        }
    }

    pub(crate) fn estimate(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.estimates.insert(key.into(), value);
        self
    }

    pub(crate) fn threshold(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.thresholds.insert(key.into(), value);
        self
    }

    pub(crate) fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub(crate) fn finish(mut self, margin: f64, verdict: Verdict) -> Self {
        self.margin = margin;
        self.verdict = verdict;
        self
    }
}

/// SHA-256 hex digest of the JSON form of `inputs`.
pub fn digest<T: Serialize>(inputs: &T) -> String {
    let json = serde_json::to_vec(inputs).expect("inputs serialise");
    let hash = Sha256::digest(&json);
    hash.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Margin in standard errors of `limit - value`, signed so that positive means satisfied.
pub(crate) fn sigma_margin(limit: f64, value: f64, se: f64) -> f64 {
    let gap = limit - value;
    if se > 0.0 {
        gap / se
    } else if gap >= 0.0 {
        f64::INFINITY
    } else {
        f64::NEG_INFINITY
    }
}

/// Aligned plain-text table of a report batch.
pub fn render_table(reports: &[BoundReport]) -> String {
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.bound_id.name().to_string(),
                r.verdict.as_str().to_string(),
                format!("{:.3}", r.margin),
                r.inputs_digest.chars().take(12).collect(),
                r.reference.clone(),
            ]
        })
        .collect();
    let header = ["bound", "verdict", "margin", "inputs", "statement"];
    let mut width = header.map(str::len);
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let mut l = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i + 1 == cells.len() {
                l.push_str(c);
            } else {
                let _ = write!(l, "{:<w$}  ", c, w = width[i]);
            }
        }
        out.push_str(l.trim_end());
        out.push('\n');
    };
    line(&mut out, &header);
    for row in &rows {
        let cells: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}
