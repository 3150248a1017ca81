//! The JSON-serializable result of an entropy-balance evaluation.

use serde::{Serialize, Serializer};

/// Extended real serialized as a number, or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtReal(pub f64);

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else if self.0.is_nan() {
            s.serialize_str("undefined")
        } else if self.0 > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Solution,
    NotSolution,
    /// Could not be decided (infinite or skipped terms).
    Undetermined,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Terms {
    #[serde(rename = "ent_T")]
    pub ent_t: Option<ExtReal>,
    pub ent_0: Option<ExtReal>,
    /// E(V | V^P), distance from the typical flux.
    pub e_forward: Option<ExtReal>,
    /// E(V | swapped reversed flux).
    pub e_reversed: Option<ExtReal>,
    #[serde(rename = "e_R", skip_serializing_if = "Option::is_none")]
    pub e_r: Option<ExtReal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirichlet_integral: Option<ExtReal>,
    #[serde(rename = "e_R2", skip_serializing_if = "Option::is_none")]
    pub e_r2: Option<ExtReal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirichlet2_integral: Option<ExtReal>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factorization_residual: Option<ExtReal>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Residuals {
    /// |Ent_T + e_reversed - Ent_0 - e_forward|
    pub balance: Option<ExtReal>,
    /// |e_forward + e_reversed - 2 e_R - dirichlet|
    pub decomposition: Option<ExtReal>,
    pub continuity: Option<ExtReal>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub system: &'static str,
    pub terms: Terms,
    pub residuals: Residuals,
    pub verdict: Verdict,
    /// Ent_T + e_reversed - Ent_0; nonpositive (up to tolerance) exactly for solutions.
    pub gap: Option<ExtReal>,
    /// Ent_T + 2 e_R + dirichlet - Ent_0.
    pub gap_second_form: Option<ExtReal>,
    pub flags: Vec<String>,
}

impl EntropyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn has_flag(&self, f: &str) -> bool {
        self.flags.iter().any(|x| x == f)
    }

    pub fn balance_residual(&self) -> Option<f64> {
        self.residuals.balance.map(|x| x.0)
    }

    pub fn decomposition_residual(&self) -> Option<f64> {
        self.residuals.decomposition.map(|x| x.0)
    }

    pub fn gap_value(&self) -> Option<f64> {
        self.gap.map(|x| x.0)
    }
}

/// Inputs shared by the Markov and Boltzmann assemblies.
pub(crate) struct RawTerms {
    pub ent_t: f64,
    pub ent_0: f64,
    pub e_forward: f64,
    pub e_reversed: f64,
    pub e_r: f64,
    pub dirichlet: f64,
    pub continuity: f64,
    pub support_shrunk: bool,
}

pub(crate) const BALANCE_TOL: f64 = 1e-6;

pub(crate) fn assemble(system: &'static str, raw: RawTerms, second_order: bool) -> EntropyReport {
    let tol = BALANCE_TOL * (1.0 + raw.ent_0.abs());
    let mut flags = Vec::new();
    let lhs = raw.ent_t + raw.e_reversed;
    let rhs = raw.ent_0 + raw.e_forward;
    let balance = if lhs.is_infinite() && rhs.is_infinite() {
        flags.push("both-infinite".to_string());
        None
    } else if raw.support_shrunk {
        flags.push("support-shrunk".to_string());
        None
    } else {
        Some((lhs - rhs).abs())
    };
    let all_finite = [raw.e_forward, raw.e_reversed, raw.e_r, raw.dirichlet].iter().all(|x| x.is_finite());
    let decomposition = if all_finite && !raw.support_shrunk {
        Some((raw.e_forward + raw.e_reversed - 2.0 * raw.e_r - raw.dirichlet).abs())
    } else {
        None
    };
    if !raw.ent_0.is_finite() {
        flags.push("initial-entropy-infinite".to_string());
    }
    if raw.continuity > 1e-6 {
        flags.push("continuity-violated".to_string());
    }
    let gap = lhs - raw.ent_0;
    let gap2 = raw.ent_t + 2.0 * raw.e_r + raw.dirichlet - raw.ent_0;
    let verdict = if !raw.ent_0.is_finite() || raw.support_shrunk {
        Verdict::Undetermined
    } else if gap <= tol {
        Verdict::Solution
    } else {
        Verdict::NotSolution
    };
    let ext = |x: f64| Some(ExtReal(x));
    let mut terms = Terms {
        ent_t: ext(raw.ent_t),
        ent_0: ext(raw.ent_0),
        e_forward: ext(raw.e_forward),
        e_reversed: ext(raw.e_reversed),
        ..Default::default()
    };
    if second_order {
        terms.e_r2 = ext(raw.e_r);
        terms.dirichlet2_integral = ext(raw.dirichlet);
    } else {
        terms.e_r = ext(raw.e_r);
        terms.dirichlet_integral = ext(raw.dirichlet);
    }
    EntropyReport {
        system,
        terms,
        residuals: Residuals {
            balance: balance.map(ExtReal),
            decomposition: decomposition.map(ExtReal),
            continuity: ext(raw.continuity),
            tolerance: tol,
        },
        verdict,
        gap: if raw.support_shrunk { None } else { ext(gap) },
        gap_second_form: if raw.support_shrunk { None } else { ext(gap2) },
        flags,
    }
}
