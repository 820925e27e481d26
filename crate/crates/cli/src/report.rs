use std::fmt::Write as _;

use etdb::balance::{fmt_real, Check, Outcome, Verdict};
use etdb::linalg::CMatrix;
use etdb::schema::{ChannelDoc, OperatorDoc};
use etdb::transitions::DecompositionReport;
use etdb::ToleranceConfig;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedOutcome {
    pub name: String,
    pub result: Outcome,
}

/// Result of `etdb check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub kind: String,
    pub verdict: Verdict,
    pub checks: Vec<NamedOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<CMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parity: Option<OperatorDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub tolerances: ToleranceConfig,
}

impl CheckReport {
    pub fn new(kind: &str, checks: Vec<(&str, Outcome)>, tolerances: ToleranceConfig) -> Self {
        let checks: Vec<NamedOutcome> = checks
            .into_iter()
            .map(|(name, result)| NamedOutcome {
                name: name.to_string(),
                result,
            })
            .collect();
        let verdict = overall(checks.iter().map(|c| c.result.verdict()));
        Self {
            kind: kind.to_string(),
            verdict,
            checks,
            basis: None,
            parity: None,
            notes: Vec::new(),
            tolerances,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.verdict {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::NotEvaluable => 2,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("check {}: {}\n", self.kind, verdict_word(self.verdict));
        for c in &self.checks {
            match &c.result {
                Outcome::Evaluated(check) => {
                    let _ = writeln!(
                        s,
                        "  {:<12} residual {}  tolerance {}  {}",
                        c.name,
                        fmt_real(check.residual),
                        fmt_real(check.tolerance),
                        verdict_word(check.verdict())
                    );
                }
                Outcome::NotEvaluable { reason, .. } => {
                    let _ = writeln!(s, "  {:<12} not evaluable: {reason}", c.name);
                }
            }
        }
        for note in &self.notes {
            let _ = writeln!(s, "  note: {note}");
        }
        if let Some(basis) = &self.basis {
            s.push_str("  basis (columns):\n");
            s.push_str(&matrix_text(basis, "    "));
        }
        if let Some(p) = &self.parity {
            let _ = writeln!(s, "  parity (antiunitary: {}):", p.antiunitary);
            s.push_str(&matrix_text(&p.matrix, "    "));
        }
        s
    }
}

fn overall(verdicts: impl Iterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Pass;
    for v in verdicts {
        match v {
            Verdict::NotEvaluable => return Verdict::NotEvaluable,
            Verdict::Fail => out = Verdict::Fail,
            Verdict::Pass => {}
        }
    }
    out
}

pub fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::NotEvaluable => "NOT EVALUABLE",
    }
}

fn complex_text(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", fmt_real(z.re), fmt_real(z.im.abs()))
}

fn matrix_text(m: &CMatrix, indent: &str) -> String {
    let mut s = String::new();
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|z| complex_text(*z)).collect();
        let _ = writeln!(s, "{indent}[{}]", row.join(", "));
    }
    s
}

/// Output of `etdb dual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualReport {
    pub kind: String,
    pub channel: ChannelDoc,
    pub self_check: SelfCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfCheck {
    pub relation: String,
    pub check: Check,
}

impl DualReport {
    pub fn to_text(&self) -> String {
        let ch = &self.channel;
        let mut s = format!(
            "dual {}: {} -> {} channel\n  self-check {}: residual {}  {}\n  choi_std:\n",
            self.kind,
            ch.dim_in.unwrap_or_default(),
            ch.dim_out.unwrap_or_default(),
            self.self_check.relation,
            fmt_real(self.self_check.check.residual),
            verdict_word(self.self_check.check.verdict())
        );
        if let Some(choi) = &ch.choi_std {
            s.push_str(&matrix_text(choi, "    "));
        }
        s
    }
}

pub fn decomposition_text(r: &DecompositionReport) -> String {
    let mut s = format!(
        "decomposition of a {} -> {} channel: {} items\n",
        r.dim_in,
        r.dim_out,
        r.items.len()
    );
    for (k, item) in r.items.iter().enumerate() {
        let partner = match item.reversed_partner_index {
            Some(b) => format!("reverse is item {b}"),
            None => "reverse not among the items".to_string(),
        };
        let psi: Vec<String> = item.psi.iter().map(|z| complex_text(*z)).collect();
        let _ = writeln!(
            s,
            "  [{k}] p = {}  {partner}\n      psi = [{}]",
            fmt_real(item.p),
            psi.join(", ")
        );
    }
    match r.complete {
        Some(true) => s.push_str("complete: yes\n"),
        Some(false) => {
            let _ = writeln!(
                s,
                "complete: no (first item without a reverse: {:?})",
                r.witness
            );
        }
        None => s.push_str("complete: not defined for channels between different systems\n"),
    }
    s
}
