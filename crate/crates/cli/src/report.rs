//! Report structures and rendering: a structured JSON file for machines and
//! aligned tables on stdout for humans.

use ovm_core::successive::JointDistribution;
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Report {
    pub scenario: String,
    pub seed: u64,
    pub samples: usize,
    pub tol: f64,
    pub results: Vec<TaskRecord>,
    pub passed: bool,
}

#[derive(Debug, Serialize)]
pub struct TaskRecord {
    pub index: usize,
    pub task: String,
    pub subject: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<JointDistribution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Informational task without a pass/fail criterion.
    Info,
}

impl TaskRecord {
    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

pub fn render_table(dist: &JointDistribution) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:>12}", ""));
    for b in &dist.outcomes_b {
        out.push_str(&format!(" {:>11}", format!("b={b:+.3}")));
    }
    out.push('\n');
    for (n, a) in dist.outcomes_a.iter().enumerate() {
        out.push_str(&format!("{:>12}", format!("a={a:+.3}")));
        for m in 0..dist.outcomes_b.len() {
            out.push_str(&format!(" {:>11.6}", dist.prob(n, m)));
        }
        out.push('\n');
    }
    out
}

pub fn render_record(record: &TaskRecord) -> String {
    let mut out = String::new();
    let verdict = match record.verdict {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Info => "info",
    };
    out.push_str(&format!(
        "== task {:02} {} ({}) [{}]\n",
        record.index, record.task, record.subject, verdict
    ));
    if let Some(r) = record.residual {
        out.push_str(&format!("   residual: {r:.3e}\n"));
    }
    if let Some(w) = &record.witness {
        out.push_str(&format!("   witness: {w}\n"));
    }
    if let Some(t) = &record.table {
        out.push_str(&render_table(t));
    }
    if let Some(e) = &record.error {
        out.push_str(&format!("   error: {e}\n"));
    }
    out
}
