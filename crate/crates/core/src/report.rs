//! Plain-text emitters shared by the CLI and the C bindings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{capacity_condition, pbh_unit_circle, BoundSequence, CapacityReport, PbhReport};
use crate::channel::channel_capacity;
use crate::harness::{secrecy_report, RunResult, Scenario, SecrecyReport};
use crate::{Error, Result};

/// Round-trip formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Per-step Monte Carlo averages. The `trace_bound` column is present only
/// when the run computed the covariance bound.
pub fn mse_csv(result: &RunResult) -> String {
    let bound = result.trace_bound();
    let emp = result.trace_emp_cov();
    let mut out = String::from("k,mse_legit,mse_eve,mse_eve_saturated,trace_emp_cov");
    if bound.is_some() {
        out.push_str(",trace_bound");
    }
    out.push('\n');
    for k in 0..result.horizon {
        let _ = write!(
            out,
            "{k},{},{},{},{}",
            fmt_f64(result.mse_legit[k]),
            fmt_f64(result.mse_eve[k]),
            u8::from(result.eve_saturated[k] > 0),
            fmt_f64(emp[k])
        );
        if let Some(b) = &bound {
            let _ = write!(out, ",{}", fmt_f64(b[k]));
        }
        out.push('\n');
    }
    out
}

/// One row per critical event, ordered by trial then channel then step.
pub fn events_csv(result: &RunResult) -> String {
    let mut out = String::from("trial,channel,k_bar,worst_case\n");
    for e in &result.events {
        let _ = writeln!(out, "{},{},{},{}", e.trial, e.channel, e.k, u8::from(e.worst_case));
    }
    out
}

/// Machine-readable digest of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub trials: usize,
    pub horizon: usize,
    pub final_mse_legit: f64,
    pub final_mse_eve: f64,
    pub saturated_trials: usize,
    pub critical_events: usize,
    /// `None` when no bound was computed.
    pub secrecy: Option<SecrecyReport>,
}

impl RunSummary {
    pub fn new(scenario: &Scenario, result: &RunResult) -> Self {
        let last = result.horizon.saturating_sub(1);
        RunSummary {
            scenario: scenario.name.clone(),
            seed: scenario.seed,
            trials: result.trials,
            horizon: result.horizon,
            final_mse_legit: result.mse_legit.get(last).copied().unwrap_or(f64::NAN),
            final_mse_eve: result.mse_eve.get(last).copied().unwrap_or(f64::NAN),
            saturated_trials: result.eve_saturated.get(last).copied().unwrap_or(0),
            critical_events: result.events.len(),
            secrecy: result.bound.as_ref().map(|b| secrecy_report(result, b, &scenario.codec)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }

    /// Human-readable lines for the terminal.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario        {}", self.scenario);
        let _ = writeln!(out, "seed            {}", self.seed);
        let _ = writeln!(out, "trials          {}", self.trials);
        let _ = writeln!(out, "horizon         {}", self.horizon);
        let _ = writeln!(out, "final mse legit {:.6e}", self.final_mse_legit);
        let _ = writeln!(out, "final mse eve   {:.6e}", self.final_mse_eve);
        let _ = writeln!(out, "saturated       {}/{}", self.saturated_trials, self.trials);
        let _ = writeln!(out, "critical events {}", self.critical_events);
        if let Some(s) = &self.secrecy {
            let mark = |p: bool| if p { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "bounded legit   {} ({})", mark(s.legitimate_bounded.pass), s.legitimate_bounded.detail);
            let _ = writeln!(out, "eve diverges    {} ({})", mark(s.eavesdropper_diverges.pass), s.eavesdropper_diverges.detail);
            let _ = writeln!(out, "secrecy         {}", mark(s.secrecy()));
        }
        out
    }
}

/// Outcome of a standalone bound iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundVerdict {
    pub scenario: String,
    /// `converged`, `diverged` or `unfinished`.
    pub status: String,
    /// Iterates computed after `𝒱_0`.
    pub steps: usize,
    pub final_trace: f64,
    /// Iterations at which `w` was clamped to zero.
    pub w_clamped: usize,
}

impl BoundVerdict {
    pub fn new(scenario: &Scenario, seq: &BoundSequence) -> Self {
        let status = if seq.converged {
            "converged"
        } else if seq.diverged {
            "diverged"
        } else {
            "unfinished"
        };
        BoundVerdict {
            scenario: scenario.name.clone(),
            status: status.into(),
            steps: seq.iterates.len().saturating_sub(1),
            final_trace: seq.iterates.last().map_or(f64::NAN, |v| v.trace()),
            w_clamped: seq.w_clamped,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes") + "\n"
    }
}

/// Necessary conditions for a scenario, serializable both ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionsReport {
    pub scenario: String,
    /// Per-channel capacity `−ln(1 − γ̄ᵢ) / 2`.
    pub channel_capacity: Vec<f64>,
    pub capacity: CapacityReport,
    pub pbh: PbhReport,
}

impl ConditionsReport {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let gamma = scenario.channels.authorized();
        let channel_capacity = gamma.iter().map(|&p| channel_capacity(p)).collect::<Result<Vec<_>>>()?;
        Ok(ConditionsReport {
            scenario: scenario.name.clone(),
            channel_capacity,
            capacity: capacity_condition(scenario.model.a(), gamma)?,
            pbh: pbh_unit_circle(scenario.model.a(), &scenario.model.effective_q())?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("conditions serialize") + "\n"
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("conditions json: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::preset;

    #[test]
    fn fmt_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn conditions_json_round_trip() {
        let sc = preset("three-tank").unwrap();
        let rep = ConditionsReport::new(&sc).unwrap();
        assert!(rep.capacity.holds);
        assert!(rep.pbh.holds);
        assert_eq!(ConditionsReport::from_json(&rep.to_json()).unwrap(), rep);
    }

    #[test]
    fn csv_shapes() {
        let mut sc = preset("three-tank").unwrap();
        sc.horizon = 6;
        sc.trials = 3;
        sc.with_bound = false;
        let res = crate::harness::run_monte_carlo(&sc).unwrap();
        let mse = mse_csv(&res);
        let lines: Vec<&str> = mse.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "k,mse_legit,mse_eve,mse_eve_saturated,trace_emp_cov");
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
        let ev = events_csv(&res);
        assert_eq!(ev.lines().count(), res.events.len() + 1);
        let summary = RunSummary::new(&sc, &res);
        assert!(summary.secrecy.is_none());
        assert!(summary.to_text().contains("trials          3"));
    }
}
