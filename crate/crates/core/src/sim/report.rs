use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::contract::{Seconds, Units};
use crate::sim::SimError;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: Seconds,
    pub accuracy: f64,
    /// Free plus escrowed units per agent name.
    pub balances: BTreeMap<String, Units>,
    pub pool: Units,
    pub burned: Units,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub snapshots: Vec<Snapshot>,
    /// Test accuracy of the model fitted before the first submission.
    pub initial_accuracy: f64,
    pub final_accuracy: f64,
    pub accuracy_all: f64,
    pub gap: f64,
    /// Days until each malicious agent's holdings first hit zero.
    pub drain_time_days: BTreeMap<String, Option<f64>>,
    /// Virtual second at which each agent's holdings first hit zero.
    pub drained_at: BTreeMap<String, Option<Seconds>>,
    pub accepted_submissions: BTreeMap<String, u64>,
    pub events_processed: u64,
}

/// `accuracy_all - accuracy`; negative when the run beat the clean baseline.
pub fn compute_gap(accuracy_all: f64, accuracy: f64) -> Result<f64, SimError> {
    let ok = |v: f64| (0.0..=100.0).contains(&v);
    if !ok(accuracy_all) || !ok(accuracy) {
        return Err(SimError::AccuracyOutOfRange);
    }
    Ok(accuracy_all - accuracy)
}

pub fn time_to_drain(report: &SimulationReport, agent: &str) -> Result<Option<f64>, SimError> {
    report
        .drained_at
        .get(agent)
        .map(|t| t.map(|s| s as f64 / SECONDS_PER_DAY))
        .ok_or_else(|| SimError::UnknownAgent(agent.to_owned()))
}

impl SimulationReport {
    pub fn agent_names(&self) -> Vec<&str> {
        self.drained_at.keys().map(String::as_str).collect()
    }

    /// Drain time of the first malicious agent (by name order), if any drained.
    pub fn first_drain_days(&self) -> Option<f64> {
        self.drain_time_days.values().find_map(|d| *d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// Timeline as CSV: `t_seconds,t_days,accuracy_pct,balance_<agent>...,pool,burned`.
    pub fn write_timeline_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let names = self.agent_names();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t_seconds".to_owned(), "t_days".into(), "accuracy_pct".into()];
        header.extend(names.iter().map(|n| format!("balance_{n}")));
        header.extend(["pool".to_owned(), "burned".into()]);
        w.write_record(&header)?;
        for s in &self.snapshots {
            let mut row = vec![
                s.t.to_string(),
                format!("{:.6}", s.t as f64 / SECONDS_PER_DAY),
                format!("{:.6}", s.accuracy),
            ];
            row.extend(names.iter().map(|n| s.balances.get(*n).copied().unwrap_or(0).to_string()));
            row.push(s.pool.to_string());
            row.push(s.burned.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn timeline_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_timeline_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report_with_drain(t: Option<Seconds>) -> SimulationReport {
        SimulationReport {
            snapshots: vec![Snapshot {
                t: 0,
                accuracy: 50.0,
                balances: [("bad".to_owned(), 10), ("good".to_owned(), 20)].into(),
                pool: 0,
                burned: 0,
            }],
            initial_accuracy: 50.0,
            final_accuracy: 50.0,
            accuracy_all: 50.0,
            gap: 0.0,
            drain_time_days: [("bad".to_owned(), t.map(|s| s as f64 / SECONDS_PER_DAY))].into(),
            drained_at: [("bad".to_owned(), t), ("good".to_owned(), None)].into(),
            accepted_submissions: BTreeMap::new(),
            events_processed: 0,
        }
    }

    #[test]
    fn gap_examples() {
        assert_eq!(compute_gap(80.0, 80.0).unwrap(), 0.0);
        assert!((compute_gap(80.00, 80.42).unwrap() + 0.42).abs() < 1e-9);
        assert_eq!(compute_gap(85.0, 84.0).unwrap(), 1.0);
        assert!(matches!(compute_gap(101.0, 5.0), Err(SimError::AccuracyOutOfRange)));
        assert!(matches!(compute_gap(5.0, -0.1), Err(SimError::AccuracyOutOfRange)));
    }

    #[test]
    fn drain_examples() {
        let r = report_with_drain(Some(864_000));
        assert_eq!(time_to_drain(&r, "bad").unwrap(), Some(10.0));
        assert_eq!(time_to_drain(&r, "good").unwrap(), None);
        assert!(matches!(time_to_drain(&r, "nobody"), Err(SimError::UnknownAgent(_))));
        assert_eq!(report_with_drain(None).first_drain_days(), None);
    }

    #[test]
    fn timeline_header_and_rows() {
        let csv = report_with_drain(None).timeline_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t_seconds,t_days,accuracy_pct,balance_bad,balance_good,pool,burned"
        );
        assert_eq!(lines.next().unwrap(), "0,0.000000,50.000000,10,20,0,0");
    }

    proptest! {
        #[test]
        fn gap_is_plain_difference(a in 0.0f64..=100.0, b in 0.0f64..=100.0) {
            let g = compute_gap(a, b).unwrap();
            prop_assert_eq!(g, a - b);
            prop_assert_eq!(compute_gap(b, a).unwrap(), -g);
        }
    }
}
