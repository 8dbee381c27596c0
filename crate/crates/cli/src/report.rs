//! CSV report writers for estimates and device traces.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use spanforge_core::accel::{RunStats, NUM_LANES};
use spanforge_core::estimator::SpeedupRow;
use spanforge_core::graph::SubgraphId;

/// Scenario table. Floats print in Rust's shortest round-trip form.
pub fn speedup_csv(rows: &[SpeedupRow]) -> String {
    let mut out = String::from("scenario,rt_sw,tp_sw,tp_hw,tp_est,speedup,accounting\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scenario,
            r.rt_sw,
            r.tp_sw,
            r.tp_hw,
            r.tp_est,
            r.speedup,
            r.accounting.label(),
        );
    }
    out
}

/// Per-stage counters for every pipeline in a run. The setup charge is not
/// a stage, so it gets a pseudo-row per subgraph; lane totals follow as
/// `lane_<i>` rows with the busy cycle count in the cycles column.
pub fn trace_csv(stats: &BTreeMap<SubgraphId, RunStats>) -> String {
    let mut out = String::from("subgraph,stage,cycles,tuples_in,tuples_out\n");
    for (sg, s) in stats {
        let _ = writeln!(out, "{sg},setup,{},0,0", s.setup_cycles);
        for t in &s.stages {
            let _ = writeln!(out, "{sg},{},{},{},{}", t.stage, t.cycles, t.tuples_in, t.tuples_out);
        }
        for lane in 0..NUM_LANES {
            let _ = writeln!(out, "{sg},lane_{lane},{},0,0", s.lane_busy[lane]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use spanforge_core::estimator::{Accounting, EstimateInput};
    use spanforge_core::partition::Scenario;

    #[test]
    fn speedup_csv_layout() {
        let row = SpeedupRow::new(
            Scenario::FullOffload,
            EstimateInput { tp_sw: 10e6, tp_hw: 500e6, rt_sw: 0.18 },
            Accounting::Optimistic,
        )
        .unwrap();
        let csv = speedup_csv(&[row]);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "scenario,rt_sw,tp_sw,tp_hw,tp_est,speedup,accounting");
        assert_eq!(lines.next().unwrap(), "3,0.18,10000000,500000000,50000000,5,optimistic");
        assert!(lines.next().is_none());
    }
}
