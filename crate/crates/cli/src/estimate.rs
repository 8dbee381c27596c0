//! Scenario comparison: profile a query in software, partition it for each
//! offload scenario, and combine the residual host fraction with modeled
//! device throughput into an end-to-end estimate.

use anyhow::{anyhow, Result};

use spanforge_core::accel::CostModel;
use spanforge_core::estimator::{residual_fraction, Accounting, EstimateInput, SpeedupRow};
use spanforge_core::graph::OperatorGraph;
use spanforge_core::partition::{plan_for_scenario, CapabilitySet, Location, Scenario};

use crate::profiler::Profile;

/// Package shape assumed by the device model.
#[derive(Clone, Copy, Debug)]
pub struct PackageShape {
    pub docs_per_package: f64,
    pub avg_doc_bytes: f64,
}

/// One estimate per scenario that actually offloads something. Scenarios
/// whose partition comes back empty are skipped; with no subgraphs there is
/// nothing to estimate.
pub fn scenario_rows(
    graph: &OperatorGraph,
    caps: &CapabilitySet,
    profile: &Profile,
    shape: PackageShape,
    model: &CostModel,
) -> Result<Vec<SpeedupRow>> {
    let tp_sw = profile.throughput();
    let mut rows = Vec::new();
    for scenario in [Scenario::ExtractionOnly, Scenario::FusedExtraction, Scenario::FullOffload] {
        let plan = plan_for_scenario(graph, caps, scenario)
            .map_err(|e| anyhow!("scenario {}: {e}", scenario.number()))?;
        let subgraphs = plan.subgraphs.len();
        if subgraphs == 0 {
            continue;
        }
        let offloaded = plan.location.iter().filter_map(|(&node, &loc)| match loc {
            Location::Accelerator(_) => Some(node),
            Location::Host => None,
        });
        let rt_sw = residual_fraction(&profile.per_node, offloaded)
            .ok_or_else(|| anyhow!("profile attributes no time, cannot form fractions"))?;
        // Every subgraph sees the full document stream, so the package rate
        // is shared between them: S subgraphs behave like payloads of 1/S.
        let tp_hw =
            model.model_throughput(shape.docs_per_package, shape.avg_doc_bytes / subgraphs as f64);
        let input = EstimateInput { tp_sw, tp_hw, rt_sw };
        let row = SpeedupRow::new(scenario, input, Accounting::for_scenario(scenario))
            .map_err(|e| anyhow!("scenario {}: {e}", scenario.number()))?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use spanforge_core::graph::{DictParams, NodeId, OpParams, OperatorNode};

    fn fan_graph() -> OperatorGraph {
        let mut g = OperatorGraph::new();
        let mut add = |id: NodeId, p: OpParams| g.add_node(OperatorNode::new(id, p)).unwrap();
        add(0, OpParams::DocSource);
        add(1, OpParams::RegexExtract { pattern: "[0-9]+".into() });
        add(
            2,
            OpParams::DictionaryExtract {
                dict: DictParams::Inline { name: "d".into(), entries: vec!["york".into()] },
            },
        );
        add(3, OpParams::Union);
        add(4, OpParams::Sink { view: "V".into() });
        g.add_edge(0, 1, 0).unwrap();
        g.add_edge(0, 2, 0).unwrap();
        g.add_edge(1, 3, 0).unwrap();
        g.add_edge(2, 3, 1).unwrap();
        g.add_edge(3, 4, 0).unwrap();
        g
    }

    fn fake_profile() -> Profile {
        // 10s total: 4s regex, 3s dict, 2s union, 0.5s each for the rest.
        Profile {
            total_s: 10.0,
            bytes: 100_000_000,
            threads: 1,
            per_node: BTreeMap::from([(0, 0.5), (1, 4.0), (2, 3.0), (3, 2.0), (4, 0.5)]),
            per_kind: BTreeMap::new(),
        }
    }

    #[test]
    fn rows_follow_partition_residuals() {
        let g = fan_graph();
        let profile = fake_profile();
        let shape = PackageShape { docs_per_package: 8.0, avg_doc_bytes: 2048.0 };
        let rows = scenario_rows(
            &g,
            &CapabilitySet::standard(),
            &profile,
            shape,
            &CostModel::calibrated(),
        )
        .unwrap();
        assert_eq!(rows.len(), 3);
        // Scenario 1 offloads the two extraction nodes as separate
        // subgraphs: residual 3/10, device rate halved.
        assert_eq!(rows[0].scenario, 1);
        assert!((rows[0].rt_sw - 0.3).abs() < 1e-12);
        assert_eq!(rows[0].tp_hw, 4e8);
        // Scenario 2 fuses them into one subgraph: same residual, full rate.
        assert_eq!(rows[1].scenario, 2);
        assert!((rows[1].rt_sw - 0.3).abs() < 1e-12);
        assert_eq!(rows[1].tp_hw, 5e8);
        // Scenario 3 also moves the union.
        assert_eq!(rows[2].scenario, 3);
        assert!((rows[2].rt_sw - 0.1).abs() < 1e-12);
        assert!(rows[2].tp_est > rows[1].tp_est);
        assert_eq!(rows[2].accounting.label(), "optimistic");
        for row in &rows {
            assert!(row.speedup > 1.0);
            assert!(!row.no_benefit());
        }
    }
}
