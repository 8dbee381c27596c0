//! Throughput estimation for partial offload.
//!
//! The system-level throughput of a split execution is modeled as a serial
//! composition: every byte passes through the accelerator at `tp_hw`, and
//! the residual host work (fraction `rt_sw` of the original software
//! runtime) processes it at `tp_sw`. Time per byte adds, so
//!
//! ```text
//! tp_est = 1 / (1 / tp_hw + rt_sw / tp_sw)
//! ```
//!
//! The estimate can never beat either side: it is bounded by `tp_hw` and by
//! `tp_sw / rt_sw`.

use alloc::collections::BTreeMap;
use core::fmt;

use crate::partition::Scenario;

#[derive(Clone, Debug, PartialEq)]
pub enum EstimateError {
    /// Throughputs must be positive and finite.
    NonPositive { field: &'static str, value: f64 },
    /// The residual runtime fraction must lie in [0, 1].
    FractionOutOfRange { value: f64 },
}

impl fmt::Display for EstimateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimateError::NonPositive { field, value } => {
                write!(f, "{field} must be positive and finite, got {value}")
            }
            EstimateError::FractionOutOfRange { value } => {
                write!(f, "residual runtime fraction {value} outside [0, 1]")
            }
        }
    }
}

impl core::error::Error for EstimateError {}

fn check_positive(field: &'static str, value: f64) -> Result<(), EstimateError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(EstimateError::NonPositive { field, value })
    }
}

/// Inputs to the estimator, all in consistent units (bytes per second for
/// the throughputs).
#[derive(Clone, Copy, Debug)]
pub struct EstimateInput {
    /// Measured software-only throughput.
    pub tp_sw: f64,
    /// Modeled accelerator throughput for the offloaded part.
    pub tp_hw: f64,
    /// Fraction of the software runtime that stays on the host.
    pub rt_sw: f64,
}

impl EstimateInput {
    pub fn validate(&self) -> Result<(), EstimateError> {
        check_positive("tp_sw", self.tp_sw)?;
        check_positive("tp_hw", self.tp_hw)?;
        if !self.rt_sw.is_finite() || !(0.0..=1.0).contains(&self.rt_sw) {
            return Err(EstimateError::FractionOutOfRange { value: self.rt_sw });
        }
        Ok(())
    }
}

/// Serial composition of accelerator and residual host work.
pub fn estimate_throughput(input: EstimateInput) -> Result<f64, EstimateError> {
    input.validate()?;
    Ok(1.0 / (1.0 / input.tp_hw + input.rt_sw / input.tp_sw))
}

/// Normalize absolute per-key measurements into fractions of their total.
/// Returns None when the total is not positive, since no meaningful
/// distribution exists for an all-zero profile.
pub fn relative_distribution<K: Ord + Clone>(raw: &BTreeMap<K, f64>) -> Option<BTreeMap<K, f64>> {
    let total: f64 = raw.values().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    Some(
        raw.iter()
            .map(|(k, v)| (k.clone(), v / total))
            .collect(),
    )
}

/// Residual host fraction after offloading the given keys: one minus the
/// offloaded share of the profile. Clamped into [0, 1] to absorb float
/// dust from the summation.
pub fn residual_fraction<K: Ord + Clone>(
    raw: &BTreeMap<K, f64>,
    offloaded: impl IntoIterator<Item = K>,
) -> Option<f64> {
    let dist = relative_distribution(raw)?;
    let moved: f64 = offloaded
        .into_iter()
        .filter_map(|k| dist.get(&k).copied())
        .sum();
    Some((1.0 - moved).clamp(0.0, 1.0))
}

/// How the residual fraction for a row was accounted. Per-operator profiles
/// never attribute the whole runtime, so leaving the unattributed remainder
/// on the host is the conservative reading; a full offload row instead
/// credits the accelerator with everything that left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Accounting {
    Pessimistic,
    Optimistic,
}

impl Accounting {
    pub fn label(&self) -> &'static str {
        match self {
            Accounting::Pessimistic => "pessimistic",
            Accounting::Optimistic => "optimistic",
        }
    }

    pub fn for_scenario(scenario: Scenario) -> Accounting {
        match scenario {
            Scenario::FullOffload => Accounting::Optimistic,
            _ => Accounting::Pessimistic,
        }
    }
}

/// One line of a speedup report.
#[derive(Clone, Debug)]
pub struct SpeedupRow {
    pub scenario: u8,
    pub rt_sw: f64,
    pub tp_sw: f64,
    pub tp_hw: f64,
    pub tp_est: f64,
    pub speedup: f64,
    pub accounting: Accounting,
}

impl SpeedupRow {
    pub fn new(
        scenario: Scenario,
        input: EstimateInput,
        accounting: Accounting,
    ) -> Result<SpeedupRow, EstimateError> {
        let tp_est = estimate_throughput(input)?;
        Ok(SpeedupRow {
            scenario: scenario.number(),
            rt_sw: input.rt_sw,
            tp_sw: input.tp_sw,
            tp_hw: input.tp_hw,
            tp_est,
            speedup: tp_est / input.tp_sw,
            accounting,
        })
    }

    /// True when the offload does not pay for itself.
    pub fn no_benefit(&self) -> bool {
        self.speedup <= 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn known_point_is_exact() {
        let tp = estimate_throughput(EstimateInput {
            tp_sw: 10e6,
            tp_hw: 500e6,
            rt_sw: 0.18,
        })
        .unwrap();
        assert_eq!(tp, 50e6);
    }

    #[test]
    fn zero_residual_yields_accelerator_throughput() {
        let tp = estimate_throughput(EstimateInput {
            tp_sw: 7e6,
            tp_hw: 480e6,
            rt_sw: 0.0,
        })
        .unwrap();
        assert_eq!(tp, 480e6);
    }

    #[test]
    fn estimate_never_exceeds_either_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xe571);
        for _ in 0..20_000 {
            let input = EstimateInput {
                tp_sw: rng.gen_range(1e3..1e9),
                tp_hw: rng.gen_range(1e3..1e9),
                rt_sw: rng.gen_range(0.0..=1.0),
            };
            let tp = estimate_throughput(input).unwrap();
            assert!(tp <= input.tp_hw * (1.0 + 1e-12));
            if input.rt_sw > 0.0 {
                assert!(tp <= input.tp_sw / input.rt_sw * (1.0 + 1e-12));
            }
            assert!(tp > 0.0);
        }
    }

    #[test]
    fn estimate_is_monotone_in_its_inputs() {
        let base = EstimateInput {
            tp_sw: 10e6,
            tp_hw: 100e6,
            rt_sw: 0.3,
        };
        let tp0 = estimate_throughput(base).unwrap();
        let faster_hw = estimate_throughput(EstimateInput {
            tp_hw: 200e6,
            ..base
        })
        .unwrap();
        let less_residual = estimate_throughput(EstimateInput {
            rt_sw: 0.1,
            ..base
        })
        .unwrap();
        assert!(faster_hw > tp0);
        assert!(less_residual > tp0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let bad = [
            EstimateInput {
                tp_sw: 0.0,
                tp_hw: 1e6,
                rt_sw: 0.5,
            },
            EstimateInput {
                tp_sw: 1e6,
                tp_hw: f64::NAN,
                rt_sw: 0.5,
            },
            EstimateInput {
                tp_sw: 1e6,
                tp_hw: 1e6,
                rt_sw: 1.5,
            },
            EstimateInput {
                tp_sw: 1e6,
                tp_hw: 1e6,
                rt_sw: -0.1,
            },
        ];
        for input in bad {
            assert!(estimate_throughput(input).is_err());
        }
    }

    #[test]
    fn distribution_sums_to_one() {
        let raw: BTreeMap<u32, f64> =
            vec![(1u32, 3.0), (2, 1.0), (3, 4.0)].into_iter().collect();
        let dist = relative_distribution(&raw).unwrap();
        let total: f64 = dist.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(dist[&1], 0.375);
        assert!(relative_distribution::<u32>(&BTreeMap::new()).is_none());
    }

    #[test]
    fn residual_drops_offloaded_share() {
        let raw: BTreeMap<u32, f64> =
            vec![(1u32, 2.0), (2, 2.0), (3, 4.0)].into_iter().collect();
        let rt = residual_fraction(&raw, [1u32, 2]).unwrap();
        assert!((rt - 0.5).abs() < 1e-12);
        let rt_all = residual_fraction(&raw, [1u32, 2, 3]).unwrap();
        assert_eq!(rt_all, 0.0);
    }

    #[test]
    fn speedup_row_flags_useless_offload() {
        let row = SpeedupRow::new(
            Scenario::ExtractionOnly,
            EstimateInput {
                tp_sw: 10e6,
                tp_hw: 500e6,
                rt_sw: 0.99,
            },
            Accounting::Pessimistic,
        )
        .unwrap();
        assert!(row.speedup < 1.1);
        assert_eq!(row.accounting.label(), "pessimistic");
        assert_eq!(
            Accounting::for_scenario(Scenario::FullOffload),
            Accounting::Optimistic
        );
        let strong = SpeedupRow::new(
            Scenario::FullOffload,
            EstimateInput {
                tp_sw: 10e6,
                tp_hw: 500e6,
                rt_sw: 0.05,
            },
            Accounting::Optimistic,
        )
        .unwrap();
        assert!(!strong.no_benefit());
        assert!(strong.speedup > 10.0);
    }
}
