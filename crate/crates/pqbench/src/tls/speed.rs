//! TLS speed bench: per-operation throughput over the fixed-window loop,
//! using the TLS window length. Runs on the client machine after handshake
//! testing.

use crate::compute::ComputeError;
use crate::model::{BenchConfig, Capability, Registry, SpeedRecord};
use crate::provider::ProviderFactory;
use crate::timing::{CycleCounter, TimeSource};

/// Throughput of every operation of every SPEED-capable algorithm, one
/// record per (algorithm, operation, run).
pub fn bench_tls_speed(
    registry: &Registry,
    factory: &dyn ProviderFactory,
    config: &BenchConfig,
    clock: &dyn TimeSource,
    counter: &mut dyn CycleCounter,
) -> Result<Vec<SpeedRecord>, ComputeError> {
    let mut records = Vec::new();
    for run_index in 1..=config.num_runs {
        for desc in registry.with_capability(Capability::Speed) {
            let cpu_records = crate::compute::bench_cpu_algorithm(
                desc,
                factory,
                config.tls_window_seconds,
                run_index,
                clock,
                counter,
            )?;
            for rec in cpu_records {
                let seconds = rec.mean_time_us * 1e-6;
                let ops_per_second = if seconds > 0.0 { 1.0 / seconds } else { 0.0 };
                records.push(SpeedRecord::new(
                    rec.algorithm_id,
                    rec.operation,
                    run_index,
                    ops_per_second,
                    seconds,
                )?);
            }
        }
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_registry;
    use crate::provider::{MockCostProfile, MockProviderFactory};
    use crate::timing::{ClockCycleCounter, VirtualClock};

    #[test]
    fn speed_records_counts_and_arithmetic() {
        let reg = crate::model::Registry::new(
            builtin_registry()
                .algorithms
                .into_iter()
                .filter(|d| d.id == "ML-KEM-512" || d.id == "FN-DSA-512")
                .collect(),
        )
        .unwrap();
        let clock = VirtualClock::new();
        let factory =
            MockProviderFactory::with_clock(5, MockCostProfile::uniform(100), clock.clone());
        let config = BenchConfig {
            num_runs: 3,
            tls_window_seconds: 0.0002,
            ..BenchConfig::default()
        };
        let mut counter = ClockCycleCounter::new(Box::new(clock.clone()), 1.0);
        let records = bench_tls_speed(&reg, &factory, &config, &clock, &mut counter).unwrap();
        // 2 algorithms x 3 ops x 3 runs.
        assert_eq!(records.len(), 18);
        for r in &records {
            assert!(r.ops_per_second > 0.0);
            let implied = 1.0 / r.ops_per_second;
            assert!((r.mean_op_seconds - implied).abs() <= 1e-6 * implied);
        }
    }

    #[test]
    fn speed_skips_algorithms_without_capability() {
        let reg = builtin_registry();
        // SLH-DSA lacks SPEED capability.
        let clock = VirtualClock::new();
        let factory =
            MockProviderFactory::with_clock(5, MockCostProfile::uniform(50), clock.clone());
        let config = BenchConfig {
            num_runs: 1,
            tls_window_seconds: 0.0001,
            ..BenchConfig::default()
        };
        let mut counter = ClockCycleCounter::new(Box::new(clock.clone()), 1.0);
        let records = bench_tls_speed(&reg, &factory, &config, &clock, &mut counter).unwrap();
        assert!(records.iter().all(|r| !r.algorithm_id.starts_with("SLH-DSA")));
        assert!(records.iter().all(|r| !r.algorithm_id.starts_with("HQC")));
    }
}
