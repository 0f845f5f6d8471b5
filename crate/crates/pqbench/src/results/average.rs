//! Run averaging: group records by identity, arithmetic-mean every numeric
//! field (iteration counts included), and drop the run index.

use std::collections::BTreeMap;

use crate::model::{
    AlgorithmFamily, CpuOpRecord, HandshakeMode, HandshakeRecord, MemOpRecord, Operation,
    SpeedRecord,
};

use super::ResultsError;

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedCpu {
    pub algorithm_id: String,
    pub operation: Operation,
    pub iterations: f64,
    pub mean_time_us: f64,
    pub mean_cycles: f64,
    pub runs_aggregated: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedMemory {
    pub algorithm_id: String,
    pub operation: Operation,
    pub heap_bytes: f64,
    pub ext_heap_bytes: f64,
    pub stack_bytes: f64,
    pub runs_aggregated: u32,
}

impl AveragedMemory {
    /// Peak footprint: the sum Massif's peak detection maximizes.
    pub fn footprint(&self) -> f64 {
        self.heap_bytes + self.ext_heap_bytes + self.stack_bytes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedHandshake {
    pub sig_algorithm_id: String,
    pub kem_algorithm_id: String,
    pub mode: HandshakeMode,
    pub connections: f64,
    pub real_seconds: f64,
    pub user_connections_per_sec: f64,
    pub runs_aggregated: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AveragedSpeed {
    pub algorithm_id: String,
    pub operation: Operation,
    pub ops_per_second: f64,
    pub mean_op_seconds: f64,
    pub runs_aggregated: u32,
}

/// Group by key, check per-algorithm family consistency, and fold each group
/// through `finish`.
fn average_by<R, K: Ord + Clone, A>(
    records: &[R],
    key: impl Fn(&R) -> K,
    alg_and_family: impl Fn(&R) -> (String, AlgorithmFamily),
    finish: impl Fn(&K, &[&R]) -> A,
) -> Result<Vec<A>, ResultsError> {
    let mut families: BTreeMap<String, AlgorithmFamily> = BTreeMap::new();
    for r in records {
        let (alg, family) = alg_and_family(r);
        if let Some(prev) = families.insert(alg.clone(), family) {
            if prev != family {
                return Err(ResultsError::InconsistentGroup(format!(
                    "algorithm {alg:?} appears with operations of both families"
                )));
            }
        }
    }
    let mut groups: BTreeMap<K, Vec<&R>> = BTreeMap::new();
    for r in records {
        groups.entry(key(r)).or_default().push(r);
    }
    Ok(groups.iter().map(|(k, rs)| finish(k, rs)).collect())
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

pub fn average_cpu(records: &[CpuOpRecord]) -> Result<Vec<AveragedCpu>, ResultsError> {
    average_by(
        records,
        |r| (r.algorithm_id.clone(), r.operation.order_index(), r.operation),
        |r| (r.algorithm_id.clone(), r.operation.family()),
        |(alg, _, op), rs| {
            let n = rs.len();
            AveragedCpu {
                algorithm_id: alg.clone(),
                operation: *op,
                iterations: mean(rs.iter().map(|r| r.iterations as f64), n),
                mean_time_us: mean(rs.iter().map(|r| r.mean_time_us), n),
                mean_cycles: mean(rs.iter().map(|r| r.mean_cycles), n),
                runs_aggregated: n as u32,
            }
        },
    )
}

pub fn average_memory(records: &[MemOpRecord]) -> Result<Vec<AveragedMemory>, ResultsError> {
    average_by(
        records,
        |r| (r.algorithm_id.clone(), r.operation.order_index(), r.operation),
        |r| (r.algorithm_id.clone(), r.operation.family()),
        |(alg, _, op), rs| {
            let n = rs.len();
            AveragedMemory {
                algorithm_id: alg.clone(),
                operation: *op,
                heap_bytes: mean(rs.iter().map(|r| r.heap_bytes as f64), n),
                ext_heap_bytes: mean(rs.iter().map(|r| r.ext_heap_bytes as f64), n),
                stack_bytes: mean(rs.iter().map(|r| r.stack_bytes as f64), n),
                runs_aggregated: n as u32,
            }
        },
    )
}

pub fn average_handshake(
    records: &[HandshakeRecord],
) -> Result<Vec<AveragedHandshake>, ResultsError> {
    let mut groups: BTreeMap<(String, String, HandshakeMode), Vec<&HandshakeRecord>> =
        BTreeMap::new();
    for r in records {
        groups
            .entry((
                r.sig_algorithm_id.clone(),
                r.kem_algorithm_id.clone(),
                r.mode,
            ))
            .or_default()
            .push(r);
    }
    Ok(groups
        .iter()
        .map(|((sig, kem, mode), rs)| {
            let n = rs.len();
            AveragedHandshake {
                sig_algorithm_id: sig.clone(),
                kem_algorithm_id: kem.clone(),
                mode: *mode,
                connections: mean(rs.iter().map(|r| r.connections as f64), n),
                real_seconds: mean(rs.iter().map(|r| r.real_seconds), n),
                user_connections_per_sec: mean(
                    rs.iter().map(|r| r.user_connections_per_sec),
                    n,
                ),
                runs_aggregated: n as u32,
            }
        })
        .collect())
}

pub fn average_speed(records: &[SpeedRecord]) -> Result<Vec<AveragedSpeed>, ResultsError> {
    average_by(
        records,
        |r| (r.algorithm_id.clone(), r.operation.order_index(), r.operation),
        |r| (r.algorithm_id.clone(), r.operation.family()),
        |(alg, _, op), rs| {
            let n = rs.len();
            AveragedSpeed {
                algorithm_id: alg.clone(),
                operation: *op,
                ops_per_second: mean(rs.iter().map(|r| r.ops_per_second), n),
                mean_op_seconds: mean(rs.iter().map(|r| r.mean_op_seconds), n),
                runs_aggregated: n as u32,
            }
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cpu(alg: &str, op: Operation, run: u32, t: f64) -> CpuOpRecord {
        CpuOpRecord::new(alg, op, run, 100, t, t * 2.0).unwrap()
    }

    #[test]
    fn averages_three_runs() {
        // keygen time column values used as fixture inputs.
        let records = vec![
            cpu("ML-KEM-512", Operation::Keygen, 1, 10.0),
            cpu("ML-KEM-512", Operation::Keygen, 2, 11.0),
            cpu("ML-KEM-512", Operation::Keygen, 3, 12.0),
        ];
        let avg = average_cpu(&records).unwrap();
        assert_eq!(avg.len(), 1);
        assert_eq!(avg[0].mean_time_us, 11.0);
        assert_eq!(avg[0].runs_aggregated, 3);
    }

    #[test]
    fn single_run_is_identity() {
        let records = vec![cpu("X", Operation::Encaps, 1, 7.5)];
        let avg = average_cpu(&records).unwrap();
        assert_eq!(avg[0].mean_time_us, 7.5);
        assert_eq!(avg[0].iterations, 100.0);
        assert_eq!(avg[0].runs_aggregated, 1);
    }

    #[test]
    fn empty_is_empty() {
        assert!(average_cpu(&[]).unwrap().is_empty());
        assert!(average_memory(&[]).unwrap().is_empty());
        assert!(average_handshake(&[]).unwrap().is_empty());
        assert!(average_speed(&[]).unwrap().is_empty());
    }

    #[test]
    fn mixed_family_is_inconsistent() {
        let records = vec![
            cpu("X", Operation::Keygen, 1, 1.0),
            CpuOpRecord::new("X", Operation::Sign, 1, 10, 1.0, 1.0).unwrap(),
        ];
        let err = average_cpu(&records).unwrap_err();
        assert_eq!(err.code(), "INCONSISTENT_GROUP");
    }

    #[test]
    fn handshake_groups_by_pair_and_mode() {
        let mk = |mode, run, conns| {
            HandshakeRecord::new("S", "K", mode, run, conns, 30.0, 1.0).unwrap()
        };
        let records = vec![
            mk(HandshakeMode::FirstUse, 1, 100),
            mk(HandshakeMode::FirstUse, 2, 200),
            mk(HandshakeMode::SessionReuse, 1, 400),
        ];
        let avg = average_handshake(&records).unwrap();
        assert_eq!(avg.len(), 2);
        let first = avg.iter().find(|a| a.mode == HandshakeMode::FirstUse).unwrap();
        assert_eq!(first.connections, 150.0);
        assert_eq!(first.runs_aggregated, 2);
    }

    proptest! {
        // Averaging is invariant under input permutation.
        #[test]
        fn permutation_invariant(
            times in proptest::collection::vec((0u8..4, 1u32..4, 1.0f64..100.0), 1..24),
            seed in any::<u64>(),
        ) {
            let algs = ["A", "B", "C", "D"];
            let records: Vec<CpuOpRecord> = times
                .iter()
                .map(|(a, run, t)| cpu(algs[*a as usize], Operation::Keygen, *run, *t))
                .collect();
            let mut shuffled = records.clone();
            // Cheap deterministic shuffle.
            let mut state = seed;
            for i in (1..shuffled.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state % (i as u64 + 1)) as usize;
                shuffled.swap(i, j);
            }
            let a = average_cpu(&records).unwrap();
            let b = average_cpu(&shuffled).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert_eq!(&x.algorithm_id, &y.algorithm_id);
                prop_assert!((x.mean_time_us - y.mean_time_us).abs() < 1e-9);
                prop_assert_eq!(x.runs_aggregated, y.runs_aggregated);
            }
        }
    }
}
