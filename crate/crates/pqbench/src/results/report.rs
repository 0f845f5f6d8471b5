//! Report emission: averaged CSVs, per-criterion ranking CSVs, and a
//! markdown summary. Output is byte-deterministic for identical inputs.

use std::path::{Path, PathBuf};

use crate::model::Registry;

use super::average::{AveragedCpu, AveragedHandshake, AveragedMemory, AveragedSpeed};
use super::csvio::fmt_num;
use super::rank::{
    rank_top_n_algorithms, rank_top_n_handshake, FilterSet, RankCriterion, RankedAlgorithm,
    RankedPair,
};
use super::ResultsError;

#[derive(Debug, Clone, Default)]
pub struct ReportInputs {
    pub cpu: Vec<AveragedCpu>,
    pub memory: Vec<AveragedMemory>,
    pub handshake: Vec<AveragedHandshake>,
    pub speed: Vec<AveragedSpeed>,
}

#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub top_n: usize,
    pub filters: FilterSet,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            top_n: 10,
            filters: FilterSet::default(),
        }
    }
}

fn write(path: &Path, content: &str) -> Result<(), ResultsError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| ResultsError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, content).map_err(|source| ResultsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn averaged_cpu_csv(records: &[AveragedCpu]) -> String {
    let mut rows: Vec<&AveragedCpu> = records.iter().collect();
    rows.sort_by(|a, b| {
        (&a.algorithm_id, a.operation.order_index()).cmp(&(&b.algorithm_id, b.operation.order_index()))
    });
    let mut out = String::from("algorithm,family,operation,runs,iterations,mean_time_us,mean_cycles\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.algorithm_id,
            r.operation.family(),
            r.operation,
            r.runs_aggregated,
            fmt_num(r.iterations),
            fmt_num(r.mean_time_us),
            fmt_num(r.mean_cycles)
        ));
    }
    out
}

fn averaged_memory_csv(records: &[AveragedMemory]) -> String {
    let mut rows: Vec<&AveragedMemory> = records.iter().collect();
    rows.sort_by(|a, b| {
        (&a.algorithm_id, a.operation.order_index()).cmp(&(&b.algorithm_id, b.operation.order_index()))
    });
    let mut out =
        String::from("algorithm,family,operation,runs,heap_bytes,ext_heap_bytes,stack_bytes\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.algorithm_id,
            r.operation.family(),
            r.operation,
            r.runs_aggregated,
            fmt_num(r.heap_bytes),
            fmt_num(r.ext_heap_bytes),
            fmt_num(r.stack_bytes)
        ));
    }
    out
}

fn averaged_handshake_csv(records: &[AveragedHandshake]) -> String {
    let mut rows: Vec<&AveragedHandshake> = records.iter().collect();
    rows.sort_by(|a, b| {
        (&a.sig_algorithm_id, &a.kem_algorithm_id, a.mode).cmp(&(
            &b.sig_algorithm_id,
            &b.kem_algorithm_id,
            b.mode,
        ))
    });
    let mut out = String::from(
        "sig_algorithm,kem_algorithm,mode,runs,connections,real_seconds,user_connections_per_sec\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.sig_algorithm_id,
            r.kem_algorithm_id,
            r.mode,
            r.runs_aggregated,
            fmt_num(r.connections),
            fmt_num(r.real_seconds),
            fmt_num(r.user_connections_per_sec)
        ));
    }
    out
}

fn averaged_speed_csv(records: &[AveragedSpeed]) -> String {
    let mut rows: Vec<&AveragedSpeed> = records.iter().collect();
    rows.sort_by(|a, b| {
        (&a.algorithm_id, a.operation.order_index()).cmp(&(&b.algorithm_id, b.operation.order_index()))
    });
    let mut out = String::from("algorithm,family,operation,runs,ops_per_second,mean_op_seconds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.algorithm_id,
            r.operation.family(),
            r.operation,
            r.runs_aggregated,
            fmt_num(r.ops_per_second),
            fmt_num(r.mean_op_seconds)
        ));
    }
    out
}

fn ranking_csv(ranked: &[RankedAlgorithm]) -> String {
    let mut out = String::from("rank,algorithm,score\n");
    for (i, r) in ranked.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, r.algorithm_id, fmt_num(r.score)));
    }
    out
}

fn ranking_pairs_csv(ranked: &[RankedPair]) -> String {
    let mut out = String::from("rank,sig_algorithm,kem_algorithm,score\n");
    for (i, r) in ranked.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            r.sig_algorithm_id,
            r.kem_algorithm_id,
            fmt_num(r.score)
        ));
    }
    out
}

fn summary_table(ranked: &[RankedAlgorithm], unit: &str) -> String {
    let mut out = String::from("| rank | algorithm | score |\n|---|---|---|\n");
    for (i, r) in ranked.iter().enumerate() {
        out.push_str(&format!(
            "| {} | {} | {} {} |\n",
            i + 1,
            r.algorithm_id,
            fmt_num(r.score),
            unit
        ));
    }
    out
}

/// Write averaged CSVs, ranking CSVs, and `summary.md` under `out_dir`.
/// Returns the paths written.
pub fn emit_report(
    inputs: &ReportInputs,
    registry: &Registry,
    opts: &ReportOptions,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ResultsError> {
    let mut written = Vec::new();
    let averaged = out_dir.join("averaged");
    let rankings = out_dir.join("rankings");

    for (name, content) in [
        ("cpu.csv", averaged_cpu_csv(&inputs.cpu)),
        ("memory.csv", averaged_memory_csv(&inputs.memory)),
        ("handshake.csv", averaged_handshake_csv(&inputs.handshake)),
        ("speed.csv", averaged_speed_csv(&inputs.speed)),
    ] {
        let path = averaged.join(name);
        write(&path, &content)?;
        written.push(path);
    }

    let mut summary = String::from("# Benchmark summary\n");
    summary.push_str(&format!("\nTop {} per criterion.", opts.top_n));
    if !opts.filters.exclude_ids.is_empty() {
        summary.push_str(&format!(
            " Excluded: {}.",
            opts.filters.exclude_ids.join(", ")
        ));
    }
    if opts.filters.prefer_standardised {
        summary.push_str(" Non-standardised variants of standardised schemes dropped.");
    }
    summary.push('\n');
    let mut warnings = Vec::new();

    // CPU: lowest mean operation time.
    summary.push_str("\n## CPU: lowest mean operation time (us)\n\n");
    if inputs.cpu.is_empty() {
        summary.push_str("no data\n");
        let path = rankings.join("cpu_mean_time.csv");
        write(&path, "rank,algorithm,score\n")?;
        written.push(path);
    } else {
        let (ranked, mut w) = rank_top_n_algorithms(
            Some(&inputs.cpu),
            None,
            None,
            registry,
            RankCriterion::CpuMeanTime,
            opts.top_n,
            &opts.filters,
        )?;
        warnings.append(&mut w);
        summary.push_str(&summary_table(&ranked, "us"));
        let path = rankings.join("cpu_mean_time.csv");
        write(&path, &ranking_csv(&ranked))?;
        written.push(path);
    }

    // Memory: lowest mean peak footprint.
    summary.push_str("\n## Memory: lowest mean peak footprint (bytes)\n\n");
    if inputs.memory.is_empty() {
        summary.push_str("no data\n");
        let path = rankings.join("mem_peak_footprint.csv");
        write(&path, "rank,algorithm,score\n")?;
        written.push(path);
    } else {
        let (ranked, mut w) = rank_top_n_algorithms(
            None,
            Some(&inputs.memory),
            None,
            registry,
            RankCriterion::MemPeakFootprint,
            opts.top_n,
            &opts.filters,
        )?;
        warnings.append(&mut w);
        summary.push_str(&summary_table(&ranked, "bytes"));
        let path = rankings.join("mem_peak_footprint.csv");
        write(&path, &ranking_csv(&ranked))?;
        written.push(path);
    }

    // Handshake: highest real-time connections.
    summary.push_str("\n## TLS handshake: most real-time connections\n\n");
    if inputs.handshake.is_empty() {
        summary.push_str("no data\n");
        let path = rankings.join("handshake_real_connections.csv");
        write(&path, "rank,sig_algorithm,kem_algorithm,score\n")?;
        written.push(path);
    } else {
        let (ranked, mut w) =
            rank_top_n_handshake(&inputs.handshake, registry, opts.top_n, &opts.filters)?;
        warnings.append(&mut w);
        let mut table = String::from("| rank | signature | kem | connections |\n|---|---|---|---|\n");
        for (i, r) in ranked.iter().enumerate() {
            table.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                i + 1,
                r.sig_algorithm_id,
                r.kem_algorithm_id,
                fmt_num(r.score)
            ));
        }
        summary.push_str(&table);
        let path = rankings.join("handshake_real_connections.csv");
        write(&path, &ranking_pairs_csv(&ranked))?;
        written.push(path);
    }

    // Speed: highest mean throughput.
    summary.push_str("\n## TLS speed: highest mean throughput (ops/s)\n\n");
    if inputs.speed.is_empty() {
        summary.push_str("no data\n");
        let path = rankings.join("speed_mean_throughput.csv");
        write(&path, "rank,algorithm,score\n")?;
        written.push(path);
    } else {
        let (ranked, mut w) = rank_top_n_algorithms(
            None,
            None,
            Some(&inputs.speed),
            registry,
            RankCriterion::SpeedMeanThroughput,
            opts.top_n,
            &opts.filters,
        )?;
        warnings.append(&mut w);
        summary.push_str(&summary_table(&ranked, "ops/s"));
        let path = rankings.join("speed_mean_throughput.csv");
        write(&path, &ranking_csv(&ranked))?;
        written.push(path);
    }

    if !warnings.is_empty() {
        summary.push_str("\n## Warnings\n\n");
        for w in &warnings {
            summary.push_str(&format!("- {w}\n"));
        }
    }

    let summary_path = out_dir.join("summary.md");
    write(&summary_path, &summary)?;
    written.push(summary_path);
    Ok(written)
}
