//! Parsers for the raw output formats of the external benchmark tools.
//!
//! Accepted liboqs-style speed CSV: header
//! `Operation,Iterations,Total time (s),Time (us): mean,CPU cycles: mean`
//! with any extra columns after these ignored. Accepted speed-tool layout:
//! a header line whose first token begins `keygen/s` or `keygens/s`, then
//! whitespace-separated rows `<alg> <op1/s> <op2/s> <op3/s>`.

use crate::model::{CpuOpRecord, Operation, SpeedRecord};

use super::ResultsError;

const LIBOQS_COLUMNS: [&str; 5] = [
    "Operation",
    "Iterations",
    "Total time (s)",
    "Time (us): mean",
    "CPU cycles: mean",
];

/// Parse a liboqs-style per-algorithm speed CSV. The text carries no
/// algorithm identity or run number, so the caller supplies both.
pub fn parse_liboqs_speed_csv(
    text: &str,
    algorithm_id: &str,
    run_index: u32,
) -> Result<Vec<CpuOpRecord>, ResultsError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(ResultsError::MalformedCsv {
        row: 1,
        detail: "empty document".into(),
    })?;
    let header_fields: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_fields.len() < LIBOQS_COLUMNS.len()
        || header_fields[..LIBOQS_COLUMNS.len()] != LIBOQS_COLUMNS
    {
        return Err(ResultsError::MalformedCsv {
            row: 1,
            detail: format!("unrecognized header {header:?}"),
        });
    }

    let mut records = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 5 {
            return Err(ResultsError::MalformedCsv {
                row,
                detail: format!("expected at least 5 fields, got {}", fields.len()),
            });
        }
        let op = Operation::from_label(fields[0]).ok_or_else(|| ResultsError::MalformedCsv {
            row,
            detail: format!("unknown operation label {:?}", fields[0]),
        })?;
        let iterations: u64 = fields[1].parse().map_err(|_| ResultsError::MalformedCsv {
            row,
            detail: format!("bad iterations {:?}", fields[1]),
        })?;
        // Total time is validated but the mean columns are authoritative.
        fields[2].parse::<f64>().map_err(|_| ResultsError::MalformedCsv {
            row,
            detail: format!("bad total time {:?}", fields[2]),
        })?;
        let mean_time_us: f64 = fields[3].parse().map_err(|_| ResultsError::MalformedCsv {
            row,
            detail: format!("bad mean time {:?}", fields[3]),
        })?;
        let mean_cycles: f64 = fields[4].parse().map_err(|_| ResultsError::MalformedCsv {
            row,
            detail: format!("bad mean cycles {:?}", fields[4]),
        })?;
        let rec = CpuOpRecord::new(
            algorithm_id,
            op,
            run_index,
            iterations,
            mean_time_us,
            mean_cycles,
        )
        .map_err(|e| ResultsError::MalformedCsv {
            row,
            detail: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

fn speed_header_ops(line: &str) -> Option<[Operation; 3]> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < 3 {
        return None;
    }
    if !(tokens[0].starts_with("keygen/s") || tokens[0].starts_with("keygens/s")) {
        return None;
    }
    let second = tokens[1].trim_end_matches("/s");
    let third = tokens[2].trim_end_matches("/s");
    match (second, third) {
        ("encaps", "decaps") | ("encap", "decap") => {
            Some([Operation::Keygen, Operation::Encaps, Operation::Decaps])
        }
        ("sign" | "signs", "verify" | "verifys" | "verifies") => {
            Some([Operation::Keypair, Operation::Sign, Operation::Verify])
        }
        _ => None,
    }
}

/// Parse speed-tool tabular output into three throughput records per row.
/// Multiple header sections (a KEM table followed by a signature table) are
/// accepted; anything else after the last well-formed row is an error.
pub fn parse_openssl_speed(text: &str, run_index: u32) -> Result<Vec<SpeedRecord>, ResultsError> {
    let mut records = Vec::new();
    let mut current_ops: Option<[Operation; 3]> = None;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(ops) = speed_header_ops(line) {
            current_ops = Some(ops);
            continue;
        }
        let ops = current_ops.ok_or_else(|| {
            ResultsError::MalformedSpeedOutput(format!(
                "data row before any header line: {line:?}"
            ))
        })?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(ResultsError::MalformedSpeedOutput(format!(
                "expected `<alg> <v> <v> <v>`, got {line:?}"
            )));
        }
        let alg = tokens[0];
        for (op, tok) in ops.iter().zip(&tokens[1..]) {
            let ops_per_second: f64 = tok.parse().map_err(|_| {
                ResultsError::MalformedSpeedOutput(format!("non-numeric throughput {tok:?}"))
            })?;
            let mean_op_seconds = if ops_per_second > 0.0 {
                1.0 / ops_per_second
            } else {
                0.0
            };
            let rec = SpeedRecord::new(alg, *op, run_index, ops_per_second, mean_op_seconds)
                .map_err(|e| ResultsError::MalformedSpeedOutput(e.to_string()))?;
            records.push(rec);
        }
    }
    Ok(records)
}
