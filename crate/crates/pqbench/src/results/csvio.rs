//! CSV persistence for benchmark records.
//!
//! Machine output: no thousands separators, floats with at most six
//! fractional digits and trailing zeros trimmed. Rows are sorted by
//! (algorithm, canonical operation order, run). Readers are strict: exact
//! header, exact column count, and nothing but whitespace after the last
//! row.

use std::path::{Path, PathBuf};

use crate::model::{
    CpuOpRecord, HandshakeMode, HandshakeRecord, MemOpRecord, Operation, SpeedRecord,
};

use super::ResultsError;

pub const CPU_HEADER: &str = "algorithm,family,operation,run,iterations,mean_time_us,mean_cycles";
pub const MEMORY_HEADER: &str =
    "algorithm,family,operation,run,heap_bytes,ext_heap_bytes,stack_bytes";
pub const HANDSHAKE_HEADER: &str =
    "sig_algorithm,kem_algorithm,mode,run,connections,real_seconds,user_connections_per_sec";
pub const SPEED_HEADER: &str = "algorithm,family,operation,run,ops_per_second,mean_op_seconds";

/// Format a float with up to six fractional digits, no exponent, trailing
/// zeros trimmed.
pub fn fmt_num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn write_atomic(path: &Path, content: &str) -> Result<(), ResultsError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| ResultsError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content).map_err(|source| ResultsError::Io {
        path: tmp.clone(),
        source,
    })?;
    std::fs::rename(&tmp, path).map_err(|source| ResultsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn cpu_csv_string(records: &[CpuOpRecord]) -> String {
    let mut rows: Vec<&CpuOpRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        (&a.algorithm_id, a.operation.order_index(), a.run_index).cmp(&(
            &b.algorithm_id,
            b.operation.order_index(),
            b.run_index,
        ))
    });
    let mut out = String::from(CPU_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.algorithm_id,
            r.operation.family(),
            r.operation,
            r.run_index,
            r.iterations,
            fmt_num(r.mean_time_us),
            fmt_num(r.mean_cycles)
        ));
    }
    out
}

pub fn write_cpu_csv(path: &Path, records: &[CpuOpRecord]) -> Result<(), ResultsError> {
    write_atomic(path, &cpu_csv_string(records))
}

pub fn memory_csv_string(records: &[MemOpRecord]) -> String {
    let mut rows: Vec<&MemOpRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        (&a.algorithm_id, a.operation.order_index(), a.run_index).cmp(&(
            &b.algorithm_id,
            b.operation.order_index(),
            b.run_index,
        ))
    });
    let mut out = String::from(MEMORY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.algorithm_id,
            r.operation.family(),
            r.operation,
            r.run_index,
            r.heap_bytes,
            r.ext_heap_bytes,
            r.stack_bytes
        ));
    }
    out
}

pub fn write_memory_csv(path: &Path, records: &[MemOpRecord]) -> Result<(), ResultsError> {
    write_atomic(path, &memory_csv_string(records))
}

pub fn handshake_csv_string(records: &[HandshakeRecord]) -> String {
    let mut rows: Vec<&HandshakeRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        (&a.sig_algorithm_id, &a.kem_algorithm_id, a.mode, a.run_index).cmp(&(
            &b.sig_algorithm_id,
            &b.kem_algorithm_id,
            b.mode,
            b.run_index,
        ))
    });
    let mut out = String::from(HANDSHAKE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.sig_algorithm_id,
            r.kem_algorithm_id,
            r.mode,
            r.run_index,
            r.connections,
            fmt_num(r.real_seconds),
            fmt_num(r.user_connections_per_sec)
        ));
    }
    out
}

pub fn write_handshake_csv(path: &Path, records: &[HandshakeRecord]) -> Result<(), ResultsError> {
    write_atomic(path, &handshake_csv_string(records))
}

pub fn speed_csv_string(records: &[SpeedRecord]) -> String {
    let mut rows: Vec<&SpeedRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        (&a.algorithm_id, a.operation.order_index(), a.run_index).cmp(&(
            &b.algorithm_id,
            b.operation.order_index(),
            b.run_index,
        ))
    });
    let mut out = String::from(SPEED_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.algorithm_id,
            r.operation.family(),
            r.operation,
            r.run_index,
            fmt_num(r.ops_per_second),
            fmt_num(r.mean_op_seconds)
        ));
    }
    out
}

pub fn write_speed_csv(path: &Path, records: &[SpeedRecord]) -> Result<(), ResultsError> {
    write_atomic(path, &speed_csv_string(records))
}

struct StrictCsv<'a> {
    rows: Vec<(usize, Vec<&'a str>)>,
}

fn split_csv<'a>(
    text: &'a str,
    header: &str,
    columns: usize,
) -> Result<StrictCsv<'a>, ResultsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim_end() == header => {}
        Some((_, first)) => {
            return Err(ResultsError::MalformedCsv {
                row: 1,
                detail: format!("expected header {header:?}, got {first:?}"),
            })
        }
        None => {
            return Err(ResultsError::MalformedCsv {
                row: 1,
                detail: "empty document".into(),
            })
        }
    }
    let mut rows = Vec::new();
    let mut saw_blank = false;
    for (idx, line) in lines {
        let row_no = idx + 1;
        if line.trim().is_empty() {
            saw_blank = true;
            continue;
        }
        if saw_blank {
            return Err(ResultsError::MalformedCsv {
                row: row_no,
                detail: "content after blank line".into(),
            });
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(ResultsError::MalformedCsv {
                row: row_no,
                detail: format!("expected {columns} fields, got {}", fields.len()),
            });
        }
        rows.push((row_no, fields));
    }
    Ok(StrictCsv { rows })
}

fn field<T: std::str::FromStr>(row: usize, name: &str, raw: &str) -> Result<T, ResultsError> {
    raw.trim().parse::<T>().map_err(|_| ResultsError::MalformedCsv {
        row,
        detail: format!("bad {name}: {raw:?}"),
    })
}

fn op_field(row: usize, family_raw: &str, op_raw: &str) -> Result<Operation, ResultsError> {
    let op = Operation::from_label(op_raw).ok_or_else(|| ResultsError::MalformedCsv {
        row,
        detail: format!("unknown operation {op_raw:?}"),
    })?;
    if op.family().to_string() != family_raw {
        return Err(ResultsError::MalformedCsv {
            row,
            detail: format!("family {family_raw:?} inconsistent with operation {op_raw:?}"),
        });
    }
    Ok(op)
}

pub fn read_cpu_csv(text: &str) -> Result<Vec<CpuOpRecord>, ResultsError> {
    let csv = split_csv(text, CPU_HEADER, 7)?;
    let mut records = Vec::with_capacity(csv.rows.len());
    for (row, f) in csv.rows {
        let op = op_field(row, f[1], f[2])?;
        let rec = CpuOpRecord::new(
            f[0].to_string(),
            op,
            field(row, "run", f[3])?,
            field(row, "iterations", f[4])?,
            field(row, "mean_time_us", f[5])?,
            field(row, "mean_cycles", f[6])?,
        )
        .map_err(|e| ResultsError::MalformedCsv {
            row,
            detail: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_memory_csv(text: &str) -> Result<Vec<MemOpRecord>, ResultsError> {
    let csv = split_csv(text, MEMORY_HEADER, 7)?;
    let mut records = Vec::with_capacity(csv.rows.len());
    for (row, f) in csv.rows {
        let op = op_field(row, f[1], f[2])?;
        let rec = MemOpRecord::new(
            f[0].to_string(),
            op,
            field(row, "run", f[3])?,
            field(row, "heap_bytes", f[4])?,
            field(row, "ext_heap_bytes", f[5])?,
            field(row, "stack_bytes", f[6])?,
        )
        .map_err(|e| ResultsError::MalformedCsv {
            row,
            detail: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_handshake_csv(text: &str) -> Result<Vec<HandshakeRecord>, ResultsError> {
    let csv = split_csv(text, HANDSHAKE_HEADER, 7)?;
    let mut records = Vec::with_capacity(csv.rows.len());
    for (row, f) in csv.rows {
        let mode = HandshakeMode::from_label(f[2]).ok_or_else(|| ResultsError::MalformedCsv {
            row,
            detail: format!("unknown mode {:?}", f[2]),
        })?;
        let rec = HandshakeRecord::new(
            f[0].to_string(),
            f[1].to_string(),
            mode,
            field(row, "run", f[3])?,
            field(row, "connections", f[4])?,
            field(row, "real_seconds", f[5])?,
            field(row, "user_connections_per_sec", f[6])?,
        )
        .map_err(|e| ResultsError::MalformedCsv {
            row,
            detail: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

pub fn read_speed_csv(text: &str) -> Result<Vec<SpeedRecord>, ResultsError> {
    let csv = split_csv(text, SPEED_HEADER, 6)?;
    let mut records = Vec::with_capacity(csv.rows.len());
    for (row, f) in csv.rows {
        let op = op_field(row, f[1], f[2])?;
        let rec = SpeedRecord::new(
            f[0].to_string(),
            op,
            field(row, "run", f[3])?,
            field(row, "ops_per_second", f[4])?,
            field(row, "mean_op_seconds", f[5])?,
        )
        .map_err(|e| ResultsError::MalformedCsv {
            row,
            detail: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// Next free index for `run_<k>.csv` files in a directory, so repeated runs
/// append instead of overwriting.
pub fn next_run_number(dir: &Path) -> u32 {
    let mut max = 0u32;
    if let Ok(entries) = std::fs::read_dir(dir) {
        for entry in entries.flatten() {
            let name = entry.file_name();
            let name = name.to_string_lossy();
            if let Some(num) = name
                .strip_prefix("run_")
                .and_then(|rest| rest.strip_suffix(".csv"))
            {
                if let Ok(k) = num.parse::<u32>() {
                    max = max.max(k);
                }
            }
        }
    }
    max + 1
}

pub fn run_file(dir: &Path, k: u32) -> PathBuf {
    dir.join(format!("run_{k}.csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(11.0), "11");
        assert_eq!(fmt_num(16.333333333), "16.333333");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1234567.5), "1234567.5");
        assert_eq!(fmt_num(0.000001), "0.000001");
    }

    #[test]
    fn cpu_round_trip_sorted() {
        let records = vec![
            CpuOpRecord::new("B", Operation::Keygen, 2, 10, 5.0, 100.0).unwrap(),
            CpuOpRecord::new("A", Operation::Decaps, 1, 20, 2.5, 50.0).unwrap(),
            CpuOpRecord::new("A", Operation::Keygen, 1, 30, 1.0, 10.0).unwrap(),
        ];
        let text = cpu_csv_string(&records);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CPU_HEADER);
        assert!(lines[1].starts_with("A,KEM,keygen,1"));
        assert!(lines[2].starts_with("A,KEM,decaps,1"));
        assert!(lines[3].starts_with("B,KEM,keygen,2"));
        let back = read_cpu_csv(&text).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back[0].algorithm_id, "A");
        assert_eq!(back[0].operation, Operation::Keygen);
    }

    #[test]
    fn readers_reject_garbage() {
        let good = "algorithm,family,operation,run,iterations,mean_time_us,mean_cycles\n\
                    A,KEM,keygen,1,10,5,100\n";
        assert!(read_cpu_csv(good).is_ok());

        let trailing = format!("{good}unexpected trailing line\n");
        assert!(read_cpu_csv(&trailing).is_err());

        let whitespace_tail = format!("{good}\n   \n");
        assert!(read_cpu_csv(&whitespace_tail).is_ok());

        let bad_header = good.replace("algorithm", "alg");
        assert!(read_cpu_csv(&bad_header).is_err());

        let wrong_family = good.replace("A,KEM,keygen", "A,SIGNATURE,keygen");
        assert!(read_cpu_csv(&wrong_family).is_err());
    }

    #[test]
    fn run_numbering_appends() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(next_run_number(dir.path()), 1);
        std::fs::write(run_file(dir.path(), 1), "x").unwrap();
        std::fs::write(run_file(dir.path(), 3), "x").unwrap();
        assert_eq!(next_run_number(dir.path()), 4);
    }
}
