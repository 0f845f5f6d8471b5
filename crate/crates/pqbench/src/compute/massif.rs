//! Parser and fixture renderer for Massif profiler output, plus peak
//! extraction.
//!
//! Accepted input: any number of `key: value` header lines, then snapshot
//! blocks of the form
//!
//! ```text
//! #-----------
//! snapshot=N
//! #-----------
//! time=T
//! mem_heap_B=H
//! mem_heap_extra_B=E
//! mem_stacks_B=S
//! heap_tree=empty|detailed|peak
//! ```
//!
//! Heap-tree detail lines (starting with `n` followed by a digit) after a
//! detailed snapshot are skipped. Parse errors name the byte offset and the
//! field involved.

use super::ComputeError;

/// One Massif snapshot. `is_detailed` is true when the snapshot carried a
/// heap tree (`heap_tree` other than `empty`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MassifSnapshot {
    pub index: u64,
    pub time_unit_value: u64,
    pub mem_heap_bytes: u64,
    pub mem_heap_extra_bytes: u64,
    pub mem_stacks_bytes: u64,
    pub is_detailed: bool,
}

impl MassifSnapshot {
    pub fn total_bytes(&self) -> u64 {
        self.mem_heap_bytes + self.mem_heap_extra_bytes + self.mem_stacks_bytes
    }
}

const DELIMITER: &str = "#-----------";

fn malformed(offset: usize, field: &str, detail: impl std::fmt::Display) -> ComputeError {
    ComputeError::MalformedMassif {
        offset,
        field: field.to_string(),
        detail: detail.to_string(),
    }
}

fn parse_field(line: &str, offset: usize, field: &str) -> Result<u64, ComputeError> {
    let prefix = format!("{field}=");
    let value = line
        .strip_prefix(&prefix)
        .ok_or_else(|| malformed(offset, field, format!("expected `{prefix}...`, got {line:?}")))?;
    value
        .trim()
        .parse::<u64>()
        .map_err(|_| malformed(offset, field, format!("non-numeric value {value:?}")))
}

/// Lines paired with the byte offset of their first character.
fn lines_with_offsets(text: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split('\n') {
        out.push((offset, line.trim_end_matches('\r')));
        offset += line.len() + 1;
    }
    // split('\n') yields one trailing empty line for newline-terminated text.
    if let Some((_, last)) = out.last() {
        if last.is_empty() {
            out.pop();
        }
    }
    out
}

/// Parse a Massif profile into its snapshot list, in file order.
pub fn parse_massif(text: &str) -> Result<Vec<MassifSnapshot>, ComputeError> {
    let lines = lines_with_offsets(text);
    let mut snapshots: Vec<MassifSnapshot> = Vec::new();
    let mut i = 0;

    // Header: anything up to the first delimiter.
    while i < lines.len() && lines[i].1.trim() != DELIMITER {
        i += 1;
    }

    while i < lines.len() {
        // Opening delimiter already at lines[i].
        i += 1;
        let (off, line) = match lines.get(i) {
            Some(v) => *v,
            None => {
                let end = text.len();
                return Err(malformed(end, "snapshot", "file ends after delimiter"));
            }
        };
        let index = parse_field(line, off, "snapshot")?;
        if let Some(prev) = snapshots.last() {
            if index <= prev.index {
                return Err(malformed(
                    off,
                    "snapshot",
                    format!("index {index} not greater than previous {}", prev.index),
                ));
            }
        }
        i += 1;
        match lines.get(i) {
            Some((_, l)) if l.trim() == DELIMITER => i += 1,
            Some((off, l)) => {
                return Err(malformed(*off, "delimiter", format!("expected `{DELIMITER}`, got {l:?}")))
            }
            None => return Err(malformed(text.len(), "delimiter", "file truncated")),
        }

        let next_numeric = |field: &str, i: &mut usize| -> Result<u64, ComputeError> {
            let (off, line) = lines
                .get(*i)
                .copied()
                .ok_or_else(|| malformed(text.len(), field, "file truncated"))?;
            let v = parse_field(line, off, field)?;
            *i += 1;
            Ok(v)
        };

        let time_unit_value = next_numeric("time", &mut i)?;
        let mem_heap_bytes = next_numeric("mem_heap_B", &mut i)?;
        let mem_heap_extra_bytes = next_numeric("mem_heap_extra_B", &mut i)?;
        let mem_stacks_bytes = next_numeric("mem_stacks_B", &mut i)?;

        let (off, line) = lines
            .get(i)
            .copied()
            .ok_or_else(|| malformed(text.len(), "heap_tree", "file truncated"))?;
        let tree = line.strip_prefix("heap_tree=").ok_or_else(|| {
            malformed(off, "heap_tree", format!("expected `heap_tree=...`, got {line:?}"))
        })?;
        let is_detailed = tree.trim() != "empty";
        i += 1;

        if is_detailed {
            // Skip tree detail lines: optional indentation, then `n<digit>`.
            while i < lines.len() {
                let trimmed = lines[i].1.trim_start();
                let mut chars = trimmed.chars();
                let looks_like_node = chars.next() == Some('n')
                    && chars.next().map(|c| c.is_ascii_digit()).unwrap_or(false);
                if looks_like_node {
                    i += 1;
                } else {
                    break;
                }
            }
        }

        snapshots.push(MassifSnapshot {
            index,
            time_unit_value,
            mem_heap_bytes,
            mem_heap_extra_bytes,
            mem_stacks_bytes,
            is_detailed,
        });

        // Next line must be a delimiter opening another block, or EOF.
        match lines.get(i) {
            None => break,
            Some((_, l)) if l.trim() == DELIMITER => {}
            Some((off, l)) => {
                return Err(malformed(*off, "delimiter", format!("unexpected content {l:?}")))
            }
        }
    }

    Ok(snapshots)
}

/// Render snapshots back into Massif's text format. Inverse of
/// [`parse_massif`] for well-formed snapshot lists; used to build fixtures.
pub fn render_massif(snapshots: &[MassifSnapshot]) -> String {
    let mut out = String::new();
    out.push_str("desc: (pqbench fixture)\n");
    out.push_str("cmd: pqbench\n");
    out.push_str("time_unit: i\n");
    for s in snapshots {
        out.push_str(DELIMITER);
        out.push('\n');
        out.push_str(&format!("snapshot={}\n", s.index));
        out.push_str(DELIMITER);
        out.push('\n');
        out.push_str(&format!("time={}\n", s.time_unit_value));
        out.push_str(&format!("mem_heap_B={}\n", s.mem_heap_bytes));
        out.push_str(&format!("mem_heap_extra_B={}\n", s.mem_heap_extra_bytes));
        out.push_str(&format!("mem_stacks_B={}\n", s.mem_stacks_bytes));
        if s.is_detailed {
            out.push_str("heap_tree=detailed\n");
            out.push_str(&format!(
                "n1: {} (heap allocation functions) malloc/new/new[], --alloc-fns, etc.\n",
                s.mem_heap_bytes
            ));
            out.push_str(&format!(" n0: {} in 1 place, below threshold\n", s.mem_heap_bytes));
        } else {
            out.push_str("heap_tree=empty\n");
        }
    }
    out
}

/// The snapshot with the largest heap+extra+stack total; ties go to the
/// earliest snapshot.
pub fn peak_memory(snapshots: &[MassifSnapshot]) -> Result<&MassifSnapshot, ComputeError> {
    snapshots
        .iter()
        .reduce(|best, s| if s.total_bytes() > best.total_bytes() { s } else { best })
        .ok_or(ComputeError::EmptyProfile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn snap(index: u64, heap: u64, extra: u64, stacks: u64) -> MassifSnapshot {
        MassifSnapshot {
            index,
            time_unit_value: index * 10,
            mem_heap_bytes: heap,
            mem_heap_extra_bytes: extra,
            mem_stacks_bytes: stacks,
            is_detailed: false,
        }
    }

    #[test]
    fn parses_minimal_block() {
        let text = "desc: x\ncmd: y\ntime_unit: i\n#-----------\nsnapshot=0\n#-----------\n\
                    time=0\nmem_heap_B=4416\nmem_heap_extra_B=40\nmem_stacks_B=9752\nheap_tree=empty\n";
        let snaps = parse_massif(text).unwrap();
        assert_eq!(snaps.len(), 1);
        assert_eq!(snaps[0].mem_heap_bytes, 4416);
        assert_eq!(snaps[0].mem_heap_extra_bytes, 40);
        assert_eq!(snaps[0].mem_stacks_bytes, 9752);
        assert!(!snaps[0].is_detailed);
    }

    #[test]
    fn header_only_is_empty() {
        let snaps = parse_massif("desc: a\ncmd: b\ntime_unit: i\n").unwrap();
        assert!(snaps.is_empty());
        assert!(parse_massif("").unwrap().is_empty());
    }

    #[test]
    fn missing_field_names_field_and_offset() {
        let text = "#-----------\nsnapshot=0\n#-----------\n\
                    time=0\nmem_heap_B=1\nmem_heap_extra_B=2\nheap_tree=empty\n";
        let err = parse_massif(text).unwrap_err();
        match &err {
            ComputeError::MalformedMassif { field, offset, .. } => {
                assert_eq!(field, "mem_stacks_B");
                // Offset of the heap_tree line that appeared instead.
                assert_eq!(*offset, text.find("heap_tree").unwrap());
            }
            other => panic!("unexpected error {other:?}"),
        }
        assert_eq!(err.code(), "MALFORMED_MASSIF");
    }

    #[test]
    fn non_numeric_and_non_monotonic_rejected() {
        let bad_value = "#-----------\nsnapshot=0\n#-----------\n\
                    time=zero\nmem_heap_B=1\nmem_heap_extra_B=2\nmem_stacks_B=3\nheap_tree=empty\n";
        assert!(matches!(
            parse_massif(bad_value),
            Err(ComputeError::MalformedMassif { ref field, .. }) if field == "time"
        ));

        let block = |idx: u64| {
            format!(
                "#-----------\nsnapshot={idx}\n#-----------\n\
                 time=0\nmem_heap_B=1\nmem_heap_extra_B=2\nmem_stacks_B=3\nheap_tree=empty\n"
            )
        };
        let text = format!("{}{}", block(1), block(1));
        assert!(matches!(
            parse_massif(&text),
            Err(ComputeError::MalformedMassif { ref field, .. }) if field == "snapshot"
        ));
    }

    #[test]
    fn detailed_trees_are_skipped() {
        let mut snaps = vec![snap(0, 100, 10, 20), snap(3, 200, 20, 40)];
        snaps[1].is_detailed = true;
        let text = render_massif(&snaps);
        let parsed = parse_massif(&text).unwrap();
        assert_eq!(parsed, snaps);
    }

    #[test]
    fn peak_is_argmax_with_earliest_tie() {
        let snaps = vec![snap(0, 100, 0, 0), snap(1, 300, 0, 0), snap(2, 200, 0, 0)];
        assert_eq!(peak_memory(&snaps).unwrap().index, 1);

        let single = vec![snap(0, 5, 5, 5)];
        assert_eq!(peak_memory(&single).unwrap().index, 0);

        let tie = vec![snap(0, 150, 100, 50), snap(1, 100, 100, 100)];
        assert_eq!(peak_memory(&tie).unwrap().index, 0);

        assert!(matches!(peak_memory(&[]), Err(ComputeError::EmptyProfile)));
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(
            raw in proptest::collection::vec((0u64..1000, 0u64..1_000_000, 0u64..10_000, 0u64..1_000_000, any::<bool>()), 0..12)
        ) {
            // Force strictly increasing indices.
            let mut snaps = Vec::new();
            let mut next_index = 0u64;
            for (gap, heap, extra, stacks, detailed) in raw {
                next_index += gap + 1;
                snaps.push(MassifSnapshot {
                    index: next_index,
                    time_unit_value: heap.wrapping_mul(3),
                    mem_heap_bytes: heap,
                    mem_heap_extra_bytes: extra,
                    mem_stacks_bytes: stacks,
                    is_detailed: detailed,
                });
            }
            let parsed = parse_massif(&render_massif(&snaps)).unwrap();
            prop_assert_eq!(parsed, snaps);
        }

        #[test]
        fn peak_matches_brute_force(
            heaps in proptest::collection::vec((0u64..10_000, 0u64..100, 0u64..10_000), 1..20)
        ) {
            let snaps: Vec<MassifSnapshot> = heaps
                .iter()
                .enumerate()
                .map(|(i, (h, e, s))| snap(i as u64, *h, *e, *s))
                .collect();
            let peak = peak_memory(&snaps).unwrap();
            // Independent brute force: max total, first occurrence.
            let best_total = snaps.iter().map(|s| s.total_bytes()).max().unwrap();
            let first_best = snaps.iter().find(|s| s.total_bytes() == best_total).unwrap();
            prop_assert_eq!(peak, first_best);
        }
    }
}
