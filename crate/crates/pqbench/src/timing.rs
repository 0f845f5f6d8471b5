//! Time sources and cycle counters for the fixed-window benchmark loops.
//!
//! Two clocks exist: [`RealClock`] wraps the OS monotonic clock, and
//! [`VirtualClock`] is an atomic counter advanced explicitly by the mock
//! provider, which makes iteration counts (and therefore whole benchmark
//! runs) reproducible byte-for-byte.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

/// Monotonic nanosecond clock.
pub trait TimeSource: Send + Sync {
    fn now_ns(&self) -> u64;
}

/// OS monotonic clock, anchored at construction.
pub struct RealClock {
    start: Instant,
}

impl RealClock {
    pub fn new() -> Self {
        RealClock {
            start: Instant::now(),
        }
    }
}

impl Default for RealClock {
    fn default() -> Self {
        Self::new()
    }
}

impl TimeSource for RealClock {
    fn now_ns(&self) -> u64 {
        self.start.elapsed().as_nanos() as u64
    }
}

/// Deterministic clock driven by the code under measurement. Clones share
/// the same underlying counter.
#[derive(Clone, Debug, Default)]
pub struct VirtualClock(Arc<AtomicU64>);

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advance by at least one nanosecond so a loop polling this clock always
    /// makes progress.
    pub fn advance_ns(&self, ns: u64) {
        self.0.fetch_add(ns.max(1), Ordering::SeqCst);
    }
}

impl TimeSource for VirtualClock {
    fn now_ns(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// Monotonic cycle counter; reads are per-thread and never decrease.
pub trait CycleCounter {
    fn read(&mut self) -> u64;
}

/// Hardware timestamp counter. Values are clamped so consecutive reads on one
/// thread are non-decreasing even if the raw counter misbehaves.
#[cfg(target_arch = "x86_64")]
pub struct TscCounter {
    last: u64,
}

#[cfg(target_arch = "x86_64")]
impl TscCounter {
    pub fn new() -> Self {
        TscCounter { last: 0 }
    }
}

#[cfg(target_arch = "x86_64")]
impl Default for TscCounter {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(target_arch = "x86_64")]
impl CycleCounter for TscCounter {
    fn read(&mut self) -> u64 {
        let v = unsafe { core::arch::x86_64::_rdtsc() };
        if v < self.last {
            self.last
        } else {
            self.last = v;
            v
        }
    }
}

/// Fallback counter: nanoseconds from a [`TimeSource`] scaled by a nominal
/// clock frequency (default 1.0 GHz, i.e. one cycle per nanosecond).
pub struct ClockCycleCounter {
    source: Box<dyn TimeSource>,
    nominal_ghz: f64,
}

impl ClockCycleCounter {
    pub fn new(source: Box<dyn TimeSource>, nominal_ghz: f64) -> Self {
        ClockCycleCounter {
            source,
            nominal_ghz,
        }
    }

    pub fn real(nominal_ghz: f64) -> Self {
        Self::new(Box::new(RealClock::new()), nominal_ghz)
    }
}

impl CycleCounter for ClockCycleCounter {
    fn read(&mut self) -> u64 {
        (self.source.now_ns() as f64 * self.nominal_ghz) as u64
    }
}

/// Best counter available on this platform.
pub fn default_cycle_counter() -> Box<dyn CycleCounter> {
    #[cfg(target_arch = "x86_64")]
    {
        Box::new(TscCounter::new())
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        Box::new(ClockCycleCounter::real(1.0))
    }
}

/// Integer multiply-xor-rotate chain over a 64-bit accumulator. The result
/// must be consumed by the caller (the mock provider folds it into its output
/// bytes) so the loop cannot be optimized away.
#[inline(never)]
pub fn busy_work(units: u64) -> u64 {
    let mut acc: u64 = 0x9E37_79B9_7F4A_7C15;
    for i in 0..units {
        acc = acc.wrapping_mul(0xD134_2543_DE82_EF95);
        acc ^= acc >> 29;
        acc = acc.rotate_left(13).wrapping_add(i);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    #[test]
    fn real_clock_advances() {
        let c = RealClock::new();
        let a = c.now_ns();
        std::thread::sleep(Duration::from_millis(2));
        assert!(c.now_ns() > a);
    }

    #[test]
    fn virtual_clock_is_explicit_and_shared() {
        let c = VirtualClock::new();
        let c2 = c.clone();
        assert_eq!(c.now_ns(), 0);
        c.advance_ns(5);
        assert_eq!(c2.now_ns(), 5);
        // Zero advances still move by one.
        c2.advance_ns(0);
        assert_eq!(c.now_ns(), 6);
    }

    #[test]
    fn cycle_counters_are_monotonic_over_many_reads() {
        let mut counters: Vec<Box<dyn CycleCounter>> = vec![
            Box::new(ClockCycleCounter::real(1.0)),
            default_cycle_counter(),
        ];
        for counter in counters.iter_mut() {
            let mut last = counter.read();
            for _ in 0..10_000 {
                let v = counter.read();
                assert!(v >= last);
                last = v;
            }
        }
    }

    #[test]
    fn busy_work_is_deterministic() {
        assert_eq!(busy_work(1000), busy_work(1000));
        assert_ne!(busy_work(1000), busy_work(1001));
    }

    // Wall time must scale with the unit count: 2k units take at least 1.5x
    // the time of k units for k large enough to swamp scheduler noise.
    #[test]
    fn busy_work_scales_with_units() {
        let k = 1_000_000u64;
        let time_of = |units: u64| {
            let mut best = u128::MAX;
            for _ in 0..5 {
                let t = Instant::now();
                std::hint::black_box(busy_work(units));
                best = best.min(t.elapsed().as_nanos());
            }
            best
        };
        let t1 = time_of(k);
        let t2 = time_of(2 * k);
        assert!(
            t2 as f64 >= 1.5 * t1 as f64,
            "expected 2k units to take >= 1.5x: t1={t1}ns t2={t2}ns"
        );
    }
}
