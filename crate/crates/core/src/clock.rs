//! Time sources. All lifecycle logic reads time through [`Clock`] so that
//! timeouts can be driven from a virtual clock in tests and simulations.

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch; never decreases.
    fn now_ms(&self) -> i64;
}

/// Wall-clock time anchored once at construction and advanced by a
/// monotonic timer, so system clock adjustments cannot move it backwards.
#[derive(Debug, Clone)]
pub struct ServerClock {
    anchor_ms: i64,
    started: Instant,
}

impl ServerClock {
    pub fn new() -> Self {
        let anchor_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0);
        Self {
            anchor_ms,
            started: Instant::now(),
        }
    }
}

impl Default for ServerClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for ServerClock {
    fn now_ms(&self) -> i64 {
        self.anchor_ms + self.started.elapsed().as_millis() as i64
    }
}

/// Manually advanced clock. Clones share the same time.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now: Arc<AtomicI64>,
}

impl VirtualClock {
    pub fn new(start_ms: i64) -> Self {
        Self {
            now: Arc::new(AtomicI64::new(start_ms)),
        }
    }

    pub fn set(&self, ms: i64) {
        self.now.fetch_max(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, delta_ms: i64) {
        self.now.fetch_add(delta_ms.max(0), Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now_ms(&self) -> i64 {
        self.now.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_clock_never_goes_back() {
        let c = VirtualClock::new(1_000);
        let shared = c.clone();
        c.advance(500);
        assert_eq!(shared.now_ms(), 1_500);
        c.set(1_200);
        assert_eq!(c.now_ms(), 1_500);
        c.set(9_000);
        assert_eq!(shared.now_ms(), 9_000);
    }

    #[test]
    fn server_clock_is_monotonic() {
        let c = ServerClock::new();
        let a = c.now_ms();
        let b = c.now_ms();
        assert!(b >= a && a > 1_600_000_000_000);
    }
}
