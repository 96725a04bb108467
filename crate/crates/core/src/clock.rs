use std::sync::atomic::{AtomicI64, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use crate::model::Timestamp;

/// Source of "now" for the state machine and the simulated network.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

/// A clock the run loop can wait on.
pub trait Timeline: Clock {
    /// Returns once `now() >= t`.
    fn wait_until(&self, t: Timestamp);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Timeline for SystemClock {
    fn wait_until(&self, t: Timestamp) {
        loop {
            let now = self.now();
            if now >= t {
                return;
            }
            std::thread::sleep(Duration::from_secs((t - now).min(60) as u64));
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Timestamp {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs() as i64)
            .unwrap_or(0)
    }
}

/// Logical clock advanced explicitly by a simulation driver.
#[derive(Debug, Default)]
pub struct SimClock {
    now: AtomicI64,
}

impl SimClock {
    pub fn new(start: Timestamp) -> Self {
        SimClock {
            now: AtomicI64::new(start),
        }
    }

    pub fn set(&self, t: Timestamp) {
        self.now.store(t, Ordering::SeqCst);
    }

    pub fn advance(&self, secs: i64) -> Timestamp {
        self.now.fetch_add(secs, Ordering::SeqCst) + secs
    }
}

impl Timeline for SimClock {
    fn wait_until(&self, t: Timestamp) {
        self.now.fetch_max(t, Ordering::SeqCst);
    }
}

impl Clock for SimClock {
    fn now(&self) -> Timestamp {
        self.now.load(Ordering::SeqCst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_clock_only_moves_when_told() {
        let clock = SimClock::new(100);
        assert_eq!(clock.now(), 100);
        assert_eq!(clock.advance(60), 160);
        clock.set(5);
        assert_eq!(clock.now(), 5);
    }
}
