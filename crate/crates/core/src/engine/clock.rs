use std::cell::Cell;
use std::time::{Duration, Instant};

/// Monotonic clock used by the paced executor.
pub trait Clock {
    /// Time elapsed since the clock's origin.
    fn now(&self) -> Duration;

    /// Blocks until `now() >= target`.
    fn sleep_until(&self, target: Duration);
}

/// Wall clock backed by [`Instant`].
#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { origin: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep_until(&self, target: Duration) {
        // Coarse sleep, then spin for the last stretch.
        const SPIN: Duration = Duration::from_micros(200);
        loop {
            let now = self.now();
            if now >= target {
                return;
            }
            let left = target - now;
            if left > SPIN {
                std::thread::sleep(left - SPIN);
            } else {
                std::hint::spin_loop();
            }
        }
    }
}

/// Virtual clock for tests: sleeping jumps straight to the target plus a
/// fixed lateness.
#[derive(Debug, Default)]
pub struct MockClock {
    now: Cell<Duration>,
    lateness: Duration,
}

impl MockClock {
    pub fn with_lateness(lateness: Duration) -> Self {
        MockClock {
            now: Cell::new(Duration::ZERO),
            lateness,
        }
    }

    pub fn advance(&self, d: Duration) {
        self.now.set(self.now.get() + d);
    }
}

impl Clock for MockClock {
    fn now(&self) -> Duration {
        self.now.get()
    }

    fn sleep_until(&self, target: Duration) {
        if self.now.get() < target {
            self.now.set(target + self.lateness);
        }
    }
}
