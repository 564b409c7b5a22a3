//! Virtual time. Integral units, no wall-clock dependence anywhere.

/// Virtual-time instant or duration, in abstract units.
pub type VirtualTime = u64;

/// Monotone non-decreasing simulation clock.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now: VirtualTime,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> VirtualTime {
        self.now
    }

    /// Moves the clock forward; moving backwards is silently ignored.
    pub fn advance_to(&mut self, t: VirtualTime) {
        if t > self.now {
            self.now = t;
        }
    }
}
