//! Fault injection plans: crash instants and transient value corruptions.

use crate::kernel::path::NodePath;

use super::clock::VirtualTime;

/// Marks every component at or beneath `path` as crashed at instant `at`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrashFault {
    pub path: NodePath,
    pub at: VirtualTime,
}

/// Flips the lowest bit of the `nth` integer reply produced by the component
/// at `path`. Counting is 1-based and covers integer replies only, the
/// domain of the corruption rule; text replies pass through untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransientFault {
    pub path: NodePath,
    pub nth_reply: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultPlan {
    pub crashes: Vec<CrashFault>,
    pub transients: Vec<TransientFault>,
}

impl FaultPlan {
    pub fn is_empty(&self) -> bool {
        self.crashes.is_empty() && self.transients.is_empty()
    }
}
