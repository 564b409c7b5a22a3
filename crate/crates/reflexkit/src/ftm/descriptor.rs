//! Mechanism applicability: fault model, application assumptions and
//! resource needs, checked against an observed context.

use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FaultKind {
    Crash,
    TransientValue,
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultKind::Crash => write!(f, "crash"),
            FaultKind::TransientValue => write!(f, "transient-value"),
        }
    }
}

/// What a mechanism tolerates, what it assumes of the application, and what
/// it costs in replicas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FtmDescriptor {
    pub name: String,
    pub fault_model: BTreeSet<FaultKind>,
    pub requires_determinism: bool,
    pub requires_state_access: bool,
    pub replica_cost: u32,
}

impl FtmDescriptor {
    /// Fault model must be non-empty.
    pub fn new(
        name: impl Into<String>,
        fault_model: impl IntoIterator<Item = FaultKind>,
        requires_determinism: bool,
        requires_state_access: bool,
        replica_cost: u32,
    ) -> Result<Self, &'static str> {
        let fault_model: BTreeSet<FaultKind> = fault_model.into_iter().collect();
        if fault_model.is_empty() {
            return Err("fault model must be non-empty");
        }
        Ok(FtmDescriptor {
            name: name.into(),
            fault_model,
            requires_determinism,
            requires_state_access,
            replica_cost,
        })
    }
}

/// Primary-backup replication: tolerates crashes, needs a deterministic
/// application with accessible state, costs two replicas.
pub fn pbr_descriptor() -> FtmDescriptor {
    FtmDescriptor::new("pbr", [FaultKind::Crash], true, true, 2).expect("non-empty fault model")
}

/// The observed situation an FTM is checked against.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplicabilityContext {
    pub observed_faults: BTreeSet<FaultKind>,
    pub deterministic: bool,
    pub state_accessible: bool,
    pub replica_budget: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Assumptions hold and every observed fault is covered.
    Adequate,
    /// Assumptions hold but some observed faults are uncovered.
    Inadequate { uncovered: BTreeSet<FaultKind> },
    /// An application assumption or resource bound is violated.
    Inapplicable { violated: Vec<String> },
}

/// Pure applicability check. Assumption violations dominate coverage gaps:
/// a mechanism that cannot run at all is inapplicable, not inadequate.
pub fn check_applicability(descriptor: &FtmDescriptor, context: &ApplicabilityContext) -> Verdict {
    let mut violated = Vec::new();
    if descriptor.requires_determinism && !context.deterministic {
        violated.push("determinism".to_string());
    }
    if descriptor.requires_state_access && !context.state_accessible {
        violated.push("state accessibility".to_string());
    }
    if descriptor.replica_cost > context.replica_budget {
        violated.push(format!(
            "replica budget ({} needed, {} available)",
            descriptor.replica_cost, context.replica_budget
        ));
    }
    if !violated.is_empty() {
        return Verdict::Inapplicable { violated };
    }
    let uncovered: BTreeSet<FaultKind> = context
        .observed_faults
        .difference(&descriptor.fault_model)
        .copied()
        .collect();
    if uncovered.is_empty() {
        Verdict::Adequate
    } else {
        Verdict::Inadequate { uncovered }
    }
}
