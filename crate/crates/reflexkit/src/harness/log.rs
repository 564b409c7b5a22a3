//! The totally ordered virtual-time event log.
//!
//! One record per line when serialized, tab-separated:
//! `time<TAB>seq<TAB>kind<TAB>subject<TAB>detail`, preceded by the header
//! `#reflexkit-log v1 seed=<n>`. Details never contain tabs or newlines, so
//! the format round-trips line by line.

use std::fmt;

use crate::kernel::graph::{ArchitectureGraph, LifecycleTarget, PropertyValue};
use crate::kernel::path::{Endpoint, NodePath};

use super::clock::VirtualTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Dispatch,
    Reply,
    Checkpoint,
    GraphEdit,
    Lifecycle,
    Fault,
    Suspicion,
    Warning,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EventKind::Dispatch => "dispatch",
            EventKind::Reply => "reply",
            EventKind::Checkpoint => "checkpoint",
            EventKind::GraphEdit => "graph-edit",
            EventKind::Lifecycle => "lifecycle",
            EventKind::Fault => "fault",
            EventKind::Suspicion => "suspicion",
            EventKind::Warning => "warning",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub time: VirtualTime,
    pub seq: u64,
    pub kind: EventKind,
    pub subject: String,
    pub detail: String,
}

impl EventRecord {
    /// Extracts a `key=value` field from the detail text. The keys `args`,
    /// `value` and `state` extend to the end of the detail; other values end
    /// at the next space.
    pub fn field<'a>(&'a self, key: &str) -> Option<&'a str> {
        detail_field(&self.detail, key)
    }
}

pub fn detail_field<'a>(detail: &'a str, key: &str) -> Option<&'a str> {
    let needle = format!("{key}=");
    let start = if let Some(rest) = detail.strip_prefix(&needle) {
        Some((0, rest))
    } else {
        detail.find(&format!(" {needle}")).map(|i| {
            let s = i + 1 + needle.len();
            (s, &detail[s..])
        })
    };
    let (_, rest) = start?;
    if matches!(key, "args" | "value" | "state") {
        Some(rest)
    } else {
        Some(rest.split(' ').next().unwrap_or(rest))
    }
}

/// Append-only record of everything the harness and kernel do.
#[derive(Debug, Clone)]
pub struct EventLog {
    seed: u64,
    records: Vec<EventRecord>,
}

impl EventLog {
    pub fn new(seed: u64) -> Self {
        EventLog {
            seed,
            records: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub(crate) fn append(
        &mut self,
        time: VirtualTime,
        kind: EventKind,
        subject: impl Into<String>,
        detail: impl Into<String>,
    ) -> &EventRecord {
        let subject = subject.into();
        let detail = detail.into();
        debug_assert!(!detail.contains('\t') && !detail.contains('\n'));
        debug_assert!(!subject.contains('\t') && !subject.contains('\n'));
        if let Some(last) = self.records.last() {
            assert!(time >= last.time, "event log time went backwards");
        }
        let seq = self.records.len() as u64;
        self.records.push(EventRecord {
            time,
            seq,
            kind,
            subject,
            detail,
        });
        self.records.last().unwrap()
    }

    /// First record of the given kind, if any.
    pub fn first(&self, kind: EventKind) -> Option<&EventRecord> {
        self.records.iter().find(|r| r.kind == kind)
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &EventRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    /// Serializes header plus one line per record.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("#reflexkit-log v1 seed={}\n", self.seed);
        for r in &self.records {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.time, r.seq, r.kind, r.subject, r.detail
            ));
        }
        out
    }
}

/// Replays the structural records (graph edits, lifecycle changes, crash
/// faults) onto a copy of `initial`. Dispatch traffic is ignored, so queue
/// contents are not reproduced; compare replayed graphs structurally.
pub fn replay_structural(
    initial: &ArchitectureGraph,
    records: &[EventRecord],
) -> Result<ArchitectureGraph, String> {
    let mut graph = initial.clone();
    for r in records {
        match r.kind {
            EventKind::GraphEdit => {
                let detail = &r.detail;
                if let Some(rest) = detail.strip_prefix("add-wire ") {
                    let (reference, service) = parse_wire_detail(rest)?;
                    graph
                        .add_wire(&reference, &service)
                        .map_err(|e| e.to_string())?;
                } else if let Some(rest) = detail.strip_prefix("remove-wire ") {
                    let (reference, service) = parse_wire_detail(rest)?;
                    graph
                        .remove_wire(&reference, &service)
                        .map_err(|e| e.to_string())?;
                } else if let Some(rest) = detail.strip_prefix("set-property ") {
                    let (target, value) = parse_property_detail(rest)?;
                    graph
                        .set_property(&target.node, &target.port, value)
                        .map_err(|e| e.to_string())?;
                } else {
                    return Err(format!("unknown graph-edit detail: {detail}"));
                }
            }
            EventKind::Lifecycle => {
                if r.detail.ends_with(" noop") {
                    continue;
                }
                let target = r
                    .detail
                    .strip_prefix("set-state ")
                    .and_then(LifecycleTarget::parse_strict)
                    .ok_or_else(|| format!("unknown lifecycle detail: {}", r.detail))?;
                let path = NodePath::parse(&r.subject)
                    .ok_or_else(|| format!("bad subject path {}", r.subject))?;
                graph
                    .set_lifecycle(&path, target)
                    .map_err(|e| e.to_string())?;
            }
            EventKind::Fault if r.detail == "crash" => {
                let path = NodePath::parse(&r.subject)
                    .ok_or_else(|| format!("bad subject path {}", r.subject))?;
                graph.crash(&path).map_err(|e| e.to_string())?;
            }
            _ => {}
        }
    }
    Ok(graph)
}

fn parse_wire_detail(rest: &str) -> Result<(Endpoint, Endpoint), String> {
    let (a, b) = rest
        .split_once(" -> ")
        .ok_or_else(|| format!("bad wire detail: {rest}"))?;
    let reference = Endpoint::parse(a).ok_or_else(|| format!("bad endpoint {a}"))?;
    let service = Endpoint::parse(b).ok_or_else(|| format!("bad endpoint {b}"))?;
    Ok((reference, service))
}

fn parse_property_detail(rest: &str) -> Result<(Endpoint, PropertyValue), String> {
    // `<path>.<name> <type>=<literal>`
    let (target, assignment) = rest
        .split_once(' ')
        .ok_or_else(|| format!("bad property detail: {rest}"))?;
    let endpoint =
        Endpoint::parse(target).ok_or_else(|| format!("bad property target {target}"))?;
    let (ty, literal) = assignment
        .split_once('=')
        .ok_or_else(|| format!("bad property assignment: {assignment}"))?;
    let value = match ty {
        "int" => PropertyValue::Int(literal.parse().map_err(|_| format!("bad int {literal}"))?),
        "bool" => PropertyValue::Bool(literal == "true"),
        "text" => PropertyValue::Text(literal.trim_matches('"').to_string()),
        _ => return Err(format!("unknown property type {ty}")),
    };
    Ok((endpoint, value))
}
