//! Record of one collision resolution interval.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{FeedbackMsg, ProtocolKind, Side};
use crate::signal::{PacketId, Signal, SlotOutcome};

/// One slot actually consumed on the channel. Slots are numbered from 1
/// within the CRI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub transmitters: Signal,
    pub outcome: SlotOutcome,
    pub feedback: FeedbackMsg,
    pub newly_resolved: Vec<PacketId>,
    /// Stored collisions after the slot was processed.
    pub memory_len: usize,
    /// Tree node carried by this slot.
    pub node: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// Known to be a collision, so it was split without transmitting.
    KnownCollision,
    /// All of its packets were already recovered by cancellation.
    Cancelled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "fate", rename_all = "snake_case")]
pub enum NodeFate {
    Pending,
    Transmitted { slot: u64 },
    Skipped { reason: SkipReason },
}

/// Node of the splitting tree a plain binary tree algorithm would walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub side: Option<Side>,
    pub depth: u32,
    pub members: Signal,
    pub fate: NodeFate,
}

impl TreeNode {
    pub fn is_skipped(&self) -> bool {
        matches!(self.fate, NodeFate::Skipped { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decode {
    pub id: PacketId,
    pub slot: u64,
    /// Recovered from stored collisions rather than received alone.
    pub by_cancellation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriTrace {
    pub protocol: ProtocolKind,
    pub p: f64,
    pub initial: Vec<PacketId>,
    pub slots: Vec<SlotRecord>,
    pub nodes: Vec<TreeNode>,
    pub decoded_order: Vec<Decode>,
    pub memory_highwater: usize,
}

impl CriTrace {
    /// Slots consumed on the channel.
    pub fn length(&self) -> u64 {
        self.slots.len() as u64
    }

    pub fn collisions(&self) -> u64 {
        self.slots.iter().filter(|s| s.outcome.is_collision()).count() as u64
    }

    /// Tree nodes that did not cost a slot.
    pub fn skipped_slots(&self) -> u64 {
        self.nodes.iter().filter(|n| n.is_skipped()).count() as u64
    }

    /// Skip counts announced on success slots, in slot order.
    pub fn success_skips(&self) -> impl Iterator<Item = u32> + '_ {
        self.slots.iter().filter_map(|s| s.feedback.skip_k())
    }

    pub fn collision_degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.slots.iter().filter_map(|s| match s.outcome {
            SlotOutcome::Collision { degree } => Some(degree),
            _ => None,
        })
    }

    /// Writes one JSON object per slot.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> io::Result<()> {
        for s in &self.slots {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_json_lines(&self) -> String {
        let mut buf = Vec::new();
        self.write_json_lines(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}
