//! Reference CRI driver: every station runs its own state machine.

use std::collections::{BTreeMap, BTreeSet};

use super::ap::{ApState, NextNode};
use super::trace::{CriTrace, Decode, NodeFate, SkipReason, SlotRecord, TreeNode};
use super::user::{user_react, UserState};
use super::{check_probability, CriError, ProtocolKind, Side, SplitCoins};
use crate::signal::{PacketId, Signal, SlotOutcome};

/// Slot budget of a single CRI before it is declared stuck.
pub const DEFAULT_SLOT_CAP: u64 = 1_000_000;

/// Resolves `initial` under `protocol` with splitting probability `p`.
pub fn run_cri(
    protocol: ProtocolKind,
    initial: &[PacketId],
    p: f64,
    coins: &mut dyn SplitCoins,
) -> Result<CriTrace, CriError> {
    run_cri_with_cap(protocol, initial, p, coins, DEFAULT_SLOT_CAP)
}

fn at_slot(err: CriError, slot: u64) -> CriError {
    match err {
        CriError::Inconsistent { detail, .. } => CriError::Inconsistent { slot, detail },
        other => other,
    }
}

fn inconsistent(slot: u64, detail: String) -> CriError {
    CriError::Inconsistent { slot, detail }
}

struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    /// Splits node `v` by the counters the stations just set: counter 0
    /// joins the left child, everything else the right child.
    fn split(&mut self, v: usize, users: &[UserState], index: &BTreeMap<PacketId, usize>) -> (usize, usize) {
        let mut left = Signal::empty();
        let mut right = Signal::empty();
        for id in self.nodes[v].members.ids() {
            if users[index[&id]].counter == 0 {
                left.add(id);
            } else {
                right.add(id);
            }
        }
        let depth = self.nodes[v].depth + 1;
        let mut child = |members: Signal, side: Side| {
            let id = self.nodes.len();
            self.nodes.push(TreeNode {
                id,
                parent: Some(v),
                side: Some(side),
                depth,
                members,
                fate: NodeFate::Pending,
            });
            id
        };
        let l = child(left, Side::Left);
        let r = child(right, Side::Right);
        (l, r)
    }
}

/// [`run_cri`] with an explicit slot cap.
pub fn run_cri_with_cap(
    protocol: ProtocolKind,
    initial: &[PacketId],
    p: f64,
    coins: &mut dyn SplitCoins,
    cap: u64,
) -> Result<CriTrace, CriError> {
    check_probability(p)?;
    let mut index = BTreeMap::new();
    for (i, &id) in initial.iter().enumerate() {
        if index.insert(id, i).is_some() {
            return Err(CriError::DuplicateId(id));
        }
    }
    let mut users: Vec<UserState> = initial.iter().map(|&id| UserState::new(id)).collect();
    let mut ap = ApState::new(protocol);
    let mut tree = Tree {
        nodes: vec![TreeNode {
            id: 0,
            parent: None,
            side: None,
            depth: 0,
            members: Signal::from_ids(initial.iter().copied()),
            fate: NodeFate::Pending,
        }],
    };
    let mut node_stack: Vec<usize> = Vec::new();
    let mut current = 0usize;
    let mut slots = Vec::new();
    let mut decoded_order = Vec::new();
    let mut slot = 0u64;

    loop {
        if slot >= cap {
            return Err(CriError::NonTermination {
                cap,
                resolved: ap.resolved.len(),
                total: initial.len(),
            });
        }
        slot += 1;
        let transmitters: Signal = users.iter().filter(|u| u.transmits()).map(|u| u.id()).collect();
        if transmitters != tree.nodes[current].members {
            return Err(inconsistent(
                slot,
                format!(
                    "stations {transmitters} transmit but node {current} holds {}",
                    tree.nodes[current].members
                ),
            ));
        }
        tree.nodes[current].fate = NodeFate::Transmitted { slot };
        let carried = current;

        let ap_slot = ap.observe(slot, &transmitters).map_err(|e| at_slot(e, slot))?;
        for (i, &id) in ap_slot.newly_resolved.iter().enumerate() {
            decoded_order.push(Decode {
                id,
                slot,
                by_cancellation: i > 0,
            });
        }
        for u in users.iter_mut() {
            user_react(protocol, u, &ap_slot.feedback, p, coins).map_err(|e| at_slot(e, slot))?;
        }

        let mut done = false;
        if ap_slot.outcome.is_collision() {
            let (l, r) = tree.split(current, &users, &index);
            node_stack.push(r);
            current = l;
        } else {
            for _ in 0..ap_slot.feedback.cancelled_groups() {
                let v = node_stack
                    .pop()
                    .ok_or_else(|| inconsistent(slot, "skip past the last pending node".into()))?;
                tree.nodes[v].fate = NodeFate::Skipped {
                    reason: SkipReason::Cancelled,
                };
            }
            match ap_slot.next {
                NextNode::VirtualSplit => {
                    let v = node_stack
                        .pop()
                        .ok_or_else(|| inconsistent(slot, "virtual split without pending node".into()))?;
                    tree.nodes[v].fate = NodeFate::Skipped {
                        reason: SkipReason::KnownCollision,
                    };
                    let (l, r) = tree.split(v, &users, &index);
                    node_stack.push(r);
                    current = l;
                }
                NextNode::Transmit => {
                    current = node_stack
                        .pop()
                        .ok_or_else(|| inconsistent(slot, "transmit without pending node".into()))?;
                }
                NextNode::Done => done = true,
            }
        }

        for u in users.iter().filter(|u| !u.is_resolved()) {
            if u.pending != ap.pending.len() as u64 {
                return Err(inconsistent(
                    slot,
                    format!(
                        "station {} tracks {} pending groups, AP {}",
                        u.id(),
                        u.pending,
                        ap.pending.len()
                    ),
                ));
            }
        }

        slots.push(SlotRecord {
            slot,
            transmitters,
            outcome: ap_slot.outcome,
            feedback: ap_slot.feedback,
            newly_resolved: ap_slot.newly_resolved,
            memory_len: ap.memory_len(),
            node: carried,
        });

        if done {
            break;
        }
    }

    if let Some(u) = users.iter().find(|u| !u.is_resolved()) {
        return Err(inconsistent(
            slot,
            format!("station {} unresolved at end of CRI", u.id()),
        ));
    }
    if !ap.memory.is_empty() {
        return Err(inconsistent(
            slot,
            format!("{} stored collisions left undrained", ap.memory.len()),
        ));
    }
    let decoded: BTreeSet<PacketId> = decoded_order.iter().map(|d| d.id).collect();
    if decoded.len() != decoded_order.len() || decoded.len() != initial.len() {
        return Err(inconsistent(slot, "decoded set differs from the initial set".into()));
    }
    debug_assert!(matches!(
        slots.last().map(|s| s.outcome),
        Some(SlotOutcome::Idle | SlotOutcome::Singleton { .. })
    ));

    Ok(CriTrace {
        protocol,
        p,
        initial: initial.to_vec(),
        slots,
        nodes: tree.nodes,
        decoded_order,
        memory_highwater: ap.memory_highwater(),
    })
}
