//! Access-point side of a CRI: collision memory, successive interference
//! cancellation and feedback construction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CriError, FeedbackMsg, FeedbackOutcome, ProtocolKind};
use crate::signal::{classify, PacketId, Signal, SlotOutcome};

/// A right subtree the AP has not served yet.
///
/// `anchor` is the slot of the nearest transmitted collision that contains
/// the subtree. Once every left sibling on the way down is resolved, the
/// reduced anchor signal is exactly the subtree's composite, so the
/// subtree is fully resolved as soon as the anchor leaves memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingNode {
    pub anchor: Option<u64>,
}

/// What the channel carries next.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NextNode {
    /// The next pending group transmits in the coming slot.
    Transmit,
    /// The next pending group is a known collision; it splits without
    /// using a slot and its left half transmits in the coming slot.
    VirtualSplit,
    /// No pending group remains; the CRI is over.
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SicOutcome {
    /// Packets resolved by this step, starting with the decoded one.
    pub newly_resolved: Vec<PacketId>,
    /// Pending nodes popped because cancellation resolved them entirely.
    pub skip_k: u32,
}

/// Result of the AP processing one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ApSlot {
    pub outcome: SlotOutcome,
    pub feedback: FeedbackMsg,
    pub newly_resolved: Vec<PacketId>,
    pub next: NextNode,
}

#[derive(Debug, Clone)]
pub struct ApState {
    protocol: ProtocolKind,
    /// Stored collisions, oldest first, each reduced by every resolved packet.
    pub memory: Vec<(u64, Signal)>,
    pub resolved: BTreeSet<PacketId>,
    pub pending: Vec<PendingNode>,
    current_is_left: bool,
    last_skip: u32,
    memory_highwater: usize,
}

impl ApState {
    pub fn new(protocol: ProtocolKind) -> Self {
        ApState {
            protocol,
            memory: Vec::new(),
            resolved: BTreeSet::new(),
            pending: Vec::new(),
            current_is_left: false,
            last_skip: 0,
            memory_highwater: 0,
        }
    }

    /// State with a preloaded collision memory and no pending tree nodes.
    pub fn with_memory(protocol: ProtocolKind, memory: Vec<(u64, Signal)>) -> Self {
        let mut s = ApState::new(protocol);
        s.memory_highwater = memory.len();
        s.memory = memory;
        s
    }

    pub fn protocol(&self) -> ProtocolKind {
        self.protocol
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    pub fn memory_highwater(&self) -> usize {
        self.memory_highwater
    }

    /// Skip count produced by the most recent cancellation step.
    pub fn last_skip(&self) -> u32 {
        self.last_skip
    }

    /// Processes the signal received in `slot`.
    pub fn observe(&mut self, slot: u64, received: &Signal) -> Result<ApSlot, CriError> {
        let outcome = classify(received);
        let mut newly_resolved = Vec::new();
        let next;
        match outcome {
            SlotOutcome::Collision { .. } => {
                let anchor = if self.protocol.uses_sic() {
                    self.memory.push((slot, received.clone()));
                    self.memory_highwater = self.memory_highwater.max(self.memory.len());
                    Some(slot)
                } else {
                    None
                };
                self.pending.push(PendingNode { anchor });
                self.current_is_left = true;
                self.last_skip = 0;
                next = NextNode::Transmit;
            }
            SlotOutcome::Singleton { id } => {
                if self.protocol.uses_sic() {
                    newly_resolved = ap_sic_step(self, received)?.newly_resolved;
                } else {
                    if !self.resolved.insert(id) {
                        return Err(CriError::DoubleDecode(id));
                    }
                    self.last_skip = 0;
                    newly_resolved.push(id);
                }
                next = self.advance(false);
            }
            SlotOutcome::Idle => {
                self.last_skip = 0;
                next = self.advance(true);
            }
        }
        // feedback is built after the advance so that a virtual split is
        // already reflected; the memory itself is unchanged by advancing
        let feedback = build_feedback(self.protocol, received, self);
        Ok(ApSlot {
            outcome,
            feedback,
            newly_resolved,
            next,
        })
    }

    fn advance(&mut self, after_idle: bool) -> NextNode {
        let Some(node) = self.pending.pop() else {
            return NextNode::Done;
        };
        let known_collision = self.protocol.uses_sic()
            || (self.protocol.skips_definite_collisions() && after_idle && self.current_is_left);
        if known_collision {
            self.pending.push(PendingNode { anchor: node.anchor });
            self.current_is_left = true;
            NextNode::VirtualSplit
        } else {
            self.current_is_left = false;
            NextNode::Transmit
        }
    }

    fn pending_resolved(&self, node: &PendingNode) -> bool {
        match node.anchor {
            Some(slot) => !self.memory.iter().any(|(s, _)| *s == slot),
            None => false,
        }
    }
}

/// Registers `decoded` and cancels every newly resolved packet out of the
/// stored collisions until no stored signal is a singleton, then pops the
/// pending nodes that cancellation resolved.
pub fn ap_sic_step(state: &mut ApState, decoded: &Signal) -> Result<SicOutcome, CriError> {
    let first = decoded.as_singleton().ok_or_else(|| CriError::Inconsistent {
        slot: 0,
        detail: format!("SIC step on non-singleton {decoded}"),
    })?;
    let mut out = SicOutcome::default();
    let mut queue = vec![first];
    while let Some(id) = queue.pop() {
        if !state.resolved.insert(id) {
            return Err(CriError::DoubleDecode(id));
        }
        out.newly_resolved.push(id);
        for (_, stored) in state.memory.iter_mut() {
            if stored.contains(id) {
                stored.remove(id)?;
            }
        }
        // drain singletons (they resolve a packet) and empties
        let mut i = 0;
        while i < state.memory.len() {
            let stored = &state.memory[i].1;
            if stored.degree() <= 1 {
                if let Some(next) = stored.as_singleton() {
                    if !state.resolved.contains(&next) && !queue.contains(&next) {
                        queue.push(next);
                    }
                }
                state.memory.remove(i);
            } else {
                i += 1;
            }
        }
    }
    while let Some(top) = state.pending.last() {
        if state.pending_resolved(top) {
            state.pending.pop();
            out.skip_k += 1;
        } else {
            break;
        }
    }
    state.last_skip = out.skip_k;
    Ok(out)
}

/// Feedback for the slot that carried `slot_signal`; `state` must already
/// reflect this slot's cancellation.
pub fn build_feedback(protocol: ProtocolKind, slot_signal: &Signal, state: &ApState) -> FeedbackMsg {
    match classify(slot_signal) {
        SlotOutcome::Idle => FeedbackMsg::idle(),
        SlotOutcome::Collision { .. } => FeedbackMsg {
            outcome: FeedbackOutcome::Collision,
            broadcast_z: if protocol.broadcasts_collisions() {
                slot_signal.clone()
            } else {
                Signal::empty()
            },
        },
        SlotOutcome::Singleton { .. } => FeedbackMsg {
            outcome: FeedbackOutcome::Success {
                skip_k: if protocol.uses_sic() { state.last_skip + 1 } else { 0 },
            },
            broadcast_z: if protocol.broadcasts_residual() {
                state.memory.last().map(|(_, s)| s.clone()).unwrap_or_default()
            } else {
                Signal::empty()
            },
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(ids: &[u64]) -> Signal {
        ids.iter().map(|&i| PacketId(i)).collect()
    }

    const A: u64 = 1;
    const B: u64 = 2;
    const C: u64 = 3;
    const D: u64 = 4;
    const E: u64 = 5;

    #[test]
    fn cascade_from_worked_example() {
        let mut ap = ApState::with_memory(
            ProtocolKind::Sicta,
            vec![(1, sig(&[A, B, C, D])), (2, sig(&[A, B, C])), (5, sig(&[A, B]))],
        );
        let out = ap_sic_step(&mut ap, &sig(&[A])).unwrap();
        assert_eq!(
            out.newly_resolved,
            vec![PacketId(A), PacketId(B), PacketId(C), PacketId(D)]
        );
        assert!(ap.memory.is_empty());
    }

    #[test]
    fn empty_memory_resolves_only_decoded() {
        let mut ap = ApState::new(ProtocolKind::Sicta);
        let out = ap_sic_step(&mut ap, &sig(&[A])).unwrap();
        assert_eq!(out.newly_resolved, vec![PacketId(A)]);
        assert_eq!(out.skip_k, 0);
        assert!(ap.memory.is_empty());
    }

    #[test]
    fn degree_two_remainder_is_kept() {
        let mut ap = ApState::with_memory(ProtocolKind::Sicta, vec![(0, sig(&[A, B, C]))]);
        let out = ap_sic_step(&mut ap, &sig(&[A])).unwrap();
        assert_eq!(out.newly_resolved, vec![PacketId(A)]);
        assert_eq!(ap.memory, vec![(0, sig(&[B, C]))]);
    }

    #[test]
    fn sic_step_rejects_non_singleton_and_double_decode() {
        let mut ap = ApState::new(ProtocolKind::Sicta);
        assert!(ap_sic_step(&mut ap, &sig(&[A, B])).is_err());
        ap_sic_step(&mut ap, &sig(&[A])).unwrap();
        assert_eq!(
            ap_sic_step(&mut ap, &sig(&[A])),
            Err(CriError::DoubleDecode(PacketId(A)))
        );
    }

    #[test]
    fn skip_count_pops_resolved_pending_nodes() {
        // tree of the worked example right before the decode of A:
        // pending right siblings of slots 1 (D), 2-virtual (C) and 5 (B)
        let mut ap = ApState::with_memory(
            ProtocolKind::Sicta,
            vec![(1, sig(&[A, B, C, D])), (2, sig(&[A, B, C])), (5, sig(&[A, B]))],
        );
        ap.pending = vec![
            PendingNode { anchor: Some(1) },
            PendingNode { anchor: Some(2) },
            PendingNode { anchor: Some(5) },
        ];
        let out = ap_sic_step(&mut ap, &sig(&[A])).unwrap();
        assert_eq!(out.skip_k, 3);
        assert!(ap.pending.is_empty());
    }

    #[test]
    fn atic_collision_feedback_echoes_signal() {
        let ap = ApState::new(ProtocolKind::Atic);
        let fb = build_feedback(ProtocolKind::Atic, &sig(&[A, B]), &ap);
        assert_eq!(fb.outcome, FeedbackOutcome::Collision);
        assert_eq!(fb.broadcast_z, sig(&[A, B]));
    }

    #[test]
    fn atic_success_feedback_carries_residual() {
        // Y1 = A+B+C+D+E with A, B (and now C) resolved in between
        let mut ap = ApState::with_memory(ProtocolKind::Atic, vec![(1, sig(&[C, D, E]))]);
        ap.pending.push(PendingNode { anchor: Some(1) });
        ap_sic_step(&mut ap, &sig(&[C])).unwrap();
        let fb = build_feedback(ProtocolKind::Atic, &sig(&[C]), &ap);
        assert_eq!(fb.outcome, FeedbackOutcome::Success { skip_k: 1 });
        assert_eq!(fb.broadcast_z, sig(&[D, E]));
    }

    #[test]
    fn atic_left_success_has_no_broadcast() {
        let mut ap = ApState::with_memory(ProtocolKind::AticLeft, vec![(1, sig(&[C, D, E]))]);
        ap_sic_step(&mut ap, &sig(&[C])).unwrap();
        let fb = build_feedback(ProtocolKind::AticLeft, &sig(&[C]), &ap);
        assert!(matches!(fb.outcome, FeedbackOutcome::Success { .. }));
        assert!(fb.broadcast_z.is_empty());
        let fb = build_feedback(ProtocolKind::AticLeft, &sig(&[D, E]), &ap);
        assert_eq!(fb.broadcast_z, sig(&[D, E]));
    }

    #[test]
    fn idle_feedback_is_null_for_every_protocol() {
        for protocol in ProtocolKind::ALL {
            let ap = ApState::new(protocol);
            assert_eq!(build_feedback(protocol, &Signal::empty(), &ap), FeedbackMsg::idle());
        }
    }

    #[test]
    fn plain_tree_feedback_has_no_signal_and_zero_skip() {
        for protocol in [ProtocolKind::Bta, ProtocolKind::Mta, ProtocolKind::Sicta] {
            let ap = ApState::new(protocol);
            let fb = build_feedback(protocol, &sig(&[A, B]), &ap);
            assert!(fb.broadcast_z.is_empty());
            let fb = build_feedback(protocol, &sig(&[A]), &ap);
            assert!(fb.broadcast_z.is_empty());
            let expected = if protocol.uses_sic() { 1 } else { 0 };
            assert_eq!(fb.skip_k(), Some(expected));
            assert_eq!(fb.cancelled_groups(), 0);
        }
    }
}
