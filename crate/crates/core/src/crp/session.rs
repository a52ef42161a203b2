//! Grouped CRI driver.
//!
//! Stations sharing a counter value always act alike, so the session keeps
//! a stack of member groups instead of one state machine per station. The
//! split rule and the AP logic are the ones of the reference driver, so
//! both produce the same slots on the same coins.

use super::ap::{ApState, NextNode};
use super::user::{split_decision, SplitDecision};
use super::{check_probability, CriError, FeedbackMsg, ProtocolKind, SplitCoins};
use crate::signal::{PacketId, Signal, SlotOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Member {
    id: PacketId,
    draws: u32,
}

/// What happened in one session slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSlot {
    /// Slot number within the CRI, starting at 1.
    pub slot: u64,
    pub transmitters: Signal,
    pub outcome: SlotOutcome,
    pub feedback: FeedbackMsg,
    /// Packets resolved by this slot, the directly decoded one first.
    pub newly_resolved: Vec<PacketId>,
    pub memory_len: usize,
    /// The CRI ended with this slot.
    pub finished: bool,
}

#[derive(Debug, Clone)]
pub struct CriSession {
    protocol: ProtocolKind,
    p: f64,
    ap: ApState,
    on_air: Vec<Member>,
    pending: Vec<Vec<Member>>,
    slot: u64,
    finished: bool,
    total: usize,
}

impl CriSession {
    pub fn new(protocol: ProtocolKind, initial: &[PacketId], p: f64) -> Result<Self, CriError> {
        check_probability(p)?;
        let mut sorted = initial.to_vec();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(CriError::DuplicateId(w[0]));
        }
        Ok(CriSession {
            protocol,
            p,
            ap: ApState::new(protocol),
            on_air: initial.iter().map(|&id| Member { id, draws: 0 }).collect(),
            pending: Vec::new(),
            slot: 0,
            finished: false,
            total: initial.len(),
        })
    }

    pub fn protocol(&self) -> ProtocolKind {
        self.protocol
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Slots consumed so far.
    pub fn slots_used(&self) -> u64 {
        self.slot
    }

    pub fn total_packets(&self) -> usize {
        self.total
    }

    pub fn resolved_count(&self) -> usize {
        self.ap.resolved.len()
    }

    pub fn memory_highwater(&self) -> usize {
        self.ap.memory_highwater()
    }

    fn split(
        &self,
        group: Vec<Member>,
        z: &Signal,
        coins: &mut dyn SplitCoins,
    ) -> Result<(Vec<Member>, Vec<Member>), CriError> {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for mut m in group {
            let decision = split_decision(self.protocol, m.id, m.draws, z, self.p, coins)?;
            if let SplitDecision::Coin { .. } = decision {
                m.draws += 1;
            }
            if decision.goes_left() {
                left.push(m);
            } else {
                right.push(m);
            }
        }
        Ok((left, right))
    }

    /// Runs the next slot. Calling it after the CRI finished is an error.
    pub fn step(&mut self, coins: &mut dyn SplitCoins) -> Result<SessionSlot, CriError> {
        if self.finished {
            return Err(CriError::Inconsistent {
                slot: self.slot,
                detail: "step after the CRI finished".into(),
            });
        }
        self.slot += 1;
        let slot = self.slot;
        let transmitters: Signal = self.on_air.iter().map(|m| m.id).collect();
        let ap_slot = self.ap.observe(slot, &transmitters).map_err(|e| match e {
            CriError::Inconsistent { detail, .. } => CriError::Inconsistent { slot, detail },
            other => other,
        })?;
        let fb = &ap_slot.feedback;
        if ap_slot.outcome.is_collision() {
            let group = std::mem::take(&mut self.on_air);
            let (l, r) = self.split(group, &fb.broadcast_z, coins)?;
            self.pending.push(r);
            self.on_air = l;
        } else {
            let skip = fb.cancelled_groups() as usize;
            if skip > self.pending.len() {
                return Err(CriError::Inconsistent {
                    slot,
                    detail: format!("skip {skip} exceeds {} pending groups", self.pending.len()),
                });
            }
            self.pending.truncate(self.pending.len() - skip);
            match ap_slot.next {
                NextNode::VirtualSplit => {
                    let group = self.pending.pop().expect("AP and session stacks agree");
                    let (l, r) = self.split(group, &fb.broadcast_z, coins)?;
                    self.pending.push(r);
                    self.on_air = l;
                }
                NextNode::Transmit => {
                    self.on_air = self.pending.pop().expect("AP and session stacks agree");
                }
                NextNode::Done => {
                    self.on_air.clear();
                    self.finished = true;
                    if self.ap.resolved.len() != self.total || !self.ap.memory.is_empty() {
                        return Err(CriError::Inconsistent {
                            slot,
                            detail: format!(
                                "CRI ended with {} of {} packets resolved",
                                self.ap.resolved.len(),
                                self.total
                            ),
                        });
                    }
                }
            }
        }
        Ok(SessionSlot {
            slot,
            transmitters,
            outcome: ap_slot.outcome,
            feedback: ap_slot.feedback,
            newly_resolved: ap_slot.newly_resolved,
            memory_len: self.ap.memory_len(),
            finished: self.finished,
        })
    }

    /// Steps until the CRI ends, with a slot cap.
    pub fn run_to_end(&mut self, coins: &mut dyn SplitCoins, cap: u64) -> Result<Vec<SessionSlot>, CriError> {
        let mut out = Vec::new();
        while !self.finished {
            if self.slot >= cap {
                return Err(CriError::NonTermination {
                    cap,
                    resolved: self.ap.resolved.len(),
                    total: self.total,
                });
            }
            out.push(self.step(coins)?);
        }
        Ok(out)
    }
}
