//! Station-side state machine.
//!
//! A station only sees the feedback. It keeps a counter (its group's
//! position in the stack of pending groups, 0 meaning "transmit now"), the
//! number of pending groups, its own signal and the last non-null
//! broadcast signal.

use serde::{Deserialize, Serialize};

use super::{arbitrate, CriError, FeedbackMsg, FeedbackOutcome, ProtocolKind, SplitCoins};
use crate::signal::{PacketId, Signal, SignalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserStatus {
    Active,
    /// Lost the arbitration of a known degree-2 collision; the winner's
    /// success lets the AP cancel this station's packet out.
    Deferring,
    Resolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserAction {
    TransmitNext,
    Wait,
    DeferExpectResolution,
    SplitAndMaybeTransmit { transmit: bool },
    Resolved,
}

impl UserAction {
    pub fn transmits(self) -> bool {
        matches!(
            self,
            UserAction::TransmitNext | UserAction::SplitAndMaybeTransmit { transmit: true }
        )
    }
}

/// How a member of a splitting group chooses its side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitDecision {
    /// Won the degree-2 arbitration: transmits alone next.
    Winner,
    /// Lost the degree-2 arbitration: waits to be cancelled out.
    Loser,
    Coin {
        left: bool,
    },
}

impl SplitDecision {
    pub fn goes_left(self) -> bool {
        matches!(self, SplitDecision::Winner | SplitDecision::Coin { left: true })
    }
}

/// Side choice of station `id` whose group is splitting, given the
/// broadcast `z` accompanying the split. A singleton residual `z − own`
/// reveals a degree-2 group and its other member.
pub fn split_decision(
    protocol: ProtocolKind,
    id: PacketId,
    draw: u32,
    z: &Signal,
    p: f64,
    coins: &mut dyn SplitCoins,
) -> Result<SplitDecision, CriError> {
    if protocol.broadcasts_collisions() && !z.is_empty() {
        if !z.contains(id) {
            return Err(SignalError::NotContained(id).into());
        }
        // z − own is a singleton exactly when z has degree 2
        if z.degree() == 2 {
            let other = z.components().find(|&c| c != id).unwrap_or(id);
            return Ok(if arbitrate(id, other)? == id {
                SplitDecision::Winner
            } else {
                SplitDecision::Loser
            });
        }
    }
    Ok(SplitDecision::Coin {
        left: coins.goes_left(id, draw, p),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserState {
    pub own: Signal,
    pub last_z: Signal,
    /// Position of this station's group: 0 is the group on air next.
    pub counter: u64,
    /// Groups waiting behind the one on air.
    pub pending: u64,
    /// Coin draws used so far.
    pub draws: u32,
    /// The group on air next is a left child.
    pub on_left: bool,
    pub status: UserStatus,
}

impl UserState {
    /// Station that takes part in the first slot of a CRI.
    pub fn new(id: PacketId) -> Self {
        UserState {
            own: Signal::of(id),
            last_z: Signal::empty(),
            counter: 0,
            pending: 0,
            draws: 0,
            on_left: false,
            status: UserStatus::Active,
        }
    }

    pub fn id(&self) -> PacketId {
        self.own.as_singleton().expect("own signal is a singleton")
    }

    pub fn is_resolved(&self) -> bool {
        self.status == UserStatus::Resolved
    }

    /// Transmits in the coming slot.
    pub fn transmits(&self) -> bool {
        self.status == UserStatus::Active && self.counter == 0
    }

    fn split(
        &mut self,
        protocol: ProtocolKind,
        z: &Signal,
        p: f64,
        coins: &mut dyn SplitCoins,
    ) -> Result<UserAction, CriError> {
        let decision = split_decision(protocol, self.id(), self.draws, z, p, coins)?;
        if let SplitDecision::Coin { .. } = decision {
            self.draws += 1;
        }
        self.counter = if decision.goes_left() { 0 } else { 1 };
        Ok(match decision {
            SplitDecision::Winner => UserAction::TransmitNext,
            SplitDecision::Loser => {
                self.status = UserStatus::Deferring;
                UserAction::DeferExpectResolution
            }
            SplitDecision::Coin { left } => UserAction::SplitAndMaybeTransmit { transmit: left },
        })
    }

    /// Moves to the next pending group after the group on air finished.
    fn advance(
        &mut self,
        protocol: ProtocolKind,
        after_idle: bool,
        z: &Signal,
        p: f64,
        coins: &mut dyn SplitCoins,
    ) -> Result<UserAction, CriError> {
        if self.pending == 0 {
            // no group left but this station is unresolved
            return Err(CriError::Inconsistent {
                slot: 0,
                detail: format!("station {} left unresolved at end of CRI", self.id()),
            });
        }
        self.pending -= 1;
        self.counter -= 1;
        let known_collision =
            protocol.uses_sic() || (protocol.skips_definite_collisions() && after_idle && self.on_left);
        if known_collision {
            self.pending += 1;
            self.on_left = true;
            if self.counter == 0 {
                return self.split(protocol, z, p, coins);
            }
            self.counter += 1;
            return Ok(self.idle_action());
        }
        self.on_left = false;
        Ok(if self.counter == 0 {
            UserAction::TransmitNext
        } else {
            self.idle_action()
        })
    }

    fn idle_action(&self) -> UserAction {
        match self.status {
            UserStatus::Deferring => UserAction::DeferExpectResolution,
            _ => UserAction::Wait,
        }
    }
}

/// Updates `me` with the feedback of the slot just finished and returns
/// what the station does next.
pub fn user_react(
    protocol: ProtocolKind,
    me: &mut UserState,
    fb: &FeedbackMsg,
    p: f64,
    coins: &mut dyn SplitCoins,
) -> Result<UserAction, CriError> {
    if me.is_resolved() {
        return Ok(UserAction::Resolved);
    }
    if !fb.broadcast_z.is_empty() {
        me.last_z = fb.broadcast_z.clone();
    }
    match fb.outcome {
        FeedbackOutcome::Collision => {
            me.pending += 1;
            me.on_left = true;
            if me.counter == 0 {
                me.split(protocol, &fb.broadcast_z, p, coins)
            } else {
                me.counter += 1;
                Ok(me.idle_action())
            }
        }
        FeedbackOutcome::Idle => {
            if me.counter == 0 {
                return Err(CriError::Inconsistent {
                    slot: 0,
                    detail: format!("station {} transmitted into an idle slot", me.id()),
                });
            }
            me.advance(protocol, true, &fb.broadcast_z, p, coins)
        }
        FeedbackOutcome::Success { skip_k } => {
            let skip = u64::from(fb.cancelled_groups());
            if me.counter <= skip {
                // decoded directly (counter 0) or inside a cancelled group
                me.status = UserStatus::Resolved;
                return Ok(UserAction::Resolved);
            }
            me.counter -= skip;
            me.pending = me.pending.checked_sub(skip).ok_or_else(|| CriError::Inconsistent {
                slot: 0,
                detail: format!("skip {skip_k} runs past the pending groups of station {}", me.id()),
            })?;
            me.advance(protocol, false, &fb.broadcast_z, p, coins)
        }
    }
}
