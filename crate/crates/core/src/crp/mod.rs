//! Collision resolution protocols.
//!
//! One collision resolution interval (CRI) is driven slot by slot: the
//! stations whose counter is zero transmit, the access point classifies
//! the superposed signal, runs interference cancellation over its stored
//! collisions and broadcasts feedback, and every station updates its
//! counter from that feedback alone.
//!
//! Two drivers share the access-point logic in [`ap`] and the split rule
//! in [`user`]:
//!
//! * [`run_cri`] keeps one [`UserState`] per station and calls
//!   [`user_react`] for every station on every slot. It records a full
//!   [`CriTrace`] and is the reference.
//! * [`CriSession`] groups stations by counter value (a stack of pending
//!   groups) so that a slot costs time proportional to the group being
//!   split, not to the population. The traffic simulator uses it.

pub mod ap;
pub mod coins;
pub mod dot;
pub mod engine;
pub mod session;
pub mod trace;
pub mod user;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{PacketId, Signal, SignalError};

pub use ap::{ap_sic_step, build_feedback, ApSlot, ApState, NextNode, SicOutcome};
pub use coins::{ScriptedCoins, SeededCoins, SplitCoins};
pub use dot::export_tree;
pub use engine::{run_cri, run_cri_with_cap, DEFAULT_SLOT_CAP};
pub use session::{CriSession, SessionSlot};
pub use trace::{CriTrace, Decode, NodeFate, SkipReason, SlotRecord, TreeNode};
pub use user::{split_decision, user_react, SplitDecision, UserAction, UserState, UserStatus};

/// Collision resolution protocol selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    /// Binary tree algorithm: every node of the split tree is a slot.
    Bta,
    /// Modified tree algorithm: the sibling of an idle left child is a
    /// known collision and is split without being transmitted.
    Mta,
    /// Tree algorithm with successive interference cancellation at the AP.
    Sicta,
    /// SICTA plus broadcast of collision signals and of the residual of the
    /// most recent unresolved collision after each success.
    Atic,
    /// Broadcasts collision signals only, so only degree-2 collisions that
    /// are actually transmitted get the deterministic treatment.
    AticLeft,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [
        ProtocolKind::Bta,
        ProtocolKind::Mta,
        ProtocolKind::Sicta,
        ProtocolKind::Atic,
        ProtocolKind::AticLeft,
    ];

    /// AP stores collisions and cancels decoded packets out of them.
    pub fn uses_sic(self) -> bool {
        matches!(self, ProtocolKind::Sicta | ProtocolKind::Atic | ProtocolKind::AticLeft)
    }

    /// A right sibling of an idle left child is split without a slot.
    pub fn skips_definite_collisions(self) -> bool {
        !matches!(self, ProtocolKind::Bta)
    }

    /// AP echoes every collision signal in the feedback.
    pub fn broadcasts_collisions(self) -> bool {
        matches!(self, ProtocolKind::Atic | ProtocolKind::AticLeft)
    }

    /// AP broadcasts the residual unresolved signal after a success.
    pub fn broadcasts_residual(self) -> bool {
        matches!(self, ProtocolKind::Atic)
    }

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Bta => "bta",
            ProtocolKind::Mta => "mta",
            ProtocolKind::Sicta => "sicta",
            ProtocolKind::Atic => "atic",
            ProtocolKind::AticLeft => "atic_left",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "bta" => Ok(ProtocolKind::Bta),
            "mta" => Ok(ProtocolKind::Mta),
            "sicta" => Ok(ProtocolKind::Sicta),
            "atic" => Ok(ProtocolKind::Atic),
            "atic_left" | "aticleft" => Ok(ProtocolKind::AticLeft),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

/// Group a station joins when its node splits. The left group is served first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Outcome flag of the per-slot broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeedbackOutcome {
    Idle,
    /// Under the SIC protocols every station moves `skip_k ≥ 1` positions
    /// down the stack of pending tree nodes: the `skip_k − 1` nodes that
    /// cancellation resolved, plus the node served next. BTA and MTA send 0.
    Success {
        skip_k: u32,
    },
    Collision,
}

/// Feedback broadcast by the AP after every slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackMsg {
    pub outcome: FeedbackOutcome,
    pub broadcast_z: Signal,
}

impl FeedbackMsg {
    pub fn idle() -> Self {
        FeedbackMsg {
            outcome: FeedbackOutcome::Idle,
            broadcast_z: Signal::empty(),
        }
    }

    pub fn skip_k(&self) -> Option<u32> {
        match self.outcome {
            FeedbackOutcome::Success { skip_k } => Some(skip_k),
            _ => None,
        }
    }

    /// Pending tree nodes that this success resolved by cancellation.
    pub fn cancelled_groups(&self) -> u32 {
        self.skip_k().unwrap_or(0).saturating_sub(1)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("CRI did not terminate within {cap} slots ({resolved} of {total} packets resolved)")]
    NonTermination { cap: u64, resolved: usize, total: usize },
    #[error("arbitration between equal ids {0}")]
    EqualIds(PacketId),
    #[error("packet {0} appears twice in the initial set")]
    DuplicateId(PacketId),
    #[error("packet {0} decoded twice")]
    DoubleDecode(PacketId),
    #[error("splitting probability {0} is outside (0, 1)")]
    InvalidProbability(f64),
    #[error("stations and AP disagree at slot {slot}: {detail}")]
    Inconsistent { slot: u64, detail: String },
}

/// Distributed tie-break for a known degree-2 collision: the higher id
/// transmits first.
pub fn arbitrate(a: PacketId, b: PacketId) -> Result<PacketId, CriError> {
    if a == b {
        return Err(CriError::EqualIds(a));
    }
    Ok(a.max(b))
}

pub(crate) fn check_probability(p: f64) -> Result<(), CriError> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(CriError::InvalidProbability(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arbitration_prefers_higher_id() {
        let id = PacketId;
        assert_eq!(arbitrate(id(3), id(9)).unwrap(), id(9));
        assert_eq!(arbitrate(id(9), id(3)).unwrap(), id(9));
        assert_eq!(arbitrate(id(1), id(2)).unwrap(), id(2));
        assert_eq!(arbitrate(id(4), id(4)), Err(CriError::EqualIds(id(4))));
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in ProtocolKind::ALL {
            assert_eq!(p.name().parse::<ProtocolKind>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
        assert_eq!("ATIC-left".parse::<ProtocolKind>().unwrap(), ProtocolKind::AticLeft);
        assert!("dsa".parse::<ProtocolKind>().is_err());
    }
}
