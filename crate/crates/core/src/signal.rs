//! Symbolic collision channel.
//!
//! A received waveform is modelled as the multiset of packet identifiers
//! whose transmissions were superposed in the slot. Interference
//! cancellation on a noiseless channel is exact, so it reduces to multiset
//! subtraction, and every decode decision is deterministic.

use std::collections::btree_map::{self, BTreeMap};
use std::fmt;
use std::sync::Arc;

use serde::de::{Deserialize, Deserializer, SeqAccess, Visitor};
use serde::ser::{Serialize, SerializeSeq, Serializer};
use thiserror::Error;

/// Identity of a packet (and of the user holding it).
///
/// Ids are minted from a monotone counter, so they are unique within a run
/// and their natural order is the arbitration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct PacketId(pub u64);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for PacketId {
    fn from(v: u64) -> Self {
        PacketId(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SignalError {
    /// The subtrahend holds a component the minuend does not. Under the
    /// collision channel this only happens when protocol logic is wrong.
    #[error("cannot cancel packet {0}: not contained in the signal")]
    NotContained(PacketId),
}

/// Multiset of packet ids standing for a superposed signal.
///
/// Storage is shared copy-on-write: the AP hands the same collision signal
/// to its memory and to the feedback, so clones must be cheap.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Signal {
    components: Arc<BTreeMap<PacketId, u32>>,
    degree: usize,
}

impl Signal {
    /// The null signal.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Signal of a single transmission.
    pub fn of(id: PacketId) -> Self {
        let mut s = Self::empty();
        s.add(id);
        s
    }

    pub fn from_ids<I: IntoIterator<Item = PacketId>>(ids: I) -> Self {
        let mut s = Self::empty();
        for id in ids {
            s.add(id);
        }
        s
    }

    /// Number of superposed components, counting multiplicity.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn is_empty(&self) -> bool {
        self.degree == 0
    }

    pub fn contains(&self, id: PacketId) -> bool {
        self.components.contains_key(&id)
    }

    pub fn multiplicity(&self, id: PacketId) -> u32 {
        self.components.get(&id).copied().unwrap_or(0)
    }

    /// The lone component, if the signal is a singleton.
    pub fn as_singleton(&self) -> Option<PacketId> {
        if self.degree == 1 {
            self.components.keys().next().copied()
        } else {
            None
        }
    }

    /// Distinct ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = PacketId> + '_ {
        self.components.keys().copied()
    }

    /// Components in ascending order, repeated by multiplicity.
    pub fn components(&self) -> impl Iterator<Item = PacketId> + '_ {
        self.components
            .iter()
            .flat_map(|(id, &m)| std::iter::repeat_n(*id, m as usize))
    }

    pub fn add(&mut self, id: PacketId) {
        *Arc::make_mut(&mut self.components).entry(id).or_insert(0) += 1;
        self.degree += 1;
    }

    /// Adds every component of `other` to `self`.
    pub fn superpose_in_place(&mut self, other: &Signal) {
        let mine = Arc::make_mut(&mut self.components);
        for (id, &m) in other.components.iter() {
            *mine.entry(*id).or_insert(0) += m;
        }
        self.degree += other.degree;
    }

    /// Removes one occurrence of `id`.
    pub fn remove(&mut self, id: PacketId) -> Result<(), SignalError> {
        if !self.components.contains_key(&id) {
            return Err(SignalError::NotContained(id));
        }
        match Arc::make_mut(&mut self.components).entry(id) {
            btree_map::Entry::Occupied(mut e) => {
                if *e.get() == 1 {
                    e.remove();
                } else {
                    *e.get_mut() -= 1;
                }
                self.degree -= 1;
                Ok(())
            }
            btree_map::Entry::Vacant(_) => Err(SignalError::NotContained(id)),
        }
    }

    /// Subtracts `other` from `self`. On error `self` is left untouched.
    pub fn cancel_in_place(&mut self, other: &Signal) -> Result<(), SignalError> {
        for (id, &m) in other.components.iter() {
            if self.multiplicity(*id) < m {
                return Err(SignalError::NotContained(*id));
            }
        }
        for id in other.components() {
            self.remove(id)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.components()).finish()
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "{{")?;
        for (i, id) in self.components().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<PacketId> for Signal {
    fn from_iter<I: IntoIterator<Item = PacketId>>(iter: I) -> Self {
        Signal::from_ids(iter)
    }
}

impl Serialize for Signal {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.degree))?;
        for id in self.components() {
            seq.serialize_element(&id)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Signal {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct SignalVisitor;
        impl<'de> Visitor<'de> for SignalVisitor {
            type Value = Signal;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a list of packet ids")
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Signal, A::Error> {
                let mut s = Signal::empty();
                while let Some(id) = seq.next_element::<PacketId>()? {
                    s.add(id);
                }
                Ok(s)
            }
        }
        deserializer.deserialize_seq(SignalVisitor)
    }
}

/// Channel-level outcome of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlotOutcome {
    Idle,
    Singleton { id: PacketId },
    Collision { degree: usize },
}

impl SlotOutcome {
    pub fn is_collision(&self) -> bool {
        matches!(self, SlotOutcome::Collision { .. })
    }
}

/// Multiset union of all component signals.
pub fn superpose<'a, I>(components: I) -> Signal
where
    I: IntoIterator<Item = &'a Signal>,
{
    let mut out = Signal::empty();
    for s in components {
        out.superpose_in_place(s);
    }
    out
}

/// `minuend − subtrahend`, failing if the subtrahend is not contained.
pub fn cancel(minuend: &Signal, subtrahend: &Signal) -> Result<Signal, SignalError> {
    let mut out = minuend.clone();
    out.cancel_in_place(subtrahend)?;
    Ok(out)
}

pub fn classify(s: &Signal) -> SlotOutcome {
    match s.degree() {
        0 => SlotOutcome::Idle,
        1 => SlotOutcome::Singleton {
            id: s.as_singleton().expect("degree 1"),
        },
        degree => SlotOutcome::Collision { degree },
    }
}
