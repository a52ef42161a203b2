//! Poisson arrival process.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::signal::PacketId;

/// One packet arrival. `slot` is the slot during which it arrived; the
/// packet can first transmit in `slot + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub id: PacketId,
    pub time: f64,
    pub slot: u64,
}

/// Poisson process of rate `lambda` packets per slot, so the number of
/// arrivals per slot is i.i.d. Poisson(`lambda`). Ids are minted in
/// arrival order starting from 0.
#[derive(Debug, Clone)]
pub struct ArrivalStream {
    rng: ChaCha8Rng,
    gap: Option<Exp<f64>>,
    next: Option<Arrival>,
    minted: u64,
}

impl ArrivalStream {
    /// `lambda = 0` yields no arrivals at all.
    pub fn new(lambda: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let gap = (lambda > 0.0).then(|| Exp::new(lambda).expect("positive rate"));
        let mut s = ArrivalStream {
            rng,
            gap,
            next: None,
            minted: 0,
        };
        s.next = s.draw(0.0);
        s
    }

    fn draw(&mut self, after: f64) -> Option<Arrival> {
        let gap = self.gap.as_ref()?;
        let time = after + gap.sample(&mut self.rng);
        let id = PacketId(self.minted);
        self.minted += 1;
        Some(Arrival {
            id,
            time,
            slot: time.floor() as u64,
        })
    }

    /// Time of the next arrival, if any.
    pub fn peek_time(&self) -> Option<f64> {
        self.next.map(|a| a.time)
    }

    /// Next arrival strictly before `time`.
    pub fn pop_before(&mut self, time: f64) -> Option<Arrival> {
        let a = self.next?;
        if a.time < time {
            self.next = self.draw(a.time);
            Some(a)
        } else {
            None
        }
    }
}
