//! Sources of split decisions.
//!
//! A decision is addressed by `(user, draw)` where `draw` counts the
//! user's previous splits in the CRI. Under every protocol a station's
//! `d`-th split happens at depth `d` of the same underlying binary tree,
//! so feeding identical coins to different protocols couples their trees.

use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::signal::PacketId;

pub trait SplitCoins {
    /// Whether `user` joins the left group on its `draw`-th split.
    fn goes_left(&mut self, user: PacketId, draw: u32, p: f64) -> bool;
}

/// Counter-based coins: ChaCha8 keyed by the seed, one stream per user,
/// one word position per draw. Order of queries does not matter.
#[derive(Debug, Clone)]
pub struct SeededCoins {
    key: [u8; 32],
}

impl SeededCoins {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        ChaCha8Rng::seed_from_u64(seed).fill_bytes(&mut key);
        SeededCoins { key }
    }

    pub fn uniform(&self, user: PacketId, draw: u32) -> f64 {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(user.0);
        rng.set_word_pos(u128::from(draw) * 2);
        rng.random::<f64>()
    }
}

impl SplitCoins for SeededCoins {
    fn goes_left(&mut self, user: PacketId, draw: u32, p: f64) -> bool {
        self.uniform(user, draw) < p
    }
}

/// Explicit per-user split sequences, `true` meaning left.
///
/// Draws beyond a user's script fall back to seeded coins when a fallback
/// is configured and panic otherwise.
#[derive(Debug, Clone, Default)]
pub struct ScriptedCoins {
    script: HashMap<PacketId, Vec<bool>>,
    fallback: Option<SeededCoins>,
}

impl ScriptedCoins {
    pub fn new<I, V>(script: I) -> Self
    where
        I: IntoIterator<Item = (PacketId, V)>,
        V: Into<Vec<bool>>,
    {
        ScriptedCoins {
            script: script.into_iter().map(|(k, v)| (k, v.into())).collect(),
            fallback: None,
        }
    }

    /// Parses `"L R L"`-style strings per user (`L`/`0` left, `R`/`1` right).
    pub fn from_letters<I, S>(script: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = (PacketId, S)>,
        S: AsRef<str>,
    {
        let mut out = HashMap::new();
        for (id, text) in script {
            let mut seq = Vec::new();
            for c in text.as_ref().chars().filter(|c| !c.is_whitespace() && *c != ',') {
                match c {
                    'L' | 'l' | '0' => seq.push(true),
                    'R' | 'r' | '1' => seq.push(false),
                    other => return Err(format!("bad split letter `{other}` for user {id}")),
                }
            }
            out.insert(id, seq);
        }
        Ok(ScriptedCoins {
            script: out,
            fallback: None,
        })
    }

    pub fn with_fallback(mut self, seed: u64) -> Self {
        self.fallback = Some(SeededCoins::new(seed));
        self
    }
}

impl SplitCoins for ScriptedCoins {
    fn goes_left(&mut self, user: PacketId, draw: u32, p: f64) -> bool {
        if let Some(&left) = self.script.get(&user).and_then(|s| s.get(draw as usize)) {
            return left;
        }
        match self.fallback.as_mut() {
            Some(f) => f.goes_left(user, draw, p),
            None => panic!("split script exhausted for user {user} at draw {draw}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_coins_are_query_order_independent() {
        let mut a = SeededCoins::new(11);
        let mut b = SeededCoins::new(11);
        let forward: Vec<bool> = (0..50).map(|d| a.goes_left(PacketId(3), d, 0.5)).collect();
        let backward: Vec<bool> = (0..50).rev().map(|d| b.goes_left(PacketId(3), d, 0.5)).collect();
        let backward: Vec<bool> = backward.into_iter().rev().collect();
        assert_eq!(forward, backward);
    }

    #[test]
    fn seeded_coins_respect_bias() {
        let mut coins = SeededCoins::new(5);
        let n = 20_000;
        let left = (0..n).filter(|&i| coins.goes_left(PacketId(i), 0, 0.3)).count();
        let frac = left as f64 / n as f64;
        // 4 standard errors
        assert!((frac - 0.3).abs() < 4.0 * (0.3f64 * 0.7 / n as f64).sqrt(), "{frac}");
    }

    #[test]
    fn streams_differ_across_users_and_seeds() {
        let c1 = SeededCoins::new(1);
        let c2 = SeededCoins::new(2);
        assert_ne!(c1.uniform(PacketId(1), 0), c1.uniform(PacketId(2), 0));
        assert_ne!(c1.uniform(PacketId(1), 0), c2.uniform(PacketId(1), 0));
    }

    #[test]
    fn letters_parse() {
        let mut s = ScriptedCoins::from_letters([(PacketId(1), "L R")]).unwrap();
        assert!(s.goes_left(PacketId(1), 0, 0.5));
        assert!(!s.goes_left(PacketId(1), 1, 0.5));
        assert!(ScriptedCoins::from_letters([(PacketId(1), "X")]).is_err());
    }

    #[test]
    #[should_panic(expected = "exhausted")]
    fn exhausted_script_panics_without_fallback() {
        let mut s = ScriptedCoins::new([(PacketId(1), vec![true])]);
        s.goes_left(PacketId(1), 1, 0.5);
    }
}
