//! SplitMix64 generator used for every random draw in a session.
//!
//! The whole simulator consumes randomness through [`RngState::next_unit`],
//! so a session is reproducible from its seed and the sequence of actions
//! applied to it.

use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Single 64-bit word of generator state. Every value is a valid state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngState(u64);

impl RngState {
    pub const fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub const fn raw(self) -> u64 {
        self.0
    }

    /// Advances the state and returns the next 64-bit output.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` built from the top 53 bits of the output.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform draw in `[-1, 1)`.
    #[inline]
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_unit() - 1.0
    }

    /// Pure form of [`next_unit`](Self::next_unit): returns the successor
    /// state alongside the drawn value.
    pub fn step(self) -> (Self, f64) {
        let mut next = self;
        let u = next.next_unit();
        (next, u)
    }
}

impl From<u64> for RngState {
    fn from(seed: u64) -> Self {
        Self(seed)
    }
}
