//! Identifier types, the update model, and the level arithmetic shared by every
//! module (`ε = 0.5`, so all logarithms are base `1.5`).

use serde::{Deserialize, Serialize};
use std::fmt;

/// Dense element identifier in `[0, U)`.
pub type ElementId = u32;

/// Dense set identifier in `[0, m)`.
pub type SetId = u32;

/// Level in a hierarchical solution.
pub type Level = usize;

/// Kind of a single time-step update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    /// A dormant element becomes live.
    Insert,
    /// A live element becomes dormant.
    Delete,
}

impl Op {
    /// The one-character symbol used in stream files and CSV output.
    pub fn symbol(self) -> char {
        match self {
            Op::Insert => '+',
            Op::Delete => '-',
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// One time-step of the update stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Update {
    /// Insert or delete.
    pub op: Op,
    /// The element being inserted or deleted.
    pub element: ElementId,
}

impl Update {
    /// Insertion of `element`.
    pub fn insert(element: ElementId) -> Self {
        Update { op: Op::Insert, element }
    }

    /// Deletion of `element`.
    pub fn delete(element: ElementId) -> Self {
        Update { op: Op::Delete, element }
    }
}

/// `⌊log_{1.5} x⌋` for `x ≥ 1`, computed exactly: the largest `j` with
/// `3^j ≤ x · 2^j`. Returns 0 for `x ≤ 1`.
pub fn floor_log_1_5(x: usize) -> Level {
    if x <= 1 {
        return 0;
    }
    let x = x as u128;
    let mut level = 0;
    let mut pow3: u128 = 1;
    let mut pow2: u128 = 1;
    loop {
        let next3 = pow3 * 3;
        let next2 = pow2 * 2;
        if next3 > x * next2 {
            return level;
        }
        pow3 = next3;
        pow2 = next2;
        level += 1;
    }
}

/// `⌈log_{1.5} x⌉` for `x ≥ 1`: the smallest `j` with `3^j ≥ x · 2^j`.
pub fn ceil_log_1_5(x: usize) -> Level {
    let x = x.max(1) as u128;
    let mut level = 0;
    let mut pow3: u128 = 1;
    let mut pow2: u128 = 1;
    while pow3 < x * pow2 {
        pow3 *= 3;
        pow2 *= 2;
        level += 1;
    }
    level
}

/// Maximum level `ℓ_max = ⌈log_{1.5} n_cap⌉ + 1`.
pub fn max_level(n_cap: usize) -> Level {
    ceil_log_1_5(n_cap) + 1
}

/// Whether `count < 1.5^exponent`, i.e. `count · 2^exponent < 3^exponent`.
pub fn below_power_1_5(count: usize, exponent: Level) -> bool {
    let lhs = (count as u128).checked_mul(1u128 << exponent.min(100));
    let rhs = 3u128.checked_pow(exponent as u32);
    match (lhs, rhs) {
        (Some(lhs), Some(rhs)) => lhs < rhs,
        (_, None) => true,
        (None, Some(_)) => false,
    }
}
