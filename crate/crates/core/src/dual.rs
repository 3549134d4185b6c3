//! Exact dual values on the fixed denominator `D = 3^L` with `L = ℓ_max + 1`.
//!
//! With `ε = 0.5`, every dual value the primal-dual engine produces is a sum or
//! difference of `0`, `1` and powers `(2/3)^p = 2^p · 3^{L-p} / 3^L` for
//! `p ∈ [0, L]`, so storing numerators over `3^L` keeps every comparison exact.

use crate::types::Level;

/// Numerator of a dual value over the scale's denominator.
pub type DualNum = i128;

/// The fixed-denominator scale used by one engine instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualScale {
    exponent: u32,
    denominator: DualNum,
    powers: Vec<DualNum>,
}

/// Largest exponent `L` accepted: keeps `f · n_cap · 3^L` far below `i128::MAX`.
pub const MAX_EXPONENT: u32 = 60;

impl DualScale {
    /// Scale with denominator `3^exponent`, or `None` if it would not leave
    /// head-room for sums of up to `2^30` values.
    pub fn new(exponent: u32) -> Option<Self> {
        if exponent > MAX_EXPONENT {
            return None;
        }
        let denominator = 3i128.pow(exponent);
        let powers = (0..=exponent)
            .map(|p| (1i128 << p) * 3i128.pow(exponent - p))
            .collect();
        Some(DualScale { exponent, denominator, powers })
    }

    /// The exponent `L`.
    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    /// Numerator of `1`.
    pub fn one(&self) -> DualNum {
        self.denominator
    }

    /// Numerator of `(2/3)^p`; `p` is clamped to `[0, L]`.
    pub fn power(&self, p: Level) -> DualNum {
        self.powers[p.min(self.exponent as usize)]
    }

    /// Numerator of the tightness threshold `2/3`.
    pub fn tight(&self) -> DualNum {
        self.power(1)
    }

    /// The value as a float (diagnostics only).
    pub fn to_f64(&self, value: DualNum) -> f64 {
        value as f64 / self.denominator as f64
    }
}
