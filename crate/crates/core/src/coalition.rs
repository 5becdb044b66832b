//! Coalitions of features and the Shapley weighting over them.
//!
//! A coalition is a fixed-width bitset over feature positions `0..M`.
//! Feature identity is positional; names never enter coalition arithmetic.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of features for exact enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Hard upper bound on the feature count, set by the bitset width.
pub const MAX_FEATURES: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coalition {
    bits: u64,
    n_features: usize,
}

impl Coalition {
    pub fn empty(n_features: usize) -> Self {
        debug_assert!(n_features <= MAX_FEATURES);
        Coalition {
            bits: 0,
            n_features,
        }
    }

    pub fn full(n_features: usize) -> Self {
        Coalition {
            bits: full_mask(n_features),
            n_features,
        }
    }

    /// Builds a coalition from a raw bitset. Bits at or above `n_features` are rejected.
    pub fn from_bits(bits: u64, n_features: usize) -> Result<Self> {
        check_feature_count(n_features)?;
        if bits & !full_mask(n_features) != 0 {
            return Err(Error::InvalidArgument(format!(
                "bitset {bits:#x} has members outside 0..{n_features}"
            )));
        }
        Ok(Coalition { bits, n_features })
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I, n_features: usize) -> Result<Self> {
        check_feature_count(n_features)?;
        let mut bits = 0u64;
        for j in members {
            if j >= n_features {
                return Err(Error::InvalidArgument(format!(
                    "feature {j} out of range for {n_features} features"
                )));
            }
            bits |= 1 << j;
        }
        Ok(Coalition { bits, n_features })
    }

    pub(crate) fn from_bits_unchecked(bits: u64, n_features: usize) -> Self {
        Coalition { bits, n_features }
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        j < self.n_features && self.bits & (1 << j) != 0
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bits.count_ones() as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn is_full(&self) -> bool {
        self.bits == full_mask(self.n_features)
    }

    #[must_use]
    pub fn with(self, j: usize) -> Self {
        debug_assert!(j < self.n_features);
        Coalition {
            bits: self.bits | (1 << j),
            n_features: self.n_features,
        }
    }

    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        let bits = self.bits;
        (0..self.n_features).filter(move |j| bits & (1 << j) != 0)
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, j) in self.members().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coalition({self}/{})", self.n_features)
    }
}

#[inline]
pub(crate) fn full_mask(n_features: usize) -> u64 {
    if n_features >= 64 {
        u64::MAX
    } else {
        (1u64 << n_features) - 1
    }
}

pub(crate) fn check_feature_count(n_features: usize) -> Result<()> {
    if n_features > MAX_FEATURES {
        return Err(Error::InvalidArgument(format!(
            "{n_features} features exceed the supported maximum of {MAX_FEATURES}"
        )));
    }
    Ok(())
}

/// Inserts a zero bit at position `at`, shifting higher bits up by one.
#[inline]
pub(crate) fn insert_zero_bit(bits: u64, at: usize) -> u64 {
    let low = bits & ((1u64 << at) - 1);
    let high = (bits >> at) << (at + 1);
    low | high
}

/// All `2^(M-1)` coalitions of `0..n_features` that do not contain `excluding`.
pub fn enumerate_subsets(
    n_features: usize,
    excluding: usize,
    cap: usize,
) -> Result<impl Iterator<Item = Coalition>> {
    if excluding >= n_features {
        return Err(Error::InvalidArgument(format!(
            "excluded feature {excluding} out of range for {n_features} features"
        )));
    }
    if n_features > cap.min(MAX_FEATURES - 1) {
        return Err(Error::CapExceeded {
            features: n_features,
            cap,
        });
    }
    let count = 1u64 << (n_features - 1);
    Ok((0..count).map(move |i| Coalition::from_bits_unchecked(insert_zero_bit(i, excluding), n_features)))
}

/// `s! (M - s - 1)! / M!`, the weight of a size-`s` coalition in a game of `M` players.
pub fn shapley_weight(size: usize, n_features: usize) -> Result<f64> {
    if size >= n_features {
        return Err(Error::InvalidArgument(format!(
            "coalition size {size} must be below the feature count {n_features}"
        )));
    }
    Ok(weight_table(n_features)[size])
}

/// Weights for every coalition size `0..M`, as `1 / (M * C(M-1, s))`.
///
/// The binomial is built by the exact integer ratio
/// `C(n, s+1) = C(n, s) * (n - s) / (s + 1)`, which fits in `u128` for every
/// `M <= 64`, so each weight is rounded only once.
pub(crate) fn weight_table(n_features: usize) -> Vec<f64> {
    if n_features == 0 {
        return Vec::new();
    }
    let n = (n_features - 1) as u128;
    let m = n_features as f64;
    let mut binom: u128 = 1;
    let mut weights = Vec::with_capacity(n_features);
    for s in 0..n_features as u128 {
        weights.push(1.0 / (m * binom as f64));
        binom = binom * (n - s.min(n)) / (s + 1);
    }
    weights
}
