//! Combinatorial number system.
//!
//! Every integer `n < C(N, R)` has a unique representation
//! `n = C(c_1, 1) + C(c_2, 2) + ... + C(c_R, R)` with `0 <= c_1 < c_2 < ... < c_R`.
//! The tuple `(c_1, ..., c_R)` is the combinadic of `n`; ordering integers
//! this way enumerates R-subsets in colexicographic order.
//!
//! Indices are 0-based everywhere in this module.

use std::fmt;
use std::str::FromStr;

use crate::error::{GsmError, Result};

/// Exact binomial coefficient `C(n, k)`, zero when `k > n`.
///
/// Overflow of the 64-bit result is reported, never wrapped.
pub fn binomial(n: usize, k: usize) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k_small = k.min(n - k);
    // Partial products C(n - k + i, i) are nondecreasing in i, so once one
    // leaves u64 the final value cannot fit either.
    let mut acc: u128 = 1;
    for i in 1..=k_small {
        acc = acc * (n - k_small + i) as u128 / i as u128;
        if acc > u64::MAX as u128 {
            return Err(GsmError::BinomialOverflow { n, k });
        }
    }
    Ok(acc as u64)
}

/// A strictly increasing tuple of non-negative indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Combination(Vec<usize>);

impl Combination {
    pub fn new(elements: Vec<usize>) -> Result<Self> {
        if elements.is_empty() {
            return Err(GsmError::EmptyCombination);
        }
        if elements.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GsmError::NotIncreasing(elements));
        }
        Ok(Combination(elements))
    }

    /// Builds a combination from 1-based labels, as printed for humans.
    pub fn from_one_based(labels: &[usize]) -> Result<Self> {
        let zero_based = labels
            .iter()
            .map(|&l| {
                l.checked_sub(1)
                    .ok_or_else(|| GsmError::InvalidConfig("antenna labels start at 1".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero_based)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest element.
    pub fn last(&self) -> usize {
        *self.0.last().expect("combination is non-empty")
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|&i| i + 1).collect()
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl fmt::Display for Combination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Combinadic of `n` with `r` elements.
///
/// Each element is the largest integer whose binomial still fits in what is
/// left of `n`, scanning from the `r`-th element down to the first.
pub fn unrank(n: u64, r: usize) -> Combination {
    assert!(r >= 1, "combinations have at least one element");

    // `binomial(c, i)` as a comparable value; overflow means "larger than any u64".
    let coeff = |c: usize, i: usize| binomial(c, i).unwrap_or(u64::MAX);
    let fits = |c: usize, i: usize, rem: u64| match binomial(c, i) {
        Ok(b) => b <= rem,
        Err(_) => false,
    };

    let mut out = vec![0usize; r];
    let mut remaining = n;

    // The top element has no upper neighbour: grow until the next step overshoots.
    let mut top = r - 1;
    while fits(top + 1, r, remaining) {
        top += 1;
    }
    out[r - 1] = top;
    remaining -= coeff(top, r);

    for i in (1..r).rev() {
        // C(c, i) is increasing in c for c >= i - 1; descend from just below
        // the element above.
        let mut c = out[i] - 1;
        while !fits(c, i, remaining) {
            c -= 1;
        }
        out[i - 1] = c;
        remaining -= coeff(c, i);
    }
    debug_assert_eq!(remaining, 0);
    Combination(out)
}

/// Combinadic of `n` with `r` elements, checked against `C(n_total, r)`.
pub fn unrank_bounded(n: u64, r: usize, n_total: usize) -> Result<Combination> {
    let count = binomial(n_total, r)?;
    if r == 0 || r > n_total {
        return Err(GsmError::InvalidConfig(format!(
            "need 1 <= R <= N, got R={r}, N={n_total}"
        )));
    }
    if n >= count {
        return Err(GsmError::PatternNotAllowed { rank: n, allowed: count });
    }
    Ok(unrank(n, r))
}

/// Inverse of [`unrank`]: `sum_i C(c_i, i)`.
pub fn rank(c: &Combination) -> Result<u64> {
    let mut total: u64 = 0;
    for (i, &ci) in c.as_slice().iter().enumerate() {
        let term = binomial(ci, i + 1).map_err(|_| GsmError::RankOverflow)?;
        total = total.checked_add(term).ok_or(GsmError::RankOverflow)?;
    }
    Ok(total)
}

/// Convenience for raw slices; rejects tuples that are not strictly increasing.
pub fn rank_slice(elements: &[usize]) -> Result<u64> {
    rank(&Combination::new(elements.to_vec())?)
}

/// Ordered bits, most significant first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitBlock(Vec<bool>);

impl BitBlock {
    pub fn new(bits: Vec<bool>) -> Self {
        BitBlock(bits)
    }

    pub fn zeros(len: usize) -> Self {
        BitBlock(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn split_at(&self, mid: usize) -> (BitBlock, BitBlock) {
        let (a, b) = self.0.split_at(mid);
        (BitBlock(a.to_vec()), BitBlock(b.to_vec()))
    }

    pub fn concat(blocks: &[BitBlock]) -> BitBlock {
        BitBlock(blocks.iter().flat_map(|b| b.0.iter().copied()).collect())
    }

    /// Number of positions where the two blocks differ.
    pub fn hamming(&self, other: &BitBlock) -> usize {
        assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

impl From<Vec<bool>> for BitBlock {
    fn from(bits: Vec<bool>) -> Self {
        BitBlock(bits)
    }
}

impl fmt::Display for BitBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitBlock {
    type Err = GsmError;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !c.is_whitespace() && *c != ',' && *c != '_')
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(GsmError::BadBit(other)),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitBlock)
    }
}

/// Integer value of a bit block; the first bit has weight `2^(len-1)`.
pub fn bits_to_int(bits: &BitBlock) -> Result<u64> {
    if bits.len() > 64 {
        return Err(GsmError::TooManyBits(bits.len()));
    }
    Ok(bits.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64))
}

/// `width`-bit representation of `n`, most significant bit first.
pub fn int_to_bits(n: u64, width: usize) -> Result<BitBlock> {
    if width > 64 {
        return Err(GsmError::TooManyBits(width));
    }
    if width < 64 && n >> width != 0 {
        return Err(GsmError::WidthTooSmall { value: n, width });
    }
    Ok(BitBlock((0..width).rev().map(|k| (n >> k) & 1 == 1).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Pascal's triangle in u128, independent of the multiplicative route.
    fn pascal(n_max: usize) -> Vec<Vec<u128>> {
        let mut rows = vec![vec![1u128]];
        for n in 1..=n_max {
            let prev = &rows[n - 1];
            let mut row = vec![1u128; n + 1];
            for k in 1..n {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        rows
    }

    fn bits(s: &str) -> BitBlock {
        s.parse().unwrap()
    }

    #[test]
    fn binomial_small_and_degenerate() {
        assert_eq!(binomial(4, 2).unwrap(), 6);
        assert_eq!(binomial(3, 5).unwrap(), 0);
        assert_eq!(binomial(0, 0).unwrap(), 1);
        assert_eq!(binomial(10, 10).unwrap(), 1);
    }

    #[test]
    fn binomial_64_choose_32_matches_pascal() {
        let table = pascal(64);
        let exact = binomial(64, 32).unwrap();
        assert_eq!(exact as u128, table[64][32]);
        assert_eq!(exact, 1_832_624_140_942_590_534);
        // ~1.83e18 ~ 2^60
        assert!((exact as f64 / 1.83e18 - 1.0).abs() < 5e-3);
        assert_eq!((exact as f64).log2().floor() as u32, 60);
        assert!(exact < 1u64 << 63);
    }

    #[test]
    fn binomial_pascal_rule_up_to_64() {
        let table = pascal(64);
        for n in 1..=64 {
            for k in 1..=n {
                let lhs = binomial(n, k).unwrap();
                let rhs = binomial(n - 1, k - 1).unwrap() + binomial(n - 1, k).unwrap();
                assert_eq!(lhs, rhs, "C({n},{k})");
                assert_eq!(lhs as u128, table[n][k]);
            }
        }
    }

    #[test]
    fn binomial_overflow_is_reported() {
        assert!(matches!(
            binomial(80, 40),
            Err(GsmError::BinomialOverflow { n: 80, k: 40 })
        ));
        assert!(binomial(67, 33).is_ok());
        assert!(binomial(68, 34).is_err());
        assert!(binomial(200, 2).is_ok());
    }

    #[test]
    fn unrank_worked_examples() {
        assert_eq!(unrank(19, 4).as_slice(), &[0, 1, 4, 6]);
        assert_eq!(unrank(0, 3).as_slice(), &[0, 1, 2]);
        assert_eq!(unrank(3, 3).as_slice(), &[1, 2, 3]);
    }

    #[test]
    fn four_choose_three_table() {
        let rows = [
            ("00", 0, [0, 1, 2], [1, 2, 3]),
            ("01", 1, [0, 1, 3], [1, 2, 4]),
            ("10", 2, [0, 2, 3], [1, 3, 4]),
            ("11", 3, [1, 2, 3], [2, 3, 4]),
        ];
        for (b, g, comb, labels) in rows {
            let value = bits_to_int(&bits(b)).unwrap();
            assert_eq!(value, g);
            let c = unrank_bounded(value, 3, 4).unwrap();
            assert_eq!(c.as_slice(), &comb);
            assert_eq!(c.one_based(), labels.to_vec());
        }
    }

    #[test]
    fn rank_examples() {
        let c = Combination::new(vec![2, 3, 4, 5]).unwrap();
        assert_eq!(rank(&c).unwrap(), 14);
        assert_eq!(rank_slice(&[0, 1, 2]).unwrap(), 0);
        assert!(matches!(rank_slice(&[3, 1]), Err(GsmError::NotIncreasing(_))));
        assert!(matches!(rank_slice(&[2, 2]), Err(GsmError::NotIncreasing(_))));
        assert!(Combination::new(vec![]).is_err());
    }

    #[test]
    fn exhaustive_bijection_up_to_twelve() {
        for n in 1..=12usize {
            for r in 1..=n {
                let count = binomial(n, r).unwrap();
                let mut prev: Option<Combination> = None;
                for k in 0..count {
                    let c = unrank(k, r);
                    assert_eq!(c.len(), r);
                    assert!(c.last() < n, "N={n} R={r} k={k}: {c}");
                    assert_eq!(rank(&c).unwrap(), k);
                    if let Some(p) = prev {
                        // colex: compare reversed tuples
                        let a: Vec<_> = p.as_slice().iter().rev().collect();
                        let b: Vec<_> = c.as_slice().iter().rev().collect();
                        assert!(a < b);
                    }
                    prev = Some(c);
                }
                assert!(unrank_bounded(count, r, n).is_err());
            }
        }
    }

    #[test]
    fn large_ranks_round_trip() {
        let top = binomial(64, 32).unwrap() - 1;
        let c = unrank(top, 32);
        assert_eq!(c.as_slice(), (32..64).collect::<Vec<_>>().as_slice());
        assert_eq!(rank(&c).unwrap(), top);
    }

    #[test]
    fn bit_conversions() {
        assert_eq!(bits_to_int(&bits("0010011")).unwrap(), 19);
        assert_eq!(int_to_bits(14, 7).unwrap(), bits("0001110"));
        assert_eq!(bits_to_int(&BitBlock::zeros(9)).unwrap(), 0);
        assert_eq!(int_to_bits(0, 0).unwrap().len(), 0);
        assert!(matches!(
            int_to_bits(8, 3),
            Err(GsmError::WidthTooSmall { value: 8, width: 3 })
        ));
        assert_eq!(int_to_bits(u64::MAX, 64).unwrap().len(), 64);
        assert!("01x".parse::<BitBlock>().is_err());
    }

    proptest! {
        #[test]
        fn bits_round_trip(n in any::<u64>(), extra in 0usize..8) {
            let width = (64 - n.leading_zeros() as usize + extra).min(64);
            let b = int_to_bits(n, width).unwrap();
            prop_assert_eq!(bits_to_int(&b).unwrap(), n);
        }

        #[test]
        fn unrank_rank_round_trip_large(r in 1usize..=32, frac in 0.0f64..1.0) {
            let count = binomial(64, r).unwrap();
            let k = ((count - 1) as f64 * frac) as u64;
            let c = unrank(k, r);
            prop_assert!(c.last() < 64);
            prop_assert_eq!(rank(&c).unwrap(), k);
        }
    }
}
