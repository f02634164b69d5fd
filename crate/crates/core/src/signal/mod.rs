//! GSM configuration, activation patterns and the bits <-> transmit-vector codec.
//!
//! Bit layout of one channel use: the first `eta_a` bits select the
//! activation pattern (by combinadic rank), then `bits_per_symbol` bits per
//! active antenna in ascending antenna order select the symbols.

mod alphabet;

pub use alphabet::Alphabet;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::combinadics::{self, binomial, bits_to_int, int_to_bits, BitBlock, Combination};
use crate::error::{GsmError, Result};

/// Default cap on `|G|` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 20;

/// Largest pattern set materialized by [`pattern_set`].
pub const PATTERN_SET_CAP: u64 = 1 << 24;

/// System parameters of an `(N, M, R)` GSM link.
#[derive(Debug, Clone, PartialEq)]
pub struct GsmConfig {
    n: usize,
    m: usize,
    r: usize,
    alphabet: Alphabet,
    sigma2_x: f64,
    sigma2: f64,
    eta_a: usize,
}

impl GsmConfig {
    /// `n` transmit antennas, `m` receive antennas, `r` RF chains.
    ///
    /// Powers default to `sigma2_x = 1` and `sigma2 = 1` (0 dB).
    pub fn new(n: usize, m: usize, r: usize, alphabet: Alphabet) -> Result<Self> {
        if r == 0 || r > n {
            return Err(GsmError::InvalidConfig(format!(
                "need 1 <= R <= N, got N={n}, R={r}"
            )));
        }
        if m == 0 {
            return Err(GsmError::InvalidConfig("need M >= 1".into()));
        }
        let patterns = binomial(n, r)?;
        let eta_a = 63 - patterns.leading_zeros() as usize;
        Ok(GsmConfig {
            n,
            m,
            r,
            alphabet,
            sigma2_x: 1.0,
            sigma2: 1.0,
            eta_a,
        })
    }

    pub fn with_powers(mut self, sigma2_x: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2_x >= 0.0 && sigma2 >= 0.0 && sigma2_x.is_finite() && sigma2.is_finite()) {
            return Err(GsmError::InvalidConfig(format!(
                "powers must be finite and non-negative (sigma2_x={sigma2_x}, sigma2={sigma2})"
            )));
        }
        self.sigma2_x = sigma2_x;
        self.sigma2 = sigma2;
        Ok(self)
    }

    /// Sets the noise variance so that `sigma2_x / sigma2` equals the given SNR.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.sigma2 = self.sigma2_x / 10f64.powf(snr_db / 10.0);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn r(&self) -> usize {
        self.r
    }
    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }
    pub fn sigma2_x(&self) -> f64 {
        self.sigma2_x
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `sigma2_x / sigma2` in dB.
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.sigma2_x / self.sigma2).log10()
    }

    /// Antenna-index bits, `floor(log2 C(N, R))`.
    pub fn eta_a(&self) -> usize {
        self.eta_a
    }

    /// Symbol bits, `R * log2 |A|`.
    pub fn symbol_bits(&self) -> usize {
        self.r * self.alphabet.bits_per_symbol()
    }

    /// Total bits per channel use.
    pub fn eta(&self) -> usize {
        spectral_efficiency(self)
    }

    /// Size `L = 2^eta_a` of the allowed pattern set.
    pub fn num_patterns(&self) -> u64 {
        1u64 << self.eta_a
    }

    /// Amplitude applied to unit-energy symbols, `sqrt(sigma2_x / R)`.
    pub fn symbol_scale(&self) -> f64 {
        (self.sigma2_x / self.r as f64).sqrt()
    }

    /// `|G| = L * |A|^R`, or `None` when it does not fit in 64 bits.
    pub fn signal_set_size(&self) -> Option<u64> {
        let per_pattern = (self.alphabet.size() as u64).checked_pow(self.r as u32)?;
        self.num_patterns().checked_mul(per_pattern)
    }
}

/// Bits per channel use: `R * log2|A| + floor(log2 C(N, R))`.
pub fn spectral_efficiency(cfg: &GsmConfig) -> usize {
    cfg.symbol_bits() + cfg.eta_a
}

/// An allowed set of `R` active antennas together with its combinadic rank.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    indices: Combination,
    rank: u64,
}

impl ActivationPattern {
    pub fn from_rank(rank: u64, cfg: &GsmConfig) -> Result<Self> {
        if rank >= cfg.num_patterns() {
            return Err(GsmError::PatternNotAllowed {
                rank,
                allowed: cfg.num_patterns(),
            });
        }
        Ok(ActivationPattern {
            indices: combinadics::unrank(rank, cfg.r),
            rank,
        })
    }

    /// Validates 0-based indices against `cfg`; patterns outside the allowed
    /// set yield [`GsmError::PatternNotAllowed`].
    pub fn from_indices(indices: Combination, cfg: &GsmConfig) -> Result<Self> {
        if indices.len() != cfg.r {
            return Err(GsmError::WrongLength {
                expected: cfg.r,
                got: indices.len(),
            });
        }
        if indices.last() >= cfg.n {
            return Err(GsmError::IndexOutOfRange {
                index: indices.last(),
                n: cfg.n,
            });
        }
        let rank = combinadics::rank(&indices)?;
        if rank >= cfg.num_patterns() {
            return Err(GsmError::PatternNotAllowed {
                rank,
                allowed: cfg.num_patterns(),
            });
        }
        Ok(ActivationPattern { indices, rank })
    }

    pub fn indices(&self) -> &[usize] {
        self.indices.as_slice()
    }

    pub fn combination(&self) -> &Combination {
        &self.indices
    }

    pub fn rank(&self) -> u64 {
        self.rank
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.indices.one_based()
    }

    pub fn contains(&self, antenna: usize) -> bool {
        self.indices.as_slice().binary_search(&antenna).is_ok()
    }
}

/// The `N x R` 0/1 matrix `A` with `A[I_r, r] = 1`.
pub fn activation_matrix(p: &ActivationPattern, n: usize) -> DMatrix<f64> {
    let r = p.indices().len();
    let mut a = DMatrix::zeros(n, r);
    for (col, &row) in p.indices().iter().enumerate() {
        a[(row, col)] = 1.0;
    }
    a
}

/// All allowed patterns, in rank order `0..L`.
pub fn pattern_set(cfg: &GsmConfig) -> Result<Vec<ActivationPattern>> {
    let l = cfg.num_patterns();
    if l > PATTERN_SET_CAP {
        return Err(GsmError::Infeasible(format!(
            "pattern set of size {l} exceeds {PATTERN_SET_CAP}"
        )));
    }
    (0..l).map(|k| ActivationPattern::from_rank(k, cfg)).collect()
}

/// Every `R`-subset of the `N` antennas (all `C(N, R)`), in colex order.
pub fn full_pattern_set(n: usize, r: usize) -> Result<Vec<Combination>> {
    let count = binomial(n, r)?;
    if count > PATTERN_SET_CAP {
        return Err(GsmError::Infeasible(format!(
            "full pattern set of size {count} exceeds {PATTERN_SET_CAP}"
        )));
    }
    Ok((0..count).map(|k| combinadics::unrank(k, r)).collect())
}

/// A length-`N` transmit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GsmVector(Vec<Complex64>);

impl GsmVector {
    pub fn new(values: Vec<Complex64>) -> Self {
        GsmVector(values)
    }

    /// Places `values` on the antennas of `pattern`, zeros elsewhere.
    pub fn from_parts(pattern: &ActivationPattern, values: &[Complex64], n: usize) -> Self {
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (&i, &v) in pattern.indices().iter().zip(values) {
            x[i] = v;
        }
        GsmVector(x)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm_sqr() > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_dvector(&self) -> nalgebra::DVector<Complex64> {
        nalgebra::DVector::from_column_slice(&self.0)
    }
}

/// Splits a frame of `eta` bits into its pattern and per-antenna symbol labels.
pub fn bits_to_parts(bits: &BitBlock, cfg: &GsmConfig) -> Result<(ActivationPattern, Vec<usize>)> {
    if bits.len() != cfg.eta() {
        return Err(GsmError::WrongLength {
            expected: cfg.eta(),
            got: bits.len(),
        });
    }
    let b = cfg.alphabet.bits_per_symbol();
    let raw = bits.as_slice();
    let antenna_bits = BitBlock::new(raw[..cfg.eta_a].to_vec());
    let pattern = ActivationPattern::from_rank(bits_to_int(&antenna_bits)?, cfg)?;
    let labels = raw[cfg.eta_a..]
        .chunks(b)
        .map(|chunk| chunk.iter().fold(0usize, |acc, &bit| (acc << 1) | bit as usize))
        .collect();
    Ok((pattern, labels))
}

/// Inverse of [`bits_to_parts`].
pub fn parts_to_bits(pattern: &ActivationPattern, labels: &[usize], cfg: &GsmConfig) -> BitBlock {
    let b = cfg.alphabet.bits_per_symbol();
    let mut out = Vec::with_capacity(cfg.eta());
    out.extend_from_slice(
        int_to_bits(pattern.rank(), cfg.eta_a)
            .expect("rank < 2^eta_a")
            .as_slice(),
    );
    for &label in labels {
        out.extend((0..b).rev().map(|k| (label >> k) & 1 == 1));
    }
    BitBlock::new(out)
}

/// Maps `eta` bits to the transmit vector `x = A s`, symbols scaled by `sqrt(sigma2_x / R)`.
pub fn encode(bits: &BitBlock, cfg: &GsmConfig) -> Result<GsmVector> {
    let (pattern, labels) = bits_to_parts(bits, cfg)?;
    let scale = cfg.symbol_scale();
    let values: Vec<Complex64> = labels
        .iter()
        .map(|&l| cfg.alphabet.point(l) * scale)
        .collect();
    Ok(GsmVector::from_parts(&pattern, &values, cfg.n))
}

/// Recovers the bits of a hard transmit vector.
pub fn decode(x: &GsmVector, cfg: &GsmConfig) -> Result<BitBlock> {
    if x.len() != cfg.n {
        return Err(GsmError::WrongLength {
            expected: cfg.n,
            got: x.len(),
        });
    }
    let support = x.support();
    if support.len() != cfg.r {
        return Err(GsmError::BadSupport {
            expected: cfg.r,
            got: support.len(),
        });
    }
    let pattern = ActivationPattern::from_indices(Combination::new(support)?, cfg)?;
    let scale = cfg.symbol_scale();
    let labels = pattern
        .indices()
        .iter()
        .map(|&i| {
            cfg.alphabet
                .label_of(x.as_slice()[i] / scale, 1e-9)
                .ok_or(GsmError::MalformedSymbol { antenna: i })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts_to_bits(&pattern, &labels, cfg))
}

/// Every vector of the signal set, pattern-major, then symbol labels in
/// lexicographic order with the lowest active antenna most significant.
pub fn enumerate_signal_set(cfg: &GsmConfig, cap: u64) -> Result<Vec<GsmVector>> {
    let size = cfg
        .signal_set_size()
        .filter(|&s| s <= cap)
        .ok_or_else(|| {
            GsmError::Infeasible(format!(
                "exhaustive enumeration infeasible: |G| exceeds cap {cap}"
            ))
        })?;
    let scale = cfg.symbol_scale();
    let q = cfg.alphabet.size();
    let mut out = Vec::with_capacity(size as usize);
    for pattern in pattern_set(cfg)? {
        let per = (q as u64).pow(cfg.r as u32);
        for k in 0..per {
            let values: Vec<Complex64> = symbol_labels(k, q, cfg.r)
                .into_iter()
                .map(|l| cfg.alphabet.point(l) * scale)
                .collect();
            out.push(GsmVector::from_parts(&pattern, &values, cfg.n));
        }
    }
    Ok(out)
}

/// Base-`q` digits of `k`, most significant first, `r` digits.
pub(crate) fn symbol_labels(mut k: u64, q: usize, r: usize) -> Vec<usize> {
    let mut labels = vec![0usize; r];
    for slot in labels.iter_mut().rev() {
        *slot = (k % q as u64) as usize;
        k /= q as u64;
    }
    labels
}
