//! Packed binary vectors and the word-parallel kernels behind the
//! stochastic decoders.
//!
//! Position `p` of a vector lives in bit `p % 64` of word `p / 64`; bits past
//! the logical length are always zero.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::{Error, Result};

#[inline]
pub fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

/// Mask of the valid bits in the last word of a `len`-bit vector.
#[inline]
pub fn tail_mask(len: usize) -> u64 {
    match len % 64 {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

/// Number of set bits in positions `start..end`.
pub fn count_ones_range(words: &[u64], start: usize, end: usize) -> u32 {
    if start >= end {
        return 0;
    }
    let (w0, w1) = (start / 64, (end - 1) / 64);
    let lo = u64::MAX << (start % 64);
    let hi = tail_mask(end);
    if w0 == w1 {
        return (words[w0] & lo & hi).count_ones();
    }
    let mut total = (words[w0] & lo).count_ones() + (words[w1] & hi).count_ones();
    for w in &words[w0 + 1..w1] {
        total += w.count_ones();
    }
    total
}

/// Latch one word of the equality operator.
///
/// `set` marks positions where every input is 1, `reset` positions where
/// every input is 0 (the two are disjoint). Each output bit copies the most
/// recent event at or below it, or `carry` when the word has none yet.
#[inline]
pub fn latch_word(set: u64, reset: u64, carry: bool) -> u64 {
    debug_assert_eq!(set & reset, 0);
    let mut event = set | reset;
    let mut value = set;
    let mut shift = 1;
    while shift < 64 {
        value |= !event & (value << shift);
        event |= event << shift;
        shift <<= 1;
    }
    if carry {
        value | !event
    } else {
        value
    }
}

/// Equality-operator scan over packed `set`/`reset` masks into `out`.
/// Returns the final state.
pub fn latch(set: &[u64], reset: &[u64], init: bool, out: &mut [u64]) -> bool {
    let mut carry = init;
    for ((o, &s), &r) in out.iter_mut().zip(set).zip(reset) {
        *o = latch_word(s, r, carry);
        carry = (*o >> 63) & 1 == 1;
    }
    carry
}

/// 64 independent Bernoulli lanes, each 1 with probability
/// `threshold / 2^64`.
///
/// Lanes compare a uniform 64-bit integer against `threshold` one bit at a
/// time from the top and stop as soon as every lane is decided, which takes
/// about eight draws per word regardless of the precision of `threshold`.
#[inline]
pub fn bernoulli_word<R: RngCore + ?Sized>(threshold: u64, rng: &mut R) -> u64 {
    let mut undecided = u64::MAX;
    let mut ones = 0u64;
    let mut bit = 63u32;
    loop {
        let r = rng.next_u64();
        if (threshold >> bit) & 1 == 1 {
            ones |= undecided & !r;
            undecided &= r;
        } else {
            undecided &= !r;
        }
        if undecided == 0 || bit == 0 {
            // Lanes still undecided drew exactly `threshold`: not below it.
            return ones;
        }
        bit -= 1;
    }
}

/// Bernoulli sampler over packed words with an exactly representable rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitRate {
    Zero,
    One,
    Threshold(u64),
}

impl BitRate {
    /// Rate `p`, quantized down to a multiple of `2^-64`.
    pub fn from_prob(p: f64) -> Self {
        if p.is_nan() || p <= 0.0 {
            BitRate::Zero
        } else if p >= 1.0 {
            BitRate::One
        } else {
            // 2^64 * p < 2^64 for p < 1, exact power-of-two scaling.
            let t = (p * 18_446_744_073_709_551_616.0) as u64;
            if t == 0 {
                BitRate::Zero
            } else {
                BitRate::Threshold(t)
            }
        }
    }

    /// Rate `count / total`, exact up to the floor of `2^64 * count / total`.
    pub fn from_ratio(count: u64, total: u64) -> Self {
        assert!(total > 0 && count <= total);
        if count == 0 {
            BitRate::Zero
        } else if count == total {
            BitRate::One
        } else {
            BitRate::Threshold((((count as u128) << 64) / total as u128) as u64)
        }
    }

    pub fn fill<R: RngCore + ?Sized>(self, out: &mut [u64], len: usize, rng: &mut R) {
        debug_assert_eq!(out.len(), words_for(len));
        match self {
            BitRate::Zero => out.fill(0),
            BitRate::One => out.fill(u64::MAX),
            BitRate::Threshold(t) => out.iter_mut().for_each(|w| *w = bernoulli_word(t, rng)),
        }
        if let Some(last) = out.last_mut() {
            *last &= tail_mask(len);
        }
    }
}

/// Fixed-length packed binary vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitMessage {
    words: Vec<u64>,
    len: usize,
}

impl BitMessage {
    pub fn zeros(len: usize) -> Self {
        Self { words: vec![0; words_for(len)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = Self { words: vec![u64::MAX; words_for(len)], len };
        m.mask_tail();
        m
    }

    pub fn from_bits<B: Copy + Into<u8>>(bits: &[B]) -> Self {
        let mut m = Self::zeros(bits.len());
        for (p, &b) in bits.iter().enumerate() {
            if b.into() != 0 {
                m.words[p / 64] |= 1 << (p % 64);
            }
        }
        m
    }

    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self> {
        if words.len() != words_for(len) {
            return Err(Error::LengthMismatch { expected: words_for(len), actual: words.len() });
        }
        let mut m = Self { words, len };
        m.mask_tail();
        Ok(m)
    }

    fn mask_tail(&mut self) {
        let mask = tail_mask(self.len);
        if let Some(last) = self.words.last_mut() {
            *last &= mask;
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, p: usize) -> bool {
        assert!(p < self.len);
        (self.words[p / 64] >> (p % 64)) & 1 == 1
    }

    pub fn set(&mut self, p: usize, bit: bool) {
        assert!(p < self.len);
        let mask = 1u64 << (p % 64);
        if bit {
            self.words[p / 64] |= mask;
        } else {
            self.words[p / 64] &= !mask;
        }
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn to_bits(&self) -> Vec<u8> {
        (0..self.len).map(|p| self.get(p) as u8).collect()
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Ones in the second half, positions `K..2K` (in the 1-based numbering
    /// of the algorithm, `K+1..=2K`).
    pub fn tail_count(&self) -> u32 {
        count_ones_range(&self.words, self.len / 2, self.len)
    }
}

/// Elementwise modulo-two sum. An empty list is not allowed since the
/// length would be unknown; use [`xor_combine_len`] for that case.
pub fn xor_combine(messages: &[&BitMessage]) -> Result<BitMessage> {
    let len = messages.first().map(|m| m.len).ok_or(Error::EmptyInput)?;
    xor_combine_len(messages, len)
}

/// Elementwise modulo-two sum of `len`-bit messages; empty input gives the
/// all-zero vector.
pub fn xor_combine_len(messages: &[&BitMessage], len: usize) -> Result<BitMessage> {
    let mut out = BitMessage::zeros(len);
    for m in messages {
        check_len(m, len)?;
        for (o, w) in out.words.iter_mut().zip(&m.words) {
            *o ^= w;
        }
    }
    Ok(out)
}

/// Equality operator with the initial state drawn as a fair coin.
pub fn equality_combine<R: Rng + ?Sized>(messages: &[&BitMessage], rng: &mut R) -> Result<BitMessage> {
    let init = rng.random::<bool>();
    equality_combine_from(messages, init)
}

/// Equality operator with a given initial state `Y(0)`.
pub fn equality_combine_from(messages: &[&BitMessage], init: bool) -> Result<BitMessage> {
    let len = messages.first().map(|m| m.len).ok_or(Error::EmptyInput)?;
    let mut set = vec![u64::MAX; words_for(len)];
    let mut reset = vec![u64::MAX; words_for(len)];
    for m in messages {
        check_len(m, len)?;
        for ((s, r), w) in set.iter_mut().zip(reset.iter_mut()).zip(&m.words) {
            *s &= w;
            *r &= !w;
        }
    }
    if let Some(r) = reset.last_mut() {
        *r &= tail_mask(len);
    }
    let mut out = BitMessage::zeros(len);
    latch(&set, &reset, init, &mut out.words);
    out.mask_tail();
    Ok(out)
}

/// Fresh `2K`-bit vector of i.i.d. draws from the multiset of the last `K`
/// entries of `aux`, i.e. Bernoulli(`c / K`) with `c` the tail count.
pub fn resample_tail<R: RngCore + ?Sized>(aux: &BitMessage, rng: &mut R) -> Result<BitMessage> {
    if aux.len == 0 || !aux.len.is_multiple_of(2) {
        return Err(Error::InvalidParameter("resample_tail needs an even, nonzero length"));
    }
    let k = aux.len / 2;
    let rate = BitRate::from_ratio(aux.tail_count() as u64, k as u64);
    let mut out = BitMessage::zeros(aux.len);
    rate.fill(&mut out.words, aux.len, rng);
    Ok(out)
}

/// `2K` i.i.d. Bernoulli(`mu`) bits.
pub fn sample_channel_message<R: RngCore + ?Sized>(mu: f64, k: usize, rng: &mut R) -> Result<BitMessage> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidProbability(mu));
    }
    let mut out = BitMessage::zeros(2 * k);
    BitRate::from_prob(mu).fill(&mut out.words, 2 * k, rng);
    Ok(out)
}

fn check_len(m: &BitMessage, len: usize) -> Result<()> {
    if m.len != len {
        return Err(Error::LengthMismatch { expected: len, actual: m.len });
    }
    Ok(())
}
