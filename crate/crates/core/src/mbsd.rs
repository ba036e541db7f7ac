//! Markov-based stochastic decoding.
//!
//! Every message is a `2K`-bit vector. Check nodes take the elementwise XOR
//! of their other inputs. A variable node runs the equality operator over
//! its other check messages and a fresh channel message; the resulting bit
//! sequence is a two-state Markov chain whose stationary law is the
//! sum-product message, and the outgoing message is `2K` i.i.d. draws from
//! the chain's second half. Marginals count the ones in the second half of
//! the chain built from all check messages.
//!
//! Only tail counts of the chains are ever needed, so the variable update
//! keeps a single counter per edge and never materialises the chain.
//!
//! Random streams: the channel message `z_i^t` and the marginal chain's
//! initial coin come from `(VAR_STREAM, i, t)`; the edge chain's initial coin
//! and the resampled bits of `z_{i->a}^{t+1}` come from `(EDGE_STREAM, e, t)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::bits::{latch_word, tail_mask, words_for, BitRate};
use crate::channel::LikelihoodVector;
use crate::seed::{self, EDGE_STREAM, VAR_STREAM};
use crate::FactorGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MbsdConfig {
    /// Half the message length.
    pub k: usize,
    /// Iterations `T`.
    pub max_iters: usize,
    pub seed: u64,
    /// Whether the channel likelihoods fed to this decoder are NDS-scaled.
    /// The decoder itself only consumes likelihoods; the flag travels with
    /// the configuration so callers build the right input.
    pub nds_enabled: bool,
    /// Stop once the hard decision satisfies every check.
    pub early_stop: bool,
}

impl MbsdConfig {
    pub fn new(k: usize, max_iters: usize, seed: u64) -> Self {
        assert!(k >= 1 && max_iters >= 1);
        Self { k, max_iters, seed, nds_enabled: false, early_stop: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbsdResult {
    pub k: usize,
    /// Ones in the second half of each variable's marginal chain.
    pub tail_counts: Vec<u32>,
    pub hard_bits: Vec<u8>,
    pub syndrome_satisfied: bool,
    pub iterations_run: usize,
}

impl MbsdResult {
    /// `γ̂_i = count_i / K`.
    pub fn marginal_estimates(&self) -> Vec<f64> {
        self.tail_counts.iter().map(|&c| c as f64 / self.k as f64).collect()
    }

    pub fn bit_errors(&self) -> usize {
        self.hard_bits.iter().filter(|&&b| b != 0).count()
    }
}

/// Precomputed per-word masks of the `K..2K` window.
struct Layout {
    len: usize,
    words: usize,
    tail: Vec<u64>,
}

impl Layout {
    fn new(k: usize) -> Self {
        let len = 2 * k;
        let words = words_for(len);
        let tail = (0..words)
            .map(|w| {
                let lo = w * 64;
                let mut m = 0u64;
                for b in 0..64 {
                    let p = lo + b;
                    if p >= k && p < len {
                        m |= 1 << b;
                    }
                }
                m
            })
            .collect();
        Self { len, words, tail }
    }

    #[inline]
    fn last_mask(&self, w: usize) -> u64 {
        if w + 1 == self.words {
            tail_mask(self.len)
        } else {
            u64::MAX
        }
    }
}

/// Tail count of the equality chain over `chan` and the messages starting
/// at `offsets` in `pool`.
#[inline]
fn chain_tail_count(layout: &Layout, chan: &[u64], pool: &[u64], offsets: &[usize], init: bool) -> u32 {
    let mut carry = init;
    let mut count = 0;
    for w in 0..layout.words {
        let mut set = chan[w];
        let mut reset = !chan[w];
        for &o in offsets {
            set &= pool[o + w];
            reset &= !pool[o + w];
        }
        reset &= layout.last_mask(w);
        let out = latch_word(set, reset, carry);
        carry = out >> 63 == 1;
        count += (out & layout.tail[w]).count_ones();
    }
    count
}

pub fn decode(graph: &FactorGraph, llh: &LikelihoodVector, cfg: &MbsdConfig) -> MbsdResult {
    assert!(cfg.k >= 1 && cfg.max_iters >= 1);
    assert_eq!(llh.len(), graph.n_vars(), "likelihood length must match the graph");
    let layout = Layout::new(cfg.k);
    let w = layout.words;
    let n = graph.n_vars();
    let n_edges = graph.n_edges();
    let rates: Vec<BitRate> = llh.probs().iter().map(|&p| BitRate::from_prob(p)).collect();

    let mut v2c = vec![0u64; n_edges * w];
    let mut c2v = vec![0u64; n_edges * w];
    let mut chan = vec![0u64; w];
    let mut counts = vec![0u32; n];
    let mut hard = vec![0u8; n];

    for i in 0..n {
        let mut rng = seed::stream(seed::derive2(cfg.seed, VAR_STREAM, i as u64, 0));
        rates[i].fill(&mut chan, layout.len, &mut rng);
        for e in graph.var_edges(i) {
            v2c[e * w..(e + 1) * w].copy_from_slice(&chan);
        }
    }

    let mut satisfied = false;
    let mut iterations = 0;
    let mut others: Vec<usize> = Vec::new();
    for t in 0..cfg.max_iters {
        // (a) check nodes
        for a in 0..graph.n_chks() {
            let slots = graph.chk_slots(a);
            for word in 0..w {
                let total = slots.clone().fold(0u64, |acc, s| acc ^ v2c[graph.slot_edge(s) * w + word]);
                for s in slots.clone() {
                    c2v[s * w + word] = total ^ v2c[graph.slot_edge(s) * w + word];
                }
            }
        }

        // (b) and (c) variable nodes
        for i in 0..n {
            let mut vrng = seed::stream(seed::derive2(cfg.seed, VAR_STREAM, i as u64, t as u64 + 1));
            rates[i].fill(&mut chan, layout.len, &mut vrng);

            let edges = graph.var_edges(i);
            others.clear();
            others.extend(edges.clone().map(|e| graph.edge_slot(e) * w));
            let init: bool = vrng.random();
            counts[i] = chain_tail_count(&layout, &chan, &c2v, &others, init);

            for (pos, e) in edges.enumerate() {
                let mut erng = seed::stream(seed::derive2(cfg.seed, EDGE_STREAM, e as u64, t as u64));
                let init: bool = erng.random();
                let excluded = others.swap_remove(pos);
                let c = chain_tail_count(&layout, &chan, &c2v, &others, init);
                others.push(excluded);
                let last = others.len() - 1;
                others.swap(pos, last);
                BitRate::from_ratio(c as u64, cfg.k as u64).fill(&mut v2c[e * w..(e + 1) * w], layout.len, &mut erng);
            }
            hard[i] = (2 * counts[i] as usize > cfg.k) as u8;
        }
        iterations = t + 1;
        satisfied = graph.satisfies(&hard);
        if cfg.early_stop && satisfied {
            break;
        }
    }

    MbsdResult {
        k: cfg.k,
        tail_counts: counts,
        hard_bits: hard,
        syndrome_satisfied: satisfied,
        iterations_run: iterations,
    }
}
