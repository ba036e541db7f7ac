//! Bit-serial stochastic decoding with edge memories.
//!
//! One bit travels on every edge per decoding cycle. Checks send the XOR of
//! their other inputs. A variable-to-check edge outputs the common value when
//! the channel bit and its other check bits agree (a regenerative bit, which
//! is also pushed into the edge memory) and otherwise a uniformly chosen bit
//! from the memory. Hard decisions come from counting the ones of each
//! variable's full-neighborhood equality state over a trailing window.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::bits::{words_for, BitRate};
use crate::channel::LikelihoodVector;
use crate::seed::{self, StreamRng, EDGE_STREAM, VAR_STREAM};
use crate::sp::DecodeResult;
use crate::FactorGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SdConfig {
    pub cycles: usize,
    pub em_length: usize,
    pub seed: u64,
    /// Marks NDS-scaled input likelihoods; see `MbsdConfig::nds_enabled`.
    pub nds_enabled: bool,
    /// Trailing cycles counted for the hard decision.
    pub output_window: usize,
    /// Stop at the first cycle whose hard decision satisfies every check.
    pub early_stop: bool,
}

impl SdConfig {
    /// Config with the decision window set to half the cycle budget.
    pub fn new(cycles: usize, em_length: usize, seed: u64) -> Self {
        assert!(cycles >= 1 && em_length >= 1);
        Self { cycles, em_length, seed, nds_enabled: false, output_window: (cycles / 2).max(1), early_stop: true }
    }

    fn validate(&self) {
        assert!(self.cycles >= 1, "cycles must be positive");
        assert!(self.em_length >= 1, "edge memory must hold at least one bit");
        assert!(self.output_window >= 1 && self.output_window <= self.cycles, "window must fit in the cycle budget");
    }
}

/// Ring buffer of the most recent regenerative bits on one edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMemory {
    buf: Vec<u8>,
    capacity: usize,
    head: usize,
    output: u8,
}

impl EdgeMemory {
    pub fn new(capacity: usize, initial_output: u8) -> Self {
        assert!(capacity >= 1);
        Self { buf: Vec::with_capacity(capacity), capacity, head: 0, output: initial_output & 1 }
    }

    #[inline]
    pub fn output(&self) -> u8 {
        self.output
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    /// Advances one cycle. `agreed` carries the common input value when all
    /// inputs agree.
    #[inline]
    pub fn update<R: Rng + ?Sized>(&mut self, agreed: Option<u8>, rng: &mut R) -> u8 {
        match agreed {
            Some(b) => {
                if self.buf.len() < self.capacity {
                    self.buf.push(b);
                } else {
                    self.buf[self.head] = b;
                    self.head = (self.head + 1) % self.capacity;
                }
                self.output = b;
            }
            None => {
                if !self.buf.is_empty() {
                    self.output = self.buf[rng.random_range(0..self.buf.len())];
                }
            }
        }
        self.output
    }
}

/// Per-variable channel bit source, refilled 64 cycles at a time.
struct ChannelBits {
    rate: BitRate,
    rng: StreamRng,
    word: u64,
    pos: u32,
}

impl ChannelBits {
    fn next(&mut self) -> u8 {
        if self.pos == 64 {
            let mut w = [0u64];
            self.rate.fill(&mut w, 64, &mut self.rng);
            self.word = w[0];
            self.pos = 0;
        }
        let b = (self.word >> self.pos) as u8 & 1;
        self.pos += 1;
        b
    }
}

/// Sliding count of ones over the last `window` pushes.
struct WindowCounter {
    bits: Vec<u64>,
    window: usize,
    pos: usize,
    filled: usize,
    ones: usize,
}

impl WindowCounter {
    fn new(window: usize) -> Self {
        Self { bits: vec![0; words_for(window)], window, pos: 0, filled: 0, ones: 0 }
    }

    #[inline]
    fn push(&mut self, b: u8) {
        let (w, m) = (self.pos / 64, 1u64 << (self.pos % 64));
        if self.bits[w] & m != 0 {
            self.ones -= 1;
        }
        if b != 0 {
            self.bits[w] |= m;
            self.ones += 1;
        } else {
            self.bits[w] &= !m;
        }
        self.pos = (self.pos + 1) % self.window;
        self.filled = (self.filled + 1).min(self.window);
    }

    #[inline]
    fn hard(&self) -> u8 {
        (2 * self.ones > self.filled) as u8
    }

    fn fraction(&self) -> f64 {
        if self.filled == 0 {
            0.0
        } else {
            self.ones as f64 / self.filled as f64
        }
    }
}

pub fn decode(graph: &FactorGraph, llh: &LikelihoodVector, cfg: &SdConfig) -> DecodeResult {
    cfg.validate();
    assert_eq!(llh.len(), graph.n_vars(), "likelihood length must match the graph");
    let n = graph.n_vars();
    let n_edges = graph.n_edges();

    let mut chan: Vec<ChannelBits> = llh
        .probs()
        .iter()
        .enumerate()
        .map(|(i, &p)| ChannelBits {
            rate: BitRate::from_prob(p),
            rng: seed::stream(seed::derive(cfg.seed, VAR_STREAM, i as u64)),
            word: 0,
            pos: 64,
        })
        .collect();
    let mut edge_rngs: Vec<StreamRng> =
        (0..n_edges).map(|e| seed::stream(seed::derive(cfg.seed, EDGE_STREAM, e as u64))).collect();

    let mut v2c = vec![0u8; n_edges];
    let mut c2v = vec![0u8; n_edges];
    let mut memories = Vec::with_capacity(n_edges);
    let mut state = vec![0u8; n];
    for i in 0..n {
        let b = chan[i].next();
        state[i] = b;
        for e in graph.var_edges(i) {
            v2c[e] = b;
        }
    }
    for &b in &v2c {
        memories.push(EdgeMemory::new(cfg.em_length, b));
    }
    let mut windows: Vec<WindowCounter> = (0..n).map(|_| WindowCounter::new(cfg.output_window)).collect();
    let mut hard = vec![0u8; n];
    let mut satisfied = false;
    let mut cycles_run = 0;

    for cycle in 1..=cfg.cycles {
        for a in 0..graph.n_chks() {
            let slots = graph.chk_slots(a);
            let total = slots.clone().fold(0u8, |acc, s| acc ^ v2c[graph.slot_edge(s)]);
            for s in slots {
                c2v[s] = total ^ v2c[graph.slot_edge(s)];
            }
        }

        for i in 0..n {
            let x = chan[i].next();
            let edges = graph.var_edges(i);
            let deg = edges.len();
            let ones: usize = edges.clone().map(|e| c2v[graph.edge_slot(e)] as usize).sum();
            let all = ones + x as usize;
            if all == deg + 1 {
                state[i] = 1;
            } else if all == 0 {
                state[i] = 0;
            }
            windows[i].push(state[i]);
            hard[i] = windows[i].hard();

            for e in edges {
                let others = all - c2v[graph.edge_slot(e)] as usize;
                let agreed = if others == deg {
                    Some(1)
                } else if others == 0 {
                    Some(0)
                } else {
                    None
                };
                v2c[e] = memories[e].update(agreed, &mut edge_rngs[e]);
            }
        }
        cycles_run = cycle;
        if cfg.early_stop {
            satisfied = graph.satisfies(&hard);
            if satisfied {
                break;
            }
        }
    }
    if !cfg.early_stop {
        satisfied = graph.satisfies(&hard);
    }

    DecodeResult {
        hard_bits: hard,
        marginals: windows.iter().map(WindowCounter::fraction).collect(),
        iterations_run: cycles_run,
        syndrome_satisfied: satisfied,
        converged: satisfied,
    }
}
