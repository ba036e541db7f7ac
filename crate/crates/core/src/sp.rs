//! Sum-product decoding in the probability domain with a flooding schedule.
//!
//! Messages are probabilities that the bit equals one. Iteration `t`
//! computes check messages from the variable messages of time `t`, then the
//! marginals and variable messages of time `t + 1`.

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::LikelihoodVector;
use crate::{clamp_prob, Error, FactorGraph, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpConfig {
    pub max_iters: usize,
    /// Stop as soon as the hard decision satisfies every check.
    pub early_stop: bool,
    /// Stop once no message moves by `tol` or more.
    pub tol: f64,
}

impl Default for SpConfig {
    fn default() -> Self {
        Self { max_iters: 60, early_stop: true, tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub hard_bits: Vec<u8>,
    pub marginals: Vec<f64>,
    pub iterations_run: usize,
    pub syndrome_satisfied: bool,
    pub converged: bool,
}

impl DecodeResult {
    /// Bit errors against the all-zero codeword.
    pub fn bit_errors(&self) -> usize {
        self.hard_bits.iter().filter(|&&b| b != 0).count()
    }
}

/// `x̂_i = 1` iff `γ_i > 0.5`.
pub fn hard_decision(marginals: &[f64]) -> Vec<u8> {
    marginals.iter().map(|&g| (g > 0.5) as u8).collect()
}

/// Check-to-variable message from the other incoming variable messages.
pub fn check_update(incoming: &[f64]) -> f64 {
    let prod: f64 = incoming.iter().map(|&m| 1.0 - 2.0 * m).product();
    clamp_prob(0.5 - 0.5 * prod)
}

/// Variable-to-check message from the channel and the other incoming check
/// messages, evaluated in the log domain.
pub fn var_update(channel_mu: f64, incoming: &[f64]) -> f64 {
    clamp_prob(log_ratio_prob(channel_mu, incoming))
}

/// Marginal over the full neighbourhood (not clamped).
pub fn marginalize(channel_mu: f64, incoming: &[f64]) -> f64 {
    log_ratio_prob(channel_mu, incoming)
}

fn log_ratio_prob(channel_mu: f64, incoming: &[f64]) -> f64 {
    let mut one = libm::log(channel_mu);
    let mut zero = libm::log1p(-channel_mu);
    for &m in incoming {
        one += libm::log(m);
        zero += libm::log1p(-m);
    }
    logistic(one - zero)
}

/// `1 / (1 + e^-x)`.
#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Messages at the start of an iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SpState {
    /// Indexed by edge (`var -> chk`, `(var, chk)` order).
    pub var_to_chk: Vec<f64>,
    /// Indexed by slot (`chk -> var`, `(chk, var)` order).
    pub chk_to_var: Vec<f64>,
    pub marginals: Vec<f64>,
    pub iteration: usize,
}

impl SpState {
    pub fn new(graph: &FactorGraph, llh: &LikelihoodVector) -> Self {
        let mu = llh.probs();
        Self {
            var_to_chk: (0..graph.n_edges()).map(|e| mu[graph.edge_var(e)]).collect(),
            chk_to_var: vec![0.5; graph.n_edges()],
            marginals: mu.to_vec(),
            iteration: 0,
        }
    }

    /// One flooding iteration. Returns the largest message change.
    pub fn step(&mut self, graph: &FactorGraph, llh: &LikelihoodVector) -> f64 {
        let mu = llh.probs();
        let mut delta: f64 = if self.iteration == 0 { f64::INFINITY } else { 0.0 };

        let mut buf: Vec<f64> = Vec::new();
        for a in 0..graph.n_chks() {
            let slots = graph.chk_slots(a);
            // Exclusive products via prefix/suffix sweeps.
            buf.clear();
            buf.extend(slots.clone().map(|s| 1.0 - 2.0 * self.var_to_chk[graph.slot_edge(s)]));
            let d = buf.len();
            let mut prefix = 1.0;
            let mut excl = vec![1.0; d];
            for k in 0..d {
                excl[k] = prefix;
                prefix *= buf[k];
            }
            let mut suffix = 1.0;
            for k in (0..d).rev() {
                excl[k] *= suffix;
                suffix *= buf[k];
            }
            for (k, s) in slots.enumerate() {
                let new = clamp_prob(0.5 - 0.5 * excl[k]);
                delta = delta.max((new - self.chk_to_var[s]).abs());
                self.chk_to_var[s] = new;
            }
        }

        for i in 0..graph.n_vars() {
            let edges = graph.var_edges(i);
            let mut one = libm::log(mu[i]);
            let mut zero = libm::log1p(-mu[i]);
            for e in edges.clone() {
                let m = self.chk_to_var[graph.edge_slot(e)];
                one += libm::log(m);
                zero += libm::log1p(-m);
            }
            self.marginals[i] = logistic(one - zero);
            for e in edges {
                let m = self.chk_to_var[graph.edge_slot(e)];
                let new = clamp_prob(logistic((one - libm::log(m)) - (zero - libm::log1p(-m))));
                delta = delta.max((new - self.var_to_chk[e]).abs());
                self.var_to_chk[e] = new;
            }
        }
        self.iteration += 1;
        delta
    }
}

/// Per-iteration record of a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpHistory {
    /// `chk_to_var[t]` holds the check messages of time `t`.
    pub chk_to_var: Vec<Vec<f64>>,
    /// `marginals[t]` holds `γ^t`, with `γ^0` the channel likelihoods.
    pub marginals: Vec<Vec<f64>>,
}

pub fn decode(graph: &FactorGraph, llh: &LikelihoodVector, cfg: &SpConfig) -> DecodeResult {
    run(graph, llh, cfg, None)
}

pub fn decode_traced(graph: &FactorGraph, llh: &LikelihoodVector, cfg: &SpConfig) -> (DecodeResult, SpHistory) {
    let mut history = SpHistory { chk_to_var: Vec::new(), marginals: vec![llh.probs().to_vec()] };
    let result = run(graph, llh, cfg, Some(&mut history));
    (result, history)
}

fn run(
    graph: &FactorGraph,
    llh: &LikelihoodVector,
    cfg: &SpConfig,
    mut history: Option<&mut SpHistory>,
) -> DecodeResult {
    assert!(cfg.max_iters >= 1, "max_iters must be at least 1");
    assert_eq!(llh.len(), graph.n_vars(), "likelihood length must match the graph");
    let mut state = SpState::new(graph, llh);
    let mut hard = hard_decision(&state.marginals);
    let mut satisfied = false;
    let mut converged = false;
    while state.iteration < cfg.max_iters {
        let delta = state.step(graph, llh);
        if let Some(h) = history.as_deref_mut() {
            h.chk_to_var.push(state.chk_to_var.clone());
            h.marginals.push(state.marginals.clone());
        }
        hard = hard_decision(&state.marginals);
        satisfied = graph.satisfies(&hard);
        converged = delta < cfg.tol;
        if converged || (cfg.early_stop && satisfied) {
            break;
        }
    }
    DecodeResult {
        hard_bits: hard,
        marginals: state.marginals,
        iterations_run: state.iteration,
        syndrome_satisfied: satisfied,
        converged,
    }
}

/// First iteration whose marginals are within `eps` of the fixed point.
pub fn stopping_time(graph: &FactorGraph, llh: &LikelihoodVector, eps: f64, max_iters: usize) -> Result<usize> {
    let cfg = SpConfig { max_iters, early_stop: false, tol: 1e-12 };
    let (result, history) = decode_traced(graph, llh, &cfg);
    if !result.converged {
        return Err(Error::NoConvergence(max_iters));
    }
    let fixed = &result.marginals;
    let t = history
        .marginals
        .iter()
        .position(|g| g.iter().zip(fixed).all(|(a, b)| (a - b).abs() <= eps))
        .expect("the final marginals are within any eps of themselves");
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::P_MIN;
    use proptest::prelude::*;

    fn direct(channel: f64, incoming: &[f64]) -> f64 {
        let one: f64 = channel * incoming.iter().product::<f64>();
        let zero: f64 = (1.0 - channel) * incoming.iter().map(|m| 1.0 - m).product::<f64>();
        one / (one + zero)
    }

    #[test]
    fn check_examples() {
        assert_eq!(check_update(&[0.2, 0.5, 0.9]), 0.5);
        assert!((check_update(&[0.2, 0.3]) - 0.38).abs() < 1e-15);
        assert_eq!(check_update(&[]), P_MIN);
    }

    #[test]
    fn var_examples() {
        assert!((var_update(0.5, &[0.5, 0.5]) - 0.5).abs() < 1e-15);
        assert!((var_update(0.37, &[]) - 0.37).abs() < 1e-15);
        assert!((var_update(0.1, &[0.2]) - 0.02 / 0.74).abs() < 1e-15);
        assert!((var_update(0.1, &[0.2]) - 0.027027).abs() < 1e-6);
    }

    #[test]
    fn marginal_examples() {
        assert_eq!(marginalize(0.5, &[]), 0.5);
        assert!((marginalize(0.1, &[0.2]) - 0.027027).abs() < 1e-6);
        assert!((marginalize(0.9, &[0.8, 0.7]) - 0.504 / 0.510).abs() < 1e-14);
        assert!((marginalize(0.9, &[0.8, 0.7]) - 0.98824).abs() < 1e-5);
    }

    #[test]
    fn noiseless_decodes_in_one_iteration() {
        let g = FactorGraph::gallager(60, 3, 6, 2).unwrap();
        let llh = LikelihoodVector::uniform(60, P_MIN).unwrap();
        let r = decode(&g, &llh, &SpConfig::default());
        assert_eq!(r.iterations_run, 1);
        assert!(r.syndrome_satisfied);
        assert!(r.hard_bits.iter().all(|&b| b == 0));
    }

    #[test]
    fn tie_resolves_to_zero() {
        assert_eq!(hard_decision(&[0.5, 0.5000001, 0.4999]), vec![0, 1, 0]);
    }

    #[test]
    fn stopping_time_on_a_tree() {
        let g = FactorGraph::from_dense_matrix(&[[1u8, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1]]).unwrap();
        let d = g.analyze().diameter.unwrap();
        let llh = LikelihoodVector::from_probs(vec![0.2, 0.6, 0.3, 0.45]).unwrap();
        for eps in [1e-9, 1e-3, 0.1] {
            assert!(stopping_time(&g, &llh, eps, 50).unwrap() <= d);
        }
        assert_eq!(stopping_time(&g, &llh, 0.5, 50).unwrap(), 0);
    }

    #[test]
    fn stopping_time_reports_non_convergence() {
        let g = FactorGraph::ring(6);
        let llh = LikelihoodVector::from_probs(vec![0.6, 0.4, 0.45, 0.3, 0.55, 0.5]).unwrap();
        assert_eq!(stopping_time(&g, &llh, 1e-6, 1), Err(Error::NoConvergence(1)));
    }

    proptest! {
        #[test]
        fn log_domain_matches_direct(
            channel in 1e-6f64..(1.0 - 1e-6),
            incoming in prop::collection::vec(1e-6f64..(1.0 - 1e-6), 0..6),
        ) {
            prop_assert!((marginalize(channel, &incoming) - direct(channel, &incoming)).abs() < 1e-12);
        }

        #[test]
        fn check_update_is_symmetric(mut incoming in prop::collection::vec(0.01f64..0.99, 1..6), rot in 0usize..6) {
            let a = check_update(&incoming);
            let len = incoming.len();
            incoming.rotate_left(rot % len);
            prop_assert!((a - check_update(&incoming)).abs() < 1e-14);
        }

        #[test]
        fn check_update_sign_bookkeeping(incoming in prop::collection::vec(0.01f64..0.99, 1..7)) {
            let out = check_update(&incoming);
            let above = incoming.iter().filter(|&&m| m > 0.5).count();
            let prod: f64 = incoming.iter().map(|m| 1.0 - 2.0 * m).product();
            if prod.abs() > 1e-12 {
                prop_assert_eq!(out < 0.5, above % 2 == 0);
            }
        }
    }
}
