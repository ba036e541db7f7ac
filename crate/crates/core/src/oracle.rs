//! Brute-force references for small instances.

use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::ChainModel;
use crate::channel::LikelihoodVector;
use crate::{Error, FactorGraph, Result};

/// Largest code length accepted by [`exact_bitwise_map`].
pub const MAX_ENUMERATION_VARS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Exact `P(x_i = 1 | y)` over the code.
    pub marginals: Vec<f64>,
    /// Words satisfying every check.
    pub codeword_count: u64,
}

/// Bitwise posterior marginals by enumerating every word of the code.
pub fn exact_bitwise_map(graph: &FactorGraph, llh: &LikelihoodVector) -> Result<OracleResult> {
    let n = graph.n_vars();
    if n > MAX_ENUMERATION_VARS {
        return Err(Error::TooLarge { n, limit: MAX_ENUMERATION_VARS });
    }
    if llh.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: llh.len() });
    }
    let masks: Vec<u32> = (0..graph.n_chks()).map(|a| graph.chk_adj(a).iter().fold(0u32, |m, &i| m | 1 << i)).collect();
    let mu = llh.probs();
    let mut total = 0.0;
    let mut ones = vec![0.0; n];
    let mut count = 0u64;
    for word in 0u32..(1u32 << n) {
        if masks.iter().any(|m| (word & m).count_ones() & 1 == 1) {
            continue;
        }
        count += 1;
        let mut w = 1.0;
        for (i, &p) in mu.iter().enumerate() {
            w *= if word >> i & 1 == 1 { p } else { 1.0 - p };
        }
        total += w;
        for (i, acc) in ones.iter_mut().enumerate() {
            if word >> i & 1 == 1 {
                *acc += w;
            }
        }
    }
    Ok(OracleResult { marginals: ones.into_iter().map(|o| o / total).collect(), codeword_count: count })
}

/// `P(ζ(ℓ) = 1)` for `ℓ = 0 ..= length` by stepping the transition matrix.
pub fn exact_chain_distribution(chain: &ChainModel, length: usize) -> Vec<f64> {
    assert!(length <= 1_000_000, "chain length capped at 10^6");
    let mut out = Vec::with_capacity(length + 1);
    let (mut q0, mut q1) = (chain.p0, chain.p1);
    out.push(q1);
    for _ in 0..length {
        let n1 = q0 * chain.f + q1 * (1.0 - chain.g);
        let n0 = q0 * (1.0 - chain.f) + q1 * chain.g;
        q0 = n0;
        q1 = n1;
        out.push(q1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hamming() -> FactorGraph {
        FactorGraph::from_dense_matrix(&[[1u8, 1, 0, 1, 1, 0, 0], [1, 0, 1, 1, 0, 1, 0], [0, 1, 1, 1, 0, 0, 1]])
            .unwrap()
    }

    #[test]
    fn uniform_posterior_counts_codewords() {
        let g = hamming();
        let r = exact_bitwise_map(&g, &LikelihoodVector::uniform(7, 0.5).unwrap()).unwrap();
        assert_eq!(r.codeword_count, 16);
        for m in r.marginals {
            assert!((m - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn unconstrained_variable_keeps_channel() {
        let g = FactorGraph::from_edges(2, 1, &[(0, 0)]).unwrap();
        let r = exact_bitwise_map(&g, &LikelihoodVector::from_probs(vec![0.4, 0.3]).unwrap()).unwrap();
        assert_eq!(r.codeword_count, 2);
        assert_eq!(r.marginals[0], 0.0);
        assert!((r.marginals[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn hamming_marginals_below_channel() {
        let g = hamming();
        let r = exact_bitwise_map(&g, &LikelihoodVector::uniform(7, 0.1).unwrap()).unwrap();
        assert!(r.marginals.iter().all(|&m| m > 0.0 && m < 0.1));
    }

    #[test]
    fn size_guard() {
        let g = FactorGraph::ring(25);
        let err = exact_bitwise_map(&g, &LikelihoodVector::uniform(25, 0.2).unwrap()).unwrap_err();
        assert_eq!(err, Error::TooLarge { n: 25, limit: 24 });
    }

    #[test]
    fn chain_examples() {
        let c = ChainModel::new(0.03, 0.28, 0.5).unwrap();
        let d = exact_chain_distribution(&c, 2000);
        for (l, p) in d.iter().enumerate() {
            assert!((p - c.marginal_at(l as u64).unwrap()).abs() < 1e-12);
        }
        let mix = ChainModel::new(0.3, 0.7, 0.9).unwrap();
        let d = exact_chain_distribution(&mix, 5);
        assert_eq!(d[0], 0.9);
        assert!(d[1..].iter().all(|p| (p - 0.3).abs() < 1e-15));
        let frozen = ChainModel::new(0.0, 0.0, 0.8).unwrap();
        assert!(exact_chain_distribution(&frozen, 10).iter().all(|&p| p == 0.8));
    }
}
