//! Property checks behind the `verify` subcommand. Every check yields one
//! report line with its verdict and measured margins.

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};
use stochdec_core::analysis::{self, BoundInputs, ChainModel};
use stochdec_core::bits::{equality_combine, sample_channel_message, BitMessage};
use stochdec_core::channel::LikelihoodVector;
use stochdec_core::oracle;
use stochdec_core::seed::{self, StreamRng};
use stochdec_core::sp::{self, SpConfig};
use stochdec_core::FactorGraph;

use crate::harness;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub pass: bool,
    pub detail: Value,
}

impl Check {
    fn new(check: &str, pass: bool, detail: Value) -> Self {
        Self { check: check.to_string(), pass, detail }
    }
}

fn rng(seed: u64, tag: u64) -> StreamRng {
    seed::stream(seed::derive(seed, 0x7665_7269_6679, tag))
}

/// Random tree code with random likelihoods in `[0.02, 0.98]`.
pub fn random_tree_instance(rng: &mut StreamRng, max_vars: usize) -> (FactorGraph, LikelihoodVector) {
    let n = rng.random_range(2..=max_vars);
    let dc = rng.random_range(2..=4);
    let g = FactorGraph::random_tree(n, dc, rng);
    let llh = LikelihoodVector::from_probs((0..n).map(|_| rng.random_range(0.02..0.98)).collect()).unwrap();
    (g, llh)
}

/// SP after `diameter` iterations against exhaustive enumeration.
pub fn tree_exactness(seed: u64, instances: usize) -> Check {
    let mut r = rng(seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (g, llh) = random_tree_instance(&mut r, 15);
        let d = g.analyze().diameter.expect("tree").max(1);
        let sp = sp::decode(&g, &llh, &SpConfig { max_iters: d, early_stop: false, tol: 0.0 });
        let exact = oracle::exact_bitwise_map(&g, &llh).expect("small tree");
        for (a, b) in sp.marginals.iter().zip(&exact.marginals) {
            worst = worst.max((a - b).abs());
        }
    }
    Check::new(
        "tree_exactness",
        worst <= 1e-9,
        json!({ "instances": instances, "max_abs_error": worst, "tolerance": 1e-9 }),
    )
}

/// Transition and occupation statistics of one equality chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainFit {
    pub f: f64,
    pub g: f64,
    pub f_hat: f64,
    pub g_hat: f64,
    pub stationary: f64,
    pub ones_fraction: f64,
    /// Largest deviation in units of its standard deviation.
    pub worst_sigmas: f64,
}

/// Runs the equality operator on i.i.d. inputs of rates `mu, rhos...`.
pub fn fit_chain(mu: f64, rhos: &[f64], len: usize, rng: &mut StreamRng) -> ChainFit {
    let half = len.div_ceil(2);
    let msgs: Vec<BitMessage> = std::iter::once(mu)
        .chain(rhos.iter().copied())
        .map(|p| sample_channel_message(p, half, rng).expect("valid rate"))
        .collect();
    let refs: Vec<&BitMessage> = msgs.iter().collect();
    let z = equality_combine(&refs, rng).expect("non-empty");
    let bits = z.to_bits();
    let (mut n0, mut up, mut n1, mut down) = (0u64, 0u64, 0u64, 0u64);
    for w in bits.windows(2) {
        if w[0] == 0 {
            n0 += 1;
            up += w[1] as u64;
        } else {
            n1 += 1;
            down += (w[1] == 0) as u64;
        }
    }
    let chain = ChainModel::from_inputs(mu, rhos).expect("rates in (0, 1)");
    let sig = |hat: f64, p: f64, n: u64| {
        if n == 0 {
            return 0.0;
        }
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        if sd == 0.0 {
            if hat == p {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (hat - p).abs() / sd
        }
    };
    let f_hat = if n0 > 0 { up as f64 / n0 as f64 } else { f64::NAN };
    let g_hat = if n1 > 0 { down as f64 / n1 as f64 } else { f64::NAN };
    let pi = chain.stationary().expect("non-degenerate");
    let s = chain.gap();
    let frac = z.count_ones() as f64 / bits.len() as f64;
    let frac_sd = (pi * (1.0 - pi) * (2.0 - s) / (s * bits.len() as f64)).sqrt();
    let worst = sig(f_hat, chain.f, n0).max(sig(g_hat, chain.g, n1)).max((frac - pi).abs() / frac_sd);
    ChainFit { f: chain.f, g: chain.g, f_hat, g_hat, stationary: pi, ones_fraction: frac, worst_sigmas: worst }
}

pub fn chain_law(seed: u64, tuples: usize, len: usize) -> Check {
    let mut r = rng(seed, 2);
    let mut worst = 0.0f64;
    for _ in 0..tuples {
        let d = r.random_range(1..=4);
        let mu = r.random_range(0.05..=0.95);
        let rhos: Vec<f64> = (0..d).map(|_| r.random_range(0.05..=0.95)).collect();
        worst = worst.max(fit_chain(mu, &rhos, len, &mut r).worst_sigmas);
    }
    Check::new(
        "equality_chain_law",
        worst <= 4.0,
        json!({ "tuples": tuples, "length": len, "worst_sigmas": worst, "band": 4.0 }),
    )
}

/// Closed-form chain marginals against matrix stepping.
pub fn marginal_crosscheck(seed: u64, chains: usize, max_len: usize) -> Check {
    let mut r = rng(seed, 3);
    let mut worst = 0.0f64;
    for _ in 0..chains {
        let f: f64 = r.random_range(0.0..=1.0);
        let g: f64 = r.random_range(1e-6..=1.0);
        let chain = ChainModel::new(f, g, r.random_range(0.0..=1.0)).unwrap();
        let exact = oracle::exact_chain_distribution(&chain, max_len);
        for (l, p) in exact.iter().enumerate() {
            worst = worst.max((chain.marginal_at(l as u64).unwrap() - p).abs());
        }
    }
    Check::new(
        "marginal_at_crosscheck",
        worst <= 1e-12,
        json!({ "chains": chains, "max_len": max_len, "max_abs_error": worst }),
    )
}

pub fn nilpotency(seed: u64, trees: usize, rings: usize) -> Check {
    let mut r = rng(seed, 4);
    let mut violations = Vec::new();
    for _ in 0..trees {
        let n = r.random_range(2..=30);
        let dc = r.random_range(2..=4);
        let g = FactorGraph::random_tree(n, dc, &mut r);
        let d = g.analyze().diameter.expect("tree");
        let m = analysis::build_edge_matrix(&g, 1.0);
        match analysis::nilpotency_degree(&m, d.max(1) + 1) {
            Some(k) if k <= d.max(1) => {}
            other => violations.push(json!({ "n": n, "diameter": d, "degree": other })),
        }
    }
    for len in 0..rings {
        let g = FactorGraph::ring(2 + len);
        if let Some(k) = analysis::nilpotency_degree(&analysis::build_edge_matrix(&g, 1.0), 100) {
            violations.push(json!({ "ring": 2 + len, "degree": k }));
        }
    }
    Check::new(
        "edge_matrix_nilpotency",
        violations.is_empty(),
        json!({ "trees": trees, "rings": rings, "violations": violations }),
    )
}

pub fn required_dimension() -> Check {
    let b = BoundInputs { eps: 1e-3, lips: 2.0, lambda: 0.5, dc: 6, dv: 3, horizon: 4 };
    let k = analysis::required_dimension(&b);
    let hand = ((1e-3f64).ln() - 4.0 * 20f64.ln()) / 0.5f64.ln();
    let mono_eps = [1e-1, 1e-2, 1e-3, 1e-4, 1e-6].windows(2).all(|w| {
        analysis::required_dimension_raw(&BoundInputs { eps: w[0], ..b }).unwrap()
            < analysis::required_dimension_raw(&BoundInputs { eps: w[1], ..b }).unwrap()
    });
    let mono_d = (0..8).all(|d| {
        analysis::required_dimension(&BoundInputs { horizon: d, ..b }).unwrap()
            <= analysis::required_dimension(&BoundInputs { horizon: d + 1, ..b }).unwrap()
    });
    let pass = k == Ok(28) && (hand.ceil() as u64) == 28 && mono_eps && mono_d;
    Check::new(
        "required_dimension",
        pass,
        json!({ "k": k.ok(), "hand": hand, "monotone_in_inverse_eps": mono_eps, "monotone_in_horizon": mono_d }),
    )
}

/// Bias and variance of MbSD on a frozen tree fixture.
pub fn moments(seed: u64, runs: usize) -> Result<Check> {
    let graph = FactorGraph::random_tree(12, 3, &mut rng(seed, 5));
    let llh = harness::frozen_likelihoods(&graph, 2.0, seed, false)?;
    let d = graph.analyze().diameter.expect("tree").max(1);
    let ks = [32, 64, 128, 256];
    let study = harness::run_moment_study(&graph, &llh, &ks, runs, d, 1e-2, seed, None)?;
    let slack = 3.0 * (2.0 / (runs - 1) as f64).sqrt();
    let within = study.rows.iter().all(|r| r.variance <= r.variance_bound * (1.0 + slack));
    let slope = study.variance_slope();
    let biases: Vec<f64> = (0..ks.len()).map(|ki| study.max_bias(ki)).collect();
    let pass = within && slope.is_some_and(|s| (s + 1.0).abs() <= 0.2);
    Ok(Check::new(
        "moments",
        pass,
        json!({ "runs": runs, "lambda_hat": study.lambda_hat, "variance_within_bound": within, "variance_slope": slope, "max_bias": biases }),
    ))
}

/// The full suite; `quick` keeps only the closed-form and chain checks.
pub fn run_suite(seed: u64, quick: bool) -> Result<Vec<Check>> {
    let mut out = vec![
        chain_law(seed, 20, 1_000_000),
        marginal_crosscheck(seed, 100, 10_000),
        nilpotency(seed, 50, 10),
        tree_exactness(seed, 25),
        required_dimension(),
    ];
    if !quick {
        out.push(moments(seed, 1000)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        let checks = run_suite(1, true).unwrap();
        assert_eq!(checks.len(), 5);
        for c in checks {
            assert!(c.pass, "{}: {}", c.check, c.detail);
        }
    }
}
