//! Closed-form quantities behind the convergence guarantees: the two-state
//! chain produced by the equality operator, the chk->var edge matrix and its
//! nilpotency, the error bounds and the message dimension they require.

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::LikelihoodVector;
use crate::sp::SpHistory;
use crate::{Error, FactorGraph, Result};

/// Two-state chain with `f = P(0 -> 1)`, `g = P(1 -> 0)` and initial law
/// `(p0, p1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainModel {
    pub f: f64,
    pub g: f64,
    pub p0: f64,
    pub p1: f64,
}

impl ChainModel {
    pub fn new(f: f64, g: f64, p1: f64) -> Result<Self> {
        for p in [f, g, p1] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(p));
            }
        }
        Ok(Self { f, g, p0: 1.0 - p1, p1 })
    }

    /// Chain of the equality operator fed a channel stream of rate `mu` and
    /// check streams of rates `rhos`, started from a fair coin.
    pub fn from_inputs(mu: f64, rhos: &[f64]) -> Result<Self> {
        for &p in core::iter::once(&mu).chain(rhos) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(p));
            }
        }
        let f = mu * rhos.iter().product::<f64>();
        let g = (1.0 - mu) * rhos.iter().map(|r| 1.0 - r).product::<f64>();
        if f + g == 0.0 {
            return Err(Error::DegenerateChain);
        }
        Ok(Self { f, g, p0: 0.5, p1: 0.5 })
    }

    /// `f + g`, one minus the second eigenvalue.
    #[inline]
    pub fn gap(&self) -> f64 {
        self.f + self.g
    }

    #[inline]
    pub fn second_eigenvalue(&self) -> f64 {
        1.0 - self.f - self.g
    }

    fn nondegenerate(&self) -> Result<f64> {
        let s = self.gap();
        if s > 0.0 {
            Ok(s)
        } else {
            Err(Error::DegenerateChain)
        }
    }

    pub fn stationary(&self) -> Result<f64> {
        Ok(self.f / self.nondegenerate()?)
    }

    /// `P(ζ(ℓ) = 1)`.
    pub fn marginal_at(&self, ell: u64) -> Result<f64> {
        let s = self.nondegenerate()?;
        let pi = self.f / s;
        if ell == 0 {
            return Ok(self.p1);
        }
        let c = (self.g * self.p1 - self.f * self.p0) / s;
        Ok(pi + c * powu(self.second_eigenvalue(), ell))
    }

    /// `E[γ̂]`: mean of `marginal_at` over positions `K+1 ..= 2K`.
    pub fn expected_marginal_estimate(&self, k: u64) -> Result<f64> {
        assert!(k >= 1);
        let s = self.nondegenerate()?;
        let pi = self.f / s;
        let c = (self.g * self.p1 - self.f * self.p0) / s;
        let r = self.second_eigenvalue();
        // sum_{l=K+1}^{2K} r^l = r^{K+1} (1 - r^K) / (1 - r)
        let sum = powu(r, k + 1) * (1.0 - powu(r, k)) / s;
        Ok(pi + c * sum / k as f64)
    }
}

#[inline]
fn powu(x: f64, e: u64) -> f64 {
    if e <= i32::MAX as u64 {
        libm::pow(x, e as f64)
    } else if x.abs() < 1.0 {
        0.0
    } else {
        libm::pow(x, e as f64)
    }
}

/// Square matrix over chk->var slots whose entries are `0` or `lips`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMatrix {
    lips: f64,
    /// Column indices of the nonzeros of each row, ascending.
    rows: Vec<Vec<usize>>,
}

impl EdgeMatrix {
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn lips(&self) -> f64 {
        self.lips
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.rows[r].binary_search(&c).is_ok() {
            self.lips
        } else {
            0.0
        }
    }

    pub fn nonzeros(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        self.rows
            .iter()
            .map(|row| {
                let mut d = vec![0.0; n];
                for &c in row {
                    d[c] = self.lips;
                }
                d
            })
            .collect()
    }
}

/// Row `a -> i` has an entry at `b -> j` for every `j ∈ N(a) \ {i}` and
/// `b ∈ N(j) \ {a}`. Rows and columns use the graph's slot indexing.
pub fn build_edge_matrix(graph: &FactorGraph, lips: f64) -> EdgeMatrix {
    assert!(lips > 0.0);
    let mut rows = vec![Vec::new(); graph.n_edges()];
    for a in 0..graph.n_chks() {
        for s in graph.chk_slots(a) {
            let row = &mut rows[s];
            for s2 in graph.chk_slots(a) {
                if s2 == s {
                    continue;
                }
                let j = graph.slot_var(s2);
                for e in graph.var_edges(j) {
                    if graph.edge_chk(e) != a {
                        row.push(graph.edge_slot(e));
                    }
                }
            }
            row.sort_unstable();
        }
    }
    EdgeMatrix { lips, rows }
}

/// Smallest `ℓ ≤ limit` with `M^ℓ = 0`, computed on the nonzero pattern.
pub fn nilpotency_degree(m: &EdgeMatrix, limit: usize) -> Option<usize> {
    assert!(limit >= 1);
    let n = m.dim();
    if m.is_zero() {
        return Some(1);
    }
    let words = n.div_ceil(64);
    let mut power: Vec<u64> = vec![0; n * words];
    for (r, row) in m.rows.iter().enumerate() {
        for &c in row {
            power[r * words + c / 64] |= 1 << (c % 64);
        }
    }
    let mut next = vec![0u64; n * words];
    for ell in 2..=limit {
        next.iter_mut().for_each(|w| *w = 0);
        let mut any = false;
        for r in 0..n {
            let src = &power[r * words..(r + 1) * words];
            let dst = &mut next[r * words..(r + 1) * words];
            for (wi, &word) in src.iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let c = wi * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    for &c2 in &m.rows[c] {
                        dst[c2 / 64] |= 1 << (c2 % 64);
                    }
                }
            }
            any |= dst.iter().any(|&w| w != 0);
        }
        if !any {
            return Some(ell);
        }
        core::mem::swap(&mut power, &mut next);
    }
    None
}

/// Parameters of the error bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    /// Target accuracy.
    pub eps: f64,
    /// Lipschitz constant of the variable update.
    pub lips: f64,
    /// Lower bound on `f + g` over the run.
    pub lambda: f64,
    pub dc: usize,
    pub dv: usize,
    /// Tree diameter, or the stopping time on a general graph.
    pub horizon: usize,
}

impl BoundInputs {
    /// `L (dc - 1) (dv - 1)`.
    pub fn growth(&self) -> f64 {
        self.lips * (self.dc.saturating_sub(1) * self.dv.saturating_sub(1)) as f64
    }

    fn validate(&self) -> Result<f64> {
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::InvalidParameter("eps must be positive"));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidParameter("lambda must lie in (0, 1]"));
        }
        if self.lips.is_nan() || self.lips <= 0.0 {
            return Err(Error::InvalidParameter("Lipschitz constant must be positive"));
        }
        let growth = self.growth();
        if growth <= 1.0 {
            return Err(Error::InvalidRegime(growth));
        }
        Ok(growth)
    }
}

/// Unrounded `max((ln ε − h ln G) / ln(1 − λ), 3/λ)` with `G` the growth
/// factor and `h` the horizon.
pub fn required_dimension_raw(b: &BoundInputs) -> Result<f64> {
    let growth = b.validate()?;
    let floor = 3.0 / b.lambda;
    if b.lambda >= 1.0 {
        return Ok(floor);
    }
    let first = (libm::log(b.eps) - b.horizon as f64 * libm::log(growth)) / libm::log(1.0 - b.lambda);
    Ok(first.max(floor))
}

/// Smallest message half-length `K` that the bias bound certifies for `eps`.
pub fn required_dimension(b: &BoundInputs) -> Result<u64> {
    Ok(libm::ceil(required_dimension_raw(b)?) as u64)
}

/// `(dc−1)(1−λ)^{K+1} / (Kλ) · G^h / (G − 1)`.
pub fn message_gap_bound(b: &BoundInputs, k: u64) -> Result<f64> {
    assert!(k >= 1);
    let growth = b.validate()?;
    let lead = (b.dc - 1) as f64 * powu(1.0 - b.lambda, k + 1) / (k as f64 * b.lambda);
    Ok(lead * libm::pow(growth, b.horizon as f64) / (growth - 1.0))
}

/// `(1 + 2/λ) / K`.
pub fn variance_bound(lambda: f64, k: u64) -> f64 {
    debug_assert!(lambda > 0.0 && lambda <= 1.0 && k >= 1);
    (1.0 + 2.0 / lambda) / k as f64
}

/// Surrogate Lipschitz constant `2 / λ²`, a bound on the gradient of
/// `u / (u + v)` where `u + v ≥ λ`.
pub fn default_lipschitz(lambda: f64) -> f64 {
    2.0 / (lambda * lambda)
}

/// Minimum of `f + g` over every variable for one set of check messages,
/// taking both the full neighborhood and each neighborhood minus one check.
pub fn lambda_at(graph: &FactorGraph, llh: &LikelihoodVector, chk_to_var: &[f64]) -> f64 {
    assert_eq!(chk_to_var.len(), graph.n_edges());
    let mut best = f64::INFINITY;
    let mut rhos = Vec::new();
    for (i, &mu) in llh.probs().iter().enumerate() {
        rhos.clear();
        rhos.extend(graph.var_edges(i).map(|e| chk_to_var[graph.edge_slot(e)]));
        let gap = |skip: Option<usize>| {
            let (mut one, mut zero) = (mu, 1.0 - mu);
            for (k, &r) in rhos.iter().enumerate() {
                if Some(k) != skip {
                    one *= r;
                    zero *= 1.0 - r;
                }
            }
            one + zero
        };
        best = best.min(gap(None));
        for k in 0..rhos.len() {
            best = best.min(gap(Some(k)));
        }
    }
    best
}

/// `λ̂`: the minimum of [`lambda_at`] over every recorded iteration.
pub fn estimate_lambda(graph: &FactorGraph, llh: &LikelihoodVector, history: &SpHistory) -> f64 {
    history.chk_to_var.iter().map(|m| lambda_at(graph, llh, m)).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sp::{decode_traced, SpConfig};
    use crate::P_MIN;

    #[test]
    fn chain_examples() {
        let c = ChainModel::from_inputs(0.5, &[]).unwrap();
        assert_eq!((c.f, c.g, c.stationary().unwrap()), (0.5, 0.5, 0.5));
        let c = ChainModel::from_inputs(0.5, &[0.2, 0.3]).unwrap();
        assert!((c.f - 0.03).abs() < 1e-15 && (c.g - 0.28).abs() < 1e-15);
        assert!((c.stationary().unwrap() - 0.096774).abs() < 1e-6);
        let c = ChainModel::from_inputs(1.0, &[1.0]).unwrap();
        assert_eq!((c.f, c.g, c.stationary().unwrap()), (1.0, 0.0, 1.0));
        assert_eq!(ChainModel::from_inputs(1.0, &[0.0]), Err(Error::DegenerateChain));
        assert_eq!(ChainModel::new(0.0, 0.0, 0.5).unwrap().stationary(), Err(Error::DegenerateChain));
    }

    #[test]
    fn marginal_examples() {
        let c = ChainModel::new(0.03, 0.28, 0.5).unwrap();
        assert_eq!(c.marginal_at(0).unwrap(), 0.5);
        // 0.096774 + 0.403226 · 0.69^10, with 0.69^10 = 0.0244619
        assert!((c.marginal_at(10).unwrap() - 0.1066379).abs() < 1e-6);
        assert!((c.marginal_at(5000).unwrap() - c.stationary().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn expected_estimate_examples() {
        let c = ChainModel::new(0.5, 0.5, 0.2).unwrap();
        for k in [1, 7, 100] {
            assert!((c.expected_marginal_estimate(k).unwrap() - 0.5).abs() < 1e-15);
        }
        let c = ChainModel::new(0.03, 0.28, 0.5).unwrap();
        assert!((c.expected_marginal_estimate(1).unwrap() - c.marginal_at(2).unwrap()).abs() < 1e-15);
        let direct: f64 = (65..=128).map(|l| c.marginal_at(l).unwrap()).sum::<f64>() / 64.0;
        let e = c.expected_marginal_estimate(64).unwrap();
        assert!((e - direct).abs() < 1e-14);
        let bound = 0.69f64.powi(65) / (64.0 * 0.31);
        assert!((e - c.stationary().unwrap()).abs() <= bound);
    }

    #[test]
    fn edge_matrix_examples() {
        let path = FactorGraph::from_edges(2, 1, &[(0, 0), (1, 0)]).unwrap();
        let m = build_edge_matrix(&path, 2.0);
        assert_eq!(m.dim(), 2);
        assert!(m.is_zero());
        assert_eq!(nilpotency_degree(&m, 5), Some(1));

        let star = FactorGraph::from_edges(3, 1, &[(0, 0), (1, 0), (2, 0)]).unwrap();
        assert!(build_edge_matrix(&star, 1.0).is_zero());

        // leaves v0 on c0 and v2 on c1, v1 shared
        let g = FactorGraph::from_edges(3, 2, &[(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap();
        let m = build_edge_matrix(&g, 1.5);
        // slot order: c0 -> v0, c0 -> v1, c1 -> v1, c1 -> v2
        assert_eq!(m.row(0), &[2]);
        assert_eq!(m.row(3), &[1]);
        assert!(m.row(1).is_empty() && m.row(2).is_empty());
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(nilpotency_degree(&m, 10), Some(2));
    }

    #[test]
    fn ring_is_not_nilpotent() {
        let m = build_edge_matrix(&FactorGraph::ring(5), 1.0);
        assert_eq!(nilpotency_degree(&m, 100), None);
    }

    #[test]
    fn required_dimension_examples() {
        let b = BoundInputs { eps: 1e-3, lips: 2.0, lambda: 0.5, dc: 6, dv: 3, horizon: 4 };
        assert!((required_dimension_raw(&b).unwrap() - 27.26).abs() < 0.01);
        assert_eq!(required_dimension(&b).unwrap(), 28);
        assert_eq!(required_dimension(&BoundInputs { lambda: 1.0, ..b }).unwrap(), 3);
        let half = BoundInputs { eps: 5e-4, ..b };
        let diff = required_dimension_raw(&half).unwrap() - required_dimension_raw(&b).unwrap();
        assert!((diff - 2f64.ln() / -(0.5f64.ln())).abs() < 1e-12);
        assert_eq!(required_dimension(&BoundInputs { lips: 0.1, ..b }), Err(Error::InvalidRegime(1.0)));
        assert!(required_dimension(&BoundInputs { lambda: 0.0, ..b }).is_err());
    }

    #[test]
    fn message_gap_examples() {
        let b = BoundInputs { eps: 1e-3, lips: 2.0, lambda: 0.31, dc: 6, dv: 3, horizon: 4 };
        let mut last = f64::INFINITY;
        for k in [8, 16, 32, 64, 128, 256, 512, 1024] {
            let v = message_gap_bound(&b, k).unwrap();
            assert!(v < last);
            last = v;
        }
        let v = message_gap_bound(&b, 64).unwrap();
        assert!(v > 0.0 && v < 1e-6, "{v}");
        let b0 = BoundInputs { horizon: 0, ..b };
        let expect = 5.0 * 0.69f64.powi(65) / (64.0 * 0.31) / (20.0 - 1.0);
        assert!((message_gap_bound(&b0, 64).unwrap() - expect).abs() < 1e-12 * expect.abs().max(1e-300));
    }

    #[test]
    fn variance_bound_examples() {
        assert!((variance_bound(0.5, 100) - 0.05).abs() < 1e-15);
        assert_eq!(variance_bound(1.0, 1), 3.0);
        assert_eq!(variance_bound(0.3, 10), 2.0 * variance_bound(0.3, 20));
    }

    #[test]
    fn lambda_examples() {
        let g = FactorGraph::from_edges(3, 2, &[(0, 0), (1, 0), (1, 1), (2, 1)]).unwrap();
        let llh = LikelihoodVector::uniform(3, 0.5).unwrap();
        let init = vec![0.5; g.n_edges()];
        // the degree-two variable gives the minimum 2 · 0.5^3
        assert!((lambda_at(&g, &llh, &init) - 0.25).abs() < 1e-15);

        let quiet = LikelihoodVector::uniform(3, P_MIN).unwrap();
        let (_, h) = decode_traced(&g, &quiet, &SpConfig { max_iters: 5, early_stop: false, tol: 0.0 });
        let lam = estimate_lambda(&g, &quiet, &h);
        assert!((lam - (1.0 - P_MIN).powi(3)).abs() < 1e-6, "{lam}");

        let noisy = LikelihoodVector::from_probs(vec![1.0, 0.0, 1.0]).unwrap();
        let (_, h) = decode_traced(&g, &noisy, &SpConfig { max_iters: 5, early_stop: false, tol: 0.0 });
        assert!(estimate_lambda(&g, &noisy, &h) >= 2.0 * P_MIN.powi(3));
    }

    #[test]
    fn default_lipschitz_value() {
        assert_eq!(default_lipschitz(0.5), 8.0);
    }
}
