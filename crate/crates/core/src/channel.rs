//! BPAM over AWGN with the all-zero codeword (bit 0 sent as `+1`).

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{clamp_prob, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    pub sigma2: f64,
    pub rate: f64,
    pub nds_enabled: bool,
    /// Multiplier applied to the channel LLRs when NDS is on.
    pub nds_param: f64,
}

impl ChannelParams {
    /// Parameters at `ebno_db` with the NDS multiplier defaulting to `sigma2`.
    pub fn at_ebno(ebno_db: f64, rate: f64, nds_enabled: bool) -> Result<Self> {
        let sigma2 = ebno_db_to_sigma2(ebno_db, rate)?;
        Ok(Self { sigma2, rate, nds_enabled, nds_param: sigma2 })
    }

    pub fn likelihoods(&self, y: &[f64]) -> Result<LikelihoodVector> {
        likelihoods(y, self.sigma2, self.nds_enabled.then_some(self.nds_param))
    }
}

/// Per-bit probabilities `P(x_i = 1 | y_i)`, clamped into
/// `[P_MIN, 1 - P_MIN]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodVector {
    probs: Vec<f64>,
}

impl LikelihoodVector {
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if let Some(&p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbability(p));
        }
        Ok(Self { probs: probs.into_iter().map(clamp_prob).collect() })
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::from_probs(alloc::vec![p; n])
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Same vector with entry `i` moved to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut probs = self.probs.clone();
        for (i, &p) in self.probs.iter().enumerate() {
            probs[perm[i]] = p;
        }
        Self { probs }
    }
}

/// `sigma^2 = 1 / (2 R 10^(ebno/10))` for unit-power BPAM.
pub fn ebno_db_to_sigma2(ebno_db: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidRate(rate));
    }
    Ok(1.0 / (2.0 * rate * libm::pow(10.0, ebno_db / 10.0)))
}

/// Received samples for the all-zero codeword: `y_i = 1 + n_i`.
pub fn transmit_all_zero<R: Rng + ?Sized>(n: usize, sigma2: f64, rng: &mut R) -> Vec<f64> {
    let sd = libm::sqrt(sigma2);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            1.0 + sd * z
        })
        .collect()
}

/// Log-likelihood ratio `ln P(x=0|y) / P(x=1|y) = 2y / sigma^2`.
#[inline]
pub fn llr(y: f64, sigma2: f64) -> f64 {
    2.0 * y / sigma2
}

/// `1 / (1 + e^llr)` without overflow.
#[inline]
pub fn prob_one_from_llr(llr: f64) -> f64 {
    if llr >= 0.0 {
        let e = libm::exp(-llr);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + libm::exp(llr))
    }
}

/// Channel likelihoods. `nds` multiplies every LLR before conversion.
pub fn likelihoods(y: &[f64], sigma2: f64, nds: Option<f64>) -> Result<LikelihoodVector> {
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    let scale = nds.unwrap_or(1.0);
    Ok(LikelihoodVector { probs: y.iter().map(|&v| clamp_prob(prob_one_from_llr(scale * llr(v, sigma2)))).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn ebno_conversion() {
        assert!((ebno_db_to_sigma2(0.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((ebno_db_to_sigma2(3.0103, 0.5).unwrap() - 0.5).abs() < 1e-5);
        let mut last = f64::INFINITY;
        for db in [0.0, 5.0, 10.0, 20.0, 40.0] {
            let s = ebno_db_to_sigma2(db, 0.5).unwrap();
            assert!(s < last);
            last = s;
        }
        assert!(last < 1.000001e-4);
        assert_eq!(ebno_db_to_sigma2(1.0, 1.0), Err(Error::InvalidRate(1.0)));
        assert_eq!(ebno_db_to_sigma2(1.0, 0.0), Err(Error::InvalidRate(0.0)));
    }

    #[test]
    fn noiseless_limit() {
        let y = transmit_all_zero(100, 1e-20, &mut seed::stream(1));
        assert!(y.iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn noise_moments() {
        let n = 1_000_000;
        let y = transmit_all_zero(n, 1.0, &mut seed::stream(2));
        let mean = y.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.004, "{mean}");

        let y = transmit_all_zero(n, 0.25, &mut seed::stream(3));
        let var = y.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / n as f64;
        assert!((var - 0.25).abs() < 1.5e-3, "{var}");
    }

    #[test]
    fn likelihood_examples() {
        let l = likelihoods(&[0.0], 0.7, None).unwrap();
        assert_eq!(l.probs(), &[0.5]);
        let l = likelihoods(&[1.0], 1.0, None).unwrap();
        assert!((l.probs()[0] - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-15);
        assert!((l.probs()[0] - 0.1192).abs() < 1e-4);
        let l = likelihoods(&[1.0], 0.5, Some(0.5)).unwrap();
        assert!((l.probs()[0] - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-15);
        assert_eq!(likelihoods(&[1.0], 0.0, None), Err(Error::NonPositiveVariance(0.0)));
    }

    #[test]
    fn symmetry_and_monotonicity() {
        for &y in &[-3.0, -0.4, 0.1, 0.9, 2.5] {
            for &s in &[0.3, 1.0, 2.0] {
                let p = prob_one_from_llr(llr(y, s));
                let q = prob_one_from_llr(llr(-y, s));
                assert!((p + q - 1.0).abs() < 1e-15);
            }
        }
        let ys: Vec<f64> = (0..50).map(|k| -2.0 + 0.1 * k as f64).collect();
        let mus = likelihoods(&ys, 0.8, None).unwrap();
        assert!(mus.probs().windows(2).all(|w| w[0] >= w[1]));
        let at = |s: f64| likelihoods(&[0.7], s, None).unwrap().probs()[0];
        assert!(at(0.3) < at(0.6) && at(0.6) < at(1.2));
    }

    #[test]
    fn nds_at_sigma2_removes_noise_dependence() {
        for &s in &[0.2, 0.5, 1.3] {
            for &y in &[-1.0, 0.3, 1.7] {
                assert!((s * llr(y, s) - 2.0 * y).abs() < 1e-12);
            }
        }
        let p = ChannelParams::at_ebno(2.0, 0.5, true).unwrap();
        assert_eq!(p.nds_param, p.sigma2);
        let a = p.likelihoods(&[0.8]).unwrap();
        let b = likelihoods(&[0.8], 1.0, Some(1.0)).unwrap();
        assert!((a.probs()[0] - b.probs()[0]).abs() < 1e-15);
    }

    #[test]
    fn clamping() {
        let l = likelihoods(&[1e6, -1e6], 1.0, None).unwrap();
        assert_eq!(l.probs(), &[crate::P_MIN, 1.0 - crate::P_MIN]);
        assert!(LikelihoodVector::from_probs(alloc::vec![1.2]).is_err());
    }
}
