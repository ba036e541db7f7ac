use rand::Rng;
use stochdec_core::analysis::{estimate_lambda, variance_bound, ChainModel};
use stochdec_core::bits::{equality_combine, sample_channel_message, BitMessage};
use stochdec_core::channel::LikelihoodVector;
use stochdec_core::mbsd::{self, MbsdConfig};
use stochdec_core::sd::{self, SdConfig};
use stochdec_core::seed;
use stochdec_core::sp::{self, SpConfig};
use stochdec_core::FactorGraph;

fn tree_fixture() -> (FactorGraph, LikelihoodVector, usize) {
    let mut rng = seed::stream(2024);
    let g = FactorGraph::random_tree(12, 3, &mut rng);
    let llh = LikelihoodVector::from_probs((0..12).map(|_| rng.random_range(0.1..0.45)).collect()).unwrap();
    let d = g.analyze().diameter.unwrap();
    (g, llh, d)
}

#[test]
fn equality_chain_follows_its_transition_law() {
    let len = 1_000_000;
    let mut rng = seed::stream(5);
    for rhos in [[0.3, 0.6, 0.5], [0.7, 0.8, 0.4], [0.2, 0.5, 0.9]] {
        let msgs: Vec<BitMessage> =
            rhos.iter().map(|&r| sample_channel_message(r, len / 2, &mut rng).unwrap()).collect();
        let refs: Vec<&BitMessage> = msgs.iter().collect();
        let z = equality_combine(&refs, &mut rng).unwrap();
        let chain = ChainModel::from_inputs(rhos[0], &rhos[1..]).unwrap();
        let (mut n0, mut up, mut n1, mut down) = (0u64, 0u64, 0u64, 0u64);
        for l in 1..len {
            match (z.get(l - 1), z.get(l)) {
                (false, b) => {
                    n0 += 1;
                    up += b as u64;
                }
                (true, b) => {
                    n1 += 1;
                    down += !b as u64;
                }
            }
        }
        let f_hat = up as f64 / n0 as f64;
        let g_hat = down as f64 / n1 as f64;
        assert!((f_hat - chain.f).abs() < 4.0 * (chain.f * (1.0 - chain.f) / n0 as f64).sqrt(), "{f_hat} {}", chain.f);
        assert!((g_hat - chain.g).abs() < 4.0 * (chain.g * (1.0 - chain.g) / n1 as f64).sqrt(), "{g_hat} {}", chain.g);
        let pi = chain.stationary().unwrap();
        let frac = z.count_ones() as f64 / len as f64;
        let s = chain.gap();
        let sd = (pi * (1.0 - pi) * (2.0 - s) / (s * len as f64)).sqrt();
        assert!((frac - pi).abs() < 4.0 * sd, "{frac} {pi}");
    }
}

#[test]
fn mbsd_mean_tracks_sum_product_on_a_tree() {
    let (g, llh, d) = tree_fixture();
    let exact = sp::decode(&g, &llh, &SpConfig { max_iters: d, early_stop: false, tol: 0.0 }).marginals;
    let runs = 500;
    let mut mean = [0.0; 12];
    for s in 0..runs {
        let cfg = MbsdConfig { early_stop: false, ..MbsdConfig::new(1024, d, s) };
        for (m, v) in mean.iter_mut().zip(mbsd::decode(&g, &llh, &cfg).marginal_estimates()) {
            *m += v / runs as f64;
        }
    }
    for (i, (m, e)) in mean.iter().zip(&exact).enumerate() {
        assert!((m - e).abs() <= 0.02, "var {i}: {m} vs {e}");
    }
}

#[test]
fn mbsd_variance_within_bound() {
    let (g, llh, d) = tree_fixture();
    let (_, history) = sp::decode_traced(&g, &llh, &SpConfig { max_iters: d, early_stop: false, tol: 0.0 });
    let lambda = estimate_lambda(&g, &llh, &history);
    let k = 128;
    let runs = 400;
    let samples: Vec<Vec<f64>> = (0..runs)
        .map(|s| {
            let cfg = MbsdConfig { early_stop: false, ..MbsdConfig::new(k, d, 1000 + s) };
            mbsd::decode(&g, &llh, &cfg).marginal_estimates()
        })
        .collect();
    let bound = variance_bound(lambda, k as u64);
    for i in 0..12 {
        let m = samples.iter().map(|r| r[i]).sum::<f64>() / runs as f64;
        let v = samples.iter().map(|r| (r[i] - m).powi(2)).sum::<f64>() / (runs - 1) as f64;
        assert!(v <= bound * (1.0 + 3.0 * (2.0 / (runs - 1) as f64).sqrt()), "var {i}: {v} > {bound}");
    }
}

#[test]
fn sd_relabeling_checks_preserves_error_statistics() {
    use stochdec_core::channel::{likelihoods, transmit_all_zero, ChannelParams};
    let g = FactorGraph::gallager(60, 3, 6, 4).unwrap();
    let mut perm: Vec<usize> = (0..30).collect();
    perm.reverse();
    let pg = g.permute_chks(&perm).unwrap();
    let p = ChannelParams::at_ebno(2.0, 0.5, true).unwrap();
    let (mut a, mut b) = (0usize, 0usize);
    let frames = 300;
    for f in 0..frames {
        let y = transmit_all_zero(60, p.sigma2, &mut seed::stream(seed::derive(3, seed::NOISE_STREAM, f)));
        let llh = likelihoods(&y, p.sigma2, Some(p.nds_param)).unwrap();
        let cfg = SdConfig::new(400, 25, f);
        a += sd::decode(&g, &llh, &cfg).bit_errors();
        b += sd::decode(&pg, &llh, &cfg).bit_errors();
    }
    let n = (frames * 60) as f64;
    let (pa, pb) = (a as f64 / n, b as f64 / n);
    // Bit errors cluster within frames; allow for that with a wide band.
    let sd = ((pa + pb) / 2.0 * 60.0 / n).sqrt().max(1.0 / n);
    assert!((pa - pb).abs() < 5.0 * sd, "{pa} vs {pb}");
}
