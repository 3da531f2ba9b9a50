use covert_aircomp::dcp::{
    f_psi, f_upsilon, linearize_f_psi, linearize_f_upsilon, penalized_objective, surrogate_objective, Iterate,
};
use covert_aircomp::linalg::{c, CMat};
use covert_aircomp::model::{gaussian_matrix, sample_channels, ChannelSet, SystemConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn psd(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMat {
    let g = gaussian_matrix(rng, n, n, scale);
    &g * g.adjoint()
}

/// A lifted point with random beamformers and random slack on every LMI.
fn random_iterate(rng: &mut ChaCha8Rng, ch: &ChannelSet, config: &SystemConfig, scale: f64) -> Iterate {
    let w_k = (0..config.k).map(|_| gaussian_matrix(rng, config.n_s, config.n_s, scale)).collect();
    let v = gaussian_matrix(rng, config.n_t, config.n_t, scale);
    let mut it = Iterate::from_transmit(w_k, v, ch);
    it.a += psd(rng, config.n_r, 0.1);
    it.b += psd(rng, config.n_r, 0.1);
    it.c = gaussian_matrix(rng, config.n_r, config.n_s, scale);
    it.d += 0.1;
    it.e += 0.1;
    it
}

fn setup(seed: u64) -> (SystemConfig, ChannelSet, ChaCha8Rng) {
    let config = SystemConfig::desk().with_seed(seed);
    let ch = sample_channels(&config, 0).unwrap();
    (config, ch, ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn upsilon_tangent_is_a_minorant(seed in 0u64..1_000_000) {
        let (config, ch, mut rng) = setup(seed);
        let anchor = random_iterate(&mut rng, &ch, &config, 1.0);
        let point = random_iterate(&mut rng, &ch, &config, 2.0);
        let lin = linearize_f_upsilon(&anchor, config.sigma2_a);
        let exact = f_upsilon(&point.a, &point.b, &point.c, config.sigma2_a);
        prop_assert!(lin.evaluate(&point.a, &point.b, &point.c) <= exact + 1e-9 * (1.0 + exact.abs()));
    }

    #[test]
    fn psi_tangent_is_a_minorant(seed in 0u64..1_000_000) {
        let (config, ch, mut rng) = setup(seed);
        let anchor = random_iterate(&mut rng, &ch, &config, 1.0);
        let point = random_iterate(&mut rng, &ch, &config, 2.0);
        let lin = linearize_f_psi(&anchor, &ch);
        let exact = f_psi(&point.t, &point.s_row, &point.v, &ch);
        prop_assert!(lin.evaluate(&point.t, &point.s_row, &point.v) <= exact + 1e-9 * (1.0 + exact.abs()));
    }

    #[test]
    fn surrogate_majorizes_and_touches(seed in 0u64..1_000_000, p in 1e-3f64..1e3) {
        let (config, ch, mut rng) = setup(seed);
        let anchor = random_iterate(&mut rng, &ch, &config, 1.0);
        let point = random_iterate(&mut rng, &ch, &config, 1.5);
        let at_anchor = penalized_objective(&anchor, p, &config, &ch);
        prop_assert!((surrogate_objective(&anchor, &anchor, p, &config, &ch) - at_anchor).abs() <= 1e-9 * (1.0 + at_anchor.abs()));
        let exact = penalized_objective(&point, p, &config, &ch);
        prop_assert!(surrogate_objective(&point, &anchor, p, &config, &ch) >= exact - 1e-9 * (1.0 + exact.abs()));
    }
}

/// Remainder of the tangent plane along a random direction shrinks
/// quadratically in the step.
#[test]
fn upsilon_remainder_is_second_order() {
    for seed in 0..20 {
        let (config, ch, mut rng) = setup(seed);
        let anchor = random_iterate(&mut rng, &ch, &config, 1.0);
        let lin = linearize_f_upsilon(&anchor, config.sigma2_a);
        let (da, db) = (psd(&mut rng, config.n_r, 1.0), psd(&mut rng, config.n_r, 1.0));
        let dc = gaussian_matrix(&mut rng, config.n_r, config.n_s, 1.0);
        let remainder = |h: f64| {
            let (a, b, cc) = (&anchor.a + &da * c(h, 0.0), &anchor.b + &db * c(h, 0.0), &anchor.c + &dc * c(h, 0.0));
            f_upsilon(&a, &b, &cc, config.sigma2_a) - lin.evaluate(&a, &b, &cc)
        };
        let (r1, r2) = (remainder(1e-2), remainder(5e-3));
        let ratio = r1 / r2;
        assert!((1.0..=16.0).contains(&ratio), "seed {seed}: ratio {ratio}");
    }
}
