//! Physical system: scenario parameters, channel realizations, the aggregation
//! MSE, Willie's received-signal variances and the closed-form MMSE receiver.
//!
//! Channels are i.i.d. circularly-symmetric complex Gaussian with unit
//! variance. Every trial draws from its own ChaCha stream selected by
//! `(seed, trial_index)`, so trials are reproducible and order-insensitive.

use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fro2, hpd_inverse, identity, real_scaled_identity, CMat};

/// Converts a power ratio in dB to a linear power, relative to `sigma2`.
pub fn db_to_linear(db: f64, sigma2: f64) -> f64 {
    10f64.powf(db / 10.0) * sigma2
}

/// Every scalar parameter of one scenario. Powers and noise are linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Antennas per sensor.
    pub n_s: usize,
    /// AP transmit (artificial noise) antennas.
    pub n_t: usize,
    /// AP receive antennas.
    pub n_r: usize,
    /// Number of sensors.
    pub k: usize,
    /// Per-sensor power budget.
    pub p_sensor: Vec<f64>,
    /// AP artificial-noise power budget.
    pub p_ap: f64,
    pub sigma2_a: f64,
    pub sigma2_w: f64,
    /// Self-interference coefficient.
    pub rho: f64,
    /// Tolerated detection coefficient; the KLD budget is `2 epsilon^2`.
    pub epsilon: f64,
    /// Initial exact-penalty factor.
    pub penalty: f64,
    pub max_iters: usize,
    pub tol_obj: f64,
    pub tol_residual: f64,
    pub seed: u64,
}

impl Default for SystemConfig {
    /// The full-size scenario: four antennas everywhere, ten sensors,
    /// `P_s/sigma^2 = 10 dB`, `P_a/sigma^2 = 30 dB`, `rho = 0.5`, `epsilon = 0.1`.
    fn default() -> Self {
        Self::with_dims(4, 10, 10.0)
    }
}

impl SystemConfig {
    /// Square antenna configuration (`n_s = n_t = n_r = n`) with the
    /// standard powers and noise normalization `sigma^2 = 1`.
    pub fn with_dims(n: usize, k: usize, p_s_db: f64) -> Self {
        let sigma2 = 1.0;
        SystemConfig {
            n_s: n,
            n_t: n,
            n_r: n,
            k,
            p_sensor: vec![db_to_linear(p_s_db, sigma2); k],
            p_ap: db_to_linear(30.0, sigma2),
            sigma2_a: sigma2,
            sigma2_w: sigma2,
            rho: 0.5,
            epsilon: 0.1,
            penalty: 0.03,
            max_iters: 200,
            tol_obj: 1e-4,
            tol_residual: 1e-5,
            seed: 0,
        }
    }

    /// Desk-scale scenario: two antennas everywhere, three sensors.
    pub fn desk() -> Self {
        Self::with_dims(2, 3, 10.0)
    }

    /// Single-antenna, single-sensor scenario.
    pub fn scalar() -> Self {
        Self::with_dims(1, 1, 10.0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Sets a common sensor power from `P_s/sigma_a^2` in dB.
    pub fn with_p_s_db(mut self, db: f64) -> Self {
        self.p_sensor = vec![db_to_linear(db, self.sigma2_a); self.k];
        self
    }

    /// Changes the sensor count, keeping the first sensor's power for all.
    pub fn with_k(mut self, k: usize) -> Self {
        let p = self.p_sensor.first().copied().unwrap_or(1.0);
        self.k = k;
        self.p_sensor = vec![p; k];
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_s == 0 || self.n_t == 0 || self.n_r == 0 || self.k == 0 {
            return bad("all dimensions must be at least 1");
        }
        if self.p_sensor.len() != self.k {
            return Err(Error::Config(format!(
                "p_sensor has {} entries for {} sensors",
                self.p_sensor.len(),
                self.k
            )));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !self.p_sensor.iter().all(|&p| positive(p)) || !positive(self.p_ap) {
            return bad("power budgets must be positive and finite");
        }
        if !positive(self.sigma2_a) || !positive(self.sigma2_w) {
            return bad("noise powers must be positive and finite");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1]");
        }
        if !positive(self.epsilon) {
            return bad("epsilon must be positive");
        }
        if !positive(self.penalty) {
            return bad("penalty must be positive");
        }
        if !(self.tol_obj >= 0.0 && self.tol_residual >= 0.0) {
            return bad("tolerances must be non-negative");
        }
        Ok(())
    }
}

/// One realization of every channel in the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Sensor k to AP, `n_r x n_s` each.
    pub h_k: Vec<CMat>,
    /// Sensor k to Willie, `1 x n_s` each.
    pub g_k: Vec<CMat>,
    /// AP to Willie, `1 x n_t`.
    pub f: CMat,
    /// AP feedback loop, `n_r x n_t`.
    pub h_loop: CMat,
    /// Self-interference channel `sqrt(rho) * h_loop`.
    pub h_aa: CMat,
}

impl ChannelSet {
    /// Assembles a channel set from explicit matrices, deriving `h_aa`.
    pub fn new(h_k: Vec<CMat>, g_k: Vec<CMat>, f: CMat, h_loop: CMat, rho: f64) -> Result<Self> {
        if h_k.len() != g_k.len() || h_k.is_empty() {
            return Err(Error::Dimension("need one h_k and one g_k per sensor".into()));
        }
        let (n_r, n_s) = h_k[0].shape();
        let n_t = f.ncols();
        let consistent = h_k.iter().all(|h| h.shape() == (n_r, n_s))
            && g_k.iter().all(|g| g.shape() == (1, n_s))
            && f.nrows() == 1
            && h_loop.shape() == (n_r, n_t);
        if !consistent {
            return Err(Error::Dimension("channel shapes are inconsistent".into()));
        }
        let h_aa = h_loop.map(|z| z * rho.sqrt());
        Ok(ChannelSet { h_k, g_k, f, h_loop, h_aa })
    }

    pub fn k(&self) -> usize {
        self.h_k.len()
    }
    pub fn n_r(&self) -> usize {
        self.h_k[0].nrows()
    }
    pub fn n_s(&self) -> usize {
        self.h_k[0].ncols()
    }
    pub fn n_t(&self) -> usize {
        self.f.ncols()
    }
}

/// The per-trial random stream.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index);
    rng
}

/// Draws a `CN(0, variance)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex<f64> {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(s * re, s * im)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng, variance))
}

pub fn sample_channels(config: &SystemConfig, trial_index: u64) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = trial_rng(config.seed, trial_index);
    let h_k = (0..config.k).map(|_| gaussian_matrix(&mut rng, config.n_r, config.n_s, 1.0)).collect();
    let g_k = (0..config.k).map(|_| gaussian_matrix(&mut rng, 1, config.n_s, 1.0)).collect();
    let f = gaussian_matrix(&mut rng, 1, config.n_t, 1.0);
    let h_loop = gaussian_matrix(&mut rng, config.n_r, config.n_t, 1.0);
    ChannelSet::new(h_k, g_k, f, h_loop, config.rho)
}

/// Sensor beamformers, AN beamformer and aggregation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub w_k: Vec<CMat>,
    pub v: CMat,
    pub u_a: CMat,
}

fn check_transmit(w_k: &[CMat], v: &CMat, ch: &ChannelSet) -> Result<()> {
    if w_k.len() != ch.k() {
        return Err(Error::Dimension(format!("{} beamformers for {} sensors", w_k.len(), ch.k())));
    }
    if w_k.iter().any(|w| w.shape() != (ch.n_s(), ch.n_s())) {
        return Err(Error::Dimension("sensor beamformers must be n_s x n_s".into()));
    }
    if v.shape() != (ch.n_t(), ch.n_t()) {
        return Err(Error::Dimension("AN beamformer must be n_t x n_t".into()));
    }
    Ok(())
}

/// `sum_k ||U^H H_k W_k - I||^2 + ||U^H H_aa V||^2 + sigma_a^2 ||U||^2`.
pub fn mse(design: &Design, channels: &ChannelSet, sigma2_a: f64) -> Result<f64> {
    check_transmit(&design.w_k, &design.v, channels)?;
    if design.u_a.shape() != (channels.n_r(), channels.n_s()) {
        return Err(Error::Dimension("aggregation matrix must be n_r x n_s".into()));
    }
    let uh = design.u_a.adjoint();
    let eye = identity(channels.n_s());
    let signal: f64 = design
        .w_k
        .iter()
        .zip(&channels.h_k)
        .map(|(w, h)| fro2(&(&uh * h * w - &eye)))
        .sum();
    let interference = fro2(&(&uh * &channels.h_aa * &design.v));
    Ok(signal + interference + sigma2_a * fro2(&design.u_a))
}

/// `A = sum_k H_k W_k W_k^H H_k^H`.
pub fn signal_covariance(w_k: &[CMat], channels: &ChannelSet) -> CMat {
    let n_r = channels.n_r();
    w_k.iter().zip(&channels.h_k).fold(CMat::zeros(n_r, n_r), |acc, (w, h)| {
        let hw = h * w;
        acc + &hw * hw.adjoint()
    })
}

/// `B = H_aa V V^H H_aa^H`.
pub fn interference_covariance(v: &CMat, channels: &ChannelSet) -> CMat {
    let hv = &channels.h_aa * v;
    &hv * hv.adjoint()
}

/// `C = sum_k H_k W_k`.
pub fn cross_term(w_k: &[CMat], channels: &ChannelSet) -> CMat {
    w_k.iter()
        .zip(&channels.h_k)
        .fold(CMat::zeros(channels.n_r(), channels.n_s()), |acc, (w, h)| acc + h * w)
}

/// Closed-form MMSE aggregation matrix `(A + B + sigma_a^2 I)^{-1} C`.
pub fn mmse_receiver(w_k: &[CMat], v: &CMat, channels: &ChannelSet, sigma2_a: f64) -> Result<CMat> {
    check_transmit(w_k, v, channels)?;
    let a = signal_covariance(w_k, channels);
    let b = interference_covariance(v, channels);
    let m = a + b + real_scaled_identity(channels.n_r(), sigma2_a);
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Singular("A + B + sigma_a^2 I is not positive definite".into()))?;
    Ok(chol.solve(&cross_term(w_k, channels)))
}

/// Builds a full design by attaching the MMSE receiver to `(w_k, v)`.
pub fn design_with_mmse(w_k: Vec<CMat>, v: CMat, channels: &ChannelSet, sigma2_a: f64) -> Result<Design> {
    let u_a = mmse_receiver(&w_k, &v, channels, sigma2_a)?;
    Ok(Design { w_k, v, u_a })
}

/// Willie's received-signal variances `(sigma0, sigma1)` under no
/// transmission and under transmission.
pub fn willie_variances(w_k: &[CMat], v: &CMat, channels: &ChannelSet, sigma2_w: f64) -> Result<(f64, f64)> {
    check_transmit(w_k, v, channels)?;
    let (d, e) = willie_powers(w_k, v, channels);
    let sigma0 = e + sigma2_w;
    Ok((sigma0, d + sigma0))
}

/// `(d, e)`: sensor power and AN power received at Willie.
pub fn willie_powers(w_k: &[CMat], v: &CMat, channels: &ChannelSet) -> (f64, f64) {
    let d = w_k.iter().zip(&channels.g_k).map(|(w, g)| fro2(&(g * w))).sum();
    let e = fro2(&(&channels.f * v));
    (d, e)
}

/// Sample mean of the aggregation error and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMse {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimate of the MSE obtained by materializing the sensor
/// symbols, the AN symbols and the receiver noise.
pub fn simulate_empirical_mse(
    design: &Design,
    channels: &ChannelSet,
    sigma2_a: f64,
    n_samples: usize,
    seed: u64,
) -> Result<EmpiricalMse> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be at least 1".into()));
    }
    // Validates every shape once.
    mse(design, channels, sigma2_a)?;
    let (n_s, n_t, n_r) = (channels.n_s(), channels.n_t(), channels.n_r());
    let effective: Vec<CMat> = design.w_k.iter().zip(&channels.h_k).map(|(w, h)| h * w).collect();
    let an = &channels.h_aa * &design.v;
    let uh = design.u_a.adjoint();
    let mut rng = trial_rng(seed, u64::MAX);

    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let mut target = CMat::zeros(n_s, 1);
        let mut y = gaussian_matrix(&mut rng, n_r, 1, sigma2_a);
        for hw in &effective {
            let s_k = gaussian_matrix(&mut rng, n_s, 1, 1.0);
            y += hw * &s_k;
            target += s_k;
        }
        let z = gaussian_matrix(&mut rng, n_t, 1, 1.0);
        y += &an * z;
        let err = fro2(&(target - &uh * y));
        sum += err;
        sum_sq += err * err;
    }
    let n = n_samples as f64;
    let mean = sum / n;
    let var = if n_samples > 1 { (sum_sq - n * mean * mean).max(0.0) / (n - 1.0) } else { 0.0 };
    Ok(EmpiricalMse { mean, std_error: (var / n).sqrt() })
}

/// `M = (A + B + sigma^2 I)^{-1}` with a tiny diagonal shift when the
/// matrix is close to singular.
pub(crate) fn regularized_inverse(sum: &CMat, sigma2: f64) -> CMat {
    let n = sum.nrows();
    let m = sum + real_scaled_identity(n, sigma2);
    let ev = crate::linalg::hermitian_eigenvalues(&m);
    let (lo, hi) = (ev[0], ev[n - 1]);
    let shifted = if lo <= 0.0 || hi / lo > 1e10 { m + real_scaled_identity(n, 1e-9) } else { m };
    hpd_inverse(&shifted).expect("shifted matrix is positive definite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn identity_channels(n: usize) -> ChannelSet {
        ChannelSet::new(
            vec![identity(n)],
            vec![CMat::zeros(1, n)],
            CMat::zeros(1, n),
            CMat::zeros(n, n),
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = SystemConfig::desk().with_seed(7);
        assert_eq!(sample_channels(&cfg, 0).unwrap(), sample_channels(&cfg, 0).unwrap());
        assert_ne!(sample_channels(&cfg, 0).unwrap(), sample_channels(&cfg, 1).unwrap());
    }

    #[test]
    fn zero_rho_silences_self_interference() {
        let mut cfg = SystemConfig::desk();
        cfg.rho = 0.0;
        let ch = sample_channels(&cfg, 3).unwrap();
        assert!(ch.h_aa.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn self_interference_is_scaled_loop() {
        let cfg = SystemConfig::desk();
        let ch = sample_channels(&cfg, 1).unwrap();
        let s = cfg.rho.sqrt();
        for (a, h) in ch.h_aa.iter().zip(ch.h_loop.iter()) {
            assert_eq!(*a, h * s);
        }
    }

    #[test]
    fn sampler_moments() {
        let mut cfg = SystemConfig::with_dims(10, 10, 10.0);
        cfg.seed = 11;
        let ch = sample_channels(&cfg, 0).unwrap();
        let entries: Vec<_> = ch.h_k.iter().flat_map(|h| h.iter().copied()).collect();
        assert_eq!(entries.len(), 1000);
        let mut all = entries;
        for t in 1..10 {
            let ch = sample_channels(&cfg, t).unwrap();
            all.extend(ch.h_k.iter().flat_map(|h| h.iter().copied()));
        }
        let n = all.len() as f64;
        let mean = all.iter().sum::<Complex<f64>>() / n;
        let var = all.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n;
        assert!(mean.norm() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn mse_with_zero_receiver_is_stream_count() {
        let cfg = SystemConfig::desk();
        let ch = sample_channels(&cfg, 0).unwrap();
        let d = Design {
            w_k: vec![identity(2); 3],
            v: identity(2),
            u_a: CMat::zeros(2, 2),
        };
        assert!((mse(&d, &ch, 1.0).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn identity_channel_arithmetic() {
        let ch = identity_channels(2);
        let d = Design { w_k: vec![identity(2)], v: CMat::zeros(2, 2), u_a: identity(2) * c(0.5, 0.0) };
        assert!((mse(&d, &ch, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let u = mmse_receiver(&d.w_k, &d.v, &ch, 1.0).unwrap();
        assert!((u - identity(2) * c(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn silent_sensors_give_zero_receiver() {
        let cfg = SystemConfig::desk();
        let ch = sample_channels(&cfg, 0).unwrap();
        let u = mmse_receiver(&vec![CMat::zeros(2, 2); 3], &CMat::zeros(2, 2), &ch, 1.0).unwrap();
        assert_eq!(u.norm(), 0.0);
    }

    #[test]
    fn mse_rejects_bad_shapes() {
        let ch = identity_channels(2);
        let d = Design { w_k: vec![identity(3)], v: CMat::zeros(2, 2), u_a: identity(2) };
        assert!(matches!(mse(&d, &ch, 1.0), Err(Error::Dimension(_))));
        let d = Design { w_k: vec![identity(2)], v: CMat::zeros(2, 2), u_a: CMat::zeros(3, 2) };
        assert!(matches!(mse(&d, &ch, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn willie_variances_arithmetic() {
        let cfg = SystemConfig::desk();
        let ch = sample_channels(&cfg, 0).unwrap();
        let zero = willie_variances(&vec![CMat::zeros(2, 2); 3], &CMat::zeros(2, 2), &ch, 1.3).unwrap();
        assert_eq!(zero, (1.3, 1.3));

        let scalar = ChannelSet::new(
            vec![identity(1)],
            vec![identity(1)],
            CMat::zeros(1, 1),
            CMat::zeros(1, 1),
            0.5,
        )
        .unwrap();
        let w = CMat::from_element(1, 1, c(0.2f64.sqrt(), 0.0));
        let (s0, s1) = willie_variances(&[w], &identity(1), &scalar, 1.0).unwrap();
        assert!((s0 - 1.0).abs() < 1e-15 && (s1 - 1.2).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = SystemConfig::desk();
        cfg.rho = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::desk();
        cfg.p_sensor.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = SystemConfig::desk();
        cfg.sigma2_w = 0.0;
        assert!(sample_channels(&cfg, 0).is_err());
    }

    #[test]
    fn default_is_full_scenario() {
        let cfg = SystemConfig::default();
        assert_eq!((cfg.n_s, cfg.n_t, cfg.n_r, cfg.k), (4, 4, 4, 10));
        assert!((cfg.p_ap - 1000.0).abs() < 1e-9);
        assert_eq!(cfg.rho, 0.5);
        assert_eq!(cfg.epsilon, 0.1);
        assert_eq!(cfg.sigma2_a, cfg.sigma2_w);
    }

    #[test]
    fn empirical_zero_receiver() {
        let cfg = SystemConfig::desk();
        let ch = sample_channels(&cfg, 0).unwrap();
        let d = Design { w_k: vec![identity(2); 3], v: identity(2), u_a: CMat::zeros(2, 2) };
        let est = simulate_empirical_mse(&d, &ch, 1.0, 10_000, 5).unwrap();
        assert!((est.mean - 6.0).abs() <= 3.0 * est.std_error, "{est:?}");
        let again = simulate_empirical_mse(&d, &ch, 1.0, 10_000, 5).unwrap();
        assert_eq!(est, again);
    }
}
