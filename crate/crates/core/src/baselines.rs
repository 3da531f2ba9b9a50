//! Comparison schemes with a fixed AN beamformer, and a grid-search oracle
//! for the single-antenna, single-sensor case.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::conic::{InteriorPoint, IpmSettings};
use crate::covertness::{covert_feasible, covert_roots};
use crate::error::{Error, Result};
use crate::linalg::{c, CMat};
use crate::model::{gaussian_matrix, trial_rng, ChannelSet, SystemConfig};
use crate::solver::{run, run_with, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    RandomAn,
    MrtAn,
    NoAn,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::RandomAn, Scheme::MrtAn, Scheme::NoAn];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::RandomAn => "random_an",
            Scheme::MrtAn => "mrt_an",
            Scheme::NoAn => "no_an",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown scheme {s:?}")))
    }
}

/// Stream offset separating AN draws from channel draws of the same trial.
const AN_STREAM: u64 = 1 << 40;

/// The AN beamformer a baseline holds fixed. `trial_index` seeds the
/// random scheme.
pub fn fixed_an_matrix(scheme: Scheme, ch: &ChannelSet, config: &SystemConfig, trial_index: u64) -> Result<CMat> {
    let n_t = ch.n_t();
    match scheme {
        Scheme::Proposed => Err(Error::ProposedScheme),
        Scheme::NoAn => Ok(CMat::zeros(n_t, n_t)),
        Scheme::RandomAn => {
            let mut rng = trial_rng(config.seed, trial_index.wrapping_add(AN_STREAM));
            let g = gaussian_matrix(&mut rng, n_t, n_t, 1.0);
            Ok(&g * c(config.p_ap.sqrt() / g.norm(), 0.0))
        }
        Scheme::MrtAn => {
            let norm = ch.f.norm();
            let mut v = CMat::zeros(n_t, n_t);
            if norm > 0.0 {
                let scale = config.p_ap.sqrt() / norm;
                for i in 0..n_t {
                    v[(i, 0)] = ch.f[(0, i)].conj() * scale;
                }
            } else {
                v[(0, 0)] = c(config.p_ap.sqrt(), 0.0);
            }
            Ok(v)
        }
    }
}

/// Runs any scheme on one channel realization.
pub fn run_baseline(scheme: Scheme, ch: &ChannelSet, config: &SystemConfig, trial_index: u64) -> Result<SolveReport> {
    match scheme {
        Scheme::Proposed => run(ch, config),
        _ => {
            let v = fixed_an_matrix(scheme, ch, config, trial_index)?;
            run_with(ch, config, Some(&v), &InteriorPoint::new(IpmSettings::default()))
        }
    }
}

/// MSE of the scalar model with the optimal receiver, given beamformer
/// magnitudes.
pub fn scalar_mse(ch: &ChannelSet, sigma2_a: f64, w: f64, v: f64) -> f64 {
    let signal = ch.h_k[0][(0, 0)].norm_sqr() * w * w;
    let noise = ch.h_aa[(0, 0)].norm_sqr() * v * v + sigma2_a;
    noise / (signal + noise)
}

/// Best `(mse, |w|, |v|)` over a `grid x grid` lattice of covert-feasible
/// magnitudes, followed by `refinements` zooms around the best cell.
pub fn grid_search_scalar(
    ch: &ChannelSet,
    config: &SystemConfig,
    grid: usize,
    refinements: usize,
) -> Result<(f64, f64, f64)> {
    if ch.n_s() != 1 || ch.n_t() != 1 || ch.n_r() != 1 || ch.k() != 1 {
        return Err(Error::Dimension("grid search needs n_s = n_t = n_r = k = 1".into()));
    }
    if grid < 2 {
        return Err(Error::Config("grid must have at least two cells per axis".into()));
    }
    let bounds = covert_roots(config.epsilon)?;
    let (g2, f2) = (ch.g_k[0][(0, 0)].norm_sqr(), ch.f[(0, 0)].norm_sqr());
    let feasible = |w: f64, v: f64| covert_feasible(g2 * w * w, f2 * v * v, &bounds, config.sigma2_w);

    let (mut w_lo, mut w_hi) = (0.0, config.p_sensor[0].sqrt());
    let (mut v_lo, mut v_hi) = (0.0, config.p_ap.sqrt());
    // The all-zero point is always feasible.
    let mut best = (scalar_mse(ch, config.sigma2_a, 0.0, 0.0), 0.0, 0.0);
    for _ in 0..=refinements {
        let (dw, dv) = ((w_hi - w_lo) / grid as f64, (v_hi - v_lo) / grid as f64);
        for i in 0..=grid {
            let w = w_lo + dw * i as f64;
            for j in 0..=grid {
                let v = v_lo + dv * j as f64;
                if feasible(w, v) {
                    let m = scalar_mse(ch, config.sigma2_a, w, v);
                    if m < best.0 {
                        best = (m, w, v);
                    }
                }
            }
        }
        (w_lo, w_hi) = ((best.1 - dw).max(0.0), (best.1 + dw).min(config.p_sensor[0].sqrt()));
        (v_lo, v_hi) = ((best.2 - dv).max(0.0), (best.2 + dv).min(config.p_ap.sqrt()));
    }
    Ok(best)
}

/// Grid search with one refinement pass.
pub fn brute_force_scalar(ch: &ChannelSet, config: &SystemConfig, grid: usize) -> Result<(f64, f64, f64)> {
    grid_search_scalar(ch, config, grid, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fro2;
    use crate::model::{design_with_mmse, mse, sample_channels, willie_powers};

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("mrt".parse::<Scheme>().is_err());
    }

    #[test]
    fn fixed_matrices() {
        let config = SystemConfig::desk().with_seed(4);
        let ch = sample_channels(&config, 2).unwrap();
        assert!(matches!(fixed_an_matrix(Scheme::Proposed, &ch, &config, 2), Err(Error::ProposedScheme)));

        let none = fixed_an_matrix(Scheme::NoAn, &ch, &config, 2).unwrap();
        assert_eq!(none.norm(), 0.0);

        let random = fixed_an_matrix(Scheme::RandomAn, &ch, &config, 2).unwrap();
        assert!((fro2(&random) - config.p_ap).abs() < 1e-12 * config.p_ap);
        assert_eq!(random, fixed_an_matrix(Scheme::RandomAn, &ch, &config, 2).unwrap());
        assert_ne!(random, fixed_an_matrix(Scheme::RandomAn, &ch, &config, 3).unwrap());

        let mrt = fixed_an_matrix(Scheme::MrtAn, &ch, &config, 2).unwrap();
        let (_, e) = willie_powers(&[], &mrt, &ch);
        assert!((e - config.p_ap * fro2(&ch.f)).abs() < 1e-9 * e);
        assert!((fro2(&mrt) - config.p_ap).abs() < 1e-9 * config.p_ap);
    }

    #[test]
    fn scalar_formula_matches_model() {
        let config = SystemConfig::scalar().with_seed(8);
        let ch = sample_channels(&config, 0).unwrap();
        for (w, v) in [(0.5, 0.1), (2.0, 3.0), (0.0, 1.0)] {
            let design = design_with_mmse(vec![CMat::from_element(1, 1, c(w, 0.0))], CMat::from_element(1, 1, c(0.0, v)), &ch, 1.0).unwrap();
            let want = mse(&design, &ch, 1.0).unwrap();
            assert!((scalar_mse(&ch, 1.0, w, v) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn slack_cap_uses_full_power() {
        let mut config = SystemConfig::scalar().with_seed(9);
        config.p_sensor = vec![1e-4];
        let ch = sample_channels(&config, 0).unwrap();
        let (_, w, _) = brute_force_scalar(&ch, &config, 100).unwrap();
        assert!((w - 1e-2).abs() < 1e-12);
    }

    #[test]
    fn binding_cap_without_an() {
        let mut config = SystemConfig::scalar().with_seed(10);
        config.p_sensor = vec![1e6];
        config.p_ap = 1e-16;
        let ch = sample_channels(&config, 0).unwrap();
        let bounds = covert_roots(config.epsilon).unwrap();
        let (_, w, _) = brute_force_scalar(&ch, &config, 400).unwrap();
        let g2 = ch.g_k[0][(0, 0)].norm_sqr();
        let cap = bounds.cap(0.0, config.sigma2_w);
        // One refined cell in |w| is 2 * sqrt(P) / grid^2.
        let cell = 2.0 * 1e3 / 400.0f64.powi(2);
        let w_star = (cap / g2).sqrt();
        assert!(w <= w_star && w_star - w <= cell, "{w} vs {w_star}");
    }

    #[test]
    fn finer_grid_never_worse() {
        let config = SystemConfig::scalar().with_seed(12);
        for trial in 0..10 {
            let ch = sample_channels(&config, trial).unwrap();
            let mut last = f64::INFINITY;
            for grid in [25, 50, 100, 200] {
                let (m, _, _) = grid_search_scalar(&ch, &config, grid, 0).unwrap();
                assert!(m <= last);
                last = m;
            }
        }
    }

    #[test]
    fn rejects_non_scalar() {
        let config = SystemConfig::desk();
        let ch = sample_channels(&config, 0).unwrap();
        assert!(brute_force_scalar(&ch, &config, 10).is_err());
    }
}
