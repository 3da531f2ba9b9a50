use covert_aircomp::baselines::{fixed_an_matrix, run_baseline, Scheme};
use covert_aircomp::covertness::{covert_roots, kld};
use covert_aircomp::linalg::fro2;
use covert_aircomp::model::{sample_channels, willie_powers, willie_variances, SystemConfig};
use covert_aircomp::solver::run;

fn assert_feasible(report: &covert_aircomp::solver::SolveReport, config: &SystemConfig, label: &str) {
    for (w, p) in report.design.w_k.iter().zip(&config.p_sensor) {
        assert!(fro2(w) <= p * (1.0 + 1e-7), "{label}: sensor power");
    }
    assert!(fro2(&report.design.v) <= config.p_ap * (1.0 + 1e-7), "{label}: AN power");
    assert!(report.kld_final <= 2.0 * config.epsilon.powi(2) + 1e-6, "{label}: kld {}", report.kld_final);
}

#[test]
fn runs_are_deterministic() {
    let config = SystemConfig::desk().with_seed(21);
    let ch = sample_channels(&config, 1).unwrap();
    let (a, b) = (run(&ch, &config).unwrap(), run(&ch, &config).unwrap());
    assert_eq!(a.design, b.design);
    assert_eq!(a.objective_trace, b.objective_trace);
}

#[test]
fn report_is_consistent() {
    let config = SystemConfig::desk().with_seed(22);
    let ch = sample_channels(&config, 0).unwrap();
    let r = run(&ch, &config).unwrap();
    let n = r.iterations + 1;
    assert_eq!(r.objective_trace.len(), n);
    assert_eq!(r.residual_trace.len(), n);
    assert_eq!(r.mse_trace.len(), n);
    assert_eq!(r.penalty_trace.len(), n);
    assert_eq!(*r.mse_trace.last().unwrap(), r.mse);
    let (s0, s1) = willie_variances(&r.design.w_k, &r.design.v, &ch, config.sigma2_w).unwrap();
    assert_eq!(kld(s0, s1).unwrap(), r.kld_final);
    if r.converged {
        // Once the equalities bind the lifted objective is the physical one.
        let kns = (config.k * config.n_s) as f64;
        let last = *r.objective_trace.last().unwrap();
        assert!((r.mse - last).abs() <= 1e-3 * kns, "{} vs {last}", r.mse);
    }
}

#[test]
fn every_scheme_is_feasible() {
    let config = SystemConfig::desk().with_seed(23);
    for trial in 0..3 {
        let ch = sample_channels(&config, trial).unwrap();
        for scheme in Scheme::ALL {
            let r = run_baseline(scheme, &ch, &config, trial).unwrap();
            assert_feasible(&r, &config, &format!("{scheme} trial {trial}"));
            if scheme != Scheme::Proposed {
                assert_eq!(r.design.v, fixed_an_matrix(scheme, &ch, &config, trial).unwrap());
            }
        }
    }
}

#[test]
fn no_an_respects_a_tiny_cap() {
    let config = SystemConfig::desk().with_seed(24).with_epsilon(0.005);
    let bounds = covert_roots(config.epsilon).unwrap();
    let ch = sample_channels(&config, 0).unwrap();
    let r = run_baseline(Scheme::NoAn, &ch, &config, 0).unwrap();
    let (d, e) = willie_powers(&r.design.w_k, &r.design.v, &ch);
    assert_eq!(e, 0.0);
    assert!(d <= bounds.cap(0.0, config.sigma2_w) + 1e-9, "d = {d}");
}

#[test]
fn proposed_starts_no_worse_than_silence() {
    // Zero beamformers give MSE K n_s; the initial point must already beat it.
    let config = SystemConfig::desk().with_seed(25);
    let ch = sample_channels(&config, 0).unwrap();
    let r = run(&ch, &config).unwrap();
    assert!(r.mse_trace[0] < (config.k * config.n_s) as f64);
    assert!(r.mse <= r.mse_trace[0] + 1e-9);
}

#[test]
fn invalid_config_is_rejected() {
    let mut config = SystemConfig::desk();
    config.epsilon = -1.0;
    let ch = sample_channels(&SystemConfig::desk(), 0).unwrap();
    assert!(run(&ch, &config).is_err());
}
