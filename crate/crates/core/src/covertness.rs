//! Detection-theoretic side: Willie's KLD, the Pinsker bound on the
//! detection error probability, the exact minimum DEP of the likelihood
//! ratio test, the Lambert-W function, and the linear covertness cap.

use std::f64::consts::E;

use crate::error::{Error, Result};

/// Slack used when checking the linear covertness cap.
pub const COVERT_SLACK: f64 = 1e-9;

/// Real branches of the Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `W_0`, defined for `z >= -1/e`, values `>= -1`.
    Principal,
    /// `W_{-1}`, defined for `-1/e <= z < 0`, values `<= -1`.
    MinusOne,
}

const BRANCH_POINT: f64 = -1.0 / E;

/// Solves `w exp(w) = z` on the requested branch with Halley's iteration.
pub fn lambert_w(branch: Branch, z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("lambert_w({z})")));
    }
    // Arguments within rounding of the branch point map to -1.
    let slack = 4.0 * f64::EPSILON;
    if z < BRANCH_POINT - slack {
        return Err(Error::Domain(format!("lambert_w({z}) below -1/e")));
    }
    if branch == Branch::MinusOne && z >= 0.0 {
        return Err(Error::Domain(format!("lambert_w_-1({z}) requires z < 0")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    let q = E * z + 1.0;
    if q <= slack {
        return Ok(-1.0);
    }
    // Series in p = sqrt(2(ez + 1)) around the branch point.
    let p = (2.0 * q).sqrt();
    let mut w = match branch {
        Branch::Principal if z < -0.25 => -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p,
        Branch::Principal if z < E => (1.0 + z).ln(),
        Branch::Principal => {
            let l1 = z.ln();
            let l2 = l1.ln();
            l1 - l2 + l2 / l1
        }
        Branch::MinusOne if z < -0.25 => -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p * p * p,
        Branch::MinusOne => {
            let l1 = (-z).ln();
            let l2 = (-l1).ln();
            l1 - l2 + l2 / l1
        }
    };
    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            break;
        }
    }
    // Keep the iterate on its branch.
    Ok(match branch {
        Branch::Principal => w.max(-1.0),
        Branch::MinusOne => w.min(-1.0),
    })
}

/// The two roots of `ln x + 1/x = 1 + 2 epsilon^2` and the resulting cap
/// factor `x2 - 1` on the ratio `d / (e + sigma_w^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovertBounds {
    pub epsilon: f64,
    pub x1: f64,
    pub x2: f64,
    pub cap_factor: f64,
}

impl CovertBounds {
    /// Largest sensor power `d` Willie may receive given AN power `e`.
    pub fn cap(&self, e: f64, sigma2_w: f64) -> f64 {
        self.cap_factor * (e + sigma2_w)
    }
}

/// `ln x + 1/x`, the KLD as a function of the variance ratio (plus one).
pub fn ratio_divergence(x: f64) -> f64 {
    x.ln() + 1.0 / x
}

pub fn covert_roots(epsilon: f64) -> Result<CovertBounds> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} must be positive")));
    }
    let level = 1.0 + 2.0 * epsilon * epsilon;
    let z = -(-level).exp();
    let x1 = (lambert_w(Branch::MinusOne, z)? + level).exp();
    let x2 = (lambert_w(Branch::Principal, z)? + level).exp();
    for (name, x) in [("x1", x1), ("x2", x2)] {
        let residual = ratio_divergence(x) - level;
        if !(residual.abs() <= 1e-9) {
            return Err(Error::CovertInvariant(format!("{name} = {x} has residual {residual:e}")));
        }
    }
    if !(0.0 < x1 && x1 < 1.0 && 1.0 < x2) {
        return Err(Error::CovertInvariant(format!("roots out of order: x1 = {x1}, x2 = {x2}")));
    }
    Ok(CovertBounds { epsilon, x1, x2, cap_factor: x2 - 1.0 })
}

fn check_variances(sigma0: f64, sigma1: f64) -> Result<()> {
    if sigma0 > 0.0 && sigma1 > 0.0 && sigma0.is_finite() && sigma1.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("variances ({sigma0}, {sigma1}) must be positive")))
    }
}

/// KLD between zero-mean complex Gaussians with variances `sigma0`, `sigma1`.
pub fn kld(sigma0: f64, sigma1: f64) -> Result<f64> {
    check_variances(sigma0, sigma1)?;
    let r = sigma0 / sigma1;
    // ln(1/r) + r - 1, written to avoid cancellation near r = 1.
    Ok(((r - 1.0) - (r - 1.0).ln_1p()).max(0.0))
}

/// Pinsker lower bound `1 - sqrt(D/2)` on the detection error probability.
pub fn dep_pinsker_bound(kld_value: f64) -> f64 {
    (1.0 - (kld_value.max(0.0) / 2.0).sqrt()).max(0.0)
}

/// Minimum over all detectors of false alarm plus missed detection, i.e.
/// one minus the total variation between the two hypotheses. The optimal
/// test thresholds the received power `|y|^2`, which is exponential with
/// mean `sigma_i` under hypothesis `i`.
pub fn exact_min_dep(sigma0: f64, sigma1: f64) -> Result<f64> {
    check_variances(sigma0, sigma1)?;
    if sigma0 == sigma1 {
        return Ok(1.0);
    }
    let (lo, hi) = if sigma0 < sigma1 { (sigma0, sigma1) } else { (sigma1, sigma0) };
    let tau = sigma0 * sigma1 / (hi - lo) * (hi / lo).ln();
    Ok((1.0 - ((-tau / hi).exp() - (-tau / lo).exp())).clamp(0.0, 1.0))
}

/// `d <= (x2 - 1)(e + sigma_w^2)` up to [`COVERT_SLACK`].
pub fn covert_feasible(d: f64, e: f64, bounds: &CovertBounds, sigma2_w: f64) -> bool {
    d <= bounds.cap(e, sigma2_w) + COVERT_SLACK
}

/// Everything Willie's hypothesis test sees for one design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionReport {
    pub sigma0: f64,
    pub sigma1: f64,
    pub kld: f64,
    pub pinsker_lower_bound: f64,
    pub exact_min_dep: f64,
}

impl DetectionReport {
    pub fn new(sigma0: f64, sigma1: f64) -> Result<Self> {
        let kld = kld(sigma0, sigma1)?;
        Ok(DetectionReport {
            sigma0,
            sigma1,
            kld,
            pinsker_lower_bound: dep_pinsker_bound(kld),
            exact_min_dep: exact_min_dep(sigma0, sigma1)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bisect(mut lo: f64, mut hi: f64, level: f64) -> f64 {
        let g = |x: f64| x.ln() + 1.0 / x - level;
        let glo = g(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (g(mid) > 0.0) == (glo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn lambert_special_values() {
        assert_eq!(lambert_w(Branch::Principal, 0.0).unwrap(), 0.0);
        assert_eq!(lambert_w(Branch::MinusOne, -1.0 / E).unwrap(), -1.0);
        assert!((lambert_w(Branch::Principal, -1.0 / E).unwrap() + 1.0).abs() < 1e-12);
        // Omega constant, from the fixed point w <- (w^2 + z e^-w)/(w + 1).
        let mut omega = 0.5f64;
        for _ in 0..200 {
            omega = (omega * omega + (-omega).exp()) / (omega + 1.0);
        }
        assert!((omega - 0.5671432904).abs() < 1e-10);
        assert!((lambert_w(Branch::Principal, 1.0).unwrap() - omega).abs() < 1e-14);
    }

    #[test]
    fn lambert_domain_errors() {
        assert!(lambert_w(Branch::Principal, -0.5).is_err());
        assert!(lambert_w(Branch::MinusOne, 0.1).is_err());
        assert!(lambert_w(Branch::MinusOne, 0.0).is_err());
        assert!(lambert_w(Branch::Principal, f64::NAN).is_err());
    }

    #[test]
    fn lambert_residuals_and_branches() {
        let zs = [-0.367879, -0.36, -0.3, -0.2, -0.1, -1e-3, -1e-8];
        for &z in &zs {
            let w0 = lambert_w(Branch::Principal, z).unwrap();
            let wm = lambert_w(Branch::MinusOne, z).unwrap();
            assert!(w0 >= -1.0 && wm <= -1.0);
            assert!((w0 * w0.exp() - z).abs() <= 1e-12, "W0({z})");
            assert!((wm * wm.exp() - z).abs() <= 1e-12, "W-1({z})");
        }
        for &z in &[0.5, 1.0, 2.0, 10.0, 1e3, 1e6] {
            let w = lambert_w(Branch::Principal, z).unwrap();
            assert!((w * w.exp() - z).abs() <= 1e-12 * z.max(1.0), "W0({z})");
        }
    }

    #[test]
    fn roots_match_bisection() {
        let b = covert_roots(0.1).unwrap();
        let x2 = bisect(1.0, 2.0, 1.02);
        let x1 = bisect(0.5, 1.0, 1.02);
        assert!((b.x2 - x2).abs() < 1e-9 && (b.x1 - x1).abs() < 1e-9);
        assert!((b.x2 - 1.2298).abs() < 1e-4 && (b.x1 - 0.8241).abs() < 1e-4);
        assert_eq!(b.cap_factor, b.x2 - 1.0);
    }

    #[test]
    fn roots_shrink_towards_one() {
        let mut prev = covert_roots(0.5).unwrap();
        for eps in [0.2, 0.1, 0.05, 0.01, 0.001] {
            let b = covert_roots(eps).unwrap();
            assert!(b.x2 < prev.x2 && b.x1 > prev.x1, "eps = {eps}");
            prev = b;
        }
        assert!(prev.x2 - 1.0 < 3e-3 && 1.0 - prev.x1 < 3e-3);
        let b = covert_roots(0.2).unwrap();
        for x in [b.x1, b.x2] {
            assert!((ratio_divergence(x) - 1.08).abs() <= 1e-9);
        }
        assert!(covert_roots(0.0).is_err());
    }

    #[test]
    fn kld_values() {
        assert_eq!(kld(1.0, 1.0).unwrap(), 0.0);
        assert!((kld(1.0, 2.0).unwrap() - (2f64.ln() - 0.5)).abs() < 1e-15);
        assert!((kld(1.0, 2.0).unwrap() - 0.1931471806).abs() < 1e-10);
        assert!(kld(0.0, 1.0).is_err());
        assert!(kld(1.0, -1.0).is_err());
    }

    #[test]
    fn kld_matches_quadrature() {
        // |y|^2 ~ Exp(mean sigma0) under p0; integrate p0 ln(p0/p1) in the
        // radial power variable t = |y|^2 with composite Simpson.
        let (s0, s1) = (2.0f64, 1.0f64);
        let density = |t: f64| (-t / s0).exp() / s0;
        let log_ratio = |t: f64| (s1 / s0).ln() - t / s0 + t / s1;
        let (upper, n) = (120.0, 200_000);
        let h = upper / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let t = i as f64 * h;
            let wgt = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += wgt * density(t) * log_ratio(t);
        }
        acc *= h / 3.0;
        assert!((acc - kld(s0, s1).unwrap()).abs() < 1e-6, "{acc}");
    }

    #[test]
    fn pinsker_values() {
        assert_eq!(dep_pinsker_bound(0.0), 1.0);
        assert!((dep_pinsker_bound(0.02) - 0.9).abs() < 1e-15);
        assert_eq!(dep_pinsker_bound(2.0), 0.0);
        assert_eq!(dep_pinsker_bound(8.0), 0.0);
    }

    #[test]
    fn exact_dep_values() {
        assert_eq!(exact_min_dep(1.0, 1.0).unwrap(), 1.0);
        assert!((exact_min_dep(1.0, 2.0).unwrap() - 0.75).abs() < 1e-15);
        assert!((exact_min_dep(2.0, 1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!(exact_min_dep(1.0, 0.0).is_err());
    }

    #[test]
    fn covert_cap_examples() {
        let b = covert_roots(0.1).unwrap();
        assert!(covert_feasible(0.0, 0.0, &b, 1.0));
        assert!(covert_feasible(0.0, 50.0, &b, 1.0));
        assert!(covert_feasible(0.2, 0.0, &b, 1.0));
        assert!(!covert_feasible(0.3, 0.0, &b, 1.0));
    }

    #[test]
    fn detection_report_is_consistent() {
        let r = DetectionReport::new(1.0, 1.5).unwrap();
        assert!(r.exact_min_dep >= r.pinsker_lower_bound - 1e-12);
        assert!((0.0..=1.0).contains(&r.exact_min_dep));
    }

    proptest! {
        #[test]
        fn pinsker_is_a_lower_bound(s0 in 0.1f64..10.0, s1 in 0.1f64..10.0) {
            let d = kld(s0, s1).unwrap();
            prop_assert!(exact_min_dep(s0, s1).unwrap() >= dep_pinsker_bound(d) - 1e-12);
        }

        #[test]
        fn kld_increases_with_sigma1(s0 in 0.1f64..10.0, a in 1.0001f64..5.0, b in 1.0001f64..5.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-6);
            prop_assert!(kld(s0, s0 * hi).unwrap() > kld(s0, s0 * lo).unwrap());
            prop_assert_eq!(kld(s0, s0).unwrap(), 0.0);
        }

        // On the x > 1 branch the linear cap is equivalent to the KLD budget.
        #[test]
        fn linear_cap_matches_kld_budget(
            eps in 0.01f64..0.5,
            e in 0.0f64..50.0,
            sigma2_w in 0.1f64..5.0,
            frac in 0.0f64..2.0,
        ) {
            let b = covert_roots(eps).unwrap();
            let d = frac * b.cap(e, sigma2_w);
            prop_assume!(d > 0.0);
            prop_assume!((frac - 1.0).abs() > 1e-2);
            let s0 = e + sigma2_w;
            let within = kld(s0, d + s0).unwrap() <= 2.0 * eps * eps + 1e-8;
            prop_assert_eq!(covert_feasible(d, e, &b, sigma2_w), within);
        }
    }
}
