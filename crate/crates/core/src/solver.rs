//! Exact-penalty CCCP loop over the lifted problem.

use crate::conic::{ConicBackend, InteriorPoint, IpmSettings};
use crate::covertness::{covert_roots, kld, CovertBounds};
use crate::dcp::{build_subproblem, penalized_objective, surrogate_objective, Iterate};
use crate::error::Result;
use crate::linalg::{c, fro2, hpd_inverse, real_scaled_identity, CMat};
use crate::model::{design_with_mmse, mse, willie_powers, willie_variances, ChannelSet, Design, SystemConfig};

/// Number of times the penalty may be multiplied by ten.
pub const MAX_ESCALATIONS: usize = 4;

/// Outcome of one CCCP run. All traces have one entry per iteration plus
/// the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub design: Design,
    pub mse: f64,
    /// Surrogate objective after each iteration; the first entry is the
    /// starting point's penalized objective.
    pub objective_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
    /// True MSE with the MMSE receiver at each iterate.
    pub mse_trace: Vec<f64>,
    /// Penalty in force when each trace entry was produced.
    pub penalty_trace: Vec<f64>,
    pub kld_final: f64,
    pub iterations: usize,
    pub penalty_final: f64,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
}

/// Starting point that satisfies every constraint with a zero residual.
/// Candidates combine the sensor shapes of [`sensor_shapes`] with AN levels
/// on a geometric grid of fractions of full power; the one with the lowest
/// true MSE wins.
pub fn initialize(ch: &ChannelSet, config: &SystemConfig, bounds: &CovertBounds) -> Iterate {
    let full = (config.p_ap / config.n_t as f64).sqrt();
    let levels: Vec<CMat> = (0..=AN_GRID)
        .map(|i| {
            let fraction = if i == AN_GRID { 0.0 } else { 10f64.powf(-(i as f64) / 4.0) };
            real_scaled_identity(config.n_t, full * fraction.sqrt())
        })
        .collect();
    best_start(ch, config, bounds, &levels)
}

/// Power fractions `10^(-i/4)` for `i < AN_GRID`, then zero.
const AN_GRID: usize = 33;

/// Regularization levels, relative to the mean channel gain, for the aligned
/// sensor shapes. Infinity gives the matched filter.
const SHAPE_REGULARIZATION: [f64; 6] = [1e-3, 1e-2, 1e-1, 1.0, 10.0, f64::INFINITY];

fn true_mse(it: &Iterate, ch: &ChannelSet, config: &SystemConfig) -> Result<f64> {
    let design = design_with_mmse(it.w_k.clone(), it.v.clone(), ch, config.sigma2_a)?;
    mse(&design, ch, config.sigma2_a)
}

/// Sensor beamformers at or below their power budgets: the scaled identity,
/// and regularized inverses steering every sensor onto a common receive
/// subspace, either each at full power or all at the amplitude the weakest
/// sensor affords.
pub(crate) fn sensor_shapes(ch: &ChannelSet, config: &SystemConfig) -> Vec<Vec<CMat>> {
    let n_s = config.n_s;
    let mut shapes = vec![config.p_sensor.iter().map(|p| real_scaled_identity(n_s, (p / n_s as f64).sqrt())).collect()];
    let target = CMat::from_fn(ch.n_r(), n_s, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let gain = ch.h_k.iter().map(fro2).sum::<f64>() / (ch.k() * n_s) as f64;
    for lambda in SHAPE_REGULARIZATION {
        let dirs: Option<Vec<CMat>> = ch
            .h_k
            .iter()
            .map(|h| {
                let matched = h.adjoint() * &target;
                if lambda.is_infinite() {
                    return Some(matched);
                }
                let gram = h.adjoint() * h + real_scaled_identity(n_s, lambda * gain);
                hpd_inverse(&gram).map(|inv| inv * matched)
            })
            .collect();
        let Some(dirs) = dirs else { continue };
        if dirs.iter().any(|d| !(fro2(d) > 0.0)) {
            continue;
        }
        let each: Vec<CMat> =
            dirs.iter().zip(&config.p_sensor).map(|(d, p)| d * c((p / fro2(d)).sqrt(), 0.0)).collect();
        let common = dirs.iter().zip(&config.p_sensor).map(|(d, p)| (p / fro2(d)).sqrt()).fold(f64::INFINITY, f64::min);
        shapes.push(each);
        shapes.push(dirs.iter().map(|d| d * c(common, 0.0)).collect());
    }
    shapes
}

/// Best feasible start over every sensor shape and the given AN matrices.
pub(crate) fn best_start(ch: &ChannelSet, config: &SystemConfig, bounds: &CovertBounds, an: &[CMat]) -> Iterate {
    let shapes = sensor_shapes(ch, config);
    let mut best: Option<(f64, Iterate)> = None;
    for v in an {
        for shape in &shapes {
            let it = start_from(ch, config, bounds, shape, v.clone());
            let Ok(value) = true_mse(&it, ch, config) else { continue };
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                best = Some((value, it));
            }
        }
    }
    best.map(|(_, it)| it).unwrap_or_else(|| start_from(ch, config, bounds, &shapes[0], an[0].clone()))
}

/// Scales `shape` uniformly so that the covert cap holds for AN matrix `v`.
fn start_from(ch: &ChannelSet, config: &SystemConfig, bounds: &CovertBounds, shape: &[CMat], v: CMat) -> Iterate {
    let e = fro2(&(&ch.f * &v));
    let cap = bounds.cap(e, config.sigma2_w);
    let (d, _) = willie_powers(shape, &v, ch);
    let alpha = if d > cap { (cap / d).sqrt() } else { 1.0 };
    let w_k = shape.iter().map(|w| w * c(alpha, 0.0)).collect();
    Iterate::from_transmit(w_k, v, ch)
}

/// Wall clock; reads zero on wasm32, where `Instant` is unavailable.
struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.start.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        0.0
    }
}

/// Pulls each beamformer back onto its power ball and refreshes the parts
/// that are linear in the beamformers. Shrinking `W_k` only loosens the
/// LMIs, so feasibility is kept.
fn project_powers(it: &mut Iterate, config: &SystemConfig, ch: &ChannelSet) {
    let mut touched = false;
    for (w, &p) in it.w_k.iter_mut().zip(&config.p_sensor) {
        let n2 = fro2(w);
        if n2 > p {
            *w *= c((p / n2).sqrt(), 0.0);
            touched = true;
        }
    }
    let n2 = fro2(&it.v);
    if n2 > config.p_ap {
        it.v *= c((config.p_ap / n2).sqrt(), 0.0);
    }
    if touched {
        it.resync_linear_parts(ch);
    }
}

/// Runs the proposed scheme with the built-in interior-point backend.
pub fn run(ch: &ChannelSet, config: &SystemConfig) -> Result<SolveReport> {
    run_with(ch, config, None, &InteriorPoint::new(IpmSettings::default()))
}

/// Runs the CCCP loop. With `fixed_v` only the sensor side is optimized.
pub fn run_with(
    ch: &ChannelSet,
    config: &SystemConfig,
    fixed_v: Option<&CMat>,
    backend: &dyn ConicBackend,
) -> Result<SolveReport> {
    config.validate()?;
    let start = Stopwatch::start();
    let bounds = covert_roots(config.epsilon)?;
    let mut anchor = match fixed_v {
        Some(v) => best_start(ch, config, &bounds, std::slice::from_ref(v)),
        None => initialize(ch, config, &bounds),
    };
    let true_mse = |it: &Iterate| true_mse(it, ch, config);

    let mut p = config.penalty;
    let mut escalations = 0;
    let mut reference = penalized_objective(&anchor, p, config, ch);
    let mut objective_trace = vec![reference];
    let mut residual_trace = vec![anchor.residual(ch)];
    let mut mse_trace = vec![true_mse(&anchor)?];
    let mut penalty_trace = vec![p];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        let sub = match build_subproblem(ch, config, &bounds, &anchor, p, fixed_v) {
            Ok(s) => s,
            Err(_) => break,
        };
        let solution = backend.solve(&sub.program);
        let Ok(mut candidate) = sub.extract(&solution) else { break };
        iterations += 1;
        project_powers(&mut candidate, config, ch);

        let surrogate = surrogate_objective(&candidate, &anchor, p, config, ch);
        let anchor_value = penalized_objective(&anchor, p, config, ch);
        let accepted = surrogate <= anchor_value;
        let entry = if accepted {
            anchor = candidate;
            surrogate
        } else {
            anchor_value
        };
        let residual = anchor.residual(ch);
        objective_trace.push(entry);
        residual_trace.push(residual);
        mse_trace.push(true_mse(&anchor)?);
        penalty_trace.push(p);

        let change = (reference - entry).abs();
        reference = entry;
        if change <= config.tol_obj {
            if residual <= config.tol_residual {
                converged = true;
                break;
            }
            if escalations < MAX_ESCALATIONS {
                escalations += 1;
                p *= 10.0;
                reference = penalized_objective(&anchor, p, config, ch);
            } else if !accepted {
                break;
            }
        }
    }

    let design = design_with_mmse(anchor.w_k.clone(), anchor.v.clone(), ch, config.sigma2_a)?;
    let final_mse = mse(&design, ch, config.sigma2_a)?;
    let (sigma0, sigma1) = willie_variances(&design.w_k, &design.v, ch, config.sigma2_w)?;
    Ok(SolveReport {
        design,
        mse: final_mse,
        objective_trace,
        residual_trace,
        mse_trace,
        penalty_trace,
        kld_final: kld(sigma0, sigma1)?,
        iterations,
        penalty_final: p,
        converged,
        wall_time: start.seconds(),
    })
}
