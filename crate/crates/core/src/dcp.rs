//! Convexified penalty subproblem around an anchor point, and the lifted
//! iterate it is solved over.
//!
//! The lifted problem replaces the MMSE objective by `K n_s - f(Upsilon)`
//! with `f(Upsilon) = tr(C^H (A + B + sigma^2 I)^-1 C)`, and moves the
//! consistency gap `f(Gamma) - f(Psi) = tr(A + B) + d + e - ||T||^2 -
//! ||H_aa V||^2 - ||s||^2 - ||f V||^2` into the objective with weight `p`.
//! Both concave parts are replaced by their tangent planes at the anchor.

use crate::conic::{AffineExpr, ConicProgram, ConicSolution, ExprMatrix, VarKind, VarSlot};
use crate::covertness::CovertBounds;
use crate::error::{Error, Result};
use crate::linalg::{fro2, hstack, min_hermitian_eigenvalue, re_inner, re_trace, real_scaled_identity, CMat};
use crate::model::{
    cross_term, interference_covariance, regularized_inverse, signal_covariance, willie_powers, ChannelSet,
    SystemConfig,
};

/// Full lifted variable set.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub w_k: Vec<CMat>,
    pub v: CMat,
    /// `[H_1 W_1, ..., H_K W_K]`, `n_r x K n_s`.
    pub t: CMat,
    /// `[g_1 W_1, ..., g_K W_K]`, `1 x K n_s`.
    pub s_row: CMat,
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub d: f64,
    pub e: f64,
}

impl Iterate {
    /// The consistent lift of `(W_k, V)`: every auxiliary variable equals
    /// the quantity it stands for, so the residual is zero.
    pub fn from_transmit(w_k: Vec<CMat>, v: CMat, ch: &ChannelSet) -> Iterate {
        let t = stacked_t(&w_k, ch);
        let s_row = stacked_s(&w_k, ch);
        let (d, e) = willie_powers(&w_k, &v, ch);
        Iterate {
            a: signal_covariance(&w_k, ch),
            b: interference_covariance(&v, ch),
            c: cross_term(&w_k, ch),
            t,
            s_row,
            d,
            e,
            w_k,
            v,
        }
    }

    /// `r = f(Gamma) - f(Psi)`; nonnegative whenever the four LMIs hold.
    pub fn residual(&self, ch: &ChannelSet) -> f64 {
        f_gamma(self) - f_psi(&self.t, &self.s_row, &self.v, ch)
    }

    /// Re-derives `T`, `s` and `C` from the beamformers.
    pub fn resync_linear_parts(&mut self, ch: &ChannelSet) {
        self.t = stacked_t(&self.w_k, ch);
        self.s_row = stacked_s(&self.w_k, ch);
        self.c = cross_term(&self.w_k, ch);
    }
}

pub fn stacked_t(w_k: &[CMat], ch: &ChannelSet) -> CMat {
    let blocks: Vec<CMat> = w_k.iter().zip(&ch.h_k).map(|(w, h)| h * w).collect();
    hstack(&blocks)
}

pub fn stacked_s(w_k: &[CMat], ch: &ChannelSet) -> CMat {
    let blocks: Vec<CMat> = w_k.iter().zip(&ch.g_k).map(|(w, g)| g * w).collect();
    hstack(&blocks)
}

/// `tr(C^H (A + B + sigma^2 I)^-1 C)`.
pub fn f_upsilon(a: &CMat, b: &CMat, c: &CMat, sigma2_a: f64) -> f64 {
    let m = regularized_inverse(&(a + b), sigma2_a);
    re_trace(&(c.adjoint() * m * c))
}

pub fn f_psi(t: &CMat, s_row: &CMat, v: &CMat, ch: &ChannelSet) -> f64 {
    fro2(t) + fro2(&(&ch.h_aa * v)) + fro2(s_row) + fro2(&(&ch.f * v))
}

pub fn f_gamma(it: &Iterate) -> f64 {
    re_trace(&it.a) + re_trace(&it.b) + it.d + it.e
}

/// Tangent plane of `f(Upsilon)` at the anchor:
/// `constant + Re tr(grad_c^H C) - Re tr(grad_ab^H (A + B))`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpsilonLinearization {
    pub constant: f64,
    pub grad_c: CMat,
    /// `M C C^H M`, Hermitian.
    pub grad_ab: CMat,
    pub value_at_anchor: f64,
}

impl UpsilonLinearization {
    pub fn evaluate(&self, a: &CMat, b: &CMat, c: &CMat) -> f64 {
        self.constant + re_inner(&self.grad_c, c) - re_inner(&self.grad_ab, &(a + b))
    }
}

pub fn linearize_f_upsilon(anchor: &Iterate, sigma2_a: f64) -> UpsilonLinearization {
    let m = regularized_inverse(&(&anchor.a + &anchor.b), sigma2_a);
    let mc = &m * &anchor.c;
    let value = re_trace(&(anchor.c.adjoint() * &mc));
    let grad_ab = &mc * mc.adjoint();
    let constant = -value + re_inner(&grad_ab, &(&anchor.a + &anchor.b));
    UpsilonLinearization { constant, grad_c: mc * crate::linalg::c(2.0, 0.0), grad_ab, value_at_anchor: value }
}

/// Tangent plane of `f(Psi)` at the anchor:
/// `constant + Re tr(grad_t^H T) + Re tr(grad_s^H s) + Re tr(grad_v^H V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiLinearization {
    pub constant: f64,
    pub grad_t: CMat,
    pub grad_s: CMat,
    pub grad_v: CMat,
    pub value_at_anchor: f64,
}

impl PsiLinearization {
    pub fn evaluate(&self, t: &CMat, s_row: &CMat, v: &CMat) -> f64 {
        self.constant + re_inner(&self.grad_t, t) + re_inner(&self.grad_s, s_row) + re_inner(&self.grad_v, v)
    }
}

pub fn linearize_f_psi(anchor: &Iterate, ch: &ChannelSet) -> PsiLinearization {
    let two = crate::linalg::c(2.0, 0.0);
    let value = f_psi(&anchor.t, &anchor.s_row, &anchor.v, ch);
    let gram = ch.h_aa.adjoint() * &ch.h_aa + ch.f.adjoint() * &ch.f;
    PsiLinearization {
        constant: -value,
        grad_t: &anchor.t * two,
        grad_s: &anchor.s_row * two,
        grad_v: gram * &anchor.v * two,
        value_at_anchor: value,
    }
}

/// `K n_s - f(Upsilon) + p (f(Gamma) - f(Psi))` at the true functions.
pub fn penalized_objective(it: &Iterate, p: f64, config: &SystemConfig, ch: &ChannelSet) -> f64 {
    let kns = (config.k * config.n_s) as f64;
    kns - f_upsilon(&it.a, &it.b, &it.c, config.sigma2_a) + p * it.residual(ch)
}

/// The same objective with both concave parts linearized at `anchor`.
pub fn surrogate_objective(
    it: &Iterate,
    anchor: &Iterate,
    p: f64,
    config: &SystemConfig,
    ch: &ChannelSet,
) -> f64 {
    let kns = (config.k * config.n_s) as f64;
    let up = linearize_f_upsilon(anchor, config.sigma2_a);
    let psi = linearize_f_psi(anchor, ch);
    kns - up.evaluate(&it.a, &it.b, &it.c) + p * (f_gamma(it) - psi.evaluate(&it.t, &it.s_row, &it.v))
}

/// Relative slack allowed when checking that an anchor lies in the
/// feasible set.
const ANCHOR_TOL: f64 = 1e-6;

fn check_anchor(it: &Iterate, config: &SystemConfig, bounds: &CovertBounds, ch: &ChannelSet) -> Result<()> {
    let fail = |what: &str| Err(Error::InfeasibleAnchor(what.to_string()));
    for (w, &p) in it.w_k.iter().zip(&config.p_sensor) {
        if fro2(w) > p * (1.0 + ANCHOR_TOL) {
            return fail("sensor power cap");
        }
    }
    if fro2(&it.v) > config.p_ap * (1.0 + ANCHOR_TOL) {
        return fail("AN power cap");
    }
    let scale = 1.0 + it.d.abs() + it.e.abs();
    if it.d > bounds.cap(it.e, config.sigma2_w) + ANCHOR_TOL * scale || it.d < -ANCHOR_TOL || it.e < -ANCHOR_TOL {
        return fail("covert cap");
    }
    let lmi_gap = |x: &CMat, y: &CMat| {
        let g = x - y * y.adjoint();
        min_hermitian_eigenvalue(&g) >= -ANCHOR_TOL * (1.0 + re_trace(x).abs())
    };
    let hv = &ch.h_aa * &it.v;
    let fv = &ch.f * &it.v;
    let d = CMat::from_element(1, 1, crate::linalg::c(it.d, 0.0));
    let e = CMat::from_element(1, 1, crate::linalg::c(it.e, 0.0));
    if !(lmi_gap(&it.a, &it.t) && lmi_gap(&it.b, &hv) && lmi_gap(&d, &it.s_row) && lmi_gap(&e, &fv)) {
        return fail("linear matrix inequality");
    }
    Ok(())
}

/// A built subproblem together with what is needed to read the next
/// iterate back out of its solution.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConicProgram,
    /// AN beamformer held constant (baseline schemes); `B` and `e` are then
    /// constants as well.
    pub fixed_v: Option<CMat>,
    b_fixed: CMat,
    e_fixed: f64,
}

fn slot<'a>(program: &'a ConicProgram, name: &str) -> &'a VarSlot {
    program.var(name).unwrap_or_else(|| panic!("subproblem variable {name} missing"))
}

/// Builds the convex subproblem at `anchor` with penalty `p`. With
/// `fixed_v` the AN beamformer is a constant rather than a variable.
pub fn build_subproblem(
    ch: &ChannelSet,
    config: &SystemConfig,
    bounds: &CovertBounds,
    anchor: &Iterate,
    p: f64,
    fixed_v: Option<&CMat>,
) -> Result<Subproblem> {
    let (k, n_s, n_t, n_r) = (ch.k(), ch.n_s(), ch.n_t(), ch.n_r());
    if config.k != k || config.n_s != n_s || config.n_t != n_t || config.n_r != n_r {
        return Err(Error::Dimension("channel set does not match the configuration".into()));
    }
    if anchor.w_k.len() != k || anchor.t.shape() != (n_r, k * n_s) || anchor.a.shape() != (n_r, n_r) {
        return Err(Error::Dimension("anchor does not match the channel set".into()));
    }
    if let Some(v) = fixed_v {
        if v.shape() != (n_t, n_t) {
            return Err(Error::Dimension("fixed AN beamformer must be n_t x n_t".into()));
        }
    }
    check_anchor(anchor, config, bounds, ch)?;

    let mut prog = ConicProgram::new();
    let w: Vec<ExprMatrix> =
        (0..k).map(|i| prog.add_var(&format!("w{i}"), n_s, n_s, VarKind::Complex).expr()).collect();
    let v = match fixed_v {
        None => Some(prog.add_var("v", n_t, n_t, VarKind::Complex).expr()),
        Some(_) => None,
    };
    let t = prog.add_var("t", n_r, k * n_s, VarKind::Complex).expr();
    let s = prog.add_var("s", 1, k * n_s, VarKind::Complex).expr();
    let a = prog.add_var("a", n_r, n_r, VarKind::Hermitian).expr();
    let b = v.as_ref().map(|_| prog.add_var("b", n_r, n_r, VarKind::Hermitian).expr());
    let c = prog.add_var("c", n_r, n_s, VarKind::Complex).expr();
    let d = prog.add_var("d", 1, 1, VarKind::Real).expr();
    let e = v.as_ref().map(|_| prog.add_var("e", 1, 1, VarKind::Real).expr());

    let (b_fixed, e_fixed) = match fixed_v {
        Some(vf) => (interference_covariance(vf, ch), fro2(&(&ch.f * vf))),
        None => (CMat::zeros(n_r, n_r), 0.0),
    };

    // Power caps.
    for (wi, &pk) in w.iter().zip(&config.p_sensor) {
        prog.add_frobenius_cap(wi, pk.sqrt());
    }
    if let Some(v) = &v {
        prog.add_frobenius_cap(v, config.p_ap.sqrt());
    }

    // Linear definitions of C, T and s.
    let hw: Vec<ExprMatrix> = w.iter().zip(&ch.h_k).map(|(wi, h)| wi.left_mul(h)).collect();
    let gw: Vec<ExprMatrix> = w.iter().zip(&ch.g_k).map(|(wi, g)| wi.left_mul(g)).collect();
    let sum_hw = hw.iter().skip(1).fold(hw[0].clone(), |acc, x| acc.add(x));
    prog.add_complex_eq(&c, &sum_hw);
    prog.add_complex_eq(&t, &ExprMatrix::hstack(&hw));
    prog.add_complex_eq(&s, &ExprMatrix::hstack(&gw));

    // Covert cap and sign constraints.
    let d0 = d[(0, 0)].re();
    let e0 = match &e {
        Some(e) => e[(0, 0)].re(),
        None => AffineExpr::constant(e_fixed),
    };
    prog.add_nonneg(e0.plus_constant(config.sigma2_w).scaled(bounds.cap_factor).sub(&d0));
    prog.add_nonneg(d0.clone());
    if let Some(e) = &e {
        prog.add_nonneg(e[(0, 0)].re());
    }

    // LMIs.
    let eye = |n: usize| ExprMatrix::constant(&CMat::identity(n, n));
    prog.add_hermitian_psd(&ExprMatrix::blocks(&[&[&a, &t], &[&t.adjoint(), &eye(k * n_s)]]))?;
    if let (Some(b), Some(v)) = (&b, &v) {
        let hv = v.left_mul(&ch.h_aa);
        prog.add_hermitian_psd(&ExprMatrix::blocks(&[&[b, &hv], &[&hv.adjoint(), &eye(n_t)]]))?;
    }
    prog.add_hermitian_psd(&ExprMatrix::blocks(&[&[&d, &s], &[&s.adjoint(), &eye(k * n_s)]]))?;
    if let (Some(e), Some(v)) = (&e, &v) {
        let fv = v.left_mul(&ch.f);
        prog.add_hermitian_psd(&ExprMatrix::blocks(&[&[e, &fv], &[&fv.adjoint(), &eye(n_t)]]))?;
    }

    // Objective.
    let up = linearize_f_upsilon(anchor, config.sigma2_a);
    let psi = linearize_f_psi(anchor, ch);
    let kns = (k * n_s) as f64;
    let mut obj = AffineExpr::constant(kns - up.constant);
    obj.add_assign_scaled(&c.re_inner(&up.grad_c), -1.0);
    obj.add_assign_scaled(&a.re_inner(&up.grad_ab), 1.0);
    let mut gamma = a.trace().re().add(&d0);
    match (&b, &e, &v) {
        (Some(b), Some(e), Some(v)) => {
            obj.add_assign_scaled(&b.re_inner(&up.grad_ab), 1.0);
            gamma = gamma.add(&b.trace().re()).add(&e[(0, 0)].re());
            gamma.add_assign_scaled(&v.re_inner(&psi.grad_v), -1.0);
        }
        _ => {
            let vf = fixed_v.expect("fixed V when B is constant");
            obj.constant += re_inner(&up.grad_ab, &b_fixed);
            gamma.constant += re_trace(&b_fixed) + e_fixed - re_inner(&psi.grad_v, vf);
        }
    }
    gamma.add_assign_scaled(&t.re_inner(&psi.grad_t), -1.0);
    gamma.add_assign_scaled(&s.re_inner(&psi.grad_s), -1.0);
    gamma.constant -= psi.constant;
    obj.add_assign_scaled(&gamma, p);
    prog.set_objective(obj);

    let mut sub = Subproblem { program: prog, fixed_v: fixed_v.cloned(), b_fixed, e_fixed };
    sub.program.hint = Some(sub.encode(anchor));
    Ok(sub)
}

impl Subproblem {
    /// Reads the next iterate out of a solution of this subproblem.
    pub fn extract(&self, solution: &ConicSolution) -> Result<Iterate> {
        if !solution.status.is_usable() {
            return Err(Error::BadStatus(solution.status));
        }
        let x = &solution.x;
        let prog = &self.program;
        let read = |name: &str| slot(prog, name).read(x);
        let k = prog.variables.iter().filter(|v| v.name.starts_with('w')).count();
        let w_k = (0..k).map(|i| read(&format!("w{i}"))).collect();
        let (v, b, e) = match &self.fixed_v {
            Some(vf) => (vf.clone(), self.b_fixed.clone(), self.e_fixed),
            None => (read("v"), read("b"), read("e")[(0, 0)].re),
        };
        Ok(Iterate {
            w_k,
            v,
            t: read("t"),
            s_row: read("s"),
            a: read("a"),
            b,
            c: read("c"),
            d: read("d")[(0, 0)].re,
            e,
        })
    }

    /// Writes an iterate into a decision vector of this subproblem.
    pub fn encode(&self, it: &Iterate) -> Vec<f64> {
        let prog = &self.program;
        let mut x = vec![0.0; prog.n_vars];
        let mut put = |name: &str, m: &CMat| slot(prog, name).write(m, &mut x);
        for (i, w) in it.w_k.iter().enumerate() {
            put(&format!("w{i}"), w);
        }
        put("t", &it.t);
        put("s", &it.s_row);
        put("a", &it.a);
        put("c", &it.c);
        put("d", &real_scaled_identity(1, it.d));
        if self.fixed_v.is_none() {
            put("v", &it.v);
            put("b", &it.b);
            put("e", &real_scaled_identity(1, it.e));
        }
        x
    }
}

/// Free-function form of [`Subproblem::extract`].
pub fn extract_iterate(solution: &ConicSolution, subproblem: &Subproblem) -> Result<Iterate> {
    subproblem.extract(solution)
}
