//! Primal-dual interior-point method on the homogeneous self-dual
//! embedding, with Nesterov-Todd scaling and Mehrotra predictor-corrector
//! steps.
//!
//! After presolve the problem is `min c'x + c0  s.t.  Gx + s = h, s in K`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cones::{dot, norm, svec_index, Cone, ConeSet, Scaling};
use super::presolve::{presolve, Presolved};
use super::{ConicBackend, ConicProgram, ConicSolution, SolveStatus, SolverStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpmSettings {
    pub max_iters: usize,
    /// Relative primal and dual residual tolerance.
    pub feastol: f64,
    pub abstol: f64,
    pub reltol: f64,
    /// Looser thresholds accepted as `NearOptimal` when the method stalls.
    pub near_feastol: f64,
    pub near_gaptol: f64,
    pub step_fraction: f64,
    pub refinement_steps: usize,
}

impl Default for IpmSettings {
    fn default() -> Self {
        IpmSettings {
            max_iters: 100,
            feastol: 1e-8,
            abstol: 1e-8,
            reltol: 1e-8,
            near_feastol: 1e-7,
            near_gaptol: 5e-5,
            step_fraction: 0.99,
            refinement_steps: 3,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct InteriorPoint {
    pub settings: IpmSettings,
}

impl InteriorPoint {
    pub fn new(settings: IpmSettings) -> Self {
        InteriorPoint { settings }
    }
}

impl ConicBackend for InteriorPoint {
    fn solve(&self, program: &ConicProgram) -> ConicSolution {
        if let Some(x0) = program.hint.as_ref().filter(|h| h.len() == program.n_vars) {
            let mut sol = self.solve(&program.shifted(x0));
            for (x, o) in sol.x.iter_mut().zip(x0) {
                *x += o;
            }
            sol.objective_value = program.objective.eval(&sol.x);
            return sol;
        }
        let pre = presolve(program);
        let scale = 1.0 + program.equalities.iter().map(|e| e.constant.abs()).fold(0.0, f64::max);
        let finish = |x: Vec<f64>, status: SolveStatus, stats: SolverStats| ConicSolution {
            objective_value: program.objective.eval(&x),
            x,
            status,
            stats,
        };
        if pre.inconsistency > 1e-9 * scale {
            return finish(vec![0.0; program.n_vars], SolveStatus::Infeasible, SolverStats::default());
        }
        let form = StandardForm::build(&pre);
        let (xr, status, stats) = if form.n == 0 {
            let x = pre.recover(&[]);
            let status = if program.max_violation(&x) <= self.settings.feastol * (1.0 + norm(&form.h)) {
                SolveStatus::Optimal
            } else {
                SolveStatus::Infeasible
            };
            (Vec::new(), status, SolverStats::default())
        } else {
            hsd(&form, &self.settings)
        };
        finish(pre.recover(&xr), status, stats)
    }
}

/// `G` stored by rows; PSD rows use svec scaling.
struct StandardForm {
    n: usize,
    c: Vec<f64>,
    /// Objective constant; relative gaps are measured on the full objective.
    c0: f64,
    g_rows: Vec<Vec<(usize, f64)>>,
    h: Vec<f64>,
    cones: ConeSet,
    psd_patterns: Vec<PsdPattern>,
}

/// Sparsity of `G` restricted to one PSD cone, viewed per column as a
/// symmetric matrix `M_j`.
struct PsdPattern {
    /// Distinct upper-triangle entries `(i, k)` touched by any column.
    entries: Vec<(usize, usize)>,
    columns: Vec<PsdColumn>,
}

struct PsdColumn {
    col: usize,
    /// `(entry, coef)` with `coef` the matrix-entry coefficient, halved on
    /// the diagonal so that `M_j = sum coef (e_i e_k' + e_k e_i')`.
    terms: Vec<(usize, f64)>,
    /// Rows of `M_j` with a nonzero.
    support: Vec<usize>,
    /// Positions of `i` and `k` in `support`, per term.
    slots: Vec<(usize, usize)>,
}

impl PsdPattern {
    fn new(by_col: std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>>) -> Self {
        let mut index: std::collections::HashMap<(usize, usize), usize> = Default::default();
        let mut entries = Vec::new();
        let columns = by_col
            .into_iter()
            .map(|(col, list)| {
                let mut support: Vec<usize> = list.iter().flat_map(|&(i, k, _)| [i, k]).collect();
                support.sort_unstable();
                support.dedup();
                let pos = |r: usize| support.binary_search(&r).expect("row in support");
                let slots = list.iter().map(|&(i, k, _)| (pos(i), pos(k))).collect();
                let terms = list
                    .iter()
                    .map(|&(i, k, v)| {
                        let e = *index.entry((i, k)).or_insert_with(|| {
                            entries.push((i, k));
                            entries.len() - 1
                        });
                        (e, v)
                    })
                    .collect();
                PsdColumn { col, terms, support, slots }
            })
            .collect();
        PsdPattern { entries, columns }
    }

    /// Adds `tr(M_j Q M_l Q)` for every column pair into `hm`.
    fn add_schur(&self, q: &DMatrix<f64>, hm: &mut DMatrix<f64>) {
        let m = q.nrows();
        let mut p = vec![0.0; self.entries.len()];
        let mut x = Vec::new();
        for (jn, cj) in self.columns.iter().enumerate() {
            // X = Q M_j restricted to the support columns.
            let r = cj.support.len();
            x.clear();
            x.resize(m * r, 0.0);
            for (&(e, v), &(pi, pk)) in cj.terms.iter().zip(&cj.slots) {
                let (i, k) = self.entries[e];
                let (qi, qk) = (q.column(i), q.column(k));
                let (xk, xi) = (pk * m, pi * m);
                for a in 0..m {
                    x[xk + a] += v * qi[a];
                }
                for a in 0..m {
                    x[xi + a] += v * qk[a];
                }
            }
            // P = X Q[support, :] on the touched entries.
            for (pu, &(a, b)) in p.iter_mut().zip(&self.entries) {
                let mut acc = 0.0;
                for (t, &row) in cj.support.iter().enumerate() {
                    acc += x[t * m + a] * q[(row, b)];
                }
                *pu = acc;
            }
            for cl in &self.columns[jn..] {
                let acc: f64 = cl.terms.iter().map(|&(e, u)| u * p[e]).sum::<f64>() * 2.0;
                hm[(cj.col, cl.col)] += acc;
                if cj.col != cl.col {
                    hm[(cl.col, cj.col)] += acc;
                }
            }
        }
    }
}

impl StandardForm {
    fn build(pre: &Presolved) -> Self {
        let n = pre.free.len();
        let mut c = vec![0.0; n];
        for &(i, a) in &pre.objective.terms {
            c[i] += a;
        }
        let mut g_rows = Vec::new();
        let mut h = Vec::new();
        let mut cones = Vec::new();
        let mut push = |e: &super::AffineExpr, scale: f64, g_rows: &mut Vec<Vec<(usize, f64)>>| {
            g_rows.push(e.terms.iter().map(|&(i, a)| (i, -scale * a)).collect());
            h.push(scale * e.constant);
        };
        if !pre.nonnegative.is_empty() {
            for e in &pre.nonnegative {
                push(e, 1.0, &mut g_rows);
            }
            cones.push(Cone::Nonneg(pre.nonnegative.len()));
        }
        for cone in &pre.soc {
            for e in cone {
                push(e, 1.0, &mut g_rows);
            }
            cones.push(Cone::Soc(cone.len()));
        }
        let mut psd_patterns = Vec::new();
        for block in &pre.psd {
            let n_b = block.size;
            let mut by_col: std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>> = Default::default();
            for i in 0..n_b {
                for k in i..n_b {
                    let e = &block.upper[svec_index(n_b, i, k)];
                    let scale = if i == k { 1.0 } else { std::f64::consts::SQRT_2 };
                    push(e, scale, &mut g_rows);
                    for &(j, a) in &e.terms {
                        let coef = if i == k { 0.5 * a } else { a };
                        by_col.entry(j).or_default().push((i, k, coef));
                    }
                }
            }
            psd_patterns.push(PsdPattern::new(by_col));
            cones.push(Cone::Psd(n_b));
        }
        StandardForm { n, c, c0: pre.objective.constant, g_rows, h, cones: ConeSet::new(cones), psd_patterns }
    }

    fn g_mul(&self, x: &[f64]) -> Vec<f64> {
        self.g_rows.iter().map(|r| r.iter().map(|&(j, a)| a * x[j]).sum()).collect()
    }

    fn gt_mul(&self, z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (r, &zi) in self.g_rows.iter().zip(z) {
            if zi != 0.0 {
                for &(j, a) in r {
                    out[j] += a * zi;
                }
            }
        }
        out
    }

    /// `G' (W'W)^-1 G`.
    fn schur(&self, w: &Scaling) -> DMatrix<f64> {
        let n = self.n;
        let mut hm = DMatrix::zeros(n, n);
        let mut psd_idx = 0;
        for (ci, &cone) in self.cones.cones.iter().enumerate() {
            let off = self.cones.offsets[ci];
            match (cone, &w.blocks[ci]) {
                (Cone::Nonneg(m), super::cones::ConeScaling::Nonneg(wv)) => {
                    for r in 0..m {
                        let d = 1.0 / (wv[r] * wv[r]);
                        let row = &self.g_rows[off + r];
                        for &(j, a) in row {
                            for &(l, b) in row {
                                hm[(j, l)] += d * a * b;
                            }
                        }
                    }
                }
                (Cone::Soc(q), _) => {
                    let mut cols: Vec<usize> =
                        (0..q).flat_map(|r| self.g_rows[off + r].iter().map(|t| t.0)).collect();
                    cols.sort_unstable();
                    cols.dedup();
                    let pos: std::collections::HashMap<usize, usize> =
                        cols.iter().enumerate().map(|(p, &c)| (c, p)).collect();
                    // Columns of W^-1 G restricted to this cone.
                    let mut gc = vec![vec![0.0; q]; cols.len()];
                    for r in 0..q {
                        for &(j, a) in &self.g_rows[off + r] {
                            gc[pos[&j]][r] += a;
                        }
                    }
                    let mut y = DMatrix::zeros(q, cols.len());
                    for (p, col) in gc.iter().enumerate() {
                        let t = w.soc_winv(ci, col);
                        for r in 0..q {
                            y[(r, p)] = t[r];
                        }
                    }
                    let yty = y.transpose() * &y;
                    for (p, &j) in cols.iter().enumerate() {
                        for (s, &l) in cols.iter().enumerate() {
                            hm[(j, l)] += yty[(p, s)];
                        }
                    }
                }
                (Cone::Psd(_), super::cones::ConeScaling::Psd { q, .. }) => {
                    self.psd_patterns[psd_idx].add_schur(q, &mut hm);
                    psd_idx += 1;
                }
                _ => unreachable!("scaling/cone mismatch"),
            }
        }
        hm
    }
}

/// Regularized Cholesky factor of the reduced KKT matrix plus the exact
/// matrix for iterative refinement.
struct Kkt<'a> {
    form: &'a StandardForm,
    w: &'a Scaling,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    refinement_steps: usize,
}

impl<'a> Kkt<'a> {
    fn factor(form: &'a StandardForm, w: &'a Scaling, refinement_steps: usize) -> Option<Self> {
        let h = form.schur(w);
        let max_diag = (0..form.n).map(|i| h[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let mut reg = 1e-13 * max_diag.max(1.0);
        for _ in 0..8 {
            let mut hr = h.clone();
            for i in 0..form.n {
                hr[(i, i)] += reg;
            }
            if let Some(chol) = hr.cholesky() {
                return Some(Kkt { form, w, chol, refinement_steps });
            }
            reg *= 100.0;
        }
        None
    }

    fn reduced_solve(&self, r1: &[f64], r3: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let t = self.w.wtw_inv(r3);
        let gt = self.form.gt_mul(&t);
        let rhs = DVector::from_iterator(self.form.n, r1.iter().zip(&gt).map(|(a, b)| a + b));
        let dx: Vec<f64> = self.chol.solve(&rhs).iter().copied().collect();
        let gdx = self.form.g_mul(&dx);
        let diff: Vec<f64> = gdx.iter().zip(r3).map(|(a, b)| a - b).collect();
        (dx, self.w.wtw_inv(&diff))
    }

    /// Solves `[0 G'; G -W'W] [dx; dz] = [r1; r3]` with iterative
    /// refinement on the full system.
    fn solve(&self, r1: &[f64], r3: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (mut dx, mut dz) = self.reduced_solve(r1, r3);
        let target = 1e-14 * (1.0 + norm(r1) + norm(r3));
        for _ in 0..self.refinement_steps {
            let gtdz = self.form.gt_mul(&dz);
            let e1: Vec<f64> = r1.iter().zip(&gtdz).map(|(r, v)| r - v).collect();
            let gdx = self.form.g_mul(&dx);
            let wdz = self.w.wtw(&dz);
            let e3: Vec<f64> = (0..r3.len()).map(|i| r3[i] - (gdx[i] - wdz[i])).collect();
            if norm(&e1) + norm(&e3) <= target {
                break;
            }
            let (ex, ez) = self.reduced_solve(&e1, &e3);
            axpy(1.0, &ex, &mut dx);
            axpy(1.0, &ez, &mut dz);
        }
        (dx, dz)
    }
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn shift_into_cone(cones: &ConeSet, v: &mut [f64]) {
    let min = cones.min_eig(v);
    if min <= 1e-8 * norm(v).max(1.0) {
        let e = cones.identity();
        axpy(1.0 - min, &e, v);
    }
}

fn hsd(form: &StandardForm, st: &IpmSettings) -> (Vec<f64>, SolveStatus, SolverStats) {
    let n = form.n;
    let cones = &form.cones;
    let e = cones.identity();
    let resx0 = norm(&form.c).max(1.0);
    let resz0 = norm(&form.h).max(1.0);
    let degree = cones.degree as f64;

    // Initial point: least-squares primal and minimum-norm dual with W = I.
    let ones = cones.scaling(&e, &e).expect("identity scaling");
    let Some(kkt0) = Kkt::factor(form, &ones, st.refinement_steps) else {
        return (vec![0.0; n], SolveStatus::NumericalFailure, SolverStats::default());
    };
    let (mut x, zp) = kkt0.solve(&vec![0.0; n], &form.h);
    let mut s: Vec<f64> = zp.iter().map(|v| -v).collect();
    let neg_c: Vec<f64> = form.c.iter().map(|v| -v).collect();
    let (_, mut z) = kkt0.solve(&neg_c, &vec![0.0; cones.dim]);
    shift_into_cone(cones, &mut s);
    shift_into_cone(cones, &mut z);
    let (mut tau, mut kappa) = (1.0f64, 1.0f64);

    let mut stats = SolverStats::default();
    let mut near: Option<(Vec<f64>, SolverStats, f64)> = None;
    let mut best_res = f64::INFINITY;

    for iter in 0..=st.max_iters {
        let gtz = form.gt_mul(&z);
        let gx = form.g_mul(&x);
        let rx: Vec<f64> = gtz.iter().zip(&form.c).map(|(a, c)| a + c * tau).collect();
        let rz: Vec<f64> = (0..cones.dim).map(|i| -gx[i] + form.h[i] * tau - s[i]).collect();
        let cx = dot(&form.c, &x);
        let hz = dot(&form.h, &z);
        let rt = -cx - hz - kappa;
        let gap = dot(&s, &z);
        let mu = (gap + tau * kappa) / (degree + 1.0);
        let pcost = cx / tau;
        let dcost = -hz / tau;
        let relgap = gap / (tau * tau) / (pcost + form.c0).abs().min((dcost + form.c0).abs()).max(1.0);
        let pres = norm(&rz) / tau / resz0;
        let dres = norm(&rx) / tau / resx0;
        stats = SolverStats { iterations: iter, primal_residual: pres, dual_residual: dres, gap: gap / (tau * tau) };

        let scaled_x = || x.iter().map(|v| v / tau).collect::<Vec<f64>>();
        if pres <= st.feastol && dres <= st.feastol && (gap / (tau * tau) <= st.abstol || relgap <= st.reltol) {
            return (scaled_x(), SolveStatus::Optimal, stats);
        }
        if hz < 0.0 && norm(&gtz) / resx0 / -hz <= st.feastol {
            return (vec![0.0; n], SolveStatus::Infeasible, stats);
        }
        if cx < 0.0 {
            let hres: Vec<f64> = gx.iter().zip(&s).map(|(a, b)| a + b).collect();
            if norm(&hres) / resz0 / -cx <= st.feastol {
                return (vec![0.0; n], SolveStatus::Unbounded, stats);
            }
        }
        if pres <= st.near_feastol
            && dres <= st.near_feastol
            && (gap / (tau * tau) <= st.near_gaptol || relgap <= st.near_gaptol)
        {
            let merit = pres.max(dres).max(relgap.min(gap / (tau * tau)));
            if near.as_ref().is_none_or(|(_, _, m)| merit <= *m) {
                near = Some((scaled_x(), stats, merit));
            }
        }
        // Past the attainable accuracy the scaling degrades and residuals
        // grow again; stop and fall back to the best near-optimal point.
        if near.is_some() && pres.max(dres) > (1e3 * best_res).max(st.feastol) {
            break;
        }
        best_res = best_res.min(pres.max(dres));
        if iter == st.max_iters {
            break;
        }

        let Some(w) = cones.scaling(&s, &z) else { break };
        let Some(kkt) = Kkt::factor(form, &w, st.refinement_steps) else { break };
        let lambda = &w.lambda;
        let lambda_sq = cones.jordan(lambda, lambda);
        let (x1, z1) = kkt.solve(&neg_c, &form.h);
        let denom_base = -dot(&form.c, &x1) - dot(&form.h, &z1);

        let direction = |sigma: f64, ds_rhs: &[f64], dk_rhs: f64| {
            let bx: Vec<f64> = rx.iter().map(|v| -(1.0 - sigma) * v).collect();
            let bz: Vec<f64> = rz.iter().map(|v| -(1.0 - sigma) * v).collect();
            let bt = -(1.0 - sigma) * rt;
            let ld = w.wt(&cones.lambda_div(lambda, ds_rhs));
            let r3: Vec<f64> = bz.iter().zip(&ld).map(|(b, l)| -b - l).collect();
            let (x2, z2) = kkt.solve(&bx, &r3);
            let dtau = (bt + dk_rhs / tau + dot(&form.c, &x2) + dot(&form.h, &z2)) / (kappa / tau + denom_base);
            let mut dx = x2;
            axpy(dtau, &x1, &mut dx);
            let mut dz = z2;
            axpy(dtau, &z1, &mut dz);
            let wtwdz = w.wtw(&dz);
            let ds: Vec<f64> = ld.iter().zip(&wtwdz).map(|(a, b)| a - b).collect();
            let dkappa = (dk_rhs - kappa * dtau) / tau;
            (dx, ds, dz, dtau, dkappa)
        };
        let step = |ds: &[f64], dz: &[f64], dtau: f64, dkappa: f64| {
            let mut a = cones.max_step(&s, ds).min(cones.max_step(&z, dz));
            if dtau < 0.0 {
                a = a.min(-tau / dtau);
            }
            if dkappa < 0.0 {
                a = a.min(-kappa / dkappa);
            }
            a
        };

        // Predictor.
        let ds_aff_rhs: Vec<f64> = lambda_sq.iter().map(|v| -v).collect();
        let (_, ds_a, dz_a, dtau_a, dkappa_a) = direction(0.0, &ds_aff_rhs, -tau * kappa);
        let alpha_a = step(&ds_a, &dz_a, dtau_a, dkappa_a).min(1.0);
        let sigma = (1.0 - alpha_a).powi(3);

        // Corrector.
        let corr = cones.jordan(&w.winv_t(&ds_a), &w.w(&dz_a));
        let ds_rhs: Vec<f64> =
            (0..cones.dim).map(|i| -lambda_sq[i] + sigma * mu * e[i] - corr[i]).collect();
        let dk_rhs = -tau * kappa + sigma * mu - dtau_a * dkappa_a;
        let (dx, ds, dz, dtau, dkappa) = direction(sigma, &ds_rhs, dk_rhs);
        let alpha = (st.step_fraction * step(&ds, &dz, dtau, dkappa)).min(1.0);
        if !(alpha > 0.0) || !alpha.is_finite() {
            break;
        }
        axpy(alpha, &dx, &mut x);
        axpy(alpha, &ds, &mut s);
        axpy(alpha, &dz, &mut z);
        tau += alpha * dtau;
        kappa += alpha * dkappa;
        if !(tau > 0.0 && kappa > 0.0) || x.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    match near {
        Some((x, st, _)) => (x, SolveStatus::NearOptimal, st),
        None => (x.iter().map(|v| v / tau).collect(), SolveStatus::NumericalFailure, stats),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{AffineExpr, ExprMatrix, PsdBlock, VarKind};
    use crate::linalg::{c, fro2, CMat};
    use crate::model::gaussian_matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn solve(p: &ConicProgram) -> ConicSolution {
        InteriorPoint::default().solve(p)
    }

    #[test]
    fn scalar_lower_bound_as_psd() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x", 1, 1, VarKind::Real);
        p.set_objective(AffineExpr::var(x.offset, 1.0));
        p.add_psd(PsdBlock::from_fn(1, |_, _| AffineExpr::var(x.offset, 1.0).plus_constant(-3.0)));
        let sol = solve(&p);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-7, "{sol:?}");
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x", 1, 1, VarKind::Real);
        p.set_objective(AffineExpr::var(x.offset, 1.0));
        p.add_nonneg(AffineExpr::var(x.offset, 1.0).plus_constant(-1.0));
        p.add_nonneg(AffineExpr::var(x.offset, -1.0));
        assert_eq!(solve(&p).status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x", 1, 1, VarKind::Real);
        p.set_objective(AffineExpr::var(x.offset, -1.0));
        p.add_nonneg(AffineExpr::var(x.offset, 1.0));
        assert_eq!(solve(&p).status, SolveStatus::Unbounded);
    }

    #[test]
    fn soc_projection() {
        // min t s.t. ||(x - 3, y + 4)|| <= t, x + y = 0 -> optimum at x = 3.5, y = -3.5.
        let mut p = ConicProgram::new();
        let v = p.add_var("v", 3, 1, VarKind::Real);
        let (x, y, t) = (v.offset, v.offset + 1, v.offset + 2);
        p.set_objective(AffineExpr::var(t, 1.0));
        p.add_soc(
            AffineExpr::var(t, 1.0),
            vec![AffineExpr::var(x, 1.0).plus_constant(-3.0), AffineExpr::var(y, 1.0).plus_constant(4.0)],
        );
        p.add_eq(AffineExpr::var(x, 1.0).add(&AffineExpr::var(y, 1.0)));
        let sol = solve(&p);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[x] - 3.5).abs() < 1e-6 && (sol.x[y] + 3.5).abs() < 1e-6, "{:?}", sol.x);
        assert!((sol.objective_value - 0.5f64.sqrt()).abs() < 1e-7);
    }

    #[test]
    fn schur_lmi_gives_gram_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (n, m) in [(2, 3), (3, 2), (4, 4)] {
            let t = gaussian_matrix(&mut rng, n, m, 1.0);
            let mut p = ConicProgram::new();
            let a = p.add_var("a", n, n, VarKind::Hermitian);
            let ae = a.expr();
            p.set_objective(ae.trace().re());
            let lmi = ExprMatrix::blocks(&[
                &[&ae, &ExprMatrix::constant(&t)],
                &[&ExprMatrix::constant(&t.adjoint()), &ExprMatrix::constant(&CMat::identity(m, m))],
            ]);
            p.add_hermitian_psd(&lmi).unwrap();
            let sol = solve(&p);
            assert_eq!(sol.status, SolveStatus::Optimal);
            assert!((sol.objective_value - fro2(&t)).abs() < 1e-7 * (1.0 + fro2(&t)));
            let gap = a.read(&sol.x) - &t * t.adjoint();
            assert!(crate::linalg::min_hermitian_eigenvalue(&gap) >= -1e-7);
            assert!(p.max_violation(&sol.x) <= 1e-7);
        }
    }

    #[test]
    fn complex_equality_and_power_cap() {
        // min -Re(w) s.t. |w| <= 2 with w = u + i u, so the optimum is u = sqrt(2).
        let mut p = ConicProgram::new();
        let w = p.add_var("w", 1, 1, VarKind::Complex);
        let u = p.add_var("u", 1, 1, VarKind::Real);
        let we = w.expr();
        p.set_objective(we.re_inner(&CMat::from_element(1, 1, c(-1.0, 0.0))));
        p.add_frobenius_cap(&we, 2.0);
        let ue = u.expr();
        let target = ue.add(&ue.right_mul(&CMat::from_element(1, 1, c(0.0, 1.0))));
        p.add_complex_eq(&we, &target);
        let sol = solve(&p);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[u.offset] - 2f64.sqrt()).abs() < 1e-6);
    }
}
