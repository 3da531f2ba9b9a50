//! Symmetric cones in standard form and their Nesterov-Todd scalings.
//!
//! PSD cones are stored as `svec`: the upper triangle row-major with
//! off-diagonal entries scaled by `sqrt(2)`, so the Euclidean inner product
//! of two svecs equals the trace inner product of the matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cone {
    Nonneg(usize),
    Soc(usize),
    Psd(usize),
}

impl Cone {
    pub fn dim(self) -> usize {
        match self {
            Cone::Nonneg(m) | Cone::Soc(m) => m,
            Cone::Psd(n) => n * (n + 1) / 2,
        }
    }

    pub fn degree(self) -> usize {
        match self {
            Cone::Nonneg(m) => m,
            Cone::Soc(_) => 1,
            Cone::Psd(n) => n,
        }
    }
}

/// Position of `(i, k)`, `i <= k`, in the row-major upper triangle.
pub(crate) fn svec_index(n: usize, i: usize, k: usize) -> usize {
    debug_assert!(i <= k && k < n);
    // Rows 0..i hold n + (n-1) + ... + (n-i+1) entries.
    i * n - i * i.saturating_sub(1) / 2 + (k - i)
}

pub(crate) fn mat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for k in i..n {
            let x = v[svec_index(n, i, k)];
            if i == k {
                m[(i, i)] = x;
            } else {
                m[(i, k)] = x * r;
                m[(k, i)] = x * r;
            }
        }
    }
    m
}

pub(crate) fn svec(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let r = std::f64::consts::SQRT_2;
    for i in 0..n {
        for k in i..n {
            let x = if i == k { m[(i, i)] } else { 0.5 * (m[(i, k)] + m[(k, i)]) * r };
            out[svec_index(n, i, k)] = x;
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Product cone with per-cone offsets into the stacked slack vector.
#[derive(Debug, Clone)]
pub(crate) struct ConeSet {
    pub cones: Vec<Cone>,
    pub offsets: Vec<usize>,
    pub dim: usize,
    pub degree: usize,
}

impl ConeSet {
    pub fn new(cones: Vec<Cone>) -> Self {
        let mut offsets = Vec::with_capacity(cones.len());
        let mut dim = 0;
        for c in &cones {
            offsets.push(dim);
            dim += c.dim();
        }
        let degree = cones.iter().map(|c| c.degree()).sum();
        ConeSet { cones, offsets, dim, degree }
    }

    fn parts(&self) -> impl Iterator<Item = (Cone, std::ops::Range<usize>)> + '_ {
        self.cones.iter().zip(&self.offsets).map(|(&c, &o)| (c, o..o + c.dim()))
    }

    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        for (cone, r) in self.parts() {
            match cone {
                Cone::Nonneg(_) => e[r].fill(1.0),
                Cone::Soc(_) => e[r.start] = 1.0,
                Cone::Psd(n) => {
                    for i in 0..n {
                        e[r.start + svec_index(n, i, i)] = 1.0;
                    }
                }
            }
        }
        e
    }

    /// Jordan product `u o v`.
    pub fn jordan(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (cone, r) in self.parts() {
            let (u, v) = (&u[r.clone()], &v[r.clone()]);
            let o = &mut out[r];
            match cone {
                Cone::Nonneg(_) => {
                    for i in 0..o.len() {
                        o[i] = u[i] * v[i];
                    }
                }
                Cone::Soc(_) => {
                    o[0] = dot(u, v);
                    for i in 1..o.len() {
                        o[i] = u[0] * v[i] + v[0] * u[i];
                    }
                }
                Cone::Psd(n) => {
                    let (um, vm) = (mat(u, n), mat(v, n));
                    let p = &um * &vm;
                    svec(&((&p + p.transpose()) * 0.5), o);
                }
            }
        }
        out
    }

    /// Solves `lambda o x = w` for `x`. PSD parts of `lambda` must be
    /// diagonal, as produced by [`Scaling::lambda`].
    pub fn lambda_div(&self, lambda: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (cone, r) in self.parts() {
            let (l, w) = (&lambda[r.clone()], &w[r.clone()]);
            let o = &mut out[r];
            match cone {
                Cone::Nonneg(_) => {
                    for i in 0..o.len() {
                        o[i] = w[i] / l[i];
                    }
                }
                Cone::Soc(_) => {
                    let det = l[0] * l[0] - dot(&l[1..], &l[1..]);
                    let x0 = (l[0] * w[0] - dot(&l[1..], &w[1..])) / det;
                    o[0] = x0;
                    for i in 1..o.len() {
                        o[i] = (w[i] - x0 * l[i]) / l[0];
                    }
                }
                Cone::Psd(n) => {
                    for i in 0..n {
                        for k in i..n {
                            let (li, lk) = (l[svec_index(n, i, i)], l[svec_index(n, k, k)]);
                            let idx = svec_index(n, i, k);
                            o[idx] = 2.0 * w[idx] / (li + lk);
                        }
                    }
                }
            }
        }
        out
    }

    /// Smallest "eigenvalue" of `x` in the Jordan-algebra sense; positive
    /// iff `x` is interior.
    pub fn min_eig(&self, x: &[f64]) -> f64 {
        let mut worst = f64::INFINITY;
        for (cone, r) in self.parts() {
            let x = &x[r];
            let v = match cone {
                Cone::Nonneg(_) => x.iter().copied().fold(f64::INFINITY, f64::min),
                Cone::Soc(_) => x[0] - norm(&x[1..]),
                Cone::Psd(n) => SymmetricEigen::new(mat(x, n)).eigenvalues.min(),
            };
            worst = worst.min(v);
        }
        worst
    }

    /// Largest `alpha >= 0` with `x + alpha dx` in the cone (`x` interior);
    /// infinite when the ray never leaves it.
    pub fn max_step(&self, x: &[f64], dx: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for (cone, r) in self.parts() {
            let (x, d) = (&x[r.clone()], &dx[r]);
            let a = match cone {
                Cone::Nonneg(_) => x
                    .iter()
                    .zip(d)
                    .filter(|(_, &di)| di < 0.0)
                    .map(|(&xi, &di)| -xi / di)
                    .fold(f64::INFINITY, f64::min),
                Cone::Soc(_) => soc_step(x, d),
                Cone::Psd(n) => psd_step(&mat(x, n), &mat(d, n)),
            };
            alpha = alpha.min(a);
        }
        alpha
    }

    /// Nesterov-Todd scaling for interior `s`, `z`; `None` if either has
    /// numerically left the cone.
    pub fn scaling(&self, s: &[f64], z: &[f64]) -> Option<Scaling> {
        let mut blocks = Vec::with_capacity(self.cones.len());
        for (cone, r) in self.parts() {
            let (s, z) = (&s[r.clone()], &z[r]);
            let b = match cone {
                Cone::Nonneg(_) => {
                    if s.iter().chain(z).any(|&v| v <= 0.0) {
                        return None;
                    }
                    ConeScaling::Nonneg(s.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect())
                }
                Cone::Soc(_) => soc_scaling(s, z)?,
                Cone::Psd(n) => psd_scaling(&mat(s, n), &mat(z, n))?,
            };
            blocks.push(b);
        }
        let mut sc = Scaling { set: self.clone(), blocks, lambda: Vec::new() };
        sc.lambda = sc.w(z);
        // PSD parts of lambda are diagonal by construction; zero the roundoff.
        for (cone, r) in self.parts() {
            if let Cone::Psd(n) = cone {
                for i in 0..n {
                    for k in i + 1..n {
                        sc.lambda[r.start + svec_index(n, i, k)] = 0.0;
                    }
                }
            }
        }
        Some(sc)
    }
}

fn soc_step(x: &[f64], d: &[f64]) -> f64 {
    // f(a) = (x0 + a d0)^2 - |x1 + a d1|^2 = qa a^2 + 2 qb a + qc with qc > 0.
    let qa = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let qb = x[0] * d[0] - dot(&x[1..], &d[1..]);
    let qc = x[0] * x[0] - dot(&x[1..], &x[1..]);
    let mut best = f64::INFINITY;
    if qa.abs() < 1e-300 {
        if qb < 0.0 {
            best = -qc / (2.0 * qb);
        }
        return best.max(0.0);
    }
    let disc = qb * qb - qa * qc;
    if disc < 0.0 {
        return if qa > 0.0 { f64::INFINITY } else { 0.0 };
    }
    let q = -(qb + qb.signum() * disc.sqrt());
    for root in [q / qa, if q != 0.0 { qc / q } else { f64::NAN }] {
        if root.is_finite() && root > 0.0 {
            best = best.min(root);
        }
    }
    // Roots of the mirror cone x0 < 0 are spurious when the step keeps x0 > 0.
    if best.is_finite() && x[0] + best * d[0] < 0.0 && d[0] < 0.0 {
        best = best.min(-x[0] / d[0]);
    }
    best
}

fn psd_step(x: &DMatrix<f64>, d: &DMatrix<f64>) -> f64 {
    let Some(l) = x.clone().cholesky() else { return 0.0 };
    let l = l.l();
    // L^-1 D L^-T via two triangular solves.
    let Some(a) = l.solve_lower_triangular(d) else { return 0.0 };
    let Some(m) = l.solve_lower_triangular(&a.transpose()) else { return 0.0 };
    let m = (&m + m.transpose()) * 0.5;
    let min = m.symmetric_eigenvalues().min();
    if min < 0.0 {
        -1.0 / min
    } else {
        f64::INFINITY
    }
}

fn soc_scaling(s: &[f64], z: &[f64]) -> Option<ConeScaling> {
    let sj = s[0] * s[0] - dot(&s[1..], &s[1..]);
    let zj = z[0] * z[0] - dot(&z[1..], &z[1..]);
    if sj <= 0.0 || zj <= 0.0 || s[0] <= 0.0 || z[0] <= 0.0 {
        return None;
    }
    let (sn, zn) = (sj.sqrt(), zj.sqrt());
    let sbar: Vec<f64> = s.iter().map(|v| v / sn).collect();
    let zbar: Vec<f64> = z.iter().map(|v| v / zn).collect();
    let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
    let mut wbar = vec![0.0; s.len()];
    wbar[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
    for i in 1..s.len() {
        wbar[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
    }
    Some(ConeScaling::Soc { eta: (sn / zn).sqrt(), wbar })
}

fn psd_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<ConeScaling> {
    let ls = s.clone().cholesky()?.l();
    let lz = z.clone().cholesky()?.l();
    let svd = (lz.transpose() * &ls).svd(true, true);
    let (u_t, sigma) = (svd.v_t?, svd.singular_values);
    if sigma.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return None;
    }
    // lz' ls = U S V^T; nalgebra returns V^T as `v_t`.
    let v = u_t.transpose();
    let inv_sqrt = DVector::from_iterator(sigma.len(), sigma.iter().map(|x| 1.0 / x.sqrt()));
    let sqrt = DVector::from_iterator(sigma.len(), sigma.iter().map(|x| x.sqrt()));
    let r = &ls * &v * DMatrix::from_diagonal(&inv_sqrt);
    let ls_inv = ls.solve_lower_triangular(&DMatrix::identity(s.nrows(), s.nrows()))?;
    let rinv = DMatrix::from_diagonal(&sqrt) * v.transpose() * ls_inv;
    let q = rinv.transpose() * &rinv;
    let rrt = &r * r.transpose();
    Some(ConeScaling::Psd { r, rinv, q, rrt })
}

#[derive(Debug, Clone)]
pub(crate) enum ConeScaling {
    /// `W = diag(w)`, `w = sqrt(s / z)`.
    Nonneg(Vec<f64>),
    /// `W = eta [[w0, w1'], [w1, I + w1 w1' / (1 + w0)]]`, symmetric.
    Soc { eta: f64, wbar: Vec<f64> },
    /// `W(Z) = R' Z R`, `q = (R R')^-1`, `rrt = R R'`.
    Psd { r: DMatrix<f64>, rinv: DMatrix<f64>, q: DMatrix<f64>, rrt: DMatrix<f64> },
}

impl ConeScaling {
    fn soc_apply(eta: f64, wbar: &[f64], v: &[f64], inverse: bool, out: &mut [f64]) {
        let zeta = dot(&wbar[1..], &v[1..]);
        let w0 = wbar[0];
        if inverse {
            out[0] = (w0 * v[0] - zeta) / eta;
            let c = -v[0] + zeta / (1.0 + w0);
            for i in 1..v.len() {
                out[i] = (v[i] + c * wbar[i]) / eta;
            }
        } else {
            out[0] = eta * (w0 * v[0] + zeta);
            let c = v[0] + zeta / (1.0 + w0);
            for i in 1..v.len() {
                out[i] = eta * (v[i] + c * wbar[i]);
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Op {
    W,
    Wt,
    WinvT,
    WinvWinvT,
    WtW,
}

/// Block-diagonal NT scaling with `lambda = W z = W^-T s`.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    pub set: ConeSet,
    pub blocks: Vec<ConeScaling>,
    pub lambda: Vec<f64>,
}

impl Scaling {
    fn apply(&self, op: Op, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (ci, (_, r)) in self.set.parts().enumerate() {
            self.apply_block(ci, op, &v[r.clone()], &mut out[r]);
        }
        out
    }

    fn apply_block(&self, ci: usize, op: Op, v: &[f64], o: &mut [f64]) {
        match (&self.blocks[ci], self.set.cones[ci]) {
            (ConeScaling::Nonneg(w), _) => {
                for i in 0..o.len() {
                    o[i] = match op {
                        Op::W | Op::Wt => w[i] * v[i],
                        Op::WinvT => v[i] / w[i],
                        Op::WinvWinvT => v[i] / (w[i] * w[i]),
                        Op::WtW => v[i] * w[i] * w[i],
                    };
                }
            }
            (ConeScaling::Soc { eta, wbar }, _) => match op {
                Op::W | Op::Wt => ConeScaling::soc_apply(*eta, wbar, v, false, o),
                Op::WinvT => ConeScaling::soc_apply(*eta, wbar, v, true, o),
                Op::WinvWinvT => {
                    let mut tmp = vec![0.0; v.len()];
                    ConeScaling::soc_apply(*eta, wbar, v, true, &mut tmp);
                    ConeScaling::soc_apply(*eta, wbar, &tmp, true, o);
                }
                Op::WtW => {
                    let mut tmp = vec![0.0; v.len()];
                    ConeScaling::soc_apply(*eta, wbar, v, false, &mut tmp);
                    ConeScaling::soc_apply(*eta, wbar, &tmp, false, o);
                }
            },
            (ConeScaling::Psd { r, rinv, q, rrt }, Cone::Psd(n)) => {
                let m = mat(v, n);
                let res = match op {
                    Op::W => r.transpose() * m * r,
                    Op::Wt => r * m * r.transpose(),
                    Op::WinvT => rinv * m * rinv.transpose(),
                    Op::WinvWinvT => q * m * q,
                    Op::WtW => rrt * m * rrt,
                };
                svec(&res, o);
            }
            (ConeScaling::Psd { .. }, _) => unreachable!("scaling/cone mismatch"),
        }
    }

    /// `W^-1 v` restricted to second-order cone `ci` (W is symmetric there).
    pub fn soc_winv(&self, ci: usize, v: &[f64]) -> Vec<f64> {
        let mut o = vec![0.0; v.len()];
        self.apply_block(ci, Op::WinvT, v, &mut o);
        o
    }

    pub fn w(&self, v: &[f64]) -> Vec<f64> {
        self.apply(Op::W, v)
    }

    pub fn wt(&self, v: &[f64]) -> Vec<f64> {
        self.apply(Op::Wt, v)
    }

    pub fn winv_t(&self, v: &[f64]) -> Vec<f64> {
        self.apply(Op::WinvT, v)
    }

    /// `(W' W)^-1 v`.
    pub fn wtw_inv(&self, v: &[f64]) -> Vec<f64> {
        self.apply(Op::WinvWinvT, v)
    }

    pub fn wtw(&self, v: &[f64]) -> Vec<f64> {
        self.apply(Op::WtW, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_interior(set: &ConeSet, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x = vec![0.0; set.dim];
        for (cone, r) in set.parts() {
            let x = &mut x[r];
            match cone {
                Cone::Nonneg(_) => x.iter_mut().for_each(|v| *v = rng.random_range(0.1..3.0)),
                Cone::Soc(_) => {
                    x[1..].iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                    x[0] = norm(&x[1..]) + rng.random_range(0.1..2.0);
                }
                Cone::Psd(n) => {
                    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                    let m = &g * g.transpose() + DMatrix::identity(n, n) * 0.2;
                    svec(&m, x);
                }
            }
        }
        x
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
    }

    #[test]
    fn svec_layout() {
        assert_eq!(svec_index(3, 0, 0), 0);
        assert_eq!(svec_index(3, 0, 2), 2);
        assert_eq!(svec_index(3, 1, 1), 3);
        assert_eq!(svec_index(3, 1, 2), 4);
        assert_eq!(svec_index(3, 2, 2), 5);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0]);
        let mut v = vec![0.0; 3];
        svec(&m, &mut v);
        assert!((dot(&v, &v) - m.norm_squared()).abs() < 1e-12);
        assert!((mat(&v, 2) - m).norm() < 1e-14);
    }

    #[test]
    fn nt_scaling_identities() {
        let set = ConeSet::new(vec![Cone::Nonneg(3), Cone::Soc(4), Cone::Psd(3), Cone::Soc(2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = random_interior(&set, &mut rng);
            let z = random_interior(&set, &mut rng);
            let w = set.scaling(&s, &z).unwrap();
            // W z = W^-T s = lambda.
            assert!(close(&w.w(&z), &w.lambda, 1e-9));
            assert!(close(&w.winv_t(&s), &w.lambda, 1e-9));
            // lambda o lambda has s'z as its trace.
            let ll = set.jordan(&w.lambda, &w.lambda);
            assert!((dot(&ll, &set.identity()) - dot(&s, &z)).abs() < 1e-9 * dot(&s, &z));
            // (W'W)^-1 inverts W'W, and W' is the adjoint of W.
            let v = random_interior(&set, &mut rng);
            assert!(close(&w.wtw_inv(&w.wtw(&v)), &v, 1e-8));
            let u = random_interior(&set, &mut rng);
            assert!((dot(&u, &w.w(&v)) - dot(&w.wt(&u), &v)).abs() < 1e-9 * (1.0 + dot(&u, &v).abs()));
            // lambda \ (lambda o v) = v.
            let lv = set.jordan(&w.lambda, &v);
            assert!(close(&set.lambda_div(&w.lambda, &lv), &v, 1e-8));
        }
    }

    #[test]
    fn step_to_boundary() {
        let set = ConeSet::new(vec![Cone::Nonneg(2), Cone::Soc(3), Cone::Psd(2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let x = random_interior(&set, &mut rng);
            let d: Vec<f64> = (0..set.dim).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a = set.max_step(&x, &d);
            if !a.is_finite() {
                continue;
            }
            let at = |t: f64| -> Vec<f64> { x.iter().zip(&d).map(|(x, d)| x + t * d).collect() };
            assert!(set.min_eig(&at(0.999 * a)) > -1e-9);
            assert!(set.min_eig(&at(a)).abs() < 1e-7);
            assert!(set.min_eig(&at(1.01 * a)) < 0.0);
        }
    }
}
