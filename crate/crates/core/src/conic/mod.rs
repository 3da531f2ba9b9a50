//! Real conic programs over equality, nonnegative, second-order and PSD
//! cones, the complex-to-real Hermitian embedding, and the solver backend.
//!
//! Model variables are registered by name and mapped onto real scalar
//! slots. Complex `n x m` variables take `2nm` slots (real and imaginary
//! parts, row-major); Hermitian `n x n` variables take `n^2` slots: the `n`
//! real diagonal entries followed by `(re, im)` pairs for the strict upper
//! triangle in row-major order.

mod cones;
mod expr;
mod ipm;
mod presolve;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

pub use expr::{AffineExpr, ComplexExpr, ExprMatrix};
pub use ipm::{InteriorPoint, IpmSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Real,
    Complex,
    Hermitian,
}

/// Location of one named model variable inside the real decision vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSlot {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub kind: VarKind,
}

impl VarSlot {
    pub fn len(&self) -> usize {
        match self.kind {
            VarKind::Real => self.rows * self.cols,
            VarKind::Complex => 2 * self.rows * self.cols,
            VarKind::Hermitian => self.rows * self.rows,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of the off-diagonal pair `(i, j)`, `i < j`, of a Hermitian slot.
    fn pair_index(&self, i: usize, j: usize) -> usize {
        let n = self.rows;
        // Pairs preceding row i, then the offset within row i.
        let before = i * n - i * (i + 1) / 2;
        self.offset + n + 2 * (before + (j - i - 1))
    }

    /// The variable as a matrix of complex affine expressions.
    pub fn expr(&self) -> ExprMatrix {
        let mut m = ExprMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let e = match self.kind {
                    VarKind::Real => ComplexExpr::real_var(self.offset + i * self.cols + j),
                    VarKind::Complex => {
                        let base = self.offset + 2 * (i * self.cols + j);
                        ComplexExpr::complex_var(base, base + 1)
                    }
                    VarKind::Hermitian if i == j => ComplexExpr::real_var(self.offset + i),
                    VarKind::Hermitian if i < j => {
                        let p = self.pair_index(i, j);
                        ComplexExpr::complex_var(p, p + 1)
                    }
                    VarKind::Hermitian => {
                        let p = self.pair_index(j, i);
                        ComplexExpr::complex_var(p, p + 1).conj()
                    }
                };
                m[(i, j)] = e;
            }
        }
        m
    }

    /// Reads the variable back from a real decision vector.
    pub fn read(&self, x: &[f64]) -> CMat {
        self.expr().eval(x)
    }

    /// Writes a value into a real decision vector (Hermitian values are read
    /// from their upper triangle).
    pub fn write(&self, value: &CMat, x: &mut [f64]) {
        assert_eq!(value.shape(), (self.rows, self.cols));
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = value[(i, j)];
                match self.kind {
                    VarKind::Real => x[self.offset + i * self.cols + j] = z.re,
                    VarKind::Complex => {
                        let base = self.offset + 2 * (i * self.cols + j);
                        x[base] = z.re;
                        x[base + 1] = z.im;
                    }
                    VarKind::Hermitian if i == j => x[self.offset + i] = z.re,
                    VarKind::Hermitian if i < j => {
                        let p = self.pair_index(i, j);
                        x[p] = z.re;
                        x[p + 1] = z.im;
                    }
                    VarKind::Hermitian => {}
                }
            }
        }
    }
}

/// A real symmetric matrix-valued affine expression constrained PSD. Only
/// the upper triangle is stored (row-major), so symmetry holds by
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdBlock {
    pub size: usize,
    pub upper: Vec<AffineExpr>,
}

impl PsdBlock {
    pub fn from_fn(size: usize, mut entry: impl FnMut(usize, usize) -> AffineExpr) -> Self {
        let mut upper = Vec::with_capacity(size * (size + 1) / 2);
        for i in 0..size {
            for k in i..size {
                upper.push(entry(i, k));
            }
        }
        PsdBlock { size, upper }
    }

    pub fn entry(&self, i: usize, k: usize) -> &AffineExpr {
        let (i, k) = if i <= k { (i, k) } else { (k, i) };
        &self.upper[cones::svec_index(self.size, i, k)]
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.size, self.size, |i, k| self.entry(i, k).eval(x))
    }
}

/// Real conic program: minimize an affine objective subject to affine
/// equalities, nonnegativity, second-order cones `||u|| <= t` (stored as
/// `[t, u...]`) and PSD blocks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub n_vars: usize,
    pub objective: AffineExpr,
    pub equalities: Vec<AffineExpr>,
    pub nonnegative: Vec<AffineExpr>,
    pub soc: Vec<Vec<AffineExpr>>,
    pub psd: Vec<PsdBlock>,
    pub variables: Vec<VarSlot>,
    /// Point near the expected solution; backends may solve for the
    /// offset from it.
    #[serde(default)]
    pub hint: Option<Vec<f64>>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: &str, rows: usize, cols: usize, kind: VarKind) -> VarSlot {
        assert!(kind != VarKind::Hermitian || rows == cols, "Hermitian variables are square");
        assert!(self.var(name).is_none(), "duplicate variable {name}");
        let slot = VarSlot { name: name.to_string(), offset: self.n_vars, rows, cols, kind };
        self.n_vars += slot.len();
        self.variables.push(slot.clone());
        slot
    }

    pub fn var(&self, name: &str) -> Option<&VarSlot> {
        self.variables.iter().find(|v| v.name == name)
    }

    /// Name-to-slot registry.
    pub fn registry(&self) -> BTreeMap<&str, &VarSlot> {
        self.variables.iter().map(|v| (v.name.as_str(), v)).collect()
    }

    pub fn add_eq(&mut self, expr: AffineExpr) {
        self.equalities.push(expr.compact());
    }

    /// Adds `lhs == rhs` entrywise, real and imaginary parts separately.
    pub fn add_complex_eq(&mut self, lhs: &ExprMatrix, rhs: &ExprMatrix) {
        assert_eq!(lhs.shape(), rhs.shape());
        for (a, b) in lhs.data().iter().zip(rhs.data()) {
            let diff = a.sub(b);
            let (re, im) = (diff.re(), diff.im());
            if !re.is_trivially_zero() {
                self.add_eq(re);
            }
            if !im.is_trivially_zero() {
                self.add_eq(im);
            }
        }
    }

    pub fn add_nonneg(&mut self, expr: AffineExpr) {
        self.nonnegative.push(expr.compact());
    }

    pub fn add_soc(&mut self, t: AffineExpr, u: Vec<AffineExpr>) {
        let mut cone = vec![t.compact()];
        cone.extend(u.into_iter().map(AffineExpr::compact));
        self.soc.push(cone);
    }

    /// `||m||_F <= radius` for a complex matrix expression.
    pub fn add_frobenius_cap(&mut self, m: &ExprMatrix, radius: f64) {
        let parts = m.data().iter().flat_map(|z| [z.re(), z.im()]).collect();
        self.add_soc(AffineExpr::constant(radius), parts);
    }

    pub fn add_psd(&mut self, block: PsdBlock) {
        let upper = block.upper.into_iter().map(AffineExpr::compact).collect();
        self.psd.push(PsdBlock { size: block.size, upper });
    }

    /// Adds a complex Hermitian LMI through its real embedding.
    pub fn add_hermitian_psd(&mut self, m: &ExprMatrix) -> Result<()> {
        let block = embed_hermitian_psd(m)?;
        self.add_psd(block);
        Ok(())
    }

    pub fn set_objective(&mut self, objective: AffineExpr) {
        self.objective = objective.compact();
    }

    /// Real PSD block dimensions, in insertion order.
    pub fn psd_sizes(&self) -> Vec<usize> {
        self.psd.iter().map(|b| b.size).collect()
    }

    /// The same program in the offset `y = x - x0`.
    pub fn shifted(&self, x0: &[f64]) -> ConicProgram {
        let shift = |e: &AffineExpr| AffineExpr { terms: e.terms.clone(), constant: e.eval(x0) };
        ConicProgram {
            n_vars: self.n_vars,
            objective: shift(&self.objective),
            equalities: self.equalities.iter().map(shift).collect(),
            nonnegative: self.nonnegative.iter().map(shift).collect(),
            soc: self.soc.iter().map(|c| c.iter().map(shift).collect()).collect(),
            psd: self
                .psd
                .iter()
                .map(|b| PsdBlock { size: b.size, upper: b.upper.iter().map(shift).collect() })
                .collect(),
            variables: self.variables.clone(),
            hint: None,
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.eval(x)
    }

    /// Largest constraint violation at `x`: equality residuals, negative
    /// parts of nonnegative rows, SOC gaps and negative PSD eigenvalues.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for e in &self.equalities {
            worst = worst.max(e.eval(x).abs());
        }
        for e in &self.nonnegative {
            worst = worst.max(-e.eval(x));
        }
        for cone in &self.soc {
            let t = cone[0].eval(x);
            let u = cone[1..].iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(u - t);
        }
        for b in &self.psd {
            let ev = nalgebra::SymmetricEigen::new(b.eval(x)).eigenvalues;
            worst = worst.max(-ev.min());
        }
        worst
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl SolveStatus {
    pub fn is_usable(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    /// Relative primal residual of the reduced problem.
    pub primal_residual: f64,
    /// Relative dual residual of the reduced problem.
    pub dual_residual: f64,
    /// Duality gap `s'z`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: SolveStatus,
    pub stats: SolverStats,
}

/// Anything able to solve a [`ConicProgram`].
pub trait ConicBackend: Sync {
    fn solve(&self, program: &ConicProgram) -> ConicSolution;
}

/// Solves with the built-in interior-point backend.
pub fn solve(program: &ConicProgram, settings: &IpmSettings) -> ConicSolution {
    InteriorPoint::new(settings.clone()).solve(program)
}

/// Real embedding `[[Re M, -Im M], [Im M, Re M]]` of a Hermitian expression.
pub fn embed_hermitian_psd(m: &ExprMatrix) -> Result<PsdBlock> {
    let (n, cols) = m.shape();
    if n != cols {
        return Err(Error::Dimension(format!("Hermitian embedding needs a square matrix, got {n}x{cols}")));
    }
    Ok(PsdBlock::from_fn(2 * n, |i, k| match (i < n, k < n) {
        (true, true) => m[(i, k)].re(),
        (true, false) => m[(i, k - n)].im().scaled(-1.0),
        (false, false) => m[(i - n, k - n)].re(),
        (false, true) => unreachable!("upper triangle only"),
    }))
}

/// Numeric counterpart of [`embed_hermitian_psd`].
pub fn embed_hermitian_matrix(m: &CMat) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, k| match (i < n, k < n) {
        (true, true) => m[(i, k)].re,
        (true, false) => -m[(i, k - n)].im,
        (false, true) => m[(i - n, k)].im,
        (false, false) => m[(i - n, k - n)].re,
    })
}

/// Reads the complex matrix back out of a real embedding, averaging the two
/// copies of each part.
pub fn extract_hermitian(e: &DMatrix<f64>) -> CMat {
    let n = e.nrows() / 2;
    CMat::from_fn(n, n, |i, k| {
        let re = 0.5 * (e[(i, k)] + e[(i + n, k + n)]);
        let im = 0.5 * (e[(i + n, k)] - e[(i, k + n)]);
        C64::new(re, im)
    })
}

/// Certifies `omega = x^H y^{-1} x` through the block LMI
/// `[[omega, x^H], [x, y]] >= 0` together with
/// `tr(omega - x^H y^{-1} x) <= 0`, both up to `tol`.
pub fn check_lemma1(omega: &CMat, x: &CMat, y: &CMat, tol: f64) -> Result<bool> {
    let (n, m) = x.shape();
    if omega.shape() != (m, m) || y.shape() != (n, n) {
        return Err(Error::Dimension("omega must be m x m, x n x m and y n x n".into()));
    }
    let chol = y
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("y is not positive definite".into()))?;
    let mut block = CMat::zeros(m + n, m + n);
    block.view_mut((0, 0), (m, m)).copy_from(omega);
    block.view_mut((0, m), (m, n)).copy_from(&x.adjoint());
    block.view_mut((m, 0), (n, m)).copy_from(x);
    block.view_mut((m, m), (n, n)).copy_from(y);
    let min_eig = nalgebra::SymmetricEigen::new(embed_hermitian_matrix(&block)).eigenvalues.min();
    let schur = omega - x.adjoint() * chol.solve(x);
    let trace: f64 = (0..m).map(|i| schur[(i, i)].re).sum();
    Ok(min_eig >= -tol && trace <= tol)
}
