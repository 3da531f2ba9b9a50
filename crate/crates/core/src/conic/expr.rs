//! Sparse affine expressions over the real decision vector, and complex
//! matrices built from them.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::linalg::{CMat, C64};

/// `constant + sum(coef * x[index])`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        AffineExpr { terms: Vec::new(), constant: c }
    }

    pub fn var(index: usize, coef: f64) -> Self {
        AffineExpr { terms: vec![(index, coef)], constant: 0.0 }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, a)| a * x[i]).sum::<f64>()
    }

    pub fn add(&self, other: &AffineExpr) -> AffineExpr {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        AffineExpr { terms, constant: self.constant + other.constant }
    }

    pub fn sub(&self, other: &AffineExpr) -> AffineExpr {
        self.add(&other.scaled(-1.0))
    }

    pub fn add_assign_scaled(&mut self, other: &AffineExpr, s: f64) {
        if s == 0.0 {
            return;
        }
        self.terms.extend(other.terms.iter().map(|&(i, a)| (i, a * s)));
        self.constant += s * other.constant;
    }

    pub fn scaled(&self, s: f64) -> AffineExpr {
        AffineExpr {
            terms: self.terms.iter().map(|&(i, a)| (i, a * s)).collect(),
            constant: self.constant * s,
        }
    }

    pub fn plus_constant(mut self, c: f64) -> AffineExpr {
        self.constant += c;
        self
    }

    /// Sorts terms by index, merges duplicates and drops exact zeros.
    pub fn compact(mut self) -> AffineExpr {
        self.terms.sort_by_key(|t| t.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (i, a) in self.terms {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += a,
                _ => out.push((i, a)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        self.terms = out;
        self
    }

    pub fn is_trivially_zero(&self) -> bool {
        self.constant == 0.0 && self.terms.iter().all(|t| t.1 == 0.0)
    }

    pub fn coefficient(&self, index: usize) -> f64 {
        self.terms.iter().filter(|t| t.0 == index).map(|t| t.1).sum()
    }
}

/// Complex scalar expression `re + i im`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplexExpr {
    pub re: AffineExpr,
    pub im: AffineExpr,
}

impl ComplexExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(z: C64) -> Self {
        ComplexExpr { re: AffineExpr::constant(z.re), im: AffineExpr::constant(z.im) }
    }

    pub fn real_var(index: usize) -> Self {
        ComplexExpr { re: AffineExpr::var(index, 1.0), im: AffineExpr::zero() }
    }

    pub fn complex_var(re: usize, im: usize) -> Self {
        ComplexExpr { re: AffineExpr::var(re, 1.0), im: AffineExpr::var(im, 1.0) }
    }

    pub fn re(&self) -> AffineExpr {
        self.re.clone().compact()
    }

    pub fn im(&self) -> AffineExpr {
        self.im.clone().compact()
    }

    pub fn conj(&self) -> ComplexExpr {
        ComplexExpr { re: self.re.clone(), im: self.im.scaled(-1.0) }
    }

    pub fn add(&self, other: &ComplexExpr) -> ComplexExpr {
        ComplexExpr { re: self.re.add(&other.re), im: self.im.add(&other.im) }
    }

    pub fn sub(&self, other: &ComplexExpr) -> ComplexExpr {
        ComplexExpr { re: self.re.sub(&other.re), im: self.im.sub(&other.im) }
    }

    /// `self += z * other`.
    pub fn add_assign_mul(&mut self, z: C64, other: &ComplexExpr) {
        self.re.add_assign_scaled(&other.re, z.re);
        self.re.add_assign_scaled(&other.im, -z.im);
        self.im.add_assign_scaled(&other.re, z.im);
        self.im.add_assign_scaled(&other.im, z.re);
    }

    pub fn mul(&self, z: C64) -> ComplexExpr {
        let mut out = ComplexExpr::zero();
        out.add_assign_mul(z, self);
        out
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        C64::new(self.re.eval(x), self.im.eval(x))
    }

    pub fn compact(self) -> ComplexExpr {
        ComplexExpr { re: self.re.compact(), im: self.im.compact() }
    }
}

/// Dense row-major matrix of complex affine expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    rows: usize,
    cols: usize,
    data: Vec<ComplexExpr>,
}

impl ExprMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ExprMatrix { rows, cols, data: vec![ComplexExpr::zero(); rows * cols] }
    }

    pub fn constant(m: &CMat) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = ComplexExpr::constant(m[(i, j)]);
            }
        }
        out
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[ComplexExpr] {
        &self.data
    }

    pub fn eval(&self, x: &[f64]) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].eval(x))
    }

    pub fn adjoint(&self) -> ExprMatrix {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn add(&self, other: &ExprMatrix) -> ExprMatrix {
        assert_eq!(self.shape(), other.shape());
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.add(b).compact()).collect();
        ExprMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &ExprMatrix) -> ExprMatrix {
        assert_eq!(self.shape(), other.shape());
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a.sub(b).compact()).collect();
        ExprMatrix { rows: self.rows, cols: self.cols, data }
    }

    /// `m * self` for a constant `m`.
    pub fn left_mul(&self, m: &CMat) -> ExprMatrix {
        assert_eq!(m.ncols(), self.rows);
        let mut out = Self::zeros(m.nrows(), self.cols);
        for i in 0..m.nrows() {
            for j in 0..self.cols {
                let mut acc = ComplexExpr::zero();
                for l in 0..self.rows {
                    acc.add_assign_mul(m[(i, l)], &self[(l, j)]);
                }
                out[(i, j)] = acc.compact();
            }
        }
        out
    }

    /// `self * m` for a constant `m`.
    pub fn right_mul(&self, m: &CMat) -> ExprMatrix {
        assert_eq!(self.cols, m.nrows());
        let mut out = Self::zeros(self.rows, m.ncols());
        for i in 0..self.rows {
            for j in 0..m.ncols() {
                let mut acc = ComplexExpr::zero();
                for l in 0..self.cols {
                    acc.add_assign_mul(m[(l, j)], &self[(i, l)]);
                }
                out[(i, j)] = acc.compact();
            }
        }
        out
    }

    /// Block matrix from a grid of equally sized rows/columns of blocks.
    pub fn blocks(grid: &[&[&ExprMatrix]]) -> ExprMatrix {
        let rows: usize = grid.iter().map(|r| r[0].rows).sum();
        let cols: usize = grid[0].iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let mut r0 = 0;
        for row in grid {
            let h = row[0].rows;
            let mut c0 = 0;
            for b in row.iter() {
                assert_eq!(b.rows, h, "ragged block row");
                for i in 0..b.rows {
                    for j in 0..b.cols {
                        out[(r0 + i, c0 + j)] = b[(i, j)].clone();
                    }
                }
                c0 += b.cols;
            }
            assert_eq!(c0, cols, "ragged block column");
            r0 += h;
        }
        out
    }

    pub fn hstack(parts: &[ExprMatrix]) -> ExprMatrix {
        let row: Vec<&ExprMatrix> = parts.iter().collect();
        Self::blocks(&[&row])
    }

    pub fn trace(&self) -> ComplexExpr {
        let mut acc = ComplexExpr::zero();
        for i in 0..self.rows.min(self.cols) {
            acc = acc.add(&self[(i, i)]);
        }
        acc.compact()
    }

    /// `Re tr(g^H self)` for a constant `g`.
    pub fn re_inner(&self, g: &CMat) -> AffineExpr {
        assert_eq!(g.shape(), self.shape());
        let mut acc = AffineExpr::zero();
        for i in 0..self.rows {
            for j in 0..self.cols {
                let z = g[(i, j)];
                acc.add_assign_scaled(&self[(i, j)].re, z.re);
                acc.add_assign_scaled(&self[(i, j)].im, z.im);
            }
        }
        acc.compact()
    }
}

impl Index<(usize, usize)> for ExprMatrix {
    type Output = ComplexExpr;
    fn index(&self, (i, j): (usize, usize)) -> &ComplexExpr {
        assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ExprMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut ComplexExpr {
        assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn compact_merges() {
        let e = AffineExpr { terms: vec![(3, 1.0), (1, 2.0), (3, -1.0), (1, 0.5)], constant: 4.0 }.compact();
        assert_eq!(e.terms, vec![(1, 2.5)]);
        assert_eq!(e.eval(&[0.0, 2.0, 0.0, 9.0]), 9.0);
    }

    #[test]
    fn products_match_dense() {
        // x = [a_re, a_im, b_re, b_im] as a 2x1 complex vector.
        let v = ExprMatrix::blocks(&[
            &[&ExprMatrix { rows: 1, cols: 1, data: vec![ComplexExpr::complex_var(0, 1)] }],
            &[&ExprMatrix { rows: 1, cols: 1, data: vec![ComplexExpr::complex_var(2, 3)] }],
        ]);
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.0, -1.0), c(3.0, 0.5), c(-2.0, 1.0)]);
        let x = [0.3, -1.1, 2.0, 0.7];
        let dense_v = CMat::from_column_slice(2, 1, &[c(0.3, -1.1), c(2.0, 0.7)]);
        assert!((v.left_mul(&m).eval(&x) - &m * &dense_v).norm() < 1e-14);
        assert!((v.adjoint().right_mul(&m).eval(&x) - dense_v.adjoint() * &m).norm() < 1e-14);
        let g = CMat::from_column_slice(2, 1, &[c(0.5, 1.5), c(-1.0, 0.25)]);
        let want = (g.adjoint() * &dense_v)[(0, 0)].re;
        assert!((v.re_inner(&g).eval(&x) - want).abs() < 1e-14);
        assert_eq!(ExprMatrix::constant(&m).eval(&[]), m);
    }
}
