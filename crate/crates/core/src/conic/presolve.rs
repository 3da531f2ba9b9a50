//! Eliminates every equality row by substitution so the interior-point
//! method only sees cone constraints over the remaining free variables.

use std::collections::HashMap;

use super::{AffineExpr, ConicProgram, PsdBlock};

/// Equality system after elimination, with cone data re-indexed onto the
/// free variables.
#[derive(Debug, Clone)]
pub(crate) struct Presolved {
    pub n_original: usize,
    /// Original index of each reduced variable.
    pub free: Vec<usize>,
    /// `(variable, expression)` in elimination order; each expression only
    /// references free or later-eliminated variables.
    pub eliminated: Vec<(usize, AffineExpr)>,
    pub objective: AffineExpr,
    pub nonnegative: Vec<AffineExpr>,
    pub soc: Vec<Vec<AffineExpr>>,
    pub psd: Vec<PsdBlock>,
    /// Largest constant left on a row that lost all its variables.
    pub inconsistency: f64,
}

impl Presolved {
    /// Lifts a reduced solution back to the original variables.
    pub fn recover(&self, reduced: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_original];
        for (r, &orig) in self.free.iter().enumerate() {
            x[orig] = reduced[r];
        }
        for (var, expr) in self.eliminated.iter().rev() {
            x[*var] = expr.eval(&x);
        }
        x
    }
}

fn row_scale(row: &AffineExpr) -> f64 {
    row.terms.iter().map(|t| t.1.abs()).fold(0.0, f64::max)
}

fn substitute(expr: &AffineExpr, var: usize, value: &AffineExpr) -> AffineExpr {
    let coef = expr.coefficient(var);
    if coef == 0.0 {
        return expr.clone();
    }
    let mut out = AffineExpr {
        terms: expr.terms.iter().filter(|t| t.0 != var).copied().collect(),
        constant: expr.constant,
    };
    out.add_assign_scaled(value, coef);
    out.compact()
}

fn drop_tiny(mut row: AffineExpr, scale: f64) -> AffineExpr {
    let cut = 1e-13 * scale.max(1.0);
    row.terms.retain(|t| t.1.abs() > cut);
    row
}

pub(crate) fn presolve(program: &ConicProgram) -> Presolved {
    let mut rows: Vec<AffineExpr> = program.equalities.iter().map(|e| e.clone().compact()).collect();
    let mut eliminated: Vec<(usize, AffineExpr)> = Vec::new();
    let mut inconsistency = 0.0f64;

    loop {
        rows.retain(|r| {
            if r.terms.is_empty() {
                inconsistency = inconsistency.max(r.constant.abs());
                false
            } else {
                true
            }
        });
        if rows.is_empty() {
            break;
        }
        let mut count: HashMap<usize, usize> = HashMap::new();
        for r in &rows {
            for t in &r.terms {
                *count.entry(t.0).or_default() += 1;
            }
        }
        // Pivot on a variable with the fewest other occurrences among the
        // entries of reasonable magnitude in its row; singletons cause no fill.
        let mut best: Option<(usize, usize, usize, f64)> = None;
        for (ri, r) in rows.iter().enumerate() {
            let scale = row_scale(r);
            for &(v, a) in &r.terms {
                if a.abs() < 0.1 * scale {
                    continue;
                }
                let c = count[&v];
                let better = match best {
                    None => true,
                    Some((_, _, bc, ba)) => c < bc || (c == bc && a.abs() / scale > ba),
                };
                if better {
                    best = Some((ri, v, c, a.abs() / scale));
                }
            }
            if matches!(best, Some((_, _, 1, r)) if r >= 1.0) {
                break;
            }
        }
        let (ri, var, _, _) = best.expect("nonempty row has a pivot");
        let row = rows.swap_remove(ri);
        let a = row.coefficient(var);
        let rest = AffineExpr {
            terms: row.terms.iter().filter(|t| t.0 != var).copied().collect(),
            constant: row.constant,
        };
        let value = rest.scaled(-1.0 / a).compact();
        for r in rows.iter_mut() {
            if r.coefficient(var) != 0.0 {
                let scale = row_scale(r);
                *r = drop_tiny(substitute(r, var, &value), scale);
            }
        }
        eliminated.push((var, value));
    }

    // Expand each map onto free variables, latest first.
    let mut expanded: HashMap<usize, AffineExpr> = HashMap::new();
    for (var, expr) in eliminated.iter().rev() {
        let full = expand(expr, &expanded);
        expanded.insert(*var, full);
    }

    let is_eliminated = {
        let mut v = vec![false; program.n_vars];
        for (var, _) in &eliminated {
            v[*var] = true;
        }
        v
    };
    let free: Vec<usize> = (0..program.n_vars).filter(|&i| !is_eliminated[i]).collect();
    let mut reindex = vec![usize::MAX; program.n_vars];
    for (r, &orig) in free.iter().enumerate() {
        reindex[orig] = r;
    }
    let map = |e: &AffineExpr| -> AffineExpr {
        let full = expand(e, &expanded);
        AffineExpr {
            terms: full.terms.iter().map(|&(i, a)| (reindex[i], a)).collect(),
            constant: full.constant,
        }
    };

    Presolved {
        n_original: program.n_vars,
        free,
        eliminated,
        objective: map(&program.objective),
        nonnegative: program.nonnegative.iter().map(&map).collect(),
        soc: program.soc.iter().map(|c| c.iter().map(&map).collect()).collect(),
        psd: program
            .psd
            .iter()
            .map(|b| PsdBlock { size: b.size, upper: b.upper.iter().map(&map).collect() })
            .collect(),
        inconsistency,
    }
}

fn expand(expr: &AffineExpr, expanded: &HashMap<usize, AffineExpr>) -> AffineExpr {
    if expr.terms.iter().all(|t| !expanded.contains_key(&t.0)) {
        return expr.clone();
    }
    let mut out = AffineExpr::constant(expr.constant);
    for &(i, a) in &expr.terms {
        match expanded.get(&i) {
            Some(sub) => out.add_assign_scaled(sub, a),
            None => out.terms.push((i, a)),
        }
    }
    out.compact()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::VarKind;

    #[test]
    fn chained_elimination_recovers_values() {
        // x2 = x0 + x1, x3 = 2 x2, x0 = 1; x1 stays free.
        let mut p = ConicProgram::new();
        let x = p.add_var("x", 4, 1, VarKind::Real);
        let v = |i: usize, c: f64| AffineExpr::var(x.offset + i, c);
        p.add_eq(v(2, 1.0).sub(&v(0, 1.0)).sub(&v(1, 1.0)));
        p.add_eq(v(3, 1.0).sub(&v(2, 2.0)));
        p.add_eq(v(0, 1.0).plus_constant(-1.0));
        p.set_objective(v(3, 1.0));
        let pre = presolve(&p);
        assert_eq!(pre.free.len(), 1);
        assert_eq!(pre.inconsistency, 0.0);
        let x = pre.recover(&[0.5]);
        assert_eq!(x[0], 1.0);
        for e in &p.equalities {
            assert!(e.eval(&x).abs() < 1e-14);
        }
        assert!((pre.objective.eval(&[0.5]) - x[3]).abs() < 1e-14);
    }

    #[test]
    fn redundant_rows_drop_and_conflicts_surface() {
        let mut p = ConicProgram::new();
        let x = p.add_var("x", 2, 1, VarKind::Real);
        let v = |i: usize| AffineExpr::var(x.offset + i, 1.0);
        p.add_eq(v(0).sub(&v(1)));
        p.add_eq(v(1).sub(&v(0)));
        let pre = presolve(&p);
        assert_eq!(pre.free.len(), 1);
        assert_eq!(pre.inconsistency, 0.0);
        p.add_eq(v(0).sub(&v(1)).plus_constant(1.0));
        assert!((presolve(&p).inconsistency - 1.0).abs() < 1e-15);
    }
}
