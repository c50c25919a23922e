//! Fast-diagonalization solver for `(W + c A) x = W g`, where `W` is the
//! diagonal quadrature mass matrix and `A` the stiffness of the kinetic form.
//! Both are separable over the reduced axes, so the per-axis generalized
//! eigenproblems `A_i v = λ W_i v` diagonalize the whole operator. A single
//! axis is tridiagonal and solved directly.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::grid::ReducedGrid;

#[derive(Debug, Clone)]
struct AxisBasis {
    /// First unknown along the axis.
    start: usize,
    /// `W_i^{-1/2} Q`, W-orthonormal eigenvectors as columns.
    v: DMatrix<f64>,
    vt: DMatrix<f64>,
    lambda: Vec<f64>,
    w: Vec<f64>,
}

impl AxisBasis {
    fn new(axis: &crate::grid::Axis) -> Self {
        let start = if axis.has_ghost() { 1 } else { 0 };
        let end = axis.n - 1;
        let m = end - start;
        let w: Vec<f64> = (start..end).map(|i| axis.weights[i]).collect();
        let e = &axis.stiffness;
        let mut s = DMatrix::<f64>::zeros(m, m);
        for a in 0..m {
            let i = a + start;
            let left = if i > 0 { e[i - 1] } else { 0.0 };
            s[(a, a)] = (left + e[i]) / w[a];
            if a + 1 < m {
                let off = -e[i] / (w[a] * w[a + 1]).sqrt();
                s[(a, a + 1)] = off;
                s[(a + 1, a)] = off;
            }
        }
        let eig = SymmetricEigen::new(s);
        let mut v = eig.eigenvectors;
        for a in 0..m {
            let scale = 1.0 / w[a].sqrt();
            for col in 0..m {
                v[(a, col)] *= scale;
            }
        }
        let vt = v.transpose();
        Self {
            start,
            v,
            vt,
            lambda: eig.eigenvalues.iter().copied().collect(),
            w,
        }
    }

    fn len(&self) -> usize {
        self.w.len()
    }
}

/// `W + cA` on the unknowns of one axis.
#[derive(Debug, Clone)]
struct Line {
    start: usize,
    w: Vec<f64>,
    diag: Vec<f64>,
    /// Coupling between unknowns `a` and `a + 1`.
    off: Vec<f64>,
}

impl Line {
    fn new(axis: &crate::grid::Axis, c: f64) -> Self {
        let start = if axis.has_ghost() { 1 } else { 0 };
        let e = &axis.stiffness;
        let w: Vec<f64> = (start..axis.n - 1).map(|i| axis.weights[i]).collect();
        let diag = (start..axis.n - 1)
            .zip(&w)
            .map(|(i, w)| w + c * (if i > 0 { e[i - 1] } else { 0.0 } + e[i]))
            .collect();
        let off = (start..axis.n - 2).map(|i| -c * e[i]).collect();
        Self { start, w, diag, off }
    }

    /// Thomas algorithm; the matrix is symmetric positive definite.
    fn solve(&self, g: &[f64]) -> Vec<f64> {
        let m = self.w.len();
        let mut cp = vec![0.0; m];
        let mut x: Vec<f64> = (0..m).map(|a| self.w[a] * g[a + self.start]).collect();
        for a in 0..m {
            let lower = if a > 0 { self.off[a - 1] } else { 0.0 };
            let denom = self.diag[a] - lower * if a > 0 { cp[a - 1] } else { 0.0 };
            if a + 1 < m {
                cp[a] = self.off[a] / denom;
            }
            x[a] = (x[a] - lower * if a > 0 { x[a - 1] } else { 0.0 }) / denom;
        }
        for a in (0..m.saturating_sub(1)).rev() {
            x[a] -= cp[a] * x[a + 1];
        }
        let mut out = vec![0.0; g.len()];
        out[self.start..self.start + m].copy_from_slice(&x);
        out
    }
}

/// Inverse of the Sobolev-type metric `W + c A` applied to `W g`.
#[derive(Debug, Clone)]
pub struct SobolevPreconditioner {
    bases: Vec<AxisBasis>,
    line: Option<Line>,
    full_shape: [usize; 3],
    c: f64,
}

impl SobolevPreconditioner {
    pub fn new(grid: &ReducedGrid, c: f64) -> Self {
        if grid.dims() == 1 {
            return Self {
                bases: Vec::new(),
                line: Some(Line::new(&grid.axes[0], c)),
                full_shape: grid.shape3(),
                c,
            };
        }
        let mut bases: Vec<AxisBasis> = Vec::with_capacity(grid.dims());
        for (k, axis) in grid.axes.iter().enumerate() {
            let reuse = (0..k).find(|&j| grid.axes[j] == *axis);
            bases.push(match reuse {
                Some(j) => bases[j].clone(),
                None => AxisBasis::new(axis),
            });
        }
        Self {
            bases,
            line: None,
            full_shape: grid.shape3(),
            c,
        }
    }

    /// Returns `x = (W + cA)^{-1} W g` on unknowns and zero elsewhere.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        if let Some(line) = &self.line {
            return line.solve(g);
        }
        let d = self.bases.len();
        let mut dims = [1usize; 3];
        for (k, b) in self.bases.iter().enumerate() {
            dims[k] = b.len();
        }
        let fs = self.full_shape;
        let off = |k: usize| self.bases.get(k).map_or(0, |b| b.start);
        let w_of = |k: usize, i: usize| self.bases.get(k).map_or(1.0, |b| b.w[i]);
        // Gather W g on the unknown subtensor.
        let mut t = vec![0.0; dims.iter().product()];
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let src = ((i + off(0)) * fs[1] + j + off(1)) * fs[2] + k + off(2);
                    t[(i * dims[1] + j) * dims[2] + k] = g[src] * w_of(0, i) * w_of(1, j) * w_of(2, k);
                }
            }
        }
        for k in 0..d {
            t = mode_product(&t, dims, k, &self.bases[k].vt);
        }
        let lam = |k: usize, i: usize| self.bases.get(k).map_or(0.0, |b| b.lambda[i]);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let s = 1.0 + self.c * (lam(0, i) + lam(1, j) + lam(2, k));
                    t[(i * dims[1] + j) * dims[2] + k] /= s;
                }
            }
        }
        for k in 0..d {
            t = mode_product(&t, dims, k, &self.bases[k].v);
        }
        let mut out = vec![0.0; g.len()];
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let dst = ((i + off(0)) * fs[1] + j + off(1)) * fs[2] + k + off(2);
                    out[dst] = t[(i * dims[1] + j) * dims[2] + k];
                }
            }
        }
        out
    }
}

/// `T' = P ×_axis T` for a row-major tensor with the given (padded) dims.
fn mode_product(t: &[f64], dims: [usize; 3], axis: usize, p: &DMatrix<f64>) -> Vec<f64> {
    let m = dims[axis];
    let before: usize = dims[..axis].iter().product();
    let after: usize = dims[axis + 1..].iter().product();
    let mut out = vec![0.0; t.len()];
    // Each slice of shape (m, after) in row-major order is the column-major
    // matrix S^T of shape (after, m); then (P S)^T = S^T P^T.
    let pt = p.transpose();
    for b in 0..before {
        let chunk = &t[b * m * after..(b + 1) * m * after];
        let st = DMatrix::from_column_slice(after, m, chunk);
        let r = st * &pt;
        out[b * m * after..(b + 1) * m * after].copy_from_slice(r.as_slice());
    }
    out
}
