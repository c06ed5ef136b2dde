//! Tridiagonal matrices bordered by a few dense rows and columns.
//!
//! Layout of an `(N + m) × (N + m)` matrix:
//!
//! ```text
//! [ T  B ]    T: N×N tridiagonal, B: N×m dense columns
//! [ C  D ]    C: m×N dense rows,  D: m×m corner
//! ```
//!
//! The factorization eliminates the tridiagonal columns with partial pivoting
//! restricted to adjacent rows, carrying the border rows along, and finishes
//! the trailing `(1+m) × (1+m)` block with a fully pivoted dense LU. For an
//! irreducible `T` every tridiagonal pivot is bounded below by the size of
//! the sub-diagonal, so near-singularity of the whole matrix is concentrated
//! in the dense block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BorderedMatrix {
    n: usize,
    m: usize,
    /// `sub[i]` is entry `(i, i-1)`; `sub[0]` is unused.
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    /// `sup[i]` is entry `(i, i+1)`; `sup[N-1]` is unused.
    pub sup: Vec<f64>,
    /// Column-major border columns: `cols[c * N + i]` is entry `(i, N + c)`.
    pub cols: Vec<f64>,
    /// Row-major border rows: `rows[r * N + j]` is entry `(N + r, j)`.
    pub rows: Vec<f64>,
    /// Row-major corner: `corner[r * m + c]` is entry `(N + r, N + c)`.
    pub corner: Vec<f64>,
}

impl BorderedMatrix {
    pub fn zeros(n: usize, m: usize) -> Self {
        assert!(n >= 1, "tridiagonal block must be non-empty");
        Self {
            n,
            m,
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
            cols: vec![0.0; n * m],
            rows: vec![0.0; n * m],
            corner: vec![0.0; m * m],
        }
    }

    pub fn tri_dim(&self) -> usize {
        self.n
    }

    pub fn border_dim(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn col_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.cols[c * self.n..(c + 1) * self.n]
    }

    pub fn col(&self, c: usize) -> &[f64] {
        &self.cols[c * self.n..(c + 1) * self.n]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.rows[r * self.n..(r + 1) * self.n]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.n..(r + 1) * self.n]
    }

    pub fn set_corner(&mut self, r: usize, c: usize, value: f64) {
        self.corner[r * self.m + c] = value;
    }

    pub fn corner_at(&self, r: usize, c: usize) -> f64 {
        self.corner[r * self.m + c]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let (n, m) = (self.n, self.m);
        assert_eq!(x.len(), n + m);
        let mut y = vec![0.0; n + m];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.sub[i] * x[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * x[i + 1];
            }
            for c in 0..m {
                s += self.cols[c * n + i] * x[n + c];
            }
            y[i] = s;
        }
        for r in 0..m {
            let mut s: f64 = self.row(r).iter().zip(&x[..n]).map(|(a, b)| a * b).sum();
            for c in 0..m {
                s += self.corner_at(r, c) * x[n + c];
            }
            y[n + r] = s;
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, m) = (self.n, self.m);
        let mut a = DMatrix::zeros(n + m, n + m);
        for i in 0..n {
            a[(i, i)] = self.diag[i];
            if i > 0 {
                a[(i, i - 1)] = self.sub[i];
            }
            if i + 1 < n {
                a[(i, i + 1)] = self.sup[i];
            }
            for c in 0..m {
                a[(i, n + c)] = self.cols[c * n + i];
                a[(n + c, i)] = self.rows[c * n + i];
            }
        }
        for r in 0..m {
            for c in 0..m {
                a[(n + r, n + c)] = self.corner_at(r, c);
            }
        }
        a
    }

    pub fn factor(&self) -> Result<BorderedLu> {
        BorderedLu::new(self)
    }

    /// Factors and solves, with two steps of iterative refinement.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self.factor()?;
        lu.solve_refined(self, rhs, 2)
    }
}

/// Factorization produced by [`BorderedMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BorderedLu {
    n: usize,
    m: usize,
    /// Pivot rows: `u[j] = (u0, u1, u2)` at columns `j, j+1, j+2`.
    u: Vec<[f64; 3]>,
    /// Border part of each pivot row, `m` entries per step.
    ub: Vec<f64>,
    /// Multiplier applied to the tridiagonal row left behind.
    l: Vec<f64>,
    /// Multipliers applied to the border rows, `m` per step.
    lb: Vec<f64>,
    swapped: Vec<bool>,
    tail: nalgebra::linalg::FullPivLU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    tail_det: f64,
    log_abs_u: f64,
    sign_u: f64,
}

impl BorderedLu {
    fn new(a: &BorderedMatrix) -> Result<Self> {
        let (n, m) = (a.n, a.m);
        let steps = n - 1;
        let mut u = Vec::with_capacity(steps);
        let mut ub = Vec::with_capacity(steps * m);
        let mut l = Vec::with_capacity(steps);
        let mut lb = Vec::with_capacity(steps * m);
        let mut swapped = Vec::with_capacity(steps);

        // Working copies of the border rows (dense over tridiagonal columns) and corner.
        let mut brow = a.rows.clone();
        let mut bcorner = a.corner.clone();

        // Current row j: entries at columns j, j+1 and its border part.
        let mut cur0 = a.diag[0];
        let mut cur1 = if n > 1 { a.sup[0] } else { 0.0 };
        let mut curb: Vec<f64> = (0..m).map(|c| a.cols[c * n]).collect();

        let mut log_abs_u = 0.0;
        let mut sign_u = 1.0;

        for j in 0..steps {
            let nx0 = a.sub[j + 1];
            let nx1 = a.diag[j + 1];
            let nx2 = if j + 2 < n { a.sup[j + 1] } else { 0.0 };
            let nxb: Vec<f64> = (0..m).map(|c| a.cols[c * n + j + 1]).collect();

            let swap = nx0.abs() > cur0.abs();
            let (piv, pivb, oth, othb) = if swap {
                ([nx0, nx1, nx2], nxb, [cur0, cur1, 0.0], curb)
            } else {
                ([cur0, cur1, 0.0], curb, [nx0, nx1, nx2], nxb)
            };
            if piv[0] == 0.0 {
                return Err(Error::SingularJacobian);
            }
            let mult = oth[0] / piv[0];
            cur0 = oth[1] - mult * piv[1];
            cur1 = oth[2] - mult * piv[2];
            curb = othb.iter().zip(&pivb).map(|(o, p)| o - mult * p).collect();

            for r in 0..m {
                let row = &mut brow[r * n..(r + 1) * n];
                let mr = row[j] / piv[0];
                row[j] = 0.0;
                row[j + 1] -= mr * piv[1];
                if j + 2 < n {
                    row[j + 2] -= mr * piv[2];
                }
                for c in 0..m {
                    bcorner[r * m + c] -= mr * pivb[c];
                }
                lb.push(mr);
            }

            log_abs_u += piv[0].abs().ln();
            if piv[0] < 0.0 {
                sign_u = -sign_u;
            }
            if swap {
                sign_u = -sign_u;
            }
            u.push(piv);
            ub.extend_from_slice(&pivb);
            l.push(mult);
            swapped.push(swap);
        }

        let mut tail = DMatrix::zeros(1 + m, 1 + m);
        tail[(0, 0)] = cur0;
        for c in 0..m {
            tail[(0, 1 + c)] = curb[c];
            tail[(1 + c, 0)] = brow[c * n + n - 1];
            for d in 0..m {
                tail[(1 + c, 1 + d)] = bcorner[c * m + d];
            }
        }
        let tail = tail.full_piv_lu();
        let tail_det = tail.determinant();
        if !tail_det.is_finite() {
            return Err(Error::SingularJacobian);
        }
        Ok(Self {
            n,
            m,
            u,
            ub,
            l,
            lb,
            swapped,
            tail,
            tail_det,
            log_abs_u,
            sign_u,
        })
    }

    /// Sign and natural log of `|det A|`. The sign is `0` for an exactly singular matrix.
    pub fn log_det(&self) -> (f64, f64) {
        if self.tail_det == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        (
            self.sign_u * self.tail_det.signum(),
            self.log_abs_u + self.tail_det.abs().ln(),
        )
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let (n, m) = (self.n, self.m);
        if rhs.len() != n + m {
            return Err(Error::DimensionMismatch {
                expected: n + m,
                got: rhs.len(),
            });
        }
        let mut y = vec![0.0; n - 1];
        let mut border: Vec<f64> = rhs[n..].to_vec();
        let mut cur = rhs[0];
        for j in 0..n - 1 {
            let next = rhs[j + 1];
            let (piv, oth) = if self.swapped[j] {
                (next, cur)
            } else {
                (cur, next)
            };
            y[j] = piv;
            cur = oth - self.l[j] * piv;
            for r in 0..m {
                border[r] -= self.lb[j * m + r] * piv;
            }
        }
        let mut t = DVector::zeros(1 + m);
        t[0] = cur;
        for r in 0..m {
            t[1 + r] = border[r];
        }
        let xt = self.tail.solve(&t).ok_or(Error::SingularJacobian)?;
        let mut x = vec![0.0; n + m];
        x[n - 1] = xt[0];
        for c in 0..m {
            x[n + c] = xt[1 + c];
        }
        for j in (0..n - 1).rev() {
            let [u0, u1, u2] = self.u[j];
            let mut s = y[j] - u1 * x[j + 1];
            if j + 2 < n {
                s -= u2 * x[j + 2];
            }
            for c in 0..m {
                s -= self.ub[j * m + c] * x[n + c];
            }
            x[j] = s / u0;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian);
        }
        Ok(x)
    }

    /// Solve followed by `steps` rounds of iterative refinement against `a`.
    pub fn solve_refined(&self, a: &BorderedMatrix, rhs: &[f64], steps: usize) -> Result<Vec<f64>> {
        let mut x = self.solve(rhs)?;
        for _ in 0..steps {
            let ax = a.matvec(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
            let dx = self.solve(&r)?;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
        }
        Ok(x)
    }
}
