//! Preconditioned conjugate gradients and a tridiagonal solver.

use crate::error::{Error, Result};

/// Symmetric positive definite operator acting on vectors of length `size()`.
pub trait LinearOperator {
    fn size(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct Jacobi {
    pub inv_diag: Vec<f64>,
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

/// Symmetric tridiagonal matrix, used as a preconditioner along 1D chains.
#[derive(Clone, Debug)]
pub struct Tridiagonal {
    /// sub/super diagonal; `off[k]` couples unknowns k and k+1
    pub off: Vec<f64>,
    pub diag: Vec<f64>,
}

impl Tridiagonal {
    /// Thomas algorithm. The matrix is assumed diagonally dominant.
    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) {
        let n = self.diag.len();
        if n == 0 {
            return;
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = if n > 1 { self.off[0] / self.diag[0] } else { 0.0 };
        d[0] = rhs[0] / self.diag[0];
        for k in 1..n {
            let m = self.diag[k] - self.off[k - 1] * c[k - 1];
            c[k] = if k + 1 < n { self.off[k] / m } else { 0.0 };
            d[k] = (rhs[k] - self.off[k - 1] * d[k - 1]) / m;
        }
        out[n - 1] = d[n - 1];
        for k in (0..n - 1).rev() {
            out[k] = d[k] - c[k] * out[k + 1];
        }
    }
}

impl Preconditioner for Tridiagonal {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.solve(r, z);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    /// Stop once the sup norm of the true residual is below this.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual_sup: f64,
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG with restarts from the true residual whenever the
/// recursive one claims convergence but the true one disagrees.
pub fn pcg(
    op: &dyn LinearOperator,
    pre: &dyn Preconditioner,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: CgOptions,
) -> Result<CgOutcome> {
    let n = op.size();
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut iterations = 0;
    let true_residual = |x: &[f64], r: &mut [f64], ap: &mut [f64]| {
        op.apply(x, ap);
        for k in 0..n {
            r[k] = b[k] - ap[k];
        }
        sup(r)
    };
    let mut res = true_residual(&x, &mut r, &mut ap);
    let mut restarts = 0;
    while res > opts.tol {
        pre.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        loop {
            if iterations >= opts.max_iter {
                return Err(Error::Stagnation {
                    iterations,
                    residual: true_residual(&x, &mut r, &mut ap),
                });
            }
            op.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            iterations += 1;
            if sup(&r) <= 0.5 * opts.tol {
                break;
            }
            pre.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        let new_res = true_residual(&x, &mut r, &mut ap);
        restarts += 1;
        if new_res > opts.tol && (restarts > 20 || new_res >= res && restarts > 3) {
            return Err(Error::Stagnation {
                iterations,
                residual: new_res,
            });
        }
        res = new_res;
    }
    Ok(CgOutcome {
        x,
        iterations,
        residual_sup: res,
    })
}
