//! Thin helpers over rustfft for 1D/2D transforms and Toeplitz convolution.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward and inverse plans for an `m`×`m` (2D) or `m` (1D) array.
pub struct Plan {
    dim: usize,
    m: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Plan {
    pub fn new(dim: usize, m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dim,
            m,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
        }
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
    }

    /// Inverse transform including the 1/len normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
        let scale = 1.0 / self.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        assert_eq!(data.len(), self.len());
        fft.process(data);
        if self.dim == 2 {
            // rows are done (the batch call transforms every contiguous chunk); now columns
            let mut col = vec![Complex64::new(0.0, 0.0); m];
            for j in 0..m {
                for i in 0..m {
                    col[i] = data[i * m + j];
                }
                fft.process(&mut col);
                for i in 0..m {
                    data[i * m + j] = col[i];
                }
            }
        }
    }
}

/// Angular frequency of DFT index `k` on a grid of `m` points with spacing `h`.
pub fn frequency(k: usize, m: usize, h: f64) -> f64 {
    let signed = if k <= m / 2 { k as f64 } else { k as f64 - m as f64 };
    2.0 * std::f64::consts::PI * signed / (m as f64 * h)
}

/// Smallest size ≥ n of the form 2^a 3^b 5^c.
pub fn fast_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// y_x = Σ_o w_o v_{x+o} for `x` in an n^dim box, with v = 0 outside the box.
///
/// The kernel lives on offsets |o_k| ≤ n-1 and must be given densely, indexed
/// by `o + (n-1)` per axis with the first axis fastest.
pub struct ToeplitzConv {
    dim: usize,
    n: usize,
    plan: Plan,
    kernel_hat: Vec<Complex64>,
}

impl ToeplitzConv {
    pub fn new(dim: usize, n: usize, kernel: &[f64]) -> Self {
        let span = 2 * n - 1;
        assert_eq!(kernel.len(), span.pow(dim as u32));
        let m = fast_len(span);
        let plan = Plan::new(dim, m);
        let mut buf = vec![Complex64::new(0.0, 0.0); plan.len()];
        let wrap = |o: i64| -> usize { o.rem_euclid(m as i64) as usize };
        // correlation y_x = Σ_o w_o v_{x+o} is convolution with w_{-o}
        if dim == 1 {
            for (k, &w) in kernel.iter().enumerate() {
                let o = k as i64 - (n as i64 - 1);
                buf[wrap(-o)].re = w;
            }
        } else {
            for b in 0..span {
                for a in 0..span {
                    let oi = a as i64 - (n as i64 - 1);
                    let oj = b as i64 - (n as i64 - 1);
                    buf[wrap(-oi) + m * wrap(-oj)].re = kernel[a + span * b];
                }
            }
        }
        plan.forward(&mut buf);
        Self {
            dim,
            n,
            plan,
            kernel_hat: buf,
        }
    }

    pub fn apply(&self, v: &[f64], y: &mut [f64]) {
        let (n, m) = (self.n, self.plan.side());
        let mut buf = vec![Complex64::new(0.0, 0.0); self.plan.len()];
        if self.dim == 1 {
            for i in 0..n {
                buf[i].re = v[i];
            }
        } else {
            for j in 0..n {
                for i in 0..n {
                    buf[i + m * j].re = v[i + n * j];
                }
            }
        }
        self.plan.forward(&mut buf);
        for (z, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *z *= k;
        }
        self.plan.inverse(&mut buf);
        if self.dim == 1 {
            for i in 0..n {
                y[i] = buf[i].re;
            }
        } else {
            for j in 0..n {
                for i in 0..n {
                    y[i + n * j] = buf[i + m * j].re;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_len_picks_smooth_sizes() {
        assert_eq!(fast_len(255), 256);
        assert_eq!(fast_len(7), 8);
        assert_eq!(fast_len(11), 12);
    }

    #[test]
    fn toeplitz_matches_direct_sum() {
        for dim in [1usize, 2] {
            let n: usize = 5;
            let span = 2 * n - 1;
            let kernel: Vec<f64> = (0..span.pow(dim as u32)).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
            let v: Vec<f64> = (0..n.pow(dim as u32)).map(|k| (k as f64 * 0.37).sin()).collect();
            let mut y = vec![0.0; v.len()];
            ToeplitzConv::new(dim, n, &kernel).apply(&v, &mut y);
            let ni = n as i64;
            for x in 0..v.len() {
                let (xi, xj) = ((x % n) as i64, (x / n) as i64);
                let mut acc = 0.0;
                for (k, &w) in kernel.iter().enumerate() {
                    let oi = (k % span) as i64 - (ni - 1);
                    let oj = if dim == 1 { 0 } else { (k / span) as i64 - (ni - 1) };
                    let (pi, pj) = (xi + oi, xj + oj);
                    if (0..ni).contains(&pi) && (0..ni).contains(&pj) && (dim == 2 || pj == 0) {
                        acc += w * v[(pi + ni * pj) as usize];
                    }
                }
                assert!((acc - y[x]).abs() < 1e-10, "dim {dim} x {x}: {acc} vs {}", y[x]);
            }
        }
    }
}
