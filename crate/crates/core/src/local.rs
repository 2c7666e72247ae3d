//! The weighted local term div(a∇u) in flux form, and Hölder coefficient generators.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Exterior, Field, GridDomain, Point};

/// Golden-ratio conjugate, used for deterministic directions.
const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Sampled coefficient a(x) with its Hölder label and bounds.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    pub samples: Field,
    pub alpha: f64,
    pub a_minus: f64,
    pub a_plus: f64,
    pub generator_tag: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefKind {
    Constant,
    SmoothSine,
    WeierstrassAlpha,
}

impl std::str::FromStr for CoefKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(CoefKind::Constant),
            "smooth-sine" => Ok(CoefKind::SmoothSine),
            "weierstrass-alpha" => Ok(CoefKind::WeierstrassAlpha),
            _ => Err(Error::UnknownCatalog(s.to_string())),
        }
    }
}

impl CoefKind {
    pub fn name(self) -> &'static str {
        match self {
            CoefKind::Constant => "constant",
            CoefKind::SmoothSine => "smooth-sine",
            CoefKind::WeierstrassAlpha => "weierstrass-alpha",
        }
    }
}

/// Lacunary sum Σ_k 2^{-kα} cos(2^k ω₀ d_k·x) over the frequencies
/// 2^k ω₀ ≤ `max_freq`, with deterministic directions d_k. All terms peak at
/// the origin, where the oscillation scales exactly like r^α.
/// Returns the sum and the bound Σ_k 2^{-kα} on its modulus.
pub fn weierstrass(alpha: f64, omega0: f64, max_freq: f64, dim: usize) -> (impl Fn(Point) -> f64, f64) {
    let mut terms = Vec::new();
    let mut k = 0;
    while omega0 * 2f64.powi(k) <= max_freq {
        let amp = 2f64.powf(-(k as f64) * alpha);
        let psi = 2.0 * PI * (k as f64 * GOLDEN * GOLDEN).fract();
        let dir = if dim == 1 { [1.0, 0.0] } else { [psi.cos(), psi.sin()] };
        terms.push((amp, omega0 * 2f64.powi(k), dir));
        k += 1;
    }
    let bound = terms.iter().map(|t| t.0).sum();
    let f = move |p: Point| {
        terms
            .iter()
            .map(|&(amp, w, d)| amp * (w * (d[0] * p[0] + d[1] * p[1])).cos())
            .sum()
    };
    (f, bound)
}

/// Coefficient from the catalog `constant`, `smooth-sine`, `weierstrass-alpha`,
/// rescaled into [a_minus, a_plus].
pub fn make_coefficient(kind: &str, alpha: f64, a_minus: f64, a_plus: f64, grid: &Arc<GridDomain>) -> Result<CoefficientField> {
    let kind: CoefKind = kind.parse()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Precondition("coef.alpha must lie in (0,1)".into()));
    }
    if !(a_minus > 0.0 && a_minus <= a_plus && a_plus.is_finite()) {
        return Err(Error::Precondition("coefficient bounds need 0 < a_minus ≤ a_plus".into()));
    }
    let span = a_plus - a_minus;
    let hw = grid.halfwidth();
    let samples = match kind {
        CoefKind::Constant => Field::from_fn(grid, Exterior::ZERO, |_| 0.5 * (a_minus + a_plus)),
        CoefKind::SmoothSine => {
            let k = PI / hw;
            Field::from_fn(grid, Exterior::ZERO, |p| {
                let t = (k * p[0] + 0.3).sin() * (0.5 * k * p[1] + 0.2).cos();
                a_minus + span * 0.5 * (1.0 + t)
            })
        }
        CoefKind::WeierstrassAlpha => {
            // lowest wave spans twice the box; highest stays at or below half the Nyquist frequency
            let (w, bound) = weierstrass(alpha, PI / (2.0 * hw), 0.5 * PI / grid.spacing(), grid.dim());
            Field::from_fn(grid, Exterior::ZERO, |p| a_minus + span * (w(p) + bound) / (2.0 * bound))
        }
    };
    let out = CoefficientField {
        samples,
        alpha,
        a_minus,
        a_plus,
        generator_tag: kind.name().to_string(),
    };
    out.check()?;
    Ok(out)
}

impl CoefficientField {
    pub fn constant(grid: &Arc<GridDomain>, value: f64) -> Result<Self> {
        make_coefficient("constant", 0.5, value, value, grid)
    }

    pub fn is_constant(&self) -> Option<f64> {
        let a0 = *self.samples.values.first()?;
        self.samples.values.iter().all(|&a| a == a0).then_some(a0)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.a_minus > 0.0) {
            return Err(Error::Precondition("a_minus must be positive".into()));
        }
        let tol = 1e-12 * self.a_plus;
        if let Some(v) = self
            .samples
            .values
            .iter()
            .find(|&&v| !(v >= self.a_minus - tol && v <= self.a_plus + tol))
        {
            return Err(Error::Precondition(format!(
                "coefficient value {v} outside [{}, {}]",
                self.a_minus, self.a_plus
            )));
        }
        Ok(())
    }

    /// a at a lattice node, clamped to the nearest box node outside the box.
    fn at(&self, i: i64, j: i64) -> f64 {
        let g = &self.samples.grid;
        let n = g.points_per_axis() as i64;
        let ci = i.clamp(0, n - 1) as usize;
        let cj = if g.dim() == 1 { 0 } else { j.clamp(0, n - 1) as usize };
        self.samples.values[g.index(ci, cj)]
    }

    /// Largest |a(x)-a(y)|/|x-y|^α over lattice pairs at dyadic distances 2^k h.
    pub fn dyadic_holder_ratio(&self) -> f64 {
        let g = &*self.samples.grid;
        let n = g.points_per_axis();
        let mut best: f64 = 0.0;
        let mut step = 1;
        while step < n {
            let dist = step as f64 * g.spacing();
            for k in 0..g.len() {
                let (i, j) = g.split(k);
                for (di, dj) in [(step, 0), (0, step)] {
                    if g.dim() == 1 && dj > 0 {
                        continue;
                    }
                    if i + di < n && j + dj < n {
                        let other = self.samples.values[g.index(i + di, j + dj)];
                        best = best.max((other - self.samples.values[k]).abs() / dist.powf(self.alpha));
                    }
                }
            }
            step *= 2;
        }
        best
    }
}

/// div(a∇u) at one node, flux form with arithmetic face averages. Neighbours
/// outside the box take the exterior rule of `u`.
pub fn apply_div_a_grad(a: &CoefficientField, u: &Field, idx: usize) -> Result<f64> {
    let g = &*u.grid;
    if !a.samples.same_grid(u) {
        return Err(Error::GridMismatch);
    }
    if idx >= g.len() {
        return Err(Error::OutsideGrid(vec![idx]));
    }
    let (i, j) = g.split(idx);
    let (i, j) = (i as i64, j as i64);
    let u0 = u.values[idx];
    let a0 = a.at(i, j);
    let mut acc = 0.0;
    let axes: &[(i64, i64)] = if g.dim() == 1 { &[(1, 0)] } else { &[(1, 0), (0, 1)] };
    for &(di, dj) in axes {
        let up = u.lattice_value(i + di, j + dj);
        let um = u.lattice_value(i - di, j - dj);
        let ap = 0.5 * (a0 + a.at(i + di, j + dj));
        let am = 0.5 * (a0 + a.at(i - di, j - dj));
        acc += ap * (up - u0) - am * (u0 - um);
    }
    let h = g.spacing();
    Ok(acc / (h * h))
}

/// -div(a∇·) on the whole box for fields that vanish outside it, with face
/// coefficients precomputed.
#[derive(Clone, Debug)]
pub struct LocalOperator {
    grid: Arc<GridDomain>,
    /// `faces[axis][k]`: a at the face between node k and its + neighbour along axis, over h².
    faces: Vec<Vec<f64>>,
    /// a at each node over h².
    node: Vec<f64>,
}

impl LocalOperator {
    pub fn new(a: &CoefficientField) -> Self {
        let g = a.samples.grid.clone();
        let h2 = g.spacing() * g.spacing();
        let faces = (0..g.dim())
            .map(|axis| {
                (0..g.len())
                    .map(|k| {
                        let (i, j) = g.split(k);
                        let (i, j) = (i as i64, j as i64);
                        let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
                        0.5 * (a.at(i, j) + a.at(i + di, j + dj)) / h2
                    })
                    .collect()
            })
            .collect();
        let node = a.samples.values.iter().map(|v| v / h2).collect();
        Self { grid: g, faces, node }
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    fn stride(&self, axis: usize) -> usize {
        if axis == 0 {
            1
        } else {
            self.grid.points_per_axis()
        }
    }

    fn has_next(&self, k: usize, axis: usize) -> bool {
        let (i, j) = self.grid.split(k);
        let n = self.grid.points_per_axis();
        if axis == 0 {
            i + 1 < n
        } else {
            j + 1 < n
        }
    }

    fn has_prev(&self, k: usize, axis: usize) -> bool {
        let (i, j) = self.grid.split(k);
        if axis == 0 {
            i > 0
        } else {
            j > 0
        }
    }

    /// Coefficient linking node k to its - neighbour along `axis`.
    fn prev_face(&self, k: usize, axis: usize) -> f64 {
        if self.has_prev(k, axis) {
            self.faces[axis][k - self.stride(axis)]
        } else {
            // a is clamped beyond the box, so the outer face carries a at node k
            self.node[k]
        }
    }

    /// Diagonal entry of -div(a∇·).
    pub fn diagonal(&self, k: usize) -> f64 {
        (0..self.grid.dim())
            .map(|axis| self.faces[axis][k] + self.prev_face(k, axis))
            .sum()
    }

    /// Entry coupling node k with its + neighbour along `axis` (negative).
    pub fn forward_entry(&self, k: usize, axis: usize) -> f64 {
        -self.faces[axis][k]
    }

    /// y = -div(a∇v) for v given on the box and zero outside it.
    pub fn apply(&self, v: &[f64], y: &mut [f64]) {
        for k in 0..self.grid.len() {
            let mut acc = 0.0;
            for axis in 0..self.grid.dim() {
                let st = self.stride(axis);
                let fwd = self.faces[axis][k];
                let back = self.prev_face(k, axis);
                let vp = if self.has_next(k, axis) { v[k + st] } else { 0.0 };
                let vm = if self.has_prev(k, axis) { v[k - st] } else { 0.0 };
                acc += fwd * (v[k] - vp) + back * (v[k] - vm);
            }
            y[k] = acc;
        }
    }
}
