//! Heat kernel of the constant-coefficient operator -L - a Δ via its symbol,
//! kernel bound checks and the heat-convolution fixed-point harness.

use std::sync::Arc;

use log::{debug, warn};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::{frequency, Plan};
use crate::grid::{Exterior, Field, GridDomain, Point, Shape};
use crate::local::CoefficientField;
use crate::measure::{symbol, OperatorSpec};
use crate::solve::MixedSystem;

/// ln(1e14): exp(-A t) at the largest frequency must stay below 1e-14.
const RESOLUTION_EXPONENT: f64 = 32.236_191_301_916_64;

/// A(ξ) = A_L(ξ) + a|ξ|² sampled on the DFT frequencies of an odd periodic grid.
#[derive(Clone, Debug)]
pub struct MixedSymbol {
    pub spec: Option<OperatorSpec>,
    pub a_const: f64,
    pub grid: Arc<GridDomain>,
    /// In FFT order, first axis fastest.
    pub values: Vec<f64>,
}

impl MixedSymbol {
    /// `points` must be odd so that x = 0 is a node.
    pub fn new(spec: Option<&OperatorSpec>, a_const: f64, dim: usize, halfwidth: f64, points: usize) -> Result<Self> {
        if points % 2 == 0 {
            return Err(Error::InvalidGrid("heat grids need an odd number of points".into()));
        }
        if !(a_const >= 0.0 && a_const.is_finite()) {
            return Err(Error::Precondition("a_const must be nonnegative".into()));
        }
        if spec.is_none() && a_const == 0.0 {
            return Err(Error::Precondition("the symbol has no terms".into()));
        }
        if let Some(spec) = spec {
            spec.validate()?;
            if spec.measure.dim() != dim {
                return Err(Error::InvalidSpec("measure dimension differs from grid dimension".into()));
            }
        }
        let grid = Arc::new(GridDomain::full_box(dim, halfwidth, points)?);
        let h = grid.spacing();
        let values = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = grid.split(k);
                let xi = [frequency(i, points, h), if dim == 2 { frequency(j, points, h) } else { 0.0 }];
                eval(spec, a_const, xi)
            })
            .collect();
        Ok(Self {
            spec: spec.cloned(),
            a_const,
            grid,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// 2s of the nonlocal part, or 2 for a purely local symbol.
    pub fn order(&self) -> f64 {
        self.spec.as_ref().map_or(2.0, |s| 2.0 * s.s)
    }

    pub fn at(&self, xi: Point) -> f64 {
        eval(self.spec.as_ref(), self.a_const, xi)
    }

    pub fn frequency_of(&self, k: usize) -> Point {
        let (i, j) = self.grid.split(k);
        let (n, h) = (self.grid.points_per_axis(), self.grid.spacing());
        [frequency(i, n, h), if self.dim() == 2 { frequency(j, n, h) } else { 0.0 }]
    }

    /// Largest exp(-A t) over frequencies on the boundary of the DFT grid.
    pub fn edge_tail(&self, t: f64) -> f64 {
        let n = self.grid.points_per_axis();
        let edge = |i: usize| i == n / 2 || i == n / 2 + 1;
        (0..self.grid.len())
            .filter(|&k| {
                let (i, j) = self.grid.split(k);
                edge(i) || (self.dim() == 2 && edge(j))
            })
            .map(|k| (-self.values[k] * t).exp())
            .fold(0.0, f64::max)
    }
}

fn eval(spec: Option<&OperatorSpec>, a: f64, xi: Point) -> f64 {
    let nonlocal = spec.map_or(0.0, |s| symbol(s, xi));
    nonlocal + a * (xi[0] * xi[0] + xi[1] * xi[1])
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelSlice {
    pub t: f64,
    #[serde(skip)]
    pub values: Field,
    pub mass: f64,
    pub delta: f64,
    pub moment: f64,
    pub max_imaginary: f64,
}

/// H(t,·) = F⁻¹[exp(-A t)] on the symbol's periodic grid, centred at x = 0.
pub fn kernel(sym: &MixedSymbol, t: f64) -> Result<KernelSlice> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Precondition("t must be positive".into()));
    }
    let tail = sym.edge_tail(t);
    if tail > 1e-14 {
        return Err(under_resolved(sym, t, tail));
    }
    let values = transform(sym, |a| (-a * t).exp());
    let (re, max_imaginary) = values;
    if max_imaginary > 1e-12 {
        warn!("heat kernel: imaginary residue {max_imaginary:e} discarded");
    } else {
        debug!("heat kernel: imaginary residue {max_imaginary:e} discarded");
    }
    let field = Field::from_values(&sym.grid, re)?;
    let mass = field.values.iter().sum::<f64>() * sym.grid.cell_volume();
    let delta = 0.25 * sym.order();
    let moment = moment_check(&field, sym.order(), delta)?;
    Ok(KernelSlice {
        t,
        values: field,
        mass,
        delta,
        moment,
        max_imaginary,
    })
}

fn under_resolved(sym: &MixedSymbol, t: f64, tail: f64) -> Error {
    // smallest frequency along the first axis with A t above the threshold
    let mut xi = 1.0;
    while sym.at([xi, 0.0]) * t < RESOLUTION_EXPONENT && xi < 1e12 {
        xi *= 1.05;
    }
    Error::UnderResolved {
        tail,
        needed_halfwidth: sym.grid.halfwidth(),
        needed_spacing: std::f64::consts::PI / xi,
    }
}

/// Real part of F⁻¹[m(A)] scaled to a density, rolled so that index c is x = 0.
fn transform(sym: &MixedSymbol, m: impl Fn(f64) -> f64 + Sync) -> (Vec<f64>, f64) {
    let g = &sym.grid;
    let n = g.points_per_axis();
    let dim = g.dim();
    let plan = Plan::new(dim, n);
    let mut buf: Vec<Complex64> = sym.values.par_iter().map(|&a| Complex64::new(m(a), 0.0)).collect();
    plan.inverse(&mut buf);
    let scale = 1.0 / g.cell_volume();
    let c = n / 2;
    let wrap = |i: usize| (i + n - c) % n;
    let mut out = vec![0.0; g.len()];
    let mut imag: f64 = 0.0;
    for (k, o) in out.iter_mut().enumerate() {
        let (i, j) = g.split(k);
        let src = if dim == 1 { wrap(i) } else { wrap(i) + n * wrap(j) };
        *o = buf[src].re * scale;
        imag = imag.max(buf[src].im.abs() * scale);
    }
    (out, imag)
}

/// ∫(1 + |x|^{2s-δ}) H dx by the rectangle rule; `order` is 2s.
pub fn moment_check(h: &Field, order: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < order) {
        return Err(Error::Precondition("δ must lie in (0, 2s)".into()));
    }
    let g = &h.grid;
    let p = order - delta;
    let sum: f64 = (0..g.len())
        .map(|k| {
            let x = g.coord(k);
            (1.0 + (x[0] * x[0] + x[1] * x[1]).sqrt().powf(p)) * h.values[k]
        })
        .sum();
    Ok(sum * g.cell_volume())
}

/// max over grid edges of |H(x) - H(y)|/h.
pub fn lipschitz_seminorm(h: &Field) -> f64 {
    let g = &h.grid;
    let n = g.points_per_axis();
    let mut best: f64 = 0.0;
    for k in 0..g.len() {
        let (i, j) = g.split(k);
        if i + 1 < n {
            best = best.max((h.values[k + 1] - h.values[k]).abs());
        }
        if g.dim() == 2 && j + 1 < n {
            best = best.max((h.values[k + n] - h.values[k]).abs());
        }
    }
    best / g.spacing()
}

/// Sandwich constants of the mixed symbol on its frequency grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SymbolBounds {
    /// min over ξ ≠ 0 of A/min(|ξ|^{2s}, |ξ|²)
    pub lower: f64,
    /// max over ξ ≠ 0 of A/max(|ξ|^{2s}, |ξ|²)
    pub upper: f64,
    /// bounds of the local part A_d/|ξ|²
    pub local_lower: f64,
    pub local_upper: f64,
}

/// Sampled on the DFT frequencies plus the unit sphere, where both ratios
/// reduce to A(θ), so that lower ≤ upper whenever the sandwich is consistent.
pub fn symbol_bounds(sym: &MixedSymbol) -> SymbolBounds {
    let order = sym.order();
    let (mut lower, mut upper) = (f64::INFINITY, 0.0f64);
    let mut visit = |xi: Point, a: f64| {
        let r2 = xi[0] * xi[0] + xi[1] * xi[1];
        if r2 == 0.0 {
            return;
        }
        let p = r2.powf(order / 2.0);
        lower = lower.min(a / p.min(r2));
        upper = upper.max(a / p.max(r2));
    };
    for k in 1..sym.values.len() {
        visit(sym.frequency_of(k), sym.values[k]);
    }
    let circle = if sym.dim() == 1 { 2 } else { 360 };
    for k in 0..circle {
        let t = 2.0 * std::f64::consts::PI * k as f64 / circle as f64;
        let xi = if sym.dim() == 1 { [t.cos().signum(), 0.0] } else { [t.cos(), t.sin()] };
        visit(xi, sym.at(xi));
    }
    SymbolBounds {
        lower,
        upper,
        local_lower: sym.a_const,
        local_upper: sym.a_const,
    }
}

/// (H(t)∗H(t))(x) by the discrete periodic convolution.
pub fn self_convolution(k: &KernelSlice) -> Field {
    let g = &k.values.grid;
    let n = g.points_per_axis();
    let dim = g.dim();
    let plan = Plan::new(dim, n);
    let c = n / 2;
    let shifted = |i: usize, j: usize| if dim == 1 { (i + n - c) % n } else { (i + n - c) % n + n * ((j + n - c) % n) };
    // place x = 0 at index 0
    let mut buf = vec![Complex64::new(0.0, 0.0); g.len()];
    for (k2, v) in k.values.values.iter().enumerate() {
        let (i, j) = g.split(k2);
        buf[shifted(i, j)].re = *v;
    }
    plan.forward(&mut buf);
    for z in buf.iter_mut() {
        *z = *z * *z * g.cell_volume();
    }
    plan.inverse(&mut buf);
    let values = (0..g.len())
        .map(|k2| {
            let (i, j) = g.split(k2);
            buf[shifted(i, j)].re
        })
        .collect();
    Field {
        grid: g.clone(),
        values,
        exterior: Exterior::ZERO,
    }
}

/// ‖v - H(t)∗v‖∞ over the inner quarter box of `v`'s grid. The kernel is the
/// periodised kernel on the symbol's window, symmetrised, and the convolution
/// is a direct lattice sum, so the window must fit inside v's box around the
/// inner quarter.
pub fn smoothing_invariance(sym: &MixedSymbol, v: &Field, t: f64) -> Result<SmoothingReport> {
    let kg = &sym.grid;
    let vg = &v.grid;
    if kg.dim() != vg.dim() || (kg.spacing() - vg.spacing()).abs() > 1e-12 * vg.spacing() {
        return Err(Error::GridMismatch);
    }
    let inner = vg.halfwidth() / 4.0;
    if kg.halfwidth() + inner > vg.halfwidth() * (1.0 + 1e-12) {
        return Err(Error::Precondition("kernel window does not fit inside the field's box".into()));
    }
    let k = kernel(sym, t)?;
    let kn = kg.points_per_axis();
    let kc = (kn / 2) as i64;
    let dim = vg.dim();
    // symmetrise: K(o) = (K(o) + K(-o))/2
    let kv: Vec<f64> = (0..kg.len())
        .map(|idx| {
            let (i, j) = kg.split(idx);
            let mirror = if dim == 1 { kn - 1 - i } else { kg.index(kn - 1 - i, kn - 1 - j) };
            0.5 * (k.values.values[idx] + k.values.values[mirror]) * kg.cell_volume()
        })
        .collect();
    let h = vg.spacing();
    let (mut defect, mut lo, mut hi, mut slo, mut shi) = (0.0f64, f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    let points: Vec<usize> = (0..vg.len())
        .filter(|&idx| {
            let x = vg.coord(idx);
            x[0].abs() <= inner + 1e-12 * h && x[1].abs() <= inner + 1e-12 * h
        })
        .collect();
    let smoothed: Vec<f64> = points
        .par_iter()
        .map(|&idx| {
            let (i, j) = vg.split(idx);
            let mut acc = 0.0;
            for (kidx, w) in kv.iter().enumerate() {
                let (a, b) = kg.split(kidx);
                let oi = a as i64 - kc;
                let oj = if dim == 1 { 0 } else { b as i64 - kc };
                acc += w * v.lattice_value(i as i64 + oi, j as i64 + oj);
            }
            acc
        })
        .collect();
    for (&idx, &s) in points.iter().zip(&smoothed) {
        let u = v.values[idx];
        defect = defect.max((u - s).abs());
        lo = lo.min(u);
        hi = hi.max(u);
        slo = slo.min(s);
        shi = shi.max(s);
    }
    Ok(SmoothingReport {
        defect,
        osc: hi - lo,
        smoothed_osc: shi - slo,
        points: points.len(),
        mass: k.mass,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothingReport {
    /// ‖v - H∗v‖∞ on the inner quarter box
    pub defect: f64,
    /// oscillation of v on the inner quarter box
    pub osc: f64,
    pub smoothed_osc: f64,
    pub points: usize,
    pub mass: f64,
}

/// Boundary profile used for the harmonic fields: G(y) = cos²(πy/2) + sin(πy)/4,
/// which vanishes at y = ±1.
pub fn harmonic_profile(y: f64) -> f64 {
    let pi = std::f64::consts::PI;
    (0.5 * pi * y).cos().powi(2) + 0.25 * (pi * y).sin()
}

/// Discrete solution of -Lv - aΔv = 0 in Ω = (-H/2, H/2)^n with v = G(x/H)
/// (product in 2D) on the rest of the box [-H, H]^n and zero beyond it.
pub fn harmonic_field(spec: Option<&OperatorSpec>, a_const: f64, dim: usize, halfwidth: f64, points: usize) -> Result<Field> {
    let half = 0.5 * halfwidth;
    let shape = if dim == 1 {
        Shape::Interval { lo: -half, hi: half }
    } else {
        Shape::Rect { lo: [-half; 2], hi: [half; 2] }
    };
    let grid = Arc::new(GridDomain::new(dim, halfwidth, points, shape)?);
    let coef = if a_const > 0.0 {
        Some(CoefficientField::constant(&grid, a_const)?)
    } else {
        None
    };
    let sys = MixedSystem::new(spec, coef.as_ref(), &grid, 0.0)?;
    let data = Field::from_fn(&grid, Exterior::ZERO, |x| {
        let gx = harmonic_profile(x[0] / halfwidth);
        if dim == 1 {
            gx
        } else {
            gx * harmonic_profile(x[1] / halfwidth)
        }
    });
    Ok(sys.solve_with_data(&Field::zeros(&grid), &data)?.0)
}

/// Closed-form 1D Gaussian kernel (4π a t)^{-1/2} exp(-x²/(4 a t)).
pub fn gaussian_1d(a: f64, t: f64, x: f64) -> f64 {
    (-(x * x) / (4.0 * a * t)).exp() / (4.0 * std::f64::consts::PI * a * t).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::SpectralMeasure;

    #[test]
    fn even_grids_are_rejected() {
        assert!(MixedSymbol::new(None, 1.0, 1, 10.0, 64).is_err());
    }

    #[test]
    fn coarse_grid_reports_resolution() {
        let spec = OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(1));
        let sym = MixedSymbol::new(Some(&spec), 0.0, 1, 10.0, 21).unwrap();
        match kernel(&sym, 0.01) {
            Err(Error::UnderResolved { needed_spacing, .. }) => assert!(needed_spacing < sym.grid.spacing()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn symbol_vanishes_at_zero_and_is_even() {
        let spec = OperatorSpec::new(0.4, SpectralMeasure::density_catalog(2, "cos2", 1.0, None, 40).unwrap());
        let sym = MixedSymbol::new(Some(&spec), 1.0, 2, 4.0, 33).unwrap();
        assert_eq!(sym.values[0], 0.0);
        assert!((sym.at([1.3, -0.4]) - sym.at([-1.3, 0.4])).abs() < 1e-12);
        assert!(sym.values[1..].iter().all(|&a| a > 0.0));
    }
}
