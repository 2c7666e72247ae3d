//! The discrete stable operator
//!
//!   Lu(x) = ∫_S ∫_ℝ (u(x+θr) + u(x-θr) - 2u(x)) |r|^{-1-2s} dr dμ(θ)
//!
//! by radial quadrature along each ray of the measure. The radial integral is
//! split into three zones:
//!
//! * `[0, c)`: u is replaced by its second-order Taylor expansion, so the zone
//!   contributes `2 c^{2-2s}/(2-2s)` times the directional second derivative,
//!   approximated by `δ(c)/c²`.
//! * `[c, R]`: writing `δ(r) = r² G(r)`, G is interpolated linearly between the
//!   radial nodes and integrated exactly against `r^{1-2s}`. Axis rays use the
//!   lattice nodes `r = kh`; other rays use geometric nodes.
//! * `(R, ∞)`: once `R` is at least the box diameter, both `x ± θr` are outside
//!   the box and the field there follows its exterior rule, so the tail is
//!   `(2E(x) - 2u(x)) R^{-2s}/s` exactly for affine exteriors.
//!
//! The result is L itself, which is negative semidefinite. The Fourier
//! multiplier of -L is [`crate::measure::symbol`].

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::{frequency, Plan, ToeplitzConv};
use crate::grid::{Exterior, Field, GridDomain, Point};
use crate::measure::{symbol, OperatorSpec};

pub const DENSE_CAP_1D: usize = 256;
pub const DENSE_CAP_2D: usize = 128;

/// One radial node: the coefficient multiplying δ(r) = u(x+θr)+u(x-θr)-2u(x).
#[derive(Clone, Copy, Debug)]
struct Node {
    r: f64,
    coeff: f64,
    /// `Some(k)` when θr is exactly the lattice vector k·e_axis.
    lattice: Option<i64>,
}

#[derive(Clone, Debug)]
struct Ray {
    dir: Point,
    nodes: Vec<Node>,
}

/// Quadrature rule for L on one grid.
#[derive(Clone, Debug)]
pub struct NonlocalOperator {
    spec: OperatorSpec,
    grid: Arc<GridDomain>,
    rays: Vec<Ray>,
    tail_radius: f64,
    /// Coefficient of (2E(x) - 2u(x)).
    tail: f64,
}

/// ∫_a^b r^e dr for e > -1.
fn moment(a: f64, b: f64, e: f64) -> f64 {
    (b.powf(e + 1.0) - a.powf(e + 1.0)) / (e + 1.0)
}

/// Weights W_j with Σ W_j G(r_j) = 2∫_{r_0}^{r_m} G_lin(r) r^{1-2s} dr.
fn product_weights(nodes: &[f64], s: f64) -> Vec<f64> {
    let mut w = vec![0.0; nodes.len()];
    let e = 1.0 - 2.0 * s;
    for k in 0..nodes.len().saturating_sub(1) {
        let (a, b) = (nodes[k], nodes[k + 1]);
        let i0 = moment(a, b, e);
        let i1 = moment(a, b, e + 1.0);
        w[k] += 2.0 * (b * i0 - i1) / (b - a);
        w[k + 1] += 2.0 * (i1 - a * i0) / (b - a);
    }
    w
}

fn is_axis(dir: Point, dim: usize) -> Option<usize> {
    if dim == 1 || dir[1] == 0.0 {
        Some(0)
    } else if dir[0] == 0.0 {
        Some(1)
    } else {
        None
    }
}

impl NonlocalOperator {
    pub fn new(spec: &OperatorSpec, grid: &Arc<GridDomain>) -> Result<Self> {
        spec.validate()?;
        if spec.measure.dim() != grid.dim() {
            return Err(Error::InvalidSpec(format!(
                "measure lives in dimension {} but the grid in {}",
                spec.measure.dim(),
                grid.dim()
            )));
        }
        let h = grid.spacing();
        let s = spec.s;
        let big_r = spec.resolved_tail_radius(h, grid.box_diameter())?;
        let c = spec.inner_cut * h;
        let taylor = 2.0 * c.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s) / (c * c);
        let q = 10f64.powf(1.0 / spec.radial_points_per_decade as f64);
        let mut rays = Vec::new();
        let mut mass = 0.0;
        for (dir, m) in spec.measure.rays() {
            mass += m;
            let mut radii = vec![c];
            let lattice_ray = is_axis(dir, grid.dim()).is_some();
            if lattice_ray {
                let mut k = (c / h).floor() as i64 + 1;
                while (k as f64) * h < big_r * (1.0 - 1e-12) {
                    radii.push(k as f64 * h);
                    k += 1;
                }
            } else {
                let mut r = c * q;
                while r < big_r * (1.0 - 1e-12) {
                    radii.push(r);
                    r *= q;
                }
            }
            radii.push(big_r);
            let w = product_weights(&radii, s);
            let nodes = radii
                .iter()
                .zip(&w)
                .enumerate()
                .map(|(j, (&r, &wj))| {
                    let mut coeff = m * wj / (r * r);
                    if j == 0 {
                        coeff += m * taylor;
                    }
                    let k = (r / h).round();
                    let lattice = (lattice_ray && (r / h - k).abs() < 1e-9).then_some(k as i64);
                    Node { r, coeff, lattice }
                })
                .collect();
            rays.push(Ray { dir, nodes });
        }
        Ok(Self {
            spec: spec.clone(),
            grid: grid.clone(),
            rays,
            tail_radius: big_r,
            tail: mass * big_r.powf(-2.0 * s) / s,
        })
    }

    pub fn spec(&self) -> &OperatorSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    pub fn tail_radius(&self) -> f64 {
        self.tail_radius
    }

    /// Number of radial samples per evaluation point.
    pub fn sample_count(&self) -> usize {
        self.rays.iter().map(|r| r.nodes.len()).sum()
    }

    /// Lu at one grid node by direct quadrature with interpolated samples.
    pub fn apply_at(&self, u: &Field, idx: usize) -> Result<f64> {
        if !u.same_grid_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        if idx >= self.grid.len() {
            return Err(Error::OutsideGrid(vec![idx]));
        }
        let x = self.grid.coord(idx);
        let u0 = u.values[idx];
        let mut acc = 0.0;
        for ray in &self.rays {
            let mut part = 0.0;
            for node in &ray.nodes {
                let y = [node.r * ray.dir[0], node.r * ray.dir[1]];
                let plus = u.sample([x[0] + y[0], x[1] + y[1]]);
                let minus = u.sample([x[0] - y[0], x[1] - y[1]]);
                part += node.coeff * (plus + minus - 2.0 * u0);
            }
            acc += part;
        }
        Ok(acc + self.tail * (2.0 * u.exterior.eval(x) - 2.0 * u0))
    }

    /// Lu at every grid node by direct quadrature, in parallel over nodes.
    pub fn apply_pointwise(&self, u: &Field) -> Result<Field> {
        if !u.same_grid_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let values: Vec<f64> = (0..self.grid.len())
            .into_par_iter()
            .map(|k| self.apply_at(u, k).expect("index in range"))
            .collect();
        Ok(Field {
            grid: self.grid.clone(),
            values,
            exterior: Exterior::ZERO,
        })
    }

    /// Translation-invariant weights of the rule, with no size guard.
    pub fn stencil(&self) -> Stencil {
        let n = self.grid.points_per_axis();
        let dim = self.grid.dim();
        let h = self.grid.spacing();
        let span = 2 * n - 1;
        let reach = n as i64 - 1;
        let mut weights = vec![0.0; span.pow(dim as u32)];
        let mut far = 0.0;
        let mut add = |o: [i64; 2], w: f64, weights: &mut Vec<f64>| {
            if o == [0, 0] || w == 0.0 {
                // weight on x itself cancels against the diagonal computed below
                return;
            }
            if o[0].abs() > reach || o[1].abs() > reach {
                far += w;
            } else {
                let a = (o[0] + reach) as usize;
                let b = if dim == 1 { 0 } else { (o[1] + reach) as usize };
                weights[a + span * b] += w;
            }
        };
        for ray in &self.rays {
            let axis = is_axis(ray.dir, dim);
            for node in &ray.nodes {
                let taps: Vec<([i64; 2], f64)> = match (node.lattice, axis) {
                    (Some(k), Some(ax)) => {
                        let sign = if ray.dir[ax] < 0.0 { -1 } else { 1 };
                        let mut o = [0, 0];
                        o[ax] = sign * k;
                        vec![(o, 1.0)]
                    }
                    _ => bilinear_taps([node.r * ray.dir[0] / h, node.r * ray.dir[1] / h], dim),
                };
                for (o, t) in taps {
                    add(o, node.coeff * t, &mut weights);
                    add([-o[0], -o[1]], node.coeff * t, &mut weights);
                }
            }
        }
        let tail_coefficient = far + 2.0 * self.tail;
        let diagonal = -(weights.iter().sum::<f64>() + tail_coefficient);
        Stencil {
            dim,
            n,
            weights,
            diagonal,
            tail_coefficient,
        }
    }
}

/// Corners and bilinear weights of the lattice cell containing `q` (in units of h).
fn bilinear_taps(q: Point, dim: usize) -> Vec<([i64; 2], f64)> {
    let i0 = q[0].floor();
    let tx = q[0] - i0;
    let i0 = i0 as i64;
    let mut out = Vec::with_capacity(4);
    if dim == 1 {
        out.push(([i0, 0], 1.0 - tx));
        out.push(([i0 + 1, 0], tx));
    } else {
        let j0 = q[1].floor();
        let ty = q[1] - j0;
        let j0 = j0 as i64;
        out.push(([i0, j0], (1.0 - tx) * (1.0 - ty)));
        out.push(([i0 + 1, j0], tx * (1.0 - ty)));
        out.push(([i0, j0 + 1], (1.0 - tx) * ty));
        out.push(([i0 + 1, j0 + 1], tx * ty));
    }
    out.retain(|t| t.1 != 0.0);
    out
}

/// Lattice form of L: Lu(x) = Σ_o w_o ũ(x+o) + diagonal·u(x) + tail_coefficient·E(x),
/// where ũ is u on the box and the exterior rule E outside it. Offsets reach
/// n-1 nodes along each axis; weight beyond that reach is folded into
/// `tail_coefficient`, which is exact for affine exteriors.
#[derive(Clone, Debug)]
pub struct Stencil {
    dim: usize,
    n: usize,
    /// Dense over offsets in [-(n-1), n-1]^dim, first axis fastest; the centre entry is 0.
    weights: Vec<f64>,
    pub diagonal: f64,
    pub tail_coefficient: f64,
}

impl Stencil {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.n
    }

    pub fn dense_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, o: [i64; 2]) -> f64 {
        let reach = self.n as i64 - 1;
        if o[0].abs() > reach || o[1].abs() > reach || (self.dim == 1 && o[1] != 0) {
            return 0.0;
        }
        let span = 2 * self.n - 1;
        let b = if self.dim == 1 { 0 } else { (o[1] + reach) as usize };
        self.weights[(o[0] + reach) as usize + span * b]
    }

    /// Nonzero off-diagonal entries.
    pub fn offsets(&self) -> Vec<([i64; 2], f64)> {
        let span = 2 * self.n - 1;
        let reach = self.n as i64 - 1;
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(k, &w)| {
                let j = if self.dim == 1 { 0 } else { (k / span) as i64 - reach };
                ([(k % span) as i64 - reach, j], w)
            })
            .collect()
    }

    pub fn apply_at(&self, u: &Field, idx: usize) -> Result<f64> {
        let g = &u.grid;
        if g.points_per_axis() != self.n || g.dim() != self.dim {
            return Err(Error::GridMismatch);
        }
        if idx >= g.len() {
            return Err(Error::OutsideGrid(vec![idx]));
        }
        let (i, j) = g.split(idx);
        let mut acc = 0.0;
        for (o, w) in self.offsets() {
            acc += w * u.lattice_value(i as i64 + o[0], j as i64 + o[1]);
        }
        Ok(acc + self.diagonal * u.values[idx] + self.tail_coefficient * u.exterior.eval(g.coord(idx)))
    }

    pub fn toeplitz(&self) -> ToeplitzConv {
        ToeplitzConv::new(self.dim, self.n, &self.weights)
    }

    /// Lu on the whole grid by FFT convolution.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.apply_with(&self.toeplitz(), u)
    }

    /// As [`Stencil::apply`], reusing a prepared convolution.
    pub fn apply_with(&self, conv: &ToeplitzConv, u: &Field) -> Result<Field> {
        let g = &u.grid;
        if g.points_per_axis() != self.n || g.dim() != self.dim {
            return Err(Error::GridMismatch);
        }
        // L kills the affine exterior, so apply to u - E whose exterior is zero
        let v: Vec<f64> = (0..g.len()).map(|k| u.values[k] - u.exterior.eval(g.coord(k))).collect();
        let mut y = vec![0.0; v.len()];
        conv.apply(&v, &mut y);
        for (y, v) in y.iter_mut().zip(&v) {
            *y += self.diagonal * v;
        }
        Ok(Field {
            grid: g.clone(),
            values: y,
            exterior: Exterior::ZERO,
        })
    }
}

/// δ(u, x, y) = u(x+y) + u(x-y) - 2u(x), interpolating off-grid points.
pub fn second_difference(u: &Field, idx: usize, y: Point) -> Result<f64> {
    if idx >= u.grid.len() {
        return Err(Error::OutsideGrid(vec![idx]));
    }
    let x = u.grid.coord(idx);
    Ok(u.sample([x[0] + y[0], x[1] + y[1]]) + u.sample([x[0] - y[0], x[1] - y[1]]) - 2.0 * u.values[idx])
}

/// Lu at one node. Builds the quadrature rule on every call; use
/// [`NonlocalOperator`] for repeated evaluation.
#[allow(non_snake_case)]
pub fn apply_L(spec: &OperatorSpec, u: &Field, idx: usize) -> Result<f64> {
    NonlocalOperator::new(spec, &u.grid)?.apply_at(u, idx)
}

/// Stencil of L on `grid`, refusing grids beyond the default dense caps.
pub fn assemble_stencil(spec: &OperatorSpec, grid: &Arc<GridDomain>) -> Result<Stencil> {
    let cap = if grid.dim() == 1 { DENSE_CAP_1D } else { DENSE_CAP_2D };
    assemble_stencil_capped(spec, grid, cap)
}

pub fn assemble_stencil_capped(spec: &OperatorSpec, grid: &Arc<GridDomain>, cap: usize) -> Result<Stencil> {
    if grid.points_per_axis() > cap {
        return Err(Error::GridTooLarge {
            points: grid.points_per_axis(),
            cap,
        });
    }
    Ok(NonlocalOperator::new(spec, grid)?.stencil())
}

/// F⁻¹[-A_L(ξ) F(u - E)] with the box zero-padded to `pad` times its size per
/// axis. `pad = 1` treats u - E as periodic on the box.
pub fn apply_fft(spec: &OperatorSpec, u: &Field, pad: usize) -> Field {
    let g = &*u.grid;
    let (n, dim, h) = (g.points_per_axis(), g.dim(), g.spacing());
    let m = n * pad.max(1);
    let plan = Plan::new(dim, m);
    let mut buf = vec![Complex64::new(0.0, 0.0); plan.len()];
    for k in 0..g.len() {
        let (i, j) = g.split(k);
        buf[i + m * j].re = u.values[k] - u.exterior.eval(g.coord(k));
    }
    plan.forward(&mut buf);
    let rows = if dim == 1 { 1 } else { m };
    for b in 0..rows {
        let xi2 = if dim == 1 { 0.0 } else { frequency(b, m, h) };
        for a in 0..m {
            let xi = [frequency(a, m, h), xi2];
            buf[a + m * b] *= -symbol(spec, xi);
        }
    }
    plan.inverse(&mut buf);
    let values = (0..g.len())
        .map(|k| {
            let (i, j) = g.split(k);
            buf[i + m * j].re
        })
        .collect();
    Field {
        grid: u.grid.clone(),
        values,
        exterior: Exterior::ZERO,
    }
}

/// The form ½ ∫∫ (u(x)-u(y))(v(x)-v(y)) K(x-y) in lattice pair form, equal to
/// -Σ v·Lu hⁿ. Both fields must vanish outside the box. Cost is quadratic in
/// the number of nodes.
pub fn bilinear_energy(spec: &OperatorSpec, u: &Field, v: &Field) -> Result<f64> {
    if !u.same_grid(v) {
        return Err(Error::GridMismatch);
    }
    if !u.exterior.is_zero() || !v.exterior.is_zero() {
        return Err(Error::Precondition("bilinear_energy needs exterior-zero fields".into()));
    }
    let st = NonlocalOperator::new(spec, &u.grid)?.stencil();
    let g = &*u.grid;
    let total: f64 = st.weights.iter().sum();
    let len = g.len();
    let mut pairs = 0.0;
    let mut killing = 0.0;
    for x in 0..len {
        let (xi, xj) = g.split(x);
        let mut inside = 0.0;
        for y in 0..len {
            if y == x {
                continue;
            }
            let (yi, yj) = g.split(y);
            let w = st.weight([yi as i64 - xi as i64, yj as i64 - xj as i64]);
            inside += w;
            pairs += w * ((u.values[y] - u.values[x]) * (v.values[y] - v.values[x]));
        }
        killing += (u.values[x] * v.values[x]) * (total - inside + st.tail_coefficient);
    }
    Ok((0.5 * pairs + killing) * g.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Shape;
    use crate::measure::SpectralMeasure;

    fn grid1(n: usize, hw: f64) -> Arc<GridDomain> {
        Arc::new(GridDomain::full_box(1, hw, n).unwrap())
    }

    #[test]
    fn product_weights_integrate_linear_g_exactly() {
        // G(r) = 1 + r on [0.5, 3] against r^{1-2s}: 2∫ (1+r) r^{1-2s}
        let s = 0.3;
        let nodes = [0.5, 0.9, 1.7, 3.0];
        let w = product_weights(&nodes, s);
        let approx: f64 = nodes.iter().zip(&w).map(|(r, w)| w * (1.0 + r)).sum();
        let exact = 2.0 * (moment(0.5, 3.0, 1.0 - 2.0 * s) + moment(0.5, 3.0, 2.0 - 2.0 * s));
        assert!((approx - exact).abs() < 1e-13);
    }

    #[test]
    fn second_difference_examples() {
        let g = grid1(33, 1.0);
        let h = g.spacing();
        let u = Field::from_fn(&g, Exterior::Affine { offset: 0.0, gradient: [1.0, 0.0] }, |p| p[0]);
        assert!(second_difference(&u, 7, [0.37, 0.0]).unwrap().abs() < 1e-14);
        let q = Field::from_fn(&g, Exterior::ZERO, |p| p[0] * p[0]);
        assert!((second_difference(&q, 16, [h, 0.0]).unwrap() - 2.0 * h * h).abs() < 1e-15);
        let omega = GridDomain::new(1, 1.0, 33, Shape::Interval { lo: -0.5, hi: 0.5 }).unwrap();
        let omega = Arc::new(omega);
        let ind = Field::from_fn(&omega, Exterior::ZERO, |p| if p[0].abs() < 0.5 { 1.0 } else { 0.0 });
        assert_eq!(second_difference(&ind, 16, [0.75, 0.0]).unwrap(), -2.0);
    }

    #[test]
    fn stencil_sign_structure_and_symmetry() {
        for (dim, m) in [(1, SpectralMeasure::axis_atomic(1)), (2, SpectralMeasure::uniform(2, 1.0, 36))] {
            let g = Arc::new(GridDomain::full_box(dim, 1.0, 17).unwrap());
            let st = assemble_stencil(&OperatorSpec::new(0.4, m), &g).unwrap();
            assert!(st.diagonal < 0.0);
            for (o, w) in st.offsets() {
                assert!(w >= 0.0);
                assert_eq!(w, st.weight([-o[0], -o[1]]));
            }
            let sum: f64 = st.offsets().iter().map(|x| x.1).sum();
            assert!((st.diagonal + sum + st.tail_coefficient).abs() < 1e-12 * st.diagonal.abs());
        }
    }

    #[test]
    fn axis_measure_stencil_lives_on_axes() {
        let g = Arc::new(GridDomain::full_box(2, 1.0, 21).unwrap());
        let st = assemble_stencil(&OperatorSpec::new(0.6, SpectralMeasure::axis_atomic(2)), &g).unwrap();
        assert!(st.offsets().iter().all(|(o, _)| o[0] == 0 || o[1] == 0));
    }

    #[test]
    fn stencil_cap_is_enforced() {
        let g = grid1(300, 1.0);
        let e = assemble_stencil(&OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(1)), &g).unwrap_err();
        assert!(e.to_string().contains("grid too large for dense stencil"));
    }

    #[test]
    fn stencil_matches_quadrature_pointwise() {
        let g = Arc::new(GridDomain::full_box(2, 1.0, 25).unwrap());
        let spec = OperatorSpec::new(0.35, SpectralMeasure::density_catalog(2, "cos2", 1.0, None, 24).unwrap());
        let op = NonlocalOperator::new(&spec, &g).unwrap();
        let st = op.stencil();
        let ext = Exterior::Affine { offset: 0.2, gradient: [0.3, -0.1] };
        let u = Field::from_fn(&g, ext, |p| (-(p[0] * p[0] + 2.0 * p[1] * p[1]) * 3.0).exp() + ext.eval(p));
        let whole = st.apply(&u).unwrap();
        for idx in [0, 13, 300, 312, 624] {
            let a = op.apply_at(&u, idx).unwrap();
            let b = st.apply_at(&u, idx).unwrap();
            let scale = st.diagonal.abs();
            assert!((a - b).abs() < 1e-10 * scale, "{idx}: {a} vs {b}");
            assert!((whole.values[idx] - b).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn energy_matches_stencil_form() {
        let g = Arc::new(GridDomain::full_box(1, 1.0, 41).unwrap());
        let spec = OperatorSpec::new(0.7, SpectralMeasure::axis_atomic(1));
        let u = Field::from_fn(&g, Exterior::ZERO, |p| (1.0 - p[0] * p[0]) * (3.0 * p[0]).sin());
        let v = Field::from_fn(&g, Exterior::ZERO, |p| (1.0 - p[0] * p[0]).powi(2));
        let lu = assemble_stencil(&spec, &g).unwrap().apply(&u).unwrap();
        let direct: f64 = -lu.values.iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>() * g.cell_volume();
        let pair = bilinear_energy(&spec, &u, &v).unwrap();
        assert!((pair - direct).abs() < 1e-8 * direct.abs().max(1.0));
        assert_eq!(pair, bilinear_energy(&spec, &u, &v).unwrap());
    }
}
