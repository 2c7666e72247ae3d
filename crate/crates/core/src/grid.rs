//! Uniform grids on centered boxes, the Ω mask, and grid-valued fields.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane; in one dimension only the first coordinate is used.
pub type Point = [f64; 2];

/// Geometry of the open set Ω.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Interval { lo: f64, hi: f64 },
    Ball { center: Point, radius: f64 },
    Rect { lo: Point, hi: Point },
}

impl Shape {
    pub fn contains(&self, p: Point, dim: usize) -> bool {
        self.signed_distance(p, dim) > 0.0
    }

    /// Distance to ∂Ω, positive inside and negative outside.
    pub fn signed_distance(&self, p: Point, dim: usize) -> f64 {
        match *self {
            Shape::Interval { lo, hi } => (p[0] - lo).min(hi - p[0]),
            Shape::Ball { center, radius } => {
                let d2: f64 = (0..dim).map(|k| (p[k] - center[k]).powi(2)).sum();
                radius - d2.sqrt()
            }
            Shape::Rect { lo, hi } => {
                // exact inside; outside only the sign matters
                (0..dim)
                    .map(|k| (p[k] - lo[k]).min(hi[k] - p[k]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn diameter(&self, dim: usize) -> f64 {
        match *self {
            Shape::Interval { lo, hi } => hi - lo,
            Shape::Ball { radius, .. } => 2.0 * radius,
            Shape::Rect { lo, hi } => (0..dim)
                .map(|k| (hi[k] - lo[k]).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn centroid(&self, dim: usize) -> Point {
        match *self {
            Shape::Interval { lo, hi } => [(lo + hi) / 2.0, 0.0],
            Shape::Ball { center, .. } => {
                if dim == 1 {
                    [center[0], 0.0]
                } else {
                    center
                }
            }
            Shape::Rect { lo, hi } => [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0],
        }
    }

    /// Points on ∂Ω: the two endpoints in 1D, `n` points along the curve in 2D.
    pub fn boundary_samples(&self, dim: usize, n: usize) -> Vec<Point> {
        match *self {
            Shape::Interval { lo, hi } => vec![[lo, 0.0], [hi, 0.0]],
            Shape::Ball { center, radius } => {
                if dim == 1 {
                    return vec![[center[0] - radius, 0.0], [center[0] + radius, 0.0]];
                }
                (0..n)
                    .map(|k| {
                        let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                        [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
                    })
                    .collect()
            }
            Shape::Rect { lo, hi } => {
                if dim == 1 {
                    return vec![[lo[0], 0.0], [hi[0], 0.0]];
                }
                let per_side = (n / 4).max(1);
                let mut out = Vec::with_capacity(4 * per_side);
                for k in 0..per_side {
                    let t = k as f64 / per_side as f64;
                    out.push([lo[0] + t * (hi[0] - lo[0]), lo[1]]);
                    out.push([hi[0], lo[1] + t * (hi[1] - lo[1])]);
                    out.push([hi[0] - t * (hi[0] - lo[0]), hi[1]]);
                    out.push([lo[0], hi[1] - t * (hi[1] - lo[1])]);
                }
                out
            }
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        let ok = match *self {
            Shape::Interval { lo, hi } => dim == 1 && lo < hi,
            Shape::Ball { radius, .. } => radius > 0.0,
            Shape::Rect { lo, hi } => (0..dim).all(|k| lo[k] < hi[k]),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidGrid(format!("degenerate domain {self:?} in dimension {dim}")))
        }
    }
}

/// Uniform grid on the box [-halfwidth, halfwidth]^dim with the Ω mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDomain {
    dim: usize,
    halfwidth: f64,
    points: usize,
    h: f64,
    shape: Shape,
    omega_mask: Vec<bool>,
    boundary_distance: Vec<f64>,
}

impl GridDomain {
    pub fn new(dim: usize, halfwidth: f64, points: usize, shape: Shape) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not supported")));
        }
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(Error::InvalidGrid("halfwidth must be positive".into()));
        }
        if points < 3 {
            return Err(Error::InvalidGrid("need at least 3 points per axis".into()));
        }
        shape.check(dim)?;
        let h = 2.0 * halfwidth / (points - 1) as f64;
        Ok(Self::build(dim, halfwidth, points, h, shape))
    }

    fn build(dim: usize, halfwidth: f64, points: usize, h: f64, shape: Shape) -> Self {
        let total = points.pow(dim as u32);
        let mut omega_mask = vec![false; total];
        let mut boundary_distance = vec![0.0; total];
        for idx in 0..total {
            let (i, j) = (idx % points, idx / points);
            let interior = (1..points - 1).contains(&i) && (dim == 1 || (1..points - 1).contains(&j));
            let p = [-halfwidth + i as f64 * h, -halfwidth + j as f64 * h];
            let d = shape.signed_distance(p, dim);
            if interior && d > 0.0 {
                omega_mask[idx] = true;
                boundary_distance[idx] = d;
            }
        }
        Self {
            dim,
            halfwidth,
            points,
            h,
            shape,
            omega_mask,
            boundary_distance,
        }
    }

    /// Grid whose Ω is the whole open box.
    pub fn full_box(dim: usize, halfwidth: f64, points: usize) -> Result<Self> {
        let shape = if dim == 1 {
            Shape::Interval { lo: -halfwidth, hi: halfwidth }
        } else {
            Shape::Rect { lo: [-halfwidth; 2], hi: [halfwidth; 2] }
        };
        Self::new(dim, halfwidth, points, shape)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }
    pub fn points_per_axis(&self) -> usize {
        self.points
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn shape(&self) -> &Shape {
        &self.shape
    }
    pub fn len(&self) -> usize {
        self.omega_mask.len()
    }
    pub fn is_empty(&self) -> bool {
        self.omega_mask.is_empty()
    }
    pub fn omega_mask(&self) -> &[bool] {
        &self.omega_mask
    }
    pub fn boundary_distance(&self) -> &[f64] {
        &self.boundary_distance
    }
    pub fn in_omega(&self, idx: usize) -> bool {
        self.omega_mask[idx]
    }
    pub fn omega_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.omega_mask[k]).collect()
    }
    /// Cell volume hⁿ.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }
    /// Diameter of the box.
    pub fn box_diameter(&self) -> f64 {
        2.0 * self.halfwidth * (self.dim as f64).sqrt()
    }
    pub fn omega_diameter(&self) -> f64 {
        self.shape.diameter(self.dim)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + j * self.points
    }
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx % self.points, idx / self.points)
    }
    pub fn coord(&self, idx: usize) -> Point {
        let (i, j) = self.split(idx);
        self.lattice_point(i as i64, j as i64)
    }
    /// Coordinates of a lattice node, which may lie outside the box.
    pub fn lattice_point(&self, i: i64, j: i64) -> Point {
        let y = if self.dim == 1 { 0.0 } else { -self.halfwidth + j as f64 * self.h };
        [-self.halfwidth + i as f64 * self.h, y]
    }
    pub fn lattice_in_box(&self, i: i64, j: i64) -> bool {
        let n = self.points as i64;
        (0..n).contains(&i) && (self.dim == 1 || (0..n).contains(&j))
    }
    /// Index of the grid node closest to `p`, if `p` is inside the box.
    pub fn nearest(&self, p: Point) -> Option<usize> {
        let to_i = |x: f64| ((x + self.halfwidth) / self.h).round();
        let i = to_i(p[0]);
        let j = if self.dim == 1 { 0.0 } else { to_i(p[1]) };
        if self.lattice_in_box(i as i64, j as i64) {
            Some(self.index(i as usize, j as usize))
        } else {
            None
        }
    }

    /// Same lattice and Ω, with `k` extra nodes on every side of the box.
    pub fn extended(&self, k: usize) -> Result<Self> {
        Ok(Self::build(
            self.dim,
            self.halfwidth + k as f64 * self.h,
            self.points + 2 * k,
            self.h,
            self.shape.clone(),
        ))
    }

    /// Same box, Ω replaced.
    pub fn with_shape(&self, shape: Shape) -> Result<Self> {
        Self::new(self.dim, self.halfwidth, self.points, shape)
    }
}

/// Values a field takes outside the box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Exterior {
    Constant(f64),
    /// offset + gradient · x
    Affine { offset: f64, gradient: Point },
}

impl Exterior {
    pub const ZERO: Exterior = Exterior::Constant(0.0);

    pub fn eval(&self, p: Point) -> f64 {
        match *self {
            Exterior::Constant(c) => c,
            Exterior::Affine { offset, gradient } => offset + gradient[0] * p[0] + gradient[1] * p[1],
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Exterior::Constant(c) if *c == 0.0)
    }
}

/// Grid-valued scalar function with a rule for the exterior of the box.
#[derive(Clone, Debug)]
pub struct Field {
    pub grid: Arc<GridDomain>,
    pub values: Vec<f64>,
    pub exterior: Exterior,
}

impl Field {
    pub fn zeros(grid: &Arc<GridDomain>) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
            exterior: Exterior::ZERO,
        }
    }

    pub fn from_fn(grid: &Arc<GridDomain>, exterior: Exterior, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.coord(k))).collect();
        Self {
            grid: grid.clone(),
            values,
            exterior,
        }
    }

    pub fn from_values(grid: &Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("field values must be finite".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            exterior: Exterior::ZERO,
        })
    }

    /// Value at a lattice node; nodes outside the box take the exterior rule.
    pub fn lattice_value(&self, i: i64, j: i64) -> f64 {
        if self.grid.lattice_in_box(i, j) {
            self.values[self.grid.index(i as usize, j as usize)]
        } else {
            self.exterior.eval(self.grid.lattice_point(i, j))
        }
    }

    /// Multilinear interpolation over the lattice extended by the exterior rule.
    pub fn sample(&self, p: Point) -> f64 {
        let g = &*self.grid;
        let fx = (p[0] + g.halfwidth) / g.h;
        let i0 = fx.floor();
        let tx = fx - i0;
        let i0 = i0 as i64;
        if g.dim == 1 {
            let a = self.lattice_value(i0, 0);
            if tx == 0.0 {
                return a;
            }
            return (1.0 - tx) * a + tx * self.lattice_value(i0 + 1, 0);
        }
        let fy = (p[1] + g.halfwidth) / g.h;
        let j0 = fy.floor();
        let ty = fy - j0;
        let j0 = j0 as i64;
        let v00 = self.lattice_value(i0, j0);
        let v10 = self.lattice_value(i0 + 1, j0);
        let v01 = self.lattice_value(i0, j0 + 1);
        let v11 = self.lattice_value(i0 + 1, j0 + 1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm restricted to Ω.
    pub fn omega_sup(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.omega_mask())
            .filter(|(_, &m)| m)
            .fold(0.0, |m, (v, _)| m.max(v.abs()))
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.same_grid_as(&other.grid)
    }

    pub fn same_grid_as(&self, grid: &Arc<GridDomain>) -> bool {
        Arc::ptr_eq(&self.grid, grid) || *self.grid == **grid
    }

    /// Zero outside Ω, keeping the exterior rule at zero.
    pub fn restricted_to_omega(&self) -> Field {
        let values = self
            .values
            .iter()
            .zip(self.grid.omega_mask())
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect();
        Field {
            grid: self.grid.clone(),
            values,
            exterior: Exterior::ZERO,
        }
    }
}

/// Maximum absolute difference of two equally sized slices.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
