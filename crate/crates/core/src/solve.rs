//! Dirichlet solvers for 𝓔u + λu = f with 𝓔 = -L - div(a∇), the fixed-point
//! construction, the barrier, and the maximum-principle and comparison checks.

use std::sync::Arc;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::ToeplitzConv;
use crate::grid::{Exterior, Field, GridDomain, Point, Shape};
use crate::linalg::{pcg, CgOptions, LinearOperator, Tridiagonal};
use crate::local::{CoefficientField, LocalOperator};
use crate::measure::OperatorSpec;
use crate::nonlocal::{NonlocalOperator, Stencil};

pub const DEFAULT_MAX_ITER: usize = 50_000;

/// 𝓔u + λu = f in Ω, u = 0 outside Ω. Either term of 𝓔 may be absent.
#[derive(Clone, Debug)]
pub struct MixedProblem {
    pub spec: Option<OperatorSpec>,
    pub coef: Option<CoefficientField>,
    pub grid: Arc<GridDomain>,
    pub f: Field,
    pub lambda_shift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub u: Field,
    pub residual_sup: f64,
    pub iterations: usize,
    pub method: String,
    pub contraction_ratios: Vec<f64>,
    pub lambda: f64,
    pub notes: Vec<String>,
}

/// Linear system of the problem on the Ω nodes.
pub struct MixedSystem {
    grid: Arc<GridDomain>,
    omega: Vec<usize>,
    nonlocal: Option<(Stencil, ToeplitzConv)>,
    local: Option<LocalOperator>,
    lambda: f64,
}

impl MixedSystem {
    pub fn new(spec: Option<&OperatorSpec>, coef: Option<&CoefficientField>, grid: &Arc<GridDomain>, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Precondition("lambda_shift must be finite and nonnegative".into()));
        }
        let nonlocal = match spec {
            Some(spec) => {
                let st = NonlocalOperator::new(spec, grid)?.stencil();
                let conv = st.toeplitz();
                Some((st, conv))
            }
            None => None,
        };
        let local = match coef {
            Some(a) => {
                if !a.samples.same_grid_as(grid) {
                    return Err(Error::GridMismatch);
                }
                Some(LocalOperator::new(a))
            }
            None => None,
        };
        if nonlocal.is_none() && local.is_none() && lambda == 0.0 {
            return Err(Error::Precondition("the operator has no terms".into()));
        }
        let omega = grid.omega_indices();
        if omega.is_empty() {
            return Err(Error::InvalidGrid("Ω contains no grid nodes".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            omega,
            nonlocal,
            local,
            lambda,
        })
    }

    pub fn for_problem(p: &MixedProblem) -> Result<Self> {
        Self::new(p.spec.as_ref(), p.coef.as_ref(), &p.grid, p.lambda_shift)
    }

    pub fn grid(&self) -> &Arc<GridDomain> {
        &self.grid
    }

    pub fn omega(&self) -> &[usize] {
        &self.omega
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn stencil(&self) -> Option<&Stencil> {
        self.nonlocal.as_ref().map(|x| &x.0)
    }

    /// (-L - div(a∇) + λ) v on every box node, for v zero outside the box.
    pub fn apply_full(&self, v: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|y| *y = 0.0);
        if let Some((st, conv)) = &self.nonlocal {
            conv.apply(v, y);
            for (y, v) in y.iter_mut().zip(v) {
                *y = -(*y + st.diagonal * v);
            }
        }
        if let Some(local) = &self.local {
            let mut t = vec![0.0; v.len()];
            local.apply(v, &mut t);
            for (y, t) in y.iter_mut().zip(&t) {
                *y += t;
            }
        }
        if self.lambda != 0.0 {
            for (y, v) in y.iter_mut().zip(v) {
                *y += self.lambda * v;
            }
        }
    }

    fn scatter(&self, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.grid.len()];
        for (&k, &v) in self.omega.iter().zip(x) {
            full[k] = v;
        }
        full
    }

    fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.omega.iter().map(|&k| full[k]).collect()
    }

    /// Matrix entry between two box nodes.
    fn entry(&self, k: usize, l: usize) -> f64 {
        let g = &self.grid;
        let mut e = 0.0;
        if let Some((st, _)) = &self.nonlocal {
            if k == l {
                e -= st.diagonal;
            } else {
                let (a, b) = (g.split(k), g.split(l));
                e -= st.weight([b.0 as i64 - a.0 as i64, b.1 as i64 - a.1 as i64]);
            }
        }
        if let Some(local) = &self.local {
            if k == l {
                e += local.diagonal(k);
            } else {
                let (a, b) = (g.split(k.min(l)), g.split(k.max(l)));
                if a.1 == b.1 && b.0 == a.0 + 1 {
                    e += local.forward_entry(k.min(l), 0);
                } else if a.0 == b.0 && b.1 == a.1 + 1 {
                    e += local.forward_entry(k.min(l), 1);
                }
            }
        }
        if k == l {
            e += self.lambda;
        }
        e
    }

    /// Tridiagonal part along the first axis, used as preconditioner.
    pub fn line_preconditioner(&self) -> Tridiagonal {
        let n = self.omega.len();
        let diag = self.omega.iter().map(|&k| self.entry(k, k)).collect();
        let off = (0..n.saturating_sub(1))
            .map(|p| {
                let (k, l) = (self.omega[p], self.omega[p + 1]);
                let (a, b) = (self.grid.split(k), self.grid.split(l));
                if a.1 == b.1 && b.0 == a.0 + 1 {
                    self.entry(k, l)
                } else {
                    0.0
                }
            })
            .collect();
        Tridiagonal { off, diag }
    }

    /// Row sums of the Ω-restricted matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.omega.len()];
        self.apply(&vec![1.0; self.omega.len()], &mut y);
        y
    }

    /// Whether a row couples to a node outside Ω through a nonzero entry.
    pub fn touches_exterior(&self, p: usize) -> bool {
        let k = self.omega[p];
        if self.stencil().is_some_and(|st| st.tail_coefficient > 0.0) {
            return true;
        }
        let (i, j) = self.grid.split(k);
        let n = self.grid.points_per_axis() as i64;
        let dim = self.grid.dim();
        let nbrs: &[(i64, i64)] = if dim == 1 { &[(1, 0), (-1, 0)] } else { &[(1, 0), (-1, 0), (0, 1), (0, -1)] };
        nbrs.iter().any(|&(di, dj)| {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            if !(0..n).contains(&a) || (dim == 2 && !(0..n).contains(&b)) {
                return true;
            }
            !self.grid.in_omega(self.grid.index(a as usize, b as usize))
        })
    }

    /// Dense Ω×Ω matrix; only for small grids.
    pub fn dense_matrix(&self) -> Vec<Vec<f64>> {
        self.omega
            .iter()
            .map(|&k| self.omega.iter().map(|&l| self.entry(k, l)).collect())
            .collect()
    }

    fn tolerance(f_sup: f64) -> f64 {
        0.5e-8 * (f_sup + 1.0)
    }

    /// Solve with right-hand side `f` on Ω and zero data outside Ω.
    pub fn solve(&self, f: &Field) -> Result<(Field, usize, f64)> {
        let zero = Field::zeros(&self.grid);
        self.solve_with_data(f, &zero)
    }

    /// Solve with u = `data` outside Ω (box nodes and the exterior rule beyond the box).
    pub fn solve_with_data(&self, f: &Field, data: &Field) -> Result<(Field, usize, f64)> {
        self.solve_with_tol(f, data, None)
    }

    /// As `solve_with_data`, with an explicit sup-norm residual tolerance.
    pub fn solve_with_tol(&self, f: &Field, data: &Field, tol: Option<f64>) -> Result<(Field, usize, f64)> {
        if !f.same_grid_as(&self.grid) || !data.same_grid_as(&self.grid) {
            return Err(Error::GridMismatch);
        }
        let mut outside = data.clone();
        for &k in &self.omega {
            outside.values[k] = 0.0;
        }
        let lifted = self.apply_with_exterior(&outside)?;
        let b: Vec<f64> = self.omega.iter().map(|&k| f.values[k] - lifted[k]).collect();
        let f_sup = self.omega.iter().fold(0.0f64, |m, &k| m.max(f.values[k].abs()));
        let tol = tol.unwrap_or_else(|| Self::tolerance(f_sup));
        let pre = self.line_preconditioner();
        let out = pcg(
            self,
            &pre,
            &b,
            None,
            CgOptions {
                tol,
                max_iter: DEFAULT_MAX_ITER,
            },
        )?;
        let mut u = outside;
        for (&k, &v) in self.omega.iter().zip(&out.x) {
            u.values[k] = v;
        }
        debug!("pcg: {} iterations, residual {:e}", out.iterations, out.residual_sup);
        Ok((u, out.iterations, out.residual_sup))
    }

    /// (-L - div(a∇) + λ) u on the box for a field with an arbitrary exterior rule.
    pub fn apply_with_exterior(&self, u: &Field) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.grid.len()];
        if let Some((st, conv)) = &self.nonlocal {
            let lu = st.apply_with(conv, u)?;
            for (y, l) in y.iter_mut().zip(&lu.values) {
                *y = -l;
            }
        }
        if let Some(local) = &self.local {
            // Ω rows only see box nodes, so the box-local application is exact there
            let mut t = vec![0.0; u.values.len()];
            local.apply(&u.values, &mut t);
            for (y, t) in y.iter_mut().zip(&t) {
                *y += t;
            }
        }
        for (y, v) in y.iter_mut().zip(&u.values) {
            *y += self.lambda * v;
        }
        Ok(y)
    }

    /// sup over Ω of |(𝓔 + λ)u - f| for u vanishing outside Ω.
    pub fn residual_sup(&self, u: &Field, f: &Field) -> Result<f64> {
        let y = self.apply_with_exterior(u)?;
        Ok(self.omega.iter().fold(0.0f64, |m, &k| m.max((y[k] - f.values[k]).abs())))
    }
}

impl LinearOperator for MixedSystem {
    fn size(&self) -> usize {
        self.omega.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let full = self.scatter(x);
        let mut out = vec![0.0; full.len()];
        self.apply_full(&full, &mut out);
        y.copy_from_slice(&self.gather(&out));
    }
}

fn check_f(p: &MixedProblem) -> Result<()> {
    if !p.f.same_grid_as(&p.grid) {
        return Err(Error::GridMismatch);
    }
    if p.f.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("f must be finite".into()));
    }
    Ok(())
}

/// Conjugate gradients on the symmetric positive definite system.
pub fn solve_direct(p: &MixedProblem) -> Result<SolveReport> {
    check_f(p)?;
    let sys = MixedSystem::for_problem(p)?;
    let (u, iterations, residual_sup) = sys.solve(&p.f)?;
    Ok(SolveReport {
        u,
        residual_sup,
        iterations,
        method: "direct".into(),
        contraction_ratios: vec![],
        lambda: p.lambda_shift,
        notes: vec![],
    })
}

/// The local solve w ↦ u with -div(a∇u) + λu = f + Lw, i.e. f minus the
/// positive nonlocal part applied to w.
pub struct ContractionMap {
    nonlocal: Option<(Stencil, ToeplitzConv)>,
    local: MixedSystem,
    f: Field,
    zero: Field,
    /// residual tolerance of the inner solve
    pub inner_tol: Option<f64>,
    pub extension: bool,
}

impl ContractionMap {
    pub fn new(p: &MixedProblem, lambda: f64) -> Result<Self> {
        check_f(p)?;
        if !(lambda > 0.0) {
            return Err(Error::Precondition("the contraction map needs λ > 0".into()));
        }
        let nonlocal = match &p.spec {
            Some(spec) => {
                let st = NonlocalOperator::new(spec, &p.grid)?.stencil();
                let conv = st.toeplitz();
                Some((st, conv))
            }
            None => None,
        };
        let extension = p.coef.as_ref().is_some_and(|a| a.is_constant() != Some(1.0));
        Ok(Self {
            nonlocal,
            local: MixedSystem::new(None, p.coef.as_ref(), &p.grid, lambda)?,
            f: p.f.clone(),
            zero: Field::zeros(&p.grid),
            inner_tol: None,
            extension,
        })
    }

    pub fn apply(&self, w: &Field) -> Result<Field> {
        self.apply_from(self.f.clone(), w)
    }

    /// T w - T 0.
    pub fn apply_homogeneous(&self, w: &Field) -> Result<Field> {
        self.apply_from(self.zero.clone(), w)
    }

    fn apply_from(&self, mut rhs: Field, w: &Field) -> Result<Field> {
        if let Some((st, conv)) = &self.nonlocal {
            let w0 = w.restricted_to_omega();
            let lw = st.apply_with(conv, &w0)?;
            for (r, l) in rhs.values.iter_mut().zip(&lw.values) {
                *r += l;
            }
        }
        Ok(self.local.solve_with_tol(&rhs, &self.zero, self.inner_tol)?.0)
    }
}

/// T_λ w for the problem, with λ = `p.lambda_shift`.
pub fn contraction_map(p: &MixedProblem, w: &Field) -> Result<Field> {
    ContractionMap::new(p, p.lambda_shift)?.apply(w)
}

fn sup_diff(a: &Field, b: &Field) -> f64 {
    crate::grid::max_abs_diff(&a.values, &b.values)
}

/// Iterate `steps` times from u₀ = T(0); returns the iterates' increments.
/// Power iteration on T - T(0) from a seeded random start; returns the
/// largest of the last three sup-norm growth ratios.
pub fn estimate_contraction(t: &ContractionMap, grid: &Arc<GridDomain>, steps: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Field::zeros(grid);
    for k in grid.omega_indices() {
        d.values[k] = rng.gen_range(-1.0..1.0);
    }
    let mut norm = d.sup_norm();
    let mut ratios = Vec::with_capacity(steps);
    for _ in 0..steps {
        if norm == 0.0 {
            return Ok(0.0);
        }
        d.values.iter_mut().for_each(|v| *v /= norm);
        d = t.apply_homogeneous(&d)?;
        norm = d.sup_norm();
        ratios.push(norm);
    }
    Ok(ratios.iter().rev().take(3).copied().fold(0.0, f64::max))
}

/// Smallest λ = 2^k (k ≥ 0) whose estimated contraction factor is below 0.9.
pub fn auto_lambda(p: &MixedProblem) -> Result<(f64, Vec<String>)> {
    let mut lambda = 1.0;
    let mut notes = Vec::new();
    for _ in 0..60 {
        let t = ContractionMap::new(p, lambda)?;
        let r = estimate_contraction(&t, &p.grid, 30, 0)?;
        notes.push(format!("λ = {lambda}: contraction {r:.4}"));
        info!("auto λ: λ = {lambda}, contraction {r:.4}");
        if r < 0.9 {
            return Ok((lambda, notes));
        }
        lambda *= 2.0;
    }
    Err(Error::NoContraction { lambda })
}

/// u_k = T_λ u_{k-1} from u₀ = T_λ 0 until ‖u_k - u_{k-1}‖∞ ≤ tol. The limit
/// solves the shifted problem. λ = 0 triggers automatic selection.
pub fn solve_picard(p: &MixedProblem, tol: f64, max_iter: usize) -> Result<SolveReport> {
    check_f(p)?;
    let (lambda, mut notes) = if p.lambda_shift > 0.0 {
        (p.lambda_shift, vec![])
    } else {
        auto_lambda(p)?
    };
    let mut t = ContractionMap::new(p, lambda)?;
    // (-div(a∇) + λ)^{-1} has sup norm at most 1/λ
    t.inner_tol = Some(0.05 * lambda * tol);
    if t.extension {
        notes.push("extension: non-unit coefficient in the local solve".into());
    }
    let mut u = t.apply(&Field::zeros(&p.grid))?;
    let mut incs: Vec<f64> = Vec::new();
    let mut ratios_out = Vec::new();
    let mut bad = 0;
    let mut iterations = 1;
    loop {
        if iterations > max_iter {
            return Err(Error::Stagnation {
                iterations,
                residual: incs.last().copied().unwrap_or(f64::NAN),
            });
        }
        let next = t.apply(&u)?;
        iterations += 1;
        let inc = sup_diff(&next, &u);
        u = next;
        if let Some(&prev) = incs.last() {
            if prev > 0.0 {
                let r = inc / prev;
                ratios_out.push(r);
                bad = if r >= 1.0 { bad + 1 } else { 0 };
                if bad >= 5 {
                    return Err(Error::NoContraction { lambda });
                }
            }
        }
        incs.push(inc);
        if inc <= tol {
            break;
        }
    }
    let shifted = MixedProblem {
        lambda_shift: lambda,
        ..p.clone()
    };
    let residual_sup = MixedSystem::for_problem(&shifted)?.residual_sup(&u, &p.f)?;
    Ok(SolveReport {
        u,
        residual_sup,
        iterations,
        method: "picard".into(),
        contraction_ratios: ratios_out,
        lambda,
        notes,
    })
}

/// u_k = (𝓔 + λ)^{-1}(f + λ u_{k-1}) from u₀ = (𝓔 + λ)^{-1} f; the limit solves
/// the unshifted problem 𝓔u = f.
pub fn solve_resolvent(p: &MixedProblem, lambda: f64, tol: f64, max_iter: usize) -> Result<SolveReport> {
    check_f(p)?;
    if !(lambda > 0.0) {
        return Err(Error::Precondition("the resolvent iteration needs λ > 0".into()));
    }
    let sys = MixedSystem::new(p.spec.as_ref(), p.coef.as_ref(), &p.grid, lambda)?;
    let mut u = sys.solve(&p.f)?.0;
    let mut prev_inc: Option<f64> = None;
    let mut ratios_out = Vec::new();
    let mut iterations = 1;
    loop {
        if iterations > max_iter {
            return Err(Error::Stagnation {
                iterations,
                residual: prev_inc.unwrap_or(f64::NAN),
            });
        }
        let mut rhs = p.f.clone();
        for (r, v) in rhs.values.iter_mut().zip(&u.values) {
            *r += lambda * v;
        }
        let next = sys.solve(&rhs)?.0;
        iterations += 1;
        let inc = sup_diff(&next, &u);
        u = next;
        if let Some(prev) = prev_inc.filter(|&x| x > 0.0) {
            ratios_out.push(inc / prev);
        }
        prev_inc = Some(inc);
        if inc <= tol {
            break;
        }
    }
    let plain = MixedProblem {
        lambda_shift: 0.0,
        ..p.clone()
    };
    let residual_sup = MixedSystem::for_problem(&plain)?.residual_sup(&u, &p.f)?;
    Ok(SolveReport {
        u,
        residual_sup,
        iterations,
        method: "resolvent".into(),
        contraction_ratios: ratios_out,
        lambda,
        notes: vec![],
    })
}

/// w(x) = 1 - exp(β(|x-x₀|² - R²)) inside B_R(x₀), zero outside.
#[derive(Clone, Debug, Serialize)]
pub struct Barrier {
    #[serde(rename = "R")]
    pub radius: f64,
    pub center: Point,
    pub beta: f64,
    /// max over Ω of (Lw - Δw) at the accepted β
    pub max_residual: f64,
    pub tried_betas: Vec<f64>,
    /// Samples of w on a grid with the same lattice that contains B_R(x₀).
    #[serde(skip)]
    pub w: Field,
}

impl Barrier {
    pub fn eval(&self, p: Point, dim: usize) -> f64 {
        barrier_value(p, self.center, self.radius, self.beta, dim)
    }
}

fn dist2(p: Point, c: Point, dim: usize) -> f64 {
    (0..dim).map(|k| (p[k] - c[k]).powi(2)).sum()
}

fn barrier_value(p: Point, c: Point, radius: f64, beta: f64, dim: usize) -> f64 {
    let d2 = dist2(p, c, dim);
    if d2 <= radius * radius {
        -(beta * (d2 - radius * radius)).exp_m1()
    } else {
        0.0
    }
}

/// Points of Ω̄: the Ω nodes and samples of ∂Ω.
fn closure_points(grid: &GridDomain) -> Vec<Point> {
    let mut pts: Vec<Point> = grid.omega_indices().iter().map(|&k| grid.coord(k)).collect();
    pts.extend(grid.shape().boundary_samples(grid.dim(), 720));
    pts
}

/// Center and radius with Ω̄ ⊂ B_{3R/4}(x₀) \ B_{R/4}(x₀). The center is the
/// centroid of Ω, moved by 0.6R along the first axis when Ω would meet B_{R/4}.
pub fn fit_annulus(grid: &GridDomain) -> Result<(Point, f64, bool)> {
    let dim = grid.dim();
    let pts = closure_points(grid);
    let c = grid.shape().centroid(dim);
    let diam = grid.omega_diameter();
    let fits = |x0: Point, r: f64| {
        pts.iter().all(|&p| {
            let d = dist2(p, x0, dim).sqrt();
            d >= r / 4.0 && d <= 0.75 * r
        })
    };
    let mut r = 0.05 * diam;
    while r < 100.0 * diam {
        if fits(c, r) {
            return Ok((c, r, false));
        }
        let shifted = [c[0] - 0.6 * r, c[1]];
        if fits(shifted, r) {
            return Ok((shifted, r, true));
        }
        r *= 1.005;
    }
    Err(Error::Precondition("Ω does not fit an annulus {R/4 ≤ |x-x₀| ≤ 3R/4}".into()))
}

/// Doubling search for β with max_Ω (Lw - Δw) ≤ 1, using the discrete L on a
/// grid with the same lattice extended to contain B_R(x₀) and the exact -Δw.
pub fn build_barrier(grid: &Arc<GridDomain>, spec: &OperatorSpec, beta_init: f64) -> Result<Barrier> {
    if !(beta_init > 0.0) {
        return Err(Error::Precondition("beta_init must be positive".into()));
    }
    let dim = grid.dim();
    let (center, radius, shifted) = fit_annulus(grid)?;
    info!("barrier annulus: center {center:?}, R = {radius:.4}, shifted = {shifted}");
    let h = grid.spacing();
    let reach = (0..dim).map(|k| center[k].abs() + radius).fold(0.0, f64::max);
    let extra = ((reach - grid.halfwidth()) / h).ceil().max(0.0) as usize + 2;
    let ext = Arc::new(grid.extended(extra)?);
    let st = NonlocalOperator::new(spec, &ext)?.stencil();
    let conv = st.toeplitz();
    let omega = ext.omega_indices();
    let mut beta = beta_init;
    let mut tried = Vec::new();
    while beta <= beta_init * 2f64.powi(20) {
        let w = Field::from_fn(&ext, Exterior::ZERO, |p| barrier_value(p, center, radius, beta, dim));
        let lw = st.apply_with(&conv, &w)?;
        let mut worst = f64::NEG_INFINITY;
        for &k in &omega {
            let p = ext.coord(k);
            let d2 = dist2(p, center, dim);
            let e = (beta * (d2 - radius * radius)).exp();
            let minus_lap = e * (2.0 * dim as f64 * beta + 4.0 * beta * beta * d2);
            worst = worst.max(lw.values[k] + minus_lap);
        }
        tried.push(beta);
        debug!("barrier β = {beta}: max(Lw - Δw) = {worst:.6}");
        if worst <= 1.0 {
            return Ok(Barrier {
                radius,
                center,
                beta,
                max_residual: worst,
                tried_betas: tried,
                w,
            });
        }
        beta *= 2.0;
    }
    Err(Error::BarrierSearchFailed { beta: beta / 2.0 })
}

/// Largest second difference w(x+θr)+w(x-θr)-2w(x) over Ω̄ points, `n_dirs`
/// directions and radii in (0, R/4]; concavity means this is ≤ 0.
pub fn concavity_check(b: &Barrier, grid: &GridDomain, n_dirs: usize, n_radii: usize) -> f64 {
    let dim = grid.dim();
    let dirs: Vec<Point> = if dim == 1 {
        vec![[1.0, 0.0]]
    } else {
        (0..n_dirs)
            .map(|k| {
                let a = std::f64::consts::PI * k as f64 / n_dirs as f64;
                [a.cos(), a.sin()]
            })
            .collect()
    };
    let mut worst = f64::NEG_INFINITY;
    for x in closure_points(grid) {
        let wx = b.eval(x, dim);
        for d in &dirs {
            for m in 1..=n_radii {
                let r = 0.25 * b.radius * m as f64 / n_radii as f64;
                let plus = b.eval([x[0] + r * d[0], x[1] + r * d[1]], dim);
                let minus = b.eval([x[0] - r * d[0], x[1] - r * d[1]], dim);
                worst = worst.max(plus + minus - 2.0 * wx);
            }
        }
    }
    worst
}

#[derive(Clone, Debug, Serialize)]
pub struct Trial {
    pub min_u: f64,
    pub f_sup: f64,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxPrincipleReport {
    pub trials: Vec<Trial>,
    pub pass: bool,
    pub note: Option<String>,
}

/// Sum of 1–4 Gaussian bumps centred in Ω's bounding region; amplitudes have
/// the given sign pattern.
fn random_bumps(grid: &Arc<GridDomain>, rng: &mut ChaCha8Rng, signed: bool) -> Field {
    let dim = grid.dim();
    let c = grid.shape().centroid(dim);
    let diam = grid.omega_diameter();
    let count = rng.gen_range(1..=4);
    let bumps: Vec<(Point, f64, f64)> = (0..count)
        .map(|k| {
            let mut p = [0.0; 2];
            for (a, pa) in p.iter_mut().enumerate().take(dim) {
                *pa = c[a] + rng.gen_range(-0.5..0.5) * diam;
            }
            let width = rng.gen_range(0.05..0.3) * diam;
            let mut amp = rng.gen_range(0.1..1.0);
            if signed && k % 2 == 1 {
                amp = -2.0 * amp;
            }
            (p, width, amp)
        })
        .collect();
    let mut f = Field::from_fn(grid, Exterior::ZERO, |x| {
        bumps
            .iter()
            .map(|&(p, w, a)| a * (-dist2(x, p, dim) / (w * w)).exp())
            .sum()
    });
    f = f.restricted_to_omega();
    if signed && !f.values.iter().any(|&v| v < 0.0) {
        // make sure the control really changes sign
        if let Some(&k) = grid.omega_indices().first() {
            f.values[k] = -1.0;
        }
    }
    f
}

/// Solves with `trials` random nonnegative sources; passes iff every solution
/// satisfies min u ≥ -1e-8·‖f‖∞.
pub fn check_max_principle(p: &MixedProblem, trials: usize, seed: u64) -> Result<MaxPrincipleReport> {
    let sys = MixedSystem::for_problem(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(trials);
    for _ in 0..trials {
        let f = random_bumps(&p.grid, &mut rng, false);
        out.push(run_trial(&sys, &f));
    }
    let pass = out.iter().all(|t| t.pass);
    Ok(MaxPrincipleReport {
        trials: out,
        pass,
        note: None,
    })
}

fn run_trial(sys: &MixedSystem, f: &Field) -> Trial {
    let f_sup = f.sup_norm();
    match sys.solve(f) {
        Ok((u, _, _)) => {
            let min_u = sys.omega().iter().map(|&k| u.values[k]).fold(0.0, f64::min);
            Trial {
                min_u,
                f_sup,
                pass: min_u >= -1e-8 * f_sup,
                error: None,
            }
        }
        Err(e) => Trial {
            min_u: f64::NAN,
            f_sup,
            pass: false,
            error: Some(e.to_string()),
        },
    }
}

/// Control run with a sign-changing source; the principle does not apply.
pub fn max_principle_control(p: &MixedProblem, seed: u64) -> Result<MaxPrincipleReport> {
    let sys = MixedSystem::for_problem(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = random_bumps(&p.grid, &mut rng, true);
    let mut t = run_trial(&sys, &f);
    t.pass = true;
    Ok(MaxPrincipleReport {
        trials: vec![t],
        pass: true,
        note: Some("f changes sign: the maximum principle is not applicable, min u may be negative".into()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct VLambdaReport {
    pub lambda: f64,
    pub v_sup: f64,
    pub bound: f64,
    pub pass: bool,
    /// max over Ω of v - φ(w) with φ(t) = (1 + e^{-λt})/λ
    pub phi_excess: f64,
    pub phi_dominates: bool,
    pub barrier_beta: f64,
}

/// φ(t) = (1 + e^{-λt})/λ.
pub fn phi(lambda: f64, t: f64) -> f64 {
    (1.0 + (-lambda * t).exp()) / lambda
}

/// Solves (-L - Δ + λ) v = 1 in Ω with zero exterior data and compares
/// ‖v‖∞ with 2/λ and v with φ(w) for the barrier w.
pub fn comparison_vlambda(grid: &Arc<GridDomain>, spec: &OperatorSpec, lambda: f64, barrier: &Barrier) -> Result<VLambdaReport> {
    if !(lambda > 0.0) {
        return Err(Error::Precondition("λ must be positive".into()));
    }
    let a = CoefficientField::constant(grid, 1.0)?;
    let sys = MixedSystem::new(Some(spec), Some(&a), grid, lambda)?;
    let one = Field::from_fn(grid, Exterior::ZERO, |_| 1.0).restricted_to_omega();
    let (v, _, _) = sys.solve(&one)?;
    let v_sup = v.omega_sup();
    let bound = 2.0 / lambda;
    let dim = grid.dim();
    let phi_excess = sys
        .omega()
        .iter()
        .map(|&k| v.values[k] - phi(lambda, barrier.eval(grid.coord(k), dim)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(VLambdaReport {
        lambda,
        v_sup,
        bound,
        pass: v_sup <= bound + 1e-8,
        phi_excess,
        phi_dominates: phi_excess <= 1e-8,
        barrier_beta: barrier.beta,
    })
}

/// Standard annulus configurations for the barrier: Ω = (0.3, 0.7) in 1D and
/// the disc of radius 0.5 in 2D, both in the box [-1, 1]^n.
pub fn standard_barrier_grid(dim: usize, points: usize) -> Result<Arc<GridDomain>> {
    let shape = if dim == 1 {
        Shape::Interval { lo: 0.3, hi: 0.7 }
    } else {
        Shape::Ball {
            center: [0.0, 0.0],
            radius: 0.5,
        }
    };
    Ok(Arc::new(GridDomain::new(dim, 1.0, points, shape)?))
}
