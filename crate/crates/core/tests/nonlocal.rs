use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use rustfft::num_complex::Complex64;

use stablemix::measure::{catalog, symbol};
use stablemix::nonlocal::{apply_L, apply_fft, assemble_stencil, bilinear_energy, NonlocalOperator};
use stablemix::{Exterior, Field, GridDomain, OperatorSpec, SpectralMeasure};

fn box_grid(dim: usize, hw: f64, n: usize) -> Arc<GridDomain> {
    Arc::new(GridDomain::full_box(dim, hw, n).unwrap())
}

fn gaussian(g: &Arc<GridDomain>) -> Field {
    Field::from_fn(g, Exterior::ZERO, |p| (-(p[0] * p[0] + p[1] * p[1])).exp())
}

fn inner_half_rel_error(a: &Field, b: &Field) -> f64 {
    let g = &a.grid;
    let hw = g.halfwidth() / 2.0;
    let mut err: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..g.len() {
        let p = g.coord(k);
        if p[0].abs() <= hw && p[1].abs() <= hw {
            err = err.max((a.values[k] - b.values[k]).abs());
            scale = scale.max(b.values[k].abs());
        }
    }
    err / scale
}

#[test]
fn quadrature_agrees_with_symbol_1d() {
    let g = box_grid(1, 6.0, 1024);
    let u = gaussian(&g);
    for m in catalog(1) {
        for s in [0.25, 0.5, 0.75] {
            let spec = OperatorSpec::new(s, m.clone());
            let direct = NonlocalOperator::new(&spec, &g).unwrap().apply_pointwise(&u).unwrap();
            let oracle = apply_fft(&spec, &u, 256);
            let e = inner_half_rel_error(&direct, &oracle);
            assert!(e <= 1e-4, "{} s={s}: {e:e}", m.tag());
        }
    }
}

#[test]
fn fft_kills_constants() {
    let g = box_grid(2, 1.0, 16);
    let u = Field::from_fn(&g, Exterior::ZERO, |_| 1.0);
    let spec = OperatorSpec::new(0.4, SpectralMeasure::uniform(2, 1.0, 36));
    assert!(apply_fft(&spec, &u, 1).sup_norm() < 1e-12);
}

#[test]
fn constants_are_annihilated_everywhere() {
    for dim in [1, 2] {
        let n = if dim == 1 { 101 } else { 21 };
        let g = box_grid(dim, 1.0, n);
        let u = Field::from_fn(&g, Exterior::Constant(3.0), |_| 3.0);
        for m in catalog(dim) {
            let spec = OperatorSpec::new(0.6, m.clone());
            let lu = NonlocalOperator::new(&spec, &g).unwrap().apply_pointwise(&u).unwrap();
            assert!(lu.sup_norm() <= 1e-10 * 3.0, "{}: {:e}", m.tag(), lu.sup_norm());
        }
    }
}

#[test]
fn affine_fields_are_annihilated() {
    let g = box_grid(2, 1.0, 21);
    let ext = Exterior::Affine { offset: 0.5, gradient: [2.0, -1.0] };
    let u = Field::from_fn(&g, ext, |p| ext.eval(p));
    for m in catalog(2) {
        let spec = OperatorSpec::new(0.3, m.clone());
        let lu = NonlocalOperator::new(&spec, &g).unwrap().apply_pointwise(&u).unwrap();
        assert!(lu.sup_norm() <= 1e-8 * u.sup_norm(), "{}", m.tag());
    }
}

#[test]
fn clipped_ramp_vanishes_at_centre() {
    let g = box_grid(1, 1.0, 65);
    let u = Field::from_fn(&g, Exterior::ZERO, |p| p[0]);
    let spec = OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(1));
    assert!(apply_L(&spec, &u, 32).unwrap().abs() < 1e-10);
}

#[test]
fn scaling_by_two() {
    // u_2(x) = u(2x) on the half-size box with the same node count
    let s = 0.35;
    let spec = OperatorSpec::new(s, SpectralMeasure::axis_atomic(1));
    let ga = box_grid(1, 4.0, 257);
    let gb = box_grid(1, 2.0, 257);
    let f = |x: f64| (-(x * x)).exp() * (1.0 + 0.3 * x);
    let ua = Field::from_fn(&ga, Exterior::ZERO, |p| f(p[0]));
    let ub = Field::from_fn(&gb, Exterior::ZERO, |p| f(2.0 * p[0]));
    let la = NonlocalOperator::new(&spec, &ga).unwrap().apply_pointwise(&ua).unwrap();
    let lb = NonlocalOperator::new(&spec, &gb).unwrap().apply_pointwise(&ub).unwrap();
    let scale = la.sup_norm();
    for k in 0..257 {
        assert!((lb.values[k] - 2f64.powf(2.0 * s) * la.values[k]).abs() <= 1e-3 * scale);
    }
}

#[test]
fn reflection_symmetry() {
    let g = box_grid(2, 1.0, 25);
    let u = Field::from_fn(&g, Exterior::ZERO, |p| (-(3.0 * p[0] * p[0] + p[1] * p[1] * 5.0)).exp() * (1.0 + p[0] * p[1]));
    let spec = OperatorSpec::new(0.45, SpectralMeasure::density_catalog(2, "axial", 1.0, None, 48).unwrap());
    let lu = NonlocalOperator::new(&spec, &g).unwrap().apply_pointwise(&u).unwrap();
    let n = g.points_per_axis();
    for j in 0..n {
        for i in 0..n {
            let a = lu.values[g.index(i, j)];
            let b = lu.values[g.index(n - 1 - i, n - 1 - j)];
            assert!((a - b).abs() <= 1e-10 * lu.sup_norm());
        }
    }
}

/// Spectral interpolation of F⁻¹[-A û] at an arbitrary point (periodic box).
fn spectral_eval(spec: &OperatorSpec, u: &Field, p: [f64; 2]) -> f64 {
    let g = &*u.grid;
    let n = g.points_per_axis();
    let h = g.spacing();
    let period = n as f64 * h;
    let freq = |k: usize| {
        let k = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        2.0 * PI * k / period
    };
    let mut acc = Complex64::new(0.0, 0.0);
    for b in 0..n {
        for a in 0..n {
            let xi = [freq(a), freq(b)];
            let mut uhat = Complex64::new(0.0, 0.0);
            for k in 0..g.len() {
                let x = g.coord(k);
                let phase = -(xi[0] * (x[0] + g.halfwidth()) + xi[1] * (x[1] + g.halfwidth()));
                uhat += u.values[k] * Complex64::from_polar(1.0, phase);
            }
            let phase = xi[0] * (p[0] + g.halfwidth()) + xi[1] * (p[1] + g.halfwidth());
            acc += -symbol(spec, xi) * uhat * Complex64::from_polar(1.0, phase);
        }
    }
    acc.re / g.len() as f64
}

#[test]
fn uniform_measure_commutes_with_rotation() {
    let g = box_grid(2, 5.0, 32);
    let spec = OperatorSpec::new(0.5, SpectralMeasure::uniform(2, 1.0, 360));
    let (c, s) = (0.5f64.cos(), 0.5f64.sin());
    let base = |p: [f64; 2]| (-(p[0] * p[0] / 0.8 + p[1] * p[1] / 2.0)).exp();
    let rotated = Field::from_fn(&g, Exterior::ZERO, |p| base([c * p[0] + s * p[1], -s * p[0] + c * p[1]]));
    let unrotated = Field::from_fn(&g, Exterior::ZERO, base);
    let lr = apply_fft(&spec, &rotated, 1);
    let scale = lr.sup_norm();
    for k in [g.index(16, 16), g.index(13, 18), g.index(20, 11), g.index(9, 15)] {
        let p = g.coord(k);
        let back = [c * p[0] + s * p[1], -s * p[0] + c * p[1]];
        let e = (lr.values[k] - spectral_eval(&spec, &unrotated, back)).abs();
        assert!(e <= 1e-3 * scale, "{k}: {e:e}");
    }
}

#[test]
fn energy_examples() {
    let g = box_grid(1, 1.0, 33);
    let spec = OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(1));
    let zero = Field::zeros(&g);
    assert_eq!(bilinear_energy(&spec, &zero, &zero).unwrap(), 0.0);
    let mut spike = Field::zeros(&g);
    spike.values[16] = 1.0;
    assert!(bilinear_energy(&spec, &spike, &spike).unwrap() > 0.0);
    let other = Arc::new(GridDomain::full_box(1, 1.0, 35).unwrap());
    assert!(bilinear_energy(&spec, &spike, &Field::zeros(&other)).is_err());
}

fn small_field(g: &Arc<GridDomain>, vals: &[f64]) -> Field {
    Field::from_values(g, vals.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn linearity(a in -3.0..3.0f64, b in -3.0..3.0f64,
                 u in prop::collection::vec(-1.0..1.0f64, 21),
                 v in prop::collection::vec(-1.0..1.0f64, 21)) {
        let g = box_grid(1, 1.0, 21);
        let spec = OperatorSpec::new(0.55, SpectralMeasure::axis_atomic(1));
        let op = NonlocalOperator::new(&spec, &g).unwrap();
        let (fu, fv) = (small_field(&g, &u), small_field(&g, &v));
        let comb: Vec<f64> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let fc = small_field(&g, &comb);
        let (lu, lv, lc) = (op.apply_pointwise(&fu).unwrap(), op.apply_pointwise(&fv).unwrap(), op.apply_pointwise(&fc).unwrap());
        let scale = lu.sup_norm().max(lv.sup_norm()) * (a.abs() + b.abs()) + 1.0;
        for k in 0..21 {
            prop_assert!((lc.values[k] - a * lu.values[k] - b * lv.values[k]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn energy_is_symmetric_and_nonnegative(u in prop::collection::vec(-1.0..1.0f64, 81),
                                           v in prop::collection::vec(-1.0..1.0f64, 81),
                                           s in 0.1..0.9f64) {
        let g = box_grid(2, 1.0, 9);
        let spec = OperatorSpec::new(s, SpectralMeasure::uniform(2, 1.0, 24));
        let (fu, fv) = (small_field(&g, &u), small_field(&g, &v));
        prop_assert_eq!(bilinear_energy(&spec, &fu, &fv).unwrap(), bilinear_energy(&spec, &fv, &fu).unwrap());
        prop_assert!(bilinear_energy(&spec, &fu, &fu).unwrap() >= 0.0);
        let lu = assemble_stencil(&spec, &g).unwrap().apply(&fu).unwrap();
        let direct: f64 = -lu.values.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() * g.cell_volume();
        let pair = bilinear_energy(&spec, &fu, &fv).unwrap();
        prop_assert!((pair - direct).abs() <= 1e-8 * (1.0 + direct.abs()));
    }

    #[test]
    fn stencil_annihilates_constants(c in -5.0..5.0f64, s in 0.05..0.95f64) {
        let g = box_grid(2, 1.0, 11);
        let spec = OperatorSpec::new(s, SpectralMeasure::density_catalog(2, "cos2", 1.0, None, 20).unwrap());
        let st = assemble_stencil(&spec, &g).unwrap();
        let u = Field::from_fn(&g, Exterior::Constant(c), |_| c);
        let lu = st.apply(&u).unwrap();
        prop_assert!(lu.sup_norm() <= 1e-10 * st.diagonal.abs() * (1.0 + c.abs()));
    }
}
