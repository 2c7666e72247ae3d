use std::sync::Arc;

use proptest::prelude::*;

use stablemix::local::{apply_div_a_grad, make_coefficient, CoefficientField, LocalOperator};
use stablemix::{Exterior, Field, GridDomain};

fn grid(dim: usize, n: usize) -> Arc<GridDomain> {
    Arc::new(GridDomain::full_box(dim, 1.0, n).unwrap())
}

fn custom(g: &Arc<GridDomain>, f: impl Fn([f64; 2]) -> f64, lo: f64, hi: f64) -> CoefficientField {
    CoefficientField {
        samples: Field::from_fn(g, Exterior::ZERO, f),
        alpha: 0.5,
        a_minus: lo,
        a_plus: hi,
        generator_tag: "test".into(),
    }
}

#[test]
fn linear_coefficient_on_linear_field() {
    let g = Arc::new(GridDomain::full_box(1, 0.5, 101).unwrap());
    let a = custom(&g, |p| 1.0 + p[0], 0.5, 1.5);
    let u = Field::from_fn(&g, Exterior::ZERO, |p| p[0]);
    for k in 5..96 {
        assert!((apply_div_a_grad(&a, &u, k).unwrap() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn constant_coefficient_factors_out() {
    let g = grid(2, 21);
    let c = 2.75;
    let a = CoefficientField::constant(&g, c).unwrap();
    let one = CoefficientField::constant(&g, 1.0).unwrap();
    let u = Field::from_fn(&g, Exterior::ZERO, |p| (2.0 * p[0]).sin() * p[1] * p[1] + p[0]);
    for k in 0..g.len() {
        let lhs = apply_div_a_grad(&a, &u, k).unwrap();
        let rhs = c * apply_div_a_grad(&one, &u, k).unwrap();
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }
}

#[test]
fn smooth_sine_stays_in_bounds_with_bounded_ratio() {
    let g = grid(2, 33);
    let a = make_coefficient("smooth-sine", 0.99, 1.0, 2.0, &g).unwrap();
    assert!(a.samples.values.iter().all(|&v| (1.0..=2.0).contains(&v)));
    let ratio = a.dyadic_holder_ratio();
    assert!(ratio.is_finite() && ratio < 10.0);
}

/// Slope of log(osc at distance r) against log r over dyadic r in [4h, hw/2].
fn oscillation_slope(f: &Field) -> f64 {
    let g = &*f.grid;
    let n = g.points_per_axis();
    let mut pts = Vec::new();
    let mut step = 4;
    while (step as f64) * g.spacing() <= 0.5 * g.halfwidth() {
        let osc = (0..n - step)
            .map(|i| (f.values[i + step] - f.values[i]).abs())
            .fold(0.0, f64::max);
        pts.push(((step as f64 * g.spacing()).ln(), osc.ln()));
        step *= 2;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    num / den
}

#[test]
fn weierstrass_exponent_is_recovered() {
    let g = grid(1, 8193);
    for alpha in [0.3, 0.5, 0.7] {
        let a = make_coefficient("weierstrass-alpha", alpha, 1.0, 2.0, &g).unwrap();
        let slope = oscillation_slope(&a.samples);
        assert!((slope - alpha).abs() <= 0.1, "α={alpha}: {slope}");
    }
}

#[test]
fn unknown_kind_is_rejected() {
    let g = grid(1, 9);
    assert!(make_coefficient("bumpy", 0.5, 1.0, 2.0, &g).is_err());
}

fn local_energy(a: &CoefficientField, u: &[f64]) -> f64 {
    let op = LocalOperator::new(a);
    let mut y = vec![0.0; u.len()];
    op.apply(u, &mut y);
    u.iter().zip(&y).map(|(a, b)| a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn self_adjoint_and_semidefinite(u in prop::collection::vec(-1.0..1.0f64, 49),
                                     v in prop::collection::vec(-1.0..1.0f64, 49)) {
        let g = grid(2, 7);
        let a = make_coefficient("weierstrass-alpha", 0.4, 0.5, 3.0, &g).unwrap();
        // exterior-zero fields: the pointwise form on Ω-only data
        let mask = |w: &[f64]| -> Field {
            let vals = (0..g.len()).map(|k| if g.in_omega(k) { w[k] } else { 0.0 }).collect();
            Field::from_values(&g, vals).unwrap()
        };
        let (fu, fv) = (mask(&u), mask(&v));
        let dot = |x: &Field, y: &Field| -> f64 {
            (0..g.len()).map(|k| x.values[k] * apply_div_a_grad(&a, y, k).unwrap()).sum()
        };
        let (uv, vu) = (dot(&fu, &fv), dot(&fv, &fu));
        prop_assert!((uv - vu).abs() <= 1e-10 * (1.0 + uv.abs()));
        prop_assert!(dot(&fu, &fu) <= 1e-12);
    }

    #[test]
    fn energy_is_monotone_in_the_coefficient(u in prop::collection::vec(-1.0..1.0f64, 25),
                                             bump in prop::collection::vec(0.0..1.0f64, 25)) {
        let g = grid(2, 5);
        let a = make_coefficient("smooth-sine", 0.5, 1.0, 2.0, &g).unwrap();
        let mut b = a.clone();
        for (x, d) in b.samples.values.iter_mut().zip(&bump) {
            *x += d;
        }
        b.a_plus = 3.0;
        prop_assert!(local_energy(&b, &u) >= local_energy(&a, &u) - 1e-12);
    }
}
