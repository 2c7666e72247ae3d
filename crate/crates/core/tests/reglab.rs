use std::sync::Arc;

use proptest::prelude::*;

use stablemix::error::Error;
use stablemix::local::make_coefficient;
use stablemix::measure::{catalog, SpectralMeasure};
use stablemix::reglab::{boundary_exponent, boundary_run, fit_exponent, holder_seminorm, interior_experiment, InteriorConfig, Region};
use stablemix::{Exterior, Field, GridDomain, OperatorSpec};

fn line(n: usize) -> Arc<GridDomain> {
    Arc::new(GridDomain::full_box(1, 1.0, n).unwrap())
}

/// max over all grid pairs at distance in [r, 2r] of |u(x) - u(y)|/|x-y|^γ.
fn brute(u: &Field, gamma: f64, r: f64) -> f64 {
    let g = &u.grid;
    let mut best: f64 = 0.0;
    for a in 0..g.len() {
        for b in 0..g.len() {
            let d = (g.coord(a)[0] - g.coord(b)[0]).abs();
            if d >= r * (1.0 - 1e-9) && d <= 2.0 * r * (1.0 + 1e-9) {
                best = best.max((u.values[a] - u.values[b]).abs() / d.powf(gamma));
            }
        }
    }
    best
}

#[test]
fn constants_have_zero_seminorm() {
    let g = line(65);
    let u = Field::from_fn(&g, Exterior::Constant(4.0), |_| 4.0);
    for beta in [0.3, 1.0, 1.7, 2.0] {
        assert_eq!(holder_seminorm(&u, beta, &Region::centered(1, 0.8), 0.1, 0).unwrap(), 0.0);
    }
}

#[test]
fn absolute_value_is_lipschitz_one() {
    let g = line(201);
    let u = Field::from_fn(&g, Exterior::ZERO, |p| p[0].abs());
    let q = holder_seminorm(&u, 1.0, &Region::centered(1, 1.0), 0.05, 0).unwrap();
    assert!((q - 1.0).abs() < 1e-12);
    assert!((q - brute(&u, 1.0, 0.05)).abs() < 1e-12);
}

#[test]
fn square_root_is_half_holder_one() {
    let g = line(401);
    let u = Field::from_fn(&g, Exterior::ZERO, |p| p[0].abs().sqrt());
    for r in [0.02, 0.1, 0.3] {
        let q = holder_seminorm(&u, 0.5, &Region::centered(1, 1.0), r, 0).unwrap();
        assert!((q - brute(&u, 0.5, r)).abs() < 1e-12);
        assert!((q - 1.0).abs() < 0.01, "{q}");
    }
}

#[test]
fn region_must_fit_the_scale() {
    let g = line(101);
    let u = Field::from_fn(&g, Exterior::ZERO, |p| p[0]);
    assert!(matches!(
        holder_seminorm(&u, 0.5, &Region::centered(1, 0.1), 0.5, 0),
        Err(Error::RegionTooSmall { .. })
    ));
}

#[test]
fn gaussian_is_bounded_at_every_order() {
    for (dim, n) in [(1, 1025), (2, 129)] {
        let g = Arc::new(GridDomain::full_box(dim, 1.0, n).unwrap());
        let u = Field::from_fn(&g, Exterior::ZERO, |p| (-(p[0] * p[0] + p[1] * p[1]) * 2.0).exp());
        let reps = fit_exponent(&u, &Region::centered(dim, 1.0), &[0.5, 1.5, 2.0], 3).unwrap();
        for r in reps {
            assert!(r.bounded, "dim {dim} β={}: {:?}", r.order, r.seminorms);
            assert!(r.scales.windows(2).all(|w| w[0] < w[1]));
            assert!(r.scales[0] >= 4.0 * g.spacing() - 1e-12);
        }
    }
}

#[test]
fn weierstrass_exponents_are_recovered() {
    let g = line(2049);
    for alpha in [0.3, 0.5, 0.7] {
        let a = make_coefficient("weierstrass-alpha", alpha, 1.0, 2.0, &g).unwrap();
        let r = &fit_exponent(&a.samples, &Region::centered(1, 1.0), &[alpha], 0).unwrap()[0];
        assert!((r.fitted_exponent - alpha).abs() <= 0.1, "{alpha}: {}", r.fitted_exponent);
    }
}

#[test]
fn two_dimensional_fits_are_seeded() {
    let g = Arc::new(GridDomain::full_box(2, 1.0, 129).unwrap());
    let a = make_coefficient("weierstrass-alpha", 0.5, 1.0, 2.0, &g).unwrap();
    let r1 = fit_exponent(&a.samples, &Region::centered(2, 1.0), &[0.5], 11).unwrap();
    let r2 = fit_exponent(&a.samples, &Region::centered(2, 1.0), &[0.5], 11).unwrap();
    assert_eq!(r1[0].seminorms, r2[0].seminorms);
    assert!((r1[0].fitted_exponent - 0.5).abs() <= 0.1);
}

#[test]
fn pure_fractional_boundary_exponent_is_s() {
    let spec = OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(1));
    let (_, fit) = boundary_run(Some(&spec), 0.0, 1025).unwrap();
    assert!((fit.kappa - 0.5).abs() <= 0.05, "{fit:?}");
    assert!(fit.count >= 6);
}

#[test]
fn zero_data_is_degenerate() {
    let g = line(257);
    assert!(matches!(boundary_exponent(&Field::zeros(&g)), Err(Error::DegenerateData)));
}

#[test]
fn coarse_grid_has_too_few_points() {
    let g = line(21);
    let u = Field::from_fn(&g, Exterior::ZERO, |p| 1.0 - p[0] * p[0]).restricted_to_omega();
    assert!(matches!(boundary_exponent(&u), Err(Error::TooFewPoints { .. })));
}

#[test]
fn interior_flags_and_case_split() {
    let cfg = InteriorConfig {
        dim: 1,
        spec: OperatorSpec::new(0.75, catalog(1)[0].clone()),
        coef_kind: "smooth-sine".into(),
        alpha: 0.5,
        gamma: 0.3,
        rough_source: false,
        points: 513,
        orders: vec![0.5, 1.5, 2.0],
        seed: 0,
    };
    let rep = interior_experiment(&cfg).unwrap();
    assert!(rep.flags.contains(&"prediction-capped".to_string()));
    assert!(rep.case_a && rep.case_b);
    assert!(rep.reports.iter().all(|r| r.bounded));

    let eps = InteriorConfig {
        spec: OperatorSpec::new(0.25, catalog(1)[0].clone()),
        rough_source: true,
        ..cfg.clone()
    };
    let rep = interior_experiment(&eps).unwrap();
    assert!(rep.flags.contains(&"epsilon-loss".to_string()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn quotient_monotone_in_order(vals in prop::collection::vec(-1.0..1.0f64, 65),
                                  b1 in 0.05..1.0f64, b2 in 0.05..1.0f64, r in 0.05..0.4f64) {
        let g = line(65);
        let u = Field::from_values(&g, vals).unwrap();
        let region = Region::centered(1, 1.0);
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        let q_lo = holder_seminorm(&u, lo, &region, r, 0).unwrap();
        let q_hi = holder_seminorm(&u, hi, &region, r, 0).unwrap();
        prop_assert!(q_hi >= q_lo * (2.0 * r).powf(lo - hi) * (1.0 - 1e-12));
    }
}
