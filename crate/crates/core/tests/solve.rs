use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use stablemix::local::{make_coefficient, CoefficientField};
use stablemix::measure::catalog;
use stablemix::solve::{
    build_barrier, check_max_principle, comparison_vlambda, concavity_check, contraction_map, max_principle_control,
    solve_direct, solve_picard, solve_resolvent, standard_barrier_grid, MixedProblem, MixedSystem,
};
use stablemix::{Exterior, Field, GridDomain, OperatorSpec, Shape, SpectralMeasure};

fn disc_grid(n: usize) -> Arc<GridDomain> {
    Arc::new(GridDomain::new(2, 1.0, n, Shape::Ball { center: [0.0, 0.0], radius: 0.8 }).unwrap())
}

fn problem(spec: Option<OperatorSpec>, coef: Option<CoefficientField>, grid: &Arc<GridDomain>, f: Field) -> MixedProblem {
    MixedProblem {
        spec,
        coef,
        grid: grid.clone(),
        f,
        lambda_shift: 0.0,
    }
}

#[test]
fn five_point_poisson_matches_dense_lu() {
    let g = Arc::new(GridDomain::full_box(2, 1.0, 17).unwrap());
    let a = CoefficientField::constant(&g, 1.0).unwrap();
    let f = Field::from_fn(&g, Exterior::ZERO, |p| (3.0 * p[0]).sin() + p[1] * p[1]).restricted_to_omega();
    let out = solve_direct(&problem(None, Some(a), &g, f.clone())).unwrap();

    // textbook 5-point matrix on the 15×15 interior nodes
    let m = 15;
    let h = g.spacing();
    let mut mat = DMatrix::<f64>::zeros(m * m, m * m);
    let mut rhs = DVector::<f64>::zeros(m * m);
    for j in 0..m {
        for i in 0..m {
            let r = i + m * j;
            mat[(r, r)] = 4.0 / (h * h);
            if i > 0 {
                mat[(r, r - 1)] = -1.0 / (h * h);
            }
            if i + 1 < m {
                mat[(r, r + 1)] = -1.0 / (h * h);
            }
            if j > 0 {
                mat[(r, r - m)] = -1.0 / (h * h);
            }
            if j + 1 < m {
                mat[(r, r + m)] = -1.0 / (h * h);
            }
            rhs[r] = f.values[g.index(i + 1, j + 1)];
        }
    }
    let exact = mat.lu().solve(&rhs).unwrap();
    let scale = exact.amax();
    for j in 0..m {
        for i in 0..m {
            let e = (out.u.values[g.index(i + 1, j + 1)] - exact[i + m * j]).abs();
            assert!(e <= 1e-10 * scale.max(1.0), "({i},{j}): {e:e}");
        }
    }
}

#[test]
fn mixed_matrix_is_an_m_matrix() {
    let g = disc_grid(17);
    let a = make_coefficient("smooth-sine", 0.9, 0.5, 2.0, &g).unwrap();
    for m in catalog(2) {
        let spec = OperatorSpec::new(0.4, m.clone());
        let sys = MixedSystem::new(Some(&spec), Some(&a), &g, 0.0).unwrap();
        let dense = sys.dense_matrix();
        for (p, row) in dense.iter().enumerate() {
            assert!(row[p] > 0.0);
            for (q, &v) in row.iter().enumerate() {
                if p != q {
                    assert!(v <= 1e-14, "{}: entry ({p},{q}) = {v}", m.tag());
                }
            }
        }
        let sums = sys.row_sums();
        for (p, s) in sums.iter().enumerate() {
            assert!(*s >= -1e-9 * dense[p][p], "{}", m.tag());
            if sys.touches_exterior(p) {
                assert!(*s > 0.0);
            }
        }
    }
}

#[test]
fn residual_is_below_tolerance() {
    let g = disc_grid(33);
    let spec = OperatorSpec::new(0.5, SpectralMeasure::uniform(2, 1.0, 48));
    let a = make_coefficient("smooth-sine", 0.9, 0.5, 2.0, &g).unwrap();
    let f = Field::from_fn(&g, Exterior::ZERO, |p| 1.0 + p[0]).restricted_to_omega();
    let out = solve_direct(&problem(Some(spec), Some(a), &g, f.clone())).unwrap();
    assert!(out.residual_sup <= 1e-8 * (f.sup_norm() + 1.0));
    for k in 0..g.len() {
        if !g.in_omega(k) {
            assert_eq!(out.u.values[k], 0.0);
        }
    }
}

#[test]
fn zero_source_gives_zero() {
    let g = disc_grid(17);
    let spec = OperatorSpec::new(0.7, SpectralMeasure::axis_atomic(2));
    let out = solve_direct(&problem(Some(spec), None, &g, Field::zeros(&g))).unwrap();
    assert_eq!(out.u.sup_norm(), 0.0);
}

#[test]
fn constant_data_is_reproduced() {
    // 𝓔 1 = 0, so exterior data 1 with f = 0 must give u ≡ 1
    let g = Arc::new(GridDomain::new(1, 1.0, 65, Shape::Interval { lo: -0.5, hi: 0.5 }).unwrap());
    let spec = OperatorSpec::new(0.3, SpectralMeasure::axis_atomic(1));
    let a = CoefficientField::constant(&g, 1.5).unwrap();
    let sys = MixedSystem::new(Some(&spec), Some(&a), &g, 0.0).unwrap();
    let data = Field::from_fn(&g, Exterior::Constant(1.0), |_| 1.0);
    let (u, _, _) = sys.solve_with_data(&Field::zeros(&g), &data).unwrap();
    for k in g.omega_indices() {
        assert!((u.values[k] - 1.0).abs() < 1e-7);
    }
}

#[test]
fn picard_limit_solves_shifted_problem() {
    let g = Arc::new(GridDomain::new(1, 1.0, 65, Shape::Interval { lo: -0.6, hi: 0.6 }).unwrap());
    let spec = OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(1));
    let a = CoefficientField::constant(&g, 1.0).unwrap();
    let f = Field::from_fn(&g, Exterior::ZERO, |p| 1.0 - p[0]).restricted_to_omega();
    let mut p = problem(Some(spec), Some(a), &g, f);
    let picard = solve_picard(&p, 1e-11, 2000).unwrap();
    assert!(picard.contraction_ratios.iter().all(|&r| r < 1.0));
    p.lambda_shift = picard.lambda;
    let direct = solve_direct(&p).unwrap();
    let diff = stablemix::grid::max_abs_diff(&picard.u.values, &direct.u.values);
    assert!(diff <= 1e-8, "{diff:e}");
    // the fixed point satisfies T u = u
    let tu = contraction_map(&p, &picard.u).unwrap();
    assert!(stablemix::grid::max_abs_diff(&tu.values, &picard.u.values) <= 1e-10);
}

#[test]
fn resolvent_iteration_solves_unshifted_problem() {
    let g = Arc::new(GridDomain::new(1, 1.0, 65, Shape::Interval { lo: -0.6, hi: 0.6 }).unwrap());
    let spec = OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(1));
    let a = CoefficientField::constant(&g, 1.0).unwrap();
    let f = Field::from_fn(&g, Exterior::ZERO, |p| 1.0 + p[0] * p[0]).restricted_to_omega();
    let p = problem(Some(spec), Some(a), &g, f);
    let it = solve_resolvent(&p, 1.0, 1e-12, 5000).unwrap();
    let direct = solve_direct(&p).unwrap();
    assert!(stablemix::grid::max_abs_diff(&it.u.values, &direct.u.values) <= 1e-8);
}

#[test]
fn maximum_principle_holds_on_catalog() {
    let g = disc_grid(25);
    let a = make_coefficient("smooth-sine", 0.9, 0.5, 2.0, &g).unwrap();
    for m in catalog(2) {
        let spec = OperatorSpec::new(0.6, m.clone());
        let p = problem(Some(spec), Some(a.clone()), &g, Field::zeros(&g));
        let rep = check_max_principle(&p, 5, 7).unwrap();
        assert!(rep.pass, "{}: {:?}", m.tag(), rep.trials);
        let control = max_principle_control(&p, 7).unwrap();
        assert!(control.note.is_some());
    }
}

#[test]
fn barrier_is_a_supersolution_and_concave_near_omega() {
    for dim in [1, 2] {
        let g = standard_barrier_grid(dim, if dim == 1 { 129 } else { 33 }).unwrap();
        let spec = OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(dim));
        let b = build_barrier(&g, &spec, 1.0).unwrap();
        assert!(b.max_residual <= 1.0);
        assert!(concavity_check(&b, &g, 16, 8) <= 1e-12);
        for k in g.omega_indices() {
            let w = b.eval(g.coord(k), dim);
            assert!(w > 0.0 && w <= 1.0);
        }
    }
}

#[test]
fn vlambda_is_bounded_by_two_over_lambda() {
    let g = standard_barrier_grid(1, 129).unwrap();
    let spec = OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(1));
    let b = build_barrier(&g, &spec, 1.0).unwrap();
    for lambda in [0.5, 2.0, 8.0] {
        let rep = comparison_vlambda(&g, &spec, lambda, &b).unwrap();
        assert!(rep.pass, "{rep:?}");
    }
}

#[test]
fn negative_shift_is_rejected() {
    let g = disc_grid(9);
    let spec = OperatorSpec::new(0.5, SpectralMeasure::axis_atomic(2));
    assert!(MixedSystem::new(Some(&spec), None, &g, -1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn comparison_principle(seed in 0u64..1000, shift in 0.0..0.5f64) {
        // f ≥ g pointwise implies u_f ≥ u_g
        let g = Arc::new(GridDomain::new(1, 1.0, 49, Shape::Interval { lo: -0.7, hi: 0.7 }).unwrap());
        let spec = OperatorSpec::new(0.35, SpectralMeasure::axis_atomic(1));
        let a = make_coefficient("smooth-sine", 0.9, 0.5, 2.0, &g).unwrap();
        let sys = MixedSystem::new(Some(&spec), Some(&a), &g, 0.0).unwrap();
        let phase = seed as f64 * 0.1;
        let fg = Field::from_fn(&g, Exterior::ZERO, |p| (5.0 * p[0] + phase).sin()).restricted_to_omega();
        let ff = Field::from_fn(&g, Exterior::ZERO, |p| (5.0 * p[0] + phase).sin() + shift * (1.0 + p[0] * p[0])).restricted_to_omega();
        let (ug, _, _) = sys.solve(&fg).unwrap();
        let (uf, _, _) = sys.solve(&ff).unwrap();
        for k in g.omega_indices() {
            prop_assert!(uf.values[k] >= ug.values[k] - 1e-8);
        }
    }
}
