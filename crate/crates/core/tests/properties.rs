use nalgebra::DMatrix;
use proptest::prelude::*;
use snr_geom::geometry::{pointwise_geometry, JetOptions, PointGeometry};
use snr_geom::immersion::{catalog, SurfaceParams};
use snr_geom::inequalities::main_integrand;
use snr_geom::quadrature::{build_grid, integrate, Axis, ParameterDomain};
use snr_geom::survey::NodeRecord;
use snr_geom::variational::{huisken_slack, matrix_lemma_check, simons_terms};
use std::f64::consts::{PI, TAU};

fn rotation(angles: &[f64], k: usize) -> DMatrix<f64> {
    // Product of plane rotations in coordinates (i, i+1).
    let mut q = DMatrix::identity(k, k);
    for (i, &a) in angles.iter().enumerate().take(k.saturating_sub(1)) {
        let mut g = DMatrix::identity(k, k);
        let (s, c) = a.sin_cos();
        g[(i, i)] = c;
        g[(i + 1, i + 1)] = c;
        g[(i, i + 1)] = -s;
        g[(i + 1, i)] = s;
        q = g * q;
    }
    q
}

fn invariants(pg: &PointGeometry) -> Vec<f64> {
    let r = NodeRecord::from_geometry(pg).unwrap();
    let s = simons_terms(pg).unwrap();
    vec![
        r.sigma2,
        r.phi2,
        r.phi_h,
        r.phi_n,
        r.n_dot_h,
        main_integrand(&r),
        s.rhs(),
        s.cubic,
        s.quartic,
        s.phi_t,
        huisken_slack(pg).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn normal_frame_gauge_invariance(
        u in 0.2f64..2.9,
        v in 0.0f64..TAU,
        angles in proptest::collection::vec(-3.0f64..3.0, 4),
        flip in any::<bool>(),
    ) {
        let params = SurfaceParams { n: Some(5), ..SurfaceParams::default() };
        for name in ["graph_torus", "small_sphere", "veronese"] {
            let imm = catalog(name, &params).unwrap();
            let pg = pointwise_geometry(&imm, &[u, v], 4, JetOptions::default()).unwrap();
            let k = pg.codim();
            let mut q = rotation(&angles, k);
            if flip {
                q.row_mut(0).neg_mut();
            }
            let rotated = pg.with_normal_rotation(&q).unwrap();
            for (a, b) in invariants(&pg).iter().zip(invariants(&rotated)) {
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{name}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn matrix_inequality_holds(
        m in 1usize..=5,
        entries in proptest::collection::vec(-2.0f64..2.0, 6 * 25),
        p in 2usize..=6,
    ) {
        let family: Vec<DMatrix<f64>> = (0..p)
            .map(|k| {
                let mut b = DMatrix::zeros(m, m);
                for i in 0..m {
                    for j in i..m {
                        let x = entries[k * 25 + i * 5 + j];
                        b[(i, j)] = x;
                        b[(j, i)] = x;
                    }
                }
                b
            })
            .collect();
        let r = matrix_lemma_check(&family).unwrap();
        prop_assert!(r.slack >= -1e-12 * (1.0 + r.rhs));
        // Both sides are homogeneous of degree four.
        let scaled: Vec<_> = family.iter().map(|b| b * 3.0).collect();
        let s = matrix_lemma_check(&scaled).unwrap();
        prop_assert!((s.lhs - 81.0 * r.lhs).abs() <= 1e-9 * (1.0 + s.lhs));
    }

    #[test]
    fn catalog_points_satisfy_constraint(u in 0.0f64..PI, v in 0.0f64..TAU, t0 in -5.0f64..5.0) {
        let params = SurfaceParams { t0: Some(t0), ..SurfaceParams::default() };
        for name in ["slice_sphere", "clifford_torus", "veronese", "small_sphere", "graph_torus"] {
            let imm = catalog(name, &params).unwrap();
            let x = imm.evaluate(&[u, v]).unwrap();
            prop_assert!(x.constraint_defect() < 1e-12);
        }
    }

    #[test]
    fn periodic_rule_integrates_trig_polynomials(k in 0i32..15, phase in 0.0f64..TAU) {
        let domain = ParameterDomain::new(vec![Axis::periodic(0.0, TAU)]).unwrap();
        let grid = build_grid(&domain, &[32]).unwrap();
        let f: Vec<f64> = grid.nodes().iter().map(|p| (k as f64 * p[0] + phase).cos()).collect();
        let ones = vec![1.0; f.len()];
        let want = if k == 0 { TAU * phase.cos() } else { 0.0 };
        prop_assert!((integrate(&grid, &f, &ones).unwrap() - want).abs() < 1e-12);
    }
}
