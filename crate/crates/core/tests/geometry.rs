use nalgebra::{Matrix3, Vector3};
use pathflow::geometry::{
    check_axioms, check_closed_forms, check_frame_metric, so3_flatten, Circle, FieldMatrix,
    FlatTorus, Geometry, GeometryCache, Manifold, NumericOnly, Point, ScaledFrame, So3, Sphere2,
    TangentVector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tangent<const D: usize>(x: Point<D>, v: Point<D>) -> TangentVector<D> {
    TangentVector { base: x, vec: v }
}

#[test]
fn sphere_projection_examples() {
    let geo = Geometry::new(Sphere2::default());
    let pole = Vector3::new(0.0, 0.0, 1.0);
    let normal = geo.tangent_project(&pole, &pole).unwrap();
    assert_eq!(normal.vec, Vector3::zeros());
    let e1 = Vector3::new(1.0, 0.0, 0.0);
    assert_eq!(geo.tangent_project(&pole, &e1).unwrap().vec, e1);
}

#[test]
fn torus_projection_is_identity() {
    let geo = Geometry::new(FlatTorus::<2>::default());
    let x = Point::<2>::new(0.3, 5.0);
    let v = Point::<2>::new(-1.5, 2.0);
    assert_eq!(geo.tangent_project(&x, &v).unwrap().vec, v);
}

#[test]
fn off_manifold_point_is_rejected() {
    let geo = Geometry::new(Sphere2::default());
    let err = geo
        .tangent_project(&Vector3::new(0.0, 0.0, 1.1), &Vector3::x())
        .unwrap_err();
    assert!(matches!(err, pathflow::Error::ConstraintViolation { .. }));
}

#[test]
fn projection_is_idempotent() {
    let geo = Geometry::new(So3::default());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let x = geo.manifold().sample_point(&mut rng);
        let v = geo.manifold().sample_point(&mut rng);
        let once = geo.project(&x, &v);
        let twice = geo.project(&x, &once);
        assert!((once - twice).amax() < 1e-14);
    }
}

#[test]
fn metric_inverse_examples() {
    let sphere = Geometry::new(Sphere2::default());
    let g = sphere.metric_inverse(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
    assert_eq!(g, Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)));

    let torus = Geometry::new(FlatTorus::<2>::default());
    assert_eq!(
        torus.metric_inverse(&Point::<2>::new(1.0, 2.0)).unwrap(),
        nalgebra::Matrix2::identity()
    );

    let so3 = Geometry::new(So3::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = so3.manifold().sample_point(&mut rng);
    let g = so3.metric_inverse(&x).unwrap();
    assert!((g - so3.manifold().projector(&x)).amax() < 1e-12);
}

#[test]
fn degenerate_frame_fails_ellipticity() {
    let geo = Geometry::new(ScaledFrame {
        inner: Sphere2::default(),
        factor: 0.0,
    });
    let err = geo
        .metric_inverse(&Vector3::new(0.0, 0.0, 1.0))
        .unwrap_err();
    assert!(matches!(err, pathflow::Error::Ellipticity { .. }));
}

#[test]
fn flat_torus_geometry_vanishes() {
    let geo = Geometry::new(NumericOnly(FlatTorus::<2>::default()));
    let x = Point::<2>::new(0.7, -2.0);
    let v = Point::<2>::new(0.4, 1.1);
    assert!(geo.omega_matrix(&x, &v).amax() < 1e-12);
    assert!(geo.b_matrix(&x).amax() < 1e-12);
    assert!(geo.ricci(&x, &tangent(x, v)).vec.amax() < 1e-12);
    let constant = |_: &Point<2>| Point::<2>::new(3.0, -1.0);
    assert!(geo.covariant_derivative(&x, &v, constant).vec.amax() < 1e-12);
}

#[test]
fn sphere_frame_is_critical_at_the_pole() {
    // Brute force: central difference of P(x) e_1 along X_1, then projection.
    let geo = Geometry::new(NumericOnly(Sphere2::default()));
    let pole = Vector3::new(0.0, 0.0, 1.0);
    let x1 = geo.frame(&pole).column(0).into_owned();
    let nabla = geo.covariant_derivative(&pole, &x1, |p| {
        let p = p / p.norm();
        Vector3::x() - p * p[0]
    });
    assert!(nabla.vec.norm() < 1e-10);
    assert!(geo.connection(&pole)[0].column(0).norm() < 1e-10);
}

#[test]
fn analytic_frame_derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sphere = Sphere2 { drift: 0.7 };
    let so3 = So3 { drift: -0.4 };
    for _ in 0..20 {
        let x = sphere.sample_point(&mut rng);
        let v = sphere.project(&x, &Vector3::new(0.3, -1.2, 0.5));
        let a = Geometry::new(sphere.clone());
        let n = Geometry::new(NumericOnly(sphere.clone()));
        assert!((a.frame_covariant(&x, &v) - n.frame_covariant(&x, &v)).amax() < 1e-8);
        assert!((a.drift_covariant(&x, &v) - n.drift_covariant(&x, &v)).amax() < 1e-8);

        let r = so3.sample_point(&mut rng);
        let w = so3.project(&r, &so3.sample_point(&mut rng));
        let a = Geometry::new(so3.clone());
        let n = Geometry::new(NumericOnly(so3.clone()));
        assert!((a.frame_covariant(&r, &w) - n.frame_covariant(&r, &w)).amax() < 1e-8);
        assert!((a.drift_covariant(&r, &w) - n.drift_covariant(&r, &w)).amax() < 1e-8);
    }
}

#[test]
fn closed_form_b_and_ricci_match_numeric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sphere = Geometry::new(NumericOnly(Sphere2::default()));
    let so3 = Geometry::new(NumericOnly(So3::default()));
    let circle = Geometry::new(NumericOnly(Circle::default()));
    for _ in 0..10 {
        let x = sphere.manifold().sample_point(&mut rng);
        let b = sphere.b_matrix(&x);
        assert!(b.amax() < 1e-6, "sphere B = {b}");
        let v = sphere.project(&x, &Vector3::new(0.2, 0.9, -0.4));
        let ric = sphere.ricci_numeric(&x, &v);
        assert!((ric - v).norm() < 1e-6, "sphere Ric(v) - v = {}", ric - v);

        let r = so3.manifold().sample_point(&mut rng);
        let b = so3.b_matrix(&r);
        assert!(
            (b - FieldMatrix::<3>::identity() * 0.125).amax() < 1e-6,
            "so3 B = {b}"
        );
        let w = so3.project(&r, &so3.manifold().sample_point(&mut rng));
        let ric = so3.ricci_numeric(&r, &w);
        assert!(
            (ric - w * 0.25).norm() < 1e-6,
            "so3 Ric(w) - w/4 = {}",
            ric - w * 0.25
        );

        let c = circle.manifold().sample_point(&mut rng);
        assert!(circle.b_matrix(&c).amax() < 1e-6);
    }
}

#[test]
fn b_terms_sum_to_total() {
    let geo = Geometry::new(NumericOnly(Sphere2::default()));
    let x = Vector3::new(0.48, -0.6, 0.64);
    for j in 0..3 {
        for k in 0..3 {
            let terms = geo.b_terms(&x, j, k).unwrap();
            let total = geo.b_coeff(&x, j, k).unwrap();
            assert!((terms.total() - total).abs() < 1e-12);
        }
    }
    assert!(matches!(
        geo.b_coeff(&x, 3, 0),
        Err(pathflow::Error::IndexOutOfRange { index: 3, n: 3 })
    ));
}

#[test]
fn b_is_consistent_under_step_halving() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let coarse = Geometry::new(NumericOnly(Sphere2 { drift: 0.0 }));
    let fine = Geometry::with_cache(
        NumericOnly(Sphere2 { drift: 0.0 }),
        GeometryCache::new(0.5e-5, 0.5e-4, false).unwrap(),
    );
    for _ in 0..20 {
        let x = coarse.manifold().sample_point(&mut rng);
        assert!((coarse.b_matrix(&x) - fine.b_matrix(&x)).amax() < 1e-5);
    }
}

#[test]
fn omega_examples() {
    let sphere = Geometry::new(NumericOnly(Sphere2::default()));
    let x = Vector3::new(1.0, 0.0, 1.0) / 2f64.sqrt();
    let f = sphere.frame(&x);
    for j in 0..3 {
        let xj = f.column(j).into_owned();
        assert!(sphere.omega_form(&x, j, j, &tangent(x, xj)).unwrap().abs() < 1e-9);
    }
    // Independent brute force: both defining terms by separate central
    // differences of the frame formula.
    let x1 = f.column(0).into_owned();
    let h = 1e-5;
    let field = |k: usize| {
        move |p: &Vector3<f64>| {
            let p = p / p.norm();
            let mut e = Vector3::zeros();
            e[k] = 1.0;
            e - p * p[k]
        }
    };
    let ambient_dir = |k: usize, dir: &Vector3<f64>| {
        let fk = field(k);
        (fk(&(x + dir * h)) - fk(&(x - dir * h))) / (2.0 * h)
    };
    let p = Matrix3::identity() - x * x.transpose();
    let nabla_x1_x2 = p * ambient_dir(1, &x1);
    let nabla_v_x1 = p * ambient_dir(0, &x1);
    let oracle = nabla_x1_x2.dot(&x1) - nabla_v_x1.dot(&f.column(1));
    let value = sphere.omega_form(&x, 0, 1, &tangent(x, x1)).unwrap();
    assert!((value - oracle).abs() < 1e-6, "{value} vs {oracle}");
}

#[test]
fn closed_form_omegas_match_the_connection_table() {
    fn check<M: Manifold<D, N>, const D: usize, const N: usize>(geo: Geometry<M, D, N>) {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let x = geo.manifold().sample_point(&mut rng);
            let v = geo.project(&x, &geo.manifold().sample_point(&mut rng));
            let closed = geo
                .manifold()
                .omega(&x, &v)
                .expect("built-ins have a closed form");
            assert!((closed - geo.omega_numeric(&x, &v)).amax() < 1e-8);
        }
    }
    check(Geometry::new(Sphere2::default()));
    check(Geometry::new(So3::default()));
    check(Geometry::new(FlatTorus::<2>::default()));
    check(Geometry::new(Circle::default()));
}

#[test]
fn frame_metric_check_examples() {
    let sphere = check_frame_metric(&Geometry::new(Sphere2::default()), 200, 1);
    assert!(sphere.pass, "{sphere:?}");
    let torus = check_frame_metric(&Geometry::new(FlatTorus::<2>::default()), 50, 1);
    assert!(torus.pass && torus.max_discrepancy == 0.0);
    let so3 = check_frame_metric(&Geometry::new(So3::default()), 200, 1);
    assert!(so3.pass, "{so3:?}");
    let scaled = check_frame_metric(
        &Geometry::new(ScaledFrame {
            inner: Sphere2::default(),
            factor: 2.0,
        }),
        50,
        1,
    );
    assert!(!scaled.pass);
    assert!(scaled.ensure().is_err());
}

#[test]
fn connection_axioms_hold_on_curved_builtins() {
    for report in [
        check_axioms(&Geometry::new(Sphere2::default()), 100, 2),
        check_axioms(&Geometry::new(NumericOnly(Sphere2::default())), 100, 2),
    ] {
        assert!(report.pass(), "{report:?}");
    }
    let so3 = check_axioms(&Geometry::new(So3 { drift: 0.3 }), 100, 3);
    assert!(so3.pass(), "{so3:?}");
}

#[test]
fn memoized_geometry_is_bit_identical() {
    let plain = Geometry::new(So3::default());
    let cached = Geometry::with_cache(
        So3::default(),
        GeometryCache::new(1e-5, 1e-4, true).unwrap(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = plain.manifold().sample_point(&mut rng);
    let first = cached.connection(&x);
    let second = cached.connection(&x);
    assert_eq!(cached.cache().len(), 1);
    assert_eq!(first, second);
    assert_eq!(first, plain.connection(&x));
    assert_eq!(cached.b_matrix_numeric(&x), plain.b_matrix_numeric(&x));
}

#[test]
fn tiny_finite_difference_step_is_a_configuration_error() {
    let err = GeometryCache::<3, 3>::new(1e-14, 1e-4, false).unwrap_err();
    assert!(matches!(err, pathflow::Error::FiniteDifference(_)));
}

#[test]
fn so3_flatten_is_row_major() {
    let m = Matrix3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0);
    let x = so3_flatten(&m);
    assert_eq!(x[1], 2.0);
    assert_eq!(x[3], 4.0);
}

#[test]
fn closed_forms_agree_with_the_numeric_calculus() {
    let sphere = check_closed_forms(&Geometry::new(Sphere2::default()), 20, 4);
    assert!(sphere.ricci.unwrap() < 1e-6, "{sphere:?}");
    assert!(sphere.b_matrix.unwrap() < 1e-6, "{sphere:?}");
    assert!(sphere.omega.unwrap() < 1e-8, "{sphere:?}");
    let so3 = check_closed_forms(&Geometry::new(So3::default()), 5, 4);
    assert!(
        so3.ricci.unwrap() < 1e-6 && so3.b_matrix.unwrap() < 1e-6,
        "{so3:?}"
    );
    let numeric = check_closed_forms(&Geometry::new(NumericOnly(Sphere2::default())), 5, 4);
    assert_eq!(
        (numeric.ricci, numeric.b_matrix, numeric.omega),
        (None, None, None)
    );
}

#[test]
fn connection_trace_sums_the_diagonal_of_the_table() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sphere = Geometry::new(Sphere2 { drift: 0.3 });
    let numeric = Geometry::new(NumericOnly(Sphere2 { drift: 0.3 }));
    let so3 = Geometry::new(So3::default());
    for _ in 0..10 {
        let x = sphere.manifold().sample_point(&mut rng);
        let table: Point<3> = (0..3)
            .map(|i| sphere.connection(&x)[i].column(i).into_owned())
            .sum();
        assert!((sphere.connection_trace(&x) - table).norm() < 1e-14);
        assert!((numeric.connection_trace(&x) - table).norm() < 1e-8);
        // nabla_{X_i} X_i = -x_i X_i, and sum_i x_i X_i = 0
        assert!(table.norm() < 1e-14);

        let r = so3.manifold().sample_point(&mut rng);
        let table: Point<9> = (0..3)
            .map(|i| so3.connection(&r)[i].column(i).into_owned())
            .sum();
        assert!((so3.connection_trace(&r) - table).norm() < 1e-14);
    }
}

#[test]
fn vanishing_drift_is_reported() {
    assert!(Sphere2::default().drift_vanishes());
    assert!(!Sphere2 { drift: 0.1 }.drift_vanishes());
    assert!(NumericOnly(FlatTorus::<2>::default()).drift_vanishes());
    assert!(!So3 { drift: -0.4 }.drift_vanishes());
    assert!(!(Circle { drift: 1.0 }).drift_vanishes());
}
