use nalgebra::{Vector1, Vector2, Vector3};
use pathflow::flow::FlowMode;
use pathflow::geometry::{Circle, FlatTorus, Geometry, Sphere2};
use pathflow::mcverify::{
    directional_derivative, ibp_check, mc_stats, qi_check, CylinderFunction, MCReport, QiOptions,
};
use pathflow::sde::{
    field_along_path, integrate_diffusion, integrate_linear_system, make_admissible_system,
    sample_brownian, CameronMartinPath, TimeGrid,
};

const SQRT_E_INV: f64 = 0.606_530_659_712_633_4;

fn within_3se_of_analytic(report: &MCReport) -> bool {
    let (lz, rz) = report.analytic_z().expect("analytic value set");
    lz.abs() <= 3.0 && rz.abs() <= 3.0
}

#[test]
fn directional_derivative_examples() {
    let geo = Geometry::new(Circle::default());
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let w = sample_brownian::<1>(&grid, 3, 0);
    let x = integrate_diffusion(&geo, &w).unwrap();
    let r = CameronMartinPath::constant(&grid, Vector1::new(1.0));
    let h = integrate_linear_system(&geo, &x, &w, &make_admissible_system(&geo, &r)).unwrap();
    let z = field_along_path(&geo, &x, &h);
    // sin(theta_T) is the second ambient coordinate
    let phi = CylinderFunction::ambient_linear(64, Vector2::new(0.0, 1.0));
    let end = x.endpoint();
    let expected = end[0] * h.values[64][0];
    assert!((directional_derivative(&geo, &phi, &x, &z) - expected).abs() < 1e-12);
    let zero = vec![Vector2::zeros(); 65];
    assert_eq!(directional_derivative(&geo, &phi, &x, &zero), 0.0);
}

#[test]
fn sphere_directional_derivative_matches_finite_difference() {
    let geo = Geometry::new(Sphere2::default());
    let grid = TimeGrid::default();
    let r = CameronMartinPath::constant(&grid, Vector3::new(1.0, 0.0, 0.0));
    let phi = CylinderFunction::ambient_linear(256, Vector3::z());
    for seed in 0..5 {
        let w = sample_brownian::<3>(&grid, seed, 0);
        let x = integrate_diffusion(&geo, &w).unwrap();
        let h = integrate_linear_system(&geo, &x, &w, &make_admissible_system(&geo, &r)).unwrap();
        let z = field_along_path(&geo, &x, &h);
        let eps = 1e-5;
        let end = *x.endpoint();
        let moved = |e: f64| {
            let p = geo.retract(&(end + z[256] * e), "test").unwrap();
            phi.value_at(&[p])
        };
        let fd = (moved(eps) - moved(-eps)) / (2.0 * eps);
        assert!((directional_derivative(&geo, &phi, &x, &z) - fd).abs() < 1e-4);
    }
}

#[test]
fn null_shift_gives_exact_zeros() {
    let geo = Geometry::new(Sphere2::default());
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let r = CameronMartinPath::zero(&grid);
    let phi = CylinderFunction::quadratic(64, nalgebra::Matrix3::identity());
    let ibp = ibp_check(&geo, &r, &phi, 200, 1).unwrap();
    assert_eq!(
        (ibp.lhs_mean, ibp.rhs_mean, ibp.diff_se, ibp.z),
        (0.0, 0.0, 0.0, 0.0)
    );
    assert!(ibp.pass);
    let qi = qi_check(&geo, &r, &phi, &QiOptions::new(0.25, 0.0625), 200, 1).unwrap();
    assert_eq!((qi.diff_mean, qi.diff_se, qi.z), (0.0, 0.0, 0.0));
}

#[test]
fn zero_flow_time_pairs_agree_pathwise() {
    let geo = Geometry::new(Sphere2::default());
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let r = CameronMartinPath::constant(&grid, Vector3::new(1.0, 0.0, 0.0));
    let phi = CylinderFunction::ambient_linear(64, Vector3::z());
    let qi = qi_check(&geo, &r, &phi, &QiOptions::new(0.0, 0.0125), 300, 2).unwrap();
    assert_eq!((qi.diff_mean, qi.diff_se, qi.z), (0.0, 0.0, 0.0));
    assert!(qi.pass);
}

#[test]
fn too_few_samples_are_rejected() {
    let geo = Geometry::new(Circle::default());
    let grid = TimeGrid::new(1.0, 16).unwrap();
    let r = CameronMartinPath::zero(&grid);
    let phi = CylinderFunction::ambient_linear(16, Vector2::new(0.0, 1.0));
    assert!(matches!(
        ibp_check(&geo, &r, &phi, 99, 0),
        Err(pathflow::Error::TooFewSamples {
            required: 100,
            got: 99
        })
    ));
}

#[test]
fn circle_ibp_reproduces_the_gaussian_oracle() {
    let geo = Geometry::new(Circle::default());
    let grid = TimeGrid::default();
    let r = CameronMartinPath::constant(&grid, Vector1::new(1.0));
    let phi = CylinderFunction::ambient_linear(256, Vector2::new(0.0, 1.0));
    let mut passes = 0;
    for seed in 0..10 {
        let report = ibp_check(&geo, &r, &phi, 20_000, seed)
            .unwrap()
            .with_analytic(SQRT_E_INV);
        if report.pass && within_3se_of_analytic(&report) {
            passes += 1;
        }
    }
    assert!(passes >= 9, "{passes} of 10 seeds passed");
}

#[test]
fn torus_qi_reproduces_the_shifted_law() {
    let geo = Geometry::new(FlatTorus::<2>::default());
    let grid = TimeGrid::default();
    let c = Vector2::new(1.0, 1.0) / 2f64.sqrt();
    let r = CameronMartinPath::constant(&grid, c);
    let phi = CylinderFunction::cosine(256, Vector2::new(1.0, 0.0), 0.0);
    let s = 0.5;
    let analytic = (s * c[0]).cos() * SQRT_E_INV;
    let report = qi_check(&geo, &r, &phi, &QiOptions::new(s, 1.0 / 80.0), 4000, 11)
        .unwrap()
        .with_analytic(analytic);
    assert!(report.pass, "{report:?}");
    assert!(within_3se_of_analytic(&report), "{report:?}");
}

#[test]
fn sphere_ibp_is_self_consistent() {
    let geo = Geometry::new(Sphere2::default());
    let grid = TimeGrid::default();
    let r = CameronMartinPath::constant(&grid, Vector3::new(1.0, 0.0, 0.0));
    let phi = CylinderFunction::ambient_linear(256, Vector3::x());
    let report = ibp_check(&geo, &r, &phi, 20_000, 3).unwrap();
    assert!(report.pass, "{report:?}");
    // <e1, x_T> is sensitive to the shift, so the identity is not trivially 0 = 0
    assert!(report.lhs_mean.abs() > 5.0 * report.lhs_se, "{report:?}");
}

#[test]
fn sphere_qi_with_bias_estimate() {
    let geo = Geometry::new(Sphere2::default());
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let r = CameronMartinPath::constant(&grid, Vector3::new(1.0, 0.0, 0.0));
    let phi = CylinderFunction::ambient_linear(128, Vector3::z());
    let opts = QiOptions {
        bias_halving: true,
        mode: FlowMode::Heun,
        ..QiOptions::new(0.25, 1.0 / 40.0)
    };
    let report = qi_check(&geo, &r, &phi, &opts, 1000, 5).unwrap();
    assert!(report.bias.is_some());
    assert!(report.pass, "{report:?}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let geo = Geometry::new(Sphere2::default());
    let grid = TimeGrid::new(1.0, 64).unwrap();
    let r = CameronMartinPath::constant(&grid, Vector3::new(0.5, 1.0, 0.0));
    let phi = CylinderFunction::monomial(64, [1, 1, 0]);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let mut report = pool.install(|| ibp_check(&geo, &r, &phi, 500, 9)).unwrap();
        report.wall_time = 0.0;
        report
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn sample_order_does_not_change_means() {
    let pairs: Vec<(f64, f64)> = (0..1000)
        .map(|i| {
            let t = f64::from(i);
            ((t * 0.37).sin() * 1e3, (t * 1.3).cos())
        })
        .collect();
    let mut shuffled = pairs.clone();
    shuffled.reverse();
    shuffled.rotate_left(377);
    let (a, b) = (mc_stats(&pairs).unwrap(), mc_stats(&shuffled).unwrap());
    assert!((a.lhs_mean - b.lhs_mean).abs() < 1e-12);
    assert!((a.rhs_mean - b.rhs_mean).abs() < 1e-12);
    assert!((a.diff_mean - b.diff_mean).abs() < 1e-12);
}
