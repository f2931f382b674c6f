use nalgebra::{DMatrix, DVector, Rotation3, UnitQuaternion, Vector3, Vector6};
use proptest::prelude::*;

use flowservo::camera::{project, Intrinsics};
use flowservo::control::{clamp_twist, lm_velocity, point_interaction, ControllerConfig, InteractionMatrix};
use flowservo::observation::flo::{read_flo, write_flo};
use flowservo::observation::pfm::{read_pfm, write_pfm};
use flowservo::observation::{DepthMap, FlowField};
use flowservo::se3::{exp_twist, log_pose, pose_error, Pose, Twist};

fn vec3(r: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn twist(lin: f64, ang: f64) -> impl Strategy<Value = Twist> {
    (vec3(lin), vec3(ang)).prop_map(|(v, w)| Twist::new(v, w))
}

fn pose() -> impl Strategy<Value = Pose> {
    (vec3(1.0), 0.0..3.1f64, vec3(5.0)).prop_map(|(axis, angle, t)| Pose::from_axis_angle(&axis, angle, t))
}

fn max_abs_diff(a: &Pose, b: &Pose) -> f64 {
    let r = (a.rotation() - b.rotation()).abs().max();
    let t = (a.translation() - b.translation()).abs().max();
    r.max(t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn exp_log_round_trip(xi in twist(3.0, 1.75)) {
        // Rotation angles stay below pi so the principal log is the inverse.
        prop_assume!(xi.angular.norm() < 3.0);
        let back = log_pose(&exp_twist(&xi, 1.0).unwrap()).unwrap();
        prop_assert!((back.to_vector() - xi.to_vector()).abs().max() < 1e-9);
    }

    #[test]
    fn exp_matches_quaternion_oracle(xi in twist(2.0, 1.5)) {
        let p = exp_twist(&xi, 1.0).unwrap();
        let q = UnitQuaternion::from_scaled_axis(xi.angular);
        prop_assert!((p.rotation() - q.to_rotation_matrix().matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn composition_and_inverse(a in pose(), b in pose(), p in vec3(10.0)) {
        let ab = a * b;
        let direct = a.transform_point(&b.transform_point(&p));
        prop_assert!((ab.transform_point(&p) - direct).norm() < 1e-10);
        prop_assert!(max_abs_diff(&(a * a.inverse()), &Pose::identity()) < 1e-12);
        prop_assert!((a.inverse_transform_point(&a.transform_point(&p)) - p).norm() < 1e-10);
    }

    #[test]
    fn pose_error_is_symmetric_and_invariant(a in pose(), b in pose(), g in pose()) {
        prop_assert_eq!(pose_error(&a, &b), pose_error(&b, &a));
        let (t, r) = pose_error(&a, &b);
        prop_assert!(t >= 0.0 && (0.0..=180.0).contains(&r));
        // Left-multiplying both poses keeps the rotation angle.
        let (_, r2) = pose_error(&(g * a), &(g * b));
        prop_assert!((r - r2).abs() < 1e-6);
    }

    #[test]
    fn project_unproject(u in -0.5..127.49f64, v in -0.5..127.49f64, z in 0.05..50.0f64) {
        let k = Intrinsics::default();
        let p = k.unproject(u, v, z);
        let back = project(&p, &k).unwrap();
        prop_assert!((back.x - u).abs() < 1e-9 && (back.y - v).abs() < 1e-9);
        prop_assert!(k.contains(back.x, back.y));
    }

    #[test]
    fn interaction_matrix_matches_finite_differences(
        x in -0.7..0.7f64, y in -0.7..0.7f64, z in 0.3..12.0f64,
        d in (vec3(1.0), vec3(1.0)),
    ) {
        let dir = Twist::new(d.0, d.1).to_vector();
        prop_assume!(dir.norm() > 1e-3);
        let delta = dir.normalize() * 1e-6;
        let l = point_interaction(x, y, z).unwrap();
        let predicted = l * delta;
        let k = Intrinsics::new(1.0, 1.0, 0.0, 0.0, 2, 2).unwrap();
        let p = Vector3::new(x * z, y * z, z);
        let moved = |s: f64| {
            let camera = exp_twist(&Twist::from_vector(&(delta * s)), 1.0).unwrap();
            project(&camera.inverse_transform_point(&p), &k).unwrap()
        };
        let fd = (moved(1.0) - moved(-1.0)) / 2.0;
        let err = ((fd.x - predicted[0]).powi(2) + (fd.y - predicted[1]).powi(2)).sqrt() / predicted.norm();
        prop_assert!(err < 1e-3, "relative error {}", err);
    }

    #[test]
    fn clamp_bounds_are_exact(xi in twist(50.0, 50.0), vmax in 0.01..2.0f64, wmax in 0.01..2.0f64) {
        let c = clamp_twist(&xi, vmax, wmax);
        prop_assert!(c.linear.norm() <= vmax);
        prop_assert!(c.angular.norm() <= wmax);
        // Direction is preserved.
        let (a, b) = (c.to_vector(), xi.to_vector());
        prop_assert!((a.normalize() - b.normalize()).norm() < 1e-12 || b.norm() == 0.0);
    }
}

fn random_system(seed: u64, rows: usize) -> (InteractionMatrix, DVector<f64>) {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let matrix = DMatrix::from_fn(rows, 6, |_, _| next());
    let e = DVector::from_fn(rows, |_, _| next() * 0.1);
    (
        InteractionMatrix {
            matrix,
            nodes: (0..rows).collect(),
            rows_per_node: 1,
        },
        e,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn lm_output_respects_bounds_and_zero_error(seed in any::<u64>(), rows in 6usize..60) {
        let (l, e) = random_system(seed, rows);
        let cfg = ControllerConfig::default();
        match lm_velocity(&l, &e, &cfg) {
            Ok(v) => {
                prop_assert!(v.linear.norm() <= cfg.max_linear && v.angular.norm() <= cfg.max_angular);
                let zero = lm_velocity(&l, &DVector::zeros(rows), &cfg).unwrap();
                prop_assert_eq!(zero.to_vector(), Vector6::zeros());
            }
            Err(flowservo::Error::IllConditioned { .. }) => {}
            Err(other) => prop_assert!(false, "unexpected {:?}", other),
        }
    }

    #[test]
    fn damping_interpolates_between_gauss_newton_and_gradient(seed in any::<u64>()) {
        let (l, e) = random_system(seed, 30);
        let free = ControllerConfig { max_linear: 1e12, max_angular: 1e12, ..Default::default() };
        let h = l.matrix.transpose() * &l.matrix;
        let g = l.matrix.transpose() * &e;
        let grad = Vector6::from_fn(|i, _| -g[i] / h[(i, i)]);
        let v = lm_velocity(&l, &e, &ControllerConfig { mu: 1e6, ..free }).unwrap().to_vector();
        prop_assert!(v.dot(&grad) / (v.norm() * grad.norm()) >= 0.9998);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn flo_round_trip(w in 1usize..24, h in 1usize..24, vals in prop::collection::vec((any::<bool>(), -500.0f32..500.0, -500.0f32..500.0), 576)) {
        let mut f = FlowField::invalid(w, h);
        for (i, &(valid, u, v)) in vals.iter().take(w * h).enumerate() {
            if valid {
                f.set(i, [u as f64, v as f64]).unwrap();
            }
        }
        let bytes = write_flo(&f);
        prop_assert_eq!(bytes.len(), 12 + 8 * w * h);
        let back = read_flo(&bytes).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(write_flo(&back), bytes);
    }

    #[test]
    fn pfm_round_trip(w in 1usize..24, h in 1usize..24, vals in prop::collection::vec(prop_oneof![Just(0.0f32), 0.01f32..100.0], 576)) {
        let mut d = DepthMap::invalid(w, h);
        for (i, z) in vals.iter().take(w * h).enumerate() {
            d.set(i, *z as f64);
        }
        let bytes = write_pfm(&d);
        let back = read_pfm(&bytes).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(write_pfm(&back), bytes);
    }

    #[test]
    fn flo_truncation_always_rejected(w in 1usize..8, h in 1usize..8, cut in 1usize..64) {
        let bytes = write_flo(&FlowField::uniform(w, h, 0.5, -0.5));
        let cut = cut.min(bytes.len());
        let r = read_flo(&bytes[..bytes.len() - cut]);
        prop_assert!(matches!(r, Err(flowservo::Error::Format { .. })), "{:?}", r);
    }
}

#[test]
fn near_pi_log_recovers_axis() {
    for (i, axis) in [Vector3::x(), Vector3::new(1.0, 1.0, 0.0), Vector3::new(-0.3, 0.2, 0.9)].iter().enumerate() {
        for eps in [0.0, 1e-12, 1e-8, 1e-5] {
            let angle = std::f64::consts::PI - eps;
            let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle);
            let p = Pose::new(*r.matrix(), Vector3::new(0.1 * i as f64, 0.0, 1.0)).unwrap();
            let back = exp_twist(&log_pose(&p).unwrap(), 1.0).unwrap();
            assert!(max_abs_diff(&back, &p) < 1e-7, "axis {axis:?} eps {eps}");
        }
    }
}
