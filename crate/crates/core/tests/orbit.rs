mod common;

use lpke::orbit::*;
use nalgebra::{Vector2, Vector3};
use proptest::prelude::*;
use std::f64::consts::{PI, TAU};
use std::time::Instant;

fn leo(ecc: f64, theta0: f64) -> OrbitModel<f64> {
    OrbitModel::from_semi_major_axis(7.0e6, ecc, GM_EARTH, theta0, false).unwrap()
}

#[test]
fn kepler_residual_grid() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for &e in &[0.0, 0.1, 0.2, 0.7, 0.9] {
        for k in 0..64 {
            let m = -PI + TAU * k as f64 / 64.0;
            let ea = solve_kepler(m, e);
            worst = worst.max((ea - e * ea.sin() - m).abs());
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst < 1e-13, "residual {worst:e}");
    assert!(elapsed < 0.1, "took {elapsed}s");
}

#[test]
fn kepler_is_continuous_across_turns() {
    for &e in &[0.0, 0.3, 0.95] {
        for k in -3..=3 {
            let m = 1.0 + TAU * k as f64;
            let ea = solve_kepler(m, e);
            assert!((ea - e * ea.sin() - m).abs() < 1e-12);
            assert!((ea - solve_kepler(1.0, e) - TAU * k as f64).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn kepler_residual_random(m in -50.0f64..50.0, e in 0.0f64..0.99) {
        let ea = solve_kepler(m, e);
        prop_assert!((mean_from_eccentric(ea, e) - m).abs() < 1e-13 * (1.0 + m.abs()));
    }

    #[test]
    fn anomaly_conversions_round_trip(th in -20.0f64..20.0, e in 0.0f64..0.95) {
        let ea = eccentric_from_true(th, e);
        prop_assert!((true_from_eccentric(ea, e) - th).abs() < 1e-12 * (1.0 + th.abs()));
    }

    #[test]
    fn true_anomaly_is_monotone(e in 0.0f64..0.9, th0 in -3.0f64..3.0, t in 0.0f64..20000.0) {
        let o = leo(e, th0);
        let a = o.true_anomaly(t);
        let b = o.true_anomaly(t + 1.0);
        prop_assert!(b > a);
    }

    #[test]
    fn derive_orbit_round_trip(e in 0.0f64..0.9, th0 in -3.0f64..3.0) {
        let o = leo(e, th0);
        let d = derive_orbit(&o.perifocal_position(th0), &o.perifocal_velocity(th0), GM_EARTH).unwrap();
        prop_assert!((d.mu_orbit / o.mu_orbit - 1.0).abs() < 1e-12);
        prop_assert!((d.ecc - e).abs() < 1e-10);
        if e > 1e-6 {
            let dth = (d.theta0 - th0 + PI).rem_euclid(TAU) - PI;
            prop_assert!(dth.abs() < 1e-8);
        }
    }

    #[test]
    fn frame_kinematics_match_finite_differences(e in 0.0f64..0.7, th0 in -3.0f64..3.0, t in 0.0f64..4000.0) {
        let o = leo(e, th0);
        let h = 0.05;
        for kin in [OrbitModel::kinematics_qi, OrbitModel::kinematics_perifocal] {
            let k = kin(&o, t);
            let kp = kin(&o, t + h);
            let km = kin(&o, t - h);
            let dpos = (kp.pose.translation - km.pose.translation) / (2.0 * h);
            let lin = rot2(k.pose.angle).transpose() * dpos;
            prop_assert!((lin - k.velocity.xy()).amax() < 1e-5 * (1.0 + k.velocity.xy().norm()));
            let dang = (kp.pose.angle - km.pose.angle) / (2.0 * h);
            prop_assert!((dang - k.velocity.z).abs() < 1e-9);
            let vdot = (kp.velocity - km.velocity) / (2.0 * h);
            prop_assert!((vdot.xy() - k.velocity_dot.xy()).amax() < 1e-7 * (1.0 + k.velocity_dot.xy().norm()));
            prop_assert!((vdot.z - k.velocity_dot.z).abs() < 1e-12 + 1e-5 * k.velocity_dot.z.abs());
        }
    }

    #[test]
    fn quasi_inertial_and_perifocal_frames_agree(e in 0.0f64..0.7, th0 in -3.0f64..3.0, t in 0.0f64..4000.0) {
        let o = leo(e, th0);
        let qi = o.kinematics_qi(t);
        let pf = o.kinematics_perifocal(t);
        prop_assert!((qi.theta - pf.theta).abs() < 1e-12);
        prop_assert!((qi.pose.angle - (pf.pose.angle - th0)).abs() < 1e-9);
        let disp = pf.pose.translation - o.perifocal_position(th0) - o.qi_velocity * t;
        let expect = rot2(th0).transpose() * disp;
        prop_assert!((qi.pose.translation - expect).amax() < 1e-6);
        let boost = rot2(pf.pose.angle).transpose() * o.qi_velocity;
        prop_assert!((qi.velocity.xy() + boost - pf.velocity.xy()).amax() < 1e-8);
        prop_assert!((qi.velocity.z - pf.velocity.z).abs() < 1e-18);
        prop_assert_eq!(qi.gravity, pf.gravity);
    }

    #[test]
    fn gravity_is_inverse_square(e in 0.0f64..0.7, th in -3.0f64..3.0) {
        let o = leo(e, 0.0);
        let r = o.perifocal_position(th).norm();
        prop_assert!((r / o.radius(th) - 1.0).abs() < 1e-14);
        let v = o.perifocal_velocity(th);
        let energy = 0.5 * v.norm_squared() - GM_EARTH / r;
        prop_assert!((energy / (-GM_EARTH / (2.0 * o.semi_major_axis())) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn circular_orbit_is_uniform_rotation() {
    let o = OrbitModel::from_semi_major_axis(42164e3, 0.0, GM_EARTH, 0.4, false).unwrap();
    let period = o.period();
    let mut worst = 0.0f64;
    for k in 0..=1000 {
        let t = period * k as f64 / 1000.0;
        worst = worst.max((o.true_anomaly(t) - 0.4 - o.mean_motion * t).abs());
    }
    assert!(worst < 1e-9, "{worst:e}");
}

#[test]
fn quasi_inertial_state_starts_at_rest() {
    let o = leo(0.3, 1.1);
    let s = o.state_qi(0.0);
    assert_eq!(s.pose.angle, 0.0);
    assert_eq!(s.pose.translation, Vector2::zeros());
    assert_eq!(s.velocity.xy(), Vector2::zeros());
    assert_eq!(s.velocity.z, o.theta_dot(1.1));
}

#[test]
fn geo_reference_deviation_at_two_minutes() {
    let o = common::geo_orbit();
    let d = o.reference_deviation(120.0);
    assert!((d / 0.74 - 1.0).abs() < 0.15, "deviation {d}");
    assert_eq!(o.reference_deviation(0.0), 0.0);
}

#[test]
fn mean_motion_conventions() {
    let a = leo(0.2, 0.0);
    let b = OrbitModel::from_momentum(a.mu_orbit, 0.2, GM_EARTH, 0.0, true).unwrap();
    let s: f64 = 1.0 - 0.04;
    assert!((a.mean_motion / b.mean_motion - s * s.sqrt()).abs() < 1e-15);
    assert!((a.period() * a.mean_motion - TAU).abs() < 1e-12);
    assert!((a.mean_motion - (GM_EARTH / 7.0e6f64.powi(3)).sqrt()).abs() < 1e-15);
}

#[test]
fn invalid_orbits_are_rejected() {
    assert_eq!(OrbitModel::from_semi_major_axis(7e6, 1.5, GM_EARTH, 0.0, false), Err(OrbitError::NotElliptic(1.5)));
    assert_eq!(OrbitModel::from_momentum(5e10, -0.1, GM_EARTH, 0.0, false), Err(OrbitError::InvalidParameter("ecc")));
    assert_eq!(OrbitModel::from_momentum(-1.0, 0.1, GM_EARTH, 0.0, false), Err(OrbitError::InvalidParameter("mu_orbit")));
    assert_eq!(OrbitModel::from_semi_major_axis(0.0, 0.1, GM_EARTH, 0.0, false), Err(OrbitError::InvalidParameter("semi_major_axis_m")));
    assert!(derive_orbit(&Vector2::new(7e6, 0.0), &Vector2::new(0.0, 2e4), GM_EARTH).is_err());
    assert!(derive_orbit(&Vector2::new(7e6, 0.0), &Vector2::new(1.0, 0.0), GM_EARTH).is_err());
    assert!(derive_orbit(&Vector2::new(7e6, 0.0), &Vector2::new(0.0, -7.5e3), GM_EARTH).is_err());
}

#[test]
fn circular_kinematics_are_steady() {
    let o = OrbitModel::from_semi_major_axis(7e6, 0.0, GM_EARTH, 0.0, false).unwrap();
    let k = o.kinematics_perifocal(1234.5);
    let v = (GM_EARTH / 7e6).sqrt();
    assert!((k.velocity - Vector3::new(0.0, v, o.mean_motion)).amax() < 1e-9);
    assert_eq!(k.velocity_dot.z, 0.0);
    assert!((k.gravity.x + GM_EARTH / 49e12).abs() < 1e-15);
}
