mod common;

use common::*;
use lpke::dynamics::{InputWrenches, ReducedState};
use lpke::liegroup::PoseSE3;
use lpke::sim::*;
use nalgebra::{DVector, Vector3, Vector6};

fn free_spinning(dt: f64, duration: f64) -> SimConfig<f64> {
    let mut cfg = geo_config(Mode::Free, dt, duration);
    cfg.initial.motion = InitialMotion::Velocity(Vector6::new(0.01, -0.02, 0.03, 0.3, -0.2, 0.5));
    cfg.initial.qdot = DVector::from_column_slice(&[0.2, -0.1, 0.3, 0.1, -0.2, 0.15, 0.05]);
    cfg
}

#[test]
fn equilibrium_is_a_fixed_point() {
    let cfg = geo_config(Mode::Free, 1e-2, 1.0);
    let st = ReducedState {
        t: 0.0,
        theta: 0.0,
        g_base: PoseSE3::from_translation(Vector3::new(0.1, 0.2, 0.3)),
        q: geo_q(),
        qdot: DVector::zeros(7),
        p0: Vector6::zeros(),
    };
    let next = step(&cfg, &st).unwrap();
    assert_eq!(next.q, st.q);
    assert_eq!(next.qdot, st.qdot);
    assert_eq!(next.p0, st.p0);
    assert_eq!(next.g_base, st.g_base);
    assert_eq!(next.t, 1e-2);
}

#[test]
fn pose_stays_orthonormal_without_renormalization() {
    let mut cfg = free_spinning(1e-3, 1.0);
    cfg.renormalize_every = 0;
    cfg.output_stride = 1000;
    let rec = run(&cfg).unwrap();
    assert_eq!(rec.samples.len(), 2);
    let err = rec.last().g_base.orthonormality_error();
    assert!(err < 1e-12, "{err:e}");
}

#[test]
fn runs_are_bit_identical() {
    for mode in [Mode::ModeI, Mode::ModeII, Mode::ModeIII, Mode::Free, Mode::Oracle] {
        let mut cfg = geo_config(mode, 1e-2, 0.2);
        cfg.output_stride = 5;
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.samples, b.samples, "{mode}");
        assert_eq!(a.steps, 20);
    }
}

#[test]
fn closed_form_modes_never_integrate_the_orbit() {
    for mode in [Mode::ModeI, Mode::ModeII] {
        let rec = run(&geo_config(mode, 1e-2, 0.5)).unwrap();
        assert_eq!(rec.orbit_ode_evals, 0, "{mode}");
    }
    let rec = run(&geo_config(Mode::ModeIII, 1e-2, 0.5)).unwrap();
    assert_eq!(rec.orbit_ode_evals, 4 * 50);
}

#[test]
fn perifocal_frame_carries_orbital_speed() {
    let a = run(&geo_config(Mode::ModeI, 1e-2, 1.0)).unwrap();
    let b = run(&geo_config(Mode::ModeII, 1e-2, 1.0)).unwrap();
    assert!(b.max_orbit_frame_speed > 3.0e3 && b.max_orbit_frame_speed < 3.2e3);
    assert!(b.max_orbit_frame_speed / a.max_orbit_frame_speed.max(1e-300) > 100.0);
}

#[test]
fn orbit_modes_agree_over_short_horizon() {
    let cfgs: Vec<_> = [Mode::ModeI, Mode::ModeII, Mode::ModeIII, Mode::Oracle]
        .iter()
        .map(|&m| {
            let mut c = geo_config(m, 1e-2, 2.0);
            c.output_stride = 10;
            c
        })
        .collect();
    let recs: Vec<_> = cfgs.iter().map(|c| run(c).unwrap()).collect();
    assert!(max_dq(&recs[0], &recs[1]) < 1e-10);
    assert!(max_dq(&recs[0], &recs[2]) < 1e-10);
    assert!(max_dq(&recs[0], &recs[3]) < 1e-10);
    for r in &recs[1..] {
        for (x, y) in recs[0].samples.iter().zip(&r.samples) {
            assert_eq!(x.t, y.t);
            assert!((x.theta - y.theta).abs() < 1e-12, "{}", r.mode);
        }
    }
}

#[test]
fn free_mode_conserves_invariants() {
    let mut cfg = free_spinning(1e-3, 2.0);
    cfg.output_stride = 50;
    let rec = run(&cfg).unwrap();
    let (dp, de) = rec.invariant_drift();
    assert!(dp < 1e-10 && de < 1e-10, "momentum {dp:e} energy {de:e}");
    let mut oc = cfg.with_mode(Mode::Oracle);
    oc.dt = 1e-2;
    let orec = run(&oc).unwrap();
    let (dp, de) = orec.invariant_drift();
    assert!(dp < 1e-8 && de < 1e-8, "oracle momentum {dp:e} energy {de:e}");
}

#[test]
fn inputs_drive_both_formulations_alike() {
    let mut cfg = free_spinning(1e-2, 1.0);
    let w = InputWrenches {
        f0: Vector6::new(0.5, -0.2, 0.1, 0.05, 0.02, -0.03),
        fm: DVector::from_column_slice(&[0.02, -0.01, 0.015, 0.0, 0.01, -0.005, 0.002]),
        fe: Vector6::new(0.1, 0.05, -0.1, 0.0, 0.01, 0.0),
        u_grad: DVector::from_column_slice(&[0.0, 0.0, -0.01, 0.0, 0.0, 0.0, 0.0]),
    };
    cfg.wrenches.segments = vec![(0.0, w), (0.5, InputWrenches::zeros(7))];
    let a = run(&cfg).unwrap();
    let b = run(&cfg.with_mode(Mode::Oracle)).unwrap();
    let dq = max_dq(&a, &b);
    assert!(dq < 1e-9, "{dq:e}");
    let unforced = run(&free_spinning(1e-2, 1.0)).unwrap();
    assert!(max_dq(&a, &unforced) > 1e-4);
}

#[test]
fn joint_torque_work_matches_energy_change() {
    let dt = 1e-3;
    let mut cfg = free_spinning(dt, 1.0);
    let fm = DVector::from_column_slice(&[0.02, -0.01, 0.015, 0.0, 0.01, -0.005, 0.002]);
    cfg.wrenches.segments = vec![(0.0, InputWrenches { fm: fm.clone(), ..InputWrenches::zeros(7) })];
    let rec = run(&cfg).unwrap();
    let power: Vec<f64> = rec.samples.iter().map(|s| fm.dot(&s.qdot)).collect();
    let n = power.len() - 1;
    let mut work = power[0] + power[n];
    for (i, p) in power.iter().enumerate().take(n).skip(1) {
        work += if i % 2 == 1 { 4.0 * p } else { 2.0 * p };
    }
    work *= dt / 3.0;
    let de = rec.last().kinetic_energy - rec.samples[0].kinetic_energy;
    assert!((de - work).abs() < 1e-10 * work.abs().max(1e-3), "dE {de:e} work {work:e}");
}

#[test]
fn massless_arm_follows_kepler_orbit() {
    let mut cfg = geo_config(Mode::Oracle, 2e-2, 120.0);
    let mut chain_bodies = cfg.chain.bodies.clone();
    for b in chain_bodies.iter_mut().skip(1) {
        b.mass = 0.0;
    }
    let com = chain_bodies[0].frame.transform_point(&chain_bodies[0].com);
    cfg.chain = lpke::kinematics::ChainModel::new(chain_bodies, cfg.chain.xi.clone()).unwrap();
    cfg.initial.qdot = DVector::zeros(7);
    cfg.initial.g_base = PoseSE3::from_translation(-com);
    cfg.oracle_gravity = OracleGravity::PointMass;
    cfg.output_stride = 500;
    let rec = run(&cfg).unwrap();
    let worst = rec.samples.iter().map(|s| s.g_base.transform_point(&com).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "{worst:e} m");
    assert_eq!(rec.samples.len(), 13);
}

#[test]
fn record_layout() {
    let rec = run(&geo_config(Mode::ModeI, 1e-2, 0.0)).unwrap();
    assert_eq!(rec.samples.len(), 1);
    assert_eq!(rec.steps, 0);
    let mut cfg = geo_config(Mode::ModeI, 1e-2, 0.1);
    cfg.output_stride = 3;
    let rec = run(&cfg).unwrap();
    let ts: Vec<f64> = rec.samples.iter().map(|s| s.t).collect();
    assert_eq!(ts.len(), 5);
    assert!(ts.windows(2).all(|w| w[1] > w[0]));
    assert!((ts[4] - 0.1).abs() < 1e-15);
}

#[test]
fn invalid_configurations_are_rejected() {
    let mut cfg = geo_config(Mode::ModeI, 1e-2, 1.0);
    cfg.orbit = None;
    assert!(matches!(run(&cfg), Err(SimError::Config(_))));
    let cfg = geo_config(Mode::ModeI, 0.5, 0.2);
    assert!(matches!(run(&cfg), Err(SimError::Config(_))));
    let cfg = geo_config(Mode::Free, -1.0, 1.0);
    assert!(matches!(run(&cfg), Err(SimError::Config(_))));
    let mut cfg = geo_config(Mode::Free, 1e-2, 1.0);
    cfg.initial.q = DVector::zeros(3);
    assert!(matches!(run(&cfg), Err(SimError::Chain(_))));
    assert!(matches!(bench(&geo_config(Mode::ModeI, 1e-2, 0.1), 0), Err(SimError::Config(_))));
}

#[test]
fn single_bench_run_gives_one_sample_per_mode() {
    let b = bench(&geo_config(Mode::ModeI, 1e-2, 0.2), 1).unwrap();
    assert_eq!(b.rows.len(), 3);
    for r in &b.rows {
        assert_eq!(r.runs, 1);
        assert_eq!(r.min, r.max);
        assert_eq!(r.mean, r.min);
    }
}

#[test]
fn mode_names_round_trip() {
    for m in Mode::ALL {
        assert_eq!(Mode::parse(m.name()), Some(m));
        assert_eq!(m.to_string(), m.name());
    }
    assert_eq!(Mode::parse("mode_ii"), Some(Mode::ModeII));
    assert_eq!(Mode::parse("warp"), None);
}
