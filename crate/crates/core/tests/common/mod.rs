#![allow(dead_code)]

use lpke::kinematics::{twist_from_axis, Body, ChainModel};
use lpke::liegroup::PoseSE3;
use lpke::orbit::{OrbitModel, GM_EARTH};
use lpke::sim::{InitialMotion, InitialState, Mode, SimConfig};
use nalgebra::{DVector, Matrix3, Vector3, Vector6};

/// Joint points (cm) and axes ordered from the end effector to the spacecraft.
const RHO: [[f64; 3]; 7] = [
    [0.0, 0.0, -4.5],
    [0.0, -6.0, -12.6],
    [0.0, 0.0, -31.6],
    [0.0, 0.0, -52.6],
    [0.0, 0.0, -71.6],
    [0.0, 0.0, -92.6],
    [0.0, 0.0, -111.6],
];
const AXIS: [[f64; 3]; 7] = [
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];
/// (mass, com cm, inertia diag, scale) from end effector (0) to spacecraft (7).
const BODIES: [(f64, [f64; 3], [f64; 3], f64); 8] = [
    (3.129, [0.0, 0.0, -4.5], [15.9, 15.9, 2.9], 1e-4),
    (2.3466, [0.0, -6.0, -8.1], [6.5, 6.3, 4.5], 1e-4),
    (2.1633, [0.0, -19.0, -6.0], [16.37, 18.27, 12.1], 1e-4),
    (3.4822, [0.0, 0.0, -21.0], [41.4, 24.8, 23.4], 1e-4),
    (4.0562, [0.0, -19.0, 0.0], [104.2, 78.3, 34.1], 1e-4),
    (3.4822, [0.0, 0.0, -21.0], [39.0, 27.9, 19.9], 1e-4),
    (3.4525, [0.0, 0.0, -19.0], [74.7, 57.4, 23.9], 1e-4),
    (10.0, [0.0, 0.0, -50.0], [1670.0, 1670.0, 1670.0], 1e-3),
];

pub fn geo_chain() -> ChainModel<f64> {
    let frame_of = |outer_body: usize| -> Vector3<f64> {
        if outer_body == 0 {
            Vector3::zeros()
        } else {
            Vector3::from(RHO[outer_body - 1]) * 0.01
        }
    };
    let bodies = (0..8)
        .map(|i| {
            let pb = 7 - i;
            let (m, com, diag, sc) = BODIES[pb];
            Body {
                mass: m,
                com: Vector3::from(com) * 0.01,
                inertia: Matrix3::from_diagonal(&(Vector3::from(diag) * sc)),
                frame: PoseSE3::from_translation(frame_of(pb)),
            }
        })
        .collect();
    let xi = (1..=7)
        .map(|j| {
            let pj = 8 - j;
            twist_from_axis(&Vector3::from(AXIS[pj - 1]), &(Vector3::from(RHO[pj - 1]) * 0.01)).unwrap()
        })
        .collect();
    ChainModel::new(bodies, xi).unwrap()
}

pub fn geo_orbit() -> OrbitModel<f64> {
    OrbitModel::from_semi_major_axis(42157.08431e3, 2e-6, GM_EARTH, 0.0, false).unwrap()
}

pub fn geo_q() -> DVector<f64> {
    let p = [0.2, 1.2, 0.3, 2.5, 0.5, 1.5, 0.6];
    DVector::from_iterator(7, p.iter().rev().copied())
}

pub fn geo_qdot() -> DVector<f64> {
    let p = [0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    DVector::from_iterator(7, p.iter().rev().map(|x| x * 1e-2))
}

pub fn geo_config(mode: Mode, dt: f64, duration: f64) -> SimConfig<f64> {
    let initial = InitialState {
        q: geo_q(),
        qdot: geo_qdot(),
        g_base: PoseSE3::identity(),
        motion: InitialMotion::Velocity(Vector6::zeros()),
    };
    let orbit = if mode == Mode::Free { None } else { Some(geo_orbit()) };
    SimConfig::new(mode, dt, duration, geo_chain(), orbit, initial)
}

pub fn max_dq(a: &lpke::sim::RunRecord<f64>, b: &lpke::sim::RunRecord<f64>) -> f64 {
    a.samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| (&x.q - &y.q).amax())
        .fold(0.0, f64::max)
}
