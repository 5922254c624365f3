//! Fixed-step Runge-Kutta-Munthe-Kaas integration of the reduced dynamics.

mod oracle;

pub use oracle::{oracle_run, OracleGravity};

use crate::dynamics::{derivatives, derivatives_compensated, invariants, momentum_from_velocity, DynamicsError, InputWrenches, ReducedState};
use crate::kinematics::{ChainError, ChainModel};
use crate::liegroup::{dexpinv_right4, exp6, PoseSE2, PoseSE3};
use crate::orbit::{rot2, OrbitFrameKinematics, OrbitModel};
use crate::scalar::{c, Real};
use nalgebra::{DVector, Matrix2, Vector2, Vector3, Vector6};
use std::fmt;
use std::time::Instant;
use thiserror::Error;

/// Which formulation drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Closed-form orbit relative to the quasi-inertial frame.
    ModeI,
    /// Closed-form orbit relative to the perifocal frame.
    ModeII,
    /// Two-body orbit integrated alongside the manipulator.
    ModeIII,
    /// No orbital forcing.
    Free,
    /// Independent full-coordinate Lagrangian model.
    Oracle,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::ModeI, Mode::ModeII, Mode::ModeIII, Mode::Free, Mode::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Mode::ModeI => "ModeI",
            Mode::ModeII => "ModeII",
            Mode::ModeIII => "ModeIII",
            Mode::Free => "Free",
            Mode::Oracle => "Oracle",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        let k = s.to_ascii_lowercase().replace(['_', '-', ' '], "");
        Some(match k.as_str() {
            "modei" | "i" | "1" => Mode::ModeI,
            "modeii" | "ii" | "2" => Mode::ModeII,
            "modeiii" | "iii" | "3" => Mode::ModeIII,
            "free" => Mode::Free,
            "oracle" => Mode::Oracle,
            _ => return None,
        })
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial spacecraft motion, given either as momentum or as velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialMotion<T: Real> {
    Momentum(Vector6<T>),
    Velocity(Vector6<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialState<T: Real> {
    pub q: DVector<T>,
    pub qdot: DVector<T>,
    /// Spacecraft frame relative to the orbital frame.
    pub g_base: PoseSE3<T>,
    pub motion: InitialMotion<T>,
}

/// Piecewise-constant input schedule; each entry holds from its start time on.
#[derive(Debug, Clone, PartialEq)]
pub struct WrenchSchedule<T: Real> {
    pub segments: Vec<(T, InputWrenches<T>)>,
}

impl<T: Real> Default for WrenchSchedule<T> {
    fn default() -> Self {
        Self { segments: Vec::new() }
    }
}

impl<T: Real> WrenchSchedule<T> {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Inputs active at `t`, or `None` before the first segment.
    pub fn at(&self, t: T) -> Option<&InputWrenches<T>> {
        self.segments.iter().rev().find(|(s, _)| *s <= t).map(|(_, w)| w)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T: Real> {
    pub mode: Mode,
    pub dt: T,
    pub duration: T,
    pub chain: ChainModel<T>,
    pub orbit: Option<OrbitModel<T>>,
    pub initial: InitialState<T>,
    pub wrenches: WrenchSchedule<T>,
    pub output_stride: usize,
    /// Steps between rotation re-orthonormalizations (0 disables).
    pub renormalize_every: usize,
    pub oracle_gravity: OracleGravity,
}

impl<T: Real> SimConfig<T> {
    pub fn new(mode: Mode, dt: T, duration: T, chain: ChainModel<T>, orbit: Option<OrbitModel<T>>, initial: InitialState<T>) -> Self {
        Self {
            mode,
            dt,
            duration,
            chain,
            orbit,
            initial,
            wrenches: WrenchSchedule::default(),
            output_stride: 1,
            renormalize_every: 1000,
            oracle_gravity: OracleGravity::Uniform,
        }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        Self { mode, ..self.clone() }
    }

    /// Number of fixed steps covering the horizon.
    pub fn steps(&self) -> usize {
        let r = (self.duration / self.dt).to_f64_lossy();
        (r + 1e-9).floor().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(SimError::Config("dt must be positive".into()));
        }
        if !(self.duration >= T::zero()) || !self.duration.is_finite() {
            return Err(SimError::Config("duration must be non-negative".into()));
        }
        if self.duration > T::zero() && self.duration < self.dt {
            return Err(SimError::Config("duration must be zero or at least dt".into()));
        }
        if self.output_stride == 0 {
            return Err(SimError::Config("output_stride must be positive".into()));
        }
        if !matches!(self.mode, Mode::Free | Mode::Oracle) && self.orbit.is_none() {
            return Err(SimError::Config(format!("mode {} needs an orbit", self.mode)));
        }
        let n = self.chain.n;
        if self.initial.q.len() != n || self.initial.qdot.len() != n {
            return Err(SimError::Chain(ChainError::Dimension { expected: n, got: self.initial.q.len().min(self.initial.qdot.len()) }));
        }
        for (_, w) in &self.wrenches.segments {
            if w.fm.len() != n || w.u_grad.len() != n {
                return Err(SimError::Config("wrench schedule joint dimension mismatch".into()));
            }
        }
        Ok(())
    }

    /// Initial reduced state with the momentum derived from velocity if needed.
    pub fn initial_state(&self) -> Result<ReducedState<T>, SimError> {
        let i = &self.initial;
        let p0 = match i.motion {
            InitialMotion::Momentum(p) => p,
            InitialMotion::Velocity(v) => momentum_from_velocity(&self.chain, i.q.as_slice(), &v, &i.qdot)?,
        };
        let theta = self.orbit.as_ref().map_or(T::zero(), |o| o.theta0);
        Ok(ReducedState { t: T::zero(), theta, g_base: i.g_base, q: i.q.clone(), qdot: i.qdot.clone(), p0 })
    }

    fn inputs_at(&self, t: T) -> Option<&InputWrenches<T>> {
        self.wrenches.at(t)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("numerical failure at step {step}: {source}")]
    Numerical { step: usize, source: DynamicsError },
    #[error("non-finite state at step {0}")]
    NonFinite(usize),
}

impl From<DynamicsError> for SimError {
    fn from(e: DynamicsError) -> Self {
        SimError::Numerical { step: 0, source: e }
    }
}

/// One recorded row.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T: Real> {
    pub t: T,
    pub theta: T,
    pub q: DVector<T>,
    pub qdot: DVector<T>,
    pub p0: Vector6<T>,
    pub v0: Vector6<T>,
    pub g_base: PoseSE3<T>,
    pub kinetic_energy: T,
    pub momentum: Vector6<T>,
    pub cond_m0: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord<T: Real> {
    pub mode: Mode,
    pub samples: Vec<Sample<T>>,
    pub wall_time: f64,
    pub steps: usize,
    /// Evaluations of the two-body orbit ODE.
    pub orbit_ode_evals: usize,
    /// Largest linear speed of the orbital-frame contribution to the spacecraft velocity.
    pub max_orbit_frame_speed: T,
}

impl<T: Real> RunRecord<T> {
    pub fn last(&self) -> &Sample<T> {
        self.samples.last().expect("run records hold at least one sample")
    }

    /// Largest relative change of the momentum invariant and kinetic energy.
    pub fn invariant_drift(&self) -> (T, T) {
        let s0 = &self.samples[0];
        let pn = s0.momentum.norm().max(T::min_value().unwrap().abs().recip());
        let en = s0.kinetic_energy.abs().max(T::min_value().unwrap().abs().recip());
        self.samples.iter().fold((T::zero(), T::zero()), |(a, b), s| {
            (
                a.max((s.momentum - s0.momentum).norm() / pn),
                b.max((s.kinetic_energy - s0.kinetic_energy).abs() / en),
            )
        })
    }
}

/// Integrated two-body state of the orbital frame origin, perifocal axes.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TwoBody<T: Real> {
    r: Vector2<T>,
    v: Vector2<T>,
}

struct OrbitCounter {
    evals: usize,
}

fn unwrap_near<T: Real>(raw: T, hint: T) -> T {
    raw + ((hint - raw) / T::two_pi()).round() * T::two_pi()
}

fn two_body_kinematics<T: Real>(
    gm: T,
    st: &TwoBody<T>,
    theta_hint: T,
    counter: &mut OrbitCounter,
) -> (OrbitFrameKinematics<T>, Vector2<T>) {
    counter.evals += 1;
    let (r, v) = (st.r, st.v);
    let rn2 = r.norm_squared();
    let rn = rn2.sqrt();
    let acc = -r * (gm / (rn2 * rn));
    let theta = unwrap_near(r.y.atan2(r.x), theta_hint);
    let h = r.x * v.y - r.y * v.x;
    let wz = h / rn2;
    let rt = rot2(theta).transpose();
    let lin = rt * v;
    let s = Matrix2::new(T::zero(), -T::one(), T::one(), T::zero());
    let lin_dot = -(s * lin) * wz + rt * acc;
    let wz_dot = -c::<T>(2.0) * h * r.dot(&v) / (rn2 * rn2);
    let kin = OrbitFrameKinematics {
        theta,
        pose: PoseSE2::new(theta, r),
        velocity: Vector3::new(lin.x, lin.y, wz),
        velocity_dot: Vector3::new(lin_dot.x, lin_dot.y, wz_dot),
        gravity: rt * acc,
    };
    (kin, acc)
}

#[derive(Clone)]
struct Flat<T: Real> {
    q: DVector<T>,
    qdot: DVector<T>,
    p0: Vector6<T>,
    orb: Option<TwoBody<T>>,
}

struct Deriv<T: Real> {
    v0: Vector6<T>,
    q: DVector<T>,
    qdot: DVector<T>,
    p0: Vector6<T>,
    orb: Option<TwoBody<T>>,
}

impl<T: Real> Flat<T> {
    fn axpy(&self, h: T, d: &Deriv<T>) -> Flat<T> {
        Flat {
            q: &self.q + &d.q * h,
            qdot: &self.qdot + &d.qdot * h,
            p0: self.p0 + d.p0 * h,
            orb: match (self.orb, d.orb) {
                (Some(o), Some(k)) => Some(TwoBody { r: o.r + k.r * h, v: o.v + k.v * h }),
                _ => None,
            },
        }
    }
}

struct Stepper<'a, T: Real> {
    cfg: &'a SimConfig<T>,
    zero: InputWrenches<T>,
    counter: OrbitCounter,
    theta_hint: T,
    max_orbit_speed: T,
}

impl<'a, T: Real> Stepper<'a, T> {
    fn new(cfg: &'a SimConfig<T>) -> Self {
        let theta_hint = cfg.orbit.as_ref().map_or(T::zero(), |o| o.theta0);
        Self { cfg, zero: InputWrenches::zeros(cfg.chain.n), counter: OrbitCounter { evals: 0 }, theta_hint, max_orbit_speed: T::zero() }
    }

    fn kinematics(&mut self, t: T, orb: &Option<TwoBody<T>>) -> (Option<OrbitFrameKinematics<T>>, Option<Vector2<T>>) {
        let o = self.cfg.orbit.as_ref();
        match self.cfg.mode {
            Mode::ModeI => (o.map(|o| o.kinematics_qi(t)), None),
            Mode::ModeII => (o.map(|o| o.kinematics_perifocal(t)), None),
            Mode::ModeIII => {
                let gm = o.expect("validated").gm_central;
                let (k, acc) = two_body_kinematics(gm, orb.as_ref().expect("two-body state"), self.theta_hint, &mut self.counter);
                (Some(k), Some(acc))
            }
            Mode::Free | Mode::Oracle => (None, None),
        }
    }

    fn eval(&mut self, t: T, g: &PoseSE3<T>, y: &Flat<T>) -> Result<(Deriv<T>, T), DynamicsError> {
        let (kin, acc) = self.kinematics(t, &y.orb);
        let theta = kin.as_ref().map_or(self.theta_hint, |k| k.theta);
        let st = ReducedState { t, theta, g_base: *g, q: y.q.clone(), qdot: y.qdot.clone(), p0: y.p0 };
        let inputs = self.cfg.inputs_at(t).unwrap_or(&self.zero);
        let d = match self.cfg.mode {
            Mode::ModeII | Mode::ModeIII => derivatives_compensated(&self.cfg.chain, kin.as_ref(), &st, inputs)?,
            _ => derivatives(&self.cfg.chain, kin.as_ref(), &st, inputs)?,
        };
        if let Some(k) = &kin {
            let w = crate::liegroup::adjoint_inv(g) * crate::liegroup::embed_twist2(&k.velocity).to_vector();
            let sp = Vector3::new(w[0], w[1], w[2]).norm();
            if sp > self.max_orbit_speed {
                self.max_orbit_speed = sp;
            }
        }
        let orb = match (&y.orb, acc) {
            (Some(o), Some(a)) => Some(TwoBody { r: o.v, v: a }),
            _ => None,
        };
        Ok((Deriv { v0: d.v0, q: y.qdot.clone(), qdot: d.qddot, p0: d.p0_dot, orb }, theta))
    }

    fn step(&mut self, t: T, g: &PoseSE3<T>, y: &Flat<T>) -> Result<(PoseSE3<T>, Flat<T>), DynamicsError> {
        let h = self.cfg.dt;
        let half = h * c::<T>(0.5);
        let (k1, _) = self.eval(t, g, y)?;
        let u2 = k1.v0 * half;
        let (k2, _) = self.eval(t + half, &g.compose(&exp6(&u2)), &y.axpy(half, &k1))?;
        let w2 = dexpinv_right4(&u2, &k2.v0);
        let u3 = w2 * half;
        let (k3, _) = self.eval(t + half, &g.compose(&exp6(&u3)), &y.axpy(half, &k2))?;
        let w3 = dexpinv_right4(&u3, &k3.v0);
        let u4 = w3 * h;
        let (k4, th) = self.eval(t + h, &g.compose(&exp6(&u4)), &y.axpy(h, &k3))?;
        let w4 = dexpinv_right4(&u4, &k4.v0);
        let six = c::<T>(6.0);
        let two = c::<T>(2.0);
        let u = (k1.v0 + w2 * two + w3 * two + w4) * (h / six);
        let g_new = g.compose(&exp6(&u));
        let y_new = Flat {
            q: &y.q + (&k1.q + &k2.q * two + &k3.q * two + &k4.q) * (h / six),
            qdot: &y.qdot + (&k1.qdot + &k2.qdot * two + &k3.qdot * two + &k4.qdot) * (h / six),
            p0: y.p0 + (k1.p0 + k2.p0 * two + k3.p0 * two + k4.p0) * (h / six),
            orb: y.orb.map(|o| {
                let (a, b, cc, d) = (k1.orb.unwrap(), k2.orb.unwrap(), k3.orb.unwrap(), k4.orb.unwrap());
                TwoBody {
                    r: o.r + (a.r + b.r * two + cc.r * two + d.r) * (h / six),
                    v: o.v + (a.v + b.v * two + cc.v * two + d.v) * (h / six),
                }
            }),
        };
        self.theta_hint = th;
        Ok((g_new, y_new))
    }
}

fn theta_of<T: Real>(cfg: &SimConfig<T>, t: T, orb: &Option<TwoBody<T>>) -> (T, T) {
    match (cfg.mode, cfg.orbit.as_ref()) {
        (Mode::Free, _) | (_, None) => (cfg.orbit.as_ref().map_or(T::zero(), |o| o.theta0), T::zero()),
        (Mode::ModeIII, Some(_)) => {
            let st = orb.as_ref().expect("two-body state");
            let (r, v) = (st.r, st.v);
            (r.y.atan2(r.x), (r.x * v.y - r.y * v.x) / r.norm_squared())
        }
        (_, Some(o)) => {
            let th = o.true_anomaly(t);
            (th, o.theta_dot(th))
        }
    }
}

fn record<T: Real>(cfg: &SimConfig<T>, st: &ReducedState<T>, theta_dot: T) -> Result<Sample<T>, DynamicsError> {
    let theta0 = cfg.orbit.as_ref().map_or(T::zero(), |o| o.theta0);
    let (theta, wz) = if cfg.mode == Mode::Free { (theta0, T::zero()) } else { (st.theta, theta_dot) };
    let probe = ReducedState { theta, ..st.clone() };
    let inv = invariants(&cfg.chain, &probe, theta0, wz)?;
    Ok(Sample {
        t: st.t,
        theta: st.theta,
        q: st.q.clone(),
        qdot: st.qdot.clone(),
        p0: st.p0,
        v0: inv.v0,
        g_base: st.g_base,
        kinetic_energy: inv.kinetic_energy,
        momentum: inv.momentum,
        cond_m0: inv.cond_m0,
    })
}

/// Integrates the configured scenario and records samples every `output_stride` steps.
pub fn run<T: Real>(cfg: &SimConfig<T>) -> Result<RunRecord<T>, SimError> {
    cfg.validate()?;
    if cfg.mode == Mode::Oracle {
        return oracle_run(cfg);
    }
    let start = Instant::now();
    let steps = cfg.steps();
    let s0 = cfg.initial_state()?;
    let mut g = s0.g_base;
    let mut y = Flat {
        q: s0.q.clone(),
        qdot: s0.qdot.clone(),
        p0: s0.p0,
        orb: match (cfg.mode, cfg.orbit.as_ref()) {
            (Mode::ModeIII, Some(o)) => Some(TwoBody { r: o.perifocal_position(o.theta0), v: o.perifocal_velocity(o.theta0) }),
            _ => None,
        },
    };
    let mut stepper = Stepper::new(cfg);
    let mut samples = Vec::with_capacity(steps / cfg.output_stride + 2);
    let wrap = |step: usize| move |e: DynamicsError| SimError::Numerical { step, source: e };
    let (th0, wz0) = theta_of(cfg, T::zero(), &y.orb);
    samples.push(record(cfg, &ReducedState { theta: th0, ..s0.clone() }, wz0).map_err(wrap(0))?);
    let mut theta_unwrapped = th0;
    for k in 0..steps {
        let t = cfg.dt * c::<T>(k as f64);
        let (g_new, y_new) = stepper.step(t, &g, &y).map_err(wrap(k))?;
        g = g_new;
        y = y_new;
        if cfg.renormalize_every > 0 && (k + 1) % cfg.renormalize_every == 0 {
            g = g.renormalize();
        }
        let t1 = cfg.dt * c::<T>((k + 1) as f64);
        if !y.q.iter().chain(y.qdot.iter()).chain(y.p0.iter()).all(|x| x.is_finite()) {
            return Err(SimError::NonFinite(k));
        }
        if (k + 1) % cfg.output_stride == 0 || k + 1 == steps {
            let (raw, wz) = theta_of(cfg, t1, &y.orb);
            let theta = if cfg.mode == Mode::ModeIII {
                unwrap_near(raw, theta_unwrapped)
            } else {
                raw
            };
            theta_unwrapped = theta;
            let st = ReducedState { t: t1, theta, g_base: g, q: y.q.clone(), qdot: y.qdot.clone(), p0: y.p0 };
            samples.push(record(cfg, &st, wz).map_err(wrap(k + 1))?);
        }
    }
    Ok(RunRecord {
        mode: cfg.mode,
        samples,
        wall_time: start.elapsed().as_secs_f64(),
        steps,
        orbit_ode_evals: stepper.counter.evals,
        max_orbit_frame_speed: stepper.max_orbit_speed,
    })
}

/// Single integration step of the reduced model; exposed for property tests.
pub fn step<T: Real>(cfg: &SimConfig<T>, state: &ReducedState<T>) -> Result<ReducedState<T>, SimError> {
    if matches!(cfg.mode, Mode::ModeIII | Mode::Oracle) {
        return Err(SimError::Config("single-step access covers the closed-form and free modes".into()));
    }
    if !state.is_finite() {
        return Err(SimError::NonFinite(0));
    }
    let mut stepper = Stepper::new(cfg);
    let y = Flat { q: state.q.clone(), qdot: state.qdot.clone(), p0: state.p0, orb: None };
    let (g, y) = stepper.step(state.t, &state.g_base, &y).map_err(|e| SimError::Numerical { step: 0, source: e })?;
    let t = state.t + cfg.dt;
    let theta = theta_of(cfg, t, &None).0;
    Ok(ReducedState { t, theta, g_base: g, q: y.q, qdot: y.qdot, p0: y.p0 })
}

/// Wall-time statistics of one mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub mode: Mode,
    pub runs: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSummary {
    pub rows: Vec<BenchRow>,
}

impl BenchSummary {
    pub fn row(&self, mode: Mode) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    /// Mean excess wall time of `mode` over Mode I, in percent.
    pub fn excess_percent(&self, mode: Mode) -> Option<f64> {
        let base = self.row(Mode::ModeI)?.mean;
        Some((self.row(mode)?.mean / base - 1.0) * 100.0)
    }

    /// Mode I has the smallest mean wall time among the orbit modes.
    pub fn mode_i_fastest(&self) -> bool {
        match (self.row(Mode::ModeI), self.row(Mode::ModeII), self.row(Mode::ModeIII)) {
            (Some(a), Some(b), Some(c)) => a.mean < b.mean && a.mean < c.mean,
            _ => false,
        }
    }
}

/// Times Modes I, II and III on the same horizon, interleaving the runs.
pub fn bench<T: Real>(cfg: &SimConfig<T>, runs: usize) -> Result<BenchSummary, SimError> {
    if runs == 0 {
        return Err(SimError::Config("runs must be at least 1".into()));
    }
    let modes = [Mode::ModeI, Mode::ModeII, Mode::ModeIII];
    let cfgs: Vec<SimConfig<T>> = modes
        .iter()
        .map(|&m| {
            let mut c = cfg.with_mode(m);
            c.output_stride = c.steps().max(1);
            c
        })
        .collect();
    let mut times = vec![Vec::with_capacity(runs); modes.len()];
    for _ in 0..runs {
        for (i, c) in cfgs.iter().enumerate() {
            let r = run(c)?;
            times[i].push(r.wall_time);
        }
    }
    let rows = modes
        .iter()
        .zip(times)
        .map(|(&mode, ts)| BenchRow {
            mode,
            runs,
            mean: ts.iter().sum::<f64>() / runs as f64,
            min: ts.iter().cloned().fold(f64::INFINITY, f64::min),
            max: ts.iter().cloned().fold(0.0, f64::max),
        })
        .collect();
    Ok(BenchSummary { rows })
}
