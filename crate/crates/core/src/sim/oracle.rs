//! Full-coordinate Lagrangian reference model.
//!
//! Generalized coordinates are exponential coordinates of the spacecraft pose
//! about a per-step anchor plus the joint angles. The metric is assembled from
//! per-body Jacobians only and the velocity-product terms come from central
//! differences of that metric. Each step runs in a non-rotating frame that starts
//! with the spacecraft origin velocity and falls with the orbit reference point,
//! which keeps the differenced energies small.

use super::{InitialMotion, Mode, RunRecord, Sample, SimConfig, SimError};
use crate::liegroup::{adjoint_inv, dexp, embed_se2, embed_twist2, exp_se3, exp6, PoseSE3, Twist};
use crate::orbit::{rot2, OrbitModel};
use crate::scalar::{c, Real};
use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Matrix6xX, Vector3, Vector6};
use std::time::Instant;

/// Gravity model of the reference model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleGravity {
    /// Field of the orbit reference point applied to every body.
    #[default]
    Uniform,
    /// Inverse-square field evaluated at each body's CoM.
    PointMass,
}

struct OracleChain<T: Real> {
    n: usize,
    inertia: Vec<Matrix6<T>>,
    mass: Vec<T>,
    com: Vec<Vector3<T>>,
    base_frame: PoseSE3<T>,
    rel: Vec<PoseSE3<T>>,
    xi_local: Vec<Twist<T>>,
    xi_local_vec: Vec<Vector6<T>>,
}

impl<T: Real> OracleChain<T> {
    fn from_raw(chain: &crate::kinematics::ChainModel<T>) -> Self {
        let n = chain.n;
        let b = &chain.bodies;
        let inertia = b
            .iter()
            .map(|b| {
                let mut m = Matrix6::zeros();
                m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * b.mass));
                m.fixed_view_mut::<3, 3>(3, 3).copy_from(&b.inertia);
                let a = adjoint_inv(&PoseSE3::from_translation(b.com));
                a.transpose() * m * a
            })
            .collect();
        let mut rel = vec![PoseSE3::identity()];
        let mut xi_local = vec![Twist::zero()];
        for i in 1..=n {
            rel.push(b[i - 1].frame.inverse().compose(&b[i].frame));
            let v = adjoint_inv(&b[i].frame) * chain.xi[i - 1].to_vector();
            xi_local.push(Twist::from_vector(&v));
        }
        Self {
            n,
            inertia,
            mass: b.iter().map(|b| b.mass).collect(),
            com: b.iter().map(|b| b.com).collect(),
            base_frame: b[0].frame,
            xi_local_vec: xi_local.iter().map(|x| x.to_vector()).collect(),
            rel,
            xi_local,
        }
    }

    fn links(&self, q: &[T]) -> Vec<PoseSE3<T>> {
        (1..=self.n).map(|i| self.rel[i].compose(&exp_se3(&self.xi_local[i], q[i - 1]))).collect()
    }

    /// Body poses in the spacecraft frame and body Jacobians on `(V_b, qdot)`.
    fn jacobians(&self, q: &[T]) -> (Vec<PoseSE3<T>>, Vec<Matrix6xX<T>>) {
        let dim = 6 + self.n;
        let links = self.links(q);
        let mut poses = Vec::with_capacity(self.n + 1);
        let mut jac = Vec::with_capacity(self.n + 1);
        let mut j0 = Matrix6xX::zeros(dim);
        j0.fixed_view_mut::<6, 6>(0, 0).copy_from(&adjoint_inv(&self.base_frame));
        poses.push(self.base_frame);
        jac.push(j0);
        for i in 1..=self.n {
            let h = &links[i - 1];
            let mut j = adjoint_inv(h) * &jac[i - 1];
            j.view_mut((0, 5 + i), (6, 1)).copy_from(&self.xi_local_vec[i]);
            poses.push(poses[i - 1].compose(h));
            jac.push(j);
        }
        (poses, jac)
    }

    fn metric(&self, jac: &[Matrix6xX<T>]) -> DMatrix<T> {
        let dim = 6 + self.n;
        let mut m = DMatrix::zeros(dim, dim);
        for (j, mi) in jac.iter().zip(&self.inertia) {
            m += j.transpose() * (mi * j);
        }
        (&m + m.transpose()) * c::<T>(0.5)
    }

    /// `sum J_i^T M_i J_i v` without assembling the metric.
    fn metric_times(&self, jac: &[Matrix6xX<T>], v: &DVector<T>) -> DVector<T> {
        let mut out = DVector::zeros(v.len());
        for (j, mi) in jac.iter().zip(&self.inertia) {
            out += j.transpose() * (mi * (j * v));
        }
        out
    }

    /// Kinetic energy from body velocities propagated along the chain.
    fn energy(&self, q: &[T], vb: &Vector6<T>, qdot: &[T]) -> T {
        let links = self.links(q);
        let mut v = adjoint_inv(&self.base_frame) * vb;
        let mut ke = v.dot(&(self.inertia[0] * v));
        for i in 1..=self.n {
            v = adjoint_inv(&links[i - 1]) * v + self.xi_local_vec[i] * qdot[i - 1];
            ke += v.dot(&(self.inertia[i] * v));
        }
        ke * c::<T>(0.5)
    }
}

fn dm<T: Real>(m: &Matrix6<T>) -> DMatrix<T> {
    DMatrix::from_iterator(6, 6, m.iter().copied())
}

fn v6<T: Real>(v: &DVector<T>, off: usize) -> Vector6<T> {
    Vector6::from_iterator(v.rows(off, 6).iter().copied())
}

#[derive(Clone)]
struct Coords<T: Real> {
    s: Vector6<T>,
    q: DVector<T>,
    sd: Vector6<T>,
    qd: DVector<T>,
    xr: Vector3<T>,
    vr: Vector3<T>,
}

impl<T: Real> Coords<T> {
    fn axpy(&self, h: T, d: &Coords<T>) -> Coords<T> {
        Coords {
            s: self.s + d.s * h,
            q: &self.q + &d.q * h,
            sd: self.sd + d.sd * h,
            qd: &self.qd + &d.qd * h,
            xr: self.xr + d.xr * h,
            vr: self.vr + d.vr * h,
        }
    }
}

/// Earth-centred inverse-square acceleration at a quasi-inertial position.
struct Field<T: Real> {
    gm: T,
    origin: Vector3<T>,
    velocity: Vector3<T>,
    axes: Matrix3<T>,
}

impl<T: Real> Field<T> {
    fn new(o: &OrbitModel<T>) -> Self {
        let p = o.perifocal_position(o.theta0);
        let r = rot2(o.theta0);
        let mut axes = Matrix3::identity();
        axes.fixed_view_mut::<2, 2>(0, 0).copy_from(&r);
        Self {
            gm: o.gm_central,
            origin: Vector3::new(p.x, p.y, T::zero()),
            velocity: Vector3::new(o.qi_velocity.x, o.qi_velocity.y, T::zero()),
            axes,
        }
    }

    fn accel(&self, t: T, x_qi: &Vector3<T>) -> Vector3<T> {
        let r = self.origin + self.velocity * t + self.axes * x_qi;
        let rn2 = r.norm_squared();
        self.axes.transpose() * (-r * (self.gm / (rn2 * rn2.sqrt())))
    }
}

struct Oracle<'a, T: Real> {
    cfg: &'a SimConfig<T>,
    ch: OracleChain<T>,
    field: Option<Field<T>>,
    h_fd: T,
}

const W5: [f64; 4] = [1.0, -8.0, 8.0, -1.0];
const S5: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];

impl<'a, T: Real> Oracle<'a, T> {
    fn tmat(&self, s: &Vector6<T>) -> Matrix6<T> {
        dexp(&(-s))
    }

    fn mx_times(&self, s: &Vector6<T>, q: &[T], v: &DVector<T>) -> DVector<T> {
        let t = self.tmat(s);
        let (_, jac) = self.ch.jacobians(q);
        let mut tv = v.clone();
        tv.rows_mut(0, 6).copy_from(&(t * v6(v, 0)));
        let mut w = self.ch.metric_times(&jac, &tv);
        let top = t.transpose() * v6(&w, 0);
        w.rows_mut(0, 6).copy_from(&top);
        w
    }

    /// Accelerations in the chart, inside a non-rotating frame that starts with velocity `boost`
    /// and then falls with the reference point, whose step-start state is `fall`.
    fn accel(&self, anchor: &PoseSE3<T>, boost: &Vector3<T>, fall: &(Vector3<T>, Vector3<T>), t_abs: T, tau: T, x: &Coords<T>) -> Coords<T> {
        let n = self.ch.n;
        let dim = 6 + n;
        let q = x.q.as_slice();
        let t = self.tmat(&x.s);
        let vb = t * x.sd;
        let (poses, jac) = self.ch.jacobians(q);
        let mb = self.ch.metric(&jac);
        let mut tfull = DMatrix::identity(dim, dim);
        tfull.view_mut((0, 0), (6, 6)).copy_from(&dm(&t));
        let mx = tfull.transpose() * &mb * &tfull;

        let mut xd = DVector::zeros(dim);
        xd.rows_mut(0, 6).copy_from(&x.sd);
        xd.rows_mut(6, n).copy_from(&x.qd);
        let scale = xd.amax();
        let mut mdot_xd = DVector::zeros(dim);
        if scale > T::zero() {
            let eps = self.h_fd / scale;
            for (w, st) in W5.iter().zip(S5) {
                let e = eps * c::<T>(st);
                let s2 = x.s + x.sd * e;
                let q2 = &x.q + &x.qd * e;
                mdot_xd += self.mx_times(&s2, q2.as_slice(), &xd) * c::<T>(*w);
            }
            mdot_xd /= eps * c::<T>(12.0);
        }

        let mut grad = DVector::zeros(dim);
        let qd = x.qd.as_slice();
        let hq = self.h_fd;
        for j in 0..6 {
            let mut acc = T::zero();
            for (w, st) in W5.iter().zip(S5) {
                let mut s2 = x.s;
                s2[j] += hq * c::<T>(st);
                let vb2 = dexp(&(-s2)) * x.sd;
                let mut v = DVector::zeros(dim);
                v.rows_mut(0, 6).copy_from(&vb2);
                v.rows_mut(6, n).copy_from(&x.qd);
                acc += v.dot(&(&mb * &v)) * c::<T>(0.5 * *w);
            }
            grad[j] = acc / (hq * c::<T>(12.0));
        }
        for j in 0..n {
            let mut acc = T::zero();
            for (w, st) in W5.iter().zip(S5) {
                let mut q2 = x.q.clone();
                q2[j] += hq * c::<T>(st);
                acc += self.ch.energy(q2.as_slice(), &vb, qd) * c::<T>(*w);
            }
            grad[6 + j] = acc / (hq * c::<T>(12.0));
        }

        let g_sc = anchor.compose(&exp6(&x.s));
        let mut qb = DVector::zeros(dim);
        let ar = self.field.as_ref().map_or(Vector3::zeros(), |f| f.accel(t_abs, &x.xr));
        if let (Some(f), OracleGravity::PointMass) = (&self.field, self.cfg.oracle_gravity) {
            let shift = boost * tau + x.xr - fall.0 - fall.1 * tau;
            for i in 0..=n {
                let body = g_sc.compose(&poses[i]);
                let a = f.accel(t_abs, &(body.transform_point(&self.ch.com[i]) + shift)) - ar;
                let ab = body.rotation.transpose() * a * self.ch.mass[i];
                let wrench = Vector6::new(ab.x, ab.y, ab.z, T::zero(), T::zero(), T::zero());
                let torque = self.ch.com[i].cross(&ab);
                let wrench = wrench + Vector6::new(T::zero(), T::zero(), T::zero(), torque.x, torque.y, torque.z);
                qb += jac[i].transpose() * DVector::from_column_slice(wrench.as_slice());
            }
        }
        if let Some(w) = self.cfg.wrenches.at(t_abs) {
            let mut f = DVector::zeros(dim);
            f.rows_mut(0, 6).copy_from(&w.f0);
            f.rows_mut(6, n).copy_from(&(&w.fm + &w.u_grad));
            qb += f + jac[n].transpose() * DVector::from_column_slice(w.fe.as_slice());
        }
        let mut qx = qb.clone();
        qx.rows_mut(0, 6).copy_from(&(t.transpose() * v6(&qb, 0)));

        let rhs = qx - mdot_xd + grad;
        let xdd = mx.cholesky().expect("oracle metric positive definite").solve(&rhs);
        Coords { s: x.sd, q: x.qd.clone(), sd: v6(&xdd, 0), qd: xdd.rows(6, n).into_owned(), xr: x.vr, vr: ar }
    }
}

/// Runs the reference model on the configured scenario.
pub fn oracle_run<T: Real>(cfg: &SimConfig<T>) -> Result<RunRecord<T>, SimError> {
    cfg.validate()?;
    let start = Instant::now();
    let orc = Oracle {
        cfg,
        ch: OracleChain::from_raw(&cfg.chain),
        field: cfg.orbit.as_ref().map(Field::new),
        h_fd: c(1e-3),
    };
    let n = orc.ch.n;
    let ini = &cfg.initial;
    let frame0 = frame_qi(cfg.orbit.as_ref(), T::zero());
    let mut anchor = embed_se2(&frame0.0).compose(&ini.g_base);
    let (_, jac0) = orc.ch.jacobians(ini.q.as_slice());
    let mb0 = orc.ch.metric(&jac0);
    let v_rel = match ini.motion {
        InitialMotion::Velocity(v) => v,
        InitialMotion::Momentum(p) => {
            let m0 = mb0.view((0, 0), (6, 6)).into_owned();
            let rhs = DVector::from_column_slice(p.as_slice()) - mb0.view((0, 6), (6, n)) * &ini.qdot;
            v6(&m0.cholesky().expect("oracle spacecraft inertia").solve(&rhs), 0)
        }
    };
    let mut vb = adjoint_inv(&ini.g_base) * embed_twist2(&frame0.1).to_vector() + v_rel;
    let mut y = Coords { s: Vector6::zeros(), q: ini.q.clone(), sd: vb, qd: ini.qdot.clone(), xr: Vector3::zeros(), vr: Vector3::zeros() };
    let steps = cfg.steps();
    let h = cfg.dt;
    let mut samples = Vec::with_capacity(steps / cfg.output_stride + 2);
    samples.push(sample(&orc, cfg, T::zero(), &anchor, &vb, &y));
    for k in 0..steps {
        let t0 = h * c::<T>(k as f64);
        let boost = anchor.rotation * Vector3::new(vb[0], vb[1], vb[2]);
        let rb = anchor.rotation.transpose() * boost;
        y.s = Vector6::zeros();
        y.sd = vb - Vector6::new(rb.x, rb.y, rb.z, T::zero(), T::zero(), T::zero());
        let fall = (y.xr, y.vr);
        let half = h * c::<T>(0.5);
        let k1 = orc.accel(&anchor, &boost, &fall, t0, T::zero(), &y);
        let k2 = orc.accel(&anchor, &boost, &fall, t0 + half, half, &y.axpy(half, &k1));
        let k3 = orc.accel(&anchor, &boost, &fall, t0 + half, half, &y.axpy(half, &k2));
        let k4 = orc.accel(&anchor, &boost, &fall, t0 + h, h, &y.axpy(h, &k3));
        let two = c::<T>(2.0);
        let sixth = h / c::<T>(6.0);
        let yn = Coords {
            s: y.s + (k1.s + k2.s * two + k3.s * two + k4.s) * sixth,
            q: &y.q + (&k1.q + &k2.q * two + &k3.q * two + &k4.q) * sixth,
            sd: y.sd + (k1.sd + k2.sd * two + k3.sd * two + k4.sd) * sixth,
            qd: &y.qd + (&k1.qd + &k2.qd * two + &k3.qd * two + &k4.qd) * sixth,
            xr: y.xr + (k1.xr + k2.xr * two + k3.xr * two + k4.xr) * sixth,
            vr: y.vr + (k1.vr + k2.vr * two + k3.vr * two + k4.vr) * sixth,
        };
        let moved = anchor.compose(&exp6(&yn.s));
        let g_new = PoseSE3::new(moved.rotation, moved.translation + boost * h + yn.xr - y.xr - y.vr * h);
        let vb_rel = dexp(&(-yn.s)) * yn.sd;
        let rb_new = g_new.rotation.transpose() * (boost + yn.vr - y.vr);
        vb = vb_rel + Vector6::new(rb_new.x, rb_new.y, rb_new.z, T::zero(), T::zero(), T::zero());
        anchor = if cfg.renormalize_every > 0 && (k + 1) % cfg.renormalize_every == 0 { g_new.renormalize() } else { g_new };
        y = Coords { s: Vector6::zeros(), sd: vb, ..yn };
        if !y.q.iter().chain(y.qd.iter()).chain(vb.iter()).all(|x| x.is_finite()) {
            return Err(SimError::NonFinite(k));
        }
        if (k + 1) % cfg.output_stride == 0 || k + 1 == steps {
            samples.push(sample(&orc, cfg, h * c::<T>((k + 1) as f64), &anchor, &vb, &y));
        }
    }
    Ok(RunRecord {
        mode: Mode::Oracle,
        samples,
        wall_time: start.elapsed().as_secs_f64(),
        steps,
        orbit_ode_evals: 0,
        max_orbit_frame_speed: T::zero(),
    })
}

/// Orbital frame pose and velocity in the quasi-inertial frame, identity without an orbit.
fn frame_qi<T: Real>(orbit: Option<&OrbitModel<T>>, t: T) -> (crate::liegroup::PoseSE2<T>, Vector3<T>, T, T) {
    match orbit {
        Some(o) => {
            let st = o.state_qi(t);
            (st.pose, st.velocity, st.theta, o.theta0)
        }
        None => (crate::liegroup::PoseSE2::identity(), Vector3::zeros(), T::zero(), T::zero()),
    }
}

fn sample<T: Real>(orc: &Oracle<'_, T>, cfg: &SimConfig<T>, t: T, g: &PoseSE3<T>, vb: &Vector6<T>, y: &Coords<T>) -> Sample<T> {
    let n = orc.ch.n;
    let (pose, vel, theta, _) = frame_qi(cfg.orbit.as_ref(), t);
    let g_base = embed_se2(&pose).inverse().compose(g);
    let v0 = vb - adjoint_inv(&g_base) * embed_twist2(&vel).to_vector();
    let (_, jac) = orc.ch.jacobians(y.q.as_slice());
    let mb = orc.ch.metric(&jac);
    let top = mb.rows(0, 6).into_owned();
    let mut xv = DVector::zeros(6 + n);
    xv.rows_mut(0, 6).copy_from(&v0);
    xv.rows_mut(6, n).copy_from(&y.qd);
    let p0 = v6(&(&top * &xv), 0);
    let vr = g.rotation.transpose() * y.vr;
    let om = vb - Vector6::new(vr.x, vr.y, vr.z, T::zero(), T::zero(), T::zero());
    xv.rows_mut(0, 6).copy_from(&om);
    let p = v6(&(&top * &xv), 0);
    let g_f = PoseSE3::new(g.rotation, g.translation - y.xr);
    let momentum = adjoint_inv(&g_f).transpose() * p;
    let ke = xv.dot(&(&mb * &xv)) * c::<T>(0.5);
    let m0 = mb.view((0, 0), (6, 6)).into_owned();
    let e = m0.symmetric_eigen().eigenvalues;
    let hi = e.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let lo = e.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b.abs()));
    Sample {
        t,
        theta,
        q: y.q.clone(),
        qdot: y.qd.clone(),
        p0,
        v0,
        g_base,
        kinetic_energy: ke,
        momentum,
        cond_m0: hi / lo,
    }
}
