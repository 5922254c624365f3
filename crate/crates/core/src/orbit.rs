//! Closed-form Keplerian propagation of the orbital frame.

use crate::liegroup::PoseSE2;
use crate::scalar::{c, Real};
use nalgebra::{Matrix2, Vector2, Vector3};
use thiserror::Error;

/// Standard gravitational parameter of the Earth, m^3/s^2.
pub const GM_EARTH: f64 = 3.986004418e14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("orbit is not elliptic (ecc = {0})")]
    NotElliptic(f64),
    #[error("degenerate orbit state: {0}")]
    Degenerate(&'static str),
    #[error("invalid orbital parameter `{0}`")]
    InvalidParameter(&'static str),
}

/// Constant invariants of an undisturbed planar elliptic orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitModel<T: Real> {
    /// Specific angular momentum magnitude, m^2/s.
    pub mu_orbit: T,
    pub ecc: T,
    pub gm_central: T,
    /// True anomaly at t = 0.
    pub theta0: T,
    pub mean_motion: T,
    /// Perifocal velocity of the quasi-inertial frame (orbital velocity at t = 0).
    pub qi_velocity: Vector2<T>,
    pub paper_exact_mean_motion: bool,
    mean_anomaly0: T,
    theta_offset: T,
}

/// Orbital frame relative to the quasi-inertial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitStateQI<T: Real> {
    pub pose: PoseSE2<T>,
    /// `(vx, vy, wz)` in the orbital frame.
    pub velocity: Vector3<T>,
    pub theta: T,
    pub t: T,
}

/// Everything the dynamics needs about the orbital frame at one instant.
///
/// Velocities are body velocities of the orbital frame relative to a reference
/// inertial frame, resolved in the orbital frame as `(vx, vy, wz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitFrameKinematics<T: Real> {
    pub theta: T,
    pub pose: PoseSE2<T>,
    pub velocity: Vector3<T>,
    pub velocity_dot: Vector3<T>,
    /// Central-body gravitational acceleration at the frame origin, orbital-frame axes.
    pub gravity: Vector2<T>,
}

impl<T: Real> OrbitModel<T> {
    /// Builds the model from angular momentum and eccentricity.
    pub fn from_momentum(mu_orbit: T, ecc: T, gm: T, theta0: T, paper_exact_mean_motion: bool) -> Result<Self, OrbitError> {
        if !(ecc >= T::zero()) {
            return Err(OrbitError::InvalidParameter("ecc"));
        }
        if ecc >= T::one() {
            return Err(OrbitError::NotElliptic(ecc.to_f64_lossy()));
        }
        if !(mu_orbit > T::zero()) || !mu_orbit.is_finite() {
            return Err(OrbitError::InvalidParameter("mu_orbit"));
        }
        if !(gm > T::zero()) || !gm.is_finite() {
            return Err(OrbitError::InvalidParameter("gm"));
        }
        if !theta0.is_finite() {
            return Err(OrbitError::InvalidParameter("theta0"));
        }
        let base = gm * gm / (mu_orbit * mu_orbit * mu_orbit);
        let mean_motion = if paper_exact_mean_motion {
            base
        } else {
            let s = T::one() - ecc * ecc;
            base * s * s.sqrt()
        };
        let k = gm / mu_orbit;
        let qi_velocity = Vector2::new(-theta0.sin() * k, (ecc + theta0.cos()) * k);
        let e0 = eccentric_from_true(theta0, ecc);
        let mean_anomaly0 = e0 - ecc * e0.sin();
        let mut m = Self {
            mu_orbit,
            ecc,
            gm_central: gm,
            theta0,
            mean_motion,
            qi_velocity,
            paper_exact_mean_motion,
            mean_anomaly0,
            theta_offset: T::zero(),
        };
        m.theta_offset = theta0 - true_from_eccentric(solve_kepler(mean_anomaly0, ecc), ecc);
        Ok(m)
    }

    /// Builds the model from semi-major axis and eccentricity.
    pub fn from_semi_major_axis(a: T, ecc: T, gm: T, theta0: T, paper_exact_mean_motion: bool) -> Result<Self, OrbitError> {
        if !(a > T::zero()) || !a.is_finite() {
            return Err(OrbitError::InvalidParameter("semi_major_axis_m"));
        }
        if ecc >= T::one() {
            return Err(OrbitError::NotElliptic(ecc.to_f64_lossy()));
        }
        let mu = (gm * a * (T::one() - ecc * ecc)).sqrt();
        Self::from_momentum(mu, ecc, gm, theta0, paper_exact_mean_motion)
    }

    /// Semi-latus rectum `mu^2 / gm`.
    pub fn semi_latus_rectum(&self) -> T {
        self.mu_orbit * self.mu_orbit / self.gm_central
    }

    pub fn semi_major_axis(&self) -> T {
        self.semi_latus_rectum() / (T::one() - self.ecc * self.ecc)
    }

    pub fn period(&self) -> T {
        T::two_pi() / self.mean_motion
    }

    pub fn radius(&self, theta: T) -> T {
        self.semi_latus_rectum() / (T::one() + self.ecc * theta.cos())
    }

    /// `dtheta/dt` at true anomaly `theta`.
    pub fn theta_dot(&self, theta: T) -> T {
        let s = T::one() + self.ecc * theta.cos();
        self.gm_central * self.gm_central * s * s / (self.mu_orbit * self.mu_orbit * self.mu_orbit)
    }

    /// Perifocal position at true anomaly `theta`.
    pub fn perifocal_position(&self, theta: T) -> Vector2<T> {
        let (s, co) = theta.sin_cos();
        Vector2::new(co, s) * self.radius(theta)
    }

    /// Perifocal velocity at true anomaly `theta`.
    pub fn perifocal_velocity(&self, theta: T) -> Vector2<T> {
        let (s, co) = theta.sin_cos();
        Vector2::new(-s, self.ecc + co) * (self.gm_central / self.mu_orbit)
    }

    /// Continuous, monotone true anomaly at time `t`.
    pub fn true_anomaly(&self, t: T) -> T {
        if t == T::zero() {
            return self.theta0;
        }
        let m = self.mean_anomaly0 + self.mean_motion * t;
        true_from_eccentric(solve_kepler(m, self.ecc), self.ecc) + self.theta_offset
    }

    /// `p(theta) - p(theta0)` in perifocal axes, evaluated without cancellation.
    fn perifocal_displacement(&self, theta: T) -> Vector2<T> {
        let e = self.ecc;
        let th0 = self.theta0;
        let d = theta - th0;
        let half = d * c(0.5);
        let mid = (theta + th0) * c(0.5);
        let sh = half.sin();
        let dcos = -c::<T>(2.0) * mid.sin() * sh;
        let dsin = c::<T>(2.0) * mid.cos() * sh;
        let den = (T::one() + e * theta.cos()) * (T::one() + e * th0.cos());
        Vector2::new(dcos, dsin + e * d.sin()) * (self.semi_latus_rectum() / den)
    }

    /// Pose and velocity of the orbital frame relative to the quasi-inertial frame.
    pub fn state_qi(&self, t: T) -> OrbitStateQI<T> {
        let theta = self.true_anomaly(t);
        let d = theta - self.theta0;
        let disp = self.perifocal_displacement(theta) - self.qi_velocity * t;
        let trans = rot2(self.theta0).transpose() * disp;
        let k = self.gm_central / self.mu_orbit;
        let sh = (d * c(0.5)).sin();
        let vel = Vector3::new(
            -d.sin() * k,
            c::<T>(2.0) * sh * sh * k,
            self.theta_dot(theta),
        );
        OrbitStateQI { pose: PoseSE2::new(d, trans), velocity: vel, theta, t }
    }

    /// Pose and velocity of the orbital frame relative to the perifocal frame.
    pub fn state_perifocal(&self, t: T) -> (PoseSE2<T>, Vector3<T>) {
        let theta = self.true_anomaly(t);
        (PoseSE2::new(theta, self.perifocal_position(theta)), self.perifocal_frame_velocity(theta))
    }

    fn perifocal_frame_velocity(&self, theta: T) -> Vector3<T> {
        let (s, co) = theta.sin_cos();
        let k = self.gm_central / self.mu_orbit;
        Vector3::new(self.ecc * s * k, (T::one() + self.ecc * co) * k, self.theta_dot(theta))
    }

    fn gravity_in_orbit_frame(&self, theta: T) -> Vector2<T> {
        let r = self.radius(theta);
        Vector2::new(-self.gm_central / (r * r), T::zero())
    }

    fn angular_accel(&self, theta: T) -> T {
        let (s, co) = theta.sin_cos();
        let k = self.gm_central / self.mu_orbit;
        let w = self.theta_dot(theta);
        -w * k * c::<T>(2.0) * self.gm_central / (self.mu_orbit * self.mu_orbit) * self.ecc * s * (T::one() + self.ecc * co)
    }

    /// Frame kinematics with the quasi-inertial frame as reference.
    pub fn kinematics_qi(&self, t: T) -> OrbitFrameKinematics<T> {
        let st = self.state_qi(t);
        let theta = st.theta;
        let d = theta - self.theta0;
        let k = self.gm_central / self.mu_orbit;
        let w = st.velocity.z;
        let (s, co) = d.sin_cos();
        OrbitFrameKinematics {
            theta,
            pose: st.pose,
            velocity: st.velocity,
            velocity_dot: Vector3::new(-k * w * co, k * w * s, self.angular_accel(theta)),
            gravity: self.gravity_in_orbit_frame(theta),
        }
    }

    /// Frame kinematics with the perifocal frame as reference.
    pub fn kinematics_perifocal(&self, t: T) -> OrbitFrameKinematics<T> {
        let (pose, velocity) = self.state_perifocal(t);
        let theta = pose.angle;
        let (s, co) = theta.sin_cos();
        let k = self.gm_central / self.mu_orbit;
        let w = velocity.z;
        OrbitFrameKinematics {
            theta,
            pose,
            velocity,
            velocity_dot: Vector3::new(k * w * self.ecc * co, -k * w * self.ecc * s, self.angular_accel(theta)),
            gravity: self.gravity_in_orbit_frame(theta),
        }
    }

    /// Growth of the separation between this orbit and the circular path of
    /// equal period started at the same anomaly, `|d(t) - d(0)|`.
    pub fn reference_deviation(&self, t: T) -> T {
        let theta = self.true_anomaly(t);
        let a = self.semi_major_axis();
        let phi = self.mean_motion * t;
        let mid = self.theta0 + phi * c(0.5);
        let sh = (phi * c(0.5)).sin();
        let circ = Vector2::new(-c::<T>(2.0) * mid.sin() * sh, c::<T>(2.0) * mid.cos() * sh) * a;
        (self.perifocal_displacement(theta) - circ).norm()
    }
}

/// Orbit invariants from a planar position/velocity pair.
pub fn derive_orbit<T: Real>(p0: &Vector2<T>, v0: &Vector2<T>, gm: T) -> Result<OrbitModel<T>, OrbitError> {
    derive_orbit_with(p0, v0, gm, false)
}

/// [`derive_orbit`] with an explicit mean-motion convention.
pub fn derive_orbit_with<T: Real>(p0: &Vector2<T>, v0: &Vector2<T>, gm: T, paper_exact_mean_motion: bool) -> Result<OrbitModel<T>, OrbitError> {
    let r = p0.norm();
    if !(r > T::zero()) {
        return Err(OrbitError::Degenerate("zero position"));
    }
    let h = p0.x * v0.y - p0.y * v0.x;
    let scale = r * v0.norm();
    if !(h.abs() > scale * c(1e-12)) {
        return Err(OrbitError::Degenerate("rectilinear motion"));
    }
    if h < T::zero() {
        return Err(OrbitError::Degenerate("retrograde motion in the orbit plane"));
    }
    let ev = (p0 * (v0.norm_squared() - gm / r) - v0 * p0.dot(v0)) / gm;
    let ecc = ev.norm();
    if ecc >= T::one() {
        return Err(OrbitError::NotElliptic(ecc.to_f64_lossy()));
    }
    let theta0 = if ecc == T::zero() {
        T::zero()
    } else {
        let cosv = ev.dot(p0);
        let sinv = ev.x * p0.y - ev.y * p0.x;
        sinv.atan2(cosv)
    };
    OrbitModel::from_momentum(h, ecc, gm, theta0, paper_exact_mean_motion)
}

/// Counterclockwise planar rotation.
pub fn rot2<T: Real>(a: T) -> Matrix2<T> {
    let (s, co) = a.sin_cos();
    Matrix2::new(co, -s, s, co)
}

/// Solves `E - e sin E = M` for `0 <= e < 1`.
pub fn solve_kepler<T: Real>(m: T, ecc: T) -> T {
    if ecc == T::zero() || m == T::zero() {
        return m;
    }
    let two_pi = T::two_pi();
    let k = (m / two_pi).round();
    let mr = m - k * two_pi;
    let mut lo = mr - ecc;
    let mut hi = mr + ecc;
    let mut x = if ecc < c(0.8) {
        mr
    } else if mr >= T::zero() {
        T::pi()
    } else {
        -T::pi()
    };
    x = x.max(lo).min(hi);
    let tol = T::default_epsilon() * c(4.0);
    for _ in 0..100 {
        let (s, co) = x.sin_cos();
        let f = x - ecc * s - mr;
        if f == T::zero() {
            break;
        }
        if f > T::zero() {
            hi = x;
        } else {
            lo = x;
        }
        let fp = T::one() - ecc * co;
        let mut xn = x - f / fp;
        if !(xn > lo && xn < hi) {
            xn = (lo + hi) * c(0.5);
        }
        let step = (xn - x).abs();
        x = xn;
        if step <= tol * (T::one() + x.abs()) || hi - lo <= tol * (T::one() + x.abs()) {
            break;
        }
    }
    x + k * two_pi
}

/// Continuous eccentric-to-true anomaly conversion.
pub fn true_from_eccentric<T: Real>(e_anom: T, ecc: T) -> T {
    let two_pi = T::two_pi();
    let k = (e_anom / two_pi).round();
    let er = e_anom - k * two_pi;
    let half = er * c(0.5);
    let th = c::<T>(2.0) * ((T::one() + ecc).sqrt() * half.sin()).atan2((T::one() - ecc).sqrt() * half.cos());
    th + k * two_pi
}

/// Continuous true-to-eccentric anomaly conversion.
pub fn eccentric_from_true<T: Real>(theta: T, ecc: T) -> T {
    let two_pi = T::two_pi();
    let k = (theta / two_pi).round();
    let tr = theta - k * two_pi;
    let half = tr * c(0.5);
    let e = c::<T>(2.0) * ((T::one() - ecc).sqrt() * half.sin()).atan2((T::one() + ecc).sqrt() * half.cos());
    e + k * two_pi
}

/// Mean anomaly of an eccentric anomaly.
#[inline]
pub fn mean_from_eccentric<T: Real>(e_anom: T, ecc: T) -> T {
    e_anom - ecc * e_anom.sin()
}
