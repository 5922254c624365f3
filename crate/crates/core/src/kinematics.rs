//! Product-of-exponentials kinematics and the Jacobians of the chain.

use crate::liegroup::{adjoint, adjoint_inv, exp_se3, PoseSE3, Twist};
use crate::scalar::{c, Real};
use nalgebra::{DMatrix, Matrix3, Matrix6, Vector3, Vector6};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("joint axis must be a unit vector (|w| = {0})")]
    NonUnitAxis(f64),
    #[error("joint {0}: screw is not a pure revolute twist")]
    NotRevolute(usize),
    #[error("body {0}: {1}")]
    BadBody(usize, &'static str),
    #[error("expected {expected} bodies for {joints} joints, got {got}")]
    BodyCount { expected: usize, joints: usize, got: usize },
    #[error("expected {expected} joint values, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Revolute screw through `rho` about unit axis `w`.
pub fn twist_from_axis<T: Real>(w: &Vector3<T>, rho: &Vector3<T>) -> Result<Twist<T>, ChainError> {
    let nw = w.norm();
    if (nw - T::one()).abs() > c(1e-9) {
        return Err(ChainError::NonUnitAxis(nw.to_f64_lossy()));
    }
    Ok(Twist::new(rho.cross(w), *w))
}

/// Spatial inertia at a frame whose CoM sits at `com`, with `inertia` about the CoM.
pub fn spatial_inertia<T: Real>(mass: T, com: &Vector3<T>, inertia: &Matrix3<T>) -> Matrix6<T> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * mass));
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(inertia);
    let a = adjoint_inv(&PoseSE3::from_translation(*com));
    a.transpose() * m * a
}

/// One rigid body of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Body<T: Real> {
    pub mass: T,
    /// CoM in the body frame.
    pub com: Vector3<T>,
    /// Rotational inertia about the CoM in body axes.
    pub inertia: Matrix3<T>,
    /// Body frame relative to the spacecraft frame at `q = 0`.
    pub frame: PoseSE3<T>,
}

/// Immutable description of spacecraft plus serial arm; body 0 is the spacecraft.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel<T: Real> {
    pub n: usize,
    pub xi: Vec<Twist<T>>,
    pub xi_vec: Vec<Vector6<T>>,
    pub bodies: Vec<Body<T>>,
    pub gbar: Vec<PoseSE3<T>>,
    pub inertia_body: Vec<Matrix6<T>>,
    pub inertia_base_frame: Vec<Matrix6<T>>,
    pub masses: Vec<T>,
}

impl<T: Real> ChainModel<T> {
    pub fn new(bodies: Vec<Body<T>>, xi: Vec<Twist<T>>) -> Result<Self, ChainError> {
        let n = xi.len();
        if bodies.len() != n + 1 {
            return Err(ChainError::BodyCount { expected: n + 1, joints: n, got: bodies.len() });
        }
        for (j, x) in xi.iter().enumerate() {
            let nw = x.angular.norm();
            if (nw - T::one()).abs() > c::<T>(1e-9) || x.linear.dot(&x.angular).abs() > c::<T>(1e-9) * (T::one() + x.linear.norm()) {
                return Err(ChainError::NotRevolute(j + 1));
            }
        }
        let mut inertia_body = Vec::with_capacity(n + 1);
        let mut inertia_base_frame = Vec::with_capacity(n + 1);
        for (i, b) in bodies.iter().enumerate() {
            if !(b.mass >= T::zero()) || !b.mass.is_finite() {
                return Err(ChainError::BadBody(i, "mass must be finite and non-negative"));
            }
            if (b.inertia - b.inertia.transpose()).amax() > c::<T>(1e-12) * (T::one() + b.inertia.amax()) {
                return Err(ChainError::BadBody(i, "inertia must be symmetric"));
            }
            if b.frame.orthonormality_error() > c(1e-9) {
                return Err(ChainError::BadBody(i, "frame rotation is not orthonormal"));
            }
            let mi = spatial_inertia(b.mass, &b.com, &b.inertia);
            if i == 0 && mi.cholesky().is_none() {
                return Err(ChainError::BadBody(0, "spacecraft inertia must be positive definite"));
            }
            let a = adjoint_inv(&b.frame);
            inertia_base_frame.push(a.transpose() * mi * a);
            inertia_body.push(mi);
        }
        Ok(Self {
            n,
            xi_vec: xi.iter().map(|x| x.to_vector()).collect(),
            gbar: bodies.iter().map(|b| b.frame).collect(),
            masses: bodies.iter().map(|b| b.mass).collect(),
            xi,
            bodies,
            inertia_body,
            inertia_base_frame,
        })
    }

    pub fn total_mass(&self) -> T {
        self.masses.iter().fold(T::zero(), |a, &m| a + m)
    }

    pub(crate) fn check_q(&self, q: &[T]) -> Result<(), ChainError> {
        if q.len() != self.n {
            return Err(ChainError::Dimension { expected: self.n, got: q.len() });
        }
        Ok(())
    }
}

/// Per-configuration kinematic quantities shared by the Jacobians and dynamics.
#[derive(Debug, Clone)]
pub struct KinCache<T: Real> {
    /// `exp(xi_i q_i)`, index 0 unused (identity).
    pub expo: Vec<PoseSE3<T>>,
    /// `exp(xi_1 q_1) ... exp(xi_i q_i)`, index 0 is identity.
    pub partial: Vec<PoseSE3<T>>,
    /// Spatial joint twists `Ad(partial[i-1]) xi_i` in the spacecraft frame, index 0 unused.
    pub s: Vec<Vector6<T>>,
}

impl<T: Real> KinCache<T> {
    pub fn new(chain: &ChainModel<T>, q: &[T]) -> Self {
        let n = chain.n;
        let mut expo = Vec::with_capacity(n + 1);
        let mut partial = Vec::with_capacity(n + 1);
        let mut s = Vec::with_capacity(n + 1);
        expo.push(PoseSE3::identity());
        partial.push(PoseSE3::identity());
        s.push(Vector6::zeros());
        for i in 1..=n {
            let e = exp_se3(&chain.xi[i - 1], q[i - 1]);
            s.push(adjoint(&partial[i - 1]) * chain.xi_vec[i - 1]);
            partial.push(partial[i - 1].compose(&e));
            expo.push(e);
        }
        Self { expo, partial, s }
    }

    /// Body frame `i` relative to the spacecraft frame.
    pub fn body_pose(&self, chain: &ChainModel<T>, i: usize) -> PoseSE3<T> {
        self.partial[i].compose(&chain.gbar[i])
    }
}

/// Poses `g0_i = exp(xi_1 q_1) ... exp(xi_i q_i) gbar_i` for `i = 0..=n`.
pub fn fk<T: Real>(chain: &ChainModel<T>, q: &[T]) -> Result<Vec<PoseSE3<T>>, ChainError> {
    chain.check_q(q)?;
    let k = KinCache::new(chain, q);
    Ok((0..=chain.n).map(|i| k.body_pose(chain, i)).collect())
}

/// CoM positions of every body in the spacecraft frame.
pub fn com_positions<T: Real>(chain: &ChainModel<T>, q: &[T]) -> Result<Vec<Vector3<T>>, ChainError> {
    let g = fk(chain, q)?;
    Ok(g.iter().zip(&chain.bodies).map(|(g, b)| g.transform_point(&b.com)).collect())
}

/// Spacecraft-frame Jacobian of body `i`, `[I6 | s_1 .. s_i | 0]`.
pub fn spacecraft_jacobian<T: Real>(chain: &ChainModel<T>, q: &[T], i: usize) -> Result<DMatrix<T>, ChainError> {
    chain.check_q(q)?;
    if i > chain.n {
        return Err(ChainError::Dimension { expected: chain.n, got: i });
    }
    let k = KinCache::new(chain, q);
    Ok(spacecraft_jacobian_cached(chain.n, &k, i))
}

pub(crate) fn spacecraft_jacobian_cached<T: Real>(n: usize, k: &KinCache<T>, i: usize) -> DMatrix<T> {
    let mut j = DMatrix::zeros(6, 6 + n);
    j.view_mut((0, 0), (6, 6)).fill_with_identity();
    for col in 1..=i {
        j.view_mut((0, 5 + col), (6, 1)).copy_from(&k.s[col]);
    }
    j
}

/// Body Jacobian of body `i`, `Ad(g0_i)^-1` applied to the spacecraft Jacobian.
pub fn body_jacobian<T: Real>(chain: &ChainModel<T>, q: &[T], i: usize) -> Result<DMatrix<T>, ChainError> {
    let j0 = spacecraft_jacobian(chain, q, i)?;
    let k = KinCache::new(chain, q);
    let a = adjoint_inv(&k.body_pose(chain, i));
    Ok(dm6(&a) * j0)
}

/// Factor pair `(L, Xi)` of the total Jacobian `J = L Xi`.
#[derive(Debug, Clone)]
pub struct TotalJacobian<T: Real> {
    pub l: DMatrix<T>,
    pub xi: DMatrix<T>,
}

impl<T: Real> TotalJacobian<T> {
    pub fn product(&self) -> DMatrix<T> {
        &self.l * &self.xi
    }
}

/// Builds `L` from the blocks `Ad(exp(-xi_i q_i) ... exp(-xi_j q_j))` and the constant `Xi`.
pub fn total_jacobian<T: Real>(chain: &ChainModel<T>, q: &[T]) -> Result<TotalJacobian<T>, ChainError> {
    chain.check_q(q)?;
    let n = chain.n;
    let k = KinCache::new(chain, q);
    let dim = 6 * (n + 1);
    let mut l = DMatrix::zeros(dim, dim);
    for i in 0..=n {
        l.view_mut((6 * i, 6 * i), (6, 6)).fill_with_identity();
        // running product exp(-xi_i q_i) ... exp(-xi_{j+1} q_{j+1})
        let mut acc = PoseSE3::identity();
        for j in (0..i).rev() {
            acc = acc.compose(&k.expo[j + 1].inverse());
            l.view_mut((6 * i, 6 * j), (6, 6)).copy_from(&dm6(&adjoint(&acc)));
        }
    }
    let mut xi = DMatrix::zeros(dim, 6 + n);
    xi.view_mut((0, 0), (6, 6)).fill_with_identity();
    for j in 1..=n {
        xi.view_mut((6 * j, 5 + j), (6, 1)).copy_from(&chain.xi_vec[j - 1]);
    }
    Ok(TotalJacobian { l, xi })
}

/// End-effector Jacobians `(Je0, Jem)` of the last body.
pub fn ee_jacobians<T: Real>(chain: &ChainModel<T>, q: &[T]) -> Result<(Matrix6<T>, DMatrix<T>), ChainError> {
    chain.check_q(q)?;
    let k = KinCache::new(chain, q);
    Ok(ee_jacobians_cached(chain, &k))
}

pub(crate) fn ee_jacobians_cached<T: Real>(chain: &ChainModel<T>, k: &KinCache<T>) -> (Matrix6<T>, DMatrix<T>) {
    let n = chain.n;
    let je0 = adjoint_inv(&k.body_pose(chain, n));
    let mut jem = DMatrix::zeros(6, n);
    for j in 1..=n {
        jem.view_mut((0, j - 1), (6, 1)).copy_from(&(je0 * k.s[j]));
    }
    (je0, jem)
}

/// Generalized Jacobian `Jem - Je0 A`.
pub fn generalized_jacobian<T: Real>(je0: &Matrix6<T>, jem: &DMatrix<T>, a: &DMatrix<T>) -> DMatrix<T> {
    jem - dm6(je0) * a
}

/// Static 6x6 to dynamic matrix.
pub fn dm6<T: Real>(m: &Matrix6<T>) -> DMatrix<T> {
    DMatrix::from_iterator(6, 6, m.iter().copied())
}
