//! SO(3)/SE(3)/SE(2) algebra with linear-first twists `[v; w]`.

use crate::scalar::{c, Real};
use nalgebra::{Matrix3, Matrix4, Matrix6, Vector2, Vector3, Vector6};

/// Skew-symmetric matrix of `w`, so that `hat3(w) * u == w x u`.
#[inline]
pub fn hat3<T: Real>(w: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -w.z, w.y, w.z, z, -w.x, -w.y, w.x, z)
}

/// Inverse of [`hat3`] for a skew-symmetric input.
#[inline]
pub fn vee3<T: Real>(m: &Matrix3<T>) -> Vector3<T> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Body velocity or screw axis, linear part first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist<T: Real> {
    pub linear: Vector3<T>,
    pub angular: Vector3<T>,
}

impl<T: Real> Twist<T> {
    pub fn new(linear: Vector3<T>, angular: Vector3<T>) -> Self {
        Self { linear, angular }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_vector(v: &Vector6<T>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
    }

    pub fn to_vector(&self) -> Vector6<T> {
        stack6(&self.linear, &self.angular)
    }

    /// 4x4 matrix form in se(3).
    pub fn hat(&self) -> Matrix4<T> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&self.angular));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.linear);
        m
    }
}

/// Generalized force dual to [`Twist`], force part first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wrench<T: Real> {
    pub force: Vector3<T>,
    pub torque: Vector3<T>,
}

impl<T: Real> Wrench<T> {
    pub fn new(force: Vector3<T>, torque: Vector3<T>) -> Self {
        Self { force, torque }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn from_vector(v: &Vector6<T>) -> Self {
        Self::new(v.fixed_rows::<3>(0).into_owned(), v.fixed_rows::<3>(3).into_owned())
    }

    pub fn to_vector(&self) -> Vector6<T> {
        stack6(&self.force, &self.torque)
    }

    /// Power pairing with a twist.
    pub fn pair(&self, v: &Twist<T>) -> T {
        self.force.dot(&v.linear) + self.torque.dot(&v.angular)
    }
}

#[inline]
pub(crate) fn stack6<T: Real>(a: &Vector3<T>, b: &Vector3<T>) -> Vector6<T> {
    Vector6::new(a.x, a.y, a.z, b.x, b.y, b.z)
}

/// Rigid displacement stored as rotation plus translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE3<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> PoseSE3<T> {
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    pub fn from_translation(p: Vector3<T>) -> Self {
        Self::new(Matrix3::identity(), p)
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    pub fn transform_point(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<T> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<T>) -> Self {
        Self::new(m.fixed_view::<3, 3>(0, 0).into_owned(), m.fixed_view::<3, 1>(0, 3).into_owned())
    }

    /// Frobenius norm of `R^T R - I`.
    pub fn orthonormality_error(&self) -> T {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm()
    }

    /// Projects the rotation block onto SO(3) (polar decomposition).
    pub fn renormalize(&self) -> Self {
        Self::new(nearest_rotation(&self.rotation), self.translation)
    }
}

/// Nearest rotation in the Frobenius sense.
pub fn nearest_rotation<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let mut r = u * vt;
    if r.determinant() < T::zero() {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -T::one();
        r = u * d * vt;
    }
    r
}

/// Planar rigid displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE2<T: Real> {
    pub angle: T,
    pub translation: Vector2<T>,
}

impl<T: Real> PoseSE2<T> {
    pub fn new(angle: T, translation: Vector2<T>) -> Self {
        Self { angle, translation }
    }

    pub fn identity() -> Self {
        Self::new(T::zero(), Vector2::zeros())
    }
}

/// Rotation about z by `a`.
pub fn rot_z<T: Real>(a: T) -> Matrix3<T> {
    let (s, co) = a.sin_cos();
    let (z, o) = (T::zero(), T::one());
    Matrix3::new(co, -s, z, s, co, z, z, z, o)
}

/// Embeds a planar pose into SE(3) as a z-rotation with zero z-translation.
pub fn embed_se2<T: Real>(g: &PoseSE2<T>) -> PoseSE3<T> {
    PoseSE3::new(
        rot_z(g.angle),
        Vector3::new(g.translation.x, g.translation.y, T::zero()),
    )
}

/// Embeds `(vx, vy, wz)` as a spatial twist.
pub fn embed_twist2<T: Real>(v: &Vector3<T>) -> Twist<T> {
    let z = T::zero();
    Twist::new(Vector3::new(v.x, v.y, z), Vector3::new(z, z, v.z))
}

/// Left inverse of [`embed_twist2`].
pub fn project_twist2<T: Real>(v: &Twist<T>) -> Vector3<T> {
    Vector3::new(v.linear.x, v.linear.y, v.angular.z)
}

/// Exponential of the screw `xi` scaled by `q`.
pub fn exp_se3<T: Real>(xi: &Twist<T>, q: T) -> PoseSE3<T> {
    let w = xi.angular * q;
    let v = xi.linear * q;
    let phi2 = w.norm_squared();
    let phi = phi2.sqrt();
    let (a, b, cc) = if phi < c(1e-2) {
        let series = |k: [f64; 5]| {
            let mut acc = T::zero();
            for &kj in k.iter().rev() {
                acc = acc * phi2 + c(kj);
            }
            acc
        };
        (
            series([1.0, -1.0 / 6.0, 1.0 / 120.0, -1.0 / 5040.0, 1.0 / 362880.0]),
            series([0.5, -1.0 / 24.0, 1.0 / 720.0, -1.0 / 40320.0, 1.0 / 3628800.0]),
            series([1.0 / 6.0, -1.0 / 120.0, 1.0 / 5040.0, -1.0 / 362880.0, 1.0 / 39916800.0]),
        )
    } else {
        let s = phi.sin();
        let h = (phi * c(0.5)).sin() / (phi * c(0.5));
        (s / phi, h * h * c(0.5), (phi - s) / (phi2 * phi))
    };
    let wh = hat3(&w);
    let wh2 = wh * wh;
    let r = Matrix3::identity() + wh * a + wh2 * b;
    let vm = Matrix3::identity() + wh * b + wh2 * cc;
    PoseSE3::new(r, vm * v)
}

/// Exponential of a twist vector.
#[inline]
pub fn exp6<T: Real>(u: &Vector6<T>) -> PoseSE3<T> {
    exp_se3(&Twist::from_vector(u), T::one())
}

/// Adjoint `[[R, p^R], [0, R]]`.
pub fn adjoint<T: Real>(g: &PoseSE3<T>) -> Matrix6<T> {
    let r = &g.rotation;
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(hat3(&g.translation) * r));
    m
}

/// Adjoint of the inverse pose, without forming the inverse.
pub fn adjoint_inv<T: Real>(g: &PoseSE3<T>) -> Matrix6<T> {
    let rt = g.rotation.transpose();
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rt);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&rt);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-(rt * hat3(&g.translation))));
    m
}

/// Lie bracket operator `[[w^, v^], [0, w^]]`.
pub fn ad<T: Real>(v: &Twist<T>) -> Matrix6<T> {
    ad6(&v.to_vector())
}

/// [`ad`] on a raw 6-vector.
pub fn ad6<T: Real>(v: &Vector6<T>) -> Matrix6<T> {
    let wh = hat3(&Vector3::new(v[3], v[4], v[5]));
    let vh = hat3(&Vector3::new(v[0], v[1], v[2]));
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&wh);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&wh);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&vh);
    m
}

/// `ad(u) * v` without forming the matrix.
#[inline]
pub fn ad_apply<T: Real>(u: &Vector6<T>, v: &Vector6<T>) -> Vector6<T> {
    let (uv, uw) = (Vector3::new(u[0], u[1], u[2]), Vector3::new(u[3], u[4], u[5]));
    let (vv, vw) = (Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]));
    stack6(&(uw.cross(&vv) + uv.cross(&vw)), &uw.cross(&vw))
}

/// `ad(v)^T * p` without forming the matrix.
#[inline]
pub fn coad_apply<T: Real>(v: &Vector6<T>, p: &Vector6<T>) -> Vector6<T> {
    let (vv, vw) = (Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]));
    let (f, tau) = (Vector3::new(p[0], p[1], p[2]), Vector3::new(p[3], p[4], p[5]));
    stack6(&f.cross(&vw), &(f.cross(&vv) + tau.cross(&vw)))
}

/// Matrix `C(P)` with `C(P) * V == ad(V)^T * P`.
pub fn coad_tilde<T: Real>(p: &Wrench<T>) -> Matrix6<T> {
    let fh = hat3(&p.force);
    let th = hat3(&p.torque);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&fh);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&fh);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&th);
    m
}

/// Differential of the exponential, `sum_k ad(u)^k / (k+1)!`.
///
/// With `g = a * exp(u)`, the body velocity is `dexp(-u) * du/dt`.
pub fn dexp<T: Real>(u: &Vector6<T>) -> Matrix6<T> {
    let a = ad6(u);
    let mut term = Matrix6::identity();
    let mut sum = Matrix6::identity();
    let tol = T::default_epsilon() * c(0.01);
    for k in 1..40 {
        term = term * a / c::<T>((k + 1) as f64);
        sum += term;
        if term.amax() < tol {
            break;
        }
    }
    sum
}

/// Fourth-order truncation of the inverse right-trivialized differential.
///
/// For `g = a * exp(u)` with body velocity `v`, returns `du/dt`.
#[inline]
pub fn dexpinv_right4<T: Real>(u: &Vector6<T>, v: &Vector6<T>) -> Vector6<T> {
    let uv = ad_apply(u, v);
    v + uv * c::<T>(0.5) + ad_apply(u, &uv) / c::<T>(12.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hat_of_z() {
        let m = hat3(&Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(m, Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        let u = hat3(&Vector3::new(1.0, 0.0, 0.0)) * Vector3::new(0.0, 1.0, 0.0);
        assert_eq!(u, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn exp_quarter_turn() {
        let xi = Twist::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.0));
        let g = exp_se3(&xi, std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(g.rotation, rot_z(std::f64::consts::FRAC_PI_2), epsilon = 1e-15);
        assert_relative_eq!(g.translation.norm(), 0.0, epsilon = 1e-15);
        assert_eq!(exp_se3(&xi, 0.0), PoseSE3::identity());
    }

    #[test]
    fn pure_translation_adjoint() {
        let p = Vector3::new(1.0, -2.0, 0.5);
        let a = adjoint(&PoseSE3::from_translation(p));
        let h = hat3(&p);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[(i, j)], if i == j { 1.0 } else { 0.0 });
                assert_eq!(a[(i, j + 3)], h[(i, j)]);
                assert_eq!(a[(i + 3, j)], 0.0);
            }
        }
    }

    #[test]
    fn embeddings() {
        let t = embed_twist2(&Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(t.linear, Vector3::new(1.0, 2.0, 0.0));
        assert_eq!(t.angular, Vector3::new(0.0, 0.0, 3.0));
        assert_eq!(embed_twist2(&Vector3::<f64>::zeros()), Twist::zero());
        let g = embed_se2(&PoseSE2::new(std::f64::consts::PI, Vector2::new(1.0, 0.0)));
        assert_relative_eq!(g.rotation, rot_z(std::f64::consts::PI), epsilon = 1e-15);
        assert_eq!(g.translation, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn zero_twist_brackets() {
        let z = Twist::<f64>::zero();
        assert_eq!(ad(&z), Matrix6::zeros());
    }
}
