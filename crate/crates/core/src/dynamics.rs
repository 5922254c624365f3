//! Reduced structural matrices and the orbit-forced equations of motion.

use crate::kinematics::{ee_jacobians_cached, ChainError, ChainModel, KinCache};
use crate::liegroup::{ad6, ad_apply, hat3, adjoint_inv, coad_apply, embed_twist2, rot_z, PoseSE3};
use crate::orbit::OrbitFrameKinematics;
use crate::scalar::{c, Accum, DoubleWord, Real};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, Matrix3, Matrix6, Vector3, Vector6};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("{which} is not positive definite (condition estimate {cond:e})")]
    Singular { which: &'static str, cond: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Dynamic state of the reduced system.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState<T: Real> {
    pub t: T,
    pub theta: T,
    /// Spacecraft frame relative to the orbital frame.
    pub g_base: PoseSE3<T>,
    pub q: DVector<T>,
    pub qdot: DVector<T>,
    /// Locked momentum relative to the orbital frame, spacecraft axes.
    pub p0: Vector6<T>,
}

impl<T: Real> ReducedState<T> {
    pub fn is_finite(&self) -> bool {
        let fin = |x: &T| x.is_finite();
        fin(&self.t)
            && fin(&self.theta)
            && self.g_base.rotation.iter().all(fin)
            && self.g_base.translation.iter().all(fin)
            && self.q.iter().all(fin)
            && self.qdot.iter().all(fin)
            && self.p0.iter().all(fin)
    }
}

/// External generalized forces.
#[derive(Debug, Clone, PartialEq)]
pub struct InputWrenches<T: Real> {
    /// Wrench on the spacecraft, collocated with its body velocity.
    pub f0: Vector6<T>,
    /// Joint torques.
    pub fm: DVector<T>,
    /// Wrench on the end effector in its body frame.
    pub fe: Vector6<T>,
    /// `-du/dq` of an optional shape potential.
    pub u_grad: DVector<T>,
}

impl<T: Real> InputWrenches<T> {
    pub fn zeros(n: usize) -> Self {
        Self { f0: Vector6::zeros(), fm: DVector::zeros(n), fe: Vector6::zeros(), u_grad: DVector::zeros(n) }
    }
}

/// Locked-system mass blocks.
#[derive(Debug, Clone)]
pub struct MassBlocks<T: Real> {
    pub m0: Matrix6<T>,
    pub m0m: DMatrix<T>,
    pub mm: DMatrix<T>,
}

/// Composite inertias `C_j` in the spacecraft frame together with the joint twists.
struct Composite<T: Real> {
    c: Vec<Matrix6<T>>,
    s: Vec<Vector6<T>>,
}

fn composite<T: Real>(chain: &ChainModel<T>, k: &KinCache<T>) -> Composite<T> {
    let n = chain.n;
    let mut acc = (T::zero(), Vector3::zeros(), Matrix3::zeros());
    let mut c = vec![Matrix6::zeros(); n + 1];
    for i in (0..=n).rev() {
        let b = &chain.bodies[i];
        let g = k.body_pose(chain, i);
        let p = g.transform_point(&b.com);
        let hp = hat3(&p);
        let jo = g.rotation * b.inertia * g.rotation.transpose() - hp * hp * b.mass;
        acc = (acc.0 + b.mass, acc.1 + p * b.mass, acc.2 + jo);
        c[i] = structured_inertia(acc.0, &acc.1, &acc.2);
    }
    Composite { c, s: k.s.clone() }
}

/// Spatial inertia `[[m I, -h^], [h^, J]]` from mass, first moment and inertia about the origin.
fn structured_inertia<T: Real>(m: T, h: &Vector3<T>, j: &Matrix3<T>) -> Matrix6<T> {
    let hh = hat3(h);
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * m));
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-hh));
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&hh);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&((j + j.transpose()) * c::<T>(0.5)));
    out
}

fn blocks_from<T: Real>(n: usize, comp: &Composite<T>) -> MassBlocks<T> {
    let mut m0m = DMatrix::zeros(6, n);
    let mut cols = Vec::with_capacity(n + 1);
    cols.push(Vector6::zeros());
    for j in 1..=n {
        let u = comp.c[j] * comp.s[j];
        m0m.set_column(j - 1, &u);
        cols.push(u);
    }
    let mut mm = DMatrix::zeros(n, n);
    for j in 1..=n {
        for l in j..=n {
            let v = comp.s[j].dot(&cols[l]);
            mm[(j - 1, l - 1)] = v;
            mm[(l - 1, j - 1)] = v;
        }
    }
    MassBlocks { m0: sym6(&comp.c[0]), m0m, mm }
}

fn sym6<T: Real>(m: &Matrix6<T>) -> Matrix6<T> {
    (m + m.transpose()) * c::<T>(0.5)
}

fn symd<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * c::<T>(0.5)
}

/// Mass blocks `(M0, M0m, Mm)` by composite-inertia accumulation.
pub fn mass_blocks<T: Real>(chain: &ChainModel<T>, q: &[T]) -> Result<MassBlocks<T>, ChainError> {
    chain.check_q(q)?;
    let k = KinCache::new(chain, q);
    Ok(blocks_from(chain.n, &composite(chain, &k)))
}

/// Full `(6+n)`-square mass matrix `J^T diag(M_i) J` from the total Jacobian.
pub fn mass_matrix_total<T: Real>(chain: &ChainModel<T>, q: &[T]) -> Result<DMatrix<T>, ChainError> {
    let tj = crate::kinematics::total_jacobian(chain, q)?;
    let j = tj.product();
    let dim = 6 * (chain.n + 1);
    let mut d = DMatrix::zeros(dim, dim);
    for i in 0..=chain.n {
        d.view_mut((6 * i, 6 * i), (6, 6)).copy_from(&chain.inertia_base_frame[i]);
    }
    Ok(j.transpose() * d * j)
}

/// Assembles `[[M0, M0m], [M0m^T, Mm]]`.
pub fn full_mass_matrix<T: Real>(b: &MassBlocks<T>) -> DMatrix<T> {
    let n = b.mm.nrows();
    let mut m = DMatrix::zeros(6 + n, 6 + n);
    m.view_mut((0, 0), (6, 6)).copy_from(&b.m0);
    m.view_mut((0, 6), (6, n)).copy_from(&b.m0m);
    m.view_mut((6, 0), (n, 6)).copy_from(&b.m0m.transpose());
    m.view_mut((6, 6), (n, n)).copy_from(&b.mm);
    m
}

/// Ratio of extreme eigenvalues of a symmetric matrix.
pub fn condition_number<T: Real>(m: &DMatrix<T>) -> T {
    let e = m.clone().symmetric_eigen().eigenvalues;
    let hi = e.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    let lo = e.iter().fold(T::max_value().unwrap(), |a, &b| a.min(b.abs()));
    hi / lo
}

fn chol<T: Real>(m: DMatrix<T>, which: &'static str) -> Result<Cholesky<T, Dyn>, DynamicsError> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(DynamicsError::NonFinite(which));
    }
    let probe = m.clone();
    m.cholesky().ok_or_else(|| DynamicsError::Singular { which, cond: condition_number(&probe).to_f64_lossy() })
}

/// Mechanical connection `A = M0^-1 M0m` via a Cholesky solve.
pub fn connection<T: Real>(m0: &Matrix6<T>, m0m: &DMatrix<T>) -> Result<DMatrix<T>, DynamicsError> {
    Ok(chol(dm6(m0), "M0")?.solve(m0m))
}

/// Reduced shape inertia `Mm - M0m^T A`.
pub fn reduced_shape_inertia<T: Real>(b: &MassBlocks<T>, a: &DMatrix<T>) -> DMatrix<T> {
    symd(&(&b.mm - b.m0m.transpose() * a))
}

fn dm6<T: Real>(m: &Matrix6<T>) -> DMatrix<T> {
    crate::kinematics::dm6(m)
}

/// Partial derivatives of the structural matrices, one entry per joint.
#[derive(Debug, Clone)]
pub struct Partials<T: Real> {
    pub dm0: Vec<Matrix6<T>>,
    pub dm0m: Vec<DMatrix<T>>,
    pub dmm: Vec<DMatrix<T>>,
    pub da: Vec<DMatrix<T>>,
    pub dmhat: Vec<DMatrix<T>>,
}

fn partials_from<T: Real>(
    n: usize,
    comp: &Composite<T>,
    a: &DMatrix<T>,
    m0c: &Cholesky<T, Dyn>,
) -> Partials<T> {
    let s = &comp.s;
    let cc = &comp.c;
    let u: Vec<Vector6<T>> = (0..=n).map(|j| if j == 0 { Vector6::zeros() } else { cc[j] * s[j] }).collect();
    let mut out = Partials {
        dm0: Vec::with_capacity(n),
        dm0m: Vec::with_capacity(n),
        dmm: Vec::with_capacity(n),
        da: Vec::with_capacity(n),
        dmhat: Vec::with_capacity(n),
    };
    for k in 1..=n {
        let adk = ad6(&s[k]);
        let dm0 = -(adk.transpose() * cc[k] + cc[k] * adk);
        let mut dm0m = DMatrix::zeros(6, n);
        for j in 1..=n {
            let col = if j >= k {
                -coad_apply(&s[k], &u[j])
            } else {
                -coad_apply(&s[k], &(cc[k] * s[j])) - cc[k] * ad_apply(&s[k], &s[j])
            };
            dm0m.set_column(j - 1, &col);
        }
        let mut dmm = DMatrix::zeros(n, n);
        for j in 1..=n {
            let dsj = if k < j { ad_apply(&s[k], &s[j]) } else { Vector6::zeros() };
            for l in j..=n {
                let v = dsj.dot(&u[l]) + s[j].dot(&dm0m.column(l - 1));
                dmm[(j - 1, l - 1)] = v;
                dmm[(l - 1, j - 1)] = v;
            }
        }
        let dm0d = dm6(&dm0);
        let da = m0c.solve(&(&dm0m - &dm0d * a));
        let t1 = dm0m.transpose() * a;
        let dmhat = symd(&(&dmm - &t1 - t1.transpose() + a.transpose() * &dm0d * a));
        out.dm0.push(dm0);
        out.dm0m.push(dm0m);
        out.dmm.push(dmm);
        out.da.push(da);
        out.dmhat.push(dmhat);
    }
    out
}

/// Analytic partials of `M0`, `M0m`, `Mm`, `A` and the reduced shape inertia.
pub fn partials<T: Real>(chain: &ChainModel<T>, q: &[T]) -> Result<Partials<T>, DynamicsError> {
    chain.check_q(q)?;
    let k = KinCache::new(chain, q);
    let comp = composite(chain, &k);
    let b = blocks_from(chain.n, &comp);
    let m0c = chol(dm6(&b.m0), "M0")?;
    let a = m0c.solve(&b.m0m);
    Ok(partials_from(chain.n, &comp, &a, &m0c))
}

/// Coriolis matrix of the shape equation.
pub fn coriolis_shape<T: Real>(dmhat: &[DMatrix<T>], qdot: &DVector<T>) -> DMatrix<T> {
    let n = qdot.len();
    let mut cm = DMatrix::zeros(n, n);
    for (k, d) in dmhat.iter().enumerate() {
        cm += d * qdot[k];
    }
    for (i, d) in dmhat.iter().enumerate() {
        let row = (d.transpose() * qdot).transpose() * c::<T>(0.5);
        let mut r = cm.row_mut(i);
        r -= row;
    }
    cm
}

/// Orbital-frame contribution to the spacecraft's inertial velocity and momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitMomentum<T: Real> {
    pub v_orb: Vector6<T>,
    pub p_orb: Vector6<T>,
    pub pdot_orb: Vector6<T>,
    /// Time derivative of `v_orb`.
    pub vdot_orb: Vector6<T>,
}

/// Computes `V_orb = Ad(g^-1) V`, `P_orb = M0 V_orb` and its time derivative.
pub fn p_orbit<T: Real>(
    m0: &Matrix6<T>,
    m0_dot: &Matrix6<T>,
    g_base: &PoseSE3<T>,
    v0: &Vector6<T>,
    kin: Option<&OrbitFrameKinematics<T>>,
) -> OrbitMomentum<T> {
    let Some(kin) = kin else {
        let z = Vector6::zeros();
        return OrbitMomentum { v_orb: z, p_orb: z, pdot_orb: z, vdot_orb: z };
    };
    let ag = adjoint_inv(g_base);
    let w = ag * embed_twist2(&kin.velocity).to_vector();
    let wdot = -ad_apply(v0, &w) + ag * embed_twist2(&kin.velocity_dot).to_vector();
    OrbitMomentum { v_orb: w, p_orb: m0 * w, pdot_orb: m0_dot * w + m0 * wdot, vdot_orb: wdot }
}

/// Structural matrices and forcing terms at one state.
#[derive(Debug, Clone)]
pub struct StructuralEval<T: Real> {
    pub m0: Matrix6<T>,
    pub m0m: DMatrix<T>,
    pub mm: DMatrix<T>,
    pub a: DMatrix<T>,
    pub mhat: DMatrix<T>,
    pub partials: Partials<T>,
    pub cm: DMatrix<T>,
    pub nm: DMatrix<T>,
    pub norb: DVector<T>,
    pub orbit: OrbitMomentum<T>,
    pub f_eta0: Vector6<T>,
    pub fhat_m: DVector<T>,
    pub f_orb: Vector6<T>,
    pub f_grav: Vector6<T>,
    pub je0: Matrix6<T>,
    pub jem: DMatrix<T>,
    pub v0: Vector6<T>,
}

/// State derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives<T: Real> {
    pub p0_dot: Vector6<T>,
    pub qddot: DVector<T>,
    /// Spacecraft velocity relative to the orbital frame; `g_base' = g_base V0^`.
    pub v0: Vector6<T>,
}

/// External generalized forces `(F_eta0, Fhat_m)`.
pub fn forcing<T: Real>(
    a: &DMatrix<T>,
    inputs: &InputWrenches<T>,
    je0: &Matrix6<T>,
    jem: &DMatrix<T>,
) -> (Vector6<T>, DVector<T>) {
    let je0t_fe = je0.transpose() * inputs.fe;
    let f_eta0 = inputs.f0 + je0t_fe;
    let at = a.transpose();
    let fhat = &inputs.u_grad + &inputs.fm - &at * dv6(&inputs.f0) + jem.transpose() * dv6(&inputs.fe) - &at * dv6(&je0t_fe);
    (f_eta0, fhat)
}

fn dv6<T: Real>(v: &Vector6<T>) -> DVector<T> {
    DVector::from_column_slice(v.as_slice())
}

/// Uniform gravity wrench `M0 [R^T a; 0]` for the orbital-frame acceleration `a`.
fn gravity_wrench<T: Real>(m0: &Matrix6<T>, g_base: &PoseSE3<T>, kin: Option<&OrbitFrameKinematics<T>>) -> Vector6<T> {
    match kin {
        None => Vector6::zeros(),
        Some(k) => {
            let a = g_base.rotation.transpose() * Vector3::new(k.gravity.x, k.gravity.y, T::zero());
            m0 * Vector6::new(a.x, a.y, a.z, T::zero(), T::zero(), T::zero())
        }
    }
}

struct Core<T: Real> {
    b: MassBlocks<T>,
    a: DMatrix<T>,
    mhat: DMatrix<T>,
    m0c: Cholesky<T, Dyn>,
    p: Partials<T>,
    je0: Matrix6<T>,
    jem: DMatrix<T>,
}

fn core<T: Real>(chain: &ChainModel<T>, q: &[T]) -> Result<Core<T>, DynamicsError> {
    chain.check_q(q)?;
    let k = KinCache::new(chain, q);
    let comp = composite(chain, &k);
    let b = blocks_from(chain.n, &comp);
    let m0c = chol(dm6(&b.m0), "M0")?;
    let a = m0c.solve(&b.m0m);
    let mhat = reduced_shape_inertia(&b, &a);
    let p = partials_from(chain.n, &comp, &a, &m0c);
    let (je0, jem) = ee_jacobians_cached(chain, &k);
    Ok(Core { b, a, mhat, m0c, p, je0, jem })
}

fn solve6<T: Real>(m0c: &Cholesky<T, Dyn>, v: &Vector6<T>) -> Vector6<T> {
    let x = m0c.solve(&dv6(v));
    Vector6::from_iterator(x.iter().copied())
}

/// Full evaluation of every structural term and the state derivatives.
pub fn evaluate<T: Real>(
    chain: &ChainModel<T>,
    kin: Option<&OrbitFrameKinematics<T>>,
    state: &ReducedState<T>,
    inputs: &InputWrenches<T>,
) -> Result<(StructuralEval<T>, Derivatives<T>), DynamicsError> {
    if !state.is_finite() {
        return Err(DynamicsError::NonFinite("state"));
    }
    let n = chain.n;
    let cr = core(chain, state.q.as_slice())?;
    let qd = &state.qdot;
    let m0 = cr.b.m0;
    let m0inv_p0 = solve6(&cr.m0c, &state.p0);
    let aq = &cr.a * qd;
    let v0 = m0inv_p0 - Vector6::from_iterator(aq.iter().copied());
    let mut m0_dot = Matrix6::zeros();
    for (k, d) in cr.p.dm0.iter().enumerate() {
        m0_dot += d * qd[k];
    }
    let orb = p_orbit(&m0, &m0_dot, &state.g_base, &v0, kin);
    let f_grav = gravity_wrench(&m0, &state.g_base, kin);
    let omega = orb.v_orb + v0;
    let p_tot = orb.p_orb + state.p0;
    let u = orb.v_orb + m0inv_p0;
    let (f_eta0, fhat_m) = forcing(&cr.a, inputs, &cr.je0, &cr.jem);

    let p0_dot = coad_apply(&omega, &p_tot) + f_grav + f_eta0 - orb.pdot_orb;
    let f_orb = orb.pdot_orb - coad_apply(&v0, &orb.p_orb) - coad_apply(&orb.v_orb, &p_tot) - f_grav;

    let cm = coriolis_shape(&cr.p.dmhat, qd);
    let mut adot = DMatrix::zeros(6, n);
    for (k, d) in cr.p.da.iter().enumerate() {
        adot += d * qd[k];
    }
    let at = cr.a.transpose();
    let shape_n = |om: &Vector6<T>, p: &Vector6<T>, uu: &Vector6<T>| -> DVector<T> {
        let mut v = adot.transpose() * dv6(p) + &at * dv6(&coad_apply(om, p));
        for i in 0..n {
            let dq = &cr.p.da[i] * qd;
            v[i] -= p.dot(&Vector6::from_iterator(dq.iter().copied()));
            v[i] -= uu.dot(&(cr.p.dm0[i] * uu)) * c::<T>(0.5);
        }
        v
    };
    let n_total = shape_n(&omega, &p_tot, &u);
    let mut nm = adot.transpose() + &at * dm6(&ad6(&v0).transpose());
    for i in 0..n {
        let row_a = (&cr.p.da[i] * qd).transpose();
        let w = solve6(&cr.m0c, &(cr.p.dm0[i] * m0inv_p0));
        let mut r = nm.row_mut(i);
        r -= &row_a;
        for j in 0..6 {
            r[j] -= w[j] * c::<T>(0.5);
        }
    }
    let norb = &n_total - &nm * dv6(&state.p0);
    let rhs = &fhat_m - &n_total - &cm * qd;
    let qddot = chol(cr.mhat.clone(), "reduced shape inertia")?.solve(&rhs);
    if !qddot.iter().all(|x| x.is_finite()) || !p0_dot.iter().all(|x| x.is_finite()) {
        return Err(DynamicsError::NonFinite("derivative"));
    }
    let ev = StructuralEval {
        m0,
        m0m: cr.b.m0m,
        mm: cr.b.mm,
        a: cr.a,
        mhat: cr.mhat,
        partials: cr.p,
        cm,
        nm,
        norb,
        orbit: orb,
        f_eta0,
        fhat_m,
        f_orb,
        f_grav,
        je0: cr.je0,
        jem: cr.jem,
        v0,
    };
    Ok((ev, Derivatives { p0_dot, qddot, v0 }))
}

/// Right-hand side of the equations of motion.
pub fn eom_rhs<T: Real>(
    chain: &ChainModel<T>,
    kin: Option<&OrbitFrameKinematics<T>>,
    state: &ReducedState<T>,
    inputs: &InputWrenches<T>,
) -> Result<Derivatives<T>, DynamicsError> {
    evaluate(chain, kin, state, inputs).map(|(_, d)| d)
}

/// Locked momentum `P0 = M0 (V0 + A qdot)` from a relative spacecraft velocity.
pub fn momentum_from_velocity<T: Real>(chain: &ChainModel<T>, q: &[T], v0: &Vector6<T>, qdot: &DVector<T>) -> Result<Vector6<T>, ChainError> {
    let b = mass_blocks(chain, q)?;
    let m0m_qd = &b.m0m * qdot;
    Ok(b.m0 * v0 + Vector6::from_iterator(m0m_qd.iter().copied()))
}

/// Conserved quantities relative to the free-falling non-rotating frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Invariants<T: Real> {
    /// Spacecraft velocity relative to the orbital frame.
    pub v0: Vector6<T>,
    /// Momentum transported to the free-falling frame axes.
    pub momentum: Vector6<T>,
    pub kinetic_energy: T,
    pub cond_m0: T,
}

/// Momentum and kinetic energy relative to the frame that shares the
/// orbital-frame origin and the orbital-frame axes at `theta0`.
///
/// `theta` and `theta_dot` describe the orbital frame; both are ignored in
/// free-floating runs (pass `theta0` and zero).
pub fn invariants<T: Real>(
    chain: &ChainModel<T>,
    state: &ReducedState<T>,
    theta0: T,
    theta_dot: T,
) -> Result<Invariants<T>, DynamicsError> {
    let q = state.q.as_slice();
    chain.check_q(q)?;
    let b = mass_blocks(chain, q)?;
    let m0c = chol(dm6(&b.m0), "M0")?;
    let a = m0c.solve(&b.m0m);
    let mhat = reduced_shape_inertia(&b, &a);
    let rel = solve6(&m0c, &state.p0);
    let aq = &a * &state.qdot;
    let v0 = rel - Vector6::from_iterator(aq.iter().copied());
    let z = T::zero();
    let w = adjoint_inv(&state.g_base) * Vector6::new(z, z, z, z, z, theta_dot);
    let u = w + rel;
    let p = b.m0 * u;
    let g_f = PoseSE3::new(rot_z(state.theta - theta0), Vector3::zeros()).compose(&state.g_base);
    let momentum = adjoint_inv(&g_f).transpose() * p;
    let ke = (u.dot(&p) + state.qdot.dot(&(&mhat * &state.qdot))) * c::<T>(0.5);
    Ok(Invariants { v0, momentum, kinetic_energy: ke, cond_m0: condition_number(&dm6(&b.m0)) })
}

/// Kinetic energy from per-body velocities, `sum 1/2 V_i^T M_i V_i`, for an
/// inertial spacecraft velocity `omega`.
pub fn kinetic_energy_bodies<T: Real>(chain: &ChainModel<T>, q: &[T], omega: &Vector6<T>, qdot: &DVector<T>) -> Result<T, ChainError> {
    chain.check_q(q)?;
    let k = KinCache::new(chain, q);
    let mut ke = T::zero();
    let mut v_sc = *omega;
    for i in 0..=chain.n {
        if i > 0 {
            v_sc += k.s[i] * qdot[i - 1];
        }
        let vi = adjoint_inv(&k.body_pose(chain, i)) * v_sc;
        ke += vi.dot(&(chain.inertia_body[i] * vi)) * c::<T>(0.5);
    }
    Ok(ke)
}

/// State derivatives from velocity-contracted terms, without forming the
/// per-joint partial matrices.
///
/// Time derivatives of the composite inertias come from the body velocities
/// relative to the spacecraft, and the configuration gradient of the kinetic
/// energy from the composite momenta.
pub fn derivatives<T: Real>(
    chain: &ChainModel<T>,
    kin: Option<&OrbitFrameKinematics<T>>,
    state: &ReducedState<T>,
    inputs: &InputWrenches<T>,
) -> Result<Derivatives<T>, DynamicsError> {
    derivatives_in::<T, T>(chain, kin, state, inputs)
}

/// Same as [`derivatives`], with every contraction that involves the orbital
/// frame velocity carried in double-word arithmetic.
pub fn derivatives_compensated<T: Real>(
    chain: &ChainModel<T>,
    kin: Option<&OrbitFrameKinematics<T>>,
    state: &ReducedState<T>,
    inputs: &InputWrenches<T>,
) -> Result<Derivatives<T>, DynamicsError> {
    derivatives_in::<T, DoubleWord<T>>(chain, kin, state, inputs)
}

fn cross_s<T: Real, S: Accum<T>>(a: &[S], b: &[S]) -> [S; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn ad_s<T: Real, S: Accum<T>>(u: &Vector6<S>, v: &Vector6<S>) -> Vector6<S> {
    let (uv, uw, vv, vw) = (&u.as_slice()[..3], &u.as_slice()[3..], &v.as_slice()[..3], &v.as_slice()[3..]);
    let (a, b, w) = (cross_s::<T, S>(uw, vv), cross_s::<T, S>(uv, vw), cross_s::<T, S>(uw, vw));
    Vector6::new(a[0] + b[0], a[1] + b[1], a[2] + b[2], w[0], w[1], w[2])
}

fn coad_s<T: Real, S: Accum<T>>(v: &Vector6<S>, p: &Vector6<S>) -> Vector6<S> {
    let (vv, vw, f, tau) = (&v.as_slice()[..3], &v.as_slice()[3..], &p.as_slice()[..3], &p.as_slice()[3..]);
    let (a, b, t) = (cross_s::<T, S>(f, vw), cross_s::<T, S>(f, vv), cross_s::<T, S>(tau, vw));
    Vector6::new(a[0], a[1], a[2], b[0] + t[0], b[1] + t[1], b[2] + t[2])
}

fn derivatives_in<T: Real, S: Accum<T>>(
    chain: &ChainModel<T>,
    kin: Option<&OrbitFrameKinematics<T>>,
    state: &ReducedState<T>,
    inputs: &InputWrenches<T>,
) -> Result<Derivatives<T>, DynamicsError> {
    if !state.is_finite() {
        return Err(DynamicsError::NonFinite("state"));
    }
    let q = state.q.as_slice();
    chain.check_q(q)?;
    let n = chain.n;
    let qd = &state.qdot;
    let k = KinCache::new(chain, q);
    let s = &k.s;

    let mut vr = vec![Vector6::zeros(); n + 1];
    for j in 1..=n {
        vr[j] = vr[j - 1] + s[j] * qd[j - 1];
    }
    let mut cc = vec![Matrix6::zeros(); n + 1];
    let mut qb = vec![Matrix6::zeros(); n + 1];
    let mut cdot = vec![Matrix6::zeros(); n + 1];
    let mut acc = (T::zero(), Vector3::zeros(), Matrix3::zeros());
    let mut x = Matrix6::zeros();
    for i in (0..=n).rev() {
        let b = &chain.bodies[i];
        let g = k.body_pose(chain, i);
        let p = g.transform_point(&b.com);
        let hp = hat3(&p);
        let jo = g.rotation * b.inertia * g.rotation.transpose() - hp * hp * b.mass;
        qb[i] = structured_inertia(b.mass, &(p * b.mass), &jo);
        acc = (acc.0 + b.mass, acc.1 + p * b.mass, acc.2 + jo);
        cc[i] = structured_inertia(acc.0, &acc.1, &acc.2);
        if i > 0 {
            x += qb[i] * ad6(&vr[i]);
        }
        cdot[i] = -(x + x.transpose());
    }
    let m0 = cc[0];
    let m0_dot = cdot[0];
    let m0c = m0.cholesky().ok_or_else(|| DynamicsError::Singular { which: "M0", cond: condition_number(&dm6(&m0)).to_f64_lossy() })?;

    let mut u = vec![Vector6::zeros(); n + 1];
    let mut ud = vec![Vector6::zeros(); n + 1];
    let mut a = vec![Vector6::zeros(); n + 1];
    let mut sd = vec![Vector6::zeros(); n + 1];
    for j in 1..=n {
        u[j] = cc[j] * s[j];
        sd[j] = ad_apply(&vr[j - 1], &s[j]);
        ud[j] = cdot[j] * s[j] + cc[j] * sd[j];
        a[j] = m0c.solve(&u[j]);
    }
    let mut mhat = DMatrix::zeros(n, n);
    let mut mm_dot_qd = DVector::<T>::zeros(n);
    for j in 1..=n {
        for l in j..=n {
            let v = s[j].dot(&u[l]) - u[j].dot(&a[l]);
            mhat[(j - 1, l - 1)] = v;
            mhat[(l - 1, j - 1)] = v;
            let w = sd[j].dot(&u[l]) + s[j].dot(&ud[l]);
            mm_dot_qd[j - 1] += w * qd[l - 1];
            if l != j {
                mm_dot_qd[l - 1] += w * qd[j - 1];
            }
        }
    }
    let mut aq = Vector6::zeros();
    let mut udq = Vector6::zeros();
    for j in 1..=n {
        aq += a[j] * qd[j - 1];
        udq += ud[j] * qd[j - 1];
    }
    let m0d_aq = m0_dot * aq;
    let m0inv_p0 = m0c.solve(&state.p0);
    let v0 = m0inv_p0 - aq;

    let (f_eta0, fhat) = if inputs.f0.iter().all(|v| v.is_zero()) && inputs.fe.iter().all(|v| v.is_zero()) {
        (Vector6::zeros(), &inputs.u_grad + &inputs.fm)
    } else {
        let (je0, jem) = ee_jacobians_cached(chain, &k);
        let mut am = DMatrix::zeros(6, n);
        for j in 1..=n {
            am.set_column(j - 1, &a[j]);
        }
        forcing(&am, inputs, &je0, &jem)
    };

    let l6 = |v: &Vector6<T>| v.map(S::lift);
    let lm = |m: &Matrix6<T>| m.map(S::lift);
    let m0s = lm(&m0);
    let m0ds = lm(&m0_dot);
    let v0s = l6(&v0);
    let (w, wdot, grav) = match kin {
        None => (Vector6::zeros(), Vector6::zeros(), Vector6::zeros()),
        Some(kf) => {
            let ag = lm(&adjoint_inv(&state.g_base));
            let w = ag * l6(&embed_twist2(&kf.velocity).to_vector());
            let wdot = -ad_s::<T, S>(&v0s, &w) + ag * l6(&embed_twist2(&kf.velocity_dot).to_vector());
            let ga = state.g_base.rotation.transpose() * Vector3::new(kf.gravity.x, kf.gravity.y, T::zero());
            let grav = m0s * l6(&Vector6::new(ga.x, ga.y, ga.z, T::zero(), T::zero(), T::zero()));
            (w, wdot, grav)
        }
    };
    let omega = w + v0s;
    let p_tot = m0s * w + l6(&state.p0);
    let uu = w + l6(&m0inv_p0);
    let co = coad_s::<T, S>(&omega, &p_tot);
    let m0d_u = m0ds * uu;
    let pdot_orb = m0ds * w + m0s * wdot;

    let mut hsum = Vector6::<S>::zeros();
    let mut rhs = fhat;
    for i in (1..=n).rev() {
        hsum += lm(&qb[i]) * (omega + l6(&vr[i]));
        let grad = -ad_s::<T, S>(&l6(&s[i]), &(omega + l6(&vr[i - 1]))).dot(&hsum);
        let adot_p = l6(&ud[i]).dot(&uu) - l6(&a[i]).dot(&m0d_u);
        let mhat_dot_qd = mm_dot_qd[i - 1] - ud[i].dot(&aq) - a[i].dot(&udq) + a[i].dot(&m0d_aq);
        rhs[i - 1] += (grad - adot_p - l6(&a[i]).dot(&co)).lower() - mhat_dot_qd;
    }
    let qddot = chol(mhat, "reduced shape inertia")?.solve(&rhs);
    let p0_dot = (co + grav + l6(&f_eta0) - pdot_orb).map(S::lower);
    if !qddot.iter().all(|x| x.is_finite()) || !p0_dot.iter().all(|x| x.is_finite()) {
        return Err(DynamicsError::NonFinite("derivative"));
    }
    Ok(Derivatives { p0_dot, qddot, v0 })
}
