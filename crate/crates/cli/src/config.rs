//! Structured TOML configuration and its translation into a simulation setup.

use crate::error::CliError;
use lpke::kinematics::{twist_from_axis, Body, ChainModel};
use lpke::liegroup::{exp6, PoseSE3};
use lpke::orbit::{OrbitError, OrbitModel, GM_EARTH};
use lpke::sim::{InitialMotion, InitialState, Mode, OracleGravity, SimConfig, WrenchSchedule};
use lpke::InputWrenches;
use nalgebra::{DVector, Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit: Option<OrbitSection>,
    pub chain: ChainSection,
    pub initial: InitialSection,
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "WrenchSection::is_empty")]
    pub wrenches: WrenchSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_major_axis_m: Option<f64>,
    /// Specific orbital angular momentum, m^2/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_orbit: Option<f64>,
    pub ecc: f64,
    #[serde(default = "default_gm")]
    pub gm: f64,
    #[serde(default)]
    pub theta0_rad: f64,
    #[serde(default)]
    pub paper_exact_mean_motion: bool,
}

fn default_gm() -> f64 {
    GM_EARTH
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexOrder {
    /// Spacecraft first, end effector last.
    Theory,
    /// End effector first, spacecraft last.
    Paper5,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub index_order: IndexOrder,
    pub bodies: Vec<BodyEntry>,
}

/// One rigid body and the revolute joint attaching it to its inboard neighbour.
///
/// The spacecraft carries no joint. Positions are in the spacecraft reference frame
/// at zero joint angles; `com_offset_m` is relative to `ref_pose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyEntry {
    pub mass_kg: f64,
    pub com_offset_m: [f64; 3],
    pub inertia_diag_kgm2: [f64; 3],
    /// Multiplier applied to `inertia_diag_kgm2`.
    #[serde(default = "one")]
    pub inertia_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_point_m: Option<[f64; 3]>,
    #[serde(default)]
    pub ref_pose: PoseEntry,
}

fn one() -> f64 {
    1.0
}

/// Rigid transform as a translation and a rotation vector (axis times angle).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    #[serde(default)]
    pub translation_m: [f64; 3],
    #[serde(default)]
    pub rotation_vec_rad: [f64; 3],
}

impl PoseEntry {
    pub fn to_pose(&self) -> PoseSE3<f64> {
        let r = self.rotation_vec_rad;
        let mut g = exp6(&Vector6::new(0.0, 0.0, 0.0, r[0], r[1], r[2]));
        g.translation = Vector3::from(self.translation_m);
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub q_rad: Vec<f64>,
    pub qdot_rad_s: Vec<f64>,
    #[serde(default)]
    pub base_pose: PoseEntry,
    /// Spacecraft momentum `[linear; angular]`.
    #[serde(rename = "P0", default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<[f64; 6]>,
    /// Spacecraft body velocity `[linear; angular]` relative to the orbital frame.
    #[serde(rename = "V0", default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<[f64; 6]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GravityEntry {
    #[default]
    Uniform,
    PointMass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub mode: String,
    pub dt_s: f64,
    pub duration_s: f64,
    #[serde(default = "one_usize")]
    pub output_stride: usize,
    #[serde(default = "default_renormalize")]
    pub renormalize_every: usize,
    #[serde(default)]
    pub oracle_gravity: GravityEntry,
}

fn one_usize() -> usize {
    1
}

fn default_renormalize() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrenchSection {
    #[serde(default)]
    pub schedule: Vec<WrenchEntry>,
}

impl WrenchSection {
    fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }
}

/// Inputs held constant from `t_start_s` until the next entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WrenchEntry {
    pub t_start_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<[f64; 6]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fm: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fe: Option<[f64; 6]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_grad: Option<Vec<f64>>,
}

/// Command-line values that replace config entries before validation.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<String>,
    pub dt: Option<f64>,
    pub duration: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let key = if key == "." { "<root>".to_string() } else { key };
            CliError::schema(key, e.into_inner().message().trim().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Other(format!("config serialization: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        crate::write_atomic(path, self.to_toml()?.as_bytes())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(m) = &o.mode {
            self.sim.mode = m.clone();
        }
        if let Some(dt) = o.dt {
            self.sim.dt_s = dt;
        }
        if let Some(d) = o.duration {
            self.sim.duration_s = d;
        }
    }

    pub fn mode(&self) -> Result<Mode, CliError> {
        Mode::parse(&self.sim.mode).ok_or_else(|| CliError::schema("sim.mode", format!("unknown mode `{}`", self.sim.mode)))
    }

    pub fn joint_count(&self) -> usize {
        self.chain.bodies.len().saturating_sub(1)
    }

    /// Maps a per-joint list from the file order to spacecraft-first order.
    fn joint_list(&self, v: &[f64]) -> Vec<f64> {
        match self.chain.index_order {
            IndexOrder::Theory => v.to_vec(),
            IndexOrder::Paper5 => v.iter().rev().copied().collect(),
        }
    }

    fn bodies_theory(&self) -> Vec<(usize, &BodyEntry)> {
        let b = self.chain.bodies.iter().enumerate();
        match self.chain.index_order {
            IndexOrder::Theory => b.collect(),
            IndexOrder::Paper5 => b.rev().collect(),
        }
    }

    pub fn orbit_model(&self) -> Result<Option<OrbitModel<f64>>, CliError> {
        let Some(o) = &self.orbit else { return Ok(None) };
        finite("orbit.ecc", &[o.ecc])?;
        finite("orbit.gm", &[o.gm])?;
        finite("orbit.theta0_rad", &[o.theta0_rad])?;
        if !(0.0..1.0).contains(&o.ecc) {
            return Err(CliError::schema("orbit.ecc", format!("eccentricity {} outside [0, 1)", o.ecc)));
        }
        if o.gm <= 0.0 {
            return Err(CliError::schema("orbit.gm", "must be positive"));
        }
        let built = match (o.semi_major_axis_m, o.mu_orbit) {
            (Some(a), None) => {
                finite("orbit.semi_major_axis_m", &[a])?;
                OrbitModel::from_semi_major_axis(a, o.ecc, o.gm, o.theta0_rad, o.paper_exact_mean_motion)
            }
            (None, Some(h)) => {
                finite("orbit.mu_orbit", &[h])?;
                OrbitModel::from_momentum(h, o.ecc, o.gm, o.theta0_rad, o.paper_exact_mean_motion)
            }
            _ => {
                return Err(CliError::schema(
                    "orbit.semi_major_axis_m",
                    "exactly one of `semi_major_axis_m` and `mu_orbit` is required",
                ))
            }
        };
        built.map(Some).map_err(|e| match e {
            OrbitError::NotElliptic(_) => CliError::schema("orbit.ecc", e.to_string()),
            OrbitError::InvalidParameter(k) => CliError::schema(format!("orbit.{k}"), e.to_string()),
            OrbitError::Degenerate(_) => CliError::schema("orbit", e.to_string()),
        })
    }

    pub fn chain_model(&self) -> Result<ChainModel<f64>, CliError> {
        let nb = self.chain.bodies.len();
        if nb < 2 {
            return Err(CliError::schema("chain.bodies", "at least a spacecraft and one link are required"));
        }
        let spacecraft = match self.chain.index_order {
            IndexOrder::Theory => 0,
            IndexOrder::Paper5 => nb - 1,
        };
        let mut bodies = Vec::with_capacity(nb);
        let mut xi = Vec::with_capacity(nb - 1);
        for (k, b) in self.bodies_theory() {
            let key = |f: &str| format!("chain.bodies[{k}].{f}");
            finite(&key("mass_kg"), &[b.mass_kg])?;
            finite(&key("com_offset_m"), &b.com_offset_m)?;
            finite(&key("inertia_diag_kgm2"), &b.inertia_diag_kgm2)?;
            finite(&key("inertia_scale"), &[b.inertia_scale])?;
            finite(&key("ref_pose"), &b.ref_pose.translation_m)?;
            finite(&key("ref_pose"), &b.ref_pose.rotation_vec_rad)?;
            if b.mass_kg < 0.0 {
                return Err(CliError::schema(key("mass_kg"), "must be non-negative"));
            }
            if b.inertia_scale <= 0.0 {
                return Err(CliError::schema(key("inertia_scale"), "must be positive"));
            }
            if b.inertia_diag_kgm2.iter().any(|&x| x < 0.0) {
                return Err(CliError::schema(key("inertia_diag_kgm2"), "must be non-negative"));
            }
            match (k == spacecraft, b.joint_axis, b.joint_point_m) {
                (true, None, None) => {}
                (true, _, _) => return Err(CliError::schema(key("joint_axis"), "the spacecraft has no joint")),
                (false, Some(w), Some(p)) => {
                    finite(&key("joint_axis"), &w)?;
                    finite(&key("joint_point_m"), &p)?;
                    let t = twist_from_axis(&Vector3::from(w), &Vector3::from(p))
                        .map_err(|e| CliError::schema(key("joint_axis"), e.to_string()))?;
                    xi.push(t);
                }
                (false, None, _) => return Err(CliError::schema(key("joint_axis"), "missing")),
                (false, _, None) => return Err(CliError::schema(key("joint_point_m"), "missing")),
            }
            bodies.push(Body {
                mass: b.mass_kg,
                com: Vector3::from(b.com_offset_m),
                inertia: Matrix3::from_diagonal(&(Vector3::from(b.inertia_diag_kgm2) * b.inertia_scale)),
                frame: b.ref_pose.to_pose(),
            });
        }
        ChainModel::new(bodies, xi).map_err(|e| CliError::schema("chain.bodies", e.to_string()))
    }

    pub fn wrench_schedule(&self, n: usize) -> Result<WrenchSchedule<f64>, CliError> {
        let mut segments = Vec::with_capacity(self.wrenches.schedule.len());
        let mut last = f64::NEG_INFINITY;
        for (i, w) in self.wrenches.schedule.iter().enumerate() {
            let key = |f: &str| format!("wrenches.schedule[{i}].{f}");
            finite(&key("t_start_s"), &[w.t_start_s])?;
            if w.t_start_s <= last {
                return Err(CliError::schema(key("t_start_s"), "entries must be strictly increasing in time"));
            }
            last = w.t_start_s;
            let six = |v: &Option<[f64; 6]>, f: &str| -> Result<Vector6<f64>, CliError> {
                let v = v.unwrap_or([0.0; 6]);
                finite(&key(f), &v)?;
                Ok(Vector6::from_column_slice(&v))
            };
            let joints = |v: &Option<Vec<f64>>, f: &str| -> Result<DVector<f64>, CliError> {
                match v {
                    None => Ok(DVector::zeros(n)),
                    Some(v) if v.len() != n => Err(CliError::schema(key(f), format!("expected {n} entries, got {}", v.len()))),
                    Some(v) => {
                        finite(&key(f), v)?;
                        Ok(DVector::from_vec(self.joint_list(v)))
                    }
                }
            };
            let inputs = InputWrenches { f0: six(&w.f0, "f0")?, fm: joints(&w.fm, "fm")?, fe: six(&w.fe, "fe")?, u_grad: joints(&w.u_grad, "u_grad")? };
            segments.push((w.t_start_s, inputs));
        }
        Ok(WrenchSchedule { segments })
    }

    /// Validated simulation setup in spacecraft-first order.
    pub fn to_sim_config(&self) -> Result<SimConfig<f64>, CliError> {
        let mode = self.mode()?;
        let chain = self.chain_model()?;
        let orbit = self.orbit_model()?;
        if orbit.is_none() && !matches!(mode, Mode::Free | Mode::Oracle) {
            return Err(CliError::schema("orbit", format!("mode {mode} needs an [orbit] section")));
        }
        let orbit = if mode == Mode::Free { None } else { orbit };
        let n = chain.n;
        let i = &self.initial;
        for (k, v) in [("initial.q_rad", &i.q_rad), ("initial.qdot_rad_s", &i.qdot_rad_s)] {
            if v.len() != n {
                return Err(CliError::schema(k, format!("expected {n} entries, got {}", v.len())));
            }
            finite(k, v)?;
        }
        finite("initial.base_pose", &i.base_pose.translation_m)?;
        finite("initial.base_pose", &i.base_pose.rotation_vec_rad)?;
        let motion = match (i.p0, i.v0) {
            (Some(p), None) => {
                finite("initial.P0", &p)?;
                InitialMotion::Momentum(Vector6::from_column_slice(&p))
            }
            (None, Some(v)) => {
                finite("initial.V0", &v)?;
                InitialMotion::Velocity(Vector6::from_column_slice(&v))
            }
            _ => return Err(CliError::schema("initial.P0", "exactly one of `P0` and `V0` is required")),
        };
        let s = &self.sim;
        if !(s.dt_s > 0.0 && s.dt_s.is_finite()) {
            return Err(CliError::schema("sim.dt_s", "must be positive and finite"));
        }
        if !(s.duration_s >= 0.0 && s.duration_s.is_finite()) {
            return Err(CliError::schema("sim.duration_s", "must be non-negative and finite"));
        }
        if s.duration_s > 0.0 && s.duration_s < s.dt_s {
            return Err(CliError::schema("sim.duration_s", "must be zero or at least one step"));
        }
        if s.output_stride == 0 {
            return Err(CliError::schema("sim.output_stride", "must be at least 1"));
        }
        let initial = InitialState {
            q: DVector::from_vec(self.joint_list(&i.q_rad)),
            qdot: DVector::from_vec(self.joint_list(&i.qdot_rad_s)),
            g_base: i.base_pose.to_pose(),
            motion,
        };
        let mut cfg = SimConfig::new(mode, s.dt_s, s.duration_s, chain, orbit, initial);
        cfg.output_stride = s.output_stride;
        cfg.renormalize_every = s.renormalize_every;
        cfg.oracle_gravity = match s.oracle_gravity {
            GravityEntry::Uniform => OracleGravity::Uniform,
            GravityEntry::PointMass => OracleGravity::PointMass,
        };
        cfg.wrenches = self.wrench_schedule(n)?;
        cfg.validate().map_err(|e| CliError::schema("sim", e.to_string()))?;
        Ok(cfg)
    }
}

fn finite(key: &str, v: &[f64]) -> Result<(), CliError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(CliError::schema(key, "non-finite value"))
    }
}
