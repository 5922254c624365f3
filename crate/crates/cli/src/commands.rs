//! Subcommand bodies. Each returns a summary whose `lines` are `key=value` records.

use crate::config::{ConfigFile, Overrides};
use crate::csvio;
use crate::error::CliError;
use lpke::sim::{self, BenchSummary, Mode, RunRecord, SimError};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

/// Mean Earth radius used to turn perigee altitudes into orbits, m.
pub const EARTH_RADIUS_M: f64 = 6371e3;

pub fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::Numerical { step, source } => CliError::Numerical { step, msg: source.to_string() },
        SimError::NonFinite(step) => CliError::Numerical { step, msg: "non-finite state".into() },
        SimError::Config(msg) => CliError::schema("sim", msg),
        SimError::Chain(e) => CliError::schema("chain.bodies", e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub mode: Mode,
    pub steps: usize,
    pub rows: usize,
    pub wall_time: f64,
    pub momentum_drift: f64,
    pub energy_drift: f64,
    pub output: Option<PathBuf>,
}

impl SimulateSummary {
    fn from_record(rec: &RunRecord<f64>, output: Option<PathBuf>) -> Self {
        let (momentum_drift, energy_drift) = rec.invariant_drift();
        Self { mode: rec.mode, steps: rec.steps, rows: rec.samples.len(), wall_time: rec.wall_time, momentum_drift, energy_drift, output }
    }

    pub fn lines(&self) -> Vec<String> {
        let mut l = vec![
            format!("mode={}", self.mode),
            format!("steps={}", self.steps),
            format!("rows={}", self.rows),
            format!("wall_time_s={:.6}", self.wall_time),
            format!("momentum_drift={:e}", self.momentum_drift),
            format!("energy_drift={:e}", self.energy_drift),
        ];
        if let Some(p) = &self.output {
            l.push(format!("output={}", p.display()));
        }
        l
    }
}

pub fn run_config(cfg: &ConfigFile) -> Result<RunRecord<f64>, CliError> {
    let sc = cfg.to_sim_config()?;
    sim::run(&sc).map_err(sim_error)
}

pub fn simulate(config: &Path, overrides: &Overrides, output: Option<&Path>) -> Result<SimulateSummary, CliError> {
    let mut cfg = ConfigFile::load(config)?;
    cfg.apply(overrides);
    let rec = run_config(&cfg)?;
    if let Some(out) = output {
        csvio::write(out, &rec.samples, cfg.joint_count())?;
    }
    Ok(SimulateSummary::from_record(&rec, output.map(Path::to_path_buf)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSummary {
    pub rows: usize,
    pub max_abs: Vec<f64>,
    pub rms: Vec<f64>,
    pub max_abs_dq: f64,
    pub max_abs_dp0: f64,
}

impl CompareSummary {
    pub fn lines(&self) -> Vec<String> {
        let mut l = vec![format!("rows={}", self.rows)];
        for (i, (m, r)) in self.max_abs.iter().zip(&self.rms).enumerate() {
            l.push(format!("q{}_max_abs={m:e}", i + 1));
            l.push(format!("q{}_rms={r:e}", i + 1));
        }
        l.push(format!("max_abs_dq={:e}", self.max_abs_dq));
        l.push(format!("max_abs_dP0={:e}", self.max_abs_dp0));
        l
    }
}

pub fn compare_trajectories(a: &csvio::Trajectory, b: &csvio::Trajectory) -> Result<CompareSummary, CliError> {
    if a.header != b.header {
        return Err(CliError::GridMismatch("column layouts differ".into()));
    }
    if a.rows.len() != b.rows.len() {
        return Err(CliError::GridMismatch(format!("{} rows vs {} rows", a.rows.len(), b.rows.len())));
    }
    for (i, (x, y)) in a.rows.iter().zip(&b.rows).enumerate() {
        if x[0] != y[0] {
            return Err(CliError::GridMismatch(format!("row {}: t={} vs t={}", i + 1, x[0], y[0])));
        }
    }
    let n = a.joints;
    let q0 = a.column("q1").expect("layout has q1");
    let p0 = a.column("P0_1").expect("layout has P0_1");
    let mut max_abs = vec![0.0f64; n];
    let mut sq = vec![0.0f64; n];
    let mut max_abs_dp0 = 0.0f64;
    for (x, y) in a.rows.iter().zip(&b.rows) {
        for j in 0..n {
            let d = (x[q0 + j] - y[q0 + j]).abs();
            max_abs[j] = max_abs[j].max(d);
            sq[j] += d * d;
        }
        for j in 0..6 {
            max_abs_dp0 = max_abs_dp0.max((x[p0 + j] - y[p0 + j]).abs());
        }
    }
    let rows = a.rows.len();
    let rms = sq.iter().map(|s| if rows == 0 { 0.0 } else { (s / rows as f64).sqrt() }).collect();
    let max_abs_dq = max_abs.iter().copied().fold(0.0, f64::max);
    Ok(CompareSummary { rows, max_abs, rms, max_abs_dq, max_abs_dp0 })
}

pub fn compare(a: &Path, b: &Path) -> Result<CompareSummary, CliError> {
    compare_trajectories(&csvio::read(a)?, &csvio::read(b)?)
}

/// Sweep grid over eccentricity and perigee altitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub ecc: (f64, f64),
    pub ecc_samples: usize,
    pub altitude_m: (f64, f64),
    pub altitude_samples: usize,
    pub modes: Vec<Mode>,
    pub threads: usize,
    /// Also measure the joint deviation from the oracle in every cell.
    pub oracle: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub steps: usize,
    pub wall_time: f64,
    pub momentum_drift: f64,
    pub energy_drift: f64,
    pub oracle_dq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub ecc: f64,
    pub altitude_m: f64,
    pub semi_major_axis_m: f64,
    pub mode: Mode,
    pub result: Result<CellStats, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub modes: Vec<Mode>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.result.is_err()).count()
    }

    fn ok(&self) -> impl Iterator<Item = (&SweepCell, &CellStats)> {
        self.cells.iter().filter_map(|c| c.result.as_ref().ok().map(|s| (c, s)))
    }

    pub fn max_momentum_drift(&self) -> f64 {
        self.ok().map(|(_, s)| s.momentum_drift).fold(0.0, f64::max)
    }

    pub fn max_energy_drift(&self) -> f64 {
        self.ok().map(|(_, s)| s.energy_drift).fold(0.0, f64::max)
    }

    pub fn max_oracle_dq(&self) -> Option<f64> {
        self.ok().filter_map(|(_, s)| s.oracle_dq).reduce(f64::max)
    }

    pub fn mean_wall_time(&self, mode: Mode) -> Option<f64> {
        let ts: Vec<f64> = self.ok().filter(|(c, _)| c.mode == mode).map(|(_, s)| s.wall_time).collect();
        (!ts.is_empty()).then(|| ts.iter().sum::<f64>() / ts.len() as f64)
    }

    /// Mean excess wall time of `mode` over Mode I, in percent.
    pub fn excess_percent(&self, mode: Mode) -> Option<f64> {
        Some((self.mean_wall_time(mode)? / self.mean_wall_time(Mode::ModeI)? - 1.0) * 100.0)
    }

    pub fn mode_i_fastest(&self) -> Option<bool> {
        let base = self.mean_wall_time(Mode::ModeI)?;
        let others: Vec<f64> = [Mode::ModeII, Mode::ModeIII].iter().filter_map(|&m| self.mean_wall_time(m)).collect();
        (!others.is_empty()).then(|| others.iter().all(|&t| base < t))
    }

    pub fn lines(&self) -> Vec<String> {
        let mut l = Vec::with_capacity(self.cells.len() + 8);
        for c in &self.cells {
            let head = format!("cell={} ecc={} altitude_m={} semi_major_axis_m={} mode={}", c.index, c.ecc, c.altitude_m, c.semi_major_axis_m, c.mode);
            l.push(match &c.result {
                Ok(s) => {
                    let mut t = format!(
                        "{head} status=ok steps={} wall_time_s={:.6} momentum_drift={:e} energy_drift={:e}",
                        s.steps, s.wall_time, s.momentum_drift, s.energy_drift
                    );
                    if let Some(d) = s.oracle_dq {
                        t.push_str(&format!(" oracle_max_abs_dq={d:e}"));
                    }
                    t
                }
                Err(e) => format!("{head} status=failed error={:?}", e),
            });
        }
        l.push(format!("cells={}", self.cells.len()));
        l.push(format!("failures={}", self.failures()));
        l.push(format!("max_momentum_drift={:e}", self.max_momentum_drift()));
        l.push(format!("max_energy_drift={:e}", self.max_energy_drift()));
        if let Some(d) = self.max_oracle_dq() {
            l.push(format!("max_oracle_dq={d:e}"));
        }
        for &m in &self.modes {
            if let Some(t) = self.mean_wall_time(m) {
                l.push(format!("mean_wall_time_s_{}={t:.6}", m));
            }
        }
        for m in [Mode::ModeII, Mode::ModeIII] {
            if let Some(x) = self.excess_percent(m) {
                l.push(format!("excess_percent_{m}={x:.1}"));
            }
        }
        if let Some(f) = self.mode_i_fastest() {
            l.push(format!("mode_i_fastest={f}"));
        }
        l
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Base config moved onto the orbit with the given eccentricity and perigee altitude.
fn cell_config(base: &ConfigFile, ecc: f64, altitude_m: f64, mode: Mode) -> ConfigFile {
    let mut cfg = base.clone();
    let orbit = cfg.orbit.get_or_insert_with(|| crate::config::OrbitSection {
        semi_major_axis_m: None,
        mu_orbit: None,
        ecc: 0.0,
        gm: lpke::orbit::GM_EARTH,
        theta0_rad: 0.0,
        paper_exact_mean_motion: false,
    });
    orbit.semi_major_axis_m = Some((EARTH_RADIUS_M + altitude_m) / (1.0 - ecc));
    orbit.mu_orbit = None;
    orbit.ecc = ecc;
    cfg.sim.mode = mode.name().to_string();
    cfg
}

fn sweep_cell(cfg: &ConfigFile, oracle: bool) -> Result<CellStats, String> {
    let sc = cfg.to_sim_config().map_err(|e| e.to_string())?;
    let rec = sim::run(&sc).map_err(|e| sim_error(e).to_string())?;
    let (momentum_drift, energy_drift) = rec.invariant_drift();
    let oracle_dq = if oracle {
        let orec = sim::run(&sc.with_mode(Mode::Oracle)).map_err(|e| format!("oracle: {}", sim_error(e)))?;
        Some(rec.samples.iter().zip(&orec.samples).map(|(x, y)| (&x.q - &y.q).amax()).fold(0.0, f64::max))
    } else {
        None
    };
    Ok(CellStats { steps: rec.steps, wall_time: rec.wall_time, momentum_drift, energy_drift, oracle_dq })
}

pub fn sweep_config(base: &ConfigFile, spec: &SweepSpec) -> Result<SweepReport, CliError> {
    if spec.ecc.0 < 0.0 || spec.ecc.1 >= 1.0 || spec.ecc.0 > spec.ecc.1 {
        return Err(CliError::schema("sweep.ecc", "range must lie in [0, 1) and be ordered"));
    }
    if !(spec.altitude_m.0 <= spec.altitude_m.1) {
        return Err(CliError::schema("sweep.altitude_m", "range must be ordered"));
    }
    if spec.modes.is_empty() {
        return Err(CliError::schema("sweep.modes", "at least one mode is required"));
    }
    cell_config(base, spec.ecc.0, spec.altitude_m.1, spec.modes[0]).to_sim_config()?;
    let mut jobs = Vec::new();
    for e in grid(spec.ecc.0, spec.ecc.1, spec.ecc_samples) {
        for h in grid(spec.altitude_m.0, spec.altitude_m.1, spec.altitude_samples) {
            for &m in &spec.modes {
                jobs.push((jobs.len(), e, h, m));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads.max(1))
        .build()
        .map_err(|e| CliError::Other(format!("thread pool: {e}")))?;
    let cells = pool.install(|| {
        jobs.par_iter()
            .map(|&(index, ecc, altitude_m, mode)| {
                let cfg = cell_config(base, ecc, altitude_m, mode);
                let semi_major_axis_m = cfg.orbit.as_ref().and_then(|o| o.semi_major_axis_m).unwrap_or(f64::NAN);
                SweepCell { index, ecc, altitude_m, semi_major_axis_m, mode, result: sweep_cell(&cfg, spec.oracle) }
            })
            .collect()
    });
    Ok(SweepReport { cells, modes: spec.modes.clone() })
}

pub fn sweep(config: &Path, overrides: &Overrides, spec: &SweepSpec) -> Result<SweepReport, CliError> {
    let mut cfg = ConfigFile::load(config)?;
    cfg.apply(overrides);
    sweep_config(&cfg, spec)
}

pub fn bench_lines(b: &BenchSummary) -> Vec<String> {
    let mut l = Vec::new();
    for r in &b.rows {
        let mut s = format!("mode={} runs={} mean_s={:.6} min_s={:.6} max_s={:.6}", r.mode, r.runs, r.mean, r.min, r.max);
        if r.mode != Mode::ModeI {
            if let Some(x) = b.excess_percent(r.mode) {
                s.push_str(&format!(" excess_percent={x:.1}"));
            }
        }
        l.push(s);
    }
    l.push(format!("mode_i_fastest={}", b.mode_i_fastest()));
    l
}

pub fn bench(config: &Path, overrides: &Overrides, runs: usize) -> Result<BenchSummary, CliError> {
    if runs == 0 {
        return Err(CliError::schema("runs", "must be at least 1"));
    }
    let mut cfg = ConfigFile::load(config)?;
    cfg.apply(overrides);
    cfg.sim.mode = Mode::ModeI.name().to_string();
    let sc = cfg.to_sim_config()?;
    sim::bench(&sc, runs).map_err(sim_error)
}
