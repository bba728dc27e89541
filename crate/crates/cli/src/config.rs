//! Robot, trajectory and gains files. Angles are degrees on disk, radians in memory.
//!
//! Every file type has a "resolved" form with all fields filled in, which is
//! what gets embedded in outputs.

use std::path::{Path as FsPath, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use sprdyn_core::control::{default_gamma, IdcGains, SlotineLiGains, DEFAULT_K, DEFAULT_KD, DEFAULT_KP, DEFAULT_LAMBDA, SL_DT};
use sprdyn_core::identification::default_excitation;
use sprdyn_core::model::BodyInertia;
use sprdyn_core::robots::rrr3::Branch;
use sprdyn_core::robots::{Diamond, DiamondGeometry, Rrr3, Rrr3Geometry};
use sprdyn_core::spatial::{InertiaVec6, Vec3};
use sprdyn_core::trajectory::{
    cubic_trajectory, multisine_trajectory, random_trajectory, Cubic, Multisine, Path, Trajectory,
    DEFAULT_RATE_HZ,
};
use sprdyn_core::SprModel;

use crate::error::{CliError, CliResult};

fn deg(v: f64) -> f64 {
    v.to_radians()
}

fn to_deg(v: f64) -> f64 {
    v.to_degrees()
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &FsPath) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| CliError::config(path, e.to_string()))
}

/// A scalar applied to every entry, or one value per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spread {
    One(f64),
    Each(Vec<f64>),
}

impl Spread {
    fn expand(&self, n: usize, field: &str, path: &FsPath) -> CliResult<Vec<f64>> {
        match self {
            Spread::One(v) => Ok(vec![*v; n]),
            Spread::Each(v) if v.len() == n => Ok(v.clone()),
            Spread::Each(v) => Err(CliError::config(path, format!("{field}: expected {n} values, got {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyFile {
    pub name: String,
    pub mass_kg: f64,
    pub cm_m: [f64; 3],
    /// `[xx, xy, xz, yy, yz, zz]` about the centre of mass, kg·m².
    pub inertia_cg: [f64; 6],
}

impl BodyFile {
    fn from_body(b: &BodyInertia) -> Self {
        BodyFile { name: b.name.clone(), mass_kg: b.mass, cm_m: b.cm.into(), inertia_cg: InertiaVec6::from_matrix(&b.inertia_cg).0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotFile {
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_deg: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_deg: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_base_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_plat_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1_deg: Option<Spread>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2_deg: Option<Spread>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<[Branch; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bodies: Option<Vec<BodyFile>>,
}

pub struct ResolvedRobot {
    pub model: Box<dyn SprModel>,
    pub config: RobotFile,
}

impl ResolvedRobot {
    pub fn kind(&self) -> &str {
        self.config.kind.as_deref().unwrap_or_default()
    }
}

fn canonical_kind(name: &str) -> Option<&'static str> {
    match name {
        "diamond" => Some("diamond"),
        "rrr3" | "3rrr" | "3-rrr" => Some("rrr3"),
        _ => None,
    }
}

/// A built-in name (`diamond`, `3rrr`) or a path to a robot JSON file.
pub fn load_robot(spec: &str) -> CliResult<ResolvedRobot> {
    if let Some(kind) = canonical_kind(spec) {
        let file = RobotFile { kind: Some(kind.into()), ..RobotFile::default() };
        return resolve_robot(file, FsPath::new(spec));
    }
    let path = PathBuf::from(spec);
    let file: RobotFile = read_json(&path)?;
    resolve_robot(file, &path)
}

fn bodies_from(files: &[BodyFile], expected: usize, path: &FsPath) -> CliResult<Vec<BodyInertia>> {
    if files.len() != expected {
        return Err(CliError::config(path, format!("bodies: expected {expected} entries, got {}", files.len())));
    }
    files
        .iter()
        .enumerate()
        .map(|(i, b)| {
            BodyInertia::new(b.name.clone(), b.mass_kg, Vec3::from(b.cm_m), InertiaVec6(b.inertia_cg).to_matrix())
                .map_err(|e| CliError::config(path, format!("bodies[{i}]: {e}")))
        })
        .collect()
}

pub fn resolve_robot(file: RobotFile, path: &FsPath) -> CliResult<ResolvedRobot> {
    let kind = match &file.kind {
        Some(k) => canonical_kind(k).ok_or_else(|| CliError::config(path, format!("type: unknown robot type `{k}`")))?,
        None => return Err(CliError::config(path, "type: missing (\"diamond\" or \"rrr3\")")),
    };
    let only = |present: bool, field: &str| -> CliResult<()> {
        if present {
            Err(CliError::config(path, format!("{field}: not a {kind} field")))
        } else {
            Ok(())
        }
    };
    let gravity = file.gravity.unwrap_or([0.0, 0.0, -9.81]);
    let g = Vec3::from(gravity);
    match kind {
        "diamond" => {
            only(file.lambda_deg.is_some(), "lambda_deg")?;
            only(file.eta_deg.is_some(), "eta_deg")?;
            only(file.gamma_base_deg.is_some(), "gamma_base_deg")?;
            only(file.beta_plat_deg.is_some(), "beta_plat_deg")?;
            only(file.alpha1_deg.is_some(), "alpha1_deg")?;
            only(file.alpha2_deg.is_some(), "alpha2_deg")?;
            only(file.branch.is_some(), "branch")?;
            let d = Diamond::default_geometry();
            let alpha = file.alpha_deg.map(deg).unwrap_or(d.alpha);
            let beta = file.beta_deg.map(deg).unwrap_or(d.beta);
            let geom = DiamondGeometry::new(alpha, beta).map_err(|e| CliError::config(path, format!("alpha_deg/beta_deg: {e}")))?;
            let bodies = match &file.bodies {
                Some(b) => bodies_from(b, 4, path)?,
                None => Diamond::default_bodies(),
            };
            let config = RobotFile {
                kind: Some(kind.into()),
                alpha_deg: Some(to_deg(alpha)),
                beta_deg: Some(to_deg(beta)),
                gravity: Some(gravity),
                bodies: Some(bodies.iter().map(BodyFile::from_body).collect()),
                ..RobotFile::default()
            };
            let model = Diamond::new(geom, bodies, g).map_err(|e| CliError::config(path, e.to_string()))?;
            Ok(ResolvedRobot { model: Box::new(model), config })
        }
        _ => {
            only(file.alpha_deg.is_some(), "alpha_deg")?;
            only(file.beta_deg.is_some(), "beta_deg")?;
            let d = Rrr3Geometry::symmetric();
            let map3 = |v: Option<[f64; 3]>, dflt: [f64; 3]| v.map(|a| a.map(deg)).unwrap_or(dflt);
            let spread = |v: &Option<Spread>, dflt: [f64; 3], field: &str| -> CliResult<[f64; 3]> {
                match v {
                    Some(s) => {
                        let e = s.expand(3, field, path)?;
                        Ok([deg(e[0]), deg(e[1]), deg(e[2])])
                    }
                    None => Ok(dflt),
                }
            };
            let geom = Rrr3Geometry {
                lambda: map3(file.lambda_deg, d.lambda),
                eta: map3(file.eta_deg, d.eta),
                gamma_base: file.gamma_base_deg.map(deg).unwrap_or(d.gamma_base),
                beta_plat: file.beta_plat_deg.map(deg).unwrap_or(d.beta_plat),
                alpha1: spread(&file.alpha1_deg, d.alpha1, "alpha1_deg")?,
                alpha2: spread(&file.alpha2_deg, d.alpha2, "alpha2_deg")?,
                branch: file.branch.unwrap_or(d.branch),
            };
            let bodies = match &file.bodies {
                Some(b) => bodies_from(b, 7, path)?,
                None => Rrr3::default_bodies(),
            };
            let config = RobotFile {
                kind: Some(kind.into()),
                lambda_deg: Some(geom.lambda.map(to_deg)),
                eta_deg: Some(geom.eta.map(to_deg)),
                gamma_base_deg: Some(to_deg(geom.gamma_base)),
                beta_plat_deg: Some(to_deg(geom.beta_plat)),
                alpha1_deg: Some(Spread::Each(geom.alpha1.map(to_deg).to_vec())),
                alpha2_deg: Some(Spread::Each(geom.alpha2.map(to_deg).to_vec())),
                branch: Some(geom.branch),
                gravity: Some(gravity),
                bodies: Some(bodies.iter().map(BodyFile::from_body).collect()),
                ..RobotFile::default()
            };
            let model = Rrr3::new(geom, bodies, g).map_err(|e| CliError::config(path, e.to_string()))?;
            Ok(ResolvedRobot { model: Box::new(model), config })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Multisine tables; omitted tables fall back to the robot's default excitation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_deg: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes_deg: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies_hz: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases_deg: Option<Vec<Vec<f64>>>,
}

pub struct ResolvedTrajectory {
    /// Analytic form; absent for random trajectories.
    pub path: Option<Path>,
    pub sampled: Trajectory,
    pub config: TrajectoryFile,
}

/// The paper's cubic test motion for the robot type.
pub fn paper_trajectory(kind: &str) -> TrajectoryFile {
    let (from, to) = match kind {
        "diamond" => (vec![0.0, 70.0], vec![120.0, 10.0]),
        _ => (vec![0.0, 0.0, 0.0], vec![10.0, 30.0, 20.0]),
    };
    TrajectoryFile {
        kind: Some("cubic".into()),
        from_deg: Some(from),
        to_deg: Some(to),
        duration_s: Some(1.0),
        rate_hz: Some(DEFAULT_RATE_HZ),
        ..TrajectoryFile::default()
    }
}

fn vec_deg(v: &[f64]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|x| deg(*x)))
}

fn table_deg(t: &[Vec<f64>]) -> Vec<Vec<f64>> {
    t.iter().map(|r| r.iter().map(|x| deg(*x)).collect()).collect()
}

fn table_to_deg(t: &[Vec<f64>]) -> Vec<Vec<f64>> {
    t.iter().map(|r| r.iter().map(|x| to_deg(*x)).collect()).collect()
}

pub fn load_trajectory(path: Option<&FsPath>, robot: &ResolvedRobot) -> CliResult<ResolvedTrajectory> {
    let (file, origin) = match path {
        Some(p) => (read_json::<TrajectoryFile>(p)?, p.to_path_buf()),
        None => (paper_trajectory(robot.kind()), PathBuf::from("<default trajectory>")),
    };
    resolve_trajectory(file, &origin, robot.model.as_ref())
}

pub fn resolve_trajectory(file: TrajectoryFile, origin: &FsPath, model: &dyn SprModel) -> CliResult<ResolvedTrajectory> {
    let m = model.dof();
    let rate = file.rate_hz.unwrap_or(DEFAULT_RATE_HZ);
    if !(rate > 0.0) {
        return Err(CliError::config(origin, "rate_hz: must be positive"));
    }
    let check_len = |v: &[f64], field: &str| -> CliResult<()> {
        if v.len() == m {
            Ok(())
        } else {
            Err(CliError::config(origin, format!("{field}: expected {m} values, got {}", v.len())))
        }
    };
    let kind = file.kind.clone().ok_or_else(|| CliError::config(origin, "kind: missing (\"cubic\", \"multisine\" or \"random\")"))?;
    let bad = |e: sprdyn_core::Error| CliError::config(origin, e.to_string());
    match kind.as_str() {
        "cubic" => {
            let from = file.from_deg.clone().ok_or_else(|| CliError::config(origin, "from_deg: missing"))?;
            let to = file.to_deg.clone().ok_or_else(|| CliError::config(origin, "to_deg: missing"))?;
            check_len(&from, "from_deg")?;
            check_len(&to, "to_deg")?;
            let duration = file.duration_s.unwrap_or(1.0);
            let cubic = Cubic::new(vec_deg(&from), vec_deg(&to), duration).map_err(bad)?;
            let sampled = cubic_trajectory(vec_deg(&from), vec_deg(&to), duration, rate).map_err(bad)?;
            sampled.check_workspace(model.workspace()).map_err(bad)?;
            let config = TrajectoryFile { duration_s: Some(duration), rate_hz: Some(rate), ..file };
            Ok(ResolvedTrajectory { path: Some(Path::Cubic(cubic)), sampled, config })
        }
        "multisine" => {
            let dflt = default_excitation(model);
            let center = match &file.center_deg {
                Some(c) => {
                    check_len(c, "center_deg")?;
                    vec_deg(c)
                }
                None => dflt.center.clone(),
            };
            let amps = file.amplitudes_deg.as_deref().map(table_deg).unwrap_or(dflt.amplitudes.clone());
            let freqs = file.frequencies_hz.clone().unwrap_or(dflt.frequencies.clone());
            let phases = file.phases_deg.as_deref().map(table_deg).unwrap_or(dflt.phases.clone());
            let duration = file.duration_s.unwrap_or(dflt.duration);
            let ms = Multisine::new(center, amps, freqs, phases, duration).map_err(bad)?;
            let sampled = multisine_trajectory(ms.clone(), rate, model.workspace()).map_err(bad)?;
            let config = TrajectoryFile {
                kind: Some(kind),
                center_deg: Some(ms.center.iter().map(|x| to_deg(*x)).collect()),
                amplitudes_deg: Some(table_to_deg(&ms.amplitudes)),
                frequencies_hz: Some(ms.frequencies.clone()),
                phases_deg: Some(table_to_deg(&ms.phases)),
                duration_s: Some(duration),
                rate_hz: Some(rate),
                ..TrajectoryFile::default()
            };
            Ok(ResolvedTrajectory { path: Some(Path::Multisine(ms)), sampled, config })
        }
        "random" => {
            let duration = file.duration_s.unwrap_or(1.0);
            if !(duration >= 0.0) {
                return Err(CliError::config(origin, "duration_s: must be non-negative"));
            }
            let seed = file.seed.unwrap_or(0);
            let n = (duration * rate + 1e-9).floor() as usize + 1;
            let sampled = random_trajectory(model, seed, n, rate);
            let config = TrajectoryFile {
                kind: Some(kind),
                duration_s: Some(duration),
                rate_hz: Some(rate),
                seed: Some(seed),
                ..TrajectoryFile::default()
            };
            Ok(ResolvedTrajectory { path: None, sampled, config })
        }
        other => Err(CliError::config(origin, format!("kind: unknown trajectory kind `{other}`"))),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kp: Option<Spread>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kd: Option<Spread>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Spread>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Spread>,
    /// Diagonal of the adaptation gain over the full parameter vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Spread>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Defaults to the trajectory duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Relative error in the IDC controller's parameter copy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<f64>,
    /// Initial S-L estimate as a multiple of the true parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_hat0_scale: Option<f64>,
    /// Run S-L in base-parameter coordinates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Offset of the initial pose from the desired start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_offset_deg: Option<Vec<f64>>,
}

pub fn load_gains(path: Option<&FsPath>) -> CliResult<(GainsFile, PathBuf)> {
    match path {
        Some(p) => Ok((read_json(p)?, p.to_path_buf())),
        None => Ok((GainsFile::default(), PathBuf::from("<default gains>"))),
    }
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_row_slice(v))
}

#[derive(Debug, Clone)]
pub struct ResolvedGains {
    pub idc: IdcGains,
    pub sl: SlotineLiGains,
    pub dt: f64,
    pub duration: f64,
    pub mismatch: f64,
    pub pi_hat0_scale: f64,
    pub reduced: bool,
    pub reduction_samples: usize,
    pub seed: u64,
    pub initial_offset: DVector<f64>,
    pub config: GainsFile,
}

pub fn resolve_gains(file: GainsFile, origin: &FsPath, model: &dyn SprModel, controller: &str, trajectory_duration: f64) -> CliResult<ResolvedGains> {
    let m = model.dof();
    let n = model.param_count();
    let get = |v: &Option<Spread>, dflt: f64, len: usize, field: &str| v.clone().unwrap_or(Spread::One(dflt)).expand(len, field, origin);
    let kp = get(&file.kp, DEFAULT_KP, m, "kp")?;
    let kd = get(&file.kd, DEFAULT_KD, m, "kd")?;
    let lambda = get(&file.lambda, DEFAULT_LAMBDA, m, "lambda")?;
    let k = get(&file.k, DEFAULT_K, m, "k")?;
    let gamma = match &file.gamma {
        Some(g) => g.expand(n, "gamma", origin)?,
        None => default_gamma(model).diagonal().iter().copied().collect(),
    };
    let dt = file.dt.unwrap_or(if controller == "idc" { 1e-3 } else { SL_DT });
    if !(dt > 0.0) {
        return Err(CliError::config(origin, "dt: must be positive"));
    }
    let duration = file.duration_s.unwrap_or(trajectory_duration);
    let offset = file.initial_offset_deg.clone().unwrap_or(vec![0.0; m]);
    if offset.len() != m {
        return Err(CliError::config(origin, format!("initial_offset_deg: expected {m} values, got {}", offset.len())));
    }
    let resolved = GainsFile {
        kp: Some(Spread::Each(kp.clone())),
        kd: Some(Spread::Each(kd.clone())),
        lambda: Some(Spread::Each(lambda.clone())),
        k: Some(Spread::Each(k.clone())),
        gamma: Some(Spread::Each(gamma.clone())),
        dt: Some(dt),
        duration_s: Some(duration),
        mismatch: Some(file.mismatch.unwrap_or(0.0)),
        pi_hat0_scale: Some(file.pi_hat0_scale.unwrap_or(0.5)),
        reduced: Some(file.reduced.unwrap_or(false)),
        reduction_samples: Some(file.reduction_samples.unwrap_or(60)),
        seed: Some(file.seed.unwrap_or(0)),
        initial_offset_deg: Some(offset.clone()),
    };
    Ok(ResolvedGains {
        idc: IdcGains { kp: diag(&kp), kd: diag(&kd) },
        sl: SlotineLiGains { lambda: diag(&lambda), k: diag(&k), gamma: diag(&gamma) },
        dt,
        duration,
        mismatch: resolved.mismatch.unwrap_or_default(),
        pi_hat0_scale: resolved.pi_hat0_scale.unwrap_or_default(),
        reduced: resolved.reduced.unwrap_or_default(),
        reduction_samples: resolved.reduction_samples.unwrap_or_default(),
        seed: resolved.seed.unwrap_or_default(),
        initial_offset: vec_deg(&offset),
        config: resolved,
    })
}
