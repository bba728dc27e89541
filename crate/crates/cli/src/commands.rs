use std::path::{Path as FsPath, PathBuf};

use clap::{Args, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::json;

use sprdyn_core::control::{run_metrics, simulate_idc, simulate_slotine_li, InitialState, RunMetrics, RunRecord, SimConfig};
use sprdyn_core::dynamics::inverse_dynamics;
use sprdyn_core::identification::{
    measurements_from_torques, recovery_report, solve_base_params, synthesize_measurements, Measurements,
};
use sprdyn_core::model::assemble_pi;
use sprdyn_core::oracle::{property_suite, SuiteConfig};
use sprdyn_core::reduction::{ReductionMap, DEFAULT_RREF_TOL};
use sprdyn_core::regressor::{random_observation_matrix, slotine_li_observation_matrix};
use sprdyn_core::trajectory::Path;
use sprdyn_core::SprModel;

use crate::config::{load_gains, load_robot, load_trajectory, resolve_gains, ResolvedRobot, TrajectoryFile};
use crate::error::{CliError, CliResult, EXIT_NUMERICAL, EXIT_OK, EXIT_VERIFY_FAILED};
use crate::io::{numbered, read_measurements, write_json, CsvTable};

fn emit_json<T: Serialize>(out: Option<&FsPath>, value: &T) -> CliResult<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value).expect("report types serialize"));
            Ok(())
        }
    }
}

fn emit_csv(out: Option<&FsPath>, table: &CsvTable) -> CliResult<()> {
    match out {
        Some(p) => table.write(p),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&table.to_bytes())
                .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })
        }
    }
}

fn one_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("config types serialize")
}

#[derive(Debug, Args)]
pub struct TorqueArgs {
    /// Built-in robot name (`diamond`, `3rrr`) or robot JSON file.
    #[arg(long)]
    pub robot: String,
    /// Trajectory JSON; defaults to the robot's reference cubic motion.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn torque(args: &TorqueArgs) -> CliResult<u8> {
    let robot = load_robot(&args.robot)?;
    let traj = load_trajectory(args.trajectory.as_deref(), &robot)?;
    let model = robot.model.as_ref();
    let m = model.dof();
    let mut header = vec!["t".to_string()];
    header.extend(numbered("q", m));
    header.extend(numbered("tau", m));
    let mut table = CsvTable::new(header);
    table.comment("sprdyn torque");
    table.comment("units: t s, q rad, tau N*m");
    table.comment(format!("robot: {}", one_line(&robot.config)));
    table.comment(format!("trajectory: {}", one_line(&traj.config)));
    let s = &traj.sampled;
    for k in 0..s.len() {
        let q = model.actuator_positions(&s.theta[k])?;
        let tau = inverse_dynamics(model, &s.theta[k], &s.theta_dot[k], &s.theta_ddot[k], None)?;
        let mut row = vec![s.t[k]];
        row.extend(q.iter());
        row.extend(tau.iter());
        table.rows.push(row);
    }
    emit_csv(args.out.as_deref(), &table)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub robot: String,
    /// Random states per check.
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replace every check's tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Trajectory for the Lagrangian oracle; defaults to the reference cubic motion.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Stamp the report with the given label, or the current UTC time when no value is given.
    #[arg(long, num_args = 0..=1, default_missing_value = "now")]
    pub timestamp: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn verify(args: &VerifyArgs) -> CliResult<u8> {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    if let Some(t) = args.tol {
        if !(t >= 0.0) {
            return Err(CliError::Usage("--tol must be non-negative".into()));
        }
    }
    let robot = load_robot(&args.robot)?;
    let traj = load_trajectory(args.trajectory.as_deref(), &robot)?;
    let rate = traj.config.rate_hz.unwrap_or(sprdyn_core::trajectory::DEFAULT_RATE_HZ);
    let cfg = SuiteConfig {
        samples: args.samples,
        seed: args.seed,
        tol_override: args.tol,
        oracle_path: traj.path.clone(),
        oracle_rate_hz: rate,
        ..SuiteConfig::default()
    };
    let mut report = property_suite(robot.model.as_ref(), &cfg);
    report.timestamp = args.timestamp.as_deref().map(|t| match t {
        "now" => humantime::format_rfc3339_seconds(std::time::SystemTime::now()).to_string(),
        other => other.to_string(),
    });
    let doc = json!({
        "config": {
            "robot": robot.config,
            "trajectory": traj.config,
            "samples": args.samples,
            "pd_samples": cfg.pd_samples,
            "observation_samples": cfg.observation_samples,
            "seed": args.seed,
            "tol_override": args.tol,
        },
        "report": report,
    });
    emit_json(args.out.as_deref(), &doc)?;
    if report.all_pass() {
        eprintln!("{}: all {} checks pass", report.robot, report.checks.len());
        Ok(EXIT_OK)
    } else {
        for c in report.failures() {
            match (&c.skipped, c.max_err) {
                (Some(why), _) => eprintln!("FAIL {}: {why}", c.check),
                (None, Some(e)) => eprintln!("FAIL {}: max_err {e:e} > tol {:e}", c.check, c.tol),
                (None, None) => eprintln!("FAIL {}: no error value", c.check),
            }
        }
        Ok(EXIT_VERIFY_FAILED)
    }
}

/// On-disk form of a reduction map. `B†` is recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionFile {
    pub robot: String,
    /// Base-parameter count.
    pub p: usize,
    /// Full parameter count.
    pub n: usize,
    pub pivots: Vec<usize>,
    pub tol: f64,
    pub seed: Option<u64>,
    /// Built from stacked linear and Slotine-Li rows.
    pub slotine_li: bool,
    pub smallest_pivot: Option<f64>,
    pub largest_rejected: Option<f64>,
    /// `p × n`, row-major.
    pub b: Vec<Vec<f64>>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ReductionFile {
    pub fn from_map(robot: &str, map: &ReductionMap, slotine_li: bool) -> Self {
        ReductionFile {
            robot: robot.into(),
            p: map.rank(),
            n: map.full_count(),
            pivots: map.pivots.clone(),
            tol: map.tol,
            seed: map.seed,
            slotine_li,
            smallest_pivot: finite(map.smallest_pivot),
            largest_rejected: finite(map.largest_rejected),
            b: map.b.row_iter().map(|r| r.iter().copied().collect()).collect(),
        }
    }

    pub fn to_map(&self, path: &FsPath, model: &dyn SprModel) -> CliResult<ReductionMap> {
        let n = model.param_count();
        if self.n != n || self.b.len() != self.p || self.b.iter().any(|r| r.len() != n) {
            return Err(CliError::config(path, format!("b: expected {} rows of {n} values for {}", self.p, model.name())));
        }
        let b = DMatrix::from_fn(self.p, n, |i, j| self.b[i][j]);
        let mut map = ReductionMap::from_parts(b, self.pivots.clone(), self.tol, self.seed).map_err(|e| CliError::config(path, e.to_string()))?;
        if let Some(v) = self.smallest_pivot {
            map.smallest_pivot = v;
        }
        if let Some(v) = self.largest_rejected {
            map.largest_rejected = v;
        }
        Ok(map)
    }
}

pub fn build_map(model: &dyn SprModel, samples: usize, tol: f64, seed: u64, slotine_li: bool) -> CliResult<ReductionMap> {
    let obs = if slotine_li {
        slotine_li_observation_matrix(model, samples, seed)?
    } else {
        random_observation_matrix(model, samples, seed)?
    };
    let mut map = ReductionMap::from_observation(&obs.w, tol)?;
    map.seed = Some(seed);
    Ok(map)
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    #[arg(long)]
    pub robot: String,
    /// Random states in the observation matrix.
    #[arg(long, default_value_t = 60)]
    pub samples: usize,
    /// RREF pivot tolerance.
    #[arg(long, default_value_t = DEFAULT_RREF_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Build the map from stacked linear and Slotine-Li rows.
    #[arg(long)]
    pub slotine_li: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn reduce(args: &ReduceArgs) -> CliResult<u8> {
    if !(args.tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let robot = load_robot(&args.robot)?;
    let model = robot.model.as_ref();
    let map = build_map(model, args.samples, args.tol, args.seed, args.slotine_li)?;
    let file = ReductionFile::from_map(model.name(), &map, args.slotine_li);
    eprintln!("{}: p = {} of {} parameters", model.name(), file.p, file.n);
    let doc = json!({
        "config": { "robot": robot.config, "samples": args.samples, "tol": args.tol, "seed": args.seed, "slotine_li": args.slotine_li },
        "map": file,
    });
    emit_json(args.out.as_deref(), &doc)?;
    Ok(EXIT_OK)
}

/// Reads the `map` object from `reduce` output, or a bare map.
pub fn load_map(path: &FsPath, model: &dyn SprModel) -> CliResult<ReductionMap> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::config(path, e.to_string()))?;
    if let Some(inner) = v.get_mut("map") {
        v = inner.take();
    }
    let file: ReductionFile = serde_json::from_value(v).map_err(|e| CliError::config(path, e.to_string()))?;
    file.to_map(path, model)
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub robot: String,
    /// Excitation trajectory JSON; defaults to the robot's built-in multisine.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Standard deviation of the noise added to synthesized task moments, N·m.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reduction map from `reduce`; built from 60 random states when omitted.
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// Recorded CSV (t, theta1..m or q1..m, tau1..m) instead of synthesized data.
    #[arg(long, conflicts_with = "trajectory")]
    pub measurements: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn identify(args: &IdentifyArgs) -> CliResult<u8> {
    if !(args.noise >= 0.0) {
        return Err(CliError::Usage("--noise must be non-negative".into()));
    }
    let robot = load_robot(&args.robot)?;
    let model = robot.model.as_ref();
    let map = match &args.map {
        Some(p) => load_map(p, model)?,
        None => build_map(model, 60, DEFAULT_RREF_TOL, args.seed, false)?,
    };
    let (meas, source): (Measurements, serde_json::Value) = match &args.measurements {
        Some(p) => {
            let run = read_measurements(p, model)?;
            let mut meas = measurements_from_torques(model, &run.states, &run.torques, &map)?;
            meas.seed = args.seed;
            (meas, json!({ "measurements": p.display().to_string(), "samples": run.t.len() }))
        }
        None => {
            let traj = match &args.trajectory {
                Some(_) => load_trajectory(args.trajectory.as_deref(), &robot)?,
                None => {
                    let file = TrajectoryFile { kind: Some("multisine".into()), ..TrajectoryFile::default() };
                    crate::config::resolve_trajectory(file, FsPath::new("<default excitation>"), model)?
                }
            };
            let meas = synthesize_measurements(model, &traj.sampled, &map, args.noise, args.seed)?;
            (meas, json!({ "trajectory": traj.config, "noise": args.noise }))
        }
    };
    let est = solve_base_params(&meas.w_r, &meas.n_meas)?;
    let report = recovery_report(&est, model, &map)?;
    eprintln!("{}: p = {}, relative error {:e}, condition {:e}", report.robot, report.rows.len(), report.rel_err_norm, report.condition);
    let doc = json!({
        "config": {
            "robot": robot.config,
            "data": source,
            "seed": args.seed,
            "map": args.map.as_ref().map(|p| p.display().to_string()),
            "rows": meas.w_r.nrows(),
        },
        "report": report,
    });
    emit_json(args.out.as_deref(), &doc)?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Controller {
    Idc,
    SlotineLi,
}

impl Controller {
    fn name(self) -> &'static str {
        match self {
            Controller::Idc => "idc",
            Controller::SlotineLi => "slotine-li",
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub robot: String,
    #[arg(long, value_enum)]
    pub controller: Controller,
    /// Desired motion; defaults to the reference cubic.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    /// Gains and run settings JSON.
    #[arg(long)]
    pub gains: Option<PathBuf>,
    /// Run CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics JSON; defaults to the run CSV path with a `.metrics.json` suffix.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

fn run_table(robot: &ResolvedRobot, record: &RunRecord, config: &serde_json::Value) -> CsvTable {
    let m = robot.model.dof();
    let mut header = vec!["t".to_string()];
    header.extend(numbered("e", m));
    header.extend(numbered("s", m));
    header.extend(numbered("tau", m));
    header.push("pihat_norm".into());
    let mut table = CsvTable::new(header);
    table.comment(format!("sprdyn simulate {}", record.controller));
    table.comment("units: t s, e rad, s rad/s, tau N*m");
    table.comment(format!("config: {}", one_line(config)));
    if let Some(err) = &record.halted {
        table.comment(format!("halted: {err}"));
    }
    for k in 0..record.len() {
        let mut row = vec![record.t[k]];
        row.extend(record.e[k].iter());
        row.extend(record.s[k].iter());
        row.extend(record.tau[k].iter());
        row.push(record.pi_hat.get(k).map_or(0.0, |p| p.norm()));
        table.rows.push(row);
    }
    table
}

pub fn simulate(args: &SimulateArgs) -> CliResult<u8> {
    let robot = load_robot(&args.robot)?;
    let model = robot.model.as_ref();
    let traj = load_trajectory(args.trajectory.as_deref(), &robot)?;
    let path: Path = traj.path.clone().ok_or_else(|| CliError::Usage("simulate needs an analytic trajectory (cubic or multisine)".into()))?;
    let (gfile, gpath) = load_gains(args.gains.as_deref())?;
    let gains = resolve_gains(gfile, &gpath, model, args.controller.name(), path.duration())?;
    let d0 = path.eval(0.0);
    let init = InitialState { theta: Some(&d0.theta + &gains.initial_offset), theta_dot: None };
    let cfg = SimConfig { dt: gains.dt, duration: gains.duration };
    let record = match args.controller {
        Controller::Idc => simulate_idc(model, &path, &gains.idc, gains.mismatch, &init, cfg)?,
        Controller::SlotineLi => {
            let pi_hat0: DVector<f64> = assemble_pi(model).0 * gains.pi_hat0_scale;
            let map = if gains.reduced {
                Some(build_map(model, gains.reduction_samples, DEFAULT_RREF_TOL, gains.seed, true)?)
            } else {
                None
            };
            simulate_slotine_li(model, &path, &gains.sl, &pi_hat0, map.as_ref(), &init, cfg)?
        }
    };
    let config = json!({
        "robot": robot.config,
        "controller": args.controller.name(),
        "trajectory": traj.config,
        "gains": gains.config,
    });
    let metrics: RunMetrics = run_metrics(&record);
    run_table(&robot, &record, &config).write(&args.out)?;
    let metrics_path = args.metrics.clone().unwrap_or_else(|| {
        let mut s = args.out.clone().into_os_string();
        s.push(".metrics.json");
        PathBuf::from(s)
    });
    let doc = json!({
        "config": config,
        "metrics": metrics,
        "samples": record.len(),
        "halted": record.halted.as_ref().map(|e| e.to_string()),
    });
    write_json(&metrics_path, &doc)?;
    eprintln!("{} {}: rmse {:e} rad, terminal error {:e} rad", model.name(), record.controller, metrics.rmse, metrics.terminal_error);
    match &record.halted {
        Some(e) => {
            eprintln!("run halted: {e}");
            Ok(EXIT_NUMERICAL)
        }
        None => Ok(EXIT_OK),
    }
}
