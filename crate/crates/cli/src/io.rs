//! File output and the measurement CSV reader.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use sprdyn_core::model::eval_kinematics;
use sprdyn_core::trajectory::StateSample;
use sprdyn_core::SprModel;

use crate::error::{CliError, CliResult};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().ok_or_else(|| CliError::Usage(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        fs::rename(&tmp, path).map_err(io_err(path))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with `#` comment lines ahead of the header.
pub struct CsvTable {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        CsvTable { comments: Vec::new(), header, rows: Vec::new() }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for c in &self.comments {
            for line in c.lines() {
                out.extend_from_slice(b"# ");
                out.extend_from_slice(line.as_bytes());
                out.push(b'\n');
            }
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| fmt_f64(*v))).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_atomic(path, &self.to_bytes())
    }
}

pub fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

/// Recorded samples ready for identification.
pub struct MeasuredRun {
    pub t: Vec<f64>,
    pub states: Vec<StateSample>,
    pub torques: Vec<DVector<f64>>,
}

/// Reads `t, theta1..m, tau1..m` or `t, q1..m, tau1..m`.
///
/// Actuator angles are mapped to task coordinates by Newton iteration on the
/// actuator positions, tracking from the previous sample. Rates and
/// accelerations come from finite differences on the time column.
pub fn read_measurements(path: &Path, model: &dyn SprModel) -> CliResult<MeasuredRun> {
    let csv_err = |msg: String| CliError::Csv { path: path.to_path_buf(), msg };
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().map_err(|e| csv_err(e.to_string()))?.iter().map(str::to_owned).collect();
    let m = model.dof();
    let col = |name: &str| header.iter().position(|h| h == name);
    let cols = |prefix: &str| -> Option<Vec<usize>> { (1..=m).map(|i| col(&format!("{prefix}{i}"))).collect() };
    let t_col = col("t").ok_or_else(|| csv_err("missing column `t`".into()))?;
    let tau_cols = cols("tau").ok_or_else(|| csv_err(format!("missing columns tau1..tau{m}")))?;
    let (pos_cols, actuator) = match (cols("theta"), cols("q")) {
        (Some(c), _) => (c, false),
        (None, Some(c)) => (c, true),
        (None, None) => return Err(csv_err(format!("missing columns theta1..theta{m} or q1..q{m}"))),
    };

    let mut t = Vec::new();
    let mut pos = Vec::new();
    let mut torques = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(e.to_string()))?;
        let get = |c: usize| -> CliResult<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>().map_err(|_| csv_err(format!("row {}: column `{}`: not a number: `{s}`", line + 1, header[c])))
        };
        t.push(get(t_col)?);
        pos.push(DVector::from_iterator(m, pos_cols.iter().map(|&c| get(c)).collect::<CliResult<Vec<_>>>()?));
        torques.push(DVector::from_iterator(m, tau_cols.iter().map(|&c| get(c)).collect::<CliResult<Vec<_>>>()?));
    }
    if t.len() < 3 {
        return Err(csv_err(format!("need at least 3 rows, got {}", t.len())));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(csv_err("time column must be strictly increasing".into()));
    }
    let theta = if actuator { track_task_coordinates(model, &pos)? } else { pos };
    let (theta_dot, theta_ddot) = differentiate(&t, &theta);
    let states = theta
        .into_iter()
        .zip(theta_dot)
        .zip(theta_ddot)
        .map(|((theta, theta_dot), theta_ddot)| StateSample { theta, theta_dot, theta_ddot })
        .collect();
    Ok(MeasuredRun { t, states, torques })
}

fn wrap(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    a - two_pi * ((a + std::f64::consts::PI) / two_pi).floor()
}

const NEWTON_TOL: f64 = 1e-13;
const NEWTON_ITERS: usize = 50;

fn newton(model: &dyn SprModel, q: &DVector<f64>, guess: DVector<f64>) -> Option<DVector<f64>> {
    let m = model.dof();
    let mut theta = guess;
    let zero = DVector::zeros(m);
    for _ in 0..NEWTON_ITERS {
        let qa = model.actuator_positions(&theta).ok()?;
        let r = (q - qa).map(wrap);
        if r.amax() < NEWTON_TOL {
            return Some(theta);
        }
        let j = eval_kinematics(model, &theta, &zero).ok()?.actuator;
        let step = j.lu().solve(&r)?;
        // Halve long steps so the iterate stays near the reachable set.
        let scale = (0.3 / step.amax()).min(1.0);
        theta += step * scale;
    }
    let qa = model.actuator_positions(&theta).ok()?;
    ((q - qa).map(wrap).amax() < 1e-9).then_some(theta)
}

/// Task coordinates for a sequence of actuator readings.
pub fn track_task_coordinates(model: &dyn SprModel, q: &[DVector<f64>]) -> CliResult<Vec<DVector<f64>>> {
    let ws = model.workspace();
    let m = model.dof();
    let mut starts: Vec<DVector<f64>> = Vec::new();
    let mid = DVector::from_iterator(m, (0..m).map(|i| if ws.periodic[i] { 0.0 } else { 0.5 * (ws.lower[i] + ws.upper[i]) }));
    starts.push(mid.clone());
    for i in (0..m).filter(|&i| ws.periodic[i]) {
        for k in 1..4 {
            let mut s = mid.clone();
            s[i] = k as f64 * std::f64::consts::FRAC_PI_2;
            starts.push(s);
        }
    }
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(q.len());
    for (k, qk) in q.iter().enumerate() {
        let found = match out.last() {
            Some(prev) => newton(model, qk, prev.clone()),
            None => starts.iter().find_map(|s| newton(model, qk, s.clone()).filter(|th| ws.contains(th))),
        };
        let theta = found.ok_or_else(|| {
            CliError::Core(sprdyn_core::Error::Unreachable(format!("sample {k}: no task pose reproduces the actuator angles")))
        })?;
        out.push(theta);
    }
    Ok(out)
}

/// Second-order finite differences on a possibly non-uniform grid.
pub fn differentiate(t: &[f64], x: &[DVector<f64>]) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let d1 = gradient(t, x);
    let d2 = gradient(t, &d1);
    (d1, d2)
}

fn gradient(t: &[f64], x: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let n = t.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        // Three-point Lagrange derivative; one-sided at the ends.
        let (a, b, c, at) = match k {
            0 => (0, 1, 2, 0),
            k if k == n - 1 => (n - 3, n - 2, n - 1, n - 1),
            k => (k - 1, k, k + 1, k),
        };
        let (ta, tb, tc, tt) = (t[a], t[b], t[c], t[at]);
        let wa = (2.0 * tt - tb - tc) / ((ta - tb) * (ta - tc));
        let wb = (2.0 * tt - ta - tc) / ((tb - ta) * (tb - tc));
        let wc = (2.0 * tt - ta - tb) / ((tc - ta) * (tc - tb));
        out.push(&x[a] * wa + &x[b] * wb + &x[c] * wc);
    }
    out
}

/// Stack column vectors as matrix rows, for tests and reports.
pub fn stack_rows(v: &[DVector<f64>]) -> DMatrix<f64> {
    let cols = v.first().map_or(0, |r| r.len());
    DMatrix::from_fn(v.len(), cols, |i, j| v[i][j])
}
