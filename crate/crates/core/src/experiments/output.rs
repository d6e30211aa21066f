//! Comma-separated run artefacts and their schemas.
//!
//! | file | columns |
//! |------|---------|
//! | `log.csv` | `k, J, J_running, J_terminal, du_max, tip_dist` |
//! | `snapshots.csv` | `iter, t, node, x, y` |
//! | `theta.csv` | `iter, t, element, theta` |
//! | `control_final.csv` | `t, index, kind, value` with `kind` in `Fx`, `Fy`, `C` |
//! | `wavespeed.csv` | `E, rho, c, coeff, r2, direction` |
//! | `directions.csv` | `chi1, direction, velocity, r2, base_velocity, base_r2, tip_velocity, tip_r2, bimodal` |

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::control::IterationRecord;
use crate::error::{Result, SolverError};
use crate::forward::{ControlField, Trajectory};
use crate::rod::RodProperties;

use super::wave::{Direction, DirectionReport, WaveSpeedRow};

pub const LOG_FILE: &str = "log.csv";
pub const SNAPSHOT_FILE: &str = "snapshots.csv";
pub const THETA_FILE: &str = "theta.csv";
pub const CONTROL_FILE: &str = "control_final.csv";
pub const WAVESPEED_FILE: &str = "wavespeed.csv";
pub const DIRECTIONS_FILE: &str = "directions.csv";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub k: usize,
    #[serde(rename = "J")]
    pub cost: f64,
    #[serde(rename = "J_running")]
    pub running: f64,
    #[serde(rename = "J_terminal")]
    pub terminal: f64,
    pub du_max: f64,
    pub tip_dist: f64,
}

impl From<&IterationRecord> for LogRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            k: r.iteration,
            cost: r.cost,
            running: r.running,
            terminal: r.terminal,
            du_max: r.control_change,
            tip_dist: r.tip_distance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRow {
    pub iter: usize,
    pub t: f64,
    pub node: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaRow {
    pub iter: usize,
    pub t: f64,
    pub element: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControlKind {
    Fx,
    Fy,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRow {
    pub t: f64,
    pub index: usize,
    pub kind: ControlKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSpeedCsvRow {
    #[serde(rename = "E")]
    pub youngs_modulus: f64,
    pub rho: f64,
    pub c: f64,
    pub coeff: f64,
    pub r2: f64,
    pub direction: i32,
}

impl From<&WaveSpeedRow> for WaveSpeedCsvRow {
    fn from(r: &WaveSpeedRow) -> Self {
        Self {
            youngs_modulus: r.youngs_modulus,
            rho: r.density,
            c: r.speed,
            coeff: r.coefficient,
            r2: r.r2,
            direction: r.direction.sign(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionRow {
    pub chi1: f64,
    pub direction: i32,
    pub velocity: f64,
    pub r2: f64,
    pub base_velocity: f64,
    pub base_r2: f64,
    pub tip_velocity: f64,
    pub tip_r2: f64,
    pub bimodal: bool,
}

impl DirectionRow {
    pub fn new(chi1: f64, report: &DirectionReport) -> Self {
        Self {
            chi1,
            direction: report.dominant().sign(),
            velocity: report.whole.velocity,
            r2: report.whole.r2,
            base_velocity: report.base_half.velocity,
            base_r2: report.base_half.r2,
            tip_velocity: report.tip_half.velocity,
            tip_r2: report.tip_half.r2,
            bimodal: report.bimodal(),
        }
    }

    pub fn dominant(&self) -> Direction {
        match self.direction {
            1 => Direction::BaseToTip,
            -1 => Direction::TipToBase,
            _ => Direction::Undetermined,
        }
    }
}

fn schema_error(path: &Path, message: impl Into<String>) -> SolverError {
    SolverError::Schema {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Writes rows with a header, replacing the file.
pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file whose header must be exactly `columns`.
pub fn read_rows<T: DeserializeOwned>(path: &Path, columns: &[&str]) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| schema_error(path, e.to_string()))?;
    let header = r.headers().map_err(|e| schema_error(path, e.to_string()))?;
    let got: Vec<&str> = header.iter().collect();
    for c in columns {
        if !got.contains(c) {
            return Err(schema_error(path, format!("missing column `{c}`")));
        }
    }
    if got.len() != columns.len() {
        return Err(schema_error(
            path,
            format!("expected columns {columns:?}, found {got:?}"),
        ));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| schema_error(path, format!("row {}: {e}", i + 1))))
        .collect()
}

pub const LOG_COLUMNS: [&str; 6] = ["k", "J", "J_running", "J_terminal", "du_max", "tip_dist"];
pub const SNAPSHOT_COLUMNS: [&str; 5] = ["iter", "t", "node", "x", "y"];
pub const THETA_COLUMNS: [&str; 4] = ["iter", "t", "element", "theta"];
pub const CONTROL_COLUMNS: [&str; 4] = ["t", "index", "kind", "value"];
pub const WAVESPEED_COLUMNS: [&str; 6] = ["E", "rho", "c", "coeff", "r2", "direction"];

/// Streams per-iteration artefacts of a solve so that everything logged so
/// far is on disk if the solve aborts.
pub struct RunWriter {
    dir: PathBuf,
    log: csv::Writer<File>,
    snapshots: csv::Writer<File>,
    theta: csv::Writer<File>,
    instants: usize,
}

impl RunWriter {
    pub fn create(dir: &Path, instants: usize) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            log: csv::Writer::from_path(dir.join(LOG_FILE))?,
            snapshots: csv::Writer::from_path(dir.join(SNAPSHOT_FILE))?,
            theta: csv::Writer::from_path(dir.join(THETA_FILE))?,
            instants,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Log row plus rod snapshots at the evenly spaced instants.
    pub fn record(&mut self, record: &IterationRecord, trajectory: &Trajectory) -> Result<()> {
        self.log.serialize(LogRow::from(record))?;
        self.log.flush()?;
        for k in snapshot_indices(trajectory.steps(), self.instants) {
            let t = k as f64 * trajectory.dt;
            let state = &trajectory.states[k];
            for (node, r) in state.r.iter().enumerate() {
                self.snapshots.serialize(SnapshotRow {
                    iter: record.iteration,
                    t,
                    node,
                    x: r.x,
                    y: r.y,
                })?;
            }
            for (element, &theta) in state.theta.iter().enumerate() {
                self.theta.serialize(ThetaRow {
                    iter: record.iteration,
                    t,
                    element,
                    theta,
                })?;
            }
        }
        self.snapshots.flush()?;
        self.theta.flush()?;
        Ok(())
    }

    pub fn write_control(&self, control: &ControlField) -> Result<()> {
        write_control(&self.dir.join(CONTROL_FILE), control)
    }

    pub fn write_config(&self, text: &str) -> Result<()> {
        let mut f = File::create(self.dir.join(CONFIG_FILE))?;
        f.write_all(text.as_bytes())?;
        Ok(())
    }
}

/// `count` state indices from `0` to `steps`, evenly spaced.
pub fn snapshot_indices(steps: usize, count: usize) -> Vec<usize> {
    if count < 2 {
        return vec![steps];
    }
    (0..count)
        .map(|i| ((i * steps) as f64 / (count - 1) as f64).round() as usize)
        .collect()
}

/// Every sample of the control: node forces as `Fx`, `Fy`, element couples
/// as `C`, at the sample's mid-time.
pub fn write_control(path: &Path, control: &ControlField) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for k in 0..control.steps() {
        let t = control.time_at(k);
        for (index, f) in control.force_at(k).iter().enumerate() {
            w.serialize(ControlRow {
                t,
                index,
                kind: ControlKind::Fx,
                value: f.x,
            })?;
            w.serialize(ControlRow {
                t,
                index,
                kind: ControlKind::Fy,
                value: f.y,
            })?;
        }
        for (index, &c) in control.couple_at(k).iter().enumerate() {
            w.serialize(ControlRow {
                t,
                index,
                kind: ControlKind::C,
                value: c,
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads `control_final.csv` back into a field with `steps` samples of
/// length `dt` on a rod of `segments` elements.
pub fn read_control(path: &Path, steps: usize, segments: usize, dt: f64) -> Result<ControlField> {
    let rows: Vec<ControlRow> = read_rows(path, &CONTROL_COLUMNS)?;
    let per_step = 2 * (segments + 1) + segments;
    if rows.len() != steps * per_step {
        return Err(schema_error(
            path,
            format!(
                "{} rows, expected {steps} samples x {per_step} entries",
                rows.len()
            ),
        ));
    }
    let mut control = ControlField::zeros(steps, segments, dt);
    for (i, row) in rows.iter().enumerate() {
        let k = i / per_step;
        let bad = || {
            schema_error(
                path,
                format!("row {}: index {} out of range", i + 1, row.index),
            )
        };
        match row.kind {
            ControlKind::Fx => {
                control
                    .force_at_mut(k)
                    .get_mut(row.index)
                    .ok_or_else(bad)?
                    .x = row.value
            }
            ControlKind::Fy => {
                control
                    .force_at_mut(k)
                    .get_mut(row.index)
                    .ok_or_else(bad)?
                    .y = row.value
            }
            ControlKind::C => {
                *control
                    .couple_at_mut(k)
                    .get_mut(row.index)
                    .ok_or_else(bad)? = row.value
            }
        }
    }
    Ok(control)
}

/// Row counts of a validated run directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub iterations: usize,
    pub snapshot_rows: usize,
    pub theta_rows: usize,
    pub control_rows: usize,
}

/// Parses every artefact of a run and checks the row counts against the
/// grid size, the number of samples and the snapshot count.
pub fn validate_run_dir(
    dir: &Path,
    props: &RodProperties,
    steps: usize,
    instants: usize,
) -> Result<RunSummary> {
    let n = props.segments();
    let log: Vec<LogRow> = read_rows(&dir.join(LOG_FILE), &LOG_COLUMNS)?;
    let snaps: Vec<SnapshotRow> = read_rows(&dir.join(SNAPSHOT_FILE), &SNAPSHOT_COLUMNS)?;
    let theta: Vec<ThetaRow> = read_rows(&dir.join(THETA_FILE), &THETA_COLUMNS)?;
    let control: Vec<ControlRow> = read_rows(&dir.join(CONTROL_FILE), &CONTROL_COLUMNS)?;
    let iterations = log.len();
    let expect = |file: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(schema_error(
                &dir.join(file),
                format!("{got} rows, expected {want}"),
            ))
        }
    };
    expect(SNAPSHOT_FILE, snaps.len(), iterations * instants * (n + 1))?;
    expect(THETA_FILE, theta.len(), iterations * instants * n)?;
    expect(CONTROL_FILE, control.len(), steps * (3 * n + 2))?;
    if log.iter().enumerate().any(|(i, r)| r.k != i + 1) {
        return Err(schema_error(
            &dir.join(LOG_FILE),
            "iterations not numbered 1, 2, ...",
        ));
    }
    Ok(RunSummary {
        iterations,
        snapshot_rows: snaps.len(),
        theta_rows: theta.len(),
        control_rows: control.len(),
    })
}
