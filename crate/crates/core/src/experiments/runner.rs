//! Runs cases and sweeps, writing their artefacts.

use std::path::{Path, PathBuf};

use log::{info, warn};

use crate::control::{solve_from, Problem, Solution};
use crate::error::{Result, SolverError};
use crate::forward::ControlField;
use crate::parallel::{par_map, with_workers};
use crate::rod::RodProperties;

use super::config::{ExperimentConfig, Material};
use super::initial::initial_bent_state;
use super::output::{self, DirectionRow, RunWriter, WaveSpeedCsvRow};
use super::wave::{estimate_wave_speed, wave_directions, SampledField, WaveSpeedRow};

/// A finished case.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub props: RodProperties,
    pub solution: Solution,
}

impl CaseRun {
    /// Tip distance of the first and the last iteration.
    pub fn tip_distances(&self) -> (f64, f64) {
        let r = &self.solution.log.records;
        (r[0].tip_distance, r[r.len() - 1].tip_distance)
    }
}

/// Solves one case. With `out`, the log and snapshots are streamed to the
/// directory as iterations complete and the final control and the resolved
/// config are written at the end; on failure the files hold everything up
/// to the failing iteration.
pub fn run_case(config: &ExperimentConfig, out: Option<&Path>) -> Result<CaseRun> {
    config.validate()?;
    let props = RodProperties::new(config.rod.clone())?;
    let initial = initial_bent_state(&config.bumps, &props);
    let weights = config.weights();
    let problem = Problem {
        initial: &initial,
        props: &props,
        weights: &weights,
        target: config.target,
        dt: config.dt,
    };
    let mut writer = match out {
        Some(dir) => {
            let w = RunWriter::create(dir, config.snapshots)?;
            w.write_config(&config.to_toml_string())?;
            Some(w)
        }
        None => None,
    };
    let mut write_error = None;
    let zero = ControlField::zeros(problem.steps(), props.segments(), config.dt);
    let result = solve_from(
        &problem,
        zero,
        config.iterations,
        config.epsilon,
        |rec, traj| {
            if let Some(w) = writer.as_mut() {
                if let Err(e) = w.record(rec, traj) {
                    if write_error.is_none() {
                        write_error = Some(e);
                    }
                }
            }
        },
    );
    if let Some(e) = write_error {
        return Err(e);
    }
    let solution = result.map_err(|f| {
        warn!(
            "{} case stopped after {} logged iterations",
            config.case,
            f.log.records.len()
        );
        SolverError::from(f)
    })?;
    if let Some(w) = &writer {
        w.write_control(&solution.control)?;
        info!("wrote {}", w.dir().display());
    }
    if solution.log.learning_rate_warning {
        warn!("{} case: cost stalled, consider a smaller eta", config.case);
    }
    Ok(CaseRun { props, solution })
}

fn control_field(run: &CaseRun, config: &ExperimentConfig) -> SampledField {
    SampledField::from_control(&run.solution.control, &run.props, config.analysis.channel)
}

/// Wave speed of the optimal control of one run.
pub fn wave_speed_of(
    config: &ExperimentConfig,
    props: &RodProperties,
    control: &ControlField,
) -> Result<WaveSpeedRow> {
    let field = SampledField::from_control(control, props, config.analysis.channel);
    let window = config.analysis.window_for(config.horizon);
    let fit = estimate_wave_speed(&field, window, &config.analysis)?;
    Ok(WaveSpeedRow::new(
        config.rod.youngs_modulus,
        config.rod.density,
        &fit,
    ))
}

fn sub_dir(out: Option<&Path>, name: String) -> Option<PathBuf> {
    out.map(|d| d.join(name))
}

/// Solves the case once per material and fits the wave speed of each
/// optimal control. Runs are spread over `workers` threads.
pub fn material_sweep(
    config: &ExperimentConfig,
    out: Option<&Path>,
    workers: usize,
) -> Result<Vec<WaveSpeedRow>> {
    let materials: Vec<Material> = if config.sweep.materials.is_empty() {
        vec![Material {
            youngs_modulus: config.rod.youngs_modulus,
            density: config.rod.density,
        }]
    } else {
        config.sweep.materials.clone()
    };
    let rows = with_workers(workers, || {
        par_map(&materials, |m| {
            let mut c = config.clone();
            c.rod.youngs_modulus = m.youngs_modulus;
            c.rod.density = m.density;
            let dir = sub_dir(out, format!("E{}_rho{}", m.youngs_modulus, m.density));
            let run = run_case(&c, dir.as_deref())?;
            let row = wave_speed_of(&c, &run.props, &run.solution.control)?;
            info!(
                "E = {} Pa, rho = {} kg/m^3: c = {:.4} m/s, coeff = {:.4}, r2 = {:.3}",
                row.youngs_modulus, row.density, row.speed, row.coefficient, row.r2
            );
            Ok(row)
        })
    });
    let rows: Vec<WaveSpeedRow> = rows.into_iter().collect::<Result<_>>()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        output::write_rows(
            &dir.join(output::WAVESPEED_FILE),
            rows.iter().map(WaveSpeedCsvRow::from),
        )?;
    }
    Ok(rows)
}

/// Solves the case once per running-cost weight and reports which way the
/// control waves travel late in the horizon.
pub fn chi1_sweep(
    config: &ExperimentConfig,
    out: Option<&Path>,
    workers: usize,
) -> Result<Vec<DirectionRow>> {
    let weights = if config.sweep.chi1.is_empty() {
        vec![config.chi1]
    } else {
        config.sweep.chi1.clone()
    };
    let rows = with_workers(workers, || {
        par_map(&weights, |&chi1| {
            let mut c = config.clone();
            c.chi1 = chi1;
            let dir = sub_dir(out, format!("chi1_{chi1}"));
            let run = run_case(&c, dir.as_deref())?;
            let field = control_field(&run, &c);
            let window = c.analysis.window_for(c.horizon);
            let report = wave_directions(&field, window, c.rod.length, &c.analysis)?;
            let row = DirectionRow::new(chi1, &report);
            info!(
                "chi1 = {chi1}: direction {:+}, v = {:.4} m/s, r2 = {:.3}, bimodal = {}",
                row.direction, row.velocity, row.r2, row.bimodal
            );
            Ok(row)
        })
    });
    let rows: Vec<DirectionRow> = rows.into_iter().collect::<Result<_>>()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        output::write_rows(&dir.join(output::DIRECTIONS_FILE), rows.iter().copied())?;
    }
    Ok(rows)
}

/// Re-analyses a finished run directory from its `config.toml` and
/// `control_final.csv`, writing `wavespeed.csv` next to them.
pub fn wavespeed_from_dir(dir: &Path) -> Result<WaveSpeedRow> {
    let config = ExperimentConfig::from_file(&dir.join(output::CONFIG_FILE))?;
    let props = RodProperties::new(config.rod.clone())?;
    let steps = (config.horizon / config.dt).round() as usize;
    let control = output::read_control(
        &dir.join(output::CONTROL_FILE),
        steps,
        props.segments(),
        config.dt,
    )?;
    let row = wave_speed_of(&config, &props, &control)?;
    output::write_rows(
        &dir.join(output::WAVESPEED_FILE),
        [WaveSpeedCsvRow::from(&row)],
    )?;
    Ok(row)
}
