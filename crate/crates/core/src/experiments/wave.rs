//! Travelling-wave analysis of control fields: peak tracking, speed fits and
//! propagation direction.

use crate::error::{Result, SolverError};
use crate::forward::ControlField;
use crate::rod::RodProperties;

use super::config::{AnalysisConfig, Channel, Tracking};

/// A vector field sampled on a uniform space-time grid. Row `k` holds
/// `components` values per position, `values[k][j * components + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub components: usize,
    pub values: Vec<Vec<f64>>,
}

impl SampledField {
    /// One channel of a control field: the couple on the elements or the
    /// two force components on the nodes.
    pub fn from_control(control: &ControlField, props: &RodProperties, channel: Channel) -> Self {
        let times = (0..control.steps()).map(|k| control.time_at(k)).collect();
        match channel {
            Channel::Couple => Self {
                times,
                positions: (0..props.segments()).map(|j| props.element_s(j)).collect(),
                components: 1,
                values: (0..control.steps())
                    .map(|k| control.couple_at(k).to_vec())
                    .collect(),
            },
            Channel::Force => Self {
                times,
                positions: (0..props.nodes()).map(|i| props.node_s(i)).collect(),
                components: 2,
                values: (0..control.steps())
                    .map(|k| {
                        control
                            .force_at(k)
                            .iter()
                            .flat_map(|f| [f.x, f.y])
                            .collect()
                    })
                    .collect(),
            },
        }
    }

    /// Scalar field with one component.
    pub fn scalar(times: Vec<f64>, positions: Vec<f64>, values: Vec<Vec<f64>>) -> Self {
        Self {
            times,
            positions,
            components: 1,
            values,
        }
    }

    fn sample_dt(&self) -> f64 {
        if self.times.len() < 2 {
            return 0.0;
        }
        (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64
    }

    fn magnitude(&self, k: usize, j: usize) -> f64 {
        let c = self.components;
        self.values[k][j * c..(j + 1) * c]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn change(&self, later: usize, earlier: usize, j: usize) -> f64 {
        let c = self.components;
        let a = &self.values[later][j * c..(j + 1) * c];
        let b = &self.values[earlier][j * c..(j + 1) * c];
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Least-squares line through tracked peak positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveFit {
    /// Signed velocity [m/s], positive from base to tip.
    pub velocity: f64,
    pub r2: f64,
    pub samples: usize,
    pub reliable: bool,
}

impl WaveFit {
    pub fn direction(&self) -> Direction {
        if !self.reliable {
            Direction::Undetermined
        } else if self.velocity > 0.0 {
            Direction::BaseToTip
        } else {
            Direction::TipToBase
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    BaseToTip,
    TipToBase,
    Undetermined,
}

impl Direction {
    /// `+1` base to tip, `-1` tip to base, `0` undetermined.
    pub fn sign(self) -> i32 {
        match self {
            Direction::BaseToTip => 1,
            Direction::TipToBase => -1,
            Direction::Undetermined => 0,
        }
    }
}

/// Location of the tracked peak at every sample inside `window` whose
/// position lies in `[lo, hi]`. Peaks are refined by a parabola through the
/// neighbouring samples.
pub fn track_peaks(
    field: &SampledField,
    window: (f64, f64),
    band: (f64, f64),
    tracking: Tracking,
) -> Vec<(f64, f64)> {
    let (t_a, t_b) = window;
    let columns: Vec<usize> = (0..field.positions.len())
        .filter(|&j| field.positions[j] >= band.0 && field.positions[j] <= band.1)
        .collect();
    if columns.is_empty() {
        return Vec::new();
    }
    let shift = match tracking {
        Tracking::Amplitude => 0,
        Tracking::Rate { half_width } => {
            let dt = field.sample_dt();
            if dt > 0.0 {
                ((half_width / dt).round() as usize).max(1)
            } else {
                1
            }
        }
    };
    let steps = field.times.len();
    let spacing = if field.positions.len() > 1 {
        field.positions[1] - field.positions[0]
    } else {
        0.0
    };
    let mut row = vec![0.0; columns.len()];
    let mut peaks = Vec::new();
    for k in shift..steps.saturating_sub(shift) {
        let t = field.times[k];
        if t < t_a || t > t_b {
            continue;
        }
        for (slot, &j) in row.iter_mut().zip(&columns) {
            *slot = if shift == 0 {
                field.magnitude(k, j)
            } else {
                field.change(k + shift, k - shift, j)
            };
        }
        let (best, _) = row
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        let mut s = field.positions[columns[best]];
        if best > 0 && best + 1 < row.len() {
            let (a, b, c) = (row[best - 1], row[best], row[best + 1]);
            let curvature = a - 2.0 * b + c;
            if curvature < 0.0 {
                s += 0.5 * (a - c) / curvature * spacing;
            }
        }
        peaks.push((t, s));
    }
    peaks
}

/// Straight-line fit `s = c t + b`; degenerate data gives a zero slope with
/// `R^2 = 0`.
pub fn fit_line(points: &[(f64, f64)], min_r2: f64) -> WaveFit {
    let n = points.len();
    let degenerate = WaveFit {
        velocity: 0.0,
        r2: 0.0,
        samples: n,
        reliable: false,
    };
    if n < 3 {
        return degenerate;
    }
    let nf = n as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_s = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let stt: f64 = points.iter().map(|p| (p.0 - mean_t).powi(2)).sum();
    let sts: f64 = points.iter().map(|p| (p.0 - mean_t) * (p.1 - mean_s)).sum();
    let sss: f64 = points.iter().map(|p| (p.1 - mean_s).powi(2)).sum();
    if stt <= 0.0 || sss <= f64::EPSILON * mean_s.abs().max(1.0) * nf {
        return degenerate;
    }
    let velocity = sts / stt;
    let r2 = (sts * sts / (stt * sss)).clamp(0.0, 1.0);
    WaveFit {
        velocity,
        r2,
        samples: n,
        reliable: r2 >= min_r2,
    }
}

fn check_window(field: &SampledField, window: (f64, f64)) -> Result<()> {
    let (a, b) = window;
    let start = field.times.first().copied().unwrap_or(0.0);
    let end = field.times.last().copied().unwrap_or(0.0);
    let tol = field.sample_dt();
    if !(a < b && a >= start - tol && b <= end + tol) {
        return Err(SolverError::InvalidParameter {
            name: "window",
            reason: format!("[{a}, {b}] s is not inside the sampled span [{start}, {end}] s"),
        });
    }
    Ok(())
}

/// Speed of the dominant travelling peak in `window`, over the whole rod.
pub fn estimate_wave_speed(
    field: &SampledField,
    window: (f64, f64),
    analysis: &AnalysisConfig,
) -> Result<WaveFit> {
    check_window(field, window)?;
    let band = (f64::NEG_INFINITY, f64::INFINITY);
    let peaks = track_peaks(field, window, band, analysis.tracking);
    Ok(fit_line(&peaks, analysis.min_r2))
}

/// One row of `wavespeed.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveSpeedRow {
    pub youngs_modulus: f64,
    pub density: f64,
    /// `|c|` [m/s].
    pub speed: f64,
    /// `|c| / sqrt(E / rho)`.
    pub coefficient: f64,
    pub r2: f64,
    pub direction: Direction,
}

impl WaveSpeedRow {
    pub fn new(youngs_modulus: f64, density: f64, fit: &WaveFit) -> Self {
        let speed = fit.velocity.abs();
        Self {
            youngs_modulus,
            density,
            speed,
            coefficient: speed / (youngs_modulus / density).sqrt(),
            r2: fit.r2,
            direction: fit.direction(),
        }
    }

    pub fn reliable(&self) -> bool {
        self.direction != Direction::Undetermined
    }
}

/// Whole-rod and per-half fits of the peak motion in one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionReport {
    pub whole: WaveFit,
    pub base_half: WaveFit,
    pub tip_half: WaveFit,
}

impl DirectionReport {
    /// Direction of the peak that dominates the whole rod.
    pub fn dominant(&self) -> Direction {
        self.whole.direction()
    }

    /// Both halves carry reliable peaks moving in opposite directions.
    pub fn bimodal(&self) -> bool {
        let (a, b) = (self.base_half.direction(), self.tip_half.direction());
        a != Direction::Undetermined && b != Direction::Undetermined && a != b
    }
}

/// Fits the peak motion on the whole rod and separately on each half, so two
/// waves meeting in the middle are both seen.
pub fn wave_directions(
    field: &SampledField,
    window: (f64, f64),
    length: f64,
    analysis: &AnalysisConfig,
) -> Result<DirectionReport> {
    check_window(field, window)?;
    let fit = |band| {
        fit_line(
            &track_peaks(field, window, band, analysis.tracking),
            analysis.min_r2,
        )
    };
    Ok(DirectionReport {
        whole: fit((f64::NEG_INFINITY, f64::INFINITY)),
        base_half: fit((f64::NEG_INFINITY, 0.5 * length)),
        tip_half: fit((0.5 * length, f64::INFINITY)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse(c0: f64, width: f64, moving: bool) -> SampledField {
        let times: Vec<f64> = (0..2000).map(|k| (k as f64 + 0.5) * 5e-5).collect();
        let positions: Vec<f64> = (0..100).map(|j| (j as f64 + 0.5) * 0.002).collect();
        let values = times
            .iter()
            .map(|&t| {
                let centre = if moving { 0.05 + c0 * t } else { 0.1 };
                positions
                    .iter()
                    .map(|&s| (-((s - centre) / width).powi(2)).exp())
                    .collect()
            })
            .collect();
        SampledField::scalar(times, positions, values)
    }

    fn amplitude() -> AnalysisConfig {
        AnalysisConfig {
            tracking: Tracking::Amplitude,
            ..Default::default()
        }
    }

    #[test]
    fn recovers_synthetic_speed() {
        let field = pulse(2.0, 0.01, true);
        let fit = estimate_wave_speed(&field, (0.0, 0.05), &amplitude()).unwrap();
        assert!((fit.velocity - 2.0).abs() < 0.05, "{fit:?}");
        assert!(fit.reliable);
        assert_eq!(fit.direction(), Direction::BaseToTip);
    }

    #[test]
    fn stationary_pulse_is_flagged() {
        let field = pulse(0.0, 0.01, false);
        let fit = estimate_wave_speed(&field, (0.0, 0.09), &amplitude()).unwrap();
        assert!(fit.velocity.abs() < 1e-9);
        assert!(!fit.reliable);
        assert_eq!(fit.direction(), Direction::Undetermined);
    }

    #[test]
    fn window_must_be_inside_the_samples() {
        let field = pulse(1.0, 0.01, true);
        assert!(estimate_wave_speed(&field, (0.05, 0.2), &amplitude()).is_err());
        assert!(estimate_wave_speed(&field, (0.05, 0.01), &amplitude()).is_err());
    }

    #[test]
    fn rate_tracking_sees_a_front_over_a_static_profile() {
        // a step riding on a large static ramp: the amplitude peak is pinned
        // at the tip, the rate peak follows the front
        let c0 = 1.5;
        let mut field = pulse(c0, 0.01, true);
        for (k, row) in field.values.iter_mut().enumerate() {
            let t = field.times[k];
            for (j, v) in row.iter_mut().enumerate() {
                let s = field.positions[j];
                *v = 20.0 * s + 0.2 * (1.0 + ((s - 0.02 - c0 * t) / 0.005).tanh());
            }
        }
        let rate = AnalysisConfig::default();
        let fit = estimate_wave_speed(&field, (0.01, 0.09), &rate).unwrap();
        assert!((fit.velocity - c0).abs() < 0.02 * c0, "{fit:?}");
        let fit = estimate_wave_speed(&field, (0.01, 0.09), &amplitude()).unwrap();
        assert!(!fit.reliable);
    }

    #[test]
    fn halves_detect_colliding_waves() {
        let times: Vec<f64> = (0..400).map(|k| (k as f64 + 0.5) * 1e-4).collect();
        let positions: Vec<f64> = (0..100).map(|j| (j as f64 + 0.5) * 0.002).collect();
        let values = times
            .iter()
            .map(|&t| {
                positions
                    .iter()
                    .map(|&s| {
                        let up = 0.01 + t;
                        let down = 0.19 - t;
                        (-((s - up) / 0.008).powi(2)).exp()
                            + 0.9 * (-((s - down) / 0.008).powi(2)).exp()
                    })
                    .collect()
            })
            .collect();
        let field = SampledField::scalar(times, positions, values);
        let report = wave_directions(&field, (0.0, 0.04), 0.2, &amplitude()).unwrap();
        assert_eq!(report.base_half.direction(), Direction::BaseToTip);
        assert_eq!(report.tip_half.direction(), Direction::TipToBase);
        assert!(report.bimodal());
        assert_eq!(report.dominant(), Direction::BaseToTip);
    }

    #[test]
    fn row_coefficient() {
        let fit = WaveFit {
            velocity: -2.0,
            r2: 0.9,
            samples: 10,
            reliable: true,
        };
        let row = WaveSpeedRow::new(1e4, 2500.0, &fit);
        assert_eq!(row.speed, 2.0);
        assert!((row.coefficient - 1.0).abs() < 1e-12);
        assert_eq!(row.direction.sign(), -1);
    }
}
