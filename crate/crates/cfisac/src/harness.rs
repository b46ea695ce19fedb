//! Batch experiment runner: deterministic CSV/JSON artifacts for every
//! study the library supports.
//!
//! Each experiment writes one flat CSV (header row, fixed column order,
//! rows sorted on the key columns, floats as `{:.12e}`), and the scheme
//! experiments additionally write one JSON file per grid cell. Every row
//! carries the artifact version, the scenario content hash and the seed it
//! was produced from, so outputs are traceable and byte-identical across
//! re-runs of the same spec. Grid cells run on a worker pool; files are
//! written atomically (temp file + rename).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{self, ChannelError};
use crate::fim::{self, EchoModel, FimError};
use crate::music::{
    band_of, simulate_echoes, GridSpec, MusicError, MusicScan, Peak, SteeringMode,
};
use crate::robust::{bi_rbo, BeamStructure, CommModel, RobustError};
use crate::scenario::{dbm_to_watts, ScenarioConfig, ScenarioError};
use crate::schemes::{run_scheme, Scheme, SchemeError, SchemeResult};
use crate::sensing::{optimize_sensing_covariance, SensingCovariance, SensingError};
use crate::timealloc::{crlb_at, eta_bar, TimeAllocError};

/// On-disk artifact format version, stamped into every row.
pub const ARTIFACT_VERSION: u32 = 1;

/// Split used by the MUSIC experiment (99 sensing slots per block).
pub const MUSIC_ETA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Fim(#[from] FimError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Music(#[from] MusicError),
    #[error(transparent)]
    Robust(#[from] RobustError),
    #[error(transparent)]
    TimeAlloc(#[from] TimeAllocError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

/// Which experiment a spec drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    ErrorModel,
    CrlbSweep,
    Music,
    Optimize,
    Convergence,
    EtaSweep,
}

impl ExperimentId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::ErrorModel => "error-model",
            ExperimentId::CrlbSweep => "crlb-sweep",
            ExperimentId::Music => "music",
            ExperimentId::Optimize => "optimize",
            ExperimentId::Convergence => "convergence",
            ExperimentId::EtaSweep => "eta-sweep",
        }
    }
}

/// A fully-resolved experiment request.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub experiment: ExperimentId,
    pub scenario: ScenarioConfig,
    /// Sensing-power sweep axis, in dBm.
    pub powers_dbm: Vec<f64>,
    /// CRLB-threshold sweep axis, in m^2.
    pub crlb_thresholds: Vec<f64>,
    /// Scatterer-draw seeds (`optimize`) or the Monte-Carlo noise seed
    /// (`error-model`, `music`; first entry used).
    pub seeds: Vec<u64>,
    /// Starting splits for `convergence`.
    pub eta0s: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub out_dir: PathBuf,
    /// Relative bisection tolerance passed to the rate optimizer.
    pub tol: f64,
    /// Monte-Carlo directions per error-magnitude point (`error-model`).
    pub dirs_per_point: usize,
}

impl ExperimentSpec {
    /// A spec with the experiment's default axes.
    pub fn new(experiment: ExperimentId, scenario: ScenarioConfig, out_dir: PathBuf) -> Self {
        ExperimentSpec {
            experiment,
            scenario,
            powers_dbm: match experiment {
                ExperimentId::CrlbSweep => vec![30.0, 35.0, 40.0, 45.0, 50.0],
                _ => vec![35.0, 40.0, 45.0],
            },
            crlb_thresholds: vec![2e-3, 4e-3],
            seeds: vec![12, 13, 14],
            eta0s: vec![0.1, 0.5, 0.9],
            schemes: vec![Scheme::Main, Scheme::Ei, Scheme::Mrt],
            out_dir,
            tol: 1e-3,
            dirs_per_point: 100_000,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.scenario
            .validate()
            .map_err(|e| HarnessError::InvalidSpec(e.to_string()))?;
        let nonempty = [
            (!self.powers_dbm.is_empty(), "powers_dbm"),
            (!self.crlb_thresholds.is_empty(), "crlb_thresholds"),
            (!self.seeds.is_empty(), "seeds"),
            (!self.eta0s.is_empty(), "eta0s"),
            (!self.schemes.is_empty(), "schemes"),
        ];
        for (ok, name) in nonempty {
            if !ok {
                return Err(HarnessError::InvalidSpec(format!("{name} axis is empty")));
            }
        }
        if self.dirs_per_point == 0 {
            return Err(HarnessError::InvalidSpec("dirs_per_point is zero".into()));
        }
        if !(self.tol > 0.0) {
            return Err(HarnessError::InvalidSpec(format!(
                "tol {} not positive",
                self.tol
            )));
        }
        Ok(())
    }
}

fn fnum(v: f64) -> String {
    format!("{v:.12e}")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::InvalidSpec(format!("csv buffer finalization failed: {e}")))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// error-model
// ---------------------------------------------------------------------------

/// One fitted location/antenna combination of the error-model study.
#[derive(Debug, Clone)]
pub struct ErrorModelFit {
    pub n_elements: usize,
    pub location: &'static str,
    /// `(delta_r, mean relative channel error)` points, ascending in
    /// `delta_r`.
    pub points: Vec<(f64, f64)>,
    /// Zero-intercept least-squares slope of the points.
    pub slope: f64,
    /// Coefficient of determination of the zero-intercept fit.
    pub r_squared: f64,
}

#[derive(Debug, Clone)]
pub struct ErrorModelReport {
    pub fits: Vec<ErrorModelFit>,
    pub csv_path: PathBuf,
}

const ERROR_MODEL_RANGE: f64 = 25.0;
const ERROR_MODEL_LOCATIONS: [(&str, [f64; 2]); 2] = [
    ("broadside", [0.0, ERROR_MODEL_RANGE]),
    (
        "diag45",
        [
            ERROR_MODEL_RANGE * std::f64::consts::FRAC_1_SQRT_2,
            ERROR_MODEL_RANGE * std::f64::consts::FRAC_1_SQRT_2,
        ],
    ),
];
const ERROR_MODEL_ELEMENTS: [usize; 3] = [21, 41, 61];

/// Single AP at the origin looking at a probe target 25 m away; only the
/// antenna count varies.
fn error_model_config(base: &ScenarioConfig, n_elements: usize) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.ap_centers = vec![[0.0, 0.0]];
    cfg.ap_orientations = vec![[cfg.element_spacing, 0.0]];
    cfg.user_positions = vec![[0.0, ERROR_MODEL_RANGE]];
    cfg.n_elements = n_elements;
    cfg
}

fn channel_at(target: [f64; 2], cfg: &ScenarioConfig) -> Result<DVector<Complex64>, ChannelError> {
    let a = channel::steering_vector(0, target, cfg)?;
    let beta = channel::gain(0, target, cfg)?;
    Ok(a.values * beta)
}

/// Monte-Carlo calibration of the channel-error-vs-position-error model:
/// mean relative channel perturbation against position error magnitude, per
/// antenna count and look direction, with a zero-intercept linear fit.
pub fn run_error_model(spec: &ExperimentSpec) -> Result<ErrorModelReport, HarnessError> {
    spec.validate()?;
    let seed = spec.seeds[0];
    let deltas: Vec<f64> = (0..=10).map(|i| i as f64 * 0.005).collect();
    let mut fits = Vec::new();
    for &n in &ERROR_MODEL_ELEMENTS {
        let cfg = error_model_config(&spec.scenario, n);
        for (loc_idx, &(loc, center)) in ERROR_MODEL_LOCATIONS.iter().enumerate() {
            let h0 = channel_at(center, &cfg)?;
            let h0_norm = h0.norm();
            let points: Vec<(f64, f64)> = deltas
                .par_iter()
                .enumerate()
                .map(|(pt_idx, &dr)| -> Result<(f64, f64), HarnessError> {
                    if dr == 0.0 {
                        let h = channel_at(center, &cfg)?;
                        return Ok((0.0, (h - &h0).norm() / h0_norm));
                    }
                    // Independent stream per (elements, location, point) so
                    // the result does not depend on scheduling.
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        seed ^ ((n as u64) << 40) ^ ((loc_idx as u64) << 32) ^ (pt_idx as u64),
                    );
                    let mut acc = 0.0;
                    for _ in 0..spec.dirs_per_point {
                        let theta = rng.gen::<f64>() * std::f64::consts::TAU;
                        let target = [center[0] + dr * theta.cos(), center[1] + dr * theta.sin()];
                        let h = channel_at(target, &cfg)?;
                        acc += (h - &h0).norm() / h0_norm;
                    }
                    Ok((dr, acc / spec.dirs_per_point as f64))
                })
                .collect::<Result<_, _>>()?;
            let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
            let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
            let slope = sxy / sxx;
            let mean_y: f64 = points.iter().map(|(_, y)| y).sum::<f64>() / points.len() as f64;
            let ss_res: f64 = points.iter().map(|(x, y)| (y - slope * x).powi(2)).sum();
            let ss_tot: f64 = points.iter().map(|(_, y)| (y - mean_y).powi(2)).sum();
            fits.push(ErrorModelFit {
                n_elements: n,
                location: loc,
                points,
                slope,
                r_squared: 1.0 - ss_res / ss_tot,
            });
        }
    }
    fits.sort_by(|a, b| (a.n_elements, a.location).cmp(&(b.n_elements, b.location)));

    let mut rows = Vec::new();
    for fit in &fits {
        let cfg = error_model_config(&spec.scenario, fit.n_elements);
        let hash = cfg.content_hash();
        for &(dr, mean) in &fit.points {
            rows.push(vec![
                ARTIFACT_VERSION.to_string(),
                hash.clone(),
                seed.to_string(),
                fit.n_elements.to_string(),
                fit.location.to_string(),
                fnum(dr),
                fnum(mean),
                fnum(fit.slope),
                fnum(fit.r_squared),
            ]);
        }
    }
    let csv_path = spec.out_dir.join("error_model.csv");
    write_csv(
        &csv_path,
        &[
            "version",
            "scenario_hash",
            "seed",
            "n_elements",
            "location",
            "delta_r",
            "mean_rel_error",
            "fit_slope",
            "fit_r2",
        ],
        &rows,
    )?;
    Ok(ErrorModelReport { fits, csv_path })
}

// ---------------------------------------------------------------------------
// crlb-sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CrlbSweepRow {
    pub m_aps: usize,
    pub n_elements: usize,
    pub power_dbm: f64,
    pub power_scale: f64,
    pub sqrt_crlb_opt: f64,
    pub sqrt_crlb_uniform: f64,
}

#[derive(Debug, Clone)]
pub struct CrlbSweepReport {
    pub rows: Vec<CrlbSweepRow>,
    pub csv_path: PathBuf,
}

/// AP-count fairness substitutions: fewer APs get proportionally more
/// antennas and sensing power so total array elements and radiated energy
/// stay comparable across the comparison.
const CRLB_FAIRNESS: [(usize, usize, f64); 3] = [(1, 63, 3.0), (2, 31, 1.5), (3, 21, 1.0)];

fn crlb_sweep_config(
    base: &ScenarioConfig,
    m: usize,
    n_elements: usize,
    budget: f64,
) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.ap_centers.truncate(m);
    cfg.ap_orientations.truncate(m);
    cfg.n_elements = n_elements;
    cfg.sensing_power_budget = budget;
    cfg
}

/// Optimal and uniform root block-normalized CRLB against sensing power,
/// for 1..=3 APs under the fairness substitutions.
pub fn run_crlb_sweep(spec: &ExperimentSpec) -> Result<CrlbSweepReport, HarnessError> {
    spec.validate()?;
    if spec.scenario.n_aps() < 3 {
        return Err(HarnessError::InvalidSpec(
            "crlb-sweep needs a scenario with at least 3 APs".into(),
        ));
    }
    let cells: Vec<(usize, usize, f64, f64)> = CRLB_FAIRNESS
        .iter()
        .flat_map(|&(m, n, scale)| spec.powers_dbm.iter().map(move |&p| (m, n, scale, p)))
        .collect();
    let mut rows: Vec<(CrlbSweepRow, String)> = cells
        .par_iter()
        .map(|&(m, n, scale, p)| -> Result<(CrlbSweepRow, String), HarnessError> {
            let cfg = crlb_sweep_config(&spec.scenario, m, n, dbm_to_watts(p) * scale);
            let model = EchoModel::new(&cfg)?;
            let optimum = optimize_sensing_covariance(&model, &cfg)?;
            let uniform = SensingCovariance::uniform(&cfg, cfg.sensing_power_budget);
            let uniform_crlb = fim::crlb(&uniform, 0.5, &model, &cfg)?;
            Ok((
                CrlbSweepRow {
                    m_aps: m,
                    n_elements: n,
                    power_dbm: p,
                    power_scale: scale,
                    sqrt_crlb_opt: optimum.crlb.crlb_bar.sqrt(),
                    sqrt_crlb_uniform: uniform_crlb.crlb_bar.sqrt(),
                },
                cfg.content_hash(),
            ))
        })
        .collect::<Result<_, _>>()?;
    rows.sort_by(|a, b| {
        (a.0.m_aps, a.0.power_dbm)
            .partial_cmp(&(b.0.m_aps, b.0.power_dbm))
            .unwrap()
    });

    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(r, hash)| {
            vec![
                ARTIFACT_VERSION.to_string(),
                hash.clone(),
                spec.scenario.rcs_seed.to_string(),
                r.m_aps.to_string(),
                r.n_elements.to_string(),
                fnum(r.power_dbm),
                fnum(r.power_scale),
                fnum(r.sqrt_crlb_opt),
                fnum(r.sqrt_crlb_uniform),
            ]
        })
        .collect();
    let csv_path = spec.out_dir.join("crlb_sweep.csv");
    write_csv(
        &csv_path,
        &[
            "version",
            "scenario_hash",
            "seed",
            "m_aps",
            "n_elements",
            "power_dbm",
            "power_scale",
            "sqrt_crlb_opt",
            "sqrt_crlb_uniform",
        ],
        &csv_rows,
    )?;
    Ok(CrlbSweepReport {
        rows: rows.into_iter().map(|(r, _)| r).collect(),
        csv_path,
    })
}

// ---------------------------------------------------------------------------
// music
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct MusicCase {
    pub covariance: &'static str,
    pub mode: &'static str,
    /// Distance from each user to its nearest refined peak.
    pub per_user_error: Vec<f64>,
    pub peaks: Vec<Peak>,
    /// Spectrum value at each true user position.
    pub value_at_users: Vec<f64>,
    /// Contour band of the spectrum at each true user position, against the
    /// weakest user response under the same scan.
    pub band_at_users: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct MusicReport {
    pub cases: Vec<MusicCase>,
    pub csv_path: PathBuf,
}

fn nearest_distance(p: [f64; 2], points: impl Iterator<Item = [f64; 2]>) -> f64 {
    points
        .map(|q| ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Near- and far-field MUSIC localization over the service region for both
/// the uniform and the CRLB-optimal sensing covariance, at the standard
/// `MUSIC_ETA` split.
pub fn run_music(spec: &ExperimentSpec) -> Result<MusicReport, HarnessError> {
    run_music_on(spec, GridSpec::service_region())
}

/// `run_music` with a caller-provided scan grid.
pub fn run_music_on(spec: &ExperimentSpec, grid: GridSpec) -> Result<MusicReport, HarnessError> {
    spec.validate()?;
    let cfg = &spec.scenario;
    let noise_seed = spec.seeds[0];
    let model = EchoModel::new(cfg)?;
    let uniform = SensingCovariance::uniform(cfg, cfg.sensing_power_budget);
    let optimized = optimize_sensing_covariance(&model, cfg)?.covariance;

    let mut cases = Vec::new();
    for (cov_name, psi) in [("uniform", &uniform), ("optimized", &optimized)] {
        let batch = simulate_echoes(psi, MUSIC_ETA, &model, cfg, noise_seed)?;
        for (mode_name, mode) in [
            ("near", SteeringMode::NearField),
            ("far", SteeringMode::FarField),
        ] {
            let scan = MusicScan::new(&batch, cfg, mode)?;
            let spectrum = scan.spectrum(grid);
            let reference = scan.band_reference(&cfg.user_positions);
            let per_user_error: Vec<f64> = cfg
                .user_positions
                .iter()
                .map(|&u| nearest_distance(u, spectrum.peaks.iter().map(|p| p.position)))
                .collect();
            let value_at_users: Vec<f64> = cfg
                .user_positions
                .iter()
                .map(|&u| scan.evaluate(u))
                .collect();
            let band_at_users: Vec<u8> = value_at_users
                .iter()
                .map(|&v| band_of(v, reference))
                .collect();
            cases.push(MusicCase {
                covariance: cov_name,
                mode: mode_name,
                per_user_error,
                peaks: spectrum.peaks,
                value_at_users,
                band_at_users,
            });
        }
    }

    let hash = cfg.content_hash();
    let mut rows = Vec::new();
    for case in &cases {
        for k in 0..cfg.n_users() {
            rows.push(vec![
                ARTIFACT_VERSION.to_string(),
                hash.clone(),
                noise_seed.to_string(),
                case.covariance.to_string(),
                case.mode.to_string(),
                "user".to_string(),
                k.to_string(),
                fnum(cfg.user_positions[k][0]),
                fnum(cfg.user_positions[k][1]),
                fnum(case.value_at_users[k]),
                case.band_at_users[k].to_string(),
                fnum(case.per_user_error[k]),
            ]);
        }
        for (i, p) in case.peaks.iter().enumerate() {
            // For peak rows the error column is the distance to the nearest
            // true user: large values flag spurious peaks.
            let to_user = nearest_distance(p.position, cfg.user_positions.iter().copied());
            rows.push(vec![
                ARTIFACT_VERSION.to_string(),
                hash.clone(),
                noise_seed.to_string(),
                case.covariance.to_string(),
                case.mode.to_string(),
                "peak".to_string(),
                i.to_string(),
                fnum(p.position[0]),
                fnum(p.position[1]),
                fnum(p.value),
                String::new(),
                fnum(to_user),
            ]);
        }
    }
    rows.sort();
    let csv_path = spec.out_dir.join("music.csv");
    write_csv(
        &csv_path,
        &[
            "version",
            "scenario_hash",
            "seed",
            "covariance",
            "mode",
            "kind",
            "index",
            "x",
            "y",
            "value",
            "band",
            "error_m",
        ],
        &rows,
    )?;
    Ok(MusicReport { cases, csv_path })
}

// ---------------------------------------------------------------------------
// optimize
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OptimizeCell {
    pub scheme: Scheme,
    pub power_dbm: f64,
    pub crlb_threshold: f64,
    pub seed: u64,
    pub outcome: Result<SchemeResult, String>,
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub cells: Vec<OptimizeCell>,
    pub csv_path: PathBuf,
}

/// Default starting split for scheme runs in the grid sweep.
pub const OPTIMIZE_ETA0: f64 = 0.5;

fn optimize_cell_config(
    base: &ScenarioConfig,
    power_dbm: f64,
    threshold: f64,
    seed: u64,
) -> ScenarioConfig {
    let mut cfg = base.clone();
    cfg.sensing_power_budget = dbm_to_watts(power_dbm);
    cfg.crlb_threshold = threshold;
    cfg.rcs_seed = seed;
    cfg
}

/// Runs the selected schemes over the sensing-power x threshold x seed
/// grid on a worker pool. Per-cell failures are recorded in the CSV and do
/// not stop the sweep; each successful cell also writes a JSON artifact.
pub fn run_optimize(spec: &ExperimentSpec) -> Result<OptimizeReport, HarnessError> {
    spec.validate()?;
    let mut grid = Vec::new();
    for &scheme in &spec.schemes {
        for &p in &spec.powers_dbm {
            for &th in &spec.crlb_thresholds {
                for &seed in &spec.seeds {
                    grid.push((scheme, p, th, seed));
                }
            }
        }
    }
    let cells: Vec<OptimizeCell> = grid
        .par_iter()
        .map(|&(scheme, p, th, seed)| {
            let cfg = optimize_cell_config(&spec.scenario, p, th, seed);
            let outcome =
                run_scheme(scheme, &cfg, OPTIMIZE_ETA0, spec.tol).map_err(|e| e.to_string());
            OptimizeCell {
                scheme,
                power_dbm: p,
                crlb_threshold: th,
                seed,
                outcome,
            }
        })
        .collect();

    for cell in &cells {
        if let Ok(res) = &cell.outcome {
            let name = format!(
                "optimize_{}_p{:.1}_th{:.3e}_s{}.json",
                cell.scheme.as_str(),
                cell.power_dbm,
                cell.crlb_threshold,
                cell.seed
            );
            write_atomic(
                &spec.out_dir.join(name),
                serde_json::to_string_pretty(res)?.as_bytes(),
            )?;
        }
    }

    let mut rows: Vec<Vec<String>> = cells
        .iter()
        .map(|cell| {
            let cfg = optimize_cell_config(
                &spec.scenario,
                cell.power_dbm,
                cell.crlb_threshold,
                cell.seed,
            );
            let mut row = vec![
                ARTIFACT_VERSION.to_string(),
                cfg.content_hash(),
                cell.seed.to_string(),
                cell.scheme.as_str().to_string(),
                fnum(cell.power_dbm),
                fnum(cell.crlb_threshold),
            ];
            match &cell.outcome {
                Ok(r) => row.extend([
                    fnum(r.eta0),
                    fnum(r.eta_final),
                    fnum(r.eta_bar),
                    fnum(r.certified_rate),
                    fnum(r.relaxed_rate),
                    fnum(r.crlb_bar),
                    fnum(r.crlb_final),
                    (r.high_rank_extraction as u8).to_string(),
                    r.iterations.to_string(),
                    String::new(),
                ]),
                Err(e) => row.extend([
                    fnum(OPTIMIZE_ETA0),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                    "0".into(),
                    "0".into(),
                    e.clone(),
                ]),
            }
            row
        })
        .collect();
    rows.sort();
    let csv_path = spec.out_dir.join("optimize.csv");
    write_csv(
        &csv_path,
        &[
            "version",
            "scenario_hash",
            "seed",
            "scheme",
            "power_dbm",
            "crlb_threshold",
            "eta0",
            "eta_final",
            "eta_bar",
            "certified_rate",
            "relaxed_rate",
            "crlb_bar",
            "crlb_final",
            "high_rank",
            "iterations",
            "error",
        ],
        &rows,
    )?;
    Ok(OptimizeReport { cells, csv_path })
}

// ---------------------------------------------------------------------------
// convergence
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub runs: Vec<(f64, Result<SchemeResult, String>)>,
    pub csv_path: PathBuf,
}

/// Alternating-optimization traces of the main scheme from several
/// starting splits.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<ConvergenceReport, HarnessError> {
    spec.validate()?;
    let runs: Vec<(f64, Result<SchemeResult, String>)> = spec
        .eta0s
        .par_iter()
        .map(|&eta0| {
            (
                eta0,
                run_scheme(Scheme::Main, &spec.scenario, eta0, spec.tol).map_err(|e| e.to_string()),
            )
        })
        .collect();
    let hash = spec.scenario.content_hash();
    let mut rows = Vec::new();
    for (eta0, outcome) in &runs {
        match outcome {
            Ok(res) => {
                for (i, &rate) in res.rate_trace.iter().enumerate() {
                    let eta = res.eta_trace.get(i).copied().unwrap_or(res.eta_final);
                    rows.push(vec![
                        ARTIFACT_VERSION.to_string(),
                        hash.clone(),
                        spec.scenario.rcs_seed.to_string(),
                        fnum(*eta0),
                        format!("{i:03}"),
                        fnum(eta),
                        fnum(rate),
                        String::new(),
                    ]);
                }
            }
            Err(e) => rows.push(vec![
                ARTIFACT_VERSION.to_string(),
                hash.clone(),
                spec.scenario.rcs_seed.to_string(),
                fnum(*eta0),
                "000".to_string(),
                "nan".into(),
                "nan".into(),
                e.clone(),
            ]),
        }
    }
    rows.sort();
    let csv_path = spec.out_dir.join("convergence.csv");
    write_csv(
        &csv_path,
        &[
            "version",
            "scenario_hash",
            "seed",
            "eta0",
            "iteration",
            "eta",
            "rate",
            "error",
        ],
        &rows,
    )?;
    Ok(ConvergenceReport { runs, csv_path })
}

// ---------------------------------------------------------------------------
// eta-sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EtaSweepRow {
    pub eta: f64,
    pub feasible: bool,
    pub relaxed_rate: f64,
    pub crlb: f64,
}

#[derive(Debug, Clone)]
pub struct EtaSweepReport {
    pub rows: Vec<EtaSweepRow>,
    pub eta_bar: f64,
    pub csv_path: PathBuf,
}

/// Robust rate against a fixed grid of splits (no alternating
/// optimization): the raw communication/sensing trade-off curve.
pub fn run_eta_sweep(spec: &ExperimentSpec) -> Result<EtaSweepReport, HarnessError> {
    spec.validate()?;
    let cfg = &spec.scenario;
    let model = EchoModel::new(cfg)?;
    let optimum = optimize_sensing_covariance(&model, cfg)?;
    let crlb_bar = optimum.crlb.crlb_bar;
    let bar = eta_bar(crlb_bar, cfg)?;
    let comm = CommModel::new(cfg)?;
    let grid: Vec<f64> = (1..=19).map(|i| i as f64 * 0.05).collect();
    let mut rows: Vec<EtaSweepRow> = grid
        .par_iter()
        .map(|&eta| -> Result<EtaSweepRow, HarnessError> {
            let crlb = crlb_at(crlb_bar, eta, cfg);
            if eta > bar {
                return Ok(EtaSweepRow {
                    eta,
                    feasible: false,
                    relaxed_rate: 0.0,
                    crlb,
                });
            }
            let eps = channel::uncertainty_bounds(crlb, &comm.channels, cfg).eps;
            let out = bi_rbo(&comm, &eps, eta, cfg, spec.tol, BeamStructure::Full, None)?;
            Ok(EtaSweepRow {
                eta,
                feasible: true,
                relaxed_rate: out.rate,
                crlb,
            })
        })
        .collect::<Result<_, _>>()?;
    rows.sort_by(|a, b| a.eta.partial_cmp(&b.eta).unwrap());
    let hash = cfg.content_hash();
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                ARTIFACT_VERSION.to_string(),
                hash.clone(),
                cfg.rcs_seed.to_string(),
                fnum(r.eta),
                fnum(bar),
                (r.feasible as u8).to_string(),
                fnum(r.relaxed_rate),
                fnum(r.crlb),
            ]
        })
        .collect();
    let csv_path = spec.out_dir.join("eta_sweep.csv");
    write_csv(
        &csv_path,
        &[
            "version",
            "scenario_hash",
            "seed",
            "eta",
            "eta_bar",
            "feasible",
            "relaxed_rate",
            "crlb",
        ],
        &csv_rows,
    )?;
    Ok(EtaSweepReport {
        rows,
        eta_bar: bar,
        csv_path,
    })
}
