//! Monte-Carlo SNR sweeps for the frequency and direction experiments.

mod config;

pub use config::{ExperimentConfig, Method, Mode};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::arrays::{
    design_coprime_array, design_diophantine_array, witness_table, ArrayGeometry, Witness,
};
use crate::diophantine::{build_schedule, consecutive_scheme, SampleSchedule};
use crate::error::{Error, Result};
use crate::moments::{
    coarray_sequence, collect_series, coprime_demand, coprime_second_order, degeneracy_check,
    diophantine_third_order, LagMomentSequence,
};
use crate::spectral::{
    build_hankel, default_rows, music_spectrum, noise_subspace, pick_peaks, rmse_circular,
    rmse_matched, Pseudospectrum,
};
use crate::waveform::{
    downsample_stream, random_narrowband_with, random_sources_with, sensor_series, NarrowbandSet,
    NoiseSpec, SampleStream, SourceSet,
};

/// Redraws allowed per trial before the sweep gives up.
pub const MAX_REDRAWS: u32 = 32;

// Noise substreams: sampler slots for the scheme, then the co-prime pair.
const COPRIME_STREAM: u64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub method: Method,
    /// Mean of the per-trial RMSE.
    pub rmse: f64,
    pub trials: usize,
    pub redraws: u64,
    pub mean_runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub snr_db: f64,
    pub method: Method,
    pub trial: usize,
    pub rmse: f64,
    pub redraws: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub records: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn row(&self, snr_db: f64, method: Method) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.snr_db == snr_db && r.method == method)
    }

    /// `(snr_db, rmse)` for every trial of one method.
    pub fn trial_points(&self, method: Method) -> Vec<(f64, f64)> {
        self.records
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.snr_db, r.rmse))
            .collect()
    }
}

/// Noise power giving `snr_db` for a total source power.
pub fn noise_power(signal_power: f64, snr_db: f64) -> f64 {
    signal_power / 10f64.powf(snr_db / 10.0)
}

/// One estimate with everything needed to inspect it.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub truth: Vec<f64>,
    pub estimates: Vec<f64>,
    pub rmse: f64,
    pub moments: LagMomentSequence,
    pub spectrum: Pseudospectrum,
}

fn subspace_estimate(
    moments: LagMomentSequence,
    order: usize,
    cfg: &ExperimentConfig,
    truth: Vec<f64>,
) -> Result<TrialOutcome> {
    let h = build_hankel(&moments, default_rows(moments.len()))?;
    let basis = noise_subspace(&h, order)?;
    let spectrum = music_spectrum(&basis, cfg.grid())?;
    let estimates = pick_peaks(&spectrum, order)?.locations;
    let rmse = match cfg.mode {
        Mode::Freq => rmse_circular(&estimates, &truth)?,
        Mode::Doa => rmse_matched(&estimates, &truth)?,
    };
    Ok(TrialOutcome {
        truth,
        estimates,
        rmse,
        moments,
        spectrum,
    })
}

/// Fixed per-sweep structures shared by every trial.
enum Plan {
    Freq {
        schedule: Option<SampleSchedule>,
        coprime_demand: Option<(Vec<u64>, Vec<u64>)>,
    },
    Doa {
        diophantine: Option<(ArrayGeometry, BTreeMap<i64, Vec<Witness>>)>,
        coprime: Option<(ArrayGeometry, BTreeMap<i64, Vec<Witness>>)>,
    },
}

impl Plan {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let uses = |m| cfg.methods.contains(&m);
        match cfg.mode {
            Mode::Freq => {
                let schedule = if uses(Method::Diophantine) {
                    Some(build_schedule(
                        &consecutive_scheme(cfg.gamma)?,
                        cfg.lags,
                        cfg.snapshots,
                    )?)
                } else {
                    None
                };
                let coprime_demand = if uses(Method::Coprime) {
                    let (m1, m2) = cfg.coprime_rates;
                    let (a, b) = coprime_demand(m1, m2, cfg.lags, cfg.snapshots)?;
                    Some((a.into_iter().collect(), b.into_iter().collect()))
                } else {
                    None
                };
                Ok(Plan::Freq {
                    schedule,
                    coprime_demand,
                })
            }
            Mode::Doa => {
                let with_table = |g: ArrayGeometry| {
                    let t = witness_table(&g);
                    (g, t)
                };
                let diophantine = if uses(Method::Diophantine) {
                    let (p1, p2, q) = cfg.array;
                    Some(with_table(design_diophantine_array(p1, p2, q)?))
                } else {
                    None
                };
                let coprime = if uses(Method::Coprime) {
                    let (m1, m2) = cfg.coprime_array;
                    Some(with_table(design_coprime_array(m1, m2)?))
                } else {
                    None
                };
                Ok(Plan::Doa {
                    diophantine,
                    coprime,
                })
            }
        }
    }
}

/// Sources for one trial attempt, plus the seed of its noise.
enum Scene {
    Freq(SourceSet),
    Doa(NarrowbandSet),
}

impl Scene {
    fn draw(cfg: &ExperimentConfig, trial: usize, attempt: u32) -> Result<(Self, u64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(((trial as u64) << 8) | u64::from(attempt));
        let scene = match cfg.mode {
            Mode::Freq => Scene::Freq(random_sources_with(
                &mut rng,
                cfg.sources,
                cfg.separation(),
                (cfg.amplitude, cfg.amplitude),
            )?),
            Mode::Doa => Scene::Doa(random_narrowband_with(&mut rng, cfg.sources, &cfg.prior)?),
        };
        Ok((scene, rng.next_u64()))
    }

    fn power(&self) -> f64 {
        match self {
            Scene::Freq(s) => s.power(),
            Scene::Doa(s) => s.power(),
        }
    }
}

fn run_method(
    cfg: &ExperimentConfig,
    plan: &Plan,
    scene: &Scene,
    method: Method,
    noise: NoiseSpec,
) -> Result<TrialOutcome> {
    match (plan, scene) {
        (
            Plan::Freq {
                schedule,
                coprime_demand,
            },
            Scene::Freq(s),
        ) => {
            let truth = s.frequencies();
            let moments = match method {
                Method::Diophantine => {
                    let sched = schedule
                        .as_ref()
                        .ok_or_else(|| Error::Internal("no schedule".into()))?;
                    degeneracy_check(s, &consecutive_scheme(cfg.gamma)?).into_result()?;
                    let demands = sched.demands();
                    let rates = sched.rates();
                    let streams: Vec<SampleStream> = (0..3)
                        .map(|i| {
                            downsample_stream(
                                s,
                                rates[i],
                                demands[i].iter().copied(),
                                &noise.substream(i as u64),
                            )
                        })
                        .collect();
                    diophantine_third_order([&streams[0], &streams[1], &streams[2]], sched)?
                }
                Method::Coprime => {
                    let (d1, d2) = coprime_demand
                        .as_ref()
                        .ok_or_else(|| Error::Internal("no demand".into()))?;
                    let (m1, m2) = cfg.coprime_rates;
                    let x1 = downsample_stream(
                        s,
                        m1,
                        d1.iter().copied(),
                        &noise.substream(COPRIME_STREAM),
                    );
                    let x2 = downsample_stream(
                        s,
                        m2,
                        d2.iter().copied(),
                        &noise.substream(COPRIME_STREAM + 1),
                    );
                    coprime_second_order(&x1, &x2, cfg.lags, cfg.snapshots)?
                }
            };
            subspace_estimate(moments, cfg.sources, cfg, truth)
        }
        (
            Plan::Doa {
                diophantine,
                coprime,
            },
            Scene::Doa(s),
        ) => {
            let (geometry, table) = match method {
                Method::Diophantine => diophantine.as_ref(),
                Method::Coprime => coprime.as_ref(),
            }
            .ok_or_else(|| Error::Internal(format!("no geometry for {method}")))?;
            let max_lag = geometry
                .guaranteed_span()
                .ok_or_else(|| Error::Internal("geometry without a guaranteed span".into()))?;
            let snapshots = cfg.snapshots as usize;
            let series = collect_series(geometry, |id, p| {
                sensor_series(s, p, snapshots, &noise.substream(id as u64))
            });
            let moments = coarray_sequence(table, &series, max_lag)?;
            let truth = s.directions().iter().map(|d| d.to_degrees()).collect();
            subspace_estimate(moments, cfg.sources, cfg, truth)
        }
        _ => Err(Error::Internal(
            "scene does not match the experiment mode".into(),
        )),
    }
}

fn is_degenerate(e: &Error) -> bool {
    matches!(
        e,
        Error::Degenerate { .. } | Error::DegenerateSpectrum { .. }
    )
}

struct TrialCell {
    rmse: f64,
    redraws: u32,
    runtime_ms: f64,
}

/// One trial of one method at one SNR, redrawing degenerate scenes.
fn run_cell(
    cfg: &ExperimentConfig,
    plan: &Plan,
    trial: usize,
    snr_db: f64,
    method: Method,
) -> Result<TrialCell> {
    let mut last = None;
    for attempt in 0..=MAX_REDRAWS {
        let (scene, noise_seed) = Scene::draw(cfg, trial, attempt)?;
        let noise = NoiseSpec::new(noise_power(scene.power(), snr_db), noise_seed)?;
        let start = Instant::now();
        match run_method(cfg, plan, &scene, method, noise) {
            Ok(out) => {
                return Ok(TrialCell {
                    rmse: out.rmse,
                    redraws: attempt,
                    runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                })
            }
            Err(e) if is_degenerate(&e) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Internal("redraw loop ended without a result".into())))
}

/// Runs one trial without redraws and returns the full outcome.
pub fn run_single(
    cfg: &ExperimentConfig,
    trial: usize,
    snr_db: f64,
    method: Method,
) -> Result<TrialOutcome> {
    cfg.validate()?;
    let plan = Plan::new(cfg)?;
    let (scene, noise_seed) = Scene::draw(cfg, trial, 0)?;
    let noise = NoiseSpec::new(noise_power(scene.power(), snr_db), noise_seed)?;
    run_method(cfg, &plan, &scene, method, noise)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let plan = Plan::new(cfg)?;
    let cells: Vec<(f64, Method)> = cfg
        .snr_db
        .iter()
        .flat_map(|&snr| cfg.methods.iter().map(move |&m| (snr, m)))
        .collect();
    // Trials run in parallel; collect() keeps trial order, so the reduction
    // below does not depend on scheduling.
    let per_trial: Vec<Vec<TrialCell>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            cells
                .iter()
                .map(|&(snr, m)| run_cell(cfg, &plan, t, snr, m))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut result = SweepResult::default();
    for (c, &(snr_db, method)) in cells.iter().enumerate() {
        let mut rmse = 0.0;
        let mut runtime = 0.0;
        let mut redraws = 0u64;
        for (trial, row) in per_trial.iter().enumerate() {
            let cell = &row[c];
            rmse += cell.rmse;
            runtime += cell.runtime_ms;
            redraws += u64::from(cell.redraws);
            result.records.push(TrialRecord {
                snr_db,
                method,
                trial,
                rmse: cell.rmse,
                redraws: cell.redraws,
            });
        }
        let n = cfg.trials as f64;
        result.rows.push(SweepRow {
            snr_db,
            method,
            rmse: rmse / n,
            trials: cfg.trials,
            redraws,
            mean_runtime_ms: runtime / n,
        });
    }
    Ok(result)
}

pub fn run_freq_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    if cfg.mode != Mode::Freq {
        return Err(Error::invalid("run_freq_experiment needs mode = freq"));
    }
    run_experiment(cfg)
}

pub fn run_doa_experiment(cfg: &ExperimentConfig) -> Result<SweepResult> {
    if cfg.mode != Mode::Doa {
        return Err(Error::invalid("run_doa_experiment needs mode = doa"));
    }
    run_experiment(cfg)
}

pub const CSV_HEADER: &str = "snr_db,method,rmse,trials,redraws,mean_runtime_ms";

pub fn write_csv<W: Write>(
    result: &SweepResult,
    mut out: W,
    runtime_column: bool,
) -> std::io::Result<()> {
    let header = if runtime_column {
        CSV_HEADER
    } else {
        "snr_db,method,rmse,trials,redraws"
    };
    writeln!(out, "{header}")?;
    for r in &result.rows {
        write!(
            out,
            "{},{},{},{},{}",
            r.snr_db, r.method, r.rmse, r.trials, r.redraws
        )?;
        if runtime_column {
            write!(out, ",{}", r.mean_runtime_ms)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: &Path, runtime_column: bool) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    write_csv(result, &mut file, runtime_column).map_err(io)?;
    file.flush().map_err(io)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    /// Two-sided p-value from the t approximation with `n − 2` degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with tie-averaged ranks.
pub fn spearman(points: &[(f64, f64)]) -> Result<Spearman> {
    let n = points.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "Spearman test needs at least 3 points, got {n}"
        )));
    }
    let x = ranks(&points.iter().map(|p| p.0).collect::<Vec<_>>());
    let y = ranks(&points.iter().map(|p| p.1).collect::<Vec<_>>());
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (x[i] - mean, y[i] - mean);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid(
            "Spearman test needs variation in both variables",
        ));
    }
    let rho = sxy / (sxx * syy).sqrt();
    let df = n as f64 - 2.0;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Internal(e.to_string()))?;
        2.0 * dist.cdf(-t.abs())
    };
    Ok(Spearman { rho, p_value, n })
}
