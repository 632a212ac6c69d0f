use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gates::{identifiability_check, is_allowed, Condition, Method};
use super::metrics::{nmse, rmse, to_db};
use crate::baselines::{direct_ls, kron_factorize, seq_ml, EffectiveChannel, KfMode, MlGrid};
use crate::error::{Error, Result};
use crate::ntfe::{reconstruct_f, run_ntfe, BalsOptions, EstimationResult};
use crate::scene::{
    add_noise, angle_row, draw_scene, gen_codebook, gen_pilots, group_factors, group_steering, synthesize,
    GroupFactors, PilotSet, RisCodebook, SceneConfig, SceneTruth, SystemConfig,
};
use crate::tensor::{build_core, ComplexTensor};

/// The `[sweep]` section: Monte Carlo grid and methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub kf_mode: KfMode,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            snr_db: (0..9).map(|i| -10.0 + 5.0 * i as f64).collect(),
            trials: 200,
            seed: 0,
            methods: Method::ALL.to_vec(),
            kf_mode: KfMode::Outer,
        }
    }
}

/// Everything a sweep needs; also the layout of the configuration file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub system: SystemConfig,
    pub scene: SceneConfig,
    pub bals: BalsOptions,
    pub sweep: SweepSettings,
    pub ml_grid: MlGrid,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.scene.validate()?;
        self.bals.validate()?;
        self.ml_grid.validate()?;
        let sweep = &self.sweep;
        // The config file stores integers as signed 64-bit.
        for (key, seed) in [("sweep.seed", sweep.seed), ("bals.seed", self.bals.seed)] {
            if seed > i64::MAX as u64 {
                return Err(Error::Config(format!("{key} must be at most {}, got {seed}", i64::MAX)));
            }
        }
        if sweep.trials == 0 {
            return Err(Error::Config("sweep.trials must be at least 1".into()));
        }
        if sweep.snr_db.is_empty() {
            return Err(Error::Config("sweep.snr_db must not be empty".into()));
        }
        if let Some(bad) = sweep.snr_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return Err(Error::Config(format!("sweep.snr_db entries must be finite or +inf, got {bad}")));
        }
        if sweep.methods.is_empty() {
            return Err(Error::Config("sweep.methods must not be empty".into()));
        }
        for (i, m) in sweep.methods.iter().enumerate() {
            if sweep.methods[..i].contains(m) {
                return Err(Error::Config(format!("sweep.methods lists `{m}` twice")));
            }
        }
        Ok(())
    }
}

/// One row of the per-trial results file. Fields a method does not produce
/// are left empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub tau_true: f64,
    pub tau_est: Option<f64>,
    pub nu_true: f64,
    pub nu_est: Option<f64>,
    pub phi_true: f64,
    pub phi_est: Option<f64>,
    pub theta_true: f64,
    pub theta_est: Option<f64>,
    pub alpha_err_rel: Option<f64>,
    pub nmse_heff: Option<f64>,
    pub iters_s1: Option<usize>,
    pub iters_s2: Option<usize>,
    pub status: String,
}

impl TrialRecord {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// One row of the aggregate results file, over the successful trials of a
/// (method, SNR) pair. Delay errors are divided by `T_s`, Doppler errors
/// multiplied by `T_s`; the angle RMSE is `√E{Δφ² + Δθ²}` and the gain RMSE
/// is taken over relative errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub snr_db: f64,
    pub nmse_heff_db: Option<f64>,
    pub rmse_tau_norm: Option<f64>,
    pub rmse_nu_norm: Option<f64>,
    pub rmse_angle_rad: Option<f64>,
    pub rmse_alpha: Option<f64>,
    pub n_ok: usize,
    pub n_fail: usize,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub conditions: Vec<Condition>,
    pub trials: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRow>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent child seed for `(parent, label)`.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ label.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

const CODEBOOK_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const BALS_STREAM: u64 = 3;

/// Seed of trial `trial`; the scene is drawn from it directly.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    derive_seed(master, trial as u64)
}

/// Deterministic inputs of one Monte Carlo trial. The scene and codebook
/// depend only on the trial, the noise also on the SNR index.
#[derive(Clone, Debug)]
pub struct TrialScene {
    pub seed: u64,
    pub truth: SceneTruth,
    pub codebook: RisCodebook,
    pub clean: ComplexTensor,
}

pub fn trial_scene(cfg: &SweepConfig, pilots: &PilotSet, trial: usize) -> Result<TrialScene> {
    let seed = trial_seed(cfg.sweep.seed, trial);
    let truth = draw_scene(&cfg.system, &cfg.scene, &mut ChaCha8Rng::seed_from_u64(seed));
    let codebook = gen_codebook(&cfg.system, derive_seed(seed, CODEBOOK_STREAM));
    let clean = synthesize(&truth, &cfg.system, &codebook, pilots)?;
    Ok(TrialScene { seed, truth, codebook, clean })
}

pub fn noise_seed(trial_seed: u64, snr_index: usize) -> u64 {
    derive_seed(derive_seed(trial_seed, NOISE_STREAM), snr_index as u64)
}

pub fn bals_seed(trial_seed: u64) -> u64 {
    derive_seed(trial_seed, BALS_STREAM)
}

/// Estimates of one method on one echo.
struct Outcome {
    channel: EffectiveChannel,
    params: Option<EstimationResult>,
}

/// Effective channel rebuilt from parametric estimates.
fn parametric_channel(
    est: &EstimationResult,
    factors: &GroupFactors,
    pilots: &PilotSet,
    cfg: &SystemConfig,
) -> Result<EffectiveChannel> {
    let layout = cfg.processed_group();
    let p = group_steering(est.mu, est.psi, cfg, &layout);
    let f = reconstruct_f(est.delay, est.doppler, &factors.g, pilots, cfg);
    EffectiveChannel::from_factors(est.gain, &angle_row(&p), &f, &factors.g)
}

struct Shared<'a> {
    cfg: &'a SweepConfig,
    pilots: &'a PilotSet,
    core: &'a ComplexTensor,
}

fn run_method(
    method: Method,
    y: &ComplexTensor,
    scene: &TrialScene,
    factors: &GroupFactors,
    shared: &Shared,
) -> Result<Outcome> {
    let cfg = shared.cfg;
    let sys = &cfg.system;
    match method {
        Method::Ntfe => {
            let opts = cfg.bals.with_seed(bals_seed(scene.seed));
            let est = run_ntfe(y, sys, &factors.g, &factors.selection, shared.pilots, shared.core, &opts)?;
            let channel = parametric_channel(&est, factors, shared.pilots, sys)?;
            Ok(Outcome { channel, params: Some(est) })
        }
        Method::Ls | Method::Kf => {
            let ls = direct_ls(y, &factors.selection, cfg.bals.pinv_tol)?;
            if method == Method::Ls {
                return Ok(Outcome { channel: ls.channel, params: None });
            }
            let dims = ls.channel.dims(sys.antennas())?;
            let kf = kron_factorize(&ls.channel, dims)?;
            Ok(Outcome { channel: kf.reassembled(cfg.sweep.kf_mode).clone(), params: None })
        }
        Method::Ml => {
            let est = seq_ml(y, &factors.g, &scene.codebook, shared.pilots, sys, &cfg.ml_grid)?;
            let channel = parametric_channel(&est, factors, shared.pilots, sys)?;
            Ok(Outcome { channel, params: Some(est) })
        }
    }
}

fn record(
    method: Method,
    snr_db: f64,
    trial: usize,
    scene: &TrialScene,
    result: Result<(Outcome, f64)>,
    gain: C64,
) -> TrialRecord {
    let truth = &scene.truth;
    let mut row = TrialRecord {
        method,
        snr_db,
        trial,
        seed: scene.seed,
        tau_true: truth.delay,
        tau_est: None,
        nu_true: truth.doppler,
        nu_est: None,
        phi_true: truth.target.azimuth,
        phi_est: None,
        theta_true: truth.target.elevation,
        theta_est: None,
        alpha_err_rel: None,
        nmse_heff: None,
        iters_s1: None,
        iters_s2: None,
        status: "ok".into(),
    };
    match result {
        Ok((outcome, error)) => {
            row.nmse_heff = Some(error);
            if let Some(est) = outcome.params {
                row.tau_est = Some(est.delay);
                row.nu_est = Some(est.doppler);
                row.phi_est = Some(est.azimuth);
                row.theta_est = Some(est.elevation);
                row.alpha_err_rel = Some((est.gain - gain).norm() / gain.norm());
                row.iters_s1 = est.diagnostics.stage1_iterations;
                row.iters_s2 = est.diagnostics.stage2_iterations;
            }
        }
        Err(e) => row.status = e.code().into(),
    }
    row
}

fn run_unit(shared: &Shared, conditions: &[Condition], snr_index: usize, trial: usize) -> Result<Vec<TrialRecord>> {
    let cfg = shared.cfg;
    let snr_db = cfg.sweep.snr_db[snr_index];
    let scene = trial_scene(cfg, shared.pilots, trial)?;
    let (y, _) = add_noise(&scene.clean, snr_db, noise_seed(scene.seed, snr_index))?;
    score(shared, conditions, &scene, &y, snr_db, trial)
}

/// Runs every configured method on one echo of `scene`.
fn score(
    shared: &Shared,
    conditions: &[Condition],
    scene: &TrialScene,
    y: &ComplexTensor,
    snr_db: f64,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    let cfg = shared.cfg;
    let factors = group_factors(&scene.truth, &cfg.system, &scene.codebook, shared.pilots, cfg.system.group);
    let truth_channel = EffectiveChannel::from_factors(factors.gain, &factors.p_prime, &factors.f, &factors.g)?;
    let rows = cfg
        .sweep
        .methods
        .iter()
        .map(|&method| {
            let result = if is_allowed(conditions, method) {
                run_method(method, y, scene, &factors, shared).and_then(|outcome| {
                    let error = nmse(&truth_channel.matrix, &outcome.channel.matrix)?;
                    Ok((outcome, error))
                })
            } else {
                Err(Error::Identifiability(format!("{method} is blocked for this configuration")))
            };
            record(method, snr_db, trial, scene, result, factors.gain)
        })
        .collect();
    Ok(rows)
}

/// Scores the methods of `cfg.sweep.methods` on a single echo `y` of
/// `scene`, exactly as a sweep would for that trial.
pub fn evaluate_echo(
    cfg: &SweepConfig,
    pilots: &PilotSet,
    scene: &TrialScene,
    y: &ComplexTensor,
    snr_db: f64,
    trial: usize,
) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let core = build_core(cfg.system.processed_group().size);
    let conditions = identifiability_check(&cfg.system, &cfg.sweep.methods);
    let shared = Shared { cfg, pilots, core: &core };
    score(&shared, &conditions, scene, y, snr_db, trial)
}

/// Aggregates over the successful rows of one (method, SNR) pair.
pub fn aggregate(rows: &[&TrialRecord], method: Method, snr_db: f64, symbol_duration: f64) -> AggregateRow {
    let ok: Vec<&&TrialRecord> = rows.iter().filter(|r| r.is_ok()).collect();
    let collect = |f: &dyn Fn(&TrialRecord) -> Option<f64>| -> Option<f64> {
        let errors: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
        if errors.len() == ok.len() {
            rmse(&errors).ok()
        } else {
            None
        }
    };
    let nmse_heff_db = {
        let values: Vec<f64> = ok.iter().filter_map(|r| r.nmse_heff).collect();
        (!values.is_empty()).then(|| to_db(values.iter().sum::<f64>() / values.len() as f64))
    };
    AggregateRow {
        method,
        snr_db,
        nmse_heff_db,
        rmse_tau_norm: collect(&|r| r.tau_est.map(|e| (e - r.tau_true) / symbol_duration)),
        rmse_nu_norm: collect(&|r| r.nu_est.map(|e| (e - r.nu_true) * symbol_duration)),
        rmse_angle_rad: collect(&|r| {
            Some(((r.phi_est? - r.phi_true).powi(2) + (r.theta_est? - r.theta_true).powi(2)).sqrt())
        }),
        rmse_alpha: collect(&|r| r.alpha_err_rel),
        n_ok: ok.len(),
        n_fail: rows.len() - ok.len(),
    }
}

/// Runs every (SNR, trial) work unit on a pool of `workers` threads. Each
/// unit derives its random streams from the master seed and its indices
/// only, and results are collected in unit order, so the report does not
/// depend on the worker count. `progress` is called with (done, total).
pub fn run_sweep(
    cfg: &SweepConfig,
    workers: usize,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<SweepReport> {
    cfg.validate()?;
    if workers == 0 {
        return Err(Error::Config("at least one worker is required".into()));
    }
    let pilots = gen_pilots(&cfg.system)?;
    let core = build_core(cfg.system.processed_group().size);
    let conditions = identifiability_check(&cfg.system, &cfg.sweep.methods);
    let shared = Shared { cfg, pilots: &pilots, core: &core };
    let units: Vec<(usize, usize)> =
        (0..cfg.sweep.snr_db.len()).flat_map(|s| (0..cfg.sweep.trials).map(move |t| (s, t))).collect();
    let done = AtomicUsize::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let results: Vec<Result<Vec<TrialRecord>>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(s, t)| {
                let rows = run_unit(&shared, &conditions, s, t);
                let finished = done.fetch_add(1, Ordering::Relaxed) + 1;
                if let Some(report) = progress {
                    report(finished, units.len());
                }
                rows
            })
            .collect()
    });
    let mut trials = Vec::with_capacity(units.len() * cfg.sweep.methods.len());
    for rows in results {
        trials.extend(rows?);
    }

    let ts = cfg.system.symbol_duration();
    let mut aggregates = Vec::new();
    for &method in &cfg.sweep.methods {
        for &snr in &cfg.sweep.snr_db {
            let rows: Vec<&TrialRecord> = trials.iter().filter(|r| r.method == method && r.snr_db == snr).collect();
            aggregates.push(aggregate(&rows, method, snr, ts));
        }
    }
    Ok(SweepReport { conditions, trials, aggregates })
}
