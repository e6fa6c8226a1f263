//! The three seeded studies behind the `bench` subcommands.
//!
//! Each runner sweeps a parameter grid, runs its trials in parallel (rayon;
//! per-trial RNG streams make the schedule irrelevant), and returns a report
//! that can be written as CSV and checked against pass thresholds.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mapp::{decompose_auto, MappMethod};
use crate::model::AtomicModel;
use crate::sequence::mlt_from_model;
use crate::shape::Shape;
use crate::superres::{
    lift_shape, noise_bound, retrieve_and_check, retrieve_top_r, rwtm, ObservationModel,
    RetrieveOptions, RwtmConfig, Sampling, SdpSolution,
};
use crate::{C64, CVector};

use super::{
    complex_noise, evaluate_success, match_models, random_mask, random_model,
    random_signal_model, signal_of, trial_rng, StreamDomain,
};

/// Success thresholds shared by all studies.
pub const FREQ_TOL: f64 = 1e-6;
pub const RMSE_TOL: f64 = 1e-6;
pub const RESIDUAL_TOL: f64 = 1e-6;

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else {
        String::new()
    }
}

fn status_of(e: &Error) -> String {
    match e {
        Error::PencilDegenerate { .. } => "pencil_degenerate".into(),
        Error::RankTooHigh { .. } => "rank_too_high".into(),
        Error::SearchFailed(_) => "search_failed".into(),
        Error::NotPsd { .. } => "not_psd".into(),
        other => format!("error: {other}"),
    }
}

// ---------------------------------------------------------------------------
// decomposition sweep

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DecompSweepConfig {
    pub shape: Vec<usize>,
    pub r_values: Vec<usize>,
    pub trials: usize,
    /// Minimum pairwise wrap Chebyshev separation of generated frequencies.
    pub min_sep: f64,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for DecompSweepConfig {
    fn default() -> Self {
        DecompSweepConfig {
            shape: vec![6, 8],
            r_values: (1..=10).collect(),
            trials: 100,
            min_sep: 0.0,
            rel_tol: 1e-8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecompTrialRow {
    pub r: usize,
    pub trial: usize,
    pub method: &'static str,
    pub status: String,
    pub success: bool,
    /// Max wrap Chebyshev error over matched atoms.
    pub freq_err: f64,
    /// Relative reconstruction residual of the returned model.
    pub residual: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct DecompCellSummary {
    pub r: usize,
    pub trials: usize,
    /// Fraction with matching atom count and frequency error under 1e-6.
    pub success_rate: f64,
    /// Fraction with reconstruction residual under 1e-6.
    pub residual_ok_rate: f64,
    pub degenerate: usize,
    pub freq_err_median: f64,
    pub freq_err_max: f64,
    pub runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct DecompReport {
    pub config: DecompSweepConfig,
    pub shape: Shape,
    pub rows: Vec<DecompTrialRow>,
    pub cells: Vec<DecompCellSummary>,
}

fn decomp_trial(cfg: &DecompSweepConfig, shape: &Shape, r: usize, trial: usize) -> DecompTrialRow {
    let mut rng = trial_rng(cfg.seed, StreamDomain::DecompSweep, r as u64, trial as u64);
    let truth = match random_model(shape.ndim(), r, cfg.min_sep, &mut rng) {
        Ok(m) => m,
        Err(_) => {
            return DecompTrialRow {
                r,
                trial,
                method: "",
                status: "gen_failed".into(),
                success: false,
                freq_err: f64::NAN,
                residual: f64::NAN,
                runtime_s: 0.0,
            }
        }
    };
    let t = mlt_from_model(shape, &truth).expect("generated model is valid");
    let start = Instant::now();
    let outcome = decompose_auto(&t, shape, Some(r), cfg.rel_tol);
    let runtime_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok(dec) => {
            let m = match_models(&dec.model, &truth);
            let method = match dec.method {
                MappMethod::Recursive => "recursive",
                MappMethod::Search => "search",
            };
            DecompTrialRow {
                r,
                trial,
                method,
                status: "ok".into(),
                success: dec.order() == r && m.max_freq_err < FREQ_TOL,
                freq_err: m.max_freq_err,
                residual: dec.residual,
                runtime_s,
            }
        }
        Err(e) => DecompTrialRow {
            r,
            trial,
            method: "",
            status: status_of(&e),
            success: false,
            freq_err: f64::NAN,
            residual: f64::NAN,
            runtime_s,
        },
    }
}

fn median(sorted: &mut Vec<f64>) -> f64 {
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn decomp_sweep(cfg: &DecompSweepConfig) -> Result<DecompReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let shape = Shape::new(cfg.shape.clone())?;
    let jobs: Vec<(usize, usize)> = cfg
        .r_values
        .iter()
        .flat_map(|&r| (0..cfg.trials).map(move |t| (r, t)))
        .collect();
    let rows: Vec<DecompTrialRow> =
        jobs.par_iter().map(|&(r, t)| decomp_trial(cfg, &shape, r, t)).collect();

    let mut cells = Vec::with_capacity(cfg.r_values.len());
    for &r in &cfg.r_values {
        let cell: Vec<&DecompTrialRow> = rows.iter().filter(|row| row.r == r).collect();
        let n = cell.len();
        let successes = cell.iter().filter(|row| row.success).count();
        let residual_ok =
            cell.iter().filter(|row| row.residual.is_finite() && row.residual < RESIDUAL_TOL).count();
        let degenerate = cell.iter().filter(|row| row.status == "pencil_degenerate").count();
        let mut errs: Vec<f64> =
            cell.iter().filter(|row| row.freq_err.is_finite()).map(|row| row.freq_err).collect();
        let freq_err_max = errs.iter().cloned().fold(f64::NAN, f64::max);
        cells.push(DecompCellSummary {
            r,
            trials: n,
            success_rate: successes as f64 / n as f64,
            residual_ok_rate: residual_ok as f64 / n as f64,
            degenerate,
            freq_err_median: median(&mut errs),
            freq_err_max,
            runtime_s: cell.iter().map(|row| row.runtime_s).sum(),
        });
    }
    Ok(DecompReport { config: cfg.clone(), shape, rows, cells })
}

impl DecompReport {
    /// Largest order any dimension's pencil can support.
    pub fn pencil_limit(&self) -> usize {
        let n = self.shape.total();
        n - n / self.shape.min_size()
    }

    /// Violations of the per-cell pass thresholds; empty means pass.
    ///
    /// Orders below the smallest grid dimension must succeed in 99% of
    /// trials; orders the pencils can support must reconstruct to 1e-6 in
    /// 95% with median frequency error under 1e-3; orders past the pencil
    /// limit must all report degeneracy.
    pub fn check(&self) -> Vec<String> {
        let low = self.shape.min_size();
        let limit = self.pencil_limit();
        let mut out = Vec::new();
        for c in &self.cells {
            if c.r < low {
                if c.success_rate < 0.99 {
                    out.push(format!("r={}: success rate {:.3} < 0.99", c.r, c.success_rate));
                }
            } else if c.r <= limit {
                if c.residual_ok_rate < 0.95 {
                    out.push(format!(
                        "r={}: residual pass rate {:.3} < 0.95",
                        c.r, c.residual_ok_rate
                    ));
                }
                if !(c.freq_err_median < 1e-3) {
                    out.push(format!(
                        "r={}: median frequency error {:e} not < 1e-3",
                        c.r, c.freq_err_median
                    ));
                }
            } else if c.degenerate != c.trials {
                out.push(format!(
                    "r={}: {}/{} trials reported pencil degeneracy",
                    c.r, c.degenerate, c.trials
                ));
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io_err = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
        wtr.write_record([
            "row", "r", "trial", "seed", "method", "status", "success", "freq_err", "residual",
            "runtime_s", "success_rate", "residual_ok_rate", "degenerate", "freq_err_median",
            "freq_err_max",
        ])
        .map_err(io_err)?;
        let seed = self.config.seed.to_string();
        for row in &self.rows {
            wtr.write_record([
                "trial",
                &row.r.to_string(),
                &row.trial.to_string(),
                &seed,
                row.method,
                &row.status,
                if row.success { "1" } else { "0" },
                &fmt(row.freq_err),
                &fmt(row.residual),
                &format!("{:.3}", row.runtime_s),
                "",
                "",
                "",
                "",
                "",
            ])
            .map_err(io_err)?;
        }
        for c in &self.cells {
            wtr.write_record([
                "summary",
                &c.r.to_string(),
                &c.trials.to_string(),
                &seed,
                "",
                "",
                "",
                "",
                "",
                &format!("{:.3}", c.runtime_s),
                &fmt(c.success_rate),
                &fmt(c.residual_ok_rate),
                &c.degenerate.to_string(),
                &fmt(c.freq_err_median),
                &fmt(c.freq_err_max),
            ])
            .map_err(io_err)?;
        }
        wtr.flush().map_err(|e| Error::InvalidArgument(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// phase transition

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PhaseConfig {
    pub shape: Vec<usize>,
    /// Number of randomly located noiseless samples.
    pub m: usize,
    pub r_values: Vec<usize>,
    /// Minimum separations, absolute (the classic grid is k * 0.1 / n_1).
    pub seps: Vec<f64>,
    pub trials: usize,
    /// Lifted dimension floor; 0 keeps the observation grid.
    pub rbar: usize,
    pub seed: u64,
    pub rwtm: RwtmConfig,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        let mut rwtm = RwtmConfig::default();
        rwtm.max_outer = 10;
        rwtm.abort_on_stall = true;
        rwtm.admm.max_iters = 5_000;
        PhaseConfig {
            shape: vec![8, 8],
            m: 32,
            r_values: vec![2, 6, 10, 14],
            seps: vec![0.0, 0.125, 0.25],
            trials: 20,
            rbar: 0,
            seed: 1,
            rwtm,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PhaseTrialRow {
    pub r: usize,
    pub delta_f: f64,
    pub trial: usize,
    pub method: &'static str,
    pub status: String,
    pub success: bool,
    pub freq_err: f64,
    pub rmse: f64,
    pub outer_iters: usize,
    pub admm_iters: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct PhaseCellSummary {
    pub r: usize,
    pub delta_f: f64,
    pub trials: usize,
    pub gen_failed: usize,
    pub convrelax_successes: usize,
    pub rwtm_successes: usize,
}

#[derive(Debug, Clone)]
pub struct PhaseReport {
    pub config: PhaseConfig,
    pub rows: Vec<PhaseTrialRow>,
    pub cells: Vec<PhaseCellSummary>,
}

fn phase_eval(
    sol: &SdpSolution,
    lifted: &crate::superres::LiftedProblem,
    truth: &AtomicModel,
    y_true: &CVector,
) -> (String, bool, f64, f64) {
    match retrieve_and_check(sol, lifted, &RetrieveOptions::default()) {
        Ok(ret) => {
            let y_est = lifted.restrict(&sol.y);
            let eval = evaluate_success(&ret.model, truth, &y_est, y_true);
            ("ok".into(), eval.success, eval.freq_err, eval.rmse)
        }
        Err(e) => (format!("retrieve_failed: {}", status_of(&e)), false, f64::NAN, f64::NAN),
    }
}

fn phase_trial(
    cfg: &PhaseConfig,
    shape: &Shape,
    cell: u64,
    r: usize,
    delta_f: f64,
    trial: usize,
) -> Vec<PhaseTrialRow> {
    let mut rng = trial_rng(cfg.seed, StreamDomain::PhaseTransition, cell, trial as u64);
    let base = |method: &'static str, status: &str| PhaseTrialRow {
        r,
        delta_f,
        trial,
        method,
        status: status.into(),
        success: false,
        freq_err: f64::NAN,
        rmse: f64::NAN,
        outer_iters: 0,
        admm_iters: 0,
        runtime_s: 0.0,
    };
    let truth = match random_signal_model(shape.ndim(), r, delta_f, &mut rng) {
        Ok(m) => m,
        Err(_) => return vec![base("convrelax", "gen_failed"), base("rwtm", "gen_failed")],
    };
    let y_true = signal_of(shape, &truth).expect("generated model is valid");
    let mask = random_mask(shape.total(), cfg.m, &mut rng);
    let z = CVector::from_iter(mask.iter().map(|&i| y_true[i]));
    let obs = ObservationModel::new(shape.clone(), Sampling::Mask(mask), z, 0.0)
        .expect("mask observation is valid");
    let lifted = lift_shape(shape, cfg.rbar).expect("lift of a valid shape");

    let start = Instant::now();
    let res = match rwtm(&obs, &lifted, &cfg.rwtm) {
        Ok(res) => res,
        Err(e) => {
            let status = format!("solve_failed: {}", status_of(&e));
            let mut a = base("convrelax", &status);
            let mut b = base("rwtm", &status);
            a.runtime_s = start.elapsed().as_secs_f64();
            b.runtime_s = a.runtime_s;
            return vec![a, b];
        }
    };
    let runtime_s = start.elapsed().as_secs_f64();

    let (status, success, freq_err, rmse) = phase_eval(&res.first, &lifted, &truth, &y_true);
    let first_iters = res.iterates.first().map_or(0, |it| it.stats.iterations);
    let conv = PhaseTrialRow {
        r,
        delta_f,
        trial,
        method: "convrelax",
        status,
        success,
        freq_err,
        rmse,
        outer_iters: 1,
        admm_iters: first_iters,
        runtime_s,
    };
    let (status, success, freq_err, rmse) = phase_eval(&res.solution, &lifted, &truth, &y_true);
    let rw = PhaseTrialRow {
        r,
        delta_f,
        trial,
        method: "rwtm",
        status,
        success,
        freq_err,
        rmse,
        outer_iters: res.iterates.len(),
        admm_iters: res.iterates.iter().map(|it| it.stats.iterations).sum(),
        runtime_s,
    };
    vec![conv, rw]
}

pub fn phase_transition(cfg: &PhaseConfig) -> Result<PhaseReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if cfg.seps.iter().any(|&s| !(s >= 0.0) || s > 0.5) {
        return Err(Error::InvalidArgument("separations must lie in [0, 0.5]".into()));
    }
    let shape = Shape::new(cfg.shape.clone())?;
    if cfg.m > shape.total() {
        return Err(Error::InvalidArgument(format!(
            "{} samples requested from {} grid points",
            cfg.m,
            shape.total()
        )));
    }
    let mut jobs = Vec::new();
    for (ci, &r) in cfg.r_values.iter().enumerate() {
        for (si, &sep) in cfg.seps.iter().enumerate() {
            let cell = (ci * cfg.seps.len() + si) as u64;
            for t in 0..cfg.trials {
                jobs.push((cell, r, sep, t));
            }
        }
    }
    let rows: Vec<PhaseTrialRow> = jobs
        .par_iter()
        .flat_map(|&(cell, r, sep, t)| phase_trial(cfg, &shape, cell, r, sep, t))
        .collect();

    let mut cells = Vec::new();
    for &r in &cfg.r_values {
        for &sep in &cfg.seps {
            let cell: Vec<&PhaseTrialRow> =
                rows.iter().filter(|row| row.r == r && row.delta_f == sep).collect();
            let count = |m: &str| cell.iter().filter(|row| row.method == m && row.success).count();
            cells.push(PhaseCellSummary {
                r,
                delta_f: sep,
                trials: cfg.trials,
                gen_failed: cell
                    .iter()
                    .filter(|row| row.method == "rwtm" && row.status == "gen_failed")
                    .count(),
                convrelax_successes: count("convrelax"),
                rwtm_successes: count("rwtm"),
            });
        }
    }
    Ok(PhaseReport { config: cfg.clone(), rows, cells })
}

impl PhaseReport {
    /// The reweighted method must match or beat the plain relaxation on
    /// every cell of the shared trial set.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.cells {
            if c.rwtm_successes < c.convrelax_successes {
                out.push(format!(
                    "r={} delta_f={}: rwtm {} < convrelax {}",
                    c.r, c.delta_f, c.rwtm_successes, c.convrelax_successes
                ));
            }
        }
        out
    }

    pub fn cell(&self, r: usize, delta_f: f64) -> Option<&PhaseCellSummary> {
        self.cells.iter().find(|c| c.r == r && (c.delta_f - delta_f).abs() < 1e-12)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io_err = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
        wtr.write_record([
            "row", "r", "delta_f", "method", "trial", "seed", "status", "success", "freq_err",
            "rmse", "outer_iters", "admm_iters", "runtime_s", "successes", "gen_failed",
        ])
        .map_err(io_err)?;
        let seed = self.config.seed.to_string();
        for row in &self.rows {
            wtr.write_record([
                "trial",
                &row.r.to_string(),
                &row.delta_f.to_string(),
                row.method,
                &row.trial.to_string(),
                &seed,
                &row.status,
                if row.success { "1" } else { "0" },
                &fmt(row.freq_err),
                &fmt(row.rmse),
                &row.outer_iters.to_string(),
                &row.admm_iters.to_string(),
                &format!("{:.3}", row.runtime_s),
                "",
                "",
            ])
            .map_err(io_err)?;
        }
        for c in &self.cells {
            for (method, successes) in
                [("convrelax", c.convrelax_successes), ("rwtm", c.rwtm_successes)]
            {
                wtr.write_record([
                    "summary",
                    &c.r.to_string(),
                    &c.delta_f.to_string(),
                    method,
                    &c.trials.to_string(),
                    &seed,
                    "",
                    "",
                    "",
                    "",
                    "",
                    "",
                    "",
                    &successes.to_string(),
                    &c.gen_failed.to_string(),
                ])
                .map_err(io_err)?;
            }
        }
        wtr.flush().map_err(|e| Error::InvalidArgument(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// noisy frequency MSE

/// The fixed three-atom test constellation.
pub fn noisy_truth() -> AtomicModel {
    let freqs = vec![vec![0.25, 0.55], vec![0.45, 0.55], vec![0.45, 0.35]];
    let amps = [0.793, 0.385, 0.076]
        .iter()
        .map(|&ph| C64::from_polar(1.0, std::f64::consts::PI * ph))
        .collect();
    AtomicModel::with_amplitudes(freqs, amps).expect("valid fixed constellation")
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct NoisyConfig {
    pub n_values: Vec<usize>,
    /// Fractions of the grid kept; 1.0 keeps everything.
    pub fracs: Vec<f64>,
    pub trials: usize,
    /// Per-entry noise variance is `sigma2_scale / n`.
    pub sigma2_scale: f64,
    pub seed: u64,
    pub rwtm: RwtmConfig,
    /// Number of strongest components retrieved.
    pub atoms: usize,
}

impl Default for NoisyConfig {
    fn default() -> Self {
        let mut rwtm = RwtmConfig::default();
        rwtm.max_outer = 5;
        NoisyConfig {
            n_values: vec![5, 6],
            fracs: vec![1.0, 0.8],
            trials: 50,
            sigma2_scale: 0.1,
            seed: 1,
            rwtm,
            atoms: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NoisyTrialRow {
    pub n: usize,
    pub frac: f64,
    pub trial: usize,
    pub status: String,
    /// Mean squared wrap Chebyshev error over the retrieved atoms, with the
    /// squared metric diameter charged per missing atom.
    pub freq_sq_err: f64,
    /// Relative error of the recovered grid signal against the clean one.
    pub rmse: f64,
    pub outer_iters: usize,
    pub admm_iters: usize,
    pub runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct NoisyCellSummary {
    pub n: usize,
    pub frac: f64,
    pub trials: usize,
    /// Trials whose retrieval did not return the requested atom count.
    pub failures: usize,
    pub freq_mse: f64,
    pub freq_mse_db: f64,
    /// Degradation relative to the same-n full-data cell, in dB.
    pub delta_db: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NoisyReport {
    pub config: NoisyConfig,
    pub rows: Vec<NoisyTrialRow>,
    pub cells: Vec<NoisyCellSummary>,
}

fn noisy_trial(cfg: &NoisyConfig, n: usize, trial: usize) -> Vec<NoisyTrialRow> {
    let shape = Shape::new(vec![n, n]).expect("square shape");
    let total = shape.total();
    let sigma2 = cfg.sigma2_scale / n as f64;
    let truth = noisy_truth();
    let y_clean = signal_of(&shape, &truth).expect("fixed constellation");
    let mut rng = trial_rng(cfg.seed, StreamDomain::NoisyMse, n as u64, trial as u64);
    let y_noisy = &y_clean + &complex_noise(total, sigma2, &mut rng);
    let lifted = lift_shape(&shape, 0).expect("no lift");

    let mut out = Vec::with_capacity(cfg.fracs.len());
    for &frac in &cfg.fracs {
        let mask: Vec<usize> = if frac >= 1.0 {
            (0..total).collect()
        } else {
            random_mask(total, ((frac * total as f64).round() as usize).max(1), &mut rng)
        };
        let m = mask.len();
        let eta = noise_bound(m, sigma2);
        let z = CVector::from_iter(mask.iter().map(|&i| y_noisy[i]));
        let obs = ObservationModel::new(shape.clone(), Sampling::Mask(mask), z, eta)
            .expect("mask observation is valid");

        let start = Instant::now();
        let solved = rwtm(&obs, &lifted, &cfg.rwtm);
        let runtime_s = start.elapsed().as_secs_f64();
        let row = match solved {
            Ok(res) => {
                let outer_iters = res.iterates.len();
                let admm_iters = res.iterates.iter().map(|it| it.stats.iterations).sum();
                match retrieve_top_r(&res.solution, &lifted, cfg.atoms) {
                    Ok(est) => {
                        let y_est = lifted.restrict(&res.solution.y);
                        let denom = y_clean.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                        let num = (&y_est - &y_clean)
                            .iter()
                            .map(|z| z.norm_sqr())
                            .sum::<f64>()
                            .sqrt();
                        NoisyTrialRow {
                            n,
                            frac,
                            trial,
                            status: "ok".into(),
                            freq_sq_err: match_models(&est, &truth).mean_sq_freq_err,
                            rmse: num / denom,
                            outer_iters,
                            admm_iters,
                            runtime_s,
                        }
                    }
                    Err(e) => NoisyTrialRow {
                        n,
                        frac,
                        trial,
                        status: format!("retrieve_failed: {}", status_of(&e)),
                        freq_sq_err: 0.25,
                        rmse: f64::NAN,
                        outer_iters,
                        admm_iters,
                        runtime_s,
                    },
                }
            }
            Err(e) => NoisyTrialRow {
                n,
                frac,
                trial,
                status: format!("solve_failed: {}", status_of(&e)),
                freq_sq_err: 0.25,
                rmse: f64::NAN,
                outer_iters: 0,
                admm_iters: 0,
                runtime_s,
            },
        };
        out.push(row);
    }
    out
}

pub fn noisy_mse(cfg: &NoisyConfig) -> Result<NoisyReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if cfg.atoms == 0 {
        return Err(Error::InvalidArgument("need at least one atom".into()));
    }
    if cfg.fracs.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidArgument("fractions must lie in (0, 1]".into()));
    }
    for &n in &cfg.n_values {
        let shape = Shape::new(vec![n, n])?;
        if cfg.atoms >= shape.min_size() {
            return Err(Error::InvalidArgument(format!(
                "{} atoms need a grid larger than {n}",
                cfg.atoms
            )));
        }
    }
    let jobs: Vec<(usize, usize)> = cfg
        .n_values
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let rows: Vec<NoisyTrialRow> =
        jobs.par_iter().flat_map(|&(n, t)| noisy_trial(cfg, n, t)).collect();

    let mut cells = Vec::new();
    for &n in &cfg.n_values {
        let full_mse: Option<f64> = cfg.fracs.iter().find(|&&f| f >= 1.0).map(|_| {
            let sq: Vec<f64> = rows
                .iter()
                .filter(|row| row.n == n && row.frac >= 1.0)
                .map(|row| row.freq_sq_err)
                .collect();
            sq.iter().sum::<f64>() / sq.len() as f64
        });
        for &frac in &cfg.fracs {
            let cell: Vec<&NoisyTrialRow> =
                rows.iter().filter(|row| row.n == n && row.frac == frac).collect();
            let freq_mse =
                cell.iter().map(|row| row.freq_sq_err).sum::<f64>() / cell.len() as f64;
            let delta_db = if frac < 1.0 {
                full_mse.map(|f| 10.0 * (freq_mse / f).log10())
            } else {
                None
            };
            cells.push(NoisyCellSummary {
                n,
                frac,
                trials: cfg.trials,
                failures: cell.iter().filter(|row| row.status != "ok").count(),
                freq_mse,
                freq_mse_db: 10.0 * freq_mse.log10(),
                delta_db,
            });
        }
    }
    Ok(NoisyReport { config: cfg.clone(), rows, cells })
}

/// Full-data MSE ceiling and allowed subsampling degradation.
pub const NOISY_MSE_CEILING: f64 = 3.162_277_660_168_379_5e-3; // 10^-2.5
pub const NOISY_DELTA_DB_CEILING: f64 = 5.0;

impl NoisyReport {
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in &self.cells {
            if c.frac >= 1.0 {
                if !(c.freq_mse < NOISY_MSE_CEILING) {
                    out.push(format!(
                        "n={}: full-data frequency MSE {:.3e} not below {:.3e}",
                        c.n, c.freq_mse, NOISY_MSE_CEILING
                    ));
                }
            } else if let Some(d) = c.delta_db {
                if !(d < NOISY_DELTA_DB_CEILING) {
                    out.push(format!(
                        "n={} frac={}: degradation {:.2} dB not below {} dB",
                        c.n, c.frac, d, NOISY_DELTA_DB_CEILING
                    ));
                }
            }
        }
        out
    }

    pub fn cell(&self, n: usize, frac: f64) -> Option<&NoisyCellSummary> {
        self.cells.iter().find(|c| c.n == n && (c.frac - frac).abs() < 1e-12)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io_err = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
        wtr.write_record([
            "row", "n", "frac", "trial", "seed", "status", "freq_sq_err", "rmse", "outer_iters",
            "admm_iters", "runtime_s", "freq_mse", "freq_mse_db", "delta_db", "failures",
        ])
        .map_err(io_err)?;
        let seed = self.config.seed.to_string();
        for row in &self.rows {
            wtr.write_record([
                "trial",
                &row.n.to_string(),
                &row.frac.to_string(),
                &row.trial.to_string(),
                &seed,
                &row.status,
                &fmt(row.freq_sq_err),
                &fmt(row.rmse),
                &row.outer_iters.to_string(),
                &row.admm_iters.to_string(),
                &format!("{:.3}", row.runtime_s),
                "",
                "",
                "",
                "",
            ])
            .map_err(io_err)?;
        }
        for c in &self.cells {
            wtr.write_record([
                "summary",
                &c.n.to_string(),
                &c.frac.to_string(),
                &c.trials.to_string(),
                &seed,
                "",
                "",
                "",
                "",
                "",
                "",
                &fmt(c.freq_mse),
                &fmt(c.freq_mse_db),
                &c.delta_db.map(fmt).unwrap_or_default(),
                &c.failures.to_string(),
            ])
            .map_err(io_err)?;
        }
        wtr.flush().map_err(|e| Error::InvalidArgument(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}
