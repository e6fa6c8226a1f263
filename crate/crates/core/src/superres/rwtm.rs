//! Reweighted trace minimization.
//!
//! Each outer iteration solves the weighted trace SDP with
//! `W_j = (T'_{j-1} + eps_{j-1} I)^{-1}`, a majorize-minimize step on the
//! smoothed log-det rank surrogate. Iteration 1 uses `W = I` (the plain
//! convex relaxation); `eps` then starts at a tenth of the first iterate's
//! largest eigenvalue and halves for the next seven iterations.

use crate::error::{Error, Result};
use crate::linalg::hermitian_eig_desc;
use crate::sequence::mlt_matrix;
use crate::superres::{
    solve_weighted_trace, AdmmConfig, AdmmState, LiftedProblem, ObservationModel, SdpSolution,
    SolverStats,
};
use crate::{CMatrix, CVector};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct RwtmConfig {
    pub max_outer: usize,
    /// Stop when the relative change of `y'` between consecutive outer
    /// iterations drops below this.
    pub rel_change_tol: f64,
    /// Freeze the smoothing parameter at a fixed value instead of the
    /// adaptive halving schedule.
    pub eps_override: Option<f64>,
    /// Stop reweighting when an inner solve exhausts its iteration budget;
    /// the weight built from an unconverged iterate is not trustworthy.
    pub abort_on_stall: bool,
    pub admm: AdmmConfig,
}

impl Default for RwtmConfig {
    fn default() -> Self {
        RwtmConfig {
            max_outer: 20,
            rel_change_tol: 1e-6,
            eps_override: None,
            abort_on_stall: false,
            admm: AdmmConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RwtmIterate {
    /// Smoothing parameter behind this iteration's weight matrix.
    pub eps: f64,
    pub objective: f64,
    /// Eigenvalues of this iterate's `T'`, descending.
    pub eigenvalues: Vec<f64>,
    /// `|y_j - y_{j-1}| / |y_{j-1}|`; infinite on the first iteration.
    pub rel_change: f64,
    pub stats: SolverStats,
}

#[derive(Debug, Clone)]
pub struct RwtmResult {
    pub solution: SdpSolution,
    /// The unweighted first iterate, i.e. the plain convex relaxation.
    pub first: SdpSolution,
    pub iterates: Vec<RwtmIterate>,
}

/// Single solve with `W = I`.
pub fn conv_relax(
    obs: &ObservationModel,
    lifted: &LiftedProblem,
    cfg: &AdmmConfig,
) -> Result<SdpSolution> {
    let np = lifted.lifted.total();
    let identity = lifted.with_weight(CMatrix::eye(np))?;
    let (sol, _) = solve_weighted_trace(obs, &identity, cfg, None)?;
    Ok(sol)
}

/// Runs the reweighting loop; any weight already on `lifted` is ignored.
///
/// Consecutive solves are warm started from each other. The zero solution
/// short-circuits the loop.
pub fn rwtm(
    obs: &ObservationModel,
    lifted: &LiftedProblem,
    cfg: &RwtmConfig,
) -> Result<RwtmResult> {
    if cfg.max_outer == 0 {
        return Err(Error::InvalidArgument("need at least one outer iteration".into()));
    }
    let np = lifted.lifted.total();
    let mut problem = lifted.with_weight(CMatrix::eye(np))?;
    // iteration 1 always runs unweighted: W_1 = (T'_0 + eps_0 I)^{-1} with
    // T'_0 = 0 and eps_0 = 1
    let mut eps = 1.0;
    let mut state: Option<AdmmState> = None;
    let mut prev_y: Option<CVector> = None;
    let mut first: Option<SdpSolution> = None;
    let mut solution: Option<SdpSolution> = None;
    let mut iterates: Vec<RwtmIterate> = Vec::new();
    let mut lmax1 = 0.0f64;

    for j in 1..=cfg.max_outer {
        let (sol, st) = solve_weighted_trace(obs, &problem, &cfg.admm, state.take())?;
        state = Some(st);
        let stalled = !sol.stats.converged;
        let tp = mlt_matrix(&sol.u);
        let (eigenvalues, _) = hermitian_eig_desc(&tp)?;

        let rel_change = match &prev_y {
            Some(py) => {
                let num = (&sol.y - py).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let den = py.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                num / den.max(f64::MIN_POSITIVE)
            }
            None => f64::INFINITY,
        };
        iterates.push(RwtmIterate {
            eps,
            objective: sol.objective,
            eigenvalues: eigenvalues.clone(),
            rel_change,
            stats: sol.stats.clone(),
        });
        prev_y = Some(sol.y.clone());
        if j == 1 {
            lmax1 = eigenvalues[0];
            first = Some(sol.clone());
        }
        solution = Some(sol);

        if rel_change < cfg.rel_change_tol || j == cfg.max_outer {
            break;
        }
        if lmax1 <= 0.0 || (cfg.abort_on_stall && stalled) {
            break;
        }

        eps = match cfg.eps_override {
            Some(e) => e,
            None => {
                let next = if j == 1 {
                    0.1 * lmax1
                } else if j <= 8 {
                    eps * 0.5
                } else {
                    eps
                };
                next.max(1e-10 * lmax1)
            }
        };
        let w = inverse_shifted(&tp, eps)?;
        problem = lifted.with_weight(w)?;
    }

    Ok(RwtmResult {
        solution: solution.expect("at least one iteration"),
        first: first.expect("at least one iteration"),
        iterates,
    })
}

/// `(m + eps I)^{-1}` for Hermitian PSD-up-to-tolerance `m`. Cholesky when it
/// holds, eigenvalue clipping when it does not.
fn inverse_shifted(m: &CMatrix, eps: f64) -> Result<CMatrix> {
    use ndarray_linalg::InverseC;
    let n = m.nrows();
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[[i, i]] += eps;
    }
    match shifted.invc() {
        Ok(w) => Ok(crate::linalg::hermitian_part(&w)),
        Err(_) => {
            let (vals, q) = hermitian_eig_desc(m)?;
            let mut w = CMatrix::zeros((n, n));
            for k in 0..n {
                let inv = 1.0 / (vals[k].max(0.0) + eps);
                let col = q.column(k);
                for i in 0..n {
                    let ci = col[i] * inv;
                    for j in 0..n {
                        w[[i, j]] += ci * col[j].conj();
                    }
                }
            }
            Ok(w)
        }
    }
}

/// Value of the smoothed rank surrogate `t + log det(T' + eps I)`.
pub fn surrogate_value(t: f64, tp: &CMatrix, eps: f64) -> Result<f64> {
    let (vals, _) = hermitian_eig_desc(tp)?;
    Ok(t + vals.iter().map(|&v| (v.max(0.0) + eps).ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{tuple_dist, AtomicModel};
    use crate::C64;
    use crate::shape::Shape;
    use crate::steering::model_signal;
    use crate::superres::{lift_shape, retrieve_and_check, RetrieveOptions, Sampling};

    fn partial_obs(shape: &Shape, model: &AtomicModel, keep: &[usize]) -> ObservationModel {
        let y = model_signal(shape, model).unwrap();
        let z = CVector::from_iter(keep.iter().map(|&i| y[i]));
        ObservationModel::new(shape.clone(), Sampling::Mask(keep.to_vec()), z, 0.0).unwrap()
    }

    #[test]
    fn recovers_two_atoms_from_partial_data() {
        let shape = Shape::new(vec![4, 4]).unwrap();
        let model = AtomicModel::with_amplitudes(
            vec![vec![0.2, 0.65], vec![0.62, 0.2]],
            vec![C64::new(1.0, 0.3), C64::new(-0.4, 0.8)],
        )
        .unwrap();
        let keep: Vec<usize> = vec![0, 1, 2, 4, 5, 7, 8, 10, 11, 12, 14, 15];
        let obs = partial_obs(&shape, &model, &keep);
        let lifted = lift_shape(&shape, 0).unwrap();
        let res = rwtm(&obs, &lifted, &RwtmConfig::default()).unwrap();
        let ret = retrieve_and_check(&res.solution, &lifted, &RetrieveOptions::default()).unwrap();
        assert_eq!(ret.rank, 2, "iterate eigs: {:?}", res.iterates.last().unwrap().eigenvalues);
        let mut truth = model.clone();
        truth.sort_canonical();
        for (est, exact) in ret.model.freqs.iter().zip(&truth.freqs) {
            assert!(tuple_dist(est, exact) < 1e-6, "{est:?} vs {exact:?}");
        }
    }

    #[test]
    fn eps_schedule_and_trace() {
        let shape = Shape::new(vec![3, 3]).unwrap();
        let model = AtomicModel::with_amplitudes(
            vec![vec![0.15, 0.4], vec![0.55, 0.85]],
            vec![C64::new(0.9, 0.1), C64::new(0.5, -0.7)],
        )
        .unwrap();
        let keep: Vec<usize> = vec![0, 1, 3, 4, 6, 7, 8];
        let obs = partial_obs(&shape, &model, &keep);
        let lifted = lift_shape(&shape, 0).unwrap();
        let cfg = RwtmConfig { max_outer: 4, rel_change_tol: 0.0, ..RwtmConfig::default() };
        let res = rwtm(&obs, &lifted, &cfg).unwrap();
        assert_eq!(res.iterates.len(), 4);
        assert_eq!(res.iterates[0].eps, 1.0);
        let lmax1 = res.iterates[0].eigenvalues[0];
        assert!((res.iterates[1].eps - 0.1 * lmax1).abs() < 1e-12 * lmax1.max(1.0));
        assert!((res.iterates[2].eps - 0.05 * lmax1).abs() < 1e-12 * lmax1.max(1.0));
        assert!((res.iterates[3].eps - 0.025 * lmax1).abs() < 1e-12 * lmax1.max(1.0));
        assert!(res.iterates[0].rel_change.is_infinite());
        assert!(res.iterates[1].rel_change.is_finite());
        // first iterate is stored as the plain relaxation
        assert!((res.first.objective - res.iterates[0].objective).abs() < 1e-12);
    }

    #[test]
    fn frozen_eps_surrogate_descends() {
        let shape = Shape::new(vec![3, 3]).unwrap();
        let model = AtomicModel::with_amplitudes(
            vec![vec![0.28, 0.9], vec![0.66, 0.31]],
            vec![C64::new(1.1, 0.0), C64::new(0.3, 0.6)],
        )
        .unwrap();
        let keep: Vec<usize> = vec![0, 2, 3, 5, 6, 8];
        let obs = partial_obs(&shape, &model, &keep);
        let lifted = lift_shape(&shape, 0).unwrap();
        let eps = 0.05;
        let mut state = None;
        let np = lifted.lifted.total();
        let mut problem = lifted.with_weight(CMatrix::eye(np)).unwrap();
        let mut surrogates = Vec::new();
        for _ in 0..5 {
            let (sol, st) =
                solve_weighted_trace(&obs, &problem, &AdmmConfig::default(), state.take()).unwrap();
            state = Some(st);
            let tp = mlt_matrix(&sol.u);
            surrogates.push(surrogate_value(sol.t, &tp, eps).unwrap());
            let w = super::inverse_shifted(&tp, eps).unwrap();
            problem = lifted.with_weight(w).unwrap();
        }
        for w in surrogates.windows(2) {
            assert!(w[1] <= w[0] + 1e-5, "surrogate increased: {surrogates:?}");
        }

        let cfg = RwtmConfig {
            max_outer: 5,
            rel_change_tol: 0.0,
            eps_override: Some(eps),
            ..RwtmConfig::default()
        };
        let res = rwtm(&obs, &lifted, &cfg).unwrap();
        assert!(res.iterates.iter().all(|it| it.eps == eps || it.eps == 1.0));
    }
}
