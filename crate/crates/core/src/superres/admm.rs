//! First-order ADMM solver for the weighted trace SDP.
//!
//! The splitting keeps two copies of the lifted matrix: `X` carries the
//! multilevel Toeplitz structure, the data constraint on the sampled entries
//! and the linear objective, all with closed-form updates; `Z` carries the
//! PSD cone, enforced by eigenvalue clipping. A scaled dual `Lambda` ties
//! them together.

use crate::error::{Error, Result};
use crate::linalg::{frob, hermitian_eig_asc, psd_projection};
use crate::sequence::{MltSequence, OffsetClasses};
use crate::superres::{LiftedProblem, ObservationModel, Sampling, SdpSolution};
use crate::{C64, CMatrix, CVector};
use ndarray_linalg::UPLO;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct AdmmConfig {
    pub max_iters: usize,
    /// Relative tolerance; the primal residual is measured against the
    /// iterate norms and the dual residual against the dual variable norm.
    pub tol: f64,
    pub rho_init: f64,
    /// Residual imbalance that triggers a step-size halving or doubling.
    pub balance_ratio: f64,
    /// Over-relaxation factor, usually in [1.5, 1.8]; 1 disables it.
    pub over_relax: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            max_iters: 50_000,
            tol: 1e-7,
            rho_init: 1.0,
            balance_ratio: 10.0,
            over_relax: 1.6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverStats {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rho: f64,
    pub converged: bool,
    /// Smallest eigenvalue of the returned (structured) iterate.
    pub min_eig_x: f64,
}

/// Internal solver state, reusable to warm start a related solve.
#[derive(Debug, Clone)]
pub struct AdmmState {
    z: CMatrix,
    lambda: CMatrix,
    rho: f64,
}

enum Projector {
    None,
    MaskEq {
        pos: Vec<usize>,
        z: CVector,
    },
    MaskBall {
        pos: Vec<usize>,
        z: CVector,
        eta: f64,
    },
    LinearEq {
        pos: Vec<usize>,
        l: CMatrix,
        lh: CMatrix,
        gram_chol: ndarray_linalg::CholeskyFactorized<ndarray::OwnedRepr<C64>>,
        z: CVector,
    },
    LinearBall {
        pos: Vec<usize>,
        v: CMatrix,
        sig: Vec<f64>,
        b: CVector,
        zperp2: f64,
        eta: f64,
    },
}

impl Projector {
    fn build(obs: &ObservationModel, lifted: &LiftedProblem) -> Result<Self> {
        if obs.is_empty() {
            return Ok(Projector::None);
        }
        let eta = obs.noise_bound;
        match &obs.sampling {
            Sampling::Mask(idx) => {
                let pos: Vec<usize> = idx.iter().map(|&i| lifted.embed[i]).collect();
                let z = obs.measurements.clone();
                if eta > 0.0 {
                    Ok(Projector::MaskBall { pos, z, eta })
                } else {
                    Ok(Projector::MaskEq { pos, z })
                }
            }
            Sampling::Linear(l) => {
                let pos = lifted.embed.clone();
                let z = obs.measurements.clone();
                if eta > 0.0 {
                    use ndarray_linalg::SVDDC;
                    let (u, s, vt) = l.svddc(ndarray_linalg::JobSvd::Some)?;
                    let u = u.expect("left singular vectors");
                    let vt = vt.expect("right singular vectors");
                    let smax = s.iter().cloned().fold(0.0f64, f64::max);
                    let rank = s.iter().filter(|&&x| x > 1e-12 * smax.max(1e-300)).count();
                    let sig: Vec<f64> = s.iter().take(rank).cloned().collect();
                    let mut b = CVector::zeros(rank);
                    for k in 0..rank {
                        b[k] = u.column(k).iter().zip(z.iter()).map(|(a, w)| a.conj() * w).sum();
                    }
                    let zperp2 = (z.iter().map(|w| w.norm_sqr()).sum::<f64>()
                        - b.iter().map(|w| w.norm_sqr()).sum::<f64>())
                    .max(0.0);
                    if zperp2 >= eta * eta {
                        return Err(Error::IllPosed(format!(
                            "noise ball of radius {eta:e} cannot be reached: the map leaves \
                             squared distance {zperp2:e}"
                        )));
                    }
                    let mut v = CMatrix::zeros((l.ncols(), rank));
                    for k in 0..rank {
                        for (c, x) in vt.row(k).iter().enumerate() {
                            v[[c, k]] = x.conj();
                        }
                    }
                    Ok(Projector::LinearBall { pos, v, sig, b, zperp2, eta })
                } else {
                    use ndarray_linalg::FactorizeC;
                    let lh = crate::linalg::adjoint(l);
                    let gram = l.dot(&lh);
                    let gram_chol = gram.factorizec(UPLO::Lower).map_err(|_| {
                        Error::IllPosed(
                            "linear map has linearly dependent rows; equality data \
                             constraint is not surjective"
                                .into(),
                        )
                    })?;
                    Ok(Projector::LinearEq { pos, l: l.clone(), lh, gram_chol, z })
                }
            }
        }
    }

    /// Euclidean projection of the sampled coordinates of `y` onto the data set.
    fn project(&self, y: &mut CVector) -> Result<()> {
        match self {
            Projector::None => {}
            Projector::MaskEq { pos, z } => {
                for (k, &p) in pos.iter().enumerate() {
                    y[p] = z[k];
                }
            }
            Projector::MaskBall { pos, z, eta } => {
                let mut dist2 = 0.0;
                for (k, &p) in pos.iter().enumerate() {
                    dist2 += (y[p] - z[k]).norm_sqr();
                }
                let dist = dist2.sqrt();
                if dist > *eta {
                    let shrink = *eta / dist;
                    for (k, &p) in pos.iter().enumerate() {
                        y[p] = z[k] + (y[p] - z[k]) * shrink;
                    }
                }
            }
            Projector::LinearEq { pos, l, lh, gram_chol, z } => {
                use ndarray_linalg::SolveC;
                let h = CVector::from_iter(pos.iter().map(|&p| y[p]));
                let resid = &l.dot(&h) - z;
                let corr = gram_chol.solvec(&resid).map_err(Error::Linalg)?;
                let delta = lh.dot(&corr);
                for (k, &p) in pos.iter().enumerate() {
                    y[p] = h[k] - delta[k];
                }
            }
            Projector::LinearBall { pos, v, sig, b, zperp2, eta } => {
                let h = CVector::from_iter(pos.iter().map(|&p| y[p]));
                let rank = sig.len();
                let mut p_coord = CVector::zeros(rank);
                for k in 0..rank {
                    p_coord[k] = v.column(k).iter().zip(h.iter()).map(|(a, w)| a.conj() * w).sum();
                }
                let d: Vec<f64> =
                    (0..rank).map(|k| (p_coord[k] * sig[k] - b[k]).norm_sqr()).collect();
                let g = |lam: f64| -> f64 {
                    zperp2
                        + d.iter()
                            .zip(sig)
                            .map(|(&dk, &s)| {
                                let den = 1.0 + lam * s * s;
                                dk / (den * den)
                            })
                            .sum::<f64>()
                };
                let target = eta * eta;
                if g(0.0) <= target {
                    return Ok(());
                }
                let mut lo = 0.0;
                let mut hi = 1.0;
                let mut guard = 0;
                while g(hi) > target {
                    hi *= 4.0;
                    guard += 1;
                    if guard > 200 {
                        return Err(Error::IllPosed("ball projection failed to bracket".into()));
                    }
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if (hi - lo) <= 1e-14 * hi {
                        break;
                    }
                }
                let lam = hi;
                let mut q = CVector::zeros(rank);
                for k in 0..rank {
                    let s = sig[k];
                    q[k] = (p_coord[k] + b[k] * (lam * s)) / (1.0 + lam * s * s) - p_coord[k];
                }
                let delta = v.dot(&q);
                for (k, &p) in pos.iter().enumerate() {
                    y[p] = h[k] + delta[k];
                }
            }
        }
        Ok(())
    }
}

/// Solves `min t + Re tr(W T'(u'))` over the PSD lifting with the data
/// constraint from `obs`, by ADMM.
///
/// Pass the state of a previous solve of a nearby problem (same shapes) to
/// warm start. Non-convergence within `cfg.max_iters` is reported in the
/// returned stats, not as an error.
pub fn solve_weighted_trace(
    obs: &ObservationModel,
    lifted: &LiftedProblem,
    cfg: &AdmmConfig,
    warm: Option<AdmmState>,
) -> Result<(SdpSolution, AdmmState)> {
    if obs.shape != lifted.base {
        return Err(Error::DimensionMismatch(format!(
            "observation grid {} vs lifted base {}",
            obs.shape, lifted.base
        )));
    }
    let np = lifted.lifted.total();
    let side = np + 1;
    let classes = OffsetClasses::new(&lifted.lifted);
    let n_classes = classes.n_classes();

    // W enters the u-update only through its per-class sums
    let mut w_sums = vec![C64::new(0.0, 0.0); n_classes];
    for (k, ws) in w_sums.iter_mut().enumerate() {
        for &(i, j) in classes.cells(k) {
            *ws += lifted.weight[[i as usize, j as usize]];
        }
    }
    let neg_class: Vec<usize> = (0..n_classes).map(|k| lifted.lifted.offset_negate(k)).collect();

    let projector = Projector::build(obs, lifted)?;

    let (mut z_mat, mut lambda, mut rho) = match warm {
        Some(state) => {
            if state.z.nrows() != side {
                return Err(Error::DimensionMismatch(format!(
                    "warm start is {}x{}, problem needs {side}x{side}",
                    state.z.nrows(),
                    state.z.ncols()
                )));
            }
            (state.z, state.lambda, state.rho)
        }
        None => (CMatrix::zeros((side, side)), CMatrix::zeros((side, side)), cfg.rho_init),
    };

    let mut x = CMatrix::zeros((side, side));
    let mut useq = vec![C64::new(0.0, 0.0); n_classes];
    let mut vbuf = vec![C64::new(0.0, 0.0); n_classes];
    let mut y = CVector::zeros(np);
    let mut t_var = 0.0f64;

    let mut iterations = 0;
    let mut converged = false;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;

    while iterations < cfg.max_iters {
        iterations += 1;

        let g = &z_mat - &lambda;

        t_var = g[[0, 0]].re - 1.0 / rho;
        for i in 0..np {
            y[i] = (g[[1 + i, 0]] + g[[0, 1 + i]].conj()) * 0.5;
        }
        projector.project(&mut y)?;
        for (k, v) in vbuf.iter_mut().enumerate() {
            let cells = classes.cells(k);
            let mut acc = C64::new(0.0, 0.0);
            for &(i, j) in cells {
                acc += g[[1 + i as usize, 1 + j as usize]];
            }
            let ck = cells.len() as f64;
            *v = acc / ck - w_sums[k] / (rho * ck);
        }
        for k in 0..n_classes {
            useq[k] = (vbuf[k] + vbuf[neg_class[k]].conj()) * 0.5;
        }

        x[[0, 0]] = C64::new(t_var, 0.0);
        for i in 0..np {
            x[[1 + i, 0]] = y[i];
            x[[0, 1 + i]] = y[i].conj();
        }
        for (k, &u) in useq.iter().enumerate() {
            for &(i, j) in classes.cells(k) {
                x[[1 + i as usize, 1 + j as usize]] = u;
            }
        }

        let alpha = cfg.over_relax;
        let x_hat = if alpha == 1.0 { x.clone() } else { &x * alpha + &z_mat * (1.0 - alpha) };
        let e = &x_hat + &lambda;
        let (z_new, _, _) = psd_projection(&e)?;
        dual = rho * frob(&(&z_new - &z_mat));
        z_mat = z_new;
        lambda += &(&x_hat - &z_mat);
        primal = frob(&(&x - &z_mat));

        let eps_pri = cfg.tol * 1.0f64.max(frob(&x)).max(frob(&z_mat));
        let eps_dual = cfg.tol * 1.0f64.max(rho * frob(&lambda));
        if primal < eps_pri && dual < eps_dual {
            converged = true;
            break;
        }

        if primal > cfg.balance_ratio * dual && rho < 1e6 {
            rho *= 2.0;
            lambda.mapv_inplace(|v| v * 0.5);
        } else if dual > cfg.balance_ratio * primal && rho > 1e-6 {
            rho *= 0.5;
            lambda.mapv_inplace(|v| v * 2.0);
        }
    }

    let tp_block = x.slice(ndarray::s![1.., 1..]);
    let (eigs, _) = hermitian_eig_asc(&tp_block.to_owned())?;
    let mut min_eig_x = eigs[0];
    let (xeigs, _) = hermitian_eig_asc(&x)?;
    min_eig_x = min_eig_x.min(xeigs[0]);

    let objective =
        t_var + useq.iter().zip(&w_sums).map(|(u, w)| (u * w.conj()).re).sum::<f64>();
    let u = MltSequence::new(lifted.lifted.clone(), useq)?;
    let stats = SolverStats {
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        rho,
        converged,
        min_eig_x,
    };
    let solution = SdpSolution { t: t_var, u, y: y.clone(), objective, stats };
    Ok((solution, AdmmState { z: z_mat, lambda, rho }))
}
