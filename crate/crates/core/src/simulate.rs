//! Monte Carlo simulation of n-shot measurement plus estimation, checking
//! consistency and the Cramer-Rao scaling of the estimator variance.
//!
//! Trials are embarrassingly parallel; trial k draws from ChaCha8 stream
//! (seed, k), so results are identical regardless of thread count.

use crate::errdist::ExtendedValue;
use crate::fisher::{classical_fisher, sld_fisher, StateFamily};
use crate::parallel::indexed_map;
use crate::quantum_core::{
    compose_sequential, outcome_distribution, povm_from_kraus, DensityMatrix, KrausMeasurement,
    Observable, Povm, PROB_TOL,
};
use crate::su_basis::GeneratorBasis;
use crate::{CMat, Error, RVec, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SHOTS: u64 = 10_000;
pub const DEFAULT_TRIALS: usize = 2_000;
pub const VARIANCE_BATCHES: usize = 20;
const MLE_GRAD_TOL: f64 = 1e-9;
const MLE_MAX_ITERS: usize = 10_000;

/// Multinomial outcome counts of an n-shot run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleCounts {
    pub counts: Vec<u64>,
    pub total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Linear,
    Mle,
}

/// Aggregate of a scaling experiment over many trials.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EstimationRun {
    pub estimator: EstimatorKind,
    pub shots: u64,
    pub trials: usize,
    pub seed: u64,
    pub mean: f64,
    /// `n * Var` of the per-trial estimates.
    pub n_variance: f64,
    /// Standard error of `n_variance`, by batch means over 20 batches.
    pub n_variance_std_error: f64,
    /// Standard error of the mean estimate.
    pub mean_std_error: f64,
    /// The Cramer-Rao comparison value the run is judged against.
    pub cramer_rao: f64,
    /// True expectation value of the observable.
    pub expectation: f64,
    /// Number of trials whose MLE hit the iteration cap.
    pub unconverged_trials: usize,
}

/// Draw multinomial counts from the outcome distribution of a POVM,
/// deterministic given the seed.
pub fn sample_outcomes(
    rho: &DensityMatrix,
    povm: &Povm,
    n: u64,
    seed: u64,
) -> Result<SampleCounts> {
    let p = outcome_distribution(rho, povm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(multinomial(&p, n, &mut rng))
}

/// Multinomial draw by CDF inversion per shot.
pub fn multinomial<R: Rng>(p: &RVec, n: u64, rng: &mut R) -> SampleCounts {
    let k = p.len();
    let mut cdf = Vec::with_capacity(k);
    let mut acc = 0.0;
    for i in 0..k {
        acc += p[i].max(0.0);
        cdf.push(acc);
    }
    let total_mass = acc.max(1e-300);
    let mut counts = vec![0u64; k];
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * total_mass;
        let idx = cdf.partition_point(|&c| c < u).min(k - 1);
        counts[idx] += 1;
    }
    SampleCounts { counts, total: n }
}

/// `X_est = sum_i alpha_i n_i / n` for projective measurements.
pub fn linear_estimate(counts: &SampleCounts, alphas: &[f64]) -> Result<f64> {
    if counts.counts.len() != alphas.len() {
        return Err(Error::LengthMismatch {
            expected: alphas.len(),
            got: counts.counts.len(),
        });
    }
    let n = counts.total as f64;
    Ok(counts
        .counts
        .iter()
        .zip(alphas)
        .map(|(&c, &a)| a * c as f64 / n)
        .sum())
}

/// Result of a maximum-likelihood estimation, with its convergence flag.
#[derive(Debug, Clone)]
pub struct MleResult {
    pub value: f64,
    pub theta: RVec,
    pub converged: bool,
    pub iterations: usize,
}

/// MLE of `<X>` over the state set: maximize
/// `sum_i n_i log(r_i + v_i^T theta)` by projected gradient ascent, the
/// projection clipping negative eigenvalues and renormalizing the trace.
/// Starts at theta = 0, so directions carrying no information stay at zero
/// (smallest-norm tie break).
pub fn mle_estimate(
    counts: &SampleCounts,
    povm: &Povm,
    x: &Observable,
    basis: &GeneratorBasis,
) -> Result<MleResult> {
    if counts.counts.len() != povm.len() {
        return Err(Error::LengthMismatch {
            expected: povm.len(),
            got: counts.counts.len(),
        });
    }
    if counts.total == 0 {
        return Err(Error::AllZeroCounts);
    }
    let dim = basis.len();
    let n = counts.total as f64;
    let prob = |theta: &RVec, i: usize| povm.offsets()[i] + povm.directions()[i].dot(theta);
    let log_lik = |theta: &RVec| -> f64 {
        let mut l = 0.0;
        for i in 0..povm.len() {
            let c = counts.counts[i] as f64;
            if c > 0.0 {
                l += c * prob(theta, i).max(1e-300).ln();
            }
        }
        l
    };
    let gradient = |theta: &RVec| -> RVec {
        let mut g = RVec::zeros(dim);
        for i in 0..povm.len() {
            let c = counts.counts[i] as f64;
            if c > 0.0 {
                let p = prob(theta, i).max(1e-12);
                g += povm.directions()[i].map(|v| v * c / p);
            }
        }
        g
    };
    let project = |theta: &RVec| -> RVec {
        // clip eigenvalues of rho(theta), renormalize, re-extract theta
        let m = basis
            .reconstruct(1.0 / basis.dim() as f64, theta)
            .expect("length fixed");
        let (vals, vecs) = crate::linalg::eigh(&m);
        let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let d = basis.dim();
        let mut rho = CMat::zeros(d, d);
        for j in 0..d {
            let col = vecs.column(j);
            rho += (col * col.adjoint()).map(|z| z * crate::c64(clipped[j] / total.max(1e-300), 0.0));
        }
        let (_, t) = basis.decompose_hermitian(&rho).expect("hermitian");
        t
    };
    let mut theta = RVec::zeros(dim);
    let mut ll = log_lik(&theta);
    let mut converged = false;
    let mut iters = 0;
    let mut step = 1.0 / n;
    while iters < MLE_MAX_ITERS {
        iters += 1;
        let g = gradient(&theta);
        if g.norm() <= MLE_GRAD_TOL {
            converged = true;
            break;
        }
        // backtracking line search on the projected step
        let mut advanced = false;
        for _ in 0..60 {
            let cand = project(&(&theta + g.map(|v| v * step)));
            let cand_ll = log_lik(&cand);
            if cand_ll > ll + 1e-15 * ll.abs() {
                // grow the step again for the next iteration
                theta = cand;
                ll = cand_ll;
                step *= 2.0;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if !advanced {
            // no ascent direction left at the smallest step: stationary
            converged = true;
            break;
        }
    }
    Ok(MleResult {
        value: x.x0() + x.coords().dot(&theta),
        theta,
        converged,
        iterations: iters,
    })
}

/// Config shared by the scaling experiments.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RunConfig {
    pub shots: u64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            shots: DEFAULT_SHOTS,
            trials: DEFAULT_TRIALS,
            seed: 0,
        }
    }
}

/// For the linear estimator: effective eigenvalue of each effect,
/// `alpha_i = Tr(X E_i) / Tr(E_i)` (exact for projective measurements of X).
fn effect_eigenvalues(x: &Observable, povm: &Povm) -> Vec<f64> {
    povm.effects()
        .iter()
        .map(|e| {
            let tr = e.trace().re;
            if tr.abs() < 1e-14 {
                0.0
            } else {
                crate::linalg::trace_product(x.matrix(), e).re / tr
            }
        })
        .collect()
}

fn run_trials(
    p: &RVec,
    cfg: &RunConfig,
    estimate: impl Fn(&SampleCounts) -> Result<(f64, bool)> + Sync,
) -> Result<(Vec<f64>, usize)> {
    let results = indexed_map(cfg.trials, |k| -> Result<(f64, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let counts = multinomial(p, cfg.shots, &mut rng);
        estimate(&counts)
    });
    let mut estimates = Vec::with_capacity(cfg.trials);
    let mut unconverged = 0;
    for r in results {
        let (v, conv) = r?;
        estimates.push(v);
        if !conv {
            unconverged += 1;
        }
    }
    Ok((estimates, unconverged))
}

fn summarize(
    estimates: Vec<f64>,
    unconverged: usize,
    estimator: EstimatorKind,
    cfg: &RunConfig,
    cramer_rao: f64,
    expectation: f64,
) -> EstimationRun {
    let trials = estimates.len();
    let n = cfg.shots as f64;
    let mean = estimates.iter().sum::<f64>() / trials as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / trials as f64;
    let n_variance = n * var;
    // batch means for the n*Var standard error
    let batches = VARIANCE_BATCHES.min(trials.max(1));
    let batch_size = (trials / batches).max(1);
    let mut batch_vals = Vec::with_capacity(batches);
    for b in 0..batches {
        let lo = b * batch_size;
        let hi = if b == batches - 1 { trials } else { (lo + batch_size).min(trials) };
        if lo >= hi {
            continue;
        }
        let slice = &estimates[lo..hi];
        let bm = slice.iter().sum::<f64>() / slice.len() as f64;
        let bv = slice.iter().map(|e| (e - bm).powi(2)).sum::<f64>() / slice.len() as f64;
        batch_vals.push(n * bv);
    }
    let bmean = batch_vals.iter().sum::<f64>() / batch_vals.len() as f64;
    let bvar = batch_vals.iter().map(|v| (v - bmean).powi(2)).sum::<f64>()
        / (batch_vals.len().max(2) - 1) as f64;
    let n_variance_std_error = (bvar / batch_vals.len() as f64).sqrt();
    let mean_std_error = (var / trials as f64).sqrt();
    EstimationRun {
        estimator,
        shots: cfg.shots,
        trials,
        seed: cfg.seed,
        mean,
        n_variance,
        n_variance_std_error,
        mean_std_error,
        cramer_rao,
        expectation,
        unconverged_trials: unconverged,
    }
}

/// Repeated n-shot estimation of `<X>` from measurement `m`; reports the
/// empirical `n * Var` against the Cramer-Rao value `x^T J(M)^+ x`.
pub fn variance_scaling_experiment(
    rho: &DensityMatrix,
    m: &KrausMeasurement,
    x: &Observable,
    cfg: &RunConfig,
    estimator: EstimatorKind,
    basis: &GeneratorBasis,
) -> Result<EstimationRun> {
    let povm = povm_from_kraus(m, basis)?;
    let j = classical_fisher(rho, &povm)?;
    let cramer_rao = match j.quadform_pinv(x.coords())? {
        ExtendedValue::Finite(v) => v,
        ExtendedValue::Infinite => return Err(Error::ExperimentUndefined),
    };
    let p = outcome_distribution(rho, &povm)?;
    let alphas = effect_eigenvalues(x, &povm);
    let (estimates, unconverged) = run_trials(&p, cfg, |counts| match estimator {
        EstimatorKind::Linear => Ok((linear_estimate(counts, &alphas)?, true)),
        EstimatorKind::Mle => {
            let r = mle_estimate(counts, &povm, x, basis)?;
            Ok((r.value, r.converged))
        }
    })?;
    Ok(summarize(
        estimates,
        unconverged,
        estimator,
        cfg,
        cramer_rao,
        x.expectation(rho),
    ))
}

/// Sequential experiment: measurement `m`, then `n_meas` on the disturbed
/// state; `<Y>` is estimated by MLE from the marginal distribution of the
/// second outcome. Reported against the pushforward SLD quadratic form
/// `y^T J_S'^+ y`, which the optimal retrieval measurement attains.
pub fn disturbance_scaling_experiment(
    rho: &DensityMatrix,
    m: &KrausMeasurement,
    n_meas: &KrausMeasurement,
    y: &Observable,
    cfg: &RunConfig,
    basis: &GeneratorBasis,
) -> Result<EstimationRun> {
    let composed = compose_sequential(m, n_meas)?;
    // marginal POVM of the second outcome on the input space
    let nn = n_meas.num_outcomes();
    let mut marginal_effects = vec![CMat::zeros(m.dim_in(), m.dim_in()); nn];
    for i in 0..m.num_outcomes() {
        for j in 0..nn {
            marginal_effects[j] += composed.effect(i * nn + j);
        }
    }
    let marginal = Povm::new(marginal_effects, basis)?;
    // the quantum comparison value
    let family = StateFamily::pushforward(rho, m, basis)?;
    let js = sld_fisher(&family)?;
    let quantum_bound = match js.quadform_pinv(y.coords())? {
        ExtendedValue::Finite(v) => v,
        ExtendedValue::Infinite => return Err(Error::ExperimentUndefined),
    };
    // the estimator must also be able to see the direction classically
    let j_cl = classical_fisher(rho, &marginal)?;
    if !matches!(j_cl.quadform_pinv(y.coords())?, ExtendedValue::Finite(_)) {
        return Err(Error::ExperimentUndefined);
    }
    let q = outcome_distribution(rho, &marginal)?;
    let (estimates, unconverged) = run_trials(&q, cfg, |counts| {
        let r = mle_estimate(counts, &marginal, y, basis)?;
        Ok((r.value, r.converged))
    })?;
    Ok(summarize(
        estimates,
        unconverged,
        EstimatorKind::Mle,
        cfg,
        quantum_bound,
        y.expectation(rho),
    ))
}

/// Skip outcomes of probability below [`PROB_TOL`] when deciding whether a
/// counts vector is compatible with a distribution (used by callers that
/// assemble counts externally).
pub fn counts_compatible(counts: &SampleCounts, p: &RVec) -> bool {
    counts.counts.len() == p.len()
        && counts
            .counts
            .iter()
            .zip(p.iter())
            .all(|(&c, &pi)| c == 0 || pi > PROB_TOL)
}
