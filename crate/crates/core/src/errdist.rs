//! The error and disturbance functionals, both trade-off bounds, and the
//! invariant-subspace quantities behind the attainable bound.

use crate::fisher::{classical_fisher, sld_fisher, StateFamily};
use crate::linalg::{commutator, eigh, nullspace, trace_product};
use crate::quantum_core::{povm_from_kraus, DensityMatrix, KrausMeasurement, Observable};
use crate::su_basis::GeneratorBasis;
use crate::{c64, CMat, Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Negative values above this magnitude are floating noise and clamp to 0.
pub const CLAMP_TOL: f64 = 1e-9;
/// Weights below this are skipped in the subspace-averaged quantities.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Slack used by the satisfied-flags of a [`TradeoffReport`].
pub const FLAG_SLACK: f64 = 1e-8;

/// A non-negative real or the distinguished infinite value; the codomain of
/// pseudoinverse quadratic forms, error and disturbance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedValue {
    Finite(f64),
    Infinite,
}

impl ExtendedValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtendedValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            ExtendedValue::Finite(v) => Some(*v),
            ExtendedValue::Infinite => None,
        }
    }

    /// Subtract a constant and clamp at zero; INFINITE propagates.
    pub fn sub_clamped(&self, rhs: f64) -> ExtendedValue {
        match self {
            ExtendedValue::Finite(v) => ExtendedValue::Finite((v - rhs).max(0.0)),
            ExtendedValue::Infinite => ExtendedValue::Infinite,
        }
    }

    /// Product with INFINITE absorbing.
    pub fn product(&self, rhs: &ExtendedValue) -> ExtendedValue {
        match (self, rhs) {
            (ExtendedValue::Finite(a), ExtendedValue::Finite(b)) => ExtendedValue::Finite(a * b),
            _ => ExtendedValue::Infinite,
        }
    }

    /// `self >= bound - slack`, with INFINITE trivially true.
    pub fn at_least(&self, bound: f64, slack: f64) -> bool {
        match self {
            ExtendedValue::Finite(v) => *v >= bound - slack,
            ExtendedValue::Infinite => true,
        }
    }
}

impl std::fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtendedValue::Finite(v) => write!(f, "{v}"),
            ExtendedValue::Infinite => write!(f, "inf"),
        }
    }
}

impl serde::Serialize for ExtendedValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedValue::Finite(v) => s.serialize_f64(*v),
            ExtendedValue::Infinite => s.serialize_str("inf"),
        }
    }
}

/// `(Delta X)^2 = <X^2> - <X>^2`, clamped at zero.
pub fn variance(rho: &DensityMatrix, x: &Observable) -> Result<f64> {
    if rho.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: rho.dim(),
        });
    }
    let second = rho.expectation(&(x.matrix() * x.matrix()));
    let mean = rho.expectation(x.matrix());
    Ok((second - mean * mean).max(0.0))
}

/// Measurement error `eps(X; M) = x^T J(M)^+ x - (Delta X)^2`, clamped at
/// zero; INFINITE when x leaves the support of the classical Fisher matrix.
pub fn measurement_error(
    rho: &DensityMatrix,
    x: &Observable,
    m: &KrausMeasurement,
    basis: &GeneratorBasis,
) -> Result<ExtendedValue> {
    let povm = povm_from_kraus(m, basis)?;
    let j = classical_fisher(rho, &povm)?;
    let quad = j.quadform_pinv(x.coords())?;
    Ok(quad.sub_clamped(variance(rho, x)?))
}

/// Disturbance `eta(Y; M) = y^T J_S'^+ y - (Delta Y)^2` through the
/// pushforward family, clamped at zero; INFINITE when y leaves the support
/// of the pushforward SLD Fisher matrix.
pub fn disturbance(
    rho: &DensityMatrix,
    y: &Observable,
    m: &KrausMeasurement,
    basis: &GeneratorBasis,
) -> Result<ExtendedValue> {
    let family = StateFamily::pushforward(rho, m, basis)?;
    let js = sld_fisher(&family)?;
    let quad = js.quadform_pinv(y.coords())?;
    Ok(quad.sub_clamped(variance(rho, y)?))
}

/// `|<[X, Y]>|^2 / 4`.
pub fn heisenberg_bound(rho: &DensityMatrix, x: &Observable, y: &Observable) -> Result<f64> {
    if rho.dim() != x.dim() || x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: x.dim().max(y.dim()),
        });
    }
    let comm = commutator(x.matrix(), y.matrix());
    let ev = trace_product(rho.matrix(), &comm);
    Ok(0.25 * ev.norm_sqr())
}

/// Minimal simultaneous invariant subspaces of a pair of observables,
/// found by splitting along eigenspaces of a random Hermitian element of
/// their commutant and refining recursively.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    projectors: Vec<CMat>,
    seed: u64,
}

impl SubspaceDecomposition {
    pub fn projectors(&self) -> &[CMat] {
        &self.projectors
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    /// Seed of the random commutant element, recorded for reproducibility.
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

pub fn invariant_subspaces(x: &Observable, y: &Observable) -> Result<SubspaceDecomposition> {
    invariant_subspaces_seeded(x, y, 0)
}

pub fn invariant_subspaces_seeded(
    x: &Observable,
    y: &Observable,
    seed: u64,
) -> Result<SubspaceDecomposition> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    let d = x.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut projectors = Vec::new();
    split(
        x.matrix(),
        y.matrix(),
        &CMat::identity(d, d),
        &mut rng,
        &mut projectors,
    );
    // deterministic order for output: sort by (rank, first-column support)
    projectors.sort_by(|a, b| {
        let ra = a.trace().re;
        let rb = b.trace().re;
        ra.partial_cmp(&rb)
            .unwrap()
            .then_with(|| first_support(a).cmp(&first_support(b)))
    });
    Ok(SubspaceDecomposition { projectors, seed })
}

fn first_support(p: &CMat) -> usize {
    for j in 0..p.nrows() {
        if p[(j, j)].re > 1e-8 {
            return j;
        }
    }
    p.nrows()
}

/// Recursive splitter. `iso` is a d x k isometry spanning the current
/// subspace; appends projectors for its irreducible parts.
fn split(x: &CMat, y: &CMat, iso: &CMat, rng: &mut ChaCha8Rng, out: &mut Vec<CMat>) {
    let k = iso.ncols();
    if k == 1 {
        out.push(iso * iso.adjoint());
        return;
    }
    let xc = iso.adjoint() * x * iso;
    let yc = iso.adjoint() * y * iso;
    // commutant of {xc, yc} on the compressed space via vectorization:
    // [X, C] = 0  <=>  (I (x) X - X^T (x) I) vec(C) = 0
    let eye = CMat::identity(k, k);
    let mx = eye.kronecker(&xc) - xc.transpose().kronecker(&eye);
    let my = eye.kronecker(&yc) - yc.transpose().kronecker(&eye);
    let mut stacked = CMat::zeros(2 * k * k, k * k);
    stacked.view_mut((0, 0), (k * k, k * k)).copy_from(&mx);
    stacked.view_mut((k * k, 0), (k * k, k * k)).copy_from(&my);
    let ns = nullspace(&stacked, 1e-10);
    if ns.len() <= 1 {
        // commutant is trivial: irreducible
        out.push(iso * iso.adjoint());
        return;
    }
    // random Hermitian commutant element
    for _attempt in 0..4 {
        let mut c = CMat::zeros(k, k);
        for v in &ns {
            let g = c64(crate::randgen::normal(rng), crate::randgen::normal(rng));
            let m = CMat::from_column_slice(k, k, v.as_slice());
            c += m.map(|z| z * g);
        }
        let h = (&c + c.adjoint()).map(|z| z * c64(0.5, 0.0));
        let (vals, vecs) = eigh(&h);
        let spread = (vals[k - 1] - vals[0]).abs().max(1e-30);
        // group eigenvalues
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        while start < k {
            let mut end = start + 1;
            while end < k && (vals[end] - vals[end - 1]).abs() <= 1e-6 * spread {
                end += 1;
            }
            groups.push((start, end));
            start = end;
        }
        if groups.len() > 1 {
            for (s, e) in groups {
                let w = vecs.columns(s, e - s).into_owned();
                let sub_iso = iso * w;
                split(x, y, &sub_iso, rng, out);
            }
            return;
        }
        // degenerate draw; try another random element
    }
    out.push(iso * iso.adjoint());
}

/// Weighted conditional variances and symmetrized covariance over the
/// invariant-subspace decomposition: `((Delta_Q X)^2, (Delta_Q Y)^2, C_Q)`.
pub fn delta_q_corr_q(
    rho: &DensityMatrix,
    x: &Observable,
    y: &Observable,
    decomp: &SubspaceDecomposition,
) -> Result<(f64, f64, f64)> {
    let mut dx2 = 0.0;
    let mut dy2 = 0.0;
    let mut cq = 0.0;
    for p in decomp.projectors() {
        let pa = trace_product(rho.matrix(), p).re;
        if pa <= WEIGHT_TOL {
            continue;
        }
        let rho_a = (p * rho.matrix() * p).map(|z| z / c64(pa, 0.0));
        let ex = trace_product(&rho_a, x.matrix()).re;
        let ey = trace_product(&rho_a, y.matrix()).re;
        let ex2 = trace_product(&rho_a, &(x.matrix() * x.matrix())).re;
        let ey2 = trace_product(&rho_a, &(y.matrix() * y.matrix())).re;
        let exy = 0.5
            * trace_product(
                &rho_a,
                &crate::linalg::anticommutator(x.matrix(), y.matrix()),
            )
            .re;
        dx2 += pa * (ex2 - ex * ex);
        dy2 += pa * (ey2 - ey * ey);
        cq += pa * (exy - ex * ey);
    }
    Ok((dx2.max(0.0), dy2.max(0.0), cq))
}

/// The attainable bound `(Delta_Q X)^2 (Delta_Q Y)^2 - C_Q^2`, clamped at
/// zero. Returns the value and, when the decomposition is ambiguous enough
/// that two seeds disagree beyond 1e-6, the discrepancy as a warning.
pub fn attainable_bound_checked(
    rho: &DensityMatrix,
    x: &Observable,
    y: &Observable,
) -> Result<(f64, Option<f64>)> {
    let mut values = [0.0f64; 2];
    for (i, seed) in [0u64, 1].iter().enumerate() {
        let decomp = invariant_subspaces_seeded(x, y, *seed)?;
        let (dx2, dy2, cq) = delta_q_corr_q(rho, x, y, &decomp)?;
        values[i] = (dx2 * dy2 - cq * cq).max(0.0);
    }
    let discrepancy = (values[0] - values[1]).abs();
    let warn = if discrepancy > 1e-6 { Some(discrepancy) } else { None };
    Ok((values[0], warn))
}

pub fn attainable_bound(rho: &DensityMatrix, x: &Observable, y: &Observable) -> Result<f64> {
    Ok(attainable_bound_checked(rho, x, y)?.0)
}

/// Equality conditions of the chain inequalities: every effect has rank 1
/// and the conditional post-measurement states are pairwise orthogonal.
pub fn equality_conditions_hold(
    rho: &DensityMatrix,
    m: &KrausMeasurement,
    basis: &GeneratorBasis,
) -> Result<bool> {
    let povm = povm_from_kraus(m, basis)?;
    for e in povm.effects() {
        let (vals, _) = eigh(e);
        let max = vals[vals.len() - 1].max(1e-30);
        let rank = vals.iter().filter(|&&v| v > 1e-8 * max).count();
        if rank != 1 {
            return Ok(false);
        }
    }
    let mut conds: Vec<CMat> = Vec::new();
    for i in 0..m.num_outcomes() {
        if m.outcome_probability(rho, i) > WEIGHT_TOL {
            conds.push(
                crate::quantum_core::conditional_state(rho, m, i)?
                    .matrix()
                    .clone(),
            );
        }
    }
    for i in 0..conds.len() {
        for j in (i + 1)..conds.len() {
            if trace_product(&conds[i], &conds[j]).re.abs() > 1e-8 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Everything about one (rho, X, Y, M) scenario in one report.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TradeoffReport {
    pub error: ExtendedValue,
    pub disturbance: ExtendedValue,
    pub product: ExtendedValue,
    pub heisenberg_bound: f64,
    pub attainable_bound: f64,
    pub heisenberg_satisfied: bool,
    pub attainable_satisfied: bool,
    /// Discrepancy between two invariant-subspace seeds, when above 1e-6.
    pub decomposition_warning: Option<f64>,
}

pub fn tradeoff_report(
    rho: &DensityMatrix,
    x: &Observable,
    y: &Observable,
    m: &KrausMeasurement,
    basis: &GeneratorBasis,
) -> Result<TradeoffReport> {
    let error = measurement_error(rho, x, m, basis)?;
    let disturbance = disturbance(rho, y, m, basis)?;
    let product = error.product(&disturbance);
    let hb = heisenberg_bound(rho, x, y)?;
    let (ab, warn) = attainable_bound_checked(rho, x, y)?;
    Ok(TradeoffReport {
        error,
        disturbance,
        product,
        heisenberg_bound: hb,
        attainable_bound: ab,
        heisenberg_satisfied: product.at_least(hb, FLAG_SLACK),
        attainable_satisfied: product.at_least(ab, FLAG_SLACK),
        decomposition_warning: warn,
    })
}
