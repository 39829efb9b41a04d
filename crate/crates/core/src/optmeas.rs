//! The optimal retrieval measurement, the bound-attaining 2d-outcome
//! measurement scheme, and the attainability/vindication sweeps.

use crate::errdist::{
    attainable_bound, disturbance, heisenberg_bound, invariant_subspaces, measurement_error,
    delta_q_corr_q, ExtendedValue,
};
use crate::fisher::{sld_fisher, sld_operators, StateFamily};
use crate::linalg::eigh;
use crate::parallel::indexed_map;
use crate::quantum_core::{projective_measurement_of, DensityMatrix, KrausMeasurement, Observable};
use crate::randgen::{random_full_rank_state, random_observable, random_rank1_measurement};
use crate::su_basis::GeneratorBasis;
use crate::{c64, CMat, Error, RVec, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Parameters of the constructed bound-attaining scheme.
#[derive(Debug, Clone)]
pub struct OptimalSchemeParams {
    /// Traceless observables whose eigenbases feed the two projector banks.
    pub z1: CMat,
    pub z2: CMat,
    /// Mixing weights of the two banks, `w1 + w2 = 1`.
    pub w1: f64,
    pub w2: f64,
    /// Decomposition coefficients: traceless X = a1 Z1 + a2 Z2, same for Y.
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// Rotation angle of the (Z1, Z2) frame in span{X, Y}.
    pub angle: f64,
    /// Residual of the constraint a^T D K D b.
    pub constraint_residual: f64,
}

/// Optimal retrieval measurement for direction `y` on a state family: the
/// projective measurement of the scalar SLD observable `L_y = sum ỹ_mu L_mu`
/// with `ỹ = J_S^+ y`. Achieves the SLD quadratic form for `y`.
pub fn optimal_retrieval(family: &StateFamily, y: &RVec) -> Result<KrausMeasurement> {
    let d_out = family.base().dim();
    if y.norm() == 0.0 {
        return Ok(KrausMeasurement::identity(d_out));
    }
    let js = sld_fisher(family)?;
    match js.quadform_pinv(y)? {
        ExtendedValue::Infinite => return Err(Error::NoRetrieval),
        ExtendedValue::Finite(_) => {}
    }
    let y_tilde = js.pinv_apply(y)?;
    let sld = sld_operators(family);
    let mut ly = CMat::zeros(d_out, d_out);
    for (mu, l) in sld.operators.iter().enumerate() {
        ly += l.map(|z| z * c64(y_tilde[mu], 0.0));
    }
    let (m, _) = projective_measurement_of(&ly);
    Ok(m)
}

/// Deterministic eigenbasis: ascending eigenvalues, first component of each
/// vector above 1e-8 in magnitude made real positive.
fn fixed_eigenbasis(h: &CMat) -> CMat {
    let (_, mut vecs) = eigh(h);
    for j in 0..vecs.ncols() {
        let col = vecs.column(j).into_owned();
        let lead = col.iter().find(|z| z.norm() > 1e-8).copied();
        if let Some(z) = lead {
            let phase = z / z.norm();
            vecs.set_column(j, &(col * phase.conj()));
        }
    }
    vecs
}

struct FrameGeometry {
    xu: CMat,
    yu: CMat,
}

/// Orthonormalize the traceless parts of X and Y for the one-angle frame
/// parameterization. Returns the coordinates of X and Y in that frame too.
fn frame_geometry(x: &Observable, y: &Observable) -> Result<(FrameGeometry, [[f64; 2]; 2])> {
    let d = x.dim() as f64;
    let xt = x.matrix() - CMat::identity(x.dim(), x.dim()).map(|z| z * c64(x.matrix().trace().re / d, 0.0));
    let yt = y.matrix() - CMat::identity(y.dim(), y.dim()).map(|z| z * c64(y.matrix().trace().re / d, 0.0));
    let xn = xt.norm();
    let yn = yt.norm();
    if xn < 1e-12 || yn < 1e-12 {
        return Err(Error::ParameterError(
            "X and Y must have nonzero traceless parts".into(),
        ));
    }
    let xu = xt.map(|z| z / c64(xn, 0.0));
    // Gram-Schmidt Y against X
    let overlap = crate::linalg::trace_product(&xu.adjoint(), &yt).re;
    let y_perp = &yt - xu.map(|z| z * c64(overlap, 0.0));
    let ypn = y_perp.norm();
    if ypn < 1e-10 * yn {
        return Err(Error::ParameterError(
            "X and Y are linearly dependent as traceless parts".into(),
        ));
    }
    let yu = y_perp.map(|z| z / c64(ypn, 0.0));
    // coordinates in the orthonormal (xu, yu) frame
    let x_coords = [xn, 0.0];
    let y_coords = [overlap, ypn];
    Ok((FrameGeometry { xu, yu }, [x_coords, y_coords]))
}

/// Build the 2d-outcome measurement from the eigenbases of Z1 and Z2 with
/// amplitudes sqrt(w1), sqrt(w2): operators `sqrt(w) |i><psi_i|` into an
/// orthonormal output basis of dimension 2d.
fn scheme_measurement(z1: &CMat, z2: &CMat, w1: f64) -> Result<KrausMeasurement> {
    let d = z1.nrows();
    let v1 = fixed_eigenbasis(z1);
    let v2 = fixed_eigenbasis(z2);
    let mut outcomes = Vec::with_capacity(2 * d);
    for (bank, (vecs, w)) in [(0usize, (&v1, w1)), (1, (&v2, 1.0 - w1))] {
        let amp = w.sqrt();
        for i in 0..d {
            let mut op = CMat::zeros(2 * d, d);
            let bra = vecs.column(i).adjoint();
            let row_index = bank * d + i;
            for k in 0..d {
                op[(row_index, k)] = bra[k] * c64(amp, 0.0);
            }
            outcomes.push(vec![op]);
        }
    }
    KrausMeasurement::new(outcomes, d, 2 * d)
}

/// Constraint residual `a^T D K D b` at frame angle `t`.
struct ConstraintEval<'a> {
    rho: &'a DensityMatrix,
    geom: &'a FrameGeometry,
    coords: [[f64; 2]; 2],
    decomp: crate::errdist::SubspaceDecomposition,
    w1: f64,
    basis: &'a GeneratorBasis,
}

impl ConstraintEval<'_> {
    fn z_pair(&self, t: f64) -> (CMat, CMat) {
        let (c, s) = (t.cos(), t.sin());
        let z1 = self.geom.xu.map(|z| z * c64(c, 0.0)) + self.geom.yu.map(|z| z * c64(s, 0.0));
        let z2 = self.geom.xu.map(|z| z * c64(-s, 0.0)) + self.geom.yu.map(|z| z * c64(c, 0.0));
        (z1, z2)
    }

    /// a, b with traceless X = a1 Z1 + a2 Z2 and same for Y.
    fn ab(&self, t: f64) -> ([f64; 2], [f64; 2]) {
        let (c, s) = (t.cos(), t.sin());
        let [xc, yc] = self.coords;
        // inverse rotation applied to frame coordinates
        let a = [c * xc[0] + s * xc[1], -s * xc[0] + c * xc[1]];
        let b = [c * yc[0] + s * yc[1], -s * yc[0] + c * yc[1]];
        (a, b)
    }

    fn residual(&self, t: f64) -> Result<f64> {
        let (z1, z2) = self.z_pair(t);
        let z1o = Observable::new(z1, self.basis)?;
        let z2o = Observable::new(z2, self.basis)?;
        let (dz1, dz2, cq) = delta_q_corr_q(self.rho, &z1o, &z2o, &self.decomp)?;
        let (a, b) = self.ab(t);
        let w2 = 1.0 - self.w1;
        // D = diag(w2, -w1), K = [[dz1, cq], [cq, dz2]]
        let da = [w2 * a[0], -self.w1 * a[1]];
        let db = [w2 * b[0], -self.w1 * b[1]];
        Ok(da[0] * (dz1 * db[0] + cq * db[1]) + da[1] * (cq * db[0] + dz2 * db[1]))
    }
}

/// Construct the bound-attaining measurement of weight `w1`: finds frame
/// angles solving the constraint by scan + bisection, builds the candidate
/// schemes, and returns the one minimizing the error-disturbance product.
pub fn build_optimal_scheme(
    rho: &DensityMatrix,
    x: &Observable,
    y: &Observable,
    w1: f64,
    basis: &GeneratorBasis,
) -> Result<(KrausMeasurement, OptimalSchemeParams)> {
    if !(w1 > 0.0 && w1 < 1.0) {
        return Err(Error::ParameterError(format!(
            "w1 must lie in (0, 1), got {w1}"
        )));
    }
    let (geom, coords) = frame_geometry(x, y)?;
    let decomp = invariant_subspaces(x, y)?;
    let eval = ConstraintEval {
        rho,
        geom: &geom,
        coords,
        decomp,
        w1,
        basis,
    };
    // scan [0, pi) for sign changes, then bisect
    let scan_points = 360;
    let step = std::f64::consts::PI / scan_points as f64;
    let mut roots = Vec::new();
    let mut prev_t = 0.0;
    let mut prev_g = eval.residual(prev_t)?;
    let mut min_abs = prev_g.abs();
    for k in 1..=scan_points {
        let t = k as f64 * step;
        let g = eval.residual(t)?;
        min_abs = min_abs.min(g.abs());
        if prev_g == 0.0 {
            roots.push(prev_t);
        } else if prev_g * g < 0.0 {
            // bisection to 1e-10 in the angle
            let (mut lo, mut hi) = (prev_t, t);
            let (mut glo, _) = (prev_g, g);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                let gm = eval.residual(mid)?;
                if glo * gm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev_g = g;
    }
    if roots.is_empty() {
        return Err(Error::ConstructionFailed {
            detail: format!(
                "no sign change of the constraint over {scan_points} angles; min |residual| = {min_abs:.3e}"
            ),
        });
    }
    // evaluate every root, keep the scheme with the smallest product
    let mut best: Option<(f64, KrausMeasurement, OptimalSchemeParams)> = None;
    for t in roots {
        let (z1, z2) = eval.z_pair(t);
        let m = scheme_measurement(&z1, &z2, w1)?;
        let eps = measurement_error(rho, x, &m, basis)?;
        let eta = disturbance(rho, y, &m, basis)?;
        let product = eps.product(&eta);
        let score = match product {
            ExtendedValue::Finite(v) => v,
            ExtendedValue::Infinite => f64::INFINITY,
        };
        let (a, b) = eval.ab(t);
        let params = OptimalSchemeParams {
            z1,
            z2,
            w1,
            w2: 1.0 - w1,
            a,
            b,
            angle: t,
            constraint_residual: eval.residual(t)?,
        };
        if best.as_ref().map_or(true, |(s, _, _)| score < *s) {
            best = Some((score, m, params));
        }
    }
    let (_, m, params) = best.expect("roots nonempty");
    Ok((m, params))
}

/// One row of an attainability sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepPoint {
    pub w1: f64,
    pub error: Option<ExtendedValue>,
    pub disturbance: Option<ExtendedValue>,
    pub product: Option<ExtendedValue>,
    pub bound: f64,
    /// `|product - bound|` when the product is finite.
    pub gap: Option<f64>,
    pub construction_error: Option<String>,
}

/// Attainability sweep over a grid of mixing weights. Construction failures
/// are recorded per point; the sweep continues.
pub fn attainability_sweep(
    rho: &DensityMatrix,
    x: &Observable,
    y: &Observable,
    grid: &[f64],
    basis: &GeneratorBasis,
) -> Result<Vec<SweepPoint>> {
    let bound = attainable_bound(rho, x, y)?;
    let points = indexed_map(grid.len(), |k| {
        let w1 = grid[k];
        match build_optimal_scheme(rho, x, y, w1, basis) {
            Ok((m, _)) => {
                let eps = measurement_error(rho, x, &m, basis)?;
                let eta = disturbance(rho, y, &m, basis)?;
                let product = eps.product(&eta);
                let gap = product.finite().map(|p| (p - bound).abs());
                Ok(SweepPoint {
                    w1,
                    error: Some(eps),
                    disturbance: Some(eta),
                    product: Some(product),
                    bound,
                    gap,
                    construction_error: None,
                })
            }
            Err(Error::ParameterError(msg)) => Err(Error::ParameterError(msg)),
            Err(e) => Ok(SweepPoint {
                w1,
                error: None,
                disturbance: None,
                product: None,
                bound,
                gap: None,
                construction_error: Some(e.to_string()),
            }),
        }
    });
    points.into_iter().collect()
}

/// Smallest finite gap in a sweep.
pub fn min_gap(points: &[SweepPoint]) -> Option<f64> {
    points
        .iter()
        .filter_map(|p| p.gap)
        .fold(None, |acc, g| Some(acc.map_or(g, |a: f64| a.min(g))))
}

/// Result of a randomized trade-off vindication sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct VindicationReport {
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub heisenberg_violations: usize,
    pub attainable_violations: usize,
    /// Largest observed shortfall product - bound (negative means below).
    pub worst_heisenberg_margin: f64,
    pub worst_attainable_margin: f64,
}

/// Draw `samples` random (full-rank state, observables, rank-1 measurement)
/// instances and count violations of the two trade-off inequalities beyond
/// 1e-7 slack. Sample k is generated from RNG stream (seed, k).
pub fn random_vindication_sweep(d: usize, samples: usize, seed: u64) -> Result<VindicationReport> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let basis = GeneratorBasis::new(d)?;
    let results = indexed_map(samples, |k| -> Result<(bool, bool, f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let rho = random_full_rank_state(d, &mut rng);
        let x = random_observable(&basis, &mut rng);
        let y = random_observable(&basis, &mut rng);
        let m = random_rank1_measurement(d, d * d, &mut rng);
        let eps = measurement_error(&rho, &x, &m, &basis)?;
        let eta = disturbance(&rho, &y, &m, &basis)?;
        let product = eps.product(&eta);
        let hb = heisenberg_bound(&rho, &x, &y)?;
        let ab = attainable_bound(&rho, &x, &y)?;
        let (h_ok, h_margin) = match product {
            ExtendedValue::Finite(p) => (p >= hb - 1e-7, p - hb),
            ExtendedValue::Infinite => (true, f64::INFINITY),
        };
        let (a_ok, a_margin) = match product {
            ExtendedValue::Finite(p) => (p >= ab - 1e-7, p - ab),
            ExtendedValue::Infinite => (true, f64::INFINITY),
        };
        Ok((h_ok, a_ok, h_margin, a_margin))
    });
    let mut report = VindicationReport {
        dim: d,
        samples,
        seed,
        heisenberg_violations: 0,
        attainable_violations: 0,
        worst_heisenberg_margin: f64::INFINITY,
        worst_attainable_margin: f64::INFINITY,
    };
    for r in results {
        let (h_ok, a_ok, hm, am) = r?;
        if !h_ok {
            report.heisenberg_violations += 1;
        }
        if !a_ok {
            report.attainable_violations += 1;
        }
        report.worst_heisenberg_margin = report.worst_heisenberg_margin.min(hm);
        report.worst_attainable_margin = report.worst_attainable_margin.min(am);
    }
    Ok(report)
}
