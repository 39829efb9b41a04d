//! States, observables, Kraus measurements and POVMs, together with outcome
//! statistics, post-measurement states and sequential composition.

use crate::linalg::{eigh, hermiticity_residual, trace_product};
use crate::su_basis::GeneratorBasis;
use crate::{c64, CMat, Error, RVec, Result};

pub const COMPLETENESS_TOL: f64 = 1e-10;
pub const UNITARITY_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are merged into one projective outcome.
pub const EIGENVALUE_MERGE_TOL: f64 = 1e-8;
/// Outcome probabilities below this are treated as zero.
pub const PROB_TOL: f64 = 1e-12;

/// Quantum state: Hermitian, unit trace, PSD.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: CMat,
}

impl DensityMatrix {
    pub fn new(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let res = hermiticity_residual(&matrix);
        if res > 1e-10 {
            return Err(Error::NotHermitian { residual: res });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitTrace { trace });
        }
        let (vals, _) = eigh(&matrix);
        if vals[0] < -1e-10 {
            return Err(Error::NotPsd { min_eig: vals[0] });
        }
        Ok(Self { matrix })
    }

    /// Maximally mixed state I/d.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: CMat::identity(d, d).map(|z| z * c64(1.0 / d as f64, 0.0)),
        }
    }

    /// Pure state from a normalized ket.
    pub fn pure(ket: &crate::CVec) -> Result<Self> {
        let n = ket.norm();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::NotUnitTrace { trace: n * n });
        }
        Self::new(ket * ket.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// `<A> = Tr(rho A)` for Hermitian A.
    pub fn expectation(&self, a: &CMat) -> f64 {
        trace_product(&self.matrix, a).re
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> RVec {
        eigh(&self.matrix).0
    }
}

/// Hermitian observable with its cached generator-basis decomposition
/// `X = x0 I + x^T lambda`.
#[derive(Debug, Clone)]
pub struct Observable {
    matrix: CMat,
    x0: f64,
    coords: RVec,
}

impl Observable {
    pub fn new(matrix: CMat, basis: &GeneratorBasis) -> Result<Self> {
        let (x0, coords) = basis.decompose_hermitian(&matrix)?;
        Ok(Self { matrix, x0, coords })
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    /// The vector x with `X = x0 I + x^T lambda`.
    pub fn coords(&self) -> &RVec {
        &self.coords
    }

    pub fn expectation(&self, rho: &DensityMatrix) -> f64 {
        rho.expectation(&self.matrix)
    }
}

/// Measurement model `{M_{i,a}}`; outcome `i` selects a sub-family of
/// (possibly rectangular) operators mapping `dim_in -> dim_out`.
#[derive(Debug, Clone)]
pub struct KrausMeasurement {
    outcomes: Vec<Vec<CMat>>,
    dim_in: usize,
    dim_out: usize,
}

impl KrausMeasurement {
    pub fn new(outcomes: Vec<Vec<CMat>>, dim_in: usize, dim_out: usize) -> Result<Self> {
        let mut sum = CMat::zeros(dim_in, dim_in);
        for ops in &outcomes {
            for m in ops {
                if m.ncols() != dim_in {
                    return Err(Error::DimensionMismatch {
                        expected: dim_in,
                        got: m.ncols(),
                    });
                }
                if m.nrows() != dim_out {
                    return Err(Error::DimensionMismatch {
                        expected: dim_out,
                        got: m.nrows(),
                    });
                }
                sum += m.adjoint() * m;
            }
        }
        let residual = (&sum - CMat::identity(dim_in, dim_in)).norm();
        if residual > COMPLETENESS_TOL {
            return Err(Error::IncompleteKraus { residual });
        }
        Ok(Self {
            outcomes,
            dim_in,
            dim_out,
        })
    }

    /// Single-outcome identity measurement on dimension d.
    pub fn identity(d: usize) -> Self {
        Self {
            outcomes: vec![vec![CMat::identity(d, d)]],
            dim_in: d,
            dim_out: d,
        }
    }

    pub fn outcomes(&self) -> &[Vec<CMat>] {
        &self.outcomes
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    /// Effect `E_i = sum_a M_{i,a}^dag M_{i,a}` for a single outcome.
    pub fn effect(&self, i: usize) -> CMat {
        let mut e = CMat::zeros(self.dim_in, self.dim_in);
        for m in &self.outcomes[i] {
            e += m.adjoint() * m;
        }
        e
    }

    /// Outcome probability `p_i = Tr(rho E_i)`.
    pub fn outcome_probability(&self, rho: &DensityMatrix, i: usize) -> f64 {
        let mut p = 0.0;
        for m in &self.outcomes[i] {
            p += trace_product(&(m * rho.matrix()), &m.adjoint()).re;
        }
        p.max(0.0)
    }

    /// Apply the channel `Lambda(A) = sum_{i,a} M A M^dag` to an arbitrary
    /// (not necessarily PSD) matrix on the input space.
    pub fn apply_channel(&self, a: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim_out, self.dim_out);
        for ops in &self.outcomes {
            for m in ops {
                out += m * a * m.adjoint();
            }
        }
        out
    }
}

/// POVM: PSD effects summing to I, with cached decompositions
/// `E_i = r_i I + v_i^T lambda`.
#[derive(Debug, Clone)]
pub struct Povm {
    effects: Vec<CMat>,
    r: Vec<f64>,
    v: Vec<RVec>,
    dim: usize,
}

impl Povm {
    /// Build directly from effects, validating PSD and completeness.
    pub fn new(effects: Vec<CMat>, basis: &GeneratorBasis) -> Result<Self> {
        let d = basis.dim();
        let mut sum = CMat::zeros(d, d);
        let mut r = Vec::with_capacity(effects.len());
        let mut v = Vec::with_capacity(effects.len());
        for e in &effects {
            let (vals, _) = eigh(e);
            if vals[0] < -1e-10 {
                return Err(Error::NotPsd { min_eig: vals[0] });
            }
            // Tr(E_i)/d is exactly the affine offset r_i
            let (ri, vi) = basis.decompose_hermitian(e)?;
            r.push(ri);
            v.push(vi);
            sum += e;
        }
        let residual = (&sum - CMat::identity(d, d)).norm();
        if residual > COMPLETENESS_TOL {
            return Err(Error::IncompleteKraus { residual });
        }
        Ok(Self { effects, r, v, dim: d })
    }

    pub fn effects(&self) -> &[CMat] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offsets(&self) -> &[f64] {
        &self.r
    }

    pub fn directions(&self) -> &[RVec] {
        &self.v
    }
}

/// `E_i = sum_a M_{i,a}^dag M_{i,a}` for every outcome.
pub fn povm_from_kraus(m: &KrausMeasurement, basis: &GeneratorBasis) -> Result<Povm> {
    if basis.dim() != m.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: m.dim_in(),
            got: basis.dim(),
        });
    }
    let effects = (0..m.num_outcomes()).map(|i| m.effect(i)).collect();
    Povm::new(effects, basis)
}

/// Outcome distribution `p_i = Tr(rho E_i)`, clamped at zero.
pub fn outcome_distribution(rho: &DensityMatrix, povm: &Povm) -> Result<RVec> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: rho.dim(),
        });
    }
    Ok(RVec::from_iterator(
        povm.len(),
        povm.effects().iter().map(|e| rho.expectation(e).max(0.0)),
    ))
}

/// Unconditional post-measurement state `rho' = sum_{i,a} M rho M^dag`.
pub fn post_measurement_state(rho: &DensityMatrix, m: &KrausMeasurement) -> Result<DensityMatrix> {
    if rho.dim() != m.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: m.dim_in(),
            got: rho.dim(),
        });
    }
    DensityMatrix::new(m.apply_channel(rho.matrix()))
}

/// Normalized conditional state for outcome `i`.
pub fn conditional_state(
    rho: &DensityMatrix,
    m: &KrausMeasurement,
    i: usize,
) -> Result<DensityMatrix> {
    let p = m.outcome_probability(rho, i);
    if p <= PROB_TOL {
        return Err(Error::ZeroProbabilityOutcome { outcome: i, prob: p });
    }
    let mut out = CMat::zeros(m.dim_out(), m.dim_out());
    for op in &m.outcomes()[i] {
        out += op * rho.matrix() * op.adjoint();
    }
    DensityMatrix::new(out.map(|z| z / c64(p, 0.0)))
}

/// Sequential composition: outcome pair (i, j) ordered i-major, operators
/// `A_{ij,ab} = N_{j,b} M_{i,a}`.
pub fn compose_sequential(
    m: &KrausMeasurement,
    n: &KrausMeasurement,
) -> Result<KrausMeasurement> {
    if m.dim_out() != n.dim_in() {
        return Err(Error::DimensionMismatch {
            expected: m.dim_out(),
            got: n.dim_in(),
        });
    }
    let mut outcomes = Vec::with_capacity(m.num_outcomes() * n.num_outcomes());
    for mi in m.outcomes() {
        for nj in n.outcomes() {
            let mut ops = Vec::with_capacity(mi.len() * nj.len());
            for a in mi {
                for b in nj {
                    ops.push(b * a);
                }
            }
            outcomes.push(ops);
        }
    }
    KrausMeasurement::new(outcomes, m.dim_in(), n.dim_out())
}

/// Projective measurement of an observable: one spectral projector per
/// distinct eigenvalue (gap tolerance [`EIGENVALUE_MERGE_TOL`]), outcomes
/// ordered by ascending eigenvalue. Also returns the merged eigenvalues.
pub fn projective_measurement(x: &Observable) -> (KrausMeasurement, Vec<f64>) {
    projective_measurement_of(x.matrix())
}

/// Same as [`projective_measurement`] but for a raw Hermitian matrix (used
/// for derived observables that live on a different space than the basis).
pub fn projective_measurement_of(h: &CMat) -> (KrausMeasurement, Vec<f64>) {
    let d = h.nrows();
    let (vals, vecs) = eigh(h);
    let mut outcomes: Vec<Vec<CMat>> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (vals[end] - vals[end - 1]).abs() <= EIGENVALUE_MERGE_TOL {
            end += 1;
        }
        let mut proj = CMat::zeros(d, d);
        let mut mean = 0.0;
        for j in start..end {
            let v = vecs.column(j);
            proj += v * v.adjoint();
            mean += vals[j];
        }
        alphas.push(mean / (end - start) as f64);
        outcomes.push(vec![proj]);
        start = end;
    }
    let m = KrausMeasurement::new(outcomes, d, d)
        .expect("spectral projectors resolve the identity");
    (m, alphas)
}

/// Replace every `M_{i,a}` by `U M_{i,a}` with a single global unitary.
pub fn apply_global_unitary(m: &KrausMeasurement, u: &CMat) -> Result<KrausMeasurement> {
    check_unitary(u, m.dim_out())?;
    let outcomes = m
        .outcomes()
        .iter()
        .map(|ops| ops.iter().map(|op| u * op).collect())
        .collect();
    KrausMeasurement::new(outcomes, m.dim_in(), m.dim_out())
}

/// Replace every `M_{i,a}` by `U_{i,a} M_{i,a}` with per-operator unitaries.
pub fn apply_outcome_unitaries(
    m: &KrausMeasurement,
    us: &[Vec<CMat>],
) -> Result<KrausMeasurement> {
    if us.len() != m.num_outcomes() {
        return Err(Error::LengthMismatch {
            expected: m.num_outcomes(),
            got: us.len(),
        });
    }
    let mut outcomes = Vec::with_capacity(m.num_outcomes());
    for (ops, u_ops) in m.outcomes().iter().zip(us) {
        if u_ops.len() != ops.len() {
            return Err(Error::LengthMismatch {
                expected: ops.len(),
                got: u_ops.len(),
            });
        }
        let mut new_ops = Vec::with_capacity(ops.len());
        for (op, u) in ops.iter().zip(u_ops) {
            check_unitary(u, m.dim_out())?;
            new_ops.push(u * op);
        }
        outcomes.push(new_ops);
    }
    KrausMeasurement::new(outcomes, m.dim_in(), m.dim_out())
}

fn check_unitary(u: &CMat, d: usize) -> Result<()> {
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: u.nrows(),
        });
    }
    let residual = (u.adjoint() * u - CMat::identity(d, d)).norm();
    if residual > UNITARITY_TOL {
        return Err(Error::NotUnitary { residual });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randgen::{random_full_rank_state, random_rank1_measurement, random_unitary};
    use crate::su_basis::BlochCoords;
    use crate::CVec;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis2() -> GeneratorBasis {
        GeneratorBasis::new(2).unwrap()
    }

    fn sigma(which: usize) -> CMat {
        let b = basis2();
        b.generator(which).map(|z| z * c64(std::f64::consts::SQRT_2, 0.0))
    }

    fn projector(k: usize) -> CMat {
        let mut m = CMat::zeros(2, 2);
        m[(k, k)] = c64(1.0, 0.0);
        m
    }

    fn sigma_z_measurement() -> KrausMeasurement {
        KrausMeasurement::new(vec![vec![projector(0)], vec![projector(1)]], 2, 2).unwrap()
    }

    #[test]
    fn povm_of_projectors_is_projectors() {
        let b = basis2();
        let m = sigma_z_measurement();
        let p = povm_from_kraus(&m, &b).unwrap();
        assert!((&p.effects()[0] - projector(0)).norm() < 1e-14);
        assert!((&p.effects()[1] - projector(1)).norm() < 1e-14);
    }

    #[test]
    fn povm_of_unitary_is_identity() {
        let b = basis2();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_unitary(2, &mut rng);
        let m = KrausMeasurement::new(vec![vec![u]], 2, 2).unwrap();
        let p = povm_from_kraus(&m, &b).unwrap();
        assert!((&p.effects()[0] - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn povm_random_kraus_qutrit_sums_to_identity() {
        let b = GeneratorBasis::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = random_rank1_measurement(3, 9, &mut rng);
        let p = povm_from_kraus(&m, &b).unwrap();
        let mut sum = CMat::zeros(3, 3);
        for e in p.effects() {
            sum += e;
        }
        assert!((sum - CMat::identity(3, 3)).norm() < 1e-10);
    }

    #[test]
    fn distribution_maximally_mixed() {
        let b = basis2();
        let p = povm_from_kraus(&sigma_z_measurement(), &b).unwrap();
        let dist = outcome_distribution(&DensityMatrix::maximally_mixed(2), &p).unwrap();
        assert_abs_diff_eq!(dist[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(dist[1], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn distribution_bloch_z() {
        let b = basis2();
        let r = 0.4;
        let mut t = crate::RVec::zeros(3);
        t[2] = r / std::f64::consts::SQRT_2;
        let rho = b.state_from_coords(&BlochCoords(t)).unwrap();
        let p = povm_from_kraus(&sigma_z_measurement(), &b).unwrap();
        let dist = outcome_distribution(&rho, &p).unwrap();
        assert_abs_diff_eq!(dist[0], (1.0 + r) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dist[1], (1.0 - r) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn distribution_affine_form_agrees() {
        let b = GeneratorBasis::new(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let rho = random_full_rank_state(3, &mut rng);
            let m = random_rank1_measurement(3, 9, &mut rng);
            let p = povm_from_kraus(&m, &b).unwrap();
            let theta = b.coords_from_state(&rho).unwrap();
            let dist = outcome_distribution(&rho, &p).unwrap();
            let mut total = 0.0;
            for i in 0..p.len() {
                let affine = p.offsets()[i] + p.directions()[i].dot(&theta.0);
                assert_abs_diff_eq!(dist[i], affine, epsilon = 1e-12);
                total += dist[i];
            }
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn post_measurement_unitary_conjugates() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let u = random_unitary(2, &mut rng);
        let rho = random_full_rank_state(2, &mut rng);
        let m = KrausMeasurement::new(vec![vec![u.clone()]], 2, 2).unwrap();
        let out = post_measurement_state(&rho, &m).unwrap();
        let expect = &u * rho.matrix() * u.adjoint();
        assert!((out.matrix() - expect).norm() < 1e-12);
    }

    #[test]
    fn post_measurement_projective_dephases() {
        let b = basis2();
        let mut t = crate::RVec::zeros(3);
        t[0] = 0.2;
        t[1] = 0.1;
        t[2] = 0.3;
        let rho = b.state_from_coords(&BlochCoords(t)).unwrap();
        let out = post_measurement_state(&rho, &sigma_z_measurement()).unwrap();
        let coords = b.coords_from_state(&out).unwrap();
        assert!(coords.0[0].abs() < 1e-12);
        assert!(coords.0[1].abs() < 1e-12);
        assert_abs_diff_eq!(coords.0[2], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn replacement_channel_forgets_input() {
        // Kraus {|phi><k|}: output is |phi><phi| regardless of input
        let phi = CVec::from_vec(vec![c64(0.6, 0.0), c64(0.8, 0.0)]);
        let ops: Vec<Vec<CMat>> = (0..2)
            .map(|k| {
                let mut bra = CVec::zeros(2);
                bra[k] = c64(1.0, 0.0);
                vec![&phi * bra.adjoint()]
            })
            .collect();
        let m = KrausMeasurement::new(ops, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..5 {
            let rho = random_full_rank_state(2, &mut rng);
            let out = post_measurement_state(&rho, &m).unwrap();
            assert!((out.matrix() - &phi * phi.adjoint()).norm() < 1e-12);
        }
    }

    #[test]
    fn conditional_state_projective() {
        let rho = DensityMatrix::maximally_mixed(2);
        let cond = conditional_state(&rho, &sigma_z_measurement(), 0).unwrap();
        assert!((cond.matrix() - projector(0)).norm() < 1e-12);
    }

    #[test]
    fn conditional_state_zero_probability_errors() {
        let rho = DensityMatrix::new(projector(0)).unwrap();
        assert!(matches!(
            conditional_state(&rho, &sigma_z_measurement(), 1),
            Err(Error::ZeroProbabilityOutcome { .. })
        ));
    }

    #[test]
    fn conditional_state_normalized_random_qutrit() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let rho = random_full_rank_state(3, &mut rng);
        let m = random_rank1_measurement(3, 9, &mut rng);
        for i in 0..m.num_outcomes() {
            let cond = conditional_state(&rho, &m, i).unwrap();
            assert_abs_diff_eq!(cond.matrix().trace().re, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn compose_with_identity_preserves_effects() {
        let b = basis2();
        let m = sigma_z_measurement();
        let a = compose_sequential(&m, &KrausMeasurement::identity(2)).unwrap();
        let pm = povm_from_kraus(&m, &b).unwrap();
        let pa = povm_from_kraus(&a, &b).unwrap();
        assert_eq!(pa.len(), pm.len());
        for (em, ea) in pm.effects().iter().zip(pa.effects()) {
            assert!((em - ea).norm() < 1e-13);
        }
    }

    #[test]
    fn compose_marginals_match() {
        let b = GeneratorBasis::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let rho = random_full_rank_state(2, &mut rng);
            let m = random_rank1_measurement(2, 4, &mut rng);
            let n = random_rank1_measurement(2, 4, &mut rng);
            let a = compose_sequential(&m, &n).unwrap();
            let pa = povm_from_kraus(&a, &b).unwrap();
            let r = outcome_distribution(&rho, &pa).unwrap();
            let pm = povm_from_kraus(&m, &b).unwrap();
            let p = outcome_distribution(&rho, &pm).unwrap();
            let rho_post = post_measurement_state(&rho, &m).unwrap();
            let pn = povm_from_kraus(&n, &b).unwrap();
            let q = outcome_distribution(&rho_post, &pn).unwrap();
            let nn = n.num_outcomes();
            for i in 0..m.num_outcomes() {
                let row: f64 = (0..nn).map(|j| r[i * nn + j]).sum();
                assert_abs_diff_eq!(row, p[i], epsilon = 1e-10);
            }
            for j in 0..nn {
                let col: f64 = (0..m.num_outcomes()).map(|i| r[i * nn + j]).sum();
                assert_abs_diff_eq!(col, q[j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn compose_projective_z_then_x_on_mixed() {
        let b = basis2();
        let x = Observable::new(sigma(0), &b).unwrap();
        let (mx, _) = projective_measurement(&x);
        let a = compose_sequential(&sigma_z_measurement(), &mx).unwrap();
        let pa = povm_from_kraus(&a, &b).unwrap();
        let r = outcome_distribution(&DensityMatrix::maximally_mixed(2), &pa).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(r[i], 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn projective_sigma_z() {
        let b = basis2();
        let x = Observable::new(sigma(2), &b).unwrap();
        let (m, alphas) = projective_measurement(&x);
        assert_eq!(alphas, vec![-1.0, 1.0]);
        assert!((&m.outcomes()[0][0] - projector(1)).norm() < 1e-12);
        assert!((&m.outcomes()[1][0] - projector(0)).norm() < 1e-12);
    }

    #[test]
    fn projective_identity_single_outcome() {
        let b = basis2();
        let x = Observable::new(CMat::identity(2, 2), &b).unwrap();
        let (m, alphas) = projective_measurement(&x);
        assert_eq!(m.num_outcomes(), 1);
        assert_eq!(alphas, vec![1.0]);
        assert!((&m.outcomes()[0][0] - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn projective_merges_near_degenerate() {
        let b = GeneratorBasis::new(3).unwrap();
        let mut d = CMat::zeros(3, 3);
        d[(0, 0)] = c64(1.0, 0.0);
        d[(1, 1)] = c64(1.0 + 1e-12, 0.0);
        d[(2, 2)] = c64(2.0, 0.0);
        let x = Observable::new(d, &b).unwrap();
        let (m, alphas) = projective_measurement(&x);
        assert_eq!(m.num_outcomes(), 2);
        assert_abs_diff_eq!(alphas[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_unitary_is_noop() {
        let m = sigma_z_measurement();
        let m2 = apply_global_unitary(&m, &CMat::identity(2, 2)).unwrap();
        for (a, b) in m.outcomes().iter().zip(m2.outcomes()) {
            assert!((&a[0] - &b[0]).norm() < 1e-15);
        }
    }

    #[test]
    fn outcome_unitaries_preserve_povm() {
        let b = basis2();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let m = random_rank1_measurement(2, 4, &mut rng);
        let us: Vec<Vec<CMat>> = m
            .outcomes()
            .iter()
            .map(|ops| ops.iter().map(|_| random_unitary(2, &mut rng)).collect())
            .collect();
        let m2 = apply_outcome_unitaries(&m, &us).unwrap();
        let p1 = povm_from_kraus(&m, &b).unwrap();
        let p2 = povm_from_kraus(&m2, &b).unwrap();
        for (e1, e2) in p1.effects().iter().zip(p2.effects()) {
            assert!((e1 - e2).norm() < 1e-12);
        }
    }

    #[test]
    fn global_unitary_preserves_output_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let rho = random_full_rank_state(2, &mut rng);
        let m = random_rank1_measurement(2, 4, &mut rng);
        let u = random_unitary(2, &mut rng);
        let m2 = apply_global_unitary(&m, &u).unwrap();
        let e1 = post_measurement_state(&rho, &m).unwrap().eigenvalues();
        let e2 = post_measurement_state(&rho, &m2).unwrap().eigenvalues();
        assert!((e1 - e2).norm() < 1e-10);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = sigma_z_measurement();
        let bad = CMat::identity(2, 2).map(|z| z * c64(2.0, 0.0));
        assert!(matches!(
            apply_global_unitary(&m, &bad),
            Err(Error::NotUnitary { .. })
        ));
    }
}
