//! Classical and quantum (SLD/RLD) Fisher information over the generator
//! coordinates, with support-aware pseudoinverse quadratic forms.

use crate::errdist::ExtendedValue;
use crate::linalg::{eigh, hermiticity_residual, trace_product};
use crate::quantum_core::{DensityMatrix, KrausMeasurement, Povm, PROB_TOL};
use crate::su_basis::GeneratorBasis;
use crate::{c64, CMat, Error, RVec, Result};

/// Eigenvalues of a Fisher matrix at or below this fraction of the largest
/// one are treated as zero when forming the pseudoinverse.
pub const SUPPORT_CUTOFF: f64 = 1e-10;
/// Divisor cutoff `e_j + e_k` in the SLD equation.
pub const SLD_DIVISOR_TOL: f64 = 1e-12;
/// Derivative components on the kernel-kernel block above this flag the
/// direction as leaving the state support.
pub const OFF_SUPPORT_TOL: f64 = 1e-10;
/// Relative size of the component of x outside the support that still
/// counts as "in support" for the quadratic form.
pub const QUADFORM_SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherKind {
    Classical,
    Sld,
    Rld,
}

/// A PSD Fisher information matrix over the theta coordinates, with its
/// eigendecomposition cached for support queries and pseudoinverse forms.
#[derive(Debug, Clone)]
pub struct FisherMatrix {
    kind: FisherKind,
    matrix: CMat,
    evals: RVec,
    evecs: CMat,
    rank: usize,
    /// Coordinate directions flagged as leaving the state support; the
    /// corresponding rows/columns are zero and any vector with weight on
    /// them is outside the support by construction.
    out_of_support: Vec<usize>,
}

impl FisherMatrix {
    pub fn new(kind: FisherKind, matrix: CMat, out_of_support: Vec<usize>) -> Result<Self> {
        let res = hermiticity_residual(&matrix);
        if res > 1e-10 {
            return Err(Error::NotHermitian { residual: res });
        }
        let (evals, evecs) = eigh(&matrix);
        let n = evals.len();
        let max_ev = evals.as_slice().iter().copied().fold(0.0f64, f64::max);
        if n > 0 && evals[0] < -1e-9 * max_ev.max(1.0) {
            return Err(Error::NotPsd { min_eig: evals[0] });
        }
        let cutoff = SUPPORT_CUTOFF * max_ev;
        let rank = evals.as_slice().iter().filter(|&&e| e > cutoff).count();
        Ok(Self {
            kind,
            matrix,
            evals,
            evecs,
            rank,
            out_of_support,
        })
    }

    pub fn from_real(kind: FisherKind, matrix: &crate::RMat, out_of_support: Vec<usize>) -> Result<Self> {
        Self::new(kind, matrix.map(|x| c64(x, 0.0)), out_of_support)
    }

    pub fn kind(&self) -> FisherKind {
        self.kind
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Real part of the matrix (exact for classical and SLD kinds).
    pub fn real_matrix(&self) -> crate::RMat {
        self.matrix.map(|z| z.re)
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn out_of_support(&self) -> &[usize] {
        &self.out_of_support
    }

    /// `x^T J^+ x` when x lies in the support, INFINITE otherwise.
    pub fn quadform_pinv(&self, x: &RVec) -> Result<ExtendedValue> {
        if x.len() != self.size() {
            return Err(Error::LengthMismatch {
                expected: self.size(),
                got: x.len(),
            });
        }
        let xnorm = x.norm();
        if xnorm == 0.0 {
            return Ok(ExtendedValue::Finite(0.0));
        }
        // weight on explicitly flagged directions is outside the support
        let flagged_sq: f64 = self.out_of_support.iter().map(|&mu| x[mu] * x[mu]).sum();
        if flagged_sq.sqrt() > QUADFORM_SUPPORT_TOL * xnorm {
            return Ok(ExtendedValue::Infinite);
        }
        let n = self.size();
        let max_ev = self.evals.as_slice().iter().copied().fold(0.0f64, f64::max);
        let cutoff = SUPPORT_CUTOFF * max_ev;
        let xc = x.map(|v| c64(v, 0.0));
        let mut value = 0.0;
        // subtract the support projection vector-wise: the remainder norm is
        // stable, unlike the difference of two squared norms
        let mut remainder = xc.clone();
        for k in 0..n {
            if self.evals[k] > cutoff {
                let coeff = self.evecs.column(k).dotc(&xc);
                value += coeff.norm_sqr() / self.evals[k];
                remainder -= self.evecs.column(k) * coeff;
            }
        }
        if remainder.norm() > QUADFORM_SUPPORT_TOL * xnorm {
            return Ok(ExtendedValue::Infinite);
        }
        Ok(ExtendedValue::Finite(value.max(0.0)))
    }

    /// `J^+ x`: the pseudoinverse applied to the support component of x.
    pub fn pinv_apply(&self, x: &RVec) -> Result<RVec> {
        if x.len() != self.size() {
            return Err(Error::LengthMismatch {
                expected: self.size(),
                got: x.len(),
            });
        }
        let n = self.size();
        let max_ev = self.evals.as_slice().iter().copied().fold(0.0f64, f64::max);
        let cutoff = SUPPORT_CUTOFF * max_ev;
        let xc = x.map(|v| c64(v, 0.0));
        let mut out = crate::CVec::zeros(n);
        for k in 0..n {
            if self.evals[k] > cutoff {
                let col = self.evecs.column(k);
                let coeff = col.dotc(&xc) / c64(self.evals[k], 0.0);
                out += col * coeff;
            }
        }
        Ok(out.map(|z| z.re))
    }
}

/// Matrix order test `A <= B`: min eigenvalue of B - A above
/// `-1e-8 * max(1, ||B||)`.
pub fn psd_leq(a: &FisherMatrix, b: &FisherMatrix) -> Result<bool> {
    if a.size() != b.size() {
        return Err(Error::DimensionMismatch {
            expected: b.size(),
            got: a.size(),
        });
    }
    let diff = b.matrix() - a.matrix();
    let (vals, _) = eigh(&diff);
    Ok(vals[0] >= -1e-8 * b.matrix().norm().max(1.0))
}

/// A parameterized family: the base state and the derivative matrices
/// `D_mu = d rho / d theta_mu`. For the identity parameterization on the
/// input space `D_mu = lambda_mu`; for a channel pushforward
/// `D_mu = Lambda(lambda_mu)`.
#[derive(Debug, Clone)]
pub struct StateFamily {
    base: DensityMatrix,
    derivs: Vec<CMat>,
}

impl StateFamily {
    /// Identity parameterization of `rho` itself.
    pub fn identity(rho: &DensityMatrix, basis: &GeneratorBasis) -> Result<Self> {
        if rho.dim() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: rho.dim(),
            });
        }
        Ok(Self {
            base: rho.clone(),
            derivs: basis.generators().to_vec(),
        })
    }

    /// Pushforward through the channel of `m`: base is the unconditional
    /// post-measurement state, derivatives are the channel images of the
    /// generators. A constant channel therefore yields all-zero derivatives.
    pub fn pushforward(
        rho: &DensityMatrix,
        m: &KrausMeasurement,
        basis: &GeneratorBasis,
    ) -> Result<Self> {
        if rho.dim() != m.dim_in() || basis.dim() != m.dim_in() {
            return Err(Error::DimensionMismatch {
                expected: m.dim_in(),
                got: rho.dim(),
            });
        }
        let base = crate::quantum_core::post_measurement_state(rho, m)?;
        let derivs = basis
            .generators()
            .iter()
            .map(|g| m.apply_channel(g))
            .collect();
        Ok(Self { base, derivs })
    }

    pub fn base(&self) -> &DensityMatrix {
        &self.base
    }

    pub fn derivs(&self) -> &[CMat] {
        &self.derivs
    }

    pub fn num_params(&self) -> usize {
        self.derivs.len()
    }
}

/// Classical Fisher information of a POVM at `rho`, via the affine form
/// `J = sum_i p_i^{-1} v_i v_i^T` over outcomes with `p_i > 1e-12`.
pub fn classical_fisher(rho: &DensityMatrix, povm: &Povm) -> Result<FisherMatrix> {
    if rho.dim() != povm.dim() {
        return Err(Error::DimensionMismatch {
            expected: povm.dim(),
            got: rho.dim(),
        });
    }
    let p = crate::quantum_core::outcome_distribution(rho, povm)?;
    let n = povm.dim() * povm.dim() - 1;
    let mut j = crate::RMat::zeros(n, n);
    for i in 0..povm.len() {
        if p[i] > PROB_TOL {
            let v = &povm.directions()[i];
            j += v * v.transpose() / p[i];
        }
    }
    FisherMatrix::from_real(FisherKind::Classical, &j, Vec::new())
}

/// Classical Fisher information of a POVM (given as raw effects on the
/// family's output space) with respect to an arbitrary state family:
/// `J_{mu nu} = sum_i (Tr D_mu E_i)(Tr D_nu E_i) / p_i`.
pub fn classical_fisher_family(family: &StateFamily, effects: &[CMat]) -> Result<FisherMatrix> {
    let d = family.base().dim();
    for e in effects {
        if e.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: e.nrows(),
            });
        }
    }
    let n = family.num_params();
    let mut j = crate::RMat::zeros(n, n);
    for e in effects {
        let p = family.base().expectation(e);
        if p <= PROB_TOL {
            continue;
        }
        let grad = RVec::from_iterator(
            n,
            family.derivs().iter().map(|dm| trace_product(dm, e).re),
        );
        j += &grad * grad.transpose() / p;
    }
    FisherMatrix::from_real(FisherKind::Classical, &j, Vec::new())
}

/// SLD operators of a family, solved in the eigenbasis of the base state.
pub struct SldOperators {
    pub operators: Vec<CMat>,
    /// Directions whose derivative has weight on the kernel-kernel block of
    /// the base state; the SLD equation has no solution there.
    pub out_of_support: Vec<usize>,
}

pub fn sld_operators(family: &StateFamily) -> SldOperators {
    let (evals, evecs) = eigh(family.base().matrix());
    let d = family.base().dim();
    let e = |j: usize| evals[j].max(0.0);
    let mut operators = Vec::with_capacity(family.num_params());
    let mut out_of_support = Vec::new();
    for (mu, dm) in family.derivs().iter().enumerate() {
        let dt = evecs.adjoint() * dm * &evecs;
        let mut lt = CMat::zeros(d, d);
        let mut flagged = false;
        for j in 0..d {
            for k in 0..d {
                let div = e(j) + e(k);
                if div > SLD_DIVISOR_TOL {
                    lt[(j, k)] = dt[(j, k)] * c64(2.0 / div, 0.0);
                } else if dt[(j, k)].norm() > OFF_SUPPORT_TOL {
                    flagged = true;
                }
            }
        }
        if flagged {
            out_of_support.push(mu);
        }
        operators.push(&evecs * lt * evecs.adjoint());
    }
    SldOperators {
        operators,
        out_of_support,
    }
}

/// SLD Fisher information `[J_S]_{mu nu} = Re Tr(rho L_mu L_nu)`. Flagged
/// directions get zero rows/columns and are recorded in the support info.
pub fn sld_fisher(family: &StateFamily) -> Result<FisherMatrix> {
    let sld = sld_operators(family);
    let n = family.num_params();
    let rho = family.base().matrix();
    let flagged: std::collections::HashSet<usize> = sld.out_of_support.iter().copied().collect();
    let mut j = crate::RMat::zeros(n, n);
    // rho L_mu precomputed once per row
    for mu in 0..n {
        if flagged.contains(&mu) {
            continue;
        }
        let rl = rho * &sld.operators[mu];
        for nu in mu..n {
            if flagged.contains(&nu) {
                continue;
            }
            let val = trace_product(&rl, &sld.operators[nu]).re;
            j[(mu, nu)] = val;
            j[(nu, mu)] = val;
        }
    }
    FisherMatrix::from_real(FisherKind::Sld, &j, sld.out_of_support)
}

/// RLD Fisher information `[J_R]_{mu nu} = Tr(rho L'_nu L'_mu)` with
/// `L'_mu = rho^{-1} D_mu`; defined only for full-rank base states.
pub fn rld_fisher(family: &StateFamily) -> Result<FisherMatrix> {
    let (evals, evecs) = eigh(family.base().matrix());
    if evals[0] <= 1e-10 {
        return Err(Error::RankDeficientState { min_eig: evals[0] });
    }
    let d = family.base().dim();
    let mut inv = CMat::zeros(d, d);
    for j in 0..d {
        inv[(j, j)] = c64(1.0 / evals[j], 0.0);
    }
    let rho_inv = &evecs * inv * evecs.adjoint();
    let ops: Vec<CMat> = family.derivs().iter().map(|dm| &rho_inv * dm).collect();
    let n = family.num_params();
    let rho = family.base().matrix();
    let mut jr = CMat::zeros(n, n);
    for mu in 0..n {
        for nu in 0..n {
            jr[(mu, nu)] = trace_product(&(rho * &ops[nu]), &ops[mu]);
        }
    }
    FisherMatrix::new(FisherKind::Rld, jr, Vec::new())
}

/// The inverses of the SLD and RLD Fisher matrices for the identity family,
/// i.e. the symmetrized and non-symmetrized correlation matrices of the
/// generators: `[C_s]_{mu nu} = <{l_mu, l_nu}>/2 - <l_mu><l_nu>` and
/// `[C]_{mu nu} = <l_mu l_nu> - <l_mu><l_nu>`.
pub fn inverse_correlation_matrices(
    rho: &DensityMatrix,
    basis: &GeneratorBasis,
) -> (crate::RMat, CMat) {
    let n = basis.len();
    let means: Vec<f64> = basis
        .generators()
        .iter()
        .map(|g| rho.expectation(g))
        .collect();
    let mut cs = crate::RMat::zeros(n, n);
    let mut c = CMat::zeros(n, n);
    for mu in 0..n {
        for nu in 0..n {
            let second = trace_product(
                &(rho.matrix() * basis.generator(mu)),
                basis.generator(nu),
            );
            // <l_mu l_nu> = Tr(rho l_mu l_nu)
            c[(mu, nu)] = second - c64(means[mu] * means[nu], 0.0);
            cs[(mu, nu)] = second.re - means[mu] * means[nu];
        }
    }
    (cs, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_core::{povm_from_kraus, projective_measurement, Observable};
    use crate::randgen::{random_full_rank_state, random_observable, random_rank1_measurement};
    use crate::su_basis::BlochCoords;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis(d: usize) -> GeneratorBasis {
        GeneratorBasis::new(d).unwrap()
    }

    fn bloch_z_state(b: &GeneratorBasis, r: f64) -> DensityMatrix {
        let mut t = RVec::zeros(3);
        t[2] = r / std::f64::consts::SQRT_2;
        b.state_from_coords(&BlochCoords(t)).unwrap()
    }

    fn sigma_obs(b: &GeneratorBasis, which: usize) -> Observable {
        let m = b
            .generator(which)
            .map(|z| z * c64(std::f64::consts::SQRT_2, 0.0));
        Observable::new(m, b).unwrap()
    }

    /// Independent finite-difference oracle for the classical Fisher matrix:
    /// central differences of `p_i(theta) = Tr(rho(theta) E_i)` computed from
    /// reconstructed matrices, never through the affine shortcut.
    fn fd_classical_fisher(
        b: &GeneratorBasis,
        rho: &DensityMatrix,
        povm: &Povm,
        step: f64,
    ) -> crate::RMat {
        let theta = b.coords_from_state(rho).unwrap().0;
        let n = b.len();
        let prob = |t: &RVec, i: usize| -> f64 {
            let m = b.reconstruct(1.0 / b.dim() as f64, t).unwrap();
            crate::linalg::trace_product(&m, &povm.effects()[i]).re
        };
        let mut grads = vec![RVec::zeros(n); povm.len()];
        for mu in 0..n {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[mu] += step;
            tm[mu] -= step;
            for i in 0..povm.len() {
                grads[i][mu] = (prob(&tp, i) - prob(&tm, i)) / (2.0 * step);
            }
        }
        let mut j = crate::RMat::zeros(n, n);
        for i in 0..povm.len() {
            let p = prob(&theta, i);
            if p > 1e-12 {
                j += &grads[i] * grads[i].transpose() / p;
            }
        }
        j
    }

    #[test]
    fn classical_fisher_projective_z() {
        let b = basis(2);
        let r = 0.6;
        let rho = bloch_z_state(&b, r);
        let (m, _) = projective_measurement(&sigma_obs(&b, 2));
        let povm = povm_from_kraus(&m, &b).unwrap();
        let j = classical_fisher(&rho, &povm).unwrap();
        let jr = j.real_matrix();
        let expect = 2.0 / (1.0 - r * r);
        assert_abs_diff_eq!(jr[(2, 2)], expect, epsilon = 1e-10);
        assert_eq!(j.rank(), 1);
        // matches finite differences
        let fd = fd_classical_fisher(&b, &rho, &povm, 1e-6);
        assert!((jr - fd).norm() < 1e-6 * expect);
    }

    #[test]
    fn classical_fisher_trivial_povm_is_zero() {
        let b = basis(2);
        let povm = Povm::new(vec![CMat::identity(2, 2)], &b).unwrap();
        let j = classical_fisher(&DensityMatrix::maximally_mixed(2), &povm).unwrap();
        assert!(j.matrix().norm() < 1e-15);
        assert_eq!(j.rank(), 0);
    }

    #[test]
    fn classical_fisher_matches_fd_oracle_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in [2usize, 3] {
            let b = basis(d);
            for _ in 0..10 {
                let rho = random_full_rank_state(d, &mut rng);
                let m = random_rank1_measurement(d, d * d, &mut rng);
                let povm = povm_from_kraus(&m, &b).unwrap();
                let j = classical_fisher(&rho, &povm).unwrap();
                let fd = fd_classical_fisher(&b, &rho, &povm, 1e-6);
                let rel = (j.real_matrix() - &fd).norm() / fd.norm();
                assert!(rel < 1e-6, "relative fd mismatch {rel}");
            }
        }
    }

    #[test]
    fn sld_maximally_mixed_is_scaled_generators() {
        for d in [2usize, 3] {
            let b = basis(d);
            let rho = DensityMatrix::maximally_mixed(d);
            let fam = StateFamily::identity(&rho, &b).unwrap();
            let sld = sld_operators(&fam);
            assert!(sld.out_of_support.is_empty());
            for (mu, l) in sld.operators.iter().enumerate() {
                let expect = b.generator(mu).map(|z| z * c64(d as f64, 0.0));
                assert!((l - expect).norm() < 1e-10);
            }
            let j = sld_fisher(&fam).unwrap();
            let expect = crate::RMat::identity(b.len(), b.len()) * d as f64;
            assert!((j.real_matrix() - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn sld_residual_full_rank_qubit() {
        let b = basis(2);
        let rho = bloch_z_state(&b, 0.7);
        let fam = StateFamily::identity(&rho, &b).unwrap();
        let sld = sld_operators(&fam);
        for (mu, l) in sld.operators.iter().enumerate() {
            let resid = fam.derivs()[mu].clone()
                - crate::linalg::anticommutator(rho.matrix(), l).map(|z| z * c64(0.5, 0.0));
            assert!(resid.norm() < 1e-10, "residual {} for mu={mu}", resid.norm());
        }
    }

    #[test]
    fn sld_pure_state_flags_off_support_direction() {
        let b = basis(2);
        let mut t = RVec::zeros(3);
        t[2] = std::f64::consts::FRAC_1_SQRT_2;
        let rho = b.state_from_coords(&BlochCoords(t)).unwrap(); // |0><0|
        let fam = StateFamily::identity(&rho, &b).unwrap();
        let sld = sld_operators(&fam);
        // lambda_3 has weight on the |1><1| kernel block
        assert!(sld.out_of_support.contains(&2));
    }

    #[test]
    fn sld_fisher_inverse_is_cs_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for d in [2usize, 3] {
            let b = basis(d);
            let rho = random_full_rank_state(d, &mut rng);
            let fam = StateFamily::identity(&rho, &b).unwrap();
            let j = sld_fisher(&fam).unwrap();
            let (cs, _) = inverse_correlation_matrices(&rho, &b);
            let prod = j.real_matrix() * cs;
            let eye = crate::RMat::identity(b.len(), b.len());
            assert!((prod - eye).norm() < 1e-8);
        }
    }

    #[test]
    fn sld_fisher_constant_family_is_zero() {
        let _b = basis(2);
        let rho = DensityMatrix::maximally_mixed(2);
        let fam = StateFamily {
            base: rho,
            derivs: vec![CMat::zeros(2, 2); 3],
        };
        let j = sld_fisher(&fam).unwrap();
        assert!(j.matrix().norm() < 1e-15);
    }

    #[test]
    fn rld_inverse_is_c_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for d in [2usize, 3] {
            let b = basis(d);
            let rho = random_full_rank_state(d, &mut rng);
            let fam = StateFamily::identity(&rho, &b).unwrap();
            let j = rld_fisher(&fam).unwrap();
            let (_, c) = inverse_correlation_matrices(&rho, &b);
            let prod = j.matrix() * c;
            let eye = CMat::identity(b.len(), b.len());
            assert!((prod - eye).norm() < 1e-8);
        }
    }

    #[test]
    fn rld_maximally_mixed() {
        let b = basis(3);
        let rho = DensityMatrix::maximally_mixed(3);
        let fam = StateFamily::identity(&rho, &b).unwrap();
        let j = rld_fisher(&fam).unwrap();
        let expect = CMat::identity(8, 8).map(|z| z * c64(3.0, 0.0));
        assert!((j.matrix() - expect).norm() < 1e-10);
    }

    #[test]
    fn rld_pure_state_errors() {
        let b = basis(2);
        let mut t = RVec::zeros(3);
        t[2] = std::f64::consts::FRAC_1_SQRT_2;
        let rho = b.state_from_coords(&BlochCoords(t)).unwrap();
        let fam = StateFamily::identity(&rho, &b).unwrap();
        assert!(matches!(
            rld_fisher(&fam),
            Err(Error::RankDeficientState { .. })
        ));
    }

    #[test]
    fn correlation_matrices_maximally_mixed() {
        let b = basis(3);
        let rho = DensityMatrix::maximally_mixed(3);
        let (cs, c) = inverse_correlation_matrices(&rho, &b);
        let eye = crate::RMat::identity(8, 8) / 3.0;
        assert!((cs - &eye).norm() < 1e-12);
        assert!((c - eye.map(|x| c64(x, 0.0))).norm() < 1e-12);
    }

    #[test]
    fn correlation_quadratic_forms_match_variance_and_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let b = basis(3);
        for _ in 0..20 {
            let rho = random_full_rank_state(3, &mut rng);
            let x = random_observable(&b, &mut rng);
            let y = random_observable(&b, &mut rng);
            let (cs, c) = inverse_correlation_matrices(&rho, &b);
            let xv = x.coords();
            let yv = y.coords();
            // x^T C_s x = (Delta X)^2
            let var = rho.expectation(&(x.matrix() * x.matrix()))
                - rho.expectation(x.matrix()).powi(2);
            assert_abs_diff_eq!((xv.transpose() * &cs * xv)[(0, 0)], var, epsilon = 1e-8);
            // x^T C_s y = C_s(X, Y)
            let cov_s = 0.5
                * rho.expectation(&crate::linalg::anticommutator(x.matrix(), y.matrix()))
                - rho.expectation(x.matrix()) * rho.expectation(y.matrix());
            assert_abs_diff_eq!((xv.transpose() * &cs * yv)[(0, 0)], cov_s, epsilon = 1e-8);
            // x^T C y = C(X, Y) (complex in general)
            let xc = xv.map(|v| c64(v, 0.0));
            let yc = yv.map(|v| c64(v, 0.0));
            let lhs = (xc.transpose() * &c * yc)[(0, 0)];
            let rhs = trace_product(&(rho.matrix() * x.matrix()), y.matrix())
                - c64(
                    rho.expectation(x.matrix()) * rho.expectation(y.matrix()),
                    0.0,
                );
            assert!((lhs - rhs).norm() < 1e-8);
        }
    }

    #[test]
    fn quadform_examples() {
        let b = basis(2);
        let r = 0.5;
        let rho = bloch_z_state(&b, r);
        let (m, _) = projective_measurement(&sigma_obs(&b, 2));
        let povm = povm_from_kraus(&m, &b).unwrap();
        let j = classical_fisher(&rho, &povm).unwrap();
        // x = sqrt(2) e3 (that's sigma_z): quadform = 1 - r^2
        let mut x = RVec::zeros(3);
        x[2] = std::f64::consts::SQRT_2;
        match j.quadform_pinv(&x).unwrap() {
            ExtendedValue::Finite(v) => assert_abs_diff_eq!(v, 1.0 - r * r, epsilon = 1e-10),
            ExtendedValue::Infinite => panic!("expected finite"),
        }
        // x = sqrt(2) e1 (sigma_x) is off support
        let mut x = RVec::zeros(3);
        x[0] = std::f64::consts::SQRT_2;
        assert_eq!(j.quadform_pinv(&x).unwrap(), ExtendedValue::Infinite);
        // zero vector on any matrix gives zero
        let eye = FisherMatrix::from_real(
            FisherKind::Classical,
            &crate::RMat::identity(3, 3),
            Vec::new(),
        )
        .unwrap();
        assert_eq!(
            eye.quadform_pinv(&RVec::zeros(3)).unwrap(),
            ExtendedValue::Finite(0.0)
        );
    }

    #[test]
    fn psd_leq_classical_below_sld() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for d in [2usize, 3] {
            let b = basis(d);
            for _ in 0..20 {
                let rho = random_full_rank_state(d, &mut rng);
                let m = random_rank1_measurement(d, d * d, &mut rng);
                let povm = povm_from_kraus(&m, &b).unwrap();
                let j = classical_fisher(&rho, &povm).unwrap();
                let js = sld_fisher(&StateFamily::identity(&rho, &b).unwrap()).unwrap();
                assert!(psd_leq(&j, &js).unwrap());
                assert!(psd_leq(&j, &j).unwrap());
            }
        }
    }

    #[test]
    fn sld_vs_rld_quadform_ordering() {
        // x^T J_S^{-1} x >= x^T Re(J_R^{-1}) x, checked via the correlation
        // matrices: C_s - Re C = 0 entrywise in fact, both equal on the
        // diagonal quadratic form, so test equality of the real parts.
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let b = basis(2);
        for _ in 0..10 {
            let rho = random_full_rank_state(2, &mut rng);
            let x = random_observable(&b, &mut rng);
            let (cs, c) = inverse_correlation_matrices(&rho, &b);
            let xv = x.coords();
            let sld_form = (xv.transpose() * &cs * xv)[(0, 0)];
            let xc = xv.map(|v| c64(v, 0.0));
            let rld_form = (xc.adjoint() * &c * xc)[(0, 0)].re;
            assert!(sld_form >= rld_form - 1e-10);
        }
    }

    #[test]
    fn coarse_graining_never_increases_fisher() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let b = basis(2);
        for _ in 0..20 {
            let rho = random_full_rank_state(2, &mut rng);
            let m = random_rank1_measurement(2, 4, &mut rng);
            let povm = povm_from_kraus(&m, &b).unwrap();
            let j_fine = classical_fisher(&rho, &povm).unwrap();
            // merge the first two outcomes
            let mut effects: Vec<CMat> = povm.effects().to_vec();
            let merged = &effects[0] + &effects[1];
            effects.remove(1);
            effects[0] = merged;
            let coarse = Povm::new(effects, &b).unwrap();
            let j_coarse = classical_fisher(&rho, &coarse).unwrap();
            assert!(psd_leq(&j_coarse, &j_fine).unwrap());
        }
    }

    #[test]
    fn pushforward_quadform_dominates_identity() {
        // y^T J_S'^+ y >= y^T J_S^+ y = (Delta Y)^2
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let b = basis(2);
        for _ in 0..20 {
            let rho = random_full_rank_state(2, &mut rng);
            let m = random_rank1_measurement(2, 4, &mut rng);
            let y = random_observable(&b, &mut rng);
            let id_fam = StateFamily::identity(&rho, &b).unwrap();
            let push_fam = StateFamily::pushforward(&rho, &m, &b).unwrap();
            let js = sld_fisher(&id_fam).unwrap();
            let jsp = sld_fisher(&push_fam).unwrap();
            let f_id = js.quadform_pinv(y.coords()).unwrap();
            let f_push = jsp.quadform_pinv(y.coords()).unwrap();
            let var = rho.expectation(&(y.matrix() * y.matrix()))
                - rho.expectation(y.matrix()).powi(2);
            match f_id {
                ExtendedValue::Finite(v) => assert_abs_diff_eq!(v, var, epsilon = 1e-8),
                ExtendedValue::Infinite => panic!("identity family must be supported"),
            }
            match (f_push, f_id) {
                (ExtendedValue::Finite(a), ExtendedValue::Finite(b)) => {
                    assert!(a >= b - 1e-8)
                }
                (ExtendedValue::Infinite, _) => {}
                _ => unreachable!(),
            }
        }
    }
}
