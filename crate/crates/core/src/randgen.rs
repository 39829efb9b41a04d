//! Seeded random generators for states, observables and measurements, used
//! by the randomized sweeps and the test suites.

use crate::linalg::{hermitian_part, psd_sqrt};
use crate::quantum_core::{DensityMatrix, KrausMeasurement};
use crate::su_basis::GeneratorBasis;
use crate::{c64, CMat, CVec, Observable};
use rand::Rng;

/// Standard normal via Box-Muller.
pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn ginibre<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    CMat::from_fn(rows, cols, |_, _| c64(normal(rng), normal(rng)))
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: Rng>(d: usize, rng: &mut R) -> CMat {
    hermitian_part(&ginibre(d, d, rng))
}

/// Random Hermitian observable.
pub fn random_observable<R: Rng>(basis: &GeneratorBasis, rng: &mut R) -> Observable {
    Observable::new(random_hermitian(basis.dim(), rng), basis).expect("hermitian by construction")
}

/// Random full-rank state `G G^dag / Tr` mixed with a sliver of I/d to keep
/// the smallest eigenvalue away from zero.
pub fn random_full_rank_state<R: Rng>(d: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(d, d, rng);
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m /= c64(tr, 0.0);
    let eps = 0.05;
    let mixed = m.map(|z| z * c64(1.0 - eps, 0.0))
        + CMat::identity(d, d).map(|z| z * c64(eps / d as f64, 0.0));
    DensityMatrix::new(mixed).expect("PSD by construction")
}

/// Random unitary from the QR of a Ginibre matrix with phase fixing.
pub fn random_unitary<R: Rng>(d: usize, rng: &mut R) -> CMat {
    let g = ginibre(d, d, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { c64(1.0, 0.0) };
        let col = q.column(j) * phase.conj();
        q.set_column(j, &col);
    }
    q
}

/// Random measurement with `k` rank-1 effects: `E_i = S^{-1/2} |g_i><g_i| S^{-1/2}`
/// with Gaussian vectors `g_i`, Kraus operator `M_i = E_i^{1/2}`.
pub fn random_rank1_measurement<R: Rng>(d: usize, k: usize, rng: &mut R) -> KrausMeasurement {
    assert!(k >= d, "need at least d rank-1 effects to resolve the identity");
    let vecs: Vec<CVec> = (0..k)
        .map(|_| CVec::from_fn(d, |_, _| c64(normal(rng), normal(rng))))
        .collect();
    let mut s = CMat::zeros(d, d);
    for v in &vecs {
        s += v * v.adjoint();
    }
    // S^{-1/2}
    let (vals, evecs) = crate::linalg::eigh(&s);
    let mut dinv = CMat::zeros(d, d);
    for j in 0..d {
        dinv[(j, j)] = c64(1.0 / vals[j].sqrt(), 0.0);
    }
    let s_inv_sqrt = &evecs * dinv * evecs.adjoint();
    let outcomes: Vec<Vec<CMat>> = vecs
        .iter()
        .map(|v| {
            let w = &s_inv_sqrt * v;
            let e = &w * w.adjoint();
            vec![psd_sqrt(&e)]
        })
        .collect();
    KrausMeasurement::new(outcomes, d, d).expect("complete by construction")
}
