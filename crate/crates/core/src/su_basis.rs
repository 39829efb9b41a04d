//! Orthonormal su(d) generator basis and Bloch-coordinate conversions.
//!
//! The generators follow the generalized Gell-Mann construction, each scaled
//! by 1/sqrt(2) so that `Tr(l_mu l_nu) = delta_{mu nu}`. Ordering is fixed:
//! symmetric off-diagonal pairs (row-major), antisymmetric pairs, then
//! diagonal generators.

use crate::linalg::{eigh, hermiticity_residual, trace_product};
use crate::quantum_core::DensityMatrix;
use crate::{c64, CMat, Error, RVec, Result};

pub const HERMITICITY_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;

/// Orthonormal traceless Hermitian generators of su(d).
#[derive(Debug, Clone)]
pub struct GeneratorBasis {
    dim: usize,
    generators: Vec<CMat>,
}

/// Real coordinates of a state or observable direction in the generator
/// basis; length d^2 - 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochCoords(pub RVec);

impl GeneratorBasis {
    /// Build the scaled generalized Gell-Mann basis for dimension `d`.
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(d));
        }
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut generators = Vec::with_capacity(d * d - 1);
        // symmetric: (|j><k| + |k><j|) / sqrt(2), j < k row-major
        for j in 0..d {
            for k in (j + 1)..d {
                let mut m = CMat::zeros(d, d);
                m[(j, k)] = c64(inv_sqrt2, 0.0);
                m[(k, j)] = c64(inv_sqrt2, 0.0);
                generators.push(m);
            }
        }
        // antisymmetric: (-i|j><k| + i|k><j|) / sqrt(2)
        for j in 0..d {
            for k in (j + 1)..d {
                let mut m = CMat::zeros(d, d);
                m[(j, k)] = c64(0.0, -inv_sqrt2);
                m[(k, j)] = c64(0.0, inv_sqrt2);
                generators.push(m);
            }
        }
        // diagonal: sqrt(1/(l(l+1))) (sum_{j<=l} |j><j| - l |l><l|), l = 1..d-1
        for l in 1..d {
            let scale = 1.0 / ((l * (l + 1)) as f64).sqrt();
            let mut m = CMat::zeros(d, d);
            for j in 0..l {
                m[(j, j)] = c64(scale, 0.0);
            }
            m[(l, l)] = c64(-(l as f64) * scale, 0.0);
            generators.push(m);
        }
        Ok(Self { dim: d, generators })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of generators, d^2 - 1.
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn generators(&self) -> &[CMat] {
        &self.generators
    }

    pub fn generator(&self, mu: usize) -> &CMat {
        &self.generators[mu]
    }

    /// Split a Hermitian matrix as `H = x0 I + sum_mu x_mu l_mu` with
    /// `x0 = Tr(H)/d` and `x_mu = Tr(H l_mu)`.
    pub fn decompose_hermitian(&self, h: &CMat) -> Result<(f64, RVec)> {
        self.check_dim(h)?;
        let res = hermiticity_residual(h);
        if res > HERMITICITY_TOL {
            return Err(Error::NotHermitian { residual: res });
        }
        let x0 = h.trace().re / self.dim as f64;
        let x = RVec::from_iterator(
            self.len(),
            self.generators.iter().map(|g| trace_product(h, g).re),
        );
        Ok((x0, x))
    }

    /// Assemble `x0 I + sum_mu x_mu l_mu`; exact inverse of
    /// [`decompose_hermitian`](Self::decompose_hermitian) up to round-off.
    pub fn reconstruct(&self, x0: f64, x: &RVec) -> Result<CMat> {
        if x.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: x.len(),
            });
        }
        let mut m = CMat::identity(self.dim, self.dim).map(|z| z * c64(x0, 0.0));
        for (mu, g) in self.generators.iter().enumerate() {
            m += g.map(|z| z * c64(x[mu], 0.0));
        }
        Ok(m)
    }

    /// `rho = I/d + theta^T lambda`, validated PSD.
    pub fn state_from_coords(&self, theta: &BlochCoords) -> Result<DensityMatrix> {
        let m = self.reconstruct(1.0 / self.dim as f64, &theta.0)?;
        let (vals, _) = eigh(&m);
        let min_eig = vals[0];
        if min_eig < -PSD_TOL {
            return Err(Error::NotPsd { min_eig });
        }
        DensityMatrix::new(m)
    }

    /// `theta_mu = Tr(rho l_mu)`; inverse of
    /// [`state_from_coords`](Self::state_from_coords).
    pub fn coords_from_state(&self, rho: &DensityMatrix) -> Result<BlochCoords> {
        let (_, theta) = self.decompose_hermitian(rho.matrix())?;
        Ok(BlochCoords(theta))
    }

    fn check_dim(&self, h: &CMat) -> Result<()> {
        if h.nrows() != self.dim || h.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: h.nrows(),
            });
        }
        Ok(())
    }
}
