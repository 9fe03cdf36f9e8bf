//! Fisher information and Cramér-Rao bounds for joint bearing/range
//! estimation.
//!
//! The parameter vector is `[θ_1..θ_N, r_1..r_N, μ_1..μ_{N²}, ν]`, where `μ`
//! holds the real degrees of freedom of the source covariance and `ν` is the
//! noise variance. The trace form in [`fim_generic`] is authoritative; the
//! block formulas in [`closed_form`] are a cross-check.

pub mod closed_form;
pub mod derivatives;
pub mod selection;

use std::ops::Range;

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::geometry::Scenario;
use crate::scalar::Real;

pub use closed_form::{block_deviations, fim_closed_form, Block, BlockDeviation};
pub use derivatives::{delay_derivatives, rx_derivatives, steering_derivative_sum, steering_derivatives, Axis};
pub use selection::{selection_matrices, SelectionMatrices};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    Bearing(usize),
    Range(usize),
    SourceCovDiag(usize),
    /// Real part of `R_s[p][q]`, `p < q`.
    SourceCovRe(usize, usize),
    /// Imaginary part of `R_s[p][q]`, `p < q`.
    SourceCovIm(usize, usize),
    NoiseVariance,
}

/// Ordering of the parameter vector for N sources.
///
/// The `μ` block lists the N diagonal entries first, then the real and
/// imaginary parts of each upper-triangle entry `(p, q)`, `p < q`, in row
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterIndex {
    n: usize,
}

impl ParameterIndex {
    pub fn new(num_sources: usize) -> Self {
        Self { n: num_sources }
    }

    /// Recovers N from a parameter count `(N + 1)²`.
    pub fn from_len(len: usize) -> Option<Self> {
        let root = (len as f64).sqrt().round() as usize;
        (root >= 1 && root * root == len).then(|| Self::new(root - 1))
    }

    pub fn num_sources(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        2 * self.n + self.n * self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bearings(&self) -> Range<usize> {
        0..self.n
    }

    pub fn ranges(&self) -> Range<usize> {
        self.n..2 * self.n
    }

    pub fn source_cov(&self) -> Range<usize> {
        2 * self.n..2 * self.n + self.n * self.n
    }

    pub fn noise(&self) -> usize {
        self.len() - 1
    }

    fn upper_pair(&self, k: usize) -> (usize, usize) {
        let mut k = k;
        for p in 0..self.n {
            let row = self.n - p - 1;
            if k < row {
                return (p, p + 1 + k);
            }
            k -= row;
        }
        unreachable!("upper-triangle pair index out of range")
    }

    pub fn parameter(&self, i: usize) -> Parameter {
        let n = self.n;
        assert!(i < self.len(), "parameter index {i} out of range");
        if i < n {
            Parameter::Bearing(i)
        } else if i < 2 * n {
            Parameter::Range(i - n)
        } else if i == self.noise() {
            Parameter::NoiseVariance
        } else {
            let mu = i - 2 * n;
            if mu < n {
                Parameter::SourceCovDiag(mu)
            } else {
                let (p, q) = self.upper_pair((mu - n) / 2);
                if (mu - n).is_multiple_of(2) {
                    Parameter::SourceCovRe(p, q)
                } else {
                    Parameter::SourceCovIm(p, q)
                }
            }
        }
    }

    pub fn position(&self, p: Parameter) -> usize {
        let n = self.n;
        let pair = |a: usize, b: usize| -> usize {
            assert!(a < b && b < n, "not an upper-triangle pair: ({a}, {b})");
            (0..a).map(|r| n - r - 1).sum::<usize>() + (b - a - 1)
        };
        match p {
            Parameter::Bearing(k) => k,
            Parameter::Range(k) => n + k,
            Parameter::SourceCovDiag(k) => 2 * n + k,
            Parameter::SourceCovRe(a, b) => 3 * n + 2 * pair(a, b),
            Parameter::SourceCovIm(a, b) => 3 * n + 2 * pair(a, b) + 1,
            Parameter::NoiseVariance => self.noise(),
        }
    }

    /// Hermitian basis matrix `E_i = ∂R_s/∂μ_i` for `i` in `0..N²`.
    pub fn source_cov_basis<T: Real>(&self, i: usize) -> DMatrix<Complex<T>> {
        let n = self.n;
        let mut e = DMatrix::zeros(n, n);
        let one = Complex::new(T::one(), T::zero());
        let j = Complex::new(T::zero(), T::one());
        match self.parameter(2 * n + i) {
            Parameter::SourceCovDiag(k) => e[(k, k)] = one,
            Parameter::SourceCovRe(p, q) => {
                e[(p, q)] = one;
                e[(q, p)] = one;
            }
            Parameter::SourceCovIm(p, q) => {
                e[(p, q)] = j;
                e[(q, p)] = -j;
            }
            _ => unreachable!(),
        }
        e
    }
}

/// Real symmetric FIM. Stored per snapshot so that scaling in `N_s` is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct FimMatrix<T: Real> {
    pub per_snapshot: DMatrix<T>,
    pub snapshots: usize,
    pub index: ParameterIndex,
    /// `max|F − Fᵀ| / max|F|` before symmetrization.
    pub asymmetry: T,
}

impl<T: Real> FimMatrix<T> {
    pub fn entries(&self) -> DMatrix<T> {
        &self.per_snapshot * T::of(self.snapshots as f64)
    }

    pub fn with_snapshots(&self, snapshots: usize) -> Self {
        Self {
            snapshots,
            ..self.clone()
        }
    }

    /// Wraps an explicit matrix (e.g. a hand-built FIM with one bearing and
    /// one range and no nuisance parameters).
    pub fn from_entries(entries: DMatrix<T>, snapshots: usize, index: ParameterIndex) -> Result<Self> {
        if snapshots == 0 || !entries.is_square() {
            return invalid("FIM must be square with at least one snapshot");
        }
        let per_snapshot = entries / T::of(snapshots as f64);
        let asymmetry = asymmetry(&per_snapshot);
        Ok(Self {
            per_snapshot,
            snapshots,
            index,
            asymmetry,
        })
    }
}

fn asymmetry<T: Real>(m: &DMatrix<T>) -> T {
    let scale = m.amax();
    if scale == T::zero() {
        return T::zero();
    }
    (m - m.transpose()).amax() / scale
}

fn symmetrized<T: Real>(m: DMatrix<T>) -> (DMatrix<T>, T) {
    let asym = asymmetry(&m);
    let s = (&m + m.transpose()) * T::of(0.5);
    (s, asym)
}

/// Inverse of a Hermitian positive-definite matrix via its eigendecomposition.
pub(crate) struct HermitianInverse<T: Real> {
    pub inverse: DMatrix<Complex<T>>,
    pub condition: T,
    pub log_det: T,
}

pub(crate) fn hermitian_inverse<T: Real>(m: &DMatrix<Complex<T>>) -> Result<HermitianInverse<T>> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = &eig.eigenvalues;
    let min = vals.min();
    let max = vals.max();
    let tol = T::default_epsilon() * T::of(m.nrows() as f64) * max.abs();
    if !(min > tol) {
        return Err(Error::SingularCovariance {
            min_eigenvalue: min.as_f64(),
        });
    }
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |r, c| v[(r, c)] * (T::one() / vals[c]));
    Ok(HermitianInverse {
        inverse: scaled * v.adjoint(),
        condition: max / min,
        log_det: vals.iter().map(|l| l.ln()).fold(T::zero(), |a, b| a + b),
    })
}

/// `Re tr(X Y)` without forming the product.
fn re_trace_product<T: Real>(x: &DMatrix<Complex<T>>, y: &DMatrix<Complex<T>>) -> T {
    let mut acc = T::zero();
    for a in 0..x.nrows() {
        for b in 0..x.ncols() {
            let p = x[(a, b)] * y[(b, a)];
            acc += p.re;
        }
    }
    acc
}

/// `F_ij = N_s · tr(R_x⁻¹ ∂_i R_x R_x⁻¹ ∂_j R_x)`.
pub fn fim_generic<T: Real>(
    array_cov: &DMatrix<Complex<T>>,
    derivs: &[DMatrix<Complex<T>>],
    snapshots: usize,
) -> Result<FimMatrix<T>> {
    if snapshots == 0 {
        return invalid("snapshot count must be at least 1");
    }
    let index = ParameterIndex::from_len(derivs.len())
        .ok_or_else(|| Error::Validation(format!("{} derivatives do not form a parameter vector", derivs.len())))?;
    let w = hermitian_inverse(array_cov)?.inverse;
    let prods: Vec<_> = derivs.iter().map(|d| &w * d).collect();
    let p = prods.len();
    let f = DMatrix::from_fn(p, p, |i, j| re_trace_product(&prods[i], &prods[j]));
    let (per_snapshot, asymmetry) = symmetrized(f);
    Ok(FimMatrix {
        per_snapshot,
        snapshots,
        index,
        asymmetry,
    })
}

/// Diagnostics attached to every bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrbDiagnostics<T> {
    pub condition_number: T,
    pub rank: usize,
    pub dimension: usize,
    /// Set when the pseudo-inverse had to drop eigenvalues.
    pub rank_deficient: bool,
    pub min_eigenvalue: T,
    pub asymmetry: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrbReport<T> {
    pub crb_theta: Vec<T>,
    pub crb_r: Vec<T>,
    pub crb_theta_total: T,
    pub crb_r_total: T,
    pub diagnostics: CrbDiagnostics<T>,
}

/// Relative eigenvalue cut-off of the pseudo-inverse.
pub const PINV_RTOL: f64 = 1e-12;

/// Diagonal of `F⁻¹` (pseudo-inverse when rank deficient) for the bearing and
/// range entries.
pub fn crb_from_fim<T: Real>(fim: &FimMatrix<T>) -> CrbReport<T> {
    let f = &fim.per_snapshot;
    let dim = f.nrows();
    let eig = SymmetricEigen::new(f.clone());
    let vals = &eig.eigenvalues;
    let lmax = vals.iter().fold(T::zero(), |a, &l| a.max(l.abs()));
    let lmin = vals.min();
    let tol = T::of(PINV_RTOL).max(T::default_epsilon() * T::of(dim as f64)) * lmax;
    let kept: Vec<usize> = (0..dim).filter(|&i| vals[i] > tol).collect();

    let ns = T::of(fim.snapshots as f64);
    let diag_inv = |p: usize| -> T {
        let v = &eig.eigenvectors;
        kept.iter()
            .fold(T::zero(), |acc, &i| acc + v[(p, i)] * v[(p, i)] / vals[i])
            / ns
    };
    let idx = fim.index;
    let crb_theta: Vec<T> = idx.bearings().map(diag_inv).collect();
    let crb_r: Vec<T> = idx.ranges().map(diag_inv).collect();
    let sum = |v: &[T]| v.iter().fold(T::zero(), |a, &b| a + b);
    let condition_number = if lmin > T::zero() {
        lmax / lmin
    } else {
        T::of(f64::INFINITY)
    };
    CrbReport {
        crb_theta_total: sum(&crb_theta),
        crb_r_total: sum(&crb_r),
        crb_theta,
        crb_r,
        diagnostics: CrbDiagnostics {
            condition_number,
            rank: kept.len(),
            dimension: dim,
            rank_deficient: kept.len() < dim,
            min_eigenvalue: lmin,
            asymmetry: fim.asymmetry,
        },
    }
}

/// Everything reported for one constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds<T: Real> {
    pub det_rx: T,
    pub rx_condition: T,
    pub fim: FimMatrix<T>,
    pub crb: CrbReport<T>,
}

/// `det(R_x)`, the FIM (trace form) and its CRB for a scenario.
pub fn assess<T: Real>(scenario: &Scenario<T>) -> Result<Bounds<T>> {
    let a = scenario.steering()?;
    let cov = scenario.covariance_set(&a)?;
    let derivs = rx_derivatives(scenario, &a, &cov)?;
    let inv = hermitian_inverse(&cov.array_cov)?;
    let fim = fim_generic(&cov.array_cov, &derivs, scenario.snapshots)?;
    let crb = crb_from_fim(&fim);
    Ok(Bounds {
        det_rx: inv.log_det.exp(),
        rx_condition: inv.condition,
        fim,
        crb,
    })
}

/// `det(R_x)` alone, skipping the FIM.
pub fn det_rx<T: Real>(scenario: &Scenario<T>) -> Result<T> {
    let a = scenario.steering()?;
    let cov = scenario.covariance_set(&a)?;
    Ok(hermitian_inverse(&cov.array_cov)?.log_det.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_index_is_bijective() {
        for n in 0..5 {
            let idx = ParameterIndex::new(n);
            assert_eq!(idx.len(), (n + 1) * (n + 1));
            assert_eq!(ParameterIndex::from_len(idx.len()), Some(idx));
            for i in 0..idx.len() {
                assert_eq!(idx.position(idx.parameter(i)), i);
            }
        }
        let idx = ParameterIndex::new(3);
        assert_eq!(idx.parameter(6), Parameter::SourceCovDiag(0));
        assert_eq!(idx.parameter(9), Parameter::SourceCovRe(0, 1));
        assert_eq!(idx.parameter(10), Parameter::SourceCovIm(0, 1));
        assert_eq!(idx.parameter(13), Parameter::SourceCovRe(1, 2));
        assert_eq!(idx.parameter(15), Parameter::NoiseVariance);
    }

    #[test]
    fn basis_matrices_are_hermitian() {
        let idx = ParameterIndex::new(3);
        for i in 0..9 {
            let e = idx.source_cov_basis::<f64>(i);
            assert_eq!(e.adjoint(), e);
        }
    }

    #[test]
    fn noise_only_fim() {
        // R_x = νI_4 with ν the only parameter: F = N_s·M/ν²
        let rx = DMatrix::<Complex<f64>>::identity(4, 4);
        let f = fim_generic(&rx, &[DMatrix::identity(4, 4)], 1).unwrap();
        assert_eq!(f.entries()[(0, 0)], 4.0);
        let rx2 = rx.map(|z| z * 2.0);
        let f = fim_generic(&rx2, &[DMatrix::identity(4, 4)], 3).unwrap();
        assert!((f.entries()[(0, 0)] - 3.0 * 4.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn singular_covariance_is_an_error() {
        let rx = DMatrix::<Complex<f64>>::from_element(2, 2, Complex::new(1.0, 0.0));
        assert!(matches!(
            fim_generic(&rx, &[DMatrix::identity(2, 2)], 1),
            Err(Error::SingularCovariance { .. })
        ));
    }

    #[test]
    fn diagonal_fim_inverse() {
        // one θ and one r, nuisance block left out
        let f = FimMatrix::from_entries(
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 8.0])),
            1,
            ParameterIndex::new(1),
        )
        .unwrap();
        let crb = crb_from_fim(&f);
        assert_eq!(crb.crb_theta, vec![0.25]);
        assert_eq!(crb.crb_r, vec![0.125]);
        assert!(!crb.diagnostics.rank_deficient);
    }

    #[test]
    fn rank_deficient_fim_is_flagged() {
        let f = FimMatrix::from_entries(
            DMatrix::from_row_slice(2, 2, &[1.0_f64, 1.0, 1.0, 1.0]),
            1,
            ParameterIndex::new(1),
        )
        .unwrap();
        let crb = crb_from_fim(&f);
        assert!(crb.diagnostics.rank_deficient);
        assert_eq!(crb.diagnostics.rank, 1);
        // pseudo-inverse of [[1,1],[1,1]] is [[.25,.25],[.25,.25]]
        assert!((crb.crb_theta[0] - 0.25).abs() < 1e-12);
    }
}
