//! Block-wise closed-form FIM built from Hadamard and Kronecker products.
//!
//! With `W = R_x⁻¹`, `Ȧ_α = Σ_n ∂A/∂α_n` and the selection matrices `Q_t`,
//! `Q_4`:
//!
//! * `F_αβ = 2Re{(R_s Aᴴ W A R_s) ⊙ (Ȧ_βᴴ W Ȧ_α)ᵀ + (R_s Aᴴ W Ȧ_β) ⊙ (R_s Aᴴ W Ȧ_α)ᵀ}`
//! * `F_αμ = 2Re{Q_4 [(Aᴴ W Ȧ_α)ᵀ ⊗ (R_s Aᴴ W A)] Q_tᴴ}`
//! * `F_αν = 2Re{diag(R_s Aᴴ W² Ȧ_α)}`
//! * `F_μμ = Q_t [(Aᴴ W A)* ⊗ (Aᴴ W A)] Q_tᴴ`
//! * `F_μν = Q_t [(W A)ᵀ ⊗ (W A)ᴴ] vec(I)`
//! * `F_νν = tr(W²)`
//!
//! The `μ` rows of `Q_t` are ordered differently from [`ParameterIndex`]
//! (diagonal and real parts interleaved, imaginary parts of the lower
//! triangle last), so the result is mapped through a signed permutation.

use nalgebra::{Complex, DMatrix};

use super::derivatives::{steering_derivative_sum, Axis};
use super::selection::selection_matrices;
use super::{hermitian_inverse, symmetrized, FimMatrix, Parameter, ParameterIndex};
use crate::error::{invalid, Result};
use crate::geometry::Scenario;
use crate::scalar::Real;
use crate::signal_model::{CovarianceSet, SteeringMatrix};

fn re<T: Real>(m: &DMatrix<Complex<T>>) -> DMatrix<T> {
    m.map(|z| z.re)
}

fn vec_col<T: Real>(m: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    DMatrix::from_column_slice(m.len(), 1, m.as_slice())
}

/// Signed map from `Q_t` row order to [`ParameterIndex`] μ positions.
fn qt_to_index(n: usize) -> Vec<(usize, f64)> {
    let idx = ParameterIndex::new(n);
    let base = 2 * n;
    let mut out = Vec::with_capacity(n * n);
    for q in 0..n {
        for p in q..n {
            let param = if p == q {
                Parameter::SourceCovDiag(p)
            } else {
                Parameter::SourceCovRe(q, p)
            };
            out.push((idx.position(param) - base, 1.0));
        }
    }
    // Q̄ rows carry Im of the lower entry (p, q), p > q, which is −Im R_s[q][p]
    for q in 0..n {
        for p in q + 1..n {
            out.push((idx.position(Parameter::SourceCovIm(q, p)) - base, -1.0));
        }
    }
    out
}

pub fn fim_closed_form<T: Real>(
    scenario: &Scenario<T>,
    a: &SteeringMatrix<T>,
    cov: &CovarianceSet<T>,
    snapshots: usize,
) -> Result<FimMatrix<T>> {
    if snapshots == 0 {
        return invalid("snapshot count must be at least 1");
    }
    let n = scenario.num_sources();
    let m = scenario.num_sensors();
    let index = ParameterIndex::new(n);
    let sel = selection_matrices::<T>(n)?;
    let two = T::of(2.0);

    let am = a.entries();
    let ah = am.adjoint();
    let rs = &cov.source_cov;
    let w = hermitian_inverse(&cov.array_cov)?.inverse;
    let w2 = &w * &w;
    let b = &ah * &w * am;
    let rs_ah_w = rs * &ah * &w;
    let k = &rs_ah_w * am * rs;
    let x = rs * &b;

    let dots = [
        steering_derivative_sum(scenario, a, Axis::Bearing)?,
        steering_derivative_sum(scenario, a, Axis::Range)?,
    ];
    let qt_h = sel.q_t.adjoint();
    let q4 = sel.q4.map(|v| Complex::new(v, T::zero()));
    let perm = qt_to_index(n);

    let mut f = DMatrix::<T>::zeros(index.len(), index.len());
    let offsets = [index.bearings().start, index.ranges().start];
    let mu0 = index.source_cov().start;
    let nu = index.noise();

    for (ai, da) in dots.iter().enumerate() {
        let rs_ah_w_da = &rs_ah_w * da;
        for (bi, db) in dots.iter().enumerate() {
            let rs_ah_w_db = &rs_ah_w * db;
            let t1 = k.component_mul(&(db.adjoint() * &w * da).transpose());
            let t2 = rs_ah_w_db.component_mul(&rs_ah_w_da.transpose());
            let block = re(&(t1 + t2)) * two;
            f.view_mut((offsets[ai], offsets[bi]), (n, n)).copy_from(&block);
        }

        // α–μ
        let y = &ah * &w * da;
        let am_block = re(&(&q4 * y.transpose().kronecker(&x) * &qt_h)) * two;
        for (col, &(pos, sign)) in perm.iter().enumerate() {
            for r in 0..n {
                let v = am_block[(r, col)] * T::of(sign);
                f[(offsets[ai] + r, mu0 + pos)] = v;
                f[(mu0 + pos, offsets[ai] + r)] = v;
            }
        }

        // α–ν
        let d = rs * &ah * &w2 * da;
        for r in 0..n {
            let v = d[(r, r)].re * two;
            f[(offsets[ai] + r, nu)] = v;
            f[(nu, offsets[ai] + r)] = v;
        }
    }

    // μ–μ
    let mumu = re(&(&sel.q_t * b.conjugate().kronecker(&b) * &qt_h));
    for (ra, &(pa, sa)) in perm.iter().enumerate() {
        for (rb, &(pb, sb)) in perm.iter().enumerate() {
            f[(mu0 + pa, mu0 + pb)] = mumu[(ra, rb)] * T::of(sa * sb);
        }
    }

    // μ–ν
    let wa = &w * am;
    let eye = DMatrix::<Complex<T>>::identity(m, m);
    let munu = re(&(&sel.q_t * wa.transpose().kronecker(&wa.adjoint()) * vec_col(&eye)));
    for (r, &(p, s)) in perm.iter().enumerate() {
        let v = munu[(r, 0)] * T::of(s);
        f[(mu0 + p, nu)] = v;
        f[(nu, mu0 + p)] = v;
    }

    f[(nu, nu)] = w2.trace().re;

    let (per_snapshot, asymmetry) = symmetrized(f);
    Ok(FimMatrix {
        per_snapshot,
        snapshots,
        index,
        asymmetry,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Block {
    ThetaTheta,
    ThetaR,
    RR,
    ThetaMu,
    RMu,
    ThetaNu,
    RNu,
    MuMu,
    MuNu,
    NuNu,
}

impl Block {
    pub const ALL: [Block; 10] = [
        Block::ThetaTheta,
        Block::ThetaR,
        Block::RR,
        Block::ThetaMu,
        Block::RMu,
        Block::ThetaNu,
        Block::RNu,
        Block::MuMu,
        Block::MuNu,
        Block::NuNu,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Block::ThetaTheta => "theta-theta",
            Block::ThetaR => "theta-r",
            Block::RR => "r-r",
            Block::ThetaMu => "theta-mu",
            Block::RMu => "r-mu",
            Block::ThetaNu => "theta-nu",
            Block::RNu => "r-nu",
            Block::MuMu => "mu-mu",
            Block::MuNu => "mu-nu",
            Block::NuNu => "nu-nu",
        }
    }

    pub fn is_mu_coupled(&self) -> bool {
        matches!(self, Block::ThetaMu | Block::RMu | Block::MuMu | Block::MuNu)
    }

    fn ranges(&self, idx: &ParameterIndex) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let th = idx.bearings();
        let r = idx.ranges();
        let mu = idx.source_cov();
        let nu = idx.noise()..idx.noise() + 1;
        match self {
            Block::ThetaTheta => (th.clone(), th),
            Block::ThetaR => (th, r),
            Block::RR => (r.clone(), r),
            Block::ThetaMu => (th, mu),
            Block::RMu => (r, mu),
            Block::ThetaNu => (th, nu),
            Block::RNu => (r, nu),
            Block::MuMu => (mu.clone(), mu),
            Block::MuNu => (mu, nu),
            Block::NuNu => (nu.clone(), nu),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockDeviation<T> {
    pub block: Block,
    /// `max|closed − generic| / max√(F_ii·F_jj)` over the block. The
    /// denominator bounds every entry of a PSD matrix, so blocks that vanish
    /// analytically (e.g. bearing against noise for a single source) are
    /// compared against the size of their diagonal partners, not rounding
    /// noise.
    pub relative: T,
}

pub fn block_deviations<T: Real>(closed: &FimMatrix<T>, generic: &FimMatrix<T>) -> Vec<BlockDeviation<T>> {
    let idx = generic.index;
    let (c, g) = (closed.entries(), generic.entries());
    Block::ALL
        .iter()
        .map(|&block| {
            let (rows, cols) = block.ranges(&idx);
            let mut diff = T::zero();
            let mut scale = T::zero();
            for r in rows {
                for col in cols.clone() {
                    diff = diff.max((c[(r, col)] - g[(r, col)]).abs());
                    scale = scale.max((g[(r, r)].abs() * g[(col, col)].abs()).sqrt());
                }
            }
            let relative = if scale > T::zero() { diff / scale } else { diff };
            BlockDeviation { block, relative }
        })
        .collect()
}
