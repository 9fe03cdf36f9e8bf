//! Constant selection matrices that vectorize the source-covariance
//! parameters for the closed-form FIM blocks.
//!
//! Index vectors are 0-based positions into `vec(X)` of an N×N matrix stored
//! column-major, i.e. entry (p, q) sits at `p + q·N`.

use nalgebra::{Complex, DMatrix};

use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrices<T: Real> {
    pub n: usize,
    /// Strictly lower-triangular positions, column by column.
    pub j1: Vec<usize>,
    /// `0..N(N−1)/2`.
    pub j1_bar: Vec<usize>,
    /// Transposed partners of `j1`, i.e. the strictly upper triangle row by row.
    pub j2: Vec<usize>,
    /// Lower triangle including the diagonal, column by column.
    pub j3: Vec<usize>,
    /// `0..N(N+1)/2`.
    pub j3_bar: Vec<usize>,
    /// Diagonal positions.
    pub j4: Vec<usize>,
    /// `0..N`.
    pub j4_bar: Vec<usize>,
    pub q1: DMatrix<T>,
    pub q1_bar: DMatrix<T>,
    pub q2: DMatrix<T>,
    pub q2_bar: DMatrix<T>,
    pub q: DMatrix<T>,
    pub q_bar: DMatrix<Complex<T>>,
    /// `[Q; Q̄]`, N²×N².
    pub q_t: DMatrix<Complex<T>>,
    pub q4: DMatrix<T>,
}

/// `1(rows, cols)`: ones at `(rows[i], cols[i])`.
fn ones_at<T: Real>(nrows: usize, ncols: usize, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    let mut m = DMatrix::zeros(nrows, ncols);
    for (&r, &c) in rows.iter().zip(cols) {
        m[(r, c)] = T::one();
    }
    m
}

pub fn selection_matrices<T: Real>(n: usize) -> Result<SelectionMatrices<T>> {
    if n == 0 {
        return invalid("selection matrices need at least one source");
    }
    let nn = n * n;
    let vec_idx = |p: usize, q: usize| p + q * n;

    let mut j1 = Vec::new();
    let mut j3 = Vec::new();
    for q in 0..n {
        for p in q..n {
            j3.push(vec_idx(p, q));
            if p > q {
                j1.push(vec_idx(p, q));
            }
        }
    }
    let mut j2 = Vec::new();
    for p in 0..n {
        for q in p + 1..n {
            j2.push(vec_idx(p, q));
        }
    }
    // j2 is listed row by row over the upper triangle, which pairs element-wise
    // with j1's column-by-column walk of the lower triangle.
    let j4: Vec<usize> = (0..n).map(|p| vec_idx(p, p)).collect();
    let j1_bar: Vec<usize> = (0..j1.len()).collect();
    let j3_bar: Vec<usize> = (0..j3.len()).collect();
    let j4_bar: Vec<usize> = (0..n).collect();

    let eye = DMatrix::<T>::identity(nn, nn);
    let swap = ones_at::<T>(nn, nn, &j1, &j2);
    let q1 = &eye + &swap;
    let q1_bar = &eye - &swap;
    let q2 = ones_at::<T>(j3.len(), nn, &j3_bar, &j3);
    let q2_bar = ones_at::<T>(j1.len(), nn, &j1_bar, &j1);
    let q = &q2 * &q1;
    let minus_j = Complex::new(T::zero(), -T::one());
    let q_bar = (&q2_bar * &q1_bar).map(|x| minus_j * x);

    let mut q_t = DMatrix::zeros(nn, nn);
    q_t.rows_mut(0, q.nrows())
        .copy_from(&q.map(|x| Complex::new(x, T::zero())));
    q_t.rows_mut(q.nrows(), q_bar.nrows()).copy_from(&q_bar);
    let q4 = ones_at::<T>(n, nn, &j4_bar, &j4);

    Ok(SelectionMatrices {
        n,
        j1,
        j1_bar,
        j2,
        j3,
        j3_bar,
        j4,
        j4_bar,
        q1,
        q1_bar,
        q2,
        q2_bar,
        q,
        q_bar,
        q_t,
        q4,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_based(v: &[usize]) -> Vec<usize> {
        v.iter().map(|i| i + 1).collect()
    }

    #[test]
    fn index_vectors_for_two_sources() {
        let s = selection_matrices::<f64>(2).unwrap();
        assert_eq!(one_based(&s.j4), vec![1, 4]);
        assert_eq!(one_based(&s.j3_bar), vec![1, 2, 3]);
        assert_eq!(one_based(&s.j3), vec![1, 2, 4]);
        assert_eq!(one_based(&s.j1), vec![2]);
        assert_eq!(one_based(&s.j2), vec![3]);
    }

    #[test]
    fn index_vectors_for_four_sources() {
        let s = selection_matrices::<f64>(4).unwrap();
        let n = 4;
        // [2..N, N+3..2N, 2N+4..3N, ...]
        assert_eq!(one_based(&s.j1), vec![2, 3, 4, 7, 8, 12]);
        // [N+1, 2N+1, .., (N−1)N+1, 2N+2, .., (N−1)N+2, .., N²−1]
        assert_eq!(one_based(&s.j2), vec![5, 9, 13, 10, 14, 15]);
        assert_eq!(*one_based(&s.j2).last().unwrap(), n * n - 1);
        assert_eq!(one_based(&s.j4), vec![1, 6, 11, 16]);
        assert_eq!(s.j3.len(), n * (n + 1) / 2);
        assert_eq!(s.j1_bar.len(), n * (n - 1) / 2);
        for v in [&s.j1, &s.j3, &s.j4, &s.j1_bar, &s.j3_bar] {
            assert!(v.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn q_t_extracts_real_parameters() {
        // Q_t vec(R) = [diag and 2·Re of lower entries (column order); 2·Im of lower entries]
        let s = selection_matrices::<f64>(3).unwrap();
        let r = DMatrix::from_row_slice(
            3,
            3,
            &[
                Complex::new(4.0, 0.0),
                Complex::new(1.0, -2.0),
                Complex::new(0.5, 0.25),
                Complex::new(1.0, 2.0),
                Complex::new(5.0, 0.0),
                Complex::new(-3.0, 1.0),
                Complex::new(0.5, -0.25),
                Complex::new(-3.0, -1.0),
                Complex::new(6.0, 0.0),
            ],
        );
        let v = DMatrix::from_column_slice(9, 1, r.as_slice());
        let mu = &s.q_t * v;
        let got: Vec<f64> = mu.iter().map(|z| z.re).collect();
        assert!(mu.iter().all(|z| z.im.abs() < 1e-12));
        let want = [4.0, 2.0, 1.0, 5.0, -6.0, 6.0, 4.0, -0.5, -2.0];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn entries_are_structured() {
        let s = selection_matrices::<f64>(3).unwrap();
        for x in s.q1.iter().chain(s.q1_bar.iter()).chain(s.q.iter()).chain(s.q4.iter()) {
            assert!([0.0, 1.0, -1.0].contains(x));
        }
        for z in s.q_bar.iter() {
            assert_eq!(z.re, 0.0);
            assert!([0.0, 1.0, -1.0].contains(&z.im));
        }
    }

    #[test]
    fn zero_sources_rejected() {
        assert!(selection_matrices::<f64>(0).is_err());
    }

    #[test]
    fn single_source_has_no_imaginary_rows() {
        let s = selection_matrices::<f64>(1).unwrap();
        assert_eq!(s.q_t.shape(), (1, 1));
        assert_eq!(s.q_bar.nrows(), 0);
    }
}
