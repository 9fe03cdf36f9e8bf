//! Frequency-domain signal model: steering matrix, covariances, snapshot
//! synthesis and per-element received power.

use nalgebra::{Complex, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::geometry::Scenario;
use crate::scalar::{cis, Real};

/// Narrowband emitter: carrier frequency and a fixed complex amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSignal<T> {
    pub freq_hz: T,
    pub amplitude: Complex<T>,
}

impl<T: Real> SourceSignal<T> {
    pub fn new(freq_hz: T, amplitude: Complex<T>) -> Result<Self> {
        if !(freq_hz > T::zero()) {
            return invalid(format!("carrier frequency must be positive, got {freq_hz}"));
        }
        Ok(Self { freq_hz, amplitude })
    }

    pub fn angular_freq(&self) -> T {
        T::two_pi() * self.freq_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringMatrix<T: Real>(pub DMatrix<Complex<T>>);

impl<T: Real> SteeringMatrix<T> {
    pub fn entries(&self) -> &DMatrix<Complex<T>> {
        &self.0
    }

    pub fn num_sensors(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_sources(&self) -> usize {
        self.0.ncols()
    }
}

/// `A_mn = exp(−j·2π·f_n·τ_mn)`.
pub fn steering_matrix<T: Real>(delays: &DMatrix<T>, freqs: &[T]) -> Result<SteeringMatrix<T>> {
    if delays.ncols() != freqs.len() {
        return invalid(format!(
            "delay matrix has {} columns but {} frequencies were given",
            delays.ncols(),
            freqs.len()
        ));
    }
    let a = DMatrix::from_fn(delays.nrows(), delays.ncols(), |m, n| {
        cis(-(T::two_pi() * freqs[n] * delays[(m, n)]))
    });
    Ok(SteeringMatrix(a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet<T: Real> {
    /// `R_s`, N×N.
    pub source_cov: DMatrix<Complex<T>>,
    pub noise_variance: T,
    /// `R_x = A R_s Aᴴ + ηI`, M×M.
    pub array_cov: DMatrix<Complex<T>>,
}

/// Covariances for deterministic amplitudes: `R_s = s sᴴ`.
pub fn covariances<T: Real>(
    a: &SteeringMatrix<T>,
    signals: &[SourceSignal<T>],
    noise_variance: T,
) -> Result<CovarianceSet<T>> {
    if signals.len() != a.num_sources() {
        return invalid(format!(
            "steering matrix has {} columns but {} signals were given",
            a.num_sources(),
            signals.len()
        ));
    }
    let s = DVector::from_iterator(signals.len(), signals.iter().map(|s| s.amplitude));
    let source_cov = &s * s.adjoint();
    covariances_from_source_cov(a, source_cov, noise_variance)
}

/// `R_x` for an arbitrary source covariance.
pub fn covariances_from_source_cov<T: Real>(
    a: &SteeringMatrix<T>,
    source_cov: DMatrix<Complex<T>>,
    noise_variance: T,
) -> Result<CovarianceSet<T>> {
    if !(noise_variance > T::zero()) {
        return invalid(format!("noise variance must be positive, got {noise_variance}"));
    }
    if source_cov.shape() != (a.num_sources(), a.num_sources()) {
        return invalid("source covariance shape does not match the steering matrix");
    }
    let a = a.entries();
    let mut array_cov = a * &source_cov * a.adjoint();
    for i in 0..array_cov.nrows() {
        array_cov[(i, i)] += Complex::new(noise_variance, T::zero());
    }
    Ok(CovarianceSet {
        source_cov,
        noise_variance,
        array_cov,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch<T: Real> {
    pub snapshots: Vec<DVector<Complex<T>>>,
    pub seed: u64,
}

/// Draws `count` snapshots `X(j) = A s + v(j)` with circular complex
/// Gaussian noise of covariance `ηI`.
pub fn synthesize_snapshots<T>(
    a: &SteeringMatrix<T>,
    signals: &[SourceSignal<T>],
    noise_variance: T,
    count: usize,
    seed: u64,
) -> Result<SnapshotBatch<T>>
where
    T: Real,
    StandardNormal: Distribution<T>,
{
    if count == 0 {
        return invalid("snapshot count must be at least 1");
    }
    if !(noise_variance >= T::zero()) {
        return invalid(format!("noise variance must be nonnegative, got {noise_variance}"));
    }
    if signals.len() != a.num_sources() {
        return invalid("signal count does not match the steering matrix");
    }
    let s = DVector::from_iterator(signals.len(), signals.iter().map(|s| s.amplitude));
    let clean = a.entries() * s;
    let sigma = (noise_variance / T::of(2.0)).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let snapshots = (0..count)
        .map(|_| {
            clean.map(|x| {
                let re: T = StandardNormal.sample(&mut rng);
                let im: T = StandardNormal.sample(&mut rng);
                x + Complex::new(re * sigma, im * sigma)
            })
        })
        .collect();
    Ok(SnapshotBatch { snapshots, seed })
}

/// `(1/N_s) Σ X(j) X(j)ᴴ`.
pub fn sample_covariance<T: Real>(batch: &SnapshotBatch<T>) -> Result<DMatrix<Complex<T>>> {
    let Some(first) = batch.snapshots.first() else {
        return invalid("sample covariance of an empty batch");
    };
    let m = first.len();
    let mut acc = DMatrix::<Complex<T>>::zeros(m, m);
    for x in &batch.snapshots {
        acc.gerc(
            Complex::new(T::one(), T::zero()),
            x,
            x,
            Complex::new(T::one(), T::zero()),
        );
    }
    let scale = T::one() / T::of(batch.snapshots.len() as f64);
    Ok(acc.map(|z| z * scale))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedPower<T> {
    pub powers: Vec<T>,
    /// Index of the element with the largest noiseless power (lowest index on ties).
    pub strongest: usize,
}

/// Noiseless per-element power `|Σ_n S_n A_mn|²`.
pub fn received_power<T: Real>(a: &SteeringMatrix<T>, signals: &[SourceSignal<T>]) -> ReceivedPower<T> {
    let a = a.entries();
    let powers: Vec<T> = (0..a.nrows())
        .map(|m| {
            signals
                .iter()
                .enumerate()
                .fold(Complex::new(T::zero(), T::zero()), |acc, (n, s)| {
                    acc + s.amplitude * a[(m, n)]
                })
                .norm_sqr()
        })
        .collect();
    let mut strongest = 0;
    for (m, &p) in powers.iter().enumerate() {
        if p > powers[strongest] {
            strongest = m;
        }
    }
    ReceivedPower { powers, strongest }
}

impl<T: Real> Scenario<T> {
    pub fn steering(&self) -> Result<SteeringMatrix<T>> {
        steering_matrix(&self.delays()?, &self.freqs())
    }

    pub fn covariance_set(&self, a: &SteeringMatrix<T>) -> Result<CovarianceSet<T>> {
        covariances(a, &self.signals, self.noise_variance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn sigs(amps: &[Complex<f64>]) -> Vec<SourceSignal<f64>> {
        amps.iter().map(|&a| SourceSignal::new(1e6, a).unwrap()).collect()
    }

    #[test]
    fn zero_delays_give_ones() {
        let a = steering_matrix(&DMatrix::zeros(3, 2), &[1e6, 2e6]).unwrap();
        assert!(a.entries().iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn quarter_period_delay_is_minus_j() {
        let a = steering_matrix(&DMatrix::from_element(1, 1, 2.5e-5), &[1e4]).unwrap();
        assert!((a.entries()[(0, 0)] - c(0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_shape_mismatch() {
        assert!(steering_matrix(&DMatrix::<f64>::zeros(3, 2), &[1.0]).is_err());
    }

    #[test]
    fn coherent_source_covariance() {
        let a = SteeringMatrix(DMatrix::from_element(1, 2, c(1.0, 0.0)));
        let cov = covariances(&a, &sigs(&[c(2.0, 2.0), c(1.0, 3.0)]), 1.0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[c(8.0, 0.0), c(8.0, -4.0), c(8.0, 4.0), c(10.0, 0.0)]);
        assert!((&cov.source_cov - expect).norm() < 1e-12);
        assert!((cov.array_cov[(0, 0)] - c(35.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn silent_sources_leave_noise_floor() {
        let a = SteeringMatrix(DMatrix::from_element(3, 2, c(0.0, 1.0)));
        let cov = covariances(&a, &sigs(&[c(0.0, 0.0), c(0.0, 0.0)]), 5.0).unwrap();
        let expect = DMatrix::<Complex<f64>>::identity(3, 3) * c(5.0, 0.0);
        assert_eq!(cov.array_cov, expect);
        assert!(covariances(&a, &sigs(&[c(1.0, 0.0), c(0.0, 0.0)]), 0.0).is_err());
    }

    #[test]
    fn noiseless_snapshots_are_exact() {
        let a = steering_matrix(&DMatrix::from_row_slice(2, 1, &[1e-7, 3e-7]), &[1e6]).unwrap();
        let s = sigs(&[c(2.0, -1.0)]);
        let batch = synthesize_snapshots(&a, &s, 0.0, 3, 9).unwrap();
        let clean = a.entries() * DVector::from_element(1, c(2.0, -1.0));
        assert!(batch.snapshots.iter().all(|x| x == &clean));

        let one = synthesize_snapshots(&a, &s, 0.0, 1, 9).unwrap();
        let rx = sample_covariance(&one).unwrap();
        assert!((rx - &clean * clean.adjoint()).norm() < 1e-12);
    }

    #[test]
    fn snapshots_are_seeded() {
        let a = steering_matrix(&DMatrix::from_row_slice(2, 1, &[1e-7, 3e-7]), &[1e6]).unwrap();
        let s = sigs(&[c(1.0, 0.0)]);
        let b1 = synthesize_snapshots(&a, &s, 2.0, 5, 42).unwrap();
        let b2 = synthesize_snapshots(&a, &s, 2.0, 5, 42).unwrap();
        let b3 = synthesize_snapshots(&a, &s, 2.0, 5, 43).unwrap();
        assert_eq!(b1, b2);
        assert_ne!(b1.snapshots, b3.snapshots);
        assert!(synthesize_snapshots(&a, &s, 2.0, 0, 42).is_err());
    }

    #[test]
    fn empty_batch_is_rejected() {
        let b = SnapshotBatch::<f64> {
            snapshots: vec![],
            seed: 0,
        };
        assert!(sample_covariance(&b).is_err());
    }

    #[test]
    fn single_source_power_is_flat() {
        let a = steering_matrix(&DMatrix::from_row_slice(3, 1, &[1e-7, 2.2e-7, 3.9e-7]), &[1.3e6]).unwrap();
        let p = received_power(&a, &sigs(&[c(3.0, 4.0)]));
        assert!(p.powers.iter().all(|&x| (x - 25.0).abs() < 1e-10));
        assert_eq!(p.strongest, 0);
    }
}
