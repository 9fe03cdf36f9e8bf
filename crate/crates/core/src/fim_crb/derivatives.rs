//! Analytic derivatives of the steering matrix and of `R_x`.

use nalgebra::{Complex, DMatrix};

use super::ParameterIndex;
use crate::error::{Error, Result};
use crate::geometry::{distance, Scenario};
use crate::scalar::Real;
use crate::signal_model::{CovarianceSet, SteeringMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Bearing,
    Range,
}

/// `∂τ_mn/∂θ_n` or `∂τ_mn/∂r_n` for every pair, M×N.
pub fn delay_derivatives<T: Real>(scenario: &Scenario<T>, axis: Axis) -> Result<DMatrix<T>> {
    let c = scenario.velocity_mps;
    let mut out = DMatrix::zeros(scenario.num_sensors(), scenario.num_sources());
    for (m, sensor) in scenario.sensors.iter().enumerate() {
        for (n, source) in scenario.sources.iter().enumerate() {
            let d = distance(sensor, source);
            if !(d > T::zero()) {
                return Err(Error::SingularGeometry(format!(
                    "source {n} coincides with element {m}"
                )));
            }
            let (r, rho) = (source.range_m, sensor.radius_m);
            let dphi = source.bearing_rad - sensor.azimuth_rad;
            out[(m, n)] = match axis {
                Axis::Bearing => rho * r * dphi.sin() / (c * d),
                Axis::Range => (r - rho * dphi.cos()) / (c * d),
            };
        }
    }
    Ok(out)
}

/// `Σ_n ∂A/∂α_n`: column n holds the only nonzero column of `∂A/∂α_n`.
pub fn steering_derivative_sum<T: Real>(
    scenario: &Scenario<T>,
    a: &SteeringMatrix<T>,
    axis: Axis,
) -> Result<DMatrix<Complex<T>>> {
    let dtau = delay_derivatives(scenario, axis)?;
    let a = a.entries();
    Ok(DMatrix::from_fn(a.nrows(), a.ncols(), |m, n| {
        let w = scenario.signals[n].angular_freq();
        // −j·ω·∂τ·A
        a[(m, n)] * Complex::new(T::zero(), -(w * dtau[(m, n)]))
    }))
}

/// `∂A/∂θ_n` (or `∂A/∂r_n`) for n = 1..N, each M×N with a single nonzero column.
pub fn steering_derivatives<T: Real>(scenario: &Scenario<T>, axis: Axis) -> Result<Vec<DMatrix<Complex<T>>>> {
    let a = scenario.steering()?;
    let sum = steering_derivative_sum(scenario, &a, axis)?;
    Ok((0..sum.ncols())
        .map(|n| {
            let mut d = DMatrix::zeros(sum.nrows(), sum.ncols());
            d.set_column(n, &sum.column(n));
            d
        })
        .collect())
}

/// `∂R_x/∂p` for every parameter in [`ParameterIndex`] order.
pub fn rx_derivatives<T: Real>(
    scenario: &Scenario<T>,
    a: &SteeringMatrix<T>,
    cov: &CovarianceSet<T>,
) -> Result<Vec<DMatrix<Complex<T>>>> {
    let n = scenario.num_sources();
    let index = ParameterIndex::new(n);
    let am = a.entries();
    let ah = am.adjoint();
    // A R_s, whose column n is v_n
    let ars = am * &cov.source_cov;
    let mut out = Vec::with_capacity(index.len());
    for axis in [Axis::Bearing, Axis::Range] {
        let sum = steering_derivative_sum(scenario, a, axis)?;
        for k in 0..n {
            // ∂A/∂α_k R_s Aᴴ = d_k (row k of R_s Aᴴ)
            let d = sum.column(k);
            let v = ars.column(k);
            let mut m = d * v.adjoint();
            let mh = m.adjoint();
            m += mh;
            out.push(m);
        }
    }
    for i in 0..n * n {
        let e = index.source_cov_basis::<T>(i);
        out.push(am * e * &ah);
    }
    out.push(DMatrix::identity(am.nrows(), am.nrows()));
    Ok(out)
}
