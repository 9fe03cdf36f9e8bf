//! Self-checks run by `nfcrb validate`: finite-difference derivatives, the
//! closed-form FIM against the trace form, and the Hadamard bounds.

use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fim_crb::{block_deviations, fim_closed_form, fim_generic, rx_derivatives, steering_derivatives, Axis};
use crate::geometry::{Constellation, Scenario, SourceGeom};
use crate::reposition::{gf_objective, hadamard_bound, phase_terms};
use crate::scalar::Real;
use crate::signal_model::received_power;

pub const DERIVATIVE_RTOL: f64 = 1e-6;
pub const FIM_RTOL: f64 = 1e-4;
pub const CLOSED_FORM_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn render(&self) -> String {
        let mut o = String::new();
        for c in &self.checks {
            let _ = writeln!(
                o,
                "{}  {:<34} {}",
                if c.passed { "ok  " } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(o, "{} checks, {} failed", self.checks.len(), failed);
        o
    }
}

/// Copy of `scenario` with source `n` shifted by `delta` along `axis`.
pub fn perturb_source<T: Real>(scenario: &Scenario<T>, n: usize, axis: Axis, delta: T) -> Result<Scenario<T>> {
    let mut out = scenario.clone();
    let s = scenario.sources[n];
    out.sources[n] = match axis {
        Axis::Bearing => SourceGeom::new(s.range_m, s.bearing_rad + delta)?,
        Axis::Range => SourceGeom::new(s.range_m + delta, s.bearing_rad)?,
    };
    Ok(out)
}

fn step<T: Real>(scenario: &Scenario<T>, n: usize, axis: Axis) -> T {
    match axis {
        Axis::Bearing => T::of(1e-6),
        Axis::Range => T::of(1e-6) * scenario.sources[n].range_m,
    }
}

fn rel_err<T: Real>(a: &DMatrix<Complex<T>>, b: &DMatrix<Complex<T>>) -> T {
    let scale = b.norm();
    let diff = (a - b).norm();
    if scale > T::zero() {
        diff / scale
    } else {
        diff
    }
}

/// Largest relative error of `∂A/∂θ_n` and `∂A/∂r_n` against central
/// differences, per axis.
pub fn steering_fd_error<T: Real>(scenario: &Scenario<T>) -> Result<(T, T)> {
    let mut worst = [T::zero(), T::zero()];
    for (slot, axis) in [Axis::Bearing, Axis::Range].into_iter().enumerate() {
        let analytic = steering_derivatives(scenario, axis)?;
        for (n, d) in analytic.iter().enumerate() {
            let h = step(scenario, n, axis);
            let plus = perturb_source(scenario, n, axis, h)?.steering()?;
            let minus = perturb_source(scenario, n, axis, -h)?.steering()?;
            let fd = (plus.entries() - minus.entries()).map(|z| z / (h + h));
            worst[slot] = worst[slot].max(rel_err(d, &fd));
        }
    }
    Ok((worst[0], worst[1]))
}

/// `∂R_x` with the bearing and range entries replaced by central differences.
pub fn rx_derivatives_fd<T: Real>(scenario: &Scenario<T>) -> Result<Vec<DMatrix<Complex<T>>>> {
    let a = scenario.steering()?;
    let cov = scenario.covariance_set(&a)?;
    let mut derivs = rx_derivatives(scenario, &a, &cov)?;
    let n = scenario.num_sources();
    for (offset, axis) in [(0, Axis::Bearing), (n, Axis::Range)] {
        for src in 0..n {
            let h = step(scenario, src, axis);
            let rx = |s: Scenario<T>| -> Result<DMatrix<Complex<T>>> {
                let a = s.steering()?;
                Ok(s.covariance_set(&a)?.array_cov)
            };
            let plus = rx(perturb_source(scenario, src, axis, h)?)?;
            let minus = rx(perturb_source(scenario, src, axis, -h)?)?;
            derivs[offset + src] = (plus - minus).map(|z| z / (h + h));
        }
    }
    Ok(derivs)
}

/// `max|F_analytic − F_fd| / max|F_analytic|`.
pub fn fim_fd_error<T: Real>(scenario: &Scenario<T>) -> Result<T> {
    let a = scenario.steering()?;
    let cov = scenario.covariance_set(&a)?;
    let exact = fim_generic(&cov.array_cov, &rx_derivatives(scenario, &a, &cov)?, scenario.snapshots)?;
    let fd = fim_generic(&cov.array_cov, &rx_derivatives_fd(scenario)?, scenario.snapshots)?;
    let (e, f) = (exact.entries(), fd.entries());
    Ok((&e - &f).amax() / e.amax())
}

fn random_complex(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<Complex<f64>> {
    DMatrix::from_fn(m, m, |_, _| {
        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Runs every check on one constellation.
pub fn validate(constellation: &Constellation<f64>) -> Result<ValidationReport> {
    let s = &constellation.scenario;
    let mut report = ValidationReport::default();

    let (eth, er) = steering_fd_error(s)?;
    report.push(
        "steering derivative (bearing)",
        eth <= DERIVATIVE_RTOL,
        format!("max rel err {eth:.3e} (tol {DERIVATIVE_RTOL:.0e})"),
    );
    report.push(
        "steering derivative (range)",
        er <= DERIVATIVE_RTOL,
        format!("max rel err {er:.3e} (tol {DERIVATIVE_RTOL:.0e})"),
    );

    let ef = fim_fd_error(s)?;
    report.push(
        "FIM vs finite-difference FIM",
        ef <= FIM_RTOL,
        format!("max rel err {ef:.3e} (tol {FIM_RTOL:.0e})"),
    );

    let a = s.steering()?;
    let cov = s.covariance_set(&a)?;
    let generic = fim_generic(&cov.array_cov, &rx_derivatives(s, &a, &cov)?, s.snapshots)?;
    let closed = fim_closed_form(s, &a, &cov, s.snapshots)?;
    for d in block_deviations(&closed, &generic) {
        report.push(
            format!("closed-form block {}", d.block.name()),
            d.relative <= CLOSED_FORM_RTOL,
            format!("rel dev {:.3e} (tol {CLOSED_FORM_RTOL:.0e})", d.relative),
        );
    }

    let det = crate::fim_crb::det_rx(s)?;
    let bound = hadamard_bound(&cov.array_cov)?;
    report.push(
        "Hadamard bound on R_x",
        det <= bound * (1.0 + 1e-12),
        format!("det {det:.4e} <= bound {bound:.4e}"),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut worst = 0.0_f64;
    for trial in 0..200 {
        let x = random_complex(&mut rng, 1 + trial % 6);
        worst = worst.max(x.determinant().norm() / hadamard_bound(&x)?);
    }
    report.push(
        "Hadamard bound, 200 random matrices",
        worst <= 1.0 + 1e-12,
        format!("max |det|/bound {worst:.4}"),
    );

    let power = received_power(&a, &s.signals);
    let smax = s.signals.iter().map(|x| x.amplitude.norm_sqr()).fold(0.0, f64::max);
    for k in 0..s.num_sensors() {
        let gf = gf_objective(&phase_terms(constellation, k)?);
        let rhs = smax * gf;
        report.push(
            format!("element power bound, element {}", k + 1),
            power.powers[k] <= rhs * (1.0 + 1e-12),
            format!("|X|^2 {:.4e} <= |S_max|^2 (G+F) {:.4e}", power.powers[k], rhs),
        );
    }
    Ok(report)
}
