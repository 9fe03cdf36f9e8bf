//! Helpers shared by the integration tests. Everything here is computed
//! from first principles so that it can serve as an oracle for the library.

#![allow(dead_code)]

use std::io::Write;

use nalgebra::{Complex, DMatrix, Vector2};
use nearfield_crb::geometry::{SensorGeom, SourceGeom};
use nearfield_crb::io::parse_scenario;
use nearfield_crb::{Constellation, Scenario, SourceSignal};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type C64 = Complex<f64>;

pub const SCENARIO_A: &str = include_str!("../../scenarios/scenario_a.json");
pub const SCENARIO_B: &str = include_str!("../../scenarios/scenario_b.json");

pub fn bundled(text: &str) -> Constellation {
    parse_scenario(text).unwrap().build(None, None).unwrap().0
}

pub fn scenario_a() -> Constellation {
    bundled(SCENARIO_A)
}

pub fn scenario_b() -> Constellation {
    bundled(SCENARIO_B)
}

/// One result line per acceptance criterion. Written straight to stderr so
/// the line shows up even when the harness captures test output.
pub fn report(criterion: u32, passed: bool, detail: &str) {
    let line = format!(
        "[acceptance] criterion {criterion:>2}: {} | {detail}\n",
        if passed { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

/// Random planar scenario: sensors in a small patch around the origin, all
/// sources well above them.
pub fn random_scenario(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Scenario {
    let sensors = (0..m)
        .map(|_| {
            let p = Vector2::new(rng.random_range(-15.0..15.0), rng.random_range(-10.0..0.0));
            SensorGeom::from_cartesian(p).unwrap()
        })
        .collect();
    let sources = (0..n)
        .map(|_| {
            let r = rng.random_range(40.0..150.0);
            let th: f64 = rng.random_range(30.0_f64..150.0).to_radians();
            SourceGeom::new(r, th).unwrap()
        })
        .collect();
    let signals = (0..n)
        .map(|_| {
            let f = rng.random_range(2e5..2e6);
            let s = Complex::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            SourceSignal::new(f, s).unwrap()
        })
        .collect();
    let eta = rng.random_range(0.5..2.0);
    Scenario::new(sources, sensors, 3e8, signals, eta, 1).unwrap()
}

/// Random scenario with 2..=6 sensors and 1..=min(3, M−1) sources.
pub fn random_small_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let m = rng.random_range(2..=6);
    let n = rng.random_range(1..=3.min(m - 1));
    random_scenario(rng, m, n)
}

fn source_xy(s: &Scenario, n: usize) -> Vector2<f64> {
    let src = s.sources[n];
    Vector2::new(src.range_m * src.bearing_rad.cos(), src.range_m * src.bearing_rad.sin())
}

fn sensor_xy(s: &Scenario, m: usize) -> Vector2<f64> {
    let e = s.sensors[m];
    Vector2::new(e.radius_m * e.azimuth_rad.cos(), e.radius_m * e.azimuth_rad.sin())
}

/// `exp(−j 2π f_n |p_n − q_m| / c)` from Cartesian positions.
pub fn steering(s: &Scenario) -> DMatrix<C64> {
    DMatrix::from_fn(s.num_sensors(), s.num_sources(), |m, n| {
        let d = (source_xy(s, n) - sensor_xy(s, m)).norm();
        let phase = -2.0 * std::f64::consts::PI * s.signals[n].freq_hz * d / s.velocity_mps;
        Complex::new(phase.cos(), phase.sin())
    })
}

pub fn amplitudes(s: &Scenario) -> Vec<C64> {
    s.signals.iter().map(|x| x.amplitude).collect()
}

pub fn outer(s: &[C64]) -> DMatrix<C64> {
    DMatrix::from_fn(s.len(), s.len(), |p, q| s[p] * s[q].conj())
}

pub fn array_cov(a: &DMatrix<C64>, rs: &DMatrix<C64>, eta: f64) -> DMatrix<C64> {
    let m = a.nrows();
    a * rs * a.adjoint() + DMatrix::<C64>::identity(m, m) * Complex::new(eta, 0.0)
}

pub fn rx(s: &Scenario) -> DMatrix<C64> {
    array_cov(&steering(s), &outer(&amplitudes(s)), s.noise_variance)
}

/// Copy of `s` with source `n` moved in bearing (`axis = 0`) or range (`1`).
pub fn nudge(s: &Scenario, n: usize, axis: usize, h: f64) -> Scenario {
    let mut out = s.clone();
    let src = s.sources[n];
    out.sources[n] = if axis == 0 {
        SourceGeom::new(src.range_m, src.bearing_rad + h).unwrap()
    } else {
        SourceGeom::new(src.range_m + h, src.bearing_rad).unwrap()
    };
    out
}

pub fn fd_step(s: &Scenario, n: usize, axis: usize) -> f64 {
    if axis == 0 {
        1e-6
    } else {
        1e-6 * s.sources[n].range_m
    }
}

/// Central difference of the steering matrix with respect to one source coordinate.
pub fn steering_fd(s: &Scenario, n: usize, axis: usize) -> DMatrix<C64> {
    let h = fd_step(s, n, axis);
    let d = steering(&nudge(s, n, axis, h)) - steering(&nudge(s, n, axis, -h));
    d / Complex::new(2.0 * h, 0.0)
}

/// Hermitian basis of the source covariance in parameter order: diagonal
/// entries, then (Re, Im) of each upper-triangle entry in row order.
pub fn cov_basis(n: usize) -> Vec<DMatrix<C64>> {
    let mut out = Vec::new();
    for k in 0..n {
        let mut e = DMatrix::zeros(n, n);
        e[(k, k)] = Complex::new(1.0, 0.0);
        out.push(e);
    }
    for p in 0..n {
        for q in p + 1..n {
            let mut re = DMatrix::zeros(n, n);
            re[(p, q)] = Complex::new(1.0, 0.0);
            re[(q, p)] = Complex::new(1.0, 0.0);
            let mut im = DMatrix::zeros(n, n);
            im[(p, q)] = Complex::new(0.0, 1.0);
            im[(q, p)] = Complex::new(0.0, -1.0);
            out.push(re);
            out.push(im);
        }
    }
    out
}

/// Every `∂R_x` by central differences of the oracle covariance.
pub fn rx_derivatives_fd(s: &Scenario) -> Vec<DMatrix<C64>> {
    let n = s.num_sources();
    let mut out = Vec::new();
    for axis in 0..2 {
        for src in 0..n {
            let h = fd_step(s, src, axis);
            let d = rx(&nudge(s, src, axis, h)) - rx(&nudge(s, src, axis, -h));
            out.push(d / Complex::new(2.0 * h, 0.0));
        }
    }
    let a = steering(s);
    let rs = outer(&amplitudes(s));
    let h = 1e-4 * rs.iter().fold(0.0_f64, |acc, z| acc.max(z.norm())).max(1.0);
    for e in cov_basis(n) {
        let plus = &rs + &e * Complex::new(h, 0.0);
        let minus = &rs - &e * Complex::new(h, 0.0);
        let d = array_cov(&a, &plus, s.noise_variance) - array_cov(&a, &minus, s.noise_variance);
        out.push(d / Complex::new(2.0 * h, 0.0));
    }
    let (m, eta) = (s.num_sensors(), s.noise_variance);
    let h = 1e-6 * eta;
    let d = array_cov(&a, &rs, eta + h) - array_cov(&a, &rs, eta - h);
    debug_assert_eq!(d.nrows(), m);
    out.push(d / Complex::new(2.0 * h, 0.0));
    out
}

/// `F_ij = N_s Re tr(R⁻¹ ∂_i R R⁻¹ ∂_j R)` with a plain matrix inverse.
pub fn fim_trace(r: &DMatrix<C64>, derivs: &[DMatrix<C64>], snapshots: usize) -> DMatrix<f64> {
    let w = r.clone().try_inverse().expect("invertible covariance");
    let prods: Vec<_> = derivs.iter().map(|d| &w * d).collect();
    let p = prods.len();
    DMatrix::from_fn(p, p, |i, j| snapshots as f64 * (&prods[i] * &prods[j]).trace().re)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(mut a: DMatrix<C64>) -> C64 {
    let n = a.nrows();
    let mut acc = Complex::new(1.0, 0.0);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm()))
            .unwrap();
        if a[(pivot, col)].norm() == 0.0 {
            return Complex::new(0.0, 0.0);
        }
        if pivot != col {
            a.swap_rows(pivot, col);
            acc = -acc;
        }
        let p = a[(col, col)];
        acc *= p;
        for row in col + 1..n {
            let f = a[(row, col)] / p;
            for k in col..n {
                let v = a[(col, k)];
                a[(row, k)] -= f * v;
            }
        }
    }
    acc
}

pub fn rel_frobenius(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

pub fn approx_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
