//! Planar source/sensor geometry.
//!
//! Two encodings are supported. The polar one places every sensor and source
//! by (radius, azimuth) about a common origin and is what the steering model
//! and its derivatives consume. The pairwise one describes, for every
//! (element k, source n) pair, the vertical distance `H_kn` and the arrival
//! angle `φ_kn`.
//!
//! Frame convention for the pairwise form: the reference axis is the global
//! x-axis, `H_kn` is the y-offset of source n above the horizontal line
//! through element k, and `φ_kn ∈ (0, π)` is the angle between the x-axis and
//! the element→source line of sight. Source n therefore sits at
//! `sensor_k + (H_kn·cot φ_kn, H_kn)`, and translating element k along x
//! leaves every `H_kn` untouched.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::signal_model::SourceSignal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceGeom<T> {
    pub range_m: T,
    pub bearing_rad: T,
}

impl<T: Real> SourceGeom<T> {
    pub fn new(range_m: T, bearing_rad: T) -> Result<Self> {
        if !(range_m > T::zero()) {
            return invalid(format!("source range must be positive, got {range_m}"));
        }
        Ok(Self {
            range_m,
            bearing_rad: wrap_angle(bearing_rad),
        })
    }

    pub fn from_cartesian(p: Vector2<T>) -> Result<Self> {
        Self::new(p.norm(), p.y.atan2(p.x))
    }

    pub fn position(&self) -> Vector2<T> {
        Vector2::new(
            self.range_m * self.bearing_rad.cos(),
            self.range_m * self.bearing_rad.sin(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorGeom<T> {
    pub radius_m: T,
    pub azimuth_rad: T,
}

impl<T: Real> SensorGeom<T> {
    pub fn new(radius_m: T, azimuth_rad: T) -> Result<Self> {
        if !(radius_m >= T::zero()) {
            return invalid(format!("sensor radius must be nonnegative, got {radius_m}"));
        }
        Ok(Self {
            radius_m,
            azimuth_rad: wrap_angle(azimuth_rad),
        })
    }

    pub fn from_cartesian(p: Vector2<T>) -> Result<Self> {
        let radius = p.norm();
        if radius == T::zero() {
            return Self::new(radius, T::zero());
        }
        Self::new(radius, p.y.atan2(p.x))
    }

    pub fn position(&self) -> Vector2<T> {
        Vector2::new(
            self.radius_m * self.azimuth_rad.cos(),
            self.radius_m * self.azimuth_rad.sin(),
        )
    }
}

/// Maps an angle into `[0, 2π)`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let tau = T::two_pi();
    let w = a % tau;
    let w = if w < T::zero() { w + tau } else { w };
    if w >= tau {
        T::zero()
    } else {
        w
    }
}

/// Vertical distances and arrival angles, rows = elements, columns = sources.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseGeometry<T: Real> {
    pub vertical_m: DMatrix<T>,
    pub arrival_rad: DMatrix<T>,
}

impl<T: Real> PairwiseGeometry<T> {
    pub fn new(vertical_m: DMatrix<T>, arrival_rad: DMatrix<T>) -> Result<Self> {
        if vertical_m.shape() != arrival_rad.shape() {
            return invalid(format!(
                "vertical distance matrix is {:?} but arrival angle matrix is {:?}",
                vertical_m.shape(),
                arrival_rad.shape()
            ));
        }
        if vertical_m.nrows() == 0 || vertical_m.ncols() == 0 {
            return invalid("pairwise geometry needs at least one element and one source");
        }
        for ((k, n), h) in indexed(&vertical_m) {
            if !(h > T::zero()) {
                return invalid(format!("vertical distance H[{k}][{n}] must be positive, got {h}"));
            }
        }
        for ((k, n), phi) in indexed(&arrival_rad) {
            if !(phi > T::zero() && phi < T::pi()) {
                return Err(Error::SingularGeometry(format!(
                    "arrival angle φ[{k}][{n}] = {phi} rad is outside (0, π)"
                )));
            }
        }
        Ok(Self {
            vertical_m,
            arrival_rad,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.vertical_m.nrows()
    }

    pub fn num_sources(&self) -> usize {
        self.vertical_m.ncols()
    }

    /// Horizontal offset `H·cot φ` of source n from element k.
    pub fn horizontal_offset(&self, k: usize, n: usize) -> T {
        self.vertical_m[(k, n)] / self.arrival_rad[(k, n)].tan()
    }

    /// Delay matrix implied by the table (`H / (c sin φ)` per pair).
    pub fn delays(&self, velocity_mps: T) -> Result<DMatrix<T>> {
        let (m, n) = self.vertical_m.shape();
        let mut out = DMatrix::zeros(m, n);
        for k in 0..m {
            for j in 0..n {
                out[(k, j)] = delay_from_pairwise(self.vertical_m[(k, j)], self.arrival_rad[(k, j)], velocity_mps)?;
            }
        }
        Ok(out)
    }
}

fn indexed<T: Real>(m: &DMatrix<T>) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
    (0..m.nrows()).flat_map(move |k| (0..m.ncols()).map(move |n| ((k, n), m[(k, n)])))
}

/// A complete observation setup in polar form.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T: Real> {
    pub sources: Vec<SourceGeom<T>>,
    pub sensors: Vec<SensorGeom<T>>,
    pub velocity_mps: T,
    pub signals: Vec<SourceSignal<T>>,
    pub noise_variance: T,
    pub snapshots: usize,
}

impl<T: Real> Scenario<T> {
    pub fn new(
        sources: Vec<SourceGeom<T>>,
        sensors: Vec<SensorGeom<T>>,
        velocity_mps: T,
        signals: Vec<SourceSignal<T>>,
        noise_variance: T,
        snapshots: usize,
    ) -> Result<Self> {
        if sources.is_empty() {
            return invalid("scenario needs at least one source");
        }
        if sources.len() != signals.len() {
            return invalid(format!(
                "{} sources but {} signal descriptions",
                sources.len(),
                signals.len()
            ));
        }
        if sources.len() >= sensors.len() {
            return invalid(format!(
                "an array of M elements separates at most M - 1 sources; got N = {} with M = {}",
                sources.len(),
                sensors.len()
            ));
        }
        if !(velocity_mps > T::zero()) {
            return invalid(format!("propagation velocity must be positive, got {velocity_mps}"));
        }
        if !(noise_variance > T::zero()) {
            return invalid(format!("noise variance must be positive, got {noise_variance}"));
        }
        if snapshots == 0 {
            return invalid("snapshot count must be at least 1");
        }
        for (n, s) in signals.iter().enumerate() {
            if !(s.freq_hz > T::zero()) {
                return invalid(format!("source {n} frequency must be positive, got {}", s.freq_hz));
            }
        }
        for (n, s) in sources.iter().enumerate() {
            if !(s.range_m > T::zero()) {
                return invalid(format!("source {n} range must be positive"));
            }
        }
        for (m, s) in sensors.iter().enumerate() {
            if !(s.radius_m >= T::zero()) {
                return invalid(format!("sensor {m} radius must be nonnegative"));
            }
        }
        Ok(Self {
            sources,
            sensors,
            velocity_mps,
            signals,
            noise_variance,
            snapshots,
        })
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn num_sensors(&self) -> usize {
        self.sensors.len()
    }

    pub fn freqs(&self) -> Vec<T> {
        self.signals.iter().map(|s| s.freq_hz).collect()
    }

    pub fn amplitudes(&self) -> DVector<nalgebra::Complex<T>> {
        DVector::from_iterator(self.signals.len(), self.signals.iter().map(|s| s.amplitude))
    }

    /// M×N matrix of propagation delays.
    pub fn delays(&self) -> Result<DMatrix<T>> {
        let mut out = DMatrix::zeros(self.num_sensors(), self.num_sources());
        for (m, sensor) in self.sensors.iter().enumerate() {
            for (n, source) in self.sources.iter().enumerate() {
                out[(m, n)] = delay(sensor, source, self.velocity_mps)?;
            }
        }
        Ok(out)
    }

    /// Copy with sensor `k` translated by `offset` (meters, global frame).
    pub fn with_sensor_moved(&self, k: usize, offset: Vector2<T>) -> Result<Self> {
        if k >= self.num_sensors() {
            return invalid(format!("element index {k} out of range for M = {}", self.num_sensors()));
        }
        let mut out = self.clone();
        out.sensors[k] = SensorGeom::from_cartesian(self.sensors[k].position() + offset)?;
        Ok(out)
    }
}

/// Source-to-sensor propagation delay in seconds.
pub fn delay<T: Real>(sensor: &SensorGeom<T>, source: &SourceGeom<T>, velocity_mps: T) -> Result<T> {
    if !(velocity_mps > T::zero()) {
        return invalid(format!("propagation velocity must be positive, got {velocity_mps}"));
    }
    if !(source.range_m > T::zero()) {
        return invalid(format!("source range must be positive, got {}", source.range_m));
    }
    Ok(distance(sensor, source) / velocity_mps)
}

/// `|source − sensor|` via the law of cosines.
pub(crate) fn distance<T: Real>(sensor: &SensorGeom<T>, source: &SourceGeom<T>) -> T {
    let r = source.range_m;
    let rho = sensor.radius_m;
    let sq = r * r + rho * rho - (r + r) * rho * (source.bearing_rad - sensor.azimuth_rad).cos();
    sq.max(T::zero()).sqrt()
}

/// Delay recovered from a (vertical distance, arrival angle) pair.
pub fn delay_from_pairwise<T: Real>(vertical_m: T, arrival_rad: T, velocity_mps: T) -> Result<T> {
    if !(velocity_mps > T::zero()) {
        return invalid(format!("propagation velocity must be positive, got {velocity_mps}"));
    }
    let s = arrival_rad.sin();
    if !(arrival_rad > T::zero() && arrival_rad < T::pi()) || s <= T::zero() {
        return Err(Error::SingularGeometry(format!(
            "arrival angle {arrival_rad} rad has no positive sine"
        )));
    }
    Ok(vertical_m / (velocity_mps * s))
}

/// Pairwise form of a polar scenario in the global frame.
pub fn pairwise_from_polar<T: Real>(scenario: &Scenario<T>) -> Result<PairwiseGeometry<T>> {
    let (m, n) = (scenario.num_sensors(), scenario.num_sources());
    let mut vertical = DMatrix::zeros(m, n);
    let mut arrival = DMatrix::zeros(m, n);
    for (k, sensor) in scenario.sensors.iter().enumerate() {
        let p = sensor.position();
        for (j, source) in scenario.sources.iter().enumerate() {
            let d = source.position() - p;
            if !(d.y > T::zero()) {
                return Err(Error::SingularGeometry(format!(
                    "source {j} is not above the reference line through element {k} (offset {})",
                    d.y
                )));
            }
            vertical[(k, j)] = d.y;
            arrival[(k, j)] = d.y.atan2(d.x);
        }
    }
    PairwiseGeometry::new(vertical, arrival)
}

/// Cartesian positions solved from a pairwise table.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement<T: Real> {
    pub sensors: Vec<Vector2<T>>,
    pub sources: Vec<Vector2<T>>,
    /// RMS per-pair inconsistency in meters.
    pub residual_m: T,
}

/// Least-squares placement with element 1 pinned at the origin.
///
/// Each pair contributes `source_n − sensor_k = (H_kn·cot φ_kn, H_kn)`; the
/// x and y components form two independent linear systems sharing one design
/// matrix.
pub fn reconstruct_positions<T: Real>(pairwise: &PairwiseGeometry<T>) -> Result<Placement<T>> {
    let m = pairwise.num_elements();
    let n = pairwise.num_sources();
    // unknowns: sensors 1..m (element 0 is pinned), then sources 0..n
    let unknowns = (m - 1) + n;
    let rows = m * n;
    let mut design = DMatrix::<T>::zeros(rows, unknowns);
    let mut rhs = DMatrix::<T>::zeros(rows, 2);
    for k in 0..m {
        for j in 0..n {
            let row = k * n + j;
            design[(row, (m - 1) + j)] = T::one();
            if k > 0 {
                design[(row, k - 1)] = -T::one();
            }
            rhs[(row, 0)] = pairwise.horizontal_offset(k, j);
            rhs[(row, 1)] = pairwise.vertical_m[(k, j)];
        }
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = T::default_epsilon().sqrt() * smax;
    if svd.singular_values.iter().any(|&s| s <= tol) {
        return Err(Error::DegenerateGeometry(
            "pairwise table does not determine all positions".into(),
        ));
    }
    let sol = svd
        .solve(&rhs, T::default_epsilon())
        .map_err(|e| Error::DegenerateGeometry(e.to_string()))?;
    let resid = &design * &sol - &rhs;
    let residual_m = (resid.norm_squared() / T::of(rows as f64)).sqrt();

    let mut sensors = vec![Vector2::zeros()];
    for k in 1..m {
        sensors.push(Vector2::new(sol[(k - 1, 0)], sol[(k - 1, 1)]));
    }
    let sources = (0..n)
        .map(|j| Vector2::new(sol[(m - 1 + j, 0)], sol[(m - 1 + j, 1)]))
        .collect();
    Ok(Placement {
        sensors,
        sources,
        residual_m,
    })
}

/// RMS misfit between a table and explicit positions, same measure as
/// [`Placement::residual_m`].
pub fn table_residual<T: Real>(pairwise: &PairwiseGeometry<T>, sensors: &[Vector2<T>], sources: &[Vector2<T>]) -> T {
    let mut acc = T::zero();
    for (k, s) in sensors.iter().enumerate() {
        for (n, p) in sources.iter().enumerate() {
            let d = p - s;
            let ex = d.x - pairwise.horizontal_offset(k, n);
            let ey = d.y - pairwise.vertical_m[(k, n)];
            acc += ex * ex + ey * ey;
        }
    }
    (acc / T::of((sensors.len() * sources.len()) as f64)).sqrt()
}

/// Polar scenario from a pairwise table, plus the least-squares residual.
pub fn reconstruct_polar<T: Real>(
    pairwise: &PairwiseGeometry<T>,
    velocity_mps: T,
    signals: Vec<SourceSignal<T>>,
    noise_variance: T,
    snapshots: usize,
) -> Result<(Scenario<T>, T)> {
    if pairwise.num_elements() < 2 {
        return invalid("reconstruction needs at least two elements");
    }
    let placement = reconstruct_positions(pairwise)?;
    let scenario = scenario_from_positions(
        &placement.sensors,
        &placement.sources,
        velocity_mps,
        signals,
        noise_variance,
        snapshots,
    )?;
    Ok((scenario, placement.residual_m))
}

pub(crate) fn scenario_from_positions<T: Real>(
    sensors: &[Vector2<T>],
    sources: &[Vector2<T>],
    velocity_mps: T,
    signals: Vec<SourceSignal<T>>,
    noise_variance: T,
    snapshots: usize,
) -> Result<Scenario<T>> {
    let sensors = sensors
        .iter()
        .map(|&p| SensorGeom::from_cartesian(p))
        .collect::<Result<Vec<_>>>()?;
    let sources = sources
        .iter()
        .map(|&p| {
            SourceGeom::from_cartesian(p)
                .map_err(|_| Error::DegenerateGeometry("a source coincides with the frame origin".into()))
        })
        .collect::<Result<Vec<_>>>()?;
    Scenario::new(sources, sensors, velocity_mps, signals, noise_variance, snapshots)
}

/// Far-field radius `D² / 8l`, everything in wavelengths.
pub fn far_field_radius<T: Real>(aperture_wavelengths: T, departure_wavelengths: T) -> Result<T> {
    if !(aperture_wavelengths > T::zero()) || !(departure_wavelengths > T::zero()) {
        return invalid("aperture and wavefront departure must both be positive");
    }
    Ok(aperture_wavelengths * aperture_wavelengths / (T::of(8.0) * departure_wavelengths))
}

/// A polar scenario together with the pairwise table that describes it.
///
/// For scenarios loaded from a table the table is kept verbatim (it may be
/// mildly inconsistent) and `residual_m` records the reconstruction misfit.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation<T: Real> {
    pub scenario: Scenario<T>,
    pub pairwise: PairwiseGeometry<T>,
    pub residual_m: T,
}

impl<T: Real> Constellation<T> {
    pub fn from_polar(scenario: Scenario<T>) -> Result<Self> {
        let pairwise = pairwise_from_polar(&scenario)?;
        Ok(Self {
            scenario,
            pairwise,
            residual_m: T::zero(),
        })
    }

    pub fn from_pairwise(
        pairwise: PairwiseGeometry<T>,
        velocity_mps: T,
        signals: Vec<SourceSignal<T>>,
        noise_variance: T,
        snapshots: usize,
    ) -> Result<Self> {
        let (scenario, residual_m) = reconstruct_polar(&pairwise, velocity_mps, signals, noise_variance, snapshots)?;
        Ok(Self {
            scenario,
            pairwise,
            residual_m,
        })
    }

    /// Same constellation under a different physical setup (velocity,
    /// signals, noise, snapshots); geometry is untouched.
    pub fn with_scenario_params(
        &self,
        velocity_mps: T,
        signals: Vec<SourceSignal<T>>,
        noise_variance: T,
        snapshots: usize,
    ) -> Result<Self> {
        let s = &self.scenario;
        let scenario = Scenario::new(
            s.sources.clone(),
            s.sensors.clone(),
            velocity_mps,
            signals,
            noise_variance,
            snapshots,
        )?;
        Ok(Self {
            scenario,
            pairwise: self.pairwise.clone(),
            residual_m: self.residual_m,
        })
    }
}
