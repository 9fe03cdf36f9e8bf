//! Moving the strongest-receiving element to lower the array covariance
//! determinant.
//!
//! By Hadamard's inequality `|det R_x|` is bounded by the largest diagonal
//! entry of `R_x`, i.e. by the power at the strongest element k. That power
//! is in turn bounded by `|S_max|²·(G + F)` with
//! `G + F = |Σ_n e^{jT_n}|²` and `T_n = ω_n·H_kn / (c·sin φ_kn)`. Element k
//! is then moved so that its arrival angles put the phases `T_n` on
//! alternating near-zero (`π/m`) and `π/2` targets.
//!
//! Moves keep every vertical distance `H_kn`: in the global frame that is a
//! translation along the x-axis.

use nalgebra::{Complex, DMatrix, Vector2};

use crate::error::{invalid, Error, Result};
use crate::fim_crb::{assess, det_rx};
use crate::geometry::{table_residual, Constellation, PairwiseGeometry, SensorGeom};
use crate::scalar::Real;
use crate::signal_model::received_power;

/// `(max|a_ij|)^M · M^{M/2}`, an upper bound on `|det X|`.
pub fn hadamard_bound<T: Real>(matrix: &DMatrix<Complex<T>>) -> Result<T> {
    if !matrix.is_square() {
        return invalid(format!(
            "Hadamard bound needs a square matrix, got {:?}",
            matrix.shape()
        ));
    }
    let m = matrix.nrows();
    let amax = matrix.iter().fold(T::zero(), |acc, z| acc.max(z.norm_sqr().sqrt()));
    let mf = T::of(m as f64);
    Ok(amax.powi(m as i32) * mf.powf(mf / T::of(2.0)))
}

/// Phases `T_n` seen at one element.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTerms<T> {
    pub values: Vec<T>,
    pub element: usize,
    /// `g_n = ω_n·H_kn / c`.
    pub scale: Vec<T>,
}

fn phase_terms_at<T: Real>(
    constellation: &Constellation<T>,
    element: usize,
    arrival_rad: &[T],
) -> Result<PhaseTerms<T>> {
    let pw = &constellation.pairwise;
    let s = &constellation.scenario;
    let mut values = Vec::with_capacity(arrival_rad.len());
    let mut scale = Vec::with_capacity(arrival_rad.len());
    for (n, &phi) in arrival_rad.iter().enumerate() {
        let sin = phi.sin();
        if !(phi > T::zero() && phi < T::pi()) || sin <= T::zero() {
            return Err(Error::SingularGeometry(format!(
                "arrival angle of source {n} at element {element} has no positive sine"
            )));
        }
        let g = s.signals[n].angular_freq() * pw.vertical_m[(element, n)] / s.velocity_mps;
        scale.push(g);
        values.push(g / sin);
    }
    Ok(PhaseTerms { values, element, scale })
}

/// `T_n = ω_n·H_kn / (c·sin φ_kn)` for element `element` of the table.
pub fn phase_terms<T: Real>(constellation: &Constellation<T>, element: usize) -> Result<PhaseTerms<T>> {
    check_element(constellation, element)?;
    let row: Vec<T> = constellation
        .pairwise
        .arrival_rad
        .row(element)
        .iter()
        .copied()
        .collect();
    phase_terms_at(constellation, element, &row)
}

/// `G + F = (Σ cos T_n)² + (Σ sin T_n)²`.
pub fn gf_objective<T: Real>(terms: &PhaseTerms<T>) -> T {
    gf_from_phases(&terms.values)
}

pub fn gf_from_phases<T: Real>(phases: &[T]) -> T {
    let (c, s) = phases
        .iter()
        .fold((T::zero(), T::zero()), |(c, s), &t| (c + t.cos(), s + t.sin()));
    c * c + s * s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    Analytic,
    LineSearch,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `G + F` at the moved element.
    Gf,
    /// Noiseless power at the moved element.
    Power,
    Det,
    CrbTheta,
    CrbR,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Gf => "gf",
            Objective::Power => "power",
            Objective::Det => "det",
            Objective::CrbTheta => "crb_theta",
            Objective::CrbR => "crb_r",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gf" => Objective::Gf,
            "power" => Objective::Power,
            "det" => Objective::Det,
            "crb_theta" => Objective::CrbTheta,
            "crb_r" => Objective::CrbR,
            other => return invalid(format!("unknown objective {other:?}")),
        })
    }
}

/// Value of `objective` for a constellation whose element `element` is the
/// one being moved.
pub fn evaluate_objective<T: Real>(
    constellation: &Constellation<T>,
    element: usize,
    objective: Objective,
) -> Result<T> {
    let s = &constellation.scenario;
    match objective {
        Objective::Gf => Ok(gf_objective(&phase_terms(constellation, element)?)),
        Objective::Power => Ok(received_power(&s.steering()?, &s.signals).powers[element]),
        Objective::Det => det_rx(s),
        Objective::CrbTheta => Ok(assess(s)?.crb.crb_theta_total),
        Objective::CrbR => Ok(assess(s)?.crb.crb_r_total),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MSelection {
    /// Largest integer keeping `2·m·f·H/c ≤ 1`, per source.
    Auto,
    Fixed(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// `T_n = π/m`.
    NearZero { m: u32 },
    /// `T_n = π/2`.
    Quadrature,
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::NearZero { m } => write!(f, "pi/{m}"),
            Target::Quadrature => f.write_str("pi/2 (quadrature)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Acute,
    Obtuse,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Acute => "acute",
            Branch::Obtuse => "obtuse",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceNote<T> {
    pub source: usize,
    pub target: Target,
    /// Argument of the arcsine; > 1 means the target is unreachable.
    pub sin_argument: T,
    pub feasible: bool,
    pub branch: Option<Branch>,
    /// Translation of the element along x that would realize this angle alone.
    pub implied_displacement_m: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepositionPlan<T> {
    pub element: usize,
    pub mode: PlanMode,
    pub objective: Objective,
    /// Arrival angles of the moved element, one per source.
    pub new_arrival_rad: Vec<T>,
    /// Signed move along the reference axis. For analytic plans this is the
    /// consensus (median) of the per-source implied displacements.
    pub displacement_m: T,
    /// Vertical component of the move; nonzero only for 2-D grid plans.
    pub vertical_shift_m: T,
    pub objective_before: T,
    pub objective_after: T,
    pub notes: Vec<SourceNote<T>>,
    /// Search points whose objective could not be evaluated.
    pub skipped_points: usize,
}

fn check_element<T: Real>(c: &Constellation<T>, element: usize) -> Result<()> {
    if element >= c.scenario.num_sensors() {
        return invalid(format!(
            "element index {element} out of range for M = {}",
            c.scenario.num_sensors()
        ));
    }
    Ok(())
}

/// Horizontal shift of the element that turns arrival angle `from` into `to`
/// at vertical distance `h`.
fn implied_shift<T: Real>(h: T, from: T, to: T) -> T {
    h / from.tan() - h / to.tan()
}

fn median<T: Real>(values: &mut [T]) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / T::of(2.0)
    }
}

/// Median of the per-source element translations and their median absolute
/// deviation: how well the planned angles fit one common move.
fn consensus<T: Real>(shifts: &[T]) -> (T, T) {
    if shifts.is_empty() {
        return (T::zero(), T::zero());
    }
    let mut v = shifts.to_vec();
    let med = median(&mut v);
    let mut dev: Vec<T> = shifts.iter().map(|&d| (d - med).abs()).collect();
    (med, median(&mut dev))
}

/// Largest tolerated number of sources for the exhaustive target and branch
/// enumeration of the analytic plan.
pub const ANALYTIC_MAX_SOURCES: usize = 12;

fn solve_targets<T: Real>(
    constellation: &Constellation<T>,
    element: usize,
    near_zero: &[bool],
    m: MSelection,
) -> Vec<SourceNote<T>> {
    let s = &constellation.scenario;
    let pw = &constellation.pairwise;
    near_zero
        .iter()
        .enumerate()
        .map(|(src, &nz)| {
            let f = s.signals[src].freq_hz;
            let h = pw.vertical_m[(element, src)];
            let (target, arg) = if nz {
                let base = T::of(2.0) * f * h / s.velocity_mps;
                let m = match m {
                    MSelection::Fixed(m) => m,
                    MSelection::Auto => {
                        let best = (T::one() / base).floor();
                        if best >= T::one() {
                            best.as_f64().min(u32::MAX as f64) as u32
                        } else {
                            1
                        }
                    }
                };
                (Target::NearZero { m }, base * T::of(m as f64))
            } else {
                (Target::Quadrature, T::of(4.0) * f * h / s.velocity_mps)
            };
            SourceNote {
                source: src,
                target,
                sin_argument: arg,
                feasible: arg > T::zero() && arg <= T::one(),
                branch: None,
                implied_displacement_m: None,
            }
        })
        .collect()
}

/// Arrival angles for one branch choice; `None` when the mask asks for the
/// obtuse branch of a 90° solution (same angle as the acute one).
fn branch_angles<T: Real>(original: &[T], notes: &[SourceNote<T>], mask: u64) -> Option<(Vec<T>, Vec<Option<Branch>>)> {
    let mut angles = original.to_vec();
    let mut branches = vec![None; notes.len()];
    for (bit, note) in notes.iter().filter(|n| n.feasible).enumerate() {
        let acute = note.sin_argument.asin();
        let obtuse = mask >> bit & 1 == 1;
        if obtuse && T::pi() - acute == acute {
            return None;
        }
        angles[note.source] = if obtuse { T::pi() - acute } else { acute };
        branches[note.source] = Some(if obtuse { Branch::Obtuse } else { Branch::Acute });
    }
    Some((angles, branches))
}

/// Every analytic plan with minimal `G + F`, i.e. one per acute/obtuse choice
/// of the solved angles (the objective cannot tell the branches apart).
///
/// Half of the sources (the extra one for odd N) get the near-zero target
/// `π/m`, the others `π/2`; the split with the lowest `G + F` at the solved
/// angles is used, ties going to the first split in lexicographic order with
/// near-zero before `π/2`.
pub fn analytic_alternatives<T: Real>(
    constellation: &Constellation<T>,
    element: usize,
    m: MSelection,
) -> Result<Vec<RepositionPlan<T>>> {
    check_element(constellation, element)?;
    if let MSelection::Fixed(0) = m {
        return invalid("m must be a positive integer");
    }
    let n = constellation.scenario.num_sources();
    if n > ANALYTIC_MAX_SOURCES {
        return invalid(format!(
            "analytic mode enumerates target splits and is limited to {ANALYTIC_MAX_SOURCES} sources; use linesearch"
        ));
    }
    let pw = &constellation.pairwise;
    let original: Vec<T> = pw.arrival_rad.row(element).iter().copied().collect();
    let objective_before = gf_from_phases(&phase_terms_at(constellation, element, &original)?.values);
    let near_zero_count = n.div_ceil(2);

    let mut best: Option<(T, Vec<SourceNote<T>>)> = None;
    // descending masks visit near-zero-first splits first
    for split in (0u64..(1u64 << n)).rev() {
        if split.count_ones() as usize != near_zero_count {
            continue;
        }
        let nz: Vec<bool> = (0..n).map(|i| split >> (n - 1 - i) & 1 == 1).collect();
        let notes = solve_targets(constellation, element, &nz, m);
        if notes.iter().all(|x| !x.feasible) {
            continue;
        }
        let (angles, _) = branch_angles(&original, &notes, 0).expect("acute branch always exists");
        let gf = gf_from_phases(&phase_terms_at(constellation, element, &angles)?.values);
        let tol = T::of(TIE_RTOL) * gf.abs().max(T::one());
        if best.as_ref().is_none_or(|(b, _)| gf < *b - tol) {
            best = Some((gf, notes));
        }
    }
    let (gf, notes) = best.ok_or(Error::AllTargetsInfeasible)?;
    let feasible = notes.iter().filter(|x| x.feasible).count();

    let mut plans = Vec::new();
    for mask in 0u64..(1u64 << feasible) {
        let Some((angles, branches)) = branch_angles(&original, &notes, mask) else {
            continue;
        };
        let mut notes = notes.clone();
        let mut shifts = Vec::new();
        for (note, br) in notes.iter_mut().zip(branches) {
            note.branch = br;
            if br.is_some() {
                let d = implied_shift(
                    pw.vertical_m[(element, note.source)],
                    original[note.source],
                    angles[note.source],
                );
                note.implied_displacement_m = Some(d);
                shifts.push(d);
            }
        }
        let (displacement, _) = consensus(&shifts);
        plans.push(RepositionPlan {
            element,
            mode: PlanMode::Analytic,
            objective: Objective::Gf,
            new_arrival_rad: angles,
            displacement_m: displacement,
            vertical_shift_m: T::zero(),
            objective_before,
            objective_after: gf,
            notes,
            skipped_points: 0,
        });
    }
    Ok(plans)
}

/// Per-source target angles for element `element`, see
/// [`analytic_alternatives`].
///
/// The branch choice keeps the plan whose implied element translations agree
/// best (lowest median absolute deviation, robust to one unrealizable
/// source), then the one with the smallest consensus move.
pub fn analytic_reposition<T: Real>(
    constellation: &Constellation<T>,
    element: usize,
    m: MSelection,
) -> Result<RepositionPlan<T>> {
    let plans = analytic_alternatives(constellation, element, m)?;
    let mut best: Option<((T, T), RepositionPlan<T>)> = None;
    for plan in plans {
        let shifts: Vec<T> = plan.notes.iter().filter_map(|n| n.implied_displacement_m).collect();
        let (med, mad) = consensus(&shifts);
        let key = (mad, med.abs());
        let tol = T::of(1e-9);
        let better = match &best {
            None => true,
            Some(((bmad, bmed), _)) => {
                mad < *bmad - tol * bmad.max(T::one())
                    || ((mad - *bmad).abs() <= tol * bmad.max(T::one()) && key.1 < *bmed)
            }
        };
        if better {
            best = Some((key, plan));
        }
    }
    Ok(best.expect("at least one branch choice").1)
}

/// Inclusive, evenly spaced displacement grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementGrid<T> {
    pub min: T,
    pub max: T,
    pub steps: usize,
}

impl<T: Real> DisplacementGrid<T> {
    pub fn new(min: T, max: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return invalid("grid needs at least one point");
        }
        if !(min <= max) || (steps > 1 && min == max) {
            return invalid(format!("invalid grid bounds {min}..{max} with {steps} steps"));
        }
        Ok(Self { min, max, steps })
    }

    pub fn points(&self) -> Vec<T> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        let last = T::of((self.steps - 1) as f64);
        (0..self.steps)
            .map(|i| self.min + span * T::of(i as f64) / last)
            .collect()
    }
}

/// Constellation with element `element` translated by `offset`; the table row
/// of that element is recomputed from the (shifted) offsets, all other rows
/// are kept bit for bit.
pub fn move_element<T: Real>(
    constellation: &Constellation<T>,
    element: usize,
    offset: Vector2<T>,
) -> Result<Constellation<T>> {
    check_element(constellation, element)?;
    let scenario = constellation.scenario.with_sensor_moved(element, offset)?;
    let mut pairwise = constellation.pairwise.clone();
    for n in 0..pairwise.num_sources() {
        let h = constellation.pairwise.vertical_m[(element, n)] - offset.y;
        if !(h > T::zero()) {
            return Err(Error::SingularGeometry(format!(
                "moved element {element} is no longer below source {n}"
            )));
        }
        let x = constellation.pairwise.horizontal_offset(element, n) - offset.x;
        pairwise.vertical_m[(element, n)] = h;
        pairwise.arrival_rad[(element, n)] = h.atan2(x);
    }
    Ok(Constellation {
        scenario,
        pairwise,
        residual_m: constellation.residual_m,
    })
}

/// Objective values closer than this (relative) are treated as ties.
pub const TIE_RTOL: f64 = 1e-10;

/// Ordering used by every grid search: lower objective first, then smaller
/// |displacement|, then lower displacement.
pub(crate) fn improves<T: Real>(value: T, at: (T, T), best: &Option<(T, (T, T))>) -> bool {
    match best {
        None => true,
        Some((bv, bat)) => {
            let tol = T::of(TIE_RTOL) * bv.abs().max(value.abs());
            if (value - *bv).abs() > tol {
                return value < *bv;
            }
            let (na, nb) = (at.0 * at.0 + at.1 * at.1, bat.0 * bat.0 + bat.1 * bat.1);
            if na != nb {
                return na < nb;
            }
            (at.0, at.1) < (bat.0, bat.1)
        }
    }
}

/// Slides element `element` along the reference axis over `grid` (plus the
/// current position) and keeps the best position for `objective`.
pub fn line_search_reposition<T: Real>(
    constellation: &Constellation<T>,
    element: usize,
    objective: Objective,
    grid: &DisplacementGrid<T>,
) -> Result<RepositionPlan<T>> {
    check_element(constellation, element)?;
    let objective_before = evaluate_objective(constellation, element, objective)?;
    let mut best = Some((objective_before, (T::zero(), T::zero())));
    let mut skipped = 0;
    for d in grid.points() {
        let value = move_element(constellation, element, Vector2::new(d, T::zero()))
            .and_then(|c| evaluate_objective(&c, element, objective));
        match value {
            Ok(v) if v.is_finite() => {
                if improves(v, (d, T::zero()), &best) {
                    best = Some((v, (d, T::zero())));
                }
            }
            _ => skipped += 1,
        }
    }
    let (value, (d, _)) = best.expect("the current position is always a candidate");
    let mut plan = plan_for_move(
        constellation,
        element,
        objective,
        PlanMode::LineSearch,
        d,
        T::zero(),
        objective_before,
        value,
    )?;
    plan.skipped_points = skipped;
    Ok(plan)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn plan_for_move<T: Real>(
    constellation: &Constellation<T>,
    element: usize,
    objective: Objective,
    mode: PlanMode,
    dx: T,
    dy: T,
    objective_before: T,
    objective_after: T,
) -> Result<RepositionPlan<T>> {
    let moved = move_element(constellation, element, Vector2::new(dx, dy))?;
    Ok(RepositionPlan {
        element,
        mode,
        objective,
        new_arrival_rad: moved.pairwise.arrival_rad.row(element).iter().copied().collect(),
        displacement_m: dx,
        vertical_shift_m: dy,
        objective_before,
        objective_after,
        notes: Vec::new(),
        skipped_points: 0,
    })
}

/// Table-level application: element row gets the plan's angles, vertical
/// distances are kept.
pub fn apply_to_pairwise<T: Real>(
    pairwise: &PairwiseGeometry<T>,
    plan: &RepositionPlan<T>,
) -> Result<PairwiseGeometry<T>> {
    if plan.element >= pairwise.num_elements() {
        return invalid(format!("plan element {} out of range", plan.element));
    }
    if plan.new_arrival_rad.len() != pairwise.num_sources() {
        return invalid("plan angle count does not match the source count");
    }
    let mut out = pairwise.clone();
    for (n, &phi) in plan.new_arrival_rad.iter().enumerate() {
        if !(phi > T::zero() && phi < T::pi()) {
            return invalid(format!(
                "planned arrival angle {phi} rad for source {n} is outside (0, π)"
            ));
        }
        out.arrival_rad[(plan.element, n)] = phi;
        out.vertical_m[(plan.element, n)] = pairwise.vertical_m[(plan.element, n)] - plan.vertical_shift_m;
    }
    PairwiseGeometry::new(out.vertical_m, out.arrival_rad)
}

/// Constellation after carrying out `plan`.
///
/// Grid and line-search plans are physical translations of the element.
/// Analytic plans rewrite the element's table row; every other element and
/// every source stays where it was, and the element is placed at the
/// least-squares fit of its new row. When the planned angles cannot all be
/// met by one position the misfit shows up in `residual_m`.
pub fn apply_reposition<T: Real>(
    constellation: &Constellation<T>,
    plan: &RepositionPlan<T>,
) -> Result<Constellation<T>> {
    check_element(constellation, plan.element)?;
    match plan.mode {
        PlanMode::LineSearch | PlanMode::Grid => {
            for &phi in &plan.new_arrival_rad {
                if !(phi > T::zero() && phi < T::pi()) {
                    return invalid(format!("planned arrival angle {phi} rad is outside (0, π)"));
                }
            }
            move_element(
                constellation,
                plan.element,
                Vector2::new(plan.displacement_m, plan.vertical_shift_m),
            )
        }
        PlanMode::Analytic => {
            let pairwise = apply_to_pairwise(&constellation.pairwise, plan)?;
            if pairwise == constellation.pairwise {
                return Ok(constellation.clone());
            }
            let s = &constellation.scenario;
            let k = plan.element;
            let sources: Vec<Vector2<T>> = s.sources.iter().map(|x| x.position()).collect();
            let fit = sources.iter().enumerate().fold(Vector2::zeros(), |acc, (n, p)| {
                acc + p - Vector2::new(pairwise.horizontal_offset(k, n), pairwise.vertical_m[(k, n)])
            }) / T::of(sources.len() as f64);
            let mut sensors: Vec<Vector2<T>> = s.sensors.iter().map(|x| x.position()).collect();
            sensors[k] = fit;
            let mut scenario = s.clone();
            scenario.sensors[k] = SensorGeom::from_cartesian(fit)?;
            Ok(Constellation {
                residual_m: table_residual(&pairwise, &sensors, &sources),
                scenario,
                pairwise,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Scenario, SourceGeom};
    use crate::signal_model::SourceSignal;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn hadamard_small_cases() {
        let i2 = DMatrix::<Complex<f64>>::identity(2, 2);
        assert!((hadamard_bound(&i2).unwrap() - 2.0).abs() < 1e-12);
        let d = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        assert!((hadamard_bound(&d).unwrap() - 8.0).abs() < 1e-12);
        assert!(hadamard_bound(&DMatrix::<Complex<f64>>::zeros(2, 3)).is_err());
    }

    #[test]
    fn gf_small_cases() {
        assert!((gf_from_phases(&[0.37_f64]) - 1.0).abs() < 1e-15);
        assert!((gf_from_phases(&[0.0, FRAC_PI_2]) - 2.0).abs() < 1e-15);
        assert!((gf_from_phases(&[0.0_f64, 0.0]) - 4.0).abs() < 1e-15);
        assert!(gf_from_phases(&[0.0, PI]) < 1e-30);
    }

    fn one_source() -> Constellation<f64> {
        let s = Scenario::new(
            vec![SourceGeom::from_cartesian(Vector2::new(10.0, 80.0)).unwrap()],
            vec![
                SensorGeom::from_cartesian(Vector2::new(0.0, 0.0)).unwrap(),
                SensorGeom::from_cartesian(Vector2::new(20.0, 5.0)).unwrap(),
            ],
            3e8,
            vec![SourceSignal::new(1e6, c(1.0, 1.0)).unwrap()],
            1.0,
            1,
        )
        .unwrap();
        Constellation::from_polar(s).unwrap()
    }

    #[test]
    fn single_source_gf_line_search_stays_put() {
        let k = one_source();
        let grid = DisplacementGrid::new(-50.0, 50.0, 11).unwrap();
        let plan = line_search_reposition(&k, 1, Objective::Gf, &grid).unwrap();
        assert_eq!(plan.displacement_m, 0.0);
        assert!((plan.objective_after - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_only_grid_is_identity() {
        let k = one_source();
        let grid = DisplacementGrid::new(0.0, 0.0, 1).unwrap();
        let plan = line_search_reposition(&k, 1, Objective::Det, &grid).unwrap();
        assert_eq!(plan.objective_after, plan.objective_before);
        assert_eq!(plan.displacement_m, 0.0);
    }

    #[test]
    fn move_keeps_vertical_distances() {
        let k = one_source();
        let moved = move_element(&k, 1, Vector2::new(7.5, 0.0)).unwrap();
        assert_eq!(moved.pairwise.vertical_m, k.pairwise.vertical_m);
        assert_eq!(moved.pairwise.arrival_rad.row(0), k.pairwise.arrival_rad.row(0));
        assert_eq!(moved.scenario.sensors[0], k.scenario.sensors[0]);
    }

    #[test]
    fn identity_analytic_plan_is_a_no_op() {
        let k = one_source();
        let plan = RepositionPlan {
            element: 1,
            mode: PlanMode::Analytic,
            objective: Objective::Gf,
            new_arrival_rad: k.pairwise.arrival_rad.row(1).iter().copied().collect(),
            displacement_m: 0.0,
            vertical_shift_m: 0.0,
            objective_before: 1.0,
            objective_after: 1.0,
            notes: vec![],
            skipped_points: 0,
        };
        assert_eq!(apply_reposition(&k, &plan).unwrap(), k);
        let mut bad = plan.clone();
        bad.new_arrival_rad[0] = PI;
        assert!(apply_reposition(&k, &bad).is_err());
    }

    #[test]
    fn objective_names_parse() {
        for o in [
            Objective::Gf,
            Objective::Power,
            Objective::Det,
            Objective::CrbTheta,
            Objective::CrbR,
        ] {
            assert_eq!(o.name().parse::<Objective>().unwrap(), o);
        }
        assert!("nope".parse::<Objective>().is_err());
    }

    #[test]
    fn grid_points_are_inclusive() {
        let g = DisplacementGrid::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.points(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!(DisplacementGrid::new(1.0, -1.0, 3).is_err());
        assert!(DisplacementGrid::<f64>::new(0.0, 1.0, 0).is_err());
    }
}
