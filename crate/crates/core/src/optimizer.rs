//! Exhaustive position search (the reference the analytic plan is judged
//! against) and the frequency / velocity sweeps.

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fim_crb::{assess, Bounds};
use crate::geometry::Constellation;
use crate::reposition::{
    analytic_reposition, apply_reposition, evaluate_objective, improves, move_element, plan_for_move, DisplacementGrid,
    MSelection, Objective, PlanMode, RepositionPlan,
};
use crate::scalar::Real;
use crate::signal_model::{received_power, SourceSignal};

/// Candidate moves of the element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region<T> {
    /// Along the reference axis only; vertical distances are kept.
    Line(DisplacementGrid<T>),
    /// Anywhere on an x/y box of offsets; vertical distances change.
    Box {
        x: DisplacementGrid<T>,
        y: DisplacementGrid<T>,
    },
}

impl<T: Real> Region<T> {
    fn offsets(&self) -> Vec<(T, T)> {
        match self {
            Region::Line(g) => g.points().into_iter().map(|d| (d, T::zero())).collect(),
            Region::Box { x, y } => {
                let ys = y.points();
                x.points()
                    .into_iter()
                    .flat_map(|dx| ys.iter().map(move |&dy| (dx, dy)))
                    .collect()
            }
        }
    }
}

/// Evaluates `objective` at every point of `region` and returns the minimizer.
///
/// Only the region is searched (the current position counts only if the
/// region contains it). Ties go to the smaller move, then the lower offset,
/// whatever the evaluation order.
pub fn grid_search<T: Real>(
    constellation: &Constellation<T>,
    element: usize,
    objective: Objective,
    region: &Region<T>,
) -> Result<RepositionPlan<T>> {
    let objective_before = evaluate_objective(constellation, element, objective)?;
    let offsets = region.offsets();
    let values: Vec<Option<T>> = offsets
        .par_iter()
        .map(|&(dx, dy)| {
            move_element(constellation, element, Vector2::new(dx, dy))
                .and_then(|c| evaluate_objective(&c, element, objective))
                .ok()
                .filter(|v| v.is_finite())
        })
        .collect();

    let mut best = None;
    let mut skipped = 0;
    for (&at, v) in offsets.iter().zip(&values) {
        match v {
            Some(v) if improves(*v, at, &best) => best = Some((*v, at)),
            Some(_) => {}
            None => skipped += 1,
        }
    }
    let (value, (dx, dy)) = best.ok_or(Error::SearchFailed)?;
    let mut plan = plan_for_move(
        constellation,
        element,
        objective,
        PlanMode::Grid,
        dx,
        dy,
        objective_before,
        value,
    )?;
    plan.skipped_points = skipped;
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Carrier frequency of one source (0-based).
    Frequency {
        source: usize,
    },
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepMode {
    Primary,
    Reposition,
}

impl SweepMode {
    pub fn name(&self) -> &'static str {
        match self {
            SweepMode::Primary => "primary",
            SweepMode::Reposition => "reposition",
        }
    }
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primary" => Ok(SweepMode::Primary),
            "reposition" => Ok(SweepMode::Reposition),
            other => invalid(format!("unknown sweep mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec<T> {
    pub vary: SweepVariable,
    pub start: T,
    pub stop: T,
    pub steps: usize,
    pub modes: Vec<SweepMode>,
    /// `m` used by the analytic plan in reposition mode.
    pub m: MSelection,
}

impl<T: Real> SweepSpec<T> {
    pub fn new(vary: SweepVariable, start: T, stop: T, steps: usize, modes: Vec<SweepMode>) -> Result<Self> {
        if !(start > T::zero()) || !(start < stop) {
            return invalid(format!("sweep needs 0 < start < stop, got {start}..{stop}"));
        }
        if steps < 2 {
            return invalid("sweep needs at least 2 steps");
        }
        if modes.is_empty() {
            return invalid("sweep needs at least one mode");
        }
        let mut seen = Vec::new();
        for m in &modes {
            if seen.contains(m) {
                return invalid(format!("sweep mode {} listed twice", m.name()));
            }
            seen.push(*m);
        }
        Ok(Self {
            vary,
            start,
            stop,
            steps,
            modes,
            m: MSelection::Auto,
        })
    }

    pub fn points(&self) -> Vec<T> {
        DisplacementGrid {
            min: self.start,
            max: self.stop,
            steps: self.steps,
        }
        .points()
    }
}

/// det(R_x) and the summed CRBs of one constellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary<T> {
    pub num_sources: usize,
    pub det_rx: T,
    pub crb_theta_total: T,
    pub crb_r_total: T,
    pub rank_deficient: bool,
}

impl<T: Real> Summary<T> {
    pub fn from_bounds(b: &Bounds<T>) -> Self {
        Self {
            num_sources: b.crb.crb_theta.len(),
            det_rx: b.det_rx,
            crb_theta_total: b.crb.crb_theta_total,
            crb_r_total: b.crb.crb_r_total,
            rank_deficient: b.crb.diagnostics.rank_deficient,
        }
    }

    pub fn of(constellation: &Constellation<T>) -> Result<Self> {
        Ok(Self::from_bounds(&assess(&constellation.scenario)?))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RowDiagnostics {
    /// Element moved in reposition mode (0-based).
    pub element: Option<usize>,
    pub rank_deficient: bool,
    /// Sources whose analytic target was out of reach.
    pub infeasible_sources: Vec<usize>,
    pub error: Option<String>,
}

impl RowDiagnostics {
    /// Compact `;`-separated form used in CSV output.
    pub fn flags(&self) -> String {
        let mut out = Vec::new();
        if let Some(k) = self.element {
            out.push(format!("element={}", k + 1));
        }
        if self.rank_deficient {
            out.push("rank_deficient".to_string());
        }
        if !self.infeasible_sources.is_empty() {
            let list: Vec<String> = self.infeasible_sources.iter().map(|s| (s + 1).to_string()).collect();
            out.push(format!("infeasible={}", list.join("/")));
        }
        if let Some(e) = &self.error {
            out.push(format!("error={}", e.replace([',', ';', '\n'], " ")));
        }
        out.join(";")
    }
}

/// One grid point under one mode. Failed points carry NaN values and the
/// error in `diagnostics`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub point: T,
    pub mode: SweepMode,
    pub det_rx: T,
    pub crb_theta_total: T,
    pub crb_r_total: T,
    pub diagnostics: RowDiagnostics,
}

fn varied<T: Real>(c: &Constellation<T>, vary: SweepVariable, value: T) -> Result<Constellation<T>> {
    let s = &c.scenario;
    match vary {
        SweepVariable::Velocity => c.with_scenario_params(value, s.signals.clone(), s.noise_variance, s.snapshots),
        SweepVariable::Frequency { source } => {
            if source >= s.num_sources() {
                return invalid(format!(
                    "sweep source {} out of range for N = {}",
                    source + 1,
                    s.num_sources()
                ));
            }
            let mut signals = s.signals.clone();
            signals[source] = SourceSignal::new(value, signals[source].amplitude)?;
            c.with_scenario_params(s.velocity_mps, signals, s.noise_variance, s.snapshots)
        }
    }
}

fn sweep_row<T: Real>(base: &Constellation<T>, spec: &SweepSpec<T>, point: T, mode: SweepMode) -> SweepRow<T> {
    let mut diagnostics = RowDiagnostics::default();
    let result = varied(base, spec.vary, point).and_then(|c| match mode {
        SweepMode::Primary => Summary::of(&c),
        SweepMode::Reposition => {
            let k = received_power(&c.scenario.steering()?, &c.scenario.signals).strongest;
            diagnostics.element = Some(k);
            let plan = analytic_reposition(&c, k, spec.m)?;
            diagnostics.infeasible_sources = plan.notes.iter().filter(|n| !n.feasible).map(|n| n.source).collect();
            Summary::of(&apply_reposition(&c, &plan)?)
        }
    });
    match result {
        Ok(s) => {
            diagnostics.rank_deficient = s.rank_deficient;
            SweepRow {
                point,
                mode,
                det_rx: s.det_rx,
                crb_theta_total: s.crb_theta_total,
                crb_r_total: s.crb_r_total,
                diagnostics,
            }
        }
        Err(e) => {
            diagnostics.error = Some(e.to_string());
            let nan = T::of(f64::NAN);
            SweepRow {
                point,
                mode,
                det_rx: nan,
                crb_theta_total: nan,
                crb_r_total: nan,
                diagnostics,
            }
        }
    }
}

/// Rows ordered by grid point, then by the order of `spec.modes`.
///
/// Reposition mode re-selects the strongest element at every point and
/// applies the analytic plan for it.
pub fn sweep<T: Real>(constellation: &Constellation<T>, spec: &SweepSpec<T>) -> Result<Vec<SweepRow<T>>> {
    // surface a bad source index once instead of on every row
    if let SweepVariable::Frequency { source } = spec.vary {
        if source >= constellation.scenario.num_sources() {
            return invalid(format!(
                "sweep source {} out of range for N = {}",
                source + 1,
                constellation.scenario.num_sources()
            ));
        }
    }
    let jobs: Vec<(T, SweepMode)> = spec
        .points()
        .into_iter()
        .flat_map(|p| spec.modes.iter().map(move |&m| (p, m)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(p, m)| sweep_row(constellation, spec, p, m))
        .collect())
}

/// before/after quotients; a ratio below 1 means the "after" constellation
/// is worse on that measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<T> {
    pub det_ratio: T,
    pub crb_theta_ratio: T,
    pub crb_r_ratio: T,
    /// Names of the measures that got worse.
    pub worsened: Vec<&'static str>,
}

pub fn compare_report<T: Real>(before: &Summary<T>, after: &Summary<T>) -> Result<Comparison<T>> {
    if before.num_sources != after.num_sources {
        return invalid(format!(
            "cannot compare reports for {} and {} sources",
            before.num_sources, after.num_sources
        ));
    }
    let det_ratio = before.det_rx / after.det_rx;
    let crb_theta_ratio = before.crb_theta_total / after.crb_theta_total;
    let crb_r_ratio = before.crb_r_total / after.crb_r_total;
    let worsened = [
        ("det", det_ratio),
        ("crb_theta", crb_theta_ratio),
        ("crb_r", crb_r_ratio),
    ]
    .into_iter()
    .filter(|(_, r)| *r < T::one())
    .map(|(n, _)| n)
    .collect();
    Ok(Comparison {
        det_ratio,
        crb_theta_ratio,
        crb_r_ratio,
        worsened,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Scenario, SensorGeom, SourceGeom};
    use nalgebra::Complex;

    fn toy() -> Constellation<f64> {
        let s = Scenario::new(
            vec![SourceGeom::from_cartesian(Vector2::new(15.0, 60.0)).unwrap()],
            vec![
                SensorGeom::from_cartesian(Vector2::new(0.0, 0.0)).unwrap(),
                SensorGeom::from_cartesian(Vector2::new(30.0, 0.0)).unwrap(),
            ],
            3e8,
            vec![SourceSignal::new(1e6, Complex::new(1.0, 0.0)).unwrap()],
            1.0,
            1,
        )
        .unwrap();
        Constellation::from_polar(s).unwrap()
    }

    fn summary(det: f64, t: f64, r: f64) -> Summary<f64> {
        Summary {
            num_sources: 3,
            det_rx: det,
            crb_theta_total: t,
            crb_r_total: r,
            rank_deficient: false,
        }
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let g = DisplacementGrid::new(7.0, 7.0, 1).unwrap();
        let plan = grid_search(&toy(), 1, Objective::Det, &Region::Line(g)).unwrap();
        assert_eq!(plan.displacement_m, 7.0);
        assert_eq!(plan.mode, PlanMode::Grid);
    }

    #[test]
    fn symmetric_toy_minimizer() {
        // middle element under the source, outer ones mirrored: CRB_θ of the
        // middle element sliding by d equals that at −d
        let s = Scenario::new(
            vec![SourceGeom::from_cartesian(Vector2::new(0.0, 60.0)).unwrap()],
            vec![
                SensorGeom::from_cartesian(Vector2::new(0.0, 0.0)).unwrap(),
                SensorGeom::from_cartesian(Vector2::new(-40.0, 0.0)).unwrap(),
                SensorGeom::from_cartesian(Vector2::new(40.0, 0.0)).unwrap(),
            ],
            3e8,
            vec![SourceSignal::new(2e6, Complex::new(1.0, 0.0)).unwrap()],
            1.0,
            1,
        )
        .unwrap();
        let c = Constellation::from_polar(s).unwrap();
        let at = |d: f64| {
            evaluate_objective(
                &move_element(&c, 0, Vector2::new(d, 0.0)).unwrap(),
                0,
                Objective::CrbTheta,
            )
            .unwrap()
        };
        assert!((at(13.0) - at(-13.0)).abs() <= 1e-9 * at(13.0));

        let fine = grid_search(
            &c,
            0,
            Objective::CrbTheta,
            &Region::Line(DisplacementGrid::new(-30.0, 30.0, 6001).unwrap()),
        )
        .unwrap();
        let coarse = grid_search(
            &c,
            0,
            Objective::CrbTheta,
            &Region::Line(DisplacementGrid::new(-30.0, 30.0, 61).unwrap()),
        )
        .unwrap();
        // ties between ±d resolve to the negative side
        assert!(coarse.displacement_m <= 0.0 && fine.displacement_m <= 0.0);
        assert!((coarse.displacement_m - fine.displacement_m).abs() <= 1.0);
        assert!(fine.objective_after <= coarse.objective_after);
    }

    #[test]
    fn box_search_can_fail_everywhere() {
        // every point pushes the element above the source
        let r = Region::Box {
            x: DisplacementGrid::new(-1.0, 1.0, 3).unwrap(),
            y: DisplacementGrid::new(70.0, 80.0, 3).unwrap(),
        };
        assert!(matches!(
            grid_search(&toy(), 1, Objective::Det, &r),
            Err(Error::SearchFailed)
        ));
    }

    #[test]
    fn compare_identity_and_worsening() {
        let a = summary(2.0, 3.0, 4.0);
        let same = compare_report(&a, &a).unwrap();
        assert_eq!(
            (same.det_ratio, same.crb_theta_ratio, same.crb_r_ratio),
            (1.0, 1.0, 1.0)
        );
        assert!(same.worsened.is_empty());
        let worse = compare_report(&a, &summary(4.0, 6.0, 8.0)).unwrap();
        assert_eq!(
            (worse.det_ratio, worse.crb_theta_ratio, worse.crb_r_ratio),
            (0.5, 0.5, 0.5)
        );
        assert_eq!(worse.worsened, vec!["det", "crb_theta", "crb_r"]);
        let mut other = a;
        other.num_sources = 2;
        assert!(compare_report(&a, &other).is_err());
    }

    #[test]
    fn sweep_spec_validation() {
        let modes = vec![SweepMode::Primary];
        assert!(SweepSpec::new(SweepVariable::Velocity, 1.0, 2.0, 1, modes.clone()).is_err());
        assert!(SweepSpec::new(SweepVariable::Velocity, 2.0, 1.0, 3, modes.clone()).is_err());
        assert!(SweepSpec::new(SweepVariable::Velocity, 1.0, 2.0, 3, vec![]).is_err());
        assert!(SweepSpec::new(
            SweepVariable::Velocity,
            1.0,
            2.0,
            3,
            vec![SweepMode::Primary, SweepMode::Primary]
        )
        .is_err());
        let spec = SweepSpec::new(SweepVariable::Velocity, 1e8, 3e8, 2, modes).unwrap();
        let rows = sweep(&toy(), &spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].point < rows[1].point);
    }

    #[test]
    fn sweep_bad_source_is_rejected() {
        let spec = SweepSpec::new(
            SweepVariable::Frequency { source: 4 },
            1e6,
            2e6,
            2,
            vec![SweepMode::Primary],
        )
        .unwrap();
        assert!(sweep(&toy(), &spec).is_err());
    }
}
