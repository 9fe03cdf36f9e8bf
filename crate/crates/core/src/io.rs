//! Scenario files, run reports and CSV output.
//!
//! Scenario files are JSON. Angles are in degrees; the pairwise tables have
//! one row per element and one column per source.

use std::fmt::Write as _;
use std::io::{Read, Write};

use nalgebra::{Complex, DMatrix, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fim_crb::{assess, block_deviations, fim_closed_form, BlockDeviation, CrbDiagnostics};
use crate::geometry::{Constellation, PairwiseGeometry, Scenario, SensorGeom, SourceGeom};
use crate::optimizer::{Comparison, SweepRow};
use crate::reposition::RepositionPlan;
use crate::scalar::{deg, to_deg};
use crate::signal_model::{received_power, SourceSignal};

pub const DEFAULT_NOISE_VARIANCE: f64 = 1.0;
pub const DEFAULT_SNAPSHOTS: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub freq_hz: f64,
    pub amplitude: ComplexValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSource {
    pub range_m: f64,
    pub bearing_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSensor {
    pub radius_m: f64,
    pub azimuth_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSpec {
    pub sources: Vec<PolarSource>,
    pub sensors: Vec<PolarSensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairwiseSpec {
    pub vertical_m: Vec<Vec<f64>>,
    pub arrival_deg: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub velocity_mps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<usize>,
    pub signals: Vec<SignalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar: Option<PolarSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<PairwiseSpec>,
}

fn schema<T>(path: impl Into<String>, message: impl Into<String>) -> Result<T> {
    Err(Error::Schema {
        path: path.into(),
        message: message.into(),
    })
}

fn check_matrix(path: &str, rows: &[Vec<f64>], n: usize) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return schema(
                format!("{path}[{i}]"),
                format!("expected {n} columns (one per source), found {}", row.len()),
            );
        }
    }
    Ok(())
}

fn check_sizes(m: usize, n: usize) -> Result<()> {
    if n >= m {
        return invalid(format!(
            "the array must have more elements than sources (N < M), got N = {n}, M = {m}"
        ));
    }
    Ok(())
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema {
            path: if path == "." { "(root)".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })?;
    file.validate()?;
    Ok(file)
}

impl ScenarioFile {
    pub fn validate(&self) -> Result<()> {
        let n = self.signals.len();
        if n == 0 {
            return schema("signals", "at least one source is required");
        }
        let m = match (&self.polar, &self.pairwise) {
            (Some(_), Some(_)) => return schema("(root)", "give exactly one of \"polar\" and \"pairwise\", not both"),
            (None, None) => return schema("(root)", "missing geometry: give one of \"polar\" or \"pairwise\""),
            (Some(p), None) => {
                if p.sources.len() != n {
                    return schema(
                        "polar.sources",
                        format!("{} sources listed but {n} signals given", p.sources.len()),
                    );
                }
                p.sensors.len()
            }
            (None, Some(p)) => {
                let m = p.vertical_m.len();
                if p.arrival_deg.len() != m {
                    return schema(
                        "pairwise.arrival_deg",
                        format!("expected {m} rows (one per element), found {}", p.arrival_deg.len()),
                    );
                }
                check_matrix("pairwise.vertical_m", &p.vertical_m, n)?;
                check_matrix("pairwise.arrival_deg", &p.arrival_deg, n)?;
                m
            }
        };
        check_sizes(m, n)?;
        if self.snapshots == Some(0) {
            return schema("snapshots", "must be at least 1");
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn encoding(&self) -> &'static str {
        if self.pairwise.is_some() {
            "pairwise"
        } else {
            "polar"
        }
    }

    fn signals(&self) -> Result<Vec<SourceSignal<f64>>> {
        self.signals
            .iter()
            .map(|s| SourceSignal::new(s.freq_hz, Complex::new(s.amplitude.re, s.amplitude.im)))
            .collect()
    }

    /// Builds the constellation. Command-line overrides win over file values,
    /// which win over the defaults; `settings` records which one applied.
    pub fn build(&self, eta: Option<f64>, snapshots: Option<usize>) -> Result<(Constellation<f64>, Vec<Setting>)> {
        self.validate()?;
        let (eta, eta_src) = pick(eta, self.noise_variance, DEFAULT_NOISE_VARIANCE);
        let (ns, ns_src) = pick(snapshots, self.snapshots, DEFAULT_SNAPSHOTS);
        let signals = self.signals()?;
        let constellation = match (&self.polar, &self.pairwise) {
            (Some(p), None) => {
                let sources = p
                    .sources
                    .iter()
                    .map(|s| SourceGeom::new(s.range_m, deg(s.bearing_deg)))
                    .collect::<Result<Vec<_>>>()?;
                let sensors = p
                    .sensors
                    .iter()
                    .map(|s| SensorGeom::new(s.radius_m, deg(s.azimuth_deg)))
                    .collect::<Result<Vec<_>>>()?;
                Constellation::from_polar(Scenario::new(sources, sensors, self.velocity_mps, signals, eta, ns)?)?
            }
            (None, Some(p)) => {
                let (m, n) = (p.vertical_m.len(), self.signals.len());
                let v = DMatrix::from_fn(m, n, |i, j| p.vertical_m[i][j]);
                let a = DMatrix::from_fn(m, n, |i, j| deg(p.arrival_deg[i][j]));
                Constellation::from_pairwise(PairwiseGeometry::new(v, a)?, self.velocity_mps, signals, eta, ns)?
            }
            _ => unreachable!("validated above"),
        };
        let settings = vec![
            Setting::new("noise_variance", fmt_sci(eta), eta_src),
            Setting::new("snapshots", ns.to_string(), ns_src),
            Setting::new("velocity_mps", fmt_sci(self.velocity_mps), SettingSource::File),
        ];
        Ok((constellation, settings))
    }
}

fn pick<T: Copy>(cli: Option<T>, file: Option<T>, default: T) -> (T, SettingSource) {
    match (cli, file) {
        (Some(v), _) => (v, SettingSource::CommandLine),
        (None, Some(v)) => (v, SettingSource::File),
        (None, None) => (default, SettingSource::Default),
    }
}

/// Reads and parses a scenario file from disk.
pub fn load_scenario(path: &std::path::Path) -> Result<ScenarioFile> {
    parse_scenario(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SettingSource {
    Default,
    File,
    CommandLine,
}

/// One input parameter and where its value came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Setting {
    pub name: String,
    pub value: String,
    pub source: SettingSource,
}

impl Setting {
    pub fn new(name: impl Into<String>, value: impl Into<String>, source: SettingSource) -> Self {
        Self {
            name: name.into(),
            value: value.into(),
            source,
        }
    }
}

/// C-style `%.4e`: five significant digits, signed two-digit exponent.
pub fn fmt_sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.4e}");
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

/// Everything `compute` prints for one constellation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub name: String,
    pub encoding: String,
    pub num_sensors: usize,
    pub num_sources: usize,
    pub settings: Vec<Setting>,
    pub det_rx: f64,
    pub rx_condition: f64,
    pub crb_theta: Vec<f64>,
    pub crb_r: Vec<f64>,
    pub crb_theta_total: f64,
    pub crb_r_total: f64,
    pub residual_m: Option<f64>,
    pub powers: Vec<f64>,
    pub strongest: usize,
    pub diagnostics: CrbDiagnostics<f64>,
    pub block_deviations: Vec<BlockDeviation<f64>>,
    pub sensor_positions: Vec<Vector2<f64>>,
}

impl RunReport {
    pub fn new(name: &str, encoding: &str, constellation: &Constellation<f64>, settings: Vec<Setting>) -> Result<Self> {
        let s = &constellation.scenario;
        let bounds = assess(s)?;
        let a = s.steering()?;
        let cov = s.covariance_set(&a)?;
        let closed = fim_closed_form(s, &a, &cov, s.snapshots)?;
        let power = received_power(&a, &s.signals);
        Ok(Self {
            name: name.to_string(),
            encoding: encoding.to_string(),
            num_sensors: s.num_sensors(),
            num_sources: s.num_sources(),
            settings,
            det_rx: bounds.det_rx,
            rx_condition: bounds.rx_condition,
            crb_theta: bounds.crb.crb_theta.clone(),
            crb_r: bounds.crb.crb_r.clone(),
            crb_theta_total: bounds.crb.crb_theta_total,
            crb_r_total: bounds.crb.crb_r_total,
            residual_m: (encoding == "pairwise").then_some(constellation.residual_m),
            powers: power.powers,
            strongest: power.strongest,
            diagnostics: bounds.crb.diagnostics,
            block_deviations: block_deviations(&closed, &bounds.fim),
            sensor_positions: s.sensors.iter().map(|x| x.position()).collect(),
        })
    }

    pub fn render(&self) -> String {
        let mut o = String::new();
        let _ = writeln!(
            o,
            "scenario   {} ({} encoding, M = {}, N = {})",
            self.name, self.encoding, self.num_sensors, self.num_sources
        );
        for s in &self.settings {
            let tag = match s.source {
                SettingSource::Default => "  [default]",
                SettingSource::File => "",
                SettingSource::CommandLine => "  [command line]",
            };
            let _ = writeln!(o, "  {:<16} {}{}", s.name, s.value, tag);
        }
        let _ = writeln!(o, "det(R_x)   {}", fmt_sci(self.det_rx));
        let _ = writeln!(o, "cond(R_x)  {}", fmt_sci(self.rx_condition));
        let _ = writeln!(o, "source  crb_theta [rad^2]  crb_r [m^2]");
        for (i, (t, r)) in self.crb_theta.iter().zip(&self.crb_r).enumerate() {
            let _ = writeln!(o, "  {:<5} {:<18} {}", i + 1, fmt_sci(*t), fmt_sci(*r));
        }
        let _ = writeln!(
            o,
            "  total {:<18} {}",
            fmt_sci(self.crb_theta_total),
            fmt_sci(self.crb_r_total)
        );
        if let Some(r) = self.residual_m {
            let _ = writeln!(o, "table residual  {} m (rms)", fmt_sci(r));
        }
        let _ = writeln!(o, "element powers (noiseless), strongest = {}", self.strongest + 1);
        for (k, p) in self.powers.iter().enumerate() {
            let pos = self.sensor_positions[k];
            let _ = writeln!(
                o,
                "  {:<3} {:<12} at ({:.3}, {:.3}) m",
                k + 1,
                fmt_sci(*p),
                pos.x,
                pos.y
            );
        }
        let d = &self.diagnostics;
        let _ = writeln!(
            o,
            "FIM  dim {}  rank {}{}  cond {}  asymmetry {}",
            d.dimension,
            d.rank,
            if d.rank_deficient {
                " (RANK DEFICIENT, pseudo-inverse used)"
            } else {
                ""
            },
            fmt_sci(d.condition_number),
            fmt_sci(d.asymmetry)
        );
        let _ = writeln!(o, "closed-form vs trace-form FIM, max relative deviation per block:");
        for b in &self.block_deviations {
            let _ = writeln!(o, "  {:<12} {}", b.block.name(), fmt_sci(b.relative));
        }
        o
    }

    /// `metric,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(["metric", "value"])?;
        let mut rec = |k: String, v: f64| out.write_record([k, fmt_sci(v)]);
        rec("det_rx".into(), self.det_rx)?;
        for (i, v) in self.crb_theta.iter().enumerate() {
            rec(format!("crb_theta_{}", i + 1), *v)?;
        }
        for (i, v) in self.crb_r.iter().enumerate() {
            rec(format!("crb_r_{}", i + 1), *v)?;
        }
        rec("crb_theta_total".into(), self.crb_theta_total)?;
        rec("crb_r_total".into(), self.crb_r_total)?;
        if let Some(r) = self.residual_m {
            rec("residual_m".into(), r)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn render_plan(plan: &RepositionPlan<f64>, settings: &[Setting]) -> String {
    let mut o = String::new();
    let _ = writeln!(
        o,
        "plan       {:?} mode, element {}, objective {}",
        plan.mode,
        plan.element + 1,
        plan.objective.name()
    );
    for s in settings {
        let tag = if s.source == SettingSource::Default {
            "  [default]"
        } else {
            ""
        };
        let _ = writeln!(o, "  {:<16} {}{}", s.name, s.value, tag);
    }
    let angles: Vec<String> = plan
        .new_arrival_rad
        .iter()
        .map(|a| format!("{:.2}", to_deg(*a)))
        .collect();
    let _ = writeln!(o, "new arrival angles [deg]  {}", angles.join(", "));
    let _ = writeln!(o, "displacement  {:.3} m along x", plan.displacement_m);
    if plan.vertical_shift_m != 0.0 {
        let _ = writeln!(o, "vertical shift  {:.3} m", plan.vertical_shift_m);
    }
    let _ = writeln!(
        o,
        "objective  {} -> {}",
        fmt_sci(plan.objective_before),
        fmt_sci(plan.objective_after)
    );
    if plan.skipped_points > 0 {
        let _ = writeln!(
            o,
            "skipped    {} grid points that could not be evaluated",
            plan.skipped_points
        );
    }
    for n in &plan.notes {
        let _ = writeln!(
            o,
            "  source {}: phase target {}, sin argument {:.4}, {}{}",
            n.source + 1,
            n.target,
            n.sin_argument,
            if n.feasible {
                "feasible"
            } else {
                "INFEASIBLE, angle kept"
            },
            match (n.branch, n.implied_displacement_m) {
                (Some(b), Some(d)) => format!(", {b} branch, implied move {d:.2} m"),
                _ => String::new(),
            }
        );
    }
    o
}

pub fn render_comparison(c: &Comparison<f64>) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "improvement (before / after)");
    let _ = writeln!(o, "  det(R_x)   {:.4}", c.det_ratio);
    let _ = writeln!(o, "  crb_theta  {:.4}", c.crb_theta_ratio);
    let _ = writeln!(o, "  crb_r      {:.4}", c.crb_r_ratio);
    if !c.worsened.is_empty() {
        let _ = writeln!(o, "  WARNING: worse after the move: {}", c.worsened.join(", "));
    }
    o
}

pub const SWEEP_HEADER: [&str; 6] = ["point", "mode", "det", "crb_theta_total", "crb_r_total", "flags"];

/// Writes sweep rows as CSV (LF line endings, `%.4e` numbers).
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow<f64>], w: W) -> Result<()> {
    if rows.is_empty() {
        return invalid("nothing to write: the sweep produced no rows (empty mode list?)");
    }
    let mut out = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for r in rows {
        out.write_record([
            fmt_sci(r.point),
            r.mode.name().to_string(),
            fmt_sci(r.det_rx),
            fmt_sci(r.crb_theta_total),
            fmt_sci(r.crb_r_total),
            r.diagnostics.flags(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// A sweep row as read back from CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SweepRecord {
    pub point: f64,
    pub mode: String,
    pub det: f64,
    pub crb_theta_total: f64,
    pub crb_r_total: f64,
    pub flags: String,
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    if headers.iter().ne(SWEEP_HEADER.iter().copied()) {
        return schema("header", format!("expected {:?}", SWEEP_HEADER));
    }
    Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
}

pub fn render_sweep(rows: &[SweepRow<f64>]) -> String {
    let mut o = String::new();
    let _ = writeln!(
        o,
        "{:<12} {:<11} {:<12} {:<16} {:<12} flags",
        "point", "mode", "det", "crb_theta_total", "crb_r_total"
    );
    for r in rows {
        let _ = writeln!(
            o,
            "{:<12} {:<11} {:<12} {:<16} {:<12} {}",
            fmt_sci(r.point),
            r.mode.name(),
            fmt_sci(r.det_rx),
            fmt_sci(r.crb_theta_total),
            fmt_sci(r.crb_r_total),
            r.diagnostics.flags()
        );
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::{RowDiagnostics, SweepMode};

    const POLAR: &str = r#"{
        "name": "toy",
        "velocity_mps": 3e8,
        "signals": [{"freq_hz": 1e6, "amplitude": {"re": 1, "im": 0}}],
        "polar": {
            "sources": [{"range_m": 80, "bearing_deg": 80}],
            "sensors": [{"radius_m": 0, "azimuth_deg": 0}, {"radius_m": 20, "azimuth_deg": 0}]
        }
    }"#;

    #[test]
    fn sci_format_matches_c() {
        assert_eq!(fmt_sci(1.234e6), "1.2340e+06");
        assert_eq!(fmt_sci(-2.5e-7), "-2.5000e-07");
        assert_eq!(fmt_sci(0.0), "0.0000e+00");
        assert_eq!(fmt_sci(1.8112e-42), "1.8112e-42");
        assert_eq!(fmt_sci(f64::NAN), "NaN");
    }

    #[test]
    fn polar_file_builds_with_defaults_listed() {
        let f = parse_scenario(POLAR).unwrap();
        let (c, settings) = f.build(None, Some(4)).unwrap();
        assert_eq!(c.scenario.noise_variance, 1.0);
        assert_eq!(c.scenario.snapshots, 4);
        assert_eq!(settings[0].source, SettingSource::Default);
        assert_eq!(settings[1].source, SettingSource::CommandLine);
    }

    #[test]
    fn both_encodings_rejected() {
        let text = POLAR.replace(
            "\"polar\"",
            "\"pairwise\": {\"vertical_m\": [[1],[1]], \"arrival_deg\": [[90],[90]]}, \"polar\"",
        );
        assert!(matches!(parse_scenario(&text), Err(Error::Schema { .. })));
    }

    #[test]
    fn too_many_sources_rejected() {
        let text = r#"{"velocity_mps": 3e8,
            "signals": [{"freq_hz": 1e6, "amplitude": {"re": 1, "im": 0}},
                        {"freq_hz": 1e6, "amplitude": {"re": 1, "im": 0}}],
            "pairwise": {"vertical_m": [[1, 2], [3, 4]], "arrival_deg": [[90, 90], [90, 90]]}}"#;
        let err = parse_scenario(text).unwrap_err().to_string();
        assert!(err.contains("N < M"), "{err}");
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let text = POLAR.replace("\"re\": 1", "\"re\": \"one\"");
        match parse_scenario(&text) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "signals[0].amplitude.re"),
            other => panic!("{other:?}"),
        }
        let ragged = r#"{"velocity_mps": 3e8,
            "signals": [{"freq_hz": 1e6, "amplitude": {"re": 1, "im": 0}}],
            "pairwise": {"vertical_m": [[1], [3, 4]], "arrival_deg": [[90], [90]]}}"#;
        match parse_scenario(ragged) {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "pairwise.vertical_m[1]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scenario_file_round_trip() {
        let f = parse_scenario(POLAR).unwrap();
        let again = parse_scenario(&f.to_json().unwrap()).unwrap();
        assert_eq!(f, again);
    }

    fn row(point: f64, mode: SweepMode) -> SweepRow<f64> {
        SweepRow {
            point,
            mode,
            det_rx: 1.23456789e-42 * point,
            crb_theta_total: 9.87654321e-30,
            crb_r_total: 5.5e3,
            diagnostics: RowDiagnostics {
                element: Some(2),
                ..Default::default()
            },
        }
    }

    #[test]
    fn sweep_csv_round_trip() {
        let rows: Vec<_> = (1..=10)
            .flat_map(|i| {
                [
                    row(i as f64 * 1e6, SweepMode::Primary),
                    row(i as f64 * 1e6, SweepMode::Reposition),
                ]
            })
            .collect();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 21);
        assert!(!text.contains('\r'));
        let back = read_sweep_csv(buf.as_slice()).unwrap();
        for (r, b) in rows.iter().zip(&back) {
            assert_eq!(b.mode, r.mode.name());
            for (x, y) in [
                (r.point, b.point),
                (r.det_rx, b.det),
                (r.crb_theta_total, b.crb_theta_total),
            ] {
                assert!(((x - y) / x).abs() <= 5e-5, "{x} vs {y}");
            }
        }
        assert!(write_sweep_csv(&[], Vec::new()).is_err());
    }
}
