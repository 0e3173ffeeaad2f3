//! Recorded output of a run and the a-priori bound monitors.

use serde::{Deserialize, Serialize};

use super::{Grid, ModelParams, ProfileKind, SystemState};
use crate::hysteresis::SimpleConfig;
use crate::kernels::ThresholdDomain;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub domain: ThresholdDomain,
    pub diffusivity: f64,
    pub kind: ProfileKind,
    pub eps: Option<f64>,
    pub v0: f64,
    pub w0: f64,
    pub r0: SimpleConfig,
    pub v_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub v: f64,
    pub w: f64,
    pub u_bar: f64,
    pub cfg: SimpleConfig,
    /// `U` at the series probe thresholds.
    pub probes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Birth,
    SlideStart,
    SlideStop,
    Collision,
    Exit,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Birth => "birth",
            EventKind::SlideStart => "slide_start",
            EventKind::SlideStop => "slide_stop",
            EventKind::Collision => "collision",
            EventKind::Exit => "exit",
        }
    }
}

/// One relay event. For collisions `u_ratio` is `U/Ubar` at the leftmost
/// front right after the collision (`hi` if none is left); otherwise at
/// `position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub kind: EventKind,
    pub t: f64,
    pub position: f64,
    #[serde(rename = "U_ratio")]
    pub u_ratio: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorViolation {
    pub check: String,
    pub t: f64,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub steps_checked: u64,
    pub violation_count: u64,
    /// First violations, capped.
    pub violations: Vec<MonitorViolation>,
    pub max_exchange_drift: f64,
    pub max_mass_decrease: f64,
    pub min_u: f64,
    pub max_abs_w: f64,
    /// `sup |u - Ubar/L|` at the end of the run.
    pub final_sup_deviation: f64,
}

impl MonitorReport {
    pub fn is_clean(&self) -> bool {
        self.violation_count == 0
    }
}

/// Per-step checks of the a-priori bounds.
pub(crate) struct Monitor {
    report: MonitorReport,
    v0: f64,
    mu: f64,
    hi: f64,
    exchange0: f64,
    prev_mass: f64,
}

impl Monitor {
    pub(crate) fn new(params: &ModelParams, state: &SystemState, mass: f64) -> Self {
        Monitor {
            report: MonitorReport {
                min_u: f64::INFINITY,
                ..Default::default()
            },
            v0: state.v,
            mu: params.mu(),
            hi: params.domain.hi,
            exchange0: mass + state.v,
            prev_mass: mass,
        }
    }

    fn flag(&mut self, check: &str, t: f64, value: f64, bound: f64) {
        self.report.violation_count += 1;
        if self.report.violations.len() < 100 {
            self.report.violations.push(MonitorViolation {
                check: check.to_string(),
                t,
                value,
                bound,
            });
        }
    }

    pub(crate) fn check(&mut self, grid: &Grid, s: &SystemState) {
        self.report.steps_checked += 1;
        let mass = grid.mass(&s.u);
        let t = s.t;
        let v_bound = self.v0 * (-self.mu * t).exp() * (1.0 + 1e-6);
        if s.v > v_bound {
            self.flag("nutrient_decay", t, s.v, v_bound);
        }
        let decrease = self.prev_mass - mass;
        self.report.max_mass_decrease = self.report.max_mass_decrease.max(decrease);
        if decrease > 1e-8 {
            self.flag("mass_nondecreasing", t, decrease, 1e-8);
        }
        self.prev_mass = mass;
        self.report.max_abs_w = self.report.max_abs_w.max(s.w.abs());
        if s.w.abs() > self.hi {
            self.flag("input_bound", t, s.w.abs(), self.hi);
        }
        let min_u = s.u.iter().copied().fold(f64::INFINITY, f64::min);
        self.report.min_u = self.report.min_u.min(min_u);
        if min_u < -1e-12 {
            self.flag("positivity", t, min_u, -1e-12);
        }
        let drift = (mass + s.v - self.exchange0).abs();
        self.report.max_exchange_drift = self.report.max_exchange_drift.max(drift);
        if drift > 1e-6 {
            self.flag("exchange", t, drift, 1e-6);
        }
    }

    pub(crate) fn finish(mut self, grid: &Grid, s: &SystemState) -> MonitorReport {
        let mean = grid.mass(&s.u) / (grid.hi() - grid.lo());
        self.report.final_sup_deviation = s.u.iter().map(|u| (u - mean).abs()).fold(0.0, f64::max);
        self.report
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub meta: ScenarioMeta,
    pub grid_faces: Vec<f64>,
    pub probes: Vec<f64>,
    pub records: Vec<Record>,
    pub events: Vec<LoggedEvent>,
    pub monitor: MonitorReport,
    pub stop_reason: String,
    pub steps: u64,
}

impl TimeSeries {
    pub fn new(meta: ScenarioMeta, grid_faces: Vec<f64>, probes: Vec<f64>) -> Self {
        TimeSeries {
            meta,
            grid_faces,
            probes,
            records: Vec::new(),
            events: Vec::new(),
            monitor: MonitorReport::default(),
            stop_reason: String::new(),
            steps: 0,
        }
    }

    pub(crate) fn push_record(&mut self, r: Record) {
        debug_assert!(self.records.last().is_none_or(|p| p.t < r.t));
        self.records.push(r);
    }

    pub fn end_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    /// Index of the latest record at or before `t`.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let k = self.records.partition_point(|r| r.t <= t);
        k.checked_sub(1)
    }

    pub fn cfg_at(&self, t: f64) -> Option<&SimpleConfig> {
        self.index_at(t).map(|i| &self.records[i].cfg)
    }

    /// `U(x)/Ubar` for record `i`, from a probe at `x` or a stored profile.
    pub fn upper_ratio(&self, i: usize, x: f64) -> Option<f64> {
        let r = &self.records[i];
        if let Some(k) = self.probes.iter().position(|&p| p == x) {
            return Some(r.probes[k] / r.u_bar);
        }
        let u = r.u.as_ref()?;
        let faces = &self.grid_faces;
        let hi = *faces.last()?;
        if x >= hi {
            return Some(0.0);
        }
        let j = faces.partition_point(|&f| f <= x).saturating_sub(1);
        let mut acc = u[j] * (faces[j + 1] - x.max(faces[0]));
        for k in j + 1..u.len() {
            acc += u[k] * (faces[k + 1] - faces[k]);
        }
        Some(acc / r.u_bar)
    }
}
