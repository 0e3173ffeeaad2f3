//! Time integration of the coupled system
//!
//! ```text
//! u_t = D u_xx + (1/2 + w r) u v        on (lo, hi), zero flux at both ends
//! v'  = -(Ubar/2 + w P) v
//! w'  = -(1/2 + w)(1/2 - w) P
//! ```
//!
//! with `P = ∫ u r`, `Ubar = ∫ u` and `r` the distributed relay driven by `w`.
//!
//! Steps are Strang split (half diffusion, reaction, half diffusion). Inside
//! the reaction stage the relay state at any trial value of `w` is obtained
//! by applying the input path to the configuration at the start of the step,
//! so a sliding front follows `w` continuously. Births, the onset and end of
//! sliding, collisions and exits are localized by bisecting the step.

pub mod config;
pub mod diffusion;
pub mod grid;
pub mod series;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hysteresis::{config_update, MonotoneSegment, SimpleConfig, SwitchEvent};
use crate::kernels::ThresholdDomain;
pub use grid::{CellMass, Grid};
pub use series::{EventKind, LoggedEvent, MonitorReport, MonitorViolation, Record, ScenarioMeta, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub domain: ThresholdDomain,
    pub diffusivity: f64,
    pub grid_n: usize,
    /// Cell density ratio between the last tenth of the interval and the rest.
    pub grid_grading: f64,
    pub dt_init: f64,
    pub dt_max: f64,
    /// Localization tolerance for relay events, in units of `w`.
    pub tol_event: f64,
    pub tol_series: f64,
    /// Number of initial steps whose diffusion halves use two backward Euler
    /// quarter steps instead of Crank–Nicolson.
    pub smoothing_steps: u64,
}

impl ModelParams {
    pub fn new(domain: ThresholdDomain, diffusivity: f64) -> Self {
        ModelParams {
            domain,
            diffusivity,
            grid_n: 4000,
            grid_grading: 4.0,
            dt_init: 1e-4,
            dt_max: 1e-2,
            tol_event: 1e-10,
            tol_series: 1e-14,
            smoothing_steps: 4,
        }
    }

    pub fn mu(&self) -> f64 {
        self.domain.mu()
    }

    pub fn validate(&self) -> Result<()> {
        ThresholdDomain::new(self.domain.lo, self.domain.hi)?;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.diffusivity > 0.0) {
            return bad("diffusivity must be positive");
        }
        if self.grid_n < 4 {
            return bad("grid needs at least 4 cells");
        }
        if !(self.dt_init > 0.0 && self.dt_max >= self.dt_init) {
            return bad("need 0 < dt_init <= dt_max");
        }
        if !(self.tol_event > 0.0 && self.tol_series > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::graded(self.domain.lo, self.domain.hi, self.grid_n, self.grid_grading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Uniform,
    /// Normalized indicator of `[hi - eps, hi]`.
    Bump,
    CustomFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    /// Cell averages on the simulation grid.
    pub u0: Vec<f64>,
    pub v0: f64,
    pub w0: f64,
    pub r0: SimpleConfig,
    /// When set, `u0 <= eps` is required on `[lo, hi - eps]`.
    pub eps: Option<f64>,
    pub kind: ProfileKind,
}

impl InitialData {
    pub fn uniform(grid: &Grid, v0: f64, w0: f64, r0: SimpleConfig) -> Self {
        let l = grid.hi() - grid.lo();
        InitialData {
            u0: vec![1.0 / l; grid.len()],
            v0,
            w0,
            r0,
            eps: None,
            kind: ProfileKind::Uniform,
        }
    }

    /// Unit mass spread evenly over `[hi - eps, hi]`, with partial cells
    /// weighted by their overlap.
    pub fn bump(grid: &Grid, eps: f64, v0: f64, w0: f64, r0: SimpleConfig) -> Result<Self> {
        let (lo, hi) = (grid.lo(), grid.hi());
        if !(eps > 0.0 && eps <= hi - lo) {
            return Err(Error::InitialData(format!("bump width {eps} outside (0, L]")));
        }
        let u0 = grid
            .faces
            .windows(2)
            .map(|f| (f[1].min(hi) - f[0].max(hi - eps)).max(0.0) / eps / (f[1] - f[0]))
            .collect::<Vec<_>>();
        let m = grid.mass(&u0);
        Ok(InitialData {
            u0: u0.into_iter().map(|v| v / m).collect(),
            v0,
            w0,
            r0,
            eps: Some(eps),
            kind: ProfileKind::Bump,
        })
    }

    /// Linear interpolation of `(x, u)` samples to the cell centers.
    pub fn from_samples(
        grid: &Grid,
        samples: &[(f64, f64)],
        v0: f64,
        w0: f64,
        r0: SimpleConfig,
    ) -> Result<Self> {
        if samples.len() < 2 || samples.windows(2).any(|p| !(p[1].0 > p[0].0)) {
            return Err(Error::InitialData(
                "profile samples need at least two strictly increasing x values".into(),
            ));
        }
        let interp = |x: f64| {
            let k = samples.partition_point(|s| s.0 <= x).clamp(1, samples.len() - 1);
            let (a, b) = (samples[k - 1], samples[k]);
            let s = ((x - a.0) / (b.0 - a.0)).clamp(0.0, 1.0);
            a.1 + s * (b.1 - a.1)
        };
        Ok(InitialData {
            u0: grid.centers.iter().map(|&x| interp(x)).collect(),
            v0,
            w0,
            r0,
            eps: None,
            kind: ProfileKind::CustomFile,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: f64,
    pub w: f64,
    pub cfg: SimpleConfig,
    /// Accepted steps so far.
    pub steps: u64,
}

/// `(f_1, f_{-1}) = (v(1/2 + w), v(1/2 - w))`.
pub fn nutrient_split(state: &SystemState) -> (f64, f64) {
    (state.v * (0.5 + state.w), state.v * (0.5 - state.w))
}

/// Result of a reaction stage.
#[derive(Debug, Clone)]
pub struct ReactionResult {
    pub u: Vec<f64>,
    pub v: f64,
    pub w: f64,
    pub wdot_start: f64,
    pub wdot_end: f64,
}

/// Outcome of an accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: SystemState,
    pub dt: f64,
    pub events: Vec<LoggedEvent>,
    /// Whether the step was shortened to localize an event.
    pub shortened: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StopRule {
    Horizon {
        t_end: f64,
    },
    /// Stop once `v < v_min`, or at `t_max`.
    NutrientBelow {
        v_min: f64,
        t_max: f64,
    },
    /// Stop after `steps` consecutive steps with an unchanged configuration
    /// and `max u - min u < tol`, or at `t_max`.
    Quiescent {
        steps: u64,
        tol: f64,
        t_max: f64,
    },
}

impl StopRule {
    pub fn t_max(&self) -> f64 {
        match *self {
            StopRule::Horizon { t_end } => t_end,
            StopRule::NutrientBelow { t_max, .. } | StopRule::Quiescent { t_max, .. } => t_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub stop: StopRule,
    /// Record interval; events are always recorded.
    pub cadence: f64,
    /// Interval for full profile snapshots; `None` stores only the final one.
    pub snapshot_cadence: Option<f64>,
    /// Times at which steps are shortened to land exactly and store a profile.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Thresholds at which `U` is recorded with every record.
    pub probes: Vec<f64>,
    /// Nutrient level below which fronts may be declared steady.
    pub v_min: f64,
    pub max_steps: u64,
}

impl RunOptions {
    pub fn horizon(t_end: f64) -> Self {
        RunOptions {
            stop: StopRule::Horizon { t_end },
            cadence: 0.05,
            snapshot_cadence: None,
            snapshot_times: Vec::new(),
            probes: Vec::new(),
            v_min: 1e-6,
            max_steps: 50_000_000,
        }
    }
}

/// Where along the input path an event happened.
#[derive(Debug, Clone, Copy)]
struct PathEvent {
    overshoot: f64,
}

struct Trial {
    state: SystemState,
    events: Vec<LoggedEvent>,
    first_event: Option<PathEvent>,
}

/// A simulation bound to one parameter set and grid.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub params: ModelParams,
    pub grid: Grid,
}

fn clamp_w(w: f64, hi: f64) -> f64 {
    w.clamp(-hi, hi)
}

/// Extremal points of the cubic Hermite interpolant of `w` over one step,
/// in path order, including both ends.
fn hermite_path(w0: f64, w1: f64, m0: f64, m1: f64) -> Vec<f64> {
    // p(s) = h00 w0 + h10 m0 + h01 w1 + h11 m1, s in [0, 1]
    let p = |s: f64| {
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * w0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * w1
            + (s3 - s2) * m1
    };
    // p'(s) = a s^2 + b s + c
    let a = 6.0 * w0 + 3.0 * m0 - 6.0 * w1 + 3.0 * m1;
    let b = -6.0 * w0 - 4.0 * m0 + 6.0 * w1 - 2.0 * m1;
    let c = m0;
    let mut roots = Vec::new();
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale > 0.0 {
        if a.abs() <= 1e-14 * scale {
            if b != 0.0 {
                roots.push(-c / b);
            }
        } else {
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let q = -0.5 * (b + b.signum() * disc.sqrt());
                if q != 0.0 {
                    roots.push(q / a);
                    roots.push(c / q);
                } else {
                    roots.push(0.0);
                }
            }
        }
    }
    roots.retain(|s| *s > 0.0 && *s < 1.0);
    roots.sort_by(|x, y| x.total_cmp(y));
    let mut path = vec![w0];
    for s in roots {
        path.push(p(s));
    }
    path.push(w1);
    path
}

impl Simulation {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let grid = params.grid()?;
        Ok(Simulation { params, grid })
    }

    pub fn init(&self, data: &InitialData) -> Result<SystemState> {
        let g = &self.grid;
        let d = self.params.domain;
        if data.u0.len() != g.len() {
            return Err(Error::InitialData(format!(
                "profile has {} cells, grid has {}",
                data.u0.len(),
                g.len()
            )));
        }
        if let Some((i, v)) = data.u0.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::InitialData(format!(
                "negative or invalid density {v} in cell {i}"
            )));
        }
        let mass = g.mass(&data.u0);
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::InitialData(format!("initial mass {mass} is not 1")));
        }
        if !(data.v0 >= 0.0) {
            return Err(Error::InitialData(format!("v0 = {} must be >= 0", data.v0)));
        }
        if !(data.w0.abs() <= d.hi) {
            return Err(Error::InitialData(format!(
                "|w0| = {} exceeds hi = {}",
                data.w0.abs(),
                d.hi
            )));
        }
        data.r0
            .validate()
            .map_err(|e| Error::InitialData(e.to_string()))?;
        if (data.r0.lo - d.lo).abs() > 1e-15 || (data.r0.hi - d.hi).abs() > 1e-15 {
            return Err(Error::InitialData("r0 lives on a different interval".into()));
        }
        if let Some(eps) = data.eps {
            for (i, f) in g.faces.windows(2).enumerate() {
                if f[1] <= d.hi - eps && data.u0[i] > eps {
                    return Err(Error::InitialData(format!(
                        "u0 = {} exceeds eps = {eps} at x = {}",
                        data.u0[i], g.centers[i]
                    )));
                }
            }
        }
        Ok(SystemState {
            t: 0.0,
            u: data.u0.clone(),
            v: data.v0,
            w: data.w0,
            cfg: data.r0.clone(),
            steps: 0,
        })
    }

    /// `Ubar` and the tail-mass function of the current profile.
    pub fn mass_functions<'a>(&'a self, state: &'a SystemState) -> (f64, CellMass<'a>) {
        let m = CellMass::new(&self.grid, &state.u);
        (m.total(), m)
    }

    pub fn diffusion_substep(&self, u: &[f64], dt: f64) -> Vec<f64> {
        diffusion::crank_nicolson(&self.grid, u, self.params.diffusivity, dt)
    }

    fn diffuse(&self, u: &[f64], dt: f64, smooth: bool) -> Vec<f64> {
        if smooth {
            let d = self.params.diffusivity;
            let h = diffusion::implicit_euler(&self.grid, u, d, 0.5 * dt);
            diffusion::implicit_euler(&self.grid, &h, d, 0.5 * dt)
        } else {
            self.diffusion_substep(u, dt)
        }
    }

    /// Right-hand side with the relay state reached from `cfg0` along the
    /// monotone path `w0 -> w`.
    #[allow(clippy::too_many_arguments)]
    fn rhs(
        &self,
        cfg0: &SimpleConfig,
        w0: f64,
        u: &[f64],
        v: f64,
        w: f64,
        rbar: &mut [f64],
        du: &mut [f64],
    ) -> Result<(f64, f64)> {
        let hi = self.params.domain.hi;
        let cfg = config_update(cfg0, MonotoneSegment::new(clamp_w(w0, hi), clamp_w(w, hi)))?.0;
        cfg.fill_cell_means(&self.grid.faces, rbar);
        let h = &self.grid.widths;
        let mut p = 0.0;
        let mut ubar = 0.0;
        for i in 0..u.len() {
            let m = h[i] * u[i];
            ubar += m;
            p += m * rbar[i];
            du[i] = (0.5 + w * rbar[i]) * v * u[i];
        }
        let dv = -(0.5 * ubar + w * p) * v;
        let dw = -(0.5 + w) * (0.5 - w) * p;
        Ok((dv, dw))
    }

    /// Classical RK4 on `(u, v, w)` from `state`, starting from profile `u`.
    pub fn reaction_substep(&self, state: &SystemState, dt: f64) -> Result<ReactionResult> {
        self.reaction_from(&state.cfg, &state.u, state.v, state.w, dt)
    }

    fn reaction_from(
        &self,
        cfg0: &SimpleConfig,
        u: &[f64],
        v: f64,
        w: f64,
        dt: f64,
    ) -> Result<ReactionResult> {
        let n = u.len();
        let mut rbar = vec![0.0; n];
        let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut kv = [0.0; 4];
        let mut kw = [0.0; 4];
        let mut tmp = vec![0.0; n];
        let (dv, dw) = self.rhs(cfg0, w, u, v, w, &mut rbar, &mut k[0])?;
        kv[0] = dv;
        kw[0] = dw;
        for s in 1..4 {
            let c = if s == 3 { dt } else { 0.5 * dt };
            let (prev, rest) = k.split_at_mut(s);
            for i in 0..n {
                tmp[i] = u[i] + c * prev[s - 1][i];
            }
            let (dv, dw) = self.rhs(
                cfg0,
                w,
                &tmp,
                v + c * kv[s - 1],
                w + c * kw[s - 1],
                &mut rbar,
                &mut rest[0],
            )?;
            kv[s] = dv;
            kw[s] = dw;
        }
        let u1: Vec<f64> = (0..n)
            .map(|i| u[i] + dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]))
            .collect();
        let v1 = v + dt / 6.0 * (kv[0] + 2.0 * kv[1] + 2.0 * kv[2] + kv[3]);
        let w1 = w + dt / 6.0 * (kw[0] + 2.0 * kw[1] + 2.0 * kw[2] + kw[3]);
        let (_, wdot_end) = self.rhs(cfg0, w, &u1, v1, w1, &mut rbar, &mut tmp)?;
        Ok(ReactionResult {
            u: u1,
            v: v1,
            w: w1,
            wdot_start: kw[0],
            wdot_end,
        })
    }

    /// One Strang step of length `dt` without localization.
    fn trial(&self, state: &SystemState, dt: f64) -> Result<Trial> {
        let hi = self.params.domain.hi;
        let smooth = state.steps < self.params.smoothing_steps;
        let u_half = self.diffuse(&state.u, 0.5 * dt, smooth);
        let r = self.reaction_from(&state.cfg, &u_half, state.v, state.w, dt)?;
        let u_end = self.diffuse(&r.u, 0.5 * dt, smooth);

        let path = hermite_path(state.w, r.w, dt * r.wdot_start, dt * r.wdot_end);
        let path: Vec<f64> = path.into_iter().map(|w| clamp_w(w, hi)).collect();
        let cfg0 = &state.cfg;
        let dir0 = r.wdot_start.signum();
        let sliding = r.wdot_start != 0.0
            && cfg0
                .leftmost()
                .is_some_and(|f1| cfg0.lowest_sign().value() == dir0 && dir0 * state.w >= f1);

        // total variation of the path from `q` (inside piece j) to the end
        let tv_after = |j: usize, q: f64| -> f64 {
            (path[j + 1] - q).abs() + path[j + 1..].windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>()
        };

        let mut cfg = cfg0.clone();
        let mut switch: Vec<(SwitchEvent, f64)> = Vec::new();
        let mut first: Option<PathEvent> = None;
        let mut slide_stop: Option<f64> = None;
        for j in 0..path.len() - 1 {
            let (a, b) = (path[j], path[j + 1]);
            let dir = (b - a).signum();
            let (next, ev) = config_update(&cfg, MonotoneSegment::new(a, b))?;
            let piece_sliding = j == 0 && sliding;
            for e in ev {
                let q = match e {
                    SwitchEvent::Birth { .. } => Some(dir * cfg.lo),
                    SwitchEvent::Collision { position } => Some(dir * position),
                    SwitchEvent::Slide { from, .. } if !piece_sliding => Some(dir * from),
                    SwitchEvent::Slide { .. } => None,
                    SwitchEvent::Exit { .. } => Some(dir * cfg.hi),
                };
                if let (Some(q), None) = (q, first) {
                    first = Some(PathEvent {
                        overshoot: tv_after(j, q),
                    });
                }
                switch.push((e, b));
            }
            if piece_sliding && path.len() > 2 {
                slide_stop = Some(b.abs());
                if first.is_none() {
                    first = Some(PathEvent {
                        overshoot: tv_after(j, b),
                    });
                }
            }
            cfg = next;
        }

        let t1 = state.t + dt;
        let new_state = SystemState {
            t: t1,
            u: u_end,
            v: r.v,
            w: r.w,
            cfg,
            steps: state.steps + 1,
        };
        // the input was dragging the front and now turns back at a step boundary
        let detached = !sliding
            && dir0 != 0.0
            && cfg0.leftmost().is_some_and(|f1| {
                let s = cfg0.lowest_sign().value();
                s * state.w == f1 && dir0 == -s
            });
        let mut events = Vec::new();
        if detached {
            let m = CellMass::new(&self.grid, &state.u);
            events.push(LoggedEvent {
                kind: EventKind::SlideStop,
                t: state.t,
                position: state.w.abs(),
                u_ratio: m.at(state.w.abs()) / m.total(),
                w: state.w,
            });
        }
        if first.is_some() {
            let m = CellMass::new(&self.grid, &new_state.u);
            let ubar = m.total();
            let ratio_at = |x: f64| m.at(x) / ubar;
            let leftmost_after = new_state.cfg.leftmost().unwrap_or(hi);
            for (e, w_at) in &switch {
                let (kind, position) = match *e {
                    SwitchEvent::Birth { position } => (EventKind::Birth, position),
                    SwitchEvent::Collision { position } => (EventKind::Collision, position),
                    SwitchEvent::Slide { from, .. } if !sliding && from != state.cfg.lo => {
                        (EventKind::SlideStart, from)
                    }
                    SwitchEvent::Slide { .. } => continue,
                    SwitchEvent::Exit { from } => (EventKind::Exit, from),
                };
                let u_ratio = match kind {
                    EventKind::Collision => ratio_at(leftmost_after),
                    _ => ratio_at(position),
                };
                events.push(LoggedEvent {
                    kind,
                    t: t1,
                    position,
                    u_ratio,
                    w: *w_at,
                });
            }
            if let Some(pos) = slide_stop {
                events.push(LoggedEvent {
                    kind: EventKind::SlideStop,
                    t: t1,
                    position: pos,
                    u_ratio: ratio_at(pos),
                    w: r.w,
                });
            }
        }
        Ok(Trial {
            state: new_state,
            events,
            first_event: first,
        })
    }

    /// Strang step with event localization. The returned step may be shorter
    /// than `dt` when an event had to be localized.
    pub fn step(&self, state: &SystemState, dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0) {
            return Err(Error::Integration(format!(
                "step size must be positive, got {dt}"
            )));
        }
        let tol = self.params.tol_event;
        let tr = self.trial(state, dt)?;
        let done = |tr: Trial, h: f64, shortened: bool| StepOutcome {
            state: tr.state,
            dt: h,
            events: tr.events,
            shortened,
        };
        match tr.first_event {
            None => return Ok(done(tr, dt, false)),
            Some(e) if e.overshoot <= tol => return Ok(done(tr, dt, false)),
            _ => {}
        }
        let (mut lo, mut hi) = (0.0, dt);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            let tr = self.trial(state, mid)?;
            match tr.first_event {
                None => lo = mid,
                Some(e) if e.overshoot <= tol => return Ok(done(tr, mid, true)),
                Some(_) => hi = mid,
            }
        }
        Err(Error::Integration(format!(
            "event localization did not converge at t = {} (bracket [{lo}, {hi}])",
            state.t
        )))
    }

    /// Step-size cap from the sliding stiffness and the growth rate.
    fn dt_cap(&self, state: &SystemState) -> f64 {
        let mut cap = self.params.dt_max;
        if state.v > 0.0 {
            cap = cap.min(0.2 / state.v);
        }
        if let Some(f1) = state.cfg.leftmost() {
            let i = self.grid.cell_of(f1);
            let f = (0.5 + state.w) * (0.5 - state.w);
            let lambda = 2.0 * f * state.u[i].abs();
            if lambda > 0.0 {
                cap = cap.min(1.5 / lambda);
            }
        }
        cap
    }

    /// Integrates from `data` until the stop rule fires.
    pub fn run(&self, data: &InitialData, opts: &RunOptions) -> Result<TimeSeries> {
        let mut state = self.init(data)?;
        let meta = ScenarioMeta {
            domain: self.params.domain,
            diffusivity: self.params.diffusivity,
            kind: data.kind,
            eps: data.eps,
            v0: data.v0,
            w0: data.w0,
            r0: data.r0.clone(),
            v_min: opts.v_min,
        };
        let mut series = TimeSeries::new(meta, self.grid.faces.clone(), opts.probes.clone());
        let mut monitor = series::Monitor::new(&self.params, &state, self.grid.mass(&state.u));
        series.push_record(self.record(&state, opts, true));

        let t_max = opts.stop.t_max();
        let mut dt = self.params.dt_init;
        let mut next_record = opts.cadence;
        let mut next_snapshot = opts.snapshot_cadence.unwrap_or(f64::INFINITY);
        let mut exact: Vec<f64> = opts.snapshot_times.iter().copied().filter(|&t| t > 0.0).collect();
        exact.sort_by(|a, b| b.total_cmp(a));
        exact.dedup();
        let mut quiet_steps = 0u64;
        let stop_reason;
        loop {
            if state.t >= t_max * (1.0 - 1e-14) {
                stop_reason = "horizon".to_string();
                break;
            }
            if series.steps >= opts.max_steps {
                stop_reason = "max_steps".to_string();
                break;
            }
            let mut h = dt.min(self.dt_cap(&state)).min(t_max - state.t);
            let mut clipped = false;
            if let Some(&te) = exact.last() {
                if te - state.t < h {
                    h = te - state.t;
                    clipped = true;
                }
            }
            let out = self.step(&state, h)?;
            let prev_front = state.cfg.leftmost();
            let prev_len = state.cfg.fronts.len();
            state = out.state;
            series.steps += 1;
            monitor.check(&self.grid, &state);
            dt = if out.shortened {
                0.5 * h
            } else if clipped {
                dt
            } else {
                (1.2 * h).min(self.params.dt_max)
            };

            let has_events = !out.events.is_empty();
            for e in out.events {
                series.events.push(e);
            }
            let mut snap = state.t >= next_snapshot;
            while exact.last().is_some_and(|&te| state.t >= te * (1.0 - 1e-14)) {
                exact.pop();
                snap = true;
            }
            if has_events || state.t >= next_record || snap {
                series.push_record(self.record(&state, opts, snap));
                while next_record <= state.t {
                    next_record += opts.cadence;
                }
                while next_snapshot <= state.t {
                    next_snapshot += opts.snapshot_cadence.unwrap_or(f64::INFINITY);
                }
            }

            match opts.stop {
                StopRule::NutrientBelow { v_min, .. } if state.v < v_min => {
                    stop_reason = "nutrient".to_string();
                    break;
                }
                StopRule::Quiescent { steps, tol, .. } => {
                    let moved = prev_len != state.cfg.fronts.len()
                        || match (prev_front, state.cfg.leftmost()) {
                            (Some(a), Some(b)) => (a - b).abs() > self.params.tol_event,
                            _ => false,
                        };
                    let (mn, mx) = state
                        .u
                        .iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
                            (a.min(x), b.max(x))
                        });
                    if has_events || moved || mx - mn >= tol {
                        quiet_steps = 0;
                    } else {
                        quiet_steps += 1;
                    }
                    if quiet_steps >= steps {
                        stop_reason = "quiescent".to_string();
                        break;
                    }
                }
                _ => {}
            }
        }
        let last_t = series.records.last().map(|r| r.t);
        if last_t != Some(state.t) {
            series.push_record(self.record(&state, opts, true));
        } else if let Some(r) = series.records.last_mut() {
            r.u = Some(state.u.clone());
        }
        series.monitor = monitor.finish(&self.grid, &state);
        series.stop_reason = stop_reason;
        Ok(series)
    }

    fn record(&self, state: &SystemState, opts: &RunOptions, snapshot: bool) -> Record {
        let m = CellMass::new(&self.grid, &state.u);
        Record {
            t: state.t,
            v: state.v,
            w: state.w,
            u_bar: m.total(),
            cfg: state.cfg.clone(),
            probes: opts.probes.iter().map(|&x| m.at(x)).collect(),
            u: if snapshot { Some(state.u.clone()) } else { None },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hysteresis::RelaySign;

    fn params(d: f64, n: usize) -> ModelParams {
        let mut p = ModelParams::new(ThresholdDomain::new(0.05, 0.25).unwrap(), d);
        p.grid_n = n;
        p
    }

    fn all_plus() -> SimpleConfig {
        SimpleConfig::uniform(0.05, 0.25, RelaySign::Plus)
    }

    #[test]
    fn hermite_path_finds_turning_point() {
        // w(s) = s(1 - s): w0 = 0, w1 = 0, slopes +1, -1
        let p = hermite_path(0.0, 0.0, 1.0, -1.0);
        assert_eq!(p.len(), 3);
        assert!((p[1] - 0.25).abs() < 1e-15);
        assert_eq!(hermite_path(0.0, 1.0, 1.0, 1.0).len(), 2);
    }

    #[test]
    fn uniform_without_nutrient_is_stationary_in_u() {
        let sim = Simulation::new(params(1e-3, 200)).unwrap();
        let cfg = SimpleConfig::new(0.05, 0.25, vec![0.15], RelaySign::Plus).unwrap();
        let data = InitialData::uniform(&sim.grid, 0.0, 0.0, cfg.clone());
        let s0 = sim.init(&data).unwrap();
        let out = sim.step(&s0, 0.01).unwrap();
        assert!(out.state.u.iter().all(|&v| (v - 5.0).abs() < 1e-12));
        assert_eq!(out.state.cfg, cfg);
        assert!(out.state.w.abs() < 1e-15);
    }

    #[test]
    fn init_rejects_bad_data() {
        let sim = Simulation::new(params(1e-3, 200)).unwrap();
        let mut data = InitialData::uniform(&sim.grid, 0.0, 0.0, all_plus());
        data.u0[3] = -1.0;
        assert!(matches!(sim.init(&data), Err(Error::InitialData(_))));
        let mut data = InitialData::uniform(&sim.grid, 0.0, 0.0, all_plus());
        data.u0[3] *= 2.0;
        assert!(sim.init(&data).is_err());
        let data = InitialData::uniform(&sim.grid, 0.0, 0.3, all_plus());
        assert!(sim.init(&data).is_err());
        let bump = InitialData::bump(&sim.grid, 0.01, 0.0, 0.0, all_plus()).unwrap();
        assert!((sim.grid.mass(&bump.u0) - 1.0).abs() < 1e-14);
        assert!(sim.init(&bump).is_ok());
    }

    #[test]
    fn rhs_examples() {
        let sim = Simulation::new(params(1e-3, 200)).unwrap();
        let data = InitialData::uniform(&sim.grid, 0.0, 0.0, all_plus());
        let s = sim.init(&data).unwrap();
        let n = s.u.len();
        let (mut rb, mut du) = (vec![0.0; n], vec![0.0; n]);
        let (_, dw) = sim.rhs(&s.cfg, 0.0, &s.u, 0.0, 0.0, &mut rb, &mut du).unwrap();
        assert!((dw + 0.25).abs() < 1e-14);
        let half = SimpleConfig::new(0.05, 0.25, vec![0.15], RelaySign::Minus).unwrap();
        let (_, dw) = sim.rhs(&half, 0.1, &s.u, 1.0, 0.1, &mut rb, &mut du).unwrap();
        assert!(dw.abs() < 1e-14);
    }

    #[test]
    fn nutrient_split_examples() {
        let mut s = SystemState {
            t: 0.0,
            u: vec![],
            v: 1.0,
            w: 0.0,
            cfg: all_plus(),
            steps: 0,
        };
        assert_eq!(nutrient_split(&s), (0.5, 0.5));
        s.w = 0.25;
        assert_eq!(nutrient_split(&s), (0.75, 0.25));
    }

    #[test]
    fn rising_input_slides_the_front() {
        // mass on the minus side pushes w up through the leftmost front
        let sim = Simulation::new(params(1e-3, 400)).unwrap();
        let cfg = SimpleConfig::new(0.05, 0.25, vec![0.1], RelaySign::Minus).unwrap();
        let data = InitialData::uniform(&sim.grid, 0.0, 0.05, cfg);
        let series = sim.run(&data, &RunOptions::horizon(3.0)).unwrap();
        let starts = series
            .events
            .iter()
            .filter(|e| e.kind == EventKind::SlideStart)
            .count();
        assert_eq!(starts, 1);
        let fronts: Vec<f64> = series.records.iter().filter_map(|r| r.cfg.leftmost()).collect();
        assert!(fronts.windows(2).all(|p| p[1] >= p[0]));
        assert!(fronts.last().unwrap() > &0.1);
        // sliding balances the two sides: P -> 0 means front at the median
        let last = series.records.last().unwrap();
        assert!((last.cfg.fronts[0] - 0.15).abs() < 1e-3, "{:?}", last.cfg);
    }
}
