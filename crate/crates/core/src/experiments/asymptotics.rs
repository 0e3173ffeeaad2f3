//! Steady-front times and depths over a sweep of diffusivities, compared
//! with the reference table for `hi = 1/4`.

use serde::{Deserialize, Serialize};

use super::scenarios;
use crate::error::{Error, Result};
use crate::fronts::{self, SteadyReport};
use crate::hysteresis::sign_changes_in;
use crate::solver::TimeSeries;

/// Reference `(s_n, y_n, q_n/√D)` for `hi = 1/4`.
pub const REFERENCE: [(f64, f64, f64); 6] = [
    (2.2, 0.48, 1.4),
    (9.1, 0.83, 5.0),
    (24.0, 1.07, 10.5),
    (53.3, 1.26, 18.4),
    (108.4, 1.42, 29.6),
    (209.4, 1.57, 45.4),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsConfig {
    #[serde(rename = "D_list")]
    pub d_list: Vec<f64>,
    #[serde(default = "default_fronts")]
    pub n_fronts: usize,
    /// Horizon; defaults to `max(30, 1.25 s_n)`.
    #[serde(rename = "T", default)]
    pub t_end: Option<f64>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_fronts() -> usize {
    3
}
fn default_rel_tol() -> f64 {
    1e-2
}

impl AsymptoticsConfig {
    pub fn new(d_list: Vec<f64>) -> Self {
        AsymptoticsConfig {
            d_list,
            n_fronts: 3,
            t_end: None,
            rel_tol: 1e-2,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.t_end.unwrap_or_else(|| {
            let s = REFERENCE[self.n_fronts.clamp(1, REFERENCE.len()) - 1].0;
            (1.25 * s).max(30.0)
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_list.is_empty() || self.d_list.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::Config("D_list needs positive entries".into()));
        }
        if self.n_fronts == 0 || self.n_fronts > REFERENCE.len() {
            return Err(Error::Config(format!(
                "n_fronts must be in 1..={}",
                REFERENCE.len()
            )));
        }
        if !(self.horizon() > 0.0) || !(self.rel_tol > 0.0) {
            return Err(Error::Config("T and rel_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsRow {
    #[serde(rename = "D")]
    pub d: f64,
    pub n: usize,
    pub t_n: Option<f64>,
    pub q_n: Option<f64>,
    pub y_hat_n: Option<f64>,
    /// `|t_n - s_n|/s_n`.
    pub err_t: Option<f64>,
    /// `|q_n/√D - q̂_n|/q̂_n`.
    pub err_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    /// Per `D` in sweep order: largest relative error over all rows, or
    /// `None` when a row is missing.
    pub max_error: Vec<Option<f64>>,
    /// Whether `max_error` is non-increasing along decreasing `D`.
    pub max_error_monotone: bool,
    /// Per `n`: whether each of `err_t`, `err_q` is non-increasing.
    pub per_front_monotone: Vec<(bool, bool)>,
    /// `t_n` and `q_n` strictly increasing in `n` for every `D`.
    pub ordered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsTable {
    pub rows: Vec<AsymptoticsRow>,
    pub trend: Trend,
}

pub struct AsymptoticsRun {
    pub d: f64,
    pub series: TimeSeries,
    pub steady: SteadyReport,
}

fn rows_for(d: f64, steady: &SteadyReport, n_fronts: usize) -> Vec<AsymptoticsRow> {
    let hi = scenarios::REF_HI;
    (1..=n_fronts)
        .map(|n| {
            let f = steady.fronts.get(n - 1);
            let (s, _, qhat) = REFERENCE[n - 1];
            let t_n = f.map(|f| f.t);
            let q_n = f.map(|f| hi - f.x);
            AsymptoticsRow {
                d,
                n,
                t_n,
                q_n,
                y_hat_n: f.map(|f| (hi - f.x) / (2.0 * (d * f.t).sqrt())),
                err_t: t_n.map(|t| (t - s).abs() / s),
                err_q: q_n.map(|q| (q / d.sqrt() - qhat).abs() / qhat),
            }
        })
        .collect()
}

fn non_increasing(v: &[Option<f64>]) -> bool {
    v.iter().all(Option::is_some) && v.windows(2).all(|p| p[1].unwrap() <= p[0].unwrap())
}

fn trend(rows: &[AsymptoticsRow], d_list: &[f64], n_fronts: usize) -> Trend {
    // sweep order by decreasing D
    let mut ds = d_list.to_vec();
    ds.sort_by(|a, b| b.total_cmp(a));
    let by = |d: f64| rows.iter().filter(move |r| r.d == d);
    let max_error: Vec<Option<f64>> = ds
        .iter()
        .map(|&d| by(d).try_fold(0.0f64, |m, r| Some(m.max(r.err_t?).max(r.err_q?))))
        .collect();
    let per_front_monotone = (1..=n_fronts)
        .map(|n| {
            let pick = |f: fn(&AsymptoticsRow) -> Option<f64>| -> Vec<Option<f64>> {
                ds.iter().map(|&d| by(d).find(|r| r.n == n).and_then(f)).collect()
            };
            (
                non_increasing(&pick(|r| r.err_t)),
                non_increasing(&pick(|r| r.err_q)),
            )
        })
        .collect();
    let ordered = ds.iter().all(|&d| {
        let v: Vec<&AsymptoticsRow> = by(d).collect();
        v.windows(2)
            .all(|p| match (p[0].t_n, p[1].t_n, p[0].q_n, p[1].q_n) {
                (Some(a), Some(b), Some(qa), Some(qb)) => a < b && qa < qb,
                _ => true,
            })
    });
    Trend {
        max_error_monotone: non_increasing(&max_error),
        max_error,
        per_front_monotone,
        ordered,
    }
}

/// Runs the concentrated-start scenario for every `D` and extracts the
/// first `n_fronts` steady fronts.
pub fn asymptotics_experiment(cfg: &AsymptoticsConfig) -> Result<(AsymptoticsTable, Vec<AsymptoticsRun>)> {
    cfg.validate()?;
    let t_end = cfg.horizon();
    let runs = crate::par::map(&cfg.d_list, |&d| -> Result<AsymptoticsRun> {
        let sc = scenarios::concentrated(d, t_end)?;
        let series = sc.sim.run(&sc.data, &sc.opts)?;
        let tracks = fronts::track(&series)?;
        let steady = fronts::steady_fronts(&tracks, &series, cfg.rel_tol);
        Ok(AsymptoticsRun { d, series, steady })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let rows: Vec<AsymptoticsRow> = runs
        .iter()
        .flat_map(|r| rows_for(r.d, &r.steady, cfg.n_fronts))
        .collect();
    let trend = trend(&rows, &cfg.d_list, cfg.n_fronts);
    Ok((AsymptoticsTable { rows, trend }, runs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastReport {
    #[serde(rename = "D")]
    pub d: f64,
    pub t_ref: f64,
    /// Width `2√(D t_ref)·1.5` of the window below `hi`.
    pub window: f64,
    pub v0_small: f64,
    pub v0_large: f64,
    pub horizon: f64,
    pub t_small: Option<f64>,
    pub t_large: Option<f64>,
    /// `t_large / t_small`; a lower bound `horizon / t_small` when the
    /// large-nutrient run never shows a sign change.
    pub ratio: Option<f64>,
}

/// First time a sign change appears within the window below `hi`, for a
/// small and a large initial nutrient, from the same concentrated start.
pub fn time_scale_contrast(
    d: f64,
    v0_small: f64,
    v0_large: f64,
    t_ref: f64,
    horizon: f64,
) -> Result<ContrastReport> {
    let hi = scenarios::REF_HI;
    let window = 2.0 * (d * t_ref).sqrt() * 1.5;
    let cut = hi - window;
    let first = |v0: f64| -> Result<Option<f64>> {
        let sc = scenarios::short_time(d, v0, horizon, vec![cut])?;
        let s = sc.sim.run(&sc.data, &sc.opts)?;
        Ok(s.records
            .iter()
            .find(|r| sign_changes_in(&r.cfg, cut) >= 1)
            .map(|r| r.t))
    };
    let v0s = [v0_small, v0_large];
    let det = crate::par::map(&v0s, |&v| first(v))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let ratio = match (det[0], det[1]) {
        (Some(a), Some(b)) => Some(b / a),
        (Some(a), None) => Some(horizon / a),
        _ => None,
    };
    Ok(ContrastReport {
        d,
        t_ref,
        window,
        v0_small,
        v0_large,
        horizon,
        t_small: det[0],
        t_large: det[1],
        ratio,
    })
}
