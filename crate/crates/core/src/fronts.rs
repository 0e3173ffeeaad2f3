//! Front trajectories reconstructed from a run: births, collisions, the
//! collision mass inequality, immortality certificates and steady fronts.
//!
//! Fronts are ordered left to right. Only the leftmost one moves, and only
//! towards `hi`; a collision removes the two leftmost fronts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{EventKind, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Death {
    Collision {
        t: f64,
        position: f64,
    },
    /// Pushed through `hi`.
    Exit {
        t: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmortalCertificate {
    pub criterion: String,
    pub x_cut: f64,
    pub t_cut: f64,
    /// Last time covered by the run.
    pub horizon: f64,
    pub sup_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTrack {
    pub id: usize,
    pub birth_time: f64,
    pub trajectory: Vec<(f64, f64)>,
    pub death: Option<Death>,
    pub steady_since: Option<f64>,
    pub immortal_certificate: Option<ImmortalCertificate>,
}

impl FrontTrack {
    pub fn position_at(&self, t: f64) -> Option<f64> {
        if t < self.birth_time {
            return None;
        }
        if let Some(Death::Collision { t: td, .. } | Death::Exit { t: td }) = self.death {
            if t >= td {
                return None;
            }
        }
        let k = self.trajectory.partition_point(|p| p.0 <= t);
        k.checked_sub(1).map(|i| self.trajectory[i].1)
    }

    pub fn final_position(&self) -> f64 {
        self.trajectory.last().map_or(f64::NAN, |p| p.1)
    }

    pub fn is_alive(&self) -> bool {
        self.death.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t: f64,
    pub merged_front_ids: [usize; 2],
    pub new_leftmost: f64,
    #[serde(rename = "U_ratio")]
    pub u_ratio: f64,
}

/// Assigns every front of every snapshot to a track by replaying the event log.
pub fn track(series: &TimeSeries) -> Result<Vec<FrontTrack>> {
    let mut tracks: Vec<FrontTrack> = Vec::new();
    let Some(first) = series.records.first() else {
        return Ok(tracks);
    };
    // active track ids, leftmost first
    let mut active: Vec<usize> = Vec::new();
    for &f in &first.cfg.fronts {
        active.push(tracks.len());
        tracks.push(FrontTrack {
            id: tracks.len(),
            birth_time: first.t,
            trajectory: vec![(first.t, f)],
            death: None,
            steady_since: None,
            immortal_certificate: None,
        });
    }
    let mut ev = series.events.iter().peekable();
    while ev.peek().is_some_and(|e| e.t <= first.t) {
        ev.next();
    }
    for rec in &series.records[1..] {
        while let Some(e) = ev.next_if(|e| e.t <= rec.t) {
            match e.kind {
                EventKind::Birth => {
                    active.insert(0, tracks.len());
                    tracks.push(FrontTrack {
                        id: tracks.len(),
                        birth_time: e.t,
                        trajectory: vec![(e.t, e.position)],
                        death: None,
                        steady_since: None,
                        immortal_certificate: None,
                    });
                }
                EventKind::Collision => {
                    if active.len() < 2 {
                        return Err(Error::Structural(format!(
                            "collision at t = {} with {} active fronts",
                            e.t,
                            active.len()
                        )));
                    }
                    for id in active.drain(..2) {
                        tracks[id].death = Some(Death::Collision {
                            t: e.t,
                            position: e.position,
                        });
                        tracks[id].trajectory.push((e.t, e.position));
                    }
                }
                EventKind::Exit => {
                    if active.is_empty() {
                        return Err(Error::Structural(format!("exit at t = {} without fronts", e.t)));
                    }
                    let id = active.remove(0);
                    tracks[id].death = Some(Death::Exit { t: e.t });
                }
                EventKind::SlideStart | EventKind::SlideStop => {}
            }
        }
        if rec.cfg.fronts.len() != active.len() {
            return Err(Error::Structural(format!(
                "snapshot at t = {} has {} fronts but the event log implies {}",
                rec.t,
                rec.cfg.fronts.len(),
                active.len()
            )));
        }
        for (k, (&id, &x)) in active.iter().zip(&rec.cfg.fronts).enumerate() {
            let tr = &mut tracks[id];
            let last = tr.final_position();
            if x < last - 1e-12 || (k > 0 && x != last) {
                return Err(Error::Structural(format!(
                    "front {id} moved from {last} to {x} at t = {} (index {k})",
                    rec.t
                )));
            }
            if x != last || tr.trajectory.last().is_some_and(|p| p.0 < rec.t) && k == 0 {
                tr.trajectory.push((rec.t, x));
            }
        }
    }
    Ok(tracks)
}

/// Collision records with the ids of the two merged tracks.
pub fn collision_events(series: &TimeSeries, tracks: &[FrontTrack]) -> Vec<CollisionEvent> {
    series
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Collision)
        .map(|e| {
            let ids: Vec<usize> = tracks
                .iter()
                .filter(|t| matches!(t.death, Some(Death::Collision { t: td, .. }) if td == e.t))
                .map(|t| t.id)
                .collect();
            let after = series.records.partition_point(|r| r.t < e.t);
            let new_leftmost = series
                .records
                .get(after)
                .and_then(|r| r.cfg.leftmost())
                .unwrap_or(series.meta.domain.hi);
            CollisionEvent {
                t: e.t,
                merged_front_ids: [
                    ids.first().copied().unwrap_or(usize::MAX),
                    ids.get(1).copied().unwrap_or(usize::MAX),
                ],
                new_leftmost,
                u_ratio: e.u_ratio,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionCheck {
    pub pass: bool,
    pub bound: f64,
    pub witness: CollisionEvent,
}

/// At a collision the mass to the right of the new leftmost front is at
/// least half the total.
pub fn check_collision_lemma(ev: &CollisionEvent, tol: f64) -> CollisionCheck {
    let bound = 0.5 - tol;
    CollisionCheck {
        pass: ev.u_ratio >= bound,
        bound,
        witness: ev.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub certificate: ImmortalCertificate,
    pub certified: Vec<usize>,
}

/// Certifies every front in `[x_cut, hi)` at `t_cut` as immortal up to the
/// end of the run when `U(x_cut)/Ubar` stays below `1/2 - tol` afterwards.
/// Returns `None` when no record after `t_cut` carries `U` at `x_cut`.
pub fn certify_immortal(
    tracks: &[FrontTrack],
    series: &TimeSeries,
    x_cut: f64,
    t_cut: f64,
    tol: f64,
) -> Option<Certification> {
    let start = series.records.partition_point(|r| r.t < t_cut);
    let mut sup = f64::NEG_INFINITY;
    let mut seen = false;
    for i in start..series.records.len() {
        if let Some(q) = series.upper_ratio(i, x_cut) {
            sup = sup.max(q);
            seen = true;
        }
    }
    if !seen {
        return None;
    }
    let certificate = ImmortalCertificate {
        criterion: format!("sup U(x_cut)/Ubar < 1/2 - {tol}"),
        x_cut,
        t_cut,
        horizon: series.end_time(),
        sup_ratio: sup,
    };
    let certified = if sup < 0.5 - tol {
        tracks
            .iter()
            .filter(|t| t.position_at(t_cut).is_some_and(|x| x >= x_cut))
            .map(|t| t.id)
            .collect()
    } else {
        Vec::new()
    };
    Some(Certification {
        certificate,
        certified,
    })
}

/// Certificate with the earliest `t_cut` for which the ratio at `x_cut`
/// stays below `1/2 - tol` until the end of the run.
pub fn certify_from_probe(
    tracks: &[FrontTrack],
    series: &TimeSeries,
    x_cut: f64,
    tol: f64,
) -> Option<Certification> {
    let mut t_cut = None;
    for i in (0..series.records.len()).rev() {
        match series.upper_ratio(i, x_cut) {
            Some(q) if q < 0.5 - tol => t_cut = Some(series.records[i].t),
            Some(_) => break,
            None => {}
        }
    }
    certify_immortal(tracks, series, x_cut, t_cut?, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyFront {
    pub track_id: usize,
    pub t: f64,
    pub x: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SteadyReport {
    /// Ordered by the time they became steady.
    pub fronts: Vec<SteadyFront>,
    pub undetermined: Vec<usize>,
}

/// Fronts that stop moving for good. A front is steady from the first time
/// after which its position stays within `rel_tol·√D` of the final value and
/// the input never touches it again. Needs `v < v_min` at the end of the run;
/// otherwise every live front is undetermined.
pub fn steady_fronts(tracks: &[FrontTrack], series: &TimeSeries, rel_tol: f64) -> SteadyReport {
    let band = rel_tol * series.meta.diffusivity.sqrt();
    let mut report = SteadyReport::default();
    let Some(last) = series.records.last() else {
        return report;
    };
    let settled = last.v < series.meta.v_min;
    for tr in tracks.iter().filter(|t| t.is_alive()) {
        let x_final = tr.final_position();
        let attached_at_end = last.cfg.leftmost() == Some(x_final) && last.w.abs() >= x_final - ATTACH_TOL;
        if !settled || attached_at_end {
            report.undetermined.push(tr.id);
            continue;
        }
        let k = tr
            .trajectory
            .iter()
            .rposition(|p| (p.1 - x_final).abs() > band)
            .map_or(0, |i| i + 1);
        let stops: Vec<f64> = series
            .events
            .iter()
            .filter(|e| {
                e.kind == EventKind::SlideStop && e.t >= tr.birth_time && (e.position - x_final).abs() <= band
            })
            .map(|e| e.t)
            .collect();
        // reversals are localized between records
        let entry = if k == 0 {
            tr.birth_time
        } else {
            let prev = tr.trajectory[k - 1].0;
            stops
                .iter()
                .copied()
                .filter(|&t| t > prev)
                .fold(tr.trajectory[k].0, f64::min)
        };
        let last_touch = series
            .records
            .iter()
            .rev()
            .find(|r| {
                let x = tr.position_at(r.t);
                x.is_some() && r.cfg.leftmost() == x && r.w.abs() >= x.unwrap_or(0.0) - ATTACH_TOL
            })
            .map_or(tr.birth_time, |r| r.t);
        let last_stop = stops.iter().copied().fold(last_touch, f64::max);
        report.fronts.push(SteadyFront {
            track_id: tr.id,
            t: entry.max(last_stop),
            x: x_final,
        });
    }
    report.fronts.sort_by(|a, b| a.t.total_cmp(&b.t));
    report
}

const ATTACH_TOL: f64 = 1e-10;

/// Copies steady times and immortality certificates onto the tracks.
pub fn annotate(tracks: &mut [FrontTrack], steady: &SteadyReport, cert: Option<&Certification>) {
    for f in &steady.fronts {
        if let Some(t) = tracks.iter_mut().find(|t| t.id == f.track_id) {
            t.steady_since = Some(f.t);
        }
    }
    if let Some(c) = cert {
        for id in &c.certified {
            if let Some(t) = tracks.iter_mut().find(|t| t.id == *id) {
                t.immortal_certificate = Some(c.certificate.clone());
            }
        }
    }
}
